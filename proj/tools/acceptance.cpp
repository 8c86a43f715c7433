#include "hrg/validation.hpp"

#include <cstdlib>
#include <iostream>

// Acceptance-size oracle suite; optional arguments select criteria by number.
int main(int argc, char** argv)
{
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    bool ok = true;
    for (const auto& r : hrg::run_validation(true, &std::cerr, only)) {
        std::cout << hrg::format_check(r) << std::endl;
        ok = ok && r.passed;
    }
    return ok ? 0 : 1;
}
