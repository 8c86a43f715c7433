#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hrg {

struct CheckResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
    double budget = 0.0; ///< seconds; exceeding it fails the check
};

/// The oracle suite, one result per acceptance criterion 1..11. quick shrinks the problem sizes and
/// skips the long dynamics runs (reported in the detail); full runs the acceptance sizes. A nonempty
/// only restricts the run to those criteria.
std::vector<CheckResult> run_validation(bool full, std::ostream* log = nullptr, const std::vector<int>& only = {});

/// "[PASS] 3 one-step RG ... (12.3 s): detail"
std::string format_check(const CheckResult& r);

} // namespace hrg
