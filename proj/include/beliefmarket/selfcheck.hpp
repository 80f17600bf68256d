#pragma once

#include <string>
#include <vector>

namespace beliefmarket {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Seeded run of every module's invariant suite; backs the `verify` command.
std::vector<CheckResult> run_selfchecks(unsigned seed);

}  // namespace beliefmarket
