#pragma once

#include <string>
#include <vector>

namespace structhinf {

struct SelftestCase {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Quick oracle comparisons: norm against a frequency grid, subgradients against
/// finite differences, and the realization gates on the bundled fixtures.
std::vector<SelftestCase> run_selftest(unsigned seed = 1);

}  // namespace structhinf
