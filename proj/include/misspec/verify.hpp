#pragma once

// The property suite behind the `verify` command: every closed-form oracle,
// transform, margin, testing-bound, geometry and cover check that runs in
// seconds. All checks are seeded and deterministic.

#include <cstdint>
#include <string>
#include <vector>

namespace misspec {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

std::vector<CheckResult> verify_suite(std::uint64_t seed);

} // namespace misspec
