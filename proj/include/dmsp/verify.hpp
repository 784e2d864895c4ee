#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dmsp {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Mean-shift identity for both oracle priors (against the analytic score
/// and central differences), dot-product tests for every operator, and the
/// Jensen ordering of the two-level bound.
std::vector<SuiteResult> run_verify_suites(std::uint64_t seed);

SuiteResult verify_mean_shift_identity(std::uint64_t seed);
SuiteResult verify_adjoints(std::uint64_t seed);
SuiteResult verify_jensen_ordering(std::uint64_t seed);

}  // namespace dmsp
