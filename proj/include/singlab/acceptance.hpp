#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace singlab {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  std::uint64_t seed = 20240521;
  int threads = 1;
  std::ostream* log = nullptr;  // progress messages
};

inline constexpr int kCriterionCount = 10;

CriterionResult run_criterion(int id, const AcceptanceOptions& options);
std::vector<CriterionResult> run_acceptance(const std::vector<int>& ids, const AcceptanceOptions& options);

/// "criterion <id> PASS|FAIL <title>: <detail> (<seconds> s)"
std::string format_result(const CriterionResult& r);

}  // namespace singlab
