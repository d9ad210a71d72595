#pragma once

#include <string>
#include <vector>

namespace sperturb {

/// Outcome of one acceptance criterion.
struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;  ///< measured numbers / first failing cell
};

/// Runs the eleven acceptance criteria at desk scale and returns one result
/// per criterion (ordered by id). `jobs` = 0 picks the hardware concurrency.
/// Shared artifacts (the default b = f = 1 sweep) are computed once.
std::vector<CriterionResult> run_acceptance(int jobs = 0);

/// "PASS criterion  3: uniform-mesh non-robust baseline -- <detail>" line.
std::string criterion_line(const CriterionResult& r);

}  // namespace sperturb
