#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pdsplit {

/// One acceptance criterion outcome.
struct CriterionResult {
  std::string id;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

enum class CertifySuite { All, Identities, Rates, Estimators, Infra };

CertifySuite certify_suite_from_name(const std::string& name);

/// Runs the acceptance criteria of the requested suite. Prints one pass/fail
/// line per criterion to `progress` as it goes (pass nullptr for silence).
std::vector<CriterionResult> run_certification(CertifySuite suite,
                                               std::ostream* progress);

/// True iff every criterion passed.
bool all_passed(const std::vector<CriterionResult>& results);

}  // namespace pdsplit
