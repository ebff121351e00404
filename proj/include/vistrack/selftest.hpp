#pragma once

#include <ostream>
#include <string>

namespace vistrack {

struct SelftestOptions {
  double eps = 1e-5;
  std::string module;  // empty runs everything; else tensor|attention|detector|tracker
  bool corrupt_backward = false;  // negative-control hook used by the tests
};

// Gradient checks plus built-in oracle equivalences, one printed line per
// check. Returns true iff every check passed (max relative error < 1e-5,
// equivalences at their stated tolerances).
bool run_selftest(const SelftestOptions& options, std::ostream& out);

}  // namespace vistrack
