#pragma once

#include <stdexcept>
#include <string>

namespace rum {

// Malformed input: files, schema violations, bad parameters. CLI exit code 2.
struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical breakdown: LP failure, iteration caps, infeasible inner solves.
// CLI exit code 3.
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An exhaustive search would exceed its enumeration cap. The oracle fails
// loudly instead of silently sampling. CLI exit code 2.
struct cap_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A solver precondition failed because the market admits arbitrage
// (one-period sets unbounded). CLI exit code 1.
struct arbitrage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rum
