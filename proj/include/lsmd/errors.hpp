#pragma once

#include <stdexcept>
#include <string>

namespace lsmd {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };
struct UnbalancedPanel : Error { using Error::Error; };
struct InvalidShare : Error { using Error::Error; };
struct NumericOverflow : Error { using Error::Error; };
struct CollinearDesign : Error { using Error::Error; };
struct SingularWeight : Error { using Error::Error; };
struct UnderIdentified : Error { using Error::Error; };
struct SingularG : Error { using Error::Error; };
struct InvalidMarket : Error { using Error::Error; };

// share inversion hit max_iter; carries the last contraction update norm
struct NoConvergence : Error {
  NoConvergence(const std::string& msg, double residual_)
      : Error(msg), residual(residual_) {}
  double residual;
};

// no start of the inner optimizer converged
struct NonConvergence : Error { using Error::Error; };

}  // namespace lsmd
