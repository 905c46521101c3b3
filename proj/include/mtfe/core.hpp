#ifndef MTFE_CORE_HPP
#define MTFE_CORE_HPP

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mtfe {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Index = std::int32_t;

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgumentError : Error {
  using Error::Error;
};
struct UnsupportedError : Error {
  using Error::Error;
};
struct InternalError : Error {
  using Error::Error;
};
struct ConditioningError : Error {
  using Error::Error;
};
struct SolverFailure : Error {
  using Error::Error;
};
struct CordesViolation : Error {
  using Error::Error;
};
struct UnisolvenceFailure : Error {
  using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgumentError(msg);
}

inline void internal_check(bool cond, const std::string& msg) {
  if (!cond) throw InternalError(msg);
}

}  // namespace mtfe

#endif
