#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvt {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

/// Dense row-major matrix; the storage convention for all 2-D data.
using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<MatrixRM>;
using ConstMatMap = Eigen::Map<const MatrixRM>;

/// Shape mismatch between operands.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the documented domain of an operation.
class ValueError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Out-of-range index (e.g. a class label beyond the logit count).
class IndexError : public ValueError {
 public:
  using ValueError::ValueError;
};

/// Invalid or inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem / serialization failure; message names the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Index shape_product(const Shape& s) {
  Index n = 1;
  for (Index d : s) n *= d;
  return n;
}

std::string shape_to_string(const Shape& s);

/// Shortest decimal string that round-trips the value exactly; keeps
/// serialized numbers (metrics, config echoes) byte-deterministic.
std::string format_double(double v);

/// splitmix64 step; used to derive independent stream seeds from one root seed.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Worker cap for embarrassingly parallel sections: min(TVT_THREADS, hardware).
int worker_cap();

}  // namespace tvt
