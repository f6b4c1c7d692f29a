#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace fedpd {

/// Dense model / dual / feature vector. Dimension is fixed per Problem.
using ModelVec = Eigen::VectorXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameters or problem/solver combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A local solver left the divergence guard region.
class SolverDiverged : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

inline bool all_finite(const ModelVec& v) { return v.allFinite(); }

// Throws NonFiniteError naming `what` if any entry is NaN/Inf.
void require_finite(const ModelVec& v, const char* what);
void require_dim(const ModelVec& v, std::size_t dim, const char* what);

}  // namespace fedpd
