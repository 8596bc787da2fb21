#pragma once

#include <stdexcept>
#include <string>

#include <torch/torch.h>

namespace udepth {

/// Raised when an argument violates a documented precondition.
class InvalidInput : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an input is well-formed but degenerate for the requested
/// statistic (constant map, zero median, empty selection).
class DegenerateInput : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) {
    throw InvalidInput(message);
  }
}

inline std::string shape_string(const torch::Tensor& t) {
  std::string s = "[";
  for (int64_t i = 0; i < t.dim(); ++i) {
    if (i > 0) {
      s += ",";
    }
    s += std::to_string(t.size(i));
  }
  return s + "]";
}

inline void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) {
    throw InvalidInput(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " +
                       shape_string(b));
  }
}

/// Images are [B,C,H,W]; single maps are [B,1,H,W].
inline void require_image(const torch::Tensor& t, const char* what) {
  if (!t.defined() || t.dim() != 4) {
    throw InvalidInput(std::string(what) + ": expected a [B,C,H,W] tensor");
  }
}

inline bool all_finite(const torch::Tensor& t) {
  return torch::isfinite(t).all().item<bool>();
}

}  // namespace udepth
