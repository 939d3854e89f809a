#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>

namespace c0ipm {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Small dense tensors with a fixed stride of 3 per index. Only the leading
/// `dim` entries of each index are meaningful; the rest stay zero.
struct Rank2 {
  std::array<double, 9> v{};
  double& operator()(int i, int j) { return v[static_cast<std::size_t>(3 * i + j)]; }
  double operator()(int i, int j) const { return v[static_cast<std::size_t>(3 * i + j)]; }
};

struct Rank3 {
  std::array<double, 27> v{};
  double& operator()(int i, int j, int k) { return v[static_cast<std::size_t>(9 * i + 3 * j + k)]; }
  double operator()(int i, int j, int k) const {
    return v[static_cast<std::size_t>(9 * i + 3 * j + k)];
  }
};

struct Rank4 {
  std::array<double, 81> v{};
  double& operator()(int i, int j, int k, int l) {
    return v[static_cast<std::size_t>(27 * i + 9 * j + 3 * k + l)];
  }
  double operator()(int i, int j, int k, int l) const {
    return v[static_cast<std::size_t>(27 * i + 9 * j + 3 * k + l)];
  }
};

}  // namespace c0ipm
