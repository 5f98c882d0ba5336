// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace w2l {

/// Row-major dynamic matrix. Activations are laid out [frames x channels].
template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// All recoverable failures in the toolkit surface as this exception.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A transcript encoded as label indices (no blanks).
using LabelSeq = std::vector<int>;

}  // namespace w2l
