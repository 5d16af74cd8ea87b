// Copyright 2026 The viewalign Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <span>
#include <vector>

namespace viewalign {

/// Non-owning view of an h x w grid of d-dimensional descriptors, row-major
/// with the descriptor innermost. No normalization is implied.
struct DescriptorView {
  int height = 0;
  int width = 0;
  int dimension = 0;
  std::span<const double> data;

  std::size_t cells() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  std::span<const double> cell(std::size_t flat) const {
    return data.subspan(flat * static_cast<std::size_t>(dimension),
                        static_cast<std::size_t>(dimension));
  }
};

/// h x w grid of unit-norm d-dimensional descriptors.
class FeatureMap {
 public:
  FeatureMap() = default;

  /// Normalizes every cell of `raw` (h * w * d values) to unit length. A
  /// cell with zero norm is rejected with std::invalid_argument.
  static FeatureMap normalized(int height, int width, int dimension, std::vector<double> raw);

  int height() const { return height_; }
  int width() const { return width_; }
  int dimension() const { return dimension_; }
  std::size_t cells() const {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }

  std::span<const double> cell(int row, int col) const {
    return view().cell(static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
                       static_cast<std::size_t>(col));
  }
  std::span<const double> cell(std::size_t flat) const { return view().cell(flat); }
  const std::vector<double>& data() const { return data_; }

  DescriptorView view() const { return {height_, width_, dimension_, data_}; }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  FeatureMap(int height, int width, int dimension, std::vector<double> data)
      : height_(height), width_(width), dimension_(dimension), data_(std::move(data)) {}

  int height_ = 0;
  int width_ = 0;
  int dimension_ = 0;
  std::vector<double> data_;
};

}  // namespace viewalign
