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

#include <iosfwd>
#include <vector>

namespace viewalign {

/// Largest representable angle difference; compand() maps it to 1.
inline constexpr double kHalfRange = 180.0;

/// mu-law companding of an angle difference, applied to x = d / 180:
///   sign(x) * ln(1 + mu |x|) / ln(1 + mu)
double compand(double degrees, double mu);

/// Exact inverse of compand():
///   180 * sign(c) * ((1 + mu)^|c| - 1) / mu
double expand(double companded, double mu);

/// Non-uniform bins over (-180, 180] whose edges are uniformly spaced in
/// the companded domain. Bin k is the half-open interval
/// [edges[k], edges[k+1]); the last bin also contains +180.
class BinningScheme {
 public:
  /// n_bins must be even and >= 4, mu finite and > 0.
  BinningScheme(int n_bins, double mu);

  int n_bins() const { return n_bins_; }
  double mu() const { return mu_; }
  double half_range() const { return kHalfRange; }

  const std::vector<double>& edges() const { return edges_; }
  const std::vector<double>& centers() const { return centers_; }

  double lower_edge(int k) const { return edges_.at(static_cast<std::size_t>(k)); }
  double upper_edge(int k) const { return edges_.at(static_cast<std::size_t>(k) + 1); }
  double width(int k) const { return upper_edge(k) - lower_edge(k); }
  double half_width(int k) const { return width(k) / 2.0; }

  /// Index of the bin holding d (degrees in (-180, 180]).
  int quantize(double degrees) const;

  /// Representative value of bin k. Throws std::out_of_range.
  double dequantize(int k) const;

  /// Index of the bin containing 0 (the first bin with a zero lower edge).
  int zero_bin() const { return n_bins_ / 2; }

  /// Half-width of the narrowest bin.
  double finest_half_width() const { return half_width(zero_bin()); }

  /// CSV table: index,lower_edge,center,upper_edge
  void write_csv(std::ostream& os) const;

 private:
  int n_bins_;
  double mu_;
  std::vector<double> edges_;
  std::vector<double> centers_;
};

BinningScheme build_scheme(int n_bins, double mu);

}  // namespace viewalign
