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

#include "viewalign/mulaw.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>

namespace viewalign {

double compand(double degrees, double mu) {
  const double x = std::abs(degrees) / kHalfRange;
  const double c = std::log1p(mu * x) / std::log1p(mu);
  return degrees < 0 ? -c : c;
}

double expand(double companded, double mu) {
  const double b = std::abs(companded);
  // (1 + mu)^b - 1 computed as expm1(b * ln(1 + mu)) for accuracy near 0.
  const double d = kHalfRange * std::expm1(b * std::log1p(mu)) / mu;
  return companded < 0 ? -d : d;
}

BinningScheme::BinningScheme(int n_bins, double mu) : n_bins_(n_bins), mu_(mu) {
  if (n_bins < 4 || n_bins % 2 != 0) {
    throw std::invalid_argument("BinningScheme: n_bins must be even and >= 4, got " +
                                std::to_string(n_bins));
  }
  if (!std::isfinite(mu) || mu <= 0.0) {
    throw std::invalid_argument("BinningScheme: mu must be finite and positive");
  }
  const int half = n_bins / 2;
  edges_.resize(static_cast<std::size_t>(n_bins) + 1);
  edges_[static_cast<std::size_t>(half)] = 0.0;
  for (int k = 1; k < half; ++k) {
    const double e = expand(static_cast<double>(k) / half, mu);
    edges_[static_cast<std::size_t>(half + k)] = e;
    edges_[static_cast<std::size_t>(half - k)] = -e;
  }
  edges_.front() = -kHalfRange;
  edges_.back() = kHalfRange;

  // Arithmetic midpoints keep |d - center| within half the bin width.
  centers_.resize(static_cast<std::size_t>(n_bins));
  for (std::size_t k = 0; k < centers_.size(); ++k) {
    centers_[k] = 0.5 * (edges_[k] + edges_[k + 1]);
  }
  for (std::size_t k = 0; k + 1 < edges_.size(); ++k) {
    if (!(edges_[k] < edges_[k + 1])) {
      throw std::invalid_argument("BinningScheme: mu too small for distinct bin edges");
    }
  }
}

int BinningScheme::quantize(double degrees) const {
  if (!(degrees > -kHalfRange) || !(degrees <= kHalfRange)) {
    throw std::invalid_argument("quantize: angle outside (-180, 180]");
  }
  // First edge strictly greater than d; bin is the one just below it.
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), degrees);
  const int k = static_cast<int>(it - edges_.begin()) - 1;
  return std::min(k, n_bins_ - 1);
}

double BinningScheme::dequantize(int k) const {
  if (k < 0 || k >= n_bins_) {
    throw std::out_of_range("dequantize: bin index " + std::to_string(k) + " out of range");
  }
  return centers_[static_cast<std::size_t>(k)];
}

void BinningScheme::write_csv(std::ostream& os) const {
  const auto flags = os.flags();
  const auto precision = os.precision();
  os << "index,lower_edge,center,upper_edge\n" << std::setprecision(17);
  for (int k = 0; k < n_bins_; ++k) {
    os << k << ',' << lower_edge(k) << ',' << dequantize(k) << ',' << upper_edge(k) << '\n';
  }
  os.flags(flags);
  os.precision(precision);
}

BinningScheme build_scheme(int n_bins, double mu) { return BinningScheme(n_bins, mu); }

}  // namespace viewalign
