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

#include "viewalign/correspondence.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "viewalign/parallel.hpp"

namespace viewalign {
namespace {

// Targets processed together so each source descriptor is loaded once per block.
constexpr std::size_t kTargetBlock = 8;

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> bytes{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                  static_cast<char>((v >> 16) & 0xff),
                                  static_cast<char>((v >> 24) & 0xff)};
  os.write(bytes.data(), bytes.size());
}

std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> bytes{};
  if (!is.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw std::runtime_error("read_correlation: truncated stream");
  }
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

std::size_t sample_cell(const DescriptorView& map, const Point2& p, int stride) {
  const double col = std::floor(p.u / stride);
  const double row = std::floor(p.v / stride);
  if (!(col >= 0 && col < map.width && row >= 0 && row < map.height)) {
    throw std::invalid_argument("contrastive_loss: pair location outside the feature map");
  }
  return static_cast<std::size_t>(row) * static_cast<std::size_t>(map.width) +
         static_cast<std::size_t>(col);
}

void check_pairs(const DescriptorView& a, const DescriptorView& b,
                 std::span<const CorrespondencePair> pairs, double margin, int stride) {
  if (pairs.empty()) throw std::invalid_argument("contrastive_loss: no pairs");
  if (!(margin > 0.0)) throw std::invalid_argument("contrastive_loss: margin must be positive");
  if (stride < 1) throw std::invalid_argument("contrastive_loss: stride must be >= 1");
  if (a.dimension != b.dimension) {
    throw std::invalid_argument("contrastive_loss: descriptor dimensions differ");
  }
  for (const auto& p : pairs) {
    if (p.s != 0 && p.s != 1) throw std::invalid_argument("contrastive_loss: polarity must be 0 or 1");
  }
}

}  // namespace

FeatureMap FeatureMap::normalized(int height, int width, int dimension, std::vector<double> raw) {
  if (height <= 0 || width <= 0 || dimension <= 0) {
    throw std::invalid_argument("FeatureMap: shape must be positive");
  }
  const auto d = static_cast<std::size_t>(dimension);
  if (raw.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * d) {
    throw std::invalid_argument("FeatureMap: data size does not match shape");
  }
  for (std::size_t off = 0; off < raw.size(); off += d) {
    double norm = 0.0;
    for (std::size_t k = 0; k < d; ++k) norm += raw[off + k] * raw[off + k];
    norm = std::sqrt(norm);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw std::invalid_argument("FeatureMap: cell with zero or non-finite norm");
    }
    for (std::size_t k = 0; k < d; ++k) raw[off + k] /= norm;
  }
  return FeatureMap(height, width, dimension, std::move(raw));
}

CorrelationTensor::CorrelationTensor(int height, int width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("CorrelationTensor: bad shape");
  if (values_.size() != locations() * locations()) {
    throw std::invalid_argument("CorrelationTensor: value count does not match shape");
  }
}

CorrelationTensor CorrelationTensor::scaled(double factor) const {
  if (!(factor > 0.0)) throw std::invalid_argument("CorrelationTensor::scaled: factor must be > 0");
  std::vector<double> v = values_;
  for (auto& x : v) x *= factor;
  return CorrelationTensor(height_, width_, std::move(v));
}

namespace {

CorrelationTensor correlate_impl(const FeatureMap& source, const FeatureMap& target,
                                 const Mask* target_mask, int workers) {
  if (source.height() != target.height() || source.width() != target.width() ||
      source.dimension() != target.dimension()) {
    throw std::invalid_argument("correlate: feature maps differ in shape or dimension");
  }
  const std::size_t n = source.cells();
  const auto d = static_cast<std::size_t>(source.dimension());
  const double* src = source.data().data();
  const double* tgt = target.data().data();
  std::vector<double> values(n * n);
  double* out = values.data();

  const std::size_t blocks = (n + kTargetBlock - 1) / kTargetBlock;
  parallel_for(blocks, 4, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      const std::size_t t0 = b * kTargetBlock;
      const std::size_t t1 = std::min(n, t0 + kTargetBlock);
      for (std::size_t s = 0; s < n; ++s) {
        const double* fs = src + s * d;
        for (std::size_t t = t0; t < t1; ++t) {
          if (target_mask && !(*target_mask)[t]) continue;
          const double* ft = tgt + t * d;
          double dot = 0.0;
          for (std::size_t k = 0; k < d; ++k) dot += fs[k] * ft[k];
          out[t * n + s] = dot > 0.0 ? dot : 0.0;
        }
      }
      for (std::size_t t = t0; t < t1; ++t) {
        double* row = out + t * n;
        double sq = 0.0;
        for (std::size_t s = 0; s < n; ++s) sq += row[s] * row[s];
        if (sq > 0.0) {
          const double inv = 1.0 / std::sqrt(sq);
          for (std::size_t s = 0; s < n; ++s) row[s] *= inv;
        }
      }
    }
  }, workers);
  return CorrelationTensor(source.height(), source.width(), std::move(values));
}

}  // namespace

CorrelationTensor correlate(const FeatureMap& source, const FeatureMap& target, int workers) {
  return correlate_impl(source, target, nullptr, workers);
}

CorrelationTensor correlate(const FeatureMap& source, const FeatureMap& target,
                            const Mask& target_mask, int workers) {
  if (target_mask.height() != target.height() || target_mask.width() != target.width()) {
    throw std::invalid_argument("correlate: mask shape does not match the target grid");
  }
  return correlate_impl(source, target, &target_mask, workers);
}

CorrelationTensor apply_alpha(const CorrelationTensor& s, const Mask& alpha) {
  if (alpha.height() != s.height() || alpha.width() != s.width()) {
    throw std::invalid_argument("apply_alpha: mask shape does not match the target grid");
  }
  std::vector<double> v = s.values();
  const std::size_t n = s.locations();
  for (std::size_t t = 0; t < n; ++t) {
    if (!alpha[t]) std::fill_n(v.begin() + static_cast<std::ptrdiff_t>(t * n), n, 0.0);
  }
  return CorrelationTensor(s.height(), s.width(), std::move(v));
}

CorrelationTensor pool(const CorrelationTensor& s, int factor) {
  if (factor < 1 || s.height() % factor != 0 || s.width() % factor != 0) {
    throw std::invalid_argument("pool: factor must divide the grid");
  }
  const int ph = s.height() / factor;
  const int pw = s.width() / factor;
  const std::size_t n = s.locations();
  const auto m = static_cast<std::size_t>(ph) * static_cast<std::size_t>(pw);
  auto pooled_index = [&](std::size_t flat) {
    const GridLocation p = s.location(flat);
    return static_cast<std::size_t>(p.row / factor) * static_cast<std::size_t>(pw) +
           static_cast<std::size_t>(p.col / factor);
  };
  std::vector<std::size_t> map(n);
  for (std::size_t i = 0; i < n; ++i) map[i] = pooled_index(i);
  std::vector<double> v(m * m, 0.0);
  const double inv = 1.0 / std::pow(static_cast<double>(factor), 4);
  for (std::size_t t = 0; t < n; ++t) {
    double* row = v.data() + map[t] * m;
    const auto slice = s.slice(t);
    for (std::size_t src = 0; src < n; ++src) row[map[src]] += inv * slice[src];
  }
  return CorrelationTensor(ph, pw, std::move(v));
}

void write_correlation(std::ostream& os, const CorrelationTensor& s) {
  os.write("VCOR", 4);
  put_u32(os, 1);
  put_u32(os, static_cast<std::uint32_t>(s.height()));
  put_u32(os, static_cast<std::uint32_t>(s.width()));
  for (const double x : s.values()) put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  if (!os) throw std::runtime_error("write_correlation: stream error");
}

CorrelationTensor read_correlation(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || std::memcmp(magic.data(), "VCOR", 4) != 0) {
    throw std::runtime_error("read_correlation: bad magic");
  }
  if (get_u32(is) != 1) throw std::runtime_error("read_correlation: unsupported version");
  const auto h = static_cast<int>(get_u32(is));
  const auto w = static_cast<int>(get_u32(is));
  const std::size_t n = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  std::vector<double> v(n * n);
  for (auto& x : v) x = std::bit_cast<float>(get_u32(is));
  return CorrelationTensor(h, w, std::move(v));
}

ContrastiveResult contrastive_loss_with_gradient(const DescriptorView& a, const DescriptorView& b,
                                                 std::span<const CorrespondencePair> pairs,
                                                 double margin, int stride) {
  check_pairs(a, b, pairs, margin, stride);
  const auto d = static_cast<std::size_t>(a.dimension);
  ContrastiveResult r;
  r.grad_a.assign(a.data.size(), 0.0);
  r.grad_b.assign(b.data.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  for (const auto& p : pairs) {
    const std::size_t ca = sample_cell(a, p.x, stride);
    const std::size_t cb = sample_cell(b, p.x_prime, stride);
    const auto fa = a.cell(ca);
    const auto fb = b.cell(cb);
    double dist2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) dist2 += (fa[k] - fb[k]) * (fa[k] - fb[k]);
    double coeff = 0.0;  // dL/d(dist2) for this pair, times 2N
    if (p.s == 1) {
      r.loss += dist2;
      coeff = 1.0;
    } else if (margin - dist2 > 0.0) {
      r.loss += margin - dist2;
      coeff = -1.0;
    }
    if (coeff == 0.0) continue;
    // d(dist2)/d(fa) = 2 (fa - fb); the 2 cancels the 1/2N.
    for (std::size_t k = 0; k < d; ++k) {
      const double g = coeff * inv_n * (fa[k] - fb[k]);
      r.grad_a[ca * d + k] += g;
      r.grad_b[cb * d + k] -= g;
    }
  }
  r.loss *= 0.5 * inv_n;
  return r;
}

double contrastive_loss(const DescriptorView& a, const DescriptorView& b,
                        std::span<const CorrespondencePair> pairs, double margin, int stride) {
  return contrastive_loss_with_gradient(a, b, pairs, margin, stride).loss;
}

MatchMap best_matches(const CorrelationTensor& s) {
  MatchMap out;
  const std::size_t n = s.locations();
  for (std::size_t t = 0; t < n; ++t) {
    const auto slice = s.slice(t);
    std::size_t best = 0;
    for (std::size_t k = 1; k < n; ++k) {
      if (slice[k] > slice[best]) best = k;
    }
    if (slice[best] > 0.0) out.emplace(s.location(t), s.location(best));
  }
  return out;
}

LabelMap transfer_labels(const MatchMap& matches, const LabelMap& source_labels) {
  LabelMap out;
  for (const auto& [target, source] : matches) {
    const auto it = source_labels.find(source);
    if (it != source_labels.end()) out.emplace(target, it->second);
  }
  return out;
}

LabelMap part_label_map(const Render& r, const TemplateModel& model, const CameraModel& camera,
                        const DescriptorSpec& cfg, double min_weight) {
  const auto dominant = dominant_keypoints(r, camera, cfg, min_weight);
  const int w = camera.grid_width();
  LabelMap out;
  for (std::size_t i = 0; i < dominant.size(); ++i) {
    if (!dominant[i]) continue;
    out.emplace(GridLocation{static_cast<int>(i) / w, static_cast<int>(i) % w}, model.part_of(*dominant[i]));
  }
  return out;
}

}  // namespace viewalign
