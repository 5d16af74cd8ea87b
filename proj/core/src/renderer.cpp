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

#include "viewalign/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <stdexcept>

#include "viewalign/feature_map.hpp"

namespace viewalign {
namespace {

double distance(const Point2& a, const Point2& b) { return std::hypot(a.u - b.u, a.v - b.v); }

double distance_to_segment(const Point2& p, const Point2& a, const Point2& b) {
  const double du = b.u - a.u;
  const double dv = b.v - a.v;
  const double len2 = du * du + dv * dv;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((p.u - a.u) * du + (p.v - a.v) * dv) / len2, 0.0, 1.0);
  return std::hypot(p.u - (a.u + t * du), p.v - (a.v + t * dv));
}

void rasterize_segment(Mask& mask, const Point2& a, const Point2& b, double radius) {
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.u, b.u) - radius)));
  const int x1 = std::min(mask.width() - 1, static_cast<int>(std::ceil(std::max(a.u, b.u) + radius)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.v, b.v) - radius)));
  const int y1 = std::min(mask.height() - 1, static_cast<int>(std::ceil(std::max(a.v, b.v) + radius)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (distance_to_segment({x + 0.5, y + 0.5}, a, b) <= radius) mask.set(y, x, true);
    }
  }
}

Point2 midpoint(const Point2& a, const Point2& b) { return {(a.u + b.u) / 2.0, (a.v + b.v) / 2.0}; }

double gaussian_weight(double dist_cells, double sigma) {
  if (dist_cells > 3.0 * sigma) return 0.0;
  return std::exp(-dist_cells * dist_cells / (2.0 * sigma * sigma));
}

int embedding_dimension(const TemplateModel& model, const DescriptorSpec& cfg) {
  return cfg.dimension > 0 ? cfg.dimension : static_cast<int>(model.size()) + 1;
}

}  // namespace

Mask::Mask(int height, int width, std::uint8_t fill)
    : height_(height),
      width_(width),
      data_(static_cast<std::size_t>(std::max(0, height)) * static_cast<std::size_t>(std::max(0, width)),
            fill) {
  if (height < 0 || width < 0) throw std::invalid_argument("Mask: negative shape");
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

Mask Mask::downsample(int stride) const {
  if (stride < 1) throw std::invalid_argument("Mask::downsample: stride must be >= 1");
  Mask out(height_ / stride, width_ / stride);
  for (int y = 0; y < out.height() * stride; ++y) {
    for (int x = 0; x < out.width() * stride; ++x) {
      if (at(y, x)) out.set(y / stride, x / stride, true);
    }
  }
  return out;
}

bool Render::visible(int id) const {
  const auto it = visibility.find(id);
  return it != visibility.end() && it->second;
}

std::vector<int> Render::visible_ids() const {
  std::vector<int> ids;
  for (const auto& [id, vis] : visibility) {
    if (vis) ids.push_back(id);
  }
  return ids;
}

Point2 project(const std::array<double, 3>& position, const RotationMatrix& rot,
               const CameraModel& camera) {
  const auto pc = rot.apply(position);
  return {camera.width / 2.0 + camera.scale() * pc[0], camera.height / 2.0 - camera.scale() * pc[1]};
}

Render render(const TemplateModel& model, const Viewpoint& v, const CameraModel& camera) {
  if (camera.height <= 0 || camera.width <= 0 || camera.feature_stride < 1 ||
      camera.focal_px <= 0.0 || camera.distance <= 0.0) {
    throw std::invalid_argument("render: invalid camera model");
  }
  const double scale = camera.scale();
  const double cu = camera.width / 2.0;
  const double cv = camera.height / 2.0;
  const double extent = scale * model.radius();
  if (extent >= std::min(cu, cv)) {
    throw std::invalid_argument("render: resolution too small for the projected model");
  }

  Render out;
  out.viewpoint = v;
  out.height = camera.height;
  out.width = camera.width;
  const RotationMatrix rot = to_rotation(v);
  for (const auto& k : model.keypoints()) {
    const auto pc = rot.apply(k.position);
    out.keypoints_2d[k.id] = project(k.position, rot, camera);
    out.depths[k.id] = camera.distance - pc[2];
  }
  for (const auto& k : model.keypoints()) {
    bool hidden = false;
    const Point2& p = out.keypoints_2d.at(k.id);
    const double depth = out.depths.at(k.id);
    for (const auto& other : model.keypoints()) {
      if (other.id == k.id) continue;
      if (out.depths.at(other.id) < depth &&
          distance(out.keypoints_2d.at(other.id), p) <= camera.occlusion_radius_px) {
        hidden = true;
        break;
      }
    }
    out.visibility[k.id] = !hidden;
  }

  out.alpha = Mask(camera.height, camera.width);
  for (const auto& [a, b] : model.edges()) {
    const Point2& pa = out.keypoints_2d.at(a);
    const Point2& pb = out.keypoints_2d.at(b);
    const bool va = out.visible(a);
    const bool vb = out.visible(b);
    if (va && vb) {
      rasterize_segment(out.alpha, pa, pb, camera.alpha_dilation_px);
    } else if (va) {
      rasterize_segment(out.alpha, pa, midpoint(pa, pb), camera.alpha_dilation_px);
    } else if (vb) {
      rasterize_segment(out.alpha, pb, midpoint(pa, pb), camera.alpha_dilation_px);
    }
  }
  for (const int id : out.visible_ids()) {
    const Point2& p = out.keypoints_2d.at(id);
    rasterize_segment(out.alpha, p, p, camera.alpha_dilation_px);
  }
  return out;
}

void write_keypoints_csv(std::ostream& os, const TemplateModel& model, const Render& r) {
  const auto precision = os.precision();
  os << "id,name,u,v,depth,visible\n" << std::setprecision(17);
  for (const auto& k : model.keypoints()) {
    const Point2& p = r.keypoints_2d.at(k.id);
    os << k.id << ',' << k.name << ',' << p.u << ',' << p.v << ',' << r.depths.at(k.id) << ','
       << (r.visible(k.id) ? 1 : 0) << '\n';
  }
  os.precision(precision);
}

DisparityMap stereo_disparity(const TemplateModel& model, const Viewpoint& v,
                              const CameraModel& camera, const ViewpointDelta& shift) {
  const Render base = render(model, v, camera);
  const Render shifted = render(model, apply_delta(v, shift), camera);
  DisparityMap out;
  out.shift = shift;
  out.grid_height = camera.grid_height();
  out.grid_width = camera.grid_width();
  for (const auto& k : model.keypoints()) {
    if (!base.visible(k.id) || !shifted.visible(k.id)) continue;
    const Point2& a = base.keypoints_2d.at(k.id);
    const Point2& b = shifted.keypoints_2d.at(k.id);
    out.displacements[k.id] = {b.u - a.u, b.v - a.v};
  }

  constexpr double kSigmaCells = 1.5;
  out.field.assign(static_cast<std::size_t>(out.grid_height) * static_cast<std::size_t>(out.grid_width), {});
  for (int row = 0; row < out.grid_height; ++row) {
    for (int col = 0; col < out.grid_width; ++col) {
      double wsum = 0.0;
      Point2 acc;
      for (const auto& [id, d] : out.displacements) {
        const Point2 c = pixel_to_cell(base.keypoints_2d.at(id), camera.feature_stride);
        const double w = gaussian_weight(std::hypot(c.u - col, c.v - row), kSigmaCells);
        wsum += w;
        acc.u += w * d.u;
        acc.v += w * d.v;
      }
      if (wsum > 0.0) {
        out.field[static_cast<std::size_t>(row * out.grid_width + col)] = {acc.u / wsum, acc.v / wsum};
      }
    }
  }
  return out;
}

std::vector<std::vector<double>> semantic_embeddings(const TemplateModel& model,
                                                     const DescriptorSpec& cfg) {
  const int n = static_cast<int>(model.size());
  const int d = embedding_dimension(model, cfg);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n) + 1,
                                       std::vector<double>(static_cast<std::size_t>(d), 0.0));
  if (cfg.embedding == EmbeddingKind::kOneHot) {
    if (d < n) {
      throw std::invalid_argument("descriptor_map: one-hot embeddings need dimension >= keypoints");
    }
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
    auto& bg = out.back();
    if (d > n) {
      bg[static_cast<std::size_t>(n)] = 1.0;
    } else {
      std::fill(bg.begin(), bg.end(), 1.0 / std::sqrt(static_cast<double>(d)));
    }
    return out;
  }
  if (d < 2) throw std::invalid_argument("descriptor_map: random embeddings need dimension >= 2");
  std::mt19937_64 rng(0x5eed0f5eedULL);
  std::normal_distribution<double> normal;
  for (auto& e : out) {
    double norm = 0.0;
    while (norm < 1e-6) {
      norm = 0.0;
      for (auto& x : e) {
        x = normal(rng);
        norm += x * x;
      }
      norm = std::sqrt(norm);
    }
    for (auto& x : e) x /= norm;
  }
  return out;
}

std::vector<std::optional<int>> dominant_keypoints(const Render& r, const CameraModel& camera,
                                                   const DescriptorSpec& cfg, double min_weight) {
  const int gh = camera.grid_height();
  const int gw = camera.grid_width();
  std::vector<std::optional<int>> out(static_cast<std::size_t>(gh) * static_cast<std::size_t>(gw));
  std::vector<double> best(out.size(), 0.0);
  for (const int id : r.visible_ids()) {
    const Point2 c = pixel_to_cell(r.keypoints_2d.at(id), camera.feature_stride);
    for (int row = 0; row < gh; ++row) {
      for (int col = 0; col < gw; ++col) {
        const double w = gaussian_weight(std::hypot(c.u - col, c.v - row), cfg.sigma_cells);
        const auto idx = static_cast<std::size_t>(row * gw + col);
        if (w > best[idx] && w >= min_weight) {
          best[idx] = w;
          out[idx] = id;
        }
      }
    }
  }
  return out;
}

FeatureMap descriptor_map(const Render& r, const TemplateModel& model, const CameraModel& camera,
                          const DescriptorSpec& cfg, const NoiseSpec& noise) {
  if (cfg.sigma_cells <= 0.0 || cfg.background_weight < 0.0) {
    throw std::invalid_argument("descriptor_map: invalid descriptor settings");
  }
  if (noise.stddev < 0.0 || noise.dropout < 0.0 || noise.dropout > 1.0) {
    throw std::invalid_argument("descriptor_map: invalid noise settings");
  }
  const auto embeddings = semantic_embeddings(model, cfg);
  const auto& background = embeddings.back();
  const int d = static_cast<int>(background.size());
  const int gh = camera.grid_height();
  const int gw = camera.grid_width();
  const auto cells = static_cast<std::size_t>(gh) * static_cast<std::size_t>(gw);

  std::mt19937_64 rng(noise.seed);
  std::bernoulli_distribution drop(noise.dropout);
  std::vector<std::size_t> deposit;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const int id = model.keypoints()[i].id;
    // Draw for every keypoint so the stream does not depend on visibility.
    const bool dropped = noise.dropout > 0.0 && drop(rng);
    if (r.visible(id) && !dropped) deposit.push_back(i);
  }

  std::vector<double> raw(cells * static_cast<std::size_t>(d), 0.0);
  std::vector<double> mass(cells, 0.0);
  for (const std::size_t i : deposit) {
    const Point2 c = pixel_to_cell(r.keypoints_2d.at(model.keypoints()[i].id), camera.feature_stride);
    const auto& e = embeddings[i];
    for (int row = 0; row < gh; ++row) {
      for (int col = 0; col < gw; ++col) {
        const double w = gaussian_weight(std::hypot(c.u - col, c.v - row), cfg.sigma_cells);
        if (w == 0.0) continue;
        const auto idx = static_cast<std::size_t>(row * gw + col);
        mass[idx] += w;
        double* cell = raw.data() + idx * static_cast<std::size_t>(d);
        for (int k = 0; k < d; ++k) cell[k] += w * e[static_cast<std::size_t>(k)];
      }
    }
  }
  for (std::size_t idx = 0; idx < cells; ++idx) {
    const double bw = cfg.background_weight * std::max(0.0, 1.0 - mass[idx]);
    if (bw == 0.0) continue;
    double* cell = raw.data() + idx * static_cast<std::size_t>(d);
    for (int k = 0; k < d; ++k) cell[k] += bw * background[static_cast<std::size_t>(k)];
  }
  if (noise.stddev > 0.0) {
    std::normal_distribution<double> normal(0.0, noise.stddev);
    for (auto& x : raw) x += normal(rng);
  }
  for (std::size_t idx = 0; idx < cells; ++idx) {
    double* cell = raw.data() + idx * static_cast<std::size_t>(d);
    double norm = 0.0;
    for (int k = 0; k < d; ++k) norm += cell[k] * cell[k];
    if (norm < 1e-24) {
      for (int k = 0; k < d; ++k) cell[k] = background[static_cast<std::size_t>(k)];
    }
  }
  return FeatureMap::normalized(gh, gw, d, std::move(raw));
}

Point2 pixel_to_cell(const Point2& p, int stride) {
  return {p.u / stride - 0.5, p.v / stride - 0.5};
}

Point2 cell_center(int row, int col, int stride) {
  return {(col + 0.5) * stride, (row + 0.5) * stride};
}

}  // namespace viewalign
