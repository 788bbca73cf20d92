#pragma once

// Procedural infrared/visible scene pairs with a controllable category mix.
//
// Three categories stand in for the street-dominated training data and the
// under-represented natural scenes (cloud, bush) that a biased model fuses
// poorly. Each pair shares a layout seed across modalities, but every modality
// also carries structures the other lacks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "causalfuse/error.hpp"
#include "causalfuse/image.hpp"
#include "causalfuse/rng.hpp"

namespace causalfuse {

enum class SceneCategory : std::uint8_t { street = 0, cloud = 1, bush = 2 };

inline constexpr std::array<SceneCategory, 3> kAllCategories{SceneCategory::street, SceneCategory::cloud,
                                                             SceneCategory::bush};

inline std::string_view to_string(SceneCategory c) {
  switch (c) {
    case SceneCategory::street:
      return "street";
    case SceneCategory::cloud:
      return "cloud";
    case SceneCategory::bush:
      return "bush";
  }
  return "?";
}

inline std::optional<SceneCategory> parse_category(std::string_view s) {
  for (auto c : kAllCategories)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

/// Category probabilities; indexed by SceneCategory.
struct BiasProfile {
  std::array<double, 3> probabilities{0.8, 0.1, 0.1};

  double sum() const { return probabilities[0] + probabilities[1] + probabilities[2]; }

  void validate() const {
    for (double p : probabilities)
      if (!(p >= 0.0)) throw ContractError("bias profile probabilities must be non-negative");
    if (std::fabs(sum() - 1.0) > 1e-12) {
      std::ostringstream os;
      os << "bias profile probabilities sum to " << std::setprecision(17) << sum() << ", expected 1";
      throw ContractError(os.str());
    }
  }

  static BiasProfile uniform() { return {{1.0 / 3.0, 1.0 / 3.0, 1.0 - 2.0 / 3.0}}; }
};

struct ImagePair {
  Image ir;
  Image vis;
  SceneCategory category = SceneCategory::street;
  std::string id;
};

namespace scene_detail {

/// Cosine-interpolated lattice noise in [0, 1] with the given cell size.
inline Image value_noise(std::size_t size, double cell, Rng& rng) {
  const auto lattice = static_cast<std::size_t>(std::ceil(static_cast<double>(size) / cell)) + 2;
  std::vector<double> grid(lattice * lattice);
  for (double& g : grid) g = rng.uniform();
  const double ox = rng.uniform(0.0, cell), oy = rng.uniform(0.0, cell);
  Image out(size, size);
  auto smooth = [](double t) { return 0.5 - 0.5 * std::cos(t * 3.14159265358979323846); };
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double fx = (static_cast<double>(x) + ox) / cell;
      const double fy = (static_cast<double>(y) + oy) / cell;
      const auto ix = static_cast<std::size_t>(fx), iy = static_cast<std::size_t>(fy);
      const double tx = smooth(fx - static_cast<double>(ix)), ty = smooth(fy - static_cast<double>(iy));
      const double a = grid[iy * lattice + ix], b = grid[iy * lattice + ix + 1];
      const double c = grid[(iy + 1) * lattice + ix], d = grid[(iy + 1) * lattice + ix + 1];
      out.at(y, x) = (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
    }
  return out;
}

inline void fill_rect(Image& img, long top, long left, long h, long w, double v) {
  for (long y = std::max(0L, top); y < std::min<long>(static_cast<long>(img.height), top + h); ++y)
    for (long x = std::max(0L, left); x < std::min<long>(static_cast<long>(img.width), left + w); ++x)
      img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = v;
}

// Soft-edged ellipse blended towards `v`.
inline void blend_ellipse(Image& img, double cy, double cx, double ry, double rx, double v) {
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const double dy = (static_cast<double>(y) - cy) / ry, dx = (static_cast<double>(x) - cx) / rx;
      const double r = std::sqrt(dx * dx + dy * dy);
      const double alpha = std::clamp(1.5 - r, 0.0, 1.0);
      img.at(y, x) = (1 - alpha) * img.at(y, x) + alpha * v;
    }
}

inline void clamp_unit(Image& img) {
  for (double& p : img.pixels) p = std::clamp(p, 0.0, 1.0);
}

inline ImagePair street(std::size_t s, Rng& rng) {
  const double S = static_cast<double>(s);
  Image vis(s, s), ir(s, s);
  const double ir_base = rng.uniform(0.08, 0.18);
  for (std::size_t y = 0; y < s; ++y)
    for (std::size_t x = 0; x < s; ++x) {
      vis.at(y, x) = 0.12 + 0.12 * static_cast<double>(y) / S;
      ir.at(y, x) = ir_base + 0.04 * static_cast<double>(y) / S;
    }
  // buildings: strong in visible, faintly warm in infrared
  const int buildings = 2 + static_cast<int>(rng.below(3));
  for (int b = 0; b < buildings; ++b) {
    const long w = static_cast<long>(S * rng.uniform(0.14, 0.28));
    const long h = static_cast<long>(S * rng.uniform(0.35, 0.7));
    const long left = static_cast<long>(rng.uniform(0.0, S - static_cast<double>(w)));
    const long top = static_cast<long>(S * 0.8) - h;
    const double shade = rng.uniform(0.5, 0.8);
    fill_rect(vis, top, left, h, w, shade);
    fill_rect(ir, top, left, h, w, ir_base + rng.uniform(0.1, 0.16));
    for (long wy = top + 2; wy + 2 < top + h; wy += 4)
      for (long wx = left + 1; wx + 2 <= left + w; wx += 3)
        fill_rect(vis, wy, wx, 2, 2, rng.coin(0.5) ? 0.95 : 0.25);
  }
  // road markings, visible only
  for (long x = 0; x < static_cast<long>(s); x += 6) fill_rect(vis, static_cast<long>(S * 0.9), x, 1, 3, 0.9);
  // street lamps: poles plus bright heads, visible only
  const int lamps = 1 + static_cast<int>(rng.below(2));
  for (int l = 0; l < lamps; ++l) {
    const double cx = rng.uniform(0.1 * S, 0.9 * S);
    const double cy = rng.uniform(0.2 * S, 0.4 * S);
    fill_rect(vis, static_cast<long>(cy), static_cast<long>(cx), static_cast<long>(S * 0.8 - cy), 1, 0.55);
    blend_ellipse(vis, cy, cx, 1.6, 1.6, 1.0);
  }
  // pedestrians: hot in infrared, barely visible
  const int people = 1 + static_cast<int>(rng.below(3));
  for (int p = 0; p < people; ++p) {
    const double cx = rng.uniform(0.1 * S, 0.9 * S);
    const double ry = S * rng.uniform(0.08, 0.12), rx = ry * 0.4;
    const double cy = S * 0.82 - ry;
    blend_ellipse(ir, cy, cx, ry, rx, rng.uniform(0.85, 1.0));
    blend_ellipse(vis, cy, cx, ry, rx, 0.18);
  }
  return {std::move(ir), std::move(vis), SceneCategory::street, {}};
}

inline ImagePair cloud(std::size_t s, Rng& rng) {
  const double S = static_cast<double>(s);
  const Image coarse = value_noise(s, S / 3.0, rng);
  const Image medium = value_noise(s, S / 6.0, rng);
  Image vis(s, s), ir(s, s);
  const double lo = rng.uniform(0.55, 0.6), span = rng.uniform(0.3, 0.36);
  const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const double ir_level = rng.uniform(0.5, 0.62);
  // bright sky: cloud cover stretched to the full [lo, lo + span] band
  double cmin = 1.0, cmax = 0.0;
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    const double c = 0.7 * coarse.pixels[i] + 0.3 * medium.pixels[i];
    cmin = std::min(cmin, c);
    cmax = std::max(cmax, c);
  }
  const double stretch = cmax > cmin ? 1.0 / (cmax - cmin) : 0.0;
  for (std::size_t y = 0; y < s; ++y)
    for (std::size_t x = 0; x < s; ++x) {
      const double cloudiness = (0.7 * coarse.at(y, x) + 0.3 * medium.at(y, x) - cmin) * stretch;
      vis.at(y, x) = lo + span * cloudiness;
      const double ramp = (std::cos(angle) * static_cast<double>(x) + std::sin(angle) * static_cast<double>(y)) / S;
      ir.at(y, x) = ir_level + 0.15 * ramp + 0.04 * (cloudiness - 0.5);
    }
  clamp_unit(vis);
  clamp_unit(ir);
  return {std::move(ir), std::move(vis), SceneCategory::cloud, {}};
}

inline ImagePair bush(std::size_t s, Rng& rng) {
  const Image fine = value_noise(s, 1.7, rng);
  const Image mid = value_noise(s, 3.5, rng);
  Image vis(s, s), ir(s, s);
  const double base = rng.uniform(0.3, 0.42);
  const double ir_base = rng.uniform(0.25, 0.35);
  const double density = rng.uniform(0.04, 0.08);
  for (std::size_t y = 0; y < s; ++y)
    for (std::size_t x = 0; x < s; ++x) {
      const double texture = 0.6 * fine.at(y, x) + 0.4 * mid.at(y, x);
      vis.at(y, x) = base + 0.6 * (texture - 0.5) + 0.1;
      ir.at(y, x) = ir_base + 0.03 * (mid.at(y, x) - 0.5);
    }
  // sparse warm speckle, denser where foliage is thick
  for (std::size_t y = 0; y < s; ++y)
    for (std::size_t x = 0; x < s; ++x)
      if (rng.coin(density * (0.5 + mid.at(y, x)))) ir.at(y, x) = rng.uniform(0.5, 0.68);
  clamp_unit(vis);
  clamp_unit(ir);
  return {std::move(ir), std::move(vis), SceneCategory::bush, {}};
}

}  // namespace scene_detail

inline constexpr std::size_t kMinSceneSize = 16;

/// Deterministic pair for (category, size, seed).
inline ImagePair generate_pair(SceneCategory category, std::size_t size, std::uint64_t seed) {
  if (size < kMinSceneSize)
    throw DimensionError("scene size " + std::to_string(size) + " is below the minimum of " +
                         std::to_string(kMinSceneSize));
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(category)));
  switch (category) {
    case SceneCategory::street:
      return scene_detail::street(size, rng);
    case SceneCategory::cloud:
      return scene_detail::cloud(size, rng);
    case SceneCategory::bush:
      return scene_detail::bush(size, rng);
  }
  throw ContractError("unknown scene category");
}

inline std::string pair_id(std::string_view prefix, std::size_t index) {
  std::ostringstream os;
  os << prefix << '_' << std::setw(5) << std::setfill('0') << index;
  return os.str();
}

/// n pairs with categories drawn i.i.d. from the profile. Item i uses the
/// sub-seed derive_seed(seed, i).
inline std::vector<ImagePair> generate_dataset(const BiasProfile& profile, std::size_t n, std::size_t size,
                                               std::uint64_t seed, std::string_view id_prefix = "pair") {
  profile.validate();
  if (n == 0) throw CountError("dataset size must be at least 1");
  Rng category_rng(derive_seed(seed, 0xCA7E6021ULL));
  std::vector<ImagePair> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = category_rng.uniform();
    std::size_t c = 0;
    double cumulative = profile.probabilities[0];
    while (c + 1 < 3 && (u >= cumulative || profile.probabilities[c] == 0.0)) cumulative += profile.probabilities[++c];
    auto pair = generate_pair(kAllCategories[c], size, derive_seed(seed, i));
    pair.id = pair_id(id_prefix, i);
    out.push_back(std::move(pair));
  }
  return out;
}

/// Exactly per_category pairs of each category, interleaved street/cloud/bush.
inline std::vector<ImagePair> generate_balanced_dataset(std::size_t per_category, std::size_t size, std::uint64_t seed,
                                                        std::string_view id_prefix = "pair") {
  if (per_category == 0) throw CountError("balanced dataset needs at least one pair per category");
  std::vector<ImagePair> out;
  for (std::size_t i = 0; i < per_category * 3; ++i) {
    auto pair = generate_pair(kAllCategories[i % 3], size, derive_seed(seed, i));
    pair.id = pair_id(id_prefix, i);
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace causalfuse
