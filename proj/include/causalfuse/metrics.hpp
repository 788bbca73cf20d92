#pragma once

// Fusion quality measures: MI, VIF, Qabf, SSIM.
//
// Aggregation over the two sources: MI is summed, SSIM and VIF are averaged,
// Qabf is defined over both sources directly.

#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "causalfuse/error.hpp"
#include "causalfuse/filters.hpp"
#include "causalfuse/fusionnet.hpp"
#include "causalfuse/image.hpp"
#include "causalfuse/scenegen.hpp"

namespace causalfuse {

namespace metric_detail {

inline void require_aligned(const Image& a, const Image& b, const char* what) {
  if (a.empty() || !a.same_size(b))
    throw DimensionError(std::string(what) + ": images must be non-empty and the same size (" +
                         std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                         std::to_string(b.height) + "x" + std::to_string(b.width) + ")");
}

inline std::size_t bin_of(double v, std::size_t bins) {
  const double clamped = std::clamp(v, 0.0, 1.0);
  return std::min(bins - 1, static_cast<std::size_t>(clamped * static_cast<double>(bins)));
}

}  // namespace metric_detail

/// Histogram mutual information in bits.
inline double mutual_information(const Image& a, const Image& b, std::size_t bins = 256) {
  metric_detail::require_aligned(a, b, "mutual_information");
  if (bins == 0) throw ContractError("mutual_information: bins must be positive");
  std::vector<double> joint(bins * bins, 0.0), pa(bins, 0.0), pb(bins, 0.0);
  const double unit = 1.0 / static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto ia = metric_detail::bin_of(a.pixels[i], bins);
    const auto ib = metric_detail::bin_of(b.pixels[i], bins);
    joint[ia * bins + ib] += unit;
    pa[ia] += unit;
    pb[ib] += unit;
  }
  double mi = 0.0;
  for (std::size_t i = 0; i < bins; ++i)
    for (std::size_t j = 0; j < bins; ++j) {
      const double p = joint[i * bins + j];
      if (p > 0.0) mi += p * (std::log2(p) - std::log2(pa[i]) - std::log2(pb[j]));
    }
  return std::max(0.0, mi);
}

inline constexpr std::size_t kSsimWindow = 11;

/// Mean SSIM over all fully-contained 11x11 Gaussian (sigma 1.5) windows,
/// K1 = 0.01, K2 = 0.03, dynamic range 1.
inline double ssim(const Image& a, const Image& b) {
  metric_detail::require_aligned(a, b, "ssim");
  if (a.height < kSsimWindow || a.width < kSsimWindow)
    throw DimensionError("ssim: image " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                         " is smaller than the 11x11 window");
  const auto taps = filters::gaussian_taps(kSsimWindow / 2, 1.5);
  const std::size_t h = a.height, w = a.width;
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a.pixels[i] * a.pixels[i];
    bb[i] = b.pixels[i] * b.pixels[i];
    ab[i] = a.pixels[i] * b.pixels[i];
  }
  const auto mu_a = filters::separable_valid(a.pixels, h, w, taps);
  const auto mu_b = filters::separable_valid(b.pixels, h, w, taps);
  const auto s_aa = filters::separable_valid(aa, h, w, taps);
  const auto s_bb = filters::separable_valid(bb, h, w, taps);
  const auto s_ab = filters::separable_valid(ab, h, w, taps);
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double var_a = s_aa[i] - mu_a[i] * mu_a[i];
    const double var_b = s_bb[i] - mu_b[i] * mu_b[i];
    const double cov = s_ab[i] - mu_a[i] * mu_b[i];
    total += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

/// Xydeas-Petrovic edge preservation with the canonical sigmoid constants.
/// Returns 0 when neither source has any edge strength.
inline double qabf(const Image& ir, const Image& vis, const Image& fused) {
  metric_detail::require_aligned(ir, vis, "qabf");
  metric_detail::require_aligned(ir, fused, "qabf");
  constexpr double gamma_g = 0.9994, kappa_g = -15.0, sigma_g = 0.5;
  constexpr double gamma_a = 0.9879, kappa_a = -22.0, sigma_a = 0.8;
  const std::size_t h = ir.height, w = ir.width;

  struct Edges {
    std::vector<double> strength, orientation;
  };
  auto edges = [h, w](const Image& img) {
    const auto g = filters::sobel(img.pixels, h, w, filters::Border::replicate);
    Edges e{std::vector<double>(img.size()), std::vector<double>(img.size())};
    for (std::size_t i = 0; i < img.size(); ++i) {
      e.strength[i] = std::hypot(g.gx[i], g.gy[i]);
      if (g.gx[i] == 0.0)
        e.orientation[i] = g.gy[i] == 0.0 ? 0.0 : std::numbers::pi / 2;
      else
        e.orientation[i] = std::atan(g.gy[i] / g.gx[i]);
    }
    return e;
  };
  const Edges ea = edges(ir), eb = edges(vis), ef = edges(fused);

  auto preservation = [&](const Edges& src, std::size_t i) {
    const double gs = src.strength[i], gf = ef.strength[i];
    const double g = gs == gf ? 1.0 : (gs > gf ? gf / gs : gs / gf);
    const double a = 1.0 - std::fabs(src.orientation[i] - ef.orientation[i]) / (std::numbers::pi / 2);
    const double qg = gamma_g / (1.0 + std::exp(kappa_g * (g - sigma_g)));
    const double qa = gamma_a / (1.0 + std::exp(kappa_a * (a - sigma_a)));
    return qg * qa;
  };

  double numerator = 0.0, denominator = 0.0;
  for (std::size_t i = 0; i < ir.size(); ++i) {
    const double wa = ea.strength[i], wb = eb.strength[i];
    if (wa + wb == 0.0) continue;
    numerator += preservation(ea, i) * wa + preservation(eb, i) * wb;
    denominator += wa + wb;
  }
  return denominator > 0.0 ? std::clamp(numerator / denominator, 0.0, 1.0) : 0.0;
}

inline constexpr std::size_t kVifMinSide = 8;

/// Pixel-domain visual information fidelity over four scales (Gaussian
/// windows of 17, 9, 5, 3 taps, sigma = taps/5), with the noise variance and
/// stabilizers of the 8-bit formulation rescaled to unit range. Filtering is
/// same-size with symmetric borders so small images keep all four scales.
/// Returns 0 for a reference without any variance.
inline double vif(const Image& ref, const Image& dist) {
  metric_detail::require_aligned(ref, dist, "vif");
  if (ref.height < kVifMinSide || ref.width < kVifMinSide)
    throw DimensionError("vif: image " + std::to_string(ref.height) + "x" + std::to_string(ref.width) +
                         " is smaller than 8x8");
  constexpr double range2 = 255.0 * 255.0;
  constexpr double sigma_nsq = 2.0 / range2;
  constexpr double tiny = 1e-10 / range2;

  std::vector<double> r = ref.pixels, d = dist.pixels;
  std::size_t h = ref.height, w = ref.width;
  double num = 0.0, den = 0.0;
  for (int s = 1; s <= 4; ++s) {
    const std::size_t taps_n = (std::size_t{1} << (4 - s + 1)) + 1;
    const auto taps = filters::gaussian_taps(taps_n / 2, static_cast<double>(taps_n) / 5.0);
    auto filt = [&](const std::vector<double>& v) {
      return filters::separable_same(v, h, w, taps, filters::Border::reflect);
    };
    if (s > 1) {
      const auto rf = filt(r), df = filt(d);
      const std::size_t nh = (h + 1) / 2, nw = (w + 1) / 2;
      std::vector<double> rs(nh * nw), ds(nh * nw);
      for (std::size_t y = 0; y < nh; ++y)
        for (std::size_t x = 0; x < nw; ++x) {
          rs[y * nw + x] = rf[2 * y * w + 2 * x];
          ds[y * nw + x] = df[2 * y * w + 2 * x];
        }
      r = std::move(rs);
      d = std::move(ds);
      h = nh;
      w = nw;
    }
    std::vector<double> rr(r.size()), dd(r.size()), rd(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      rr[i] = r[i] * r[i];
      dd[i] = d[i] * d[i];
      rd[i] = r[i] * d[i];
    }
    const auto mu1 = filt(r), mu2 = filt(d), e11 = filt(rr), e22 = filt(dd), e12 = filt(rd);
    for (std::size_t i = 0; i < r.size(); ++i) {
      double s1 = std::max(0.0, e11[i] - mu1[i] * mu1[i]);
      const double s2 = std::max(0.0, e22[i] - mu2[i] * mu2[i]);
      const double s12 = e12[i] - mu1[i] * mu2[i];
      double g = s12 / (s1 + tiny);
      double sv = s2 - g * s12;
      if (s1 < tiny) {
        g = 0.0;
        sv = s2;
        s1 = 0.0;
      }
      if (s2 < tiny) {
        g = 0.0;
        sv = 0.0;
      }
      if (g < 0.0) {
        sv = s2;
        g = 0.0;
      }
      sv = std::max(sv, tiny);
      num += std::log10(1.0 + g * g * s1 / (sv + sigma_nsq));
      den += std::log10(1.0 + s1 / sigma_nsq);
    }
  }
  return den > 0.0 ? num / den : 0.0;
}

// ---------------------------------------------------------------------------

struct MetricReport {
  std::string image_id;
  double mi = 0.0;
  double vif = 0.0;
  double qabf = 0.0;
  double ssim = 0.0;
};

inline MetricReport fusion_metrics(const Image& ir, const Image& vis, const Image& fused, std::string id = {}) {
  MetricReport r;
  r.image_id = std::move(id);
  r.mi = mutual_information(fused, ir) + mutual_information(fused, vis);
  r.vif = 0.5 * (vif(ir, fused) + vif(vis, fused));
  r.qabf = qabf(ir, vis, fused);
  r.ssim = 0.5 * (ssim(fused, ir) + ssim(fused, vis));
  return r;
}

struct EvaluationReport {
  std::vector<MetricReport> rows;
  std::optional<MetricReport> mean;  // absent for an empty dataset
};

inline EvaluationReport summarize(std::vector<MetricReport> rows) {
  EvaluationReport report{std::move(rows), std::nullopt};
  if (report.rows.empty()) return report;
  MetricReport m{"MEAN"};
  for (const auto& r : report.rows) {
    m.mi += r.mi;
    m.vif += r.vif;
    m.qabf += r.qabf;
    m.ssim += r.ssim;
  }
  const double n = static_cast<double>(report.rows.size());
  m.mi /= n;
  m.vif /= n;
  m.qabf /= n;
  m.ssim /= n;
  report.mean = m;
  return report;
}

/// Fuses every pair in order and scores it.
inline EvaluationReport evaluate(const FusionModel& model, std::span<const ImagePair> dataset) {
  std::vector<MetricReport> rows;
  rows.reserve(dataset.size());
  for (const auto& pair : dataset) rows.push_back(fusion_metrics(pair.ir, pair.vis, model.fuse(pair.ir, pair.vis), pair.id));
  return summarize(std::move(rows));
}

inline std::string report_csv(const EvaluationReport& report) {
  std::string out = "image_id,MI,VIF,Qabf,SSIM\n";
  auto line = [&out](const MetricReport& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f\n", r.mi, r.vif, r.qabf, r.ssim);
    out += r.image_id;
    out += buf;
  };
  for (const auto& r : report.rows) line(r);
  if (report.mean) line(*report.mean);
  return out;
}

}  // namespace causalfuse
