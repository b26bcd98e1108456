#pragma once

#include "stkde/domain.hpp"
#include "stkde/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stkde {

enum class KernelKind
{
  gaussian,
  epanechnikov
};

inline std::string_view to_string(KernelKind k)
{
  return k == KernelKind::gaussian ? "gaussian" : "epanechnikov";
}

inline KernelKind kernel_from_string(std::string_view s)
{
  if (s == "gaussian")
    return KernelKind::gaussian;
  if (s == "epanechnikov")
    return KernelKind::epanechnikov;
  throw ConfigError("unknown kernel '" + std::string(s) +
                    "' (expected gaussian or epanechnikov)");
}

//! Symmetric positive-definite 2x2 bandwidth matrix H (km^2).
class Bandwidth
{
public:
  Bandwidth()
    : Bandwidth(1.0, 0.0, 1.0)
  {}

  Bandwidth(double h11, double h12, double h22)
    : h11_(h11)
    , h12_(h12)
    , h22_(h22)
  {
    det_ = h11_ * h22_ - h12_ * h12_;
    if (!std::isfinite(det_) || !(h11_ > 0.0) || !(det_ > 0.0))
      throw BandwidthError("bandwidth matrix must be symmetric positive definite");
    inv11_ = h22_ / det_;
    inv12_ = -h12_ / det_;
    inv22_ = h11_ / det_;
    // 2x2 SPD square root sqrt(M) = (M + sqrt(det M) I) / sqrt(tr M + 2 sqrt(det M)),
    // applied to M = H^{-1}.
    const double s = std::sqrt(inv11_ * inv22_ - inv12_ * inv12_);
    const double t = std::sqrt(inv11_ + inv22_ + 2.0 * s);
    inv_sqrt_ = { (inv11_ + s) / t, inv12_ / t, (inv22_ + s) / t };
  }

  static Bandwidth diagonal(double h11, double h22) { return Bandwidth(h11, 0.0, h22); }

  double h11() const { return h11_; }
  double h12() const { return h12_; }
  double h22() const { return h22_; }
  double determinant() const { return det_; }
  //! Entries (11, 12, 22) of the symmetric matrix H^{-1/2}.
  const std::array<double, 3>& inverse_sqrt() const { return inv_sqrt_; }

  //! d' H^{-1} d.
  double quadratic_form(double dx, double dy) const
  {
    return inv11_ * dx * dx + 2.0 * inv12_ * dx * dy + inv22_ * dy * dy;
  }

  //! Half-widths of the axis-aligned box enclosing {d : d' H^{-1} d <= r^2}.
  std::array<double, 2> extent(double r) const
  {
    return { r * std::sqrt(h11_), r * std::sqrt(h22_) };
  }

  friend bool operator==(const Bandwidth& a, const Bandwidth& b)
  {
    return a.h11_ == b.h11_ && a.h12_ == b.h12_ && a.h22_ == b.h22_;
  }

private:
  double h11_, h12_, h22_;
  double det_;
  double inv11_, inv12_, inv22_;
  std::array<double, 3> inv_sqrt_;
};

//! K_H(d) normalised with |H|^{-1/2} so it integrates to one over the plane.
class KernelEvaluator
{
public:
  KernelEvaluator(KernelKind kind, const Bandwidth& bandwidth)
    : kind_(kind)
    , bandwidth_(bandwidth)
  {
    const double root_det = std::sqrt(bandwidth.determinant());
    norm_ = kind == KernelKind::gaussian ? 1.0 / (2.0 * std::numbers::pi * root_det)
                                         : 2.0 / (std::numbers::pi * root_det);
  }

  KernelKind kind() const { return kind_; }
  const Bandwidth& bandwidth() const { return bandwidth_; }

  double operator()(double dx, double dy) const
  {
    const double z = bandwidth_.quadratic_form(dx, dy);
    if (kind_ == KernelKind::gaussian)
      return norm_ * std::exp(-0.5 * z);
    return z < 1.0 ? norm_ * (1.0 - z) : 0.0;
  }

  double operator()(const SpatialPoint& query, const SpatialPoint& datum) const
  {
    return (*this)(query.x - datum.x, query.y - datum.y);
  }

private:
  KernelKind kind_;
  Bandwidth bandwidth_;
  double norm_;
};

inline double kernel_density(KernelKind kind,
                             const Bandwidth& bandwidth,
                             const SpatialPoint& query,
                             const SpatialPoint& datum)
{
  return KernelEvaluator(kind, bandwidth)(query, datum);
}

namespace detail {

// Linear-interpolation quantile of sorted data (the usual "type 7").
inline double sorted_quantile(const std::vector<double>& sorted, double q)
{
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double robust_scale(std::vector<double> v)
{
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v)
    mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v)
    ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  std::sort(v.begin(), v.end());
  const double iqr = sorted_quantile(v, 0.75) - sorted_quantile(v, 0.25);
  // a zero IQR (heavily tied data) falls back to the standard deviation
  return iqr > 0.0 ? std::min(sd, iqr / 1.349) : sd;
}

} // namespace detail

//! Diagonal rule-of-thumb bandwidth: H_jj = (n^{-1/6} * s_j)^2 with
//! s_j = min(sd_j, IQR_j / 1.349). A stand-in for a plug-in selector; callers
//! can always supply their own matrix instead.
inline Bandwidth select_bandwidth(std::span<const SpatialPoint> points)
{
  if (points.size() < 20)
    throw BandwidthError("bandwidth selection needs at least 20 points, got " +
                         std::to_string(points.size()));
  std::vector<double> xs, ys;
  xs.reserve(points.size());
  ys.reserve(points.size());
  for (const auto& p : points) {
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  const double sx = detail::robust_scale(std::move(xs));
  const double sy = detail::robust_scale(std::move(ys));
  if (!(sx > 0.0) || !(sy > 0.0))
    throw BandwidthError("degenerate scatter: zero spread along an axis");
  const double f = std::pow(static_cast<double>(points.size()), -1.0 / 6.0);
  return Bandwidth::diagonal((f * sx) * (f * sx), (f * sy) * (f * sy));
}

} // namespace stkde
