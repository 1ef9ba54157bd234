/*
 * Copyright 2026 The jointad Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "jointad/rng.hpp"

namespace jointad {

enum class DistKind { Uniform, TruncExp, TruncNormal, TruncLogNormal };

/// A regular value distribution restricted to a bounded support [lo, hi].
///
/// Every member is a base law renormalized onto the support, so with base CDF
/// G and density g the truncated law has F(v) = (G(v) - G(lo)) / Z and
/// f(v) = g(v) / Z with Z = G(hi) - G(lo). The virtual value only needs the
/// ratio (1 - F) / f = (G(hi) - G(v)) / g(v), which is evaluated without
/// forming Z to keep tail precision.
class Distribution {
 public:
  static Distribution uniform(double lo = 0.0, double hi = 1.0) {
    return Distribution(DistKind::Uniform, 0.0, 0.0, lo, hi);
  }
  static Distribution truncated_exponential(double rate = 2.0, double lo = 0.0,
                                            double hi = 1.0) {
    if (!(rate > 0.0)) throw std::invalid_argument("exponential rate must be positive");
    return Distribution(DistKind::TruncExp, rate, 0.0, lo, hi);
  }
  static Distribution truncated_normal(double mean = 0.5, double sd = 0.1,
                                       double lo = 0.0, double hi = 1.0) {
    if (!(sd > 0.0)) throw std::invalid_argument("normal sd must be positive");
    return Distribution(DistKind::TruncNormal, mean, sd, lo, hi);
  }
  /// Log-normal with log-mean `mu` and log-variance `sigma2`.
  static Distribution truncated_lognormal(double mu = 0.1, double sigma2 = 1.44,
                                          double lo = 0.0, double hi = 1.0) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("lognormal variance must be positive");
    if (lo < 0.0) throw std::invalid_argument("lognormal support must be nonnegative");
    return Distribution(DistKind::TruncLogNormal, mu, std::sqrt(sigma2), lo, hi);
  }

  /// Catalog lookup by config id: "u01", "texp2", "tnorm", "tlognorm".
  static Distribution from_id(std::string_view id) {
    if (id == "u01") return uniform();
    if (id == "texp2") return truncated_exponential();
    if (id == "tnorm") return truncated_normal();
    if (id == "tlognorm") return truncated_lognormal();
    throw std::invalid_argument("unknown distribution id: " + std::string(id));
  }

  DistKind kind() const { return kind_; }
  double lower() const { return lo_; }
  double upper() const { return hi_; }
  bool contains(double v) const { return v >= lo_ && v <= hi_; }

  std::string id() const {
    const bool unit = lo_ == 0.0 && hi_ == 1.0;
    switch (kind_) {
      case DistKind::Uniform:
        if (unit) return "u01";
        break;
      case DistKind::TruncExp:
        if (unit && p1_ == 2.0) return "texp2";
        break;
      case DistKind::TruncNormal:
        if (unit && p1_ == 0.5 && p2_ == 0.1) return "tnorm";
        break;
      case DistKind::TruncLogNormal:
        if (unit && p1_ == 0.1 && std::abs(p2_ * p2_ - 1.44) < 1e-12) return "tlognorm";
        break;
    }
    return "custom";
  }

  double pdf(double v) const {
    check_support(v);
    return base_pdf(v) / mass_;
  }

  double cdf(double v) const {
    check_support(v);
    if (v == hi_) return 1.0;
    if (v == lo_) return 0.0;
    return 1.0 - upper_mass(v) / mass_;
  }

  /// Myerson virtual value v - (1 - F(v)) / f(v).
  double virtual_value(double v) const {
    check_support(v);
    const double g = base_pdf(v);
    if (!(g > 0.0)) throw std::domain_error("virtual value undefined where density vanishes");
    return v - upper_mass(v) / g;
  }

  /// Smallest v in [lo, hi] with virtual_value(v) >= c, found by bisection to
  /// 1e-10. Returns nullopt when c exceeds the virtual value at the upper end.
  std::optional<double> inverse_virtual_value(double c) const {
    if (c > hi_) return std::nullopt;  // c(hi) == hi
    if (base_pdf(lo_) > 0.0 && c <= virtual_value(lo_)) return lo_;
    double a = lo_;
    double b = hi_;
    while (b - a > 1e-10) {
      const double mid = 0.5 * (a + b);
      if (virtual_value(mid) >= c) {
        b = mid;
      } else {
        a = mid;
      }
    }
    return b;
  }

  /// Inverse CDF; u in [0, 1].
  double quantile(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) throw std::domain_error("quantile level outside [0, 1]");
    double v = lo_;
    switch (kind_) {
      case DistKind::Uniform:
        v = lo_ + u * (hi_ - lo_);
        break;
      case DistKind::TruncExp: {
        // G(v) = 1 - exp(-rate v); solve G(v) = G(lo) + u Z.
        const double tail = std::exp(-p1_ * lo_) - u * mass_;
        v = -std::log(tail) / p1_;
        break;
      }
      case DistKind::TruncNormal:
        v = p1_ + p2_ * normal_quantile(base_cdf(lo_) + u * mass_);
        break;
      case DistKind::TruncLogNormal:
        v = std::exp(p1_ + p2_ * normal_quantile(base_cdf(lo_) + u * mass_));
        break;
    }
    return std::clamp(v, lo_, hi_);
  }

  double draw(Rng &rng) const { return quantile(uniform01(rng)); }

  std::vector<double> sample(std::uint64_t seed, std::size_t count) const {
    Rng rng(seed);
    std::vector<double> out(count);
    for (auto &x : out) x = draw(rng);
    return out;
  }

  friend bool operator==(const Distribution &, const Distribution &) = default;

 private:
  Distribution(DistKind kind, double p1, double p2, double lo, double hi)
      : kind_(kind), p1_(p1), p2_(p2), lo_(lo), hi_(hi) {
    if (!(lo < hi)) throw std::invalid_argument("empty support");
    mass_ = base_cdf(hi_) - base_cdf(lo_);
    if (kind_ == DistKind::TruncNormal || kind_ == DistKind::TruncLogNormal)
      mass_ = upper_mass(lo_);
    if (!(mass_ > 0.0)) throw std::invalid_argument("support carries no probability mass");
  }

  void check_support(double v) const {
    if (!contains(v)) throw std::domain_error("value outside distribution support");
  }

  static double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
  static double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }
  static double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
  }
  static double normal_quantile(double p) {
    p = std::clamp(p, 1e-300, 1.0 - 1e-16);
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
  }

  // Mass of the base law between two standardized points, choosing the tail
  // form that avoids cancellation.
  static double normal_between(double za, double zb) {
    if (za >= 0.0) return normal_sf(za) - normal_sf(zb);
    return normal_cdf(zb) - normal_cdf(za);
  }

  double base_pdf(double v) const {
    switch (kind_) {
      case DistKind::Uniform:
        return 1.0;
      case DistKind::TruncExp:
        return p1_ * std::exp(-p1_ * v);
      case DistKind::TruncNormal:
        return normal_pdf((v - p1_) / p2_) / p2_;
      case DistKind::TruncLogNormal:
        if (v <= 0.0) return 0.0;
        return normal_pdf((std::log(v) - p1_) / p2_) / (v * p2_);
    }
    return 0.0;
  }

  double base_cdf(double v) const {
    switch (kind_) {
      case DistKind::Uniform:
        return v;
      case DistKind::TruncExp:
        return -std::expm1(-p1_ * v);
      case DistKind::TruncNormal:
        return normal_cdf((v - p1_) / p2_);
      case DistKind::TruncLogNormal:
        if (v <= 0.0) return 0.0;
        return normal_cdf((std::log(v) - p1_) / p2_);
    }
    return 0.0;
  }

  // G(hi) - G(v).
  double upper_mass(double v) const {
    switch (kind_) {
      case DistKind::Uniform:
        return hi_ - v;
      case DistKind::TruncExp:
        return std::exp(-p1_ * v) - std::exp(-p1_ * hi_);
      case DistKind::TruncNormal:
        return normal_between((v - p1_) / p2_, (hi_ - p1_) / p2_);
      case DistKind::TruncLogNormal: {
        const double zb = (std::log(hi_) - p1_) / p2_;
        if (v <= 0.0) return normal_cdf(zb);
        return normal_between((std::log(v) - p1_) / p2_, zb);
      }
    }
    return 0.0;
  }

  DistKind kind_;
  double p1_;
  double p2_;
  double lo_;
  double hi_;
  double mass_ = 1.0;
};

/// Per-bidder priors: either one shared distribution or one per bidder id.
inline const Distribution &prior_of(std::span<const Distribution> priors, int bidder) {
  if (priors.empty()) throw std::invalid_argument("no prior distributions given");
  if (priors.size() == 1) return priors.front();
  if (bidder < 0 || static_cast<std::size_t>(bidder) >= priors.size())
    throw std::out_of_range("no prior for bidder");
  return priors[static_cast<std::size_t>(bidder)];
}

}  // namespace jointad
