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
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "jointad/distributions.hpp"

namespace {

using jointad::Distribution;

// Composite Simpson rule, the quadrature oracle for every density check.
double simpson(const std::function<double(double)> &f, double a, double b, int panels = 20000) {
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

std::vector<Distribution> catalog() {
  return {Distribution::uniform(), Distribution::truncated_exponential(), Distribution::truncated_normal(),
          Distribution::truncated_lognormal()};
}

// Oracle virtual value from quadrature-derived F and pointwise f.
double quad_virtual_value(const Distribution &d, double v) {
  const double tail = simpson([&](double x) { return d.pdf(x); }, v, d.upper(), 4000);
  return v - tail / d.pdf(v);
}

TEST(Distribution, DensityIntegratesToOne) {
  for (const auto &d : catalog()) {
    const double lo = d.kind() == jointad::DistKind::TruncLogNormal ? 1e-12 : d.lower();
    EXPECT_NEAR(simpson([&](double x) { return d.pdf(x); }, lo, d.upper()), 1.0, 1e-6) << d.id();
  }
}

TEST(Distribution, CdfEndpointsAndMonotone) {
  for (const auto &d : catalog()) {
    EXPECT_NEAR(d.cdf(d.lower()), 0.0, 1e-9);
    EXPECT_NEAR(d.cdf(d.upper()), 1.0, 1e-9);
    double prev = 0.0;
    for (int i = 0; i <= 1000; ++i) {
      const double f = d.cdf(i / 1000.0);
      EXPECT_GE(f, prev - 1e-15) << d.id() << " at " << i;
      prev = f;
    }
  }
}

TEST(Distribution, CdfDerivativeMatchesPdf) {
  const double h = 1e-6;
  for (const auto &d : catalog()) {
    for (int i = 1; i < 100; ++i) {
      const double v = i / 100.0;
      const double fd = (d.cdf(v + h) - d.cdf(v - h)) / (2 * h);
      EXPECT_NEAR(fd, d.pdf(v), 1e-4 * std::max(1.0, d.pdf(v))) << d.id() << " at " << v;
    }
  }
}

TEST(Distribution, PdfExamples) {
  EXPECT_DOUBLE_EQ(Distribution::uniform().pdf(0.3), 1.0);
  const double texp_oracle = 2.0 / simpson([](double x) { return 2.0 * std::exp(-2.0 * x); }, 0.0, 1.0);
  EXPECT_NEAR(Distribution::truncated_exponential().pdf(0.0), texp_oracle, 1e-9);
  EXPECT_NEAR(Distribution::truncated_exponential().pdf(0.0), 2.313, 1e-3);
  const auto gauss = [](double x) { return std::exp(-0.5 * std::pow((x - 0.5) / 0.1, 2)); };
  const double peak = 1.0 / simpson(gauss, 0.0, 1.0);
  EXPECT_NEAR(Distribution::truncated_normal().pdf(0.5), peak, 1e-9);
}

TEST(Distribution, CdfExamples) {
  EXPECT_DOUBLE_EQ(Distribution::uniform().cdf(0.3), 0.3);
  const auto e = Distribution::truncated_exponential();
  EXPECT_DOUBLE_EQ(e.cdf(1.0), 1.0);
  const double quad = simpson([&](double x) { return e.pdf(x); }, 0.0, 0.5);
  EXPECT_NEAR(e.cdf(0.5), quad, 1e-10);
  EXPECT_NEAR(e.cdf(0.5), (1 - std::exp(-1.0)) / (1 - std::exp(-2.0)), 1e-12);
  EXPECT_NEAR(e.cdf(0.5), 0.7311, 1e-4);
}

TEST(Distribution, OutOfSupportIsDomainError) {
  for (const auto &d : catalog()) {
    EXPECT_THROW(d.pdf(-0.01), std::domain_error);
    EXPECT_THROW(d.cdf(1.01), std::domain_error);
    EXPECT_THROW(d.virtual_value(1.5), std::domain_error);
  }
  EXPECT_THROW(Distribution::truncated_lognormal().virtual_value(0.0), std::domain_error);
}

TEST(Distribution, VirtualValueExamples) {
  const auto u = Distribution::uniform();
  EXPECT_DOUBLE_EQ(u.virtual_value(1.0), 1.0);
  EXPECT_NEAR(u.virtual_value(0.5), 0.0, 1e-15);
  const auto e = Distribution::truncated_exponential();
  EXPECT_NEAR(e.virtual_value(0.0), -0.5 + std::exp(-2.0) / 2, 1e-12);
  EXPECT_NEAR(e.virtual_value(0.0), -0.4323, 1e-4);
  for (int i = 0; i <= 20; ++i) {
    const double v = i / 20.0;
    EXPECT_NEAR(u.virtual_value(v), 2 * v - 1, 1e-12);
    EXPECT_NEAR(e.virtual_value(v), v - 0.5 + std::exp(2 * v - 2) / 2, 1e-12);
  }
}

TEST(Distribution, VirtualValueMatchesQuadrature) {
  for (const auto &d : catalog()) {
    for (int i = 1; i < 20; ++i) {
      const double v = i / 20.0;
      EXPECT_NEAR(d.virtual_value(v), quad_virtual_value(d, v), 1e-7) << d.id() << " at " << v;
    }
  }
}

TEST(Distribution, CatalogIsRegular) {
  for (const auto &d : catalog()) {
    double prev = -1e300;
    for (int i = 1; i < 1000; ++i) {
      const double c = d.virtual_value(i / 1000.0);
      EXPECT_GE(c, prev - 1e-12) << d.id() << " at " << i;
      prev = c;
    }
  }
}

TEST(Distribution, InverseVirtualValueExamples) {
  const auto u = Distribution::uniform();
  EXPECT_NEAR(*u.inverse_virtual_value(0.0), 0.5, 1e-9);
  EXPECT_NEAR(*u.inverse_virtual_value(1.0), 1.0, 1e-9);
  EXPECT_DOUBLE_EQ(*u.inverse_virtual_value(-3.0), 0.0);
  EXPECT_FALSE(u.inverse_virtual_value(1.0 + 1e-6).has_value());
  EXPECT_NEAR(*Distribution::truncated_exponential().inverse_virtual_value(1.0), 1.0, 1e-9);
  for (int i = 0; i <= 40; ++i) {
    const double c = -1.0 + i / 20.0;
    EXPECT_NEAR(*u.inverse_virtual_value(c), (c + 1) / 2, 1e-9);
  }
}

TEST(Distribution, InverseRoundTrip) {
  for (const auto &d : catalog()) {
    for (int i = 1; i < 100; ++i) {
      const double v = i / 100.0;
      const auto back = d.inverse_virtual_value(d.virtual_value(v));
      ASSERT_TRUE(back.has_value());
      EXPECT_NEAR(*back, v, 1e-6) << d.id();
    }
  }
}

double ks_statistic(std::vector<double> xs, const Distribution &d) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = d.cdf(xs[i]);
    ks = std::max({ks, f - i / n, (i + 1) / n - f});
  }
  return ks;
}

TEST(Distribution, SamplingMatchesCdf) {
  for (const auto &d : catalog()) {
    const auto xs = d.sample(99, 10000);
    for (double x : xs) ASSERT_TRUE(x >= d.lower() && x <= d.upper());
    EXPECT_LT(ks_statistic(xs, d), 0.02) << d.id();
  }
}

TEST(Distribution, SampleMeans) {
  auto mean = [](const std::vector<double> &v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
  EXPECT_NEAR(mean(Distribution::uniform().sample(3, 10000)), 0.5, 0.01);
  const auto n = Distribution::truncated_normal();
  const double oracle = simpson([&](double x) { return x * n.pdf(x); }, 0.0, 1.0);
  EXPECT_NEAR(oracle, 0.5, 1e-9);
  EXPECT_NEAR(mean(n.sample(4, 10000)), oracle, 0.01);
  for (double x : Distribution::truncated_exponential().sample(5, 10000)) {
    EXPECT_GT(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
}

TEST(Distribution, SameSeedSameDraws) {
  const auto d = Distribution::truncated_lognormal();
  EXPECT_EQ(d.sample(11, 100), d.sample(11, 100));
  EXPECT_NE(d.sample(11, 100), d.sample(12, 100));
}

TEST(Distribution, IdsRoundTrip) {
  for (const char *id : {"u01", "texp2", "tnorm", "tlognorm"}) EXPECT_EQ(Distribution::from_id(id).id(), id);
  EXPECT_THROW(Distribution::from_id("cauchy"), std::invalid_argument);
}

}  // namespace
