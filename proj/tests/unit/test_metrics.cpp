#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "probcal/errors.hpp"
#include "probcal/metrics.hpp"
#include "probcal/rng.hpp"

using namespace probcal;

namespace {

double brute_auroc(const std::vector<double>& p, const std::vector<int>& y) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        den += 1;
        num += p[i] > p[j] ? 1.0 : p[i] == p[j] ? 0.5 : 0.0;
      }
  return num / den;
}

void random_case(RandomStream& s, std::size_t n, std::vector<double>& p, std::vector<int>& y) {
  p.resize(n);
  y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Coarse grid so ties are common.
    p[i] = double(1 + s.uniform_index(20)) / 21;
    y[i] = s.bernoulli(p[i]) ? 1 : 0;
  }
  y[0] = 0;
  y[1] = 1;
}

}  // namespace

TEST_CASE("ece examples") {
  CHECK(ece(std::vector{0.5, 0.5}, std::vector{0, 1}) == doctest::Approx(0.0));
  CHECK(ece(std::vector{0.8, 0.8, 0.2, 0.2}, std::vector{1, 0, 0, 0}) == doctest::Approx(0.25));
  CHECK_THROWS_AS(ece(std::vector<double>{}, std::vector<int>{}), std::invalid_argument);
  CHECK_THROWS_AS(ece(std::vector{0.5}, std::vector{0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(ece(std::vector{0.5}, std::vector{2}), std::invalid_argument);
  CHECK_THROWS_AS(ece(std::vector{1.5}, std::vector{1}), std::invalid_argument);
}

TEST_CASE("ece equals hand binning on random inputs") {
  RandomStream s(77, {});
  std::vector<double> p;
  std::vector<int> y;
  for (int trial = 0; trial < 50; ++trial) {
    random_case(s, 300, p, y);
    double sum_p[10] = {}, sum_y[10] = {}, cnt[10] = {};
    for (std::size_t i = 0; i < p.size(); ++i) {
      int b = std::min(9, int(std::floor(p[i] * 10)));
      sum_p[b] += p[i];
      sum_y[b] += y[i];
      cnt[b] += 1;
    }
    double want = 0.0;
    for (int b = 0; b < 10; ++b)
      if (cnt[b] > 0) want += cnt[b] / p.size() * std::abs(sum_y[b] / cnt[b] - sum_p[b] / cnt[b]);
    CHECK(ece(p, y) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("reliability bins") {
  auto bins = reliability(std::vector{1.0}, std::vector{1});
  REQUIRE(bins.size() == 10);
  CHECK(bins[9].count == 1);
  CHECK(bins[9].hi == 1.0);

  std::vector<double> p;
  std::vector<int> y;
  for (int b = 0; b < 10; ++b) {
    p.insert(p.end(), {b / 10.0 + 0.05, b / 10.0 + 0.05});
    y.insert(y.end(), {1, 0});
  }
  std::vector<double> cp;
  std::vector<int> cy;
  for (int b = 0; b < 10; ++b)
    for (int i = 0; i < 20; ++i) {
      cp.push_back((2 * b + 1) / 20.0);
      cy.push_back(i < 2 * b + 1 ? 1 : 0);
    }
  for (const auto& r : reliability(cp, cy)) CHECK(std::abs(r.frac_pos - r.mean_pred) < 1e-12);
  auto even = reliability(p, y);
  for (const auto& r : even) CHECK(r.count == 2);
  CHECK(reliability(std::vector{0.25, 0.75}, std::vector{0, 1}, 4)[1].count == 1);
  CHECK_THROWS_AS(reliability(p, y, 0), std::invalid_argument);
}

TEST_CASE("auroc examples") {
  CHECK(auroc(std::vector{0.9, 0.1}, std::vector{1, 0}) == 1.0);
  CHECK(auroc(std::vector{0.3, 0.3, 0.3}, std::vector{1, 0, 1}) == 0.5);
  CHECK(auroc(std::vector{0.8, 0.6, 0.4, 0.2}, std::vector{1, 0, 1, 0}) == doctest::Approx(0.75));
  CHECK_THROWS_AS(auroc(std::vector{0.1, 0.2}, std::vector{1, 1}), UndefinedMetric);
}

TEST_CASE("auroc agrees with pairwise enumeration and is rank invariant") {
  RandomStream s(3, {});
  std::vector<double> p;
  std::vector<int> y;
  for (int trial = 0; trial < 50; ++trial) {
    random_case(s, 200, p, y);
    double a = auroc(p, y);
    CHECK(a == doctest::Approx(brute_auroc(p, y)).epsilon(1e-12));
    std::vector<double> cubed(p);
    for (double& x : cubed) x = x * x * x;
    CHECK(auroc(cubed, y) == doctest::Approx(a).epsilon(1e-12));
  }
}

TEST_CASE("accuracy") {
  CHECK(accuracy(std::vector{0.9, 0.1}, std::vector{1, 0}) == 1.0);
  CHECK(accuracy(std::vector{0.4}, std::vector{1}) == 0.0);
  CHECK(accuracy(std::vector{0.5}, std::vector{1}) == 0.0);
  CHECK(accuracy(std::vector{0.5}, std::vector{0}) == 1.0);
  CHECK_THROWS_AS(accuracy(std::vector<double>{}, std::vector<int>{}), std::invalid_argument);
}

TEST_CASE("metric bounds hold on random inputs") {
  RandomStream s(8, {});
  std::vector<double> p;
  std::vector<int> y;
  for (int trial = 0; trial < 100; ++trial) {
    random_case(s, 50, p, y);
    for (double m : {ece(p, y), auroc(p, y), accuracy(p, y)}) {
      CHECK(m >= 0.0);
      CHECK(m <= 1.0);
    }
  }
}

TEST_CASE("reliability CSV format") {
  auto bins = reliability(std::vector{0.15, 0.85}, std::vector{0, 1}, 2);
  std::ostringstream out;
  write_reliability_csv(out, bins);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "bin_lo,bin_hi,count,mean_pred,frac_pos");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2);
}
