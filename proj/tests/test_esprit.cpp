// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <complex>

#include <doctest.h>

#include "doadef/classical/esprit.hpp"
#include "doadef/sim/signal.hpp"

using namespace doadef;
using namespace doadef::sim;
using doadef::classical::esprit_estimate;

namespace {

// Exact covariance A A^H (unit-power uncorrelated sources, no noise).
CMat exact_covariance(const std::vector<double>& angles, const ArrayGeometry& geo) {
  const CMat a = steering_matrix(angles, geo);
  CMat r(a.rows, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.rows; ++j) {
      cd acc(0.0, 0.0);
      for (int l = 0; l < a.cols; ++l) acc += a.at(i, l) * std::conj(a.at(j, l));
      r.at(i, j) = acc;
    }
  return r;
}

}  // namespace

TEST_CASE("noiseless single source at broadside is exact") {
  const auto geo = ArrayGeometry::ula(8);
  const auto est = esprit_estimate(exact_covariance({0.0}, geo), 1, geo);
  CHECK(std::abs(est.angles_deg[0]) < 1e-6);
}

TEST_CASE("noiseless two-source covariance is recovered to machine precision") {
  const auto geo = ArrayGeometry::ula(8);
  const auto est = esprit_estimate(exact_covariance({-20.0, 35.0}, geo), 2, geo);
  CHECK(est.angles_deg[0] == doctest::Approx(-20.0).epsilon(1e-9));
  CHECK(est.angles_deg[1] == doctest::Approx(35.0).epsilon(1e-9));
}

TEST_CASE("mirror symmetry on conjugated covariances") {
  const auto geo = ArrayGeometry::ula(8);
  for (auto angles : {std::vector<double>{12.0}, std::vector<double>{-31.0, 7.5}}) {
    CMat r = exact_covariance(angles, geo);
    CMat rc = r;
    for (auto& v : rc.a) v = std::conj(v);
    const auto est = esprit_estimate(r, static_cast<int>(angles.size()), geo);
    auto est_neg = esprit_estimate(rc, static_cast<int>(angles.size()), geo).angles_deg;
    for (double& v : est_neg) v = -v;
    std::sort(est_neg.begin(), est_neg.end());
    for (std::size_t l = 0; l < angles.size(); ++l)
      CHECK(est.angles_deg[l] == doctest::Approx(est_neg[l]).epsilon(1e-6));
  }
}

TEST_CASE("error paths: geometry, source count, rank collapse") {
  const auto sla = ArrayGeometry::sla8();
  const auto ula = ArrayGeometry::ula(8);
  CHECK_THROWS_AS(esprit_estimate(exact_covariance({0.0}, sla), 1, sla),
                  std::invalid_argument);
  CHECK_THROWS_AS(esprit_estimate(exact_covariance({0.0}, ula), 8, ula),
                  std::domain_error);
  // Identical angles collapse the signal subspace to rank 1.
  const CMat dup = exact_covariance({10.0, 10.0}, ula);
  CHECK_THROWS_AS(esprit_estimate(dup, 2, ula), std::runtime_error);
}

TEST_CASE("monte-carlo accuracy at high SNR") {
  const auto geo = ArrayGeometry::ula(8);
  SourceScenario sc;
  sc.num_sources = 2;
  sc.angles_deg = {-20.0, 35.0};
  sc.snr_db = 20.0;
  sc.snapshots = 2048;
  int hits = 0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    const auto snap = collect_snapshots(sc, geo, static_cast<std::uint64_t>(100 + s));
    const auto est = esprit_estimate(sample_covariance(snap), 2, geo);
    if (std::abs(est.angles_deg[0] + 20.0) < 0.5 && std::abs(est.angles_deg[1] - 35.0) < 0.5)
      ++hits;
  }
  CHECK(hits >= 48);  // >= 95%
}

TEST_CASE("median error shrinks as snapshots double at 0 dB") {
  const auto geo = ArrayGeometry::ula(8);
  SourceScenario sc;
  sc.num_sources = 1;
  sc.angles_deg = {14.5};
  sc.snr_db = 0.0;
  std::vector<double> medians;
  for (int k : {128, 256, 512, 1024, 2048}) {
    sc.snapshots = k;
    std::vector<double> errs;
    for (int s = 0; s < 50; ++s) {
      const auto snap =
          collect_snapshots(sc, geo, static_cast<std::uint64_t>(7000 + 100 * k + s));
      const auto est = esprit_estimate(sample_covariance(snap), 1, geo);
      errs.push_back(std::abs(est.angles_deg[0] - 14.5));
    }
    std::sort(errs.begin(), errs.end());
    medians.push_back(errs[errs.size() / 2]);
  }
  for (std::size_t i = 1; i < medians.size(); ++i) CHECK(medians[i] <= medians[i - 1]);
}
