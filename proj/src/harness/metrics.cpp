// SPDX-License-Identifier: Apache-2.0
#include "doadef/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace doadef::harness {

namespace {
void check_shapes(const std::vector<std::vector<double>>& predicted,
                  const std::vector<std::vector<double>>& truth) {
  if (predicted.empty()) throw std::domain_error("metrics need at least one sample");
  if (predicted.size() != truth.size())
    throw std::domain_error("prediction/truth sample counts differ");
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i].size() != truth[i].size() || predicted[i].empty())
      throw std::domain_error("prediction/truth source counts differ");
}
}  // namespace

double rmse(const std::vector<std::vector<double>>& predicted,
            const std::vector<std::vector<double>>& truth) {
  check_shapes(predicted, truth);
  double acc = 0.0;
  std::size_t terms = 0;
  for (std::size_t b = 0; b < predicted.size(); ++b) {
    std::vector<double> p = predicted[b], t = truth[b];
    std::sort(p.begin(), p.end());
    std::sort(t.begin(), t.end());
    for (std::size_t l = 0; l < p.size(); ++l) {
      const double e = p[l] - t[l];
      acc += e * e;
      ++terms;
    }
  }
  return std::sqrt(acc / static_cast<double>(terms));
}

double accuracy(const std::vector<std::vector<double>>& predicted,
                const std::vector<std::vector<double>>& truth, double zeta_deg) {
  check_shapes(predicted, truth);
  if (!(zeta_deg > 0.0)) throw std::domain_error("zeta must be positive");
  std::size_t hits = 0;
  for (std::size_t b = 0; b < predicted.size(); ++b) {
    std::vector<double> p = predicted[b], t = truth[b];
    std::sort(p.begin(), p.end());
    std::sort(t.begin(), t.end());
    bool ok = true;
    for (std::size_t l = 0; l < p.size(); ++l)
      if (std::abs(p[l] - t[l]) > zeta_deg) {
        ok = false;
        break;
      }
    if (ok) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(predicted.size());
}

WelchResult welch_t_test(const std::vector<double>& sample_a,
                         const std::vector<double>& sample_b) {
  const std::size_t na = sample_a.size(), nb = sample_b.size();
  if (na < 2 || nb < 2) throw std::domain_error("welch test needs n >= 2 per sample");

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto variance = [&](const std::vector<double>& v, double mu) {
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return s / static_cast<double>(v.size() - 1);
  };

  const double ma = mean(sample_a), mb = mean(sample_b);
  const double va = variance(sample_a, ma), vb = variance(sample_b, mb);
  const double sa = va / static_cast<double>(na), sb = vb / static_cast<double>(nb);

  WelchResult out;
  if (sa + sb == 0.0) {
    if (ma == mb) return out;  // t=0, p=1
    out.t = ma > mb ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
    out.p = 0.0;
    return out;
  }
  out.t = (ma - mb) / std::sqrt(sa + sb);
  const double da = sa * sa / static_cast<double>(na - 1);
  const double db = sb * sb / static_cast<double>(nb - 1);
  out.dof = (sa + sb) * (sa + sb) / (da + db);
  boost::math::students_t dist(out.dof);
  out.p = 2.0 * boost::math::cdf(dist, -std::abs(out.t));
  return out;
}

}  // namespace doadef::harness
