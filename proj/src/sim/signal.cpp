// SPDX-License-Identifier: Apache-2.0
#include "doadef/sim/signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace doadef::sim {

namespace {
constexpr double kPi = 3.14159265358979323846;

constexpr int kSamplesPerSymbol = 8;
constexpr int kRrcSpanSymbols = 8;  // taps on each side of the peak
constexpr double kRrcRollOff = 0.5;

constexpr int kOfdmSubcarriers = 64;
constexpr int kOfdmCyclicPrefix = 16;
}  // namespace

ArrayGeometry::ArrayGeometry(std::vector<double> pos) : positions(std::move(pos)) {
  if (positions.empty()) throw std::domain_error("array geometry needs at least one element");
  if (positions.front() != 0.0)
    throw std::domain_error("first element position must be 0");
  for (std::size_t i = 1; i < positions.size(); ++i)
    if (positions[i] <= positions[i - 1])
      throw std::domain_error("element positions must be strictly increasing");
}

bool ArrayGeometry::is_uniform() const {
  for (std::size_t i = 1; i < positions.size(); ++i)
    if (positions[i] - positions[i - 1] != 1.0) return false;
  return true;
}

ArrayGeometry ArrayGeometry::ula(int elements) {
  if (elements < 1) throw std::domain_error("element count must be positive");
  std::vector<double> pos(elements);
  for (int m = 0; m < elements; ++m) pos[m] = m;
  return ArrayGeometry(std::move(pos));
}

ArrayGeometry ArrayGeometry::sla8() {
  return ArrayGeometry({0, 1, 2, 5, 6, 9, 10, 11});
}

Modulation modulation_from_string(const std::string& name) {
  std::string s;
  for (char c : name) s.push_back(static_cast<char>(std::tolower(c)));
  if (s == "bpsk") return Modulation::kBpsk;
  if (s == "qam16" || s == "16qam") return Modulation::kQam16;
  if (s == "qam64" || s == "64qam") return Modulation::kQam64;
  if (s == "qam256" || s == "256qam") return Modulation::kQam256;
  if (s == "ofdm") return Modulation::kOfdm;
  throw std::invalid_argument("unsupported modulation: " + name);
}

std::string to_string(Modulation m) {
  switch (m) {
    case Modulation::kBpsk: return "bpsk";
    case Modulation::kQam16: return "qam16";
    case Modulation::kQam64: return "qam64";
    case Modulation::kQam256: return "qam256";
    case Modulation::kOfdm: return "ofdm";
  }
  return "?";
}

void SourceScenario::validate() const {
  if (num_sources < 1) throw std::domain_error("source count must be positive");
  if (static_cast<int>(angles_deg.size()) != num_sources)
    throw std::domain_error("angle count does not match source count");
  for (double a : angles_deg)
    if (!(a > -90.0 && a < 90.0))
      throw std::domain_error("source angles must lie in (-90, 90)");
  for (std::size_t i = 1; i < angles_deg.size(); ++i) {
    if (angles_deg[i] == angles_deg[i - 1])
      throw std::domain_error("source angles must be pairwise distinct");
    if (angles_deg[i] < angles_deg[i - 1])
      throw std::domain_error("source angles must be sorted ascending");
  }
  if (snapshots < 1) throw std::domain_error("snapshot count must be positive");
}

std::vector<cd> steering_vector(double theta_deg, const ArrayGeometry& geometry) {
  if (!(theta_deg >= -90.0 && theta_deg <= 90.0))
    throw std::domain_error("steering angle out of [-90, 90]");
  const double s = std::sin(theta_deg * kPi / 180.0);
  std::vector<cd> a(geometry.positions.size());
  for (std::size_t m = 0; m < a.size(); ++m) {
    const double phase = -kPi * geometry.positions[m] * s;
    a[m] = cd(std::cos(phase), std::sin(phase));
  }
  return a;
}

CMat steering_matrix(const std::vector<double>& angles_deg, const ArrayGeometry& geometry) {
  if (angles_deg.empty()) throw std::domain_error("steering matrix needs at least one angle");
  const int m = geometry.element_count();
  CMat a(m, static_cast<int>(angles_deg.size()));
  for (std::size_t l = 0; l < angles_deg.size(); ++l) {
    const auto col = steering_vector(angles_deg[l], geometry);
    for (int i = 0; i < m; ++i) a.at(i, static_cast<int>(l)) = col[i];
  }
  return a;
}

namespace {

// Root-raised-cosine impulse response sampled at kSamplesPerSymbol, scaled so
// sum(h^2) = kSamplesPerSymbol. With unit-energy i.i.d. symbols this makes
// the shaped waveform unit average power.
std::vector<double> rrc_taps() {
  const int half = kRrcSpanSymbols * kSamplesPerSymbol;
  std::vector<double> h(2 * half + 1);
  const double beta = kRrcRollOff;
  for (int i = 0; i < static_cast<int>(h.size()); ++i) {
    const double t = static_cast<double>(i - half) / kSamplesPerSymbol;
    double v;
    if (t == 0.0) {
      v = 1.0 - beta + 4.0 * beta / kPi;
    } else if (std::abs(std::abs(4.0 * beta * t) - 1.0) < 1e-12) {
      const double arg = kPi / (4.0 * beta);
      v = beta / std::sqrt(2.0) *
          ((1.0 + 2.0 / kPi) * std::sin(arg) + (1.0 - 2.0 / kPi) * std::cos(arg));
    } else {
      const double num = std::sin(kPi * t * (1.0 - beta)) +
                         4.0 * beta * t * std::cos(kPi * t * (1.0 + beta));
      const double den = kPi * t * (1.0 - 16.0 * beta * beta * t * t);
      v = num / den;
    }
    h[i] = v;
  }
  double e = 0.0;
  for (double v : h) e += v * v;
  const double g = std::sqrt(kSamplesPerSymbol / e);
  for (double& v : h) v *= g;
  return h;
}

cd random_bpsk(Rng& rng) { return cd(rng.uniform_int(2) * 2.0 - 1.0, 0.0); }

// Square QAM with unit average symbol energy.
cd random_qam(Rng& rng, int side) {
  const double energy = 2.0 * (side * side - 1.0) / 3.0;
  const double scale = 1.0 / std::sqrt(energy);
  const double re = (2 * rng.uniform_int(side) - (side - 1)) * scale;
  const double im = (2 * rng.uniform_int(side) - (side - 1)) * scale;
  return cd(re, im);
}

cd random_symbol(Modulation m, Rng& rng) {
  switch (m) {
    case Modulation::kBpsk: return random_bpsk(rng);
    case Modulation::kQam16: return random_qam(rng, 4);
    case Modulation::kQam64: return random_qam(rng, 8);
    case Modulation::kQam256: return random_qam(rng, 16);
    default: throw std::invalid_argument("not a single-carrier modulation");
  }
}

void fill_single_carrier(Modulation mod, int k, Rng& rng, cd* out) {
  static const std::vector<double> taps = rrc_taps();
  const int half = kRrcSpanSymbols * kSamplesPerSymbol;
  const int ntaps = static_cast<int>(taps.size());
  // Output sample n corresponds to convolution index n + half, so the first
  // emitted sample already sits in the filter's steady state.
  const int nsym = (k - 1 + 2 * half) / kSamplesPerSymbol + 1;
  std::vector<cd> symbols(nsym);
  for (auto& s : symbols) s = random_symbol(mod, rng);
  for (int n = 0; n < k; ++n) {
    const int t = n + half;
    cd acc(0.0, 0.0);
    int m_lo = (t - (ntaps - 1) + kSamplesPerSymbol - 1) / kSamplesPerSymbol;
    if (m_lo < 0) m_lo = 0;
    int m_hi = t / kSamplesPerSymbol;
    if (m_hi >= nsym) m_hi = nsym - 1;
    for (int m = m_lo; m <= m_hi; ++m) acc += symbols[m] * taps[t - m * kSamplesPerSymbol];
    out[n] = acc;
  }
}

void fill_ofdm(int k, Rng& rng, cd* out) {
  const int n = kOfdmSubcarriers;
  const int block = n + kOfdmCyclicPrefix;
  std::vector<cd> freq(n), time(n);
  int written = 0;
  while (written < k) {
    for (auto& f : freq) f = random_qam(rng, 4);
    // Unitary IDFT keeps the average sample power equal to the unit symbol
    // energy.
    for (int t = 0; t < n; ++t) {
      cd acc(0.0, 0.0);
      for (int q = 0; q < n; ++q) {
        const double ph = 2.0 * kPi * q * t / n;
        acc += freq[q] * cd(std::cos(ph), std::sin(ph));
      }
      time[t] = acc / std::sqrt(static_cast<double>(n));
    }
    for (int i = 0; i < block && written < k; ++i, ++written) {
      const int src = (i < kOfdmCyclicPrefix) ? n - kOfdmCyclicPrefix + i : i - kOfdmCyclicPrefix;
      out[written] = time[src];
    }
  }
}

}  // namespace

CMat synthesize_sources(const SourceScenario& scenario, Rng& rng) {
  scenario.validate();
  const int k = scenario.snapshots;
  CMat s(scenario.num_sources, k);
  for (int l = 0; l < scenario.num_sources; ++l) {
    cd* row = &s.at(l, 0);
    if (scenario.modulation == Modulation::kOfdm)
      fill_ofdm(k, rng, row);
    else
      fill_single_carrier(scenario.modulation, k, rng, row);
  }
  return s;
}

CMat synthesize_sources(const SourceScenario& scenario, std::uint64_t seed) {
  Rng rng(seed);
  return synthesize_sources(scenario, rng);
}

SnapshotMatrix collect_snapshots(const SourceScenario& scenario,
                                 const ArrayGeometry& geometry, Rng& rng) {
  scenario.validate();
  const CMat a = steering_matrix(scenario.angles_deg, geometry);
  const CMat s = synthesize_sources(scenario, rng);
  const int m = geometry.element_count();
  const int k = scenario.snapshots;
  SnapshotMatrix snap{CMat(m, k)};
  for (int i = 0; i < m; ++i)
    for (int l = 0; l < scenario.num_sources; ++l) {
      const cd w = a.at(i, l);
      const cd* srow = &s.at(l, 0);
      cd* xrow = &snap.x.at(i, 0);
      for (int n = 0; n < k; ++n) xrow[n] += w * srow[n];
    }
  if (std::isfinite(scenario.snr_db)) {
    double psig = 0.0;
    for (const cd& v : snap.x.a) psig += std::norm(v);
    psig /= static_cast<double>(snap.x.a.size());
    const double sigma = std::sqrt(psig * std::pow(10.0, -scenario.snr_db / 10.0));
    for (cd& v : snap.x.a) v += sigma * rng.cnormal();
  }
  return snap;
}

SnapshotMatrix collect_snapshots(const SourceScenario& scenario,
                                 const ArrayGeometry& geometry, std::uint64_t seed) {
  Rng rng(seed);
  return collect_snapshots(scenario, geometry, rng);
}

CMat sample_covariance(const SnapshotMatrix& snapshots) {
  const int m = snapshots.x.rows;
  const int k = snapshots.x.cols;
  if (k < 1) throw std::domain_error("sample covariance needs at least one snapshot");
  CMat r(m, m);
  for (int i = 0; i < m; ++i) {
    const cd* xi = &snapshots.x.at(i, 0);
    for (int j = i; j < m; ++j) {
      const cd* xj = &snapshots.x.at(j, 0);
      cd acc(0.0, 0.0);
      for (int n = 0; n < k; ++n) acc += xi[n] * std::conj(xj[n]);
      acc /= static_cast<double>(k);
      r.at(i, j) = acc;
      r.at(j, i) = std::conj(acc);
    }
  }
  return r;
}

Tensor encode_covariance_tensor(const CMat& r) {
  if (r.rows != r.cols) throw std::domain_error("covariance matrix must be square");
  const int m = r.rows;
  Tensor t({3, m, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const cd v = r.at(i, j);
      t.at(0, i, j) = v.real();
      t.at(1, i, j) = v.imag();
      t.at(2, i, j) = (v.real() == 0.0 && v.imag() == 0.0) ? 0.0
                                                           : std::atan2(v.imag(), v.real());
    }
  double ms = 0.0;
  for (double v : t.v) ms += v * v;
  ms /= static_cast<double>(t.size());
  if (ms > 0.0) {
    const double inv = 1.0 / std::sqrt(ms);
    for (double& v : t.v) v *= inv;
  }
  return t;
}

CMat tensor_to_covariance(const Tensor& t) {
  if (t.shape.size() != 3 || t.shape[0] != 3 || t.shape[1] != t.shape[2])
    throw std::domain_error("expected a [3,M,M] covariance tensor");
  const int m = t.shape[1];
  CMat r(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) r.at(i, j) = cd(t.at(0, i, j), t.at(1, i, j));
  return r;
}

}  // namespace doadef::sim
