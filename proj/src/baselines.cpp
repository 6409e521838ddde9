#include "roomeq/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace roomeq {

namespace {

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

std::vector<Equalizer> to_equalizers(const Vec& c, const ParamRanges& ranges, int n_sources) {
  const int nb = ranges.bands();
  const int per_src = ranges.params_per_source();
  std::vector<Equalizer> eqs(static_cast<size_t>(n_sources));
  for (int s = 0; s < n_sources; ++s) {
    Equalizer& eq = eqs[static_cast<size_t>(s)];
    eq.sections.resize(static_cast<size_t>(nb));
    const int base = s * per_src;
    for (int b = 0; b < nb; ++b) {
      eq.sections[static_cast<size_t>(b)] = {c[base + 3 * b], c[base + 3 * b + 1],
                                             c[base + 3 * b + 2], b};
    }
    eq.vs_db = c[base + 3 * nb];
  }
  return eqs;
}

void clamp_params(Vec& c, const ParamRanges& ranges, int n_sources) {
  const int nb = ranges.bands();
  const int per_src = ranges.params_per_source();
  for (int s = 0; s < n_sources; ++s) {
    const int base = s * per_src;
    for (int b = 0; b < nb; ++b) {
      c[base + 3 * b] = clampd(c[base + 3 * b], ranges.fc_bands[static_cast<size_t>(b)].fc_min,
                               ranges.fc_bands[static_cast<size_t>(b)].fc_max);
      c[base + 3 * b + 1] = clampd(c[base + 3 * b + 1], ranges.q_min, ranges.q_max);
      c[base + 3 * b + 2] = clampd(c[base + 3 * b + 2], ranges.v0_min_db, ranges.v0_max_db);
    }
    c[base + 3 * nb] = clampd(c[base + 3 * nb], ranges.vs_min_db, ranges.vs_max_db);
  }
}

}  // namespace

DsmResult dsm_optimize(const Simulator& sim, const ParamRanges& ranges, const DsmConfig& config) {
  if (!(config.gamma > 0.0 && config.gamma < 1.0))
    throw std::domain_error("dsm_optimize: gamma must lie in (0, 1)");
  const int S = sim.n_sources();
  const int nb = ranges.bands();
  const int per_src = ranges.params_per_source();
  std::mt19937 rng(config.seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);

  // Random start drawn uniformly over the full parameter ranges.  Starting
  // from the neutral point would freeze the search: the multiplicative
  // perturbation can never move a coordinate whose value is (near) zero, and
  // a near-zero start leaves the gain coordinates with steps far too small
  // to make progress within any reasonable iteration budget.
  const auto affine = [](double p, double lo, double hi) {
    return 0.5 * (hi - lo) * p + 0.5 * (hi + lo);
  };
  Vec c(static_cast<Eigen::Index>(per_src) * S);
  for (int s = 0; s < S; ++s) {
    const int base = s * per_src;
    for (int b = 0; b < nb; ++b) {
      const FcRange& fr = ranges.fc_bands[static_cast<size_t>(b)];
      c[base + 3 * b] = affine(jitter(rng), fr.fc_min, fr.fc_max);
      c[base + 3 * b + 1] = affine(jitter(rng), ranges.q_min, ranges.q_max);
      c[base + 3 * b + 2] = affine(jitter(rng), ranges.v0_min_db, ranges.v0_max_db);
    }
    c[base + 3 * nb] = affine(jitter(rng), ranges.vs_min_db, ranges.vs_max_db);
  }
  clamp_params(c, ranges, S);

  DsmResult result;
  double best = sim.loss(to_equalizers(c, ranges, S)).total;
  result.loss_history.reserve(static_cast<size_t>(config.iterations));

  std::uniform_real_distribution<double> gamma_draw(-config.gamma, config.gamma);
  Vec cand(c.size());
  for (int it = 0; it < config.iterations; ++it) {
    for (Eigen::Index i = 0; i < c.size(); ++i) cand[i] = c[i] * (1.0 + gamma_draw(rng));
    clamp_params(cand, ranges, S);
    const double trial = sim.loss(to_equalizers(cand, ranges, S)).total;
    if (trial < best) {
      best = trial;
      c = cand;
    }
    result.loss_history.push_back(best);
  }
  result.equalizers = to_equalizers(c, ranges, S);
  return result;
}

Arr fd_target_magnitude(const Simulator& sim) {
  const FrequencyGrid& grid = sim.grid();
  const double f_low = sim.bands().bands.front().f_lo;
  const double f_high = sim.bands().bands.back().f_hi;
  const double third = 1.0 / 3.0;
  Arr d = Arr::Zero(grid.bins());
  for (int k = 1; k < grid.bins(); ++k) {
    const double f = grid.bin_hz(k);
    if (f >= f_low && f <= f_high) {
      d[k] = 1.0;
    } else if (f > f_high) {
      const double x = std::log2(f / f_high);
      if (x < third) d[k] = 0.5 + 0.5 * std::cos(3.0 * M_PI * x);
    } else {
      const double x = std::log2(f_low / f);
      if (x < third) d[k] = 0.5 + 0.5 * std::cos(3.0 * M_PI * x);
    }
  }
  return d;
}

std::vector<CArr> fd_inverse_spectra(const Simulator& sim, double beta_fd) {
  if (beta_fd < 0.0) throw std::domain_error("fd_inverse_spectra: beta_fd must be >= 0");
  const int S = sim.n_sources();
  const int M = sim.n_mics();
  const int nb = sim.grid().bins();
  const Arr d_mag = fd_target_magnitude(sim);

  std::vector<CArr> g(static_cast<size_t>(S), CArr::Zero(nb));
  Eigen::MatrixXcd h(M, S);
  for (int k = 0; k < nb; ++k) {
    for (int s = 0; s < S; ++s)
      for (int m = 0; m < M; ++m) h(m, s) = sim.path_spectrum(s, m)[k];
    const Eigen::VectorXcd d = Eigen::VectorXcd::Constant(M, cplx(d_mag[k], 0.0));
    Eigen::MatrixXcd normal = h.adjoint() * h;
    normal.diagonal().array() += beta_fd;
    Eigen::VectorXcd x;
    if (beta_fd == 0.0) {
      const Eigen::FullPivLU<Eigen::MatrixXcd> lu(normal);
      if (!lu.isInvertible())
        throw std::domain_error(
            "fd_design: singular normal matrix with beta_fd = 0; use a positive "
            "regularization term");
      x = lu.solve(h.adjoint() * d);
    } else {
      x = normal.ldlt().solve(h.adjoint() * d);
    }
    for (int s = 0; s < S; ++s) g[static_cast<size_t>(s)][k] = x[s];
  }
  return g;
}

std::vector<FirEqualizer> fd_design(const Simulator& sim, int filter_len, double beta_fd) {
  const int n = sim.grid().size;
  if (filter_len < 1 || filter_len > n)
    throw std::domain_error("fd_design: filter_len must lie in [1, DFT size]");
  const std::vector<CArr> g = fd_inverse_spectra(sim, beta_fd);

  Eigen::FFT<double> fft;
  std::vector<FirEqualizer> firs;
  firs.reserve(g.size());
  std::vector<std::complex<double>> full(static_cast<size_t>(n));
  std::vector<double> time(static_cast<size_t>(n));
  for (const CArr& gs : g) {
    for (int k = 0; k <= n / 2; ++k) full[static_cast<size_t>(k)] = gs[k];
    for (int k = n / 2 + 1; k < n; ++k) full[static_cast<size_t>(k)] = std::conj(gs[n - k]);
    fft.inv(time, full);
    // circular shift by half the DFT size, then keep the centered window
    FirEqualizer fir;
    fir.taps.resize(filter_len);
    const int start = n / 2 - filter_len / 2;
    for (int i = 0; i < filter_len; ++i)
      fir.taps[i] = time[static_cast<size_t>(((start + i) + n / 2 + n) % n)];
    firs.push_back(std::move(fir));
  }
  return firs;
}

CArr fir_spectrum(const FirEqualizer& fir, const FrequencyGrid& grid) {
  const int n = grid.size;
  if (static_cast<int>(fir.taps.size()) > n)
    throw std::domain_error("fir_spectrum: filter longer than the DFT size");
  Eigen::FFT<double> fft;
  std::vector<double> padded(static_cast<size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < fir.taps.size(); ++i) padded[static_cast<size_t>(i)] = fir.taps[i];
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, padded);
  CArr half(grid.bins());
  for (int k = 0; k < grid.bins(); ++k) half[k] = spec[static_cast<size_t>(k)];
  return half;
}

std::vector<CArr> fir_source_spectra(const std::vector<FirEqualizer>& firs,
                                     const FrequencyGrid& grid) {
  std::vector<CArr> g(firs.size());
  for (size_t s = 0; s < firs.size(); ++s) g[s] = fir_spectrum(firs[s], grid);
  return g;
}

std::vector<CArr> fir_equalized_response(const Simulator& sim,
                                         const std::vector<FirEqualizer>& firs) {
  if (static_cast<int>(firs.size()) != sim.n_sources())
    throw std::invalid_argument("fir_equalized_response: one FIR per source required");
  return sim.mic_spectra(fir_source_spectra(firs, sim.grid()));
}

}  // namespace roomeq
