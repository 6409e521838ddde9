#include "roomeq/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace roomeq {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kLn10Over20 = 0.11512925464970229;
}  // namespace

Simulator::Simulator(const Scene& scene, const FrequencyGrid& grid, double gamma2_override)
    : grid_(grid) {
  if (!scene.preprocessed)
    throw std::invalid_argument("Simulator: scene must be preprocessed first");
  if (grid.size < scene.longest_rir())
    throw std::invalid_argument("Simulator: DFT size below longest RIR");

  S_ = scene.n_sources;
  M_ = scene.n_mics;
  ref_ = scene.reference_source;
  gamma1_ = 1.0;
  gamma2_ = gamma2_override >= 0.0 ? gamma2_override : std::log2(double(S_)) + std::log2(double(M_));

  bands_ = make_bands(scene.f_low, scene.f_high, grid_);
  target_ = TargetResponse::flat(bands_).magnitudes;
  paths_ = scene_spectra(scene, grid_);

  const int nb = grid_.bins();
  z1_.resize(nb);
  z2_.resize(nb);
  parseval_w_.resize(nb);
  for (int k = 0; k < nb; ++k) {
    const double w = 2.0 * kPi * k / grid_.size;
    z1_[k] = std::polar(1.0, -w);
    z2_[k] = std::polar(1.0, -2.0 * w);
    parseval_w_[k] = ((k == 0 || k == grid_.size / 2) ? 1.0 : 2.0) / grid_.size;
  }

  band_of_bin_.assign(static_cast<size_t>(nb), -1);
  for (int b = 0; b < bands_.count(); ++b)
    for (int k = bands_.bands[b].k_lo; k < bands_.bands[b].k_hi; ++k)
      band_of_bin_[static_cast<size_t>(k)] = b;

  energy_pre_.resize(S_, M_);
  for (int s = 0; s < S_; ++s)
    for (int m = 0; m < M_; ++m) {
      energy_pre_(s, m) = (parseval_w_ * path_spectrum(s, m).abs2()).sum();
      if (!(energy_pre_(s, m) > 0.0))
        throw std::domain_error("Simulator: zero pre-equalization path energy");
    }
}

namespace {

CArr cascade_response(const CArr& z1, const CArr& z2, const BiquadCoeffs& c) {
  return (c.b0 + c.b1 * z1 + c.b2 * z2) / (c.a0 + c.a1 * z1 + c.a2 * z2);
}

}  // namespace

std::vector<CArr> Simulator::mic_spectra(const std::vector<CArr>& source_responses) const {
  std::vector<CArr> out(static_cast<size_t>(M_));
  for (int m = 0; m < M_; ++m) {
    CArr sum = CArr::Zero(grid_.bins());
    for (int s = 0; s < S_; ++s) sum += path_spectrum(s, m) * source_responses[static_cast<size_t>(s)];
    out[static_cast<size_t>(m)] = std::move(sum);
  }
  return out;
}

Eigen::MatrixXd Simulator::path_energies(const std::vector<CArr>& source_responses) const {
  Eigen::MatrixXd e(S_, M_);
  for (int s = 0; s < S_; ++s)
    for (int m = 0; m < M_; ++m)
      e(s, m) = (parseval_w_ * (path_spectrum(s, m) * source_responses[static_cast<size_t>(s)]).abs2()).sum();
  return e;
}

Eigen::MatrixXd Simulator::band_magnitudes(const std::vector<CArr>& spectra) const {
  Eigen::MatrixXd out(bands_.count(), static_cast<int>(spectra.size()));
  for (size_t m = 0; m < spectra.size(); ++m)
    out.col(static_cast<int>(m)) = band_average(spectra[m].abs(), bands_).matrix();
  return out;
}

LossBreakdown Simulator::loss_impl(const std::vector<CArr>& source_responses,
                                   LossDetail* detail) const {
  LossBreakdown out;
  out.gamma1 = gamma1_;
  out.gamma2 = gamma2_;

  const std::vector<CArr> mics = mic_spectra(source_responses);
  const Eigen::MatrixXd mags = band_magnitudes(mics);
  for (int m = 0; m < M_; ++m)
    out.l1 += std::sqrt((mags.col(m).array() - target_).square().sum());

  const Eigen::MatrixXd e_post = path_energies(source_responses);
  Eigen::MatrixXd r_pre(S_, M_), r_post(S_, M_);
  for (int m = 0; m < M_; ++m) {
    for (int s = 0; s < S_; ++s) {
      if (!(e_post(s, m) > 0.0))
        throw std::domain_error("loss: zero equalized path energy, ratio undefined");
      r_pre(s, m) = energy_pre_(ref_, m) / energy_pre_(s, m);
      r_post(s, m) = e_post(ref_, m) / e_post(s, m);
    }
    out.l2 += std::sqrt((r_post.col(m) - r_pre.col(m)).squaredNorm());
  }
  out.total = gamma1_ * out.l1 + gamma2_ * out.l2;

  if (detail) {
    detail->band_mags = mags;
    detail->ratio_pre = r_pre;
    detail->ratio_post = r_post;
  }
  return out;
}

LossBreakdown Simulator::loss_from_responses(const std::vector<CArr>& source_responses,
                                             LossDetail* detail) const {
  if (static_cast<int>(source_responses.size()) != S_)
    throw std::invalid_argument("loss: response count does not match source count");
  return loss_impl(source_responses, detail);
}

LossBreakdown Simulator::loss(const std::vector<Equalizer>& eqs, LossDetail* detail) const {
  if (static_cast<int>(eqs.size()) != S_)
    throw std::invalid_argument("loss: equalizer count does not match source count");
  std::vector<CArr> resp(static_cast<size_t>(S_));
  for (int s = 0; s < S_; ++s) {
    const Equalizer& eq = eqs[static_cast<size_t>(s)];
    CArr g = CArr::Constant(grid_.bins(), cplx(std::pow(10.0, eq.vs_db / 20.0), 0.0));
    for (const auto& sec : eq.sections)
      g *= cascade_response(z1_, z2_, design_peaking_section(sec.fc, sec.q, sec.v0_db, grid_.fs));
    resp[static_cast<size_t>(s)] = std::move(g);
  }
  return loss_impl(resp, detail);
}

LossBreakdown Simulator::loss(const std::vector<CoeffEqualizer>& eqs, LossDetail* detail) const {
  if (static_cast<int>(eqs.size()) != S_)
    throw std::invalid_argument("loss: equalizer count does not match source count");
  std::vector<CArr> resp(static_cast<size_t>(S_));
  for (int s = 0; s < S_; ++s) {
    const CoeffEqualizer& eq = eqs[static_cast<size_t>(s)];
    CArr g = CArr::Constant(grid_.bins(), cplx(std::pow(10.0, eq.vs_db / 20.0), 0.0));
    for (const auto& c : eq.sos) g *= cascade_response(z1_, z2_, c);
    resp[static_cast<size_t>(s)] = std::move(g);
  }
  return loss_impl(resp, detail);
}

LossBreakdown Simulator::loss_and_gradient(const Vec& p, const ParamRanges& ranges,
                                           Vec& grad) const {
  const std::vector<Equalizer> eqs = denormalize(p, ranges);
  if (static_cast<int>(eqs.size()) != S_)
    throw std::invalid_argument("loss_and_gradient: parameter count does not match sources");
  const int nb = grid_.bins();
  const int n_sec = ranges.bands();
  const int per_src = ranges.params_per_source();

  // ---- forward pass -------------------------------------------------------
  std::vector<std::vector<BiquadCoeffs>> coeffs(static_cast<size_t>(S_));
  std::vector<std::vector<SectionGrads>> cgrads(static_cast<size_t>(S_));
  std::vector<std::vector<CArr>> num_resp(static_cast<size_t>(S_)), den_resp(static_cast<size_t>(S_));
  std::vector<CArr> g_src(static_cast<size_t>(S_));
  std::vector<double> vs_lin(static_cast<size_t>(S_));

  for (int s = 0; s < S_; ++s) {
    const Equalizer& eq = eqs[static_cast<size_t>(s)];
    vs_lin[static_cast<size_t>(s)] = std::pow(10.0, eq.vs_db / 20.0);
    CArr g = CArr::Constant(nb, cplx(vs_lin[static_cast<size_t>(s)], 0.0));
    coeffs[static_cast<size_t>(s)].resize(static_cast<size_t>(n_sec));
    cgrads[static_cast<size_t>(s)].resize(static_cast<size_t>(n_sec));
    num_resp[static_cast<size_t>(s)].resize(static_cast<size_t>(n_sec));
    den_resp[static_cast<size_t>(s)].resize(static_cast<size_t>(n_sec));
    for (int j = 0; j < n_sec; ++j) {
      const ParametricSection& sec = eq.sections[static_cast<size_t>(j)];
      BiquadCoeffs& c = coeffs[static_cast<size_t>(s)][static_cast<size_t>(j)];
      c = design_peaking_section(sec.fc, sec.q, sec.v0_db, grid_.fs,
                                 &cgrads[static_cast<size_t>(s)][static_cast<size_t>(j)]);
      num_resp[static_cast<size_t>(s)][static_cast<size_t>(j)] = c.b0 + c.b1 * z1_ + c.b2 * z2_;
      den_resp[static_cast<size_t>(s)][static_cast<size_t>(j)] = c.a0 + c.a1 * z1_ + c.a2 * z2_;
      g *= num_resp[static_cast<size_t>(s)][static_cast<size_t>(j)] /
           den_resp[static_cast<size_t>(s)][static_cast<size_t>(j)];
    }
    g_src[static_cast<size_t>(s)] = std::move(g);
  }

  std::vector<CArr> path_eq(static_cast<size_t>(S_ * M_));
  std::vector<CArr> mic_sum(static_cast<size_t>(M_), CArr::Zero(nb));
  for (int s = 0; s < S_; ++s)
    for (int m = 0; m < M_; ++m) {
      CArr& pe = path_eq[static_cast<size_t>(s) * M_ + m];
      pe = path_spectrum(s, m) * g_src[static_cast<size_t>(s)];
      mic_sum[static_cast<size_t>(m)] += pe;
    }

  LossBreakdown out;
  out.gamma1 = gamma1_;
  out.gamma2 = gamma2_;

  Eigen::MatrixXd mags(bands_.count(), M_);
  Eigen::VectorXd l1_inner(M_);
  for (int m = 0; m < M_; ++m) {
    mags.col(m) = band_average(mic_sum[static_cast<size_t>(m)].abs(), bands_).matrix();
    l1_inner[m] = std::sqrt((mags.col(m).array() - target_).square().sum());
    out.l1 += l1_inner[m];
  }

  Eigen::MatrixXd e_post(S_, M_);
  for (int s = 0; s < S_; ++s)
    for (int m = 0; m < M_; ++m) {
      e_post(s, m) = (parseval_w_ * path_eq[static_cast<size_t>(s) * M_ + m].abs2()).sum();
      if (!(e_post(s, m) > 0.0))
        throw std::domain_error("loss: zero equalized path energy, ratio undefined");
    }
  Eigen::MatrixXd r_pre(S_, M_), r_post(S_, M_);
  Eigen::VectorXd l2_inner(M_);
  for (int m = 0; m < M_; ++m) {
    for (int s = 0; s < S_; ++s) {
      r_pre(s, m) = energy_pre_(ref_, m) / energy_pre_(s, m);
      r_post(s, m) = e_post(ref_, m) / e_post(s, m);
    }
    l2_inner[m] = std::sqrt((r_post.col(m) - r_pre.col(m)).squaredNorm());
    out.l2 += l2_inner[m];
  }
  out.total = gamma1_ * out.l1 + gamma2_ * out.l2;

  // ---- adjoint pass -------------------------------------------------------
  // Adjoint convention: for complex node x, x_bar = dL/dRe[x] + i dL/dIm[x],
  // so dL = sum_k Re[conj(x_bar) dx] and holomorphic y=f(x) gives
  // x_bar = conj(f'(x)) y_bar.
  std::vector<CArr> mic_bar(static_cast<size_t>(M_));
  for (int m = 0; m < M_; ++m) {
    CArr bar = CArr::Zero(nb);
    if (l1_inner[m] > 0.0) {
      for (int b = 0; b < bands_.count(); ++b) {
        const Band& band = bands_.bands[static_cast<size_t>(b)];
        const double hm = mags(b, m);
        if (!(hm > 0.0))
          throw std::domain_error("gradient: zero in-band magnitude, |H| derivative singular");
        const double alpha = (hm - target_[b]) / l1_inner[m];
        const double w = gamma1_ * alpha / (hm * band.bins());
        bar.segment(band.k_lo, band.bins()) =
            w * mic_sum[static_cast<size_t>(m)].segment(band.k_lo, band.bins());
      }
    }
    mic_bar[static_cast<size_t>(m)] = std::move(bar);
  }

  Eigen::MatrixXd dl_de = Eigen::MatrixXd::Zero(S_, M_);
  for (int m = 0; m < M_; ++m) {
    if (l2_inner[m] <= 0.0) continue;
    for (int s = 0; s < S_; ++s) {
      if (s == ref_) continue;  // r_post(ref,m) == 1 identically
      const double beta = (r_post(s, m) - r_pre(s, m)) / l2_inner[m];
      dl_de(s, m) += gamma2_ * beta * (-e_post(ref_, m) / (e_post(s, m) * e_post(s, m)));
      dl_de(ref_, m) += gamma2_ * beta / e_post(s, m);
    }
  }

  grad.setZero(static_cast<Eigen::Index>(per_src) * S_);
  CArr g_bar(nb), path_bar(nb), node_bar(nb);
  for (int s = 0; s < S_; ++s) {
    g_bar.setZero();
    for (int m = 0; m < M_; ++m) {
      path_bar = mic_bar[static_cast<size_t>(m)] +
                 (2.0 * dl_de(s, m)) * parseval_w_ * path_eq[static_cast<size_t>(s) * M_ + m];
      g_bar += path_spectrum(s, m).conjugate() * path_bar;
    }

    const int base = s * per_src;
    // channel gain: G_s = Vs * prod(B/A), dVs/dvs_db = ln(10)/20 * Vs
    const double d_vs_db =
        (g_bar.conjugate() * g_src[static_cast<size_t>(s)]).real().sum() * kLn10Over20;
    grad[base + 3 * n_sec] = d_vs_db * 0.5 * (ranges.vs_max_db - ranges.vs_min_db);

    for (int j = 0; j < n_sec; ++j) {
      const CArr& bnum = num_resp[static_cast<size_t>(s)][static_cast<size_t>(j)];
      const CArr& aden = den_resp[static_cast<size_t>(s)][static_cast<size_t>(j)];
      // dG/dB = G/B and dG/dA = -G/A (numerator zeros of a stable peaking
      // section stay off the unit circle, so the divisions are safe)
      node_bar = (g_src[static_cast<size_t>(s)] / bnum).conjugate() * g_bar;
      Eigen::Matrix<double, 5, 1> dcoeff;
      dcoeff[0] = node_bar.real().sum();
      dcoeff[1] = (node_bar.conjugate() * z1_).real().sum();
      dcoeff[2] = (node_bar.conjugate() * z2_).real().sum();
      node_bar = -(g_src[static_cast<size_t>(s)] / aden).conjugate() * g_bar;
      dcoeff[3] = (node_bar.conjugate() * z1_).real().sum();
      dcoeff[4] = (node_bar.conjugate() * z2_).real().sum();

      const Eigen::Matrix<double, 5, 3>& jc =
          cgrads[static_cast<size_t>(s)][static_cast<size_t>(j)].d;
      const Eigen::Vector3d dparam = jc.transpose() * dcoeff;  // (fc, q, v0_db)
      grad[base + 3 * j] =
          dparam[0] * 0.5 * (ranges.fc_bands[static_cast<size_t>(j)].fc_max -
                             ranges.fc_bands[static_cast<size_t>(j)].fc_min);
      grad[base + 3 * j + 1] = dparam[1] * 0.5 * (ranges.q_max - ranges.q_min);
      grad[base + 3 * j + 2] = dparam[2] * 0.5 * (ranges.v0_max_db - ranges.v0_min_db);
    }
  }
  return out;
}

Vec Simulator::finite_diff_gradient(const Vec& p, const ParamRanges& ranges, double step) const {
  if (!(step > 0.0)) throw std::domain_error("finite_diff_gradient: step must be positive");
  Vec grad(p.size());
  Vec probe = p;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double hi = std::min(p[i] + step, 1.0);
    const double lo = std::max(p[i] - step, -1.0);
    probe[i] = hi;
    const double f_hi = loss(denormalize(probe, ranges)).total;
    probe[i] = lo;
    const double f_lo = loss(denormalize(probe, ranges)).total;
    probe[i] = p[i];
    grad[i] = (f_hi - f_lo) / (hi - lo);
  }
  return grad;
}

}  // namespace roomeq
