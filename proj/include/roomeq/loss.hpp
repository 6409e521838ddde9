#pragma once

#include <vector>

#include "roomeq/filter.hpp"
#include "roomeq/scene.hpp"

namespace roomeq {

struct LossBreakdown {
  double l1 = 0.0;
  double l2 = 0.0;
  double gamma1 = 1.0;
  double gamma2 = 0.0;
  double total = 0.0;
};

/// Optional per-evaluation detail for metrics and reports.
struct LossDetail {
  Eigen::MatrixXd band_mags;   // bands x mics, band-averaged |H~_m|
  Eigen::MatrixXd ratio_pre;   // S x M, reference-to-source energy ratios
  Eigen::MatrixXd ratio_post;
};

/// Precomputed, immutable evaluation context: path spectra, band/bin maps,
/// phase tables and pre-equalization energies.  All evaluation entry points
/// (loss, gradients, baselines, metrics) go through the spectra stored here.
class Simulator {
 public:
  Simulator(const Scene& scene, const FrequencyGrid& grid, double gamma2_override = -1.0);

  const FrequencyGrid& grid() const { return grid_; }
  const BandSet& bands() const { return bands_; }
  const Arr& target() const { return target_; }
  int n_sources() const { return S_; }
  int n_mics() const { return M_; }
  double gamma1() const { return gamma1_; }
  double gamma2() const { return gamma2_; }
  const CArr& path_spectrum(int s, int m) const { return paths_[static_cast<size_t>(s) * M_ + m]; }
  const Eigen::MatrixXd& pre_energy() const { return energy_pre_; }
  int reference_source() const { return ref_; }
  double sample_rate() const { return grid_.fs; }

  LossBreakdown loss(const std::vector<Equalizer>& eqs, LossDetail* detail = nullptr) const;

  /// Loss through exported coefficient cascades (round-trip evaluation path).
  LossBreakdown loss(const std::vector<CoeffEqualizer>& eqs, LossDetail* detail = nullptr) const;

  /// Loss for arbitrary per-source responses on the grid (FIR designs etc.).
  LossBreakdown loss_from_responses(const std::vector<CArr>& source_responses,
                                    LossDetail* detail = nullptr) const;

  /// Exact gradient of loss(denormalize(p)) assembled from the closed-form
  /// local derivatives of every stage.
  LossBreakdown loss_and_gradient(const Vec& p, const ParamRanges& ranges, Vec& grad) const;

  /// Central-difference oracle (L(p+h) - L(p-h)) / 2h per component.
  Vec finite_diff_gradient(const Vec& p, const ParamRanges& ranges, double step) const;

  /// Band-averaged magnitudes of arbitrary per-mic spectra (shared metrics path).
  Eigen::MatrixXd band_magnitudes(const std::vector<CArr>& mic_spectra) const;

  /// Per-mic summed spectra for a set of per-source equalizer responses.
  std::vector<CArr> mic_spectra(const std::vector<CArr>& source_responses) const;

  /// Per-path equalized energies (Parseval) for per-source responses.
  Eigen::MatrixXd path_energies(const std::vector<CArr>& source_responses) const;

 private:
  LossBreakdown loss_impl(const std::vector<CArr>& source_responses, LossDetail* detail) const;

  FrequencyGrid grid_;
  BandSet bands_;
  Arr target_;
  int S_ = 0, M_ = 0, ref_ = 0;
  double gamma1_ = 1.0, gamma2_ = 0.0;
  std::vector<CArr> paths_;        // S*M half spectra
  Eigen::MatrixXd energy_pre_;     // S x M
  Arr parseval_w_;                 // c_k / N
  CArr z1_, z2_;                   // e^{-j2pik/N}, e^{-j4pik/N}
  std::vector<int> band_of_bin_;   // -1 when outside every band
};

}  // namespace roomeq
