#pragma once

#include <vector>

#include "roomeq/loss.hpp"

namespace roomeq {

/// Direct Search: multiplicative random perturbation of the denormalized
/// parameter vector, accepted only on strict loss improvement.
struct DsmConfig {
  double gamma = 0.01;
  int iterations = 10000;
  unsigned seed = 0;
};

struct DsmResult {
  std::vector<Equalizer> equalizers;
  std::vector<double> loss_history;  // accepted (best) loss per iteration
};

DsmResult dsm_optimize(const Simulator& sim, const ParamRanges& ranges, const DsmConfig& config);

/// Frequency deconvolution: per-bin regularized least-squares inversion of
/// the M x S transfer matrix, yielding one FIR filter per source.
struct FirEqualizer {
  Vec taps;
};

/// Per-bin inverse spectra G_s(k) before the inverse transform (exposed for
/// verification against the exact bin-wise inverse).
std::vector<CArr> fd_inverse_spectra(const Simulator& sim, double beta_fd);

/// Flat in-band target with a one-third-octave raised-cosine roll-off outside.
Arr fd_target_magnitude(const Simulator& sim);

std::vector<FirEqualizer> fd_design(const Simulator& sim, int filter_len, double beta_fd);

/// Half-spectrum of a FIR filter zero-padded to the grid size.
CArr fir_spectrum(const FirEqualizer& fir, const FrequencyGrid& grid);

/// One response per source, ready for Simulator::loss_from_responses.
std::vector<CArr> fir_source_spectra(const std::vector<FirEqualizer>& firs,
                                     const FrequencyGrid& grid);

/// Per-mic spectra of the scene equalized by FIR filters, on the shared grid.
std::vector<CArr> fir_equalized_response(const Simulator& sim,
                                         const std::vector<FirEqualizer>& firs);

}  // namespace roomeq
