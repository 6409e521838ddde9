#pragma once

#include <string>
#include <vector>

#include "roomeq/filter.hpp"

namespace roomeq {

struct PerMicMetric {
  Vec per_mic;
  double average = 0.0;
};

/// Mean over in-range bands of the squared linear-magnitude error, then
/// averaged across mics.  band_mags is bands x mics.
PerMicMetric mse_from_band_mags(const Eigen::MatrixXd& band_mags, const Arr& target);

/// dB-domain standard deviation around the per-mic mean level, using
/// 10*log10 of the band magnitude as printed in the reference metric.
PerMicMetric sigma_from_band_mags(const Eigen::MatrixXd& band_mags);

/// Runtime cost accounting, in floating point operations per output sample.
long ops_per_sample_fir(int taps);
long ops_per_sample_iir(int n_sos);

struct EvalReport {
  std::string method;
  std::string scene;
  Vec mse_per_mic;
  double mse_avg = 0.0;
  Vec sigma_per_mic;
  double sigma_avg = 0.0;
  double mse_no_eq = 0.0;
  double sigma_no_eq = 0.0;
  long ops_per_sample = 0;
  int iterations = 0;
  double wall_s = 0.0;
  unsigned seed = 0;
  double gamma2 = 0.0;
  Eigen::MatrixXd ratio_pre;   // S x M
  Eigen::MatrixXd ratio_post;
};

}  // namespace roomeq
