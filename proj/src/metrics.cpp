#include "roomeq/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace roomeq {

PerMicMetric mse_from_band_mags(const Eigen::MatrixXd& band_mags, const Arr& target) {
  if (band_mags.rows() == 0) throw std::domain_error("mse: empty band range");
  if (band_mags.rows() != target.size())
    throw std::invalid_argument("mse: band count does not match target");
  PerMicMetric out;
  out.per_mic.resize(band_mags.cols());
  for (Eigen::Index m = 0; m < band_mags.cols(); ++m)
    out.per_mic[m] = (band_mags.col(m).array() - target).square().mean();
  out.average = out.per_mic.mean();
  return out;
}

PerMicMetric sigma_from_band_mags(const Eigen::MatrixXd& band_mags) {
  if (band_mags.rows() == 0) throw std::domain_error("sigma: empty band range");
  if ((band_mags.array() <= 0.0).any())
    throw std::domain_error("sigma: zero or negative band magnitude");
  PerMicMetric out;
  out.per_mic.resize(band_mags.cols());
  for (Eigen::Index m = 0; m < band_mags.cols(); ++m) {
    const Arr level_db = 10.0 * band_mags.col(m).array().log10();
    const double mean_db = level_db.mean();
    out.per_mic[m] = std::sqrt((level_db - mean_db).square().mean());
  }
  out.average = out.per_mic.mean();
  return out;
}

long ops_per_sample_fir(int taps) { return 2L * taps - 1; }

long ops_per_sample_iir(int n_sos) { return 9L * n_sos; }

}  // namespace roomeq
