#pragma once

#include <Eigen/Dense>
#include <complex>
#include <iosfwd>
#include <vector>

namespace roomeq {

using Vec = Eigen::VectorXd;
using Arr = Eigen::ArrayXd;
using CArr = Eigen::ArrayXcd;
using cplx = std::complex<double>;

/// One peaking second-order section in parametric form.
struct ParametricSection {
  double fc = 1000.0;   // center frequency [Hz]
  double q = 1.0;       // quality factor
  double v0_db = 0.0;   // section gain [dB]
  int band_index = 0;   // denormalization band owning this section
};

/// Transfer-function coefficients of a biquad, normalized so a0 == 1.
struct BiquadCoeffs {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a0 = 1.0, a1 = 0.0, a2 = 0.0;
};

/// One equalizer: a channel gain plus an ordered SOS cascade.
struct Equalizer {
  double vs_db = 0.0;
  std::vector<ParametricSection> sections;
};

/// Equalizer known only through its exported coefficients (no parameters).
struct CoeffEqualizer {
  double vs_db = 0.0;
  std::vector<BiquadCoeffs> sos;
};

struct FcRange {
  double fc_min = 0.0;
  double fc_max = 0.0;
};

/// Allowed ranges for the normalized->physical parameter map.
/// fc is banded (one range per SOS), the other ranges are global.
struct ParamRanges {
  std::vector<FcRange> fc_bands;
  double q_min = 0.05, q_max = 5.0;
  double v0_min_db = -10.0, v0_max_db = 10.0;
  double vs_min_db = -20.0, vs_max_db = 20.0;

  int bands() const { return static_cast<int>(fc_bands.size()); }
  int params_per_source() const { return 3 * bands() + 1; }
  int param_count(int n_sources) const { return params_per_source() * n_sources; }
};

/// Uniform DFT grid over [0, fs/2]; size is a power of two.
struct FrequencyGrid {
  int size = 8192;
  double fs = 48000.0;

  int bins() const { return size / 2 + 1; }
  double bin_hz(int k) const { return k * fs / size; }

  // Smallest power of two >= 2 * rir_len, never below 8192.
  static FrequencyGrid for_rir_length(int rir_len, double fs);
};

/// Partial derivatives of the five free coefficients w.r.t. (fc, q, v0_db).
/// Row order: b0, b1, b2, a1, a2.  Column order: fc, q, v0_db.
struct SectionGrads {
  Eigen::Matrix<double, 5, 3> d = Eigen::Matrix<double, 5, 3>::Zero();
};

/// Closed-form peaking biquad design.  Boost for v0_db >= 0, cut otherwise;
/// the two branches agree in value and one-sided derivative at 0 dB.
/// Throws std::domain_error for fc outside (0, fs/2) or q <= 0.
BiquadCoeffs design_peaking_section(double fc, double q, double v0_db, double fs,
                                    SectionGrads* grads = nullptr);

/// Affine map from p in [-1,1]^{(3B+1)S} to S equalizers.  Layout per source:
/// B triplets (fc, q, v0_db) followed by vs_db.
/// Throws std::domain_error if any component leaves [-1, 1].
std::vector<Equalizer> denormalize(const Vec& p, const ParamRanges& ranges);

/// B(k)/A(k) sampled on grid bins k = 0..N/2.
CArr section_response(const BiquadCoeffs& c, const FrequencyGrid& grid);

/// Product of section responses scaled by the linear channel gain.
CArr equalizer_response(const Equalizer& eq, const FrequencyGrid& grid, double fs);
CArr equalizer_response(const CoeffEqualizer& eq, const FrequencyGrid& grid);

/// Runs the cascade as direct-form difference equations, then the channel
/// gain.  Oracle for the frequency-domain path.
Vec filter_time_domain(const Equalizer& eq, const Vec& x, double fs);

/// Plain-text coefficient export: "gain_dB <vs_db>" header then one
/// "b0 b1 b2 a0 a1 a2" line per SOS.
void export_coefficients(std::ostream& os, const Equalizer& eq, double fs);
CoeffEqualizer parse_coefficients(std::istream& is);

}  // namespace roomeq
