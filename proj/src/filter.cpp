#include "roomeq/filter.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace roomeq {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kLn10Over20 = 0.11512925464970229;  // d(10^{x/20})/dx / 10^{x/20}
}  // namespace

FrequencyGrid FrequencyGrid::for_rir_length(int rir_len, double fs) {
  int n = 8192;
  while (n < 2 * rir_len) n *= 2;
  return FrequencyGrid{n, fs};
}

BiquadCoeffs design_peaking_section(double fc, double q, double v0_db, double fs,
                                    SectionGrads* grads) {
  if (!(fc > 0.0) || !(fc < fs / 2.0))
    throw std::domain_error("design_peaking_section: fc must lie in (0, fs/2)");
  if (!(q > 0.0))
    throw std::domain_error("design_peaking_section: q must be positive");

  const double k = std::tan(kPi * fc / fs);
  const double k2 = k * k;
  const double v0 = std::pow(10.0, v0_db / 20.0);
  const double dk_dfc = (kPi / fs) * (1.0 + k2);
  const double dv0_dvdb = kLn10Over20 * v0;

  BiquadCoeffs c;
  // num[i], den: polynomials in k whose partials w.r.t. (k, q, v0) are below.
  double num[5];   // b0, b1, b2, a1, a2 numerators
  double den;
  double dnum_dk[5], dnum_dq[5], dnum_dv0[5];
  double dden_dk, dden_dq, dden_dv0;

  if (v0_db >= 0.0) {
    const double u = k / q;
    den = 1.0 + u + k2;
    num[0] = 1.0 + v0 * u + k2;
    num[1] = 2.0 * (k2 - 1.0);
    num[2] = 1.0 - v0 * u + k2;
    num[3] = num[1];
    num[4] = 1.0 - u + k2;

    dden_dk = 1.0 / q + 2.0 * k;
    dden_dq = -k / (q * q);
    dden_dv0 = 0.0;

    dnum_dk[0] = v0 / q + 2.0 * k;
    dnum_dq[0] = -v0 * k / (q * q);
    dnum_dv0[0] = u;
    dnum_dk[1] = 4.0 * k;
    dnum_dq[1] = 0.0;
    dnum_dv0[1] = 0.0;
    dnum_dk[2] = -v0 / q + 2.0 * k;
    dnum_dq[2] = v0 * k / (q * q);
    dnum_dv0[2] = -u;
    dnum_dk[3] = dnum_dk[1];
    dnum_dq[3] = 0.0;
    dnum_dv0[3] = 0.0;
    dnum_dk[4] = -1.0 / q + 2.0 * k;
    dnum_dq[4] = k / (q * q);
    dnum_dv0[4] = 0.0;
  } else {
    // Reciprocal structure: the gain moves into the denominator, so the
    // cascade of design(+v) and design(-v) is an exact unity filter.
    const double u = k / q;
    const double w = k / (v0 * q);
    den = 1.0 + w + k2;
    num[0] = 1.0 + u + k2;
    num[1] = 2.0 * (k2 - 1.0);
    num[2] = 1.0 - u + k2;
    num[3] = num[1];
    num[4] = 1.0 - w + k2;

    dden_dk = 1.0 / (v0 * q) + 2.0 * k;
    dden_dq = -k / (v0 * q * q);
    dden_dv0 = -w / v0;

    dnum_dk[0] = 1.0 / q + 2.0 * k;
    dnum_dq[0] = -k / (q * q);
    dnum_dv0[0] = 0.0;
    dnum_dk[1] = 4.0 * k;
    dnum_dq[1] = 0.0;
    dnum_dv0[1] = 0.0;
    dnum_dk[2] = -1.0 / q + 2.0 * k;
    dnum_dq[2] = k / (q * q);
    dnum_dv0[2] = 0.0;
    dnum_dk[3] = dnum_dk[1];
    dnum_dq[3] = 0.0;
    dnum_dv0[3] = 0.0;
    dnum_dk[4] = -1.0 / (v0 * q) + 2.0 * k;
    dnum_dq[4] = k / (v0 * q * q);
    dnum_dv0[4] = w / v0;
  }

  c.b0 = num[0] / den;
  c.b1 = num[1] / den;
  c.b2 = num[2] / den;
  c.a0 = 1.0;
  c.a1 = num[3] / den;
  c.a2 = num[4] / den;

  if (grads) {
    const double inv_den2 = 1.0 / (den * den);
    for (int i = 0; i < 5; ++i) {
      const double dk = (dnum_dk[i] * den - num[i] * dden_dk) * inv_den2;
      const double dq = (dnum_dq[i] * den - num[i] * dden_dq) * inv_den2;
      const double dv = (dnum_dv0[i] * den - num[i] * dden_dv0) * inv_den2;
      grads->d(i, 0) = dk * dk_dfc;
      grads->d(i, 1) = dq;
      grads->d(i, 2) = dv * dv0_dvdb;
    }
  }
  return c;
}

std::vector<Equalizer> denormalize(const Vec& p, const ParamRanges& ranges) {
  const int per_src = ranges.params_per_source();
  if (per_src < 4 || p.size() % per_src != 0)
    throw std::domain_error("denormalize: parameter vector length does not match ranges");
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (!(p[i] >= -1.0 && p[i] <= 1.0))
      throw std::domain_error("denormalize: component outside [-1, 1]");

  auto affine = [](double pn, double lo, double hi) {
    return 0.5 * (hi - lo) * pn + 0.5 * (hi + lo);
  };

  const int n_src = static_cast<int>(p.size() / per_src);
  const int nb = ranges.bands();
  std::vector<Equalizer> eqs(n_src);
  for (int s = 0; s < n_src; ++s) {
    const int base = s * per_src;
    Equalizer& eq = eqs[s];
    eq.sections.resize(nb);
    for (int b = 0; b < nb; ++b) {
      ParametricSection& sec = eq.sections[b];
      sec.fc = affine(p[base + 3 * b], ranges.fc_bands[b].fc_min, ranges.fc_bands[b].fc_max);
      sec.q = affine(p[base + 3 * b + 1], ranges.q_min, ranges.q_max);
      sec.v0_db = affine(p[base + 3 * b + 2], ranges.v0_min_db, ranges.v0_max_db);
      sec.band_index = b;
    }
    eq.vs_db = affine(p[base + 3 * nb], ranges.vs_min_db, ranges.vs_max_db);
  }
  return eqs;
}

CArr section_response(const BiquadCoeffs& c, const FrequencyGrid& grid) {
  const int nb = grid.bins();
  CArr out(nb);
  for (int k = 0; k < nb; ++k) {
    const double w = 2.0 * kPi * k / grid.size;
    const cplx z1 = std::polar(1.0, -w);
    const cplx z2 = std::polar(1.0, -2.0 * w);
    const cplx num = c.b0 + c.b1 * z1 + c.b2 * z2;
    const cplx denom = c.a0 + c.a1 * z1 + c.a2 * z2;
    out[k] = num / denom;
  }
  return out;
}

CArr equalizer_response(const Equalizer& eq, const FrequencyGrid& grid, double fs) {
  CArr out = CArr::Constant(grid.bins(), cplx(std::pow(10.0, eq.vs_db / 20.0), 0.0));
  for (const auto& sec : eq.sections)
    out *= section_response(design_peaking_section(sec.fc, sec.q, sec.v0_db, fs), grid);
  return out;
}

CArr equalizer_response(const CoeffEqualizer& eq, const FrequencyGrid& grid) {
  CArr out = CArr::Constant(grid.bins(), cplx(std::pow(10.0, eq.vs_db / 20.0), 0.0));
  for (const auto& c : eq.sos) out *= section_response(c, grid);
  return out;
}

Vec filter_time_domain(const Equalizer& eq, const Vec& x, double fs) {
  Vec y = x;
  for (const auto& sec : eq.sections) {
    const BiquadCoeffs c = design_peaking_section(sec.fc, sec.q, sec.v0_db, fs);
    double w1 = 0.0, w2 = 0.0;  // direct form II state
    for (Eigen::Index n = 0; n < y.size(); ++n) {
      const double w0 = y[n] - c.a1 * w1 - c.a2 * w2;
      y[n] = c.b0 * w0 + c.b1 * w1 + c.b2 * w2;
      w2 = w1;
      w1 = w0;
    }
  }
  return y * std::pow(10.0, eq.vs_db / 20.0);
}

void export_coefficients(std::ostream& os, const Equalizer& eq, double fs) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "gain_dB %.17g\n", eq.vs_db);
  os << buf;
  for (const auto& sec : eq.sections) {
    const BiquadCoeffs c = design_peaking_section(sec.fc, sec.q, sec.v0_db, fs);
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %.17g\n",
                  c.b0, c.b1, c.b2, c.a0, c.a1, c.a2);
    os << buf;
  }
}

CoeffEqualizer parse_coefficients(std::istream& is) {
  CoeffEqualizer eq;
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("parse_coefficients: empty file");
  {
    std::istringstream header(line);
    std::string tag;
    header >> tag >> eq.vs_db;
    if (tag != "gain_dB" || header.fail())
      throw std::runtime_error("parse_coefficients: malformed header line");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    BiquadCoeffs c;
    row >> c.b0 >> c.b1 >> c.b2 >> c.a0 >> c.a1 >> c.a2;
    if (row.fail())
      throw std::runtime_error("parse_coefficients: malformed coefficient line");
    eq.sos.push_back(c);
  }
  return eq;
}

}  // namespace roomeq
