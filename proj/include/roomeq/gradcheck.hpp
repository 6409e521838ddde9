#pragma once

#include <string>
#include <vector>

#include "roomeq/loss.hpp"

namespace roomeq {

/// Analytic-vs-central-difference gradient verification over seeded random
/// synthetic scenes.
struct GradCheckCase {
  int n_sources = 2;
  int n_mics = 2;
  double f_low = 500.0;   // picks the band count
  double f_high = 2500.0;
  int dft_size = 1024;
  int repeats = 1;        // random parameter draws per scene
};

struct GradCheckConfig {
  std::vector<GradCheckCase> cases;
  unsigned seed = 0;
  double step = 1e-6;
  double tol = 1e-5;
  std::string corrupt_class;  // test hook: "fc", "q", "v0" or "vs" skews that class

  // Case mix used by the CLI and the acceptance suite: S in {1,2,4},
  // M in {1,2}, band counts {3, 8, 22}.
  static GradCheckConfig standard(unsigned seed, int scenes_per_case = 3);
};

struct GradCheckClassStats {
  double max_rel = 0.0;
  double mean_rel = 0.0;
  long count = 0;
};

struct GradCheckReport {
  GradCheckClassStats fc, q, v0, vs;
  double overall_max_rel = 0.0;
  std::string worst_class;
  int scenes_checked = 0;
  long components_checked = 0;
  unsigned seed = 0;
  double step = 0.0;
  double tol = 0.0;
  bool pass = false;
};

GradCheckReport run_gradcheck(const GradCheckConfig& config);

/// Denominator floor accounting for the finite-difference oracle's own
/// roundoff noise, and the guarded per-component relative error.
double gradcheck_floor(double grad_scale, double loss, double step, double tol);
double gradcheck_rel_error(double analytic, double fd, double floor);

}  // namespace roomeq
