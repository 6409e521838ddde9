#include <doctest.h>

#include <cmath>
#include <random>

#include "roomeq/gradcheck.hpp"
#include "roomeq/loss.hpp"

using namespace roomeq;

namespace {

Scene small_scene(int S, int M, unsigned seed, double f_low = 500.0, double f_high = 2500.0) {
  SynthSpec spec;
  spec.n_sources = S;
  spec.n_mics = M;
  spec.seed = seed;
  spec.f_low = f_low;
  spec.f_high = f_high;
  spec.rir_len = 512;
  spec.decay_ms = 4.0;
  spec.coloration_db = 6.0;
  return preprocess(synth_scene(spec));
}

const FrequencyGrid kSmallGrid{1024, 48000.0};

Vec random_params(const ParamRanges& ranges, int S, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> draw(-0.9, 0.9);
  Vec p(ranges.param_count(S));
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = draw(rng);
  return p;
}

}  // namespace

TEST_CASE("simulator preconditions") {
  SynthSpec spec;
  spec.seed = 1;
  CHECK_THROWS_AS(Simulator(synth_scene(spec), kSmallGrid), std::invalid_argument);
  const Scene pre = preprocess(synth_scene(spec));  // rir_len 2048 > grid size 1024
  CHECK_THROWS_AS(Simulator(pre, kSmallGrid), std::invalid_argument);
}

TEST_CASE("default regularizer weight is log2(S) + log2(M)") {
  const Scene scene = small_scene(2, 2, 3);
  CHECK(Simulator(scene, kSmallGrid).gamma2() == doctest::Approx(2.0));
  CHECK(Simulator(scene, kSmallGrid, 0.0).gamma2() == 0.0);
  CHECK(Simulator(scene, kSmallGrid, 7.5).gamma2() == 7.5);
  const Scene s81 = small_scene(8, 1, 3);
  CHECK(Simulator(s81, kSmallGrid).gamma2() == doctest::Approx(3.0));
}

TEST_CASE("unity equalizers reproduce the preprocessed scene exactly") {
  const Scene scene = small_scene(2, 2, 17);
  const Simulator sim(scene, kSmallGrid);

  std::vector<Equalizer> eqs(2);  // vs = 0 dB, no sections: all-pass
  LossDetail detail;
  const LossBreakdown lb = sim.loss(eqs, &detail);
  CHECK(lb.l2 == doctest::Approx(0.0).epsilon(1e-14));  // ratios unchanged
  CHECK((detail.ratio_post - detail.ratio_pre).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(lb.total == doctest::Approx(lb.gamma1 * lb.l1 + lb.gamma2 * lb.l2));

  // the preprocessing offset makes the mean in-band level 0 dB on the
  // full-resolution grid used by preprocess
  const FrequencyGrid native = FrequencyGrid::for_rir_length(scene.longest_rir(), scene.fs);
  const Simulator sim_native(scene, native);
  LossDetail d2;
  sim_native.loss(std::vector<Equalizer>(2), &d2);
  CHECK(d2.band_mags.array().log10().mean() == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("a uniform channel gain across sources leaves energy ratios invariant") {
  const Scene scene = small_scene(3, 2, 23);
  const Simulator sim(scene, kSmallGrid);
  std::vector<Equalizer> eqs(3);
  for (auto& eq : eqs) eq.vs_db = 5.0;
  LossDetail detail;
  const LossBreakdown lb = sim.loss(eqs, &detail);
  CHECK(lb.l2 == doctest::Approx(0.0).epsilon(1e-12));
  CHECK((detail.ratio_post - detail.ratio_pre).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("parametric and coefficient evaluation paths agree bit-exactly") {
  const Scene scene = small_scene(2, 1, 31);
  const Simulator sim(scene, kSmallGrid);
  const ParamRanges ranges = param_ranges_for(sim.bands());
  const std::vector<Equalizer> eqs = denormalize(random_params(ranges, 2, 5), ranges);

  std::vector<CoeffEqualizer> ceqs;
  for (const Equalizer& eq : eqs) {
    CoeffEqualizer c;
    c.vs_db = eq.vs_db;
    for (const auto& s : eq.sections)
      c.sos.push_back(design_peaking_section(s.fc, s.q, s.v0_db, scene.fs));
    ceqs.push_back(std::move(c));
  }
  CHECK(sim.loss(eqs).total == sim.loss(ceqs).total);
  CHECK(sim.loss(eqs).total == sim.loss(eqs).total);  // deterministic
}

TEST_CASE("loss_and_gradient returns the same loss as the forward path") {
  const Scene scene = small_scene(2, 2, 41);
  const Simulator sim(scene, kSmallGrid);
  const ParamRanges ranges = param_ranges_for(sim.bands());
  const Vec p = random_params(ranges, 2, 7);
  Vec grad;
  const LossBreakdown a = sim.loss_and_gradient(p, ranges, grad);
  const LossBreakdown b = sim.loss(denormalize(p, ranges));
  CHECK(a.total == doctest::Approx(b.total).epsilon(1e-14));
  CHECK(a.l1 == doctest::Approx(b.l1).epsilon(1e-14));
  CHECK(a.l2 == doctest::Approx(b.l2).epsilon(1e-14));
  CHECK(grad.size() == p.size());
  CHECK(grad.allFinite());
}

TEST_CASE("analytic gradient matches central differences") {
  GradCheckConfig cfg;
  cfg.cases = {{2, 2, 500.0, 2500.0, 1024, 2}, {1, 1, 900.0, 1700.0, 1024, 2}};
  cfg.seed = 2024;
  const GradCheckReport rep = run_gradcheck(cfg);
  CHECK(rep.pass);
  CHECK(rep.overall_max_rel < 1e-5);
  CHECK(rep.scenes_checked == 4);
}

TEST_CASE("gradient check fails when any parameter class is corrupted") {
  for (const char* cls : {"fc", "q", "v0", "vs"}) {
    GradCheckConfig cfg;
    cfg.cases = {{2, 2, 500.0, 2500.0, 1024, 1}};
    cfg.seed = 3;
    cfg.corrupt_class = cls;
    CHECK_FALSE(run_gradcheck(cfg).pass);
  }
}

TEST_CASE("finite-difference error shrinks quadratically with the step") {
  const Scene scene = small_scene(2, 1, 51);
  const Simulator sim(scene, kSmallGrid);
  const ParamRanges ranges = param_ranges_for(sim.bands());
  const Vec p = random_params(ranges, 2, 11);
  Vec grad;
  sim.loss_and_gradient(p, ranges, grad);

  const double e1 = (sim.finite_diff_gradient(p, ranges, 1e-3) - grad).cwiseAbs().maxCoeff();
  const double e2 = (sim.finite_diff_gradient(p, ranges, 5e-4) - grad).cwiseAbs().maxCoeff();
  CHECK(e2 < e1 / 2.5);  // central differences: O(h^2)
}

TEST_CASE("a gradient step reduces the loss") {
  int improved = 0;
  for (unsigned seed = 0; seed < 20; ++seed) {
    const Scene scene = small_scene(2, 2, 100 + seed);
    const Simulator sim(scene, kSmallGrid);
    const ParamRanges ranges = param_ranges_for(sim.bands());
    Vec p = random_params(ranges, 2, seed);
    Vec grad;
    const double before = sim.loss_and_gradient(p, ranges, grad).total;
    const double step = 1e-4 / std::max(grad.cwiseAbs().maxCoeff(), 1e-12);
    Vec next = p - step * grad;
    next = next.cwiseMax(-1.0).cwiseMin(1.0);
    const double after = sim.loss(denormalize(next, ranges)).total;
    if (after < before) ++improved;
  }
  CHECK(improved >= 19);
}

TEST_CASE("single-source gradients ignore the regularizer weight") {
  // with one source every ratio is identically 1, so gamma2 cannot matter
  const Scene scene = small_scene(1, 2, 61);
  const Simulator a(scene, kSmallGrid, 0.0);
  const Simulator b(scene, kSmallGrid, 9.0);
  const ParamRanges ranges = param_ranges_for(a.bands());
  const Vec p = random_params(ranges, 1, 13);
  Vec ga, gb;
  a.loss_and_gradient(p, ranges, ga);
  b.loss_and_gradient(p, ranges, gb);
  CHECK((ga - gb).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("loss detail exposes band magnitudes consistent with the metrics path") {
  const Scene scene = small_scene(2, 2, 71);
  const Simulator sim(scene, kSmallGrid);
  std::vector<Equalizer> eqs(2);
  LossDetail detail;
  sim.loss(eqs, &detail);
  const std::vector<CArr> unity(2, CArr::Ones(kSmallGrid.bins()));
  const Eigen::MatrixXd direct = sim.band_magnitudes(sim.mic_spectra(unity));
  CHECK((detail.band_mags - direct).cwiseAbs().maxCoeff() == 0.0);
  CHECK(sim.loss_from_responses(unity).total == sim.loss(eqs).total);
}

TEST_CASE("path energies reproduce the time-domain signal energy") {
  const Scene scene = small_scene(2, 2, 81);
  const Simulator sim(scene, kSmallGrid);
  const double gain = std::pow(10.0, scene.offset_db / 20.0);
  for (int s = 0; s < 2; ++s)
    for (int m = 0; m < 2; ++m) {
      const Vec& h = scene.rir(s, m);
      const double e_time =
          gain * gain * h.tail(h.size() - scene.delays[s]).squaredNorm();
      CHECK(sim.pre_energy()(s, m) == doctest::Approx(e_time).epsilon(1e-10));
    }
}
