// End-to-end acceptance suite: one PASS/FAIL line per criterion.
// Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <unsupported/Eigen/FFT>

#include "roomeq/baselines.hpp"
#include "roomeq/biasnet.hpp"
#include "roomeq/cli.hpp"
#include "roomeq/gradcheck.hpp"
#include "roomeq/metrics.hpp"

using namespace roomeq;
namespace fs_ = std::filesystem;
using json = nlohmann::json;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& what) {
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, what.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double max_ratio_dev(const LossDetail& d) {
  return ((d.ratio_post - d.ratio_pre).cwiseAbs().array() / d.ratio_pre.array()).maxCoeff();
}

double mse_of(const Simulator& sim, const LossDetail& d) {
  return mse_from_band_mags(d.band_mags, sim.target()).average;
}

}  // namespace

int main() {
  const auto t_start = std::chrono::steady_clock::now();

  // ---- 1: gradient exactness on 100 seeded scenes ---------------------------
  {
    const GradCheckConfig cfg = GradCheckConfig::standard(2026, 20);
    const GradCheckReport rep = run_gradcheck(cfg);
    std::ostringstream msg;
    msg << "analytic vs central-difference gradient on " << rep.scenes_checked
        << " scenes, max rel error " << rep.overall_max_rel << " (tol " << cfg.tol << ")";
    report(1, rep.pass && rep.scenes_checked >= 100, msg.str());
  }

  // ---- 2: filter identities -------------------------------------------------
  {
    const double fs = 48000.0;
    std::mt19937 rng(7);
    // In-range draws: fc within the equalization range, Q and gain within
    // their design ranges (the identities are only claimed there).
    std::uniform_real_distribution<double> ufc(100.0, 14000.0), uq(0.05, 5.0), ug(0.0, 10.0);

    bool unity_ok = true;
    for (int t = 0; t < 100; ++t) {
      const BiquadCoeffs c = design_peaking_section(ufc(rng), uq(rng), 0.0, fs);
      unity_ok = unity_ok && c.b0 == c.a0 && c.b1 == c.a1 && c.b2 == c.a2;
    }

    const FrequencyGrid grid{8192, fs};
    double recip_err = 0.0;
    bool stable = true;
    for (int t = 0; t < 10000; ++t) {
      const double fc = ufc(rng), q = uq(rng), g = ug(rng);
      const BiquadCoeffs cb = design_peaking_section(fc, q, g, fs);
      const BiquadCoeffs cc = design_peaking_section(fc, q, -g, fs);
      stable = stable && std::abs(cb.a2) < 1.0 && std::abs(cb.a1) < 1.0 + cb.a2 &&
               std::abs(cc.a2) < 1.0 && std::abs(cc.a1) < 1.0 + cc.a2;
      if (t < 500) {
        const FrequencyGrid small{256, fs};
        recip_err = std::max(recip_err, ((section_response(cb, small) *
                                          section_response(cc, small)) - 1.0).abs().maxCoeff());
      }
    }

    Equalizer eq;
    eq.vs_db = -3.5;
    eq.sections = {{250.0, 0.9, 4.0, 0}, {1300.0, 2.2, -6.5, 1}, {7000.0, 1.1, 2.0, 2}};
    Vec impulse = Vec::Zero(grid.size);
    impulse[0] = 1.0;
    const Vec ir = filter_time_domain(eq, impulse, fs);
    Eigen::FFT<double> fft;
    std::vector<double> t(ir.data(), ir.data() + ir.size());
    std::vector<std::complex<double>> spec;
    fft.fwd(spec, t);
    const CArr ref = equalizer_response(eq, grid, fs);
    double td_err = 0.0;
    for (int k = 0; k < grid.bins(); ++k)
      td_err = std::max(td_err,
                        std::abs(spec[static_cast<size_t>(k)] - ref[k]) / std::abs(ref[k]));

    std::ostringstream msg;
    msg << "unity@0dB exact, reciprocity " << recip_err << " (tol 1e-12), 10^4 draws stable, "
        << "time/frequency agreement " << td_err << " (tol 1e-9)";
    report(2, unity_ok && recip_err < 1e-12 && stable && td_err < 1e-9, msg.str());
  }

  // ---- 3: band and parameter counts ----------------------------------------
  {
    const int b22 = make_bands(100.0, 14000.0, FrequencyGrid{8192, 48000.0}).count();
    const int b29 = make_bands(20.0, 14000.0, FrequencyGrid{32768, 48000.0}).count();
    const ParamRanges r =
        param_ranges_for(make_bands(100.0, 14000.0, FrequencyGrid{8192, 48000.0}));
    const int p536 = r.param_count(8);
    std::ostringstream msg;
    msg << "bands(100,14k)=" << b22 << ", bands(20,14k)=" << b29
        << ", 8-source parameters=" << p536;
    report(3, b22 == 22 && b29 == 29 && p536 == 536, msg.str());
  }

  // ---- shared room-like 8x2 MIMO scene --------------------------------------
  SynthSpec mimo_spec;
  mimo_spec.n_sources = 8;
  mimo_spec.n_mics = 2;
  mimo_spec.seed = 24;
  mimo_spec.coloration_db = 7.5;
  mimo_spec.tail_db = -40.0;
  mimo_spec.decay_ms = 400.0;
  mimo_spec.rir_len = 8192;
  const Scene mimo = preprocess(synth_scene(mimo_spec));
  const FrequencyGrid mimo_grid = FrequencyGrid::for_rir_length(mimo_spec.rir_len, mimo.fs);
  const Simulator sim(mimo, mimo_grid);
  const ParamRanges ranges = param_ranges_for(sim.bands());

  LossDetail no_eq_detail;
  sim.loss_from_responses(
      std::vector<CArr>(static_cast<size_t>(sim.n_sources()), CArr::Ones(mimo_grid.bins())),
      &no_eq_detail);
  const double mse_no_eq = mse_of(sim, no_eq_detail);

  RunConfig bn_cfg;  // default architecture, lr and budget
  bn_cfg.iterations = 10000;
  bn_cfg.seed = 1;
  bn_cfg.log_every = 1000;
  const OptimizeResult bn = optimize(sim, ranges, bn_cfg);
  LossDetail bn_detail;
  sim.loss(bn.equalizers, &bn_detail);
  const double mse_bn = mse_of(sim, bn_detail);
  const double sigma_bn = sigma_from_band_mags(bn_detail.band_mags).average;

  // ---- 4: optimization efficacy ---------------------------------------------
  {
    std::ostringstream msg;
    msg << "8x2 MIMO: MSE " << mse_no_eq << " -> " << mse_bn << " ("
        << std::log10(mse_no_eq / mse_bn) << " orders, need >= 4), sigma " << sigma_bn
        << " (need <= 0.1)";
    report(4, mse_no_eq > 0.03 && mse_no_eq < 0.3 && mse_bn * 1e4 <= mse_no_eq &&
                  sigma_bn <= 0.1,
           msg.str());
  }

  // ---- 5: method ordering ----------------------------------------------------
  {
    auto fir_mse = [&](int len) {
      const std::vector<FirEqualizer> firs = fd_design(sim, len, 1e-4);
      LossDetail d;
      sim.loss_from_responses(fir_source_spectra(firs, mimo_grid), &d);
      return mse_of(sim, d);
    };
    const double mse_fd8192 = fir_mse(8192);
    const double mse_fd1024 = fir_mse(1024);

    DsmConfig dsm_cfg;
    dsm_cfg.iterations = 10000;
    dsm_cfg.seed = 1;
    const DsmResult dsm = dsm_optimize(sim, ranges, dsm_cfg);
    bool monotone = true;
    for (size_t i = 1; i < dsm.loss_history.size(); ++i)
      monotone = monotone && dsm.loss_history[i] <= dsm.loss_history[i - 1];
    LossDetail dsm_detail;
    sim.loss(dsm.equalizers, &dsm_detail);
    const double mse_dsm = mse_of(sim, dsm_detail);

    // "biasnet <~ fd8192" pinned as: within a factor of two
    const bool ordering = mse_bn <= 2.0 * mse_fd8192 && mse_fd8192 < mse_fd1024 &&
                          mse_fd1024 < mse_dsm && mse_dsm < mse_no_eq;
    std::ostringstream msg;
    msg << "MSE biasnet " << mse_bn << " <~ fd8192 " << mse_fd8192 << " < fd1024 " << mse_fd1024
        << " < dsm " << mse_dsm << " < no-eq " << mse_no_eq << "; DSM history monotone="
        << (monotone ? "yes" : "no");
    report(5, ordering && monotone, msg.str());
  }

  // ---- 6: energy-balance regularization --------------------------------------
  {
    const double dev_reg = max_ratio_dev(bn_detail);  // gamma2 = log2(8)+log2(2) = 4

    SynthSpec adv_spec;  // two near-redundant sources, one mic: without the
    adv_spec.n_sources = 2;  // regularizer nothing pins the energy split
    adv_spec.n_mics = 1;
    adv_spec.seed = 12;
    adv_spec.f_low = 500.0;
    adv_spec.f_high = 2500.0;
    adv_spec.rir_len = 512;
    adv_spec.decay_ms = 4.0;
    const Scene adv = preprocess(synth_scene(adv_spec));
    const FrequencyGrid grid1024{1024, adv.fs};
    const Simulator adv_sim(adv, grid1024, 0.0);
    const ParamRanges adv_ranges = param_ranges_for(adv_sim.bands());
    RunConfig adv_cfg;
    adv_cfg.iterations = 3000;
    adv_cfg.seed = 1;
    adv_cfg.gamma2_override = 0.0;
    adv_cfg.log_every = 1000;
    const OptimizeResult adv_run = optimize(adv_sim, adv_ranges, adv_cfg);
    LossDetail adv_detail;
    adv_sim.loss(adv_run.equalizers, &adv_detail);
    const double dev_free = max_ratio_dev(adv_detail);

    std::ostringstream msg;
    msg << "gamma2=4: max |r^-r|/r = " << dev_reg << " (need < 0.1); gamma2=0 adversarial: "
        << dev_free << " (need > 0.1)";
    report(6, dev_reg < 0.1 && dev_free > 0.1, msg.str());
  }

  // ---- 7: cost accounting -----------------------------------------------------
  {
    const long f8192 = ops_per_sample_fir(8192), f1024 = ops_per_sample_fir(1024);
    const long s22 = ops_per_sample_iir(22), s29 = ops_per_sample_iir(29);
    std::ostringstream msg;
    msg << "ops/sample: FIR8192=" << f8192 << ", FIR1024=" << f1024 << ", 22 SOS=" << s22
        << ", 29 SOS=" << s29;
    report(7, f8192 == 16383 && f1024 == 2047 && s22 == 198 && s29 == 261, msg.str());
  }

  // ---- 8: architecture sensitivity ---------------------------------------------
  {
    const long n_default = init_network({1024, 512, 256, 128}, 536, 0).parameter_count();
    const long n_single = init_network({256}, 536, 0).parameter_count();

    RunConfig bias_cfg = bn_cfg;
    bias_cfg.layers.clear();  // degenerate p = sin(b0)
    const OptimizeResult bias_run = optimize(sim, ranges, bias_cfg);
    LossDetail bias_detail;
    sim.loss(bias_run.equalizers, &bias_detail);
    const double mse_bias = mse_of(sim, bias_detail);

    std::ostringstream msg;
    msg << "params deep=" << n_default << " (758784), single=" << n_single
        << " (137728); bias-only MSE " << mse_bias << " vs deep " << mse_bn
        << " (need > 10x worse)";
    report(8, n_default == 758784 && n_single == 137728 && mse_bias > 10.0 * mse_bn, msg.str());
  }

  // ---- 9: determinism and round-trip --------------------------------------------
  {
    const fs_::path tmp = fs_::temp_directory_path() / "roomeq_acceptance";
    fs_::remove_all(tmp);
    fs_::create_directories(tmp);
    const std::string scene_dir = (tmp / "scene").string();
    bool ok = run_cli({"synth", "--sources", "2", "--mics", "2", "--seed", "6", "--f-low",
                       "500", "--f-high", "2500", "--rir-len", "512", "--decay-ms", "4",
                       "--out", scene_dir}) == 0;
    const std::string manifest = scene_dir + "/manifest.json";
    const std::vector<std::string> base = {"design", "--scene", manifest, "--method",
                                           "biasnet", "--layers", "64,32", "--iters", "200",
                                           "--seed", "2", "--dft-size", "1024"};
    std::vector<std::string> r1 = base, r2 = base;
    r1.insert(r1.end(), {"--out", (tmp / "run1").string()});
    r2.insert(r2.end(), {"--out", (tmp / "run2").string()});
    ok = ok && run_cli(r1) == 0 && run_cli(r2) == 0;

    auto slurp = [](const fs_::path& p) {
      std::ifstream f(p, std::ios::binary);
      std::ostringstream ss;
      ss << f.rdbuf();
      return ss.str();
    };
    bool identical = ok;
    for (const auto& entry : fs_::directory_iterator(tmp / "run1")) {
      const std::string name = entry.path().filename().string();
      if (name == "report.json") {  // wall-clock time is the one allowed difference
        json a = json::parse(slurp(entry.path()));
        json b = json::parse(slurp(tmp / "run2" / name));
        a.erase("wall_s");
        b.erase("wall_s");
        identical = identical && a == b;
      } else {
        identical = identical && slurp(entry.path()) == slurp(tmp / "run2" / name);
      }
    }

    ok = ok && run_cli({"eval", "--run", (tmp / "run1").string(), "--out",
                        (tmp / "eval.json").string()}) == 0;
    bool metrics_match = ok;
    double max_diff = 0.0;
    if (ok) {
      const json a = json::parse(slurp(tmp / "run1" / "report.json"));
      const json b = json::parse(slurp(tmp / "eval.json"));
      for (const char* key : {"mse_avg", "sigma_avg", "mse_no_eq", "sigma_no_eq"}) {
        const double diff = std::abs(a.at(key).get<double>() - b.at(key).get<double>());
        max_diff = std::max(max_diff, diff);
        metrics_match = metrics_match && diff <= 1e-12;
      }
    }
    fs_::remove_all(tmp);

    std::ostringstream msg;
    msg << "repeated runs bit-identical (modulo wall_s): " << (identical ? "yes" : "no")
        << "; eval-from-coefficients metric difference " << max_diff << " (tol 1e-12)";
    report(9, identical && metrics_match, msg.str());
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  std::printf("%s: %d/9 criteria passed in %.1f s\n", failures == 0 ? "SUCCESS" : "FAILURE",
              9 - failures, wall);
  return failures == 0 ? 0 : 1;
}
