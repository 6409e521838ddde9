#include "roomeq/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "roomeq/biasnet.hpp"
#include "roomeq/gradcheck.hpp"
#include "roomeq/loss.hpp"

namespace roomeq {

namespace {

namespace fs_ = std::filesystem;
using json = nlohmann::json;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  return json::parse(f);
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << j.dump(2) << "\n";
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json report_to_json(const EvalReport& rep) {
  json j;
  j["method"] = rep.method;
  j["scene"] = rep.scene;
  j["mse_per_mic"] = vec_to_json(rep.mse_per_mic);
  j["mse_avg"] = rep.mse_avg;
  j["sigma_per_mic"] = vec_to_json(rep.sigma_per_mic);
  j["sigma_avg"] = rep.sigma_avg;
  j["mse_no_eq"] = rep.mse_no_eq;
  j["sigma_no_eq"] = rep.sigma_no_eq;
  j["ops_per_sample"] = rep.ops_per_sample;
  j["iterations"] = rep.iterations;
  j["wall_s"] = rep.wall_s;
  j["seed"] = rep.seed;
  j["gamma2"] = rep.gamma2;
  j["ratio_pre"] = matrix_to_json(rep.ratio_pre);
  j["ratio_post"] = matrix_to_json(rep.ratio_post);
  return j;
}

void write_response_csv(const std::string& path, const BandSet& bands,
                        const Eigen::MatrixXd& band_mags) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "band_center_hz";
  for (Eigen::Index m = 0; m < band_mags.cols(); ++m) f << ",mic_" << m << "_db";
  f << "\n";
  for (int b = 0; b < bands.count(); ++b) {
    f << fmt17(bands.bands[static_cast<size_t>(b)].f_center);
    for (Eigen::Index m = 0; m < band_mags.cols(); ++m)
      f << "," << fmt17(20.0 * std::log10(band_mags(b, m)));
    f << "\n";
  }
}

struct RunOutputs {
  std::string method;
  json config;
  json params;
  json history = json::array();
  EvalReport report;
  std::vector<Equalizer> equalizers;   // iir methods
  std::vector<FirEqualizer> firs;      // fd
  Eigen::MatrixXd mags_uneq, mags_eq;  // bands x mics
  double fs = 48000.0;
};

void write_run_dir(const std::string& dir, const RunOutputs& out, const BandSet& bands) {
  fs_::create_directories(dir);
  write_json_file((fs_::path(dir) / "config.json").string(), out.config);
  write_json_file((fs_::path(dir) / "params.json").string(), out.params);
  write_json_file((fs_::path(dir) / "history.json").string(), out.history);
  write_json_file((fs_::path(dir) / "report.json").string(), report_to_json(out.report));
  write_response_csv((fs_::path(dir) / "responses_uneq.csv").string(), bands, out.mags_uneq);
  write_response_csv((fs_::path(dir) / "responses_eq.csv").string(), bands, out.mags_eq);
  for (size_t s = 0; s < out.equalizers.size(); ++s) {
    const std::string p = (fs_::path(dir) / ("eq_s" + std::to_string(s) + ".txt")).string();
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write " + p);
    export_coefficients(f, out.equalizers[s], out.fs);
  }
  for (size_t s = 0; s < out.firs.size(); ++s)
    write_fir_file((fs_::path(dir) / ("fir_s" + std::to_string(s) + ".txt")).string(), out.firs[s]);
}

json equalizers_to_json(const std::vector<Equalizer>& eqs) {
  json a = json::array();
  for (const Equalizer& eq : eqs) {
    json sections = json::array();
    for (const ParametricSection& s : eq.sections)
      sections.push_back({{"fc", s.fc}, {"q", s.q}, {"v0_db", s.v0_db}});
    a.push_back({{"vs_db", eq.vs_db}, {"sections", std::move(sections)}});
  }
  return a;
}

std::vector<Equalizer> equalizers_from_json(const json& a) {
  std::vector<Equalizer> eqs;
  for (const json& je : a) {
    Equalizer eq;
    eq.vs_db = je.at("vs_db").get<double>();
    int b = 0;
    for (const json& js : je.at("sections")) {
      ParametricSection sec;
      sec.fc = js.at("fc").get<double>();
      sec.q = js.at("q").get<double>();
      sec.v0_db = js.at("v0_db").get<double>();
      sec.band_index = b++;
      eq.sections.push_back(sec);
    }
    eqs.push_back(std::move(eq));
  }
  return eqs;
}

// ---------------------------------------------------------------------------

struct SynthOptions {
  std::string spec_path;
  std::string out_dir;
  SynthSpec spec;
};

int cmd_synth(const SynthOptions& o) {
  SynthSpec spec = o.spec_path.empty() ? o.spec : load_synth_spec(o.spec_path);
  const Scene scene = synth_scene(spec);
  save_scene(scene, o.out_dir);
  std::cout << (fs_::path(o.out_dir) / "manifest.json").string() << "\n";
  return 0;
}

struct DesignOptions {
  std::string scene_path;
  std::string out_dir;
  std::string method = "biasnet";
  std::vector<int> layers{1024, 512, 256, 128};
  bool bias_only = false;
  int iterations = 10000;
  unsigned seed = 0;
  double lr = 1e-4;
  double gamma2_override = -1.0;
  int log_every = 10;
  int fir_len = 8192;
  double beta_fd = 1e-6;
  double dsm_gamma = 0.01;
  int dft_size = 0;  // 0: derived from the longest RIR
};

EvalReport make_report(const Simulator& sim, const std::string& method,
                       const std::string& scene_path, const LossDetail& uneq,
                       const LossDetail& eq, long ops, int iterations, unsigned seed) {
  EvalReport rep;
  rep.method = method;
  rep.scene = scene_path;
  const PerMicMetric mse = mse_from_band_mags(eq.band_mags, sim.target());
  const PerMicMetric sigma = sigma_from_band_mags(eq.band_mags);
  rep.mse_per_mic = mse.per_mic;
  rep.mse_avg = mse.average;
  rep.sigma_per_mic = sigma.per_mic;
  rep.sigma_avg = sigma.average;
  rep.mse_no_eq = mse_from_band_mags(uneq.band_mags, sim.target()).average;
  rep.sigma_no_eq = sigma_from_band_mags(uneq.band_mags).average;
  rep.ops_per_sample = ops;
  rep.iterations = iterations;
  rep.seed = seed;
  rep.gamma2 = sim.gamma2();
  rep.ratio_pre = eq.ratio_pre;
  rep.ratio_post = eq.ratio_post;
  return rep;
}

FrequencyGrid grid_for(const Scene& scene, int dft_size) {
  if (dft_size == 0) return FrequencyGrid::for_rir_length(scene.longest_rir(), scene.fs);
  if (dft_size < 2 || (dft_size & (dft_size - 1)) != 0)
    throw std::domain_error("DFT size must be a power of two");
  return FrequencyGrid{dft_size, scene.fs};
}

int cmd_design(const DesignOptions& o) {
  const Scene scene = preprocess(load_scene(o.scene_path));
  const FrequencyGrid grid = grid_for(scene, o.dft_size);
  const Simulator sim(scene, grid, o.gamma2_override);
  const ParamRanges ranges = param_ranges_for(sim.bands());

  RunOutputs out;
  out.method = o.method;
  out.fs = scene.fs;
  out.config = {{"method", o.method},
                {"scene", fs_::absolute(o.scene_path).string()},
                {"seed", o.seed},
                {"iterations", o.iterations},
                {"lr", o.lr},
                {"layers", o.bias_only ? std::vector<int>{} : o.layers},
                {"gamma2_override", o.gamma2_override},
                {"fir_len", o.fir_len},
                {"beta_fd", o.beta_fd},
                {"dsm_gamma", o.dsm_gamma},
                {"dft_size", grid.size},
                {"log_every", o.log_every}};

  const std::vector<CArr> unity(static_cast<size_t>(sim.n_sources()),
                                CArr::Ones(grid.bins()));
  LossDetail uneq;
  sim.loss_from_responses(unity, &uneq);

  const auto t0 = std::chrono::steady_clock::now();
  LossDetail eq;
  long ops = 0;
  int iterations = o.iterations;
  if (o.method == "biasnet") {
    RunConfig rc;
    rc.layers = o.bias_only ? std::vector<int>{} : o.layers;
    rc.iterations = o.iterations;
    rc.seed = o.seed;
    rc.lr = o.lr;
    rc.gamma2_override = o.gamma2_override;
    rc.log_every = o.log_every;
    OptimizeResult res = optimize(sim, ranges, rc);
    out.equalizers = std::move(res.equalizers);
    for (const HistoryEntry& h : res.history)
      out.history.push_back({{"iteration", h.iteration},
                             {"l1", h.l1},
                             {"l2", h.l2},
                             {"total", h.total},
                             {"mse", h.mse}});
  } else if (o.method == "dsm") {
    DsmConfig dc;
    dc.gamma = o.dsm_gamma;
    dc.iterations = o.iterations;
    dc.seed = o.seed;
    DsmResult res = dsm_optimize(sim, ranges, dc);
    out.equalizers = std::move(res.equalizers);
    for (size_t i = 0; i < res.loss_history.size(); ++i)
      out.history.push_back(
          {{"iteration", static_cast<int>(i)}, {"total", res.loss_history[i]}});
  } else if (o.method == "fd") {
    out.firs = fd_design(sim, o.fir_len, o.beta_fd);
    iterations = 0;
  } else {
    throw std::domain_error("unknown method '" + o.method + "'");
  }

  if (o.method == "fd") {
    sim.loss_from_responses(fir_source_spectra(out.firs, grid), &eq);
    ops = ops_per_sample_fir(o.fir_len);
    json taps = json::array();
    for (const FirEqualizer& fir : out.firs) taps.push_back(vec_to_json(fir.taps));
    out.params = {{"method", o.method}, {"fs", scene.fs}, {"firs", std::move(taps)}};
  } else {
    sim.loss(out.equalizers, &eq);
    ops = ops_per_sample_iir(ranges.bands());
    out.params = {{"method", o.method},
                  {"fs", scene.fs},
                  {"equalizers", equalizers_to_json(out.equalizers)}};
  }
  const auto t1 = std::chrono::steady_clock::now();

  out.report = make_report(sim, o.method, fs_::absolute(o.scene_path).string(), uneq, eq, ops,
                           iterations, o.seed);
  out.report.wall_s = std::chrono::duration<double>(t1 - t0).count();
  out.mags_uneq = uneq.band_mags;
  out.mags_eq = eq.band_mags;
  write_run_dir(o.out_dir, out, sim.bands());
  std::cout << report_to_json(out.report).dump(2) << "\n";
  return 0;
}

struct EvalOptions {
  std::string run_dir;
  std::string scene_path;  // overrides the one recorded in the run config
  std::string out_path;
};

int cmd_eval(const EvalOptions& o) {
  const json cfg = read_json_file((fs_::path(o.run_dir) / "config.json").string());
  const std::string method = cfg.at("method").get<std::string>();
  const std::string scene_path =
      o.scene_path.empty() ? cfg.at("scene").get<std::string>() : o.scene_path;

  const Scene scene = preprocess(load_scene(scene_path));
  const FrequencyGrid grid = grid_for(scene, cfg.value("dft_size", 0));
  const Simulator sim(scene, grid, cfg.value("gamma2_override", -1.0));

  const std::vector<CArr> unity(static_cast<size_t>(sim.n_sources()),
                                CArr::Ones(grid.bins()));
  LossDetail uneq;
  sim.loss_from_responses(unity, &uneq);

  const auto t0 = std::chrono::steady_clock::now();
  LossDetail eq;
  long ops = 0;
  if (method == "fd") {
    std::vector<FirEqualizer> firs;
    for (int s = 0; s < sim.n_sources(); ++s)
      firs.push_back(
          read_fir_file((fs_::path(o.run_dir) / ("fir_s" + std::to_string(s) + ".txt")).string()));
    sim.loss_from_responses(fir_source_spectra(firs, grid), &eq);
    ops = ops_per_sample_fir(static_cast<int>(firs.front().taps.size()));
  } else {
    std::vector<CoeffEqualizer> eqs;
    for (int s = 0; s < sim.n_sources(); ++s) {
      const std::string p =
          (fs_::path(o.run_dir) / ("eq_s" + std::to_string(s) + ".txt")).string();
      std::ifstream f(p);
      if (!f) throw std::runtime_error("cannot open " + p);
      eqs.push_back(parse_coefficients(f));
    }
    sim.loss(eqs, &eq);
    ops = ops_per_sample_iir(static_cast<int>(eqs.front().sos.size()));
  }
  const auto t1 = std::chrono::steady_clock::now();

  EvalReport rep = make_report(sim, method, scene_path, uneq, eq, ops,
                               cfg.value("iterations", 0), cfg.value("seed", 0u));
  rep.wall_s = std::chrono::duration<double>(t1 - t0).count();
  const json j = report_to_json(rep);
  if (o.out_path.empty())
    std::cout << j.dump(2) << "\n";
  else
    write_json_file(o.out_path, j);
  return 0;
}

struct ExportOptions {
  std::string run_dir;
  std::string out_dir;
};

int cmd_export(const ExportOptions& o) {
  const json params = read_json_file((fs_::path(o.run_dir) / "params.json").string());
  const double fs = params.at("fs").get<double>();
  fs_::create_directories(o.out_dir);
  if (params.contains("firs")) {
    int s = 0;
    for (const json& taps : params.at("firs")) {
      FirEqualizer fir;
      fir.taps.resize(static_cast<Eigen::Index>(taps.size()));
      for (size_t i = 0; i < taps.size(); ++i)
        fir.taps[static_cast<Eigen::Index>(i)] = taps[i].get<double>();
      write_fir_file((fs_::path(o.out_dir) / ("fir_s" + std::to_string(s) + ".txt")).string(),
                     fir);
      ++s;
    }
  } else {
    const std::vector<Equalizer> eqs = equalizers_from_json(params.at("equalizers"));
    for (size_t s = 0; s < eqs.size(); ++s) {
      const std::string p =
          (fs_::path(o.out_dir) / ("eq_s" + std::to_string(s) + ".txt")).string();
      std::ofstream f(p);
      if (!f) throw std::runtime_error("cannot write " + p);
      export_coefficients(f, eqs[s], fs);
    }
  }
  return 0;
}

struct GradcheckOptions {
  unsigned seed = 0;
  double step = 1e-6;
  double tol = 1e-5;
  int repeats = 2;
  std::string corrupt;
  std::string out_path;
};

json class_stats_json(const GradCheckClassStats& st) {
  return {{"max_rel", st.max_rel}, {"mean_rel", st.mean_rel}, {"count", st.count}};
}

int cmd_gradcheck(const GradcheckOptions& o) {
  GradCheckConfig cfg = GradCheckConfig::standard(o.seed, o.repeats);
  cfg.step = o.step;
  cfg.tol = o.tol;
  cfg.corrupt_class = o.corrupt;
  const GradCheckReport rep = run_gradcheck(cfg);
  json j;
  j["seed"] = rep.seed;
  j["step"] = rep.step;
  j["tol"] = rep.tol;
  j["scenes_checked"] = rep.scenes_checked;
  j["components_checked"] = rep.components_checked;
  j["classes"] = {{"fc", class_stats_json(rep.fc)},
                  {"q", class_stats_json(rep.q)},
                  {"v0", class_stats_json(rep.v0)},
                  {"vs", class_stats_json(rep.vs)}};
  j["overall_max_rel"] = rep.overall_max_rel;
  j["worst_class"] = rep.worst_class;
  j["pass"] = rep.pass;
  if (o.out_path.empty())
    std::cout << j.dump(2) << "\n";
  else
    write_json_file(o.out_path, j);
  return rep.pass ? 0 : 1;
}

}  // namespace

void write_fir_file(const std::string& path, const FirEqualizer& fir) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "taps " << fir.taps.size() << "\n";
  for (Eigen::Index i = 0; i < fir.taps.size(); ++i) f << fmt17(fir.taps[i]) << "\n";
}

FirEqualizer read_fir_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string word;
  long n = 0;
  if (!(f >> word >> n) || word != "taps" || n < 1)
    throw std::runtime_error("malformed FIR file " + path);
  FirEqualizer fir;
  fir.taps.resize(n);
  for (long i = 0; i < n; ++i)
    if (!(f >> fir.taps[i])) throw std::runtime_error("truncated FIR file " + path);
  return fir;
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"roomeq: multi-source room equalization designer"};
  app.require_subcommand(1);

  SynthOptions so;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scene");
  synth->add_option("--spec", so.spec_path, "synthesis spec JSON (overrides flags)");
  synth->add_option("--out", so.out_dir, "output scene directory")->required();
  synth->add_option("--sources", so.spec.n_sources);
  synth->add_option("--mics", so.spec.n_mics);
  synth->add_option("--fs", so.spec.fs);
  synth->add_option("--seed", so.spec.seed);
  synth->add_option("--decay-ms", so.spec.decay_ms);
  synth->add_option("--coloration-db", so.spec.coloration_db);
  synth->add_option("--f-low", so.spec.f_low);
  synth->add_option("--f-high", so.spec.f_high);
  synth->add_option("--tail-db", so.spec.tail_db);
  synth->add_option("--rir-len", so.spec.rir_len);
  synth->add_option("--sections", so.spec.coloration_sections);

  DesignOptions dop;
  CLI::App* design = app.add_subcommand("design", "design equalizers for a scene");
  design->add_option("--scene", dop.scene_path, "scene manifest JSON")->required();
  design->add_option("--out", dop.out_dir, "run output directory")->required();
  design->add_option("--method", dop.method)->check(CLI::IsMember({"biasnet", "dsm", "fd"}));
  design->add_option("--layers", dop.layers, "hidden layer sizes")->delimiter(',');
  design->add_flag("--bias-only", dop.bias_only, "degenerate generator p = sin(b0)");
  design->add_option("--iters", dop.iterations);
  design->add_option("--seed", dop.seed);
  design->add_option("--lr", dop.lr);
  design->add_option("--gamma2", dop.gamma2_override, "override the L2 weight");
  design->add_option("--log-every", dop.log_every);
  design->add_option("--fir-len", dop.fir_len);
  design->add_option("--beta", dop.beta_fd, "deconvolution regularization");
  design->add_option("--dsm-gamma", dop.dsm_gamma);
  design->add_option("--dft-size", dop.dft_size, "0 derives it from the longest RIR");

  EvalOptions eo;
  CLI::App* eval = app.add_subcommand("eval", "re-evaluate a run from exported coefficients");
  eval->add_option("--run", eo.run_dir, "run directory")->required();
  eval->add_option("--scene", eo.scene_path, "override the recorded scene manifest");
  eval->add_option("--out", eo.out_path, "report path (default stdout)");

  ExportOptions xo;
  CLI::App* exp = app.add_subcommand("export", "re-export coefficient files from a run");
  exp->add_option("--run", xo.run_dir)->required();
  exp->add_option("--out", xo.out_dir)->required();

  GradcheckOptions go;
  CLI::App* gc = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
  gc->add_option("--seed", go.seed);
  gc->add_option("--step", go.step);
  gc->add_option("--tol", go.tol);
  gc->add_option("--repeats", go.repeats, "parameter draws per scene case");
  gc->add_option("--corrupt", go.corrupt, "skew one class (negative control)")
      ->check(CLI::IsMember({"fc", "q", "v0", "vs"}));
  gc->add_option("--out", go.out_path, "report path (default stdout)");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(so);
    if (design->parsed()) return cmd_design(dop);
    if (eval->parsed()) return cmd_eval(eo);
    if (exp->parsed()) return cmd_export(xo);
    if (gc->parsed()) return cmd_gradcheck(go);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace roomeq
