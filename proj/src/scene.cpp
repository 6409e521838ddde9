#include "roomeq/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

#include "json.hpp"
#include "roomeq/wav.hpp"

namespace roomeq {

namespace fs_ = std::filesystem;
using nlohmann::json;

int Scene::longest_rir() const {
  int n = 0;
  for (const auto& h : rirs) n = std::max<int>(n, static_cast<int>(h.size()));
  return n;
}

TargetResponse TargetResponse::flat(const BandSet& bands) {
  TargetResponse t;
  t.magnitudes = Arr::Ones(bands.count());
  return t;
}

BandSet make_bands(double f_low, double f_high, const FrequencyGrid& grid) {
  if (!(f_low > 0.0) || !(f_low < f_high) || !(f_high < grid.fs / 2.0))
    throw std::domain_error("make_bands: need 0 < f_low < f_high < fs/2");

  const double half_bw = std::pow(2.0, 1.0 / 6.0);
  BandSet out;
  for (int i = 0; i <= 70; ++i) {
    const double fc = 1000.0 * std::pow(2.0, (i - 30) / 3.0);
    const double lo = fc / half_bw;
    const double hi = fc * half_bw;
    if (hi <= f_low || lo >= f_high) continue;
    Band b;
    b.f_center = fc;
    b.f_lo = std::max(lo, f_low);
    b.f_hi = std::min(hi, f_high);
    b.k_lo = static_cast<int>(std::ceil(b.f_lo * grid.size / grid.fs));
    b.k_hi = static_cast<int>(std::ceil(b.f_hi * grid.size / grid.fs));
    b.k_hi = std::min(b.k_hi, grid.bins());
    if (b.bins() < 1)
      throw std::domain_error("make_bands: DFT grid too coarse, band without bins at " +
                              std::to_string(fc) + " Hz");
    out.bands.push_back(b);
  }
  if (out.bands.empty()) throw std::domain_error("make_bands: no bands in range");
  return out;
}

Arr band_average(const Arr& magnitude, const BandSet& bands) {
  Arr out(bands.count());
  for (int b = 0; b < bands.count(); ++b) {
    const Band& band = bands.bands[b];
    out[b] = std::sqrt(magnitude.segment(band.k_lo, band.bins()).square().mean());
  }
  return out;
}

ParamRanges param_ranges_for(const BandSet& bands) {
  ParamRanges r;
  r.fc_bands.reserve(bands.bands.size());
  for (const Band& b : bands.bands) r.fc_bands.push_back({b.f_lo, b.f_hi});
  return r;
}

std::vector<CArr> scene_spectra(const Scene& scene, const FrequencyGrid& grid) {
  const double gain = std::pow(10.0, scene.offset_db / 20.0);
  Eigen::FFT<double> fft;
  std::vector<CArr> out;
  out.reserve(scene.rirs.size());
  std::vector<double> padded(static_cast<size_t>(grid.size));
  std::vector<std::complex<double>> spec;
  for (int s = 0; s < scene.n_sources; ++s) {
    const int delay = scene.delays.empty() ? 0 : scene.delays[s];
    for (int m = 0; m < scene.n_mics; ++m) {
      const Vec& h = scene.rir(s, m);
      if (delay >= h.size())
        throw std::domain_error("scene_spectra: delay exceeds RIR length");
      std::fill(padded.begin(), padded.end(), 0.0);
      const int len = std::min<int>(static_cast<int>(h.size()) - delay, grid.size);
      for (int n = 0; n < len; ++n) padded[static_cast<size_t>(n)] = gain * h[delay + n];
      fft.fwd(spec, padded);
      CArr half(grid.bins());
      for (int k = 0; k < grid.bins(); ++k) half[k] = spec[static_cast<size_t>(k)];
      out.push_back(std::move(half));
    }
  }
  return out;
}

Scene preprocess(const Scene& scene) {
  Scene out = scene;
  out.delays.assign(static_cast<size_t>(out.n_sources), 0);
  for (int s = 0; s < out.n_sources; ++s) {
    const Vec& h = out.rir(s, out.reference_mic);
    if (h.cwiseAbs().maxCoeff() == 0.0)
      throw std::domain_error("preprocess: all-zero RIR for source " + std::to_string(s));
    Eigen::Index argmax = 0;
    h.cwiseAbs().maxCoeff(&argmax);
    out.delays[s] = static_cast<int>(argmax);
  }

  out.offset_db = 0.0;
  const FrequencyGrid grid = FrequencyGrid::for_rir_length(out.longest_rir(), out.fs);
  const BandSet bands = make_bands(out.f_low, out.f_high, grid);
  const std::vector<CArr> spectra = scene_spectra(out, grid);
  double mean_db = 0.0;
  for (int m = 0; m < out.n_mics; ++m) {
    CArr sum = CArr::Zero(grid.bins());
    for (int s = 0; s < out.n_sources; ++s) sum += spectra[static_cast<size_t>(s) * out.n_mics + m];
    const Arr mags = band_average(sum.abs(), bands);
    for (int b = 0; b < bands.count(); ++b) mean_db += 20.0 * std::log10(std::max(mags[b], 1e-300));
  }
  mean_db /= out.n_mics * bands.count();
  out.offset_db = -mean_db;
  out.preprocessed = true;
  return out;
}

Scene synth_scene(const SynthSpec& spec) {
  if (spec.n_sources < 1 || spec.n_mics < 1)
    throw std::domain_error("synth_scene: need at least one source and one mic");
  std::mt19937 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Scene scene;
  scene.n_sources = spec.n_sources;
  scene.n_mics = spec.n_mics;
  scene.fs = spec.fs;
  scene.f_low = spec.f_low;
  scene.f_high = spec.f_high;
  scene.rirs.resize(static_cast<size_t>(spec.n_sources) * spec.n_mics);

  const double tail_lin = std::pow(10.0, spec.tail_db / 20.0);
  const double decay_samples = spec.decay_ms * 1e-3 * spec.fs;

  for (int s = 0; s < spec.n_sources; ++s) {
    const int base_delay = 100 + static_cast<int>(unit(rng) * 300.0);
    const double amp = 0.6 + 0.4 * unit(rng);

    Equalizer coloration;
    if (spec.coloration_db > 0.0) {
      const double lo = std::max(1.3 * spec.f_low, 120.0);
      const double hi = std::min(0.85 * spec.f_high, 12000.0);
      for (int j = 0; j < spec.coloration_sections; ++j) {
        ParametricSection sec;
        sec.fc = lo * std::pow(hi / lo, unit(rng));
        sec.q = 0.8 + 1.7 * unit(rng);
        sec.v0_db = spec.coloration_db * (2.0 * unit(rng) - 1.0);
        coloration.sections.push_back(sec);
      }
    }

    for (int m = 0; m < spec.n_mics; ++m) {
      const int jitter = (spec.n_mics > 1) ? static_cast<int>(unit(rng) * 32.0) : 0;
      const int delay = base_delay + jitter;
      if (delay >= spec.rir_len)
        throw std::domain_error("synth_scene: rir_len too short for the drawn delays");
      Vec h = Vec::Zero(spec.rir_len);
      h[delay] = amp;
      if (decay_samples > 0.0 && tail_lin > 0.0) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int n = delay + 1; n < spec.rir_len; ++n) {
          const double env = std::exp(-6.907 * (n - delay) / decay_samples);
          if (env < 1e-9) break;
          h[n] = amp * tail_lin * env * gauss(rng);
        }
      }
      if (!coloration.sections.empty()) h = filter_time_domain(coloration, h, spec.fs);
      scene.rir(s, m) = h;
    }
  }
  return scene;
}

Scene load_scene(const std::string& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw std::runtime_error("load_scene: cannot open " + manifest_path);
  json j = json::parse(f);

  Scene scene;
  scene.fs = j.at("fs").get<double>();
  scene.f_low = j.at("f_low").get<double>();
  scene.f_high = j.at("f_high").get<double>();
  scene.reference_source = j.value("reference_source", 0);
  scene.reference_mic = j.value("reference_mic", 0);

  const fs_::path base = fs_::path(manifest_path).parent_path();
  int max_s = -1, max_m = -1;
  struct Entry { int s, m; std::string path; };
  std::vector<Entry> entries;
  for (const auto& e : j.at("rirs")) {
    Entry ent{e.at("source").get<int>(), e.at("mic").get<int>(), e.at("path").get<std::string>()};
    max_s = std::max(max_s, ent.s);
    max_m = std::max(max_m, ent.m);
    entries.push_back(std::move(ent));
  }
  if (max_s < 0) throw std::runtime_error("load_scene: no rirs in manifest");
  scene.n_sources = max_s + 1;
  scene.n_mics = max_m + 1;
  scene.rirs.assign(static_cast<size_t>(scene.n_sources) * scene.n_mics, Vec());
  for (const auto& ent : entries) {
    fs_::path p = ent.path;
    if (p.is_relative()) p = base / p;
    WavData wav = read_wav(p.string());
    if (wav.fs != scene.fs)
      throw std::runtime_error("load_scene: sample-rate mismatch in " + p.string());
    scene.rir(ent.s, ent.m) = wav.samples;
  }
  for (int s = 0; s < scene.n_sources; ++s)
    for (int m = 0; m < scene.n_mics; ++m)
      if (scene.rir(s, m).size() == 0)
        throw std::runtime_error("load_scene: missing RIR for source " + std::to_string(s) +
                                 ", mic " + std::to_string(m));
  return scene;
}

void save_scene(const Scene& scene, const std::string& out_dir) {
  fs_::create_directories(fs_::path(out_dir) / "rirs");
  json j;
  j["fs"] = scene.fs;
  j["f_low"] = scene.f_low;
  j["f_high"] = scene.f_high;
  j["reference_source"] = scene.reference_source;
  j["reference_mic"] = scene.reference_mic;
  j["rirs"] = json::array();
  for (int s = 0; s < scene.n_sources; ++s) {
    for (int m = 0; m < scene.n_mics; ++m) {
      const std::string rel = "rirs/s" + std::to_string(s) + "_m" + std::to_string(m) + ".wav";
      write_wav((fs_::path(out_dir) / rel).string(), scene.rir(s, m), scene.fs);
      j["rirs"].push_back({{"source", s}, {"mic", m}, {"path", rel}});
    }
  }
  std::ofstream f(fs_::path(out_dir) / "manifest.json");
  if (!f) throw std::runtime_error("save_scene: cannot write manifest");
  f << j.dump(2) << "\n";
}

SynthSpec load_synth_spec(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_synth_spec: cannot open " + path);
  json j = json::parse(f);
  SynthSpec spec;
  spec.n_sources = j.at("S").get<int>();
  spec.n_mics = j.at("M").get<int>();
  spec.fs = j.value("fs", spec.fs);
  spec.decay_ms = j.value("decay_ms", spec.decay_ms);
  spec.coloration_db = j.value("coloration_db", spec.coloration_db);
  spec.seed = j.value("seed", spec.seed);
  spec.f_low = j.value("f_low", spec.f_low);
  spec.f_high = j.value("f_high", spec.f_high);
  spec.tail_db = j.value("tail_db", spec.tail_db);
  spec.coloration_sections = j.value("coloration_sections", spec.coloration_sections);
  spec.rir_len = j.value("rir_len", spec.rir_len);
  return spec;
}

}  // namespace roomeq
