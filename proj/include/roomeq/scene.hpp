#pragma once

#include <string>
#include <vector>

#include "roomeq/filter.hpp"

namespace roomeq {

/// Multi-source / multi-listening-point acoustic scene.
struct Scene {
  int n_sources = 0;            // S
  int n_mics = 0;               // M
  double fs = 48000.0;
  std::vector<Vec> rirs;        // row-major, index s * n_mics + m
  std::vector<int> delays;      // per source, filled by preprocess()
  double offset_db = 0.0;       // global gain normalizing the no-EQ response
  double f_low = 100.0;
  double f_high = 14000.0;
  int reference_source = 0;
  int reference_mic = 0;
  bool preprocessed = false;

  const Vec& rir(int s, int m) const { return rirs[static_cast<size_t>(s) * n_mics + m]; }
  Vec& rir(int s, int m) { return rirs[static_cast<size_t>(s) * n_mics + m]; }
  int longest_rir() const;
};

/// One third-octave band together with the DFT bins it covers.
struct Band {
  double f_center = 0.0;
  double f_lo = 0.0;   // clipped to the equalization range
  double f_hi = 0.0;
  int k_lo = 0;        // bins k_lo..k_hi-1 belong to this band
  int k_hi = 0;
  int bins() const { return k_hi - k_lo; }
};

struct BandSet {
  std::vector<Band> bands;
  int count() const { return static_cast<int>(bands.size()); }
};

/// Desired band magnitudes (linear), one per band.
struct TargetResponse {
  Arr magnitudes;
  static TargetResponse flat(const BandSet& bands);
};

/// Base-2 third-octave bands (centers 1000 * 2^{(i-30)/3}, edges fc * 2^{+-1/6})
/// intersecting [f_low, f_high]; edges are clipped to the range.
/// Throws std::domain_error on an empty range or a band with no bins.
BandSet make_bands(double f_low, double f_high, const FrequencyGrid& grid);

/// Per band: sqrt of the mean bin power.
Arr band_average(const Arr& magnitude, const BandSet& bands);

/// Parameter ranges whose fc bands are the given third-octave bands.
ParamRanges param_ranges_for(const BandSet& bands);

/// Delay detection (argmax of |h| at the reference mic) and global offset
/// gain so the mean in-band level of the summed no-EQ response is 0 dB.
Scene preprocess(const Scene& scene);

/// Synthetic scene generator: per-source colored direct pulse plus an
/// exponentially decaying noise tail, deterministic in the seed.
struct SynthSpec {
  int n_sources = 1;
  int n_mics = 1;
  double fs = 48000.0;
  double decay_ms = 40.0;
  double coloration_db = 7.5;
  unsigned seed = 0;
  double f_low = 100.0;
  double f_high = 14000.0;
  double tail_db = -30.0;          // tail level relative to the direct pulse
  int coloration_sections = 5;
  int rir_len = 2048;
};

Scene synth_scene(const SynthSpec& spec);

/// JSON manifest IO: {fs, f_low, f_high, reference_source, rirs:[{source,mic,path}]}.
Scene load_scene(const std::string& manifest_path);
void save_scene(const Scene& scene, const std::string& out_dir);

SynthSpec load_synth_spec(const std::string& path);

/// DFTs of the delay-aligned, offset-scaled RIRs on the grid, S*M entries
/// indexed s * M + m.
std::vector<CArr> scene_spectra(const Scene& scene, const FrequencyGrid& grid);

}  // namespace roomeq
