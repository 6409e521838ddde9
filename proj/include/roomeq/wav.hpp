#pragma once

#include <string>

#include "roomeq/filter.hpp"

namespace roomeq {

/// Minimal mono RIFF/WAVE support: reads PCM16 and IEEE float32,
/// writes IEEE float32.
struct WavData {
  Vec samples;
  double fs = 0.0;
};

WavData read_wav(const std::string& path);
void write_wav(const std::string& path, const Vec& samples, double fs);

}  // namespace roomeq
