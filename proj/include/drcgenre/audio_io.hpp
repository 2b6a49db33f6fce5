#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace drcgenre {

/// Mono signal, double precision, nominally in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }

  /// Throws std::invalid_argument if the rate is not positive or a sample is not finite.
  void validate() const;
};

class WavError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class WavNotFound : public WavError {
 public:
  using WavError::WavError;
};

class WavUnsupported : public WavError {
 public:
  using WavError::WavError;
};

class WavMalformed : public WavError {
 public:
  using WavError::WavError;
};

class WavWriteError : public WavError {
 public:
  using WavError::WavError;
};

// Accepts PCM16 and IEEE float32, mono or stereo (stereo is averaged).
AudioBuffer read_wav(const std::filesystem::path& path);
AudioBuffer decode_wav(std::string_view bytes);

// Writes 16-bit PCM mono. Returns the number of samples clipped to full scale.
std::size_t write_wav(const AudioBuffer& buffer, const std::filesystem::path& path);
std::string encode_wav(const AudioBuffer& buffer, std::size_t* clipped = nullptr);

// ---------------------------------------------------------------------------
// Synthetic genres

enum class Recipe { noise, chord_pad, click_train, chirp };

Recipe parse_recipe(std::string_view name);
std::string_view to_string(Recipe recipe);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// A synthetic genre. `fundamental_hz` means the lowpass cutoff for noise, the chord
/// root for chord_pad, the click resonance for click_train and the sweep start for chirp.
struct GenreSpec {
  std::string name;
  Recipe recipe = Recipe::noise;
  Range fundamental_hz{440.0, 440.0};
  Range bpm{120.0, 120.0};
  double noise_level = 0.01;
  Range peak_dbfs{-24.0, -21.0};
};

/// Deterministic in (spec, seed, duration_s, sample_rate).
AudioBuffer synth_clip(const GenreSpec& spec, std::uint64_t seed, double duration_s,
                       int sample_rate);

/// The four recipes used for the desk-scale dataset.
std::vector<GenreSpec> default_genres();

// ---------------------------------------------------------------------------
// Datasets laid out as <root>/<genre>/<clip>.wav

struct LabeledClip {
  std::string label;
  std::string id;
  AudioBuffer audio;
};

struct Dataset {
  std::vector<LabeledClip> clips;
  std::vector<std::string> skipped;  // files that failed to load

  std::vector<std::string> labels() const;  // sorted, unique
};

Dataset load_dataset(const std::filesystem::path& root);
void write_dataset(const Dataset& dataset, const std::filesystem::path& root);

Dataset make_synthetic_dataset(const std::vector<GenreSpec>& genres, std::size_t clips_per_genre,
                               double duration_s, int sample_rate, std::uint64_t seed);

}  // namespace drcgenre
