#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "drcgenre/audio_io.hpp"

namespace drcgenre {

enum class Window { hann, rectangular };

struct FrameSpec {
  std::size_t frame_len = 2048;
  std::size_t hop_len = 512;
  Window window = Window::hann;

  void validate() const;
  /// Number of whole frames in a signal of `length` samples (no padding).
  std::size_t frame_count(std::size_t length) const;
};

// Mel scale, m = 2595 log10(1 + f/700).
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Discrete Fourier transform of a real sequence of any length (radix-2, or Bluestein for
/// other lengths).
std::vector<std::complex<double>> dft(std::span<const double> x);

/// |DFT|^2 of the windowed frame, bins 0..N/2.
std::vector<double> power_spectrum(std::span<const double> frame, Window window = Window::hann);

/// Orthonormal DCT-II, first `n_out` coefficients.
std::vector<double> dct_ii(std::span<const double> x, std::size_t n_out);

/// Triangular filters with centres equally spaced in mel between 0 Hz and Nyquist, peak 1.
class MelFilterbank {
 public:
  MelFilterbank(std::size_t n_filters, std::size_t frame_len, int sample_rate);

  std::size_t n_filters() const { return n_filters_; }
  std::size_t n_bins() const { return n_bins_; }
  int sample_rate() const { return sample_rate_; }
  std::span<const double> row(std::size_t filter) const {
    return {weights_.data() + filter * n_bins_, n_bins_};
  }
  const std::vector<double>& center_hz() const { return center_hz_; }

  std::vector<double> apply(std::span<const double> power) const;

 private:
  std::size_t n_filters_;
  std::size_t n_bins_;
  int sample_rate_;
  std::vector<double> weights_;
  std::vector<double> center_hz_;
};

inline constexpr double kLogEnergyFloor = 1e-10;
inline constexpr std::size_t kMfccCount = 13;
inline constexpr std::size_t kTonalDims = 6;
inline constexpr std::size_t kFeatureDims = kMfccCount + 2 + kTonalDims;

/// Per-frame MFCCs: power spectrum, mel energies, natural log (floored), DCT-II.
std::vector<std::vector<double>> mfcc(const AudioBuffer& buffer, const FrameSpec& spec,
                                      const MelFilterbank& bank, std::size_t n_coeffs = kMfccCount);

/// Fraction of adjacent sample pairs whose product is strictly negative.
double zero_crossing_rate(std::span<const double> samples);
inline double zero_crossing_rate(const AudioBuffer& buffer) {
  return zero_crossing_rate(buffer.samples);
}

struct BpmBand {
  double min_bpm = 40.0;
  double max_bpm = 200.0;
};

struct TempoEstimate {
  double bpm = 0.0;
  bool fallback = false;  // silent input: bpm is the band midpoint
};

/// Half-wave rectified spectral flux of the magnitude spectrum, one value per frame.
std::vector<double> onset_strength(const AudioBuffer& buffer, const FrameSpec& spec);

/// Global tempo from the autocorrelation peak of the onset envelope within `band`.
TempoEstimate estimate_tempo(const AudioBuffer& buffer, const FrameSpec& spec, BpmBand band = {});

using Chroma = std::array<double, 12>;
using TonalVector = std::array<double, kTonalDims>;

/// Pitch-class energy (index 0 = C, 9 = A) of a power spectrum with bins 0..N/2.
Chroma chroma(std::span<const double> power, int sample_rate);

/// Rows are sin/cos pairs on the circle of fifths (radius 1), minor thirds (1) and major
/// thirds (0.5).
const std::array<std::array<double, 12>, kTonalDims>& tonal_centroid_basis();

struct TonalCentroid {
  TonalVector value{};
  bool silent = false;  // all-zero chroma, value is zero
};

TonalCentroid tonal_centroid(const Chroma& chroma_vec);

/// Harmonic change: |z[n+1] - z[n-1]| for interior frames (size n-2).
std::vector<double> hcdf(std::span<const TonalVector> centroids);

struct FeatureVector {
  std::array<double, kMfccCount> mfcc{};
  double tempo_bpm = 0.0;
  double zcr = 0.0;
  TonalVector tonal_centroid{};

  std::array<double, kFeatureDims> flatten() const;
  static FeatureVector unflatten(std::span<const double> values);
  static const std::array<std::string, kFeatureDims>& column_names();
};

struct FeatureConfig {
  FrameSpec frame{2048, 512, Window::hann};
  FrameSpec tempo_frame{512, 128, Window::hann};
  std::size_t n_mel_filters = 26;
  BpmBand band{};
  double min_duration_s = 2.0;
};

struct FeatureDiagnostics {
  std::size_t frames = 0;
  std::size_t silent_frames = 0;
  bool tempo_fallback = false;
  std::vector<double> hcdf;
};

FeatureVector extract_feature_vector(const AudioBuffer& buffer, const FeatureConfig& config = {},
                                     FeatureDiagnostics* diagnostics = nullptr);

// One header line and one row, columns as in FeatureVector::column_names().
std::string feature_csv(const FeatureVector& features);
void write_feature_csv(const FeatureVector& features, const std::filesystem::path& path);
FeatureVector read_feature_csv(const std::filesystem::path& path);

}  // namespace drcgenre
