#pragma once

#include <span>
#include <vector>

#include "drcgenre/audio_io.hpp"

namespace drcgenre {

/// The six compressor controls. Levels in dB, times in seconds.
struct CompressorSettings {
  double threshold_db = 0.0;
  double ratio = 1.0;
  double knee_width_db = 0.0;
  double attack_s = 0.0;
  double release_s = 0.0;
  double makeup_db = 0.0;

  void validate() const;

  friend bool operator==(const CompressorSettings&, const CompressorSettings&) = default;
};

// Levels at or below kSilenceAmplitude map to kDbFloor.
inline constexpr double kDbFloor = -120.0;
inline constexpr double kSilenceAmplitude = 1e-6;

double db_from_linear(double amplitude);
double linear_from_db(double gain_db);

/// Hard-knee static curve: identity up to the threshold, slope 1/ratio above it.
double static_gain_hard_knee(double x_db, double threshold_db, double ratio);

/// Soft-knee static curve. The knee spans threshold +/- knee_width/2 and blends the two
/// slopes with a quadratic; a zero-width knee reduces to the hard-knee curve.
double static_gain_soft_knee(double x_db, double threshold_db, double ratio, double knee_width_db);

/// One-pole smoothing of a gain trajectory in dB. The attack coefficient is used while the
/// gain is falling (more reduction), the release coefficient while it recovers. The state
/// starts at the first input value.
std::vector<double> smooth_gain(std::span<const double> raw_gain_db, double attack_s, double release_s,
                                int sample_rate);

/// Feed-forward compressor with per-sample peak level detection.
AudioBuffer compress(const AudioBuffer& buffer, const CompressorSettings& settings);

}  // namespace drcgenre
