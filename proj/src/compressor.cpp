#include "drcgenre/compressor.hpp"

#include <cmath>
#include <stdexcept>

namespace drcgenre {

void CompressorSettings::validate() const {
  if (!std::isfinite(threshold_db) || !std::isfinite(makeup_db)) {
    throw std::invalid_argument("threshold and makeup gain must be finite");
  }
  if (!(ratio >= 1.0) || !std::isfinite(ratio)) throw std::invalid_argument("ratio must be >= 1");
  if (!(knee_width_db >= 0.0)) throw std::invalid_argument("knee width must be >= 0");
  if (!(attack_s >= 0.0) || !(release_s >= 0.0)) {
    throw std::invalid_argument("attack and release times must be >= 0");
  }
}

double db_from_linear(double amplitude) {
  if (!(amplitude > kSilenceAmplitude)) return kDbFloor;
  return 20.0 * std::log10(amplitude);
}

double linear_from_db(double gain_db) { return std::pow(10.0, gain_db / 20.0); }

double static_gain_hard_knee(double x_db, double threshold_db, double ratio) {
  if (x_db <= threshold_db) return x_db;
  return threshold_db + (x_db - threshold_db) / ratio;
}

double static_gain_soft_knee(double x_db, double threshold_db, double ratio, double knee_width_db) {
  // With W = 0 the quadratic branch would divide by zero at x == T.
  if (knee_width_db <= 0.0) return static_gain_hard_knee(x_db, threshold_db, ratio);

  const double over = 2.0 * (x_db - threshold_db);
  if (over < -knee_width_db) return x_db;
  if (over > knee_width_db) return threshold_db + (x_db - threshold_db) / ratio;
  const double into_knee = x_db - threshold_db + knee_width_db / 2.0;
  return x_db + (1.0 / ratio - 1.0) * into_knee * into_knee / (2.0 * knee_width_db);
}

namespace {

double pole(double time_s, int sample_rate) {
  if (time_s <= 0.0) return 0.0;
  return std::exp(-1.0 / (time_s * sample_rate));
}

}  // namespace

std::vector<double> smooth_gain(std::span<const double> raw_gain_db, double attack_s, double release_s,
                                int sample_rate) {
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  std::vector<double> out(raw_gain_db.begin(), raw_gain_db.end());
  if (out.empty() || (attack_s <= 0.0 && release_s <= 0.0)) return out;

  const double attack = pole(attack_s, sample_rate);
  const double release = pole(release_s, sample_rate);
  double state = raw_gain_db[0];
  for (std::size_t n = 0; n < out.size(); ++n) {
    const double target = raw_gain_db[n];
    const double a = target < state ? attack : release;
    state = a * state + (1.0 - a) * target;
    out[n] = state;
  }
  return out;
}

AudioBuffer compress(const AudioBuffer& buffer, const CompressorSettings& settings) {
  buffer.validate();
  settings.validate();

  std::vector<double> reduction(buffer.samples.size());
  for (std::size_t n = 0; n < reduction.size(); ++n) {
    const double level = db_from_linear(std::abs(buffer.samples[n]));
    reduction[n] = static_gain_soft_knee(level, settings.threshold_db, settings.ratio,
                                         settings.knee_width_db) -
                   level;
  }
  const std::vector<double> smoothed =
      smooth_gain(reduction, settings.attack_s, settings.release_s, buffer.sample_rate);

  AudioBuffer out;
  out.sample_rate = buffer.sample_rate;
  out.samples.resize(buffer.samples.size());
  for (std::size_t n = 0; n < out.samples.size(); ++n) {
    out.samples[n] = buffer.samples[n] * linear_from_db(smoothed[n] + settings.makeup_db);
  }
  return out;
}

}  // namespace drcgenre
