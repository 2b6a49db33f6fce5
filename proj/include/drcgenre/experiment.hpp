#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "drcgenre/audio_io.hpp"
#include "drcgenre/compressor.hpp"
#include "drcgenre/features.hpp"
#include "drcgenre/svm.hpp"

namespace drcgenre {

struct BaseSetting {
  std::string name;  // "high", "medium", "low"
  char code;         // 'H', 'M', 'L'
  CompressorSettings settings;
};

/// high (-20 dB, 8:1, 0 dB knee, 1 ms, 10 ms, +7 dB), medium (-10, 5, 5, 5 ms, 50 ms, +5),
/// low (-5, 2, 20, 10 ms, 100 ms, +3).
std::array<BaseSetting, 3> base_settings();

enum class Parameter { threshold, ratio, knee, attack, release, makeup };
inline constexpr std::array<Parameter, 6> kAllParameters{Parameter::threshold, Parameter::ratio,
                                                          Parameter::knee,      Parameter::attack,
                                                          Parameter::release,   Parameter::makeup};

std::string_view parameter_code(Parameter p);  // T, R, K, A, Re, M
std::string_view parameter_name(Parameter p);
std::span<const double> parameter_values(Parameter p);  // the five grid values, ascending

struct GridEntry {
  std::string name;  // e.g. "LM2": low base, makeup, second grid value
  std::size_t base = 0;
  Parameter parameter = Parameter::threshold;
  std::size_t value_index = 0;  // 0-based; the name carries value_index + 1
  CompressorSettings settings;
};

struct TransformationGrid {
  std::vector<GridEntry> entries;

  const GridEntry& find(std::string_view name) const;
};

/// 3 bases x 6 parameters x 5 values = 90 entries, each differing from its base in one knob.
TransformationGrid build_grid();

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified split. Each class contributes round(fraction * n) test clips, clamped to
/// [1, n - 1]. Deterministic in `seed`.
Split split_dataset(std::span<const std::string> labels, double test_fraction, std::uint64_t seed);
Split split_dataset(const Dataset& dataset, double test_fraction, std::uint64_t seed);

struct SweepConfig {
  std::size_t iterations = 10;
  std::uint64_t seed = 42;
  double test_fraction = 0.2;
  SvmConfig svm{};
  FeatureConfig features{};
  std::size_t threads = 0;  // 0: hardware concurrency
};

struct SweepRow {
  std::string name;
  std::optional<CompressorSettings> settings;  // empty for the baseline
  std::vector<double> accuracies;              // one per iteration
  double mean_accuracy = 0.0;
  double delta_vs_baseline = 0.0;
};

struct SweepReport {
  SweepRow baseline;
  std::vector<SweepRow> entries;  // grid order
  std::uint64_t seed = 0;
  double test_fraction = 0.0;
  std::size_t iterations = 0;
  std::size_t clip_count = 0;
  std::size_t skipped_clips = 0;  // clip/setting pairs whose features could not be extracted

  std::size_t row_count() const { return entries.size() + 1; }
};

SweepReport run_sweep(const Dataset& dataset, const TransformationGrid& grid, const SweepConfig& config);

/// Entries by mean accuracy (descending), ties by name. The baseline is never ranked.
std::vector<const SweepRow*> rank_report(const SweepReport& report, std::size_t top_k);

/// Fixed-width table: Name, Threshold, Ratio, Knee Width, Attack, Release, Makeup Gain,
/// Accuracy, Delta, with the baseline as a footer line.
std::string format_ranking(const SweepReport& report, std::size_t top_k);

void write_report_csv(const SweepReport& report, std::ostream& out);
std::string report_json(const SweepReport& report);

}  // namespace drcgenre
