#include "drcgenre/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "random.hpp"

namespace drcgenre {

std::array<BaseSetting, 3> base_settings() {
  return {{
      {"high", 'H', {-20.0, 8.0, 0.0, 0.001, 0.010, 7.0}},
      {"medium", 'M', {-10.0, 5.0, 5.0, 0.005, 0.050, 5.0}},
      {"low", 'L', {-5.0, 2.0, 20.0, 0.010, 0.100, 3.0}},
  }};
}

namespace {

constexpr std::array<double, 5> kThresholds{-40.0, -20.0, -10.0, -5.0, -3.0};
constexpr std::array<double, 5> kRatios{1.5, 2.0, 5.0, 8.0, 12.0};
constexpr std::array<double, 5> kKnees{0.0, 5.0, 10.0, 20.0, 40.0};
constexpr std::array<double, 5> kAttacks{0.0, 0.001, 0.005, 0.010, 0.050};
constexpr std::array<double, 5> kReleases{0.010, 0.050, 0.100, 0.250, 0.500};
constexpr std::array<double, 5> kMakeups{-1.0, 0.0, 3.0, 5.0, 7.0};

double& knob(CompressorSettings& s, Parameter p) {
  switch (p) {
    case Parameter::threshold: return s.threshold_db;
    case Parameter::ratio: return s.ratio;
    case Parameter::knee: return s.knee_width_db;
    case Parameter::attack: return s.attack_s;
    case Parameter::release: return s.release_s;
    case Parameter::makeup: return s.makeup_db;
  }
  throw std::logic_error("unknown parameter");
}

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

std::uint64_t hash_clip(const AudioBuffer& audio) {
  std::uint64_t h = detail::fnv1a(&audio.sample_rate, sizeof(audio.sample_rate));
  return detail::fnv1a(audio.samples.data(), audio.samples.size() * sizeof(double), h);
}

std::uint64_t hash_settings(const CompressorSettings& s) {
  const double v[6] = {s.threshold_db, s.ratio, s.knee_width_db, s.attack_s, s.release_s, s.makeup_db};
  return detail::fnv1a(v, sizeof(v));
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
}

Point to_point(const FeatureVector& f) {
  const auto flat = f.flatten();
  return {flat.begin(), flat.end()};
}

}  // namespace

std::string_view parameter_code(Parameter p) {
  switch (p) {
    case Parameter::threshold: return "T";
    case Parameter::ratio: return "R";
    case Parameter::knee: return "K";
    case Parameter::attack: return "A";
    case Parameter::release: return "Re";
    case Parameter::makeup: return "M";
  }
  return "?";
}

std::string_view parameter_name(Parameter p) {
  switch (p) {
    case Parameter::threshold: return "threshold_db";
    case Parameter::ratio: return "ratio";
    case Parameter::knee: return "knee_db";
    case Parameter::attack: return "attack_s";
    case Parameter::release: return "release_s";
    case Parameter::makeup: return "makeup_db";
  }
  return "?";
}

std::span<const double> parameter_values(Parameter p) {
  switch (p) {
    case Parameter::threshold: return kThresholds;
    case Parameter::ratio: return kRatios;
    case Parameter::knee: return kKnees;
    case Parameter::attack: return kAttacks;
    case Parameter::release: return kReleases;
    case Parameter::makeup: return kMakeups;
  }
  return {};
}

const GridEntry& TransformationGrid::find(std::string_view name) const {
  for (const auto& e : entries) {
    if (e.name == name) return e;
  }
  throw std::out_of_range("no grid entry named " + std::string(name));
}

TransformationGrid build_grid() {
  TransformationGrid grid;
  const auto bases = base_settings();
  for (std::size_t b = 0; b < bases.size(); ++b) {
    for (Parameter p : kAllParameters) {
      const auto values = parameter_values(p);
      for (std::size_t v = 0; v < values.size(); ++v) {
        GridEntry e;
        e.name = std::string(1, bases[b].code) + std::string(parameter_code(p)) + std::to_string(v + 1);
        e.base = b;
        e.parameter = p;
        e.value_index = v;
        e.settings = bases[b].settings;
        knob(e.settings, p) = values[v];
        grid.entries.push_back(std::move(e));
      }
    }
  }
  return grid;
}

Split split_dataset(std::span<const std::string> labels, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test fraction must be in (0, 1)");
  }
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  detail::Rng rng(seed);
  Split out;
  for (auto& [label, members] : by_class) {
    const std::size_t n = members.size();
    if (n < 2) throw std::invalid_argument("class '" + label + "' has fewer than 2 clips to split");
    for (std::size_t i = n - 1; i > 0; --i) std::swap(members[i], members[rng.below(i + 1)]);
    const auto rounded = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    const std::size_t n_test = std::clamp<std::size_t>(rounded, 1, n - 1);
    out.test.insert(out.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.insert(out.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

Split split_dataset(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  std::vector<std::string> labels;
  labels.reserve(dataset.clips.size());
  for (const auto& c : dataset.clips) labels.push_back(c.label);
  return split_dataset(labels, test_fraction, seed);
}

SweepReport run_sweep(const Dataset& dataset, const TransformationGrid& grid, const SweepConfig& config) {
  if (config.iterations == 0) throw std::invalid_argument("iterations must be at least 1");
  if (dataset.clips.empty()) throw std::invalid_argument("dataset is empty");
  for (const auto& e : grid.entries) e.settings.validate();

  SweepReport report;
  report.seed = config.seed;
  report.test_fraction = config.test_fraction;
  report.iterations = config.iterations;
  report.clip_count = dataset.clips.size();

  const std::size_t n_clips = dataset.clips.size();
  std::vector<std::uint64_t> clip_hash(n_clips);
  for (std::size_t c = 0; c < n_clips; ++c) clip_hash[c] = hash_clip(dataset.clips[c].audio);
  std::vector<std::uint64_t> entry_hash(grid.entries.size());
  for (std::size_t e = 0; e < grid.entries.size(); ++e) entry_hash[e] = hash_settings(grid.entries[e].settings);

  // Features of compressed clips, keyed by (clip hash, settings hash); nullopt marks a failure.
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::optional<FeatureVector>> cache;

  auto extract = [&](const AudioBuffer& audio) -> std::optional<FeatureVector> {
    try {
      return extract_feature_vector(audio, config.features);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  };

  std::vector<std::optional<FeatureVector>> base(n_clips);
  parallel_for(n_clips, config.threads, [&](std::size_t c) { base[c] = extract(dataset.clips[c].audio); });

  std::vector<std::size_t> usable;
  std::vector<std::string> usable_labels;
  for (std::size_t c = 0; c < n_clips; ++c) {
    if (base[c]) {
      usable.push_back(c);
      usable_labels.push_back(dataset.clips[c].label);
    } else {
      ++report.skipped_clips;
    }
  }

  report.baseline.name = "baseline";
  report.entries.resize(grid.entries.size());
  for (std::size_t e = 0; e < grid.entries.size(); ++e) {
    report.entries[e].name = grid.entries[e].name;
    report.entries[e].settings = grid.entries[e].settings;
  }

  for (std::size_t it = 0; it < config.iterations; ++it) {
    const Split split = split_dataset(usable_labels, config.test_fraction, detail::mix_seed(config.seed, it));

    std::vector<Point> train_x;
    std::vector<std::string> train_y;
    for (std::size_t s : split.train) {
      train_x.push_back(to_point(*base[usable[s]]));
      train_y.push_back(usable_labels[s]);
    }
    const TrainedOvoModel model = train_ovo(train_x, train_y, config.svm);

    std::size_t correct = 0;
    for (std::size_t s : split.test) {
      if (predict_ovo(model, to_point(*base[usable[s]])) == usable_labels[s]) ++correct;
    }
    report.baseline.accuracies.push_back(static_cast<double>(correct) / static_cast<double>(split.test.size()));

    // Fill the cache for every (test clip, entry) not seen in an earlier iteration.
    std::vector<std::pair<std::size_t, std::size_t>> todo;  // (clip, entry)
    std::vector<std::pair<std::uint64_t, std::uint64_t>> todo_keys;
    std::set<std::pair<std::uint64_t, std::uint64_t>> queued;
    for (std::size_t e = 0; e < grid.entries.size(); ++e) {
      for (std::size_t s : split.test) {
        const std::size_t c = usable[s];
        const auto key = std::make_pair(clip_hash[c], entry_hash[e]);
        if (cache.count(key) || !queued.insert(key).second) continue;
        todo.emplace_back(c, e);
        todo_keys.push_back(key);
      }
    }
    std::vector<std::optional<FeatureVector>> computed(todo.size());
    parallel_for(todo.size(), config.threads, [&](std::size_t w) {
      const auto [c, e] = todo[w];
      computed[w] = extract(compress(dataset.clips[c].audio, grid.entries[e].settings));
    });
    for (std::size_t w = 0; w < todo.size(); ++w) {
      if (!computed[w]) ++report.skipped_clips;
      cache.emplace(todo_keys[w], std::move(computed[w]));
    }

    for (std::size_t e = 0; e < grid.entries.size(); ++e) {
      std::size_t hits = 0, considered = 0;
      for (std::size_t s : split.test) {
        const auto& features = cache.at({clip_hash[usable[s]], entry_hash[e]});
        if (!features) continue;
        ++considered;
        if (predict_ovo(model, to_point(*features)) == usable_labels[s]) ++hits;
      }
      report.entries[e].accuracies.push_back(
          considered ? static_cast<double>(hits) / static_cast<double>(considered) : 0.0);
    }
  }

  auto finish = [&](SweepRow& row) {
    double sum = 0.0;
    for (double a : row.accuracies) sum += a;
    row.mean_accuracy = sum / static_cast<double>(row.accuracies.size());
  };
  finish(report.baseline);
  for (auto& row : report.entries) {
    finish(row);
    row.delta_vs_baseline = row.mean_accuracy - report.baseline.mean_accuracy;
  }
  return report;
}

std::vector<const SweepRow*> rank_report(const SweepReport& report, std::size_t top_k) {
  std::vector<const SweepRow*> rows;
  for (const auto& r : report.entries) rows.push_back(&r);
  std::sort(rows.begin(), rows.end(), [](const SweepRow* a, const SweepRow* b) {
    if (a->mean_accuracy != b->mean_accuracy) return a->mean_accuracy > b->mean_accuracy;
    return a->name < b->name;
  });
  if (top_k < rows.size()) rows.resize(top_k);
  return rows;
}

std::string format_ranking(const SweepReport& report, std::size_t top_k) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-8s %9s %6s %10s %7s %8s %11s %9s %8s\n", "Name", "Threshold",
                "Ratio", "Knee Width", "Attack", "Release", "Makeup Gain", "Accuracy", "Delta");
  out += line;
  for (const SweepRow* row : rank_report(report, top_k)) {
    const auto& s = *row->settings;
    std::snprintf(line, sizeof(line), "%-8s %9g %6g %10g %7g %8g %11g %9.4f %+8.4f\n", row->name.c_str(),
                  s.threshold_db, s.ratio, s.knee_width_db, s.attack_s, s.release_s, s.makeup_db,
                  row->mean_accuracy, row->delta_vs_baseline);
    out += line;
  }
  std::snprintf(line, sizeof(line), "%-8s %9s %6s %10s %7s %8s %11s %9.4f %+8.4f\n", "baseline", "-", "-",
                "-", "-", "-", "-", report.baseline.mean_accuracy, 0.0);
  out += line;
  return out;
}

void write_report_csv(const SweepReport& report, std::ostream& out) {
  out << "name,threshold_db,ratio,knee_db,attack_s,release_s,makeup_db,mean_accuracy,delta_vs_baseline,"
         "iterations\n";
  auto row = [&](const SweepRow& r) {
    out << r.name << ',';
    if (r.settings) {
      const auto& s = *r.settings;
      out << num(s.threshold_db) << ',' << num(s.ratio) << ',' << num(s.knee_width_db) << ','
          << num(s.attack_s) << ',' << num(s.release_s) << ',' << num(s.makeup_db) << ',';
    } else {
      out << ",,,,,,";
    }
    out << num(r.mean_accuracy) << ',' << num(r.delta_vs_baseline) << ',' << r.accuracies.size() << '\n';
  };
  row(report.baseline);
  for (const auto& r : report.entries) row(r);
}

std::string report_json(const SweepReport& report) {
  using nlohmann::ordered_json;
  auto settings_json = [](const CompressorSettings& s) {
    return ordered_json{{"threshold_db", s.threshold_db}, {"ratio", s.ratio},
                        {"knee_db", s.knee_width_db},     {"attack_s", s.attack_s},
                        {"release_s", s.release_s},       {"makeup_db", s.makeup_db}};
  };
  auto row_json = [&](const SweepRow& r) {
    ordered_json j{{"name", r.name}};
    j["settings"] = r.settings ? settings_json(*r.settings) : ordered_json(nullptr);
    j["accuracies"] = r.accuracies;
    j["mean_accuracy"] = r.mean_accuracy;
    j["delta_vs_baseline"] = r.delta_vs_baseline;
    return j;
  };

  ordered_json grids = ordered_json::object();
  for (Parameter p : kAllParameters) {
    const auto v = parameter_values(p);
    grids[std::string(parameter_name(p))] = std::vector<double>(v.begin(), v.end());
  }
  ordered_json bases = ordered_json::object();
  for (const auto& b : base_settings()) bases[b.name] = settings_json(b.settings);

  ordered_json j;
  j["metadata"] = {{"seed", report.seed},
                   {"test_fraction", report.test_fraction},
                   {"iterations", report.iterations},
                   {"clips", report.clip_count},
                   {"skipped_clips", report.skipped_clips},
                   {"base_settings", bases},
                   {"parameter_grids", grids}};
  j["baseline"] = row_json(report.baseline);
  j["entries"] = ordered_json::array();
  for (const auto& r : report.entries) j["entries"].push_back(row_json(r));
  return j.dump(2);
}

}  // namespace drcgenre
