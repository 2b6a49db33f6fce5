// drcgenre: command-line front end for the compressor, feature extractor, classifier and sweep.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "drcgenre/audio_io.hpp"
#include "drcgenre/compressor.hpp"
#include "drcgenre/experiment.hpp"
#include "drcgenre/features.hpp"
#include "drcgenre/svm.hpp"

namespace fs = std::filesystem;
using namespace drcgenre;

namespace {

struct LabeledFeatures {
  std::vector<Point> points;
  std::vector<std::string> labels;
  std::vector<std::string> ids;
};

// <dir>/<genre>/<clip>.csv, sorted by genre then file name.
LabeledFeatures load_feature_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> genres;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) genres.push_back(e.path());
  }
  std::sort(genres.begin(), genres.end());
  LabeledFeatures out;
  for (const auto& g : genres) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(g)) {
      if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const auto flat = read_feature_csv(f).flatten();
      out.points.emplace_back(flat.begin(), flat.end());
      out.labels.push_back(g.filename().string());
      out.ids.push_back(f.stem().string());
    }
  }
  if (out.points.empty()) throw std::runtime_error("no feature files under " + dir.string());
  return out;
}

int cmd_synth(const fs::path& out, std::size_t per_genre, double seconds, int rate, std::uint64_t seed) {
  const Dataset data = make_synthetic_dataset(default_genres(), per_genre, seconds, rate, seed);
  write_dataset(data, out);
  std::printf("wrote %zu clips to %s\n", data.clips.size(), out.string().c_str());
  return 0;
}

int cmd_compress(const fs::path& in, const fs::path& out, const CompressorSettings& s) {
  s.validate();
  const AudioBuffer result = compress(read_wav(in), s);
  const std::size_t clipped = write_wav(result, out);
  if (clipped > 0) std::fprintf(stderr, "warning: %zu samples clipped\n", clipped);
  return 0;
}

int cmd_features(const fs::path& in, const fs::path& out, const fs::path& data_root, const fs::path& out_dir) {
  if (!in.empty()) {
    const FeatureVector fv = extract_feature_vector(read_wav(in));
    if (out.empty()) std::cout << feature_csv(fv);
    else write_feature_csv(fv, out);
    return 0;
  }
  const Dataset data = load_dataset(data_root);
  for (const auto& s : data.skipped) std::fprintf(stderr, "skipped unreadable file %s\n", s.c_str());
  std::size_t written = 0, failed = 0;
  for (const auto& clip : data.clips) {
    try {
      const FeatureVector fv = extract_feature_vector(clip.audio);
      fs::create_directories(out_dir / clip.label);
      write_feature_csv(fv, out_dir / clip.label / (clip.id + ".csv"));
      ++written;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "skipped %s/%s: %s\n", clip.label.c_str(), clip.id.c_str(), e.what());
      ++failed;
    }
  }
  std::printf("wrote %zu feature files, %zu failed\n", written, failed);
  return 0;
}

int cmd_train(const fs::path& features, const fs::path& model_path, const std::string& gamma, double C) {
  const LabeledFeatures lf = load_feature_dir(features);
  SvmConfig config;
  config.solver.C = C;
  if (gamma != "auto") config.gamma = std::stod(gamma);
  const TrainedOvoModel model = train_ovo(lf.points, lf.labels, config);
  save_model(model, model_path);
  std::printf("trained %zu pairwise models over %zu classes, gamma %.6g\n", model.pairs.size(),
              model.class_labels.size(), model.gamma);
  return 0;
}

int cmd_evaluate(const fs::path& model_path, const fs::path& features) {
  const TrainedOvoModel model = load_model(model_path);
  const LabeledFeatures lf = load_feature_dir(features);
  std::size_t correct = 0;
  std::map<std::string, std::map<std::string, std::size_t>> confusion;
  for (std::size_t i = 0; i < lf.points.size(); ++i) {
    const std::string guess = predict_ovo(model, lf.points[i]);
    correct += guess == lf.labels[i];
    ++confusion[lf.labels[i]][guess];
  }
  std::printf("accuracy %.4f (%zu/%zu)\n", static_cast<double>(correct) / lf.points.size(), correct,
              lf.points.size());
  for (const auto& [truth, row] : confusion) {
    std::printf("  %s:", truth.c_str());
    for (const auto& [guess, n] : row) std::printf(" %s=%zu", guess.c_str(), n);
    std::printf("\n");
  }
  return 0;
}

struct SweepArgs {
  fs::path data;
  bool synthetic = false;
  std::size_t per_genre = 20;
  double seconds = 3.0;
  int rate = 16000;
  std::size_t iterations = 10;
  std::uint64_t seed = 42;
  double test_fraction = 0.2;
  fs::path out = "report.csv";
  fs::path json;
  std::size_t top = 5;
  std::size_t threads = 0;
  std::vector<std::string> only;
};

int cmd_sweep(const SweepArgs& a) {
  Dataset data;
  if (a.synthetic) {
    // Round-trip through WAV files so the sweep sees the same 16-bit audio a real dataset would.
    const fs::path tmp = fs::temp_directory_path() / ("drcgenre-synth-" + std::to_string(a.seed) + "-" +
                                                     std::to_string(std::random_device{}()));
    write_dataset(make_synthetic_dataset(default_genres(), a.per_genre, a.seconds, a.rate, a.seed), tmp);
    data = load_dataset(tmp);
    std::error_code ec;
    fs::remove_all(tmp, ec);
  } else {
    data = load_dataset(a.data);
    for (const auto& s : data.skipped) std::fprintf(stderr, "skipped unreadable file %s\n", s.c_str());
  }
  TransformationGrid grid = build_grid();
  if (!a.only.empty()) {
    std::vector<GridEntry> picked;
    for (const auto& name : a.only) picked.push_back(grid.find(name));
    grid.entries = std::move(picked);
  }
  SweepConfig config;
  config.iterations = a.iterations;
  config.seed = a.seed;
  config.test_fraction = a.test_fraction;
  config.threads = a.threads;
  const SweepReport report = run_sweep(data, grid, config);

  std::ofstream csv(a.out);
  if (!csv) throw std::runtime_error("cannot write " + a.out.string());
  write_report_csv(report, csv);
  if (!a.json.empty()) {
    std::ofstream js(a.json);
    if (!js) throw std::runtime_error("cannot write " + a.json.string());
    js << report_json(report) << '\n';
  }
  if (report.skipped_clips > 0) std::fprintf(stderr, "%zu clips skipped\n", report.skipped_clips);
  std::cout << format_ranking(report, a.top);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic range compression vs. genre classification toolkit"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Write a synthetic labelled dataset");
  fs::path synth_out;
  std::size_t synth_n = 20;
  double synth_seconds = 3.0;
  int synth_rate = 16000;
  std::uint64_t synth_seed = 42;
  synth->add_option("--out", synth_out, "Output root")->required();
  synth->add_option("--per-genre", synth_n, "Clips per genre");
  synth->add_option("--seconds", synth_seconds, "Clip duration");
  synth->add_option("--rate", synth_rate, "Sample rate");
  synth->add_option("--seed", synth_seed, "Seed");

  auto* comp = app.add_subcommand("compress", "Compress a WAV file");
  fs::path comp_in, comp_out;
  CompressorSettings s = base_settings()[1].settings;
  comp->add_option("--in", comp_in)->required()->check(CLI::ExistingFile);
  comp->add_option("--out", comp_out)->required();
  comp->add_option("--threshold", s.threshold_db, "dBFS")->capture_default_str();
  comp->add_option("--ratio", s.ratio)->capture_default_str();
  comp->add_option("--knee", s.knee_width_db, "dB")->capture_default_str();
  comp->add_option("--attack", s.attack_s, "seconds")->capture_default_str();
  comp->add_option("--release", s.release_s, "seconds")->capture_default_str();
  comp->add_option("--makeup", s.makeup_db, "dB")->capture_default_str();

  auto* feat = app.add_subcommand("features", "Extract the 21-value feature vector");
  fs::path feat_in, feat_out, feat_data, feat_dir;
  auto* in_opt = feat->add_option("--in", feat_in, "Single WAV file")->check(CLI::ExistingFile);
  feat->add_option("--out", feat_out, "CSV path (stdout if omitted)")->needs(in_opt);
  auto* data_opt = feat->add_option("--data", feat_data, "Dataset root <genre>/<clip>.wav")->excludes(in_opt);
  auto* dir_opt = feat->add_option("--out-dir", feat_dir, "Output root for batch mode");
  data_opt->needs(dir_opt);
  feat->callback([&] {
    if (feat_in.empty() && feat_data.empty()) throw CLI::ValidationError("features", "need --in or --data");
  });

  auto* train = app.add_subcommand("train", "Train a one-vs-one SVM from feature CSVs");
  fs::path train_feat, train_model;
  std::string gamma = "auto";
  double C = 1.0;
  train->add_option("--features", train_feat, "Root <genre>/<clip>.csv")->required();
  train->add_option("--model", train_model)->required();
  train->add_option("--gamma", gamma, "RBF width or 'auto'")->capture_default_str();
  train->add_option("--C", C)->capture_default_str();

  auto* eval = app.add_subcommand("evaluate", "Score a model on feature CSVs");
  fs::path eval_model, eval_feat;
  eval->add_option("--model", eval_model)->required()->check(CLI::ExistingFile);
  eval->add_option("--features", eval_feat)->required();

  auto* sweep = app.add_subcommand("sweep", "Run the compression-setting sweep");
  SweepArgs sa;
  auto* sd = sweep->add_option("--data", sa.data, "Dataset root <genre>/<clip>.wav");
  auto* syn = sweep->add_flag("--synthetic", sa.synthetic, "Generate the dataset in memory");
  sd->excludes(syn);
  sweep->add_option("--per-genre", sa.per_genre, "Synthetic clips per genre")->capture_default_str();
  sweep->add_option("--seconds", sa.seconds, "Synthetic clip duration")->capture_default_str();
  sweep->add_option("--rate", sa.rate, "Synthetic sample rate")->capture_default_str();
  sweep->add_option("--iterations", sa.iterations)->capture_default_str();
  sweep->add_option("--seed", sa.seed)->capture_default_str();
  sweep->add_option("--test-fraction", sa.test_fraction)->capture_default_str();
  sweep->add_option("--out", sa.out, "CSV report")->capture_default_str();
  sweep->add_option("--json", sa.json, "Optional JSON report");
  sweep->add_option("--top", sa.top, "Rows in the printed ranking")->capture_default_str();
  sweep->add_option("--threads", sa.threads, "0 = all cores")->capture_default_str();
  sweep->add_option("--only", sa.only, "Restrict to these grid entries");
  sweep->callback([&] {
    if (sa.data.empty() && !sa.synthetic) throw CLI::ValidationError("sweep", "need --data or --synthetic");
  });

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(synth_out, synth_n, synth_seconds, synth_rate, synth_seed);
    if (*comp) return cmd_compress(comp_in, comp_out, s);
    if (*feat) return cmd_features(feat_in, feat_out, feat_data, feat_dir);
    if (*train) return cmd_train(train_feat, train_model, gamma, C);
    if (*eval) return cmd_evaluate(eval_model, eval_feat);
    if (*sweep) return cmd_sweep(sa);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
