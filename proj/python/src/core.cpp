#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "drcgenre/audio_io.hpp"
#include "drcgenre/compressor.hpp"
#include "drcgenre/experiment.hpp"
#include "drcgenre/features.hpp"
#include "drcgenre/svm.hpp"

namespace py = pybind11;
using namespace drcgenre;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

Array to_array(const std::vector<double>& v) {
  Array out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

template <std::size_t N>
Array to_array(const std::array<double, N>& v) {
  return to_array(std::vector<double>(v.begin(), v.end()));
}

Array to_matrix(const std::vector<std::vector<double>>& rows, std::size_t cols) {
  Array out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(rows.size()), static_cast<py::ssize_t>(cols)});
  double* p = out.mutable_data();
  for (const auto& r : rows) p = std::copy(r.begin(), r.end(), p);
  return out;
}

std::vector<Point> to_points(const Array& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array (n_samples, n_features)");
  const auto n = static_cast<std::size_t>(a.shape(0)), d = static_cast<std::size_t>(a.shape(1));
  std::vector<Point> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i].assign(a.data() + i * d, a.data() + (i + 1) * d);
  return pts;
}

AudioBuffer buffer(const Array& samples, int sample_rate) {
  AudioBuffer b{to_vector(samples), sample_rate};
  b.validate();
  return b;
}

GenreSpec genre_by_name(const std::string& name) {
  for (auto g : default_genres()) {
    if (g.name == name || to_string(g.recipe) == name) return g;
  }
  return GenreSpec{name, parse_recipe(name)};
}

py::dict settings_dict(const CompressorSettings& s) {
  py::dict d;
  d["threshold_db"] = s.threshold_db;
  d["ratio"] = s.ratio;
  d["knee_width_db"] = s.knee_width_db;
  d["attack_s"] = s.attack_s;
  d["release_s"] = s.release_s;
  d["makeup_db"] = s.makeup_db;
  return d;
}

TransformationGrid select(const std::optional<std::vector<std::string>>& names) {
  TransformationGrid grid = build_grid();
  if (names) {
    std::vector<GridEntry> picked;
    for (const auto& n : *names) picked.push_back(grid.find(n));
    grid.entries = std::move(picked);
  }
  return grid;
}

std::string sweep(const Dataset& data, const std::optional<std::vector<std::string>>& entries,
                  std::size_t iterations, std::uint64_t seed, double test_fraction, std::size_t threads) {
  SweepConfig config;
  config.iterations = iterations;
  config.seed = seed;
  config.test_fraction = test_fraction;
  config.threads = threads;
  const TransformationGrid grid = select(entries);
  SweepReport report;
  {
    py::gil_scoped_release release;
    report = run_sweep(data, grid, config);
  }
  return report_json(report);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Compressor, audio features, one-vs-one SVM and the compression sweep";

  py::register_exception<WavError>(m, "WavError", PyExc_IOError);

  py::class_<CompressorSettings>(m, "CompressorSettings")
      .def(py::init([](double threshold_db, double ratio, double knee_width_db, double attack_s,
                       double release_s, double makeup_db) {
             CompressorSettings s{threshold_db, ratio, knee_width_db, attack_s, release_s, makeup_db};
             s.validate();
             return s;
           }),
           py::arg("threshold_db") = -10.0, py::arg("ratio") = 5.0, py::arg("knee_width_db") = 5.0,
           py::arg("attack_s") = 0.005, py::arg("release_s") = 0.05, py::arg("makeup_db") = 5.0)
      .def_readwrite("threshold_db", &CompressorSettings::threshold_db)
      .def_readwrite("ratio", &CompressorSettings::ratio)
      .def_readwrite("knee_width_db", &CompressorSettings::knee_width_db)
      .def_readwrite("attack_s", &CompressorSettings::attack_s)
      .def_readwrite("release_s", &CompressorSettings::release_s)
      .def_readwrite("makeup_db", &CompressorSettings::makeup_db)
      .def("validate", &CompressorSettings::validate)
      .def("as_dict", &settings_dict)
      .def(py::self == py::self)
      .def("__repr__", [](const CompressorSettings& s) {
        std::ostringstream os;
        os << "CompressorSettings(threshold_db=" << s.threshold_db << ", ratio=" << s.ratio
           << ", knee_width_db=" << s.knee_width_db << ", attack_s=" << s.attack_s
           << ", release_s=" << s.release_s << ", makeup_db=" << s.makeup_db << ")";
        return os.str();
      });

  // Audio I/O and synthesis
  m.def("read_wav", [](const std::filesystem::path& p) {
    const AudioBuffer b = read_wav(p);
    return py::make_tuple(to_array(b.samples), b.sample_rate);
  }, py::arg("path"), "Read a PCM16/float32 WAV, downmixed to mono float64 in [-1, 1].");
  m.def("write_wav", [](const std::filesystem::path& p, const Array& samples, int sample_rate) {
    return write_wav(buffer(samples, sample_rate), p);
  }, py::arg("path"), py::arg("samples"), py::arg("sample_rate"), "Write 16-bit PCM; returns the clipped sample count.");
  m.def("genre_names", [] {
    std::vector<std::string> names;
    for (const auto& g : default_genres()) names.push_back(g.name);
    return names;
  });
  m.def("synth_clip", [](const std::string& genre, std::uint64_t seed, double duration_s, int sample_rate) {
    return to_array(synth_clip(genre_by_name(genre), seed, duration_s, sample_rate).samples);
  }, py::arg("genre"), py::arg("seed"), py::arg("duration_s") = 3.0, py::arg("sample_rate") = 16000);

  // Compressor
  m.def("db_from_linear", py::vectorize(&db_from_linear));
  m.def("linear_from_db", py::vectorize(&linear_from_db));
  m.def("static_gain_hard_knee", py::vectorize(&static_gain_hard_knee),
        py::arg("x_db"), py::arg("threshold_db"), py::arg("ratio"));
  m.def("static_gain_soft_knee", py::vectorize(&static_gain_soft_knee),
        py::arg("x_db"), py::arg("threshold_db"), py::arg("ratio"), py::arg("knee_width_db"));
  m.def("smooth_gain", [](const Array& raw, double attack_s, double release_s, int sample_rate) {
    return to_array(smooth_gain(to_vector(raw), attack_s, release_s, sample_rate));
  }, py::arg("gain_db"), py::arg("attack_s"), py::arg("release_s"), py::arg("sample_rate"));
  m.def("compress", [](const Array& samples, int sample_rate, const CompressorSettings& s) {
    return to_array(compress(buffer(samples, sample_rate), s).samples);
  }, py::arg("samples"), py::arg("sample_rate"), py::arg("settings"));

  // Features
  m.def("hz_to_mel", py::vectorize(&hz_to_mel));
  m.def("mel_to_hz", py::vectorize(&mel_to_hz));
  m.def("mfcc", [](const Array& samples, int sample_rate) {
    const FeatureConfig c;
    const MelFilterbank bank(c.n_mel_filters, c.frame.frame_len, sample_rate);
    return to_matrix(mfcc(buffer(samples, sample_rate), c.frame, bank, kMfccCount), kMfccCount);
  }, py::arg("samples"), py::arg("sample_rate"), "Per-frame cepstral coefficients, shape (frames, 13).");
  m.def("zero_crossing_rate", [](const Array& samples) { return zero_crossing_rate(to_vector(samples)); });
  m.def("estimate_tempo", [](const Array& samples, int sample_rate) {
    const FeatureConfig c;
    const TempoEstimate t = estimate_tempo(buffer(samples, sample_rate), c.tempo_frame, c.band);
    return py::make_tuple(t.bpm, t.fallback);
  }, py::arg("samples"), py::arg("sample_rate"), "Returns (bpm, used_fallback).");
  m.def("chroma", [](const Array& power, int sample_rate) {
    return to_array(chroma(to_vector(power), sample_rate));
  }, py::arg("power"), py::arg("sample_rate"));
  m.def("tonal_centroid", [](const Array& chroma_vec) {
    const auto v = to_vector(chroma_vec);
    if (v.size() != 12) throw std::invalid_argument("chroma must have 12 entries");
    Chroma c;
    std::copy(v.begin(), v.end(), c.begin());
    const TonalCentroid tc = tonal_centroid(c);
    return py::make_tuple(to_array(tc.value), tc.silent);
  });
  m.def("feature_names", [] {
    const auto& n = FeatureVector::column_names();
    return std::vector<std::string>(n.begin(), n.end());
  });
  m.def("extract_features", [](const Array& samples, int sample_rate) {
    const AudioBuffer b = buffer(samples, sample_rate);
    std::array<double, kFeatureDims> flat;
    {
      py::gil_scoped_release release;
      flat = extract_feature_vector(b).flatten();
    }
    return to_array(flat);
  }, py::arg("samples"), py::arg("sample_rate"), "The 21-value clip feature vector.");

  // SVM
  m.def("solve_dual", [](const Array& gram, const std::vector<int>& targets, double C, double tolerance) {
    if (gram.ndim() != 2 || gram.shape(0) != gram.shape(1)) throw std::invalid_argument("gram must be square");
    const auto n = static_cast<std::size_t>(gram.shape(0));
    SolverOptions opts;
    opts.C = C;
    opts.tolerance = tolerance;
    const DualSolution sol = solve_dual(KernelMatrix(n, std::vector<double>(gram.data(), gram.data() + n * n)),
                                        targets, opts);
    py::dict d;
    d["alpha"] = to_array(sol.alpha);
    d["bias"] = sol.bias;
    d["converged"] = sol.converged;
    d["iterations"] = sol.iterations;
    return d;
  }, py::arg("gram"), py::arg("targets"), py::arg("C") = 1.0, py::arg("tolerance") = 1e-3);

  py::class_<TrainedOvoModel>(m, "OvoModel")
      .def_static("train", [](const Array& X, const std::vector<std::string>& labels,
                              std::optional<double> gamma, double C) {
        SvmConfig config;
        config.gamma = gamma;
        config.solver.C = C;
        return train_ovo(to_points(X), labels, config);
      }, py::arg("X"), py::arg("labels"), py::arg("gamma") = py::none(), py::arg("C") = 1.0)
      .def_static("load", &load_model, py::arg("path"))
      .def_static("from_text", &deserialize_model)
      .def("save", [](const TrainedOvoModel& m, const std::filesystem::path& p) { save_model(m, p); })
      .def("to_text", &serialize_model)
      .def_readonly("classes", &TrainedOvoModel::class_labels)
      .def_readonly("gamma", &TrainedOvoModel::gamma)
      .def_readonly("C", &TrainedOvoModel::C)
      .def_property_readonly("pair_count", [](const TrainedOvoModel& m) { return m.pairs.size(); })
      .def_property_readonly("dimension", &TrainedOvoModel::dimension)
      .def("predict", [](const TrainedOvoModel& m, const Array& X) {
        std::vector<std::string> out;
        for (const auto& p : to_points(X)) out.push_back(predict_ovo(m, p));
        return out;
      })
      .def("votes", [](const TrainedOvoModel& m, const Array& x) {
        const OvoDecision d = decide_ovo(m, to_vector(x));
        return py::make_tuple(m.class_labels[d.winner], d.votes, d.score_sums);
      });

  // Experiment
  m.def("base_settings", [] {
    py::dict d;
    for (const auto& b : base_settings()) d[py::str(b.name)] = b.settings;
    return d;
  });
  m.def("grid", [] {
    py::list out;
    for (const auto& e : build_grid().entries) out.append(py::make_tuple(e.name, e.settings));
    return out;
  }, "The 90 (name, settings) one-knob variations of the three presets.");
  m.def("split", [](const std::vector<std::string>& labels, double test_fraction, std::uint64_t seed) {
    const Split s = split_dataset(labels, test_fraction, seed);
    return py::make_tuple(s.train, s.test);
  }, py::arg("labels"), py::arg("test_fraction") = 0.2, py::arg("seed") = 42);
  m.def("sweep_synthetic_json", [](std::size_t per_genre, double duration_s, int sample_rate,
                                   std::optional<std::vector<std::string>> entries, std::size_t iterations,
                                   std::uint64_t seed, double test_fraction, std::size_t threads) {
    const Dataset data = make_synthetic_dataset(default_genres(), per_genre, duration_s, sample_rate, seed);
    return sweep(data, entries, iterations, seed, test_fraction, threads);
  }, py::arg("per_genre") = 20, py::arg("duration_s") = 3.0, py::arg("sample_rate") = 16000,
     py::arg("entries") = py::none(), py::arg("iterations") = 10, py::arg("seed") = 42,
     py::arg("test_fraction") = 0.2, py::arg("threads") = 0);
  m.def("sweep_dataset_json", [](const std::filesystem::path& root, std::optional<std::vector<std::string>> entries,
                                 std::size_t iterations, std::uint64_t seed, double test_fraction,
                                 std::size_t threads) {
    return sweep(load_dataset(root), entries, iterations, seed, test_fraction, threads);
  }, py::arg("root"), py::arg("entries") = py::none(), py::arg("iterations") = 10, py::arg("seed") = 42,
     py::arg("test_fraction") = 0.2, py::arg("threads") = 0);
}
