#include "drcgenre/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "random.hpp"

namespace drcgenre {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(std::string_view b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

std::uint32_t read_u32(std::string_view b, std::size_t at) {
  return static_cast<std::uint32_t>(read_u16(b, at)) |
         (static_cast<std::uint32_t>(read_u16(b, at + 2)) << 16);
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  put_u16(out, static_cast<std::uint16_t>(v & 0xFFFF));
  put_u16(out, static_cast<std::uint16_t>(v >> 16));
}

struct WavFormat {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

}  // namespace

void AudioBuffer::validate() const {
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  for (double s : samples) {
    if (!std::isfinite(s)) throw std::invalid_argument("audio buffer contains a non-finite sample");
  }
}

AudioBuffer decode_wav(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE") {
    throw WavMalformed("not a RIFF/WAVE stream");
  }

  WavFormat fmt;
  bool have_fmt = false;
  std::string_view data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string_view id = bytes.substr(pos, 4);
    const std::uint32_t size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    // Streaming writers leave oversized lengths; take what is present.
    const std::size_t available = std::min<std::size_t>(size, bytes.size() - body);

    if (id == "fmt ") {
      if (available < 16) throw WavMalformed("fmt chunk shorter than 16 bytes");
      fmt.format = read_u16(bytes, body);
      fmt.channels = read_u16(bytes, body + 2);
      fmt.sample_rate = read_u32(bytes, body + 4);
      fmt.bits = read_u16(bytes, body + 14);
      if (fmt.format == kFormatExtensible) {
        if (available < 40) throw WavMalformed("extensible fmt chunk too short");
        fmt.format = read_u16(bytes, body + 24);
      }
      have_fmt = true;
    } else if (id == "data") {
      data = bytes.substr(body, available);
      have_data = true;
    }
    pos = body + available + (available & 1U);
  }

  if (!have_fmt) throw WavMalformed("missing fmt chunk");
  if (!have_data) throw WavMalformed("missing data chunk");
  if (fmt.sample_rate == 0) throw WavMalformed("sample rate is zero");
  if (fmt.channels != 1 && fmt.channels != 2) {
    throw WavUnsupported("unsupported channel count " + std::to_string(fmt.channels));
  }
  const bool pcm16 = fmt.format == kFormatPcm && fmt.bits == 16;
  const bool float32 = fmt.format == kFormatFloat && fmt.bits == 32;
  if (!pcm16 && !float32) {
    throw WavUnsupported("unsupported encoding: format " + std::to_string(fmt.format) + ", " +
                         std::to_string(fmt.bits) + " bits");
  }

  const std::size_t width = fmt.bits / 8;
  const std::size_t frame_bytes = width * fmt.channels;
  const std::size_t frames = data.size() / frame_bytes;

  AudioBuffer out;
  out.sample_rate = static_cast<int>(fmt.sample_rate);
  out.samples.resize(frames);

  auto sample_at = [&](std::size_t offset) -> double {
    if (pcm16) {
      return static_cast<std::int16_t>(read_u16(data, offset)) / 32768.0;
    }
    const std::uint32_t raw = read_u32(data, offset);
    float f;
    static_assert(sizeof(f) == sizeof(raw));
    std::memcpy(&f, &raw, sizeof(f));
    return static_cast<double>(f);
  };

  for (std::size_t i = 0; i < frames; ++i) {
    const std::size_t base = i * frame_bytes;
    double v = sample_at(base);
    if (fmt.channels == 2) v = 0.5 * (v + sample_at(base + width));
    if (!std::isfinite(v)) throw WavMalformed("non-finite float sample at frame " + std::to_string(i));
    out.samples[i] = v;
  }
  return out;
}

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavNotFound("cannot open " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return decode_wav(bytes);
  } catch (const WavUnsupported& e) {
    throw WavUnsupported(path.string() + ": " + e.what());
  } catch (const WavMalformed& e) {
    throw WavMalformed(path.string() + ": " + e.what());
  }
}

std::string encode_wav(const AudioBuffer& buffer, std::size_t* clipped) {
  buffer.validate();
  const auto data_bytes = static_cast<std::uint32_t>(buffer.samples.size() * 2);

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(buffer.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(buffer.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);

  std::size_t clip_count = 0;
  for (double s : buffer.samples) {
    if (s > 1.0 || s < -1.0) ++clip_count;
    const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  if (clipped) *clipped = clip_count;
  return out;
}

std::size_t write_wav(const AudioBuffer& buffer, const std::filesystem::path& path) {
  std::size_t clipped = 0;
  const std::string bytes = encode_wav(buffer, &clipped);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WavWriteError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw WavWriteError("write failed: " + path.string());
  return clipped;
}

// ---------------------------------------------------------------------------

Recipe parse_recipe(std::string_view name) {
  if (name == "noise") return Recipe::noise;
  if (name == "chord-pad" || name == "chord_pad") return Recipe::chord_pad;
  if (name == "click-train" || name == "click_train") return Recipe::click_train;
  if (name == "chirp") return Recipe::chirp;
  throw std::invalid_argument("unknown recipe kind '" + std::string(name) + "'");
}

std::string_view to_string(Recipe recipe) {
  switch (recipe) {
    case Recipe::noise: return "noise";
    case Recipe::chord_pad: return "chord-pad";
    case Recipe::click_train: return "click-train";
    case Recipe::chirp: return "chirp";
  }
  return "unknown";
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double semitone_root(detail::Rng& rng, Range range) {
  const double k_lo = std::ceil(12.0 * std::log2(range.lo / 440.0) - 1e-9);
  const double k_hi = std::floor(12.0 * std::log2(range.hi / 440.0) + 1e-9);
  if (k_hi < k_lo) return range.lo;
  const auto steps = static_cast<std::uint64_t>(k_hi - k_lo) + 1;
  return 440.0 * std::exp2((k_lo + static_cast<double>(rng.below(steps))) / 12.0);
}

void render_noise(std::vector<double>& x, const GenreSpec& spec, detail::Rng& rng, double fs) {
  const double cutoff = rng.uniform(spec.fundamental_hz.lo, spec.fundamental_hz.hi);
  const double rate = rng.uniform(spec.bpm.lo, spec.bpm.hi) / 60.0;
  const double a = std::exp(-kTwoPi * cutoff / fs);
  double state = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    state = a * state + (1.0 - a) * rng.uniform(-1.0, 1.0);
    const double t = static_cast<double>(i) / fs;
    x[i] = state * (1.0 + 0.5 * std::sin(kTwoPi * rate * t));
  }
}

void render_chord_pad(std::vector<double>& x, const GenreSpec& spec, detail::Rng& rng, double fs) {
  const double root = semitone_root(rng, spec.fundamental_hz);
  const double period = 60.0 / rng.uniform(spec.bpm.lo, spec.bpm.hi);
  const double freqs[3] = {root, root * std::exp2(4.0 / 12.0), root * std::exp2(7.0 / 12.0)};
  double phases[3];
  for (double& p : phases) p = rng.uniform(0.0, kTwoPi);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(i) / fs;
    const double since_beat = std::fmod(t, period);
    const double env = 0.5 + 0.5 * std::exp(-since_beat / 0.2);
    double v = 0.0;
    for (int n = 0; n < 3; ++n) {
      v += std::sin(kTwoPi * freqs[n] * t + phases[n]) + 0.3 * std::sin(kTwoPi * 2.0 * freqs[n] * t);
    }
    x[i] = env * v;
  }
}

void render_click_train(std::vector<double>& x, const GenreSpec& spec, detail::Rng& rng,
                        double fs) {
  const double resonance = rng.uniform(spec.fundamental_hz.lo, spec.fundamental_hz.hi);
  const double period = 60.0 / rng.uniform(spec.bpm.lo, spec.bpm.hi);
  const auto click_len = static_cast<std::size_t>(0.03 * fs);
  for (std::size_t beat = 0;; ++beat) {
    const auto start = static_cast<std::size_t>(std::llround(static_cast<double>(beat) * period * fs));
    if (start >= x.size()) break;
    for (std::size_t k = 0; k < click_len && start + k < x.size(); ++k) {
      const double tau = static_cast<double>(k) / fs;
      x[start + k] += std::exp(-tau / 0.004) *
                      (std::sin(kTwoPi * resonance * tau) + 0.5 * rng.uniform(-1.0, 1.0));
    }
  }
}

void render_chirp(std::vector<double>& x, const GenreSpec& spec, detail::Rng& rng, double fs) {
  const double start = rng.uniform(spec.fundamental_hz.lo, spec.fundamental_hz.hi);
  const double period = 60.0 / rng.uniform(spec.bpm.lo, spec.bpm.hi);
  double phase = rng.uniform(0.0, kTwoPi);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double tau = std::fmod(static_cast<double>(i) / fs, period);
    const double f = start * std::exp2(2.0 * tau / period);
    phase = std::fmod(phase + kTwoPi * f / fs, kTwoPi);
    x[i] = std::sin(phase);
  }
}

}  // namespace

AudioBuffer synth_clip(const GenreSpec& spec, std::uint64_t seed, double duration_s,
                       int sample_rate) {
  if (!(duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");

  detail::Rng rng(detail::mix_seed(seed, static_cast<std::uint64_t>(spec.recipe)));
  const double fs = sample_rate;
  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.samples.assign(static_cast<std::size_t>(std::llround(duration_s * fs)), 0.0);

  switch (spec.recipe) {
    case Recipe::noise: render_noise(out.samples, spec, rng, fs); break;
    case Recipe::chord_pad: render_chord_pad(out.samples, spec, rng, fs); break;
    case Recipe::click_train: render_click_train(out.samples, spec, rng, fs); break;
    case Recipe::chirp: render_chirp(out.samples, spec, rng, fs); break;
    default: throw std::invalid_argument("unknown recipe kind");
  }

  double peak = 0.0;
  for (double& s : out.samples) {
    s += spec.noise_level * rng.uniform(-1.0, 1.0);
    peak = std::max(peak, std::abs(s));
  }
  if (peak > 0.0) {
    const double target = std::pow(10.0, rng.uniform(spec.peak_dbfs.lo, spec.peak_dbfs.hi) / 20.0);
    const double scale = target / peak;
    for (double& s : out.samples) s *= scale;
  }
  return out;
}

std::vector<GenreSpec> default_genres() {
  return {
      {"chirp", Recipe::chirp, {200.0, 400.0}, {70.0, 90.0}, 0.005},
      {"chord_pad", Recipe::chord_pad, {392.0, 523.3}, {50.0, 65.0}, 0.005},
      {"click_train", Recipe::click_train, {2000.0, 4000.0}, {100.0, 140.0}, 0.02},
      {"noise", Recipe::noise, {500.0, 4000.0}, {80.0, 160.0}, 0.0},
  };
}

// ---------------------------------------------------------------------------

std::vector<std::string> Dataset::labels() const {
  std::set<std::string> unique;
  for (const auto& c : clips) unique.insert(c.label);
  return {unique.begin(), unique.end()};
}

Dataset load_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw std::invalid_argument("dataset root is not a directory: " + root.string());

  std::vector<fs::path> genres;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) genres.push_back(entry.path());
  }
  std::sort(genres.begin(), genres.end());

  Dataset out;
  for (const auto& genre : genres) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(genre)) {
      if (entry.is_regular_file() && entry.path().extension() == ".wav") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      try {
        out.clips.push_back({genre.filename().string(), file.stem().string(), read_wav(file)});
      } catch (const WavError& e) {
        out.skipped.push_back(e.what());
      }
    }
  }
  return out;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& root) {
  for (const auto& clip : dataset.clips) {
    const auto dir = root / clip.label;
    std::filesystem::create_directories(dir);
    write_wav(clip.audio, dir / (clip.id + ".wav"));
  }
}

Dataset make_synthetic_dataset(const std::vector<GenreSpec>& genres, std::size_t clips_per_genre,
                               double duration_s, int sample_rate, std::uint64_t seed) {
  std::set<std::string> names;
  for (const auto& g : genres) {
    if (!names.insert(g.name).second) throw std::invalid_argument("duplicate genre name " + g.name);
  }
  Dataset out;
  for (std::size_t g = 0; g < genres.size(); ++g) {
    for (std::size_t i = 0; i < clips_per_genre; ++i) {
      char id[64];
      std::snprintf(id, sizeof(id), "%s.%05zu", genres[g].name.c_str(), i);
      out.clips.push_back({genres[g].name, id,
                           synth_clip(genres[g], detail::mix_seed(seed, g * 100003 + i), duration_s,
                                      sample_rate)});
    }
  }
  return out;
}

}  // namespace drcgenre
