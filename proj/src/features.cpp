#include "drcgenre/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace drcgenre {

using cd = std::complex<double>;

namespace {

constexpr double kPi = std::numbers::pi;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 transform, forward sign convention exp(-i 2 pi k n / N).
void fft_pow2(std::vector<cd>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  std::vector<cd> twiddle(n / 2);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = sign * 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
    twiddle[k] = {std::cos(angle), std::sin(angle)};
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cd u = a[i + k];
        const cd v = a[i + k + len / 2] * twiddle[k * stride];
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
  if (inverse) {
    for (auto& v : a) v /= static_cast<double>(n);
  }
}

std::vector<cd> bluestein(std::span<const double> x) {
  const std::size_t n = x.size();
  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;

  std::vector<cd> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small.
    const auto k2 = static_cast<double>((k * k) % (2 * n));
    const double angle = -kPi * k2 / static_cast<double>(n);
    chirp[k] = {std::cos(angle), std::sin(angle)};
  }
  std::vector<cd> a(m), b(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
  b[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);

  fft_pow2(a, false);
  fft_pow2(b, false);
  for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
  fft_pow2(a, true);

  std::vector<cd> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * chirp[k];
  return out;
}

std::vector<double> make_window(std::size_t n, Window window) {
  std::vector<double> w(n, 1.0);
  if (window == Window::hann) {
    // Periodic Hann.
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
    }
  }
  return w;
}

std::vector<double> windowed_power(std::span<const double> frame, std::span<const double> window) {
  std::vector<double> tapered(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) tapered[i] = frame[i] * window[i];
  const std::vector<cd> spectrum = dft(tapered);
  std::vector<double> power(frame.size() / 2 + 1);
  for (std::size_t k = 0; k < power.size(); ++k) power[k] = std::norm(spectrum[k]);
  return power;
}

std::vector<double> log_mel_cepstrum(std::span<const double> power, const MelFilterbank& bank,
                                     std::size_t n_coeffs) {
  std::vector<double> energies = bank.apply(power);
  for (double& e : energies) e = std::log(std::max(e, kLogEnergyFloor));
  return dct_ii(energies, n_coeffs);
}

}  // namespace

void FrameSpec::validate() const {
  if (frame_len < 2) throw std::invalid_argument("frame length must be at least 2");
  if (hop_len == 0 || hop_len > frame_len) {
    throw std::invalid_argument("hop length must satisfy 0 < hop <= frame length");
  }
}

std::size_t FrameSpec::frame_count(std::size_t length) const {
  if (length < frame_len) return 0;
  return 1 + (length - frame_len) / hop_len;
}

double hz_to_mel(double hz) {
  if (hz < 0.0) throw std::invalid_argument("frequency must be non-negative");
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<cd> dft(std::span<const double> x) {
  if (x.empty()) return {};
  if (is_pow2(x.size())) {
    std::vector<cd> a(x.begin(), x.end());
    fft_pow2(a, false);
    return a;
  }
  return bluestein(x);
}

std::vector<double> power_spectrum(std::span<const double> frame, Window window) {
  if (frame.size() < 2) throw std::invalid_argument("frame length must be at least 2");
  const std::vector<double> w = make_window(frame.size(), window);
  return windowed_power(frame, w);
}

std::vector<double> dct_ii(std::span<const double> x, std::size_t n_out) {
  const std::size_t n = x.size();
  if (n == 0) throw std::invalid_argument("DCT of an empty sequence");
  std::vector<double> out(std::min(n_out, n));
  for (std::size_t k = 0; k < out.size(); ++k) {
    double acc = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      acc += x[m] * std::cos(kPi * static_cast<double>(k) * (static_cast<double>(m) + 0.5) /
                             static_cast<double>(n));
    }
    out[k] = acc * std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
  }
  return out;
}

MelFilterbank::MelFilterbank(std::size_t n_filters, std::size_t frame_len, int sample_rate)
    : n_filters_(n_filters), n_bins_(frame_len / 2 + 1), sample_rate_(sample_rate) {
  if (n_filters == 0) throw std::invalid_argument("filterbank needs at least one filter");
  if (frame_len < 2) throw std::invalid_argument("frame length must be at least 2");
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");

  const double nyquist = sample_rate / 2.0;
  const double mel_top = hz_to_mel(nyquist);
  std::vector<double> edges(n_filters + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_top * static_cast<double>(i) / static_cast<double>(n_filters + 1));
  }

  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(frame_len);
  weights_.assign(n_filters * n_bins_, 0.0);
  center_hz_.resize(n_filters);
  for (std::size_t f = 0; f < n_filters; ++f) {
    const double lo = edges[f], mid = edges[f + 1], hi = edges[f + 2];
    center_hz_[f] = mid;
    double* w = weights_.data() + f * n_bins_;
    bool any = false;
    for (std::size_t k = 0; k < n_bins_; ++k) {
      const double hz = static_cast<double>(k) * bin_hz;
      double v = 0.0;
      if (hz > lo && hz <= mid) v = (hz - lo) / (mid - lo);
      else if (hz > mid && hz < hi) v = (hi - hz) / (hi - mid);
      w[k] = v;
      any = any || v > 0.0;
    }
    // Filters narrower than a bin get the bin nearest their centre.
    if (!any) {
      const auto k = std::min(n_bins_ - 1, static_cast<std::size_t>(std::llround(mid / bin_hz)));
      w[k] = 1.0;
    }
  }
}

std::vector<double> MelFilterbank::apply(std::span<const double> power) const {
  if (power.size() != n_bins_) throw std::invalid_argument("spectrum size does not match filterbank");
  std::vector<double> out(n_filters_, 0.0);
  for (std::size_t f = 0; f < n_filters_; ++f) {
    const auto w = row(f);
    out[f] = std::inner_product(w.begin(), w.end(), power.begin(), 0.0);
  }
  return out;
}

std::vector<std::vector<double>> mfcc(const AudioBuffer& buffer, const FrameSpec& spec,
                                      const MelFilterbank& bank, std::size_t n_coeffs) {
  spec.validate();
  if (buffer.samples.size() < spec.frame_len) {
    throw std::invalid_argument("buffer shorter than one frame");
  }
  const std::vector<double> window = make_window(spec.frame_len, spec.window);
  const std::size_t frames = spec.frame_count(buffer.samples.size());
  std::vector<std::vector<double>> out;
  out.reserve(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const std::span<const double> frame(buffer.samples.data() + i * spec.hop_len, spec.frame_len);
    out.push_back(log_mel_cepstrum(windowed_power(frame, window), bank, n_coeffs));
  }
  return out;
}

double zero_crossing_rate(std::span<const double> samples) {
  if (samples.size() < 2) throw std::invalid_argument("zero-crossing rate needs at least 2 samples");
  std::size_t crossings = 0;
  for (std::size_t t = 1; t < samples.size(); ++t) {
    if (samples[t] * samples[t - 1] < 0.0) ++crossings;
  }
  return static_cast<double>(crossings) / static_cast<double>(samples.size() - 1);
}

std::vector<double> onset_strength(const AudioBuffer& buffer, const FrameSpec& spec) {
  spec.validate();
  const std::vector<double> window = make_window(spec.frame_len, spec.window);
  const std::size_t frames = spec.frame_count(buffer.samples.size());
  std::vector<double> flux(frames, 0.0);
  std::vector<double> previous;
  for (std::size_t i = 0; i < frames; ++i) {
    const std::span<const double> frame(buffer.samples.data() + i * spec.hop_len, spec.frame_len);
    std::vector<double> magnitude = windowed_power(frame, window);
    for (double& m : magnitude) m = std::sqrt(m);
    if (!previous.empty()) {
      double acc = 0.0;
      for (std::size_t k = 0; k < magnitude.size(); ++k) acc += std::max(0.0, magnitude[k] - previous[k]);
      flux[i] = acc;
    }
    previous = std::move(magnitude);
  }
  return flux;
}

TempoEstimate estimate_tempo(const AudioBuffer& buffer, const FrameSpec& spec, BpmBand band) {
  buffer.validate();
  if (!(band.min_bpm > 0.0) || !(band.max_bpm > band.min_bpm)) {
    throw std::invalid_argument("invalid BPM band");
  }
  if (buffer.duration_s() < 2.0) throw std::invalid_argument("tempo estimation needs at least 2 s");

  std::vector<double> env = onset_strength(buffer, spec);
  const double midpoint = 0.5 * (band.min_bpm + band.max_bpm);
  if (std::all_of(env.begin(), env.end(), [](double v) { return v == 0.0; })) {
    return {midpoint, true};
  }

  // A short Hann smoother keeps periods that fall between integer lags from splitting
  // their autocorrelation mass over two lags.
  constexpr std::size_t kSmooth = 7;
  std::vector<double> smoothed(env.size(), 0.0);
  for (std::size_t n = 0; n < env.size(); ++n) {
    for (std::size_t k = 0; k < kSmooth; ++k) {
      const std::size_t src = n + k;
      if (src < kSmooth / 2 || src - kSmooth / 2 >= env.size()) continue;
      const double w = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(k + 1) / (kSmooth + 1));
      smoothed[n] += w * env[src - kSmooth / 2];
    }
  }
  env = std::move(smoothed);

  const double mean = std::accumulate(env.begin(), env.end(), 0.0) / static_cast<double>(env.size());
  for (double& v : env) v -= mean;

  const double frame_rate = static_cast<double>(buffer.sample_rate) / static_cast<double>(spec.hop_len);
  const auto lag_min = static_cast<std::size_t>(std::ceil(60.0 * frame_rate / band.max_bpm));
  const auto lag_max = std::min(static_cast<std::size_t>(std::floor(60.0 * frame_rate / band.min_bpm)),
                                env.size() - 2);
  if (lag_min < 1 || lag_min > lag_max) {
    throw std::invalid_argument("signal too short for the requested tempo band");
  }

  auto autocorr = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t n = 0; n + lag < env.size(); ++n) acc += env[n] * env[n + lag];
    return acc;
  };

  std::size_t best = lag_min;
  double best_value = autocorr(lag_min);
  for (std::size_t lag = lag_min + 1; lag <= lag_max; ++lag) {
    const double v = autocorr(lag);
    if (v > best_value) {
      best_value = v;
      best = lag;
    }
  }

  // Parabolic refinement around the integer peak.
  const double left = autocorr(best - 1);
  const double right = autocorr(best + 1);
  const double curvature = left - 2.0 * best_value + right;
  double offset = 0.0;
  if (curvature < 0.0) offset = std::clamp(0.5 * (left - right) / curvature, -0.5, 0.5);

  const double bpm = 60.0 * frame_rate / (static_cast<double>(best) + offset);
  return {std::clamp(bpm, band.min_bpm, band.max_bpm), false};
}

Chroma chroma(std::span<const double> power, int sample_rate) {
  if (power.size() < 2) throw std::invalid_argument("spectrum needs at least 2 bins");
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  Chroma out{};
  const double frame_len = 2.0 * static_cast<double>(power.size() - 1);
  for (std::size_t k = 1; k < power.size(); ++k) {
    const double hz = static_cast<double>(k) * sample_rate / frame_len;
    if (hz < 27.5) continue;
    const long midi = std::lround(12.0 * std::log2(hz / 440.0)) + 69;
    out[static_cast<std::size_t>(((midi % 12) + 12) % 12)] += power[k];
  }
  return out;
}

const std::array<std::array<double, 12>, kTonalDims>& tonal_centroid_basis() {
  static const auto basis = [] {
    std::array<std::array<double, 12>, kTonalDims> psi{};
    const double step[3] = {7.0 * kPi / 6.0, 3.0 * kPi / 2.0, 2.0 * kPi / 3.0};
    const double radius[3] = {1.0, 1.0, 0.5};
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t l = 0; l < 12; ++l) {
        psi[2 * c][l] = radius[c] * std::sin(static_cast<double>(l) * step[c]);
        psi[2 * c + 1][l] = radius[c] * std::cos(static_cast<double>(l) * step[c]);
      }
    }
    return psi;
  }();
  return basis;
}

TonalCentroid tonal_centroid(const Chroma& chroma_vec) {
  double l1 = 0.0;
  for (double c : chroma_vec) {
    if (c < 0.0 || !std::isfinite(c)) throw std::invalid_argument("chroma must be finite and non-negative");
    l1 += c;
  }
  TonalCentroid out;
  if (l1 == 0.0) {
    out.silent = true;
    return out;
  }
  const auto& psi = tonal_centroid_basis();
  for (std::size_t d = 0; d < kTonalDims; ++d) {
    double acc = 0.0;
    for (std::size_t l = 0; l < 12; ++l) acc += psi[d][l] * chroma_vec[l];
    out.value[d] = acc / l1;
  }
  return out;
}

std::vector<double> hcdf(std::span<const TonalVector> centroids) {
  if (centroids.size() < 3) throw std::invalid_argument("harmonic change needs at least 3 frames");
  std::vector<double> out(centroids.size() - 2);
  for (std::size_t n = 1; n + 1 < centroids.size(); ++n) {
    double acc = 0.0;
    for (std::size_t d = 0; d < kTonalDims; ++d) {
      const double diff = centroids[n + 1][d] - centroids[n - 1][d];
      acc += diff * diff;
    }
    out[n - 1] = std::sqrt(acc);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::array<double, kFeatureDims> FeatureVector::flatten() const {
  std::array<double, kFeatureDims> out{};
  std::copy(mfcc.begin(), mfcc.end(), out.begin());
  out[kMfccCount] = tempo_bpm;
  out[kMfccCount + 1] = zcr;
  std::copy(tonal_centroid.begin(), tonal_centroid.end(), out.begin() + kMfccCount + 2);
  return out;
}

FeatureVector FeatureVector::unflatten(std::span<const double> values) {
  if (values.size() != kFeatureDims) {
    throw std::invalid_argument("feature vector needs " + std::to_string(kFeatureDims) + " values");
  }
  FeatureVector out;
  std::copy_n(values.begin(), kMfccCount, out.mfcc.begin());
  out.tempo_bpm = values[kMfccCount];
  out.zcr = values[kMfccCount + 1];
  std::copy_n(values.begin() + kMfccCount + 2, kTonalDims, out.tonal_centroid.begin());
  return out;
}

const std::array<std::string, kFeatureDims>& FeatureVector::column_names() {
  static const auto names = [] {
    std::array<std::string, kFeatureDims> n;
    for (std::size_t i = 0; i < kMfccCount; ++i) n[i] = "mfcc_" + std::to_string(i);
    n[kMfccCount] = "tempo_bpm";
    n[kMfccCount + 1] = "zcr";
    for (std::size_t i = 0; i < kTonalDims; ++i) n[kMfccCount + 2 + i] = "tc_" + std::to_string(i);
    return n;
  }();
  return names;
}

FeatureVector extract_feature_vector(const AudioBuffer& buffer, const FeatureConfig& config,
                                     FeatureDiagnostics* diagnostics) {
  buffer.validate();
  config.frame.validate();
  if (buffer.duration_s() < config.min_duration_s) {
    throw std::invalid_argument("clip shorter than the minimum feature duration");
  }
  if (buffer.samples.size() < config.frame.frame_len) {
    throw std::invalid_argument("buffer shorter than one frame");
  }

  const MelFilterbank bank(config.n_mel_filters, config.frame.frame_len, buffer.sample_rate);
  const std::vector<double> window = make_window(config.frame.frame_len, config.frame.window);
  const std::size_t frames = config.frame.frame_count(buffer.samples.size());

  FeatureVector out;
  std::vector<TonalVector> centroids(frames);
  std::size_t silent = 0;
  TonalVector centroid_sum{};
  for (std::size_t i = 0; i < frames; ++i) {
    const std::span<const double> frame(buffer.samples.data() + i * config.frame.hop_len,
                                        config.frame.frame_len);
    const std::vector<double> power = windowed_power(frame, window);
    const std::vector<double> cepstrum = log_mel_cepstrum(power, bank, kMfccCount);
    for (std::size_t c = 0; c < kMfccCount; ++c) out.mfcc[c] += cepstrum[c];

    const TonalCentroid tc = tonal_centroid(chroma(power, buffer.sample_rate));
    centroids[i] = tc.value;
    if (tc.silent) {
      ++silent;
      continue;
    }
    for (std::size_t d = 0; d < kTonalDims; ++d) centroid_sum[d] += tc.value[d];
  }
  for (double& c : out.mfcc) c /= static_cast<double>(frames);
  // Silent frames carry no pitch information and are left out of the centroid mean.
  if (silent < frames) {
    for (std::size_t d = 0; d < kTonalDims; ++d) {
      out.tonal_centroid[d] = centroid_sum[d] / static_cast<double>(frames - silent);
    }
  }

  out.zcr = zero_crossing_rate(buffer.samples);
  const TempoEstimate tempo = estimate_tempo(buffer, config.tempo_frame, config.band);
  out.tempo_bpm = tempo.bpm;

  if (diagnostics) {
    diagnostics->frames = frames;
    diagnostics->silent_frames = silent;
    diagnostics->tempo_fallback = tempo.fallback;
    diagnostics->hcdf = frames >= 3 ? hcdf(centroids) : std::vector<double>{};
  }
  return out;
}

std::string feature_csv(const FeatureVector& features) {
  std::string out;
  const auto& names = FeatureVector::column_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ',';
    out += names[i];
  }
  out += '\n';
  const auto values = features.flatten();
  char buf[32];
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
    out += buf;
  }
  out += '\n';
  return out;
}

void write_feature_csv(const FeatureVector& features, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << feature_csv(features);
}

FeatureVector read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);

  std::string expected;
  for (const auto& name : FeatureVector::column_names()) {
    if (!expected.empty()) expected += ',';
    expected += name;
  }
  if (!header.empty() && header.back() == '\r') header.pop_back();
  if (header != expected) throw std::runtime_error(path.string() + ": unexpected feature header");

  std::vector<double> values;
  std::stringstream ss(row);
  std::string cell;
  while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
  if (values.size() != kFeatureDims) throw std::runtime_error(path.string() + ": expected 21 values");
  return FeatureVector::unflatten(values);
}

}  // namespace drcgenre
