#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "drcgenre/audio_io.hpp"
#include "drcgenre/features.hpp"
#include "oracles.hpp"

using namespace drcgenre;

namespace {

AudioBuffer noise_clip(double seconds, int rate, std::uint64_t seed, double amplitude = 0.3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  AudioBuffer b;
  b.sample_rate = rate;
  b.samples.resize(static_cast<std::size_t>(seconds * rate));
  for (double& s : b.samples) s = u(rng);
  return b;
}

AudioBuffer click_clip(double bpm, double seconds = 6.0) {
  GenreSpec spec{"clicks", Recipe::click_train, {3000.0, 3000.0}, {bpm, bpm}, 0.02};
  return synth_clip(spec, 1, seconds, 16000);
}

}  // namespace

TEST_CASE("mel scale") {
  CHECK(hz_to_mel(0.0) == 0.0);
  CHECK(hz_to_mel(700.0) == doctest::Approx(781.1728387480312).epsilon(1e-14));
  CHECK(mel_to_hz(hz_to_mel(1234.5)) == doctest::Approx(1234.5).epsilon(1e-12));
  CHECK_THROWS_AS(hz_to_mel(-1.0), std::invalid_argument);
  double prev = -1.0;
  for (double f = 0.0; f < 24000.0; f += 37.0) {
    const double m = hz_to_mel(f);
    CHECK(m > prev);
    prev = m;
    CHECK(std::abs(mel_to_hz(m) - f) <= 1e-9 * std::max(1.0, f));
  }
}

TEST_CASE("property: dft matches the direct sum for every length up to 64") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t n = 1; n <= 64; ++n) {
    std::vector<double> x(n);
    for (double& v : x) v = u(rng);
    const auto fast = dft(x);
    const auto slow = oracle::direct_dft(x);
    for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(fast[k] - slow[k]) < 1e-9);
  }
}

TEST_CASE("power spectrum") {
  CHECK(power_spectrum(std::vector<double>(16, 0.0)) == std::vector<double>(9, 0.0));

  // Bin-centred sine, rectangular window: all energy in bin 3.
  std::vector<double> frame(32);
  for (std::size_t n = 0; n < frame.size(); ++n) frame[n] = std::cos(2.0 * std::numbers::pi * 3.0 * n / 32.0);
  const auto p = power_spectrum(frame, Window::rectangular);
  REQUIRE(p.size() == 17);
  CHECK(p[3] == doctest::Approx(256.0).epsilon(1e-12));
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (k != 3) CHECK(p[k] < 1e-18);
  }

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> eight(8);
  for (double& v : eight) v = u(rng);
  const auto fast = power_spectrum(eight, Window::rectangular);
  const auto slow = oracle::direct_dft(eight);
  for (std::size_t k = 0; k <= 4; ++k) CHECK(std::abs(fast[k] - std::norm(slow[k])) < 1e-9);
  CHECK_THROWS_AS(power_spectrum(std::vector<double>(1, 0.0)), std::invalid_argument);
}

TEST_CASE("property: dct_ii matches the direct cosine sum") {
  const auto unit = dct_ii(std::vector<double>{1.0, 0.0, 0.0, 0.0}, 4);
  const auto unit_ref = oracle::direct_dct({1.0, 0.0, 0.0, 0.0});
  for (int k = 0; k < 4; ++k) CHECK(std::abs(unit[k] - unit_ref[k]) < 1e-12);

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (std::size_t n = 1; n <= 64; ++n) {
    std::vector<double> x(n);
    for (double& v : x) v = u(rng);
    const auto fast = dct_ii(x, n);
    const auto slow = oracle::direct_dct(x);
    for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(fast[k] - slow[k]) < 1e-9);
  }
}

TEST_CASE("mel filterbank shape") {
  const MelFilterbank bank(26, 2048, 16000);
  CHECK(bank.n_bins() == 1025);
  double prev_mel = 0.0, spacing = -1.0;
  for (std::size_t f = 0; f < bank.n_filters(); ++f) {
    double sum = 0.0;
    for (double w : bank.row(f)) {
      CHECK(w >= 0.0);
      CHECK(w <= 1.0);
      sum += w;
    }
    CHECK(sum > 0.0);
    const double m = hz_to_mel(bank.center_hz()[f]);
    if (f > 0) {
      if (spacing < 0.0) spacing = m - prev_mel;
      CHECK(m - prev_mel == doctest::Approx(spacing).epsilon(1e-9));
    }
    prev_mel = m;
  }
  // Filters narrower than a bin still get a weight.
  const MelFilterbank tiny(26, 16, 16000);
  for (std::size_t f = 0; f < tiny.n_filters(); ++f) {
    double sum = 0.0;
    for (double w : tiny.row(f)) sum += w;
    CHECK(sum > 0.0);
  }
}

TEST_CASE("mfcc: silence gives the DCT of the log floor in every frame") {
  const AudioBuffer silence{std::vector<double>(8192, 0.0), 16000};
  const FrameSpec spec;
  const MelFilterbank bank(26, spec.frame_len, 16000);
  const auto frames = mfcc(silence, spec, bank);
  REQUIRE(frames.size() == 13);
  for (const auto& c : frames) {
    CHECK(c == frames.front());
    CHECK(c[0] == doctest::Approx(std::log(kLogEnergyFloor) * std::sqrt(26.0)).epsilon(1e-12));
    for (std::size_t k = 1; k < c.size(); ++k) CHECK(std::abs(c[k]) < 1e-12);
  }
  CHECK_THROWS_AS(mfcc(AudioBuffer{std::vector<double>(100, 0.0), 16000}, spec, bank), std::invalid_argument);
}

TEST_CASE("property: global gain shifts only the zeroth MFCC") {
  const AudioBuffer clip = noise_clip(1.0, 16000, 4);
  AudioBuffer louder = clip;
  for (double& s : louder.samples) s *= 2.0;
  const FrameSpec spec;
  const MelFilterbank bank(26, spec.frame_len, 16000);
  const auto a = mfcc(clip, spec, bank);
  const auto b = mfcc(louder, spec, bank);
  const double shift = std::log(4.0) * std::sqrt(26.0);  // power scales by 4, orthonormal c0
  for (std::size_t f = 0; f < a.size(); ++f) {
    CHECK(b[f][0] - a[f][0] == doctest::Approx(shift).epsilon(1e-9));
    for (std::size_t k = 1; k < 13; ++k) CHECK(std::abs(b[f][k] - a[f][k]) < 1e-9);
  }
}

TEST_CASE("zero-crossing rate") {
  CHECK(zero_crossing_rate(std::vector<double>{1, 1, 1, 1}) == 0.0);
  CHECK(zero_crossing_rate(std::vector<double>{1, -1, 1, -1}) == 1.0);
  CHECK(zero_crossing_rate(std::vector<double>{0.5, -0.2, 0.3, 0.4}) == 2.0 / 3.0);
  CHECK(zero_crossing_rate(std::vector<double>{0.0, -1.0, 0.0, 1.0}) == 0.0);  // touching zero is no crossing
  CHECK_THROWS_AS(zero_crossing_rate(std::vector<double>{1.0}), std::invalid_argument);

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(100 + trial);
    for (double& v : x) v = u(rng);
    const double z = zero_crossing_rate(x);
    CHECK(z >= 0.0);
    CHECK(z <= 1.0);
    for (double& v : x) v = -v;
    CHECK(zero_crossing_rate(x) == z);
  }
}

TEST_CASE("tempo: click trains") {
  const FeatureConfig config;
  for (double bpm : {60.0, 90.0, 120.0, 150.0}) {
    const TempoEstimate t = estimate_tempo(click_clip(bpm), config.tempo_frame, config.band);
    CHECK_FALSE(t.fallback);
    CHECK(t.bpm == doctest::Approx(bpm).epsilon(2.0 / bpm));
  }
  const TempoEstimate short_clip = estimate_tempo(click_clip(120.0, 3.0), config.tempo_frame, config.band);
  CHECK(short_clip.bpm == doctest::Approx(120.0).epsilon(2.0 / 120.0));
}

TEST_CASE("tempo: silence falls back to the band midpoint") {
  const AudioBuffer silence{std::vector<double>(48000, 0.0), 16000};
  const TempoEstimate t = estimate_tempo(silence, FeatureConfig{}.tempo_frame, {40.0, 200.0});
  CHECK(t.fallback);
  CHECK(t.bpm == 120.0);
  CHECK_THROWS_AS(estimate_tempo(AudioBuffer{std::vector<double>(16000, 0.0), 16000}, FrameSpec{}, {}),
                  std::invalid_argument);
}

TEST_CASE("chroma") {
  // fs = 8800, N = 40: bins every 220 Hz.
  std::vector<double> power(21, 0.0);
  power[2] = 1.0;  // 440 Hz
  Chroma c = chroma(power, 8800);
  for (int p = 0; p < 12; ++p) CHECK(c[p] == (p == 9 ? 1.0 : 0.0));

  power.assign(21, 0.0);
  power[4] = 2.5;  // 880 Hz
  c = chroma(power, 8800);
  CHECK(c[9] == 2.5);

  power.assign(21, 0.0);
  power[2] = 3.0;  // A
  power[3] = 1.5;  // 660 Hz -> E
  c = chroma(power, 8800);
  CHECK(c[9] == 3.0);
  CHECK(c[4] == 1.5);
  double rest = 0.0;
  for (int p = 0; p < 12; ++p) rest += (p == 9 || p == 4) ? 0.0 : c[p];
  CHECK(rest == 0.0);

  // Below 27.5 Hz is ignored.
  power.assign(1025, 0.0);
  power[1] = 10.0;  // 7.8 Hz at 16 kHz / 2048
  c = chroma(power, 16000);
  for (double v : c) CHECK(v == 0.0);
}

TEST_CASE("tonal centroid") {
  Chroma one_hot{};
  one_hot[0] = 1.0;
  const TonalCentroid z = tonal_centroid(one_hot);
  const TonalVector expected{0.0, 1.0, 0.0, 1.0, 0.0, 0.5};
  for (int d = 0; d < 6; ++d) CHECK(std::abs(z.value[d] - expected[d]) < 1e-12);

  Chroma uniform;
  uniform.fill(1.0);
  for (double v : tonal_centroid(uniform).value) CHECK(std::abs(v) < 1e-12);

  const TonalCentroid silent = tonal_centroid(Chroma{});
  CHECK(silent.silent);
  for (double v : silent.value) CHECK(v == 0.0);

  // Direct matrix product oracle, scale invariance and the norm bound.
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Chroma c;
    for (double& v : c) v = u(rng);
    const TonalCentroid a = tonal_centroid(c);
    double l1 = 0.0;
    for (double v : c) l1 += v;
    double norm2 = 0.0;
    for (int d = 0; d < 6; ++d) {
      const double step = d < 2 ? 7.0 * std::numbers::pi / 6.0 : d < 4 ? 1.5 * std::numbers::pi : 2.0 * std::numbers::pi / 3.0;
      const double radius = d < 4 ? 1.0 : 0.5;
      double acc = 0.0;
      for (int l = 0; l < 12; ++l) acc += radius * (d % 2 == 0 ? std::sin(l * step) : std::cos(l * step)) * c[l];
      CHECK(a.value[d] == doctest::Approx(acc / l1).epsilon(1e-12));
      norm2 += a.value[d] * a.value[d];
    }
    CHECK(std::sqrt(norm2) <= 1.5 + 1e-12);
    Chroma scaled = c;
    for (double& v : scaled) v *= 7.25;
    const TonalCentroid b = tonal_centroid(scaled);
    for (int d = 0; d < 6; ++d) CHECK(b.value[d] == doctest::Approx(a.value[d]).epsilon(1e-12));
  }
}

TEST_CASE("harmonic change detection") {
  const TonalVector a{0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, b{-0.3, 0.0, 0.2, 0.1, -0.1, 0.4};
  const std::vector<TonalVector> constant(5, a);
  for (double h : hcdf(constant)) CHECK(h == 0.0);

  const std::vector<TonalVector> alternating{a, b, a, b, a, b};
  const auto alt = hcdf(alternating);
  CHECK(alt.size() == 4);
  for (double h : alt) CHECK(h == 0.0);

  std::vector<TonalVector> ramp(6, TonalVector{});
  for (int n = 0; n < 6; ++n) ramp[n][2] = 0.25 * n;
  for (double h : hcdf(ramp)) CHECK(h == doctest::Approx(0.5).epsilon(1e-12));

  CHECK_THROWS_AS(hcdf(std::vector<TonalVector>(2)), std::invalid_argument);
}

TEST_CASE("feature vector: shape, determinism, csv") {
  const AudioBuffer clip = synth_clip(default_genres()[0], 3, 3.0, 16000);
  FeatureDiagnostics diag;
  const FeatureVector f = extract_feature_vector(clip, {}, &diag);
  const auto flat = f.flatten();
  CHECK(flat.size() == 21);
  for (double v : flat) CHECK(std::isfinite(v));
  CHECK(f.zcr >= 0.0);
  CHECK(f.zcr <= 1.0);
  CHECK(f.tempo_bpm >= 40.0);
  CHECK(f.tempo_bpm <= 200.0);
  CHECK(diag.frames == 90);
  CHECK(diag.hcdf.size() == 88);
  CHECK(extract_feature_vector(clip).flatten() == flat);

  const auto path = std::filesystem::temp_directory_path() / "drcgenre_features.csv";
  write_feature_csv(f, path);
  CHECK(read_feature_csv(path).flatten() == flat);
  CHECK(feature_csv(f).rfind("mfcc_0,mfcc_1,", 0) == 0);

  CHECK_THROWS_AS(extract_feature_vector(synth_clip(default_genres()[0], 3, 1.0, 16000)), std::invalid_argument);
}

TEST_CASE("feature vector: chord pad and click train separate on ZCR and tempo") {
  const auto genres = default_genres();
  const GenreSpec* pad = nullptr;
  const GenreSpec* clicks = nullptr;
  for (const auto& g : genres) {
    if (g.recipe == Recipe::chord_pad) pad = &g;
    if (g.recipe == Recipe::click_train) clicks = &g;
  }
  auto stats = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return std::pair{mean, std::sqrt(var / static_cast<double>(v.size()))};
  };
  std::vector<double> pad_zcr, pad_tempo, click_zcr, click_tempo;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FeatureVector p = extract_feature_vector(synth_clip(*pad, seed, 3.0, 16000));
    const FeatureVector c = extract_feature_vector(synth_clip(*clicks, seed, 3.0, 16000));
    pad_zcr.push_back(p.zcr);
    pad_tempo.push_back(p.tempo_bpm);
    click_zcr.push_back(c.zcr);
    click_tempo.push_back(c.tempo_bpm);
  }
  for (const auto& [a, b] : {std::pair{pad_zcr, click_zcr}, std::pair{pad_tempo, click_tempo}}) {
    const auto [ma, sa] = stats(a);
    const auto [mb, sb] = stats(b);
    CHECK(std::abs(ma - mb) > 3.0 * std::max(sa, sb));
  }
}
