#include "drcgenre/svm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace drcgenre {

namespace {

void check_dimension(std::span<const double> x, std::size_t expected) {
  if (x.size() != expected) {
    throw std::invalid_argument("dimension mismatch: expected " + std::to_string(expected) + ", got " +
                                std::to_string(x.size()));
  }
}

}  // namespace

Point StandardizationStats::apply(std::span<const double> x) const {
  check_dimension(x, mean.size());
  Point out(x.size());
  for (std::size_t d = 0; d < x.size(); ++d) out[d] = (x[d] - mean[d]) / std[d];
  return out;
}

std::pair<std::vector<Point>, StandardizationStats> standardize(const std::vector<Point>& vectors) {
  if (vectors.size() < 2) throw std::invalid_argument("standardize needs at least 2 vectors");
  const std::size_t dims = vectors.front().size();
  StandardizationStats stats;
  stats.mean.assign(dims, 0.0);
  stats.std.assign(dims, 0.0);
  for (const auto& v : vectors) {
    check_dimension(v, dims);
    for (std::size_t d = 0; d < dims; ++d) stats.mean[d] += v[d];
  }
  const auto n = static_cast<double>(vectors.size());
  for (double& m : stats.mean) m /= n;
  for (const auto& v : vectors) {
    for (std::size_t d = 0; d < dims; ++d) {
      const double diff = v[d] - stats.mean[d];
      stats.std[d] += diff * diff;
    }
  }
  for (double& s : stats.std) {
    s = std::sqrt(s / n);
    if (s < kMinStd) s = 1.0;
  }

  std::vector<Point> out;
  out.reserve(vectors.size());
  for (const auto& v : vectors) out.push_back(stats.apply(v));
  return {std::move(out), std::move(stats)};
}

double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma) {
  check_dimension(y, x.size());
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  double dist2 = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double diff = x[d] - y[d];
    dist2 += diff * diff;
  }
  return std::exp(-gamma * dist2);
}

KernelMatrix::KernelMatrix(std::size_t n, std::vector<double> values) : n_(n), values_(std::move(values)) {
  if (values_.size() != n * n) throw std::invalid_argument("kernel matrix must be n x n");
}

KernelMatrix KernelMatrix::rbf(const std::vector<Point>& points, double gamma) {
  const std::size_t n = points.size();
  std::vector<double> values(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      values[i * n + j] = values[j * n + i] = rbf_kernel(points[i], points[j], gamma);
    }
  }
  return {n, std::move(values)};
}

double dual_objective(const KernelMatrix& gram, std::span<const int> targets,
                      std::span<const double> alpha) {
  const std::size_t n = gram.size();
  double linear = 0.0, quadratic = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    linear += alpha[i];
    for (std::size_t j = 0; j < n; ++j) {
      quadratic += alpha[i] * alpha[j] * targets[i] * targets[j] * gram(i, j);
    }
  }
  return linear - 0.5 * quadratic;
}

DualSolution solve_dual(const KernelMatrix& gram, std::span<const int> targets,
                        const SolverOptions& options) {
  const std::size_t n = gram.size();
  if (targets.size() != n) throw std::invalid_argument("targets and kernel matrix sizes differ");
  if (n < 2) throw std::invalid_argument("dual solve needs at least 2 points");
  if (!(options.C > 0.0)) throw std::invalid_argument("C must be positive");
  bool has_pos = false, has_neg = false;
  for (int t : targets) {
    if (t == 1) has_pos = true;
    else if (t == -1) has_neg = true;
    else throw std::invalid_argument("targets must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw std::invalid_argument("both classes must be present");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (gram(i, j) != gram(j, i)) throw std::invalid_argument("kernel matrix is not symmetric");
    }
  }

  const double C = options.C;
  constexpr double kTau = 1e-12;
  auto q = [&](std::size_t i, std::size_t j) { return targets[i] * targets[j] * gram(i, j); };

  DualSolution out;
  out.alpha.assign(n, 0.0);
  auto& alpha = out.alpha;
  // Gradient of the minimization form 1/2 a'Qa - e'a.
  std::vector<double> grad(n, -1.0);

  auto in_up = [&](std::size_t t) { return targets[t] == 1 ? alpha[t] < C : alpha[t] > 0.0; };
  auto in_low = [&](std::size_t t) { return targets[t] == 1 ? alpha[t] > 0.0 : alpha[t] < C; };

  double m_up = 0.0, m_low = 0.0;
  for (;;) {
    m_up = -std::numeric_limits<double>::infinity();
    m_low = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -targets[t] * grad[t];
      if (in_up(t) && v > m_up) {
        m_up = v;
        i = t;
      }
      if (in_low(t) && v < m_low) {
        m_low = v;
        j = t;
      }
    }
    out.max_violation = (i == n || j == n) ? 0.0 : m_up - m_low;
    if (i == n || j == n || out.max_violation <= options.tolerance) {
      out.converged = true;
      break;
    }
    if (out.iterations >= options.max_iterations) break;
    ++out.iterations;

    const double old_i = alpha[i], old_j = alpha[j];
    if (targets[i] != targets[j]) {
      double quad = gram(i, i) + gram(j, j) - 2.0 * gram(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = gram(i, i) + gram(j, j) - 2.0 * gram(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }

    const double d_i = alpha[i] - old_i, d_j = alpha[j] - old_j;
    for (std::size_t t = 0; t < n; ++t) grad[t] += q(i, t) * d_i + q(j, t) * d_j;
  }

  // b from the margin support vectors, y(x_n) = t_n for 0 < a_n < C.
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] <= 0.0 || alpha[t] >= C) continue;
    free_sum += -targets[t] * grad[t];
    ++free_count;
  }
  if (free_count > 0) {
    out.bias = free_sum / static_cast<double>(free_count);
  } else {
    // Every point sits on a bound: take the middle of the interval of b values that keeps
    // all of them on the right side of their margin.
    if (std::isinf(m_up)) out.bias = m_low;
    else if (std::isinf(m_low)) out.bias = m_up;
    else out.bias = 0.5 * (m_up + m_low);
  }
  return out;
}

double BinarySvmModel::decision(std::span<const double> x) const {
  double score = bias;
  for (std::size_t s = 0; s < support_vectors.size(); ++s) {
    score += dual_coeffs[s] * rbf_kernel(x, support_vectors[s], gamma);
  }
  return score;
}

BinarySvmModel train_binary(const std::vector<Point>& points, std::span<const int> targets,
                            double gamma, const SolverOptions& options, DualSolution* solution) {
  if (points.size() != targets.size()) throw std::invalid_argument("points and targets sizes differ");
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  DualSolution dual = solve_dual(KernelMatrix::rbf(points, gamma), targets, options);

  BinarySvmModel model;
  model.gamma = gamma;
  model.bias = dual.bias;
  for (std::size_t n = 0; n < points.size(); ++n) {
    if (dual.alpha[n] > 0.0) {
      model.support_vectors.push_back(points[n]);
      model.dual_coeffs.push_back(dual.alpha[n] * targets[n]);
    }
  }
  if (solution) *solution = std::move(dual);
  return model;
}

BinaryPrediction predict_binary(const BinarySvmModel& model, std::span<const double> x) {
  if (!model.support_vectors.empty()) check_dimension(x, model.support_vectors.front().size());
  const double score = model.decision(x);
  return {score, score >= 0.0 ? 1 : -1};
}

TrainedOvoModel train_ovo(const std::vector<Point>& points, const std::vector<std::string>& labels,
                          const SvmConfig& config) {
  if (points.size() != labels.size()) throw std::invalid_argument("points and labels sizes differ");
  const std::set<std::string> unique(labels.begin(), labels.end());
  if (unique.size() < 2) throw std::invalid_argument("one-vs-one training needs at least 2 classes");

  TrainedOvoModel model;
  model.class_labels.assign(unique.begin(), unique.end());
  model.C = config.solver.C;

  auto [scaled, stats] = standardize(points);
  model.stats = std::move(stats);

  const std::size_t dims = model.dimension();
  if (config.gamma) {
    model.gamma = *config.gamma;
  } else {
    double variance = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
      double acc = 0.0;
      for (const auto& p : scaled) acc += p[d] * p[d];
      variance += acc / static_cast<double>(scaled.size());
    }
    variance /= static_cast<double>(dims);
    model.gamma = variance > 0.0 ? 1.0 / (static_cast<double>(dims) * variance)
                                 : 1.0 / static_cast<double>(dims);
  }

  std::vector<std::size_t> class_of(labels.size());
  for (std::size_t n = 0; n < labels.size(); ++n) {
    class_of[n] = static_cast<std::size_t>(
        std::lower_bound(model.class_labels.begin(), model.class_labels.end(), labels[n]) -
        model.class_labels.begin());
  }

  const std::size_t k = model.class_labels.size();
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      std::vector<Point> subset;
      std::vector<int> targets;
      for (std::size_t n = 0; n < scaled.size(); ++n) {
        if (class_of[n] == a || class_of[n] == b) {
          subset.push_back(scaled[n]);
          targets.push_back(class_of[n] == a ? 1 : -1);
        }
      }
      model.pairs.push_back({a, b, train_binary(subset, targets, model.gamma, config.solver)});
    }
  }
  return model;
}

OvoDecision decide_ovo(const TrainedOvoModel& model, std::span<const double> x) {
  const Point scaled = model.stats.apply(x);
  const std::size_t k = model.class_labels.size();
  OvoDecision out;
  out.votes.assign(k, 0);
  out.score_sums.assign(k, 0.0);
  for (const auto& pair : model.pairs) {
    const BinaryPrediction p = predict_binary(pair.model, scaled);
    const std::size_t winner = p.label == 1 ? pair.first : pair.second;
    ++out.votes[winner];
    out.score_sums[winner] += std::abs(p.score);
  }
  for (std::size_t c = 1; c < k; ++c) {
    const std::size_t w = out.winner;
    if (out.votes[c] > out.votes[w] ||
        (out.votes[c] == out.votes[w] && out.score_sums[c] > out.score_sums[w])) {
      out.winner = c;
    }
  }
  return out;
}

std::string predict_ovo(const TrainedOvoModel& model, std::span<const double> x) {
  return model.class_labels[decide_ovo(model, x).winner];
}

// ---------------------------------------------------------------------------
// Text format, version 1:
//   drcgenre-ovo-model 1
//   classes K, then K label lines
//   dimension d / gamma g / C c / mean ... / std ...
//   pairs P, then per pair "pair first second bias nsv" followed by nsv lines "coef x_1 .. x_d"

namespace {

constexpr const char* kMagic = "drcgenre-ovo-model";
constexpr int kFormatVersion = 1;

void put(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

void expect_key(std::istream& in, const std::string& key) {
  std::string got;
  if (!(in >> got) || got != key) throw std::runtime_error("model file: expected '" + key + "'");
}

template <typename T>
T read_value(std::istream& in, const char* what) {
  T v{};
  if (!(in >> v)) throw std::runtime_error(std::string("model file: bad ") + what);
  return v;
}

}  // namespace

std::string serialize_model(const TrainedOvoModel& model) {
  std::string out = std::string(kMagic) + " " + std::to_string(kFormatVersion) + "\n";
  out += "classes " + std::to_string(model.class_labels.size()) + "\n";
  for (const auto& label : model.class_labels) out += label + "\n";
  out += "dimension " + std::to_string(model.dimension()) + "\n";
  out += "gamma ";
  put(out, model.gamma);
  out += "\nC ";
  put(out, model.C);
  out += "\nmean";
  for (double v : model.stats.mean) {
    out += ' ';
    put(out, v);
  }
  out += "\nstd";
  for (double v : model.stats.std) {
    out += ' ';
    put(out, v);
  }
  out += "\npairs " + std::to_string(model.pairs.size()) + "\n";
  for (const auto& p : model.pairs) {
    out += "pair " + std::to_string(p.first) + " " + std::to_string(p.second) + " ";
    put(out, p.model.bias);
    out += " " + std::to_string(p.model.support_vectors.size()) + "\n";
    for (std::size_t s = 0; s < p.model.support_vectors.size(); ++s) {
      put(out, p.model.dual_coeffs[s]);
      for (double v : p.model.support_vectors[s]) {
        out += ' ';
        put(out, v);
      }
      out += '\n';
    }
  }
  return out;
}

TrainedOvoModel deserialize_model(const std::string& text) {
  std::istringstream in(text);
  expect_key(in, kMagic);
  const int version = read_value<int>(in, "version");
  if (version != kFormatVersion) {
    throw std::runtime_error("model file: unsupported version " + std::to_string(version));
  }

  TrainedOvoModel model;
  expect_key(in, "classes");
  const auto k = read_value<std::size_t>(in, "class count");
  in >> std::ws;
  for (std::size_t c = 0; c < k; ++c) {
    std::string label;
    if (!std::getline(in, label)) throw std::runtime_error("model file: truncated labels");
    model.class_labels.push_back(label);
  }
  expect_key(in, "dimension");
  const auto dims = read_value<std::size_t>(in, "dimension");
  expect_key(in, "gamma");
  model.gamma = read_value<double>(in, "gamma");
  expect_key(in, "C");
  model.C = read_value<double>(in, "C");
  expect_key(in, "mean");
  for (std::size_t d = 0; d < dims; ++d) model.stats.mean.push_back(read_value<double>(in, "mean"));
  expect_key(in, "std");
  for (std::size_t d = 0; d < dims; ++d) model.stats.std.push_back(read_value<double>(in, "std"));
  expect_key(in, "pairs");
  const auto pairs = read_value<std::size_t>(in, "pair count");
  if (pairs != k * (k - 1) / 2) throw std::runtime_error("model file: pair count does not match classes");
  for (std::size_t p = 0; p < pairs; ++p) {
    expect_key(in, "pair");
    PairModel pm;
    pm.first = read_value<std::size_t>(in, "pair index");
    pm.second = read_value<std::size_t>(in, "pair index");
    if (pm.first >= k || pm.second >= k) throw std::runtime_error("model file: pair index out of range");
    pm.model.gamma = model.gamma;
    pm.model.bias = read_value<double>(in, "bias");
    const auto nsv = read_value<std::size_t>(in, "support vector count");
    for (std::size_t s = 0; s < nsv; ++s) {
      pm.model.dual_coeffs.push_back(read_value<double>(in, "coefficient"));
      Point sv(dims);
      for (double& v : sv) v = read_value<double>(in, "support vector");
      pm.model.support_vectors.push_back(std::move(sv));
    }
    model.pairs.push_back(std::move(pm));
  }
  return model;
}

void save_model(const TrainedOvoModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize_model(model);
}

TrainedOvoModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return deserialize_model({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
}

}  // namespace drcgenre
