#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace drcgenre {

using Point = std::vector<double>;

/// Per-dimension mean and population standard deviation of a training set.
struct StandardizationStats {
  std::vector<double> mean;
  std::vector<double> std;

  Point apply(std::span<const double> x) const;
};

// Dimensions with std below this are treated as constant and scaled by 1.
inline constexpr double kMinStd = 1e-12;

std::pair<std::vector<Point>, StandardizationStats> standardize(const std::vector<Point>& vectors);

/// exp(-gamma * |x - y|^2)
double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma);

/// Dense symmetric kernel matrix, row-major.
class KernelMatrix {
 public:
  KernelMatrix() = default;
  KernelMatrix(std::size_t n, std::vector<double> values);

  static KernelMatrix rbf(const std::vector<Point>& points, double gamma);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * n_, n_}; }

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

struct SolverOptions {
  double C = 1.0;
  double tolerance = 1e-3;
  std::size_t max_iterations = 1'000'000;
};

struct DualSolution {
  std::vector<double> alpha;
  double bias = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  double max_violation = 0.0;  // m(a) - M(a) at exit
};

/// Maximizes sum(a) - 1/2 sum_nm a_n a_m t_n t_m K_nm subject to 0 <= a_n <= C and
/// sum(a_n t_n) = 0, using two-variable updates on the maximal violating pair.
DualSolution solve_dual(const KernelMatrix& gram, std::span<const int> targets,
                        const SolverOptions& options = {});

double dual_objective(const KernelMatrix& gram, std::span<const int> targets,
                      std::span<const double> alpha);

struct BinarySvmModel {
  std::vector<Point> support_vectors;
  std::vector<double> dual_coeffs;  // a_n * t_n
  double bias = 0.0;
  double gamma = 1.0;

  double decision(std::span<const double> x) const;
};

struct BinaryPrediction {
  double score = 0.0;
  int label = 1;
};

BinarySvmModel train_binary(const std::vector<Point>& points, std::span<const int> targets,
                            double gamma, const SolverOptions& options = {},
                            DualSolution* solution = nullptr);

/// Label is the sign of the score, with a zero score going to +1.
BinaryPrediction predict_binary(const BinarySvmModel& model, std::span<const double> x);

struct SvmConfig {
  std::optional<double> gamma;  // unset: 1 / (d * mean variance) of standardized training data
  SolverOptions solver{};
};

/// Binary model between class_labels[first] (+1) and class_labels[second] (-1).
struct PairModel {
  std::size_t first = 0;
  std::size_t second = 0;
  BinarySvmModel model;
};

struct TrainedOvoModel {
  std::vector<std::string> class_labels;
  std::vector<PairModel> pairs;
  StandardizationStats stats;
  double gamma = 1.0;
  double C = 1.0;

  std::size_t dimension() const { return stats.mean.size(); }
};

TrainedOvoModel train_ovo(const std::vector<Point>& points, const std::vector<std::string>& labels,
                          const SvmConfig& config = {});

struct OvoDecision {
  std::size_t winner = 0;
  std::vector<int> votes;          // per class
  std::vector<double> score_sums;  // per class, sum of |score| of the votes it won
};

/// Majority vote over pairwise models; ties go to the larger summed |score|, then to the
/// earlier label. `x` is raw (unstandardized).
OvoDecision decide_ovo(const TrainedOvoModel& model, std::span<const double> x);
std::string predict_ovo(const TrainedOvoModel& model, std::span<const double> x);

std::string serialize_model(const TrainedOvoModel& model);
TrainedOvoModel deserialize_model(const std::string& text);
void save_model(const TrainedOvoModel& model, const std::filesystem::path& path);
TrainedOvoModel load_model(const std::filesystem::path& path);

}  // namespace drcgenre
