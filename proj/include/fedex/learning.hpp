#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

#include "fedex/topology.hpp"

namespace fedex {

using ModelVector = Eigen::VectorXd;
using Rng = std::mt19937_64;

/// Labelled feature vectors; row j of `features` is sample j.
struct Dataset {
  Eigen::MatrixXd features;
  std::vector<int> labels;
  int num_classes = 0;

  int size() const { return static_cast<int>(labels.size()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

struct DatasetSpec {
  int num_samples = 2400;
  int num_classes = 10;
  int dim = 20;
  /// Standard deviation of the class means around the origin.
  double class_spread = 1.0;
  /// Per-coordinate standard deviation of samples around their class mean.
  double sample_noise = 0.5;
};

/// Class-balanced Gaussian mixture; sample j has label j mod num_classes.
Dataset generate_synthetic_dataset(const DatasetSpec& spec, std::uint64_t seed);

enum class PartitionScheme { iid, dirichlet, location };

std::string_view to_string(PartitionScheme s);
PartitionScheme parse_partition_scheme(std::string_view text);

struct PartitionSpec {
  PartitionScheme scheme = PartitionScheme::iid;
  double alpha = 0.5;
  double p_main = 0.7;
  std::uint64_t seed = 0;
};

/// Sample indices per client; entry 0 belongs to client 1.
using Shards = std::vector<std::vector<int>>;

/// Splits every sample of `data` across the topology's clients in near-equal shard sizes.
///  - iid: uniform random split.
///  - dirichlet: each client's label mix is drawn from Dir(alpha).
///  - location: clients in block b favour label (b mod C) with probability p_main, the rest spread evenly.
/// When a label pool runs dry the remaining draws fall back to the labels still available,
/// so every sample lands in exactly one shard.
Shards partition_data(const Dataset& data, const PartitionSpec& spec, const Topology& topo);

/// Per-client label histogram of a shard.
std::vector<int> label_histogram(const Dataset& data, const std::vector<int>& shard);

/// Smoothness, gradient bound, noise bound and optimal value of a task.
struct TaskConstants {
  double L = 0.0;
  double G = std::numeric_limits<double>::infinity();
  double sigma = 0.0;
  double f_star = 0.0;
  bool f_star_exact = true;
};

/// Federated objective f = (1/N) sum_i f_i over clients 1..N.
class Task {
 public:
  explicit Task(double clip_radius) : clip_(clip_radius) {}
  virtual ~Task() = default;

  virtual int dimension() const = 0;
  virtual int num_clients() const = 0;
  virtual double client_loss(int client, const ModelVector& x) const = 0;
  virtual ModelVector client_gradient(int client, const ModelVector& x) const = 0;
  virtual TaskConstants constants() const = 0;
  virtual std::string_view kind() const = 0;

  /// Unbiased estimate of grad f_i(x) before clipping.
  virtual ModelVector raw_stochastic_gradient(int client, const ModelVector& x, Rng& rng) const = 0;

  /// Raw estimate clipped to the radius G.
  ModelVector stochastic_gradient(int client, const ModelVector& x, Rng& rng) const;

  virtual std::pair<double, ModelVector> global_loss_and_grad(const ModelVector& x) const;

  double clip_radius() const { return clip_; }

 private:
  double clip_;
};

/// Rescales `g` in place to norm at most `radius`.
void clip_to_radius(ModelVector& g, double radius);

/// f_i(x) = 1/2 ||A x - b_i||^2 with a shared square A and isotropic Gaussian gradient noise
/// of total variance sigma^2.
class QuadraticTask final : public Task {
 public:
  QuadraticTask(Eigen::MatrixXd A, std::vector<ModelVector> targets, double sigma, double clip_radius);

  int dimension() const override { return static_cast<int>(A_.cols()); }
  int num_clients() const override { return static_cast<int>(b_.size()); }
  double client_loss(int client, const ModelVector& x) const override;
  ModelVector client_gradient(int client, const ModelVector& x) const override;
  ModelVector raw_stochastic_gradient(int client, const ModelVector& x, Rng& rng) const override;
  std::pair<double, ModelVector> global_loss_and_grad(const ModelVector& x) const override;
  TaskConstants constants() const override;
  std::string_view kind() const override { return "quadratic"; }

  const Eigen::MatrixXd& matrix() const { return A_; }
  const ModelVector& target(int client) const { return b_[static_cast<std::size_t>(client - 1)]; }
  const ModelVector& minimizer() const { return x_star_; }

 private:
  Eigen::MatrixXd A_;
  Eigen::MatrixXd H_;  // A^T A
  std::vector<ModelVector> b_;
  std::vector<ModelVector> c_;  // A^T b_i
  ModelVector b_mean_;
  double spread_ = 0.0;  // 1/2 mean ||b_i - b_mean||^2
  double sigma_;
  double L_ = 0.0;
  ModelVector x_star_;
  double f_star_ = 0.0;
};

/// L2-regularised binary logistic regression on each client's shard; the binary label is
/// the class parity. Stochastic gradients average a with-replacement mini-batch.
class LogisticTask final : public Task {
 public:
  LogisticTask(const Dataset& data, const Shards& shards, double l2, int batch_size, double clip_radius);

  int dimension() const override { return dim_; }
  int num_clients() const override { return static_cast<int>(X_.size()); }
  double client_loss(int client, const ModelVector& x) const override;
  ModelVector client_gradient(int client, const ModelVector& x) const override;
  ModelVector raw_stochastic_gradient(int client, const ModelVector& x, Rng& rng) const override;
  TaskConstants constants() const override;
  std::string_view kind() const override { return "logistic"; }

 private:
  int dim_;
  double l2_;
  int batch_;
  std::vector<Eigen::MatrixXd> X_;
  std::vector<Eigen::VectorXd> y_;
  double L_ = 0.0;
  double sigma_ = 0.0;
  double f_star_ = 0.0;
};

/// Quadratic task whose client targets are the mean feature vector of each shard.
std::unique_ptr<QuadraticTask> make_quadratic_task(const Dataset& data, const Shards& shards, double sigma,
                                                   double clip_radius, std::uint64_t seed);

/// Random well-conditioned square matrix I + 0.3 W / sqrt(d), W standard normal.
Eigen::MatrixXd random_design_matrix(int dim, std::uint64_t seed);

}  // namespace fedex
