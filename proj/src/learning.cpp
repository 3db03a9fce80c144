#include "fedex/learning.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedex {

Dataset generate_synthetic_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.num_samples < 1 || spec.num_classes < 1 || spec.dim < 1) {
    throw InputError("dataset needs positive sample count, class count and dimension");
  }
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd means(spec.num_classes, spec.dim);
  for (int c = 0; c < spec.num_classes; ++c) {
    for (int j = 0; j < spec.dim; ++j) means(c, j) = spec.class_spread * normal(rng);
  }
  Dataset d;
  d.num_classes = spec.num_classes;
  d.features.resize(spec.num_samples, spec.dim);
  d.labels.resize(static_cast<std::size_t>(spec.num_samples));
  for (int s = 0; s < spec.num_samples; ++s) {
    const int c = s % spec.num_classes;
    d.labels[static_cast<std::size_t>(s)] = c;
    for (int j = 0; j < spec.dim; ++j) d.features(s, j) = means(c, j) + spec.sample_noise * normal(rng);
  }
  return d;
}

std::string_view to_string(PartitionScheme s) {
  switch (s) {
    case PartitionScheme::iid: return "iid";
    case PartitionScheme::dirichlet: return "dirichlet";
    case PartitionScheme::location: return "location";
  }
  return "?";
}

PartitionScheme parse_partition_scheme(std::string_view text) {
  if (text == "iid") return PartitionScheme::iid;
  if (text == "dirichlet") return PartitionScheme::dirichlet;
  if (text == "location") return PartitionScheme::location;
  throw InputError("unknown partition scheme '" + std::string(text) + "' (expected iid, dirichlet or location)");
}

namespace {

std::vector<int> shard_sizes(int samples, int clients) {
  std::vector<int> sizes(static_cast<std::size_t>(clients), samples / clients);
  for (int i = 0; i < samples % clients; ++i) ++sizes[static_cast<std::size_t>(i)];
  return sizes;
}

// Draws each client's shard label by label from its target mix, interleaving clients
// so pool exhaustion is spread evenly rather than hitting the last client.
Shards draw_by_label_mix(const Dataset& data, const std::vector<std::vector<double>>& mix,
                         const std::vector<int>& sizes, Rng& rng) {
  const int C = data.num_classes;
  std::vector<std::vector<int>> pools(static_cast<std::size_t>(C));
  for (int s = 0; s < data.size(); ++s) pools[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(s)])].push_back(s);
  for (auto& p : pools) std::shuffle(p.begin(), p.end(), rng);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Shards shards(sizes.size());
  const int rounds = *std::max_element(sizes.begin(), sizes.end());
  std::vector<double> w(static_cast<std::size_t>(C));
  for (int r = 0; r < rounds; ++r) {
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (r >= sizes[i]) continue;
      double total = 0.0;
      for (int c = 0; c < C; ++c) {
        w[static_cast<std::size_t>(c)] = pools[static_cast<std::size_t>(c)].empty() ? 0.0 : mix[i][static_cast<std::size_t>(c)];
        total += w[static_cast<std::size_t>(c)];
      }
      if (total <= 0.0) {
        for (int c = 0; c < C; ++c) {
          w[static_cast<std::size_t>(c)] = static_cast<double>(pools[static_cast<std::size_t>(c)].size());
          total += w[static_cast<std::size_t>(c)];
        }
      }
      double u = unit(rng) * total;
      int pick = -1;
      for (int c = 0; c < C; ++c) {
        if (w[static_cast<std::size_t>(c)] <= 0.0) continue;
        pick = c;
        if (u < w[static_cast<std::size_t>(c)]) break;
        u -= w[static_cast<std::size_t>(c)];
      }
      auto& pool = pools[static_cast<std::size_t>(pick)];
      shards[i].push_back(pool.back());
      pool.pop_back();
    }
  }
  return shards;
}

}  // namespace

Shards partition_data(const Dataset& data, const PartitionSpec& spec, const Topology& topo) {
  const int n_clients = topo.num_clients();
  if (data.size() < n_clients) throw InputError("dataset has fewer samples than clients");
  const auto sizes = shard_sizes(data.size(), n_clients);
  Rng rng(spec.seed);

  if (spec.scheme == PartitionScheme::iid) {
    std::vector<int> idx(static_cast<std::size_t>(data.size()));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    Shards shards;
    std::size_t pos = 0;
    for (int sz : sizes) {
      shards.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(pos), idx.begin() + static_cast<std::ptrdiff_t>(pos + static_cast<std::size_t>(sz)));
      pos += static_cast<std::size_t>(sz);
    }
    return shards;
  }

  const int C = data.num_classes;
  std::vector<std::vector<double>> mix(static_cast<std::size_t>(n_clients), std::vector<double>(static_cast<std::size_t>(C)));
  if (spec.scheme == PartitionScheme::dirichlet) {
    if (!(spec.alpha > 0.0)) throw InputError("Dirichlet concentration must be positive");
    std::gamma_distribution<double> gamma(spec.alpha, 1.0);
    for (auto& m : mix) {
      double total = 0.0;
      for (double& v : m) total += (v = gamma(rng));
      if (total <= 0.0) {
        // All draws underflowed (tiny alpha); fall back to a single random label.
        std::uniform_int_distribution<int> pick(0, C - 1);
        m[static_cast<std::size_t>(pick(rng))] = total = 1.0;
      }
      for (double& v : m) v /= total;
    }
  } else {
    if (!topo.has_blocks()) throw InputError("location partition needs block membership in the topology");
    if (!(spec.p_main >= 0.0 && spec.p_main <= 1.0)) throw InputError("p_main must lie in [0, 1]");
    if (C < 2) throw InputError("location partition needs at least two labels");
    for (int i = 0; i < n_clients; ++i) {
      const int block = topo.block_of(i + 1);
      if (block < 0) throw InputError("client " + std::to_string(i + 1) + " has no block");
      const int main_label = block % C;
      for (int c = 0; c < C; ++c) {
        mix[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] = c == main_label ? spec.p_main : (1.0 - spec.p_main) / (C - 1);
      }
    }
  }
  return draw_by_label_mix(data, mix, sizes, rng);
}

std::vector<int> label_histogram(const Dataset& data, const std::vector<int>& shard) {
  std::vector<int> h(static_cast<std::size_t>(data.num_classes), 0);
  for (int s : shard) ++h[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(s)])];
  return h;
}

void clip_to_radius(ModelVector& g, double radius) {
  const double norm = g.norm();
  if (norm > radius) g *= radius / norm;
}

ModelVector Task::stochastic_gradient(int client, const ModelVector& x, Rng& rng) const {
  ModelVector g = raw_stochastic_gradient(client, x, rng);
  clip_to_radius(g, clip_);
  return g;
}

std::pair<double, ModelVector> Task::global_loss_and_grad(const ModelVector& x) const {
  double loss = 0.0;
  ModelVector grad = ModelVector::Zero(dimension());
  for (int i = 1; i <= num_clients(); ++i) {
    loss += client_loss(i, x);
    grad += client_gradient(i, x);
  }
  return {loss / num_clients(), grad / num_clients()};
}

QuadraticTask::QuadraticTask(Eigen::MatrixXd A, std::vector<ModelVector> targets, double sigma, double clip_radius)
    : Task(clip_radius), A_(std::move(A)), b_(std::move(targets)), sigma_(sigma) {
  if (b_.empty()) throw InputError("quadratic task needs at least one client");
  if (!(sigma_ >= 0.0)) throw InputError("noise scale must be non-negative");
  if (!(clip_radius > 0.0)) throw InputError("clip radius must be positive");
  for (const auto& b : b_) {
    if (b.size() != A_.rows()) throw InputError("target dimension does not match the design matrix");
  }
  H_ = A_.transpose() * A_;
  b_mean_ = ModelVector::Zero(A_.rows());
  for (const auto& b : b_) {
    c_.push_back(A_.transpose() * b);
    b_mean_ += b;
  }
  b_mean_ /= static_cast<double>(b_.size());
  for (const auto& b : b_) spread_ += 0.5 * (b - b_mean_).squaredNorm();
  spread_ /= static_cast<double>(b_.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H_, Eigen::EigenvaluesOnly);
  L_ = eig.eigenvalues().maxCoeff();
  x_star_ = A_.completeOrthogonalDecomposition().solve(b_mean_);
  f_star_ = 0.5 * (A_ * x_star_ - b_mean_).squaredNorm() + spread_;
}

double QuadraticTask::client_loss(int client, const ModelVector& x) const {
  return 0.5 * (A_ * x - target(client)).squaredNorm();
}

ModelVector QuadraticTask::client_gradient(int client, const ModelVector& x) const {
  return H_ * x - c_[static_cast<std::size_t>(client - 1)];
}

ModelVector QuadraticTask::raw_stochastic_gradient(int client, const ModelVector& x, Rng& rng) const {
  ModelVector g = client_gradient(client, x);
  if (sigma_ > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma_ / std::sqrt(static_cast<double>(dimension())));
    for (Eigen::Index j = 0; j < g.size(); ++j) g[j] += noise(rng);
  }
  return g;
}

std::pair<double, ModelVector> QuadraticTask::global_loss_and_grad(const ModelVector& x) const {
  const ModelVector r = A_ * x - b_mean_;
  return {0.5 * r.squaredNorm() + spread_, A_.transpose() * r};
}

TaskConstants QuadraticTask::constants() const {
  return {L_, clip_radius(), sigma_, f_star_, true};
}

Eigen::MatrixXd random_design_matrix(int dim, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(dim, dim);
  const double scale = 0.3 / std::sqrt(static_cast<double>(dim));
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) A(r, c) += scale * normal(rng);
  }
  return A;
}

std::unique_ptr<QuadraticTask> make_quadratic_task(const Dataset& data, const Shards& shards, double sigma,
                                                   double clip_radius, std::uint64_t seed) {
  std::vector<ModelVector> targets;
  for (const auto& shard : shards) {
    if (shard.empty()) throw InputError("every client needs at least one sample");
    ModelVector m = ModelVector::Zero(data.dim());
    for (int s : shard) m += data.features.row(s).transpose();
    targets.push_back(m / static_cast<double>(shard.size()));
  }
  return std::make_unique<QuadraticTask>(random_design_matrix(data.dim(), seed), std::move(targets), sigma,
                                         clip_radius);
}

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

}  // namespace

LogisticTask::LogisticTask(const Dataset& data, const Shards& shards, double l2, int batch_size, double clip_radius)
    : Task(clip_radius), dim_(data.dim()), l2_(l2), batch_(batch_size) {
  if (!(l2_ > 0.0)) throw InputError("logistic task needs a positive L2 weight");
  if (batch_ < 1) throw InputError("mini-batch size must be at least 1");
  if (!(clip_radius > 0.0)) throw InputError("clip radius must be positive");
  double max_sq_norm = 0.0;
  for (const auto& shard : shards) {
    if (shard.empty()) throw InputError("every client needs at least one sample");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(shard.size()), dim_);
    Eigen::VectorXd y(static_cast<Eigen::Index>(shard.size()));
    for (std::size_t r = 0; r < shard.size(); ++r) {
      X.row(static_cast<Eigen::Index>(r)) = data.features.row(shard[r]);
      y[static_cast<Eigen::Index>(r)] = data.labels[static_cast<std::size_t>(shard[r])] % 2;
      max_sq_norm = std::max(max_sq_norm, X.row(static_cast<Eigen::Index>(r)).squaredNorm());
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(X.transpose() * X, Eigen::EigenvaluesOnly);
    L_ = std::max(L_, 0.25 * eig.eigenvalues().maxCoeff() / static_cast<double>(shard.size()) + l2_);
    X_.push_back(std::move(X));
    y_.push_back(std::move(y));
  }
  // Per-sample gradient residuals (s - y) x have norm at most ||x||.
  sigma_ = std::sqrt(max_sq_norm / batch_);

  // No closed form: run full-batch gradient descent on the strongly convex objective.
  ModelVector w = ModelVector::Zero(dim_);
  for (int it = 0; it < 200000; ++it) {
    const auto [f, g] = Task::global_loss_and_grad(w);
    if (g.norm() < 1e-12) break;
    w -= g / L_;
  }
  f_star_ = Task::global_loss_and_grad(w).first;
}

double LogisticTask::client_loss(int client, const ModelVector& x) const {
  const auto& X = X_[static_cast<std::size_t>(client - 1)];
  const auto& y = y_[static_cast<std::size_t>(client - 1)];
  const Eigen::VectorXd z = X * x;
  double loss = 0.0;
  for (Eigen::Index r = 0; r < z.size(); ++r) loss += softplus(z[r]) - y[r] * z[r];
  return loss / static_cast<double>(z.size()) + 0.5 * l2_ * x.squaredNorm();
}

ModelVector LogisticTask::client_gradient(int client, const ModelVector& x) const {
  const auto& X = X_[static_cast<std::size_t>(client - 1)];
  const auto& y = y_[static_cast<std::size_t>(client - 1)];
  Eigen::VectorXd z = X * x;
  for (Eigen::Index r = 0; r < z.size(); ++r) z[r] = sigmoid(z[r]) - y[r];
  return X.transpose() * z / static_cast<double>(z.size()) + l2_ * x;
}

ModelVector LogisticTask::raw_stochastic_gradient(int client, const ModelVector& x, Rng& rng) const {
  const auto& X = X_[static_cast<std::size_t>(client - 1)];
  const auto& y = y_[static_cast<std::size_t>(client - 1)];
  std::uniform_int_distribution<Eigen::Index> pick(0, X.rows() - 1);
  ModelVector g = ModelVector::Zero(dim_);
  for (int b = 0; b < batch_; ++b) {
    const Eigen::Index r = pick(rng);
    g += (sigmoid(X.row(r).dot(x)) - y[r]) * X.row(r).transpose();
  }
  return g / static_cast<double>(batch_) + l2_ * x;
}

TaskConstants LogisticTask::constants() const {
  return {L_, clip_radius(), sigma_, f_star_, false};
}

}  // namespace fedex
