#include "swave/tree.hpp"

#include <cmath>

namespace swave {

namespace {
// Hard guard against runaway tree sizes; 2^24 leaves is already ~17M nodes.
constexpr int kMaxSteps = 24;
}  // namespace

BinaryTree::BinaryTree(int steps, double horizon) : K_(steps), T_(horizon) {
  if (steps < 1 || steps > kMaxSteps)
    throw std::invalid_argument("BinaryTree: steps must be in [1, 24]");
  if (!(horizon > 0.0))
    throw std::invalid_argument("BinaryTree: horizon must be positive");
  dt_ = T_ / K_;
  s_ = std::sqrt(dt_);
}

AdaptedField::AdaptedField(const BinaryTree& tree, int dim, int last_level)
    : dim_(dim), last_(last_level) {
  if (dim < 1) throw std::invalid_argument("AdaptedField: dim must be >= 1");
  tree.check_level(last_level);
  levels_.resize(static_cast<std::size_t>(last_level) + 1);
  for (int k = 0; k <= last_level; ++k)
    levels_[static_cast<std::size_t>(k)] = Eigen::VectorXd::Zero(tree.nodes(k) * dim);
}

void AdaptedField::set_zero() {
  for (auto& v : levels_) v.setZero();
}

Eigen::VectorXd expectation(const AdaptedField& x, int level) {
  const int d = x.dim();
  const std::int64_t n = x.level(level).size() / d;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
  for (std::int64_t p = 0; p < n; ++p) acc += x.node(level, p);
  return acc / static_cast<double>(n);
}

Eigen::VectorXd conditional_expectation(const BinaryTree& tree, const AdaptedField& x,
                                        int from, int to, std::int64_t node) {
  tree.check_level(from);
  tree.check_level(to);
  if (to > from) throw std::invalid_argument("conditional_expectation: to must be <= from");
  const int d = x.dim();
  const std::int64_t span = std::int64_t{1} << (from - to);
  const std::int64_t first = node * span;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
  for (std::int64_t q = 0; q < span; ++q) acc += x.node(from, first + q);
  return acc / static_cast<double>(span);
}

MartingaleParts martingale_representation(const BinaryTree& tree, const AdaptedField& xi) {
  const int K = tree.steps();
  if (xi.last_level() != K)
    throw std::invalid_argument("martingale_representation: payoff must live on the leaf level");
  const int d = xi.dim();
  const double s = tree.sqrt_dt();

  MartingaleParts parts;
  parts.mean = AdaptedField(tree, d, K);
  parts.Z = AdaptedField(tree, d, K - 1);
  parts.mean.level(K) = xi.level(K);

  // One backward sweep: the conditional mean halves the children sum and the
  // integrand is the scaled half-difference.  Both identities are exact.
  for (int k = K - 1; k >= 0; --k) {
    for (std::int64_t p = 0; p < tree.nodes(k); ++p) {
      const auto lo = parts.mean.node(k + 1, BinaryTree::child(p, 0));
      const auto hi = parts.mean.node(k + 1, BinaryTree::child(p, 1));
      parts.mean.node(k, p) = 0.5 * (hi + lo);
      parts.Z.node(k, p) = (hi - lo) / (2.0 * s);
    }
  }
  parts.alpha = parts.mean.node(0, 0);
  return parts;
}

AdaptedField conditional_variance_last_step(const BinaryTree& tree, const AdaptedField& xi) {
  const int K = tree.steps();
  if (xi.last_level() != K)
    throw std::invalid_argument("conditional_variance_last_step: payoff must live on leaves");
  AdaptedField var(tree, xi.dim(), K - 1);
  for (std::int64_t p = 0; p < tree.nodes(K - 1); ++p) {
    const auto lo = xi.node(K, BinaryTree::child(p, 0));
    const auto hi = xi.node(K, BinaryTree::child(p, 1));
    var.node(K - 1, p) = (0.5 * (hi - lo)).array().square();
  }
  return var;
}

AdaptedField reconstruct_from_parts(const BinaryTree& tree, const MartingaleParts& parts) {
  const int K = tree.steps();
  const int d = parts.Z.dim();
  const double s = tree.sqrt_dt();
  AdaptedField out(tree, d, K);
  out.node(0, 0) = parts.alpha;
  for (int k = 0; k < K; ++k) {
    for (std::int64_t p = 0; p < tree.nodes(k); ++p) {
      const auto xk = out.node(k, p);
      const auto zk = parts.Z.node(k, p);
      // Walking x_{k+1} = x_k + Z_k dW_k along both branches.
      out.node(k + 1, BinaryTree::child(p, 0)) = xk - s * zk;
      out.node(k + 1, BinaryTree::child(p, 1)) = xk + s * zk;
    }
  }
  return out;
}

}  // namespace swave
