#pragma once

// Exhaustively enumerated binary increment tree.
//
// The driving noise is the simplest symmetric random walk: over K steps of
// size dt the increment at each step is +sqrt(dt) or -sqrt(dt), each with
// probability 1/2.  Every node of the resulting non-recombining binary tree
// is stored explicitly, so conditional expectations, martingale integrands
// and last-step conditional variances are finite sums, not estimates.

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace swave {

class BinaryTree {
public:
  BinaryTree(int steps, double horizon);

  int steps() const { return K_; }
  double horizon() const { return T_; }
  double dt() const { return dt_; }
  double sqrt_dt() const { return s_; }

  // Number of nodes at a level, 2^k.
  std::int64_t nodes(int level) const {
    check_level(level);
    return std::int64_t{1} << level;
  }
  // Children of node p at some level are (2p, minus) and (2p+1, plus).
  static std::int64_t child(std::int64_t p, int sign_bit) { return 2 * p + sign_bit; }
  static std::int64_t parent(std::int64_t p) { return p / 2; }
  // Increment sign on the step leading into child node q: +1 if q odd.
  static double increment_sign(std::int64_t q) { return (q & 1) ? 1.0 : -1.0; }

  void check_level(int level) const {
    if (level < 0 || level > K_)
      throw std::out_of_range("BinaryTree: level out of range");
  }

private:
  int K_;
  double T_;
  double dt_;
  double s_;
};

// A process adapted to the tree filtration: one dim-vector per node, for
// levels 0..last_level.  Storage is level-major, node-major inside a level.
class AdaptedField {
public:
  AdaptedField() = default;
  AdaptedField(const BinaryTree& tree, int dim, int last_level);

  int dim() const { return dim_; }
  int last_level() const { return last_; }

  Eigen::VectorXd& level(int k) { return levels_.at(static_cast<std::size_t>(k)); }
  const Eigen::VectorXd& level(int k) const { return levels_.at(static_cast<std::size_t>(k)); }

  Eigen::VectorBlock<Eigen::VectorXd> node(int k, std::int64_t p) {
    return levels_.at(static_cast<std::size_t>(k)).segment(p * dim_, dim_);
  }
  Eigen::VectorBlock<const Eigen::VectorXd> node(int k, std::int64_t p) const {
    return levels_.at(static_cast<std::size_t>(k)).segment(p * dim_, dim_);
  }

  void set_zero();

private:
  int dim_ = 0;
  int last_ = -1;
  std::vector<Eigen::VectorXd> levels_;
};

// Plain average over the 2^k equally likely nodes of one level.
Eigen::VectorXd expectation(const AdaptedField& x, int level);

// Conditional expectation of the level `from` slice given the filtration at
// `to`: per-node averages over descendants.  Result lives on level `to`.
Eigen::VectorXd conditional_expectation(const BinaryTree& tree, const AdaptedField& x,
                                        int from, int to, std::int64_t node);

struct MartingaleParts {
  Eigen::VectorXd alpha;  // deterministic starting value, E[xi]
  AdaptedField mean;      // conditional expectations on levels 0..K
  AdaptedField Z;         // integrands on levels 0..K-1
};

// Exact discrete martingale representation of a leaf payoff:
//   xi = alpha + sum_k Z_k dW_k   path by path, with no drift remainder.
MartingaleParts martingale_representation(const BinaryTree& tree, const AdaptedField& xi);

// Componentwise Var(xi | F_{K-1}) as a field on level K-1; equals
// ((x_plus - x_minus)/2)^2 node by node.
AdaptedField conditional_variance_last_step(const BinaryTree& tree, const AdaptedField& xi);

// Rebuilds the leaf payoff from (alpha, Z) by walking every path; used to
// verify representations and kept here because reconstruction is the
// defining property, not a test detail.
AdaptedField reconstruct_from_parts(const BinaryTree& tree, const MartingaleParts& parts);

}  // namespace swave
