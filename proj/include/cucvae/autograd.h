// Minimal reverse-mode automatic differentiation over dense row-major
// double matrices. Every model in this project is built from these ops, so
// analytic gradients can be checked against finite differences end to end.
#ifndef CUCVAE_AUTOGRAD_H_
#define CUCVAE_AUTOGRAD_H_

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

namespace cucvae {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

namespace ag {

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Matrix& grad_ref();
};

// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Matrix value);
  static Var parameter(Matrix value);
  static Var scalar(double v);

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  // Zero-sized matrix of the right shape when no gradient reached the node.
  Matrix grad() const;
  void zero_grad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return node_ != nullptr; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  double item() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Accumulates d(loss)/d(node) into every reachable node that requires grad.
// `loss` must be 1x1.
void backward(const Var& loss);

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// a [n x m] + row [1 x m] broadcast over rows.
Var add_row(const Var& a, const Var& row);
// a [n x m] * col [n x 1] broadcast over columns.
Var mul_col(const Var& a, const Var& col);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var neg(const Var& a);
Var exp(const Var& a);
Var relu(const Var& a);
Var abs(const Var& a);
Var square(const Var& a);
Var transpose(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
// [n x m] -> [n x 1]
Var row_mean(const Var& a);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Index start, Index count);
Var slice_rows(const Var& a, Index start, Index count);
// out.row(i) = a.row(index[i]); gradient scatter-adds back.
Var gather_rows(const Var& a, const std::vector<Index>& index);
Var softmax_rows(const Var& a);
// Normalizes each row to zero mean / unit variance, then gamma*x + beta.
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta,
                    double eps = 1e-5);
// Time-axis unfolding for "same" 1D convolution with zero padding:
// [T x C] -> [T x kernel*C], column block j holds x[t + j - (kernel-1)/2].
Var unfold_time(const Var& x, Index kernel);

}  // namespace ag
}  // namespace cucvae

#endif  // CUCVAE_AUTOGRAD_H_
