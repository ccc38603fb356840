#include "cucvae/autograd.h"

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace cucvae::ag {
namespace {

thread_local bool g_grad_enabled = true;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("autograd: ") + what);
}

// Wraps a forward result. Parents and the backward closure are only kept
// when some parent needs a gradient and recording is enabled.
Var make_result(Matrix value, std::vector<Var> inputs,
                std::function<void(Node&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (!g_grad_enabled) return Var(node);
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return Var(node);
  node->requires_grad = true;
  node->parents.reserve(inputs.size());
  for (auto& in : inputs) node->parents.push_back(in.node());
  node->backward = std::move(fn);
  return Var(node);
}

inline bool wants(const Node& n, std::size_t i) {
  return n.parents[i]->requires_grad;
}

}  // namespace

Matrix& Node::grad_ref() {
  if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
  return grad;
}

Var Var::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(node);
}

Var Var::parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(node);
}

Var Var::scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Matrix Var::grad() const {
  if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
  return node_->grad;
}

double Var::item() const {
  require(rows() == 1 && cols() == 1, "item() on non-scalar");
  return node_->value(0, 0);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

void backward(const Var& loss) {
  require(loss.rows() == 1 && loss.cols() == 1, "backward on non-scalar");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_ref()(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->grad.size() != 0) node->backward(*node);
  }
}

Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), "matmul shape mismatch");
  return make_result(a.value() * b.value(), {a, b}, [](Node& n) {
    const Matrix& av = n.parents[0]->value;
    const Matrix& bv = n.parents[1]->value;
    if (wants(n, 0)) n.parents[0]->grad_ref().noalias() += n.grad * bv.transpose();
    if (wants(n, 1)) n.parents[1]->grad_ref().noalias() += av.transpose() * n.grad;
  });
}

Var add(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add shape mismatch");
  return make_result(a.value() + b.value(), {a, b}, [](Node& n) {
    if (wants(n, 0)) n.parents[0]->grad_ref() += n.grad;
    if (wants(n, 1)) n.parents[1]->grad_ref() += n.grad;
  });
}

Var sub(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub shape mismatch");
  return make_result(a.value() - b.value(), {a, b}, [](Node& n) {
    if (wants(n, 0)) n.parents[0]->grad_ref() += n.grad;
    if (wants(n, 1)) n.parents[1]->grad_ref() -= n.grad;
  });
}

Var mul(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul shape mismatch");
  return make_result(a.value().cwiseProduct(b.value()), {a, b}, [](Node& n) {
    if (wants(n, 0))
      n.parents[0]->grad_ref() += n.grad.cwiseProduct(n.parents[1]->value);
    if (wants(n, 1))
      n.parents[1]->grad_ref() += n.grad.cwiseProduct(n.parents[0]->value);
  });
}

Var add_row(const Var& a, const Var& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row shape mismatch");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return make_result(std::move(out), {a, row}, [](Node& n) {
    if (wants(n, 0)) n.parents[0]->grad_ref() += n.grad;
    if (wants(n, 1)) n.parents[1]->grad_ref() += n.grad.colwise().sum();
  });
}

Var mul_col(const Var& a, const Var& col) {
  require(col.cols() == 1 && col.rows() == a.rows(), "mul_col shape mismatch");
  Matrix out = a.value();
  for (Index r = 0; r < out.rows(); ++r) out.row(r) *= col.value()(r, 0);
  return make_result(std::move(out), {a, col}, [](Node& n) {
    const Matrix& av = n.parents[0]->value;
    const Matrix& cv = n.parents[1]->value;
    if (wants(n, 0)) {
      Matrix& g = n.parents[0]->grad_ref();
      for (Index r = 0; r < g.rows(); ++r) g.row(r) += n.grad.row(r) * cv(r, 0);
    }
    if (wants(n, 1)) {
      Matrix& g = n.parents[1]->grad_ref();
      for (Index r = 0; r < g.rows(); ++r) g(r, 0) += n.grad.row(r).dot(av.row(r));
    }
  });
}

Var scale(const Var& a, double s) {
  return make_result(a.value() * s, {a}, [s](Node& n) {
    n.parents[0]->grad_ref() += n.grad * s;
  });
}

Var add_scalar(const Var& a, double s) {
  Matrix out = a.value().array() + s;
  return make_result(std::move(out), {a}, [](Node& n) {
    n.parents[0]->grad_ref() += n.grad;
  });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var exp(const Var& a) {
  Matrix out = a.value().array().exp();
  return make_result(std::move(out), {a}, [](Node& n) {
    n.parents[0]->grad_ref() += n.grad.cwiseProduct(n.value);
  });
}

Var relu(const Var& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return make_result(std::move(out), {a}, [](Node& n) {
    const Matrix& av = n.parents[0]->value;
    n.parents[0]->grad_ref() +=
        (av.array() > 0.0).select(n.grad, Matrix::Zero(av.rows(), av.cols()));
  });
}

Var abs(const Var& a) {
  return make_result(a.value().cwiseAbs(), {a}, [](Node& n) {
    const Matrix& av = n.parents[0]->value;
    n.parents[0]->grad_ref().array() += n.grad.array() * av.array().sign();
  });
}

Var square(const Var& a) {
  return make_result(a.value().cwiseAbs2(), {a}, [](Node& n) {
    n.parents[0]->grad_ref() += 2.0 * n.grad.cwiseProduct(n.parents[0]->value);
  });
}

Var transpose(const Var& a) {
  return make_result(a.value().transpose(), {a}, [](Node& n) {
    n.parents[0]->grad_ref() += n.grad.transpose();
  });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_result(std::move(out), {a}, [](Node& n) {
    n.parents[0]->grad_ref().array() += n.grad(0, 0);
  });
}

Var mean(const Var& a) {
  require(a.value().size() > 0, "mean of empty matrix");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var row_mean(const Var& a) {
  require(a.cols() > 0, "row_mean of zero-column matrix");
  const double inv = 1.0 / static_cast<double>(a.cols());
  Matrix out = a.value().rowwise().sum() * inv;
  return make_result(std::move(out), {a}, [inv](Node& n) {
    Matrix& g = n.parents[0]->grad_ref();
    for (Index r = 0; r < g.rows(); ++r) g.row(r).array() += n.grad(r, 0) * inv;
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols of nothing");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make_result(std::move(out), parts, [](Node& n) {
    Index at = 0;
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      const Index c = n.parents[i]->value.cols();
      if (wants(n, i)) n.parents[i]->grad_ref() += n.grad.middleCols(at, c);
      at += c;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows of nothing");
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return make_result(std::move(out), parts, [](Node& n) {
    Index at = 0;
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      const Index r = n.parents[i]->value.rows();
      if (wants(n, i)) n.parents[i]->grad_ref() += n.grad.middleRows(at, r);
      at += r;
    }
  });
}

Var slice_cols(const Var& a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(),
          "slice_cols out of range");
  return make_result(a.value().middleCols(start, count), {a},
                     [start, count](Node& n) {
                       n.parents[0]->grad_ref().middleCols(start, count) += n.grad;
                     });
}

Var slice_rows(const Var& a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(),
          "slice_rows out of range");
  return make_result(a.value().middleRows(start, count), {a},
                     [start, count](Node& n) {
                       n.parents[0]->grad_ref().middleRows(start, count) += n.grad;
                     });
}

Var gather_rows(const Var& a, const std::vector<Index>& index) {
  Matrix out(static_cast<Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && index[i] < a.rows(), "gather_rows index out of range");
    out.row(static_cast<Index>(i)) = a.value().row(index[i]);
  }
  return make_result(std::move(out), {a}, [index](Node& n) {
    Matrix& g = n.parents[0]->grad_ref();
    for (std::size_t i = 0; i < index.size(); ++i)
      g.row(index[i]) += n.grad.row(static_cast<Index>(i));
  });
}

Var softmax_rows(const Var& a) {
  Matrix out(a.rows(), a.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    const double m = a.value().row(r).maxCoeff();
    out.row(r) = (a.value().row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return make_result(std::move(out), {a}, [](Node& n) {
    Matrix& g = n.parents[0]->grad_ref();
    for (Index r = 0; r < g.rows(); ++r) {
      const double dot = n.grad.row(r).dot(n.value.row(r));
      g.row(r).array() +=
          n.value.row(r).array() * (n.grad.row(r).array() - dot);
    }
  });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta,
                    double eps) {
  require(gamma.rows() == 1 && gamma.cols() == x.cols() && beta.rows() == 1 &&
              beta.cols() == x.cols(),
          "layer_norm parameter shape mismatch");
  const Index rows = x.rows();
  const Index cols = x.cols();
  Matrix normed(rows, cols);
  Vector inv_std(rows);
  for (Index r = 0; r < rows; ++r) {
    const double mu = x.value().row(r).mean();
    const double var =
        (x.value().row(r).array() - mu).square().sum() / static_cast<double>(cols);
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    normed.row(r) = (x.value().row(r).array() - mu) * inv_std(r);
  }
  Matrix out = normed;
  for (Index r = 0; r < rows; ++r) {
    out.row(r) = normed.row(r).cwiseProduct(gamma.value().row(0)) + beta.value().row(0);
  }
  return make_result(
      std::move(out), {x, gamma, beta},
      [normed, inv_std](Node& n) {
        const Matrix& gv = n.parents[1]->value;
        const Index cols = normed.cols();
        if (wants(n, 0)) {
          Matrix& gx = n.parents[0]->grad_ref();
          for (Index r = 0; r < normed.rows(); ++r) {
            Eigen::RowVectorXd dn = n.grad.row(r).cwiseProduct(gv.row(0));
            const double m1 = dn.mean();
            const double m2 = dn.dot(normed.row(r)) / static_cast<double>(cols);
            gx.row(r).array() += inv_std(r) * (dn.array() - m1 -
                                               normed.row(r).array() * m2);
          }
        }
        if (wants(n, 1))
          n.parents[1]->grad_ref() += n.grad.cwiseProduct(normed).colwise().sum();
        if (wants(n, 2)) n.parents[2]->grad_ref() += n.grad.colwise().sum();
      });
}

Var unfold_time(const Var& x, Index kernel) {
  require(kernel >= 1, "unfold_time kernel must be positive");
  const Index steps = x.rows();
  const Index ch = x.cols();
  const Index pad = (kernel - 1) / 2;
  Matrix out = Matrix::Zero(steps, kernel * ch);
  for (Index t = 0; t < steps; ++t) {
    for (Index j = 0; j < kernel; ++j) {
      const Index src = t + j - pad;
      if (src >= 0 && src < steps) out.block(t, j * ch, 1, ch) = x.value().row(src);
    }
  }
  return make_result(std::move(out), {x}, [kernel, pad, ch](Node& n) {
    Matrix& g = n.parents[0]->grad_ref();
    const Index steps = g.rows();
    for (Index t = 0; t < steps; ++t) {
      for (Index j = 0; j < kernel; ++j) {
        const Index src = t + j - pad;
        if (src >= 0 && src < steps) g.row(src) += n.grad.block(t, j * ch, 1, ch);
      }
    }
  });
}

}  // namespace cucvae::ag
