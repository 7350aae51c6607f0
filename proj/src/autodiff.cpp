// SPDX-License-Identifier: Apache-2.0

#include "unmix/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace unmix {

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> v)
    : shape(std::move(s)), values(std::move(v)) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  if (n != values.size())
    throw std::invalid_argument("tensor shape " + shape_str(shape) +
                                " does not match " + std::to_string(values.size()) +
                                " values");
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::row(std::vector<double> v) {
  std::size_t n = v.size();
  return Tensor({1, n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t r, std::size_t c, std::vector<double> v) {
  return Tensor({r, c}, std::move(v));
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void Node::ensure_grad() {
  if (grad.size() != value.numel()) grad.assign(value.numel(), 0.0);
}

void Node::zero_grad() { grad.assign(value.numel(), 0.0); }

Var leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

Var constant(Tensor value) { return leaf(std::move(value), false); }
Var constant(double value) { return leaf(Tensor::scalar(value), false); }

Var make_node(Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> backward_fn, const char* op_tag) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  n->backward_fn = std::move(backward_fn);
  n->op_tag = op_tag;
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  return n;
}

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a->value.shape != b->value.shape)
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a->value.shape) + " vs " +
                                shape_str(b->value.shape));
}

// Elementwise binary with scalar broadcast on either side.
// dfa/dfb give d(out)/da and d(out)/db per element.
template <typename F, typename Dfa, typename Dfb>
Var binary_op(const Var& a, const Var& b, const char* tag, F f, Dfa dfa, Dfb dfb) {
  const bool a_scalar = a->value.is_scalar();
  const bool b_scalar = b->value.is_scalar();
  if (!a_scalar && !b_scalar) check_same_shape(a, b, tag);
  const Tensor& big = (a_scalar && !b_scalar) ? b->value : a->value;
  Tensor out = Tensor::zeros(big.shape);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) {
    double av = a->value.values[a_scalar ? 0 : i];
    double bv = b->value.values[b_scalar ? 0 : i];
    out.values[i] = f(av, bv);
  }
  return make_node(std::move(out), {a, b},
      [a_scalar, b_scalar, dfa, dfb](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const std::size_t n = self.value.numel();
        if (pa.requires_grad) {
          pa.ensure_grad();
          for (std::size_t i = 0; i < n; ++i) {
            double av = pa.value.values[a_scalar ? 0 : i];
            double bv = pb.value.values[b_scalar ? 0 : i];
            pa.grad[a_scalar ? 0 : i] += self.grad[i] * dfa(av, bv);
          }
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (std::size_t i = 0; i < n; ++i) {
            double av = pa.value.values[a_scalar ? 0 : i];
            double bv = pb.value.values[b_scalar ? 0 : i];
            pb.grad[b_scalar ? 0 : i] += self.grad[i] * dfb(av, bv);
          }
        }
      },
      tag);
}

template <typename F, typename Df>
Var unary_op(const Var& a, const char* tag, F f, Df df) {
  Tensor out = Tensor::zeros(a->value.shape);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.values[i] = f(a->value.values[i]);
  return make_node(std::move(out), {a},
      [df](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        pa.ensure_grad();
        const std::size_t n = self.value.numel();
        for (std::size_t i = 0; i < n; ++i)
          pa.grad[i] += self.grad[i] * df(pa.value.values[i], self.value.values[i]);
      },
      tag);
}

}  // namespace

Var add(const Var& a, const Var& b) {
  return binary_op(a, b, "add", [](double x, double y) { return x + y; },
                   [](double, double) { return 1.0; },
                   [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary_op(a, b, "sub", [](double x, double y) { return x - y; },
                   [](double, double) { return 1.0; },
                   [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary_op(a, b, "mul", [](double x, double y) { return x * y; },
                   [](double, double y) { return y; },
                   [](double x, double) { return x; });
}

Var div(const Var& a, const Var& b) {
  return binary_op(a, b, "div", [](double x, double y) { return x / y; },
                   [](double, double y) { return 1.0 / y; },
                   [](double x, double y) { return -x / (y * y); });
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& A = a->value;
  const Tensor& B = b->value;
  if (A.shape.size() != 2 || B.shape.size() != 2 || A.shape[1] != B.shape[0])
    throw std::invalid_argument("matmul: incompatible shapes " +
                                shape_str(A.shape) + " x " + shape_str(B.shape));
  const std::size_t r = A.shape[0], k = A.shape[1], c = B.shape[1];
  Tensor out = Tensor::zeros({r, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t l = 0; l < k; ++l) {
      double av = A.at(i, l);
      for (std::size_t j = 0; j < c; ++j) out.at(i, j) += av * B.at(l, j);
    }
  return make_node(std::move(out), {a, b},
      [r, k, c](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
          pa.ensure_grad();
          // dA = G * B^T
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t l = 0; l < k; ++l) {
              double s = 0.0;
              for (std::size_t j = 0; j < c; ++j)
                s += self.grad[i * c + j] * pb.value.at(l, j);
              pa.grad[i * k + l] += s;
            }
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          // dB = A^T * G
          for (std::size_t l = 0; l < k; ++l)
            for (std::size_t j = 0; j < c; ++j) {
              double s = 0.0;
              for (std::size_t i = 0; i < r; ++i)
                s += pa.value.at(i, l) * self.grad[i * c + j];
              pb.grad[l * c + j] += s;
            }
        }
      },
      "matmul");
}

Var transpose(const Var& a) {
  const Tensor& A = a->value;
  if (A.shape.size() != 2)
    throw std::invalid_argument("transpose: expected 2-D tensor, got " +
                                shape_str(A.shape));
  const std::size_t r = A.shape[0], c = A.shape[1];
  Tensor out = Tensor::zeros({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = A.at(i, j);
  return make_node(std::move(out), {a},
      [r, c](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        pa.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j)
            pa.grad[i * c + j] += self.grad[j * r + i];
      },
      "transpose");
}

Var reduce_sum(const Var& a) {
  double s = std::accumulate(a->value.values.begin(), a->value.values.end(), 0.0);
  return make_node(Tensor::scalar(s), {a},
      [](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        pa.ensure_grad();
        for (double& g : pa.grad) g += self.grad[0];
      },
      "reduce_sum");
}

Var reduce_mean(const Var& a) {
  const double n = static_cast<double>(a->value.numel());
  double s = std::accumulate(a->value.values.begin(), a->value.values.end(), 0.0);
  return make_node(Tensor::scalar(s / n), {a},
      [n](Node& self) {
        Node& pa = *self.parents[0];
        if (!pa.requires_grad) return;
        pa.ensure_grad();
        for (double& g : pa.grad) g += self.grad[0] / n;
      },
      "reduce_mean");
}

Var exp(const Var& a) {
  return unary_op(a, "exp", [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Var log(const Var& a) {
  for (double x : a->value.values)
    if (x <= 0.0)
      throw std::domain_error("log: non-positive input " + std::to_string(x));
  return unary_op(a, "log", [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Var tanh(const Var& a) {
  return unary_op(a, "tanh", [](double x) { return std::tanh(x); },
                  [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return unary_op(a, "sigmoid",
                  [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                  [](double, double y) { return y * (1.0 - y); });
}

Var square(const Var& a) {
  return unary_op(a, "square", [](double x) { return x * x; },
                  [](double x, double) { return 2.0 * x; });
}

Var sqrt(const Var& a) {
  for (double x : a->value.values)
    if (x < 0.0)
      throw std::domain_error("sqrt: negative input " + std::to_string(x));
  return unary_op(a, "sqrt", [](double x) { return std::sqrt(x); },
                  [](double, double y) { return 0.5 / y; });
}

Var negate(const Var& a) {
  return unary_op(a, "negate", [](double x) { return -x; },
                  [](double, double) { return -1.0; });
}

Var broadcast_add_row(const Var& mat, const Var& row) {
  const Tensor& M = mat->value;
  const Tensor& R = row->value;
  if (M.shape.size() != 2 || R.numel() != M.shape[1])
    throw std::invalid_argument("broadcast_add_row: shape mismatch " +
                                shape_str(M.shape) + " vs " + shape_str(R.shape));
  const std::size_t r = M.shape[0], c = M.shape[1];
  Tensor out = M;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) += R.values[j];
  return make_node(std::move(out), {mat, row},
      [r, c](Node& self) {
        Node& pm = *self.parents[0];
        Node& pr = *self.parents[1];
        if (pm.requires_grad) {
          pm.ensure_grad();
          for (std::size_t i = 0; i < r * c; ++i) pm.grad[i] += self.grad[i];
        }
        if (pr.requires_grad) {
          pr.ensure_grad();
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) pr.grad[j] += self.grad[i * c + j];
        }
      },
      "broadcast_add_row");
}

Var select_row(const Var& mat, std::size_t i) {
  const Tensor& M = mat->value;
  if (M.shape.size() != 2 || i >= M.shape[0])
    throw std::invalid_argument("select_row: row " + std::to_string(i) +
                                " out of range for " + shape_str(M.shape));
  const std::size_t c = M.shape[1];
  Tensor out({1, c}, std::vector<double>(M.values.begin() + i * c,
                                         M.values.begin() + (i + 1) * c));
  return make_node(std::move(out), {mat},
      [i, c](Node& self) {
        Node& pm = *self.parents[0];
        if (!pm.requires_grad) return;
        pm.ensure_grad();
        for (std::size_t j = 0; j < c; ++j) pm.grad[i * c + j] += self.grad[j];
      },
      "select_row");
}

Var apply_primitive(const std::string& op, const std::vector<Var>& operands) {
  auto need = [&](std::size_t k) {
    if (operands.size() != k)
      throw std::invalid_argument(op + ": expected " + std::to_string(k) +
                                  " operands, got " + std::to_string(operands.size()));
  };
  if (op == "add") { need(2); return add(operands[0], operands[1]); }
  if (op == "sub") { need(2); return sub(operands[0], operands[1]); }
  if (op == "mul") { need(2); return mul(operands[0], operands[1]); }
  if (op == "div") { need(2); return div(operands[0], operands[1]); }
  if (op == "matmul") { need(2); return matmul(operands[0], operands[1]); }
  if (op == "broadcast_add_row") { need(2); return broadcast_add_row(operands[0], operands[1]); }
  if (op == "transpose") { need(1); return transpose(operands[0]); }
  if (op == "reduce_sum") { need(1); return reduce_sum(operands[0]); }
  if (op == "reduce_mean") { need(1); return reduce_mean(operands[0]); }
  if (op == "exp") { need(1); return exp(operands[0]); }
  if (op == "log") { need(1); return log(operands[0]); }
  if (op == "tanh") { need(1); return tanh(operands[0]); }
  if (op == "sigmoid") { need(1); return sigmoid(operands[0]); }
  if (op == "square") { need(1); return square(operands[0]); }
  if (op == "sqrt") { need(1); return sqrt(operands[0]); }
  if (op == "negate") { need(1); return negate(operands[0]); }
  throw std::invalid_argument("unknown primitive: " + op);
}

void backward(const Var& loss) {
  if (!loss->value.is_scalar())
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(loss->value.shape));
  // Iterative post-order DFS for the topological order.
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.get(), 0}};
  visited.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : topo) n->ensure_grad();
  loss->grad[0] = 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

double scalar_value(const Var& v) {
  if (!v->value.is_scalar())
    throw std::invalid_argument("scalar_value: tensor has shape " +
                                shape_str(v->value.shape));
  return v->value.values[0];
}

GradCheckReport grad_check(const std::function<Var()>& f,
                           const std::vector<Var>& params, double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2))
    throw std::invalid_argument("grad_check: epsilon must be in (0, 1e-2]");
  for (const auto& p : params) p->zero_grad();
  Var loss = f();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    p->ensure_grad();
    analytic.push_back(p->grad);
  }

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Node& p = *params[k];
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      const double saved = p.value.values[i];
      p.value.values[i] = saved + epsilon;
      double fp = scalar_value(f());
      p.value.values[i] = saved - epsilon;
      double fm = scalar_value(f());
      p.value.values[i] = saved;
      const double numeric = (fp - fm) / (2.0 * epsilon);
      const double a = analytic[k][i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(a - numeric) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = k;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace unmix
