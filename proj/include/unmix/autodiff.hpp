// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode automatic differentiation over dense double tensors.
// Graphs are built define-by-run and discarded after backward(); leaves keep
// their gradient buffers so an optimizer can read them between steps.
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace unmix {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> v);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor scalar(double value);
  static Tensor row(std::vector<double> v);             // shape {1, n}
  static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> v);

  std::size_t numel() const { return values.size(); }
  bool is_scalar() const { return numel() == 1; }
  // 2-D accessors; 1-D tensors behave as a single row.
  std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
  std::size_t cols() const { return shape.size() == 2 ? shape[1] : numel(); }
  double& at(std::size_t i) { return values[i]; }
  double at(std::size_t i) const { return values[i]; }
  double& at(std::size_t i, std::size_t j) { return values[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }
};

std::string shape_str(const std::vector<std::size_t>& shape);

class Node;
using Var = std::shared_ptr<Node>;

class Node {
 public:
  Tensor value;
  std::vector<double> grad;  // sized lazily; same length as value.values
  bool requires_grad = false;
  std::vector<Var> parents;
  // Accumulates into parents' grad buffers given this node's grad.
  std::function<void(Node&)> backward_fn;
  const char* op_tag = "leaf";

  void ensure_grad();
  void zero_grad();
};

// Trainable leaf (participates in backward) vs. constant data.
Var leaf(Tensor value, bool requires_grad = true);
Var constant(Tensor value);
Var constant(double value);

// Extension point for composite ops with hand-derived backward rules
// (used by the GP KL term and the batch gather ops).
Var make_node(Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> backward_fn, const char* op_tag);

// Elementwise binaries; shapes must match, or either side may be scalar.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var reduce_sum(const Var& a);
Var reduce_mean(const Var& a);

Var exp(const Var& a);
Var log(const Var& a);   // domain error on non-positive input
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var square(const Var& a);
Var sqrt(const Var& a);  // domain error on negative input
Var negate(const Var& a);

// out[i][j] = mat[i][j] + row[j]
Var broadcast_add_row(const Var& mat, const Var& row);

// Row i of a 2-D tensor as a {1, cols} view node; gradient scatters back.
Var select_row(const Var& mat, std::size_t i);

// Name-based dispatch over the fixed primitive registry.
Var apply_primitive(const std::string& op, const std::vector<Var>& operands);

// Reverse pass from a scalar loss. Gradients accumulate additively into
// every requires_grad node reachable from the loss.
void backward(const Var& loss);

double scalar_value(const Var& v);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central finite differences against the analytic gradients of f().
// f must rebuild its graph from the current leaf values on every call.
GradCheckReport grad_check(const std::function<Var()>& f,
                           const std::vector<Var>& params, double epsilon);

}  // namespace unmix
