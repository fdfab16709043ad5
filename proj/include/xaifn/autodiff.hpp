#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xaifn/common.hpp"

namespace xaifn::ad {

using Matrix = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  // Adam moments.
  Matrix m;
  Matrix v;
};

/// Named, ordered parameter tensors of one model.
class ParameterSet {
 public:
  Parameter& add(const std::string& name, Matrix init);
  Parameter& add_uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                         std::mt19937_64& rng);  // Glorot-uniform
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t scalar_count() const;

  void zero_grad();
  double grad_norm() const;

  /// FNV-1a over the raw weight bytes in declaration order.
  std::string checksum() const;

  json to_json() const;
  /// Loads values into already-declared parameters; shapes must match.
  void load_json(const json& j);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;
};

class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}
  void step(ParameterSet& params);

 private:
  AdamOptions options_;
  std::int64_t t_ = 0;
};

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

/// Reverse-mode autodiff over dense matrices. Nodes are recorded in
/// evaluation order; backward() walks them in reverse.
class Tape {
 public:
  Var constant(Matrix value);
  Var param(Parameter& p);

  const Matrix& value(Var v) const;
  /// Gradient of the last backward() w.r.t. a node (zero-sized if untouched).
  const Matrix& grad(Var v) const;

  void backward(Var loss);
  std::size_t size() const { return nodes_.size(); }

  // Implementation interface for ops.
  using BackwardFn = std::function<void(Tape&, int self)>;
  Var record(Matrix value, BackwardFn backward);
  Matrix& grad_ref(int id);  // allocates zeros on first use
  bool has_grad(int id) const;

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Parameter* param = nullptr;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;
  std::vector<std::pair<Parameter*, int>> param_nodes_;
};

// Elementwise and linear-algebra ops.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var add_row(Var a, Var row);  // broadcast 1 x k over rows of a
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var tanh(Var a);
Var sigmoid(Var a);
Var hcat(Var a, Var b);
Var vcat(std::span<const Var> rows);
Var mean_rows(Var a);
Var sum_all(Var a);
/// Softmax over a column vector.
Var softmax_col(Var a);
/// Binary cross-entropy with logits for a 1 x 1 logit.
Var bce_with_logit(Var logit, double target);
/// Multiplies by a fixed mask scaled by 1/(1-rate); identity when rate == 0.
Var dropout(Var a, double rate, std::mt19937_64& rng);

/// Row gather from an embedding table (n x d). Gradients scatter into the table.
Var embed(Tape& tape, Parameter& table, std::span<const std::int32_t> ids);
/// Mean of embedding rows for each bag, stacked into an n_bags x d matrix.
Var embed_bags(Tape& tape, Parameter& table, const std::vector<std::vector<std::int32_t>>& bags);

/// Single-layer LSTM over the rows of x (T x d). Weight is (d + H) x 4H with
/// gate blocks [input, forget, cell, output]; bias is 1 x 4H. Returns T x H,
/// row t holding the hidden state after consuming row t. With `reverse` the
/// sequence is consumed from the last row to the first.
Var lstm(Var x, Var weight, Var bias, bool reverse);

}  // namespace xaifn::ad
