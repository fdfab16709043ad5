#include "xaifn/autodiff.hpp"

#include <cmath>
#include <cstring>

namespace xaifn::ad {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error("SHAPE", std::string("shape mismatch in ") + what);
}

Matrix sigmoid_of(const Matrix& m) {
  return m.unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

}  // namespace

// ---------------------------------------------------------------- parameters

Parameter& ParameterSet::add(const std::string& name, Matrix init) {
  for (const auto& p : params_) {
    if (p->name == name) throw Error("DUPLICATE_PARAM", "duplicate parameter " + name);
  }
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Matrix::Zero(init.rows(), init.cols());
  p->m = Matrix::Zero(init.rows(), init.cols());
  p->v = Matrix::Zero(init.rows(), init.cols());
  p->value = std::move(init);
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterSet::add_uniform(const std::string& name, Eigen::Index rows,
                                     Eigen::Index cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
  }
  return add(name, std::move(m));
}

Parameter& ParameterSet::get(const std::string& name) {
  for (auto& p : params_) {
    if (p->name == name) return *p;
  }
  throw Error("UNKNOWN_PARAM", "unknown parameter " + name);
}

const Parameter& ParameterSet::get(const std::string& name) const {
  for (const auto& p : params_) {
    if (p->name == name) return *p;
  }
  throw Error("UNKNOWN_PARAM", "unknown parameter " + name);
}

std::vector<Parameter*> ParameterSet::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterSet::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

double ParameterSet::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

std::string ParameterSet::checksum() const {
  std::string bytes;
  for (const auto& p : params_) {
    bytes += p->name;
    const auto* data = reinterpret_cast<const char*>(p->value.data());
    bytes.append(data, static_cast<std::size_t>(p->value.size()) * sizeof(double));
  }
  return fnv1a_hex(bytes);
}

json ParameterSet::to_json() const {
  json out = json::array();
  for (const auto& p : params_) {
    std::vector<double> data(p->value.data(), p->value.data() + p->value.size());
    out.push_back({{"name", p->name},
                   {"rows", p->value.rows()},
                   {"cols", p->value.cols()},
                   {"data", std::move(data)}});
  }
  return out;
}

void ParameterSet::load_json(const json& j) {
  for (const auto& entry : j) {
    Parameter& p = get(entry.at("name").get<std::string>());
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    if (rows != p.value.rows() || cols != p.value.cols()) {
      throw Error("SHAPE", "parameter " + p.name + " has unexpected shape in weights file");
    }
    const auto data = entry.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw Error("SHAPE", "parameter " + p.name + " has wrong element count");
    }
    std::memcpy(p.value.data(), data.data(), data.size() * sizeof(double));
  }
}

void Adam::step(ParameterSet& params) {
  ++t_;
  const double norm = params.grad_norm();
  const double clip =
      (options_.clip_norm > 0 && norm > options_.clip_norm) ? options_.clip_norm / norm : 1.0;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (Parameter* p : params.all()) {
    const Matrix g = p->grad * clip;
    p->m = options_.beta1 * p->m + (1.0 - options_.beta1) * g;
    p->v = options_.beta2 * p->v + (1.0 - options_.beta2) * g.cwiseProduct(g);
    p->value.array() -= options_.learning_rate * (p->m.array() / bc1) /
                        ((p->v.array() / bc2).sqrt() + options_.epsilon);
  }
  params.zero_grad();
}

// ---------------------------------------------------------------- tape

const Matrix& Var::value() const { return tape->value(*this); }

Var Tape::constant(Matrix value) { return record(std::move(value), nullptr); }

Var Tape::param(Parameter& p) {
  for (const auto& [ptr, id] : param_nodes_) {
    if (ptr == &p) return Var{this, id};
  }
  Node node;
  node.param = &p;
  nodes_.push_back(std::move(node));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace_back(&p, id);
  return Var{this, id};
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
  return n.param ? n.param->value : n.value;
}

const Matrix& Tape::grad(Var v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
  return n.param ? n.param->grad : n.grad;
}

Var Tape::record(Matrix value, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_ref(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  Matrix& g = n.param ? n.param->grad : n.grad;
  const Matrix& v = n.param ? n.param->value : n.value;
  if (g.rows() != v.rows() || g.cols() != v.cols()) g = Matrix::Zero(v.rows(), v.cols());
  return g;
}

bool Tape::has_grad(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return !n.param && n.grad.size() > 0;
}

void Tape::backward(Var loss) {
  require(loss.tape == this && value(loss).size() == 1, "backward (loss must be scalar)");
  for (auto& n : nodes_) {
    if (!n.param) n.grad.resize(0, 0);
  }
  grad_ref(loss.id).setOnes();
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.param || !n.backward || n.grad.size() == 0) continue;
    n.backward(*this, id);
  }
}

// ---------------------------------------------------------------- ops

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  require(a.cols() == b.rows(), "matmul");
  Matrix out = a.value() * b.value();
  return t.record(std::move(out), [a, b](Tape& tp, int self) {
    const Matrix& g = tp.grad_ref(self);
    tp.grad_ref(a.id).noalias() += g * tp.value(b).transpose();
    tp.grad_ref(b.id).noalias() += tp.value(a).transpose() * g;
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().transpose();
  return t.record(std::move(out), [a](Tape& tp, int self) {
    tp.grad_ref(a.id) += tp.grad_ref(self).transpose();
  });
}

Var add(Var a, Var b) {
  Tape& t = *a.tape;
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  Matrix out = a.value() + b.value();
  return t.record(std::move(out), [a, b](Tape& tp, int self) {
    const Matrix& g = tp.grad_ref(self);
    tp.grad_ref(a.id) += g;
    tp.grad_ref(b.id) += g;
  });
}

Var add_row(Var a, Var row) {
  Tape& t = *a.tape;
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return t.record(std::move(out), [a, row](Tape& tp, int self) {
    const Matrix& g = tp.grad_ref(self);
    tp.grad_ref(a.id) += g;
    tp.grad_ref(row.id) += g.colwise().sum();
  });
}

Var mul(Var a, Var b) {
  Tape& t = *a.tape;
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return t.record(std::move(out), [a, b](Tape& tp, int self) {
    const Matrix& g = tp.grad_ref(self);
    tp.grad_ref(a.id) += g.cwiseProduct(tp.value(b));
    tp.grad_ref(b.id) += g.cwiseProduct(tp.value(a));
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  Matrix out = a.value() * s;
  return t.record(std::move(out), [a, s](Tape& tp, int self) {
    tp.grad_ref(a.id) += tp.grad_ref(self) * s;
  });
}

Var tanh(Var a) {
  Tape& t = *a.tape;
  Matrix out = a.value().array().tanh().matrix();
  return t.record(std::move(out), [a](Tape& tp, int self) {
    const Matrix& y = tp.value(Var{&tp, self});
    tp.grad_ref(a.id).array() += tp.grad_ref(self).array() * (1.0 - y.array().square());
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape;
  Matrix out = sigmoid_of(a.value());
  return t.record(std::move(out), [a](Tape& tp, int self) {
    const Matrix& y = tp.value(Var{&tp, self});
    tp.grad_ref(a.id).array() += tp.grad_ref(self).array() * y.array() * (1.0 - y.array());
  });
}

Var hcat(Var a, Var b) {
  Tape& t = *a.tape;
  require(a.rows() == b.rows(), "hcat");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Eigen::Index ac = a.cols();
  const Eigen::Index bc = b.cols();
  return t.record(std::move(out), [a, b, ac, bc](Tape& tp, int self) {
    const Matrix& g = tp.grad_ref(self);
    tp.grad_ref(a.id) += g.leftCols(ac);
    tp.grad_ref(b.id) += g.rightCols(bc);
  });
}

Var vcat(std::span<const Var> rows) {
  require(!rows.empty(), "vcat (empty)");
  Tape& t = *rows.front().tape;
  Eigen::Index total = 0;
  const Eigen::Index cols = rows.front().cols();
  for (const Var& r : rows) {
    require(r.cols() == cols, "vcat");
    total += r.rows();
  }
  Matrix out(total, cols);
  Eigen::Index at = 0;
  for (const Var& r : rows) {
    out.middleRows(at, r.rows()) = r.value();
    at += r.rows();
  }
  std::vector<Var> parts(rows.begin(), rows.end());
  return t.record(std::move(out), [parts](Tape& tp, int self) {
    const Matrix& g = tp.grad_ref(self);
    Eigen::Index off = 0;
    for (const Var& r : parts) {
      const Eigen::Index n = tp.value(r).rows();
      tp.grad_ref(r.id) += g.middleRows(off, n);
      off += n;
    }
  });
}

Var mean_rows(Var a) {
  Tape& t = *a.tape;
  require(a.rows() > 0, "mean_rows (empty)");
  Matrix out = a.value().colwise().mean();
  const double inv = 1.0 / static_cast<double>(a.rows());
  return t.record(std::move(out), [a, inv](Tape& tp, int self) {
    const Matrix& g = tp.grad_ref(self);
    tp.grad_ref(a.id).rowwise() += g.row(0) * inv;
  });
}

Var sum_all(Var a) {
  Tape& t = *a.tape;
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record(std::move(out), [a](Tape& tp, int self) {
    tp.grad_ref(a.id).array() += tp.grad_ref(self)(0, 0);
  });
}

Var softmax_col(Var a) {
  Tape& t = *a.tape;
  require(a.cols() == 1 && a.rows() > 0, "softmax_col");
  const Matrix& x = a.value();
  const double mx = x.maxCoeff();
  Matrix out = (x.array() - mx).exp().matrix();
  out /= out.sum();
  return t.record(std::move(out), [a](Tape& tp, int self) {
    const Matrix& y = tp.value(Var{&tp, self});
    const Matrix& g = tp.grad_ref(self);
    const double dot = y.cwiseProduct(g).sum();
    tp.grad_ref(a.id).array() += y.array() * (g.array() - dot);
  });
}

Var bce_with_logit(Var logit, double target) {
  Tape& t = *logit.tape;
  require(logit.value().size() == 1, "bce_with_logit");
  const double z = logit.scalar();
  // log(1 + exp(-|z|)) + max(z, 0) - z * y
  Matrix out(1, 1);
  out(0, 0) = std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - z * target;
  return t.record(std::move(out), [logit, target](Tape& tp, int self) {
    const double zz = tp.value(logit)(0, 0);
    const double p = zz >= 0 ? 1.0 / (1.0 + std::exp(-zz)) : std::exp(zz) / (1.0 + std::exp(zz));
    tp.grad_ref(logit.id)(0, 0) += tp.grad_ref(self)(0, 0) * (p - target);
  });
}

Var dropout(Var a, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return a;
  Tape& t = *a.tape;
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
  }
  return mul(a, t.constant(std::move(mask)));
}

Var embed(Tape& tape, Parameter& table, std::span<const std::int32_t> ids) {
  const Eigen::Index d = table.value.cols();
  Matrix out(static_cast<Eigen::Index>(ids.size()), d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < table.value.rows(), "embed (token id out of range)");
    out.row(static_cast<Eigen::Index>(i)) = table.value.row(ids[i]);
  }
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  Parameter* tp_table = &table;
  return tape.record(std::move(out), [idv, tp_table](Tape& tp, int self) {
    const Matrix& g = tp.grad_ref(self);
    for (std::size_t i = 0; i < idv.size(); ++i) {
      tp_table->grad.row(idv[i]) += g.row(static_cast<Eigen::Index>(i));
    }
  });
}

Var embed_bags(Tape& tape, Parameter& table, const std::vector<std::vector<std::int32_t>>& bags) {
  const Eigen::Index d = table.value.cols();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(bags.size()), d);
  for (std::size_t b = 0; b < bags.size(); ++b) {
    require(!bags[b].empty(), "embed_bags (empty bag)");
    for (std::int32_t id : bags[b]) {
      require(id >= 0 && id < table.value.rows(), "embed_bags (token id out of range)");
      out.row(static_cast<Eigen::Index>(b)) += table.value.row(id);
    }
    out.row(static_cast<Eigen::Index>(b)) /= static_cast<double>(bags[b].size());
  }
  Parameter* tp_table = &table;
  return tape.record(std::move(out), [bags, tp_table](Tape& tp, int self) {
    const Matrix& g = tp.grad_ref(self);
    for (std::size_t b = 0; b < bags.size(); ++b) {
      const double inv = 1.0 / static_cast<double>(bags[b].size());
      for (std::int32_t id : bags[b]) {
        tp_table->grad.row(id) += g.row(static_cast<Eigen::Index>(b)) * inv;
      }
    }
  });
}

namespace {

struct LstmCache {
  Matrix gates;   // T x 4H, activated
  Matrix cells;   // T x H
  Matrix h_prev;  // T x H
  Matrix c_prev;  // T x H
};

}  // namespace

Var lstm(Var x, Var weight, Var bias, bool reverse) {
  Tape& t = *x.tape;
  const Matrix& X = x.value();
  const Matrix& W = weight.value();
  const Matrix& b = bias.value();
  const Eigen::Index T = X.rows();
  const Eigen::Index d = X.cols();
  const Eigen::Index H = W.cols() / 4;
  require(W.cols() == 4 * H && W.rows() == d + H, "lstm weight");
  require(b.rows() == 1 && b.cols() == 4 * H, "lstm bias");

  auto cache = std::make_shared<LstmCache>();
  cache->gates.resize(T, 4 * H);
  cache->cells.resize(T, H);
  cache->h_prev.resize(T, H);
  cache->c_prev.resize(T, H);
  Matrix out(T, H);

  Matrix pre = X * W.topRows(d);
  pre.rowwise() += b.row(0);
  const auto Wh = W.bottomRows(H);
  Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(H);
  Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(H);
  Eigen::RowVectorXd z(4 * H);
  for (Eigen::Index s = 0; s < T; ++s) {
    const Eigen::Index row = reverse ? T - 1 - s : s;
    z.noalias() = pre.row(row) + h * Wh;
    for (Eigen::Index k = 0; k < 4 * H; ++k) {
      const double v = z(k);
      if (k >= 2 * H && k < 3 * H) {
        z(k) = std::tanh(v);
      } else {
        z(k) = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      }
    }
    cache->h_prev.row(row) = h;
    cache->c_prev.row(row) = c;
    c = z.segment(H, H).cwiseProduct(c) + z.segment(0, H).cwiseProduct(z.segment(2 * H, H));
    h = z.segment(3 * H, H).cwiseProduct(c.array().tanh().matrix());
    cache->gates.row(row) = z;
    cache->cells.row(row) = c;
    out.row(row) = h;
  }

  return t.record(std::move(out), [x, weight, bias, reverse, cache](Tape& tp, int self) {
    const Matrix& G = tp.grad_ref(self);
    const Matrix& Xv = tp.value(x);
    const Matrix& Wv = tp.value(weight);
    const Eigen::Index TT = Xv.rows();
    const Eigen::Index dd = Xv.cols();
    const Eigen::Index HH = Wv.cols() / 4;
    const auto Whv = Wv.bottomRows(HH);
    Matrix dz_all(TT, 4 * HH);
    Eigen::RowVectorXd dh_next = Eigen::RowVectorXd::Zero(HH);
    Eigen::RowVectorXd dc_next = Eigen::RowVectorXd::Zero(HH);
    Eigen::RowVectorXd dz(4 * HH);
    for (Eigen::Index s = TT - 1; s >= 0; --s) {
      const Eigen::Index row = reverse ? TT - 1 - s : s;
      const auto gates = cache->gates.row(row);
      const auto in = gates.segment(0, HH);
      const auto fg = gates.segment(HH, HH);
      const auto cg = gates.segment(2 * HH, HH);
      const auto og = gates.segment(3 * HH, HH);
      const Eigen::RowVectorXd tc = cache->cells.row(row).array().tanh().matrix();
      const Eigen::RowVectorXd dh = G.row(row) + dh_next;
      const Eigen::RowVectorXd dc =
          (dh.array() * og.array() * (1.0 - tc.array().square())).matrix() + dc_next;
      dz.segment(0, HH) = (dc.array() * cg.array() * in.array() * (1.0 - in.array())).matrix();
      dz.segment(HH, HH) = (dc.array() * cache->c_prev.row(row).array() * fg.array() *
                            (1.0 - fg.array()))
                               .matrix();
      dz.segment(2 * HH, HH) = (dc.array() * in.array() * (1.0 - cg.array().square())).matrix();
      dz.segment(3 * HH, HH) =
          (dh.array() * tc.array() * og.array() * (1.0 - og.array())).matrix();
      dz_all.row(row) = dz;
      dc_next = dc.cwiseProduct(fg);
      dh_next.noalias() = dz * Whv.transpose();
    }
    tp.grad_ref(x.id).noalias() += dz_all * Wv.topRows(dd).transpose();
    Matrix& gW = tp.grad_ref(weight.id);
    gW.topRows(dd).noalias() += Xv.transpose() * dz_all;
    gW.bottomRows(HH).noalias() += cache->h_prev.transpose() * dz_all;
    tp.grad_ref(bias.id) += dz_all.colwise().sum();
  });
}

}  // namespace xaifn::ad
