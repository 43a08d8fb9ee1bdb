#include "hmtl/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hmtl/error.hpp"

namespace hmtl {

std::string_view task_name(Task task) {
  switch (task) {
    case Task::kNer: return "ner";
    case Task::kEmd: return "emd";
    case Task::kCoref: return "cr";
    case Task::kRelation: return "re";
  }
  return "?";
}

std::optional<Task> parse_task(std::string_view name) {
  if (name == "ner") return Task::kNer;
  if (name == "emd") return Task::kEmd;
  if (name == "cr" || name == "coref") return Task::kCoref;
  if (name == "re" || name == "relation") return Task::kRelation;
  return std::nullopt;
}

std::string_view group_name(Group group) {
  switch (group) {
    case Group::kEmbeddings: return "embeddings";
    case Group::kNer: return "ner";
    case Group::kEmd: return "emd";
    case Group::kCoref: return "cr";
    case Group::kRelation: return "re";
  }
  return "?";
}

std::optional<Group> parse_group(std::string_view name) {
  if (name == "embeddings") return Group::kEmbeddings;
  if (auto task = parse_task(name)) return group_of(*task);
  return std::nullopt;
}

Group group_of(Task task) {
  switch (task) {
    case Task::kNer: return Group::kNer;
    case Task::kEmd: return Group::kEmd;
    case Task::kCoref: return Group::kCoref;
    case Task::kRelation: return Group::kRelation;
  }
  return Group::kEmbeddings;
}

// ---------------------------------------------------------------------------
// Parameters

void Parameter::zero_grad() {
  if (row_sparse && grad.size() > 0) {
    for (int r : touched_rows) grad.row(r).setZero();
  } else {
    grad.setZero(value.rows(), value.cols());
  }
  touched_rows.clear();
  touched = false;
}

void Parameter::mark_row(int row) {
  // touched_rows may hold duplicates; consumers deduplicate.
  touched_rows.push_back(row);
  touched = true;
}

void touch(Parameter& p) { p.touched = true; }

Parameter& ParameterStore::add(std::string name, Group group, Matrix init, bool row_sparse) {
  if (find(name) != nullptr) throw std::logic_error("duplicate parameter " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->group = group;
  p->grad = Matrix::Zero(init.rows(), init.cols());
  p->adam_m = Matrix::Zero(init.rows(), init.cols());
  p->adam_v = Matrix::Zero(init.rows(), init.cols());
  p->value = std::move(init);
  p->row_sparse = row_sparse;
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterStore::find(std::string_view name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

const Parameter* ParameterStore::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

Parameter& ParameterStore::at(std::string_view name) {
  Parameter* p = find(name);
  if (p == nullptr) throw std::out_of_range("no parameter named " + std::string(name));
  return *p;
}

const Parameter& ParameterStore::at(std::string_view name) const {
  const Parameter* p = find(name);
  if (p == nullptr) throw std::out_of_range("no parameter named " + std::string(name));
  return *p;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->size();
  return n;
}

std::vector<Matrix> ParameterStore::snapshot() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParameterStore::restore(const std::vector<Matrix>& values) {
  if (values.size() != params_.size()) throw std::logic_error("snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) params_[i]->value = values[i];
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, false});
  return Var(static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(Parameter& p) {
  if (!grad_enabled_ || !p.trainable) return constant(p.value);
  Parameter* ptr = &p;
  nodes_.push_back(Node{p.value, Matrix(), [ptr](Tape&, const Matrix& g) {
                          ptr->grad += g;
                          ptr->touched = true;
                        },
                        true});
  return Var(static_cast<int>(nodes_.size()) - 1);
}

Var Tape::lookup(Parameter& table, std::vector<int> rows) {
  Matrix out(static_cast<int>(rows.size()), table.value.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<int>(i)) = table.value.row(rows[i]);
  if (!grad_enabled_ || !table.trainable) return constant(std::move(out));
  Parameter* ptr = &table;
  nodes_.push_back(Node{std::move(out), Matrix(),
                        [ptr, rows = std::move(rows)](Tape&, const Matrix& g) {
                          for (std::size_t i = 0; i < rows.size(); ++i) {
                            ptr->grad.row(rows[i]) += g.row(static_cast<int>(i));
                            ptr->mark_row(rows[i]);
                          }
                        },
                        true});
  return Var(static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, Backward backward) {
  return record_with_params(std::move(value), inputs, false, std::move(backward));
}

Var Tape::record_with_params(Matrix value, std::span<const Var> inputs, bool params_need_grad,
                             Backward backward) {
  bool needs = params_need_grad;
  for (Var v : inputs) needs = needs || nodes_[v.id()].requires_grad;
  needs = needs && grad_enabled_;
  nodes_.push_back(Node{std::move(value), Matrix(), needs ? std::move(backward) : nullptr, needs});
  return Var(static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& node = nodes_[v.id()];
  if (!node.requires_grad) return;
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

void Tape::backward(Var target) {
  if (value(target).size() != 1) throw std::logic_error("backward target must be 1x1");
  nodes_[target.id()].grad = Matrix::Ones(1, 1);
  for (int id = target.id(); id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.backward || node.grad.size() == 0) continue;
    node.backward(*this, node.grad);
  }
}

// ---------------------------------------------------------------------------
// Ops

namespace ops {

Var matmul(Tape& t, Var a, Var b) {
  Matrix out = t.value(a) * t.value(b);
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, g * tp.value(b).transpose());
    if (tp.requires_grad(b)) tp.accumulate(b, tp.value(a).transpose() * g);
  });
}

Var matmul_nt(Tape& t, Var a, Var b) {
  Matrix out = t.value(a) * t.value(b).transpose();
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, g * tp.value(b));
    if (tp.requires_grad(b)) tp.accumulate(b, g.transpose() * tp.value(a));
  });
}

Var add(Tape& t, Var a, Var b) {
  if (t.value(a).rows() != t.value(b).rows() || t.value(a).cols() != t.value(b).cols()) {
    throw DimensionError("add: shape mismatch");
  }
  Matrix out = t.value(a) + t.value(b);
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var add_row(Tape& t, Var x, Var row) {
  if (t.value(row).rows() != 1 || t.value(row).cols() != t.value(x).cols()) {
    throw DimensionError("add_row: bias width mismatch");
  }
  Matrix out = t.value(x).rowwise() + t.value(row).row(0);
  return t.record(std::move(out), {x, row}, [x, row](Tape& tp, const Matrix& g) {
    tp.accumulate(x, g);
    if (tp.requires_grad(row)) tp.accumulate(row, g.colwise().sum());
  });
}

Var mul(Tape& t, Var a, Var b) {
  Matrix out = t.value(a).cwiseProduct(t.value(b));
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, g.cwiseProduct(tp.value(b)));
    if (tp.requires_grad(b)) tp.accumulate(b, g.cwiseProduct(tp.value(a)));
  });
}

Var scale(Tape& t, Var a, double factor) {
  Matrix out = t.value(a) * factor;
  return t.record(std::move(out), {a},
                  [a, factor](Tape& tp, const Matrix& g) { tp.accumulate(a, g * factor); });
}

Var tanh(Tape& t, Var a) {
  Matrix out = t.value(a).array().tanh().matrix();
  const Var self(static_cast<int>(t.size()));
  return t.record(std::move(out), {a}, [a, self](Tape& tp, const Matrix& g) {
    const Matrix& v = tp.value(self);
    tp.accumulate(a, g.cwiseProduct((1.0 - v.array().square()).matrix()));
  });
}

Var sigmoid(Tape& t, Var a) {
  Matrix out = (1.0 / (1.0 + (-t.value(a).array()).exp())).matrix();
  const Var self(static_cast<int>(t.size()));
  return t.record(std::move(out), {a}, [a, self](Tape& tp, const Matrix& g) {
    const Matrix& v = tp.value(self);
    tp.accumulate(a, g.cwiseProduct((v.array() * (1.0 - v.array())).matrix()));
  });
}

Var relu(Tape& t, Var a) {
  Matrix out = t.value(a).cwiseMax(0.0);
  return t.record(std::move(out), {a}, [a](Tape& tp, const Matrix& g) {
    tp.accumulate(a, (tp.value(a).array() > 0.0).select(g, 0.0));
  });
}

Var sum(Tape& t, Var a) {
  Matrix out(1, 1);
  out(0, 0) = t.value(a).sum();
  return t.record(std::move(out), {a}, [a](Tape& tp, const Matrix& g) {
    const Matrix& v = tp.value(a);
    tp.accumulate(a, Matrix::Constant(v.rows(), v.cols(), g(0, 0)));
  });
}

Var concat_cols(Tape& t, std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  if (parts.size() == 1) return parts[0];
  const int rows = static_cast<int>(t.value(parts[0]).rows());
  int cols = 0;
  for (Var p : parts) {
    if (t.value(p).rows() != rows) throw DimensionError("concat_cols: row count mismatch");
    cols += static_cast<int>(t.value(p).cols());
  }
  Matrix out(rows, cols);
  std::vector<int> offsets;
  int off = 0;
  for (Var p : parts) {
    const Matrix& v = t.value(p);
    out.middleCols(off, v.cols()) = v;
    offsets.push_back(off);
    off += static_cast<int>(v.cols());
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record(std::move(out), parts,
                  [inputs, offsets](Tape& tp, const Matrix& g) {
                    for (std::size_t i = 0; i < inputs.size(); ++i) {
                      if (!tp.requires_grad(inputs[i])) continue;
                      tp.accumulate(inputs[i],
                                    g.middleCols(offsets[i], tp.value(inputs[i]).cols()));
                    }
                  });
}

Var concat_rows(Tape& t, std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  if (parts.size() == 1) return parts[0];
  const int cols = static_cast<int>(t.value(parts[0]).cols());
  int rows = 0;
  for (Var p : parts) {
    if (t.value(p).cols() != cols) throw DimensionError("concat_rows: column count mismatch");
    rows += static_cast<int>(t.value(p).rows());
  }
  Matrix out(rows, cols);
  std::vector<int> offsets;
  int off = 0;
  for (Var p : parts) {
    const Matrix& v = t.value(p);
    out.middleRows(off, v.rows()) = v;
    offsets.push_back(off);
    off += static_cast<int>(v.rows());
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record(std::move(out), parts,
                  [inputs, offsets](Tape& tp, const Matrix& g) {
                    for (std::size_t i = 0; i < inputs.size(); ++i) {
                      if (!tp.requires_grad(inputs[i])) continue;
                      tp.accumulate(inputs[i],
                                    g.middleRows(offsets[i], tp.value(inputs[i]).rows()));
                    }
                  });
}

Var slice_rows(Tape& t, Var a, int begin, int count) {
  Matrix out = t.value(a).middleRows(begin, count);
  return t.record(std::move(out), {a}, [a, begin, count](Tape& tp, const Matrix& g) {
    Matrix full = Matrix::Zero(tp.value(a).rows(), tp.value(a).cols());
    full.middleRows(begin, count) = g;
    tp.accumulate(a, full);
  });
}

Var gather_rows(Tape& t, Var a, std::vector<int> rows) {
  const Matrix& src = t.value(a);
  Matrix out(static_cast<int>(rows.size()), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<int>(i)) = src.row(rows[i]);
  return t.record(std::move(out), {a}, [a, rows = std::move(rows)](Tape& tp, const Matrix& g) {
    Matrix full = Matrix::Zero(tp.value(a).rows(), tp.value(a).cols());
    for (std::size_t i = 0; i < rows.size(); ++i) full.row(rows[i]) += g.row(static_cast<int>(i));
    tp.accumulate(a, full);
  });
}

Var dropout(Tape& t, Var a, double p, Rng& rng) {
  if (p <= 0.0) return a;
  const Matrix& v = t.value(a);
  std::bernoulli_distribution keep(1.0 - p);
  Matrix mask(v.rows(), v.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask(i) = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
  Matrix out = v.cwiseProduct(mask);
  return t.record(std::move(out), {a}, [a, mask = std::move(mask)](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g.cwiseProduct(mask));
  });
}

Var affine(Tape& t, Var x, Parameter& weight, Parameter& bias) {
  if (t.value(x).cols() != weight.value.cols()) {
    throw DimensionError("affine: input width " + std::to_string(t.value(x).cols()) +
                         " does not match " + weight.name + " (" +
                         std::to_string(weight.value.cols()) + ")");
  }
  return add_row(t, matmul_nt(t, x, t.param(weight)), t.param(bias));
}

}  // namespace ops

// ---------------------------------------------------------------------------
// Optimiser

double Adam::step(ParameterStore& store) {
  double sq = 0.0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    Parameter& p = store[i];
    if (!p.touched || !p.trainable) continue;
    if (p.row_sparse) {
      std::sort(p.touched_rows.begin(), p.touched_rows.end());
      p.touched_rows.erase(std::unique(p.touched_rows.begin(), p.touched_rows.end()),
                           p.touched_rows.end());
      for (int r : p.touched_rows) sq += p.grad.row(r).squaredNorm();
    } else {
      sq += p.grad.squaredNorm();
    }
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  const double clip =
      (config_.clip_norm > 0.0 && norm > config_.clip_norm) ? config_.clip_norm / norm : 1.0;

  const double b1 = config_.beta1, b2 = config_.beta2;
  for (std::size_t i = 0; i < store.size(); ++i) {
    Parameter& p = store[i];
    if (!p.touched || !p.trainable) {
      p.zero_grad();
      continue;
    }
    ++p.steps;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(p.steps));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(p.steps));
    const double lr = config_.learning_rate * std::sqrt(c2) / c1;
    auto update = [&](auto&& value, auto&& grad, auto&& m, auto&& v) {
      m = b1 * m + (1.0 - b1) * clip * grad;
      v = (b2 * v.array() + (1.0 - b2) * (clip * grad).array().square()).matrix();
      value -= (lr * m.array() / (v.array().sqrt() + config_.epsilon)).matrix();
    };
    if (p.row_sparse) {
      for (int r : p.touched_rows) {
        update(p.value.row(r), p.grad.row(r), p.adam_m.row(r), p.adam_v.row(r));
      }
    } else {
      update(p.value, p.grad, p.adam_m, p.adam_v);
    }
    p.zero_grad();
  }
  return norm;
}

Matrix uniform_matrix(int rows, int cols, double scale, Rng& rng) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Matrix m(rows, cols);
  // Fill row-major so the draw order does not depend on storage order.
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

Matrix glorot_matrix(int rows, int cols, Rng& rng) {
  return uniform_matrix(rows, cols, std::sqrt(6.0 / static_cast<double>(rows + cols)), rng);
}

}  // namespace hmtl
