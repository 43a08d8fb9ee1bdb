#include "hmtl/encoder.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <sstream>

#include "hmtl/error.hpp"

namespace hmtl {

BiRecurrentEncoder BiRecurrentEncoder::create(ParameterStore& store, const std::string& prefix,
                                              Group group, int input_dim, int hidden, int layers,
                                              Rng& rng) {
  if (input_dim <= 0 || hidden <= 0 || layers <= 0) {
    throw ConfigError("encoder", "encoder dimensions and layer count must be positive");
  }
  BiRecurrentEncoder enc;
  enc.input_dim_ = input_dim;
  enc.hidden_ = hidden;
  int d_in = input_dim;
  for (int l = 0; l < layers; ++l) {
    std::array<Direction, 2> dirs{};
    for (int d = 0; d < 2; ++d) {
      const std::string name =
          prefix + ".l" + std::to_string(l) + (d == 0 ? ".fwd" : ".bwd");
      Matrix bias = Matrix::Zero(1, 4 * hidden);
      bias.middleCols(hidden, hidden).setOnes();  // forget gate starts open
      dirs[static_cast<std::size_t>(d)] = Direction{
          &store.add(name + ".w_input", group, glorot_matrix(4 * hidden, d_in, rng)),
          &store.add(name + ".w_recurrent", group, glorot_matrix(4 * hidden, hidden, rng)),
          &store.add(name + ".bias", group, std::move(bias))};
    }
    enc.layers_.push_back(dirs);
    d_in = 2 * hidden;
  }
  return enc;
}

Var lstm_recurrence(Tape& tape, Var projected, Parameter& w_recurrent, bool reverse) {
  const Matrix& xp = tape.value(projected);
  const int n = static_cast<int>(xp.rows());
  const int h = static_cast<int>(w_recurrent.value.cols());
  if (xp.cols() != 4 * h) throw DimensionError("lstm: projected width must be 4h");
  const Matrix& U = w_recurrent.value;

  // Per-step caches in processing order.
  Matrix gates(n, 4 * h);  // activated i, f, g, o
  Matrix cells(n, h);
  Matrix tanh_cells(n, h);
  Matrix out(n, h);
  RowVector h_prev = RowVector::Zero(h);
  RowVector c_prev = RowVector::Zero(h);
  for (int step = 0; step < n; ++step) {
    const int t = reverse ? n - 1 - step : step;
    RowVector z = xp.row(t) + h_prev * U.transpose();
    auto sig = [](const auto& v) { return (1.0 / (1.0 + (-v.array()).exp())).matrix(); };
    RowVector i = sig(z.segment(0, h));
    RowVector f = sig(z.segment(h, h));
    RowVector g = z.segment(2 * h, h).array().tanh().matrix();
    RowVector o = sig(z.segment(3 * h, h));
    RowVector c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
    RowVector tc = c.array().tanh().matrix();
    RowVector hh = o.cwiseProduct(tc);
    gates.row(step) << i, f, g, o;
    cells.row(step) = c;
    tanh_cells.row(step) = tc;
    out.row(t) = hh;
    h_prev = hh;
    c_prev = c;
  }

  Parameter* up = &w_recurrent;
  std::vector<Var> inputs = {projected};
  return tape.record_with_params(
      std::move(out), inputs, up->trainable,
      [projected, up, reverse, n, h, gates = std::move(gates), cells = std::move(cells),
       tanh_cells = std::move(tanh_cells)](Tape& tp, const Matrix& grad_out) {
        const Matrix& U = up->value;
        Matrix d_proj = Matrix::Zero(n, 4 * h);
        Matrix dU = Matrix::Zero(4 * h, h);
        RowVector dh_next = RowVector::Zero(h);
        RowVector dc_next = RowVector::Zero(h);
        for (int step = n - 1; step >= 0; --step) {
          const int t = reverse ? n - 1 - step : step;
          auto i = gates.row(step).segment(0, h);
          auto f = gates.row(step).segment(h, h);
          auto g = gates.row(step).segment(2 * h, h);
          auto o = gates.row(step).segment(3 * h, h);
          auto tc = tanh_cells.row(step);
          RowVector c_prev = step > 0 ? RowVector(cells.row(step - 1)) : RowVector::Zero(h);
          RowVector h_prev = RowVector::Zero(h);
          if (step > 0) {
            auto po = gates.row(step - 1).segment(3 * h, h);
            h_prev = po.cwiseProduct(tanh_cells.row(step - 1));
          }
          RowVector dh = grad_out.row(t) + dh_next;
          RowVector d_o = dh.cwiseProduct(tc);
          RowVector dc =
              dh.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix()) + dc_next;
          RowVector d_i = dc.cwiseProduct(g);
          RowVector d_g = dc.cwiseProduct(i);
          RowVector d_f = dc.cwiseProduct(c_prev);
          dc_next = dc.cwiseProduct(f);
          RowVector dz(4 * h);
          dz << d_i.cwiseProduct((i.array() * (1.0 - i.array())).matrix()),
              d_f.cwiseProduct((f.array() * (1.0 - f.array())).matrix()),
              d_g.cwiseProduct((1.0 - g.array().square()).matrix()),
              d_o.cwiseProduct((o.array() * (1.0 - o.array())).matrix());
          d_proj.row(t) = dz;
          dU.noalias() += dz.transpose() * h_prev;
          dh_next = dz * U;
        }
        tp.accumulate(projected, d_proj);
        if (up->trainable) {
          up->grad += dU;
          up->touched = true;
        }
      });
}

Var BiRecurrentEncoder::encode(Tape& tape, Var inputs, double dropout, Rng* rng) const {
  if (tape.value(inputs).cols() != input_dim_) {
    throw DimensionError("encoder expects input width " + std::to_string(input_dim_) + ", got " +
                         std::to_string(tape.value(inputs).cols()));
  }
  Var x = inputs;
  if (dropout > 0.0 && rng != nullptr) x = ops::dropout(tape, x, dropout, *rng);
  for (const auto& layer : layers_) {
    std::array<Var, 2> outs;
    for (int d = 0; d < 2; ++d) {
      const Direction& dir = layer[static_cast<std::size_t>(d)];
      Var proj = ops::affine(tape, x, *dir.w_input, *dir.bias);
      outs[static_cast<std::size_t>(d)] = lstm_recurrence(tape, proj, *dir.w_recurrent, d == 1);
    }
    x = ops::concat_cols(tape, outs);
  }
  return x;
}

Matrix encode(const BiRecurrentEncoder& encoder, const Matrix& inputs) {
  Tape tape(false);
  return tape.value(encoder.encode(tape, tape.constant(inputs)));
}

// ---------------------------------------------------------------------------
// Wiring

std::string_view source_name(Source source) {
  switch (source) {
    case Source::kEmbeddings: return "emb";
    case Source::kNer: return "ner";
    case Source::kEmd: return "emd";
    case Source::kCoref: return "cr";
    case Source::kRelation: return "re";
  }
  return "?";
}

Source source_of(Task task) {
  switch (task) {
    case Task::kNer: return Source::kNer;
    case Task::kEmd: return Source::kEmd;
    case Task::kCoref: return Source::kCoref;
    case Task::kRelation: return Source::kRelation;
  }
  return Source::kEmbeddings;
}

namespace {

std::optional<Task> task_of(Source s) {
  switch (s) {
    case Source::kNer: return Task::kNer;
    case Source::kEmd: return Task::kEmd;
    case Source::kCoref: return Task::kCoref;
    case Source::kRelation: return Task::kRelation;
    default: return std::nullopt;
  }
}

}  // namespace

HierarchyWiring HierarchyWiring::from_levels(std::vector<std::vector<Task>> levels) {
  HierarchyWiring w;
  std::set<Task> seen;
  for (auto& level : levels) {
    if (level.empty()) continue;
    for (Task t : level) {
      if (!seen.insert(t).second) {
        throw ConfigError("model.hierarchy",
                          "task '" + std::string(task_name(t)) + "' listed twice");
      }
    }
    w.levels_.push_back(level);
  }
  if (w.levels_.empty()) throw ConfigError("model.hierarchy", "no tasks configured");
  for (std::size_t l = 0; l < w.levels_.size(); ++l) {
    for (Task t : w.levels_[l]) {
      std::vector<Source> in = {Source::kEmbeddings};
      if (l > 0) {
        for (Task lower : w.levels_[l - 1]) in.push_back(source_of(lower));
      }
      w.inputs_[t] = std::move(in);
    }
  }
  return w;
}

HierarchyWiring HierarchyWiring::parse(std::string_view spec) {
  std::vector<std::vector<Task>> levels;
  std::string s(spec);
  std::istringstream level_stream(s);
  for (std::string level; std::getline(level_stream, level, '|');) {
    std::vector<Task> tasks;
    std::istringstream task_stream(level);
    for (std::string name; std::getline(task_stream, name, ',');) {
      name.erase(0, name.find_first_not_of(" \t"));
      name.erase(name.find_last_not_of(" \t") + 1);
      if (name.empty()) continue;
      auto t = parse_task(name);
      if (!t) throw ConfigError("model.hierarchy", "unknown task '" + name + "'");
      tasks.push_back(*t);
    }
    levels.push_back(std::move(tasks));
  }
  return from_levels(std::move(levels));
}

HierarchyWiring HierarchyWiring::full_model() { return parse("ner|emd|re,cr"); }

void HierarchyWiring::set_inputs(Task task, std::vector<Source> inputs) {
  if (!has(task)) {
    throw ConfigError("model.hierarchy", "task '" + std::string(task_name(task)) +
                                             "' is not configured");
  }
  inputs_[task] = std::move(inputs);
}

bool HierarchyWiring::has(Task task) const { return inputs_.count(task) > 0; }

int HierarchyWiring::level(Task task) const {
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    if (std::find(levels_[l].begin(), levels_[l].end(), task) != levels_[l].end()) {
      return static_cast<int>(l) + 1;
    }
  }
  throw ConfigError("model.hierarchy",
                    "task '" + std::string(task_name(task)) + "' is not configured");
}

const std::vector<Source>& HierarchyWiring::inputs(Task task) const {
  auto it = inputs_.find(task);
  if (it == inputs_.end()) {
    throw ConfigError("model.hierarchy",
                      "task '" + std::string(task_name(task)) + "' is not configured");
  }
  return it->second;
}

std::vector<Task> HierarchyWiring::tasks() const {
  std::vector<Task> out;
  for (const auto& level : levels_) out.insert(out.end(), level.begin(), level.end());
  return out;
}

std::vector<Task> HierarchyWiring::dependencies(Task task) const {
  std::vector<Task> out;
  std::vector<Task> stack = {task};
  while (!stack.empty()) {
    Task t = stack.back();
    stack.pop_back();
    for (Source s : inputs(t)) {
      if (auto dep = task_of(s); dep && std::find(out.begin(), out.end(), *dep) == out.end()) {
        out.push_back(*dep);
        stack.push_back(*dep);
      }
    }
  }
  return out;
}

void HierarchyWiring::validate() const {
  for (const auto& [task, sources] : inputs_) {
    if (sources.empty()) {
      throw ConfigError("model.hierarchy",
                        "encoder for '" + std::string(task_name(task)) + "' has no inputs");
    }
    for (Source s : sources) {
      auto dep = task_of(s);
      if (!dep) continue;
      if (!has(*dep) || level(*dep) >= level(task)) {
        throw ConfigError("model.hierarchy", "encoder for '" + std::string(task_name(task)) +
                                                 "' reads '" + std::string(source_name(s)) +
                                                 "', which is not on a lower level");
      }
    }
  }
}

std::string HierarchyWiring::to_string() const {
  std::string out;
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    if (l > 0) out += "|";
    for (std::size_t i = 0; i < levels_[l].size(); ++i) {
      if (i > 0) out += ",";
      out += task_name(levels_[l][i]);
    }
  }
  return out;
}

}  // namespace hmtl
