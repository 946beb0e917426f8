#include "pdra/milp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>

#include <fmt/core.h>

#include "pdra/error.hpp"

namespace pdra {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = 1e-9;

struct Arc {
  int from;
  int to;
  double time;
};

class Builder {
 public:
  Builder(const Instance& inst, const AttributeConfig& attrs) : inst_(inst), attrs_(attrs) {
    model_.attrs = attrs;
  }

  MilpModel build() {
    const auto& net = inst_.network;
    const int n = static_cast<int>(net.size());
    const int drones = inst_.drones;

    std::vector<char> is_depot(static_cast<std::size_t>(n), 0);
    for (int o : inst_.depots) is_depot[o] = 1;

    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (auto t = net.travel_time(i, j)) {
          double time = *t;
          // Open routes: the closing move back to a depot is free.
          if (attrs_.open_route && is_depot[j] && !net.is_artificial(i)) time = 0.0;
          arcs_.push_back({i, j, time});
        } else if (attrs_.open_route && is_depot[j] && net.is_artificial(i)) {
          // An open route may stop at p; its closing arc finishes the link.
          arcs_.push_back({i, j, net.artificial(i).half_time});
        }
      }
    }

    // x, then u, then a, then z, each drone-major.
    x_.assign(static_cast<std::size_t>(drones), {});
    for (int k = 0; k < drones; ++k) {
      for (const auto& arc : arcs_) {
        x_[k].push_back(add_var(fmt::format("x_{}_{}_{}", arc.from, arc.to, k), VarType::kBinary, 0, 1));
      }
    }
    u_.assign(static_cast<std::size_t>(drones), {});
    for (int k = 0; k < drones; ++k) {
      for (int i = 0; i < n; ++i) {
        u_[k].push_back(add_var(fmt::format("u_{}_{}", i, k), VarType::kInteger, 1, n));
      }
    }
    if (attrs_.time_windows) {
      a_.assign(static_cast<std::size_t>(drones), {});
      for (int k = 0; k < drones; ++k) {
        for (int i = 0; i < n; ++i) {
          a_[k].push_back(add_var(fmt::format("a_{}_{}", i, k), VarType::kContinuous, 0, kInf));
        }
      }
    }
    if (attrs_.multi_depot) {
      z_.assign(static_cast<std::size_t>(drones), {});
      for (int k = 0; k < drones; ++k) {
        for (int o : inst_.depots) {
          z_[k].push_back(add_var(fmt::format("z_{}_{}", o, k), VarType::kBinary, 0, 1));
        }
      }
    }

    // C1: value collected when leaving an artificial node.
    for (int k = 0; k < drones; ++k) {
      for (std::size_t e = 0; e < arcs_.size(); ++e) {
        if (net.is_artificial(arcs_[e].from)) {
          model_.objective.push_back({x_[k][e], net.value(arcs_[e].from)});
        }
      }
    }

    // C2
    for (int p = static_cast<int>(net.original_count()); p < n; ++p) {
      std::vector<MilpTerm> terms;
      for (int k = 0; k < drones; ++k) {
        for (std::size_t e = 0; e < arcs_.size(); ++e) {
          if (arcs_[e].from == p) terms.push_back({x_[k][e], 1.0});
        }
      }
      add_row(fmt::format("c2_{}", p), "C2", std::move(terms), Sense::kLe, 1.0);
    }
    // C3
    for (int k = 0; k < drones; ++k) {
      for (int i = 0; i < n; ++i) {
        std::vector<MilpTerm> terms;
        for (std::size_t e = 0; e < arcs_.size(); ++e) {
          if (arcs_[e].to == i) terms.push_back({x_[k][e], 1.0});
        }
        for (std::size_t e = 0; e < arcs_.size(); ++e) {
          if (arcs_[e].from == i) terms.push_back({x_[k][e], -1.0});
        }
        add_row(fmt::format("c3_{}_{}", i, k), "C3", std::move(terms), Sense::kEq, 0.0);
      }
    }
    // C4: at most one departure from the depot set, matched by one return.
    for (int k = 0; k < drones; ++k) {
      std::vector<MilpTerm> out;
      std::vector<MilpTerm> balance;
      for (std::size_t e = 0; e < arcs_.size(); ++e) {
        if (is_depot[arcs_[e].from]) {
          out.push_back({x_[k][e], 1.0});
          balance.push_back({x_[k][e], -1.0});
        }
        if (is_depot[arcs_[e].to]) balance.push_back({x_[k][e], 1.0});
      }
      add_row(fmt::format("c4_out_{}", k), "C4", std::move(out), Sense::kLe, 1.0);
      add_row(fmt::format("c4_in_{}", k), "C4", merge(std::move(balance)), Sense::kEq, 0.0);
    }
    // C5, C6 (the max over drones split into one row per drone)
    for (int k = 0; k < drones; ++k) {
      std::vector<MilpTerm> terms;
      for (std::size_t e = 0; e < arcs_.size(); ++e) {
        if (arcs_[e].time != 0.0) terms.push_back({x_[k][e], arcs_[e].time});
      }
      add_row(fmt::format("c5_{}", k), "C5", terms, Sense::kLe, inst_.battery);
      add_row(fmt::format("c6_{}", k), "C6", std::move(terms), Sense::kLe, inst_.p_max);
    }
    // C7: MTZ on every arc that does not close a tour at a depot.
    const double big_m = n;
    for (int k = 0; k < drones; ++k) {
      for (std::size_t e = 0; e < arcs_.size(); ++e) {
        const auto& arc = arcs_[e];
        if (is_depot[arc.to]) continue;
        add_row(fmt::format("c7_{}_{}_{}", arc.from, arc.to, k), "C7",
                {{u_[k][arc.from], 1.0}, {u_[k][arc.to], -1.0}, {x_[k][e], big_m}}, Sense::kLe,
                big_m - 1.0);
      }
      // Arcs into depots skip MTZ. A closed route may still turn back at p to
      // its depot only if the return through the far endpoint fits the budget.
      if (attrs_.open_route) continue;
      for (int o : inst_.depots) {
        for (int p : net.incident(o)) {
          const double h = net.artificial(p).half_time;
          const int far = net.far_endpoint(p, o);
          const double via_far = 2.0 * h + net.direct_time(far, o);
          if (!is_depot[far] && via_far <= inst_.budget() + kTimeTolerance) continue;
          std::vector<MilpTerm> terms;
          for (std::size_t e = 0; e < arcs_.size(); ++e) {
            if ((arcs_[e].from == o && arcs_[e].to == p) || (arcs_[e].from == p && arcs_[e].to == o)) {
              terms.push_back({x_[k][e], 1.0});
            }
          }
          add_row(fmt::format("c7_uturn_{}_{}_{}", o, p, k), "C7", std::move(terms), Sense::kLe, 1.0);
        }
      }
    }
    mark("C8");
    mark("C9");
    if (attrs_.open_route) mark("C10");

    if (attrs_.time_windows) {
      double max_time = 0.0;
      for (const auto& arc : arcs_) max_time = std::max(max_time, arc.time);
      const double tw_m = inst_.p_max + max_time;
      for (int k = 0; k < drones; ++k) {
        for (int i = 0; i < n; ++i) {
          if (inst_.latest[i] == kUnbounded) continue;
          add_row(fmt::format("c11_{}_{}", i, k), "C11", {{a_[k][i], 1.0}}, Sense::kLe,
                  inst_.latest[i]);
        }
      }
      for (int k = 0; k < drones; ++k) {
        for (std::size_t e = 0; e < arcs_.size(); ++e) {
          const auto& arc = arcs_[e];
          if (is_depot[arc.to]) continue;
          add_row(fmt::format("c12_{}_{}_{}", arc.from, arc.to, k), "C12",
                  {{a_[k][arc.to], 1.0}, {a_[k][arc.from], -1.0}, {x_[k][e], -tw_m}}, Sense::kGe,
                  arc.time - tw_m);
        }
      }
      for (int k = 0; k < drones; ++k) {
        for (int o : inst_.depots) {
          add_row(fmt::format("c13_{}_{}", o, k), "C13", {{a_[k][o], 1.0}}, Sense::kEq, 0.0);
        }
      }
      mark("C14");
    }

    if (attrs_.multi_depot) {
      const auto depots = inst_.depots.size();
      for (int k = 0; k < drones; ++k) {
        std::vector<MilpTerm> terms;
        for (std::size_t d = 0; d < depots; ++d) terms.push_back({z_[k][d], 1.0});
        add_row(fmt::format("c15_{}", k), "C15", std::move(terms), Sense::kLe, 1.0);
      }
      for (int k = 0; k < drones; ++k) {
        for (std::size_t d = 0; d < depots; ++d) {
          const int o = inst_.depots[d];
          std::vector<MilpTerm> terms;
          for (std::size_t e = 0; e < arcs_.size(); ++e) {
            if (arcs_[e].from == o) terms.push_back({x_[k][e], 1.0});
          }
          terms.push_back({z_[k][d], -1.0});
          add_row(fmt::format("c16_{}_{}", o, k), "C16", std::move(terms), Sense::kLe, 0.0);
        }
      }
      for (std::size_t d = 0; d < depots; ++d) {
        std::vector<MilpTerm> terms;
        for (int k = 0; k < drones; ++k) terms.push_back({z_[k][d], 1.0});
        add_row(fmt::format("c17_{}", inst_.depots[d]), "C17", std::move(terms), Sense::kLe,
                inst_.depot_capacity[d]);
      }
      for (int k = 0; k < drones; ++k) {
        for (std::size_t d = 0; d < depots; ++d) {
          const int o = inst_.depots[d];
          std::vector<MilpTerm> terms;
          for (std::size_t e = 0; e < arcs_.size(); ++e) {
            if (arcs_[e].to == o) terms.push_back({x_[k][e], 1.0});
          }
          terms.push_back({z_[k][d], -1.0});
          add_row(fmt::format("c18_{}_{}", o, k), "C18", std::move(terms), Sense::kEq, 0.0);
        }
      }
      mark("C19");
    }

    std::sort(model_.families.begin(), model_.families.end(),
              [](const std::string& a, const std::string& b) {
                return std::stoi(a.substr(1)) < std::stoi(b.substr(1));
              });
    return std::move(model_);
  }

 private:
  int add_var(std::string name, VarType type, double lower, double upper) {
    model_.vars.push_back({std::move(name), type, lower, upper});
    return static_cast<int>(model_.vars.size()) - 1;
  }

  void add_row(std::string name, const char* family, std::vector<MilpTerm> terms, Sense sense,
               double rhs) {
    mark(family);
    model_.rows.push_back({std::move(name), family, std::move(terms), sense, rhs});
  }

  void mark(const std::string& family) {
    if (std::find(model_.families.begin(), model_.families.end(), family) == model_.families.end()) {
      model_.families.push_back(family);
    }
  }

  // Combines repeated variables (depot self-terms cancel in the C4 balance).
  static std::vector<MilpTerm> merge(std::vector<MilpTerm> terms) {
    std::map<int, double> sum;
    for (const auto& t : terms) sum[t.var] += t.coef;
    std::vector<MilpTerm> out;
    for (const auto& [v, c] : sum) {
      if (c != 0.0) out.push_back({v, c});
    }
    return out;
  }

  const Instance& inst_;
  AttributeConfig attrs_;
  MilpModel model_;
  std::vector<Arc> arcs_;
  std::vector<std::vector<int>> x_, u_, a_, z_;
};

std::string number(double v) { return fmt::format("{}", v); }

void write_terms(std::string& out, const MilpModel& model, const std::vector<MilpTerm>& terms) {
  if (terms.empty()) {
    out += " 0";
    return;
  }
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& t = terms[i];
    if (i > 0 && i % 8 == 0) out += "\n  ";
    const double mag = std::abs(t.coef);
    out += t.coef < 0 ? " - " : (i == 0 ? " " : " + ");
    if (mag != 1.0) out += number(mag) + " ";
    out += model.vars[t.var].name;
  }
}

}  // namespace

int MilpModel::find(std::string_view name) const {
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::size_t MilpModel::binary_count() const {
  return static_cast<std::size_t>(std::count_if(
      vars.begin(), vars.end(), [](const MilpVar& v) { return v.type == VarType::kBinary; }));
}

MilpModel build_milp(const Instance& inst, const AttributeConfig& attrs) {
  validate_instance(inst);
  if (attrs.multi_depot && inst.depots.size() < 2) {
    fail(ErrorCode::kInconsistentAttributes, "multi-depot model needs at least two depots");
  }
  if (!attrs.multi_depot && inst.depots.size() != 1) {
    fail(ErrorCode::kInconsistentAttributes,
         fmt::format("single-depot model for an instance with {} depots", inst.depots.size()));
  }
  if (attrs.time_windows &&
      std::none_of(inst.latest.begin(), inst.latest.end(), [](double l) { return l != kUnbounded; })) {
    fail(ErrorCode::kInconsistentAttributes, "time-window model for an instance without windows");
  }
  return Builder(inst, attrs).build();
}

std::string to_lp(const MilpModel& model) {
  std::string out;
  out += fmt::format("\\ PDRA-{} drone routing model\n", model.attrs.variant_name());
  out += "Maximize\n obj:";
  write_terms(out, model, model.objective);
  out += "\nSubject To\n";
  for (const auto& row : model.rows) {
    out += " " + row.name + ":";
    write_terms(out, model, row.terms);
    out += row.sense == Sense::kLe ? " <= " : row.sense == Sense::kGe ? " >= " : " = ";
    out += number(row.rhs) + "\n";
  }
  const auto has = [&](const char* f) {
    return std::find(model.families.begin(), model.families.end(), f) != model.families.end();
  };
  if (has("C10")) out += "\\ C10 arcs entering a depot from an original node take zero time\n";
  out += "Bounds\n";
  out += "\\ C9\n";
  for (const auto& v : model.vars) {
    if (v.type == VarType::kInteger) {
      out += fmt::format(" {} <= {} <= {}\n", number(v.lower), v.name, number(v.upper));
    }
  }
  if (has("C14")) {
    out += "\\ C14\n";
    for (const auto& v : model.vars) {
      if (v.type == VarType::kContinuous) out += fmt::format(" {} >= {}\n", v.name, number(v.lower));
    }
  }
  out += "Binary\n\\ C8\n";
  for (const auto& v : model.vars) {
    if (v.type == VarType::kBinary && v.name[0] == 'x') out += " " + v.name + "\n";
  }
  if (has("C19")) {
    out += "\\ C19\n";
    for (const auto& v : model.vars) {
      if (v.type == VarType::kBinary && v.name[0] == 'z') out += " " + v.name + "\n";
    }
  }
  out += "General\n";
  for (const auto& v : model.vars) {
    if (v.type == VarType::kInteger) out += " " + v.name + "\n";
  }
  out += "End\n";
  return out;
}

MilpExport export_milp(const Instance& inst, const AttributeConfig& attrs) {
  MilpExport e{build_milp(inst, attrs), {}};
  e.lp = to_lp(e.model);
  return e;
}

namespace {

// y_to - y_from <= weight, with index `vars` standing for the constant 0.
struct Edge {
  int from;
  int to;
  double weight;
};

class Enumerator {
 public:
  explicit Enumerator(const MilpModel& model) : model_(model) {
    const auto nv = model.vars.size();
    slot_.assign(nv, -1);
    for (std::size_t v = 0; v < nv; ++v) {
      if (model.vars[v].type == VarType::kBinary) {
        binaries_.push_back(static_cast<int>(v));
      } else {
        slot_[v] = static_cast<int>(others_.size());
        others_.push_back(static_cast<int>(v));
      }
    }
    value_.assign(nv, 0.0);
    fixed_.assign(nv, 0);
    incidence_.assign(nv, {});
    lo_.resize(model.rows.size());
    hi_.resize(model.rows.size());
    for (std::size_t r = 0; r < model.rows.size(); ++r) {
      lo_[r] = hi_[r] = 0.0;
      for (const auto& t : model.rows[r].terms) {
        incidence_[t.var].push_back({static_cast<int>(r), t.coef});
        const auto& var = model.vars[t.var];
        lo_[r] += t.coef > 0 ? t.coef * var.lower : t.coef * var.upper;
        hi_[r] += t.coef > 0 ? t.coef * var.upper : t.coef * var.lower;
      }
    }
    obj_.assign(nv, 0.0);
    for (const auto& t : model.objective) obj_[t.var] += t.coef;
    // Optimistic gain still available from unfixed binaries.
    for (int v : binaries_) remaining_ += std::max(0.0, obj_[v]);
  }

  MilpSolution run() {
    dfs(0, 0.0);
    best_.nodes = nodes_;
    return best_;
  }

 private:
  static bool row_ok(const MilpRow& row, double lo, double hi) {
    switch (row.sense) {
      case Sense::kLe: return lo <= row.rhs + kEps;
      case Sense::kGe: return hi >= row.rhs - kEps;
      case Sense::kEq: return lo <= row.rhs + kEps && hi >= row.rhs - kEps;
    }
    return true;
  }

  // Fixes binary v to `val`; returns false when some row can no longer hold.
  bool fix(int v, double val) {
    fixed_[v] = 1;
    value_[v] = val;
    bool ok = true;
    for (const auto& [r, c] : incidence_[v]) {
      // Interval of c * v shrinks from [min(0,c), max(0,c)] to c * val.
      lo_[r] += c * val - std::min(0.0, c);
      hi_[r] += c * val - std::max(0.0, c);
      if (!row_ok(model_.rows[r], lo_[r], hi_[r])) ok = false;
    }
    return ok;
  }

  void unfix(int v) {
    const double val = value_[v];
    for (const auto& [r, c] : incidence_[v]) {
      lo_[r] -= c * val - std::min(0.0, c);
      hi_[r] -= c * val - std::max(0.0, c);
    }
    fixed_[v] = 0;
    value_[v] = 0.0;
  }

  void dfs(std::size_t depth, double objective) {
    ++nodes_;
    if (best_.feasible && objective + remaining_ <= best_.objective + kEps) return;
    if (depth == binaries_.size()) {
      leaf(objective);
      return;
    }
    const int v = binaries_[depth];
    const double gain = std::max(0.0, obj_[v]);
    remaining_ -= gain;
    for (double val : {1.0, 0.0}) {
      if (fix(v, val)) dfs(depth + 1, objective + val * obj_[v]);
      unfix(v);
    }
    remaining_ += gain;
  }

  void leaf(double objective) {
    // Rows over the continuous/integer variables become difference constraints.
    const int zero = static_cast<int>(others_.size());
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < others_.size(); ++i) {
      const auto& var = model_.vars[others_[i]];
      if (std::isfinite(var.upper)) edges.push_back({zero, static_cast<int>(i), var.upper});
      if (std::isfinite(var.lower)) edges.push_back({static_cast<int>(i), zero, -var.lower});
    }
    for (const auto& row : model_.rows) {
      double rhs = row.rhs;
      std::vector<MilpTerm> rest;
      for (const auto& t : row.terms) {
        if (slot_[t.var] < 0) {
          rhs -= t.coef * value_[t.var];
        } else {
          rest.push_back(t);
        }
      }
      if (rest.empty()) continue;  // already enforced by propagation
      auto add = [&](double sign) {
        // sign * (sum) <= sign * rhs
        const double r = sign * rhs;
        if (rest.size() == 1) {
          const double c = sign * rest[0].coef;
          const int y = slot_[rest[0].var];
          if (c > 0) edges.push_back({zero, y, r / c});
          else edges.push_back({y, zero, r / -c});
        } else if (rest.size() == 2 && rest[0].coef == -rest[1].coef) {
          const double c = sign * rest[0].coef;
          const int p = slot_[rest[0].var];
          const int q = slot_[rest[1].var];
          // c*(y_p - y_q) <= r
          if (c > 0) edges.push_back({q, p, r / c});
          else edges.push_back({p, q, r / -c});
        } else {
          fail(ErrorCode::kInvalidConfig,
               fmt::format("row {} is not a difference constraint", row.name));
        }
      };
      if (row.sense != Sense::kGe) add(1.0);
      if (row.sense != Sense::kLe) add(-1.0);
    }
    // Bellman-Ford from a virtual source joined to every node with weight 0.
    const int count = zero + 1;
    std::vector<double> dist(static_cast<std::size_t>(count), 0.0);
    for (int pass = 0; pass <= count; ++pass) {
      bool changed = false;
      for (const auto& e : edges) {
        if (dist[e.from] + e.weight < dist[e.to] - kEps) {
          dist[e.to] = dist[e.from] + e.weight;
          changed = true;
        }
      }
      if (!changed) break;
      if (pass == count) return;  // negative cycle
    }
    best_.feasible = true;
    best_.objective = objective;
    best_.values = value_;
    for (std::size_t i = 0; i < others_.size(); ++i) {
      double y = dist[i] - dist[zero];
      if (model_.vars[others_[i]].type == VarType::kInteger) y = std::round(y);
      best_.values[others_[i]] = y;
    }
  }

  const MilpModel& model_;
  std::vector<int> binaries_;
  std::vector<int> others_;
  std::vector<int> slot_;
  std::vector<double> value_;
  std::vector<char> fixed_;
  std::vector<std::vector<std::pair<int, double>>> incidence_;
  std::vector<double> lo_, hi_;
  std::vector<double> obj_;
  double remaining_ = 0.0;
  std::size_t nodes_ = 0;
  MilpSolution best_;
};

}  // namespace

MilpSolution enumerate_milp(const MilpModel& model, std::size_t max_binaries) {
  const auto binaries = model.binary_count();
  if (binaries > max_binaries) {
    fail(ErrorCode::kModelTooLarge,
         fmt::format("{} binary variables exceed the enumeration limit {}", binaries, max_binaries));
  }
  return Enumerator(model).run();
}

}  // namespace pdra
