#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "pdra/instance.hpp"

namespace pdra {

enum class VarType { kBinary, kInteger, kContinuous };
enum class Sense { kLe, kGe, kEq };

struct MilpVar {
  std::string name;
  VarType type = VarType::kBinary;
  double lower = 0.0;
  double upper = 1.0;
};

struct MilpTerm {
  int var = 0;
  double coef = 0.0;
};

struct MilpRow {
  std::string name;    // "c7_0_4_1": family prefix, then indices
  std::string family;  // "C7"
  std::vector<MilpTerm> terms;
  Sense sense = Sense::kLe;
  double rhs = 0.0;
};

/// Variables x_i_j_k (arc i->j flown by drone k), u_i_k (visit order),
/// a_i_k (arrival time, TW) and z_o_k (depot assignment, MD).
struct MilpModel {
  AttributeConfig attrs;
  std::vector<MilpVar> vars;
  std::vector<MilpTerm> objective;  // maximized
  std::vector<MilpRow> rows;
  // Constraint families present, "C2" .. "C19" in numeric order. Domain-only
  // families (C8, C9, C14, C19) and the C10 time substitution are listed too.
  std::vector<std::string> families;

  /// Index of the variable called `name`, or -1.
  int find(std::string_view name) const;
  std::size_t binary_count() const;
};

/// Builds the model of the requested variant. Throws InconsistentAttributes
/// when the instance lacks what the variant needs (>= 2 depots for MD, one
/// depot otherwise, finite windows for TW).
MilpModel build_milp(const Instance& inst, const AttributeConfig& attrs);

/// CPLEX LP text. Identical models give byte-identical text.
std::string to_lp(const MilpModel& model);

struct MilpExport {
  MilpModel model;
  std::string lp;
};

MilpExport export_milp(const Instance& inst, const AttributeConfig& attrs);

struct MilpSolution {
  bool feasible = false;
  double objective = 0.0;
  std::vector<double> values;  // one per variable
  std::size_t nodes = 0;       // search nodes visited
};

/// Exhaustive search over the binaries with bound propagation; the remaining
/// integer/continuous variables must form a difference-constraint system and
/// are settled exactly. Throws ModelTooLarge above `max_binaries`.
MilpSolution enumerate_milp(const MilpModel& model, std::size_t max_binaries = 24);

}  // namespace pdra
