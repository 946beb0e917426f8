#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pdra/instance.hpp"
#include "pdra/policy.hpp"
#include "pdra/solvers.hpp"

namespace pdra {

/// (y - y_other) / y. Throws InvalidConfig unless y > 0.
double gap(double y, double y_other);

/// Rounds to `decimals` places, ties to even.
double round_half_even(double x, int decimals);

/// Percent with two decimals, ties to even: 0.044527 -> "4.45%".
std::string format_percent(double fraction);

struct GapRecord {
  std::string variant;
  std::string method;
  double value = 0.0;            // mean over the variant's instances (y_other)
  double reference_value = 0.0;  // y
  std::optional<double> gap;     // empty when y <= 0
  double time_s = 0.0;           // total for learned methods, per instance otherwise
};

enum class MethodKind { kGreedy, kRandom, kOracle, kNeural };

struct Method {
  std::string name;
  MethodKind kind = MethodKind::kGreedy;
  std::shared_ptr<const PolicyParams> params;  // neural only
};

/// "greedy", "random", "oracle" or "neural=<checkpoint path>" (the name may
/// be overridden with "<name>:<spec>"). Throws UsageError.
Method parse_method(std::string_view spec);

struct EvalOptions {
  std::string reference;  // method name; empty means the first method
  std::uint64_t seed = 0;
  OracleLimits oracle_limits;
};

struct InstanceRecord {
  std::string variant;
  std::string method;
  int instance = 0;
  double value = 0.0;
  double time_s = 0.0;
};

struct EvalResult {
  std::vector<GapRecord> records;        // per variant, methods in input order
  std::vector<InstanceRecord> instances;  // long format for plotting
};

/// Runs every method on every instance and builds the per-variant gap table.
EvalResult evaluate(const std::vector<Instance>& instances, const std::vector<Method>& methods,
                    const EvalOptions& options = {});

/// Header `variant,method,value,gap,time_s`; numbers round-trip exactly.
std::string gap_table_csv(const std::vector<GapRecord>& records);
std::vector<GapRecord> gap_table_from_csv(std::string_view text);
std::string gap_table_json(const std::vector<GapRecord>& records);
std::vector<GapRecord> gap_table_from_json(std::string_view text);

/// Long format `variant,method,instance,value,time_s`.
std::string plot_csv(const std::vector<InstanceRecord>& rows);

/// Human-readable table with percent gaps.
std::string gap_table_text(const std::vector<GapRecord>& records);

}  // namespace pdra
