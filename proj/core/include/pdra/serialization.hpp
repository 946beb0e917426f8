#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "pdra/env.hpp"
#include "pdra/instance.hpp"
#include "pdra/network.hpp"
#include "pdra/validator.hpp"

namespace pdra {

// JSON forms. Infinite time windows are written as null. Readers throw
// ParseError on malformed documents and the usual network/instance errors on
// invalid content.

std::string network_to_json(const RoadNetwork& net);
RoadNetwork network_from_json(std::string_view text);

/// Write-only view of the transformed graph: nodes with kind/value/window-free
/// attributes, road half-arcs and (optionally) the auxiliary complete graph.
std::string transformed_to_json(const TransformedNetwork& tn, bool include_aux_arcs = true);

std::string instance_to_json(const Instance& inst);
Instance instance_from_json(std::string_view text);

std::string solution_to_json(const Solution& sol);
Solution solution_from_json(std::string_view text);

std::string report_to_json(const ValidationReport& report);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace pdra
