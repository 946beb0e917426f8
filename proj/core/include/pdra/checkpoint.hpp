#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "pdra/policy.hpp"

namespace pdra {

// JSON checkpoint: format tag, version, configuration, expansion flag and
// every parameter with its shape. Doubles round-trip exactly.

std::string checkpoint_to_json(const PolicyParams& params);
/// Throws ParseError, or ShapeMismatch when tensors disagree with the config.
PolicyParams checkpoint_from_json(std::string_view text);

void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_checkpoint(const std::filesystem::path& path);

}  // namespace pdra
