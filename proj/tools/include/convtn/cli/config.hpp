#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "convtn/conv_spec.hpp"

namespace convtn::cli {

struct LayerConfig {
  std::string name;
  ConvSpec spec;
};

/// Accepts a JSON array of layers, {"layers": [...]}, or
/// {"random_grid": {"count": n, "seed": s}}. Each layer is
/// {name, batch, groups, c_in, c_out, dims: [{i, k, s, p, d}], bias}.
/// Throws ConfigError on malformed input or an empty layer list.
std::vector<LayerConfig> parse_layers(std::string_view json_text);
std::vector<LayerConfig> load_layers(const std::string& path);

/// Random valid specs: I in [1,9], K in [1,4], S in [1,3], P in [0,2],
/// D in [1,2], G in {1,2}, C_in, C_out in {2,4}, N in {1,3}; about a quarter
/// are 1d. Invalid draws are skipped.
std::vector<LayerConfig> random_grid(std::size_t count, std::uint64_t seed);

inline constexpr std::size_t kDefaultGridSize = 200;
inline constexpr std::uint64_t kDefaultGridSeed = 20240601;

}  // namespace convtn::cli
