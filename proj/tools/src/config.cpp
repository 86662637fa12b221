#include "convtn/cli/config.hpp"

#include <fstream>
#include <sstream>

#include "convtn/error.hpp"
#include "convtn/random.hpp"
#include "json.hpp"

namespace convtn::cli {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& why) { throw Error(ErrorCode::ConfigError, why); }

Index get_count(const json& obj, const char* key, Index fallback, bool required) {
  if (!obj.contains(key)) {
    if (required) config_error(std::string("missing field '") + key + "'");
    return fallback;
  }
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) config_error(std::string("field '") + key + "' must be an integer");
  return v.get<Index>();
}

LayerConfig parse_layer(const json& obj, std::size_t position) {
  if (!obj.is_object()) config_error("layer " + std::to_string(position) + " is not an object");
  LayerConfig layer;
  layer.name = obj.value("name", "layer" + std::to_string(position));
  ConvSpec& s = layer.spec;
  s.batch = get_count(obj, "batch", 1, false);
  s.groups = get_count(obj, "groups", 1, false);
  s.in_channels = get_count(obj, "c_in", 0, true);
  s.out_channels = get_count(obj, "c_out", 0, true);
  s.has_bias = obj.value("bias", false);
  if (!obj.contains("dims") || !obj.at("dims").is_array()) config_error("layer '" + layer.name + "' needs dims");
  for (const auto& d : obj.at("dims")) {
    if (!d.is_object()) config_error("layer '" + layer.name + "' has a malformed dim");
    s.dims.push_back(DimSpec{get_count(d, "i", 0, true), get_count(d, "k", 0, true), get_count(d, "s", 1, false),
                             get_count(d, "p", 0, false), get_count(d, "d", 1, false)});
  }
  try {
    s.validate();
  } catch (const Error& e) {
    config_error("layer '" + layer.name + "': " + e.what());
  }
  return layer;
}

}  // namespace

std::vector<LayerConfig> parse_layers(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    config_error(std::string("invalid JSON: ") + e.what());
  }
  std::vector<LayerConfig> layers;
  try {
    if (doc.is_object() && doc.contains("random_grid")) {
      const auto& grid = doc.at("random_grid");
      const Index count = get_count(grid, "count", static_cast<Index>(kDefaultGridSize), false);
      const Index seed = get_count(grid, "seed", static_cast<Index>(kDefaultGridSeed), false);
      if (count < 0) config_error("grid count must be nonnegative");
      layers = random_grid(static_cast<std::size_t>(count), static_cast<std::uint64_t>(seed));
    } else {
      const json* list = &doc;
      if (doc.is_object()) {
        if (!doc.contains("layers")) config_error("expected 'layers' or 'random_grid'");
        list = &doc.at("layers");
      }
      if (!list->is_array()) config_error("layers must be an array");
      for (std::size_t k = 0; k < list->size(); ++k) layers.push_back(parse_layer((*list)[k], k));
    }
  } catch (const json::exception& e) {
    config_error(std::string("malformed config: ") + e.what());
  }
  if (layers.empty()) config_error("the grid is empty");
  return layers;
}

std::vector<LayerConfig> load_layers(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_layers(text.str());
}

std::vector<LayerConfig> random_grid(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LayerConfig> out;
  while (out.size() < count) {
    ConvSpec s;
    s.batch = rng.bernoulli(0.5) ? 1 : 3;
    s.groups = rng.bernoulli(0.5) ? 1 : 2;
    s.in_channels = rng.bernoulli(0.5) ? 2 : 4;
    s.out_channels = rng.bernoulli(0.5) ? 2 : 4;
    s.has_bias = rng.bernoulli(0.5);
    const int dims = rng.bernoulli(0.25) ? 1 : 2;
    for (int j = 0; j < dims; ++j) {
      s.dims.push_back(DimSpec{rng.integer(1, 9), rng.integer(1, 4), rng.integer(1, 3), rng.integer(0, 2),
                               rng.integer(1, 2)});
    }
    try {
      s.validate();
    } catch (const Error&) {
      continue;
    }
    out.push_back({"grid" + std::to_string(out.size()), s});
  }
  return out;
}

}  // namespace convtn::cli
