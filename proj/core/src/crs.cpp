#include "convtn/crs.hpp"

#include <cmath>

#include "convtn/error.hpp"
#include "convtn/index_pattern.hpp"
#include "convtn/network.hpp"
#include "convtn/random.hpp"

namespace convtn {

namespace {

std::string spatial_name(std::size_t j) { return "i" + std::to_string(j + 1); }

void validate(const ConvSpec& spec, const CrsConfig& cfg) {
  spec.validate();
  for (const auto& [axis, p] : cfg.keep_probs) {
    bool known = axis == "c_in";
    for (std::size_t j = 0; j < spec.dims.size(); ++j) known = known || axis == spatial_name(j);
    if (!known) throw Error(ErrorCode::ConfigError, "cannot sample axis '" + axis + "'");
    if (!(p > 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::InvalidProbability, "keep probability " + std::to_string(p) + " for '" + axis +
                                                     "' is outside (0, 1]");
    }
  }
}

double prob(const CrsConfig& cfg, const std::string& axis) {
  auto it = cfg.keep_probs.find(axis);
  return it == cfg.keep_probs.end() ? 1.0 : it->second;
}

std::vector<Index> kept(const std::vector<bool>& mask, Index size) {
  std::vector<Index> out;
  for (Index k = 0; k < size; ++k) {
    if (mask.empty() || mask[k]) out.push_back(k);
  }
  return out;
}

}  // namespace

CrsConfig CrsConfig::channels(double p, std::uint64_t seed) { return {{{"c_in", p}}, seed}; }

CrsConfig CrsConfig::spatial(const ConvSpec& spec, double p, std::uint64_t seed) {
  CrsConfig cfg{{}, seed};
  for (std::size_t j = 0; j < spec.dims.size(); ++j) cfg.keep_probs[spatial_name(j)] = p;
  return cfg;
}

CrsMasks draw_masks(const ConvSpec& spec, const CrsConfig& cfg) {
  validate(spec, cfg);
  Rng rng(cfg.seed);
  CrsMasks masks;
  auto draw = [&](Index size, double p) {
    std::vector<bool> m(size);
    for (Index k = 0; k < size; ++k) m[k] = rng.bernoulli(p);
    return m;
  };
  if (cfg.keep_probs.count("c_in")) masks.channels = draw(spec.in_channels, prob(cfg, "c_in"));
  masks.spatial.resize(spec.dims.size());
  for (std::size_t j = 0; j < spec.dims.size(); ++j) {
    if (cfg.keep_probs.count(spatial_name(j))) {
      masks.spatial[j] = draw(spec.dims[j].input_size, prob(cfg, spatial_name(j)));
    }
  }
  return masks;
}

Tensor crs_weight_vjp_masked(const ConvSpec& spec, const Tensor& x, const Tensor& v_y, const CrsMasks& masks,
                             const CrsConfig& cfg) {
  validate(spec, cfg);
  if (x.shape() != spec.input_shape() || v_y.shape() != spec.output_shape()) {
    throw Error(ErrorCode::ShapeMismatch, "inputs do not match " + to_string(spec));
  }
  const std::size_t d = spec.dims.size();
  Tensor estimate(spec.kernel_shape());

  double rescale = 1.0 / prob(cfg, "c_in");
  Tensor xs = x;
  std::vector<Tensor> patterns;
  for (std::size_t j = 0; j < d; ++j) {
    const std::vector<bool> mask = j < masks.spatial.size() ? masks.spatial[j] : std::vector<bool>{};
    const auto keep = kept(mask, spec.dims[j].input_size);
    if (keep.empty()) return estimate;
    xs = xs.index_select(static_cast<Index>(2 + j), keep);
    patterns.push_back(pattern(spec.dims[j])->table.index_select(0, keep));
    rescale /= prob(cfg, spatial_name(j));
  }

  std::string eq = "n c_in";
  for (std::size_t j = 0; j < d; ++j) eq += " i" + std::to_string(j + 1);
  for (std::size_t j = 0; j < d; ++j) {
    const std::string n = std::to_string(j + 1);
    eq += ", i" + n + " o" + n + " k" + n;
  }
  eq += ", n c_out";
  for (std::size_t j = 0; j < d; ++j) eq += " o" + std::to_string(j + 1);
  eq += " -> c_out c_in";
  for (std::size_t j = 0; j < d; ++j) eq += " k" + std::to_string(j + 1);

  const Index cin_g = spec.in_per_group(), cout_g = spec.out_per_group();
  const Index ksize = shape_numel(spec.kernel_sizes());
  for (Index g = 0; g < spec.groups; ++g) {
    std::vector<Index> channels, local;
    for (Index c = 0; c < cin_g; ++c) {
      const Index global = g * cin_g + c;
      if (masks.channels.empty() || masks.channels[global]) {
        channels.push_back(global);
        local.push_back(c);
      }
    }
    if (channels.empty()) continue;
    std::vector<Tensor> ops{xs.index_select(1, channels)};
    ops.insert(ops.end(), patterns.begin(), patterns.end());
    ops.push_back(v_y.narrow(1, g * cout_g, cout_g));
    const Tensor part = evaluate(make_network(eq, std::move(ops)));
    const auto src = part.data();
    auto dst = estimate.data();
    for (Index co = 0; co < cout_g; ++co)
      for (std::size_t m = 0; m < local.size(); ++m)
        for (Index k = 0; k < ksize; ++k) {
          dst[((g * cout_g + co) * cin_g + local[m]) * ksize + k] =
              rescale * src[(co * static_cast<Index>(local.size()) + static_cast<Index>(m)) * ksize + k];
        }
  }
  return estimate;
}

CrsResult crs_weight_vjp(const ConvSpec& spec, const Tensor& x, const Tensor& v_y, const CrsConfig& cfg) {
  const CrsMasks masks = draw_masks(spec, cfg);
  CrsResult result{crs_weight_vjp_masked(spec, x, v_y, masks, cfg), {}};
  auto fraction = [](const std::vector<bool>& m) {
    if (m.empty()) return 1.0;
    Index count = 0;
    for (bool b : m) count += b;
    return static_cast<double>(count) / static_cast<double>(m.size());
  };
  result.kept_fraction["c_in"] = fraction(masks.channels);
  for (std::size_t j = 0; j < spec.dims.size(); ++j) result.kept_fraction[spatial_name(j)] = fraction(masks.spatial[j]);
  return result;
}

double normalized_error(const Tensor& exact, const Tensor& estimate) {
  const double denom = norm(exact);
  if (denom == 0.0) throw Error(ErrorCode::DivisionByZero, "exact gradient is zero");
  return norm(exact - estimate) / denom;
}

}  // namespace convtn
