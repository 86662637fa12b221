#include "convtn/cli/commands.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "CLI11.hpp"
#include "convtn/cli/verify.hpp"
#include "convtn/crs.hpp"
#include "convtn/error.hpp"
#include "convtn/index_pattern.hpp"
#include "convtn/random.hpp"
#include "convtn/simplify.hpp"
#include "json.hpp"

namespace convtn::cli {

namespace {

std::vector<LayerConfig> layers_or_default(const CommonOptions& options) {
  if (options.config.empty()) return random_grid(kDefaultGridSize, kDefaultGridSeed);
  return load_layers(options.config);
}

std::vector<LayerConfig> required_layers(const CommonOptions& options) {
  if (options.config.empty()) throw Error(ErrorCode::ConfigError, "--config is required");
  return load_layers(options.config);
}

std::vector<Tensor> inputs_for(Op op, const ConvSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  auto inputs = random_inputs(op, spec, rng);
  if (op == Op::Forward && spec.has_bias) inputs.push_back(random_normal({spec.out_channels}, rng));
  return inputs;
}

std::span<const Tensor> network_inputs(Op op, const std::vector<Tensor>& inputs) {
  std::span<const Tensor> all(inputs);
  return op == Op::Forward ? all.first(2) : all;
}

template <class F>
double min_seconds(int repeats, F&& f) {
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(repeats, 1); ++r) {
    const auto start = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  return best;
}

void explain(std::ostream& out, const std::vector<RewriteStep>& steps, const ContractionPlan& plan) {
  for (const auto& s : steps) out << "# rewrite " << to_string(s.kind) << ": " << s.description << "\n";
  for (const auto& s : cost_report(plan).per_step) {
    out << "# step " << s.description << " flops=" << s.flops << " size=" << s.result_size << "\n";
  }
}

}  // namespace

ConvSpec default_crs_spec() { return ConvSpec{8, 1, 8, 8, {{8, 3, 1, 1, 1}, {8, 3, 1, 1, 1}}, false}; }

CrsInstance synthetic_crs_instance(const ConvSpec& spec, std::uint64_t seed, std::string name) {
  Rng rng(seed);
  CrsInstance inst{std::move(name), spec, random_uniform(spec.input_shape(), rng), Tensor(spec.output_shape())};
  for (double& v : inst.v_y.data()) v = 0.5 + rng.normal();
  return inst;
}

std::vector<Op> select_ops(const std::string& name, std::optional<Op> fallback) {
  if (name.empty()) {
    if (fallback) return {*fallback};
    return {all_ops().begin(), all_ops().end()};
  }
  if (name == "all") return {all_ops().begin(), all_ops().end()};
  const auto op = op_from_name(name);
  if (!op) throw Error(ErrorCode::ConfigError, "unknown operation '" + name + "'");
  return {*op};
}

int cmd_verify(const CommonOptions& options, std::ostream& out) {
  VerifyOptions v;
  v.simplify = options.simplify;
  v.seed = options.seed;
  v.inject_fault = options.inject_fault;
  if (!options.op.empty() && options.op != "all") v.only = select_ops(options.op, std::nullopt).front();
  const VerifyReport report = verify(layers_or_default(options), v);
  print_report(out, report);
  return report.ok() ? kSuccess : kVerificationFailure;
}

int cmd_flops(const CommonOptions& options, std::ostream& out) {
  const auto layers = required_layers(options);
  const auto ops = select_ops(options.op, Op::Forward);
  out << "layer,op,variant,flops,max_intermediate\n";
  for (const auto& layer : layers) {
    for (Op op : ops) {
      if (op == Op::UnfoldKernel && layer.spec.groups != 1) continue;
      const auto inputs = inputs_for(op, layer.spec, options.seed);
      const TensorNetwork net = build_network(op, layer.spec, network_inputs(op, inputs));
      const ContractionPlan before = plan(net);
      out << layer.name << ',' << op_name(op) << ",tn," << before.flops << ',' << before.max_intermediate << "\n";
      if (options.explain) explain(out, {}, before);
      if (!options.simplify) continue;
      const SimplifyResult simplified = simplify(net);
      const ContractionPlan after = plan(simplified.network);
      out << layer.name << ',' << op_name(op) << ",tn_simplified," << after.flops << ',' << after.max_intermediate
          << "\n";
      if (options.explain) explain(out, simplified.steps, after);
    }
  }
  return kSuccess;
}

int cmd_pattern(const DimSpec& dim, std::ostream& out) {
  const auto p = pattern(dim);
  nlohmann::json doc;
  doc["dims"] = {{"i", dim.input_size}, {"k", dim.kernel_size}, {"s", dim.stride}, {"p", dim.padding},
                 {"d", dim.dilation}};
  doc["O"] = p->output_size;
  doc["nnz"] = p->nnz();
  doc["kind"] = to_string(p->kind);
  doc["triples"] = nlohmann::json::array();
  for (const auto& t : p->triples()) doc["triples"].push_back({t[0], t[1], t[2]});
  out << doc.dump() << "\n";
  return kSuccess;
}

int cmd_bench(const CommonOptions& options, std::ostream& out) {
  const auto layers = required_layers(options);
  const auto ops = select_ops(options.op, Op::Forward);
  out << kBenchHeader << "\n";
  for (const auto& layer : layers) {
    for (Op op : ops) {
      if (op == Op::UnfoldKernel && layer.spec.groups != 1) continue;
      const auto inputs = inputs_for(op, layer.spec, options.seed);
      const TensorNetwork net = build_network(op, layer.spec, network_inputs(op, inputs));
      const TensorNetwork simplified = simplify(net).network;
      for (const TensorNetwork* variant : {&net, &simplified}) {
        const ContractionPlan p = plan(*variant);
        const double t = min_seconds(options.repeats, [&] { evaluate(*variant, p); });
        out << layer.name << ',' << op_name(op) << ',' << (variant == &net ? "tn" : "tn_simplified") << ','
            << std::scientific << std::setprecision(6) << t << std::defaultfloat << ',' << p.flops << ','
            << p.max_intermediate << "\n";
      }
      double t = std::numeric_limits<double>::quiet_NaN();
      if (has_oracle(op, layer.spec)) t = min_seconds(options.repeats, [&] { oracle_result(op, layer.spec, inputs); });
      out << layer.name << ',' << op_name(op) << ",oracle," << std::scientific << std::setprecision(6) << t
          << std::defaultfloat << ",0,0\n";
    }
  }
  return kSuccess;
}

int cmd_crs(const CommonOptions& options, const CrsOptions& crs, std::ostream& out) {
  std::vector<CrsInstance> instances;
  if (options.config.empty()) {
    instances.push_back(synthetic_crs_instance(default_crs_spec(), options.seed));
  } else {
    for (const auto& layer : load_layers(options.config)) {
      instances.push_back(synthetic_crs_instance(layer.spec, options.seed, layer.name));
    }
  }
  if (crs.seeds < 1) throw Error(ErrorCode::ConfigError, "--seeds must be positive");
  out << "layer,seed,keep_channel,keep_spatial,normalized_error,kept_c_in,kept_i1,kept_i2\n";
  for (const auto& inst : instances) {
    CrsConfig cfg = CrsConfig::spatial(inst.spec, crs.keep_spatial, 0);
    cfg.keep_probs["c_in"] = crs.keep_channel;
    const Tensor exact = weight_vjp(inst.spec, inst.x, inst.v_y).weight;
    for (int s = 0; s < crs.seeds; ++s) {
      cfg.seed = options.seed + static_cast<std::uint64_t>(s);
      const CrsResult r = crs_weight_vjp(inst.spec, inst.x, inst.v_y, cfg);
      auto kept = [&](const char* axis) {
        auto it = r.kept_fraction.find(axis);
        return it == r.kept_fraction.end() ? 1.0 : it->second;
      };
      out << inst.name << ',' << cfg.seed << ',' << crs.keep_channel << ',' << crs.keep_spatial << ','
          << std::setprecision(10) << normalized_error(exact, r.estimate) << std::setprecision(6) << ','
          << kept("c_in") << ',' << kept("i1") << ',' << kept("i2") << "\n";
    }
  }
  return kSuccess;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Convolutions as tensor networks: verification, costs, patterns, benchmarks and CRS"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string simplify = "on";
  std::string output;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config, "Layer or grid JSON file");
    cmd->add_option("--simplify", simplify, "Apply pattern simplification")->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--op", common.op, "Operation name or 'all'");
    cmd->add_option("--seed", common.seed, "Random seed");
    cmd->add_option("--output", output, "Write results to this file");
    cmd->add_flag("--explain", common.explain, "Print rewrite steps and per-step costs");
  };

  auto* verify_cmd = app.add_subcommand("verify", "Check every operation against the oracle");
  add_common(verify_cmd);
  verify_cmd->add_flag("--inject-fault", common.inject_fault)->group("");
  auto* flops_cmd = app.add_subcommand("flops", "Contraction cost before and after simplification");
  add_common(flops_cmd);
  auto* bench_cmd = app.add_subcommand("bench", "Time tensor-network and oracle evaluation");
  add_common(bench_cmd);
  bench_cmd->add_option("--repeats", common.repeats, "Repetitions; the minimum is reported")
      ->check(CLI::PositiveNumber);
  auto* pattern_cmd = app.add_subcommand("pattern", "Dump an index pattern as JSON");
  DimSpec dim;
  pattern_cmd->add_option("--i", dim.input_size, "Input size")->required();
  pattern_cmd->add_option("--k", dim.kernel_size, "Kernel size")->required();
  pattern_cmd->add_option("--s", dim.stride, "Stride");
  pattern_cmd->add_option("--p", dim.padding, "Padding");
  pattern_cmd->add_option("--d", dim.dilation, "Dilation");
  pattern_cmd->add_option("--output", output, "Write results to this file");
  auto* crs_cmd = app.add_subcommand("crs", "Per-seed errors of the sampled weight VJP as CSV");
  add_common(crs_cmd);
  CrsOptions crs;
  crs_cmd->add_option("--keep-channel", crs.keep_channel, "Keep probability of input channels");
  crs_cmd->add_option("--keep-spatial", crs.keep_spatial, "Keep probability of each spatial axis");
  crs_cmd->add_option("--seeds", crs.seeds, "Number of seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return kConfigError;
  }
  common.simplify = simplify == "on";

  try {
    std::ofstream file;
    std::ostream* sink = &out;
    if (!output.empty()) {
      file.open(output);
      if (!file) throw Error(ErrorCode::ConfigError, "cannot write '" + output + "'");
      sink = &file;
    }
    if (verify_cmd->parsed()) return cmd_verify(common, *sink);
    if (flops_cmd->parsed()) return cmd_flops(common, *sink);
    if (bench_cmd->parsed()) return cmd_bench(common, *sink);
    if (pattern_cmd->parsed()) return cmd_pattern(dim, *sink);
    if (crs_cmd->parsed()) return cmd_crs(common, crs, *sink);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace convtn::cli
