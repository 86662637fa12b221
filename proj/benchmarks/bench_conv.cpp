#include <benchmark/benchmark.h>

#include <memory>
#include <string>
#include <vector>

#include "convtn/cli/config.hpp"
#include "convtn/cli/verify.hpp"
#include "convtn/conv_ops.hpp"
#include "convtn/random.hpp"
#include "convtn/simplify.hpp"

using namespace convtn;

namespace {

struct Case {
  ConvSpec spec;
  Op op;
  std::vector<Tensor> inputs;
  TensorNetwork network;
  ContractionPlan network_plan;
  TensorNetwork simplified;
  ContractionPlan simplified_plan;
};

std::shared_ptr<Case> make_case(const ConvSpec& spec, Op op) {
  auto c = std::make_shared<Case>();
  Rng rng(7);
  c->spec = spec;
  c->op = op;
  c->inputs = random_inputs(op, spec, rng);
  c->network = build_network(op, spec, c->inputs);
  c->network_plan = plan(c->network);
  c->simplified = simplify(c->network).network;
  c->simplified_plan = plan(c->simplified);
  return c;
}

void run_tn(benchmark::State& state, const std::shared_ptr<Case>& c, bool simplified) {
  const TensorNetwork& net = simplified ? c->simplified : c->network;
  const ContractionPlan& p = simplified ? c->simplified_plan : c->network_plan;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(net, p));
  state.counters["flops"] = static_cast<double>(p.flops);
  state.counters["max_intermediate"] = static_cast<double>(p.max_intermediate);
}

void run_oracle(benchmark::State& state, const std::shared_ptr<Case>& c) {
  for (auto _ : state) benchmark::DoNotOptimize(cli::oracle_result(c->op, c->spec, c->inputs));
}

void register_all() {
  const std::vector<Op> ops{Op::Forward, Op::WeightVjp, Op::InputVjp, Op::KfacExpand, Op::KfacReduce};
  std::vector<cli::LayerConfig> layers = cli::load_layers(CONVTN_FIXTURE_DIR "/layers.json");
  for (const auto& l : cli::load_layers(CONVTN_FIXTURE_DIR "/convnext_like.json")) layers.push_back(l);
  for (const auto& layer : layers)
    for (Op op : ops) {
      const auto c = make_case(layer.spec, op);
      const std::string base = layer.name + "/" + op_name(op);
      benchmark::RegisterBenchmark((base + "/tn").c_str(), [c](benchmark::State& s) { run_tn(s, c, false); });
      benchmark::RegisterBenchmark((base + "/tn_simplified").c_str(),
                                   [c](benchmark::State& s) { run_tn(s, c, true); });
      if (cli::has_oracle(op, layer.spec))
        benchmark::RegisterBenchmark((base + "/oracle").c_str(), [c](benchmark::State& s) { run_oracle(s, c); });
    }
}

}  // namespace

int main(int argc, char** argv) {
  register_all();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
