#include "convtn/cli/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "convtn/error.hpp"
#include "convtn/index_pattern.hpp"
#include "convtn/oracle.hpp"
#include "convtn/random.hpp"
#include "convtn/simplify.hpp"

namespace convtn::cli {

namespace {

Index weight_count(const ConvSpec& spec) { return shape_numel(spec.kernel_shape()); }

bool is_ggn(Op op) { return op == Op::GgnGram || op == Op::GgnDiagonal || op == Op::PerSampleGgnDiagonal; }

bool any_structured(const ConvSpec& spec) {
  for (const auto& d : spec.dims) {
    if (classify(d) != PatternKind::General) return true;
  }
  return false;
}

// One set of random tensors per layer, shared by all operations.
struct LayerTensors {
  Tensor x, w, v_y, v_x, v_w, s_y, d_y, y_like, v_unf;
  std::optional<Tensor> bias;

  LayerTensors(const ConvSpec& spec, Rng& rng) {
    x = random_normal(spec.input_shape(), rng);
    w = random_normal(spec.kernel_shape(), rng);
    v_y = random_normal(spec.output_shape(), rng);
    v_x = random_normal(spec.input_shape(), rng);
    v_w = random_normal(spec.kernel_shape(), rng);
    s_y = random_normal(input_shapes(Op::GgnGram, spec)[1], rng);
    d_y = random_uniform(spec.output_shape(), rng);
    y_like = random_normal(input_shapes(Op::FoldOutput, spec)[0], rng);
    v_unf = random_normal(spec.unfolded_shape(), rng);
    if (spec.has_bias) bias = random_normal({spec.out_channels}, rng);
  }

  std::vector<Tensor> for_op(Op op) const {
    switch (op) {
      case Op::Forward:
        return bias ? std::vector<Tensor>{x, w, *bias} : std::vector<Tensor>{x, w};
      case Op::UnfoldInput:
      case Op::Im2colJvp:
        return {op == Op::Im2colJvp ? v_x : x};
      case Op::UnfoldKernel: return {w};
      case Op::FoldOutput: return {y_like};
      case Op::TransposeUnfold:
      case Op::KfacExpandTranspose:
      case Op::KfacReduceTranspose: return {v_y};
      case Op::WeightVjp:
      case Op::PerSampleWeightVjp: return {x, v_y};
      case Op::InputVjp: return {w, v_y};
      case Op::WeightJvp: return {x, v_w};
      case Op::InputJvp: return {w, v_x};
      case Op::Im2colVjp: return {v_unf};
      case Op::KfacExpand:
      case Op::KfacReduce: return {x};
      case Op::GgnGram:
      case Op::GgnDiagonal:
      case Op::PerSampleGgnDiagonal: return {x, s_y};
      case Op::HesscaleWeightDiag: return {x, d_y};
      case Op::HesscaleInputDiag: return {w, d_y};
    }
    return {};
  }
};

class Tally {
 public:
  CheckStats& get(const std::string& name) {
    auto it = index_.find(name);
    if (it != index_.end()) return checks_[it->second];
    index_[name] = checks_.size();
    checks_.push_back(CheckStats{name, 0, 0, 0, 0.0, ""});
    return checks_.back();
  }

  void record(const std::string& name, const std::string& layer, double error, double tolerance,
              std::vector<std::string>& failures) {
    CheckStats& s = get(name);
    const bool pass = std::isfinite(error) && error <= tolerance;
    if (pass) {
      ++s.passed;
    } else {
      ++s.failed;
      std::ostringstream os;
      os << name << " on " << layer << ": error " << std::setprecision(3) << error;
      failures.push_back(os.str());
    }
    if (!std::isfinite(error) || s.worst_layer.empty() || error > s.worst_error) {
      s.worst_error = error;
      s.worst_layer = layer;
    }
  }

  std::vector<CheckStats> take() { return std::move(checks_); }

 private:
  std::vector<CheckStats> checks_;
  std::map<std::string, std::size_t> index_;
};

double symmetry_error(const Tensor& factor) {
  const Index g = factor.size(0), m = factor.size(1);
  double worst = 0.0;
  for (Index b = 0; b < g; ++b)
    for (Index r = 0; r < m; ++r)
      for (Index c = 0; c < m; ++c) worst = std::max(worst, std::abs(factor.at({b, r, c}) - factor.at({b, c, r})));
  const double scale = max_abs(factor);
  return scale == 0.0 ? 0.0 : worst / scale;
}

// Negative part of the smallest eigenvalue relative to the trace, per block.
double psd_violation(const Tensor& factor) {
  const Index g = factor.size(0), m = factor.size(1);
  double worst = 0.0;
  for (Index b = 0; b < g; ++b) {
    const Tensor block = factor.narrow(0, b, 1).reshape({m, m});
    double trace = 0.0;
    for (Index r = 0; r < m; ++r) trace += block.at({r, r});
    const double lowest = oracle::sym_eig_min(block);
    if (lowest < 0.0) worst = std::max(worst, -lowest / std::max(trace, 1e-300));
  }
  return worst;
}

}  // namespace

bool has_oracle(Op op, const ConvSpec& spec) {
  if (op == Op::UnfoldKernel) return spec.groups == 1;
  if (is_ggn(op) || op == Op::HesscaleWeightDiag) return weight_count(spec) <= oracle::kMaxExplicitWeights;
  return true;
}

Tensor oracle_result(Op op, const ConvSpec& spec, std::span<const Tensor> in) {
  switch (op) {
    case Op::Forward:
      return oracle::direct_conv(spec, in[0], in[1], in.size() > 2 ? std::optional<Tensor>(in[2]) : std::nullopt);
    case Op::UnfoldInput:
    case Op::Im2colJvp: return oracle::direct_unfold(spec, in[0]);
    case Op::UnfoldKernel: return oracle::toeplitz(spec, in[0]);
    case Op::FoldOutput: return oracle::direct_fold(spec, in[0]);
    case Op::TransposeUnfold: return oracle::direct_transpose_unfold(spec, in[0]);
    case Op::WeightVjp: return oracle::direct_weight_vjp(spec, in[0], in[1]);
    case Op::PerSampleWeightVjp: return oracle::direct_per_sample_weight_vjp(spec, in[0], in[1]);
    case Op::InputVjp: return oracle::direct_input_vjp(spec, in[0], in[1]);
    case Op::WeightJvp: return oracle::direct_conv(spec, in[0], in[1]);
    case Op::InputJvp: return oracle::direct_conv(spec, in[1], in[0]);
    case Op::Im2colVjp: return oracle::direct_unfold_adjoint(spec, in[0]);
    case Op::KfacExpand: return oracle::kfac_expand(spec, in[0]);
    case Op::KfacReduce: return oracle::kfac_reduce(spec, in[0]);
    case Op::KfacExpandTranspose: return oracle::kfac_expand_transpose(spec, in[0]);
    case Op::KfacReduceTranspose: return oracle::kfac_reduce_transpose(spec, in[0]);
    case Op::GgnGram: return oracle::ggn_explicit(spec, in[0], in[1]).gram;
    case Op::GgnDiagonal: return oracle::ggn_explicit(spec, in[0], in[1]).diagonal;
    case Op::PerSampleGgnDiagonal: return oracle::ggn_explicit(spec, in[0], in[1]).per_sample_diagonal;
    case Op::HesscaleWeightDiag: return oracle::hesscale_weight_explicit(spec, in[0], in[1]);
    case Op::HesscaleInputDiag: return oracle::hesscale_input_explicit(spec, in[0], in[1]);
  }
  throw Error(ErrorCode::Unsupported, "no oracle for this operation");
}

void corrupt_first_pattern(TensorNetwork& network) {
  for (std::size_t t = 0; t < network.operands.size(); ++t) {
    if (!network.roles[t]) continue;
    double& entry = network.operands[t].data()[0];
    entry = entry == 0.0 ? 1.0 : 0.0;
    network.roles[t].reset();
    return;
  }
}

VerifyReport verify(const std::vector<LayerConfig>& layers, const VerifyOptions& options) {
  if (layers.empty()) throw Error(ErrorCode::ConfigError, "the grid is empty");
  const auto start = std::chrono::steady_clock::now();
  VerifyReport report;
  Tally tally;
  EvalOptions eval;
  eval.simplify = options.simplify;
  if (options.inject_fault) eval.before_contract = corrupt_first_pattern;

  std::vector<Op> ops;
  if (options.only) {
    ops.push_back(*options.only);
  } else {
    ops.assign(all_ops().begin(), all_ops().end());
  }

  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& [name, spec] = layers[l];
    std::uint64_t state = options.seed + l;
    Rng rng(splitmix64(state));
    const LayerTensors tensors(spec, rng);
    std::optional<oracle::GgnExplicit> ggn;

    for (Op op : ops) {
      if (!has_oracle(op, spec)) {
        ++tally.get(op_name(op)).skipped;
        continue;
      }
      const auto inputs = tensors.for_op(op);
      double error;
      Tensor tn;
      try {
        tn = run(op, spec, inputs, eval);
        Tensor expected;
        if (is_ggn(op)) {
          if (!ggn) ggn = oracle::ggn_explicit(spec, tensors.x, tensors.s_y);
          expected = op == Op::GgnGram ? ggn->gram : op == Op::GgnDiagonal ? ggn->diagonal : ggn->per_sample_diagonal;
        } else {
          expected = oracle_result(op, spec, inputs);
        }
        error = tn.shape() == expected.shape() ? relative_error(tn, expected) : INFINITY;
      } catch (const Error& e) {
        report.failures.push_back(std::string(op_name(op)) + " on " + name + ": " + e.what());
        ++tally.get(op_name(op)).failed;
        continue;
      }
      tally.record(op_name(op), name, error, options.tolerance, report.failures);

      if (options.simplify && any_structured(spec) && !options.inject_fault) {
        EvalOptions plain = eval;
        plain.simplify = false;
        const double gap = relative_error(tn, run(op, spec, inputs, plain));
        tally.record("invariant:simplify_agreement", name, gap, options.tolerance, report.failures);
      }
      if (op == Op::KfacExpand || op == Op::KfacReduce || op == Op::KfacExpandTranspose ||
          op == Op::KfacReduceTranspose) {
        tally.record("invariant:kfac_symmetry", name, symmetry_error(tn), 1e-14, report.failures);
        if (tn.size(1) <= 64) tally.record("invariant:kfac_psd", name, psd_violation(tn), 1e-10, report.failures);
      }
    }

    if (!options.only && !options.inject_fault) {
      const Tensor y = run(Op::Forward, spec, std::vector<Tensor>{tensors.x, tensors.w}, eval);
      const double a = inner(tensors.v_y, y);
      const double b = inner(weight_vjp(spec, tensors.x, tensors.v_y, eval).weight, tensors.w);
      const double c = inner(input_vjp(spec, tensors.w, tensors.v_y, eval), tensors.x);
      const double scale = std::max(norm(tensors.v_y) * norm(y), 1e-300);
      tally.record("invariant:adjointness", name, std::max(std::abs(a - b), std::abs(a - c)) / scale,
                   options.tolerance, report.failures);
      if (shape_numel(spec.output_sizes()) == 1) {
        const Tensor expand = kfac_expand_factor(spec, tensors.x, eval);
        const Tensor reduce = kfac_reduce_factor(spec, tensors.x, eval);
        tally.record("invariant:kfac_reduce_equals_expand", name, relative_error(reduce, expand), options.tolerance,
                     report.failures);
      }
    }
  }
  report.checks = tally.take();
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void print_report(std::ostream& out, const VerifyReport& report) {
  out << std::left << std::setw(38) << "check" << std::right << std::setw(8) << "passed" << std::setw(8)
      << "failed" << std::setw(9) << "skipped" << std::setw(13) << "worst_error"
      << "  worst_layer\n";
  for (const auto& c : report.checks) {
    std::ostringstream err;
    err << std::scientific << std::setprecision(2) << c.worst_error;
    out << std::left << std::setw(38) << c.name << std::right << std::setw(8) << c.passed << std::setw(8)
        << c.failed << std::setw(9) << c.skipped << std::setw(13) << err.str() << "  " << c.worst_layer << "\n";
  }
  const std::size_t shown = std::min<std::size_t>(report.failures.size(), 20);
  for (std::size_t k = 0; k < shown; ++k) out << "FAILED " << report.failures[k] << "\n";
  if (report.failures.size() > shown) out << "... " << report.failures.size() - shown << " more failures\n";
  out << "verify: " << (report.ok() ? "PASS" : "FAIL") << " (" << std::fixed << std::setprecision(2)
      << report.seconds << " s)\n";
}

}  // namespace convtn::cli
