#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "convtn/cli/config.hpp"
#include "convtn/conv_ops.hpp"

namespace convtn::cli {

enum ExitCode : int { kSuccess = 0, kVerificationFailure = 1, kConfigError = 2 };

inline constexpr const char* kBenchHeader = "layer,op,variant,min_seconds,flops,max_intermediate";

struct CommonOptions {
  std::string config;
  bool simplify = true;
  std::string op;
  std::uint64_t seed = 0;
  int repeats = 5;
  bool explain = false;
  bool inject_fault = false;
};

struct CrsOptions {
  double keep_channel = 1.0;
  /// Keep probability of every spatial axis.
  double keep_spatial = 1.0;
  int seeds = 100;
};

struct CrsInstance {
  std::string name;
  ConvSpec spec;
  Tensor x;
  Tensor v_y;
};

/// Synthetic weight-VJP instance with positive inputs and positive-mean
/// output gradients.
CrsInstance synthetic_crs_instance(const ConvSpec& spec, std::uint64_t seed, std::string name = "synthetic");
ConvSpec default_crs_spec();

/// Operations selected by --op: one name, "all", or `fallback` when empty.
std::vector<Op> select_ops(const std::string& name, std::optional<Op> fallback);

int cmd_verify(const CommonOptions& options, std::ostream& out);
int cmd_flops(const CommonOptions& options, std::ostream& out);
int cmd_pattern(const DimSpec& dim, std::ostream& out);
int cmd_bench(const CommonOptions& options, std::ostream& out);
int cmd_crs(const CommonOptions& options, const CrsOptions& crs, std::ostream& out);

/// Parses arguments and dispatches; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace convtn::cli
