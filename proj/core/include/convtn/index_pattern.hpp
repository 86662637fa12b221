#pragma once

#include <array>
#include <memory>
#include <vector>

#include "convtn/conv_spec.hpp"
#include "convtn/tensor.hpp"

namespace convtn {

enum class PatternKind { Dense, DownSampling, General };

const char* to_string(PatternKind kind) noexcept;

/// Binary I x O x K tensor relating input, output and kernel positions of one
/// spatial dimension: table[i, o, k] = 1 iff i == k*D + o*S - P.
struct IndexPattern {
  DimSpec dim;
  Index output_size = 0;
  Tensor table;
  PatternKind kind = PatternKind::General;

  Index input_size() const { return dim.input_size; }
  Index kernel_size() const { return dim.kernel_size; }
  Index nnz() const;
  /// Nonzero positions as (i, o, k), ordered by o then k.
  std::vector<std::array<Index, 3>> triples() const;
};

PatternKind classify(const DimSpec& dim);

/// Builds the pattern without consulting the cache.
IndexPattern build_pattern(const DimSpec& dim);

/// Memoized pattern; the returned object is immutable and shared.
std::shared_ptr<const IndexPattern> pattern(const DimSpec& dim);

/// (1/O) * sum_o table[:, o, :], shape I x K.
Tensor averaged_pattern(const DimSpec& dim);

/// DimSpec of the pattern with kernel and output roles exchanged:
/// (I, O, D, P, S). Throws BoundaryPixels if some input pixel is never read.
DimSpec swapped_dim(const DimSpec& dim);

/// Pattern of swapped_dim(p.dim); its table satisfies
/// swapped[i, k, o] == p.table[i, o, k].
IndexPattern kernel_output_swap(const IndexPattern& p);

/// table(I,K,S,P,D) equals table(I,K,1,P,D) restricted to every S-th output.
bool stride_subsample_check(const DimSpec& dim);

/// table(I,K,S,P,D) equals table(I,(K-1)D+1,S,P,1) restricted to every D-th
/// kernel element.
bool dilation_subsample_check(const DimSpec& dim);

}  // namespace convtn
