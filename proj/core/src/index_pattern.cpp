#include "convtn/index_pattern.hpp"

#include <map>
#include <mutex>

#include "convtn/error.hpp"

namespace convtn {

const char* to_string(PatternKind kind) noexcept {
  switch (kind) {
    case PatternKind::Dense:
      return "dense";
    case PatternKind::DownSampling:
      return "down_sampling";
    case PatternKind::General:
      return "general";
  }
  return "unknown";
}

Index IndexPattern::nnz() const {
  Index count = 0;
  for (double v : table.data()) count += v != 0.0;
  return count;
}

std::vector<std::array<Index, 3>> IndexPattern::triples() const {
  std::vector<std::array<Index, 3>> out;
  for (Index o = 0; o < output_size; ++o) {
    for (Index k = 0; k < dim.kernel_size; ++k) {
      const Index i = k * dim.dilation + o * dim.stride - dim.padding;
      if (i >= 0 && i < dim.input_size) out.push_back({i, o, k});
    }
  }
  return out;
}

PatternKind classify(const DimSpec& d) {
  output_size(d);
  if (d.padding != 0 || d.dilation != 1) return PatternKind::General;
  if (d.kernel_size == d.stride && d.input_size % d.kernel_size == 0) return PatternKind::Dense;
  if (d.stride > d.kernel_size && d.input_size % d.stride == 0) return PatternKind::DownSampling;
  return PatternKind::General;
}

IndexPattern build_pattern(const DimSpec& d) {
  IndexPattern p;
  p.dim = d;
  p.output_size = output_size(d);
  p.kind = classify(d);
  p.table = Tensor({d.input_size, p.output_size, d.kernel_size});
  for (const auto& [i, o, k] : p.triples()) p.table.at({i, o, k}) = 1.0;
  return p;
}

std::shared_ptr<const IndexPattern> pattern(const DimSpec& d) {
  static std::mutex mutex;
  static std::map<DimSpec, std::shared_ptr<const IndexPattern>> cache;
  {
    std::lock_guard lock(mutex);
    auto it = cache.find(d);
    if (it != cache.end()) return it->second;
  }
  auto built = std::make_shared<const IndexPattern>(build_pattern(d));
  std::lock_guard lock(mutex);
  return cache.emplace(d, std::move(built)).first->second;
}

Tensor averaged_pattern(const DimSpec& d) {
  const auto p = pattern(d);
  const Index O = p->output_size;
  Tensor avg({d.input_size, d.kernel_size});
  for (const auto& [i, o, k] : p->triples()) avg.at({i, k}) += 1.0;
  avg *= 1.0 / static_cast<double>(O);
  return avg;
}

DimSpec swapped_dim(const DimSpec& d) {
  if (!no_boundary_pixels(d)) {
    throw Error(ErrorCode::BoundaryPixels, "kernel and output cannot be exchanged for " + to_string(d));
  }
  return DimSpec{d.input_size, output_size(d), d.dilation, d.padding, d.stride};
}

IndexPattern kernel_output_swap(const IndexPattern& p) {
  IndexPattern swapped = build_pattern(swapped_dim(p.dim));
  if (swapped.output_size != p.kernel_size() || swapped.table.permute({0, 2, 1}) != p.table) {
    throw Error(ErrorCode::BoundaryPixels, "swapped pattern does not match for " + to_string(p.dim));
  }
  return swapped;
}

bool stride_subsample_check(const DimSpec& d) {
  const auto strided = pattern(d);
  const auto unit = pattern(DimSpec{d.input_size, d.kernel_size, 1, d.padding, d.dilation});
  std::vector<Index> keep;
  for (Index o = 0; o < strided->output_size; ++o) keep.push_back(o * d.stride);
  return unit->table.index_select(1, keep) == strided->table;
}

bool dilation_subsample_check(const DimSpec& d) {
  const auto dilated = pattern(d);
  const Index span = (d.kernel_size - 1) * d.dilation + 1;
  const auto dense = pattern(DimSpec{d.input_size, span, d.stride, d.padding, 1});
  std::vector<Index> keep;
  for (Index k = 0; k < d.kernel_size; ++k) keep.push_back(k * d.dilation);
  return dense->output_size == dilated->output_size && dense->table.index_select(2, keep) == dilated->table;
}

}  // namespace convtn
