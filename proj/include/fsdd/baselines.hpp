#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "fsdd/sampler.hpp"

namespace fsdd {

enum class BaselineKind {
  discrete_no_fixed_sum,  ///< identical reverse loop with every adjustment disabled
  fsdd,
};

std::string_view to_string(BaselineKind kind);
/// Throws ValidationError listing the accepted names.
BaselineKind parse_baseline_kind(std::string_view name);

/// Training counterpart of each arm: the baseline is trained on unadjusted x_t.
bool uses_fixed_sum(BaselineKind kind);

/// Raw sample `index`; fsdd delegates to generate, so both arms read the same
/// checkpoint and share streams. `config.fixed_sum` is overridden by `kind`.
std::vector<int> generate_baseline(const Denoiser& model, SampleConfig config, BaselineKind kind,
                                   std::uint64_t index = 0);

}  // namespace fsdd
