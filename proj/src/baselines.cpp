#include "fsdd/baselines.hpp"

#include <string>

#include "fsdd/error.hpp"

namespace fsdd {

std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::discrete_no_fixed_sum: return "discrete_no_fixed_sum";
    case BaselineKind::fsdd: return "fsdd";
  }
  return "?";
}

BaselineKind parse_baseline_kind(std::string_view name) {
  for (auto k : {BaselineKind::discrete_no_fixed_sum, BaselineKind::fsdd}) {
    if (name == to_string(k)) return k;
  }
  throw ValidationError("unknown method '" + std::string(name) + "' (expected fsdd or discrete_no_fixed_sum)");
}

bool uses_fixed_sum(BaselineKind kind) { return kind == BaselineKind::fsdd; }

std::vector<int> generate_baseline(const Denoiser& model, SampleConfig config, BaselineKind kind,
                                   std::uint64_t index) {
  config.fixed_sum = uses_fixed_sum(kind);
  if (kind == BaselineKind::fsdd) return generate(model, config, index).to_vector();
  return generate_raw(model, config, index);
}

}  // namespace fsdd
