#include "fsdd/data.hpp"

#include <algorithm>
#include <cmath>

#include <boost/random/gamma_distribution.hpp>

#include "fsdd/error.hpp"
#include "fsdd/prob.hpp"
#include "fsdd/rng.hpp"

namespace fsdd {

void Dataset::validate() const {
  if (rows.empty()) throw ValidationError("dataset is empty");
  if (!labels.empty() && labels.size() != rows.size()) {
    throw ValidationError("dataset has " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(rows.size()) + " rows");
  }
  if (labels.empty() != (num_classes == 0)) {
    throw ValidationError("dataset labels and num_classes disagree");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].codebook_size() != codebook_size || rows[i].target_sum() != target_sum) {
      throw ValidationError("dataset row " + std::to_string(i) + " does not have C=" +
                            std::to_string(codebook_size) + ", M=" + std::to_string(target_sum));
    }
    if (!labels.empty() && (labels[i] < 0 || labels[i] >= num_classes)) {
      throw ValidationError("dataset row " + std::to_string(i) + " has label " +
                            std::to_string(labels[i]) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

CountFile Dataset::to_count_file() const {
  CountFile f;
  f.codebook_size = codebook_size;
  f.target_sum = target_sum;
  f.num_classes = num_classes;
  f.labels = labels;
  f.rows.reserve(rows.size());
  for (const auto& r : rows) f.rows.push_back(r.to_vector());
  return f;
}

Dataset Dataset::from_count_file(const CountFile& file) {
  Dataset d;
  d.codebook_size = file.codebook_size;
  d.target_sum = file.target_sum;
  d.num_classes = file.num_classes;
  d.labels = file.labels;
  d.rows.reserve(file.rows.size());
  for (const auto& r : file.rows) d.rows.emplace_back(r, file.target_sum);
  return d;
}

Dataset Dataset::from_token_file(const TokenFile& file) {
  Dataset d;
  d.codebook_size = file.codebook_size;
  d.target_sum = file.cardinality;
  d.rows.reserve(file.sets.size());
  for (const auto& s : file.sets) d.rows.push_back(set_to_counts(s));
  return d;
}

std::string_view to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::two_point: return "two_point";
    case SyntheticKind::dirichlet_multinomial: return "dirichlet_multinomial";
    case SyntheticKind::class_conditional_two_point: return "class_conditional_two_point";
  }
  return "?";
}

SyntheticKind parse_synthetic_kind(std::string_view name) {
  for (auto k : {SyntheticKind::two_point, SyntheticKind::dirichlet_multinomial,
                 SyntheticKind::class_conditional_two_point}) {
    if (name == to_string(k)) return k;
  }
  throw ValidationError("unknown data kind '" + std::string(name) +
                        "' (expected two_point, dirichlet_multinomial or class_conditional_two_point)");
}

namespace {

std::size_t anchors_needed(const SyntheticSpec& spec) {
  switch (spec.kind) {
    case SyntheticKind::two_point: return 2;
    case SyntheticKind::class_conditional_two_point: return 2 * static_cast<std::size_t>(spec.num_classes);
    case SyntheticKind::dirichlet_multinomial: return 0;
  }
  return 0;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (codebook_size < 1) throw ValidationError("data spec: C must be positive");
  if (target_sum < 0) throw ValidationError("data spec: M must be non-negative");
  if (kind == SyntheticKind::dirichlet_multinomial && !(alpha > 0.0 && std::isfinite(alpha))) {
    throw ValidationError("data spec: alpha must be positive and finite");
  }
  if (!(mixture_weight >= 0.0 && mixture_weight <= 1.0)) {
    throw ValidationError("data spec: mixture weight must lie in [0, 1]");
  }
  if (kind == SyntheticKind::class_conditional_two_point && num_classes < 1) {
    throw ValidationError("data spec: num_classes must be positive");
  }
  if (!anchors.empty()) {
    if (anchors.size() != anchors_needed(*this)) {
      throw ValidationError("data spec: " + std::string(to_string(kind)) + " takes " +
                            std::to_string(anchors_needed(*this)) + " anchors, got " +
                            std::to_string(anchors.size()));
    }
    for (const auto& a : anchors) {
      if (a.codebook_size() != codebook_size || a.target_sum() != target_sum) {
        throw ValidationError("data spec: anchor shape does not match C and M");
      }
    }
  }
}

std::vector<CountVector> resolve_anchors(const SyntheticSpec& spec) {
  spec.validate();
  if (!spec.anchors.empty()) return spec.anchors;
  const std::size_t needed = anchors_needed(spec);
  const auto space = count_vector_space_size(spec.codebook_size, spec.target_sum, needed);
  if (space && *space < needed) {
    throw ValidationError("data spec: only " + std::to_string(*space) + " count vectors exist, " +
                          std::to_string(needed) + " distinct anchors needed");
  }
  RngStream rng(spec.seed, 0);
  std::vector<CountVector> out;
  while (out.size() < needed) {
    auto a = sample_multinomial_noise(spec.codebook_size, spec.target_sum, rng);
    if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(std::move(a));
  }
  return out;
}

namespace {

CountVector dirichlet_multinomial_draw(int c, int m, double alpha, RngStream& rng) {
  boost::random::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> w(static_cast<std::size_t>(c));
  double sum = 0.0;
  for (auto& v : w) {
    v = gamma(rng);
    sum += v;
  }
  std::vector<int> counts(static_cast<std::size_t>(c), 0);
  if (!(sum > 0.0)) {
    // Every gamma draw underflowed (tiny alpha): the Dirichlet limit is a vertex.
    counts[rng.uniform_index(static_cast<std::uint64_t>(c))] = m;
    return CountVector(std::move(counts), m);
  }
  for (int i = 0; i < m; ++i) ++counts[static_cast<std::size_t>(sample_categorical(w, rng))];
  return CountVector(std::move(counts), m);
}

}  // namespace

Dataset sample_dataset(const SyntheticSpec& spec, std::size_t n) {
  if (n < 1) throw ValidationError("data spec: n must be at least 1");
  const auto anchors = resolve_anchors(spec);
  Dataset d;
  d.codebook_size = spec.codebook_size;
  d.target_sum = spec.target_sum;
  d.num_classes = spec.label_count();
  d.rows.reserve(n);
  RngStream rng(spec.seed, 1);
  for (std::size_t i = 0; i < n; ++i) {
    switch (spec.kind) {
      case SyntheticKind::two_point:
        d.rows.push_back(anchors[rng.uniform() < spec.mixture_weight ? 0 : 1]);
        break;
      case SyntheticKind::class_conditional_two_point: {
        const auto k = rng.uniform_index(static_cast<std::uint64_t>(spec.num_classes));
        d.labels.push_back(static_cast<int>(k));
        d.rows.push_back(anchors[2 * k + (rng.uniform() < spec.mixture_weight ? 0 : 1)]);
        break;
      }
      case SyntheticKind::dirichlet_multinomial:
        d.rows.push_back(dirichlet_multinomial_draw(spec.codebook_size, spec.target_sum, spec.alpha, rng));
        break;
    }
  }
  return d;
}

Pmf reference_pmf(const SyntheticSpec& spec, std::optional<int> label) {
  const auto anchors = resolve_anchors(spec);
  Pmf out;
  switch (spec.kind) {
    case SyntheticKind::two_point:
      out[anchors[0].to_vector()] += spec.mixture_weight;
      out[anchors[1].to_vector()] += 1.0 - spec.mixture_weight;
      break;
    case SyntheticKind::class_conditional_two_point: {
      if (label && (*label < 0 || *label >= spec.num_classes)) {
        throw ValidationError("class " + std::to_string(*label) + " outside [0, " +
                              std::to_string(spec.num_classes) + ")");
      }
      const int first = label ? *label : 0;
      const int last = label ? *label : spec.num_classes - 1;
      const double share = 1.0 / (last - first + 1);
      for (int k = first; k <= last; ++k) {
        out[anchors[2 * static_cast<std::size_t>(k)].to_vector()] += share * spec.mixture_weight;
        out[anchors[2 * static_cast<std::size_t>(k) + 1].to_vector()] += share * (1.0 - spec.mixture_weight);
      }
      break;
    }
    case SyntheticKind::dirichlet_multinomial: {
      // M! / prod x_j! * Gamma(C a) / Gamma(M + C a) * prod Gamma(x_j + a) / Gamma(a)
      const double a = spec.alpha;
      const int m = spec.target_sum;
      const double c = spec.codebook_size;
      const double base = std::lgamma(m + 1.0) + std::lgamma(c * a) - std::lgamma(m + c * a) -
                          c * std::lgamma(a);
      for (const auto& x : enumerate_count_vectors(spec.codebook_size, m)) {
        double lp = base;
        for (int v : x.counts()) lp += std::lgamma(v + a) - std::lgamma(v + 1.0);
        out[x.to_vector()] = std::exp(lp);
      }
      break;
    }
  }
  std::erase_if(out, [](const auto& kv) { return kv.second <= 0.0; });
  return out;
}

}  // namespace fsdd
