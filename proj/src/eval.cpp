#include "fsdd/eval.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "fsdd/error.hpp"

namespace fsdd {

Pmf empirical_pmf(std::span<const std::vector<int>> samples) {
  if (samples.empty()) throw ValidationError("cannot form an empirical distribution from zero samples");
  Pmf out;
  for (const auto& s : samples) out[s] += 1.0;
  const double n = static_cast<double>(samples.size());
  for (auto& [x, w] : out) w /= n;
  return out;
}

double tv_distance(const Pmf& p, const Pmf& q) {
  double sum = 0.0;
  auto a = p.begin();
  auto b = q.begin();
  // Merge walk over the two sorted supports.
  while (a != p.end() || b != q.end()) {
    if (b == q.end() || (a != p.end() && a->first < b->first)) {
      sum += std::abs(a->second);
      ++a;
    } else if (a == p.end() || b->first < a->first) {
      sum += std::abs(b->second);
      ++b;
    } else {
      sum += std::abs(a->second - b->second);
      ++a;
      ++b;
    }
  }
  return std::min(1.0, 0.5 * sum);
}

double tv_distance(std::span<const std::vector<int>> samples, const Pmf& reference) {
  return tv_distance(empirical_pmf(samples), reference);
}

double tv_distance(std::span<const std::vector<int>> a, std::span<const std::vector<int>> b) {
  return tv_distance(empirical_pmf(a), empirical_pmf(b));
}

double chi_square_statistic(std::span<const std::vector<int>> samples, const Pmf& reference) {
  if (samples.empty()) throw ValidationError("chi-square needs at least one sample");
  const Pmf observed = empirical_pmf(samples);
  const double n = static_cast<double>(samples.size());
  double stat = 0.0;
  double covered = 0.0;
  double outside_observed = 0.0;
  for (const auto& [x, p] : reference) {
    if (p <= 0.0) continue;
    covered += p;
    const auto it = observed.find(x);
    const double o = it == observed.end() ? 0.0 : it->second * n;
    const double e = p * n;
    stat += (o - e) * (o - e) / e;
  }
  for (const auto& [x, f] : observed) {
    const auto it = reference.find(x);
    if (it == reference.end() || it->second <= 0.0) outside_observed += f * n;
  }
  const double outside_expected = std::max(0.0, 1.0 - covered) * n;
  if (outside_expected > 1e-9 * n) {
    stat += (outside_observed - outside_expected) * (outside_observed - outside_expected) / outside_expected;
  } else if (outside_observed > 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return stat;
}

SumViolation sum_violation(std::span<const std::vector<int>> samples, int m) {
  SumViolation out;
  if (samples.empty()) return out;
  std::size_t bad = 0;
  double abs_err = 0.0;
  for (const auto& s : samples) {
    const auto err = total(s) - m;
    if (err != 0) ++bad;
    abs_err += static_cast<double>(err < 0 ? -err : err);
  }
  const double n = static_cast<double>(samples.size());
  out.rate = static_cast<double>(bad) / n;
  out.mean_abs_error = abs_err / n;
  return out;
}

std::optional<std::uint64_t> count_vector_space_size(int c, int m, std::uint64_t limit) {
  if (c < 1 || m < 0) throw ValidationError("count vector space needs C >= 1 and M >= 0");
  // binomial(m + c - 1, k) with k the smaller side; every prefix is itself a binomial.
  const std::uint64_t n = static_cast<std::uint64_t>(m) + static_cast<std::uint64_t>(c) - 1;
  const std::uint64_t k = std::min<std::uint64_t>(static_cast<std::uint64_t>(c) - 1, static_cast<std::uint64_t>(m));
  unsigned __int128 r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > limit) return std::nullopt;
  }
  return static_cast<std::uint64_t>(r);
}

std::vector<CountVector> enumerate_count_vectors(int c, int m) {
  const auto size = count_vector_space_size(c, m, kEnumerationLimit);
  if (!size) {
    throw ValidationError("count vector space for C=" + std::to_string(c) + ", M=" + std::to_string(m) +
                          " exceeds " + std::to_string(kEnumerationLimit) + " vectors");
  }
  std::vector<CountVector> out;
  out.reserve(*size);
  std::vector<int> x(static_cast<std::size_t>(c), 0);
  x[0] = m;
  const std::size_t last = x.size() - 1;
  while (true) {
    out.emplace_back(x, m);
    // Successor in descending order: take one unit from the rightmost non-zero
    // entry before the last, and gather it with the tail right after it.
    std::size_t p = last;
    while (p > 0 && x[p - 1] == 0) --p;
    if (p == 0) break;
    --p;
    const int tail = x[last] + 1;
    x[last] = 0;
    --x[p];
    x[p + 1] = tail;
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

double hit_rate(std::span<const std::vector<int>> samples, const Pmf& reference) {
  if (samples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : samples) {
    const auto it = reference.find(s);
    if (it != reference.end() && it->second > 0.0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

}  // namespace

EvalReport evaluate(std::span<const std::vector<int>> samples, int m, const Pmf& reference,
                    std::span<const int> labels, std::span<const Pmf> class_references) {
  if (samples.empty()) throw ValidationError("evaluation needs at least one sample");
  if (!labels.empty() && labels.size() != samples.size()) {
    throw ValidationError("label count does not match sample count");
  }
  EvalReport r;
  r.n_samples = samples.size();
  r.tv_distance = tv_distance(samples, reference);
  r.chi_square_stat = chi_square_statistic(samples, reference);
  const auto viol = sum_violation(samples, m);
  r.sum_violation_rate = viol.rate;
  r.mean_abs_sum_error = viol.mean_abs_error;
  r.support_hit_rate = hit_rate(samples, reference);
  if (!labels.empty()) {
    for (std::size_t k = 0; k < class_references.size(); ++k) {
      std::vector<std::vector<int>> subset;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        if (labels[i] == static_cast<int>(k)) subset.push_back(samples[i]);
      }
      ClassEval ce;
      ce.label = static_cast<int>(k);
      ce.n_samples = subset.size();
      if (!subset.empty()) {
        ce.tv_distance = tv_distance(subset, class_references[k]);
        ce.support_hit_rate = hit_rate(subset, class_references[k]);
      }
      r.per_class.push_back(ce);
    }
  }
  return r;
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out << "n_samples           " << n_samples << '\n'
      << "tv_distance         " << fmt(tv_distance) << '\n'
      << "chi_square_stat     " << fmt(chi_square_stat) << '\n'
      << "sum_violation_rate  " << fmt(sum_violation_rate) << '\n'
      << "mean_abs_sum_error  " << fmt(mean_abs_sum_error) << '\n'
      << "support_hit_rate    " << fmt(support_hit_rate) << '\n';
  for (const auto& c : per_class) {
    out << "class " << c.label << "  n=" << c.n_samples << "  tv=" << fmt(c.tv_distance)
        << "  hit=" << fmt(c.support_hit_rate) << '\n';
  }
  return out.str();
}

std::string EvalReport::csv_header() {
  return "n_samples,tv_distance,chi_square_stat,sum_violation_rate,mean_abs_sum_error,support_hit_rate";
}

std::string EvalReport::to_csv_row() const {
  return std::to_string(n_samples) + "," + fmt(tv_distance) + "," + fmt(chi_square_stat) + "," +
         fmt(sum_violation_rate) + "," + fmt(mean_abs_sum_error) + "," + fmt(support_hit_rate);
}

}  // namespace fsdd
