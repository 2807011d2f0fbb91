#include <algorithm>
#include <cmath>
#include <numeric>

#include "stressmcts/harness.hpp"

namespace stressmcts {

namespace {

constexpr std::size_t kExactLimit = 15;

// Exact two-sided p-value from the null distribution of the doubled
// positive rank sum. Doubling keeps average (half-integer) ranks integral.
double exact_p(std::span<const long> doubled_ranks, long doubled_w_plus) {
  const long total = std::accumulate(doubled_ranks.begin(), doubled_ranks.end(), 0L);
  std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
  counts[0] = 1.0;
  long reach = 0;
  for (long r : doubled_ranks) {
    reach += r;
    for (long s = reach; s >= r; --s) counts[static_cast<std::size_t>(s)] += counts[static_cast<std::size_t>(s - r)];
  }
  const double all = std::ldexp(1.0, static_cast<int>(doubled_ranks.size()));
  double lower = 0.0;
  double upper = 0.0;
  for (long s = 0; s <= total; ++s) {
    if (s <= doubled_w_plus) lower += counts[static_cast<std::size_t>(s)];
    if (s >= doubled_w_plus) upper += counts[static_cast<std::size_t>(s)];
  }
  return std::min(1.0, 2.0 * std::min(lower, upper) / all);
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y, WilcoxonMethod method) {
  if (x.size() != y.size()) throw InvalidArgument("paired samples differ in length");
  std::vector<double> d;
  d.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    if (diff != 0.0) d.push_back(diff);
  }
  if (d.empty()) throw AllDifferencesZero();
  if (d.size() < 5) throw InvalidArgument("signed-rank test needs at least 5 non-zero differences");

  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });

  std::vector<long> doubled(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    // Positions i..j (0-based) share the average of ranks i+1..j+1.
    const long twice_avg = static_cast<long>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) doubled[order[k]] = twice_avg;
    const auto t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }

  long doubled_plus = 0;
  long doubled_minus = 0;
  for (std::size_t i = 0; i < n; ++i) (d[i] > 0 ? doubled_plus : doubled_minus) += doubled[i];

  WilcoxonResult result;
  result.n = n;
  result.w_plus = static_cast<double>(doubled_plus) / 2.0;
  result.w_minus = static_cast<double>(doubled_minus) / 2.0;
  if (method == WilcoxonMethod::automatic) {
    method = n <= kExactLimit ? WilcoxonMethod::exact : WilcoxonMethod::normal;
  }
  result.method = method;

  if (method == WilcoxonMethod::exact) {
    result.p_value = exact_p(doubled, doubled_plus);
    return result;
  }

  const auto nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  if (var <= 0.0) {
    result.p_value = 1.0;
    return result;
  }
  const double z = std::max(0.0, std::abs(result.w_plus - mean) - 0.5) / std::sqrt(var);
  result.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return result;
}

}  // namespace stressmcts
