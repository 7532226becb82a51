#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "fatsim/topology.hpp"

namespace fatsim {

struct RateRequest {
  double demand = 0.0;  // upper bound on the rate; may be +inf
  std::span<const LinkIndex> links;
};

namespace detail {

// Per-link sums in request order. This is the exact order the engine uses
// when it accumulates allocated bandwidth, so "<= capacity" checked here
// holds bit-for-bit there.
inline std::vector<double> link_sums(std::size_t link_count, std::span<const RateRequest> reqs,
                                     const std::vector<double>& rate) {
  std::vector<double> sum(link_count, 0.0);
  for (std::size_t i = 0; i < reqs.size(); ++i)
    for (LinkIndex l : reqs[i].links) sum[l] += rate[i];
  return sum;
}

}  // namespace detail

// Max-min fair rates by progressive filling: all unfrozen flows rise at a
// common level until a link saturates or a flow reaches its demand, the
// affected flows freeze, repeat. A flow that crosses no link is limited only
// by its demand.
inline std::vector<double> max_min_allocate(std::span<const double> capacity,
                                            std::span<const RateRequest> reqs) {
  const std::size_t n = reqs.size();
  const std::size_t m = capacity.size();
  std::vector<double> rate(n, 0.0);
  std::vector<char> frozen(n, 0);
  std::vector<double> frozen_sum(m, 0.0);
  std::vector<int> active(m, 0);

  std::size_t remaining = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = reqs[i];
    if (!(r.demand >= 0.0)) throw std::invalid_argument("max_min_allocate: negative demand");
    for (LinkIndex l : r.links)
      if (l >= m) throw std::out_of_range("max_min_allocate: link index out of range");
    if (r.demand == 0.0) {
      frozen[i] = 1;
    } else if (r.links.empty()) {
      rate[i] = r.demand;
      frozen[i] = 1;
    } else {
      for (LinkIndex l : r.links) ++active[l];
      ++remaining;
    }
  }

  constexpr double kTol = 1e-12;
  while (remaining > 0) {
    double level = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < m; ++l)
      if (active[l] > 0) level = std::min(level, std::max(0.0, capacity[l] - frozen_sum[l]) / active[l]);
    for (std::size_t i = 0; i < n; ++i)
      if (!frozen[i]) level = std::min(level, reqs[i].demand);

    std::vector<char> saturated(m, 0);
    for (std::size_t l = 0; l < m; ++l) {
      if (active[l] == 0) continue;
      const double at = std::max(0.0, capacity[l] - frozen_sum[l]) / active[l];
      if (at <= level * (1.0 + kTol)) saturated[l] = 1;
    }
    std::vector<std::size_t> freeze;
    for (std::size_t i = 0; i < n; ++i) {
      if (frozen[i]) continue;
      bool hit = reqs[i].demand <= level * (1.0 + kTol);
      for (LinkIndex l : reqs[i].links) hit = hit || saturated[l];
      if (hit) freeze.push_back(i);
    }
    for (std::size_t i : freeze) {
      rate[i] = std::min(level, reqs[i].demand);
      frozen[i] = 1;
      --remaining;
      for (LinkIndex l : reqs[i].links) {
        frozen_sum[l] += rate[i];
        --active[l];
      }
    }
  }

  // Rounding can leave a link a few ulps over capacity. Shave the largest
  // flow on any such link until the request-order sum fits; lowering a rate
  // never pushes another link over.
  for (int pass = 0; pass < 64; ++pass) {
    const auto sum = detail::link_sums(m, reqs, rate);
    bool clean = true;
    for (std::size_t l = 0; l < m; ++l) {
      if (sum[l] <= capacity[l]) continue;
      clean = false;
      std::size_t worst = n;
      for (std::size_t i = 0; i < n; ++i)
        if (std::find(reqs[i].links.begin(), reqs[i].links.end(), l) != reqs[i].links.end() &&
            (worst == n || rate[i] > rate[worst]))
          worst = i;
      const double excess = sum[l] - capacity[l];
      rate[worst] = std::max(0.0, std::nextafter(rate[worst] - excess, 0.0));
    }
    if (clean) break;
  }
  return rate;
}

}  // namespace fatsim
