#include "support/positioning.hpp"

#include <cmath>

namespace sqlctx::testing {

namespace {

// maximal runs of consecutive positions as (first, last)
std::vector<std::pair<std::size_t, std::size_t>> runs(const std::vector<std::size_t>& p) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t x : p) {
    if (!out.empty() && out.back().second + 1 == x) {
      out.back().second = x;
    } else {
      out.emplace_back(x, x);
    }
  }
  return out;
}

}  // namespace

std::string positioning_violation(const std::vector<std::size_t>& positions, std::size_t n,
                                  PositionStrategy strategy) {
  const std::size_t r = positions.size();
  for (std::size_t k = 0; k < r; ++k) {
    if (positions[k] >= n || (k && positions[k] <= positions[k - 1])) return "positions not ascending in range";
  }
  if (r == 0) return {};
  auto rs = runs(positions);
  switch (strategy) {
    case PositionStrategy::Beginning:
      if (rs.size() != 1 || rs[0].first != 0) return "beginning block does not start the stream";
      return {};
    case PositionStrategy::End:
      if (rs.size() != 1 || rs[0].second != n - 1) return "end block does not finish the stream";
      return {};
    case PositionStrategy::Middle: {
      if (rs.size() != 1) return "middle block is not contiguous";
      double run_center = (static_cast<double>(rs[0].first) + static_cast<double>(rs[0].second)) / 2.0;
      double stream_center = (static_cast<double>(n) - 1.0) / 2.0;
      if (std::abs(run_center - stream_center) > 1.0) return "middle block is off center";
      return {};
    }
    case PositionStrategy::Bimodal: {
      if (r == n) return rs.size() == 1 ? "" : "bimodal with no irrelevant documents should be one block";
      if (r == 1) return positions[0] == 0 ? "" : "single bimodal document should lead";
      if (rs.size() != 2) return "bimodal does not form exactly two runs";
      if (rs[0].first != 0 || rs[1].second != n - 1) return "bimodal runs do not touch both ends";
      std::size_t head = rs[0].second - rs[0].first + 1;
      if (head != (r + 1) / 2) return "bimodal head is not ceil(R/2)";
      return {};
    }
    case PositionStrategy::Uniform: {
      if (r < 2) return {};
      std::size_t lo = SIZE_MAX, hi = 0;
      for (std::size_t k = 1; k < r; ++k) {
        std::size_t gap = positions[k] - positions[k - 1];
        lo = std::min(lo, gap);
        hi = std::max(hi, gap);
      }
      if (hi - lo > 1) return "uniform gaps differ by more than one";
      return {};
    }
  }
  return "unknown strategy";
}

}  // namespace sqlctx::testing
