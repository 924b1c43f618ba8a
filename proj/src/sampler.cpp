#include "tractshape/sampler.hpp"

#include <algorithm>
#include <random>
#include <unordered_set>

#include "tractshape/error.hpp"

namespace tractshape {

PointCloudSample random_sample(const FiberCluster& cluster, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "sample size must be at least 1");

  const auto& streamlines = cluster.streamlines();
  std::vector<std::size_t> offsets(streamlines.size() + 1, 0);
  for (std::size_t i = 0; i < streamlines.size(); ++i) offsets[i + 1] = offsets[i] + streamlines[i].size();
  const std::size_t total = offsets.back();

  auto point_at = [&](std::size_t flat) -> const Point3& {
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), flat);
    const auto s = static_cast<std::size_t>(it - offsets.begin()) - 1;
    return streamlines[s].points()[flat - offsets[s]];
  };

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> picks;
  picks.reserve(n);
  if (total >= n) {
    // Floyd's algorithm: n distinct indices in O(n), then a shuffle for order.
    std::unordered_set<std::size_t> chosen;
    chosen.reserve(n * 2);
    for (std::size_t j = total - n; j < total; ++j) {
      const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
      const std::size_t pick = chosen.insert(t).second ? t : j;
      if (pick == j) chosen.insert(j);
      picks.push_back(pick);
    }
    std::shuffle(picks.begin(), picks.end(), rng);
  } else {
    std::uniform_int_distribution<std::size_t> dist(0, total - 1);
    for (std::size_t i = 0; i < n; ++i) picks.push_back(dist(rng));
  }

  PointCloudSample sample;
  sample.cluster_id = cluster.id();
  sample.seed = seed;
  sample.points.reserve(n);
  for (const auto idx : picks) sample.points.push_back(point_at(idx));
  return sample;
}

}  // namespace tractshape
