#ifndef AOISIM_PREDICTOR_CLUSTER_HPP
#define AOISIM_PREDICTOR_CLUSTER_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "aoisim/core.hpp"

namespace aoisim {

struct AoiCluster {
    std::int64_t bucket = 0;           // floor(aoi / bucket_width)
    NodeId representative;             // lexicographically smallest member
    std::vector<NodeId> members;       // sorted by id
};

/// Groups nodes whose current AoI falls in the same fixed-width bucket, so
/// one forecast per bucket can be shared across its members. Buckets are
/// returned in ascending AoI order; every node lands in exactly one bucket.
inline std::vector<AoiCluster> cluster_nodes(const std::map<NodeId, Millis>& node_aoi,
                                             Millis bucket_width) {
    if (bucket_width <= 0.0) throw SimError("cluster_nodes: bucket width must be > 0");
    std::map<std::int64_t, AoiCluster> buckets;
    for (const auto& [id, aoi] : node_aoi) {
        if (aoi < 0.0) throw SimError("cluster_nodes: negative AoI for node " + id);
        const auto key = static_cast<std::int64_t>(std::floor(aoi / bucket_width));
        auto& cluster = buckets[key];
        cluster.bucket = key;
        cluster.members.push_back(id);  // map iteration keeps ids sorted
    }
    std::vector<AoiCluster> out;
    out.reserve(buckets.size());
    for (auto& [key, cluster] : buckets) {
        cluster.representative = cluster.members.front();
        out.push_back(std::move(cluster));
    }
    return out;
}

}  // namespace aoisim

#endif  // AOISIM_PREDICTOR_CLUSTER_HPP
