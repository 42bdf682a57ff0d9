#ifndef AOISIM_KINEMATICS_HPP
#define AOISIM_KINEMATICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "aoisim/core.hpp"

namespace aoisim {

enum class NodeKind { Sensor, Vehicle };

inline const char* to_string(NodeKind k) {
    return k == NodeKind::Sensor ? "sensor" : "vehicle";
}

/// One roadside sensor or nearby vehicle on the 1-D freeway axis.
/// Sensors never move; vehicles hold a target speed plus a bounded
/// per-second perturbation.
struct NodeState {
    NodeId id;
    NodeKind kind = NodeKind::Sensor;
    double position = 0.0;        // m along the freeway axis
    int lane = 0;
    double speed = 0.0;           // m/s, + = ego travel direction
    double coverage_radius = 0.0; // m

    double target_speed = 0.0;    // vehicles drift around this
};

inline double default_coverage_radius(NodeKind k) {
    return k == NodeKind::Sensor ? 100.0 : 300.0;
}

/// Piecewise-constant speed schedule: (time ms -> target speed m/s).
/// Empty profile means "hold the initial speed".
struct SpeedProfile {
    std::vector<std::pair<Millis, double>> points;  // sorted by time

    double target_at(Millis t, double fallback) const {
        double v = fallback;
        for (const auto& [when, speed] : points) {
            if (when > t) break;
            v = speed;
        }
        return v;
    }
};

struct EgoState {
    double position = 0.0;
    int lane = 0;
    double speed = 15.0;
    double speed_min = 15.0;
    double speed_max = 30.0;
    SpeedProfile speed_profile;
};

struct World {
    EgoState ego;
    std::vector<NodeState> nodes;
    Millis now = 0.0;
};

/// Per-second uniform speed perturbation half-width for vehicles.
constexpr double kSpeedJitterPerSecond = 1.0;

/// Advances ego and vehicles by dt; sensors stay put. Vehicle speeds get a
/// zero-mean uniform nudge (at most +/-1 m/s per second of dt) and are
/// clamped to the scenario speed range. Deterministic: the nudge for
/// vehicle i at step k depends only on (seed, i, k).
inline void step_world(World& world, Millis dt, std::uint64_t seed,
                       std::uint64_t step_index) {
    if (dt <= 0.0) throw SimError("step_world: dt must be > 0");
    const double dt_s = dt / 1000.0;

    EgoState& ego = world.ego;
    ego.speed = std::clamp(ego.speed_profile.target_at(world.now, ego.speed),
                           ego.speed_min, ego.speed_max);
    ego.position += ego.speed * dt_s;

    for (std::size_t i = 0; i < world.nodes.size(); ++i) {
        NodeState& n = world.nodes[i];
        if (n.kind == NodeKind::Sensor) continue;
        EventRng rng(seed, "world.vehicle", i, step_index);
        const double jitter = rng.next_range(-1.0, 1.0) * kSpeedJitterPerSecond * dt_s;
        const double dir = n.target_speed < 0.0 ? -1.0 : 1.0;
        const double mag = std::clamp(std::abs(n.target_speed + jitter),
                                      ego.speed_min, ego.speed_max);
        n.speed = dir * mag;
        n.position += n.speed * dt_s;
    }
    world.now += dt;
}

/// |ego.speed - node.speed| along the axis; for sensors this is |ego.speed|.
inline double relative_speed(const EgoState& ego, const NodeState& node) {
    return std::abs(ego.speed - node.speed);
}

inline double relative_distance(const EgoState& ego, const NodeState& node) {
    return std::abs(ego.position - node.position);
}

/// Closed-interval membership: a node exactly at the edge still delivers.
inline bool in_coverage(const EgoState& ego, const NodeState& node) {
    return relative_distance(ego, node) <= node.coverage_radius;
}

/// Coverage extent the ego traverses: the full chord, i.e. the diameter.
inline double coverage_extent(const NodeState& node) {
    return 2.0 * node.coverage_radius;
}

/// Speed-to-coverage-area ratio in 1/s. Zero relative speed gives zero:
/// the ego never leaves that node's coverage on its own.
inline double scar(double rel_speed, double extent) {
    if (extent <= 0.0) throw SimError("scar: coverage extent must be > 0");
    return std::abs(rel_speed) / extent;
}

inline double scar(const EgoState& ego, const NodeState& node) {
    if (node.coverage_radius <= 0.0) throw SimError("scar: coverage_radius must be > 0");
    return scar(relative_speed(ego, node), coverage_extent(node));
}

}  // namespace aoisim

#endif  // AOISIM_KINEMATICS_HPP
