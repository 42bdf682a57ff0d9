#ifndef AOISIM_CHANNEL_HPP
#define AOISIM_CHANNEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aoisim/core.hpp"
#include "aoisim/kinematics.hpp"

namespace aoisim {

/// One broadcast information update as seen by the ego buffer.
struct UpdateMessage {
    NodeId source_id;
    NodeKind source_kind = NodeKind::Sensor;
    int cycle = 0;               // m >= 1
    Millis originated_at = 0.0;  // when the information was generated
    Millis requested_at = 0.0;   // the ego's request mark for cycle m
    double distance_at_send = 0.0;  // m
    Millis arrival_at = 0.0;     // filled by deliver()
    Millis aoi = 0.0;            // filled on delivery
};

/// Parametric stand-in for everything between information generation and
/// buffer arrival. Propagation is physical (d/c); the access and freshness
/// terms model MAC/queueing effects the radio stack would produce. The
/// edge_* terms grow with the distance fraction d/R so updates age and
/// straggle near the coverage boundary, which is what couples AoI to
/// mobility here.
struct DelayModel {
    double propagation_speed = 3.0e8;     // m/s
    Millis access_delay_mean = 40.0;      // ms
    Millis access_delay_jitter = 20.0;    // ms, uniform half-width
    Millis origination_offset_max = 250.0;  // ms, uniform freshness lag

    Millis edge_lag_ms = 0.0;         // extra freshness lag at d == R
    double edge_lag_power = 5.0;
    Millis edge_access_ms = 0.0;      // extra access delay at d == R
    double edge_access_power = 8.0;
    double loss_edge_prob = 0.0;      // loss probability at d == R
    double loss_power = 10.0;
    double loss_floor = 0.0;          // distance-independent loss floor

    void validate() const {
        if (propagation_speed <= 0.0) throw SimError("delay: propagation_speed must be > 0");
        if (access_delay_mean < 0.0 || access_delay_jitter < 0.0 ||
            origination_offset_max < 0.0 || edge_lag_ms < 0.0 || edge_access_ms < 0.0)
            throw SimError("delay: delays must be >= 0");
        if (access_delay_jitter > access_delay_mean)
            throw SimError("delay: jitter must not exceed mean");
        if (loss_edge_prob < 0.0 || loss_edge_prob > 1.0 || loss_floor < 0.0 || loss_floor > 1.0)
            throw SimError("delay: loss probabilities must be in [0,1]");
    }
};

/// Update cadence: Q updates per second over a total run of T ms.
struct UpdateSchedule {
    double q = 3.0;              // updates per second
    Millis total_time = 1'200'000.0;

    Millis max_aoi() const { return 1000.0 / q; }
    int total_cycles() const {
        return static_cast<int>(std::floor(q * total_time / 1000.0 + 1e-9));
    }
    /// Request mark for cycle m (1-based); cycle 1 requests at t = 0.
    Millis request_time(int cycle) const {
        return static_cast<Millis>(cycle - 1) * max_aoi();
    }

    void validate() const {
        if (q <= 0.0) throw SimError("schedule: q must be > 0");
        if (total_time <= 0.0) throw SimError("schedule: total_time must be > 0");
    }
};

inline double distance_fraction(double distance, double coverage_radius) {
    if (coverage_radius <= 0.0) return 0.0;
    return std::clamp(distance / coverage_radius, 0.0, 1.0);
}

/// Creates the cycle-m update from an in-coverage node. The information was
/// generated at or before the request: a uniform freshness lag plus an edge
/// term that grows as the node nears its coverage boundary.
inline UpdateMessage originate(const NodeState& node, const EgoState& ego, int cycle,
                               Millis request_time, const DelayModel& delay,
                               std::uint64_t seed) {
    if (cycle <= 0) throw SimError("originate: cycle must be >= 1");
    EventRng rng(seed, "channel.originate", std::hash<std::string>{}(node.id), cycle);
    const double d = relative_distance(ego, node);
    const double x = distance_fraction(d, node.coverage_radius);
    Millis lag = rng.next_range(0.0, delay.origination_offset_max);
    lag += delay.edge_lag_ms * std::pow(x, delay.edge_lag_power);

    UpdateMessage msg;
    msg.source_id = node.id;
    msg.source_kind = node.kind;
    msg.cycle = cycle;
    msg.requested_at = request_time;
    msg.originated_at = request_time - lag;
    msg.distance_at_send = d;
    return msg;
}

/// Per-update loss draw; lost updates never reach the buffer.
inline bool update_lost(const NodeState& node, double distance, int cycle,
                        const DelayModel& delay, std::uint64_t seed) {
    if (delay.loss_edge_prob <= 0.0 && delay.loss_floor <= 0.0) return false;
    const double x = distance_fraction(distance, node.coverage_radius);
    const double p = std::min(1.0, delay.loss_floor +
                              delay.loss_edge_prob * std::pow(x, delay.loss_power));
    EventRng rng(seed, "channel.loss", std::hash<std::string>{}(node.id), cycle);
    return rng.next_unit() < p;
}

/// Fills arrival_at: request + propagation + access delay, where the access
/// delay picks up an edge term near the coverage boundary.
inline UpdateMessage deliver(UpdateMessage msg, const NodeState& node,
                             const DelayModel& delay, std::uint64_t seed) {
    EventRng rng(seed, "channel.deliver", std::hash<std::string>{}(msg.source_id), msg.cycle);
    const double propagation_ms = msg.distance_at_send / delay.propagation_speed * 1000.0;
    Millis access = delay.access_delay_mean +
                    rng.next_range(-delay.access_delay_jitter, delay.access_delay_jitter);
    const double x = distance_fraction(msg.distance_at_send, node.coverage_radius);
    access += delay.edge_access_ms * std::pow(x, delay.edge_access_power);
    msg.arrival_at = msg.requested_at + propagation_ms + std::max(0.0, access);
    return msg;
}

/// Per-update age of information in ms: request time plus propagation minus
/// origination time. Negative values mean the clocks disagree.
inline Millis compute_aoi(const UpdateMessage& msg, double propagation_speed = 3.0e8) {
    const Millis value = msg.requested_at +
                         msg.distance_at_send / propagation_speed * 1000.0 -
                         msg.originated_at;
    if (value < 0.0) throw SimError("aoi: origination after request (clock inconsistency)");
    return value;
}

inline UpdateMessage& fill_aoi(UpdateMessage& msg, double propagation_speed = 3.0e8) {
    msg.aoi = compute_aoi(msg, propagation_speed);
    return msg;
}

/// Mean AoI over a fixed number of cycles; missed cycles contribute zero to
/// the sum but stay in the denominator.
inline Millis mean_aoi(const std::vector<Millis>& series, int cycles) {
    if (cycles == 0) throw SimError("mean_aoi: cycle count must be nonzero");
    if (series.empty()) throw SimError("mean_aoi: empty series");
    if (cycles < static_cast<int>(series.size()))
        throw SimError("mean_aoi: cycle count smaller than series");
    double sum = 0.0;
    for (Millis v : series) sum += v;
    return sum / static_cast<double>(cycles);
}

/// Percentage of updates at or below the threshold.
inline double aoi_satisfaction_rate(const std::vector<Millis>& series, Millis threshold) {
    if (series.empty()) throw SimError("aoi_satisfaction_rate: empty series");
    std::size_t ok = 0;
    for (Millis v : series)
        if (v <= threshold) ++ok;
    return 100.0 * static_cast<double>(ok) / static_cast<double>(series.size());
}

/// One row of the AoI training trace exported for the predictor.
struct TraceRow {
    Millis time_ms = 0.0;
    NodeId node_id;
    int cycle = 0;
    Millis aoi_ms = 0.0;
    double rel_speed_mps = 0.0;
};

}  // namespace aoisim

#endif  // AOISIM_CHANNEL_HPP
