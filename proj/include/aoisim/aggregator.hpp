#ifndef AOISIM_AGGREGATOR_HPP
#define AOISIM_AGGREGATOR_HPP

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aoisim/channel.hpp"
#include "aoisim/kinematics.hpp"
#include "aoisim/metrics.hpp"
#include "aoisim/predictor/cluster.hpp"
#include "aoisim/predictor/dataset.hpp"
#include "aoisim/predictor/period.hpp"

namespace aoisim {

enum class Policy { Predictive, Fifo, StopAndWait, Priority };

inline std::string to_string(Policy p) {
    switch (p) {
        case Policy::Predictive: return "predictive";
        case Policy::Fifo: return "fifo";
        case Policy::StopAndWait: return "stop-n-wait";
        case Policy::Priority: return "priority";
    }
    return "?";
}

inline Policy parse_policy(const std::string& name) {
    if (name == "predictive") return Policy::Predictive;
    if (name == "fifo") return Policy::Fifo;
    if (name == "stop-n-wait" || name == "stop_n_wait") return Policy::StopAndWait;
    if (name == "priority") return Policy::Priority;
    throw SimError("unknown policy: " + name);
}

enum class DecisionAction { Initiate, Maintain, Terminate };

inline std::string to_string(DecisionAction a) {
    switch (a) {
        case DecisionAction::Initiate: return "initiate";
        case DecisionAction::Maintain: return "maintain";
        case DecisionAction::Terminate: return "terminate";
    }
    return "?";
}

struct ConnectionDecision {
    NodeId node;
    DecisionAction action = DecisionAction::Maintain;
    int decided_at = 0;       // cycle of the decision
    int effective_cycle = 0;  // when it takes effect (terminate: registry removal)
    std::string basis;        // "measured", "predicted", or "default"
    Millis aoi = 0.0;         // the AoI value the decision was based on
};

/// An update that did not land cleanly in its own segment. The offset is
/// the displacement of the data relative to where it should sit: +k for an
/// update k cycles ahead of the assembling segment, -k for one recovered
/// k cycles behind, -1 for a slot whose update never arrived (the segment
/// falls one refresh behind for that node), and 0 for updates bounced off
/// an already-closed segment ("missed_close", "stale" past the recovery
/// window keeps its negative age).
struct SequencingIssue {
    NodeId node;
    int cycle = 0;        // the segment the issue belongs to
    int offset = 0;       // signed data displacement, 0 only for missed_close
    int detected_at = 0;  // cycle during which the issue was noticed
    std::string kind;     // "early", "late", "missing", "stale", "missed_close"
};

struct EventRow {
    int cycle = 0;        // cycle during which this was logged
    NodeId node;          // "-" for segment-level events
    std::string action;   // initiate/maintain/terminate/place/park/recover/discard/
                          // close/missing/timeout/prune/stale
    int segment = 0;      // segment the event refers to
    int offset = 0;       // sequencing offset where applicable
    Millis wait_ms = 0.0; // close events carry the cycle wait
};

/// One collection round's slot in the update buffer.
struct Segment {
    int cycle = 0;
    Millis request_time = 0.0;
    Millis deadline = 0.0;
    std::vector<NodeId> expected;                 // fixed at open
    std::map<NodeId, UpdateMessage> placed;       // correct, before close
    std::vector<UpdateMessage> extras;            // kept but outside the expected slots
    std::map<NodeId, UpdateMessage> recovered;    // late, pulled in from history
    std::vector<UpdateMessage> parked;            // early arrivals waiting for this cycle
    std::vector<UpdateMessage> fifo_fills;        // slot fills in arrival order
    std::vector<UpdateMessage> priority_pool;     // candidates awaiting the sort
    bool closed = false;
    Millis close_time = 0.0;
    bool frozen = false;

    bool is_expected(const NodeId& id) const {
        return std::find(expected.begin(), expected.end(), id) != expected.end();
    }
};

struct NodeRecord {
    NodeKind kind = NodeKind::Sensor;
    int expect_from = 0;        // first cycle this node is awaited
    int period = 1;             // cycles between prediction refreshes
    int next_decision_at = 0;
    bool written_off = false;   // terminate decided; no longer awaited
    int remove_at = -1;         // registry removal cycle (terminate effective)
    int silent_cycles = 0;      // consecutive expected cycles with nothing received
    Millis last_origination = 0.0;
    Millis last_aoi = 0.0;
    int last_received_cycle = 0;
    std::deque<WindowEntry> window;  // per-cycle AoI history for forecasting
};

struct AggregatorConfig {
    Policy policy = Policy::Predictive;
    double q = 3.0;                       // collection rounds per second
    Millis max_aoi = 1000.0 / 3.0;
    int history_depth = 2;                // recoverable past segments
    Millis decision_cost_ms = 5.0;        // modeled per-cycle aggregation cost
    Millis closure_lag_ms = 25.0;         // bookkeeping lag past the deadline
    Millis bucket_width_ms = 50.0;        // AoI cluster granularity
    int window = 10;                      // forecast input length
    Millis aoi_cap = 999.0;               // staleness clamp for training series
    int n_max = 64;
    int sensor_period = 5;
    int vehicle_period = 10;
    bool adaptive_period = false;         // derive periods from the mobility rule
    Millis prediction_latency_ms = 40.0;  // accounting value for one forecast
    Millis sw_timeout_ms = 1000.0;        // stop-n-wait per-node patience
    int prune_after_cycles = 2;           // drop a node after this many silent cycles
    bool dssr_over_received = false;      // alternative denominator

    Millis cycle_period() const { return 1000.0 / q; }

    void validate() const {
        if (q <= 0.0) throw SimError("aggregator: q must be > 0");
        if (max_aoi <= 0.0) throw SimError("aggregator: max_aoi must be > 0");
        if (history_depth < 0) throw SimError("aggregator: negative history depth");
        if (decision_cost_ms < 0.0 || closure_lag_ms < 0.0 || prediction_latency_ms < 0.0)
            throw SimError("aggregator: negative cost");
        if (closure_lag_ms >= cycle_period())
            throw SimError("aggregator: closure lag must stay within one cycle");
        if (bucket_width_ms <= 0.0) throw SimError("aggregator: bucket width must be > 0");
        if (window < 1) throw SimError("aggregator: window must be >= 1");
        if (n_max < 1 || sensor_period < 1 || vehicle_period < 1)
            throw SimError("aggregator: periods must be >= 1");
        if (sensor_period > n_max || vehicle_period > n_max)
            throw SimError("aggregator: period exceeds n_max");
        if (sw_timeout_ms <= 0.0) throw SimError("aggregator: timeout must be > 0");
        if (prune_after_cycles < 1) throw SimError("aggregator: prune window must be >= 1");
    }
};

struct NodeSnapshot {
    NodeKind kind = NodeKind::Sensor;
    double relative_speed = 0.0;
    double distance = 0.0;
    double coverage_radius = 0.0;
    bool in_coverage = false;
};

/// Books originated/lost on the channel side against what the buffer did
/// with each delivery; the two sides must balance at all times.
struct Accounting {
    std::uint64_t originated = 0;  // maintained by the harness
    std::uint64_t lost = 0;        // maintained by the harness
    std::uint64_t delivered = 0;
    std::uint64_t placed_expected = 0;
    std::uint64_t placed_extra = 0;
    std::uint64_t recovered_late = 0;
    std::uint64_t discarded_stale = 0;
    std::uint64_t discarded_over_aoi = 0;
    std::uint64_t discarded_admission = 0;
    std::uint64_t parked_pending = 0;   // early arrivals not yet promoted

    std::uint64_t handled() const {
        return placed_expected + placed_extra + recovered_late + discarded_stale +
               discarded_over_aoi + discarded_admission + parked_pending;
    }
};

/// The service-side state machine: admits nodes, runs the periodic
/// prediction pass, routes every delivered update into a segment (or parks
/// or discards it), and closes segments under the selected policy.
class AggregationEngine {
public:
    using PredictFn = std::function<double(const FeatureWindow&, int horizon)>;

    explicit AggregationEngine(AggregatorConfig config) : config_(std::move(config)) {
        config_.validate();
    }

    void set_predictor(PredictFn fn) { predict_ = std::move(fn); }

    const AggregatorConfig& config() const { return config_; }

    /// Opens cycle m: expires terminated registrations, prunes silent nodes,
    /// fixes the expected set, and (for the predictive policy) runs the
    /// prediction pass for nodes whose refresh is due.
    void begin_cycle(int m, Millis request_time, const std::map<NodeId, NodeSnapshot>& snap) {
        if (m != current_cycle_ + 1)
            throw SimError("aggregator: cycles must advance one at a time");
        current_cycle_ = m;
        request_time_ = request_time;
        snapshot_ = snap;

        expire_and_prune(m);

        Segment& seg = segments_[m];  // may already hold parked early arrivals
        seg.cycle = m;
        seg.request_time = request_time;
        seg.deadline = request_time + config_.cycle_period();
        for (const auto& [id, rec] : registry_)
            if (!rec.written_off && rec.expect_from <= m) seg.expected.push_back(id);

        if (config_.policy == Policy::Predictive) run_decision_pass(m);

        if (seg.expected.empty()) {
            // Nothing awaited, so there is nothing to assemble; arrivals can
            // only be admissions or parked data for later cycles.
            seg.closed = true;
            seg.close_time = request_time;
        }

        promote_parked(seg);
    }

    /// Routes one delivered update. Must be called in arrival-time order
    /// between begin_cycle and finish_cycle of the enclosing cycle.
    void on_arrival(const UpdateMessage& msg) {
        ++accounting_.delivered;
        aoi_received_sum_ += msg.aoi;
        ++aoi_received_count_;
        if (msg.aoi <= config_.max_aoi) ++aoi_satisfied_count_;
        route(msg);
    }

    /// Closes cycle m at its deadline (plus the bookkeeping lag), freezes
    /// the segment that just left the recovery window, updates per-node AoI
    /// series, and emits the cycle's metrics row.
    CycleMetrics finish_cycle() {
        Segment& seg = segments_.at(current_cycle_);
        close_segment(seg);
        update_node_series(seg);
        freeze_old_segment();

        CycleMetrics metrics;
        metrics.cycle = current_cycle_;
        metrics.expected = static_cast<int>(seg.expected.size());
        metrics.received = received_for_cycle(current_cycle_);
        metrics.placed = placed_correct(seg);
        metrics.denominator =
            config_.dssr_over_received ? metrics.received : metrics.expected;
        metrics.issues = issues_this_cycle_;
        issues_this_cycle_ = 0;

        const Millis wait = std::max(0.0, seg.close_time - seg.request_time);
        metrics.latency = cycle_latency(wait, config_.decision_cost_ms,
                                        amortized_prediction_ms(), 1);
        events_.push_back({current_cycle_, "-", "close", current_cycle_, 0, wait});
        return metrics;
    }

    // -- inspection ---------------------------------------------------------

    const std::vector<EventRow>& events() const { return events_; }
    const std::vector<SequencingIssue>& issues() const { return issues_; }
    const std::vector<ConnectionDecision>& decisions() const { return decisions_; }
    Accounting& accounting() { return accounting_; }
    const Accounting& accounting() const { return accounting_; }
    std::uint64_t prediction_invocations() const { return prediction_invocations_; }
    const std::map<NodeId, NodeRecord>& registry() const { return registry_; }
    const std::map<int, Segment>& segments() const { return segments_; }
    int current_cycle() const { return current_cycle_; }

    double aoi_satisfaction_pct() const {
        if (aoi_received_count_ == 0) return 0.0;
        return 100.0 * static_cast<double>(aoi_satisfied_count_) /
               static_cast<double>(aoi_received_count_);
    }

    double mean_received_aoi() const {
        if (aoi_received_count_ == 0) return 0.0;
        return aoi_received_sum_ / static_cast<double>(aoi_received_count_);
    }

    /// Amortized forecast cost charged to each cycle: one forecast per
    /// refresh period, averaged per node kind and then across kinds so a
    /// large sensor fleet does not drown out the vehicle share.
    Millis amortized_prediction_ms() const {
        if (config_.policy != Policy::Predictive) return 0.0;
        double sensor_sum = 0.0, vehicle_sum = 0.0;
        int sensors = 0, vehicles = 0;
        for (const auto& [id, rec] : registry_) {
            if (rec.written_off) continue;
            const double share = config_.prediction_latency_ms / rec.period;
            if (rec.kind == NodeKind::Sensor) {
                sensor_sum += share;
                ++sensors;
            } else {
                vehicle_sum += share;
                ++vehicles;
            }
        }
        double total = 0.0;
        int kinds = 0;
        if (sensors > 0) {
            total += sensor_sum / sensors;
            ++kinds;
        }
        if (vehicles > 0) {
            total += vehicle_sum / vehicles;
            ++kinds;
        }
        return kinds > 0 ? total / kinds : 0.0;
    }

private:
    // -- admission and decisions --------------------------------------------

    void route(const UpdateMessage& msg) {
        if (msg.cycle > current_cycle_) {
            park_early(msg);
            return;
        }
        if (msg.cycle < current_cycle_) {
            recover_or_drop_late(msg);
            return;
        }
        auto reg = registry_.find(msg.source_id);
        if (reg == registry_.end()) {
            admit(msg);
            return;
        }
        handle_current(msg, reg->second);
    }

    void admit(const UpdateMessage& msg) {
        if (msg.aoi > config_.max_aoi) {
            ++accounting_.discarded_admission;
            events_.push_back({current_cycle_, msg.source_id, "discard", msg.cycle, 0, 0.0});
            return;
        }
        NodeRecord rec;
        rec.kind = msg.source_kind;
        rec.expect_from = msg.cycle + 1;
        rec.period = period_for(msg.source_id, msg.source_kind);
        rec.next_decision_at = rec.expect_from + rec.period;
        rec.last_origination = msg.originated_at;
        rec.last_aoi = msg.aoi;
        rec.last_received_cycle = msg.cycle;
        registry_[msg.source_id] = rec;
        decisions_.push_back({msg.source_id, DecisionAction::Initiate, current_cycle_,
                              rec.expect_from, "measured", msg.aoi});
        events_.push_back({current_cycle_, msg.source_id, "initiate", msg.cycle, 0, 0.0});
        place_extra(msg);
    }

    int period_for(const NodeId& id, NodeKind kind) const {
        if (config_.adaptive_period) {
            auto it = snapshot_.find(id);
            if (it != snapshot_.end() && it->second.coverage_radius > 0.0) {
                const double s = scar(it->second.relative_speed,
                                      2.0 * it->second.coverage_radius);
                return choose_period(config_.prediction_latency_ms, config_.q, s,
                                     config_.n_max).period;
            }
        }
        return kind == NodeKind::Sensor ? config_.sensor_period : config_.vehicle_period;
    }

    void run_decision_pass(int m) {
        // Group due nodes by refresh period so a shared forecast stays
        // horizon-consistent, then cluster within each group by current AoI.
        std::map<int, std::map<NodeId, Millis>> due_by_period;
        for (auto& [id, rec] : registry_) {
            if (rec.written_off || rec.next_decision_at != m) continue;
            if (static_cast<int>(rec.window.size()) < config_.window) {
                decisions_.push_back({id, DecisionAction::Maintain, m, m + rec.period,
                                      "default", rec.last_aoi});
                events_.push_back({m, id, "maintain", m, 0, 0.0});
                rec.next_decision_at = m + rec.period;
                continue;
            }
            due_by_period[rec.period][id] = rec.last_aoi;
        }

        for (const auto& [period, members] : due_by_period) {
            const auto clusters = cluster_nodes(members, config_.bucket_width_ms);
            for (const AoiCluster& cluster : clusters) {
                const NodeRecord& rep = registry_.at(cluster.representative);
                FeatureWindow window;
                window.entries.assign(rep.window.begin(), rep.window.end());
                double predicted = rep.last_aoi;
                if (predict_) {
                    predicted = predict_(window, period);
                    ++prediction_invocations_;
                }
                for (const NodeId& id : cluster.members) {
                    NodeRecord& rec = registry_.at(id);
                    if (predicted > config_.max_aoi) {
                        rec.written_off = true;
                        rec.remove_at = m + period;
                        decisions_.push_back({id, DecisionAction::Terminate, m, m + period,
                                              "predicted", predicted});
                        events_.push_back({m, id, "terminate", m + period, 0, 0.0});
                    } else {
                        rec.next_decision_at = m + period;
                        decisions_.push_back({id, DecisionAction::Maintain, m, m + period,
                                              "predicted", predicted});
                        events_.push_back({m, id, "maintain", m, 0, 0.0});
                    }
                }
            }
        }
    }

    void expire_and_prune(int m) {
        for (auto it = registry_.begin(); it != registry_.end();) {
            NodeRecord& rec = it->second;
            if (rec.remove_at >= 0 && rec.remove_at <= m) {
                if (rec.silent_cycles == 0) {
                    // Still delivering: the forecast that ended this
                    // connection was wrong, so put the node back on the
                    // roster instead of forcing a cold re-admission.
                    rec.written_off = false;
                    rec.remove_at = -1;
                    rec.next_decision_at = m + rec.period;
                    events_.push_back({m, it->first, "reinstate", m, 0, 0.0});
                    ++it;
                    continue;
                }
                it = registry_.erase(it);
                continue;
            }
            if (config_.policy != Policy::StopAndWait && !rec.written_off &&
                rec.silent_cycles >= config_.prune_after_cycles) {
                events_.push_back({m, it->first, "prune", m, 0, 0.0});
                it = registry_.erase(it);
                continue;
            }
            ++it;
        }
    }

    // -- arrival routing ----------------------------------------------------

    void handle_current(const UpdateMessage& msg, NodeRecord& rec) {
        Segment& seg = segments_.at(current_cycle_);
        if (msg.aoi > config_.max_aoi) {
            ++accounting_.discarded_over_aoi;
            events_.push_back({current_cycle_, msg.source_id, "discard", msg.cycle, 0, 0.0});
            return;
        }
        note_received(rec, msg);

        switch (config_.policy) {
            case Policy::Predictive:
            case Policy::StopAndWait:
                if (seg.closed) {
                    // Possible only for non-awaited senders; keep the data.
                    place_extra_into(seg, msg);
                } else if (seg.is_expected(msg.source_id)) {
                    seg.placed[msg.source_id] = msg;
                    events_.push_back({current_cycle_, msg.source_id, "place", msg.cycle, 0, 0.0});
                    ++accounting_.placed_expected;
                    // The serial handler finishes earlier segments first, so
                    // even a fully answered roster cannot close before the
                    // previous close.
                    maybe_close_predictive(seg, config_.policy == Policy::StopAndWait
                                                    ? std::max(msg.arrival_at, sw_prev_close_)
                                                    : msg.arrival_at);
                } else {
                    place_extra_into(seg, msg);
                }
                break;
            case Policy::Fifo:
                if (seg.closed) {
                    record_missed_close(msg);
                } else {
                    fifo_fill(seg, msg);
                }
                break;
            case Policy::Priority:
                if (seg.closed) {
                    record_missed_close(msg);
                } else {
                    seg.priority_pool.push_back(msg);
                }
                break;
        }
    }

    void park_early(const UpdateMessage& msg) {
        Segment& future = segments_[msg.cycle];
        future.cycle = msg.cycle;
        future.parked.push_back(msg);
        ++accounting_.parked_pending;
        // Only a sequencing issue if it barged in on a segment still being
        // assembled; once the current segment is closed the update merely
        // waits for its own slot to open.
        if (!segments_.at(current_cycle_).closed) {
            issues_.push_back({msg.source_id, msg.cycle, msg.cycle - current_cycle_,
                               current_cycle_, "early"});
            ++issues_this_cycle_;
        }
        events_.push_back({current_cycle_, msg.source_id, "park", msg.cycle,
                           msg.cycle - current_cycle_, 0.0});
    }

    void recover_or_drop_late(const UpdateMessage& msg) {
        const int age = current_cycle_ - msg.cycle;
        auto it = segments_.find(msg.cycle);
        if (age > config_.history_depth || it == segments_.end() || it->second.frozen) {
            ++accounting_.discarded_stale;
            issues_.push_back({msg.source_id, msg.cycle, -age, current_cycle_, "stale"});
            ++issues_this_cycle_;
            events_.push_back({current_cycle_, msg.source_id, "stale", msg.cycle, -age, 0.0});
            return;
        }
        it->second.recovered[msg.source_id] = msg;
        ++accounting_.recovered_late;
        issues_.push_back({msg.source_id, msg.cycle, -age, current_cycle_, "late"});
        ++issues_this_cycle_;
        events_.push_back({current_cycle_, msg.source_id, "recover", msg.cycle, -age, 0.0});
        auto reg = registry_.find(msg.source_id);
        if (reg != registry_.end()) note_received(reg->second, msg);
    }

    void place_extra(const UpdateMessage& msg) {
        place_extra_into(segments_.at(current_cycle_), msg);
    }

    void place_extra_into(Segment& seg, const UpdateMessage& msg) {
        seg.extras.push_back(msg);
        ++accounting_.placed_extra;
        events_.push_back({current_cycle_, msg.source_id, "place", msg.cycle, 0, 0.0});
    }

    void record_missed_close(const UpdateMessage& msg) {
        Segment& seg = segments_.at(current_cycle_);
        seg.extras.push_back(msg);
        ++accounting_.placed_extra;
        issues_.push_back({msg.source_id, msg.cycle, 0, current_cycle_, "missed_close"});
        ++issues_this_cycle_;
        events_.push_back({current_cycle_, msg.source_id, "discard", msg.cycle, 0, 0.0});
    }

    void note_received(NodeRecord& rec, const UpdateMessage& msg) {
        if (msg.cycle >= rec.last_received_cycle) {
            rec.last_origination = msg.originated_at;
            rec.last_aoi = msg.aoi;
            rec.last_received_cycle = msg.cycle;
        }
    }

    void fifo_fill(Segment& seg, const UpdateMessage& msg) {
        seg.fifo_fills.push_back(msg);
        if (seg.is_expected(msg.source_id) && msg.cycle == seg.cycle &&
            seg.placed.find(msg.source_id) == seg.placed.end()) {
            seg.placed[msg.source_id] = msg;
            ++accounting_.placed_expected;
            events_.push_back({current_cycle_, msg.source_id, "place", msg.cycle, 0, 0.0});
        } else {
            place_extra_into(seg, msg);
        }
        if (seg.fifo_fills.size() >= seg.expected.size() && !seg.expected.empty()) {
            seg.closed = true;
            seg.close_time = msg.arrival_at;
        }
    }

    void maybe_close_predictive(Segment& seg, Millis at) {
        if (seg.placed.size() == seg.expected.size() && !seg.expected.empty()) {
            seg.closed = true;
            seg.close_time = at;
        }
    }

    void promote_parked(Segment& seg) {
        for (const UpdateMessage& msg : seg.parked) {
            --accounting_.parked_pending;
            auto reg = registry_.find(msg.source_id);
            if (reg == registry_.end()) {
                admit(msg);
                continue;
            }
            handle_current(msg, reg->second);
        }
        seg.parked.clear();
    }

    // -- closure ------------------------------------------------------------

    void close_segment(Segment& seg) {
        const Millis fallback = seg.deadline + config_.closure_lag_ms;
        switch (config_.policy) {
            case Policy::Predictive:
            case Policy::Fifo:
                if (!seg.closed) {
                    seg.closed = true;
                    seg.close_time = fallback;
                }
                break;
            case Policy::Priority:
                close_priority(seg, fallback);
                break;
            case Policy::StopAndWait:
                close_stop_and_wait(seg);
                break;
        }
        sw_prev_close_ = std::max(sw_prev_close_, seg.close_time);
    }

    void close_priority(Segment& seg, Millis at) {
        if (seg.closed) return;
        // Vehicles outrank sensors, then fresher data, then stable id order.
        std::stable_sort(seg.priority_pool.begin(), seg.priority_pool.end(),
                         [](const UpdateMessage& a, const UpdateMessage& b) {
                             if (a.source_kind != b.source_kind)
                                 return a.source_kind == NodeKind::Vehicle;
                             if (a.aoi != b.aoi) return a.aoi < b.aoi;
                             return a.source_id < b.source_id;
                         });
        const std::size_t slots = seg.expected.size();
        for (std::size_t i = 0; i < seg.priority_pool.size(); ++i) {
            const UpdateMessage& msg = seg.priority_pool[i];
            if (i < slots && seg.is_expected(msg.source_id) && msg.cycle == seg.cycle &&
                seg.placed.find(msg.source_id) == seg.placed.end()) {
                seg.placed[msg.source_id] = msg;
                ++accounting_.placed_expected;
                events_.push_back({current_cycle_, msg.source_id, "place", msg.cycle, 0, 0.0});
            } else {
                place_extra_into(seg, msg);
                if (i >= slots) {
                    issues_.push_back({msg.source_id, msg.cycle, 0, current_cycle_,
                                       "missed_close"});
                    ++issues_this_cycle_;
                }
            }
        }
        seg.priority_pool.clear();
        seg.closed = true;
        seg.close_time = at;
    }

    void close_stop_and_wait(Segment& seg) {
        if (seg.closed) return;
        // Nodes are served strictly one at a time: the handler waits for each
        // awaited node in turn and burns the full timeout when one is silent.
        // Backlog carries over, so close times never move backwards.
        Millis t = std::max(seg.request_time, sw_prev_close_);
        for (const NodeId& id : seg.expected) {
            auto placed = seg.placed.find(id);
            if (placed != seg.placed.end()) {
                t = std::max(t, placed->second.arrival_at);
                continue;
            }
            t += config_.sw_timeout_ms;
            events_.push_back({current_cycle_, id, "timeout", seg.cycle, 0, 0.0});
            auto reg = registry_.find(id);
            if (reg != registry_.end()) registry_.erase(reg);
        }
        seg.closed = true;
        seg.close_time = t;
    }

    int received_for_cycle(int cycle) const {
        auto it = segments_.find(cycle);
        if (it == segments_.end()) return 0;
        const Segment& seg = it->second;
        int count = static_cast<int>(seg.placed.size());
        for (const UpdateMessage& msg : seg.extras)
            if (msg.cycle == cycle) ++count;
        return count;
    }

    int placed_correct(const Segment& seg) const {
        int count = 0;
        for (const auto& [id, msg] : seg.placed)
            if (msg.cycle == seg.cycle && seg.is_expected(id)) ++count;
        return count;
    }

    // -- per-cycle series upkeep --------------------------------------------

    void update_node_series(const Segment& seg) {
        // Every roster entry gets a row per cycle, not just the awaited
        // ones: a written-off node that keeps delivering must keep its
        // history warm in case the write-off is reversed.
        std::map<NodeId, Millis> extra_aoi;
        for (const UpdateMessage& msg : seg.extras)
            if (msg.cycle == seg.cycle) extra_aoi.emplace(msg.source_id, msg.aoi);

        for (auto& [id, rec] : registry_) {
            Millis aoi;
            auto placed = seg.placed.find(id);
            auto extra = extra_aoi.find(id);
            if (placed != seg.placed.end()) {
                aoi = placed->second.aoi;
                rec.silent_cycles = 0;
            } else if (seg.recovered.count(id) > 0) {
                aoi = seg.recovered.at(id).aoi;
                rec.silent_cycles = 0;
            } else if (extra != extra_aoi.end()) {
                aoi = extra->second;
                rec.silent_cycles = 0;
            } else if (rec.last_received_cycle > 0) {
                const int gap = seg.cycle - rec.last_received_cycle;
                aoi = std::min(config_.aoi_cap,
                               rec.last_aoi + config_.cycle_period() * gap);
                ++rec.silent_cycles;
            } else {
                continue;  // nothing heard yet, nothing to extrapolate
            }
            double rel_speed = 0.0;
            auto snap = snapshot_.find(id);
            if (snap != snapshot_.end()) rel_speed = snap->second.relative_speed;
            rec.window.push_back({seg.request_time, rel_speed, aoi});
            while (static_cast<int>(rec.window.size()) > config_.window) rec.window.pop_front();
        }
    }

    void freeze_old_segment() {
        const int freeze_cycle = current_cycle_ - config_.history_depth;
        auto it = segments_.find(freeze_cycle);
        if (it == segments_.end() || it->second.frozen) return;
        Segment& seg = it->second;
        seg.frozen = true;
        for (const NodeId& id : seg.expected) {
            if (seg.placed.count(id) > 0 || seg.recovered.count(id) > 0) continue;
            // The slot falls back on the node's previous update, so the
            // segment runs one refresh behind for it.
            issues_.push_back({id, seg.cycle, -1, current_cycle_, "missing"});
            ++issues_this_cycle_;
            events_.push_back({current_cycle_, id, "missing", seg.cycle, -1, 0.0});
        }
        // Drop buffers that can no longer change; keep the bookkeeping shell.
        seg.fifo_fills.clear();
        seg.fifo_fills.shrink_to_fit();
    }

    AggregatorConfig config_;
    PredictFn predict_;
    std::map<NodeId, NodeRecord> registry_;
    std::map<int, Segment> segments_;
    std::map<NodeId, NodeSnapshot> snapshot_;
    std::vector<EventRow> events_;
    std::vector<SequencingIssue> issues_;
    std::vector<ConnectionDecision> decisions_;
    Accounting accounting_;
    std::uint64_t prediction_invocations_ = 0;
    std::uint64_t aoi_received_count_ = 0;
    std::uint64_t aoi_satisfied_count_ = 0;
    double aoi_received_sum_ = 0.0;
    int current_cycle_ = 0;
    Millis request_time_ = 0.0;
    Millis sw_prev_close_ = 0.0;
    int issues_this_cycle_ = 0;
};

}  // namespace aoisim

#endif  // AOISIM_AGGREGATOR_HPP
