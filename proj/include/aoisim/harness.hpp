#ifndef AOISIM_HARNESS_HPP
#define AOISIM_HARNESS_HPP

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aoisim/aggregator.hpp"
#include "aoisim/metrics.hpp"
#include "aoisim/predictor/model.hpp"
#include "aoisim/scenario.hpp"

namespace aoisim {

struct CycleSnapshot {
    Millis request_time = 0.0;
    std::map<NodeId, NodeSnapshot> nodes;
};

/// Everything the channel produced for one (scenario, seed) pair. This is
/// policy-independent by construction: the same trace drives every policy,
/// so cross-policy comparisons see identical update streams.
struct ChannelTrace {
    std::vector<UpdateMessage> deliveries;  // sorted by arrival time
    std::vector<CycleSnapshot> snapshots;   // index m-1 holds cycle m
    std::vector<TraceRow> series;           // per node per cycle, staleness included
    std::uint64_t originated = 0;
    std::uint64_t lost = 0;
    std::uint64_t stream_hash = kFnvOffset;
    int total_cycles = 0;
};

/// Simulates kinematics and the channel for the whole run. Out-of-coverage
/// nodes stay silent; everyone else answers every collection request.
inline ChannelTrace generate_trace(const Scenario& sc, std::uint64_t seed) {
    sc.validate();
    const UpdateSchedule sched = sc.schedule();
    const Millis period = sched.max_aoi();
    const int total = sched.total_cycles();

    ChannelTrace trace;
    trace.total_cycles = total;
    World world = sc.build_world();

    for (int m = 1; m <= total; ++m) {
        const Millis request = sched.request_time(m);
        CycleSnapshot snap;
        snap.request_time = request;
        for (const NodeState& node : world.nodes) {
            NodeSnapshot ns;
            ns.kind = node.kind;
            ns.relative_speed = relative_speed(world.ego, node);
            ns.distance = relative_distance(world.ego, node);
            ns.coverage_radius = node.coverage_radius;
            ns.in_coverage = in_coverage(world.ego, node);
            snap.nodes[node.id] = ns;

            if (!ns.in_coverage) continue;
            ++trace.originated;
            if (update_lost(node, ns.distance, m, sc.delay, seed)) {
                ++trace.lost;
                continue;
            }
            UpdateMessage msg = originate(node, world.ego, m, request, sc.delay, seed);
            msg = deliver(msg, node, sc.delay, seed);
            fill_aoi(msg, sc.delay.propagation_speed);
            trace.stream_hash = fnv1a_str(trace.stream_hash, msg.source_id);
            trace.stream_hash = fnv1a(trace.stream_hash, &msg.cycle, sizeof(msg.cycle));
            const auto arrival_bits = std::bit_cast<std::uint64_t>(msg.arrival_at);
            const auto aoi_bits = std::bit_cast<std::uint64_t>(msg.aoi);
            trace.stream_hash = fnv1a(trace.stream_hash, &arrival_bits, sizeof(arrival_bits));
            trace.stream_hash = fnv1a(trace.stream_hash, &aoi_bits, sizeof(aoi_bits));
            trace.deliveries.push_back(msg);
        }
        trace.snapshots.push_back(std::move(snap));
        step_world(world, period, seed, static_cast<std::uint64_t>(m));
    }

    std::stable_sort(trace.deliveries.begin(), trace.deliveries.end(),
                     [](const UpdateMessage& a, const UpdateMessage& b) {
                         if (a.arrival_at != b.arrival_at) return a.arrival_at < b.arrival_at;
                         if (a.cycle != b.cycle) return a.cycle < b.cycle;
                         return a.source_id < b.source_id;
                     });

    // Per-node AoI series: the measured value when an update came through,
    // linearly growing staleness (capped) when it did not. The tail past the
    // last covered cycle keeps growing so forecasts can see past an exit.
    std::map<NodeId, std::map<int, Millis>> got;
    for (const UpdateMessage& msg : trace.deliveries) got[msg.source_id][msg.cycle] = msg.aoi;

    const int tail = sc.predictor.window + std::max(sc.aggregator.sensor_period,
                                                    sc.aggregator.vehicle_period);
    for (const NodeState& node : sc.nodes) {
        int last_covered = 0;
        for (int m = 1; m <= total; ++m)
            if (trace.snapshots[static_cast<std::size_t>(m - 1)].nodes.at(node.id).in_coverage)
                last_covered = m;
        if (last_covered == 0) continue;

        const auto& node_got = got[node.id];
        bool seen = false;
        Millis last_aoi = 0.0;
        int last_cycle = 0;
        const int stop = std::min(total, last_covered + tail);
        for (int m = 1; m <= stop; ++m) {
            const auto& snap = trace.snapshots[static_cast<std::size_t>(m - 1)];
            auto hit = node_got.find(m);
            Millis aoi;
            if (hit != node_got.end()) {
                aoi = hit->second;
                last_aoi = aoi;
                last_cycle = m;
                seen = true;
            } else if (seen) {
                aoi = std::min(sc.aggregator.aoi_cap, last_aoi + period * (m - last_cycle));
            } else {
                continue;  // nothing known about this node yet
            }
            trace.series.push_back({snap.request_time, node.id, m, aoi,
                                    snap.nodes.at(node.id).relative_speed});
        }
    }
    return trace;
}

/// Straight-line extrapolation of the window's AoI trend, used when no
/// trained model covers the requested horizon.
inline double trend_forecast(const FeatureWindow& window, int horizon, Millis period_ms) {
    if (window.entries.empty()) throw SimError("trend_forecast: empty window");
    const std::size_t n = window.entries.size();
    double mean_t = 0.0, mean_a = 0.0;
    for (const WindowEntry& e : window.entries) {
        mean_t += e.timestamp;
        mean_a += e.aoi;
    }
    mean_t /= static_cast<double>(n);
    mean_a /= static_cast<double>(n);
    double cov = 0.0, var = 0.0;
    for (const WindowEntry& e : window.entries) {
        cov += (e.timestamp - mean_t) * (e.aoi - mean_a);
        var += (e.timestamp - mean_t) * (e.timestamp - mean_t);
    }
    const double slope = var > 0.0 ? cov / var : 0.0;
    const double ahead = window.entries.back().timestamp + horizon * period_ms;
    return std::max(0.0, window.entries.back().aoi + slope * (ahead - window.entries.back().timestamp));
}

/// Trains one forecaster per refresh horizon from the leading part of the
/// trace. Returns an empty map when the trace is too short to learn from.
inline std::map<int, PredictorModel> bootstrap_models(const Scenario& sc,
                                                      const ChannelTrace& trace) {
    std::map<int, PredictorModel> models;
    if (!sc.predictor.bootstrap) return models;

    std::vector<TraceRow> rows;
    for (const TraceRow& r : trace.series)
        if (r.cycle <= sc.predictor.bootstrap_cycles) rows.push_back(r);

    std::vector<int> horizons{sc.aggregator.sensor_period};
    if (sc.aggregator.vehicle_period != sc.aggregator.sensor_period)
        horizons.push_back(sc.aggregator.vehicle_period);

    for (int horizon : horizons) {
        try {
            const SupervisedDataset ds = make_dataset(rows, sc.predictor.window, horizon,
                                                      sc.predictor.train_ratio);
            PredictorOptions options;
            options.kind = sc.predictor.kind;
            options.recurrent = sc.predictor.recurrent;
            options.forest = sc.predictor.forest;
            options.initial_latency_ms = sc.predictor.initial_latency_ms;
            models.emplace(horizon, PredictorModel::train(ds, options));
        } catch (const SimError&) {
            // Not enough history for this horizon; the trend fallback covers it.
        }
    }
    return models;
}

struct ExperimentResult {
    RunReport report;
    std::vector<CycleMetrics> cycles;
    std::vector<EventRow> events;
    std::vector<SequencingIssue> issues;
    std::vector<ConnectionDecision> decisions;
    Accounting accounting;
    std::uint64_t leftover_deliveries = 0;  // arrived after the last close
    double measured_prediction_ms = 0.0;    // wall-clock running mean, if modeled
};

/// Replays one policy over a prepared channel trace.
inline ExperimentResult run_policy(const Scenario& sc, Policy policy, std::uint64_t seed,
                                   const ChannelTrace& trace,
                                   std::map<int, PredictorModel>* models = nullptr) {
    const UpdateSchedule sched = sc.schedule();
    const Millis period = sched.max_aoi();

    AggregatorConfig cfg = sc.aggregator;
    cfg.policy = policy;
    AggregationEngine engine(cfg);

    if (policy == Policy::Predictive) {
        engine.set_predictor([&sc, models, period](const FeatureWindow& w, int horizon) {
            if (models != nullptr) {
                auto it = models->find(horizon);
                if (it != models->end()) return it->second.predict_n_step(w, horizon);
            }
            return trend_forecast(w, horizon, period);
        });
    }

    ExperimentResult out;
    auto next = trace.deliveries.begin();
    for (int m = 1; m <= trace.total_cycles; ++m) {
        const CycleSnapshot& snap = trace.snapshots[static_cast<std::size_t>(m - 1)];
        engine.begin_cycle(m, snap.request_time, snap.nodes);
        const Millis boundary = snap.request_time + period + cfg.closure_lag_ms;
        while (next != trace.deliveries.end() && next->arrival_at < boundary) {
            engine.on_arrival(*next);
            ++next;
        }
        out.cycles.push_back(engine.finish_cycle());
    }
    out.leftover_deliveries =
        static_cast<std::uint64_t>(std::distance(next, trace.deliveries.end()));

    out.report = aggregate_report(out.cycles);
    out.report.scenario_id = sc.id;
    out.report.policy = to_string(policy);
    out.report.seed = seed;
    out.report.speed_mps = sc.ego.speed;
    out.report.aoi_satisfaction_pct = engine.aoi_satisfaction_pct();
    out.report.mean_aoi_ms = engine.mean_received_aoi();
    out.report.prediction_invocations = engine.prediction_invocations();
    out.report.updates_received = engine.accounting().delivered;
    out.report.updates_discarded = engine.accounting().discarded_stale +
                                   engine.accounting().discarded_over_aoi +
                                   engine.accounting().discarded_admission;
    out.report.stream_hash = trace.stream_hash;

    out.events = engine.events();
    out.issues = engine.issues();
    out.decisions = engine.decisions();
    out.accounting = engine.accounting();
    out.accounting.originated = trace.originated;
    out.accounting.lost = trace.lost;
    out.report.sequencing_issues = static_cast<std::uint64_t>(out.issues.size());

    if (models != nullptr) {
        double sum = 0.0;
        int n = 0;
        for (const auto& [horizon, model] : *models) {
            sum += model.mean_latency_ms();
            ++n;
        }
        if (n > 0) out.measured_prediction_ms = sum / n;
    }
    return out;
}

struct SimulationOutput {
    ChannelTrace trace;
    std::map<int, PredictorModel> models;
    ExperimentResult result;
};

/// One full run: channel trace, optional self-trained forecasters, policy replay.
inline SimulationOutput simulate(const Scenario& sc, Policy policy, std::uint64_t seed) {
    SimulationOutput out;
    out.trace = generate_trace(sc, seed);
    if (policy == Policy::Predictive && sc.predictor.bootstrap)
        out.models = bootstrap_models(sc, out.trace);
    out.result = run_policy(sc, policy, seed, out.trace,
                            out.models.empty() ? nullptr : &out.models);
    return out;
}

struct SweepConfig {
    std::vector<double> speeds{15.0, 20.0, 25.0, 30.0};
    std::vector<Policy> policies{Policy::Predictive, Policy::Fifo, Policy::StopAndWait,
                                 Policy::Priority};
    std::vector<std::uint64_t> seeds{1, 2, 3};
};

struct SweepResult {
    std::vector<RunReport> runs;
    std::vector<ComparisonRow> comparison;
};

/// Cartesian sweep over speeds, policies, and seeds. Each (speed, seed)
/// pair generates one trace shared by all policies; the reports' stream
/// hashes prove the pairing.
inline SweepResult run_sweep(const Scenario& base, const SweepConfig& sweep) {
    if (sweep.speeds.empty() || sweep.policies.empty() || sweep.seeds.empty())
        throw SimError("sweep: speeds, policies, and seeds must be non-empty");

    SweepResult result;
    for (double speed : sweep.speeds) {
        Scenario sc = base;
        sc.ego.speed = speed;
        sc.ego.speed_profile.points.clear();
        sc.ego.speed_min = std::min(sc.ego.speed_min, speed);
        sc.ego.speed_max = std::max(sc.ego.speed_max, speed);

        const bool wants_predictive =
            std::find(sweep.policies.begin(), sweep.policies.end(), Policy::Predictive) !=
            sweep.policies.end();

        for (std::uint64_t seed : sweep.seeds) {
            const ChannelTrace trace = generate_trace(sc, seed);
            std::map<int, PredictorModel> models;
            if (wants_predictive && sc.predictor.bootstrap)
                models = bootstrap_models(sc, trace);

            std::optional<std::uint64_t> hash;
            for (Policy policy : sweep.policies) {
                ExperimentResult r = run_policy(sc, policy, seed, trace,
                                                models.empty() ? nullptr : &models);
                if (hash.has_value() && *hash != r.report.stream_hash)
                    throw SimError("sweep: unpaired update streams across policies");
                hash = r.report.stream_hash;
                result.runs.push_back(r.report);
            }
        }
    }
    result.comparison = compare_policies(result.runs);
    return result;
}

struct TrainOutput {
    std::map<int, PredictorModel> models;
    std::map<int, EvalReport> evals;
    ChannelTrace trace;
};

/// Offline training: full-trace datasets for each refresh horizon, one
/// model per horizon, evaluated on the held-out tail.
inline TrainOutput train_pipeline(const Scenario& sc, PredictorKind kind,
                                  std::uint64_t seed) {
    TrainOutput out;
    out.trace = generate_trace(sc, seed);

    std::vector<int> horizons{sc.aggregator.sensor_period};
    if (sc.aggregator.vehicle_period != sc.aggregator.sensor_period)
        horizons.push_back(sc.aggregator.vehicle_period);

    for (int horizon : horizons) {
        const SupervisedDataset ds = make_dataset(out.trace.series, sc.predictor.window,
                                                  horizon, sc.predictor.train_ratio);
        PredictorOptions options;
        options.kind = kind;
        options.recurrent = sc.predictor.recurrent;
        options.forest = sc.predictor.forest;
        options.initial_latency_ms = sc.predictor.initial_latency_ms;
        PredictorModel model = PredictorModel::train(ds, options);
        if (ds.test_size() > 0)
            out.evals.emplace(horizon, model.evaluate(ds.test_inputs, ds.test_targets,
                                                      sc.predictor.tolerance));
        out.models.emplace(horizon, std::move(model));
    }
    return out;
}

// -- CSV output --------------------------------------------------------------

inline void write_trace_csv(const std::string& path, const ChannelTrace& trace) {
    std::ofstream out(path);
    if (!out) throw SimError("cannot open trace file: " + path);
    out << "# generated " << csv_timestamp() << "\n";
    out << "time_ms,node_id,cycle,aoi_ms,rel_speed_mps\n";
    for (const TraceRow& r : trace.series)
        out << format_ms(r.time_ms) << ',' << r.node_id << ',' << r.cycle << ','
            << format_ms(r.aoi_ms) << ',' << format_ms(r.rel_speed_mps) << "\n";
    if (!out) throw SimError("write failed for trace file: " + path);
}

inline void write_events_csv(const std::string& path, const std::vector<EventRow>& events) {
    std::ofstream out(path);
    if (!out) throw SimError("cannot open events file: " + path);
    out << "# generated " << csv_timestamp() << "\n";
    out << "cycle,node,action,segment,offset,wait_ms\n";
    for (const EventRow& e : events)
        out << e.cycle << ',' << e.node << ',' << e.action << ',' << e.segment << ','
            << e.offset << ',' << format_ms(e.wait_ms) << "\n";
    if (!out) throw SimError("write failed for events file: " + path);
}

}  // namespace aoisim

#endif  // AOISIM_HARNESS_HPP
