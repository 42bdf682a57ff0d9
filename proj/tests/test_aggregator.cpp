#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "aoisim/aggregator.hpp"

using namespace aoisim;

namespace {

constexpr double kQ = 3.0;
constexpr Millis kPeriod = 1000.0 / kQ;

AggregatorConfig base_config(Policy policy) {
    AggregatorConfig cfg;
    cfg.policy = policy;
    cfg.q = kQ;
    cfg.max_aoi = kPeriod;
    cfg.window = 4;
    cfg.sensor_period = 2;
    cfg.vehicle_period = 4;
    cfg.prune_after_cycles = 2;
    return cfg;
}

Millis request_of(int cycle) { return (cycle - 1) * kPeriod; }

UpdateMessage make_msg(const NodeId& id, NodeKind kind, int cycle, Millis aoi,
                       Millis arrival_offset = 100.0) {
    UpdateMessage m;
    m.source_id = id;
    m.source_kind = kind;
    m.cycle = cycle;
    m.requested_at = request_of(cycle);
    m.originated_at = m.requested_at - aoi;  // zero distance, so age == lag
    m.distance_at_send = 0.0;
    m.arrival_at = m.requested_at + arrival_offset;
    m.aoi = aoi;
    return m;
}

std::map<NodeId, NodeSnapshot> snapshot_of(const std::vector<std::pair<NodeId, NodeKind>>& nodes) {
    std::map<NodeId, NodeSnapshot> snap;
    for (const auto& [id, kind] : nodes) {
        NodeSnapshot s;
        s.kind = kind;
        s.relative_speed = 10.0;
        s.distance = 50.0;
        s.coverage_radius = kind == NodeKind::Sensor ? 100.0 : 300.0;
        s.in_coverage = true;
        snap[id] = s;
    }
    return snap;
}

/// Runs one full cycle: open, feed, close. Returns the cycle's metrics.
CycleMetrics run_cycle(AggregationEngine& engine, int m,
                       const std::map<NodeId, NodeSnapshot>& snap,
                       const std::vector<UpdateMessage>& arrivals) {
    engine.begin_cycle(m, request_of(m), snap);
    for (const auto& msg : arrivals) engine.on_arrival(msg);
    return engine.finish_cycle();
}

int count_events(const AggregationEngine& engine, const std::string& action) {
    int n = 0;
    for (const auto& e : engine.events())
        if (e.action == action) ++n;
    return n;
}

bool expected_in(const AggregationEngine& engine, int cycle, const NodeId& id) {
    const Segment& seg = engine.segments().at(cycle);
    return std::find(seg.expected.begin(), seg.expected.end(), id) != seg.expected.end();
}

}  // namespace

TEST_CASE("first contact registers the sender and keeps its data") {
    AggregationEngine engine(base_config(Policy::Predictive));
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}});

    engine.begin_cycle(1, request_of(1), snap);
    // Empty roster: the segment closes at open since nothing is awaited.
    CHECK(engine.segments().at(1).closed);
    CHECK(engine.segments().at(1).close_time == request_of(1));

    engine.on_arrival(make_msg("s1", NodeKind::Sensor, 1, 120.0));
    engine.finish_cycle();

    REQUIRE(engine.registry().count("s1") == 1);
    const NodeRecord& rec = engine.registry().at("s1");
    CHECK(rec.expect_from == 2);
    CHECK(rec.period == 2);  // sensor refresh period from the config
    CHECK(rec.next_decision_at == 4);
    CHECK(rec.last_aoi == 120.0);
    CHECK_FALSE(rec.written_off);

    REQUIRE(engine.decisions().size() == 1);
    CHECK(engine.decisions().front().action == DecisionAction::Initiate);
    CHECK(engine.decisions().front().basis == "measured");
    CHECK(engine.accounting().delivered == 1);
    CHECK(engine.accounting().placed_extra == 1);  // kept, though not yet awaited
    CHECK(count_events(engine, "initiate") == 1);
}

TEST_CASE("stale first contact is turned away at admission") {
    AggregationEngine engine(base_config(Policy::Predictive));
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}});
    engine.begin_cycle(1, request_of(1), snap);
    engine.on_arrival(make_msg("s1", NodeKind::Sensor, 1, kPeriod + 1.0));
    engine.finish_cycle();

    CHECK(engine.registry().empty());
    CHECK(engine.accounting().discarded_admission == 1);
    CHECK(engine.decisions().empty());
}

TEST_CASE("a full roster of placements closes the segment at the last arrival") {
    AggregationEngine engine(base_config(Policy::Predictive));
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}, {"s2", NodeKind::Sensor}});

    run_cycle(engine, 1, snap,
              {make_msg("s1", NodeKind::Sensor, 1, 100.0),
               make_msg("s2", NodeKind::Sensor, 1, 110.0)});

    CycleMetrics metrics = run_cycle(engine, 2, snap,
                                     {make_msg("s1", NodeKind::Sensor, 2, 90.0, 80.0),
                                      make_msg("s2", NodeKind::Sensor, 2, 95.0, 140.0)});
    CHECK(expected_in(engine, 2, "s1"));
    CHECK(expected_in(engine, 2, "s2"));

    CHECK(metrics.expected == 2);
    CHECK(metrics.placed == 2);
    CHECK(metrics.received == 2);
    CHECK(metrics.denominator == 2);
    CHECK(metrics.dssr_pct() == Catch::Approx(100.0));
    // Closed at the later of the two arrivals, well before the deadline.
    CHECK(engine.segments().at(2).close_time == Catch::Approx(request_of(2) + 140.0));
    CHECK(metrics.latency.sequencing == Catch::Approx(140.0));
    CHECK(metrics.latency.connection == Catch::Approx(engine.config().decision_cost_ms));
}

TEST_CASE("an unfilled segment closes at the deadline plus the bookkeeping lag") {
    AggregationEngine engine(base_config(Policy::Predictive));
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}, {"s2", NodeKind::Sensor}});
    run_cycle(engine, 1, snap,
              {make_msg("s1", NodeKind::Sensor, 1, 100.0),
               make_msg("s2", NodeKind::Sensor, 1, 110.0)});
    CycleMetrics metrics =
        run_cycle(engine, 2, snap, {make_msg("s1", NodeKind::Sensor, 2, 90.0)});

    CHECK(metrics.placed == 1);
    CHECK(metrics.dssr_pct() == Catch::Approx(50.0));
    const Millis wait = kPeriod + engine.config().closure_lag_ms;
    CHECK(metrics.latency.sequencing == Catch::Approx(wait));
}

TEST_CASE("decision cadence: default maintain until the history fills, then forecast") {
    AggregationEngine engine(base_config(Policy::Predictive));
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}});
    std::vector<int> horizons;
    engine.set_predictor([&](const FeatureWindow& w, int horizon) {
        horizons.push_back(horizon);
        REQUIRE(w.entries.size() == 4);  // the configured window length
        return 100.0;
    });

    for (int m = 1; m <= 6; ++m)
        run_cycle(engine, m, snap, {make_msg("s1", NodeKind::Sensor, m, 100.0 + m)});

    // Admitted at 1, first decision due at 4 with 3 history rows (< window 4):
    // maintain by default. Next due at 6 with a full window: real forecast.
    std::vector<std::pair<DecisionAction, std::string>> trail;
    for (const auto& d : engine.decisions()) trail.emplace_back(d.action, d.basis);
    REQUIRE(trail.size() == 3);
    CHECK(trail[0] == std::make_pair(DecisionAction::Initiate, std::string("measured")));
    CHECK(trail[1] == std::make_pair(DecisionAction::Maintain, std::string("default")));
    CHECK(trail[2] == std::make_pair(DecisionAction::Maintain, std::string("predicted")));
    CHECK(engine.prediction_invocations() == 1);
    REQUIRE(horizons.size() == 1);
    CHECK(horizons[0] == 2);  // forecast horizon equals the refresh period
    CHECK(engine.registry().at("s1").next_decision_at == 8);
}

TEST_CASE("nodes in the same age bucket share one forecast") {
    AggregatorConfig cfg = base_config(Policy::Predictive);
    AggregationEngine engine(cfg);
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}, {"s2", NodeKind::Sensor}});
    engine.set_predictor([](const FeatureWindow&, int) { return 100.0; });

    SECTION("close ages cluster together") {
        for (int m = 1; m <= 6; ++m)
            run_cycle(engine, m, snap,
                      {make_msg("s1", NodeKind::Sensor, m, 100.0),
                       make_msg("s2", NodeKind::Sensor, m, 110.0)});  // same 50ms bucket
        CHECK(engine.prediction_invocations() == 1);
    }

    SECTION("distant ages fall in separate buckets") {
        for (int m = 1; m <= 6; ++m)
            run_cycle(engine, m, snap,
                      {make_msg("s1", NodeKind::Sensor, m, 100.0),
                       make_msg("s2", NodeKind::Sensor, m, 300.0)});
        CHECK(engine.prediction_invocations() == 2);
    }
}

TEST_CASE("a high forecast ends the connection and silence makes it final") {
    AggregationEngine engine(base_config(Policy::Predictive));
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}});
    engine.set_predictor([](const FeatureWindow&, int) { return 400.0; });  // over budget

    for (int m = 1; m <= 5; ++m)
        run_cycle(engine, m, snap, {make_msg("s1", NodeKind::Sensor, m, 100.0)});

    // The over-budget forecast lands at cycle 6 and takes effect at 8.
    engine.begin_cycle(6, request_of(6), snap);
    const auto& terminate = engine.decisions().back();
    CHECK(terminate.action == DecisionAction::Terminate);
    CHECK(terminate.basis == "predicted");
    CHECK(terminate.aoi == 400.0);
    CHECK(terminate.decided_at == 6);
    CHECK(terminate.effective_cycle == 8);
    CHECK(engine.registry().at("s1").written_off);
    // Cycle 6's roster was fixed before the decision pass ran.
    CHECK(expected_in(engine, 6, "s1"));
    engine.on_arrival(make_msg("s1", NodeKind::Sensor, 6, 100.0));
    engine.finish_cycle();

    // From the next cycle on the node is no longer awaited.
    run_cycle(engine, 7, snap, {});
    CHECK_FALSE(expected_in(engine, 7, "s1"));

    // The sender went quiet, so the write-off sticks: removal at cycle 8.
    engine.begin_cycle(8, request_of(8), snap);
    CHECK(engine.registry().count("s1") == 0);
    CHECK(engine.segments().at(8).expected.empty());
    engine.finish_cycle();
}

TEST_CASE("a wrong termination forecast is reversed while the node still delivers") {
    AggregationEngine engine(base_config(Policy::Predictive));
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}});
    engine.set_predictor([](const FeatureWindow&, int) { return 400.0; });

    for (int m = 1; m <= 5; ++m)
        run_cycle(engine, m, snap, {make_msg("s1", NodeKind::Sensor, m, 100.0)});
    // Terminate decided at 6; the node keeps delivering through 6 and 7.
    run_cycle(engine, 6, snap, {make_msg("s1", NodeKind::Sensor, 6, 100.0)});
    run_cycle(engine, 7, snap, {make_msg("s1", NodeKind::Sensor, 7, 100.0)});
    CHECK(engine.registry().at("s1").written_off);
    CHECK(engine.registry().at("s1").silent_cycles == 0);

    engine.begin_cycle(8, request_of(8), snap);
    REQUIRE(engine.registry().count("s1") == 1);
    CHECK_FALSE(engine.registry().at("s1").written_off);
    CHECK(engine.registry().at("s1").next_decision_at == 10);
    CHECK(expected_in(engine, 8, "s1"));
    CHECK(count_events(engine, "reinstate") == 1);
    engine.finish_cycle();
}

TEST_CASE("over-age updates from known senders are discarded") {
    AggregationEngine engine(base_config(Policy::Predictive));
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}});
    run_cycle(engine, 1, snap, {make_msg("s1", NodeKind::Sensor, 1, 100.0)});
    CycleMetrics metrics =
        run_cycle(engine, 2, snap, {make_msg("s1", NodeKind::Sensor, 2, kPeriod + 50.0)});

    CHECK(engine.accounting().discarded_over_aoi == 1);
    CHECK(metrics.placed == 0);
    CHECK(metrics.received == 0);
    // A discarded update leaves the node's reception bookkeeping untouched.
    CHECK(engine.registry().at("s1").last_received_cycle == 1);
}

TEST_CASE("early arrivals park, then serve their own cycle") {
    AggregationEngine engine(base_config(Policy::Predictive));
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}, {"s2", NodeKind::Sensor}});
    run_cycle(engine, 1, snap,
              {make_msg("s1", NodeKind::Sensor, 1, 100.0),
               make_msg("s2", NodeKind::Sensor, 1, 105.0)});

    SECTION("parking during assembly is a sequencing issue") {
        engine.begin_cycle(2, request_of(2), snap);
        engine.on_arrival(make_msg("s1", NodeKind::Sensor, 2, 90.0));
        // Segment 2 still waits on s2 when s1's next update barges in.
        engine.on_arrival(make_msg("s1", NodeKind::Sensor, 3, 85.0));
        REQUIRE(engine.issues().size() == 1);
        CHECK(engine.issues().back().kind == "early");
        CHECK(engine.issues().back().offset == 1);
        CHECK(engine.issues().back().cycle == 3);
        CHECK(engine.issues().back().detected_at == 2);
        CHECK(engine.accounting().parked_pending == 1);
        engine.finish_cycle();

        // Promotion places the parked update in its own segment.
        CycleMetrics metrics = run_cycle(engine, 3, snap,
                                         {make_msg("s2", NodeKind::Sensor, 3, 95.0)});
        CHECK(engine.accounting().parked_pending == 0);
        CHECK(metrics.placed == 2);
    }

    SECTION("parking after closure is silent") {
        engine.begin_cycle(2, request_of(2), snap);
        engine.on_arrival(make_msg("s1", NodeKind::Sensor, 2, 90.0, 60.0));
        engine.on_arrival(make_msg("s2", NodeKind::Sensor, 2, 95.0, 70.0));
        CHECK(engine.segments().at(2).closed);
        engine.on_arrival(make_msg("s1", NodeKind::Sensor, 3, 85.0));
        CHECK(engine.issues().empty());
        CHECK(engine.accounting().parked_pending == 1);
        engine.finish_cycle();
    }
}

TEST_CASE("late arrivals recover within the history window and go stale beyond it") {
    AggregationEngine engine(base_config(Policy::Predictive));
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}});
    for (int m = 1; m <= 3; ++m)
        run_cycle(engine, m, snap, {make_msg("s1", NodeKind::Sensor, m, 100.0)});

    engine.begin_cycle(4, request_of(4), snap);

    engine.on_arrival(make_msg("s1", NodeKind::Sensor, 3, 120.0));
    CHECK(engine.accounting().recovered_late == 1);
    CHECK(engine.issues().back().kind == "late");
    CHECK(engine.issues().back().offset == -1);
    CHECK(engine.segments().at(3).recovered.count("s1") == 1);

    engine.on_arrival(make_msg("s1", NodeKind::Sensor, 2, 130.0));
    CHECK(engine.accounting().recovered_late == 2);
    CHECK(engine.issues().back().offset == -2);

    engine.on_arrival(make_msg("s1", NodeKind::Sensor, 1, 140.0));  // past the window
    CHECK(engine.accounting().discarded_stale == 1);
    CHECK(engine.issues().back().kind == "stale");
    CHECK(engine.issues().back().offset == -3);

    // An old update never rolls the node's bookkeeping backwards.
    CHECK(engine.registry().at("s1").last_received_cycle == 3);
    CHECK(engine.registry().at("s1").last_aoi == 120.0);
    engine.finish_cycle();
}

TEST_CASE("missing slots surface once, when the segment leaves the recovery window") {
    AggregationEngine engine(base_config(Policy::Predictive));
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}, {"s2", NodeKind::Sensor}});
    run_cycle(engine, 1, snap,
              {make_msg("s1", NodeKind::Sensor, 1, 100.0),
               make_msg("s2", NodeKind::Sensor, 1, 105.0)});
    // s2 delivers nothing in cycle 2; keep s1 alive so only s2 is at fault.
    run_cycle(engine, 2, snap, {make_msg("s1", NodeKind::Sensor, 2, 100.0)});
    run_cycle(engine, 3, snap,
              {make_msg("s1", NodeKind::Sensor, 3, 100.0),
               make_msg("s2", NodeKind::Sensor, 3, 105.0)});
    CHECK(count_events(engine, "missing") == 0);

    // Segment 2 freezes at the end of cycle 4 (history depth 2).
    CycleMetrics metrics = run_cycle(engine, 4, snap,
                                     {make_msg("s1", NodeKind::Sensor, 4, 100.0),
                                      make_msg("s2", NodeKind::Sensor, 4, 105.0)});
    std::vector<SequencingIssue> missing;
    for (const auto& issue : engine.issues())
        if (issue.kind == "missing") missing.push_back(issue);
    REQUIRE(missing.size() == 1);
    CHECK(missing[0].node == "s2");
    CHECK(missing[0].cycle == 2);
    CHECK(missing[0].offset == -1);
    CHECK(missing[0].detected_at == 4);
    CHECK(metrics.issues == 1);  // charged to the cycle that noticed it
    CHECK(engine.segments().at(2).frozen);

    // No duplicate once frozen.
    run_cycle(engine, 5, snap,
              {make_msg("s1", NodeKind::Sensor, 5, 100.0),
               make_msg("s2", NodeKind::Sensor, 5, 105.0)});
    int count = 0;
    for (const auto& issue : engine.issues())
        if (issue.kind == "missing") ++count;
    CHECK(count == 1);
}

TEST_CASE("silent nodes are pruned after the configured patience") {
    AggregationEngine engine(base_config(Policy::Predictive));
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}});
    run_cycle(engine, 1, snap, {make_msg("s1", NodeKind::Sensor, 1, 100.0)});
    run_cycle(engine, 2, snap, {});  // silent 1
    run_cycle(engine, 3, snap, {});  // silent 2

    engine.begin_cycle(4, request_of(4), snap);
    CHECK(engine.registry().count("s1") == 0);
    CHECK(count_events(engine, "prune") == 1);
    CHECK(engine.segments().at(4).expected.empty());
    engine.finish_cycle();
}

TEST_CASE("fifo fills slots in arrival order and closes on a full buffer") {
    AggregationEngine engine(base_config(Policy::Fifo));
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}, {"s2", NodeKind::Sensor}});
    run_cycle(engine, 1, snap,
              {make_msg("s1", NodeKind::Sensor, 1, 100.0),
               make_msg("s2", NodeKind::Sensor, 1, 105.0)});

    engine.begin_cycle(2, request_of(2), snap);
    engine.on_arrival(make_msg("s1", NodeKind::Sensor, 2, 90.0, 50.0));
    // A duplicate consumes the second buffer slot and forces the close.
    engine.on_arrival(make_msg("s1", NodeKind::Sensor, 2, 80.0, 60.0));
    CHECK(engine.segments().at(2).closed);
    CHECK(engine.segments().at(2).close_time == Catch::Approx(request_of(2) + 60.0));

    // s2's real update arrives to a shut door.
    engine.on_arrival(make_msg("s2", NodeKind::Sensor, 2, 95.0, 70.0));
    CHECK(engine.issues().back().kind == "missed_close");
    CHECK(engine.issues().back().offset == 0);

    CycleMetrics metrics = engine.finish_cycle();
    CHECK(metrics.placed == 1);       // only s1 sits in its own slot
    CHECK(metrics.received == 3);     // all three carried this cycle's tag
    CHECK(metrics.dssr_pct() == Catch::Approx(50.0));
}

TEST_CASE("priority closure ranks vehicles above fresher sensors") {
    AggregationEngine engine(base_config(Policy::Priority));
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}, {"v1", NodeKind::Vehicle}});
    run_cycle(engine, 1, snap,
              {make_msg("s1", NodeKind::Sensor, 1, 50.0),
               make_msg("v1", NodeKind::Vehicle, 1, 300.0)});

    engine.begin_cycle(2, request_of(2), snap);
    // Three candidates for two slots; the duplicate spills past the cut.
    engine.on_arrival(make_msg("s1", NodeKind::Sensor, 2, 50.0, 40.0));
    engine.on_arrival(make_msg("s1", NodeKind::Sensor, 2, 45.0, 55.0));
    engine.on_arrival(make_msg("v1", NodeKind::Vehicle, 2, 300.0, 60.0));
    CycleMetrics metrics = engine.finish_cycle();

    const Segment& seg = engine.segments().at(2);
    REQUIRE(seg.placed.count("v1") == 1);
    REQUIRE(seg.placed.count("s1") == 1);
    // The stale vehicle outranked both sensor updates; the fresher sensor
    // duplicate won the remaining slot.
    CHECK(seg.placed.at("s1").aoi == 45.0);
    CHECK(metrics.placed == 2);
    int bumped = 0;
    for (const auto& issue : engine.issues())
        if (issue.kind == "missed_close") ++bumped;
    CHECK(bumped == 1);
}

TEST_CASE("stop-and-wait serves the roster strictly in turn") {
    AggregatorConfig cfg = base_config(Policy::StopAndWait);
    cfg.sw_timeout_ms = 1000.0;
    AggregationEngine engine(cfg);
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}, {"s2", NodeKind::Sensor}});
    run_cycle(engine, 1, snap,
              {make_msg("s1", NodeKind::Sensor, 1, 100.0),
               make_msg("s2", NodeKind::Sensor, 1, 105.0)});

    // Only s1 answers: the handler waits the full timeout on s2, then
    // drops it from the roster entirely.
    CycleMetrics second = run_cycle(engine, 2, snap,
                                    {make_msg("s1", NodeKind::Sensor, 2, 90.0, 80.0)});
    const Millis expected_close = request_of(2) + 80.0 + cfg.sw_timeout_ms;
    CHECK(engine.segments().at(2).close_time == Catch::Approx(expected_close));
    CHECK(second.latency.sequencing == Catch::Approx(80.0 + cfg.sw_timeout_ms));
    CHECK(count_events(engine, "timeout") == 1);
    CHECK(engine.registry().count("s2") == 0);
    CHECK(engine.registry().count("s1") == 1);

    // The backlog carries: cycle 3 cannot close before cycle 2 did, even
    // though s1 answers immediately.
    CycleMetrics third = run_cycle(engine, 3, snap,
                                   {make_msg("s1", NodeKind::Sensor, 3, 90.0, 50.0)});
    CHECK_FALSE(expected_in(engine, 3, "s2"));
    CHECK(engine.segments().at(3).close_time >= expected_close);
    CHECK(third.latency.sequencing == Catch::Approx(expected_close - request_of(3)));
}

TEST_CASE("stop-and-wait removes a silent node at its turn, not by patience") {
    AggregatorConfig cfg = base_config(Policy::StopAndWait);
    cfg.prune_after_cycles = 99;  // liveness patience is irrelevant here
    AggregationEngine engine(cfg);
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}});
    run_cycle(engine, 1, snap, {make_msg("s1", NodeKind::Sensor, 1, 100.0)});
    run_cycle(engine, 2, snap, {});  // one skipped turn is enough

    CHECK(engine.registry().count("s1") == 0);
    CHECK(count_events(engine, "timeout") == 1);
    CHECK(count_events(engine, "prune") == 0);
}

TEST_CASE("the books balance whatever the script does") {
    AggregationEngine engine(base_config(Policy::Predictive));
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}, {"s2", NodeKind::Sensor},
                             {"v1", NodeKind::Vehicle}});

    run_cycle(engine, 1, snap,
              {make_msg("s1", NodeKind::Sensor, 1, 100.0),
               make_msg("s2", NodeKind::Sensor, 1, 400.0),    // refused at admission
               make_msg("v1", NodeKind::Vehicle, 1, 200.0)});
    engine.begin_cycle(2, request_of(2), snap);
    engine.on_arrival(make_msg("s1", NodeKind::Sensor, 2, 90.0));
    engine.on_arrival(make_msg("s2", NodeKind::Sensor, 2, 95.0));   // fresh admission
    engine.on_arrival(make_msg("v1", NodeKind::Vehicle, 3, 80.0));  // early, parked
    engine.on_arrival(make_msg("v1", NodeKind::Vehicle, 1, 350.0)); // recovered late
    engine.finish_cycle();
    engine.begin_cycle(3, request_of(3), snap);
    engine.on_arrival(make_msg("s1", NodeKind::Sensor, 1, 150.0));  // at the recovery edge
    engine.finish_cycle();

    const Accounting& books = engine.accounting();
    CHECK(books.delivered == books.handled());
    CHECK(books.delivered == 8);
}

TEST_CASE("cycles must advance one at a time") {
    AggregationEngine engine(base_config(Policy::Predictive));
    auto snap = snapshot_of({});
    engine.begin_cycle(1, request_of(1), snap);
    engine.finish_cycle();
    CHECK_THROWS_AS(engine.begin_cycle(3, request_of(3), snap), SimError);
    CHECK_THROWS_AS(engine.begin_cycle(1, request_of(1), snap), SimError);
}

TEST_CASE("configuration validation rejects inconsistent setups") {
    auto expect_throw = [](auto mutate) {
        AggregatorConfig cfg = base_config(Policy::Predictive);
        mutate(cfg);
        CHECK_THROWS_AS(AggregationEngine(cfg), SimError);
    };
    expect_throw([](AggregatorConfig& c) { c.q = 0.0; });
    expect_throw([](AggregatorConfig& c) { c.max_aoi = 0.0; });
    expect_throw([](AggregatorConfig& c) { c.history_depth = -1; });
    expect_throw([](AggregatorConfig& c) { c.decision_cost_ms = -1.0; });
    expect_throw([](AggregatorConfig& c) { c.closure_lag_ms = c.cycle_period(); });
    expect_throw([](AggregatorConfig& c) { c.bucket_width_ms = 0.0; });
    expect_throw([](AggregatorConfig& c) { c.window = 0; });
    expect_throw([](AggregatorConfig& c) { c.sensor_period = 0; });
    expect_throw([](AggregatorConfig& c) { c.vehicle_period = 100; });  // > n_max
    expect_throw([](AggregatorConfig& c) { c.n_max = 0; });
    expect_throw([](AggregatorConfig& c) { c.sw_timeout_ms = 0.0; });
    expect_throw([](AggregatorConfig& c) { c.prune_after_cycles = 0; });
}

TEST_CASE("amortized forecast cost averages per kind, then across kinds") {
    AggregatorConfig cfg = base_config(Policy::Predictive);
    cfg.sensor_period = 5;
    cfg.vehicle_period = 10;
    cfg.prediction_latency_ms = 40.0;
    AggregationEngine engine(cfg);
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}, {"s2", NodeKind::Sensor},
                             {"v1", NodeKind::Vehicle}});
    run_cycle(engine, 1, snap,
              {make_msg("s1", NodeKind::Sensor, 1, 100.0),
               make_msg("s2", NodeKind::Sensor, 1, 105.0),
               make_msg("v1", NodeKind::Vehicle, 1, 110.0)});

    // Sensors amortize to 40/5 each, the vehicle to 40/10; kind means are 8
    // and 4, and the cross-kind mean is 6.
    CHECK(engine.amortized_prediction_ms() == Catch::Approx(6.0));

    AggregationEngine plain(base_config(Policy::Fifo));
    CHECK(plain.amortized_prediction_ms() == 0.0);
}

TEST_CASE("adaptive refresh periods follow the mobility rule") {
    AggregatorConfig cfg = base_config(Policy::Predictive);
    cfg.adaptive_period = true;
    cfg.prediction_latency_ms = 40.0;
    AggregationEngine engine(cfg);

    auto snap = snapshot_of({{"s1", NodeKind::Sensor}});
    snap.at("s1").relative_speed = 20.0;
    snap.at("s1").coverage_radius = 100.0;
    run_cycle(engine, 1, snap, {make_msg("s1", NodeKind::Sensor, 1, 100.0)});

    const int expected_period =
        choose_period(cfg.prediction_latency_ms, cfg.q, 20.0 / 200.0, cfg.n_max).period;
    CHECK(engine.registry().at("s1").period == expected_period);
}

TEST_CASE("received-age statistics track every delivery") {
    AggregationEngine engine(base_config(Policy::Predictive));
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}});
    engine.begin_cycle(1, request_of(1), snap);
    engine.on_arrival(make_msg("s1", NodeKind::Sensor, 1, 100.0));
    engine.on_arrival(make_msg("s1", NodeKind::Sensor, 1, 400.0));  // over the budget
    engine.on_arrival(make_msg("s1", NodeKind::Sensor, 1, 200.0));
    engine.finish_cycle();

    CHECK(engine.mean_received_aoi() == Catch::Approx((100.0 + 400.0 + 200.0) / 3.0));
    CHECK(engine.aoi_satisfaction_pct() == Catch::Approx(100.0 * 2.0 / 3.0));
}

TEST_CASE("forecast history is trimmed to the configured window") {
    AggregationEngine engine(base_config(Policy::Predictive));
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}});
    for (int m = 1; m <= 9; ++m)
        run_cycle(engine, m, snap, {make_msg("s1", NodeKind::Sensor, m, 100.0 + m)});
    const NodeRecord& rec = engine.registry().at("s1");
    CHECK(static_cast<int>(rec.window.size()) == engine.config().window);
    // Oldest retained row is cycle 6's; entries are strictly ordered in time.
    CHECK(rec.window.front().timestamp == Catch::Approx(request_of(6)));
    CHECK(rec.window.back().aoi == Catch::Approx(109.0));
}

TEST_CASE("staleness rows extrapolate the last age up to the cap") {
    AggregatorConfig cfg = base_config(Policy::Predictive);
    cfg.aoi_cap = 450.0;
    cfg.prune_after_cycles = 10;  // keep the node around while it sulks
    AggregationEngine engine(cfg);
    auto snap = snapshot_of({{"s1", NodeKind::Sensor}});
    run_cycle(engine, 1, snap, {make_msg("s1", NodeKind::Sensor, 1, 100.0)});
    run_cycle(engine, 2, snap, {});  // silent: 100 + 333.3
    run_cycle(engine, 3, snap, {});  // would be 100 + 666.7, capped at 450

    const auto& window = engine.registry().at("s1").window;
    REQUIRE(window.size() == 3);
    CHECK(window[1].aoi == Catch::Approx(100.0 + cfg.cycle_period()));
    CHECK(window[2].aoi == Catch::Approx(450.0));
    CHECK(engine.registry().at("s1").silent_cycles == 2);
}
