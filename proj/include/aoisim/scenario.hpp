#ifndef AOISIM_SCENARIO_HPP
#define AOISIM_SCENARIO_HPP

#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "aoisim/aggregator.hpp"
#include "aoisim/channel.hpp"
#include "aoisim/kinematics.hpp"
#include "aoisim/predictor/model.hpp"

namespace aoisim {

struct ScenarioPredictor {
    PredictorKind kind = PredictorKind::Linear;
    int window = 10;
    Millis initial_latency_ms = 100.0;
    double train_ratio = 8.0;
    double tolerance = 0.10;       // relative error band counted as accurate
    bool bootstrap = true;         // self-train when no model files are given
    int bootstrap_cycles = 300;    // leading cycles used for the self-training trace
    RecurrentNetConfig recurrent;
    ForestConfig forest;
};

/// Everything a run needs: the road setup, the channel, the service policy
/// knobs, and the forecaster configuration.
struct Scenario {
    std::string id = "scenario";
    Millis duration_ms = 1'200'000;
    double q = 3.0;
    std::uint64_t seed = 1;

    EgoState ego;
    std::vector<NodeState> nodes;
    DelayModel delay;
    AggregatorConfig aggregator;
    ScenarioPredictor predictor;

    UpdateSchedule schedule() const {
        UpdateSchedule s;
        s.q = q;
        s.total_time = duration_ms;
        s.validate();
        return s;
    }

    void validate() const {
        if (duration_ms <= 0.0) throw SimError("scenario: duration must be > 0");
        if (q <= 0.0) throw SimError("scenario: q must be > 0");
        if (nodes.empty()) throw SimError("scenario: node roster is empty");
        std::set<NodeId> ids;
        for (const NodeState& n : nodes) {
            if (n.id.empty()) throw SimError("scenario: node with empty id");
            if (!ids.insert(n.id).second)
                throw SimError("scenario: duplicate node id " + n.id);
            if (n.coverage_radius <= 0.0)
                throw SimError("scenario: node " + n.id + " has no coverage");
        }
        delay.validate();
        aggregator.validate();
        if (predictor.window < 1) throw SimError("scenario: predictor window must be >= 1");
        if (predictor.train_ratio <= 0.0)
            throw SimError("scenario: train ratio must be > 0");
        if (predictor.bootstrap_cycles < 0)
            throw SimError("scenario: bootstrap cycles must be >= 0");
    }

    World build_world() const {
        World w;
        w.ego = ego;
        w.nodes = nodes;
        w.now = 0.0;
        return w;
    }

    std::string serialize() const;
    static Scenario parse(const std::string& text);
    static Scenario load(const std::string& path);
    void save(const std::string& path) const;
};

namespace detail {

struct ScenarioLine {
    int number = 0;
    std::string section;
    std::string key;
    std::string value;
};

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline SimError parse_error(int line, const std::string& what) {
    return SimError("scenario line " + std::to_string(line) + ": " + what);
}

inline double parse_number(const ScenarioLine& l) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(l.value, &used);
    } catch (const std::exception&) {
        throw parse_error(l.number, "expected a number for '" + l.key + "', got '" + l.value + "'");
    }
    if (used != l.value.size())
        throw parse_error(l.number, "trailing characters after number in '" + l.key + "'");
    return v;
}

inline int parse_int(const ScenarioLine& l) {
    const double v = parse_number(l);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
        throw parse_error(l.number, "'" + l.key + "' must be an integer");
    return i;
}

inline bool parse_bool(const ScenarioLine& l) {
    if (l.value == "true" || l.value == "1" || l.value == "yes") return true;
    if (l.value == "false" || l.value == "0" || l.value == "no") return false;
    throw parse_error(l.number, "'" + l.key + "' must be true or false");
}

inline std::vector<std::pair<Millis, double>> parse_profile(const ScenarioLine& l) {
    std::vector<std::pair<Millis, double>> points;
    std::stringstream ss(l.value);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = trim(part);
        if (part.empty()) continue;
        const auto colon = part.find(':');
        if (colon == std::string::npos)
            throw parse_error(l.number, "profile entries are time_ms:speed pairs");
        try {
            points.emplace_back(std::stod(part.substr(0, colon)),
                                std::stod(part.substr(colon + 1)));
        } catch (const std::exception&) {
            throw parse_error(l.number, "bad profile entry '" + part + "'");
        }
    }
    if (points.empty()) throw parse_error(l.number, "empty profile");
    return points;
}

}  // namespace detail

inline Scenario Scenario::parse(const std::string& text) {
    using detail::ScenarioLine;
    using detail::parse_bool;
    using detail::parse_error;
    using detail::parse_int;
    using detail::parse_number;
    using detail::trim;

    Scenario s;
    s.nodes.clear();

    struct SensorLine {
        int count = 0;
        double start = 0.0;
        double spacing = 60.0;
        double coverage_radius = default_coverage_radius(NodeKind::Sensor);
        int lane = 0;
        std::string prefix = "s";
        bool seen = false;
    } sensor_line;

    std::map<std::string, NodeState> declared_nodes;  // insertion handled below
    std::vector<NodeId> node_order;

    std::string section = "";
    std::istringstream in(text);
    std::string raw;
    int number = 0;
    while (std::getline(in, raw)) {
        ++number;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw parse_error(number, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw parse_error(number, "empty section name");
            if (section.rfind("node ", 0) == 0) {
                const std::string id = trim(section.substr(5));
                if (id.empty()) throw parse_error(number, "node section without an id");
                if (declared_nodes.count(id) > 0)
                    throw parse_error(number, "duplicate node id " + id);
                NodeState n;
                n.id = id;
                n.kind = NodeKind::Sensor;
                n.coverage_radius = 0.0;  // filled from kind unless overridden
                declared_nodes[id] = n;
                node_order.push_back(id);
            } else if (section == "sensor_line") {
                sensor_line.seen = true;
            } else if (section != "ego" && section != "delay" && section != "predictor" &&
                       section != "aggregator") {
                throw parse_error(number, "unknown section [" + section + "]");
            }
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) throw parse_error(number, "expected key = value");
        ScenarioLine l{number, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
        if (l.key.empty()) throw parse_error(number, "empty key");
        if (l.value.empty()) throw parse_error(number, "empty value for '" + l.key + "'");

        if (section.empty()) {
            if (l.key == "id") s.id = l.value;
            else if (l.key == "duration_ms") s.duration_ms = parse_number(l);
            else if (l.key == "q") s.q = parse_number(l);
            else if (l.key == "seed") s.seed = static_cast<std::uint64_t>(parse_number(l));
            else throw parse_error(number, "unknown key '" + l.key + "'");
        } else if (section == "ego") {
            if (l.key == "position") s.ego.position = parse_number(l);
            else if (l.key == "lane") s.ego.lane = parse_int(l);
            else if (l.key == "speed") s.ego.speed = parse_number(l);
            else if (l.key == "speed_min") s.ego.speed_min = parse_number(l);
            else if (l.key == "speed_max") s.ego.speed_max = parse_number(l);
            else if (l.key == "profile") s.ego.speed_profile.points = detail::parse_profile(l);
            else throw parse_error(number, "unknown key '" + l.key + "' in [ego]");
        } else if (section == "sensor_line") {
            if (l.key == "count") sensor_line.count = parse_int(l);
            else if (l.key == "start") sensor_line.start = parse_number(l);
            else if (l.key == "spacing") sensor_line.spacing = parse_number(l);
            else if (l.key == "coverage_radius") sensor_line.coverage_radius = parse_number(l);
            else if (l.key == "lane") sensor_line.lane = parse_int(l);
            else if (l.key == "prefix") sensor_line.prefix = l.value;
            else throw parse_error(number, "unknown key '" + l.key + "' in [sensor_line]");
        } else if (section.rfind("node ", 0) == 0) {
            NodeState& n = declared_nodes.at(trim(section.substr(5)));
            if (l.key == "kind") {
                if (l.value == "sensor") n.kind = NodeKind::Sensor;
                else if (l.value == "vehicle") n.kind = NodeKind::Vehicle;
                else throw parse_error(number, "kind must be sensor or vehicle");
            } else if (l.key == "position") n.position = parse_number(l);
            else if (l.key == "lane") n.lane = parse_int(l);
            else if (l.key == "speed") n.speed = parse_number(l);
            else if (l.key == "target_speed") n.target_speed = parse_number(l);
            else if (l.key == "coverage_radius") n.coverage_radius = parse_number(l);
            else throw parse_error(number, "unknown key '" + l.key + "' in [" + section + "]");
        } else if (section == "delay") {
            DelayModel& d = s.delay;
            if (l.key == "propagation_speed") d.propagation_speed = parse_number(l);
            else if (l.key == "access_delay_mean") d.access_delay_mean = parse_number(l);
            else if (l.key == "access_delay_jitter") d.access_delay_jitter = parse_number(l);
            else if (l.key == "origination_offset_max") d.origination_offset_max = parse_number(l);
            else if (l.key == "edge_lag_ms") d.edge_lag_ms = parse_number(l);
            else if (l.key == "edge_lag_power") d.edge_lag_power = parse_number(l);
            else if (l.key == "edge_access_ms") d.edge_access_ms = parse_number(l);
            else if (l.key == "edge_access_power") d.edge_access_power = parse_number(l);
            else if (l.key == "loss_edge_prob") d.loss_edge_prob = parse_number(l);
            else if (l.key == "loss_power") d.loss_power = parse_number(l);
            else if (l.key == "loss_floor") d.loss_floor = parse_number(l);
            else throw parse_error(number, "unknown key '" + l.key + "' in [delay]");
        } else if (section == "predictor") {
            ScenarioPredictor& p = s.predictor;
            if (l.key == "kind") p.kind = parse_predictor_kind(l.value);
            else if (l.key == "window") p.window = parse_int(l);
            else if (l.key == "initial_latency_ms") p.initial_latency_ms = parse_number(l);
            else if (l.key == "train_ratio") p.train_ratio = parse_number(l);
            else if (l.key == "tolerance") p.tolerance = parse_number(l);
            else if (l.key == "bootstrap") p.bootstrap = parse_bool(l);
            else if (l.key == "bootstrap_cycles") p.bootstrap_cycles = parse_int(l);
            else if (l.key == "units") p.recurrent.units_per_layer = parse_int(l);
            else if (l.key == "layers") p.recurrent.layers = parse_int(l);
            else if (l.key == "dropout") p.recurrent.dropout = parse_number(l);
            else if (l.key == "recurrent_dropout") p.recurrent.recurrent_dropout = parse_number(l);
            else if (l.key == "batch_size") p.recurrent.batch_size = parse_int(l);
            else if (l.key == "epochs") p.recurrent.epochs = parse_int(l);
            else if (l.key == "learning_rate") p.recurrent.learning_rate = parse_number(l);
            else if (l.key == "trees") p.forest.trees = parse_int(l);
            else if (l.key == "max_depth") p.forest.max_depth = parse_int(l);
            else if (l.key == "min_samples_split") p.forest.min_samples_split = parse_int(l);
            else throw parse_error(number, "unknown key '" + l.key + "' in [predictor]");
        } else if (section == "aggregator") {
            AggregatorConfig& a = s.aggregator;
            if (l.key == "history_depth") a.history_depth = parse_int(l);
            else if (l.key == "decision_cost_ms") a.decision_cost_ms = parse_number(l);
            else if (l.key == "closure_lag_ms") a.closure_lag_ms = parse_number(l);
            else if (l.key == "bucket_width_ms") a.bucket_width_ms = parse_number(l);
            else if (l.key == "aoi_cap") a.aoi_cap = parse_number(l);
            else if (l.key == "n_max") a.n_max = parse_int(l);
            else if (l.key == "sensor_period") a.sensor_period = parse_int(l);
            else if (l.key == "vehicle_period") a.vehicle_period = parse_int(l);
            else if (l.key == "adaptive_period") a.adaptive_period = parse_bool(l);
            else if (l.key == "prediction_latency_ms") a.prediction_latency_ms = parse_number(l);
            else if (l.key == "sw_timeout_ms") a.sw_timeout_ms = parse_number(l);
            else if (l.key == "prune_after_cycles") a.prune_after_cycles = parse_int(l);
            else if (l.key == "dssr_over_received") a.dssr_over_received = parse_bool(l);
            else throw parse_error(number, "unknown key '" + l.key + "' in [aggregator]");
        } else {
            throw parse_error(number, "key outside a known section");
        }
    }

    if (sensor_line.seen) {
        if (sensor_line.count < 1)
            throw SimError("scenario: sensor_line count must be >= 1");
        for (int i = 0; i < sensor_line.count; ++i) {
            NodeState n;
            std::ostringstream id;
            id << sensor_line.prefix << std::setw(3) << std::setfill('0') << (i + 1);
            n.id = id.str();
            n.kind = NodeKind::Sensor;
            n.position = sensor_line.start + sensor_line.spacing * i;
            n.lane = sensor_line.lane;
            n.speed = 0.0;
            n.coverage_radius = sensor_line.coverage_radius;
            s.nodes.push_back(n);
        }
    }
    for (const NodeId& id : node_order) {
        NodeState n = declared_nodes.at(id);
        if (n.coverage_radius <= 0.0) n.coverage_radius = default_coverage_radius(n.kind);
        if (n.kind == NodeKind::Vehicle && n.target_speed == 0.0) n.target_speed = n.speed;
        s.nodes.push_back(n);
    }

    // The freshness threshold follows directly from the request rate.
    s.aggregator.q = s.q;
    s.aggregator.max_aoi = 1000.0 / s.q;
    s.aggregator.window = s.predictor.window;

    s.validate();
    return s;
}

inline std::string Scenario::serialize() const {
    std::ostringstream out;
    out << "id = " << id << "\n";
    out << "duration_ms = " << format_ms(duration_ms) << "\n";
    out << "q = " << format_ms(q) << "\n";
    out << "seed = " << seed << "\n\n";

    out << "[ego]\n";
    out << "position = " << format_ms(ego.position) << "\n";
    out << "lane = " << ego.lane << "\n";
    out << "speed = " << format_ms(ego.speed) << "\n";
    out << "speed_min = " << format_ms(ego.speed_min) << "\n";
    out << "speed_max = " << format_ms(ego.speed_max) << "\n";
    if (!ego.speed_profile.points.empty()) {
        out << "profile = ";
        for (std::size_t i = 0; i < ego.speed_profile.points.size(); ++i) {
            if (i > 0) out << ", ";
            out << format_ms(ego.speed_profile.points[i].first) << ':'
                << format_ms(ego.speed_profile.points[i].second);
        }
        out << "\n";
    }

    for (const NodeState& n : nodes) {
        out << "\n[node " << n.id << "]\n";
        out << "kind = " << (n.kind == NodeKind::Sensor ? "sensor" : "vehicle") << "\n";
        out << "position = " << format_ms(n.position) << "\n";
        out << "lane = " << n.lane << "\n";
        out << "speed = " << format_ms(n.speed) << "\n";
        if (n.target_speed != 0.0) out << "target_speed = " << format_ms(n.target_speed) << "\n";
        out << "coverage_radius = " << format_ms(n.coverage_radius) << "\n";
    }

    out << "\n[delay]\n";
    out << "propagation_speed = " << format_ms(delay.propagation_speed) << "\n";
    out << "access_delay_mean = " << format_ms(delay.access_delay_mean) << "\n";
    out << "access_delay_jitter = " << format_ms(delay.access_delay_jitter) << "\n";
    out << "origination_offset_max = " << format_ms(delay.origination_offset_max) << "\n";
    out << "edge_lag_ms = " << format_ms(delay.edge_lag_ms) << "\n";
    out << "edge_lag_power = " << format_ms(delay.edge_lag_power) << "\n";
    out << "edge_access_ms = " << format_ms(delay.edge_access_ms) << "\n";
    out << "edge_access_power = " << format_ms(delay.edge_access_power) << "\n";
    out << "loss_edge_prob = " << format_ms(delay.loss_edge_prob) << "\n";
    out << "loss_power = " << format_ms(delay.loss_power) << "\n";
    out << "loss_floor = " << format_ms(delay.loss_floor) << "\n";

    out << "\n[predictor]\n";
    out << "kind = " << to_string(predictor.kind) << "\n";
    out << "window = " << predictor.window << "\n";
    out << "initial_latency_ms = " << format_ms(predictor.initial_latency_ms) << "\n";
    out << "train_ratio = " << format_ms(predictor.train_ratio) << "\n";
    out << "tolerance = " << format_ms(predictor.tolerance) << "\n";
    out << "bootstrap = " << (predictor.bootstrap ? "true" : "false") << "\n";
    out << "bootstrap_cycles = " << predictor.bootstrap_cycles << "\n";
    out << "units = " << predictor.recurrent.units_per_layer << "\n";
    out << "layers = " << predictor.recurrent.layers << "\n";
    out << "dropout = " << format_ms(predictor.recurrent.dropout) << "\n";
    out << "recurrent_dropout = " << format_ms(predictor.recurrent.recurrent_dropout) << "\n";
    out << "batch_size = " << predictor.recurrent.batch_size << "\n";
    out << "epochs = " << predictor.recurrent.epochs << "\n";
    out << "learning_rate = " << format_ms(predictor.recurrent.learning_rate) << "\n";
    out << "trees = " << predictor.forest.trees << "\n";
    out << "max_depth = " << predictor.forest.max_depth << "\n";
    out << "min_samples_split = " << predictor.forest.min_samples_split << "\n";

    out << "\n[aggregator]\n";
    out << "history_depth = " << aggregator.history_depth << "\n";
    out << "decision_cost_ms = " << format_ms(aggregator.decision_cost_ms) << "\n";
    out << "closure_lag_ms = " << format_ms(aggregator.closure_lag_ms) << "\n";
    out << "bucket_width_ms = " << format_ms(aggregator.bucket_width_ms) << "\n";
    out << "aoi_cap = " << format_ms(aggregator.aoi_cap) << "\n";
    out << "n_max = " << aggregator.n_max << "\n";
    out << "sensor_period = " << aggregator.sensor_period << "\n";
    out << "vehicle_period = " << aggregator.vehicle_period << "\n";
    out << "adaptive_period = " << (aggregator.adaptive_period ? "true" : "false") << "\n";
    out << "prediction_latency_ms = " << format_ms(aggregator.prediction_latency_ms) << "\n";
    out << "sw_timeout_ms = " << format_ms(aggregator.sw_timeout_ms) << "\n";
    out << "prune_after_cycles = " << aggregator.prune_after_cycles << "\n";
    out << "dssr_over_received = " << (aggregator.dssr_over_received ? "true" : "false") << "\n";
    return out.str();
}

inline Scenario Scenario::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SimError("cannot open scenario file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

inline void Scenario::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw SimError("cannot open scenario file for writing: " + path);
    out << serialize();
    if (!out) throw SimError("write failed for scenario file: " + path);
}

}  // namespace aoisim

#endif  // AOISIM_SCENARIO_HPP
