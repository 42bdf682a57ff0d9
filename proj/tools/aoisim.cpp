// Command-line front end: run one scenario, train forecasters offline,
// sweep policies across ego speeds, or render charts from a sweep's CSV.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aoisim/harness.hpp"
#include "aoisim/svg.hpp"

namespace {

namespace fs = std::filesystem;
using namespace aoisim;

std::string output_root(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("AOISIM_OUT"); env != nullptr && *env != '\0') return env;
    return "out";
}

fs::path prepare_dir(const std::string& root) {
    fs::path dir(root);
    fs::create_directories(dir);
    return dir;
}

void write_runs_csv(const std::string& path, const std::vector<RunReport>& runs) {
    std::ofstream out(path);
    if (!out) throw SimError("cannot open runs file: " + path);
    out << "# generated " << csv_timestamp() << "\n";
    out << "scenario,policy,seed,speed_mps,cycles_counted,mean_dssr_pct,mean_latency_ms,"
           "sequencing_ms,connection_ms,prediction_ms,aoi_satisfaction_pct,mean_aoi_ms,"
           "prediction_invocations,updates_received,updates_discarded,sequencing_issues,"
           "stream_hash\n";
    for (const RunReport& r : runs) {
        out << r.scenario_id << ',' << r.policy << ',' << r.seed << ','
            << format_ms(r.speed_mps) << ',' << r.cycles_counted << ','
            << format_ms(r.mean_dssr_pct) << ',' << format_ms(r.mean_latency.total()) << ','
            << format_ms(r.mean_latency.sequencing) << ',' << format_ms(r.mean_latency.connection)
            << ',' << format_ms(r.mean_latency.prediction) << ','
            << format_ms(r.aoi_satisfaction_pct) << ',' << format_ms(r.mean_aoi_ms) << ','
            << r.prediction_invocations << ',' << r.updates_received << ','
            << r.updates_discarded << ',' << r.sequencing_issues << ',' << std::hex
            << r.stream_hash << std::dec << "\n";
    }
    if (!out) throw SimError("write failed for runs file: " + path);
}

void print_report(const RunReport& r) {
    std::cout << "scenario " << r.scenario_id << ", policy " << r.policy << ", seed " << r.seed
              << ", ego " << r.speed_mps << " m/s\n"
              << "  cycles counted     " << r.cycles_counted << " / " << r.cycles_total << "\n"
              << "  mean DSSR          " << r.mean_dssr_pct << " %\n"
              << "  mean latency       " << r.mean_latency.total() << " ms (sequencing "
              << r.mean_latency.sequencing << ", connection " << r.mean_latency.connection
              << ", prediction " << r.mean_latency.prediction << ")\n"
              << "  AoI satisfaction   " << r.aoi_satisfaction_pct << " %\n"
              << "  mean received AoI  " << r.mean_aoi_ms << " ms\n"
              << "  predictions        " << r.prediction_invocations << "\n"
              << "  updates received   " << r.updates_received << " (discarded "
              << r.updates_discarded << ")\n"
              << "  sequencing issues  " << r.sequencing_issues << "\n";
}

int cmd_simulate(const std::string& scenario_path, const std::string& policy_name,
                 std::uint64_t seed, bool seed_set, double speed, bool speed_set,
                 const std::string& out_flag) {
    Scenario sc = Scenario::load(scenario_path);
    if (seed_set) sc.seed = seed;
    if (speed_set) {
        sc.ego.speed = speed;
        sc.ego.speed_profile.points.clear();
        sc.ego.speed_min = std::min(sc.ego.speed_min, speed);
        sc.ego.speed_max = std::max(sc.ego.speed_max, speed);
    }
    const Policy policy = parse_policy(policy_name);
    const SimulationOutput out = simulate(sc, policy, sc.seed);

    const fs::path dir = prepare_dir(output_root(out_flag));
    write_report_csv((dir / "report.csv").string(), out.result.report, out.result.cycles);
    write_events_csv((dir / "events.csv").string(), out.result.events);
    write_trace_csv((dir / "trace.csv").string(), out.trace);

    print_report(out.result.report);
    std::cout << "wrote " << (dir / "report.csv").string() << ", events.csv, trace.csv\n";
    return 0;
}

int cmd_train(const std::string& scenario_path, const std::string& model_name,
              std::uint64_t seed, bool seed_set, const std::string& out_flag) {
    Scenario sc = Scenario::load(scenario_path);
    if (seed_set) sc.seed = seed;
    PredictorKind kind = sc.predictor.kind;
    if (!model_name.empty()) kind = parse_predictor_kind(model_name);

    const TrainOutput out = train_pipeline(sc, kind, sc.seed);
    const fs::path dir = prepare_dir(output_root(out_flag));
    for (const auto& [horizon, model] : out.models) {
        const fs::path file = dir / ("model_" + to_string(kind) + "_h" +
                                     std::to_string(horizon) + ".bin");
        model.save(file.string());
        std::cout << "horizon " << horizon << ": loss " << model.report.final_loss
                  << ", parameters " << model.parameter_count() << ", train "
                  << model.report.train_examples << " / test " << model.report.test_examples
                  << " examples, " << model.report.train_time_ms << " ms\n";
        auto eval = out.evals.find(horizon);
        if (eval != out.evals.end())
            std::cout << "  held-out MAE " << eval->second.mae_ms << " ms, within tolerance "
                      << eval->second.within_tolerance_pct << " %, per-call latency "
                      << eval->second.mean_latency_ms << " ms\n";
        std::cout << "  saved " << file.string() << "\n";
    }
    return 0;
}

int cmd_sweep(const std::string& scenario_path, const std::vector<double>& speeds,
              const std::vector<std::string>& policy_names,
              const std::vector<std::uint64_t>& seeds, bool plot,
              const std::string& out_flag) {
    Scenario sc = Scenario::load(scenario_path);
    SweepConfig sweep;
    if (!speeds.empty()) sweep.speeds = speeds;
    if (!policy_names.empty()) {
        sweep.policies.clear();
        for (const std::string& name : policy_names) sweep.policies.push_back(parse_policy(name));
    }
    if (!seeds.empty()) sweep.seeds = seeds;

    const SweepResult result = run_sweep(sc, sweep);
    const fs::path dir = prepare_dir(output_root(out_flag));
    write_comparison_csv((dir / "comparison.csv").string(), result.comparison, sc.id);
    write_runs_csv((dir / "runs.csv").string(), result.runs);

    std::cout << "policy        speed   dssr%   latency_ms\n";
    for (const ComparisonRow& row : result.comparison)
        std::cout << row.policy << std::string(14 - std::min<std::size_t>(13, row.policy.size()),
                                               ' ')
                  << row.speed_mps << "\t" << row.mean_dssr_pct << "\t" << row.mean_latency_ms
                  << "\n";
    std::cout << "wrote " << (dir / "comparison.csv").string() << ", runs.csv\n";
    if (plot) {
        plot_comparison(dir.string(), result.comparison);
        std::cout << "wrote dssr_vs_speed.svg, latency_vs_speed.svg, latency_breakdown.svg\n";
    }
    return 0;
}

int cmd_plot(const std::string& in_path, const std::string& out_flag) {
    const std::vector<ComparisonRow> rows = read_comparison_csv(in_path);
    const fs::path dir = prepare_dir(output_root(out_flag));
    plot_comparison(dir.string(), rows);
    std::cout << "wrote " << (dir / "dssr_vs_speed.svg").string()
              << ", latency_vs_speed.svg, latency_breakdown.svg\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Update-aggregation simulator: freshness-aware service scheduling "
                 "for a connected vehicle"};
    app.require_subcommand(1);

    std::string scenario_path, policy_name = "predictive", model_name, out_flag, in_path;
    std::uint64_t seed = 0;
    double speed = 0.0;
    std::vector<double> speeds;
    std::vector<std::string> policy_names;
    std::vector<std::uint64_t> seeds;
    bool plot_after_sweep = false;

    CLI::App* sim = app.add_subcommand("simulate", "Run one scenario under one policy");
    sim->add_option("--scenario", scenario_path, "Scenario file")->required();
    sim->add_option("--policy", policy_name,
                    "predictive, fifo, priority, or stop-n-wait");
    CLI::Option* sim_seed = sim->add_option("--seed", seed, "Override the scenario seed");
    CLI::Option* sim_speed = sim->add_option("--speed", speed, "Override the ego speed (m/s)");
    sim->add_option("--out", out_flag, "Output directory (default $AOISIM_OUT or ./out)");

    CLI::App* train = app.add_subcommand("train", "Train forecasters on a scenario's trace");
    train->add_option("--scenario", scenario_path, "Scenario file")->required();
    train->add_option("--model", model_name, "linear, recurrent, or forest");
    CLI::Option* train_seed = train->add_option("--seed", seed, "Override the scenario seed");
    train->add_option("--out", out_flag, "Output directory (default $AOISIM_OUT or ./out)");

    CLI::App* sweep = app.add_subcommand("sweep", "Compare policies across ego speeds");
    sweep->add_option("--scenario", scenario_path, "Scenario file")->required();
    sweep->add_option("--speeds", speeds, "Ego speeds in m/s")->delimiter(',');
    sweep->add_option("--policies", policy_names, "Policies to compare")->delimiter(',');
    sweep->add_option("--seeds", seeds, "Seeds, one run per seed")->delimiter(',');
    sweep->add_flag("--plot", plot_after_sweep, "Also render the comparison charts");
    sweep->add_option("--out", out_flag, "Output directory (default $AOISIM_OUT or ./out)");

    CLI::App* plot = app.add_subcommand("plot", "Render charts from a comparison CSV");
    plot->add_option("--in", in_path, "comparison.csv from a sweep")->required();
    plot->add_option("--out", out_flag, "Output directory (default $AOISIM_OUT or ./out)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed())
            return cmd_simulate(scenario_path, policy_name, seed, sim_seed->count() > 0, speed,
                                sim_speed->count() > 0, out_flag);
        if (train->parsed())
            return cmd_train(scenario_path, model_name, seed, train_seed->count() > 0, out_flag);
        if (sweep->parsed())
            return cmd_sweep(scenario_path, speeds, policy_names, seeds, plot_after_sweep,
                             out_flag);
        if (plot->parsed()) return cmd_plot(in_path, out_flag);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
