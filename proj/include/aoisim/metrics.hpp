#ifndef AOISIM_METRICS_HPP
#define AOISIM_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "aoisim/core.hpp"

namespace aoisim {

/// Where a cycle's service latency goes: waiting for updates to line up,
/// the aggregation decision itself, and the amortized share of the forecast
/// that covers this cycle.
struct LatencyBreakdown {
    Millis sequencing = 0.0;
    Millis connection = 0.0;
    Millis prediction = 0.0;

    Millis total() const { return sequencing + connection + prediction; }
};

inline LatencyBreakdown cycle_latency(Millis wait_ms, Millis decision_cost_ms,
                                       Millis prediction_latency_ms, int period) {
    if (wait_ms < 0.0 || decision_cost_ms < 0.0 || prediction_latency_ms < 0.0)
        throw SimError("cycle_latency: negative component");
    if (period < 1) throw SimError("cycle_latency: period must be >= 1");
    LatencyBreakdown b;
    b.sequencing = wait_ms;
    b.connection = decision_cost_ms;
    b.prediction = prediction_latency_ms / static_cast<double>(period);
    return b;
}

/// Share of the nodes expected in a cycle whose fresh update landed in the
/// right segment before it closed, as a percentage.
inline double dssr(int placed, int expected) {
    if (expected <= 0) throw SimError("dssr: no expected nodes this cycle");
    if (placed < 0 || placed > expected) throw SimError("dssr: placed out of range");
    return 100.0 * static_cast<double>(placed) / static_cast<double>(expected);
}

struct CycleMetrics {
    int cycle = 0;
    int expected = 0;     // nodes whose update this cycle should serve
    int received = 0;     // updates that arrived tagged for this cycle
    int placed = 0;       // of expected, correctly placed before close
    int denominator = 0;  // DSSR base: expected, or received under that option
    int issues = 0;       // sequencing issues detected this cycle
    LatencyBreakdown latency;

    bool counted() const { return denominator > 0; }
    double dssr_pct() const { return dssr(placed, denominator); }
};

struct RunReport {
    std::string scenario_id;
    std::string policy;
    std::uint64_t seed = 0;
    double speed_mps = 0.0;        // nominal ego speed, used for bucketing

    int cycles_total = 0;
    int cycles_counted = 0;        // cycles with a non-empty expected set
    double mean_dssr_pct = 0.0;
    LatencyBreakdown mean_latency;
    double aoi_satisfaction_pct = 0.0;
    double mean_aoi_ms = 0.0;

    std::uint64_t prediction_invocations = 0;
    std::uint64_t updates_received = 0;
    std::uint64_t updates_discarded = 0;
    std::uint64_t sequencing_issues = 0;
    std::uint64_t stream_hash = kFnvOffset;  // over delivered update fields
};

/// Collapses per-cycle rows into a run summary. Cycles with nothing
/// expected carry no service information and are excluded from the means.
inline RunReport aggregate_report(const std::vector<CycleMetrics>& cycles) {
    RunReport report;
    report.cycles_total = static_cast<int>(cycles.size());
    double dssr_sum = 0.0;
    for (const CycleMetrics& c : cycles) {
        report.sequencing_issues += static_cast<std::uint64_t>(c.issues);
        if (!c.counted()) continue;
        ++report.cycles_counted;
        dssr_sum += c.dssr_pct();
        report.mean_latency.sequencing += c.latency.sequencing;
        report.mean_latency.connection += c.latency.connection;
        report.mean_latency.prediction += c.latency.prediction;
    }
    if (report.cycles_counted == 0)
        throw SimError("aggregate_report: no cycle had an expected node");
    const double n = static_cast<double>(report.cycles_counted);
    report.mean_dssr_pct = dssr_sum / n;
    report.mean_latency.sequencing /= n;
    report.mean_latency.connection /= n;
    report.mean_latency.prediction /= n;
    return report;
}

/// ISO-8601 UTC stamp for CSV header comments. AOISIM_TIMESTAMP
/// overrides the clock so repeated runs can produce byte-identical files.
inline std::string csv_timestamp() {
    if (const char* fixed = std::getenv("AOISIM_TIMESTAMP")) return fixed;
    const std::time_t now = std::time(nullptr);
    std::tm utc{};
    gmtime_r(&now, &utc);
    std::ostringstream out;
    out << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

inline std::string format_ms(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(6) << v;
    return out.str();
}

inline void write_report_csv(const std::string& path, const RunReport& summary,
                             const std::vector<CycleMetrics>& cycles) {
    std::ofstream out(path);
    if (!out) throw SimError("cannot open report file: " + path);
    out << "# generated " << csv_timestamp() << "\n";
    out << "# scenario=" << summary.scenario_id << " policy=" << summary.policy
        << " seed=" << summary.seed << " speed_mps=" << format_ms(summary.speed_mps) << "\n";
    out << "cycle,expected,received,placed,dssr_pct,sequencing_ms,connection_ms,"
           "prediction_ms,total_ms,issues\n";
    for (const CycleMetrics& c : cycles) {
        out << c.cycle << ',' << c.expected << ',' << c.received << ',' << c.placed << ',';
        if (c.counted())
            out << format_ms(c.dssr_pct());
        out << ',' << format_ms(c.latency.sequencing) << ',' << format_ms(c.latency.connection)
            << ',' << format_ms(c.latency.prediction) << ',' << format_ms(c.latency.total())
            << ',' << c.issues << "\n";
    }
    out << "# mean_dssr_pct=" << format_ms(summary.mean_dssr_pct)
        << " mean_latency_ms=" << format_ms(summary.mean_latency.total())
        << " aoi_satisfaction_pct=" << format_ms(summary.aoi_satisfaction_pct)
        << " prediction_invocations=" << summary.prediction_invocations
        << " sequencing_issues=" << summary.sequencing_issues
        << " stream_hash=" << summary.stream_hash << "\n";
    if (!out) throw SimError("write failed for report file: " + path);
}

struct ComparisonRow {
    std::string policy;
    double speed_mps = 0.0;
    int runs = 0;
    double mean_dssr_pct = 0.0;
    double mean_latency_ms = 0.0;
    double mean_sequencing_ms = 0.0;
    double mean_connection_ms = 0.0;
    double mean_prediction_ms = 0.0;
    double aoi_satisfaction_pct = 0.0;
    double issues_per_cycle = 0.0;
};

/// Buckets run summaries by (policy, speed) and averages across seeds.
/// Every bucket must cover the same seed set on the same scenario, so the
/// cross-policy comparison is paired run for run.
inline std::vector<ComparisonRow> compare_policies(const std::vector<RunReport>& runs) {
    if (runs.empty()) throw SimError("compare_policies: no runs");
    const std::string& scenario = runs.front().scenario_id;
    std::map<std::pair<double, std::string>, std::vector<const RunReport*>> groups;
    std::set<std::uint64_t> all_seeds;
    for (const RunReport& r : runs) {
        if (r.scenario_id != scenario)
            throw SimError("compare_policies: mixed scenarios (" + scenario + " vs " +
                           r.scenario_id + ")");
        groups[{r.speed_mps, r.policy}].push_back(&r);
        all_seeds.insert(r.seed);
    }
    for (const auto& [key, members] : groups) {
        std::set<std::uint64_t> seeds;
        for (const RunReport* r : members) seeds.insert(r->seed);
        if (seeds != all_seeds)
            throw SimError("compare_policies: policy " + key.second + " at speed " +
                           format_ms(key.first) + " is missing seeds");
    }

    std::vector<ComparisonRow> rows;
    rows.reserve(groups.size());
    for (const auto& [key, members] : groups) {
        ComparisonRow row;
        row.speed_mps = key.first;
        row.policy = key.second;
        row.runs = static_cast<int>(members.size());
        double cycles = 0.0;
        for (const RunReport* r : members) {
            row.mean_dssr_pct += r->mean_dssr_pct;
            row.mean_latency_ms += r->mean_latency.total();
            row.mean_sequencing_ms += r->mean_latency.sequencing;
            row.mean_connection_ms += r->mean_latency.connection;
            row.mean_prediction_ms += r->mean_latency.prediction;
            row.aoi_satisfaction_pct += r->aoi_satisfaction_pct;
            row.issues_per_cycle += static_cast<double>(r->sequencing_issues);
            cycles += static_cast<double>(r->cycles_total);
        }
        const double n = static_cast<double>(row.runs);
        row.mean_dssr_pct /= n;
        row.mean_latency_ms /= n;
        row.mean_sequencing_ms /= n;
        row.mean_connection_ms /= n;
        row.mean_prediction_ms /= n;
        row.aoi_satisfaction_pct /= n;
        row.issues_per_cycle = cycles > 0.0 ? row.issues_per_cycle / cycles : 0.0;
        rows.push_back(row);
    }
    return rows;
}

inline void write_comparison_csv(const std::string& path,
                                 const std::vector<ComparisonRow>& rows,
                                 const std::string& scenario_id) {
    std::ofstream out(path);
    if (!out) throw SimError("cannot open comparison file: " + path);
    out << "# generated " << csv_timestamp() << "\n";
    out << "# scenario=" << scenario_id << "\n";
    out << "policy,speed_mps,runs,mean_dssr_pct,mean_latency_ms,mean_sequencing_ms,"
           "mean_connection_ms,mean_prediction_ms,aoi_satisfaction_pct,issues_per_cycle\n";
    for (const ComparisonRow& r : rows) {
        out << r.policy << ',' << format_ms(r.speed_mps) << ',' << r.runs << ','
            << format_ms(r.mean_dssr_pct) << ',' << format_ms(r.mean_latency_ms) << ','
            << format_ms(r.mean_sequencing_ms) << ',' << format_ms(r.mean_connection_ms) << ','
            << format_ms(r.mean_prediction_ms) << ',' << format_ms(r.aoi_satisfaction_pct) << ','
            << format_ms(r.issues_per_cycle) << "\n";
    }
    if (!out) throw SimError("write failed for comparison file: " + path);
}

}  // namespace aoisim

#endif  // AOISIM_METRICS_HPP
