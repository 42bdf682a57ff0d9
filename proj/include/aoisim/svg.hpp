#ifndef AOISIM_SVG_HPP
#define AOISIM_SVG_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "aoisim/core.hpp"
#include "aoisim/metrics.hpp"

namespace aoisim {

struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;  // (x, y), drawn in order
};

struct BarStack {
    std::string label;                // one bar group, e.g. a policy name
    std::vector<double> values;       // one value per stacked segment
};

namespace svg_detail {

inline const char* kPalette[] = {"#1b6ca8", "#d1495b", "#3a7d44", "#8c6a0d",
                                 "#6f4a8e", "#2e2e2e"};
inline constexpr int kPaletteSize = 6;

inline std::string num(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << v;
    return out.str();
}

/// Rounds a span to a friendly tick step (1/2/5 times a power of ten).
inline double tick_step(double span, int target_ticks) {
    if (span <= 0.0) return 1.0;
    const double raw = span / std::max(1, target_ticks);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double frac = raw / mag;
    double step;
    if (frac <= 1.0) step = 1.0;
    else if (frac <= 2.0) step = 2.0;
    else if (frac <= 5.0) step = 5.0;
    else step = 10.0;
    return step * mag;
}

inline std::string escape(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace svg_detail

/// Writes a fixed-size line chart. Axis ranges come from the data with a
/// small padding; everything about the output is deterministic.
inline void write_line_chart(const std::string& path, const std::string& title,
                             const std::string& x_label, const std::string& y_label,
                             const std::vector<PlotSeries>& series) {
    if (series.empty()) throw SimError("line chart needs at least one series");
    double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
    bool first = true;
    for (const PlotSeries& s : series) {
        if (s.points.empty()) throw SimError("line chart series '" + s.label + "' is empty");
        for (const auto& [x, y] : s.points) {
            if (first) {
                x_min = x_max = x;
                y_min = y_max = y;
                first = false;
            }
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
            y_min = std::min(y_min, y);
            y_max = std::max(y_max, y);
        }
    }
    if (x_max == x_min) x_max = x_min + 1.0;
    const double y_pad = (y_max - y_min) * 0.08;
    y_min -= y_pad > 0.0 ? y_pad : 1.0;
    y_max += y_pad > 0.0 ? y_pad : 1.0;

    const double width = 640.0, height = 420.0;
    const double left = 70.0, right = 160.0, top = 48.0, bottom = 56.0;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    auto sx = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
    auto sy = [&](double y) { return top + plot_h - (y - y_min) / (y_max - y_min) * plot_h; };

    using svg_detail::escape;
    using svg_detail::num;
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"15\" font-weight=\"bold\">"
        << escape(title) << "</text>\n";

    // axes and grid
    const double x_step = svg_detail::tick_step(x_max - x_min, 6);
    const double y_step = svg_detail::tick_step(y_max - y_min, 6);
    for (double t = std::ceil(x_min / x_step) * x_step; t <= x_max + 1e-9; t += x_step) {
        out << "<line x1=\"" << num(sx(t)) << "\" y1=\"" << num(top) << "\" x2=\"" << num(sx(t))
            << "\" y2=\"" << num(top + plot_h) << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"" << num(sx(t)) << "\" y=\"" << num(top + plot_h + 18)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << num(t) << "</text>\n";
    }
    for (double t = std::ceil(y_min / y_step) * y_step; t <= y_max + 1e-9; t += y_step) {
        out << "<line x1=\"" << num(left) << "\" y1=\"" << num(sy(t)) << "\" x2=\""
            << num(left + plot_w) << "\" y2=\"" << num(sy(t)) << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"" << num(left - 8) << "\" y=\"" << num(sy(t) + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(t)
            << "</text>\n";
    }
    out << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(plot_w)
        << "\" height=\"" << num(plot_h) << "\" fill=\"none\" stroke=\"#333333\"/>\n";
    out << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"" << num(height - 12)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << escape(x_label) << "</text>\n";
    out << "<text x=\"18\" y=\"" << num(top + plot_h / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
           "transform=\"rotate(-90 18 "
        << num(top + plot_h / 2) << ")\">" << escape(y_label) << "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = svg_detail::kPalette[i % svg_detail::kPaletteSize];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : series[i].points) out << num(sx(x)) << ',' << num(sy(y)) << ' ';
        out << "\"/>\n";
        for (const auto& [x, y] : series[i].points)
            out << "<circle cx=\"" << num(sx(x)) << "\" cy=\"" << num(sy(y))
                << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        const double ly = top + 16.0 + 18.0 * static_cast<double>(i);
        out << "<line x1=\"" << num(left + plot_w + 12) << "\" y1=\"" << num(ly) << "\" x2=\""
            << num(left + plot_w + 34) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << num(left + plot_w + 40) << "\" y=\"" << num(ly + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(series[i].label)
            << "</text>\n";
    }
    out << "</svg>\n";

    std::ofstream file(path);
    if (!file) throw SimError("cannot open chart file: " + path);
    file << out.str();
    if (!file) throw SimError("write failed for chart file: " + path);
}

/// Writes a stacked bar chart, one bar per group, one color per segment.
inline void write_stacked_bars(const std::string& path, const std::string& title,
                               const std::string& y_label,
                               const std::vector<std::string>& segment_labels,
                               const std::vector<BarStack>& groups) {
    if (groups.empty()) throw SimError("bar chart needs at least one group");
    double y_max = 0.0;
    for (const BarStack& g : groups) {
        if (g.values.size() != segment_labels.size())
            throw SimError("bar chart group '" + g.label + "' does not match segment labels");
        double total = 0.0;
        for (double v : g.values) {
            if (v < 0.0) throw SimError("bar chart values must be non-negative");
            total += v;
        }
        y_max = std::max(y_max, total);
    }
    if (y_max <= 0.0) y_max = 1.0;
    y_max *= 1.08;

    const double width = 640.0, height = 420.0;
    const double left = 70.0, right = 160.0, top = 48.0, bottom = 56.0;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    const double slot = plot_w / static_cast<double>(groups.size());
    const double bar_w = slot * 0.55;

    using svg_detail::escape;
    using svg_detail::num;
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"15\" font-weight=\"bold\">"
        << escape(title) << "</text>\n";

    const double y_step = svg_detail::tick_step(y_max, 6);
    for (double t = 0.0; t <= y_max + 1e-9; t += y_step) {
        const double y = top + plot_h - t / y_max * plot_h;
        out << "<line x1=\"" << num(left) << "\" y1=\"" << num(y) << "\" x2=\""
            << num(left + plot_w) << "\" y2=\"" << num(y) << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"" << num(left - 8) << "\" y=\"" << num(y + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(t)
            << "</text>\n";
    }
    out << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(plot_w)
        << "\" height=\"" << num(plot_h) << "\" fill=\"none\" stroke=\"#333333\"/>\n";
    out << "<text x=\"18\" y=\"" << num(top + plot_h / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
           "transform=\"rotate(-90 18 "
        << num(top + plot_h / 2) << ")\">" << escape(y_label) << "</text>\n";

    for (std::size_t g = 0; g < groups.size(); ++g) {
        const double x0 = left + slot * static_cast<double>(g) + (slot - bar_w) / 2.0;
        double base = top + plot_h;
        for (std::size_t s = 0; s < groups[g].values.size(); ++s) {
            const double h = groups[g].values[s] / y_max * plot_h;
            base -= h;
            out << "<rect x=\"" << num(x0) << "\" y=\"" << num(base) << "\" width=\""
                << num(bar_w) << "\" height=\"" << num(h) << "\" fill=\""
                << svg_detail::kPalette[s % svg_detail::kPaletteSize] << "\"/>\n";
        }
        out << "<text x=\"" << num(x0 + bar_w / 2) << "\" y=\"" << num(top + plot_h + 18)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << escape(groups[g].label) << "</text>\n";
    }
    for (std::size_t s = 0; s < segment_labels.size(); ++s) {
        const double ly = top + 16.0 + 18.0 * static_cast<double>(s);
        out << "<rect x=\"" << num(left + plot_w + 12) << "\" y=\"" << num(ly - 8)
            << "\" width=\"14\" height=\"14\" fill=\""
            << svg_detail::kPalette[s % svg_detail::kPaletteSize] << "\"/>\n";
        out << "<text x=\"" << num(left + plot_w + 32) << "\" y=\"" << num(ly + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(segment_labels[s])
            << "</text>\n";
    }
    out << "</svg>\n";

    std::ofstream file(path);
    if (!file) throw SimError("cannot open chart file: " + path);
    file << out.str();
    if (!file) throw SimError("write failed for chart file: " + path);
}

/// Reads back a policy-comparison CSV produced by write_comparison_csv.
/// Comment lines start with '#'; the header row is required.
inline std::vector<ComparisonRow> read_comparison_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SimError("cannot open comparison file: " + path);
    std::string line;
    bool header_seen = false;
    std::vector<ComparisonRow> rows;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (!header_seen) {
            if (fields.empty() || fields[0] != "policy")
                throw SimError("comparison csv line " + std::to_string(number) +
                               ": expected header starting with 'policy'");
            header_seen = true;
            continue;
        }
        if (fields.size() != 10)
            throw SimError("comparison csv line " + std::to_string(number) +
                           ": expected 10 fields, got " + std::to_string(fields.size()));
        try {
            ComparisonRow r;
            r.policy = fields[0];
            r.speed_mps = std::stod(fields[1]);
            r.runs = std::stoi(fields[2]);
            r.mean_dssr_pct = std::stod(fields[3]);
            r.mean_latency_ms = std::stod(fields[4]);
            r.mean_sequencing_ms = std::stod(fields[5]);
            r.mean_connection_ms = std::stod(fields[6]);
            r.mean_prediction_ms = std::stod(fields[7]);
            r.aoi_satisfaction_pct = std::stod(fields[8]);
            r.issues_per_cycle = std::stod(fields[9]);
            rows.push_back(std::move(r));
        } catch (const std::exception&) {
            throw SimError("comparison csv line " + std::to_string(number) +
                           ": malformed numeric field");
        }
    }
    if (rows.empty()) throw SimError("comparison csv has no data rows: " + path);
    return rows;
}

/// Renders the three standard charts for a policy comparison into a
/// directory: success rate vs speed, latency vs speed, and the mean
/// latency breakdown per policy.
inline void plot_comparison(const std::string& dir, const std::vector<ComparisonRow>& rows) {
    if (rows.empty()) throw SimError("nothing to plot");
    std::map<std::string, PlotSeries> dssr, latency;
    std::map<std::string, std::vector<const ComparisonRow*>> by_policy;
    for (const ComparisonRow& r : rows) {
        dssr[r.policy].label = r.policy;
        dssr[r.policy].points.emplace_back(r.speed_mps, r.mean_dssr_pct);
        latency[r.policy].label = r.policy;
        latency[r.policy].points.emplace_back(r.speed_mps, r.mean_latency_ms);
        by_policy[r.policy].push_back(&r);
    }
    auto collect = [](std::map<std::string, PlotSeries>& m) {
        std::vector<PlotSeries> out;
        for (auto& [key, s] : m) {
            std::sort(s.points.begin(), s.points.end());
            out.push_back(std::move(s));
        }
        return out;
    };
    write_line_chart(dir + "/dssr_vs_speed.svg", "Sequencing success rate vs ego speed",
                     "ego speed (m/s)", "mean DSSR (%)", collect(dssr));
    write_line_chart(dir + "/latency_vs_speed.svg", "Aggregation latency vs ego speed",
                     "ego speed (m/s)", "mean latency (ms)", collect(latency));

    std::vector<BarStack> stacks;
    for (const auto& [policy, group] : by_policy) {
        BarStack stack;
        stack.label = policy;
        double seq = 0.0, conn = 0.0, pred = 0.0;
        for (const ComparisonRow* r : group) {
            seq += r->mean_sequencing_ms;
            conn += r->mean_connection_ms;
            pred += r->mean_prediction_ms;
        }
        const double n = static_cast<double>(group.size());
        stack.values = {seq / n, conn / n, pred / n};
        stacks.push_back(std::move(stack));
    }
    write_stacked_bars(dir + "/latency_breakdown.svg", "Mean latency breakdown per policy",
                       "latency (ms)", {"sequencing", "connection", "prediction"}, stacks);
}

}  // namespace aoisim

#endif  // AOISIM_SVG_HPP
