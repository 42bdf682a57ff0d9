#ifndef AOISIM_PREDICTOR_PERIOD_HPP
#define AOISIM_PREDICTOR_PERIOD_HPP

#include <algorithm>
#include <cmath>

#include "aoisim/core.hpp"

namespace aoisim {

struct PeriodChoice {
    int period = 1;        // cycles between prediction refreshes
    double lower = 0.0;    // raw interval bounds before rounding/clamping
    double upper = 0.0;
    bool degenerate = false;  // interval was empty; fell back to the lower edge
};

/// Picks how many cycles a prediction stays in force. The lower bound keeps
/// the amortized prediction cost under one cycle's budget; the upper bound
/// caps the refresh gap so a node cannot cross the coverage area unrefreshed.
/// A stationary node (scar == 0) has no upper constraint.
inline PeriodChoice choose_period(Millis prediction_latency_ms, double q, double scar,
                                  int n_max = 64) {
    if (q <= 0.0) throw SimError("choose_period: q must be > 0");
    if (prediction_latency_ms < 0.0) throw SimError("choose_period: negative latency");
    if (scar < 0.0) throw SimError("choose_period: negative scar");
    if (n_max < 1) throw SimError("choose_period: n_max must be >= 1");

    PeriodChoice choice;
    choice.lower = prediction_latency_ms * q / 1000.0;
    choice.upper = scar > 0.0 ? q / scar : static_cast<double>(n_max);

    const int lo = std::max(1, static_cast<int>(std::ceil(choice.lower)));
    const int hi = static_cast<int>(std::floor(choice.upper));
    if (hi < lo) {
        choice.degenerate = true;
        choice.period = std::min(lo, n_max);
    } else {
        choice.period = std::clamp(hi, 1, n_max);
    }
    return choice;
}

}  // namespace aoisim

#endif  // AOISIM_PREDICTOR_PERIOD_HPP
