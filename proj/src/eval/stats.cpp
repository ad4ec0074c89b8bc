#include "daseg/eval/stats.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <string>

#include "daseg/error.hpp"

namespace daseg {

double student_t_cdf(double t, double df) {
    if (!(df > 0.0)) throw StatisticsError("degrees of freedom must be positive");
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    // P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2)
    const double x = df / (df + t * t);
    const double tail = 0.5 * boost::math::ibeta(df / 2.0, 0.5, x);
    return t >= 0.0 ? 1.0 - tail : tail;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw StatisticsError("paired samples differ in length: " + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()));
    }
    const auto n = a.size();
    if (n < 2) throw StatisticsError("paired t-test needs at least two pairs");

    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = (a[i] - b[i]) - mean;
        ss += d * d;
    }
    const double var = ss / static_cast<double>(n - 1);
    if (!(var > 0.0)) throw StatisticsError("paired differences have zero variance");

    TTestResult r;
    r.df = static_cast<double>(n - 1);
    r.mean_difference = mean;
    r.t = mean / std::sqrt(var / static_cast<double>(n));
    const double x = r.df / (r.df + r.t * r.t);
    r.p = boost::math::ibeta(r.df / 2.0, 0.5, x);
    return r;
}

}  // namespace daseg
