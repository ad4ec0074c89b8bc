#pragma once

#include <span>

namespace daseg {

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    double df = 0.0;
    double mean_difference = 0.0;
};

/// Two-sided paired t-test on a[i] - b[i]. Throws StatisticsError for fewer than two pairs,
/// unequal lengths, or zero variance of the differences.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// P(T <= t) for Student's t with `df` degrees of freedom.
double student_t_cdf(double t, double df);

}  // namespace daseg
