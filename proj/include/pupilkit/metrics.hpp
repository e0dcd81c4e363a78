#pragma once

#include "pupilkit/common.hpp"

namespace pupilkit::metrics {

/// Evaluation statistics reported per participant and in aggregate.
struct EvalReport {
    double r = 0;      // Pearson correlation, in [-1, 1]
    double p = 1;      // two-sided p-value of r
    double r2 = 0;     // coefficient of determination, may be negative
    double nrmse = 0;  // RMSE / (max - min) of the observed series
    int n = 0;
};

/// Sample Pearson correlation with a two-sided p-value from the Student-t
/// transform t = r*sqrt((n-2)/(1-r^2)) on n-2 degrees of freedom.
/// Requires n >= 3 and nonzero variance in both series.
std::pair<double, double> pearson(VectorRef x, VectorRef y);

/// 1 - SS_res/SS_tot. Requires n >= 2 and nonzero observed variance.
double r2_score(VectorRef observed, VectorRef predicted);

/// RMSE divided by the observed range (max - min).
double nrmse(VectorRef observed, VectorRef predicted);

EvalReport evaluate(VectorRef observed, VectorRef predicted);

/// Regularized incomplete beta I_x(a, b), accurate to ~1e-14.
double incomplete_beta(double a, double b, double x);

/// Two-sided tail probability of |T| >= |t| for a Student-t with dof
/// degrees of freedom.
double student_t_two_sided_p(double t, double dof);

}  // namespace pupilkit::metrics
