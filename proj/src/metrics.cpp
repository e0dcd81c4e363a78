#include "pupilkit/metrics.hpp"

#include <cmath>
#include <limits>

namespace pupilkit::metrics {

namespace {

void require_same_size(VectorRef a, VectorRef b) {
    if (a.size() != b.size())
        throw DataError("invalid-input", "series length mismatch: " + std::to_string(a.size()) +
                                             " vs " + std::to_string(b.size()));
    if (!a.allFinite() || !b.allFinite())
        throw DataError("invalid-input", "non-finite values in series");
}

// Continued fraction for the incomplete beta (Lentz's method).
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    throw NumericError("beta-divergence", "incomplete beta did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_bt =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_cf(a, b, x) / a;
    return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double dof) {
    if (dof <= 0) throw NumericError("undefined", "degrees of freedom must be positive");
    if (!std::isfinite(t)) return 0.0;
    return incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
}

std::pair<double, double> pearson(VectorRef x, VectorRef y) {
    require_same_size(x, y);
    const Eigen::Index n = x.size();
    if (n < 3) throw DataError("insufficient-data", "pearson needs at least 3 samples");

    const VectorXd xc = x.array() - x.mean();
    const VectorXd yc = y.array() - y.mean();
    const double sxx = xc.squaredNorm();
    const double syy = yc.squaredNorm();
    if (sxx <= 0.0 || syy <= 0.0)
        throw NumericError("undefined-correlation", "zero variance series");

    double r = xc.dot(yc) / std::sqrt(sxx * syy);
    r = std::clamp(r, -1.0, 1.0);

    const double dof = static_cast<double>(n - 2);
    const double denom = 1.0 - r * r;
    double p = 0.0;
    if (denom > 0.0) {
        const double t = r * std::sqrt(dof / denom);
        p = student_t_two_sided_p(t, dof);
    }
    return {r, p};
}

double r2_score(VectorRef observed, VectorRef predicted) {
    require_same_size(observed, predicted);
    if (observed.size() < 2) throw DataError("insufficient-data", "r2 needs at least 2 samples");
    const double ss_tot = (observed.array() - observed.mean()).square().sum();
    if (ss_tot <= 0.0) throw NumericError("undefined", "zero variance in observed series");
    const double ss_res = (observed - predicted).squaredNorm();
    return 1.0 - ss_res / ss_tot;
}

double nrmse(VectorRef observed, VectorRef predicted) {
    require_same_size(observed, predicted);
    if (observed.size() < 1) throw DataError("insufficient-data", "empty series");
    const double range = observed.maxCoeff() - observed.minCoeff();
    if (range <= 0.0) throw NumericError("undefined", "zero range in observed series");
    const double rmse =
        std::sqrt((observed - predicted).squaredNorm() / static_cast<double>(observed.size()));
    return rmse / range;
}

EvalReport evaluate(VectorRef observed, VectorRef predicted) {
    EvalReport rep;
    rep.n = static_cast<int>(observed.size());
    auto [r, p] = pearson(predicted, observed);
    rep.r = r;
    rep.p = p;
    rep.r2 = r2_score(observed, predicted);
    rep.nrmse = nrmse(observed, predicted);
    return rep;
}

}  // namespace pupilkit::metrics
