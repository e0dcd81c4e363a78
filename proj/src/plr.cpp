#include "pupilkit/plr.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace pupilkit::plr {

const PlrCoefficients& PlrModelSet::channel(int i) const {
    switch (i) {
        case 0: return red;
        case 1: return green;
        case 2: return blue;
        default: return gray;
    }
}

PlrCoefficients& PlrModelSet::channel(int i) {
    switch (i) {
        case 0: return red;
        case 1: return green;
        case 2: return blue;
        default: return gray;
    }
}

PlrModelSet group_reference_model() {
    PlrModelSet m;
    m.red = {2.6317, 1.3371, -0.0152, 3.1500};
    m.green = {3.1259, 1.2324, -0.0073, 2.5036};
    m.blue = {3.4430, 1.6167, -0.0193, 2.6271};
    m.gray = {2.4465, 0.5638, -0.0184, 3.4140};
    m.provenance = "group";
    return m;
}

namespace {

double sse_of(const PlrCoefficients& coeffs, VectorRef lux, VectorRef pupil) {
    double s = 0;
    for (Eigen::Index i = 0; i < lux.size(); ++i) {
        const double r = coeffs.evaluate(lux[i]) - pupil[i];
        s += r * r;
    }
    return s;
}

}  // namespace

PlrCoefficients fit_plr_curve(VectorRef lux, VectorRef pupil_mm, const PlrCoefficients& init,
                              const FitOptions& options, FitDiagnostics* diagnostics) {
    const Eigen::Index n = lux.size();
    if (n != pupil_mm.size())
        throw DataError("invalid-input", "lux/pupil length mismatch");
    if (!lux.allFinite() || !pupil_mm.allFinite())
        throw DataError("invalid-input", "non-finite fit data");
    std::set<double> distinct(lux.data(), lux.data() + n);
    if (n < 4 || distinct.size() < 3)
        throw DataError("insufficient-data",
                        "curve fit needs at least 4 points with 3 distinct luminosities");

    Eigen::Vector4d theta(init.a, init.b, init.c, init.d);
    auto as_coeffs = [](const Eigen::Vector4d& t) {
        return PlrCoefficients{t[0], t[1], t[2], t[3]};
    };
    double sse = sse_of(as_coeffs(theta), lux, pupil_mm);
    if (!std::isfinite(sse))
        throw NumericError("fit-failure", "initial coefficients produce non-finite residuals");

    double damping = 1e-3;
    bool converged = false;
    int iter = 0;
    for (; iter < options.max_iter; ++iter) {
        Eigen::MatrixX4d jac(n, 4);
        VectorXd residual(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double e = std::exp(-theta[1] * lux[i]);
            jac(i, 0) = e;
            jac(i, 1) = -theta[0] * lux[i] * e;
            jac(i, 2) = lux[i];
            jac(i, 3) = 1.0;
            residual[i] = theta[0] * e + theta[2] * lux[i] + theta[3] - pupil_mm[i];
        }
        const Eigen::Matrix4d jtj = jac.transpose() * jac;
        const Eigen::Vector4d jtr = jac.transpose() * residual;

        bool accepted = false;
        while (damping <= 1e12) {
            const Eigen::Matrix4d lhs = jtj + damping * Eigen::Matrix4d::Identity();
            const Eigen::Vector4d step = lhs.ldlt().solve(-jtr);
            const Eigen::Vector4d candidate = theta + step;
            const double candidate_sse = sse_of(as_coeffs(candidate), lux, pupil_mm);
            if (std::isfinite(candidate_sse) && candidate_sse <= sse) {
                const double rel_change = (sse - candidate_sse) / std::max(sse, 1e-300);
                theta = candidate;
                sse = candidate_sse;
                damping = std::max(damping / 10.0, 1e-12);
                accepted = true;
                if (rel_change < options.tol) converged = true;
                break;
            }
            damping *= 10.0;
        }
        if (!accepted) {
            converged = true;  // stalled: no improving step exists at any damping
            break;
        }
        if (converged) break;
    }

    if (diagnostics) {
        diagnostics->sse = sse;
        diagnostics->iterations = iter + 1;
        diagnostics->converged = converged;
    }
    return as_coeffs(theta);
}

std::span<const RgbPercent> calibration_points() {
    static const std::array<RgbPercent, 9> kPoints = {{
        {0, 0, 0},
        {50, 0, 0},
        {100, 0, 0},
        {0, 50, 0},
        {0, 100, 0},
        {0, 0, 50},
        {0, 0, 100},
        {50, 50, 50},
        {100, 100, 100},
    }};
    return kPoints;
}

namespace {

std::string point_name(const RgbPercent& p) {
    std::ostringstream ss;
    ss << '(' << p.r << ',' << p.g << ',' << p.b << ')';
    return ss.str();
}

}  // namespace

PlrModelSet calibrate_participant(const PlrModelSet& group,
                                  std::span<const CalibrationSample> samples,
                                  const LuminanceLUT& lut, const std::string& participant_id) {
    const auto points = calibration_points();
    std::array<const CalibrationSample*, 9> found{};
    for (const auto& sample : samples) {
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (!sample.rgb.almost_equal(points[i])) continue;
            if (found[i])
                throw DataError("calibration-error",
                                "duplicate calibration point " + point_name(points[i]));
            found[i] = &sample;
        }
    }
    for (std::size_t i = 0; i < points.size(); ++i)
        if (!found[i])
            throw DataError("calibration-error",
                            "missing calibration point " + point_name(points[i]));

    // Point indices per channel: shared black plus that channel's 50%/100%.
    constexpr int kChannelPoints[4][3] = {{0, 1, 2}, {0, 3, 4}, {0, 5, 6}, {0, 7, 8}};

    PlrModelSet participant = group;
    participant.provenance = participant_id;
    for (int ch = 0; ch < 4; ++ch) {
        const double b = group.channel(ch).b;
        Eigen::Matrix3d design;
        Eigen::Vector3d observed;
        for (int row = 0; row < 3; ++row) {
            const auto* sample = found[static_cast<std::size_t>(kChannelPoints[ch][row])];
            const double lux = lut.query(sample->rgb);
            design(row, 0) = std::exp(-b * lux);
            design(row, 1) = lux;
            design(row, 2) = 1.0;
            observed[row] = sample->mean_pupil_mm;
        }
        Eigen::FullPivLU<Eigen::Matrix3d> lu(design);
        if (!lu.isInvertible())
            throw NumericError("degenerate-calibration",
                               "calibration points give a singular system (channel " +
                                   std::to_string(ch) + ")");
        const Eigen::Vector3d solution = lu.solve(observed);
        PlrCoefficients& coeffs = participant.channel(ch);
        coeffs.a = solution[0];
        coeffs.b = b;
        coeffs.c = solution[1];
        coeffs.d = solution[2];
    }
    return participant;
}

double predict_gray(const PlrModelSet& model, double lux) {
    if (!(lux >= 0) || !std::isfinite(lux))
        throw DataError("domain-error", "luminosity must be nonnegative");
    return model.gray.evaluate(lux);
}

double predict_color_based(const PlrModelSet& model, const RgbPercent& rgb,
                           const LuminanceLUT& lut) {
    if (!rgb.in_range()) throw DataError("domain-error", "rgb out of range");
    const double total = rgb.r + rgb.g + rgb.b;
    if (total <= 0.0) return predict_gray(model, lut.query({0, 0, 0}));
    const double ps_red = model.red.evaluate(lut.query({rgb.r, 0, 0}));
    const double ps_green = model.green.evaluate(lut.query({0, rgb.g, 0}));
    const double ps_blue = model.blue.evaluate(lut.query({0, 0, rgb.b}));
    return (rgb.r * ps_red + rgb.g * ps_green + rgb.b * ps_blue) / total;
}

CombinedPredictors combined_predictors(const PlrModelSet& model, const RgbPercent& rgb,
                                       const LuminanceLUT& lut) {
    CombinedPredictors p;
    p.gray = model.gray.evaluate(lut.query(rgb));
    p.red = model.red.evaluate(lut.query({rgb.r, 0, 0}));
    p.green = model.green.evaluate(lut.query({0, rgb.g, 0}));
    p.blue = model.blue.evaluate(lut.query({0, 0, rgb.b}));
    return p;
}

namespace {

/// Gray-only fallback: weights (1,0,0,0), gain and intercept from the
/// minimum-norm least squares of measured on the gray predictor.
CombinedWeights gray_fallback(const std::vector<CombinedPredictors>& predictors,
                              VectorRef measured) {
    const Eigen::Index n = measured.size();
    MatrixXd design(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        design(i, 0) = predictors[static_cast<std::size_t>(i)].gray;
        design(i, 1) = 1.0;
    }
    Eigen::JacobiSVD<MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::Vector2d solution = svd.solve(measured);
    CombinedWeights w;
    w.a_gray = 1;
    w.a_red = w.a_green = w.a_blue = 0;
    w.k = solution[0];
    w.c = solution[1];
    return w;
}

}  // namespace

CombinedWeights fit_combined(const std::vector<CombinedPredictors>& predictors,
                             VectorRef measured_mm, bool* degenerate) {
    const Eigen::Index n = measured_mm.size();
    if (static_cast<std::size_t>(n) != predictors.size())
        throw DataError("invalid-input", "predictor/measured length mismatch");
    if (n < 6) throw DataError("insufficient-data", "combined fit needs at least 6 observations");
    for (const auto& p : predictors)
        if (!std::isfinite(p.gray) || !std::isfinite(p.red) || !std::isfinite(p.green) ||
            !std::isfinite(p.blue))
            throw DataError("invalid-input", "non-finite predictors");
    if (!measured_mm.allFinite()) throw DataError("invalid-input", "non-finite measurements");

    // Substituting a_blue = 1 - a_gray - a_red - a_green turns the model into
    //   y = bg*(G-B) + br*(R-B) + bn*(Gn-B) + k*B + c,  with a_i = b_i / k.
    MatrixXd design(n, 5);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = predictors[static_cast<std::size_t>(i)];
        design(i, 0) = p.gray - p.blue;
        design(i, 1) = p.red - p.blue;
        design(i, 2) = p.green - p.blue;
        design(i, 3) = p.blue;
        design(i, 4) = 1.0;
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < 5) {
        if (degenerate) *degenerate = true;
        return gray_fallback(predictors, measured_mm);
    }
    const Eigen::VectorXd beta = qr.solve(measured_mm);
    const double k = beta[3];
    if (std::fabs(k) < 1e-9) {
        if (degenerate) *degenerate = true;
        return gray_fallback(predictors, measured_mm);
    }
    CombinedWeights w;
    w.a_gray = beta[0] / k;
    w.a_red = beta[1] / k;
    w.a_green = beta[2] / k;
    w.a_blue = 1.0 - w.a_gray - w.a_red - w.a_green;
    w.k = k;
    w.c = beta[4];
    if (degenerate) *degenerate = false;
    return w;
}

double predict_combined(const CombinedWeights& weights, const CombinedPredictors& predictors) {
    if (std::fabs(weights.weight_sum() - 1.0) > 1e-6)
        throw NumericError("invalid-model", "combined weights must sum to 1");
    const double mix = weights.a_gray * predictors.gray + weights.a_red * predictors.red +
                       weights.a_green * predictors.green + weights.a_blue * predictors.blue;
    return weights.k * mix + weights.c;
}

void save_model_set(const PlrModelSet& model, const std::string& path, const io::FileHeader& meta) {
    std::ofstream out(path);
    if (!out) throw DataError("output-error", "cannot write " + path);
    out << io::header_line(meta) << '\n';
    out << "pupilkit-plr v1 " << model.provenance << '\n';
    const char* names[4] = {"red", "green", "blue", "gray"};
    for (int ch = 0; ch < 4; ++ch) {
        const auto& coeffs = model.channel(ch);
        out << names[ch] << ' ' << format_double(coeffs.a) << ' ' << format_double(coeffs.b) << ' '
            << format_double(coeffs.c) << ' ' << format_double(coeffs.d) << '\n';
    }
    if (!out) throw DataError("output-error", "write failed on " + path);
}

PlrModelSet load_model_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing-input", "cannot open " + path);
    PlrModelSet model;
    std::string line;
    bool have_header = false;
    int channels_seen = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        if (!have_header) {
            std::string magic, version;
            ss >> magic >> version >> model.provenance;
            if (!ss || magic != "pupilkit-plr" || version != "v1")
                throw DataError("csv-format", path + ": bad model header");
            have_header = true;
            continue;
        }
        std::string name;
        PlrCoefficients coeffs;
        ss >> name >> coeffs.a >> coeffs.b >> coeffs.c >> coeffs.d;
        if (!ss) throw DataError("csv-format", path + ": bad model line '" + line + "'");
        int ch = -1;
        if (name == "red") ch = 0;
        else if (name == "green") ch = 1;
        else if (name == "blue") ch = 2;
        else if (name == "gray") ch = 3;
        else throw DataError("csv-format", path + ": unknown channel '" + name + "'");
        model.channel(ch) = coeffs;
        ++channels_seen;
    }
    if (channels_seen != 4)
        throw DataError("csv-format", path + ": expected 4 channel lines");
    return model;
}

std::vector<CalibrationSample> load_calibration_samples(const std::string& path) {
    const io::CsvTable table = io::read_csv(path, {"r", "g", "b", "mean_pupil_mm"});
    std::vector<CalibrationSample> samples;
    samples.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        CalibrationSample s;
        s.rgb = {table.num(i, 0), table.num(i, 1), table.num(i, 2)};
        s.mean_pupil_mm = table.num(i, 3);
        if (!s.rgb.in_range())
            throw DataError("domain-error", path + ": rgb out of range at row " + std::to_string(i + 1));
        if (!(s.mean_pupil_mm > 0.5) || !(s.mean_pupil_mm < 12.0))
            throw DataError("domain-error",
                            path + ": implausible pupil size at row " + std::to_string(i + 1));
        samples.push_back(s);
    }
    return samples;
}

void save_calibration_samples(std::span<const CalibrationSample> samples, const std::string& path,
                              const io::FileHeader& meta) {
    io::CsvWriter w(path, meta, {"r", "g", "b", "mean_pupil_mm"});
    for (const auto& s : samples)
        w.row({io::cell(s.rgb.r), io::cell(s.rgb.g), io::cell(s.rgb.b), io::cell(s.mean_pupil_mm)});
}

}  // namespace pupilkit::plr
