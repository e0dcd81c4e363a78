#pragma once

#include "pupilkit/common.hpp"
#include "pupilkit/csv.hpp"
#include "pupilkit/luminance.hpp"

#include <span>
#include <string>
#include <vector>

namespace pupilkit::plr {

using luminance::LuminanceLUT;
using luminance::RgbPercent;

/// One exponential pupil-response curve PS(L) = a*exp(-b*L) + c*L + d.
struct PlrCoefficients {
    double a = 0;  // mm, exponential amplitude
    double b = 0;  // 1/lux, decay rate
    double c = 0;  // mm/lux, linear slope
    double d = 0;  // mm, asymptotic offset

    double evaluate(double lux) const { return a * std::exp(-b * lux) + c * lux + d; }
};

/// The four per-color curves plus where they came from (group fit or a
/// participant recalibration).
struct PlrModelSet {
    PlrCoefficients red, green, blue, gray;
    std::string provenance = "group";

    const PlrCoefficients& channel(int i) const;  // 0=red 1=green 2=blue 3=gray
    PlrCoefficients& channel(int i);
};

/// Built-in group-average coefficients for the four channels, fitted on the
/// reference-monitor cohort.
PlrModelSet group_reference_model();

struct CalibrationSample {
    RgbPercent rgb;
    double mean_pupil_mm = 0;
};

/// Combined-model parameters: PS = k*(a_gray*G + a_red*R + a_green*Gn
/// + a_blue*B) + c, with the four channel weights summing to 1.
struct CombinedWeights {
    double a_gray = 1, a_red = 0, a_green = 0, a_blue = 0;
    double k = 1;  // multiplicative gain
    double c = 0;  // mm intercept

    double weight_sum() const { return a_gray + a_red + a_green + a_blue; }
};

/// Per-observation channel predictions feeding the combined model.
struct CombinedPredictors {
    double gray = 0, red = 0, green = 0, blue = 0;
};

struct FitOptions {
    int max_iter = 200;
    double tol = 1e-10;  // relative SSE change
};

struct FitDiagnostics {
    double sse = 0;
    int iterations = 0;
    bool converged = false;
};

/// Least-squares fit of the exponential curve by damped Gauss-Newton
/// (damping x10 on a rejected step, /10 on acceptance). The returned
/// coefficients never have a higher SSE than `init`.
PlrCoefficients fit_plr_curve(VectorRef lux, VectorRef pupil_mm, const PlrCoefficients& init,
                              const FitOptions& options = {}, FitDiagnostics* diagnostics = nullptr);

/// Recalibrates the group model to one participant from the nine-point
/// calibration set (shared black plus the 50%/100% points of each primary
/// color and gray). b is held at the group value; (a, c, d) are solved
/// exactly per channel.
PlrModelSet calibrate_participant(const PlrModelSet& group,
                                  std::span<const CalibrationSample> samples,
                                  const LuminanceLUT& lut, const std::string& participant_id);

/// Gray-curve prediction at a luminosity value.
double predict_gray(const PlrModelSet& model, double lux);

/// Color-based prediction: channel curves at the single-color luminosities,
/// mixed by each channel's share of r+g+b. Black falls back to the gray
/// curve.
double predict_color_based(const PlrModelSet& model, const RgbPercent& rgb,
                           const LuminanceLUT& lut);

/// The four channel predictions for one observation: gray at the full-color
/// luminosity, each primary at its single-color luminosity.
CombinedPredictors combined_predictors(const PlrModelSet& model, const RgbPercent& rgb,
                                       const LuminanceLUT& lut);

/// Constrained least squares for the combined model. The sum-to-one
/// constraint is enforced by substituting a_blue = 1 - a_gray - a_red
/// - a_green. Rank-deficient designs (or vanishing gain) fall back to the
/// gray-only model with weights (1,0,0,0).
CombinedWeights fit_combined(const std::vector<CombinedPredictors>& predictors,
                             VectorRef measured_mm, bool* degenerate = nullptr);

double predict_combined(const CombinedWeights& weights, const CombinedPredictors& predictors);

/// The nine rgb triples required for calibration, lexicographic.
std::span<const RgbPercent> calibration_points();

// --- file formats ---

/// Text format: header `pupilkit-plr v1 <provenance>`, then one
/// `channel a b c d` line per channel.
void save_model_set(const PlrModelSet& model, const std::string& path, const io::FileHeader& meta);
PlrModelSet load_model_set(const std::string& path);

/// `r,g,b,mean_pupil_mm` rows.
std::vector<CalibrationSample> load_calibration_samples(const std::string& path);
void save_calibration_samples(std::span<const CalibrationSample> samples, const std::string& path,
                              const io::FileHeader& meta);

}  // namespace pupilkit::plr
