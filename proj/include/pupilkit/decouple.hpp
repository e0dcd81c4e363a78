#pragma once

#include "pupilkit/common.hpp"
#include "pupilkit/csv.hpp"
#include "pupilkit/luminance.hpp"
#include "pupilkit/plr.hpp"
#include "pupilkit/preprocess.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace pupilkit::decouple {

using luminance::LuminanceLUT;
using luminance::RgbPercent;
using plr::CombinedPredictors;
using plr::CombinedWeights;
using plr::PlrModelSet;
using preprocess::FrameWindow;

/// Emotionally relevant sub-windows of one clip, in seconds.
struct SalientInterval {
    std::string clip_id;
    std::vector<std::pair<double, double>> intervals_s;
};

/// Per-frame split of the measured pupil series into its light-driven part
/// and the residual, plus the fitted combined weights.
struct ClipDecomposition {
    VectorXd measured;    // mm
    VectorXd luminosity;  // mm, combined-model prediction
    VectorXd arousal;     // mm, measured - luminosity
    VectorXd frame_mid_s;
    std::vector<CombinedPredictors> predictors;
    CombinedWeights weights;
    bool degenerate_fit = false;
};

/// Fits the combined model to one clip and subtracts its prediction.
/// frame_rgb carries the effective per-frame mean color (gaze-region rule
/// already applied when pixel data was available).
ClipDecomposition decompose_clip(std::span<const RgbPercent> frame_rgb,
                                 std::span<const FrameWindow> frame_times,
                                 const PlrModelSet& model, const LuminanceLUT& lut,
                                 VectorRef measured_mm);

/// Same decomposition, but with combined weights supplied instead of fitted
/// (participant-scope fitting pools frames across clips first).
ClipDecomposition decompose_clip_with_weights(std::span<const RgbPercent> frame_rgb,
                                              std::span<const FrameWindow> frame_times,
                                              const PlrModelSet& model, const LuminanceLUT& lut,
                                              VectorRef measured_mm, const CombinedWeights& weights);

/// Indices of frames whose midpoints fall inside any salient interval.
std::vector<Eigen::Index> salient_frame_indices(const SalientInterval& salient,
                                                VectorRef frame_mid_s);

/// Mean of a per-frame series over the salient frames.
double salient_mean(VectorRef series, const SalientInterval& salient, VectorRef frame_mid_s);

// --- file formats ---

/// `clip_id,start_s,end_s`, multiple rows per clip.
std::map<std::string, SalientInterval> load_salient_intervals(const std::string& path);
void save_salient_intervals(std::span<const SalientInterval> intervals, const std::string& path,
                            const io::FileHeader& meta);

/// `frame_index,ps_measured,ps_luminosity,ps_arousal`.
void save_decomposition(const ClipDecomposition& decomp, const std::string& path,
                        const io::FileHeader& meta);
ClipDecomposition load_decomposition(const std::string& path,
                                     std::span<const FrameWindow> frame_times);

}  // namespace pupilkit::decouple
