#include "pupilkit/decouple.hpp"

#include <algorithm>
#include <cmath>

namespace pupilkit::decouple {

namespace {

VectorXd midpoints_s(std::span<const FrameWindow> frame_times) {
    VectorXd mid(static_cast<Eigen::Index>(frame_times.size()));
    for (std::size_t f = 0; f < frame_times.size(); ++f)
        mid[static_cast<Eigen::Index>(f)] =
            0.5 * (frame_times[f].start_ms + frame_times[f].end_ms) / 1000.0;
    return mid;
}

std::vector<CombinedPredictors> frame_predictors(std::span<const RgbPercent> frame_rgb,
                                                 const PlrModelSet& model,
                                                 const LuminanceLUT& lut) {
    std::vector<CombinedPredictors> predictors;
    predictors.reserve(frame_rgb.size());
    for (const auto& rgb : frame_rgb)
        predictors.push_back(plr::combined_predictors(model, rgb, lut));
    return predictors;
}

ClipDecomposition assemble(std::vector<CombinedPredictors> predictors,
                           std::span<const FrameWindow> frame_times, VectorRef measured_mm,
                           const CombinedWeights& weights, bool degenerate) {
    ClipDecomposition decomp;
    decomp.predictors = std::move(predictors);
    decomp.weights = weights;
    decomp.degenerate_fit = degenerate;
    decomp.measured = measured_mm;
    decomp.frame_mid_s = midpoints_s(frame_times);
    const Eigen::Index n = measured_mm.size();
    decomp.luminosity.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        decomp.luminosity[i] =
            plr::predict_combined(weights, decomp.predictors[static_cast<std::size_t>(i)]);
    decomp.arousal = decomp.measured - decomp.luminosity;
    return decomp;
}

}  // namespace

ClipDecomposition decompose_clip(std::span<const RgbPercent> frame_rgb,
                                 std::span<const FrameWindow> frame_times,
                                 const PlrModelSet& model, const LuminanceLUT& lut,
                                 VectorRef measured_mm) {
    if (measured_mm.size() < 6)
        throw DataError("insufficient-data", "clip shorter than 6 frames");
    if (frame_rgb.size() != static_cast<std::size_t>(measured_mm.size()) ||
        frame_times.size() != frame_rgb.size())
        throw DataError("invalid-input", "frame count mismatch");
    auto predictors = frame_predictors(frame_rgb, model, lut);
    bool degenerate = false;
    const CombinedWeights weights = plr::fit_combined(predictors, measured_mm, &degenerate);
    return assemble(std::move(predictors), frame_times, measured_mm, weights, degenerate);
}

ClipDecomposition decompose_clip_with_weights(std::span<const RgbPercent> frame_rgb,
                                              std::span<const FrameWindow> frame_times,
                                              const PlrModelSet& model, const LuminanceLUT& lut,
                                              VectorRef measured_mm,
                                              const CombinedWeights& weights) {
    if (frame_rgb.size() != static_cast<std::size_t>(measured_mm.size()) ||
        frame_times.size() != frame_rgb.size())
        throw DataError("invalid-input", "frame count mismatch");
    auto predictors = frame_predictors(frame_rgb, model, lut);
    return assemble(std::move(predictors), frame_times, measured_mm, weights, false);
}

std::vector<Eigen::Index> salient_frame_indices(const SalientInterval& salient,
                                                VectorRef frame_mid_s) {
    if (salient.intervals_s.empty())
        throw DataError("invalid-interval", "no salient intervals for clip " + salient.clip_id);
    std::vector<Eigen::Index> indices;
    for (Eigen::Index f = 0; f < frame_mid_s.size(); ++f) {
        const double mid = frame_mid_s[f];
        for (const auto& [start, end] : salient.intervals_s) {
            if (mid >= start && mid <= end) {
                indices.push_back(f);
                break;
            }
        }
    }
    return indices;
}

double salient_mean(VectorRef series, const SalientInterval& salient, VectorRef frame_mid_s) {
    if (series.size() != frame_mid_s.size())
        throw DataError("invalid-input", "series/frame length mismatch");
    const auto indices = salient_frame_indices(salient, frame_mid_s);
    if (indices.empty())
        throw DataError("invalid-interval",
                        "salient intervals cover no frames for clip " + salient.clip_id);
    double sum = 0;
    for (Eigen::Index f : indices) sum += series[f];
    return sum / static_cast<double>(indices.size());
}

std::map<std::string, SalientInterval> load_salient_intervals(const std::string& path) {
    const io::CsvTable table = io::read_csv(path, {"clip_id", "start_s", "end_s"});
    std::map<std::string, SalientInterval> intervals;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const std::string& clip = table.str(i, 0);
        const double start = table.num(i, 1), end = table.num(i, 2);
        if (!(end > start))
            throw DataError("invalid-interval",
                            path + ": empty interval at row " + std::to_string(i + 1));
        auto& entry = intervals[clip];
        entry.clip_id = clip;
        entry.intervals_s.emplace_back(start, end);
    }
    for (auto& [clip, entry] : intervals) {
        auto& list = entry.intervals_s;
        std::sort(list.begin(), list.end());
        for (std::size_t i = 0; i + 1 < list.size(); ++i)
            if (list[i + 1].first < list[i].second)
                throw DataError("invalid-interval", path + ": overlapping intervals for clip " + clip);
    }
    return intervals;
}

void save_salient_intervals(std::span<const SalientInterval> intervals, const std::string& path,
                            const io::FileHeader& meta) {
    io::CsvWriter w(path, meta, {"clip_id", "start_s", "end_s"});
    for (const auto& entry : intervals)
        for (const auto& [start, end] : entry.intervals_s)
            w.row({entry.clip_id, io::cell(start), io::cell(end)});
}

void save_decomposition(const ClipDecomposition& decomp, const std::string& path,
                        const io::FileHeader& meta) {
    io::CsvWriter w(path, meta, {"frame_index", "ps_measured", "ps_luminosity", "ps_arousal"});
    for (Eigen::Index f = 0; f < decomp.measured.size(); ++f)
        w.row({io::cell(static_cast<std::size_t>(f)), io::cell(decomp.measured[f]),
               io::cell(decomp.luminosity[f]), io::cell(decomp.arousal[f])});
}

ClipDecomposition load_decomposition(const std::string& path,
                                     std::span<const FrameWindow> frame_times) {
    const io::CsvTable table =
        io::read_csv(path, {"frame_index", "ps_measured", "ps_luminosity", "ps_arousal"});
    const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
    if (frame_times.size() != static_cast<std::size_t>(n))
        throw DataError("invalid-input", path + ": frame count differs from frame times");
    ClipDecomposition decomp;
    decomp.measured.resize(n);
    decomp.luminosity.resize(n);
    decomp.arousal.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = static_cast<std::size_t>(i);
        decomp.measured[i] = table.num(row, 1);
        decomp.luminosity[i] = table.num(row, 2);
        decomp.arousal[i] = table.num(row, 3);
    }
    decomp.frame_mid_s = midpoints_s(frame_times);
    return decomp;
}

}  // namespace pupilkit::decouple
