#include "pupilkit/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace pupilkit::preprocess {

namespace {

constexpr double kSentinel = -1.0;

bool is_sentinel(double v) { return v == kSentinel; }

}  // namespace

void RawPupilTrace::validate() const {
    const Eigen::Index n = size();
    if (left_mm.size() != n || right_mm.size() != n || gaze_x.size() != n || gaze_y.size() != n)
        throw DataError("invalid-input", "trace column lengths differ");
    if (n == 0) throw DataError("invalid-input", "empty trace");
    for (Eigen::Index i = 1; i < n; ++i)
        if (!(t_ms[i] > t_ms[i - 1]))
            throw DataError("invalid-input",
                            "timestamps must be strictly increasing (sample " + std::to_string(i) + ")");
    for (Eigen::Index i = 0; i < n; ++i) {
        for (double v : {left_mm[i], right_mm[i]}) {
            if (!std::isfinite(v) || (v <= 0 && !is_sentinel(v)))
                throw DataError("invalid-input",
                                "pupil values must be positive or the -1 sentinel (sample " +
                                    std::to_string(i) + ")");
        }
    }
}

std::vector<bool> mark_blinks(const RawPupilTrace& trace, double pad_ms) {
    trace.validate();
    if (!(pad_ms >= 0)) throw ConfigError("invalid-parameter", "pad_ms must be nonnegative");
    const Eigen::Index n = trace.size();
    std::vector<bool> mask(static_cast<std::size_t>(n), false);

    Eigen::Index i = 0;
    while (i < n) {
        if (!is_sentinel(trace.left_mm[i]) && !is_sentinel(trace.right_mm[i])) {
            ++i;
            continue;
        }
        Eigen::Index j = i;
        while (j + 1 < n && (is_sentinel(trace.left_mm[j + 1]) || is_sentinel(trace.right_mm[j + 1])))
            ++j;
        // Pad by time window, with a floor of one sample per side.
        Eigen::Index lo = i, hi = j;
        while (lo > 0 && trace.t_ms[lo - 1] >= trace.t_ms[i] - pad_ms) --lo;
        while (hi + 1 < n && trace.t_ms[hi + 1] <= trace.t_ms[j] + pad_ms) ++hi;
        if (lo == i && i > 0) --lo;
        if (hi == j && j + 1 < n) ++hi;
        for (Eigen::Index s = lo; s <= hi; ++s) mask[static_cast<std::size_t>(s)] = true;
        i = j + 1;
    }
    return mask;
}

namespace {

VectorXd impute_eye(const VectorXd& t, const VectorXd& eye, const std::vector<bool>& mask) {
    const Eigen::Index n = eye.size();
    std::vector<Eigen::Index> valid;
    for (Eigen::Index i = 0; i < n; ++i)
        if (!mask[static_cast<std::size_t>(i)]) valid.push_back(i);
    if (valid.size() < 2)
        throw DataError("unrecoverable-trace", "fewer than 2 unmasked samples");

    VectorXd out = eye;
    // Leading and trailing runs copy the nearest valid value.
    for (Eigen::Index i = 0; i < valid.front(); ++i) out[i] = eye[valid.front()];
    for (Eigen::Index i = valid.back() + 1; i < n; ++i) out[i] = eye[valid.back()];
    // Interior runs interpolate between bracketing valid samples in time.
    for (std::size_t v = 0; v + 1 < valid.size(); ++v) {
        const Eigen::Index a = valid[v], b = valid[v + 1];
        if (b == a + 1) continue;
        const double dt = t[b] - t[a];
        for (Eigen::Index i = a + 1; i < b; ++i) {
            const double w = (t[i] - t[a]) / dt;
            out[i] = eye[a] + w * (eye[b] - eye[a]);
        }
    }
    return out;
}

}  // namespace

CleanTrace impute_linear(const RawPupilTrace& trace, const std::vector<bool>& mask) {
    trace.validate();
    if (mask.size() != static_cast<std::size_t>(trace.size()))
        throw DataError("invalid-input", "mask length mismatch");
    for (Eigen::Index i = 0; i < trace.size(); ++i)
        if (!mask[static_cast<std::size_t>(i)] &&
            (is_sentinel(trace.left_mm[i]) || is_sentinel(trace.right_mm[i])))
            throw DataError("invalid-input", "mask does not cover all sentinel samples");
    const VectorXd left = impute_eye(trace.t_ms, trace.left_mm, mask);
    const VectorXd right = impute_eye(trace.t_ms, trace.right_mm, mask);

    CleanTrace clean;
    clean.t_ms = trace.t_ms;
    clean.pupil_mm = 0.5 * (left + right);
    clean.gaze_x = trace.gaze_x;
    clean.gaze_y = trace.gaze_y;
    for (Eigen::Index i = 0; i < trace.size(); ++i) {
        if (mask[static_cast<std::size_t>(i)]) {
            clean.gaze_x[i] = -1;
            clean.gaze_y[i] = -1;
        }
        if (!(clean.pupil_mm[i] > 0))
            throw DataError("unrecoverable-trace", "nonpositive pupil after imputation");
    }
    return clean;
}

FrameSeries align_to_frames(const CleanTrace& trace, std::span<const FrameWindow> frames) {
    if (frames.empty()) throw DataError("invalid-input", "no frames");
    for (std::size_t f = 0; f + 1 < frames.size(); ++f)
        if (frames[f + 1].start_ms < frames[f].end_ms)
            throw DataError("invalid-input", "frames must be ordered and non-overlapping");

    const Eigen::Index n = trace.t_ms.size();
    FrameSeries out;
    const Eigen::Index nf = static_cast<Eigen::Index>(frames.size());
    out.pupil_mm.resize(nf);
    out.gaze_x.resize(nf);
    out.gaze_y.resize(nf);
    out.mid_ms.resize(nf);
    out.gaze_valid.assign(static_cast<std::size_t>(nf), false);

    Eigen::Index cursor = 0;
    for (Eigen::Index f = 0; f < nf; ++f) {
        const auto& win = frames[static_cast<std::size_t>(f)];
        out.mid_ms[f] = 0.5 * (win.start_ms + win.end_ms);
        while (cursor < n && trace.t_ms[cursor] < win.start_ms) ++cursor;
        double pupil_sum = 0, gx_sum = 0, gy_sum = 0;
        Eigen::Index pupil_count = 0, gaze_count = 0;
        Eigen::Index s = cursor;
        for (; s < n && trace.t_ms[s] < win.end_ms; ++s) {
            pupil_sum += trace.pupil_mm[s];
            ++pupil_count;
            if (trace.gaze_x[s] >= 0 && trace.gaze_y[s] >= 0) {
                gx_sum += trace.gaze_x[s];
                gy_sum += trace.gaze_y[s];
                ++gaze_count;
            }
        }
        cursor = s;
        if (pupil_count == 0) {
            if (f == 0) throw DataError("alignment-error", "first frame contains no samples");
            out.pupil_mm[f] = out.pupil_mm[f - 1];
        } else {
            out.pupil_mm[f] = pupil_sum / static_cast<double>(pupil_count);
        }
        if (gaze_count > 0) {
            out.gaze_x[f] = gx_sum / static_cast<double>(gaze_count);
            out.gaze_y[f] = gy_sum / static_cast<double>(gaze_count);
            out.gaze_valid[static_cast<std::size_t>(f)] = true;
        } else {
            out.gaze_x[f] = -1;
            out.gaze_y[f] = -1;
        }
    }
    return out;
}

VectorXd frame_means_median_fill(const RawPupilTrace& trace, std::span<const FrameWindow> frames) {
    trace.validate();
    const Eigen::Index n = trace.size();
    VectorXd out(static_cast<Eigen::Index>(frames.size()));
    Eigen::Index cursor = 0;
    for (std::size_t f = 0; f < frames.size(); ++f) {
        while (cursor < n && trace.t_ms[cursor] < frames[f].start_ms) ++cursor;
        std::vector<double> binocular;
        std::vector<double> valid_left, valid_right;
        Eigen::Index s = cursor;
        std::vector<std::pair<double, double>> samples;
        for (; s < n && trace.t_ms[s] < frames[f].end_ms; ++s) {
            samples.emplace_back(trace.left_mm[s], trace.right_mm[s]);
            if (!is_sentinel(trace.left_mm[s])) valid_left.push_back(trace.left_mm[s]);
            if (!is_sentinel(trace.right_mm[s])) valid_right.push_back(trace.right_mm[s]);
        }
        cursor = s;
        auto median = [](std::vector<double>& v) {
            if (v.empty()) throw DataError("alignment-error", "frame with no valid samples");
            std::sort(v.begin(), v.end());
            const std::size_t m = v.size() / 2;
            return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
        };
        if (samples.empty()) {
            if (f == 0) throw DataError("alignment-error", "first frame contains no samples");
            out[static_cast<Eigen::Index>(f)] = out[static_cast<Eigen::Index>(f) - 1];
            continue;
        }
        const double med_left = median(valid_left);
        const double med_right = median(valid_right);
        double sum = 0;
        for (const auto& [l, r] : samples)
            sum += 0.5 * ((is_sentinel(l) ? med_left : l) + (is_sentinel(r) ? med_right : r));
        out[static_cast<Eigen::Index>(f)] = sum / static_cast<double>(samples.size());
    }
    return out;
}

RawPupilTrace load_raw_trace(const std::string& path) {
    const io::CsvTable table =
        io::read_csv(path, {"timestamp_ms", "left_mm", "right_mm", "gaze_x", "gaze_y"});
    const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
    RawPupilTrace trace;
    trace.t_ms.resize(n);
    trace.left_mm.resize(n);
    trace.right_mm.resize(n);
    trace.gaze_x.resize(n);
    trace.gaze_y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = static_cast<std::size_t>(i);
        trace.t_ms[i] = table.num(row, 0);
        trace.left_mm[i] = table.num(row, 1);
        trace.right_mm[i] = table.num(row, 2);
        trace.gaze_x[i] = table.num(row, 3);
        trace.gaze_y[i] = table.num(row, 4);
    }
    trace.validate();
    return trace;
}

void save_raw_trace(const RawPupilTrace& trace, const std::string& path,
                    const io::FileHeader& meta) {
    io::CsvWriter w(path, meta, {"timestamp_ms", "left_mm", "right_mm", "gaze_x", "gaze_y"});
    for (Eigen::Index i = 0; i < trace.size(); ++i)
        w.row({io::cell(trace.t_ms[i]), io::cell(trace.left_mm[i]), io::cell(trace.right_mm[i]),
               io::cell(trace.gaze_x[i]), io::cell(trace.gaze_y[i])});
}

std::vector<FrameWindow> load_frame_times(const std::string& path) {
    const io::CsvTable table = io::read_csv(path, {"frame_index", "start_ms", "end_ms"});
    std::vector<FrameWindow> frames;
    frames.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        if (static_cast<int>(table.num(i, 0)) != static_cast<int>(i))
            throw DataError("invalid-input",
                            path + ": frame_index must run 0..n-1 in order (row " +
                                std::to_string(i + 1) + ")");
        FrameWindow f{table.num(i, 1), table.num(i, 2)};
        if (!(f.end_ms > f.start_ms))
            throw DataError("invalid-input", path + ": empty frame window at row " + std::to_string(i + 1));
        frames.push_back(f);
    }
    for (std::size_t i = 0; i + 1 < frames.size(); ++i)
        if (frames[i + 1].start_ms < frames[i].end_ms)
            throw DataError("invalid-input", path + ": overlapping frame windows");
    return frames;
}

void save_frame_times(std::span<const FrameWindow> frames, const std::string& path,
                      const io::FileHeader& meta) {
    io::CsvWriter w(path, meta, {"frame_index", "start_ms", "end_ms"});
    for (std::size_t i = 0; i < frames.size(); ++i)
        w.row({io::cell(i), io::cell(frames[i].start_ms), io::cell(frames[i].end_ms)});
}

}  // namespace pupilkit::preprocess
