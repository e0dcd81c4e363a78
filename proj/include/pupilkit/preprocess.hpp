#pragma once

#include "pupilkit/common.hpp"
#include "pupilkit/csv.hpp"

#include <span>
#include <string>
#include <vector>

namespace pupilkit::preprocess {

/// Eye-tracker export: binocular pupil sizes with -1 blink sentinels and
/// pixel gaze coordinates (negative = invalid).
struct RawPupilTrace {
    VectorXd t_ms;
    VectorXd left_mm, right_mm;
    VectorXd gaze_x, gaze_y;

    Eigen::Index size() const { return t_ms.size(); }
    void validate() const;
};

/// Fully imputed binocular-mean trace; gaze of blink-masked samples is
/// invalidated.
struct CleanTrace {
    VectorXd t_ms;
    VectorXd pupil_mm;
    VectorXd gaze_x, gaze_y;
};

/// Blink mask: true where either eye holds the sentinel, padded by pad_ms
/// on each side of every run and by at least one sample where a neighbor
/// exists.
std::vector<bool> mark_blinks(const RawPupilTrace& trace, double pad_ms = 2.0);

/// Linear interpolation across masked runs per eye (nearest value at the
/// edges), then binocular averaging.
CleanTrace impute_linear(const RawPupilTrace& trace, const std::vector<bool>& mask);

struct FrameWindow {
    double start_ms = 0, end_ms = 0;
};

/// Per-frame aggregation of a clean trace.
struct FrameSeries {
    VectorXd pupil_mm;
    VectorXd gaze_x, gaze_y;      // mean of valid gaze, -1 when none
    std::vector<bool> gaze_valid;
    VectorXd mid_ms;

    Eigen::Index size() const { return pupil_mm.size(); }
};

/// Mean pupil over [start, end) per frame; empty frames inherit the previous
/// frame. The first frame must contain at least one sample.
FrameSeries align_to_frames(const CleanTrace& trace, std::span<const FrameWindow> frames);

/// Calibration-path variant working straight off the raw trace: sentinel
/// samples are replaced by the per-frame median of each eye before the
/// frame mean is taken.
VectorXd frame_means_median_fill(const RawPupilTrace& trace, std::span<const FrameWindow> frames);

// --- file formats ---

/// `timestamp_ms,left_mm,right_mm,gaze_x,gaze_y` with -1 sentinels.
RawPupilTrace load_raw_trace(const std::string& path);
void save_raw_trace(const RawPupilTrace& trace, const std::string& path,
                    const io::FileHeader& meta);

/// `frame_index,start_ms,end_ms`, ordered and non-overlapping.
std::vector<FrameWindow> load_frame_times(const std::string& path);
void save_frame_times(std::span<const FrameWindow> frames, const std::string& path,
                      const io::FileHeader& meta);

}  // namespace pupilkit::preprocess
