#pragma once

#include "pupilkit/common.hpp"
#include "pupilkit/csv.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace pupilkit::luminance {

/// RGB intensity triple in percent, each channel in [0, 100].
struct RgbPercent {
    double r = 0, g = 0, b = 0;

    double channel(int i) const { return i == 0 ? r : (i == 1 ? g : b); }
    bool in_range() const;
    /// Channel-wise comparison with 1e-9 tolerance.
    bool almost_equal(const RgbPercent& other) const;
};

/// Sampled map from RGB percent triples to screen luminosity. Values are
/// stored unscaled; queries multiply by the monitor scale factor k.
class LuminanceLUT {
public:
    LuminanceLUT() = default;
    /// grid: sorted distinct sample levels per channel; values in
    /// lexicographic (r, g, b) order, one per grid triple.
    LuminanceLUT(std::array<std::vector<double>, 3> grid, std::vector<double> values,
                 double kscale, std::string provenance);

    const std::vector<double>& levels(int channel) const { return grid_[static_cast<std::size_t>(channel)]; }
    double stored_value(int i, int j, int k) const;
    double kscale() const { return k_; }
    const std::string& provenance() const { return provenance_; }

    /// Luminosity at an arbitrary in-range triple (times k). Exact grid
    /// triples return the stored value; points on a primary-color axis use
    /// the two nearest axis samples; everything else uses inverse-distance
    /// weights over the 8 corners of the enclosing cell.
    double query(const RgbPercent& rgb) const;

private:
    void validate() const;

    std::array<std::vector<double>, 3> grid_;
    std::vector<double> values_;
    double k_ = 1.0;
    std::string provenance_ = "synthetic";
};

/// Display model substituting a measured table: per-channel gamma response
/// mixed with luma weights, value = max_lux * sum_i w_i (x_i/100)^gamma.
/// The grid is uniform with `levels_per_channel` samples including 0 and 100.
LuminanceLUT build_synthetic_lut(double gamma, double max_lux, int levels_per_channel,
                                 std::array<double, 3> luma_weights = {0.2126, 0.7152, 0.0722});

double query_luminosity(const LuminanceLUT& lut, const RgbPercent& rgb);

/// Per-channel arithmetic mean over a nonempty pixel collection.
RgbPercent frame_mean_rgb(std::span<const RgbPercent> pixels);

/// A decoded frame; row-major pixels.
struct Image {
    int width = 0, height = 0;
    std::vector<RgbPercent> pixels;

    const RgbPercent& at(int x, int y) const {
        return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                      static_cast<std::size_t>(x)];
    }
};

struct GazePoint {
    double x = -1, y = -1;
    bool valid = false;
};

/// Frame mean used for prediction: the gaze-region mean replaces the whole
/// frame mean when the region is brighter, otherwise the global mean; an
/// invalid gaze point falls back to the global mean.
RgbPercent effective_mean_rgb(const Image& frame, const GazePoint& gaze, const LuminanceLUT& lut,
                              int radius_px = 300);

/// Luminosity of effective_mean_rgb; equals max(region, global) luminosity.
double effective_luminance(const Image& frame, const GazePoint& gaze, const LuminanceLUT& lut,
                           int radius_px = 300);

/// Per-frame mean color with its looked-up luminosity.
struct FrameLuma {
    int frame_index = 0;
    RgbPercent mean_rgb;
    double luminosity = 0;
};

// --- file formats ---

/// Text format: header `pupilkit-lut v1 <levels> <k> <provenance>` followed
/// by `r g b lux` lines in lexicographic channel order.
void save_lut(const LuminanceLUT& lut, const std::string& path, const io::FileHeader& meta);
LuminanceLUT load_lut(const std::string& path);

/// PPM (P3 or P6) decode; sample values are scaled to percent of maxval.
Image load_ppm(const std::string& path);
void save_ppm(const Image& image, const std::string& path);

/// `frame_index,r,g,b` rows in percent.
std::vector<FrameLuma> load_frame_means(const std::string& path, const LuminanceLUT& lut);
void save_frame_means(const std::vector<FrameLuma>& frames, const std::string& path,
                      const io::FileHeader& meta);

}  // namespace pupilkit::luminance
