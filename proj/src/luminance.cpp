#include "pupilkit/luminance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pupilkit::luminance {

namespace {

constexpr double kChannelTol = 1e-9;   // grid-coincidence tolerance
constexpr double kExactHit = 1e-12;    // inverse-distance short-circuit

int find_level(const std::vector<double>& levels, double v) {
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (std::fabs(levels[i] - v) <= kChannelTol) return static_cast<int>(i);
    return -1;
}

/// Cell index i with levels[i] <= v <= levels[i+1].
int find_cell(const std::vector<double>& levels, double v) {
    const auto it = std::upper_bound(levels.begin(), levels.end(), v);
    int i = static_cast<int>(it - levels.begin()) - 1;
    i = std::clamp(i, 0, static_cast<int>(levels.size()) - 2);
    return i;
}

}  // namespace

bool RgbPercent::in_range() const {
    for (int c = 0; c < 3; ++c) {
        const double v = channel(c);
        if (!std::isfinite(v) || v < -kChannelTol || v > 100.0 + kChannelTol) return false;
    }
    return true;
}

bool RgbPercent::almost_equal(const RgbPercent& other) const {
    return std::fabs(r - other.r) <= kChannelTol && std::fabs(g - other.g) <= kChannelTol &&
           std::fabs(b - other.b) <= kChannelTol;
}

LuminanceLUT::LuminanceLUT(std::array<std::vector<double>, 3> grid, std::vector<double> values,
                           double kscale, std::string provenance)
    : grid_(std::move(grid)), values_(std::move(values)), k_(kscale),
      provenance_(std::move(provenance)) {
    validate();
}

void LuminanceLUT::validate() const {
    for (int c = 0; c < 3; ++c) {
        const auto& levels = grid_[static_cast<std::size_t>(c)];
        if (levels.size() < 2)
            throw DataError("invalid-lut", "channel grid needs at least 2 levels");
        if (!std::is_sorted(levels.begin(), levels.end()))
            throw DataError("invalid-lut", "grid levels must be sorted");
        if (std::adjacent_find(levels.begin(), levels.end()) != levels.end())
            throw DataError("invalid-lut", "grid levels must be distinct");
        if (std::fabs(levels.front()) > kChannelTol || std::fabs(levels.back() - 100.0) > kChannelTol)
            throw DataError("invalid-lut", "grid must cover 0 and 100 on every channel");
    }
    const std::size_t nr = grid_[0].size(), ng = grid_[1].size(), nb = grid_[2].size();
    if (values_.size() != nr * ng * nb)
        throw DataError("invalid-lut", "value count does not match grid size");
    if (std::fabs(values_[0]) > 1e-12)
        throw DataError("invalid-lut", "value at (0,0,0) must be 0");
    for (double v : values_)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw DataError("invalid-lut", "values must be finite and nonnegative");
    // Nondecreasing along each channel axis.
    for (std::size_t i = 0; i < nr; ++i)
        for (std::size_t j = 0; j < ng; ++j)
            for (std::size_t k = 0; k < nb; ++k) {
                const double v = values_[(i * ng + j) * nb + k];
                if (i + 1 < nr && values_[((i + 1) * ng + j) * nb + k] < v - 1e-12)
                    throw DataError("invalid-lut", "values decrease along the red axis");
                if (j + 1 < ng && values_[(i * ng + j + 1) * nb + k] < v - 1e-12)
                    throw DataError("invalid-lut", "values decrease along the green axis");
                if (k + 1 < nb && values_[(i * ng + j) * nb + k + 1] < v - 1e-12)
                    throw DataError("invalid-lut", "values decrease along the blue axis");
            }
    if (!(k_ > 0.0) || !std::isfinite(k_))
        throw DataError("invalid-lut", "scale factor k must be positive");
}

double LuminanceLUT::stored_value(int i, int j, int k) const {
    const std::size_t ng = grid_[1].size(), nb = grid_[2].size();
    return values_[(static_cast<std::size_t>(i) * ng + static_cast<std::size_t>(j)) * nb +
                   static_cast<std::size_t>(k)];
}

double LuminanceLUT::query(const RgbPercent& rgb) const {
    if (!rgb.in_range())
        throw DataError("domain-error", "rgb out of [0,100] range");

    const int ir = find_level(grid_[0], rgb.r);
    const int jg = find_level(grid_[1], rgb.g);
    const int kb = find_level(grid_[2], rgb.b);
    if (ir >= 0 && jg >= 0 && kb >= 0) return k_ * stored_value(ir, jg, kb);

    // Primary-color axis: two channels exactly zero, interpolate along the
    // remaining channel between its two bracketing samples.
    const bool r_zero = std::fabs(rgb.r) <= kChannelTol;
    const bool g_zero = std::fabs(rgb.g) <= kChannelTol;
    const bool b_zero = std::fabs(rgb.b) <= kChannelTol;
    const int zero_count = int(r_zero) + int(g_zero) + int(b_zero);
    if (zero_count == 2) {
        const int axis = r_zero ? (g_zero ? 2 : 1) : 0;
        const auto& levels = grid_[static_cast<std::size_t>(axis)];
        const double q = rgb.channel(axis);
        const int lo = find_cell(levels, q);
        const double d_lo = q - levels[static_cast<std::size_t>(lo)];
        const double d_hi = levels[static_cast<std::size_t>(lo) + 1] - q;
        auto axis_value = [&](int idx) {
            int ijk[3] = {0, 0, 0};
            ijk[axis] = idx;
            return stored_value(ijk[0], ijk[1], ijk[2]);
        };
        if (d_lo < kExactHit) return k_ * axis_value(lo);
        if (d_hi < kExactHit) return k_ * axis_value(lo + 1);
        const double w_lo = 1.0 / d_lo, w_hi = 1.0 / d_hi;
        return k_ * (w_lo * axis_value(lo) + w_hi * axis_value(lo + 1)) / (w_lo + w_hi);
    }

    // General case: the 8 corners of the enclosing cell, weighted per axis
    // by inverse distance to the two bracketing samples. (Weighting by
    // inverse Euclidean distance instead is discontinuous at cell faces and
    // not monotone; the per-axis form keeps both properties and reduces to
    // the same two-point rule used on the primary axes.)
    double corner_weight[3][2];
    int cell[3];
    const double channels[3] = {rgb.r, rgb.g, rgb.b};
    for (int axis = 0; axis < 3; ++axis) {
        const auto& levels = grid_[static_cast<std::size_t>(axis)];
        const int lo = find_cell(levels, channels[axis]);
        cell[axis] = lo;
        const double d_lo = channels[axis] - levels[static_cast<std::size_t>(lo)];
        const double d_hi = levels[static_cast<std::size_t>(lo) + 1] - channels[axis];
        if (d_lo < kExactHit) {
            corner_weight[axis][0] = 1.0;
            corner_weight[axis][1] = 0.0;
        } else if (d_hi < kExactHit) {
            corner_weight[axis][0] = 0.0;
            corner_weight[axis][1] = 1.0;
        } else {
            const double w_lo = 1.0 / d_lo, w_hi = 1.0 / d_hi;
            corner_weight[axis][0] = w_lo / (w_lo + w_hi);
            corner_weight[axis][1] = w_hi / (w_lo + w_hi);
        }
    }
    double value = 0.0;
    for (int di = 0; di <= 1; ++di)
        for (int dj = 0; dj <= 1; ++dj)
            for (int dk = 0; dk <= 1; ++dk)
                value += corner_weight[0][di] * corner_weight[1][dj] * corner_weight[2][dk] *
                         stored_value(cell[0] + di, cell[1] + dj, cell[2] + dk);
    return k_ * value;
}

LuminanceLUT build_synthetic_lut(double gamma, double max_lux, int levels_per_channel,
                                 std::array<double, 3> luma_weights) {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw ConfigError("invalid-parameter", "gamma must be positive");
    if (!(max_lux > 0.0) || !std::isfinite(max_lux))
        throw ConfigError("invalid-parameter", "max_lux must be positive");
    if (levels_per_channel < 2)
        throw ConfigError("invalid-parameter", "levels_per_channel must be at least 2");
    double wsum = 0.0;
    for (double w : luma_weights) {
        if (!(w >= 0.0)) throw ConfigError("invalid-parameter", "luma weights must be nonnegative");
        wsum += w;
    }
    if (std::fabs(wsum - 1.0) > 1e-9)
        throw ConfigError("invalid-parameter", "luma weights must sum to 1");

    std::vector<double> levels(static_cast<std::size_t>(levels_per_channel));
    for (int i = 0; i < levels_per_channel; ++i)
        levels[static_cast<std::size_t>(i)] = 100.0 * i / (levels_per_channel - 1);

    const std::size_t n = levels.size();
    std::vector<double> values(n * n * n);
    auto response = [&](double x) { return std::pow(x / 100.0, gamma); };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k)
                values[(i * n + j) * n + k] =
                    max_lux * (luma_weights[0] * response(levels[i]) +
                               luma_weights[1] * response(levels[j]) +
                               luma_weights[2] * response(levels[k]));
    values[0] = 0.0;
    return LuminanceLUT({levels, levels, levels}, std::move(values), 1.0, "synthetic");
}

double query_luminosity(const LuminanceLUT& lut, const RgbPercent& rgb) { return lut.query(rgb); }

RgbPercent frame_mean_rgb(std::span<const RgbPercent> pixels) {
    if (pixels.empty()) throw DataError("invalid-input", "empty frame");
    double r = 0, g = 0, b = 0;
    for (const auto& p : pixels) {
        r += p.r;
        g += p.g;
        b += p.b;
    }
    const double n = static_cast<double>(pixels.size());
    return {r / n, g / n, b / n};
}

RgbPercent effective_mean_rgb(const Image& frame, const GazePoint& gaze, const LuminanceLUT& lut,
                              int radius_px) {
    if (frame.width <= 0 || frame.height <= 0 || frame.pixels.empty())
        throw DataError("invalid-input", "empty frame");
    const RgbPercent global = frame_mean_rgb(frame.pixels);
    const bool gaze_usable = gaze.valid && gaze.x >= 0 && gaze.y >= 0 && gaze.x < frame.width &&
                             gaze.y < frame.height;
    if (!gaze_usable) return global;

    const double r2 = static_cast<double>(radius_px) * radius_px;
    const int x_lo = std::max(0, static_cast<int>(std::floor(gaze.x - radius_px)));
    const int x_hi = std::min(frame.width - 1, static_cast<int>(std::ceil(gaze.x + radius_px)));
    const int y_lo = std::max(0, static_cast<int>(std::floor(gaze.y - radius_px)));
    const int y_hi = std::min(frame.height - 1, static_cast<int>(std::ceil(gaze.y + radius_px)));
    double r = 0, g = 0, b = 0;
    std::size_t count = 0;
    for (int y = y_lo; y <= y_hi; ++y)
        for (int x = x_lo; x <= x_hi; ++x) {
            const double dx = x - gaze.x, dy = y - gaze.y;
            if (dx * dx + dy * dy > r2) continue;
            const RgbPercent& px = frame.at(x, y);
            r += px.r;
            g += px.g;
            b += px.b;
            ++count;
        }
    if (count == 0) return global;
    const RgbPercent region{r / count, g / count, b / count};
    return lut.query(region) > lut.query(global) ? region : global;
}

double effective_luminance(const Image& frame, const GazePoint& gaze, const LuminanceLUT& lut,
                           int radius_px) {
    return lut.query(effective_mean_rgb(frame, gaze, lut, radius_px));
}

void save_lut(const LuminanceLUT& lut, const std::string& path, const io::FileHeader& meta) {
    const std::size_t nr = lut.levels(0).size(), ng = lut.levels(1).size(), nb = lut.levels(2).size();
    if (nr != ng || ng != nb)
        throw DataError("invalid-lut", "v1 format requires equal level counts per channel");
    std::ofstream out(path);
    if (!out) throw DataError("output-error", "cannot write " + path);
    out << io::header_line(meta) << '\n';
    out << "pupilkit-lut v1 " << nr << ' ' << format_double(lut.kscale()) << ' '
        << lut.provenance() << '\n';
    for (std::size_t i = 0; i < nr; ++i)
        for (std::size_t j = 0; j < ng; ++j)
            for (std::size_t k = 0; k < nb; ++k)
                out << format_double(lut.levels(0)[i]) << ' ' << format_double(lut.levels(1)[j])
                    << ' ' << format_double(lut.levels(2)[k]) << ' '
                    << format_double(lut.stored_value(static_cast<int>(i), static_cast<int>(j),
                                                      static_cast<int>(k)))
                    << '\n';
    if (!out) throw DataError("output-error", "write failed on " + path);
}

LuminanceLUT load_lut(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing-input", "cannot open " + path);
    std::string line;
    std::string magic, version, provenance;
    std::size_t levels = 0;
    double kscale = 1.0;
    bool have_header = false;
    std::array<std::vector<double>, 3> grid;
    std::vector<double> values;
    std::vector<std::array<double, 4>> entries;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        if (!have_header) {
            ss >> magic >> version >> levels >> kscale >> provenance;
            if (!ss || magic != "pupilkit-lut" || version != "v1" || levels < 2)
                throw DataError("csv-format", path + ": bad lut header");
            have_header = true;
            continue;
        }
        std::array<double, 4> e{};
        ss >> e[0] >> e[1] >> e[2] >> e[3];
        if (!ss) throw DataError("csv-format", path + ": bad lut entry '" + line + "'");
        entries.push_back(e);
    }
    if (!have_header) throw DataError("csv-format", path + ": missing lut header");
    if (entries.size() != levels * levels * levels)
        throw DataError("csv-format", path + ": expected " + std::to_string(levels * levels * levels) +
                                          " entries, found " + std::to_string(entries.size()));
    // Lexicographic order lets the grids be read off the entry coordinates.
    for (std::size_t i = 0; i < levels; ++i) grid[0].push_back(entries[i * levels * levels][0]);
    for (std::size_t j = 0; j < levels; ++j) grid[1].push_back(entries[j * levels][1]);
    for (std::size_t k = 0; k < levels; ++k) grid[2].push_back(entries[k][2]);
    values.reserve(entries.size());
    for (const auto& e : entries) values.push_back(e[3]);
    return LuminanceLUT(std::move(grid), std::move(values), kscale, provenance);
}

namespace {

int ppm_next_int(std::istream& in, const std::string& path) {
    // Skips whitespace and '#' comments per the netpbm grammar.
    for (;;) {
        const int c = in.peek();
        if (c == '#') {
            std::string junk;
            std::getline(in, junk);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int v = 0;
    if (!(in >> v)) throw DataError("csv-format", path + ": truncated ppm header");
    return v;
}

}  // namespace

Image load_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("missing-input", "cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P3" && magic != "P6")
        throw DataError("csv-format", path + ": not a P3/P6 ppm");
    Image img;
    img.width = ppm_next_int(in, path);
    img.height = ppm_next_int(in, path);
    const int maxval = ppm_next_int(in, path);
    if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 65535)
        throw DataError("csv-format", path + ": bad ppm dimensions");
    const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
    img.pixels.resize(n);
    const double scale = 100.0 / maxval;
    if (magic == "P3") {
        for (std::size_t i = 0; i < n; ++i) {
            int r, g, b;
            if (!(in >> r >> g >> b)) throw DataError("csv-format", path + ": truncated ppm data");
            img.pixels[i] = {r * scale, g * scale, b * scale};
        }
    } else {
        in.get();  // single whitespace after maxval
        const int bytes = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> buf(n * 3 * static_cast<std::size_t>(bytes));
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (static_cast<std::size_t>(in.gcount()) != buf.size())
            throw DataError("csv-format", path + ": truncated ppm data");
        for (std::size_t i = 0; i < n; ++i) {
            auto sample = [&](std::size_t s) -> double {
                const std::size_t off = (i * 3 + s) * static_cast<std::size_t>(bytes);
                int v = buf[off];
                if (bytes == 2) v = (v << 8) | buf[off + 1];
                return v * scale;
            };
            img.pixels[i] = {sample(0), sample(1), sample(2)};
        }
    }
    return img;
}

void save_ppm(const Image& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("output-error", "cannot write " + path);
    out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    for (const auto& px : image.pixels) {
        auto byte = [](double v) {
            return static_cast<unsigned char>(std::clamp(std::lround(v * 255.0 / 100.0), 0l, 255l));
        };
        const unsigned char rgb[3] = {byte(px.r), byte(px.g), byte(px.b)};
        out.write(reinterpret_cast<const char*>(rgb), 3);
    }
    if (!out) throw DataError("output-error", "write failed on " + path);
}

std::vector<FrameLuma> load_frame_means(const std::string& path, const LuminanceLUT& lut) {
    const io::CsvTable table = io::read_csv(path, {"frame_index", "r", "g", "b"});
    std::vector<FrameLuma> frames;
    frames.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        FrameLuma f;
        f.frame_index = static_cast<int>(table.num(i, 0));
        if (f.frame_index != static_cast<int>(i))
            throw DataError("invalid-input",
                            path + ": frame_index must run 0..n-1 in order (row " +
                                std::to_string(i + 1) + ")");
        f.mean_rgb = {table.num(i, 1), table.num(i, 2), table.num(i, 3)};
        if (!f.mean_rgb.in_range())
            throw DataError("domain-error", path + ": rgb out of range at row " + std::to_string(i + 1));
        f.luminosity = lut.query(f.mean_rgb);
        frames.push_back(f);
    }
    return frames;
}

void save_frame_means(const std::vector<FrameLuma>& frames, const std::string& path,
                      const io::FileHeader& meta) {
    io::CsvWriter w(path, meta, {"frame_index", "r", "g", "b"});
    for (const auto& f : frames)
        w.row({io::cell(f.frame_index), io::cell(f.mean_rgb.r), io::cell(f.mean_rgb.g),
               io::cell(f.mean_rgb.b)});
}

}  // namespace pupilkit::luminance
