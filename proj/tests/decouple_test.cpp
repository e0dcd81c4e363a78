#include "pupilkit/decouple.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace pupilkit;
using namespace pupilkit::decouple;
using Eigen::VectorXd;

namespace {

struct Fixture {
    luminance::LuminanceLUT lut = luminance::build_synthetic_lut(2.2, 30.0, 11);
    plr::PlrModelSet model = plr::group_reference_model();
    std::vector<RgbPercent> frame_rgb;
    std::vector<preprocess::FrameWindow> times;

    explicit Fixture(int n_frames, bool constant = false) {
        for (int f = 0; f < n_frames; ++f) {
            const double t = (f + 0.5) * 0.04;
            const double level = constant ? 50.0 : 45.0 + 25.0 * std::sin(2.0 * M_PI * 0.25 * t);
            frame_rgb.push_back({level, std::min(99.0, level + 5.0), std::max(1.0, level - 5.0)});
            times.push_back({f * 40.0, (f + 1) * 40.0});
        }
    }

    VectorXd combined_series(const plr::CombinedWeights& weights) const {
        VectorXd out(static_cast<Eigen::Index>(frame_rgb.size()));
        for (std::size_t f = 0; f < frame_rgb.size(); ++f)
            out[static_cast<Eigen::Index>(f)] = plr::predict_combined(
                weights, plr::combined_predictors(model, frame_rgb[f], lut));
        return out;
    }
};

plr::CombinedWeights example_weights() {
    plr::CombinedWeights w;
    w.a_gray = 0.5;
    w.a_red = 0.2;
    w.a_green = 0.2;
    w.a_blue = 0.1;
    w.k = 1.05;
    w.c = 0.1;
    return w;
}

}  // namespace

TEST_CASE("decomposition of an exactly-representable clip leaves no residual") {
    const Fixture fixture(120);
    const VectorXd measured = fixture.combined_series(example_weights());
    const auto decomp = decompose_clip(fixture.frame_rgb, fixture.times, fixture.model,
                                       fixture.lut, measured);
    CHECK_FALSE(decomp.degenerate_fit);
    CHECK(decomp.arousal.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("additivity holds elementwise by construction") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> noise(0.0, 0.2);
    const Fixture fixture(80);
    VectorXd measured = fixture.combined_series(example_weights());
    for (Eigen::Index i = 0; i < measured.size(); ++i) measured[i] += noise(rng);
    const auto decomp = decompose_clip(fixture.frame_rgb, fixture.times, fixture.model,
                                       fixture.lut, measured);
    CHECK((decomp.measured - decomp.luminosity - decomp.arousal).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("an injected bump survives the per-clip fit") {
    const Fixture fixture(120);
    VectorXd measured = fixture.combined_series(example_weights());
    for (int f = 10; f <= 20; ++f) measured[f] += 0.4;
    const auto decomp = decompose_clip(fixture.frame_rgb, fixture.times, fixture.model,
                                       fixture.lut, measured);
    // Window mean inside the bump recovered within 15% after the fit absorbs
    // a small constant into the intercept.
    double inside = 0, outside = 0;
    for (int f = 0; f < 120; ++f)
        (f >= 10 && f <= 20 ? inside : outside) += decomp.arousal[f];
    inside /= 11.0;
    outside /= 109.0;
    CHECK(std::fabs((inside - outside) - 0.4) < 0.06);
}

TEST_CASE("constant-luminance clips push all variance into the residual") {
    const Fixture fixture(60, true);
    VectorXd measured(60);
    for (int f = 0; f < 60; ++f) measured[f] = 4.0 + 0.3 * std::sin(0.2 * f);
    const auto decomp = decompose_clip(fixture.frame_rgb, fixture.times, fixture.model,
                                       fixture.lut, measured);
    CHECK(decomp.degenerate_fit);  // constant predictors cannot span the series
    const double lum_var =
        (decomp.luminosity.array() - decomp.luminosity.mean()).square().sum();
    CHECK(lum_var < 1e-12);
    const double residual_var = (decomp.arousal.array() - decomp.arousal.mean()).square().sum();
    const double measured_var = (measured.array() - measured.mean()).square().sum();
    CHECK(residual_var == doctest::Approx(measured_var).epsilon(1e-9));
}

TEST_CASE("short clips are rejected") {
    const Fixture fixture(5);
    VectorXd measured = VectorXd::Constant(5, 4.0);
    CHECK_THROWS_AS(
        decompose_clip(fixture.frame_rgb, fixture.times, fixture.model, fixture.lut, measured),
        DataError);
}

TEST_CASE("noise-only clips keep the residual near the noise floor") {
    std::mt19937_64 rng(22);
    const double sigma = 0.01;
    std::normal_distribution<double> noise(0.0, sigma);
    const Fixture fixture(200);
    VectorXd measured = fixture.combined_series(example_weights());
    for (Eigen::Index i = 0; i < measured.size(); ++i) measured[i] += noise(rng);
    const auto decomp = decompose_clip(fixture.frame_rgb, fixture.times, fixture.model,
                                       fixture.lut, measured);
    CHECK(decomp.arousal.cwiseAbs().mean() < 3.0 * sigma);
}

TEST_CASE("salient means") {
    VectorXd mid(10);
    for (int f = 0; f < 10; ++f) mid[f] = (f + 0.5) * 0.04;  // 25 fps, seconds
    VectorXd series(10);
    series << 1, 1, 1, 1, 1, 3, 3, 3, 3, 3;

    // Whole-clip interval equals the global mean.
    SalientInterval whole{"clip", {{0.0, 0.4}}};
    CHECK(salient_mean(series, whole, mid) == doctest::Approx(series.mean()));

    // Two equally sized intervals with means 1 and 3 average to 2.
    SalientInterval two{"clip", {{0.0, 0.2}, {0.2, 0.4}}};
    CHECK(salient_mean(series, two, mid) == doctest::Approx(2.0));

    // Irregular interval against explicit frame membership.
    SalientInterval window{"clip", {{0.1, 0.25}}};
    double sum = 0;
    int count = 0;
    for (int f = 0; f < 10; ++f)
        if (mid[f] >= 0.1 && mid[f] <= 0.25) {
            sum += series[f];
            ++count;
        }
    CHECK(salient_mean(series, window, mid) == doctest::Approx(sum / count));

    // No coverage raises invalid-interval.
    SalientInterval off{"clip", {{5.0, 6.0}}};
    CHECK_THROWS_AS(salient_mean(series, off, mid), DataError);
}

TEST_CASE("salient interval file round trip and validation") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto path = (dir / "pupilkit_salient_test.csv").string();
    std::vector<SalientInterval> intervals{{"c01", {{0.0, 2.0}, {4.0, 5.0}}},
                                           {"c02", {{1.0, 3.0}}}};
    save_salient_intervals(intervals, path, {1, 2});
    const auto loaded = load_salient_intervals(path);
    CHECK(loaded.size() == 2);
    CHECK(loaded.at("c01").intervals_s.size() == 2);
    CHECK(loaded.at("c02").intervals_s.front().second == doctest::Approx(3.0));
    std::filesystem::remove(path);

    {
        std::ofstream bad(path);
        bad << "clip_id,start_s,end_s\nc01,2.0,1.0\n";
    }
    CHECK_THROWS_AS(load_salient_intervals(path), DataError);
    std::filesystem::remove(path);
}

TEST_CASE("decomposition file round trip") {
    const Fixture fixture(30);
    const VectorXd measured = fixture.combined_series(example_weights());
    const auto decomp = decompose_clip(fixture.frame_rgb, fixture.times, fixture.model,
                                       fixture.lut, measured);
    const auto path =
        (std::filesystem::temp_directory_path() / "pupilkit_decomp_test.csv").string();
    save_decomposition(decomp, path, {1, 2});
    const auto loaded = load_decomposition(path, fixture.times);
    CHECK((loaded.measured - decomp.measured).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((loaded.luminosity - decomp.luminosity).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((loaded.frame_mid_s - decomp.frame_mid_s).cwiseAbs().maxCoeff() < 1e-12);
    std::filesystem::remove(path);
}
