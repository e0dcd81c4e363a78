#include "pupilkit/gbt.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace pupilkit;
using namespace pupilkit::gbt;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

decouple::ClipDecomposition decomp_from(const VectorXd& measured, const VectorXd& luminosity) {
    decouple::ClipDecomposition decomp;
    decomp.measured = measured;
    decomp.luminosity = luminosity;
    decomp.arousal = measured - luminosity;
    decomp.frame_mid_s.resize(measured.size());
    for (Eigen::Index f = 0; f < measured.size(); ++f) decomp.frame_mid_s[f] = (f + 0.5) * 0.04;
    return decomp;
}

decouple::SalientInterval whole_clip(Eigen::Index frames) {
    return {"clip", {{0.0, frames * 0.04}}};
}

}  // namespace

TEST_CASE("feature vector layout and constant-window conventions") {
    CHECK(feature_names().size() == 36);
    CHECK(feature_names()[0] == "measured_d0_mean");
    CHECK(feature_names()[13] == "luminosity_d0_variance");
    CHECK(feature_names()[35] == "arousal_d2_kurtosis");

    const VectorXd constant = VectorXd::Constant(20, 3.25);
    const auto features = extract_features(decomp_from(constant, constant), whole_clip(20));
    CHECK(features[0] == doctest::Approx(3.25));  // measured d0 mean
    for (int i = 1; i < 12; ++i) CHECK(features[i] == doctest::Approx(0.0));  // all other measured
    for (int i = 24; i < 36; ++i) CHECK(features[i] == doctest::Approx(0.0));  // arousal block
}

TEST_CASE("ramp derivatives hit the slope") {
    VectorXd ramp(30), zero = VectorXd::Zero(30);
    for (int f = 0; f < 30; ++f) ramp[f] = 2.0 + 0.05 * f;
    const auto features = extract_features(decomp_from(ramp, zero), whole_clip(30));
    // measured block: d1 mean == slope per frame, d1 variance ~ 0.
    CHECK(features[4] == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(features[5] == doctest::Approx(0.0).epsilon(1e-12));
    // d2 of a ramp vanishes.
    CHECK(features[8] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("moments match the brute-force oracle on random windows") {
    std::mt19937_64 rng(61);
    std::normal_distribution<double> noise(0.0, 1.0);
    VectorXd measured(40), luminosity(40);
    for (int f = 0; f < 40; ++f) {
        measured[f] = 4.0 + noise(rng);
        luminosity[f] = 3.5 + 0.5 * noise(rng);
    }
    const auto decomp = decomp_from(measured, luminosity);
    const auto features = extract_features(decomp, whole_clip(40));

    auto check_block = [&](int block, const VectorXd& series) {
        // Derivative order 0 of this signal.
        std::vector<double> window(series.data(), series.data() + series.size());
        const auto m = oracles::moments(window);
        CHECK(features[block * 12 + 0] == doctest::Approx(m.mean).epsilon(1e-9));
        CHECK(features[block * 12 + 1] == doctest::Approx(m.variance).epsilon(1e-9));
        CHECK(features[block * 12 + 2] == doctest::Approx(m.skewness).epsilon(1e-9));
        CHECK(features[block * 12 + 3] == doctest::Approx(m.kurtosis).epsilon(1e-9));

        // First derivative block against an explicit central difference.
        std::vector<double> d1(window.size());
        d1[0] = window[1] - window[0];
        for (std::size_t i = 1; i + 1 < window.size(); ++i) d1[i] = 0.5 * (window[i + 1] - window[i - 1]);
        d1[window.size() - 1] = window[window.size() - 1] - window[window.size() - 2];
        const auto md = oracles::moments(d1);
        CHECK(features[block * 12 + 4] == doctest::Approx(md.mean).epsilon(1e-9));
        CHECK(features[block * 12 + 5] == doctest::Approx(md.variance).epsilon(1e-9));
    };
    check_block(0, decomp.measured);
    check_block(1, decomp.luminosity);
    check_block(2, decomp.arousal);
}

TEST_CASE("salient windows below five frames are rejected") {
    const VectorXd series = VectorXd::Constant(30, 1.0);
    decouple::SalientInterval tiny{"clip", {{0.0, 0.1}}};  // covers 2 frames
    CHECK_THROWS_AS(extract_features(decomp_from(series, series), tiny), DataError);
}

TEST_CASE("single-leaf trees predict the target mean") {
    std::mt19937_64 rng(62);
    std::normal_distribution<double> noise(0.0, 1.0);
    MatrixXd X(20, 3);
    VectorXd y(20);
    for (int i = 0; i < 20; ++i) {
        for (int j = 0; j < 3; ++j) X(i, j) = noise(rng);
        y[i] = noise(rng);
    }
    GbtParams params;
    params.max_depth = 0;
    params.n_trees = 25;
    params.lambda_l2 = 0.0;
    const auto model = train_gbt(X, y, params);
    const VectorXd pred = predict_gbt(model, X);
    for (int i = 0; i < 20; ++i) CHECK(pred[i] == doctest::Approx(y.mean()).epsilon(1e-9));
}

TEST_CASE("a one-feature step function is learned to high accuracy") {
    std::mt19937_64 rng(63);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    MatrixXd X(60, 4);
    VectorXd y(60);
    for (int i = 0; i < 60; ++i) {
        for (int j = 0; j < 4; ++j) X(i, j) = u(rng);
        y[i] = X(i, 2) > 0.5 ? 2.0 : -1.0;
    }
    GbtParams params;
    params.max_depth = 1;
    params.n_trees = 300;
    params.learning_rate = 0.3;
    params.min_samples_leaf = 1;
    const auto model = train_gbt(X, y, params);
    const VectorXd pred = predict_gbt(model, X);
    const double r2 = metrics::r2_score(y, pred);
    CHECK(r2 >= 0.999);

    // The very first split must match the exhaustive single-split oracle.
    double best_gain = 0, best_threshold = 0;
    int best_feature = -1;
    const double total_sum = y.sum();
    for (int f = 0; f < 4; ++f) {
        std::vector<std::pair<double, double>> pairs;
        for (int i = 0; i < 60; ++i) pairs.push_back({X(i, f), y[i]});
        std::sort(pairs.begin(), pairs.end());
        double left = 0;
        for (int i = 0; i + 1 < 60; ++i) {
            left += pairs[static_cast<std::size_t>(i)].second;
            if (pairs[static_cast<std::size_t>(i + 1)].first <=
                pairs[static_cast<std::size_t>(i)].first)
                continue;
            const double right = total_sum - left;
            const double gain = left * left / (i + 1.0) + right * right / (59.0 - i) -
                                total_sum * total_sum / 60.0;
            if (gain > best_gain) {
                best_gain = gain;
                best_feature = f;
                best_threshold = 0.5 * (pairs[static_cast<std::size_t>(i)].first +
                                        pairs[static_cast<std::size_t>(i + 1)].first);
            }
        }
    }
    CHECK(model.trees.front().front().feature == best_feature);
    CHECK(model.trees.front().front().threshold == doctest::Approx(best_threshold));
}

TEST_CASE("duplicating every row leaves the model unchanged at lambda zero") {
    std::mt19937_64 rng(64);
    std::normal_distribution<double> noise(0.0, 1.0);
    MatrixXd X(25, 5);
    VectorXd y(25);
    for (int i = 0; i < 25; ++i) {
        for (int j = 0; j < 5; ++j) X(i, j) = noise(rng);
        y[i] = X(i, 0) - 0.5 * X(i, 3) + 0.1 * noise(rng);
    }
    MatrixXd X2(50, 5);
    VectorXd y2(50);
    X2 << X, X;
    y2 << y, y;
    GbtParams params;
    params.max_depth = 3;
    params.n_trees = 20;
    params.lambda_l2 = 0.0;
    params.min_samples_leaf = 1;
    const auto model1 = train_gbt(X, y, params);
    const auto model2 = train_gbt(X2, y2, params);
    const VectorXd p1 = predict_gbt(model1, X);
    const VectorXd p2 = predict_gbt(model2, X);
    CHECK((p1 - p2).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("boosted training loss is non-increasing and converges on clean data") {
    std::mt19937_64 rng(65);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MatrixXd X(40, 2);
    VectorXd y(40);
    for (int i = 0; i < 40; ++i) {
        X(i, 0) = u(rng);
        X(i, 1) = u(rng);
        y[i] = X(i, 0) > 0 ? (X(i, 1) > 0 ? 3.0 : 1.0) : -2.0;
    }
    GbtParams params;
    params.max_depth = 2;
    params.n_trees = 400;
    params.learning_rate = 0.3;
    params.min_samples_leaf = 1;
    const auto model = train_gbt(X, y, params);  // throws if loss ever increases
    const VectorXd pred = predict_gbt(model, X);
    CHECK((pred - y).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("empty model predicts the base value") {
    GbtModel model;
    model.base_prediction = 1.7;
    model.n_features = 3;
    const VectorXd pred = predict_gbt(model, MatrixXd::Zero(4, 3));
    for (int i = 0; i < 4; ++i) CHECK(pred[i] == doctest::Approx(1.7));
    CHECK_THROWS_AS(predict_gbt(model, MatrixXd::Zero(2, 5)), DataError);
}

TEST_CASE("a hand-written tree is traversed correctly") {
    GbtModel model;
    model.base_prediction = 0.0;
    model.learning_rate = 1.0;
    model.n_features = 2;
    // Root splits on feature 0 at 0.5; left is a leaf -1, right splits on
    // feature 1 at 2.0 into leaves +1 / +3 (preorder layout).
    model.trees.push_back({
        {0, 0.5, 1, 2, 0.0},
        {-1, 0.0, -1, -1, -1.0},
        {1, 2.0, 3, 4, 0.0},
        {-1, 0.0, -1, -1, 1.0},
        {-1, 0.0, -1, -1, 3.0},
    });
    MatrixXd X(3, 2);
    X << 0.2, 9.9,  0.9, 1.0,  0.9, 5.0;
    const VectorXd pred = predict_gbt(model, X);
    CHECK(pred[0] == doctest::Approx(-1.0));
    CHECK(pred[1] == doctest::Approx(1.0));
    CHECK(pred[2] == doctest::Approx(3.0));
}

TEST_CASE("predictions are invariant to consistent feature permutation") {
    std::mt19937_64 rng(66);
    std::normal_distribution<double> noise(0.0, 1.0);
    MatrixXd X(30, 4);
    VectorXd y(30);
    for (int i = 0; i < 30; ++i) {
        for (int j = 0; j < 4; ++j) X(i, j) = noise(rng);
        y[i] = 2.0 * X(i, 1) + noise(rng) * 0.1;
    }
    GbtParams params;
    params.n_trees = 30;
    params.min_samples_leaf = 1;
    auto model = train_gbt(X, y, params);
    const VectorXd before = predict_gbt(model, X);

    const int perm[4] = {2, 0, 3, 1};  // new column index of old feature j
    MatrixXd shuffled(30, 4);
    for (int j = 0; j < 4; ++j) shuffled.col(perm[j]) = X.col(j);
    for (auto& tree : model.trees)
        for (auto& node : tree)
            if (!node.is_leaf()) node.feature = perm[node.feature];
    const VectorXd after = predict_gbt(model, shuffled);
    CHECK((before - after).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("model file round trip preserves predictions") {
    std::mt19937_64 rng(67);
    std::normal_distribution<double> noise(0.0, 1.0);
    MatrixXd X(25, 6);
    VectorXd y(25);
    for (int i = 0; i < 25; ++i) {
        for (int j = 0; j < 6; ++j) X(i, j) = noise(rng);
        y[i] = X(i, 0) * X(i, 1) + 0.3 * X(i, 4);
    }
    GbtParams params;
    params.n_trees = 40;
    params.lambda_l2 = 1.0;
    const auto model = train_gbt(X, y, params);
    const auto path = (std::filesystem::temp_directory_path() / "pupilkit_gbt_test.txt").string();
    save_gbt_model(model, path, {1, 2});
    const auto loaded = load_gbt_model(path);
    CHECK(loaded.trees.size() == model.trees.size());
    CHECK((predict_gbt(loaded, X) - predict_gbt(model, X)).cwiseAbs().maxCoeff() < 1e-9);
    std::filesystem::remove(path);
}

namespace {

FeatureTable synthetic_table(int participants, int clips, std::uint64_t seed,
                             bool planted = true) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    FeatureTable table;
    const int n = participants * clips;
    table.X.resize(n, kNumFeatures);
    table.arousal.resize(n);
    table.valence.resize(n);
    int row = 0;
    for (int p = 0; p < participants; ++p)
        for (int c = 0; c < clips; ++c, ++row) {
            table.participant_ids.push_back("p" + std::to_string(p));
            table.clip_ids.push_back("c" + std::to_string(c));
            for (int j = 0; j < kNumFeatures; ++j) table.X(row, j) = noise(rng);
            if (planted)
                table.arousal[row] =
                    std::tanh(table.X(row, 3)) + 0.5 * table.X(row, 17) * table.X(row, 17) +
                    0.05 * noise(rng);
            else
                table.arousal[row] = noise(rng);
            table.valence[row] = noise(rng);
        }
    return table;
}

HyperGrid tiny_grid() {
    HyperGrid grid;
    grid.learning_rates = {0.1, 0.3};
    grid.max_depths = {2, 3};
    grid.n_trees = {50, 100};
    grid.lambda_l2 = {0.0};
    grid.min_samples_leaf = {2};
    return grid;
}

}  // namespace

TEST_CASE("grid enumeration follows the documented nesting order") {
    HyperGrid grid;
    grid.learning_rates = {0.1, 0.2};
    grid.max_depths = {1};
    grid.n_trees = {10, 20};
    grid.lambda_l2 = {0.0};
    grid.min_samples_leaf = {2};
    const auto points = grid.enumerate();
    CHECK(points.size() == 4);
    CHECK(points[0].learning_rate == 0.1);
    CHECK(points[0].n_trees == 10);
    CHECK(points[1].n_trees == 20);
    CHECK(points[2].learning_rate == 0.2);
}

TEST_CASE("nested lopo recovers a planted nonlinear function") {
    const auto table = synthetic_table(8, 12, 70);
    const auto result =
        nested_lopo(table, Target::arousal, FeatureSet::all36, tiny_grid(), 7, 2);
    CHECK(result.folds.size() == 8);
    CHECK(result.aggregate.n_folds == 8);
    CHECK(result.aggregate.r2_mean >= 0.8);
}

TEST_CASE("nested lopo on shuffled targets has no signal") {
    std::mt19937_64 rng(71);
    double total_r2 = 0;
    const int reps = 10;
    for (int rep = 0; rep < reps; ++rep) {
        auto table = synthetic_table(6, 8, 72 + static_cast<std::uint64_t>(rep), false);
        const auto result =
            nested_lopo(table, Target::arousal, FeatureSet::all36, tiny_grid(), 7, 2);
        total_r2 += result.aggregate.r2_mean;
    }
    CHECK(total_r2 / reps <= 0.1);
    (void)rng;
}

TEST_CASE("nested lopo keeps folds grouped by participant") {
    const auto table = synthetic_table(7, 10, 73);
    const auto result =
        nested_lopo(table, Target::arousal, FeatureSet::all36, tiny_grid(), 7, 2);
    for (const auto& manifest : result.manifests) {
        for (const auto& id : manifest.train_participants) CHECK(id != manifest.held_out);
        CHECK(manifest.inner_splits.size() == 5);
        for (const auto& split : manifest.inner_splits) {
            for (const auto& id : split.train_participants) {
                CHECK(id != manifest.held_out);
                CHECK(std::find(split.validation_participants.begin(),
                                split.validation_participants.end(),
                                id) == split.validation_participants.end());
            }
            for (const auto& id : split.validation_participants) CHECK(id != manifest.held_out);
        }
    }
}

TEST_CASE("feature set selection changes the usable columns") {
    CHECK(feature_columns(FeatureSet::all36).size() == 36);
    CHECK(feature_columns(FeatureSet::measured12).size() == 12);
    CHECK(feature_columns(FeatureSet::measured_luminosity24).size() == 24);
    CHECK(feature_columns(FeatureSet::measured12).back() == 11);

    // The lenient variant still sees the planted features (3 and 17).
    const auto table = synthetic_table(7, 10, 76);
    const auto result =
        nested_lopo(table, Target::arousal, FeatureSet::measured_luminosity24, tiny_grid(), 7, 2);
    CHECK(result.aggregate.r2_mean >= 0.8);
}

TEST_CASE("nested lopo is deterministic across worker counts") {
    const auto table = synthetic_table(6, 8, 77);
    const auto serial =
        nested_lopo(table, Target::arousal, FeatureSet::all36, tiny_grid(), 13, 1);
    const auto parallel =
        nested_lopo(table, Target::arousal, FeatureSet::all36, tiny_grid(), 13, 4);
    REQUIRE(serial.folds.size() == parallel.folds.size());
    for (std::size_t f = 0; f < serial.folds.size(); ++f) {
        CHECK(serial.folds[f].participant_id == parallel.folds[f].participant_id);
        CHECK(serial.folds[f].report.r == doctest::Approx(parallel.folds[f].report.r));
        CHECK(serial.folds[f].chosen.learning_rate == parallel.folds[f].chosen.learning_rate);
        CHECK(serial.folds[f].chosen.n_trees == parallel.folds[f].chosen.n_trees);
    }
    CHECK(serial.aggregate.r2_mean == doctest::Approx(parallel.aggregate.r2_mean));
}

TEST_CASE("empty grid and small cohorts are rejected") {
    const auto table = synthetic_table(4, 6, 74);
    HyperGrid empty;
    empty.learning_rates = {};
    CHECK_THROWS_AS(nested_lopo(table, Target::arousal, FeatureSet::all36, empty, 7, 1),
                    ConfigError);
    CHECK_THROWS_AS(nested_lopo(table, Target::arousal, FeatureSet::all36, tiny_grid(), 7, 1),
                    DataError);
}

TEST_CASE("feature table file round trip") {
    const auto table = synthetic_table(3, 4, 75);
    const auto path =
        (std::filesystem::temp_directory_path() / "pupilkit_features_test.csv").string();
    save_feature_table(table, path, {1, 2});
    const auto loaded = load_feature_table(path);
    CHECK(loaded.participant_ids == table.participant_ids);
    CHECK((loaded.X - table.X).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((loaded.arousal - table.arousal).cwiseAbs().maxCoeff() < 1e-9);
    std::filesystem::remove(path);
}
