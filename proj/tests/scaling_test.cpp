#include "pupilkit/scaling.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace pupilkit;
using namespace pupilkit::scaling;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

RatingTensor small_tensor(int participants, int clips, std::uint64_t seed) {
    RatingTensor ratings;
    std::mt19937_64 rng(seed);
    for (int p = 0; p < participants; ++p)
        ratings.participant_ids.push_back("p" + std::to_string(p));
    for (int c = 0; c < clips; ++c) ratings.clip_ids.push_back("c" + std::to_string(c));
    for (int p = 0; p < participants; ++p) {
        MatrixXd scores(clips, 12);
        for (int c = 0; c < clips; ++c)
            for (int e = 0; e < 12; ++e) scores(c, e) = static_cast<double>(rng() % 10);
        ratings.scores.push_back(scores);
    }
    return ratings;
}

/// Distances from a planted 2-D configuration with per-participant weights.
std::vector<MatrixXd> planted_distances(const MatrixXd& config, const MatrixXd& weights) {
    std::vector<MatrixXd> out;
    const Eigen::Index n = config.rows();
    for (Eigen::Index k = 0; k < weights.rows(); ++k) {
        MatrixXd d = MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) {
                double acc = 0;
                for (Eigen::Index a = 0; a < config.cols(); ++a) {
                    const double diff = config(i, a) - config(j, a);
                    acc += weights(k, a) * diff * diff;
                }
                d(i, j) = d(j, i) = std::sqrt(acc);
            }
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace

TEST_CASE("dissimilarities basics") {
    RatingTensor ratings;
    ratings.participant_ids = {"p0"};
    ratings.clip_ids = {"a", "b", "c"};
    MatrixXd scores = MatrixXd::Zero(3, 12);
    scores(1, 6) = 3.0;  // clip b differs by 3 on one emotion
    ratings.scores.push_back(scores);
    const auto distances = dissimilarities(ratings);
    CHECK(distances.size() == 1);
    CHECK(distances[0](0, 2) == doctest::Approx(0.0));  // identical ratings
    CHECK(distances[0](0, 1) == doctest::Approx(3.0));  // single-axis distance
    CHECK(distances[0](1, 0) == doctest::Approx(3.0));
    CHECK(distances[0].diagonal().cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("dissimilarities match a brute-force oracle on random tensors") {
    const auto ratings = small_tensor(4, 7, 500);
    const auto distances = dissimilarities(ratings);
    for (std::size_t p = 0; p < 4; ++p)
        for (int i = 0; i < 7; ++i)
            for (int j = 0; j < 7; ++j) {
                double acc = 0;
                for (int e = 0; e < 12; ++e) {
                    const double diff = ratings.scores[p](i, e) - ratings.scores[p](j, e);
                    acc += diff * diff;
                }
                CHECK(distances[p](i, j) == doctest::Approx(std::sqrt(acc)).epsilon(1e-12));
            }
}

TEST_CASE("missing ratings are rejected without imputation") {
    auto ratings = small_tensor(3, 5, 501);
    ratings.scores[1](2, 4) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(dissimilarities(ratings), DataError);
}

TEST_CASE("indscal recovers planted configurations across seeds") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(900 + seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> wdist(0.4, 1.6);
        const int n_clips = 12, n_participants = 6;
        MatrixXd config(n_clips, 2);
        for (int i = 0; i < n_clips; ++i) {
            config(i, 0) = gauss(rng);
            config(i, 1) = gauss(rng);
        }
        MatrixXd weights(n_participants, 2);
        for (int k = 0; k < n_participants; ++k) {
            weights(k, 0) = wdist(rng);
            weights(k, 1) = wdist(rng);
        }
        const auto distances = planted_distances(config, weights);
        IndscalOptions options;
        options.seed = seed;
        const auto space = indscal_fit(distances, options);
        CHECK(space.converged);
        CHECK(oracles::axis_congruence(config, space.coordinates) >= 0.95);
        CHECK((space.participant_weights.array() >= 0).all());
        CHECK(space.coordinates.cwiseAbs().maxCoeff() <= 2.0 + 1e-9);
    }
}

TEST_CASE("identical distance matrices give identical participant weights") {
    std::mt19937_64 rng(902);
    std::normal_distribution<double> gauss(0.0, 1.0);
    MatrixXd config(8, 2);
    for (int i = 0; i < 8; ++i) {
        config(i, 0) = gauss(rng);
        config(i, 1) = gauss(rng);
    }
    MatrixXd weights = MatrixXd::Ones(4, 2);
    const auto distances = planted_distances(config, weights);
    const auto space = indscal_fit(distances);
    for (int k = 1; k < 4; ++k) {
        CHECK(space.participant_weights(k, 0) ==
              doctest::Approx(space.participant_weights(0, 0)).epsilon(1e-6));
        CHECK(space.participant_weights(k, 1) ==
              doctest::Approx(space.participant_weights(0, 1)).epsilon(1e-6));
    }
}

TEST_CASE("participant relabeling permutes weights and keeps the space") {
    std::mt19937_64 rng(903);
    std::normal_distribution<double> gauss(0.0, 1.0);
    MatrixXd config(9, 2);
    for (int i = 0; i < 9; ++i) {
        config(i, 0) = 2.0 * gauss(rng);
        config(i, 1) = gauss(rng);
    }
    MatrixXd weights(3, 2);
    weights << 1.0, 0.5, 0.6, 1.4, 1.1, 0.9;
    auto distances = planted_distances(config, weights);
    const auto space = indscal_fit(distances);

    std::swap(distances[0], distances[2]);
    const auto permuted = indscal_fit(distances);
    CHECK((space.coordinates - permuted.coordinates).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(space.participant_weights.row(0).isApprox(permuted.participant_weights.row(2), 1e-5));
    CHECK(space.participant_weights.row(2).isApprox(permuted.participant_weights.row(0), 1e-5));
}

TEST_CASE("degenerate inputs are reported") {
    // Two clips cannot span two dimensions.
    MatrixXd tiny = MatrixXd::Zero(2, 2);
    tiny(0, 1) = tiny(1, 0) = 1.0;
    CHECK_THROWS_AS(indscal_fit({tiny, tiny}), NumericError);

    // All-equal distances.
    MatrixXd flat = MatrixXd::Constant(5, 5, 2.0);
    flat.diagonal().setZero();
    CHECK_THROWS_AS(indscal_fit({flat, flat}), NumericError);

    // One participant only.
    MatrixXd ok = MatrixXd::Zero(4, 4);
    CHECK_THROWS_AS(indscal_fit({ok}), DataError);
}

TEST_CASE("anchors orient the axes") {
    std::mt19937_64 rng(904);
    std::normal_distribution<double> gauss(0.0, 1.0);
    MatrixXd config(10, 2);
    for (int i = 0; i < 10; ++i) {
        config(i, 0) = 2.0 * gauss(rng);  // heavier axis first
        config(i, 1) = gauss(rng);
    }
    MatrixXd weights = MatrixXd::Ones(3, 2);
    const auto distances = planted_distances(config, weights);

    AxisAnchors anchors;
    // Excited tracks planted axis 1, positive tracks planted axis 0.
    anchors.arousal_score = config.col(1);
    anchors.valence_score = config.col(0);
    const auto space = indscal_fit(distances, {}, anchors);

    Eigen::Index excited_peak, positive_peak;
    anchors.arousal_score.maxCoeff(&excited_peak);
    anchors.valence_score.maxCoeff(&positive_peak);
    CHECK(space.coordinates(excited_peak, 1) > 0);
    CHECK(space.coordinates(positive_peak, 0) > 0);
}

TEST_CASE("labels rescale to [-2, 2] preserving order") {
    GroupSpace space;
    space.coordinates.resize(3, 2);
    space.coordinates << -1, 0, 0, 1, 1, 0.5;
    space.participant_weights = MatrixXd::Ones(2, 2);
    const MatrixXd rescaled = labels(space);
    CHECK(rescaled(0, 0) == doctest::Approx(-2.0));
    CHECK(rescaled(1, 0) == doctest::Approx(0.0));
    CHECK(rescaled(2, 0) == doctest::Approx(2.0));
    CHECK(rescaled(0, 1) == doctest::Approx(-2.0));
    CHECK(rescaled(1, 1) == doctest::Approx(2.0));

    // Two-value axis maps onto the endpoints.
    GroupSpace two;
    two.coordinates.resize(2, 2);
    two.coordinates << 0, 0, 1, 1;
    CHECK_NOTHROW(labels(two));
    CHECK(labels(two)(0, 0) == doctest::Approx(-2.0));
    CHECK(labels(two)(1, 0) == doctest::Approx(2.0));

    // Random axes keep rank order and hit the endpoints exactly.
    std::mt19937_64 rng(905);
    std::normal_distribution<double> gauss(0.0, 1.0);
    GroupSpace random_space;
    random_space.coordinates.resize(15, 2);
    for (int i = 0; i < 15; ++i) {
        random_space.coordinates(i, 0) = gauss(rng);
        random_space.coordinates(i, 1) = gauss(rng);
    }
    const MatrixXd out = labels(random_space);
    for (int axis = 0; axis < 2; ++axis) {
        CHECK(out.col(axis).minCoeff() == doctest::Approx(-2.0));
        CHECK(out.col(axis).maxCoeff() == doctest::Approx(2.0));
        for (int i = 0; i < 15; ++i)
            for (int j = 0; j < 15; ++j)
                if (random_space.coordinates(i, axis) < random_space.coordinates(j, axis))
                    CHECK(out(i, axis) < out(j, axis) + 1e-12);
    }

    GroupSpace degenerate;
    degenerate.coordinates = MatrixXd::Zero(4, 2);
    CHECK_THROWS_AS(labels(degenerate), NumericError);
}

TEST_CASE("ratings and labels file round trips") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto ratings_path = (dir / "pupilkit_ratings_test.csv").string();
    auto ratings = small_tensor(3, 4, 510);
    save_ratings(ratings, ratings_path, {1, 2});
    const auto loaded = load_ratings(ratings_path);
    CHECK(loaded.n_participants() == 3);
    CHECK(loaded.n_clips() == 4);
    for (std::size_t p = 0; p < 3; ++p)
        CHECK((loaded.scores[p] - ratings.scores[p]).cwiseAbs().maxCoeff() ==
              doctest::Approx(0.0));
    std::filesystem::remove(ratings_path);

    const auto labels_path = (dir / "pupilkit_labels_test.csv").string();
    LabelTable table;
    table.clip_ids = {"c1", "c2"};
    table.values.resize(2, 2);
    table.values << -2, 1, 2, -1;
    save_labels(table, labels_path, {1, 2});
    const auto loaded_labels = load_labels(labels_path);
    CHECK(loaded_labels.clip_ids == table.clip_ids);
    CHECK(loaded_labels.values(1, 1) == doctest::Approx(-1.0));
    std::filesystem::remove(labels_path);
}

TEST_CASE("rating scores outside 0-9 are rejected on load") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto path = (dir / "pupilkit_bad_ratings.csv").string();
    {
        std::ofstream out(path);
        out << "participant_id,clip_id,emotion,score\np0,c0,excited,12\n";
    }
    CHECK_THROWS_AS(load_ratings(path), DataError);
    std::filesystem::remove(path);
}
