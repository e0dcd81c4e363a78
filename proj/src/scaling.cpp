#include "pupilkit/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace pupilkit::scaling {

std::vector<MatrixXd> dissimilarities(const RatingTensor& ratings) {
    const std::size_t np = ratings.n_participants();
    const auto nc = static_cast<Eigen::Index>(ratings.n_clips());
    if (nc < 3) throw DataError("insufficient-data", "dissimilarities need at least 3 clips");
    if (ratings.scores.size() != np)
        throw DataError("invalid-input", "score matrix count differs from participants");

    std::vector<MatrixXd> out;
    out.reserve(np);
    for (std::size_t p = 0; p < np; ++p) {
        const MatrixXd& s = ratings.scores[p];
        if (s.rows() != nc || s.cols() != static_cast<Eigen::Index>(kEmotionNames.size()))
            throw DataError("invalid-input", "score matrix shape mismatch");
        if (!s.allFinite())
            throw DataError("missing-data", "missing rating for participant " +
                                                ratings.participant_ids[p]);
        MatrixXd d = MatrixXd::Zero(nc, nc);
        for (Eigen::Index i = 0; i < nc; ++i)
            for (Eigen::Index j = i + 1; j < nc; ++j) {
                const double dist = (s.row(i) - s.row(j)).norm();
                d(i, j) = dist;
                d(j, i) = dist;
            }
        out.push_back(std::move(d));
    }
    return out;
}

AxisAnchors anchors_from_ratings(const RatingTensor& ratings) {
    const auto nc = static_cast<Eigen::Index>(ratings.n_clips());
    AxisAnchors anchors;
    anchors.arousal_score = VectorXd::Zero(nc);
    anchors.valence_score = VectorXd::Zero(nc);
    const auto excited = static_cast<Eigen::Index>(
        std::find(kEmotionNames.begin(), kEmotionNames.end(), "excited") - kEmotionNames.begin());
    const auto positive = static_cast<Eigen::Index>(
        std::find(kEmotionNames.begin(), kEmotionNames.end(), "positive") - kEmotionNames.begin());
    for (const MatrixXd& s : ratings.scores) {
        anchors.arousal_score += s.col(excited);
        anchors.valence_score += s.col(positive);
    }
    anchors.arousal_score /= static_cast<double>(ratings.n_participants());
    anchors.valence_score /= static_cast<double>(ratings.n_participants());
    return anchors;
}

namespace {

double model_loss(const std::vector<MatrixXd>& products, const MatrixXd& config,
                  const MatrixXd& weights) {
    double loss = 0;
    for (std::size_t k = 0; k < products.size(); ++k) {
        const MatrixXd fitted =
            config * weights.row(static_cast<Eigen::Index>(k)).asDiagonal() * config.transpose();
        loss += (products[k] - fitted).squaredNorm();
    }
    return loss;
}

/// Exact nonnegative least squares for one participant's diagonal weights,
/// by enumeration of active sets (dims is small).
VectorXd solve_weights(const MatrixXd& config, const MatrixXd& product) {
    const Eigen::Index dims = config.cols();
    MatrixXd gram(dims, dims);
    VectorXd rhs(dims);
    for (Eigen::Index a = 0; a < dims; ++a) {
        rhs[a] = config.col(a).dot(product * config.col(a));
        for (Eigen::Index b = 0; b < dims; ++b) {
            const double dot = config.col(a).dot(config.col(b));
            gram(a, b) = dot * dot;
        }
    }
    VectorXd best = VectorXd::Zero(dims);
    double best_objective = std::numeric_limits<double>::infinity();
    const unsigned subsets = 1u << dims;
    for (unsigned mask = 0; mask < subsets; ++mask) {
        std::vector<Eigen::Index> active;
        for (Eigen::Index d = 0; d < dims; ++d)
            if (mask & (1u << d)) active.push_back(d);
        VectorXd w = VectorXd::Zero(dims);
        if (!active.empty()) {
            const auto na = static_cast<Eigen::Index>(active.size());
            MatrixXd g(na, na);
            VectorXd r(na);
            for (Eigen::Index a = 0; a < na; ++a) {
                r[a] = rhs[active[static_cast<std::size_t>(a)]];
                for (Eigen::Index b = 0; b < na; ++b)
                    g(a, b) = gram(active[static_cast<std::size_t>(a)],
                                   active[static_cast<std::size_t>(b)]);
            }
            const VectorXd sol = g.ldlt().solve(r);
            if (!sol.allFinite() || (sol.array() < 0).any()) continue;
            for (Eigen::Index a = 0; a < na; ++a) w[active[static_cast<std::size_t>(a)]] = sol[a];
        }
        // Objective up to the constant ||B||^2: w'Gw - 2 w'rhs.
        const double objective = w.dot(gram * w) - 2.0 * w.dot(rhs);
        if (objective < best_objective - 1e-15) {
            best_objective = objective;
            best = w;
        }
    }
    return best;
}

}  // namespace

GroupSpace indscal_fit(const std::vector<MatrixXd>& distances, const IndscalOptions& options,
                       const std::optional<AxisAnchors>& anchors) {
    const std::size_t np = distances.size();
    if (np < 2) throw DataError("insufficient-data", "indscal needs at least 2 participants");
    if (options.dims < 1 || options.dims > 10)
        throw ConfigError("invalid-parameter", "dims must be in [1, 10]");
    const Eigen::Index n = distances.front().rows();
    const Eigen::Index dims = options.dims;
    if (n < dims + 1)
        throw NumericError("degenerate-configuration",
                           "need at least dims+1 clips, got " + std::to_string(n));
    double spread_min = std::numeric_limits<double>::infinity(), spread_max = 0;
    for (const MatrixXd& d : distances) {
        if (d.rows() != n || d.cols() != n)
            throw DataError("invalid-input", "distance matrices must share one clip set");
        if ((d - d.transpose()).cwiseAbs().maxCoeff() > 1e-9 || d.diagonal().cwiseAbs().maxCoeff() > 1e-9)
            throw DataError("invalid-input", "distance matrices must be symmetric with zero diagonal");
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) {
                spread_min = std::min(spread_min, d(i, j));
                spread_max = std::max(spread_max, d(i, j));
            }
    }
    if (spread_max - spread_min < 1e-12)
        throw NumericError("degenerate-configuration", "all pairwise distances are equal");

    // Double centering: B_k = -1/2 J D_k^2 J.
    const MatrixXd centering =
        MatrixXd::Identity(n, n) - MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
    std::vector<MatrixXd> products;
    products.reserve(np);
    double scale = 0.0;
    for (const MatrixXd& d : distances) {
        products.push_back(-0.5 * centering * d.cwiseProduct(d) * centering);
        scale += products.back().squaredNorm();
    }

    // Classical-MDS start from the mean scalar products; empty axes get a
    // deterministic seeded jitter so the ALS has something to work with.
    MatrixXd mean_product = MatrixXd::Zero(n, n);
    for (const MatrixXd& b : products) mean_product += b;
    mean_product /= static_cast<double>(np);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eigen(mean_product);
    MatrixXd config(n, dims);
    auto rng = make_rng(options.seed, "indscal-init");
    for (Eigen::Index d = 0; d < dims; ++d) {
        const Eigen::Index which = n - 1 - d;  // eigenvalues ascend
        const double value = eigen.eigenvalues()[which];
        if (value > 1e-12) {
            config.col(d) = eigen.eigenvectors().col(which) * std::sqrt(value);
        } else {
            for (Eigen::Index i = 0; i < n; ++i) config(i, d) = 1e-3 * normal01(rng);
        }
    }

    MatrixXd weights = MatrixXd::Ones(static_cast<Eigen::Index>(np), dims);
    for (std::size_t k = 0; k < np; ++k)
        weights.row(static_cast<Eigen::Index>(k)) = solve_weights(config, products[k]).transpose();

    double loss = model_loss(products, config, weights);
    bool converged = false;
    int iter = 0;
    for (; iter < options.max_iter; ++iter) {
        const double previous = loss;

        // Configuration update: one asymmetric least-squares step
        //   X~ = (sum_k B_k X W_k)(sum_k W_k X'X W_k)^-1,
        // accepted only where it lowers the symmetric loss (backtracked
        // toward the current configuration otherwise).
        MatrixXd numer = MatrixXd::Zero(n, dims);
        MatrixXd denom = MatrixXd::Zero(dims, dims);
        const MatrixXd config_gram = config.transpose() * config;
        for (std::size_t k = 0; k < np; ++k) {
            const auto w = weights.row(static_cast<Eigen::Index>(k)).asDiagonal();
            numer += products[k] * config * w;
            denom += w * config_gram * w;
        }
        const MatrixXd candidate = denom.fullPivLu().isInvertible()
                                       ? MatrixXd(numer * denom.inverse())
                                       : config;
        double step = 1.0;
        for (int half = 0; half < 6; ++half) {
            const MatrixXd trial = config + step * (candidate - config);
            if (model_loss(products, trial, weights) < loss) {
                config = trial;
                break;
            }
            step *= 0.5;
        }

        // Rebalance scale into the weights (model-invariant).
        for (Eigen::Index d = 0; d < dims; ++d) {
            const double norm = config.col(d).norm();
            if (norm > 1e-12) {
                config.col(d) /= norm;
                weights.col(d) *= norm * norm;
            }
        }

        for (std::size_t k = 0; k < np; ++k)
            weights.row(static_cast<Eigen::Index>(k)) =
                solve_weights(config, products[k]).transpose();

        loss = model_loss(products, config, weights);
        if (loss > previous + 1e-9 * std::max(previous, 1.0))
            throw NumericError("als-regression", "indscal loss increased");
        // Stop on a vanishing improvement or when the fit is exact to within
        // numerical precision of the data scale.
        if (previous - loss <= options.tol * std::max(previous, 1e-300) || loss <= 1e-12 * scale) {
            converged = true;
            ++iter;
            break;
        }
    }

    // Order axes by descending total weight; with anchors the axis identity
    // is decided by the ratings themselves: whichever axis tracks the mean
    // "excited" score becomes arousal (y), the other valence (x).
    std::vector<Eigen::Index> order(static_cast<std::size_t>(dims));
    std::iota(order.begin(), order.end(), 0);
    const VectorXd totals = weights.colwise().sum();
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return totals[a] > totals[b]; });
    if (anchors && dims >= 2 && anchors->arousal_score.size() == n) {
        auto abs_corr = [&](Eigen::Index axis, const VectorXd& score) {
            const VectorXd x = config.col(axis).array() - config.col(axis).mean();
            const VectorXd y = score.array() - score.mean();
            const double denom = std::sqrt(x.squaredNorm() * y.squaredNorm());
            return denom > 1e-12 ? std::fabs(x.dot(y)) / denom : 0.0;
        };
        Eigen::Index arousal_axis = order[0];
        double best = -1.0;
        for (Eigen::Index d = 0; d < dims; ++d) {
            const double c = abs_corr(order[static_cast<std::size_t>(d)], anchors->arousal_score);
            if (c > best) {
                best = c;
                arousal_axis = order[static_cast<std::size_t>(d)];
            }
        }
        std::stable_partition(order.begin(), order.end(),
                              [&](Eigen::Index d) { return d != arousal_axis; });
        // Arousal lands on axis 1 right after the strongest remaining axis.
        for (std::size_t d = 0; d < order.size(); ++d)
            if (order[d] == arousal_axis && d != 1) {
                order.erase(order.begin() + static_cast<std::ptrdiff_t>(d));
                order.insert(order.begin() + 1, arousal_axis);
                break;
            }
    }
    MatrixXd ordered_config(n, dims);
    MatrixXd ordered_weights(static_cast<Eigen::Index>(np), dims);
    for (Eigen::Index d = 0; d < dims; ++d) {
        ordered_config.col(d) = config.col(order[static_cast<std::size_t>(d)]);
        ordered_weights.col(d) = weights.col(order[static_cast<std::size_t>(d)]);
    }

    // Sign fixing: anchor arousal (axis 1) on the most "excited" clip and
    // valence (axis 0) on the most "positive" one; without anchors the
    // largest-magnitude coordinate of each axis is made positive.
    for (Eigen::Index d = 0; d < dims; ++d) {
        Eigen::Index anchor_clip = -1;
        if (anchors) {
            if (d == 1 && anchors->arousal_score.size() == n)
                anchors->arousal_score.maxCoeff(&anchor_clip);
            else if (d == 0 && anchors->valence_score.size() == n)
                anchors->valence_score.maxCoeff(&anchor_clip);
        }
        if (anchor_clip < 0) ordered_config.col(d).cwiseAbs().maxCoeff(&anchor_clip);
        if (ordered_config(anchor_clip, d) < 0) ordered_config.col(d) = -ordered_config.col(d);
    }

    // Peak-normalize each axis to |2| (weights absorb the scale).
    for (Eigen::Index d = 0; d < dims; ++d) {
        const double peak = ordered_config.col(d).cwiseAbs().maxCoeff();
        if (peak > 1e-12) {
            const double s = 2.0 / peak;
            ordered_config.col(d) *= s;
            ordered_weights.col(d) /= s * s;
        }
    }

    GroupSpace space;
    space.coordinates = std::move(ordered_config);
    space.participant_weights = std::move(ordered_weights);
    space.loss = loss;
    space.iterations = iter;
    space.converged = converged;
    return space;
}

namespace {

VectorXd rescale_axis(VectorRef axis) {
    const double lo = axis.minCoeff(), hi = axis.maxCoeff();
    if (hi - lo < 1e-12) throw NumericError("rescale-error", "zero-variance axis");
    return (-2.0 + 4.0 * (axis.array() - lo) / (hi - lo)).matrix();
}

}  // namespace

MatrixXd labels(const GroupSpace& space) {
    MatrixXd out(space.coordinates.rows(), space.coordinates.cols());
    for (Eigen::Index d = 0; d < space.coordinates.cols(); ++d)
        out.col(d) = rescale_axis(space.coordinates.col(d));
    return out;
}

MatrixXd participant_labels(const GroupSpace& space, std::size_t participant) {
    if (participant >= static_cast<std::size_t>(space.participant_weights.rows()))
        throw DataError("invalid-input", "participant index out of range");
    MatrixXd stretched = space.coordinates;
    for (Eigen::Index d = 0; d < stretched.cols(); ++d)
        stretched.col(d) *=
            std::sqrt(space.participant_weights(static_cast<Eigen::Index>(participant), d));
    MatrixXd out(stretched.rows(), stretched.cols());
    for (Eigen::Index d = 0; d < stretched.cols(); ++d)
        out.col(d) = rescale_axis(stretched.col(d));
    return out;
}

RatingTensor load_ratings(const std::string& path) {
    const io::CsvTable table = io::read_csv(path, {"participant_id", "clip_id", "emotion", "score"});
    RatingTensor ratings;
    std::map<std::string, std::size_t> participant_index, clip_index;
    struct Entry {
        std::size_t p, c;
        Eigen::Index e;
        double score;
    };
    std::vector<Entry> entries;
    entries.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const std::string& pid = table.str(i, 0);
        const std::string& cid = table.str(i, 1);
        const std::string& emotion = table.str(i, 2);
        const auto found = std::find(kEmotionNames.begin(), kEmotionNames.end(), emotion);
        if (found == kEmotionNames.end())
            throw DataError("csv-format", path + ": unknown emotion '" + emotion + "'");
        const double score = table.num(i, 3);
        if (score < 0 || score > 9 || score != std::floor(score))
            throw DataError("domain-error",
                            path + ": scores must be integers in [0,9] (row " + std::to_string(i + 1) + ")");
        auto [pit, pnew] = participant_index.try_emplace(pid, ratings.participant_ids.size());
        if (pnew) ratings.participant_ids.push_back(pid);
        auto [cit, cnew] = clip_index.try_emplace(cid, ratings.clip_ids.size());
        if (cnew) ratings.clip_ids.push_back(cid);
        entries.push_back({pit->second, cit->second,
                           static_cast<Eigen::Index>(found - kEmotionNames.begin()), score});
    }
    const auto nc = static_cast<Eigen::Index>(ratings.n_clips());
    ratings.scores.assign(ratings.n_participants(),
                          MatrixXd::Constant(nc, static_cast<Eigen::Index>(kEmotionNames.size()),
                                             std::numeric_limits<double>::quiet_NaN()));
    for (const auto& entry : entries)
        ratings.scores[entry.p](static_cast<Eigen::Index>(entry.c), entry.e) = entry.score;
    return ratings;
}

void save_ratings(const RatingTensor& ratings, const std::string& path, const io::FileHeader& meta) {
    io::CsvWriter w(path, meta, {"participant_id", "clip_id", "emotion", "score"});
    for (std::size_t p = 0; p < ratings.n_participants(); ++p)
        for (std::size_t c = 0; c < ratings.n_clips(); ++c)
            for (std::size_t e = 0; e < kEmotionNames.size(); ++e) {
                const double v =
                    ratings.scores[p](static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(e));
                if (std::isnan(v)) continue;
                w.row({ratings.participant_ids[p], ratings.clip_ids[c],
                       std::string(kEmotionNames[e]), io::cell(v)});
            }
}

LabelTable load_labels(const std::string& path) {
    const io::CsvTable table = io::read_csv(path, {"clip_id", "valence", "arousal"});
    LabelTable out;
    out.values.resize(static_cast<Eigen::Index>(table.rows.size()), 2);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        out.clip_ids.push_back(table.str(i, 0));
        out.values(static_cast<Eigen::Index>(i), 0) = table.num(i, 1);
        out.values(static_cast<Eigen::Index>(i), 1) = table.num(i, 2);
    }
    return out;
}

void save_labels(const LabelTable& table, const std::string& path, const io::FileHeader& meta) {
    io::CsvWriter w(path, meta, {"clip_id", "valence", "arousal"});
    for (std::size_t i = 0; i < table.clip_ids.size(); ++i)
        w.row({table.clip_ids[i], io::cell(table.values(static_cast<Eigen::Index>(i), 0)),
               io::cell(table.values(static_cast<Eigen::Index>(i), 1))});
}

}  // namespace pupilkit::scaling
