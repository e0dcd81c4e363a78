#include "pupilkit/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace pupilkit::gbt {

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = [] {
        const char* signals[3] = {"measured", "luminosity", "arousal"};
        const char* moments[4] = {"mean", "variance", "skewness", "kurtosis"};
        std::vector<std::string> out;
        for (const char* signal : signals)
            for (int order = 0; order < 3; ++order)
                for (const char* moment : moments)
                    out.push_back(std::string(signal) + "_d" + std::to_string(order) + "_" + moment);
        return out;
    }();
    return names;
}

namespace {

VectorXd central_difference(VectorRef x) {
    const Eigen::Index n = x.size();
    VectorXd d(n);
    if (n == 1) {
        d[0] = 0;
        return d;
    }
    d[0] = x[1] - x[0];
    for (Eigen::Index i = 1; i + 1 < n; ++i) d[i] = 0.5 * (x[i + 1] - x[i - 1]);
    d[n - 1] = x[n - 1] - x[n - 2];
    return d;
}

void append_moments(const VectorXd& x, std::vector<double>& out) {
    const double n = static_cast<double>(x.size());
    const double mean = x.mean();
    const ArrayXd centered = x.array() - mean;
    const double m2 = centered.square().sum() / n;
    out.push_back(mean);
    out.push_back(m2);
    if (m2 <= 1e-12) {  // (near-)constant window: moments are defined as zero
        out.push_back(0);
        out.push_back(0);
        return;
    }
    const double m3 = centered.cube().sum() / n;
    const double m4 = centered.square().square().sum() / n;
    out.push_back(m3 / std::pow(m2, 1.5));
    out.push_back(m4 / (m2 * m2) - 3.0);
}

}  // namespace

VectorXd extract_features(const decouple::ClipDecomposition& decomp,
                          const decouple::SalientInterval& salient) {
    const auto indices = decouple::salient_frame_indices(salient, decomp.frame_mid_s);
    if (indices.size() < 5)
        throw DataError("insufficient-data", "salient window covers fewer than 5 frames");

    std::vector<double> features;
    features.reserve(kNumFeatures);
    for (const VectorXd* series : {&decomp.measured, &decomp.luminosity, &decomp.arousal}) {
        VectorXd window(static_cast<Eigen::Index>(indices.size()));
        for (std::size_t i = 0; i < indices.size(); ++i)
            window[static_cast<Eigen::Index>(i)] = (*series)[indices[i]];
        VectorXd d1 = central_difference(window);
        VectorXd d2 = central_difference(d1);
        append_moments(window, features);
        append_moments(d1, features);
        append_moments(d2, features);
    }
    VectorXd out = Eigen::Map<const VectorXd>(features.data(), kNumFeatures);
    if (!out.allFinite()) throw NumericError("invalid-features", "non-finite feature values");
    return out;
}

std::vector<int> feature_columns(FeatureSet set) {
    int count = kNumFeatures;
    if (set == FeatureSet::measured12) count = 12;
    if (set == FeatureSet::measured_luminosity24) count = 24;
    std::vector<int> cols(static_cast<std::size_t>(count));
    std::iota(cols.begin(), cols.end(), 0);
    return cols;
}

namespace {

/// Presorted CART-style tree builder: one argsort per feature at the root,
/// stably partitioned down the tree.
class TreeBuilder {
public:
    TreeBuilder(const MatrixXd& X, const GbtParams& params) : X_(X), params_(params) {
        const Eigen::Index n = X.rows();
        root_order_.resize(static_cast<std::size_t>(X.cols()));
        for (Eigen::Index f = 0; f < X.cols(); ++f) {
            auto& order = root_order_[static_cast<std::size_t>(f)];
            order.resize(static_cast<std::size_t>(n));
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
                return X(a, f) < X(b, f);
            });
        }
    }

    /// Fits one tree to `residual` and adds its raw outputs into `out`.
    std::vector<TreeNode> fit(const VectorXd& residual, VectorXd& outputs) {
        residual_ = &residual;
        outputs_ = &outputs;
        nodes_.clear();
        grow(root_order_, 0);
        return std::move(nodes_);
    }

private:
    using OrderLists = std::vector<std::vector<Eigen::Index>>;

    int grow(const OrderLists& lists, int depth) {
        const auto& members = lists.front();
        const auto n = static_cast<double>(members.size());
        double sum = 0;
        for (Eigen::Index row : members) sum += (*residual_)[row];
        const double leaf_value = sum / (n + params_.lambda_l2);

        const int index = static_cast<int>(nodes_.size());
        nodes_.push_back(TreeNode{-1, 0, -1, -1, leaf_value});

        if (depth >= params_.max_depth ||
            members.size() < 2 * static_cast<std::size_t>(params_.min_samples_leaf)) {
            for (Eigen::Index row : members) (*outputs_)[row] = leaf_value;
            return index;
        }

        // Exhaustive scan over features and midpoint thresholds; strict
        // improvement keeps the lowest feature index and threshold on ties.
        const double parent_score = sum * sum / (n + params_.lambda_l2);
        double best_gain = 1e-12;
        int best_feature = -1;
        double best_threshold = 0;
        for (Eigen::Index f = 0; f < X_.cols(); ++f) {
            const auto& order = lists[static_cast<std::size_t>(f)];
            double left_sum = 0;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                left_sum += (*residual_)[order[i]];
                const double v = X_(order[i], f);
                const double next = X_(order[i + 1], f);
                if (next <= v) continue;  // not a value boundary
                const auto left_count = static_cast<double>(i + 1);
                const auto right_count = n - left_count;
                if (left_count < params_.min_samples_leaf || right_count < params_.min_samples_leaf)
                    continue;
                const double right_sum = sum - left_sum;
                const double gain = left_sum * left_sum / (left_count + params_.lambda_l2) +
                                    right_sum * right_sum / (right_count + params_.lambda_l2) -
                                    parent_score;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (v + next);
                }
            }
        }
        if (best_feature < 0) {
            for (Eigen::Index row : members) (*outputs_)[row] = leaf_value;
            return index;
        }

        OrderLists left_lists(lists.size()), right_lists(lists.size());
        for (std::size_t f = 0; f < lists.size(); ++f) {
            left_lists[f].reserve(members.size());
            right_lists[f].reserve(members.size());
            for (Eigen::Index row : lists[f]) {
                if (X_(row, best_feature) <= best_threshold)
                    left_lists[f].push_back(row);
                else
                    right_lists[f].push_back(row);
            }
        }
        nodes_[static_cast<std::size_t>(index)].feature = best_feature;
        nodes_[static_cast<std::size_t>(index)].threshold = best_threshold;
        const int left = grow(left_lists, depth + 1);
        nodes_[static_cast<std::size_t>(index)].left = left;
        const int right = grow(right_lists, depth + 1);
        nodes_[static_cast<std::size_t>(index)].right = right;
        return index;
    }

    const MatrixXd& X_;
    const GbtParams& params_;
    OrderLists root_order_;
    const VectorXd* residual_ = nullptr;
    VectorXd* outputs_ = nullptr;
    std::vector<TreeNode> nodes_;
};

double tree_output(const std::vector<TreeNode>& tree, const MatrixXd& X, Eigen::Index row) {
    int node = 0;
    while (!tree[static_cast<std::size_t>(node)].is_leaf()) {
        const auto& n = tree[static_cast<std::size_t>(node)];
        node = X(row, n.feature) <= n.threshold ? n.left : n.right;
    }
    return tree[static_cast<std::size_t>(node)].value;
}

void validate_params(const GbtParams& params) {
    if (!(params.learning_rate > 0) || params.learning_rate > 1.0)
        throw ConfigError("invalid-parameter", "learning_rate must be in (0, 1]");
    if (params.max_depth < 0 || params.n_trees < 0 || params.min_samples_leaf < 1 ||
        params.lambda_l2 < 0)
        throw ConfigError("invalid-parameter", "bad gbt parameters");
}

}  // namespace

/// Incremental boosting engine shared by train_gbt and the inner CV, which
/// scores prefix models at several tree counts without retraining.
class BoostingRun {
public:
    BoostingRun(const MatrixXd& X, VectorRef y, const GbtParams& params)
        : X_(X), y_(y), params_(params), builder_(X, params) {
        validate_params(params);
        if (X.rows() != y.size()) throw DataError("invalid-input", "X/y row mismatch");
        if (X.rows() < 10) throw DataError("insufficient-data", "gbt needs at least 10 rows");
        if (!y.allFinite() || !X.allFinite())
            throw DataError("invalid-input", "non-finite training data");
        if (X.rows() < 2 * params.min_samples_leaf)
            throw DataError("training-error", "fewer rows than twice min_samples_leaf");
        model_.learning_rate = params.learning_rate;
        model_.lambda_l2 = params.lambda_l2;
        model_.n_features = static_cast<int>(X.cols());
        model_.base_prediction = y.mean();
        prediction_ = VectorXd::Constant(y.size(), model_.base_prediction);
        loss_ = (y_ - prediction_).squaredNorm();
    }

    void boost_round() {
        const VectorXd residual = y_ - prediction_;
        VectorXd outputs = VectorXd::Zero(y_.size());
        model_.trees.push_back(builder_.fit(residual, outputs));
        prediction_ += params_.learning_rate * outputs;
        const double new_loss = (y_ - prediction_).squaredNorm();
        if (new_loss > loss_ + 1e-9 * std::max(loss_, 1.0))
            throw NumericError("boosting-regression", "training loss increased");
        loss_ = new_loss;
    }

    const GbtModel& model() const { return model_; }
    const std::vector<TreeNode>& last_tree() const { return model_.trees.back(); }
    double loss() const { return loss_; }

private:
    const MatrixXd& X_;
    VectorXd y_;
    GbtParams params_;
    TreeBuilder builder_;
    GbtModel model_;
    VectorXd prediction_;
    double loss_ = 0;
};

GbtModel train_gbt(const MatrixXd& X, VectorRef y, const GbtParams& params) {
    BoostingRun run(X, y, params);
    for (int t = 0; t < params.n_trees; ++t) run.boost_round();
    return run.model();
}

VectorXd predict_gbt(const GbtModel& model, const MatrixXd& X) {
    if (X.cols() != model.n_features)
        throw DataError("invalid-input", "feature dimension mismatch: model has " +
                                             std::to_string(model.n_features) + ", input has " +
                                             std::to_string(X.cols()));
    VectorXd out = VectorXd::Constant(X.rows(), model.base_prediction);
    for (const auto& tree : model.trees)
        for (Eigen::Index row = 0; row < X.rows(); ++row)
            out[row] += model.learning_rate * tree_output(tree, X, row);
    return out;
}

std::vector<GbtParams> HyperGrid::enumerate() const {
    std::vector<GbtParams> out;
    for (double lr : learning_rates)
        for (int depth : max_depths)
            for (int trees : n_trees)
                for (double lambda : lambda_l2)
                    for (int leaf : min_samples_leaf)
                        out.push_back({lr, depth, trees, lambda, leaf});
    return out;
}

std::vector<std::string> FeatureTable::participants() const {
    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (const auto& id : participant_ids)
        if (seen.insert(id).second) ids.push_back(id);
    return ids;
}

namespace {

MatrixXd select_columns(const MatrixXd& X, const std::vector<int>& cols) {
    MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = X.col(cols[j]);
    return out;
}

MatrixXd select_rows(const MatrixXd& X, const std::vector<Eigen::Index>& rows) {
    MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
    return out;
}

VectorXd select_rows(const VectorXd& v, const std::vector<Eigen::Index>& rows) {
    VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[rows[i]];
    return out;
}

double safe_r2(const VectorXd& observed, const VectorXd& predicted) {
    try {
        return metrics::r2_score(observed, predicted);
    } catch (const Error&) {
        return -std::numeric_limits<double>::infinity();
    }
}

}  // namespace

NestedLopoResult nested_lopo(const FeatureTable& table, Target target, FeatureSet feature_set,
                             const HyperGrid& grid, std::uint64_t seed, int jobs) {
    const auto grid_points = grid.enumerate();
    if (grid_points.empty()) throw ConfigError("config-error", "empty hyperparameter grid");
    const auto participants = table.participants();
    if (participants.size() < 6)
        throw DataError("insufficient-data", "nested lopo needs at least 6 participants");

    const MatrixXd X = select_columns(table.X, feature_columns(feature_set));
    const VectorXd& y = target == Target::arousal ? table.arousal : table.valence;
    constexpr int kInnerFolds = 5;

    // Distinct tree-count checkpoints let one boosting run score every
    // n_trees setting that shares the other parameters.
    std::vector<int> checkpoints = grid.n_trees;
    std::sort(checkpoints.begin(), checkpoints.end());
    checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());

    NestedLopoResult result;
    result.folds.resize(participants.size());
    result.manifests.resize(participants.size());

    parallel_for(participants.size(), jobs, [&](std::size_t fold_index) {
        const std::string& held_out = participants[fold_index];
        NestedFold fold;
        fold.participant_id = held_out;
        NestedFoldManifest manifest;
        manifest.held_out = held_out;

        std::vector<Eigen::Index> outer_train_rows, test_rows;
        for (std::size_t i = 0; i < table.participant_ids.size(); ++i) {
            if (table.participant_ids[i] == held_out)
                test_rows.push_back(static_cast<Eigen::Index>(i));
            else
                outer_train_rows.push_back(static_cast<Eigen::Index>(i));
        }

        // Participant-grouped inner folds: seeded shuffle, then round-robin.
        std::vector<std::string> inner_participants;
        for (const auto& id : participants)
            if (id != held_out) inner_participants.push_back(id);
        std::sort(inner_participants.begin(), inner_participants.end());
        auto rng = make_rng(seed, "inner-folds", fold_index);
        for (std::size_t i = inner_participants.size(); i > 1; --i)
            std::swap(inner_participants[i - 1],
                      inner_participants[static_cast<std::size_t>(rng() % i)]);
        std::map<std::string, int> fold_of;
        for (std::size_t i = 0; i < inner_participants.size(); ++i)
            fold_of[inner_participants[i]] = static_cast<int>(i % kInnerFolds);
        manifest.train_participants = inner_participants;
        std::sort(manifest.train_participants.begin(), manifest.train_participants.end());

        // Score every grid point: mean validation R^2 over the inner folds.
        std::vector<double> grid_scores(grid_points.size(), 0.0);
        std::vector<int> grid_counts(grid_points.size(), 0);
        for (int inner = 0; inner < kInnerFolds; ++inner) {
            InnerSplit split;
            std::vector<Eigen::Index> train_rows, val_rows;
            for (Eigen::Index row : outer_train_rows) {
                const std::string& pid = table.participant_ids[static_cast<std::size_t>(row)];
                if (fold_of[pid] == inner)
                    val_rows.push_back(row);
                else
                    train_rows.push_back(row);
            }
            for (const auto& [pid, f] : fold_of)
                (f == inner ? split.validation_participants : split.train_participants).push_back(pid);
            manifest.inner_splits.push_back(split);
            if (val_rows.empty() || train_rows.empty()) continue;

            const MatrixXd train_X = select_rows(X, train_rows);
            const VectorXd train_y = select_rows(y, train_rows);
            const MatrixXd val_X = select_rows(X, val_rows);
            const VectorXd val_y = select_rows(y, val_rows);

            for (std::size_t g = 0; g < grid_points.size(); ++g) {
                if (grid_points[g].n_trees != checkpoints.front()) continue;  // one run per combo
                GbtParams combo = grid_points[g];
                combo.n_trees = checkpoints.back();
                BoostingRun run(train_X, train_y, combo);
                VectorXd val_pred = VectorXd::Constant(val_y.size(), run.model().base_prediction);
                std::size_t next_checkpoint = 0;
                for (int t = 1; t <= checkpoints.back(); ++t) {
                    run.boost_round();
                    for (Eigen::Index v = 0; v < val_X.rows(); ++v)
                        val_pred[v] += combo.learning_rate * tree_output(run.last_tree(), val_X, v);
                    if (next_checkpoint < checkpoints.size() && t == checkpoints[next_checkpoint]) {
                        // Find the grid point matching this combo + tree count.
                        for (std::size_t h = 0; h < grid_points.size(); ++h) {
                            const GbtParams& p = grid_points[h];
                            if (p.learning_rate == combo.learning_rate &&
                                p.max_depth == combo.max_depth &&
                                p.lambda_l2 == combo.lambda_l2 &&
                                p.min_samples_leaf == combo.min_samples_leaf &&
                                p.n_trees == checkpoints[next_checkpoint]) {
                                grid_scores[h] += safe_r2(val_y, val_pred);
                                grid_counts[h] += 1;
                            }
                        }
                        ++next_checkpoint;
                    }
                }
            }
        }

        std::size_t best = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < grid_points.size(); ++g) {
            const double score =
                grid_counts[g] > 0 ? grid_scores[g] / grid_counts[g]
                                   : -std::numeric_limits<double>::infinity();
            if (score > best_score) {
                best_score = score;
                best = g;
            }
        }
        fold.chosen = grid_points[best];

        try {
            const MatrixXd train_X = select_rows(X, outer_train_rows);
            const VectorXd train_y = select_rows(y, outer_train_rows);
            const GbtModel model = train_gbt(train_X, train_y, fold.chosen);
            const MatrixXd test_X = select_rows(X, test_rows);
            const VectorXd predicted = predict_gbt(model, test_X);
            const VectorXd actual = select_rows(y, test_rows);
            for (std::size_t i = 0; i < test_rows.size(); ++i)
                fold.predictions.push_back(
                    {held_out, table.clip_ids[static_cast<std::size_t>(test_rows[i])],
                     predicted[static_cast<Eigen::Index>(i)], actual[static_cast<Eigen::Index>(i)]});
            fold.report = metrics::evaluate(actual, predicted);
        } catch (const Error& e) {
            fold.ok = false;
            fold.warning = e.code();
        }
        result.folds[fold_index] = std::move(fold);
        result.manifests[fold_index] = std::move(manifest);
    });

    std::vector<adm::LopoFold> shim;
    for (const auto& fold : result.folds) {
        adm::LopoFold f;
        f.ok = fold.ok;
        f.report = fold.report;
        shim.push_back(f);
    }
    result.aggregate = adm::aggregate_reports(shim);
    return result;
}

void save_feature_table(const FeatureTable& table, const std::string& path,
                        const io::FileHeader& meta) {
    std::vector<std::string> header = {"participant_id", "clip_id", "arousal", "valence"};
    for (const auto& name : feature_names()) header.push_back(name);
    io::CsvWriter w(path, meta, header);
    for (Eigen::Index i = 0; i < table.X.rows(); ++i) {
        std::vector<std::string> row = {table.participant_ids[static_cast<std::size_t>(i)],
                                        table.clip_ids[static_cast<std::size_t>(i)],
                                        io::cell(table.arousal[i]), io::cell(table.valence[i])};
        for (Eigen::Index j = 0; j < table.X.cols(); ++j) row.push_back(io::cell(table.X(i, j)));
        w.row(row);
    }
}

FeatureTable load_feature_table(const std::string& path) {
    std::vector<std::string> expected = {"participant_id", "clip_id", "arousal", "valence"};
    for (const auto& name : feature_names()) expected.push_back(name);
    const io::CsvTable table = io::read_csv(path, expected);
    FeatureTable out;
    const auto n = static_cast<Eigen::Index>(table.rows.size());
    out.X.resize(n, kNumFeatures);
    out.arousal.resize(n);
    out.valence.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = static_cast<std::size_t>(i);
        out.participant_ids.push_back(table.str(row, 0));
        out.clip_ids.push_back(table.str(row, 1));
        out.arousal[i] = table.num(row, 2);
        out.valence[i] = table.num(row, 3);
        for (int j = 0; j < kNumFeatures; ++j) out.X(i, j) = table.num(row, 4 + j);
    }
    return out;
}

void save_gbt_model(const GbtModel& model, const std::string& path, const io::FileHeader& meta) {
    std::ofstream out(path);
    if (!out) throw DataError("output-error", "cannot write " + path);
    out << io::header_line(meta) << '\n';
    out << "pupilkit-gbt v1 " << model.trees.size() << ' ' << format_double(model.learning_rate)
        << ' ' << format_double(model.base_prediction) << ' ' << format_double(model.lambda_l2)
        << ' ' << model.n_features << '\n';
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
        out << "tree " << t << ' ' << model.trees[t].size() << '\n';
        for (const auto& node : model.trees[t]) {
            if (node.is_leaf())
                out << "leaf " << format_double(node.value) << '\n';
            else
                out << "split " << node.feature << ' ' << format_double(node.threshold) << ' '
                    << node.left << ' ' << node.right << '\n';
        }
    }
    if (!out) throw DataError("output-error", "write failed on " + path);
}

GbtModel load_gbt_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing-input", "cannot open " + path);
    GbtModel model;
    std::string line;
    std::size_t n_trees = 0;
    bool have_header = false;
    std::size_t nodes_expected = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (!have_header) {
            std::string version;
            if (word != "pupilkit-gbt" || !(ss >> version >> n_trees >> model.learning_rate >>
                                            model.base_prediction >> model.lambda_l2 >>
                                            model.n_features) ||
                version != "v1")
                throw DataError("csv-format", path + ": bad gbt header");
            have_header = true;
            continue;
        }
        if (word == "tree") {
            std::size_t index = 0;
            if (!(ss >> index >> nodes_expected) || index != model.trees.size())
                throw DataError("csv-format", path + ": bad tree line");
            model.trees.emplace_back();
            model.trees.back().reserve(nodes_expected);
        } else if (word == "leaf") {
            TreeNode node;
            if (!(ss >> node.value) || model.trees.empty())
                throw DataError("csv-format", path + ": bad leaf line");
            model.trees.back().push_back(node);
        } else if (word == "split") {
            TreeNode node;
            if (!(ss >> node.feature >> node.threshold >> node.left >> node.right) ||
                model.trees.empty())
                throw DataError("csv-format", path + ": bad split line");
            model.trees.back().push_back(node);
        } else {
            throw DataError("csv-format", path + ": unknown line '" + line + "'");
        }
    }
    if (model.trees.size() != n_trees)
        throw DataError("csv-format", path + ": tree count mismatch");
    return model;
}

void save_nested_metrics(const NestedLopoResult& result, const std::string& scope_prefix,
                         const std::string& path, const io::FileHeader& meta) {
    io::CsvWriter w(path, meta,
                    {"scope", "participant_id", "n", "r", "p", "r2", "nrmse", "chosen_params"});
    auto params_string = [](const GbtParams& p) {
        std::ostringstream ss;
        ss << "lr=" << p.learning_rate << ";depth=" << p.max_depth << ";trees=" << p.n_trees
           << ";lambda=" << p.lambda_l2 << ";min_leaf=" << p.min_samples_leaf;
        return ss.str();
    };
    for (const auto& fold : result.folds) {
        if (!fold.ok) {
            w.row({scope_prefix + "-fold-skipped", fold.participant_id, "0", "nan", "nan", "nan",
                   "nan", fold.warning});
            continue;
        }
        w.row({scope_prefix + "-fold", fold.participant_id, io::cell(fold.report.n),
               io::cell(fold.report.r), io::cell(fold.report.p), io::cell(fold.report.r2),
               io::cell(fold.report.nrmse), params_string(fold.chosen)});
    }
    const adm::Aggregate& agg = result.aggregate;
    w.row({scope_prefix + "-mean", "all", io::cell(agg.n_folds), io::cell(agg.r_mean),
           io::cell(agg.p_mean), io::cell(agg.r2_mean), io::cell(agg.nrmse_mean), ""});
    w.row({scope_prefix + "-sd", "all", io::cell(agg.n_folds), io::cell(agg.r_sd),
           io::cell(agg.p_max), io::cell(agg.r2_sd), io::cell(agg.nrmse_sd), ""});
}

}  // namespace pupilkit::gbt
