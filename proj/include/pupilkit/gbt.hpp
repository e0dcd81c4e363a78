#pragma once

#include "pupilkit/adm.hpp"
#include "pupilkit/common.hpp"
#include "pupilkit/csv.hpp"
#include "pupilkit/decouple.hpp"
#include "pupilkit/metrics.hpp"

#include <string>
#include <vector>

namespace pupilkit::gbt {

inline constexpr int kNumFeatures = 36;

/// Canonical order of the 36 features: signal-major (measured, luminosity,
/// arousal), then derivative order (0, 1, 2), then moment (mean, variance,
/// skewness, kurtosis).
const std::vector<std::string>& feature_names();

/// Moment and derivative features of the three pupil signals over the
/// salient window. Derivatives are central differences on the concatenated
/// salient frames (one-sided at the ends); near-constant windows report
/// zero skewness and kurtosis.
VectorXd extract_features(const decouple::ClipDecomposition& decomp,
                          const decouple::SalientInterval& salient);

/// Which feature columns a run may use. Uncorrected runs default to the
/// measured-only set; the lenient variant adds the luminosity block.
enum class FeatureSet { all36, measured12, measured_luminosity24 };

std::vector<int> feature_columns(FeatureSet set);

struct TreeNode {
    int feature = -1;      // -1 marks a leaf
    double threshold = 0;  // x[feature] <= threshold goes left
    int left = -1, right = -1;
    double value = 0;      // leaf output

    bool is_leaf() const { return feature < 0; }
};

struct GbtParams {
    double learning_rate = 0.1;
    int max_depth = 3;
    int n_trees = 100;
    double lambda_l2 = 0.0;
    int min_samples_leaf = 2;
};

struct GbtModel {
    std::vector<std::vector<TreeNode>> trees;
    double learning_rate = 0.1;
    double base_prediction = 0;
    double lambda_l2 = 0;
    int n_features = 0;
};

/// Squared-error gradient boosting: every round fits one depth-limited
/// regression tree to the residuals by exhaustive variance-reduction splits
/// over all features and midpoint thresholds (ties broken by lowest feature
/// index, then lowest threshold); leaf values are shrunk by lambda_l2.
/// Training loss never increases between rounds.
GbtModel train_gbt(const MatrixXd& X, VectorRef y, const GbtParams& params);

VectorXd predict_gbt(const GbtModel& model, const MatrixXd& X);

/// Candidate values per hyperparameter; enumeration order is the nested
/// loop learning_rate > max_depth > n_trees > lambda_l2 > min_samples_leaf.
struct HyperGrid {
    std::vector<double> learning_rates = {0.05, 0.1, 0.3};
    std::vector<int> max_depths = {2, 3, 4};
    std::vector<int> n_trees = {50, 100, 200};
    std::vector<double> lambda_l2 = {0.0, 1.0};
    std::vector<int> min_samples_leaf = {2, 5};

    std::vector<GbtParams> enumerate() const;
};

/// Feature rows keyed by (participant, clip) with both regression targets.
struct FeatureTable {
    std::vector<std::string> participant_ids;
    std::vector<std::string> clip_ids;
    MatrixXd X;        // rows x 36
    VectorXd arousal;
    VectorXd valence;

    std::vector<std::string> participants() const;
};

enum class Target { arousal, valence };

struct InnerSplit {
    std::vector<std::string> train_participants;
    std::vector<std::string> validation_participants;
};

struct NestedFoldManifest {
    std::string held_out;
    std::vector<std::string> train_participants;
    std::vector<InnerSplit> inner_splits;
};

struct NestedFold {
    std::string participant_id;
    GbtParams chosen;
    metrics::EvalReport report;
    std::vector<adm::PredictionRow> predictions;
    bool ok = true;
    std::string warning;
};

struct NestedLopoResult {
    std::vector<NestedFold> folds;
    adm::Aggregate aggregate;
    std::vector<NestedFoldManifest> manifests;
};

/// Outer leave-one-participant-out loop with an inner participant-grouped
/// five-fold cross-validation scoring every grid point by mean validation
/// R^2 (first grid point wins ties). The winner is retrained on the full
/// inner set and scored on the held-out participant.
NestedLopoResult nested_lopo(const FeatureTable& table, Target target, FeatureSet feature_set,
                             const HyperGrid& grid, std::uint64_t seed, int jobs = 1);

// --- file formats ---

void save_feature_table(const FeatureTable& table, const std::string& path,
                        const io::FileHeader& meta);
FeatureTable load_feature_table(const std::string& path);

/// Text serialization, one node per line in preorder.
void save_gbt_model(const GbtModel& model, const std::string& path, const io::FileHeader& meta);
GbtModel load_gbt_model(const std::string& path);

void save_nested_metrics(const NestedLopoResult& result, const std::string& scope_prefix,
                         const std::string& path, const io::FileHeader& meta);

}  // namespace pupilkit::gbt
