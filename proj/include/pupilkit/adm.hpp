#pragma once

#include "pupilkit/common.hpp"
#include "pupilkit/csv.hpp"
#include "pupilkit/metrics.hpp"

#include <string>
#include <vector>

namespace pupilkit::adm {

/// Linear pupil-arousal relation: pupil = a * arousal + b. Inverted for
/// prediction, so |a| must stay above the invertibility floor.
struct AdmCoefficients {
    double a = 0;       // mm per arousal unit
    double b = 0;       // mm
    double fit_r2 = 0;
};

inline constexpr double kEpsilonA = 1e-6;

/// One (participant, clip) observation: salient-window pupil summaries plus
/// its labels.
struct StudyRow {
    std::string participant_id;
    std::string clip_id;
    double ps_arousal_mm = 0;
    double ps_measured_mm = 0;
    double arousal = 0;
    double valence = 0;
    std::string label_source = "self-report";
};

struct StudyDataset {
    std::vector<StudyRow> rows;

    std::vector<std::string> participants() const;  // distinct, insertion order
};

enum class Signal { corrected, uncorrected };

/// Ordinary least squares of pupil on arousal.
AdmCoefficients fit_adm(VectorRef pupil_mm, VectorRef arousal, double epsilon_a = kEpsilonA);

/// Inverse of the fitted relation: (pupil - b) / a.
double predict_arousal(double pupil_mm, const AdmCoefficients& coeffs);

struct PredictionRow {
    std::string participant_id;
    std::string clip_id;
    double predicted = 0;
    double actual = 0;
};

struct FoldManifest {
    std::string held_out;
    std::vector<std::string> train_participants;
};

struct LopoFold {
    std::string participant_id;
    AdmCoefficients coeffs;
    metrics::EvalReport report;
    std::vector<PredictionRow> predictions;
    bool ok = true;
    std::string warning;
};

/// Mean and standard deviation across usable folds.
struct Aggregate {
    double r_mean = 0, r_sd = 0;
    double r2_mean = 0, r2_sd = 0;
    double nrmse_mean = 0, nrmse_sd = 0;
    double p_mean = 0, p_max = 0;
    int n_folds = 0;
};

struct LopoResult {
    std::vector<LopoFold> folds;
    Aggregate aggregate;
    std::vector<FoldManifest> manifests;
};

/// Leave-one-participant-out evaluation: the model is fitted on everyone
/// else's pooled (signal, arousal) pairs and inverted to predict the held
/// out participant clip by clip. Non-invertible folds are flagged and left
/// out of the aggregate.
LopoResult lopo_evaluate(const StudyDataset& dataset, Signal signal);

Aggregate aggregate_reports(const std::vector<LopoFold>& folds);

// --- file formats ---

/// `participant_id,clip_id,ps_arousal_mm,ps_measured_mm,arousal,valence,label_source`.
StudyDataset load_dataset(const std::string& path);
void save_dataset(const StudyDataset& dataset, const std::string& path, const io::FileHeader& meta);

/// `scope,participant_id,n,r,p,r2,nrmse` metric rows (per fold + aggregate).
void save_metrics_report(const LopoResult& result, const std::string& scope_prefix,
                         const std::string& path, const io::FileHeader& meta);

/// `participant_id,clip_id,predicted,actual`.
void save_predictions(const std::vector<LopoFold>& folds, const std::string& path,
                      const io::FileHeader& meta);

}  // namespace pupilkit::adm
