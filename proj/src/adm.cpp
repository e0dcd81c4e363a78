#include "pupilkit/adm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace pupilkit::adm {

std::vector<std::string> StudyDataset::participants() const {
    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (const auto& row : rows)
        if (seen.insert(row.participant_id).second) ids.push_back(row.participant_id);
    return ids;
}

AdmCoefficients fit_adm(VectorRef pupil_mm, VectorRef arousal, double epsilon_a) {
    const Eigen::Index n = pupil_mm.size();
    if (n != arousal.size()) throw DataError("invalid-input", "pupil/arousal length mismatch");
    if (n < 3) throw DataError("insufficient-data", "adm fit needs at least 3 pairs");
    if (!pupil_mm.allFinite() || !arousal.allFinite())
        throw DataError("invalid-input", "non-finite adm data");
    const VectorXd xc = arousal.array() - arousal.mean();
    const double sxx = xc.squaredNorm();
    if (sxx <= 0.0) throw DataError("insufficient-data", "arousal labels have zero variance");

    AdmCoefficients coeffs;
    coeffs.a = xc.dot(pupil_mm) / sxx;
    coeffs.b = pupil_mm.mean() - coeffs.a * arousal.mean();
    const VectorXd fitted = (coeffs.a * arousal.array() + coeffs.b).matrix();
    const double ss_tot = (pupil_mm.array() - pupil_mm.mean()).square().sum();
    coeffs.fit_r2 = ss_tot > 0 ? 1.0 - (pupil_mm - fitted).squaredNorm() / ss_tot : 0.0;
    if (std::fabs(coeffs.a) <= epsilon_a)
        throw NumericError("non-invertible-model",
                           "fitted slope " + format_double(coeffs.a) + " below invertibility floor");
    return coeffs;
}

double predict_arousal(double pupil_mm, const AdmCoefficients& coeffs) {
    if (std::fabs(coeffs.a) <= kEpsilonA)
        throw NumericError("non-invertible-model", "slope below invertibility floor");
    return (pupil_mm - coeffs.b) / coeffs.a;
}

namespace {

double signal_of(const StudyRow& row, Signal signal) {
    return signal == Signal::corrected ? row.ps_arousal_mm : row.ps_measured_mm;
}

}  // namespace

LopoResult lopo_evaluate(const StudyDataset& dataset, Signal signal) {
    const auto participants = dataset.participants();
    if (participants.size() < 3)
        throw DataError("insufficient-data", "lopo needs at least 3 participants");

    LopoResult result;
    for (const auto& held_out : participants) {
        std::vector<double> train_signal, train_label;
        std::vector<const StudyRow*> test_rows;
        FoldManifest manifest;
        manifest.held_out = held_out;
        std::set<std::string> train_ids;
        for (const auto& row : dataset.rows) {
            if (row.participant_id == held_out) {
                test_rows.push_back(&row);
            } else {
                train_signal.push_back(signal_of(row, signal));
                train_label.push_back(row.arousal);
                train_ids.insert(row.participant_id);
            }
        }
        manifest.train_participants.assign(train_ids.begin(), train_ids.end());
        result.manifests.push_back(manifest);
        if (test_rows.size() < 3)
            throw DataError("insufficient-data",
                            "participant " + held_out + " has fewer than 3 clips");

        LopoFold fold;
        fold.participant_id = held_out;
        try {
            const auto n = static_cast<Eigen::Index>(train_signal.size());
            fold.coeffs = fit_adm(Eigen::Map<const VectorXd>(train_signal.data(), n),
                                  Eigen::Map<const VectorXd>(train_label.data(), n));
            VectorXd predicted(static_cast<Eigen::Index>(test_rows.size()));
            VectorXd actual(static_cast<Eigen::Index>(test_rows.size()));
            for (std::size_t i = 0; i < test_rows.size(); ++i) {
                predicted[static_cast<Eigen::Index>(i)] =
                    predict_arousal(signal_of(*test_rows[i], signal), fold.coeffs);
                actual[static_cast<Eigen::Index>(i)] = test_rows[i]->arousal;
                fold.predictions.push_back({held_out, test_rows[i]->clip_id,
                                            predicted[static_cast<Eigen::Index>(i)],
                                            actual[static_cast<Eigen::Index>(i)]});
            }
            fold.report = metrics::evaluate(actual, predicted);
        } catch (const Error& e) {
            fold.ok = false;
            fold.warning = e.code();
        }
        result.folds.push_back(std::move(fold));
    }
    result.aggregate = aggregate_reports(result.folds);
    return result;
}

Aggregate aggregate_reports(const std::vector<LopoFold>& folds) {
    Aggregate agg;
    std::vector<double> rs, r2s, nrmses, ps;
    for (const auto& fold : folds) {
        if (!fold.ok) continue;
        rs.push_back(fold.report.r);
        r2s.push_back(fold.report.r2);
        nrmses.push_back(fold.report.nrmse);
        ps.push_back(fold.report.p);
    }
    agg.n_folds = static_cast<int>(rs.size());
    if (rs.empty()) return agg;
    auto mean_sd = [](const std::vector<double>& v) {
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0;
        for (double x : v) ss += (x - mean) * (x - mean);
        const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
        return std::pair<double, double>(mean, sd);
    };
    std::tie(agg.r_mean, agg.r_sd) = mean_sd(rs);
    std::tie(agg.r2_mean, agg.r2_sd) = mean_sd(r2s);
    std::tie(agg.nrmse_mean, agg.nrmse_sd) = mean_sd(nrmses);
    agg.p_mean = std::accumulate(ps.begin(), ps.end(), 0.0) / static_cast<double>(ps.size());
    agg.p_max = *std::max_element(ps.begin(), ps.end());
    return agg;
}

StudyDataset load_dataset(const std::string& path) {
    const io::CsvTable table =
        io::read_csv(path, {"participant_id", "clip_id", "ps_arousal_mm", "ps_measured_mm",
                            "arousal", "valence", "label_source"});
    StudyDataset dataset;
    dataset.rows.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        StudyRow row;
        row.participant_id = table.str(i, 0);
        row.clip_id = table.str(i, 1);
        row.ps_arousal_mm = table.num(i, 2);
        row.ps_measured_mm = table.num(i, 3);
        row.arousal = table.num(i, 4);
        row.valence = table.num(i, 5);
        row.label_source = table.str(i, 6);
        dataset.rows.push_back(std::move(row));
    }
    return dataset;
}

void save_dataset(const StudyDataset& dataset, const std::string& path, const io::FileHeader& meta) {
    io::CsvWriter w(path, meta,
                    {"participant_id", "clip_id", "ps_arousal_mm", "ps_measured_mm", "arousal",
                     "valence", "label_source"});
    for (const auto& row : dataset.rows)
        w.row({row.participant_id, row.clip_id, io::cell(row.ps_arousal_mm),
               io::cell(row.ps_measured_mm), io::cell(row.arousal), io::cell(row.valence),
               row.label_source});
}

void save_metrics_report(const LopoResult& result, const std::string& scope_prefix,
                         const std::string& path, const io::FileHeader& meta) {
    io::CsvWriter w(path, meta, {"scope", "participant_id", "n", "r", "p", "r2", "nrmse"});
    for (const auto& fold : result.folds) {
        if (!fold.ok) {
            w.row({scope_prefix + "-fold-skipped", fold.participant_id, "0", "nan", "nan", "nan",
                   "nan"});
            continue;
        }
        w.row({scope_prefix + "-fold", fold.participant_id, io::cell(fold.report.n),
               io::cell(fold.report.r), io::cell(fold.report.p), io::cell(fold.report.r2),
               io::cell(fold.report.nrmse)});
    }
    const Aggregate& agg = result.aggregate;
    w.row({scope_prefix + "-mean", "all", io::cell(agg.n_folds), io::cell(agg.r_mean),
           io::cell(agg.p_mean), io::cell(agg.r2_mean), io::cell(agg.nrmse_mean)});
    w.row({scope_prefix + "-sd", "all", io::cell(agg.n_folds), io::cell(agg.r_sd),
           io::cell(agg.p_max), io::cell(agg.r2_sd), io::cell(agg.nrmse_sd)});
}

void save_predictions(const std::vector<LopoFold>& folds, const std::string& path,
                      const io::FileHeader& meta) {
    io::CsvWriter w(path, meta, {"participant_id", "clip_id", "predicted", "actual"});
    for (const auto& fold : folds)
        for (const auto& p : fold.predictions)
            w.row({p.participant_id, p.clip_id, io::cell(p.predicted), io::cell(p.actual)});
}

}  // namespace pupilkit::adm
