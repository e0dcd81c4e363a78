#include "pupilkit/pipeline.hpp"

#include "pupilkit/decouple.hpp"
#include "pupilkit/luminance.hpp"
#include "pupilkit/metrics.hpp"
#include "pupilkit/plr.hpp"
#include "pupilkit/preprocess.hpp"
#include "pupilkit/scaling.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace pupilkit::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : value) {
        if (c == ',') {
            if (!trim(cur).empty()) out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
    return out;
}

double parse_num(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config-error", "bad numeric value for " + key + ": '" + value + "'");
    }
}

int parse_int(const std::string& key, const std::string& value) {
    const double v = parse_num(key, value);
    if (v != std::floor(v)) throw ConfigError("config-error", key + " must be an integer");
    return static_cast<int>(v);
}

std::vector<double> parse_num_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    for (const auto& item : split_list(value)) out.push_back(parse_num(key, item));
    if (out.empty()) throw ConfigError("config-error", key + " must not be empty");
    return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    for (const auto& item : split_list(value)) out.push_back(parse_int(key, item));
    if (out.empty()) throw ConfigError("config-error", key + " must not be empty");
    return out;
}

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

/// Collects the paths a runner writes; anything not committed is removed
/// when the runner unwinds, so failures leave no partial outputs.
class OutputGuard {
public:
    ~OutputGuard() {
        if (committed_) return;
        for (const auto& path : files_) {
            std::error_code ec;
            fs::remove(path, ec);
        }
    }

    const std::string& add(const std::string& path) {
        files_.push_back(path);
        return files_.back();
    }

    std::vector<std::string> commit() {
        committed_ = true;
        return std::move(files_);
    }

private:
    std::vector<std::string> files_;
    bool committed_ = false;
};

plr::PlrModelSet group_model_of(const RunConfig& config) {
    return config.group_model.empty() ? plr::group_reference_model()
                                      : plr::load_model_set(config.group_model);
}

std::vector<std::string> list_stem_matches(const std::string& dir, const std::string& suffix) {
    std::vector<std::string> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
            out.push_back(name.substr(0, name.size() - suffix.size()));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::string RunConfig::lut_path() const {
    return lut.empty() ? join(data_dir, "lut.txt") : lut;
}

void RunConfig::set(const std::string& section, const std::string& key, const std::string& value) {
    const std::string full = section.empty() ? key : section + "." + key;
    if (section == "paths") {
        if (key == "data_dir") data_dir = value;
        else if (key == "output_dir") output_dir = value;
        else if (key == "lut") lut = value;
        else if (key == "labels") labels = value;
        else if (key == "group_model") group_model = value;
        else throw ConfigError("config-error", "unknown config key " + full);
    } else if (section == "options") {
        if (key == "pad_ms") pad_ms = parse_num(full, value);
        else if (key == "gaze_radius_px") gaze_radius_px = parse_int(full, value);
        else if (key == "combined_fit_scope") combined_fit_scope = value;
        else if (key == "label_source") label_source = value;
        else if (key == "label_scope") label_scope = value;
        else if (key == "feature_set") feature_set = value;
        else if (key == "seed") seed = static_cast<std::uint64_t>(parse_num(full, value));
        else if (key == "jobs") jobs = parse_int(full, value);
        else if (key == "lut_gamma") lut_gamma = parse_num(full, value);
        else if (key == "lut_max_lux") lut_max_lux = parse_num(full, value);
        else if (key == "lut_levels") lut_levels = parse_int(full, value);
        else if (key == "gbt_targets") gbt_targets = split_list(value);
        else if (key == "gbt_signals") gbt_signals = split_list(value);
        else throw ConfigError("config-error", "unknown config key " + full);
    } else if (section == "grid") {
        if (key == "learning_rates") grid.learning_rates = parse_num_list(full, value);
        else if (key == "max_depths") grid.max_depths = parse_int_list(full, value);
        else if (key == "n_trees") grid.n_trees = parse_int_list(full, value);
        else if (key == "lambda_l2") grid.lambda_l2 = parse_num_list(full, value);
        else if (key == "min_samples_leaf") grid.min_samples_leaf = parse_int_list(full, value);
        else throw ConfigError("config-error", "unknown config key " + full);
    } else if (section == "synth") {
        if (key == "n_participants") synth.n_participants = parse_int(full, value);
        else if (key == "n_clips") synth.n_clips = parse_int(full, value);
        else if (key == "frames_per_clip") synth.frames_per_clip = parse_int(full, value);
        else if (key == "fps") synth.fps = parse_num(full, value);
        else if (key == "trace_hz") synth.trace_hz = parse_num(full, value);
        else if (key == "coeff_sigma") synth.coeff_sigma = parse_num(full, value);
        else if (key == "arousal_gain") synth.arousal_gain = parse_num(full, value);
        else if (key == "arousal_nonlinearity") synth.arousal_nonlinearity = parse_num(full, value);
        else if (key == "noise_sigma") synth.noise_sigma = parse_num(full, value);
        else if (key == "confound") synth.confound = parse_num(full, value);
        else if (key == "blink_rate_hz") synth.blink_rate_hz = parse_num(full, value);
        else if (key == "blink_len_samples") synth.blink_len_samples = parse_int(full, value);
        else if (key == "rating_noise") synth.rating_noise = parse_num(full, value);
        else if (key == "calibration_noise") synth.calibration_noise = parse_num(full, value);
        else throw ConfigError("config-error", "unknown config key " + full);
    } else {
        throw ConfigError("config-error", "unknown config section [" + section + "]");
    }
}

void RunConfig::validate() const {
    if (combined_fit_scope != "clip" && combined_fit_scope != "participant")
        throw ConfigError("config-error", "combined_fit_scope must be clip or participant");
    if (label_source != "self-report" && label_source != "external")
        throw ConfigError("config-error", "label_source must be self-report or external");
    if (label_source == "external" && labels.empty())
        throw ConfigError("config-error", "label_source=external requires a labels path");
    if (label_scope != "group" && label_scope != "participant")
        throw ConfigError("config-error", "label_scope must be group or participant");
    if (feature_set != "strict" && feature_set != "lenient")
        throw ConfigError("config-error", "feature_set must be strict or lenient");
    if (!(pad_ms >= 0)) throw ConfigError("config-error", "pad_ms must be nonnegative");
    if (gaze_radius_px <= 0) throw ConfigError("config-error", "gaze_radius_px must be positive");
    for (const auto& t : gbt_targets)
        if (t != "arousal" && t != "valence")
            throw ConfigError("config-error", "gbt_targets entries must be arousal or valence");
    for (const auto& s : gbt_signals)
        if (s != "corrected" && s != "uncorrected")
            throw ConfigError("config-error", "gbt_signals entries must be corrected or uncorrected");
}

std::string RunConfig::canonical_string() const {
    std::ostringstream ss;
    ss << "data_dir=" << data_dir << "\noutput_dir=" << output_dir << "\nlut=" << lut
       << "\nlabels=" << labels << "\ngroup_model=" << group_model << "\npad_ms=" << pad_ms
       << "\ngaze_radius_px=" << gaze_radius_px << "\ncombined_fit_scope=" << combined_fit_scope
       << "\nlabel_source=" << label_source << "\nlabel_scope=" << label_scope
       << "\nfeature_set=" << feature_set << "\nseed=" << seed << "\nlut_gamma=" << lut_gamma
       << "\nlut_max_lux=" << lut_max_lux << "\nlut_levels=" << lut_levels;
    ss << "\ngbt_targets=";
    for (const auto& t : gbt_targets) ss << t << ',';
    ss << "\ngbt_signals=";
    for (const auto& s : gbt_signals) ss << s << ',';
    auto list = [&ss](const char* name, const auto& values) {
        ss << '\n' << name << '=';
        for (const auto& v : values) ss << v << ',';
    };
    list("grid.learning_rates", grid.learning_rates);
    list("grid.max_depths", grid.max_depths);
    list("grid.n_trees", grid.n_trees);
    list("grid.lambda_l2", grid.lambda_l2);
    list("grid.min_samples_leaf", grid.min_samples_leaf);
    ss << "\nsynth=" << synth::config_hash(synth);
    return ss.str();
}

std::uint64_t RunConfig::hash() const { return fnv1a64(canonical_string()); }

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config-error", "cannot open config " + path);
    RunConfig config;
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text[0] == '#' || text[0] == ';') continue;
        if (text.front() == '[' && text.back() == ']') {
            section = trim(text.substr(1, text.size() - 2));
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config-error",
                              path + ":" + std::to_string(line_no) + ": expected key = value");
        config.set(section, trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
    }
    config.validate();
    return config;
}

std::vector<std::string> list_participants(const RunConfig& config) {
    auto ids = list_stem_matches(join(config.data_dir, "calibration"), ".csv");
    if (ids.empty())
        throw DataError("missing-input",
                        "no calibration files under " + join(config.data_dir, "calibration"));
    return ids;
}

std::vector<std::string> list_clips(const RunConfig& config) {
    auto ids = list_stem_matches(join(config.data_dir, "clips"), "_frames.csv");
    if (ids.empty())
        throw DataError("missing-input", "no clip frame files under " + join(config.data_dir, "clips"));
    return ids;
}

namespace {

struct ClipData {
    std::vector<luminance::RgbPercent> frame_rgb;  // effective mean color
    std::vector<preprocess::FrameWindow> times;
    VectorXd measured;
};

/// One participant/clip pair: raw trace -> blink mask -> imputation ->
/// frame alignment, plus effective frame colors (gaze-region rule when
/// per-frame PPM files exist, plain frame means otherwise).
ClipData load_clip_data(const RunConfig& config, const luminance::LuminanceLUT& lut,
                        const std::string& participant, const std::string& clip) {
    const std::string clips_dir = join(config.data_dir, "clips");
    ClipData data;
    data.times = preprocess::load_frame_times(join(clips_dir, clip + "_times.csv"));

    const auto trace_path = join(join(config.data_dir, "traces"), participant + "_" + clip + ".csv");
    const auto raw = preprocess::load_raw_trace(trace_path);
    const auto mask = preprocess::mark_blinks(raw, config.pad_ms);
    const auto clean = preprocess::impute_linear(raw, mask);
    const auto aligned = preprocess::align_to_frames(clean, data.times);
    data.measured = aligned.pupil_mm;

    const std::string ppm_dir = join(clips_dir, clip + "_ppm");
    if (fs::is_directory(ppm_dir)) {
        for (std::size_t f = 0; f < data.times.size(); ++f) {
            const auto frame = luminance::load_ppm(join(ppm_dir, std::to_string(f) + ".ppm"));
            luminance::GazePoint gaze{aligned.gaze_x[static_cast<Eigen::Index>(f)],
                                      aligned.gaze_y[static_cast<Eigen::Index>(f)],
                                      aligned.gaze_valid[f]};
            data.frame_rgb.push_back(
                luminance::effective_mean_rgb(frame, gaze, lut, config.gaze_radius_px));
        }
    } else {
        const auto frames = luminance::load_frame_means(join(clips_dir, clip + "_frames.csv"), lut);
        if (frames.size() != data.times.size())
            throw DataError("invalid-input", "frame means and frame times disagree for clip " + clip);
        for (const auto& f : frames) data.frame_rgb.push_back(f.mean_rgb);
    }
    return data;
}

}  // namespace

std::vector<std::string> run_build_lut(const RunConfig& config) {
    ensure_dir(config.output_dir);
    OutputGuard guard;
    const auto lut = luminance::build_synthetic_lut(config.lut_gamma, config.lut_max_lux,
                                                    config.lut_levels);
    luminance::save_lut(lut, guard.add(join(config.output_dir, "lut.txt")), config.file_header());
    return guard.commit();
}

std::vector<std::string> run_calibrate(const RunConfig& config) {
    const auto lut = luminance::load_lut(config.lut_path());
    const auto group = group_model_of(config);
    const auto participants = list_participants(config);
    const std::string models_dir = join(config.output_dir, "models");
    ensure_dir(models_dir);
    OutputGuard guard;
    for (const auto& pid : participants) {
        const auto samples =
            plr::load_calibration_samples(join(join(config.data_dir, "calibration"), pid + ".csv"));
        const auto model = plr::calibrate_participant(group, samples, lut, pid);
        plr::save_model_set(model, guard.add(join(models_dir, pid + ".txt")), config.file_header());
    }
    return guard.commit();
}

std::vector<std::string> run_decouple(const RunConfig& config) {
    const auto lut = luminance::load_lut(config.lut_path());
    const auto group = group_model_of(config);
    const auto participants = list_participants(config);
    const auto clips = list_clips(config);
    const auto salient = decouple::load_salient_intervals(join(config.data_dir, "salient.csv"));
    const std::string decomp_dir = join(config.output_dir, "decomp");
    ensure_dir(decomp_dir);

    std::map<std::string, plr::PlrModelSet> models;
    const std::string models_dir = join(config.output_dir, "models");
    for (const auto& pid : participants) {
        const std::string model_path = join(models_dir, pid + ".txt");
        if (fs::exists(model_path)) {
            models[pid] = plr::load_model_set(model_path);
        } else {
            const auto samples = plr::load_calibration_samples(
                join(join(config.data_dir, "calibration"), pid + ".csv"));
            models[pid] = plr::calibrate_participant(group, samples, lut, pid);
        }
    }

    struct Row {
        std::string participant, clip;
        double arousal_mean = 0, measured_mean = 0;
        decouple::ClipDecomposition decomp;
    };
    std::vector<Row> rows(participants.size() * clips.size());

    if (config.combined_fit_scope == "clip") {
        parallel_for(rows.size(), config.jobs, [&](std::size_t i) {
            const auto& pid = participants[i / clips.size()];
            const auto& cid = clips[i % clips.size()];
            const auto data = load_clip_data(config, lut, pid, cid);
            auto decomp =
                decouple::decompose_clip(data.frame_rgb, data.times, models.at(pid), lut,
                                         data.measured);
            const auto& window = salient.at(cid);
            rows[i] = {pid, cid, decouple::salient_mean(decomp.arousal, window, decomp.frame_mid_s),
                       decouple::salient_mean(decomp.measured, window, decomp.frame_mid_s),
                       std::move(decomp)};
        });
    } else {
        // Participant scope: pool every clip's frames, fit once, then apply.
        parallel_for(participants.size(), config.jobs, [&](std::size_t p) {
            const auto& pid = participants[p];
            std::vector<ClipData> clip_data;
            std::vector<plr::CombinedPredictors> pooled;
            std::vector<double> pooled_measured;
            for (const auto& cid : clips) {
                auto data = load_clip_data(config, lut, pid, cid);
                for (std::size_t f = 0; f < data.frame_rgb.size(); ++f) {
                    pooled.push_back(plr::combined_predictors(models.at(pid), data.frame_rgb[f], lut));
                    pooled_measured.push_back(data.measured[static_cast<Eigen::Index>(f)]);
                }
                clip_data.push_back(std::move(data));
            }
            const auto weights = plr::fit_combined(
                pooled,
                Eigen::Map<const VectorXd>(pooled_measured.data(),
                                           static_cast<Eigen::Index>(pooled_measured.size())));
            for (std::size_t c = 0; c < clips.size(); ++c) {
                const auto& data = clip_data[c];
                auto decomp = decouple::decompose_clip_with_weights(
                    data.frame_rgb, data.times, models.at(pid), lut, data.measured, weights);
                const auto& window = salient.at(clips[c]);
                rows[p * clips.size() + c] = {
                    pid, clips[c],
                    decouple::salient_mean(decomp.arousal, window, decomp.frame_mid_s),
                    decouple::salient_mean(decomp.measured, window, decomp.frame_mid_s),
                    std::move(decomp)};
            }
        });
    }

    OutputGuard guard;
    for (const auto& row : rows)
        decouple::save_decomposition(
            row.decomp, guard.add(join(decomp_dir, row.participant + "_" + row.clip + ".csv")),
            config.file_header());
    io::CsvWriter summary(guard.add(join(config.output_dir, "summary.csv")), config.file_header(),
                          {"participant_id", "clip_id", "ps_arousal_mm", "ps_measured_mm"});
    for (const auto& row : rows)
        summary.row(
            {row.participant, row.clip, io::cell(row.arousal_mean), io::cell(row.measured_mean)});
    // Fitted combined weights per unit, plus the residual mean, so intercept
    // absorption stays observable.
    io::CsvWriter weights(guard.add(join(config.output_dir, "weights.csv")), config.file_header(),
                          {"participant_id", "clip_id", "a_gray", "a_red", "a_green", "a_blue",
                           "k", "c", "residual_mean_mm", "degenerate"});
    for (const auto& row : rows) {
        const auto& w = row.decomp.weights;
        weights.row({row.participant, row.clip, io::cell(w.a_gray), io::cell(w.a_red),
                     io::cell(w.a_green), io::cell(w.a_blue), io::cell(w.k), io::cell(w.c),
                     io::cell(row.decomp.arousal.mean()),
                     row.decomp.degenerate_fit ? "1" : "0"});
    }
    return guard.commit();
}

std::vector<std::string> run_labels(const RunConfig& config) {
    ensure_dir(config.output_dir);
    OutputGuard guard;
    const std::string path = guard.add(join(config.output_dir, "labels.csv"));
    if (config.label_source == "external") {
        const auto table = scaling::load_labels(config.labels);
        scaling::save_labels(table, path, config.file_header());
        return guard.commit();
    }
    const auto ratings = scaling::load_ratings(join(config.data_dir, "ratings.csv"));
    const auto distances = scaling::dissimilarities(ratings);
    scaling::IndscalOptions options;
    options.seed = config.seed;
    const auto space =
        scaling::indscal_fit(distances, options, scaling::anchors_from_ratings(ratings));
    scaling::LabelTable table;
    table.clip_ids = ratings.clip_ids;
    table.values = scaling::labels(space);
    scaling::save_labels(table, path, config.file_header());

    if (config.label_scope == "participant") {
        io::CsvWriter w(guard.add(join(config.output_dir, "labels_by_participant.csv")),
                        config.file_header(), {"participant_id", "clip_id", "valence", "arousal"});
        for (std::size_t p = 0; p < ratings.n_participants(); ++p) {
            const MatrixXd individual = scaling::participant_labels(space, p);
            for (std::size_t c = 0; c < ratings.n_clips(); ++c)
                w.row({ratings.participant_ids[p], ratings.clip_ids[c],
                       io::cell(individual(static_cast<Eigen::Index>(c), 0)),
                       io::cell(individual(static_cast<Eigen::Index>(c), 1))});
        }
    }
    return guard.commit();
}

namespace {

/// Joins the decouple summary with the labels into the study dataset.
adm::StudyDataset build_dataset(const RunConfig& config) {
    const io::CsvTable summary =
        io::read_csv(join(config.output_dir, "summary.csv"),
                     {"participant_id", "clip_id", "ps_arousal_mm", "ps_measured_mm"});
    const auto labels = scaling::load_labels(join(config.output_dir, "labels.csv"));
    std::map<std::string, std::pair<double, double>> by_clip;  // clip -> (valence, arousal)
    for (std::size_t i = 0; i < labels.clip_ids.size(); ++i)
        by_clip[labels.clip_ids[i]] = {labels.values(static_cast<Eigen::Index>(i), 0),
                                       labels.values(static_cast<Eigen::Index>(i), 1)};

    std::map<std::pair<std::string, std::string>, std::pair<double, double>> per_participant;
    const std::string per_path = join(config.output_dir, "labels_by_participant.csv");
    if (config.label_scope == "participant" && fs::exists(per_path)) {
        const io::CsvTable per =
            io::read_csv(per_path, {"participant_id", "clip_id", "valence", "arousal"});
        for (std::size_t i = 0; i < per.rows.size(); ++i)
            per_participant[{per.str(i, 0), per.str(i, 1)}] = {per.num(i, 2), per.num(i, 3)};
    }

    adm::StudyDataset dataset;
    const std::string source = config.label_source == "external" ? "external" : "self-report";
    for (std::size_t i = 0; i < summary.rows.size(); ++i) {
        adm::StudyRow row;
        row.participant_id = summary.str(i, 0);
        row.clip_id = summary.str(i, 1);
        row.ps_arousal_mm = summary.num(i, 2);
        row.ps_measured_mm = summary.num(i, 3);
        const auto key = std::make_pair(row.participant_id, row.clip_id);
        if (auto it = per_participant.find(key); it != per_participant.end()) {
            row.valence = it->second.first;
            row.arousal = it->second.second;
        } else {
            const auto found = by_clip.find(row.clip_id);
            if (found == by_clip.end())
                throw DataError("missing-data", "no label for clip " + row.clip_id);
            row.valence = found->second.first;
            row.arousal = found->second.second;
        }
        row.label_source = source;
        dataset.rows.push_back(std::move(row));
    }
    return dataset;
}

nlohmann::json manifest_folds(const std::vector<adm::FoldManifest>& manifests) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& m : manifests)
        out.push_back({{"held_out", m.held_out}, {"train", m.train_participants}});
    return out;
}

}  // namespace

std::vector<std::string> run_fit_adm(const RunConfig& config) {
    const auto dataset = build_dataset(config);
    OutputGuard guard;
    const std::string path = guard.add(join(config.output_dir, "adm_model.txt"));
    std::ofstream out(path);
    if (!out) throw DataError("output-error", "cannot write " + path);
    out << io::header_line(config.file_header()) << '\n';
    out << "pupilkit-adm v1\n";
    for (const auto* signal : {"corrected", "uncorrected"}) {
        VectorXd pupil(static_cast<Eigen::Index>(dataset.rows.size()));
        VectorXd label(static_cast<Eigen::Index>(dataset.rows.size()));
        for (std::size_t i = 0; i < dataset.rows.size(); ++i) {
            pupil[static_cast<Eigen::Index>(i)] = std::string(signal) == "corrected"
                                                      ? dataset.rows[i].ps_arousal_mm
                                                      : dataset.rows[i].ps_measured_mm;
            label[static_cast<Eigen::Index>(i)] = dataset.rows[i].arousal;
        }
        const auto coeffs = adm::fit_adm(pupil, label);
        out << signal << ' ' << format_double(coeffs.a) << ' ' << format_double(coeffs.b) << ' '
            << format_double(coeffs.fit_r2) << '\n';
    }
    if (!out) throw DataError("output-error", "write failed on " + path);
    return guard.commit();
}

std::vector<std::string> run_evaluate(const RunConfig& config) {
    const auto dataset = build_dataset(config);
    OutputGuard guard;
    adm::save_dataset(dataset, guard.add(join(config.output_dir, "dataset.csv")),
                      config.file_header());

    nlohmann::json folds_json;
    for (const auto* name : {"corrected", "uncorrected"}) {
        const auto signal = std::string(name) == "corrected" ? adm::Signal::corrected
                                                             : adm::Signal::uncorrected;
        const auto result = adm::lopo_evaluate(dataset, signal);
        adm::save_metrics_report(
            result, std::string("adm-") + name,
            guard.add(join(config.output_dir, std::string("adm_metrics_") + name + ".csv")),
            config.file_header());
        adm::save_predictions(
            result.folds,
            guard.add(join(config.output_dir, std::string("adm_predictions_") + name + ".csv")),
            config.file_header());
        folds_json[name] = manifest_folds(result.manifests);
    }
    const std::string folds_path = guard.add(join(config.output_dir, "adm_folds.json"));
    std::ofstream folds_out(folds_path);
    folds_out << io::header_line(config.file_header()) << '\n' << folds_json.dump(2) << '\n';
    if (!folds_out) throw DataError("output-error", "write failed on " + folds_path);
    return guard.commit();
}

std::vector<std::string> run_fit_gbt(const RunConfig& config) {
    const auto dataset = build_dataset(config);
    const auto salient = decouple::load_salient_intervals(join(config.data_dir, "salient.csv"));

    std::map<std::string, std::vector<preprocess::FrameWindow>> times;
    for (const auto& cid : list_clips(config))
        times[cid] =
            preprocess::load_frame_times(join(join(config.data_dir, "clips"), cid + "_times.csv"));

    gbt::FeatureTable table;
    const auto n = static_cast<Eigen::Index>(dataset.rows.size());
    table.X.resize(n, gbt::kNumFeatures);
    table.arousal.resize(n);
    table.valence.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = dataset.rows[static_cast<std::size_t>(i)];
        const auto decomp = decouple::load_decomposition(
            join(join(config.output_dir, "decomp"), row.participant_id + "_" + row.clip_id + ".csv"),
            times.at(row.clip_id));
        table.X.row(i) = gbt::extract_features(decomp, salient.at(row.clip_id)).transpose();
        table.participant_ids.push_back(row.participant_id);
        table.clip_ids.push_back(row.clip_id);
        table.arousal[i] = row.arousal;
        table.valence[i] = row.valence;
    }
    OutputGuard guard;
    gbt::save_feature_table(table, guard.add(join(config.output_dir, "features.csv")),
                            config.file_header());

    nlohmann::json folds_json;
    for (const auto& signal : config.gbt_signals) {
        const auto feature_set =
            signal == "corrected"
                ? gbt::FeatureSet::all36
                : (config.feature_set == "strict" ? gbt::FeatureSet::measured12
                                                  : gbt::FeatureSet::measured_luminosity24);
        for (const auto& target_name : config.gbt_targets) {
            const auto target =
                target_name == "arousal" ? gbt::Target::arousal : gbt::Target::valence;
            const auto result =
                gbt::nested_lopo(table, target, feature_set, config.grid, config.seed, config.jobs);
            const std::string stem = "gbt_" + signal + "_" + target_name;
            gbt::save_nested_metrics(result, "gbt-" + signal + "-" + target_name,
                                     guard.add(join(config.output_dir, stem + "_metrics.csv")),
                                     config.file_header());
            io::CsvWriter pred(guard.add(join(config.output_dir, stem + "_predictions.csv")),
                               config.file_header(),
                               {"participant_id", "clip_id", "predicted", "actual"});
            for (const auto& fold : result.folds)
                for (const auto& p : fold.predictions)
                    pred.row({p.participant_id, p.clip_id, io::cell(p.predicted),
                              io::cell(p.actual)});

            nlohmann::json folds = nlohmann::json::array();
            for (const auto& m : result.manifests) {
                nlohmann::json inner = nlohmann::json::array();
                for (const auto& split : m.inner_splits)
                    inner.push_back({{"train", split.train_participants},
                                     {"validation", split.validation_participants}});
                folds.push_back({{"held_out", m.held_out},
                                 {"train", m.train_participants},
                                 {"inner_splits", inner}});
            }
            folds_json[signal + "/" + target_name] = folds;

            // Final model on the full table with the most frequently chosen
            // parameters (ties resolved toward the grid enumeration order).
            const auto grid_points = config.grid.enumerate();
            std::vector<int> votes(grid_points.size(), 0);
            for (const auto& fold : result.folds)
                for (std::size_t g = 0; g < grid_points.size(); ++g) {
                    const auto& c = fold.chosen;
                    const auto& p = grid_points[g];
                    if (p.learning_rate == c.learning_rate && p.max_depth == c.max_depth &&
                        p.n_trees == c.n_trees && p.lambda_l2 == c.lambda_l2 &&
                        p.min_samples_leaf == c.min_samples_leaf) {
                        ++votes[g];
                        break;
                    }
                }
            const auto best = static_cast<std::size_t>(
                std::max_element(votes.begin(), votes.end()) - votes.begin());
            const auto cols = gbt::feature_columns(feature_set);
            MatrixXd X(table.X.rows(), static_cast<Eigen::Index>(cols.size()));
            for (std::size_t j = 0; j < cols.size(); ++j)
                X.col(static_cast<Eigen::Index>(j)) = table.X.col(cols[j]);
            const auto model =
                gbt::train_gbt(X, target == gbt::Target::arousal ? table.arousal : table.valence,
                               grid_points[best]);
            gbt::save_gbt_model(model, guard.add(join(config.output_dir, stem + "_model.txt")),
                                config.file_header());
        }
    }
    const std::string folds_path = guard.add(join(config.output_dir, "gbt_folds.json"));
    std::ofstream folds_out(folds_path);
    folds_out << io::header_line(config.file_header()) << '\n' << folds_json.dump(2) << '\n';
    if (!folds_out) throw DataError("output-error", "write failed on " + folds_path);
    return guard.commit();
}

std::vector<std::string> run_synth(const RunConfig& config) {
    // Snapshot existing files so a failed generation can be rolled back
    // without touching anything that was already there.
    std::set<std::string> before;
    if (fs::exists(config.data_dir))
        for (const auto& entry : fs::recursive_directory_iterator(config.data_dir))
            if (entry.is_regular_file()) before.insert(entry.path().string());

    synth::SynthConfig synth_config = config.synth;
    synth_config.seed = config.seed;
    synth_config.lut_gamma = config.lut_gamma;
    synth_config.lut_max_lux = config.lut_max_lux;
    synth_config.lut_levels = config.lut_levels;
    try {
        synth::generate_study(synth_config, config.data_dir);
    } catch (...) {
        if (fs::exists(config.data_dir))
            for (const auto& entry : fs::recursive_directory_iterator(config.data_dir))
                if (entry.is_regular_file() && !before.count(entry.path().string())) {
                    std::error_code ec;
                    fs::remove(entry.path(), ec);
                }
        throw;
    }

    // The generator rewrites its whole file set, so every file under the
    // study root counts as an output even on reruns.
    std::vector<std::string> outputs;
    for (const auto& entry : fs::recursive_directory_iterator(config.data_dir))
        if (entry.is_regular_file()) outputs.push_back(entry.path().string());
    std::sort(outputs.begin(), outputs.end());
    return outputs;
}

std::vector<std::string> run_report(const RunConfig& config) {
    struct Source {
        std::string model, signal, target, predictions, metrics;
    };
    std::vector<Source> sources = {
        {"adm", "corrected", "arousal", join(config.output_dir, "adm_predictions_corrected.csv"),
         join(config.output_dir, "adm_metrics_corrected.csv")},
        {"adm", "uncorrected", "arousal",
         join(config.output_dir, "adm_predictions_uncorrected.csv"),
         join(config.output_dir, "adm_metrics_uncorrected.csv")},
    };
    for (const auto& signal : config.gbt_signals)
        for (const auto& target : config.gbt_targets)
            sources.push_back(
                {"gbt", signal, target,
                 join(config.output_dir, "gbt_" + signal + "_" + target + "_predictions.csv"),
                 join(config.output_dir, "gbt_" + signal + "_" + target + "_metrics.csv")});

    OutputGuard guard;
    io::CsvWriter pred(guard.add(join(config.output_dir, "report_predictions.csv")),
                       config.file_header(),
                       {"model", "signal", "target", "participant_id", "clip_id", "predicted",
                        "actual"});
    io::CsvWriter metrics_out(guard.add(join(config.output_dir, "report_metrics.csv")),
                              config.file_header(),
                              {"model", "signal", "target", "scope", "participant_id", "n", "r",
                               "p", "r2", "nrmse"});
    bool found_any = false;
    for (const auto& source : sources) {
        if (!fs::exists(source.predictions) || !fs::exists(source.metrics)) continue;
        found_any = true;
        const auto predictions = io::read_csv(source.predictions);
        for (std::size_t i = 0; i < predictions.rows.size(); ++i)
            pred.row({source.model, source.signal, source.target, predictions.str(i, 0),
                      predictions.str(i, 1), predictions.str(i, 2), predictions.str(i, 3)});
        const auto metrics_in = io::read_csv(source.metrics);
        for (std::size_t i = 0; i < metrics_in.rows.size(); ++i)
            metrics_out.row({source.model, source.signal, source.target, metrics_in.str(i, 0),
                             metrics_in.str(i, 1), metrics_in.str(i, 2), metrics_in.str(i, 3),
                             metrics_in.str(i, 4), metrics_in.str(i, 5), metrics_in.str(i, 6)});
    }
    if (!found_any)
        throw DataError("missing-input", "no evaluation outputs found under " + config.output_dir);
    return guard.commit();
}

const std::vector<std::string>& subcommand_names() {
    static const std::vector<std::string> names = {"build-lut", "calibrate", "decouple",
                                                   "labels",    "fit-adm",   "fit-gbt",
                                                   "evaluate",  "synth",     "report"};
    return names;
}

namespace {

std::vector<std::string> manifest_inputs(const std::string& name, const RunConfig& config) {
    std::vector<std::string> inputs;
    auto add_if_exists = [&](const std::string& path) {
        if (fs::exists(path) && fs::is_regular_file(path)) inputs.push_back(path);
    };
    if (name == "calibrate" || name == "decouple") {
        add_if_exists(config.lut_path());
        if (fs::is_directory(join(config.data_dir, "calibration")))
            for (const auto& pid : list_participants(config))
                add_if_exists(join(join(config.data_dir, "calibration"), pid + ".csv"));
    }
    if (name == "decouple" || name == "fit-gbt") add_if_exists(join(config.data_dir, "salient.csv"));
    if (name == "labels") {
        add_if_exists(join(config.data_dir, "ratings.csv"));
        if (!config.labels.empty()) add_if_exists(config.labels);
    }
    if (name == "fit-adm" || name == "evaluate" || name == "fit-gbt") {
        add_if_exists(join(config.output_dir, "summary.csv"));
        add_if_exists(join(config.output_dir, "labels.csv"));
    }
    std::sort(inputs.begin(), inputs.end());
    return inputs;
}

}  // namespace

void run_subcommand(const std::string& name, const RunConfig& config) {
    config.validate();
    std::vector<std::string> (*runner)(const RunConfig&) = nullptr;
    if (name == "build-lut") runner = run_build_lut;
    else if (name == "calibrate") runner = run_calibrate;
    else if (name == "decouple") runner = run_decouple;
    else if (name == "labels") runner = run_labels;
    else if (name == "fit-adm") runner = run_fit_adm;
    else if (name == "fit-gbt") runner = run_fit_gbt;
    else if (name == "evaluate") runner = run_evaluate;
    else if (name == "synth") runner = run_synth;
    else if (name == "report") runner = run_report;
    else throw ConfigError("config-error", "unknown subcommand '" + name + "'");

    const auto inputs = manifest_inputs(name, config);
    const auto outputs = runner(config);

    nlohmann::json manifest;
    manifest["tool"] = "pupilkit";
    manifest["version"] = kVersion;
    manifest["subcommand"] = name;
    manifest["seed"] = config.seed;
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                  static_cast<unsigned long long>(config.hash()));
    manifest["config_hash"] = hash_hex;
    nlohmann::json input_json = nlohmann::json::object();
    for (const auto& path : inputs) {
        char h[32];
        std::snprintf(h, sizeof h, "%016llx", static_cast<unsigned long long>(fnv1a64_file(path)));
        input_json[path] = h;
    }
    manifest["inputs"] = input_json;
    auto sorted_outputs = outputs;
    std::sort(sorted_outputs.begin(), sorted_outputs.end());
    manifest["outputs"] = sorted_outputs;

    ensure_dir(config.output_dir);
    const std::string manifest_path = join(config.output_dir, name + "_manifest.json");
    std::ofstream out(manifest_path);
    if (!out) throw DataError("output-error", "cannot write " + manifest_path);
    out << manifest.dump(2) << '\n';
}

void run_adm_pipeline(const RunConfig& config) {
    run_subcommand("synth", config);
    run_subcommand("calibrate", config);
    run_subcommand("decouple", config);
    run_subcommand("labels", config);
    run_subcommand("evaluate", config);
}

}  // namespace pupilkit::pipeline
