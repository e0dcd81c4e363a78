#include "pupilkit/synth.hpp"

#include "pupilkit/csv.hpp"
#include "pupilkit/decouple.hpp"
#include "pupilkit/preprocess.hpp"
#include "pupilkit/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

namespace pupilkit::synth {

namespace fs = std::filesystem;
using luminance::RgbPercent;

void SynthConfig::validate() const {
    if (n_participants < 1 || n_clips < 2 || frames_per_clip < 6)
        throw ConfigError("config-error", "study dimensions too small");
    if (!(fps > 0) || !(trace_hz > 0))
        throw ConfigError("config-error", "rates must be positive");
    if (coeff_sigma < 0 || noise_sigma < 0 || rating_noise < 0 || calibration_noise < 0 ||
        blink_rate_hz < 0 || blink_len_samples < 1)
        throw ConfigError("config-error", "noise parameters must be nonnegative");
    if (confound < -1.0 || confound > 1.0)
        throw ConfigError("config-error", "confound must lie in [-1, 1]");
    if (!(arousal_gain >= 0))
        throw ConfigError("config-error", "arousal gain must be nonnegative");
}

std::uint64_t config_hash(const SynthConfig& c) {
    std::ostringstream ss;
    ss << c.seed << '|' << c.n_participants << '|' << c.n_clips << '|' << c.frames_per_clip << '|'
       << format_double(c.fps) << '|' << format_double(c.trace_hz) << '|'
       << format_double(c.coeff_sigma) << '|' << format_double(c.arousal_gain) << '|'
       << format_double(c.arousal_nonlinearity) << '|' << format_double(c.noise_sigma) << '|'
       << format_double(c.confound) << '|' << format_double(c.blink_rate_hz) << '|'
       << c.blink_len_samples << '|' << format_double(c.rating_noise) << '|'
       << format_double(c.calibration_noise) << '|' << format_double(c.lut_gamma) << '|'
       << format_double(c.lut_max_lux) << '|' << c.lut_levels;
    return fnv1a64(ss.str());
}

namespace {

std::string zero_pad(int v, int width) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

/// Circumplex loading of each questionnaire emotion on (valence, arousal).
struct EmotionArchetype {
    double valence, arousal;
};

constexpr std::array<EmotionArchetype, 12> kArchetypes = {{
    {1.00, 0.00},    // positive
    {-1.00, 0.00},   // negative
    {0.90, 0.35},    // happy
    {0.50, -0.90},   // calm
    {0.75, -0.40},   // content
    {0.70, 0.55},    // amused
    {0.35, 1.00},    // excited
    {-0.60, 0.85},   // angry
    {-0.75, -0.50},  // sad
    {-0.70, 0.35},   // disgusted
    {-0.55, 0.90},   // fearful
    {-0.30, -0.85},  // bored
}};

VectorXd spaced_labels(int n, std::mt19937_64& rng) {
    VectorXd labels(n);
    for (int i = 0; i < n; ++i)
        labels[i] = n > 1 ? -2.0 + 4.0 * i / (n - 1) : 0.0;
    for (int i = n - 1; i > 0; --i)
        std::swap(labels[i], labels[static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(i + 1))]);
    return labels;
}

std::vector<int> ranks_of(const VectorXd& v) {
    std::vector<int> order(static_cast<std::size_t>(v.size()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return v[a] < v[b]; });
    std::vector<int> rank(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) rank[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
    return rank;
}

}  // namespace

SynthStudy generate_study(const SynthConfig& config, const std::string& out_dir) {
    config.validate();
    const io::FileHeader meta{config_hash(config), config.seed};

    fs::create_directories(out_dir);
    fs::create_directories(fs::path(out_dir) / "clips");
    fs::create_directories(fs::path(out_dir) / "traces");
    fs::create_directories(fs::path(out_dir) / "calibration");

    SynthStudy study;
    study.root = out_dir;
    study.lut = luminance::build_synthetic_lut(config.lut_gamma, config.lut_max_lux,
                                               config.lut_levels);
    luminance::save_lut(study.lut, (fs::path(out_dir) / "lut.txt").string(), meta);

    for (int p = 0; p < config.n_participants; ++p)
        study.participant_ids.push_back("p" + zero_pad(p + 1, 2));
    for (int c = 0; c < config.n_clips; ++c)
        study.clip_ids.push_back("c" + zero_pad(c + 1, 2));

    // Clip labels on the [-2, 2] grid, shuffled independently per axis.
    {
        auto rng_a = make_rng(config.seed, "arousal-labels");
        auto rng_v = make_rng(config.seed, "valence-labels");
        study.arousal_labels = spaced_labels(config.n_clips, rng_a);
        study.valence_labels = spaced_labels(config.n_clips, rng_v);
    }

    const double dur_s = config.frames_per_clip / config.fps;
    const double frame_ms = 1000.0 / config.fps;

    // Salient windows.
    std::vector<decouple::SalientInterval> salient(static_cast<std::size_t>(config.n_clips));
    for (int c = 0; c < config.n_clips; ++c) {
        auto rng = make_rng(config.seed, "salient", static_cast<std::uint64_t>(c));
        const double t0 = 0.25 * dur_s * uniform01(rng);
        const double len = (0.35 + 0.30 * uniform01(rng)) * dur_s;
        const double t1 = std::min(t0 + len, dur_s);
        salient[static_cast<std::size_t>(c)] = {study.clip_ids[static_cast<std::size_t>(c)],
                                                {{t0, t1}}};
    }
    decouple::save_salient_intervals(salient, (fs::path(out_dir) / "salient.csv").string(), meta);

    // Brightness percentile per clip: rank-mix of the arousal label with a
    // random permutation, oriented so the light-driven pupil component
    // carries the requested sign of correlation with the label. At zero
    // confound the permutation is redrawn until the sample correlation is
    // genuinely small.
    VectorXd brightness(config.n_clips);
    {
        const auto label_rank = ranks_of(study.arousal_labels);
        auto rng = make_rng(config.seed, "confound");
        const double rho = std::fabs(config.confound);
        const double denom = std::max(config.n_clips - 1, 1);
        std::vector<int> noise_rank(static_cast<std::size_t>(config.n_clips));
        std::iota(noise_rank.begin(), noise_rank.end(), 0);
        for (int attempt = 0; attempt < 1000; ++attempt) {
            for (int i = config.n_clips - 1; i > 0; --i)
                std::swap(noise_rank[static_cast<std::size_t>(i)],
                          noise_rank[rng() % static_cast<std::uint64_t>(i + 1)]);
            for (int c = 0; c < config.n_clips; ++c) {
                const double u = label_rank[static_cast<std::size_t>(c)] / denom;
                const double eta = noise_rank[static_cast<std::size_t>(c)] / denom;
                const double aligned = config.confound < 0 ? u : 1.0 - u;
                brightness[c] = rho * aligned + (1.0 - rho) * eta;
            }
            if (rho > 0) break;
            const VectorXd bx = brightness.array() - brightness.mean();
            const VectorXd by = study.arousal_labels.array() - study.arousal_labels.mean();
            const double r = bx.dot(by) / std::sqrt(bx.squaredNorm() * by.squaredNorm());
            if (std::fabs(r) < 0.12) break;
        }
    }

    // Clip color schedules, shared by every participant.
    std::vector<std::vector<RgbPercent>> clip_rgb(static_cast<std::size_t>(config.n_clips));
    std::vector<std::vector<preprocess::FrameWindow>> clip_times(
        static_cast<std::size_t>(config.n_clips));
    // The brightness span keeps the light-driven pupil spread across clips
    // comparable to the arousal effect; that is the regime where an
    // uncorrected signal genuinely confuses the two components.
    for (int c = 0; c < config.n_clips; ++c) {
        auto rng = make_rng(config.seed, "clip-schedule", static_cast<std::uint64_t>(c));
        const double base = 30.0 + 32.0 * brightness[c];
        const double amp = 6.0 + 4.0 * uniform01(rng);
        const double freq = 0.1 + 0.3 * uniform01(rng);
        const double phase = 2.0 * M_PI * uniform01(rng);
        const double tint_r = 4.0 * normal01(rng);
        const double tint_g = 4.0 * normal01(rng);
        const double tint_b = 4.0 * normal01(rng);
        auto& rgb = clip_rgb[static_cast<std::size_t>(c)];
        auto& times = clip_times[static_cast<std::size_t>(c)];
        for (int f = 0; f < config.frames_per_clip; ++f) {
            const double t = (f + 0.5) * frame_ms / 1000.0;
            const double wave = amp * std::sin(2.0 * M_PI * freq * t + phase);
            auto level = [&](double tint) { return std::clamp(base + wave + tint, 1.0, 99.0); };
            rgb.push_back({level(tint_r), level(tint_g), level(tint_b)});
            times.push_back({f * frame_ms, (f + 1) * frame_ms});
        }
        luminance::save_frame_means(
            [&] {
                std::vector<luminance::FrameLuma> frames;
                for (int f = 0; f < config.frames_per_clip; ++f)
                    frames.push_back({f, rgb[static_cast<std::size_t>(f)],
                                      study.lut.query(rgb[static_cast<std::size_t>(f)])});
                return frames;
            }(),
            (fs::path(out_dir) / "clips" / (study.clip_ids[static_cast<std::size_t>(c)] + "_frames.csv"))
                .string(),
            meta);
        preprocess::save_frame_times(
            times,
            (fs::path(out_dir) / "clips" / (study.clip_ids[static_cast<std::size_t>(c)] + "_times.csv"))
                .string(),
            meta);
    }

    // Participant ground-truth models share one dark-adapted pupil size per
    // participant, so the shared-black calibration point is consistent
    // across channels.
    const plr::PlrModelSet base_model = plr::group_reference_model();
    const double base_dark = base_model.gray.a + base_model.gray.d;
    std::vector<plr::CombinedWeights> true_weights;
    for (int p = 0; p < config.n_participants; ++p) {
        auto rng = make_rng(config.seed, "participant-model", static_cast<std::uint64_t>(p));
        plr::PlrModelSet model = base_model;
        const double dark = base_dark * (1.0 + 0.5 * config.coeff_sigma * normal01(rng));
        for (int ch = 0; ch < 4; ++ch) {
            plr::PlrCoefficients& k = model.channel(ch);
            k.a = std::max(0.1, k.a * (1.0 + config.coeff_sigma * normal01(rng)));
            k.c = k.c * (1.0 + config.coeff_sigma * normal01(rng));
            k.d = dark - k.a;
        }
        model.provenance = study.participant_ids[static_cast<std::size_t>(p)];
        study.true_models.push_back(model);

        plr::CombinedWeights w;
        double raw[4];
        double total = 0;
        for (double& v : raw) {
            v = 0.25 + 0.1 * std::fabs(normal01(rng));
            total += v;
        }
        w.a_gray = raw[0] / total;
        w.a_red = raw[1] / total;
        w.a_green = raw[2] / total;
        w.a_blue = 1.0 - w.a_gray - w.a_red - w.a_green;
        w.k = 1.0 + 0.05 * normal01(rng);
        w.c = 0.05 * normal01(rng);
        true_weights.push_back(w);
    }

    // Calibration responses: primary-color and gray points come from the
    // matching channel curve, mixed points from the true combined model.
    for (int p = 0; p < config.n_participants; ++p) {
        auto rng = make_rng(config.seed, "calibration", static_cast<std::uint64_t>(p));
        const plr::PlrModelSet& model = study.true_models[static_cast<std::size_t>(p)];
        std::vector<plr::CalibrationSample> samples;
        const double levels[3] = {0.0, 50.0, 100.0};
        for (double r : levels)
            for (double g : levels)
                for (double b : levels) {
                    const RgbPercent rgb{r, g, b};
                    const double lux = study.lut.query(rgb);
                    double pupil;
                    const bool gray_like = r == g && g == b;
                    const int nonzero = int(r > 0) + int(g > 0) + int(b > 0);
                    if (gray_like) {
                        pupil = model.gray.evaluate(lux);
                    } else if (nonzero == 1) {
                        const int ch = r > 0 ? 0 : (g > 0 ? 1 : 2);
                        pupil = model.channel(ch).evaluate(lux);
                    } else {
                        pupil = plr::predict_combined(
                            true_weights[static_cast<std::size_t>(p)],
                            plr::combined_predictors(model, rgb, study.lut));
                    }
                    pupil += config.calibration_noise * normal01(rng);
                    samples.push_back({rgb, pupil});
                }
        plr::save_calibration_samples(
            samples,
            (fs::path(out_dir) / "calibration" /
             (study.participant_ids[static_cast<std::size_t>(p)] + ".csv"))
                .string(),
            meta);
    }

    // Ratings: archetype mixture of the clip labels with per-participant
    // axis sensitivities, rounded onto the 0-9 scale.
    {
        scaling::RatingTensor ratings;
        ratings.participant_ids = study.participant_ids;
        ratings.clip_ids = study.clip_ids;
        for (int p = 0; p < config.n_participants; ++p) {
            auto rng = make_rng(config.seed, "ratings", static_cast<std::uint64_t>(p));
            const double sens_v = 0.7 + 0.6 * uniform01(rng);
            const double sens_a = 0.7 + 0.6 * uniform01(rng);
            MatrixXd scores(config.n_clips, 12);
            for (int c = 0; c < config.n_clips; ++c)
                for (int e = 0; e < 12; ++e) {
                    const auto& arch = kArchetypes[static_cast<std::size_t>(e)];
                    const double raw = 4.5 +
                                       0.55 * (sens_v * arch.valence * study.valence_labels[c] +
                                               sens_a * arch.arousal * study.arousal_labels[c]) +
                                       config.rating_noise * normal01(rng);
                    scores(c, e) = std::clamp(std::round(raw), 0.0, 9.0);
                }
            ratings.scores.push_back(std::move(scores));
        }
        scaling::save_ratings(ratings, (fs::path(out_dir) / "ratings.csv").string(), meta);
    }

    // Traces and truth.
    io::CsvWriter truth((fs::path(out_dir) / "truth.csv").string(), meta,
                        {"participant_id", "clip_id", "frame_index", "ps_luminosity_mm",
                         "ps_arousal_mm", "arousal_label", "valence_label"});
    const auto n_samples = static_cast<int>(std::floor(dur_s * config.trace_hz));
    study.true_luminosity.resize(static_cast<std::size_t>(config.n_participants));
    study.true_arousal.resize(static_cast<std::size_t>(config.n_participants));
    for (int p = 0; p < config.n_participants; ++p) {
        const plr::PlrModelSet& model = study.true_models[static_cast<std::size_t>(p)];
        auto& lum_rows = study.true_luminosity[static_cast<std::size_t>(p)];
        auto& arousal_rows = study.true_arousal[static_cast<std::size_t>(p)];
        for (int c = 0; c < config.n_clips; ++c) {
            auto rng = make_rng(config.seed, "trace",
                                static_cast<std::uint64_t>(p) * 10007u + static_cast<std::uint64_t>(c));
            const auto& rgb = clip_rgb[static_cast<std::size_t>(c)];
            const auto& window = salient[static_cast<std::size_t>(c)].intervals_s.front();
            const double label = study.arousal_labels[c];
            const double shaped =
                label + config.arousal_nonlinearity * label * label;
            const double amplitude = config.arousal_gain * shaped;

            VectorXd lum(config.frames_per_clip), arousal(config.frames_per_clip);
            for (int f = 0; f < config.frames_per_clip; ++f) {
                lum[f] = plr::predict_combined(
                    true_weights[static_cast<std::size_t>(p)],
                    plr::combined_predictors(model, rgb[static_cast<std::size_t>(f)], study.lut));
                const double t = (f + 0.5) * frame_ms / 1000.0;
                double bump = 0.0;
                if (t >= window.first && t <= window.second) {
                    const double phase = (t - window.first) / (window.second - window.first);
                    bump = 0.5 * (1.0 - std::cos(2.0 * M_PI * phase));
                }
                arousal[f] = amplitude * bump;
                truth.row({study.participant_ids[static_cast<std::size_t>(p)],
                           study.clip_ids[static_cast<std::size_t>(c)], io::cell(f),
                           io::cell(lum[f]), io::cell(arousal[f]), io::cell(label),
                           io::cell(study.valence_labels[c])});
            }

            preprocess::RawPupilTrace trace;
            trace.t_ms.resize(n_samples);
            trace.left_mm.resize(n_samples);
            trace.right_mm.resize(n_samples);
            trace.gaze_x = VectorXd::Constant(n_samples, 400.0);
            trace.gaze_y = VectorXd::Constant(n_samples, 300.0);
            for (int i = 0; i < n_samples; ++i) {
                const double t = i * 1000.0 / config.trace_hz;
                trace.t_ms[i] = t;
                const int f = std::min(static_cast<int>(t / frame_ms), config.frames_per_clip - 1);
                const double value = lum[f] + arousal[f];
                trace.left_mm[i] = std::max(0.1, value + config.noise_sigma * normal01(rng));
                trace.right_mm[i] = std::max(0.1, value + config.noise_sigma * normal01(rng));
            }
            // Sentinel runs standing in for blinks.
            const double p_start = config.blink_rate_hz / config.trace_hz;
            int blinked = 0;
            for (int i = 1; i + config.blink_len_samples < n_samples - 1; ++i) {
                if (uniform01(rng) >= p_start) continue;
                if (blinked + config.blink_len_samples > n_samples / 4) break;
                for (int s = 0; s < config.blink_len_samples; ++s) {
                    trace.left_mm[i + s] = -1.0;
                    trace.right_mm[i + s] = -1.0;
                }
                blinked += config.blink_len_samples;
                i += config.blink_len_samples;
            }
            preprocess::save_raw_trace(
                trace,
                (fs::path(out_dir) / "traces" /
                 (study.participant_ids[static_cast<std::size_t>(p)] + "_" +
                  study.clip_ids[static_cast<std::size_t>(c)] + ".csv"))
                    .string(),
                meta);
            lum_rows.push_back(std::move(lum));
            arousal_rows.push_back(std::move(arousal));
        }
    }

    return study;
}

}  // namespace pupilkit::synth
