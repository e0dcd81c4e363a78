#pragma once

#include "pupilkit/common.hpp"
#include "pupilkit/luminance.hpp"
#include "pupilkit/plr.hpp"

#include <string>
#include <vector>

namespace pupilkit::synth {

/// Generator knobs. `confound` is the target rank correlation between each
/// clip's light-driven pupil amplitude and its arousal label: negative
/// values schedule bright content on high-arousal clips so the light
/// response opposes the arousal dilation (the failure mode an uncorrected
/// signal cannot survive).
struct SynthConfig {
    std::uint64_t seed = 7;
    int n_participants = 12;
    int n_clips = 16;
    int frames_per_clip = 200;
    double fps = 25.0;
    double trace_hz = 60.0;

    double coeff_sigma = 0.05;          // relative perturbation of a, c, dark size
    double arousal_gain = 0.35;         // mm per label unit
    double arousal_nonlinearity = 0.0;  // quadratic distortion of the label -> amplitude map
    double noise_sigma = 0.03;          // mm, per eye and sample
    double confound = 0.0;              // in [-1, 1], see above
    double blink_rate_hz = 0.1;         // expected sentinel runs per second
    int blink_len_samples = 4;
    double rating_noise = 0.3;          // questionnaire score jitter
    double calibration_noise = 0.0;     // mm on calibration means

    double lut_gamma = 2.2;
    double lut_max_lux = 30.0;
    int lut_levels = 11;

    void validate() const;
};

/// Ground truth kept alongside the emitted files: measured traces are
/// luminosity + arousal + noise by construction.
struct SynthStudy {
    luminance::LuminanceLUT lut;
    std::vector<std::string> participant_ids;
    std::vector<std::string> clip_ids;
    VectorXd arousal_labels;  // per clip, in [-2, 2]
    VectorXd valence_labels;
    std::vector<plr::PlrModelSet> true_models;                // per participant
    std::vector<std::vector<VectorXd>> true_luminosity;       // [participant][clip], per frame
    std::vector<std::vector<VectorXd>> true_arousal;          // [participant][clip], per frame
    std::string root;
};

std::uint64_t config_hash(const SynthConfig& config);

/// Writes a complete synthetic study under out_dir in the exact formats the
/// pipeline consumes (lut.txt, clips/, traces/, calibration/, ratings.csv,
/// salient.csv) plus truth.csv, all byte-deterministic for a given config.
SynthStudy generate_study(const SynthConfig& config, const std::string& out_dir);

}  // namespace pupilkit::synth
