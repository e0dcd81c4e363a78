#pragma once

#include "pupilkit/adm.hpp"
#include "pupilkit/common.hpp"
#include "pupilkit/gbt.hpp"
#include "pupilkit/synth.hpp"

#include <string>
#include <vector>

namespace pupilkit::pipeline {

/// Everything a run needs, loaded from a `key = value` config file with
/// [paths]/[options]/[grid]/[synth] sections. Paths default to the
/// canonical study layout under data_dir.
struct RunConfig {
    // [paths]
    std::string data_dir = "study";
    std::string output_dir = "out";
    std::string lut;           // default <data_dir>/lut.txt
    std::string labels;        // external label file (label_source = external)
    std::string group_model;   // default: built-in group coefficients

    // [options]
    double pad_ms = 2.0;
    int gaze_radius_px = 300;
    std::string combined_fit_scope = "clip";      // clip | participant
    std::string label_source = "self-report";     // self-report | external
    std::string label_scope = "group";            // group | participant
    std::string feature_set = "strict";           // strict | lenient (uncorrected runs)
    std::uint64_t seed = 7;
    int jobs = 0;  // 0 = hardware concurrency
    double lut_gamma = 2.2;
    double lut_max_lux = 30.0;
    int lut_levels = 11;
    std::vector<std::string> gbt_targets = {"arousal"};
    std::vector<std::string> gbt_signals = {"corrected", "uncorrected"};

    gbt::HyperGrid grid;
    synth::SynthConfig synth;

    std::string lut_path() const;
    std::string canonical_string() const;
    std::uint64_t hash() const;
    io::FileHeader file_header() const { return {hash(), seed}; }

    void set(const std::string& section, const std::string& key, const std::string& value);
    void validate() const;
};

RunConfig load_run_config(const std::string& path);

/// Names accepted by run_subcommand, in documented order.
const std::vector<std::string>& subcommand_names();

/// Dispatches one subcommand: build-lut, calibrate, decouple, labels,
/// fit-adm, fit-gbt, evaluate, synth or report. Writes the subcommand's
/// artifacts plus a JSON manifest; on failure every partial output is
/// removed before the error propagates.
void run_subcommand(const std::string& name, const RunConfig& config);

// Individual runners (exposed for tests and the acceptance suite). Each
// returns the list of files it wrote.
std::vector<std::string> run_build_lut(const RunConfig& config);
std::vector<std::string> run_calibrate(const RunConfig& config);
std::vector<std::string> run_decouple(const RunConfig& config);
std::vector<std::string> run_labels(const RunConfig& config);
std::vector<std::string> run_fit_adm(const RunConfig& config);
std::vector<std::string> run_evaluate(const RunConfig& config);
std::vector<std::string> run_fit_gbt(const RunConfig& config);
std::vector<std::string> run_synth(const RunConfig& config);
std::vector<std::string> run_report(const RunConfig& config);

/// synth + calibrate + decouple + labels + evaluate (the ADM chain).
void run_adm_pipeline(const RunConfig& config);

/// Study discovery helpers (sorted, deterministic).
std::vector<std::string> list_participants(const RunConfig& config);
std::vector<std::string> list_clips(const RunConfig& config);

}  // namespace pupilkit::pipeline
