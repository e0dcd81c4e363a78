#include "pupilkit/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

struct CliOptions {
    std::string config_path;
    std::string data_dir, output_dir, lut, labels;
    std::string seed, jobs, confound;
};

pupilkit::pipeline::RunConfig resolve_config(const CliOptions& opts) {
    pupilkit::pipeline::RunConfig config;
    if (!opts.config_path.empty())
        config = pupilkit::pipeline::load_run_config(opts.config_path);
    if (!opts.data_dir.empty()) config.set("paths", "data_dir", opts.data_dir);
    if (!opts.output_dir.empty()) config.set("paths", "output_dir", opts.output_dir);
    if (!opts.lut.empty()) config.set("paths", "lut", opts.lut);
    if (!opts.labels.empty()) config.set("paths", "labels", opts.labels);
    if (!opts.seed.empty()) config.set("options", "seed", opts.seed);
    if (!opts.jobs.empty()) config.set("options", "jobs", opts.jobs);
    if (!opts.confound.empty()) config.set("synth", "confound", opts.confound);
    config.validate();
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pupilkit: luminosity-corrected pupillometry pipeline"};
    app.require_subcommand(1);

    CliOptions opts;
    app.add_option("-c,--config", opts.config_path, "run configuration file");
    app.add_option("--data-dir", opts.data_dir, "study root directory");
    app.add_option("--out", opts.output_dir, "output directory");
    app.add_option("--lut", opts.lut, "luminance lookup table file");
    app.add_option("--labels", opts.labels, "external labels file");
    app.add_option("--seed", opts.seed, "random seed");
    app.add_option("--jobs", opts.jobs, "worker threads (0 = hardware)");
    app.add_option("--confound", opts.confound, "synthetic confound strength");

    for (const auto& name : pupilkit::pipeline::subcommand_names())
        app.add_subcommand(name, "run the " + name + " stage");
    auto* all = app.add_subcommand("run-all", "synth + calibrate + decouple + labels + evaluate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // command-line misuse is a config error
    }

    try {
        const auto config = resolve_config(opts);
        if (all->parsed()) {
            pupilkit::pipeline::run_adm_pipeline(config);
            return 0;
        }
        for (const auto& name : pupilkit::pipeline::subcommand_names())
            if (app.get_subcommand(name)->parsed()) {
                pupilkit::pipeline::run_subcommand(name, config);
                return 0;
            }
        std::fprintf(stderr, "error code=config-error msg=\"no subcommand\"\n");
        return 2;
    } catch (const pupilkit::Error& e) {
        std::fprintf(stderr, "error code=%s msg=\"%s\"\n", e.code().c_str(), e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error code=internal msg=\"%s\"\n", e.what());
        return 4;
    }
}
