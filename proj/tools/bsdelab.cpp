// bsdelab <pipeline> --config <file> [--seed S] [--workers W] [--out DIR]
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bsdelab/config.hpp"
#include "bsdelab/parallel.hpp"
#include "bsdelab/runner.hpp"

int main(int argc, char** argv) {
    using namespace bsdelab;
    CLI::App app{"Singular-terminal BSDE experiments"};
    std::string pipeline, config_path, preset_name, out;
    std::optional<std::uint64_t> seed;
    int workers = 1;
    bool dump = false;
    app.add_option("pipeline", pipeline,
                   "simulate | solve | continuity | density | bound-check | verify-all | presets")
        ->required();
    auto* cfg_opt = app.add_option("--config", config_path, "JSON config file");
    app.add_option("--preset", preset_name, "shipped preset instead of a config file")->excludes(cfg_opt);
    app.add_option("--seed", seed, "override mc.seed");
    app.add_option("--workers", workers, "worker threads")->check(CLI::Range(1, 256));
    app.add_option("--out", out, "output directory (BSDELAB_OUT overrides)");
    app.add_flag("--dump", dump, "with 'presets --preset NAME': print the preset as JSON");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (pipeline == "presets") {
            if (dump) {
                if (preset_name.empty()) throw ConfigError("--dump needs --preset NAME");
                std::cout << config_to_json(preset(preset_name)).dump(2) << '\n';
            } else {
                for (const auto& n : preset_names()) std::cout << n << '\n';
            }
            return kExitOk;
        }
        if (std::find(pipeline_names().begin(), pipeline_names().end(), pipeline) == pipeline_names().end())
            throw ConfigError("unknown pipeline '" + pipeline + "'");
        ExperimentConfig cfg;
        if (!preset_name.empty()) cfg = preset(preset_name);
        else if (!config_path.empty()) cfg = config_from_file(config_path);
        else throw ConfigError("--config or --preset is required");
        cfg.pipeline = pipeline;
        if (seed) cfg.mc.seed = *seed;
        if (!out.empty()) cfg.output_dir = out;
        if (const char* env = std::getenv("BSDELAB_OUT"); env && *env) cfg.output_dir = env;
        set_worker_count(workers);

        const auto res = run(cfg, cfg.output_dir);
        std::cout << "status " << res.status << " (" << cfg.output_dir << "/manifest.json)\n";
        return res.status;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
}
