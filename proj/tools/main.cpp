// preictal - neonatal seizure prediction pipeline driver.
//
// Subcommands operate on a JSON config (comments allowed) with dotted-key
// overrides, and write artifacts plus a manifest per run:
//
//   preictal synth      --config cfg.json        synthetic EDF + annotations
//   preictal ingest     --config cfg.json        EDF -> filtered 5 s segments
//   preictal featurize  --config cfg.json        segments -> MFCC tensors
//   preictal train-cv   --config cfg.json        stratified k-fold training
//   preictal train-lopo --config cfg.json        leave-one-patient-out rounds
//   preictal finetune   --from <lopo run dir>    few-shot per-subject adaptation
//   preictal explain    --config cfg.json        Shapley channel attributions
//   preictal scalp-plot --from <explain run dir> importance scalp maps (SVG)

#include <CLI11.hpp>

#include "preictal/pipeline.hpp"
#include "preictal/version.hpp"

int main(int argc, char** argv) {
    CLI::App app{"patient-independent neonatal seizure prediction pipeline"};
    app.set_version_flag("--version", std::string(preictal::kVersion));
    app.require_subcommand(1);

    preictal::RunOptions opt;
    std::uint64_t seed_value = 0;

    const std::vector<std::string> commands = {"synth",      "ingest",   "featurize",
                                               "train-cv",   "train-lopo", "finetune",
                                               "explain",    "scalp-plot"};
    for (const std::string& name : commands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", opt.config_path, "pipeline config file (JSON, comments ok)");
        sub->add_option("--set", opt.set_overrides,
                        "dotted-key override, e.g. --set training.lr=0.002")
            ->take_all();
        auto* seed_opt = sub->add_option("--seed", seed_value, "override the global seed");
        sub->add_option("--out", opt.out_dir, "output directory (default: timestamped run dir)");
        sub->add_option("--from", opt.from_run,
                        "source run dir (finetune: train-lopo run; scalp-plot: explain run)");
        sub->callback([&opt, name, seed_opt, &seed_value] {
            opt.command = name;
            if (seed_opt->count() > 0) opt.seed = seed_value;
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // exit 0
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // usage error
    }

    return preictal::run_command(opt);
}
