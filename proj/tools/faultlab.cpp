#include <iostream>

#include <CLI11.hpp>

#include "faultlab/commands.hpp"
#include "faultlab/kernels.hpp"

int main(int argc, char** argv) {
    using namespace faultlab;

    CLI::App app{
        "faultlab: train small MNIST networks and measure their inference "
        "robustness under per-scalar computation faults"};
    app.require_subcommand(1);

    cli::TrainArgs train_args;
    CLI::App* train = app.add_subcommand(
        "train", "Train a hyperparameter grid into a model zoo");
    train->add_option("--grid", train_args.grid_path, "Grid config JSON")
        ->required();
    train->add_option("--data-dir", train_args.data_dir,
                      "MNIST IDX directory (or FAULTLAB_DATA_DIR)");
    train->add_option("--out", train_args.out_dir, "Output zoo directory")
        ->required();
    train->add_option("--seed", train_args.seed, "Base seed (default 0)");
    train->add_option("--jobs", train_args.jobs, "Parallel model trainings");

    cli::EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand(
        "eval", "Monte-Carlo faulty evaluation of a model zoo");
    eval->add_option("--zoo", eval_args.zoo_dir, "Zoo directory")->required();
    eval->add_option("--kinds", eval_args.kinds,
                     "Deviation kinds, e.g. uniform,erasure");
    eval->add_option("--p", eval_args.p_list,
                     "Deviation probabilities, e.g. 0,1e-4,1e-3,1e-2");
    eval->add_option("--realizations", eval_args.realizations,
                     "Monte-Carlo realizations per (model, kind, p)");
    eval->add_option("--seed", eval_args.seed, "Sweep seed (default 0)");
    eval->add_option("--out", eval_args.out_csv, "Results CSV path")
        ->required();
    eval->add_option("--data-dir", eval_args.data_dir,
                     "MNIST IDX directory (or FAULTLAB_DATA_DIR)");
    eval->add_option("--jobs", eval_args.jobs, "Worker threads");

    cli::AnalyzeArgs an_args;
    CLI::App* an = app.add_subcommand(
        "analyze", "Derive robustness curves, smallest-model or efficiency "
                   "tables from a results CSV");
    an->add_option("--results", an_args.results_csv, "Results CSV")->required();
    an->add_option("--mode", an_args.mode, "curves|smallest|efficiency")
        ->required();
    an->add_option("--targets", an_args.targets,
                   "Error-rate targets, e.g. 0.016,0.02,0.03");
    an->add_option("--group-by", an_args.group_by,
                   "Curves grouping key (L,N,C,P,F,pool,family)");
    an->add_option("--top-k", an_args.top_k,
                   "Models kept per group in curves mode");
    an->add_option("--out", an_args.out_csv, "Analysis CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) cli::cmd_train(train_args);
        if (eval->parsed()) cli::cmd_eval(eval_args);
        if (an->parsed()) cli::cmd_analyze(an_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
