// Command-line driver: dataset splitting, framework runs, fraction sweeps,
// report emission, and the finite-difference gradient suite.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deltatrain/config_file.hpp"
#include "deltatrain/corpus.hpp"
#include "deltatrain/embedding.hpp"
#include "deltatrain/gradcheck.hpp"
#include "deltatrain/manifest.hpp"
#include "deltatrain/report.hpp"
#include "deltatrain/split_io.hpp"
#include "deltatrain/ssl_engine.hpp"

namespace {

using namespace deltatrain;

struct SplitArgs {
    std::string input, test, format = "csv_class_title_body", out;
    double labeled_frac = 0.01, dev_frac = 0.15;
    std::int64_t seed = 1;
    int num_classes = 0;
};

int cmd_split(const SplitArgs& a) {
    const DatasetFormat fmt = parse_format(a.format);
    auto train_docs = load_dataset(a.input, fmt, a.num_classes, "tr");
    SplitBundle bundle = split_semi_supervised(train_docs, a.labeled_frac, a.dev_frac, a.seed);
    if (!a.test.empty()) bundle.test = load_dataset(a.test, fmt, a.num_classes, "te");
    SplitSource source;
    source.train_path = a.input;
    source.test_path = a.test;
    source.format = fmt;
    source.declared_num_classes = a.num_classes;
    save_split(bundle, source, a.out);
    std::printf("split: train=%zu dev=%zu test=%zu unlabeled=%zu classes=%d -> %s\n",
                bundle.train.size(), bundle.dev.size(), bundle.test.size(), bundle.unlabeled.size(),
                bundle.num_classes, a.out.c_str());
    for (const auto& w : bundle.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    return 0;
}

struct RunArgs {
    std::string framework = "delta", split_dir, embeddings, config, out;
    std::int64_t seed = 1;
};

SslConfig make_config(const std::string& config_path, const std::string& framework,
                      std::int64_t seed) {
    SslConfig cfg;
    if (!config_path.empty()) cfg = load_config_file(config_path);
    cfg.framework = parse_framework(framework);
    cfg.run_seed = seed;
    cfg.validate();
    return cfg;
}

RunInputs build_inputs(const SplitBundle& bundle, const std::string& embeddings_path,
                       const SslConfig& cfg, const std::string& dataset_digest) {
    std::vector<Document> visible = bundle.train;
    visible.insert(visible.end(), bundle.dev.begin(), bundle.dev.end());
    visible.insert(visible.end(), bundle.unlabeled.begin(), bundle.unlabeled.end());
    Vocabulary vocab = build_vocabulary(visible, cfg.min_freq);
    vocab.num_classes = bundle.num_classes;
    const EmbeddingMatrix pretrained =
        load_pretrained(embeddings_path, vocab, cfg.classifier.embed_dim, cfg.run_seed + 77);
    RunInputs inputs = prepare_inputs(bundle, vocab, pretrained, cfg.classifier.max_len);
    inputs.dataset_digest = dataset_digest;
    return inputs;
}

int cmd_run(const RunArgs& a) {
    const SslConfig cfg = make_config(a.config, a.framework, a.seed);
    const SplitBundle bundle = load_split(a.split_dir);
    const RunInputs inputs = build_inputs(bundle, a.embeddings, cfg,
                                          file_digest_hex((std::filesystem::path(a.split_dir) /
                                                           kSplitManifestName)
                                                              .string()));
    const RunResult result = run_framework(inputs, cfg);
    write_run_outputs(result, cfg, inputs, a.out);
    std::printf("%s: best_meta_epoch=%d final_test_accuracy=%.4f -> %s\n",
                framework_name(result.framework).c_str(), result.best_meta_epoch,
                result.final_test_accuracy, a.out.c_str());
    return 0;
}

struct SweepArgs {
    std::string fractions = "0.01,0.05,0.10";
    std::string framework = "delta", input, test, format = "csv_class_title_body", embeddings,
                config, out;
    double dev_frac = 0.15;
    std::int64_t split_seed = 1, seed = 1;
    int num_classes = 0;
};

int cmd_sweep(const SweepArgs& a) {
    const SslConfig cfg = make_config(a.config, a.framework, a.seed);
    std::vector<double> fractions;
    {
        std::string item;
        for (char c : a.fractions + ",") {
            if (c == ',') {
                if (!item.empty()) {
                    try {
                        std::size_t pos = 0;
                        const double f = std::stod(item, &pos);
                        if (pos != item.size() || !(f > 0.0 && f <= 1.0)) throw std::exception();
                        fractions.push_back(f);
                    } catch (...) {
                        throw ConfigError("--fractions: bad value '" + item + "'");
                    }
                }
                item.clear();
            } else {
                item += c;
            }
        }
        if (fractions.empty()) throw ConfigError("--fractions is empty");
    }
    const DatasetFormat fmt = parse_format(a.format);
    const auto train_docs = load_dataset(a.input, fmt, a.num_classes, "tr");
    std::vector<Document> test_docs;
    if (!a.test.empty()) test_docs = load_dataset(a.test, fmt, a.num_classes, "te");

    Vocabulary vocab = build_vocabulary(train_docs, cfg.min_freq);
    vocab.num_classes = infer_num_classes(train_docs);
    const EmbeddingMatrix pretrained =
        load_pretrained(a.embeddings, vocab, cfg.classifier.embed_dim, cfg.run_seed + 77);
    const std::string digest = file_digest_hex(a.input);

    const auto points = run_fraction_sweep(train_docs, test_docs, vocab, pretrained, fractions,
                                           a.dev_frac, a.split_seed, cfg, digest);
    std::filesystem::create_directories(a.out);
    for (const auto& point : points) {
        char frac_str[32];
        std::snprintf(frac_str, sizeof(frac_str), "%g", point.fraction);
        const std::string path = (std::filesystem::path(a.out) /
                                  ("run_" + framework_name(cfg.framework) + "_f" + frac_str + ".json"))
                                     .string();
        write_run_outputs(point.result, cfg, point.inputs, path);
        std::printf("fraction %s: final_test_accuracy=%.4f -> %s\n", frac_str,
                    point.result.final_test_accuracy, path.c_str());
    }
    return 0;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& out, bool svg) {
    const ReportBundle bundle = emit_reports(runs, out, svg);
    for (const auto& f : bundle.files) std::printf("wrote %s\n", f.c_str());
    return 0;
}

int cmd_check_gradients(int cases, std::uint64_t seed) {
    const GradCheckReport report = run_gradient_check(cases, seed);
    for (const auto& c : report.cases)
        std::printf("[%s] %s: %zu params, max_rel_err=%.3g, max_abs_err=%.3g\n",
                    c.pass ? "PASS" : "FAIL", c.description.c_str(), c.params_checked,
                    c.max_rel_err, c.max_abs_err);
    std::printf("%s: %zu gradients checked, max relative error %.3g\n",
                report.pass ? "PASS" : "FAIL", report.params_checked, report.max_rel_err);
    if (!report.pass) throw NumericalError("gradient check failed");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Delta-training: semi-supervised text classification experiments"};
    app.require_subcommand(1);

    SplitArgs split_args;
    auto* split = app.add_subcommand("split", "Create a semi-supervised split of a dataset");
    split->add_option("--input", split_args.input, "training dataset (CSV file or class-folder root)")
        ->required();
    split->add_option("--test", split_args.test, "held-out test dataset (same format)");
    split->add_option("--format", split_args.format, "csv_class_title_body | folder_per_class");
    split->add_option("--labeled-frac", split_args.labeled_frac, "labeled fraction (default 0.01)");
    split->add_option("--dev-frac", split_args.dev_frac, "dev fraction of the labeled pool (default 0.15)");
    split->add_option("--seed", split_args.seed, "split seed");
    split->add_option("--num-classes", split_args.num_classes, "declared class count (default: infer)");
    split->add_option("--out", split_args.out, "output split directory")->required();

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run one framework on an existing split");
    run->add_option("--framework", run_args.framework, "delta | selftrain | cotrain")->required();
    run->add_option("--split", run_args.split_dir, "split directory from 'split'")->required();
    run->add_option("--embeddings", run_args.embeddings, "pretrained word-vector text file")->required();
    run->add_option("--config", run_args.config, "TOML-style key/value config file");
    run->add_option("--seed", run_args.seed, "run seed");
    run->add_option("--out", run_args.out, "output run manifest (JSON)")->required();

    SweepArgs sweep_args;
    auto* sweep = app.add_subcommand("sweep", "Run one framework across labeled fractions");
    sweep->add_option("--fractions", sweep_args.fractions, "comma-separated labeled fractions");
    sweep->add_option("--framework", sweep_args.framework, "delta | selftrain | cotrain")->required();
    sweep->add_option("--input", sweep_args.input, "training dataset")->required();
    sweep->add_option("--test", sweep_args.test, "held-out test dataset");
    sweep->add_option("--format", sweep_args.format, "csv_class_title_body | folder_per_class");
    sweep->add_option("--dev-frac", sweep_args.dev_frac, "dev fraction of the labeled pool");
    sweep->add_option("--split-seed", sweep_args.split_seed, "seed for the per-fraction splits");
    sweep->add_option("--num-classes", sweep_args.num_classes, "declared class count (default: infer)");
    sweep->add_option("--embeddings", sweep_args.embeddings, "pretrained word-vector text file")->required();
    sweep->add_option("--config", sweep_args.config, "TOML-style key/value config file");
    sweep->add_option("--seed", sweep_args.seed, "run seed");
    sweep->add_option("--out", sweep_args.out, "output directory for run manifests")->required();

    std::vector<std::string> report_runs;
    std::string report_out;
    bool report_svg = false;
    auto* report = app.add_subcommand("report", "Emit CSV tables (and optional SVG charts) from run manifests");
    report->add_option("--runs", report_runs, "run manifest files")->required()->expected(-1);
    report->add_option("--out", report_out, "output directory")->required();
    report->add_flag("--svg", report_svg, "also render SVG line charts");

    int grad_cases = 20;
    std::uint64_t grad_seed = 20190813;
    auto* grad = app.add_subcommand("check-gradients", "Finite-difference gradient suite");
    grad->add_option("--cases", grad_cases, "number of random toy configurations (default 20)");
    grad->add_option("--seed", grad_seed, "suite seed");

    try {
        app.parse(argc, argv);
        if (split->parsed()) return cmd_split(split_args);
        if (run->parsed()) return cmd_run(run_args);
        if (sweep->parsed()) return cmd_sweep(sweep_args);
        if (report->parsed()) return cmd_report(report_runs, report_out, report_svg);
        if (grad->parsed()) return cmd_check_gradients(grad_cases, grad_seed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
