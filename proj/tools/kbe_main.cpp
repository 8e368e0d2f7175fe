// kbe: dataset statistics, training, evaluation and grid search for
// translation-based knowledge-graph embeddings.
//
// Exit codes: 0 success, 1 usage/configuration error, 2 data error,
// 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "kbe/checkpoint.hpp"
#include "kbe/evaluator.hpp"
#include "kbe/grid_search.hpp"
#include "kbe/kb_data.hpp"
#include "kbe/model.hpp"
#include "kbe/toy_kb.hpp"
#include "kbe/trainer.hpp"

namespace fs = std::filesystem;
using namespace kbe;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct DatasetArgs {
    std::string dir;
    std::string train;
    std::string valid;
    std::string test;

    void add_to(CLI::App* app) {
        app->add_option("--data", dir, "Directory with train/valid/test triple files");
        app->add_option("--train", train, "Training triples (overrides --data)");
        app->add_option("--valid", valid, "Validation triples (overrides --data)");
        app->add_option("--test", test, "Test triples (overrides --data)");
    }

    Dataset load() const {
        std::array<fs::path, 3> paths;
        if (!dir.empty()) paths = find_split_files(dir);
        if (!train.empty()) paths[0] = train;
        if (!valid.empty()) paths[1] = valid;
        if (!test.empty()) paths[2] = test;
        for (const auto& p : paths) {
            if (p.empty()) throw ConfigError("dataset needs --data or all of --train/--valid/--test");
            if (!fs::exists(p)) throw DataError("no such file: " + p.string());
        }
        Dataset ds = load_dataset(paths[0], paths[1], paths[2]);
        for (const auto& w : ds.warnings) std::cerr << "warning: " << w << '\n';
        return ds;
    }
};

// Defaults follow the WN18 setting; `--profile fb15k` switches to the FB15k one.
Hyperparams profile_defaults(const std::string& profile) {
    Hyperparams h;
    if (profile == "fb15k") {
        h.learning_rate = 0.0001;
        h.margin = 1.0;
        h.dim = 100;
    } else if (profile != "wn18") {
        throw ConfigError("unknown profile '" + profile + "' (expected wn18 or fb15k)");
    }
    return h;
}

struct HyperArgs {
    std::string profile = "wn18";
    double margin = 0.0;
    double lr = 0.0;
    std::size_t dim = 0;
    std::string norm;
    std::size_t epochs = 0;
    std::string sampler;
    std::uint64_t seed = 0;
    std::size_t negatives = 0;
    CLI::App* app = nullptr;

    void add_to(CLI::App* a) {
        app = a;
        a->add_option("--profile", profile, "Default hyperparameter profile: wn18 or fb15k")->capture_default_str();
        a->add_option("--margin", margin, "Margin gamma (profile default: 5 / 1)");
        a->add_option("--lr", lr, "SGD learning rate (profile default: 0.0005 / 0.0001)");
        a->add_option("--dim", dim, "Embedding dimension k (profile default: 50 / 100)");
        a->add_option("--norm", norm, "Score norm: l1 or l2 (default l1)");
        a->add_option("--epochs", epochs, "Training epochs (default 2000)");
        a->add_option("--sampler", sampler, "Corruption side sampler: uniform or bernoulli (default bernoulli)");
        a->add_option("--seed", seed, "Random seed (default 0)");
        a->add_option("--negatives", negatives, "Negatives per positive (default 1)");
    }

    bool given(const char* flag) const { return app->count(flag) > 0; }

    Hyperparams resolve() const {
        Hyperparams h = profile_defaults(profile);
        if (given("--margin")) h.margin = margin;
        if (given("--lr")) h.learning_rate = lr;
        if (given("--dim")) h.dim = dim;
        if (given("--norm")) {
            auto n = parse_norm_kind(norm);
            if (!n) throw ConfigError("--norm must be l1 or l2");
            h.norm = *n;
        }
        if (given("--epochs")) h.epochs = epochs;
        if (given("--sampler")) {
            auto s = parse_sampler_kind(sampler);
            if (!s) throw ConfigError("--sampler must be uniform or bernoulli");
            h.sampler = *s;
        }
        if (given("--seed")) h.seed = seed;
        if (given("--negatives")) h.negatives_per_positive = negatives;
        h.validate();
        return h;
    }
};

ModelKind resolve_model(const std::string& name) {
    auto k = parse_model_kind(name);
    if (!k) throw ConfigError("--model must be one of unstructured, transe, se, stranse");
    return *k;
}

CategoryScope resolve_scope(const std::string& s) {
    if (s == "all") return CategoryScope::AllSplits;
    if (s == "train") return CategoryScope::TrainOnly;
    throw ConfigError("--category-scope must be all or train");
}

std::string group_digits(std::size_t n) {
    std::string digits = std::to_string(n);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
        out += digits[i];
    }
    return out;
}

/// Writes to `path`, or stdout when empty.
void emit(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text << std::flush;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << text;
}

// ---------------------------------------------------------------------------

struct StatsCmd {
    DatasetArgs data;
    std::string scope = "all";

    void add_to(CLI::App* app) {
        data.add_to(app);
        app->add_option("--category-scope", scope, "Splits used for relation categories: all or train")
            ->capture_default_str();
    }

    void run() const {
        const Dataset ds = data.load();
        const auto& s = ds.store;
        std::string out;
        out += fmt::format("{:>10}{:>8}{:>12}{:>10}{:>10}\n", "#E", "#R", "#Train", "#Valid", "#Test");
        out += fmt::format("{:>10}{:>8}{:>12}{:>10}{:>10}\n", group_digits(s.num_entities),
                           group_digits(s.num_relations), group_digits(s.train.size()), group_digits(s.valid.size()),
                           group_digits(s.test.size()));
        const auto cats = compute_relation_categories(s, resolve_scope(scope));
        const auto shares = category_shares(cats, s.test);
        std::array<std::size_t, 4> relations{};
        for (const auto& e : cats.relations) {
            if (e.triple_count > 0) ++relations[static_cast<std::size_t>(e.category)];
        }
        out += "\nrelation categories\n";
        out += fmt::format("{:<18}{:>8}{:>8}{:>8}{:>8}\n", "", "1-1", "1-M", "M-1", "M-M");
        out += fmt::format("{:<18}{:>8}{:>8}{:>8}{:>8}\n", "relations", relations[0], relations[1], relations[2],
                           relations[3]);
        out += fmt::format("{:<18}{:>8.1f}{:>8.1f}{:>8.1f}{:>8.1f}\n", "test triples (%)", shares[0], shares[1],
                           shares[2], shares[3]);
        if (!cats.empty_relations.empty()) {
            out += fmt::format("relations without triples: {}\n", cats.empty_relations.size());
        }
        emit("", out);
    }
};

struct TrainCmd {
    DatasetArgs data;
    HyperArgs hyper;
    std::string model = "stranse";
    std::string init;
    std::string out;
    std::size_t threads = 1;
    bool hogwild = false;
    bool quiet = false;

    void add_to(CLI::App* app) {
        data.add_to(app);
        hyper.add_to(app);
        app->add_option("--model", model, "unstructured, transe, se or stranse")->capture_default_str();
        app->add_option("--init", init, "Warm-start checkpoint (e.g. a trained TransE model)");
        app->add_option("--out", out, "Checkpoint to write")->required();
        app->add_option("--threads", threads, "Worker threads (training uses them only with --hogwild)")
            ->capture_default_str();
        app->add_flag("--hogwild", hogwild, "Lock-free parallel SGD (not deterministic)");
        app->add_flag("--quiet", quiet, "Suppress per-epoch progress lines");
    }

    void run() const {
        const ModelKind kind = resolve_model(model);
        Hyperparams h = hyper.resolve();
        const Dataset ds = data.load();

        std::optional<Checkpoint> warm;
        if (!init.empty()) {
            warm = load_checkpoint(init);
            require_vocab(*warm, ds.vocab);
            if (hyper.given("--dim") && h.dim != warm->params.dim()) {
                throw WarmStartError("dim", fmt::format("--dim {} but {} has dimension {}", h.dim, init,
                                                        warm->params.dim()));
            }
            h.dim = warm->params.dim();
            if (!hyper.given("--norm")) h.norm = warm->hyper.norm;
        }

        TrainOptions options;
        options.threads = threads;
        options.hogwild = hogwild;
        if (!quiet) {
            options.on_epoch = [](const EpochStats& s) { std::cerr << format_epoch_line(s) << '\n'; };
        }
        const TrainResult result = train(ds.store, kind, h, warm ? &warm->params : nullptr, options);
        save_checkpoint(out, result.params, h, ds.vocab);
    }
};

struct EvalCmd {
    DatasetArgs data;
    std::string checkpoint;
    std::string split = "test";
    std::string report;
    std::string dump;
    std::string scope = "all";
    std::size_t threads = 1;

    void add_to(CLI::App* app) {
        data.add_to(app);
        app->add_option("--checkpoint", checkpoint, "Trained model")->required();
        app->add_option("--split", split, "Split to rank: test or valid")->capture_default_str();
        app->add_option("--report", report, "Write the report here instead of stdout");
        app->add_option("--dump-ranks", dump, "Per-triple rank dump");
        app->add_option("--category-scope", scope, "Splits used for relation categories: all or train")
            ->capture_default_str();
        app->add_option("--threads", threads, "Evaluation worker threads")->capture_default_str();
    }

    void run() const {
        Split which = Split::Test;
        if (split == "valid") {
            which = Split::Valid;
        } else if (split != "test") {
            throw ConfigError("--split must be test or valid");
        }
        const Dataset ds = data.load();
        const Checkpoint ckpt = load_checkpoint(checkpoint);
        require_vocab(ckpt, ds.vocab);
        const auto cats = compute_relation_categories(ds.store, resolve_scope(scope));
        const EvalReport rep =
            evaluate(ckpt.params, ckpt.hyper.norm, ds.store.split(which), ds.store.known, &cats, threads);
        std::string text = fmt::format("model: {} k={} norm={}\n", to_string(ckpt.params.kind()),
                                       ckpt.params.dim(), to_string(ckpt.hyper.norm));
        text += format_report(rep);
        emit(report, text);
        if (!dump.empty()) {
            std::ofstream out(dump, std::ios::binary | std::ios::trunc);
            if (!out) throw DataError("cannot write " + dump);
            write_rank_dump(out, rep, &ds.vocab);
        }
    }
};

struct GridCmd {
    DatasetArgs data;
    HyperArgs hyper;
    std::string model = "stranse";
    std::vector<double> lrs;
    std::vector<double> margins;
    std::vector<std::size_t> dims;
    std::vector<std::string> norms;
    std::size_t grid_epochs = 0;
    std::size_t threads = 1;
    std::string out;

    void add_to(CLI::App* app) {
        data.add_to(app);
        hyper.add_to(app);
        app->add_option("--model", model, "unstructured, transe, se or stranse")->capture_default_str();
        app->add_option("--lrs", lrs, "Learning rates (default 0.0001 0.0005 0.001 0.005 0.01)");
        app->add_option("--margins", margins, "Margins (default 1 3 5)");
        app->add_option("--dims", dims, "Dimensions (default 50 100)");
        app->add_option("--norms", norms, "Norms (default l1 l2)");
        app->add_option("--grid-epochs", grid_epochs, "Epochs per cell (default: --epochs)");
        app->add_option("--threads", threads, "Evaluation worker threads")->capture_default_str();
        app->add_option("--out", out, "Write the per-cell table here instead of stdout");
    }

    void run() const {
        const ModelKind kind = resolve_model(model);
        const Hyperparams base = hyper.resolve();
        GridSpec grid = GridSpec::standard();
        if (!lrs.empty()) grid.learning_rates = lrs;
        if (!margins.empty()) grid.margins = margins;
        if (!dims.empty()) grid.dims = dims;
        if (!norms.empty()) {
            grid.norms.clear();
            for (const auto& n : norms) {
                auto parsed = parse_norm_kind(n);
                if (!parsed) throw ConfigError("--norms entries must be l1 or l2");
                grid.norms.push_back(*parsed);
            }
        }
        const Dataset ds = data.load();
        GridOptions options;
        options.epochs_per_cell = grid_epochs;
        options.eval_threads = threads;
        options.on_cell = [](const GridCell& c) {
            std::cerr << fmt::format("cell norm={} k={} margin={} lr={} valid_filtered_mr={:.4f}\n",
                                     to_string(c.hyper.norm), c.hyper.dim, c.hyper.margin, c.hyper.learning_rate,
                                     c.valid_filtered_mr);
        };
        const GridResult result = grid_search(ds.store, kind, grid, base, options);

        std::string text = fmt::format("{:<6}{:>6}{:>8}{:>10}{:>16}\n", "norm", "k", "margin", "lr", "valid_fMR");
        for (const auto& c : result.cells) {
            text += fmt::format("{:<6}{:>6}{:>8}{:>10}{:>16.4f}\n", to_string(c.hyper.norm), c.hyper.dim,
                                c.hyper.margin, c.hyper.learning_rate, c.valid_filtered_mr);
        }
        text += fmt::format("best: norm={} k={} margin={} lr={} valid_filtered_mr={:.4f}\n",
                            to_string(result.best.norm), result.best.dim, result.best.margin,
                            result.best.learning_rate, result.cells[result.best_index].valid_filtered_mr);
        emit(out, text);
    }
};

int report_error(const char* category, const std::exception& e, int code) {
    std::cerr << "kbe: " << category << ": " << e.what() << '\n';
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Train and evaluate translation-based knowledge-graph embeddings"};
    app.require_subcommand(1);

    StatsCmd stats;
    TrainCmd train_cmd;
    EvalCmd eval_cmd;
    GridCmd grid_cmd;
    std::string toy_dir;

    stats.add_to(app.add_subcommand("stats", "Dataset counts and relation-category shares"));
    train_cmd.add_to(app.add_subcommand("train", "Train a model and write a checkpoint"));
    eval_cmd.add_to(app.add_subcommand("eval", "Raw and filtered link-prediction ranking"));
    grid_cmd.add_to(app.add_subcommand("grid", "Grid search on validation filtered mean rank"));
    auto* toy = app.add_subcommand("toy", "Write the built-in toy knowledge base");
    toy->add_option("--out", toy_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (app.got_subcommand("stats")) stats.run();
        if (app.got_subcommand("train")) train_cmd.run();
        if (app.got_subcommand("eval")) eval_cmd.run();
        if (app.got_subcommand("grid")) grid_cmd.run();
        if (app.got_subcommand("toy")) write_toy_kb(toy_dir);
    } catch (const NumericalError& e) {
        return report_error("numerical failure", e, kNumerical);
    } catch (const ConfigError& e) {
        return report_error("usage", e, kUsage);
    } catch (const CheckpointError& e) {
        return report_error("checkpoint", e, kData);
    } catch (const SamplingError& e) {
        return report_error("data", e, kData);
    } catch (const DataError& e) {
        return report_error("data", e, kData);
    } catch (const std::exception& e) {
        return report_error("error", e, kData);
    }
    return kOk;
}
