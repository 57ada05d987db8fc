#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nn/checkpoint.hpp"
#include "nn/config.hpp"
#include "nn/data.hpp"
#include "nn/gradcheck.hpp"
#include "nn/results.hpp"
#include "nn/train.hpp"

namespace {

using namespace nn;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitDiverged = 4;

std::string join_path(const std::string& a, const std::string& b) {
    if (a.empty()) return b;
    return a.back() == '/' ? a + b : a + "/" + b;
}

bool file_exists(const std::string& p) { return std::ifstream(p).good(); }

// Picks the first existing candidate file name under dir, preferring an
// explicit config-supplied name.
std::string resolve_file(const std::string& dir, const std::string& explicit_name,
                         const std::vector<std::string>& defaults) {
    std::vector<std::string> names;
    if (!explicit_name.empty()) names.push_back(explicit_name);
    else names = defaults;
    for (const std::string& n : names) {
        const std::string p = join_path(dir, n);
        if (file_exists(p)) return p;
    }
    std::string tried;
    for (const std::string& n : names) tried += (tried.empty() ? "" : ", ") + join_path(dir, n);
    throw DataError("no dataset file found; tried: " + tried);
}

Dataset load_dataset(const ExperimentConfig& cfg) {
    if (cfg.dataset == "blobs")
        return synthetic_blobs(cfg.blobs_n, cfg.blobs_classes, cfg.blobs_size, cfg.blobs_size,
                               cfg.blobs_channels, cfg.seed);

    const std::string dir = join_path(cfg.data_dir.empty() ? "." : cfg.data_dir, cfg.dataset);
    if (cfg.dataset == "cifar10") {
        std::vector<std::string> names = cfg.cifar_batches;
        if (names.empty())
            names = {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
                     "data_batch_4.bin", "data_batch_5.bin"};
        std::vector<std::string> paths;
        for (const std::string& n : names) paths.push_back(join_path(dir, n));
        Dataset ds = load_cifar10(paths);
        ds.name = cfg.dataset;
        return ds;
    }

    const std::string images = resolve_file(
        dir, cfg.images, {"images-idx3-ubyte", "train-images-idx3-ubyte", "train-images.idx3-ubyte"});
    const std::string labels = resolve_file(
        dir, cfg.labels, {"labels-idx1-ubyte", "train-labels-idx1-ubyte", "train-labels.idx1-ubyte"});
    Dataset ds = load_idx(images, labels);
    ds.name = cfg.dataset;
    return ds;
}

// LReLU and ALReLU keep their defining slope 0.01; the config alpha tunes
// PLTanh only.
double alpha_for(ActivationKind k, double cfg_alpha) {
    switch (k) {
        case ActivationKind::pltanh: return cfg_alpha;
        case ActivationKind::lrelu:
        case ActivationKind::alrelu: return 0.01;
        default: return 0.0;
    }
}

std::string json_sidecar_path(const std::string& csv_path) {
    if (csv_path.size() > 4 && csv_path.substr(csv_path.size() - 4) == ".csv")
        return csv_path.substr(0, csv_path.size() - 4) + ".json";
    return csv_path + ".json";
}

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void validate_dataset_model(const ExperimentConfig& cfg, const Dataset& ds,
                            const ModelSpec& spec) {
    const Shape4 s = as_shape4(ds.images, "dataset images");
    if (s.h != spec.in_h || s.w != spec.in_w || s.c != spec.in_c)
        throw ConfigError("dataset images are " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                          "x" + std::to_string(s.c) + " but model " + spec.name + " expects " +
                          std::to_string(spec.in_h) + "x" + std::to_string(spec.in_w) + "x" +
                          std::to_string(spec.in_c));
    if (ds.num_classes != spec.num_classes)
        throw ConfigError("dataset has " + std::to_string(ds.num_classes) + " classes but model " +
                          spec.name + " outputs " + std::to_string(spec.num_classes) +
                          " (check blobs_classes/classes in " + cfg.dataset + " config)");
}

ResultRow make_row(const ExperimentConfig& cfg, ActivationKind kind, double alpha,
                   const MetricValues& m, double seconds) {
    ResultRow r;
    r.dataset = cfg.dataset;
    r.activation = to_string(kind);
    r.alpha = alpha;
    r.macro_precision = m.macro_precision;
    r.accuracy = m.accuracy;
    r.macro_recall = m.macro_recall;
    r.auc = m.macro_auc;
    r.macro_f1 = m.macro_f1;
    r.seconds = seconds;
    r.seed = cfg.seed;
    return r;
}

void print_row(const ResultRow& r) {
    std::printf("%-8s %-8s alpha=%-8g acc=%.4f prec=%.4f rec=%.4f f1=%.4f auc=%.4f (%.1fs)\n",
                r.dataset.c_str(), r.activation.c_str(), r.alpha, r.accuracy, r.macro_precision,
                r.macro_recall, r.macro_f1, r.auc, r.seconds);
}

struct CommonFlags {
    std::string config_path;
    std::string out;
    int subset = -1;
    int64_t seed = -1;
};

ExperimentConfig load_and_override(const CommonFlags& fl) {
    ExperimentConfig cfg = load_config(fl.config_path);
    if (!fl.out.empty()) cfg.out = fl.out;
    if (fl.subset >= 0) cfg.subset = fl.subset;
    if (fl.seed >= 0) cfg.seed = static_cast<uint64_t>(fl.seed);
    return cfg;
}

Dataset prepare_dataset(const ExperimentConfig& cfg) {
    Dataset ds = load_dataset(cfg);
    if (cfg.subset > 0 && cfg.subset < ds.size()) ds = subset(ds, cfg.subset);
    return ds;
}

int cmd_run(const CommonFlags& fl) {
    ExperimentConfig cfg = load_and_override(fl);
    Dataset ds = prepare_dataset(cfg);

    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.learning_rate = cfg.learning_rate;
    tc.seed = cfg.seed;

    std::vector<ResultRow> rows;
    for (ActivationKind kind : cfg.activations) {
        const double alpha = alpha_for(kind, cfg.alpha);
        const ModelSpec spec =
            build_model(config_model_name(cfg), Activation{kind, alpha}, ds.num_classes);
        validate_dataset_model(cfg, ds, spec);
        const auto t0 = std::chrono::steady_clock::now();
        const MetricsReport report = run_experiment(spec, ds, tc);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rows.push_back(make_row(cfg, kind, alpha, report.mean(), secs));
        print_row(rows.back());
    }

    append_csv(cfg.out, rows);
    JsonSidecar sc;
    sc.config_echo = read_text(fl.config_path);
    sc.rows = rows;
    write_json(json_sidecar_path(cfg.out), sc);
    std::printf("wrote %zu row(s) to %s\n", rows.size(), cfg.out.c_str());
    return 0;
}

int cmd_sweep(const CommonFlags& fl, const std::vector<double>& alphas) {
    ExperimentConfig cfg = load_and_override(fl);
    Dataset ds = prepare_dataset(cfg);

    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.learning_rate = cfg.learning_rate;
    tc.seed = cfg.seed;

    const std::string model_name = config_model_name(cfg);
    {
        const ModelSpec probe =
            build_model(model_name, Activation{ActivationKind::pltanh, alphas[0]}, ds.num_classes);
        validate_dataset_model(cfg, ds, probe);
    }

    const auto t_all = std::chrono::steady_clock::now();
    SweepResult sweep = alpha_sweep(
        [&](double a) {
            return build_model(model_name, Activation{ActivationKind::pltanh, a}, ds.num_classes);
        },
        ds, tc, alphas);
    const double total =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_all).count();

    std::vector<ResultRow> rows;
    for (const SweepRow& sr : sweep.rows) {
        rows.push_back(make_row(cfg, ActivationKind::pltanh, sr.alpha, sr.report.mean(),
                                total / double(sweep.rows.size())));
        print_row(rows.back());
    }
    const double best_alpha = sweep.rows[sweep.best].alpha;
    std::printf("best alpha: %s (accuracy %.4f)\n", format_double(best_alpha).c_str(),
                sweep.rows[sweep.best].report.mean().accuracy);

    append_csv(cfg.out, rows);
    JsonSidecar sc;
    sc.config_echo = read_text(fl.config_path);
    sc.rows = rows;
    sc.has_best_alpha = true;
    sc.best_alpha = best_alpha;
    write_json(json_sidecar_path(cfg.out), sc);
    std::printf("wrote %zu row(s) to %s\n", rows.size(), cfg.out.c_str());
    return 0;
}

int cmd_gradcheck(bool scalar_only) {
    bool all_pass = true;
    std::printf("scalar activation derivatives (1000 pts, h=1e-6, tol 1e-6):\n");
    for (const GradCheckItem& it : gradcheck_activations()) {
        std::printf("  [%s] %-24s max rel err %.3e\n", it.pass ? "PASS" : "FAIL", it.name.c_str(),
                    it.max_rel_err);
        all_pass &= it.pass;
    }
    if (scalar_only) {
        if (!all_pass) std::printf("gradcheck FAILED\n");
        return all_pass ? 0 : 1;
    }

    std::printf("whole-network finite differences (toy sizes, h=1e-5, tol 1e-4):\n");
    const ActivationKind kinds[] = {ActivationKind::relu, ActivationKind::lrelu,
                                    ActivationKind::alrelu, ActivationKind::tanh,
                                    ActivationKind::pltanh};
    ArchCheckOptions opt;
    opt.coords_per_tensor = 3;  // smoke sampling; the test suite checks 25
    for (ActivationKind k : kinds) {
        const Activation a{k, 0.01};
        for (GradCheckItem it : gradcheck_architectures(a, opt)) {
            std::printf("  [%s] %-12s %-8s max rel err %.3e\n", it.pass ? "PASS" : "FAIL",
                        it.name.c_str(), to_string(k), it.max_rel_err);
            all_pass &= it.pass;
        }
    }
    if (!all_pass) std::printf("gradcheck FAILED\n");
    return all_pass ? 0 : 1;
}

int cmd_plot_activation(const std::string& kind_str, double alpha, double lo, double hi,
                        int samples, const std::string& out_path) {
    ActivationKind kind;
    try {
        kind = parse_activation_kind(kind_str);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
    if (samples < 2) {
        std::fprintf(stderr, "error: --samples must be >= 2\n");
        return kExitUsage;
    }
    if (!(lo < hi)) {
        std::fprintf(stderr, "error: bad range, need min < max\n");
        return kExitUsage;
    }
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) {
        std::fprintf(stderr, "error: cannot open %s for writing\n", out_path.c_str());
        return kExitData;
    }
    out << "x,f,fprime\n";
    for (int i = 0; i < samples; ++i) {
        const double x = lo + (hi - lo) * double(i) / double(samples - 1);
        out << format_double(x) << ',' << format_double(act_fwd(kind, alpha, x)) << ','
            << format_double(act_bwd(kind, alpha, x)) << '\n';
    }
    std::printf("wrote %d samples to %s\n", samples, out_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PLTanh activation-function experiment harness"};
    app.require_subcommand(1);

    CommonFlags fl;
    std::string alphas_str;
    std::string plot_kind = "pltanh", plot_out = "activation.csv";
    double plot_alpha = 0.01, plot_min = -5.0, plot_max = 5.0;
    int plot_samples = 201;

    CLI::App* run = app.add_subcommand("run", "train/evaluate each configured activation");
    run->add_option("--config", fl.config_path, "experiment config file")->required();
    run->add_option("--out", fl.out, "output CSV path (overrides config)");
    run->add_option("--subset", fl.subset, "use only the first N samples (overrides config)");
    run->add_option("--seed", fl.seed, "RNG seed (overrides config)");

    CLI::App* sweep = app.add_subcommand("sweep", "PLTanh alpha sweep");
    sweep->add_option("--config", fl.config_path, "experiment config file")->required();
    sweep->add_option("--alphas", alphas_str, "comma-separated alpha list")->required();
    sweep->add_option("--out", fl.out, "output CSV path (overrides config)");
    sweep->add_option("--subset", fl.subset, "use only the first N samples (overrides config)");
    sweep->add_option("--seed", fl.seed, "RNG seed (overrides config)");

    bool gradcheck_scalar_only = false;
    CLI::App* gc =
        app.add_subcommand("gradcheck", "finite-difference checks for activations and networks");
    gc->add_flag("--scalar-only", gradcheck_scalar_only, "skip the whole-network checks");

    CLI::App* plot = app.add_subcommand("plot-activation", "sample f(x) and f'(x) to CSV");
    plot->add_option("--kind", plot_kind, "relu|lrelu|alrelu|tanh|pltanh");
    plot->add_option("--alpha", plot_alpha, "alpha parameter");
    plot->add_option("--min", plot_min, "range start");
    plot->add_option("--max", plot_max, "range end");
    plot->add_option("--samples", plot_samples, "row count (>= 2)");
    plot->add_option("--out", plot_out, "output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (run->parsed()) return cmd_run(fl);
        if (sweep->parsed()) {
            std::vector<double> alphas;
            std::stringstream ss(alphas_str);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (item.empty()) continue;
                try {
                    size_t used = 0;
                    alphas.push_back(std::stod(item, &used));
                    if (used != item.size()) throw std::invalid_argument(item);
                } catch (const std::exception&) {
                    std::fprintf(stderr, "error: bad alpha '%s'\n", item.c_str());
                    return kExitUsage;
                }
            }
            if (alphas.empty()) {
                std::fprintf(stderr, "error: --alphas list is empty\n");
                return kExitUsage;
            }
            for (double a : alphas)
                if (!(a >= 0.0)) {
                    std::fprintf(stderr, "error: alpha must be >= 0\n");
                    return kExitUsage;
                }
            return cmd_sweep(fl, alphas);
        }
        if (gc->parsed()) return cmd_gradcheck(gradcheck_scalar_only);
        if (plot->parsed())
            return cmd_plot_activation(plot_kind, plot_alpha, plot_min, plot_max, plot_samples,
                                       plot_out);
    } catch (const nn::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitUsage;
    } catch (const nn::DataError& e) {
        std::fprintf(stderr, "dataset error: %s\n", e.what());
        return kExitData;
    } catch (const nn::DivergenceError& e) {
        std::fprintf(stderr, "training error: %s\n", e.what());
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
