#include "nn/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace nn {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

int parse_int(const std::string& key, const std::string& v) {
    int x = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return x;
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    uint64_t x = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return x;
}

double parse_double(const std::string& key, const std::string& v) {
    double x = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    return x;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    bool activations_set = false;
    while (std::getline(ss, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key=value, got '" +
                              line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (val.empty()) throw ConfigError(key + ": empty value");

        if (key == "dataset") cfg.dataset = val;
        else if (key == "data_dir") cfg.data_dir = val;
        else if (key == "images") cfg.images = val;
        else if (key == "labels") cfg.labels = val;
        else if (key == "cifar_batches") cfg.cifar_batches = split_list(val);
        else if (key == "model") cfg.model = val;
        else if (key == "activations") {
            cfg.activations.clear();
            for (const std::string& a : split_list(val)) {
                try {
                    cfg.activations.push_back(parse_activation_kind(a));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(std::string("activations: ") + e.what());
                }
            }
            activations_set = true;
        } else if (key == "alpha") cfg.alpha = parse_double(key, val);
        else if (key == "epochs") cfg.epochs = parse_int(key, val);
        else if (key == "batch_size") cfg.batch_size = parse_int(key, val);
        else if (key == "learning_rate") cfg.learning_rate = parse_double(key, val);
        else if (key == "seed") cfg.seed = parse_u64(key, val);
        else if (key == "subset") cfg.subset = parse_int(key, val);
        else if (key == "classes") cfg.classes = parse_int(key, val);
        else if (key == "out") cfg.out = val;
        else if (key == "blobs_n") cfg.blobs_n = parse_int(key, val);
        else if (key == "blobs_classes") cfg.blobs_classes = parse_int(key, val);
        else if (key == "blobs_size") cfg.blobs_size = parse_int(key, val);
        else if (key == "blobs_channels") cfg.blobs_channels = parse_int(key, val);
        else throw ConfigError("unknown key '" + key + "' on line " + std::to_string(lineno));
    }

    if (cfg.dataset.empty()) throw ConfigError("missing required key: dataset");
    if (cfg.dataset != "mnist" && cfg.dataset != "fashion" && cfg.dataset != "cifar10" &&
        cfg.dataset != "blobs")
        throw ConfigError("dataset must be one of mnist|fashion|cifar10|blobs, got '" +
                          cfg.dataset + "'");
    if (!activations_set && cfg.activations.empty())
        cfg.activations.push_back(ActivationKind::pltanh);
    if (cfg.activations.empty()) throw ConfigError("activations: empty list");
    if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(cfg.learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (!(cfg.alpha >= 0)) throw ConfigError("alpha must be >= 0");
    if (cfg.subset < 0) throw ConfigError("subset must be >= 0");

    if (const char* env = std::getenv("PLTANH_DATA_DIR"); env && *env) cfg.data_dir = env;
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string config_model_name(const ExperimentConfig& cfg) {
    if (!cfg.model.empty()) return cfg.model;
    if (cfg.dataset == "mnist" || cfg.dataset == "fashion") return "mnist_cnn";
    if (cfg.dataset == "cifar10") return "cifar10_cnn";
    return "flowers_cnn";  // blobs default: the mid-size architecture
}

}  // namespace nn
