#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nn/activations.hpp"

namespace nn {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat key=value experiment description. '#' starts a comment; unknown keys
// are rejected. The PLTANH_DATA_DIR environment variable overrides data_dir.
struct ExperimentConfig {
    std::string dataset;                  // mnist | fashion | cifar10 | blobs
    std::string data_dir;                 // root for dataset files
    std::string images, labels;           // explicit IDX file names (optional)
    std::vector<std::string> cifar_batches;
    std::string model;                    // default chosen from dataset
    std::vector<ActivationKind> activations{ActivationKind::pltanh};
    double alpha = 0.01;
    int epochs = 10;
    int batch_size = 128;
    double learning_rate = 1e-3;
    uint64_t seed = 42;
    int subset = 0;                       // keep only the first N samples; 0 = full dataset
    int classes = 0;                      // histo_cnn head size override
    std::string out = "results.csv";
    int blobs_n = 500;
    int blobs_classes = 5;
    int blobs_size = 32;
    int blobs_channels = 3;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Resolved model name: explicit `model` key, else the dataset's default.
std::string config_model_name(const ExperimentConfig& cfg);

}  // namespace nn
