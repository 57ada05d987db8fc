#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nn/metrics.hpp"

namespace nn {

struct ResultRow {
    std::string dataset;
    std::string activation;
    double alpha = 0;
    double macro_precision = 0;
    double accuracy = 0;
    double macro_recall = 0;
    double auc = 0;
    double macro_f1 = 0;
    double seconds = 0;
    uint64_t seed = 0;
};

inline constexpr const char* kCsvHeader =
    "dataset,activation,alpha,macro_precision,accuracy,macro_recall,auc,macro_f1,seconds,seed";

// Shortest round-trip decimal form (std::to_chars); parse_csv recovers the
// exact double.
std::string format_double(double v);

std::string to_csv_line(const ResultRow& row);

// Appends rows, writing the header first when the file is new or empty.
void append_csv(const std::string& path, const std::vector<ResultRow>& rows);

std::vector<ResultRow> parse_csv(const std::string& path);

// JSON sidecar: config echo plus the result rows (and optional sweep info).
struct JsonSidecar {
    std::string config_echo;             // raw config text
    std::vector<ResultRow> rows;
    bool has_best_alpha = false;
    double best_alpha = 0;
};
void write_json(const std::string& path, const JsonSidecar& sidecar);

}  // namespace nn
