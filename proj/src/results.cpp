#include "nn/results.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace nn {

std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("format_double failed");
    return std::string(buf, p);
}

namespace {

double parse_double_exact(const std::string& s) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw std::runtime_error("bad CSV number: '" + s + "'");
    return v;
}

uint64_t parse_u64_exact(const std::string& s) {
    uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw std::runtime_error("bad CSV seed: '" + s + "'");
    return v;
}

}  // namespace

std::string to_csv_line(const ResultRow& r) {
    std::string out;
    out += r.dataset;
    out += ',';
    out += r.activation;
    out += ',';
    out += format_double(r.alpha);
    out += ',';
    out += format_double(r.macro_precision);
    out += ',';
    out += format_double(r.accuracy);
    out += ',';
    out += format_double(r.macro_recall);
    out += ',';
    out += format_double(r.auc);
    out += ',';
    out += format_double(r.macro_f1);
    out += ',';
    out += format_double(r.seconds);
    out += ',';
    out += std::to_string(r.seed);
    return out;
}

void append_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    bool need_header = true;
    {
        std::ifstream probe(path, std::ios::binary);
        if (probe && probe.peek() != std::ifstream::traits_type::eof()) need_header = false;
    }
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    if (need_header) out << kCsvHeader << '\n';
    for (const ResultRow& r : rows) out << to_csv_line(r) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<ResultRow> parse_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);
    if (line != kCsvHeader)
        throw std::runtime_error("unexpected CSV header in " + path + ": '" + line + "'");

    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ',')) cols.push_back(col);
        if (cols.size() != 10)
            throw std::runtime_error("bad CSV row (expected 10 columns): '" + line + "'");
        ResultRow r;
        r.dataset = cols[0];
        r.activation = cols[1];
        r.alpha = parse_double_exact(cols[2]);
        r.macro_precision = parse_double_exact(cols[3]);
        r.accuracy = parse_double_exact(cols[4]);
        r.macro_recall = parse_double_exact(cols[5]);
        r.auc = parse_double_exact(cols[6]);
        r.macro_f1 = parse_double_exact(cols[7]);
        r.seconds = parse_double_exact(cols[8]);
        r.seed = parse_u64_exact(cols[9]);
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_json(const std::string& path, const JsonSidecar& sidecar) {
    nlohmann::json j;
    j["config"] = sidecar.config_echo;
    j["rows"] = nlohmann::json::array();
    for (const ResultRow& r : sidecar.rows) {
        nlohmann::json row;
        row["dataset"] = r.dataset;
        row["activation"] = r.activation;
        row["alpha"] = r.alpha;
        row["macro_precision"] = r.macro_precision;
        row["accuracy"] = r.accuracy;
        row["macro_recall"] = r.macro_recall;
        row["auc"] = r.auc;
        row["macro_f1"] = r.macro_f1;
        row["seconds"] = r.seconds;
        row["seed"] = r.seed;
        j["rows"].push_back(std::move(row));
    }
    if (sidecar.has_best_alpha) j["best_alpha"] = sidecar.best_alpha;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace nn
