#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "nn/results.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string output;  // stdout and stderr interleaved
};

CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    const std::string cmd = env_prefix + " \"" PLTANH_CLI_PATH "\" " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult res;
    char buf[4096];
    while (size_t got = fread(buf, 1, sizeof buf, pipe)) res.output.append(buf, got);
    const int status = pclose(pipe);
    res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("pltanh_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    return f;
}

// Small, fast end-to-end config: synthetic blobs shaped for the digit model.
std::string blobs_config(const TempDir& td, const std::string& out_name,
                         const std::string& extra = "") {
    const std::string path = td.file("exp.cfg");
    write_text(path,
               "# synthetic smoke experiment\n"
               "dataset = blobs\n"
               "model = mnist_cnn\n"
               "blobs_n = 80\n"
               "blobs_classes = 10\n"
               "blobs_size = 28\n"
               "blobs_channels = 1\n"
               "epochs = 2\n"
               "batch_size = 32\n"
               "seed = 9\n"
               "out = " +
                   td.file(out_name) + "\n" + extra);
    return path;
}

}  // namespace

TEST_CASE("plot-activation writes the sampled curve") {
    TempDir td;
    const std::string out = td.file("relu.csv");
    const CliResult r = run_cli("plot-activation --kind relu --min -1 --max 1 --samples 11 --out " + out);
    CHECK(r.code == 0);
    const auto lines = read_lines(out);
    REQUIRE(lines.size() == 12);
    CHECK(lines[0] == "x,f,fprime");
    for (size_t i = 1; i < lines.size(); ++i) {
        const auto f = split_csv(lines[i]);
        REQUIRE(f.size() == 3);
        const double x = std::stod(f[0]), fx = std::stod(f[1]), fp = std::stod(f[2]);
        CHECK(fx == (x > 0 ? x : 0.0));
        CHECK((fp == 0.0 || fp == 1.0));
    }
    CHECK(split_csv(lines[1])[0] == "-1");
    const auto last = split_csv(lines.back());
    CHECK(std::stod(last[0]) == 1.0);
}

TEST_CASE("plot-activation covers pltanh's nonnegative left arm") {
    TempDir td;
    const std::string out = td.file("pltanh.csv");
    const CliResult r =
        run_cli("plot-activation --kind pltanh --alpha 0.05 --min -6 --max 6 --samples 25 --out " + out);
    CHECK(r.code == 0);
    for (size_t i = 1; i < 26; ++i) {
        const auto f = split_csv(read_lines(out)[i]);
        const double x = std::stod(f[0]), fx = std::stod(f[1]);
        if (x <= 0) CHECK(fx >= 0.0);  // the |x| arm keeps the left side above zero
        if (x > 4) CHECK(fx == doctest::Approx(std::max(std::tanh(x), 0.05 * x)).epsilon(1e-9));
    }
}

TEST_CASE("plot-activation rejects bad invocations") {
    TempDir td;
    CHECK(run_cli("plot-activation --kind banana --out " + td.file("x.csv")).code == 2);
    CHECK(run_cli("plot-activation --kind relu --samples 1 --out " + td.file("x.csv")).code == 2);
    CHECK(run_cli("plot-activation --kind relu --min 2 --max -2 --out " + td.file("x.csv")).code == 2);
}

TEST_CASE("run trains from a config and writes csv plus json") {
    TempDir td;
    const std::string cfg = blobs_config(td, "results.csv", "activations = pltanh, relu\n");
    const CliResult r = run_cli("run --config " + cfg);
    INFO(r.output);
    REQUIRE(r.code == 0);
    CHECK(r.output.find("wrote 2 row(s)") != std::string::npos);

    const auto lines = read_lines(td.file("results.csv"));
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == nn::kCsvHeader);
    const auto row0 = split_csv(lines[1]);
    REQUIRE(row0.size() == 10);
    CHECK(row0[0] == "blobs");
    CHECK(row0[1] == "pltanh");
    CHECK(split_csv(lines[2])[1] == "relu");
    // Metric columns parse back as numbers in [0,1].
    for (int c = 3; c <= 7; ++c) {
        const double v = std::stod(row0[size_t(c)]);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(row0[9] == "9");  // seed column

    // The machine-readable parse agrees with the raw text.
    const std::vector<nn::ResultRow> parsed = nn::parse_csv(td.file("results.csv"));
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0].activation == "pltanh");
    CHECK(parsed[0].seed == 9);

    CHECK(fs::exists(td.file("results.json")));

    // A second run appends rows without repeating the header.
    const CliResult again = run_cli("run --config " + cfg);
    REQUIRE(again.code == 0);
    const auto lines2 = read_lines(td.file("results.csv"));
    CHECK(lines2.size() == 5);
    CHECK(lines2[0] == nn::kCsvHeader);
    for (size_t i = 1; i < lines2.size(); ++i) CHECK(lines2[i].find("dataset") == std::string::npos);
}

TEST_CASE("run is deterministic apart from wall-clock time") {
    TempDir td;
    const std::string cfg = blobs_config(td, "a.csv");
    REQUIRE(run_cli("run --config " + cfg).code == 0);
    REQUIRE(run_cli("run --config " + cfg + " --out " + td.file("b.csv")).code == 0);
    const auto a = read_lines(td.file("a.csv")), b = read_lines(td.file("b.csv"));
    REQUIRE(a.size() == b.size());
    for (size_t i = 1; i < a.size(); ++i) {
        const auto fa = split_csv(a[i]), fb = split_csv(b[i]);
        REQUIRE(fa.size() == 10);
        for (size_t c = 0; c < 10; ++c) {
            if (c == 8) continue;  // seconds may differ
            CHECK(fa[c] == fb[c]);
        }
    }
}

TEST_CASE("run respects --seed and --subset overrides") {
    TempDir td;
    const std::string cfg = blobs_config(td, "s.csv");
    const CliResult r = run_cli("run --config " + cfg + " --seed 123 --subset 50");
    REQUIRE(r.code == 0);
    const auto rows = nn::parse_csv(td.file("s.csv"));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].seed == 123);
}

TEST_CASE("missing dataset files exit with the data error code") {
    TempDir td;
    write_text(td.file("bad.cfg"),
               "dataset = mnist\n"
               "data_dir = /nonexistent_pltanh_dir\n"
               "out = " + td.file("x.csv") + "\n");
    const CliResult r = run_cli("run --config " + td.file("bad.cfg"),
                                "PLTANH_DATA_DIR=/nonexistent_pltanh_dir");
    CHECK(r.code == 3);
    CHECK(r.output.find("dataset error") != std::string::npos);
}

TEST_CASE("config errors exit with the usage code") {
    TempDir td;
    SUBCASE("unknown key") {
        write_text(td.file("bad.cfg"), "dataset = blobs\nbananas = 7\n");
        const CliResult r = run_cli("run --config " + td.file("bad.cfg"));
        CHECK(r.code == 2);
        CHECK(r.output.find("unknown key") != std::string::npos);
        CHECK(r.output.find("line 2") != std::string::npos);
    }
    SUBCASE("missing config file") {
        CHECK(run_cli("run --config " + td.file("absent.cfg")).code == 2);
    }
    SUBCASE("mismatched model and data shape") {
        const std::string cfg = blobs_config(td, "x.csv", "blobs_size = 16\n");
        const CliResult r = run_cli("run --config " + cfg);
        CHECK(r.code == 2);
        CHECK(r.output.find("expects") != std::string::npos);
    }
    SUBCASE("no subcommand") { CHECK(run_cli("").code == 2); }
}

TEST_CASE("sweep scans alphas and reports the best") {
    TempDir td;
    const std::string cfg = blobs_config(td, "sweep.csv");
    const CliResult r = run_cli("sweep --config " + cfg + " --alphas 0.01,0.1");
    INFO(r.output);
    REQUIRE(r.code == 0);
    CHECK(r.output.find("best alpha:") != std::string::npos);
    const auto rows = nn::parse_csv(td.file("sweep.csv"));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].activation == "pltanh");
    CHECK(rows[0].alpha == 0.01);
    CHECK(rows[1].alpha == 0.1);
    CHECK(fs::exists(td.file("sweep.json")));
}

TEST_CASE("sweep rejects bad alpha lists") {
    TempDir td;
    const std::string cfg = blobs_config(td, "x.csv");
    CHECK(run_cli("sweep --config " + cfg + " --alphas ,").code == 2);
    CHECK(run_cli("sweep --config " + cfg + " --alphas=-0.5").code == 2);
    CHECK(run_cli("sweep --config " + cfg + " --alphas 0.1,banana").code == 2);
}

TEST_CASE("gradcheck --scalar-only verifies the activation derivatives") {
    const CliResult r = run_cli("gradcheck --scalar-only");
    INFO(r.output);
    CHECK(r.code == 0);
    CHECK(r.output.find("[PASS]") != std::string::npos);
    CHECK(r.output.find("FAIL") == std::string::npos);
    CHECK(r.output.find("whole-network") == std::string::npos);
}

TEST_CASE("help exits cleanly") {
    const CliResult r = run_cli("--help");
    CHECK(r.code == 0);
    CHECK(r.output.find("run") != std::string::npos);
}
