// End-to-end checks for the pano binary: each case shells out to the real
// executable and inspects exit codes and printed output.  The binary path is
// baked in by the build as PANO_CLI_PATH.

#include <catch2/catch_amalgamated.hpp>

#include "pano/ppm.hpp"
#include "pano/tensorfile.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#ifndef PANO_CLI_PATH
#error "PANO_CLI_PATH must point at the pano executable"
#endif

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

// Runs one CLI invocation with stdout and stderr captured to a scratch file.
RunResult run_cli(const fs::path& dir, const std::string& args) {
    const fs::path log = dir / "run.log";
    const std::string cmd =
        std::string(PANO_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int raw = std::system(cmd.c_str());
    RunResult r;
#ifdef WIFEXITED
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
#else
    r.exit_code = raw;
#endif
    std::ifstream in(log);
    std::ostringstream text;
    text << in.rdbuf();
    r.output = text.str();
    return r;
}

// Fresh scratch directory per test case so runs cannot see each other's files.
fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "pano_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Parses "key value" lines into a map, keeping the last value per key.
std::map<std::string, double> parse_report(const std::string& text) {
    std::map<std::string, double> out;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        std::istringstream fields(line);
        std::string key, mid;
        double value = 0.0;
        if (fields >> key >> mid) {
            std::istringstream maybe(mid);
            if (maybe >> value && maybe.eof()) {
                out[key] = value;  // "total 822.27"
            } else if (fields >> value) {
                out[key + " " + mid] = value;  // "mean pq 1"
            }
        }
    }
    return out;
}

std::string q(const fs::path& p) { return p.string(); }

}  // namespace

TEST_CASE("pipeline round trip scores perfectly against its own scene", "[cli]") {
    const fs::path dir = scratch_dir("pipeline");
    const fs::path scene = dir / "scene.pswt";
    const fs::path targets = dir / "targets.pswt";
    const fs::path params = dir / "params.pswt";
    const fs::path preds = dir / "preds.pswt";
    const fs::path fused = dir / "fused.pswt";

    auto r = run_cli(dir, "synth --seed 7 --size 64x96 -o " + q(scene));
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    REQUIRE(r.output.find("scene 64x96") != std::string::npos);

    REQUIRE(run_cli(dir, q(scene) + " -o " + q(targets) + " targets").exit_code == 3);
    r = run_cli(dir, "targets " + q(scene) + " -o " + q(targets));
    INFO(r.output);
    REQUIRE(r.exit_code == 0);

    r = run_cli(dir, "params -o " + q(params) +
                         " --levels 1 --base-channels 4 --up-channels 16");
    INFO(r.output);
    REQUIRE(r.exit_code == 0);

    r = run_cli(dir, "forward " + q(scene) + " --params " + q(params) +
                         " --levels 1 -o " + q(preds));
    INFO(r.output);
    REQUIRE(r.exit_code == 0);

    r = run_cli(dir, "fuse " + q(preds) + " --oracle sem,cen,off --targets " +
                         q(targets) + " -o " + q(fused));
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    REQUIRE(r.output.find("fused") != std::string::npos);

    for (const std::string metric : {"pq", "miou", "ap"}) {
        r = run_cli(dir, "eval " + metric + " " + q(fused) + " " + q(scene));
        INFO(metric << ": " << r.output);
        REQUIRE(r.exit_code == 0);
        const auto report = parse_report(r.output);
        REQUIRE(report.at("mean " + metric) == 1.0);
    }
}

TEST_CASE("malformed or missing inputs exit with code 2", "[cli]") {
    const fs::path dir = scratch_dir("badinput");
    const fs::path bad = dir / "bad.pswt";
    std::ofstream(bad) << "XXXX definitely not a tensor container";

    auto r = run_cli(dir, "eval pq " + q(bad) + " " + q(bad));
    INFO(r.output);
    REQUIRE(r.exit_code == 2);

    r = run_cli(dir, "fuse " + q(dir / "missing.pswt") + " -o " + q(dir / "x.pswt"));
    INFO(r.output);
    REQUIRE(r.exit_code == 2);

    // Truncated container: valid magic and version, then a cut-off record.
    std::ofstream trunc(dir / "trunc.pswt", std::ios::binary);
    trunc << "PSWT" << '\x01' << '\x05';
    trunc.close();
    r = run_cli(dir, "eval pq " + q(dir / "trunc.pswt") + " " + q(bad));
    INFO(r.output);
    REQUIRE(r.exit_code == 2);
}

TEST_CASE("contract and usage violations exit with code 3", "[cli]") {
    const fs::path dir = scratch_dir("contract");
    const fs::path scene = dir / "scene.pswt";
    const fs::path params = dir / "params.pswt";
    REQUIRE(run_cli(dir, "synth --seed 3 --size 64x64 -o " + q(scene)).exit_code == 0);
    REQUIRE(run_cli(dir, "params -o " + q(params) +
                             " --levels 1 --base-channels 4 --up-channels 16")
                .exit_code == 0);

    // Oracle substitution has nothing to substitute from without targets.
    auto r = run_cli(dir, "fuse " + q(scene) + " --oracle sem -o " + q(dir / "f.pswt"));
    INFO(r.output);
    REQUIRE(r.exit_code == 3);

    // Declared level count disagrees with the params file.
    r = run_cli(dir, "forward " + q(scene) + " --params " + q(params) +
                         " --levels 2 -o " + q(dir / "p.pswt"));
    INFO(r.output);
    REQUIRE(r.exit_code == 3);

    // Missing required positional.
    r = run_cli(dir, "eval pq");
    INFO(r.output);
    REQUIRE(r.exit_code == 3);

    // No subcommand at all.
    r = run_cli(dir, "");
    INFO(r.output);
    REQUIRE(r.exit_code == 3);

    // Help is a success path, not an error.
    REQUIRE(run_cli(dir, "--help").exit_code == 0);
    REQUIRE(run_cli(dir, "eval --help").exit_code == 0);
}

TEST_CASE("loss subcommand prints the default weighting and a consistent total",
          "[cli]") {
    const fs::path dir = scratch_dir("loss");
    const fs::path scene = dir / "scene.pswt";
    const fs::path targets = dir / "targets.pswt";
    const fs::path params = dir / "params.pswt";
    const fs::path preds = dir / "preds.pswt";
    REQUIRE(run_cli(dir, "synth --seed 11 --size 64x64 -o " + q(scene)).exit_code == 0);
    REQUIRE(run_cli(dir, "targets " + q(scene) + " -o " + q(targets)).exit_code == 0);
    REQUIRE(run_cli(dir, "params -o " + q(params) +
                             " --levels 1 --base-channels 4 --up-channels 16")
                .exit_code == 0);
    REQUIRE(run_cli(dir, "forward " + q(scene) + " --params " + q(params) +
                             " --levels 1 -o " + q(preds))
                .exit_code == 0);

    const auto r = run_cli(dir, "loss " + q(preds) + " " + q(targets));
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    const auto report = parse_report(r.output);
    REQUIRE(report.at("lambda_sem") == 1.0);
    REQUIRE(report.at("lambda_cen") == 200.0);
    REQUIRE(report.at("lambda_baol") == Catch::Approx(0.0025).epsilon(1e-12));

    const double expected = report.at("lambda_sem") * report.at("sem") +
                            report.at("lambda_cen") * report.at("cen") +
                            report.at("lambda_baol") * report.at("baol");
    REQUIRE(report.at("total") == Catch::Approx(expected).epsilon(1e-9));
}

TEST_CASE("render emits parseable ppm images", "[cli]") {
    const fs::path dir = scratch_dir("render");
    const fs::path scene = dir / "scene.pswt";
    const fs::path targets = dir / "targets.pswt";
    REQUIRE(run_cli(dir, "synth --seed 5 --size 48x80 -o " + q(scene)).exit_code == 0);
    REQUIRE(run_cli(dir, "targets " + q(scene) + " -o " + q(targets)).exit_code == 0);

    auto r = run_cli(dir, "render pan " + q(scene) + " -o " + q(dir / "pan.ppm"));
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    const pano::RgbImage pan = pano::read_ppm((dir / "pan.ppm").string());
    REQUIRE(pan.height == 48);
    REQUIRE(pan.width == 80);

    r = run_cli(dir, "render offsets " + q(targets) + " -o " + q(dir / "off.ppm"));
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    const pano::RgbImage off = pano::read_ppm((dir / "off.ppm").string());
    REQUIRE(off.height == 48);
    REQUIRE(off.width == 80);
}

TEST_CASE("bench prints one timing line per stage", "[cli]") {
    const fs::path dir = scratch_dir("bench");
    const auto r = run_cli(
        dir, "bench --size 64x64 --threads 2 --reps 5 --levels 1 --base-channels 4");
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    for (const std::string stage : {"forward", "nms", "assign", "vote", "construct"}) {
        REQUIRE(r.output.find(stage + " mean ") != std::string::npos);
    }
    REQUIRE(run_cli(dir, "bench --reps 2").exit_code == 3);
}
