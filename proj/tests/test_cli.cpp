#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "ssrmap/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out;
};

Result run(const std::string& args) {
    const std::string cmd = std::string(SSRMAP_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ssrmap_cli_test_" + std::to_string(::getpid())) / name;
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const std::string kScenario = R"({
  "id": "smoke",
  "design": {"delta_star": 0.5, "n1": 40},
  "rule": "bayes_mean",
  "prior": {"mean": 1.0, "ess": 25},
  "replications": 2000,
  "seed": 11,
  "sweeps": [{"name": "n1", "values": [20, 40]}, {"name": "rule", "values": ["pooled", "bayes_mean"]}]
})";

}  // namespace

TEST_CASE("samplesize") {
    auto r = run("samplesize --sigma2 1 --delta 0.5");
    CHECK(r.code == 0);
    CHECK(r.out.find("n: 128") != std::string::npos);
    r = run("samplesize --sigma2 1 --delta 0.5 --json");
    CHECK(json::parse(r.out)["n"] == 128);
    r = run("samplesize --sigma2 1");
    CHECK(r.code == 2);
    CHECK(r.out.find("delta_star") != std::string::npos);
    r = run("samplesize --builtin stjohns --rule median --delta 2.515 --json");
    CHECK(r.code == 0);
    CHECK(json::parse(r.out)["rule"] == "median");
    r = run("samplesize --builtin stjohns --rule mode --delta 2.515");
    CHECK(r.code == 2);
    const auto dir = scratch("ss");
    write(dir / "cfg.json", R"({"design": {"delta_star": 0.5, "alpha": 0.025}, "sigma2": 1})");
    r = run("samplesize --config " + (dir / "cfg.json").string() + " --out " + dir.string());
    CHECK(r.code == 0);
    CHECK(json::parse(slurp(dir / "samplesize.json"))["n"] == 128);
    CHECK(fs::exists(dir / "samplesize.json.manifest.json"));
}

TEST_CASE("update") {
    const auto dir = scratch("up");
    write(dir / "prior.json", R"({"components": [{"weight": 1, "shape": 3, "rate": 2}]})");
    auto r = run("update --prior " + (dir / "prior.json").string() + " --var 1 --df 58 --json");
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["posterior"]["components"][0]["shape"] == 32.0);
    CHECK(j["posterior"]["components"][0]["rate"] == 31.0);
    CHECK(j["posterior_mean_sigma2"].get<double>() == doctest::Approx(1.0));
    CHECK(run("update --prior " + (dir / "prior.json").string() + " --var 1 --df 0").code == 2);
    CHECK(run("update --prior " + (dir / "prior.json").string() + " --var -1 --df 3").code == 2);
    CHECK(run("update --prior " + (dir / "missing.json").string() + " --var 1 --df 3").code == 2);
    r = run("update --builtin stjohns --var 39.56 --df 73 --json");
    CHECK(r.code == 0);
    CHECK(json::parse(r.out)["posterior"]["components"].size() == 2);
}

TEST_CASE("map-fit") {
    const auto dir = scratch("mf");
    write(dir / "one.csv", "trial_id,sample_variance,df\nA,3,10\n");
    CHECK(run("map-fit " + (dir / "one.csv").string()).code == 2);
    write(dir / "bad.csv", "trial_id,sample_variance\nA,3\nB,4\n");
    CHECK(run("map-fit " + (dir / "bad.csv").string()).code == 2);

    write(dir / "quick.json", R"({"iterations": 4000, "burn_in": 1000, "thinning": 2})");
    const std::string args = "map-fit " + std::string(SSRMAP_DATA_DIR) + "/blood_pressure_trials.csv --config " +
                             (dir / "quick.json").string();
    auto r = run(args + " --json");
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["ess"].get<double>() == doctest::Approx(41.0).epsilon(0.2));
    CHECK(j["summary"]["sigma2"]["mean"].get<double>() == doctest::Approx(251.47).epsilon(0.1));
    CHECK(run(args + " --json").out == r.out);

    // A hopeless R-hat threshold forces the diagnostic exit unless --force.
    write(dir / "strict.json", R"({"iterations": 400, "burn_in": 100, "thinning": 1, "rhat_threshold": 1.0000001})");
    const std::string strict = "map-fit " + std::string(SSRMAP_DATA_DIR) + "/blood_pressure_trials.csv --config " +
                               (dir / "strict.json").string();
    r = run(strict);
    CHECK(r.code == 3);
    CHECK(r.out.find("R-hat") != std::string::npos);
    CHECK(run(strict + " --force --out " + dir.string()).code == 0);
    CHECK(fs::exists(dir / "map_fit.json"));
}

TEST_CASE("simulate") {
    const auto dir = scratch("sim");
    write(dir / "s.json", kScenario);
    const auto t0 = std::chrono::steady_clock::now();
    auto r = run("simulate " + (dir / "s.json").string() + " --reps 100");
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(5));
    REQUIRE(r.code == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 5);

    const auto one = run("simulate " + (dir / "s.json").string() + " --workers 1").out;
    CHECK(one == run("simulate " + (dir / "s.json").string() + " --workers 4").out);
    ::setenv("SSRMAP_WORKERS", "3", 1);
    CHECK(one == run("simulate " + (dir / "s.json").string()).out);
    ::setenv("SSRMAP_WORKERS", "many", 1);
    CHECK(run("simulate " + (dir / "s.json").string()).code == 2);
    ::unsetenv("SSRMAP_WORKERS");
    CHECK(one != run("simulate " + (dir / "s.json").string() + " --seed 12").out);

    r = run("simulate " + (dir / "s.json").string() + " --out " + dir.string());
    CHECK(r.code == 0);
    CHECK(slurp(dir / "smoke.csv") == one);
    const auto manifest = json::parse(slurp(dir / "smoke.csv.manifest.json"));
    CHECK(manifest["subcommand"] == "simulate");
    CHECK(manifest["seed"] == 11);
    CHECK_NOTHROW(ssrmap::io::scenario_from_json(manifest["config"]));

    auto dup = json::parse(kScenario);
    dup["sweeps"].push_back({{"name", "rule"}, {"values", {"pooled"}}});
    write(dir / "dup.json", dup.dump());
    r = run("simulate " + (dir / "dup.json").string());
    CHECK(r.code == 2);
    CHECK(r.out.find("duplicate") != std::string::npos);
    write(dir / "broken.json", "{ not json");
    CHECK(run("simulate " + (dir / "broken.json").string()).code == 2);
}

TEST_CASE("reproduce") {
    const auto dir = scratch("rep");
    auto r = run("reproduce fig6 --out " + dir.string());
    REQUIRE(r.code == 0);
    const auto first = slurp(dir / "fig6.csv");
    CHECK(run("reproduce fig6 --out " + dir.string()).code == 0);
    CHECK(slurp(dir / "fig6.csv") == first);
    CHECK(fs::exists(dir / "fig6.csv.manifest.json"));
    CHECK(run("reproduce table1 --out " + dir.string()).code == 0);
    CHECK(slurp(dir / "table1.csv").rfind("parameter,mean,sd,median,q2.5,q97.5\nsigma2,", 0) == 0);
    r = run("reproduce fig9 --out " + dir.string());
    CHECK(r.code == 2);
    CHECK(r.out.find("fig1, fig2") != std::string::npos);
    CHECK(run("reproduce fig5 --reps 20 --out " + dir.string()).code == 0);
}

TEST_CASE("usage errors") {
    CHECK(run("").code == 2);
    CHECK(run("frobnicate").code == 2);
    CHECK(run("--help").code == 0);
}
