#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "slgraph/cli.hpp"

using namespace slg;
namespace fs = std::filesystem;

namespace {

std::string data(const std::string& f) { return std::string(SLG_DATA_DIR) + "/" + f; }

fs::path fresh_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("slgraph-cli-" + name);
    fs::remove_all(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

nlohmann::json load(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

int run_args(std::vector<std::string> args) {
    args.insert(args.begin(), "slgraph");
    std::vector<const char*> argv;
    for (auto& a : args) argv.push_back(a.c_str());
    auto parsed = cli::parse(static_cast<int>(argv.size()), argv.data());
    if (auto* c = std::get_if<int>(&parsed)) return *c;
    return cli::run_guarded(std::get<cli::RunConfig>(parsed)).code;
}

}  // namespace

TEST_CASE("classify the Legendre edge") {
    const auto out = fresh_dir("classify");
    REQUIRE(run_args({"classify", data("legendre-edge.json"), "--out", out.string()}) == 0);
    const auto j = load(out / "classify.json");
    CHECK(j["schema_version"] == 1);
    CHECK_FALSE(j["defaults"].contains("workers"));
    const auto& c = j["classification"];
    CHECK(c["totals"]["N"] == 2);
    CHECK(c["totals"]["essentially_selfadjoint"] == false);
    CHECK(c["endpoints"][0]["class"] == "LC");
    CHECK(c["endpoints"][1]["class"] == "LC");
    CHECK(c["classification_disagreements"] == 0);
}

TEST_CASE("spectrum of the Legendre edge") {
    const auto out = fresh_dir("spectrum");
    REQUIRE(run_args({"spectrum", "--extension", "friedrichs", "--lambda-max", "200", data("legendre-edge.json"),
                      "--out", out.string()}) == 0);
    const auto j = load(out / "spectrum.json");
    REQUIRE(j["eigenvalues"].size() == 14);
    for (int n = 0; n < 14; ++n) CHECK(std::abs(j["eigenvalues"][n]["lambda"].get<double>() - n * (n + 1.0)) <= 1e-6);
    CHECK(j["metadata"]["consistent"] == true);
    const auto csv = slurp(out / "staircase.csv");
    CHECK(csv.rfind("lambda,N\n", 0) == 0);
}

TEST_CASE("outputs are byte-identical across runs and worker counts") {
    const auto a = fresh_dir("bytes-a"), b = fresh_dir("bytes-b");
    for (const auto& [dir, workers] : {std::pair{a, "1"}, std::pair{b, "3"}}) {
        REQUIRE(run_args({"spectrum", data("mixed.json"), "--extension", "kirchhoff", "--lambda-max", "150", "--out",
                          dir.string(), "--workers", workers}) == 0);
        REQUIRE(run_args({"flow", data("mixed.json"), "--out", dir.string(), "--workers", workers}) == 0);
    }
    for (const char* f : {"spectrum.json", "staircase.csv", "flow.json", "flow.csv"})
        CHECK(slurp(a / f) == slurp(b / f));
}

TEST_CASE("full pipeline and report") {
    SECTION("free edge") {
        const auto out = fresh_dir("free");
        for (const char* cmd : {"classify", "flow", "extensions"})
            REQUIRE(run_args({cmd, data("free-edge.json"), "--out", out.string()}) == 0);
        REQUIRE(run_args({"spectrum", data("free-edge.json"), "--lambda-max", "1000", "--out", out.string()}) == 0);
        REQUIRE(run_args({"weyl", data("free-edge.json"), "--lambda-max", "5000", "--out", out.string()}) == 0);
        REQUIRE(run_args({"report", data("free-edge.json"), "--out", out.string()}) == 0);
        const auto r = load(out / "report.json");
        CHECK(r["missing"].empty());
        CHECK(r["weyl"]["interlacing"]["worst_gap"] == 1);
        CHECK(r.contains("theory_map"));
        const auto txt = slurp(out / "report.txt");
        CHECK(txt.find("9.869604401") != std::string::npos);
        CHECK(txt.find("max gap 1 <= deficiency 2 holds") != std::string::npos);
        const auto w = load(out / "weyl.json");
        CHECK(w["verdict"]["c_class_disagrees_with_c_der"] == true);
        CHECK(slurp(out / "weyl.csv").rfind("lambda,N_P,N_F,C_der_sqrt_lambda,C_class_sqrt_lambda\n", 0) == 0);
        const auto e = load(out / "extensions.json");
        CHECK(e["all_valid"] == true);
        const auto f = load(out / "flow.json");
        for (const auto& t : f["trajectories"]) CHECK(t["trajectory"]["energy_drift"].get<double>() <= 1e-8);
    }
    SECTION("all limit-point graph") {
        const auto out = fresh_dir("lp");
        REQUIRE(run_args({"classify", data("all-lp.json"), "--out", out.string()}) == 0);
        REQUIRE(run_args({"report", data("all-lp.json"), "--out", out.string()}) == 0);
        const auto txt = slurp(out / "report.txt");
        CHECK(txt.find("essentially self-adjoint; flow complete; unique extension") != std::string::npos);
        const auto r = load(out / "report.json");
        CHECK(r["missing"].size() == 4);
    }
    SECTION("mixed graph") {
        const auto out = fresh_dir("mixed");
        REQUIRE(run_args({"classify", data("mixed.json"), "--out", out.string()}) == 0);
        REQUIRE(run_args({"weyl", data("mixed.json"), "--extension", "kirchhoff", "--lambda-max", "3000", "--out",
                          out.string()}) == 0);
        REQUIRE(run_args({"report", data("mixed.json"), "--out", out.string()}) == 0);
        const auto txt = slurp(out / "report.txt");
        CHECK(txt.find("C_der = ") != std::string::npos);
        CHECK(txt.find("C_class = ") != std::string::npos);
        CHECK(txt.find("class constant differs") != std::string::npos);
        const auto w = load(out / "weyl.json");
        CHECK(w["slope_difference"].get<double>() <= 0.03 * w["verdict"]["c_emp"].get<double>());
    }
}

TEST_CASE("exit codes") {
    const auto out = fresh_dir("errors");
    CHECK(run_args({}) == 1);
    CHECK(run_args({"spectrum", data("free-edge.json"), "--out", out.string()}) == 1);
    CHECK(run_args({"spectrum", data("free-edge.json"), "--lambda-max", "abc"}) == 1);
    CHECK(run_args({"classify", data("no-such-file.json"), "--out", out.string()}) == 1);
    CHECK(run_args({"spectrum", data("free-edge.json"), "--lambda-max", "100", "--extension", "robin", "--out",
                    out.string()}) == 1);
    CHECK(run_args({"report", data("free-edge.json"), "--out", (out / "empty").string()}) == 1);
    CHECK(run_args({"flow", data("free-edge.json"), "--energy", "-1", "--out", out.string()}) == 1);
    CHECK(run_args({"spectrum", data("all-lp.json"), "--lambda-max", "5", "--out", out.string()}) == 1);
    CHECK(run_args({"frobnicate", data("free-edge.json")}) == 1);
    {
        std::ofstream bad(out / "bad.json");
        bad << "{\"vertices\": [";
    }
    CHECK(run_args({"classify", (out / "bad.json").string(), "--out", out.string()}) == 1);
    CHECK(run_args({"classify", "--help"}) == 0);

    cli::RunConfig c;
    c.subcommand = "weyl";
    c.input = data("legendre-edge.json");
    c.lambda_max = 30.0;
    c.out = out.string();
    // fewer eigenvalues than the slope fit needs
    CHECK(cli::run_guarded(c).code == 1);
}
