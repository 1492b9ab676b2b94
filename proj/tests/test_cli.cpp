#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bsdelab/config.hpp"
#include "bsdelab/parallel.hpp"
#include "bsdelab/runner.hpp"

using namespace bsdelab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("bsdelab_cli_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string s;
    std::getline(in, s);
    return s;
}

std::string cli() {
    const char* c = std::getenv("BSDELAB_CLI");
    return c ? c : "";
}

// exit status of the CLI with output discarded
int call(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + "'" + cli() + "' " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string write_config(const fs::path& dir, const json& j) {
    const auto p = dir / "config.json";
    std::ofstream(p) << j.dump(2);
    return p.string();
}

ExperimentConfig small_solve() {
    auto c = preset("jump-poisson-xi1");
    c.model.jump.reset();
    c.driver.psi_dep = false;
    c.mc.n_paths = 2000;
    c.grid = TimeGrid(1.0, 40, 2.0);
    c.terminal.ladder = {1, 2, 4};
    c.regression.cells = 8;
    return c;
}

std::ostringstream quiet;

}  // namespace

TEST_CASE("shipped presets validate and the config files match them") {
    const auto names = preset_names();
    REQUIRE(names.size() == 5);
    for (const auto& n : names) {
        const auto c = preset(n);
        CHECK(c.name == n);
        CHECK(validate_model(c.model, c.driver, c.terminal, c.grid).passed());
        const auto file = fs::path(BSDELAB_SOURCE_DIR) / "configs" / (n + ".json");
        REQUIRE(fs::exists(file));
        CHECK(config_to_json(config_from_file(file.string())) == config_to_json(c));
    }
}

TEST_CASE("an unknown preset lists the available ones") {
    try {
        preset("nope");
        FAIL("no throw");
    } catch (const ConfigError& e) {
        const std::string m = e.what();
        for (const auto& n : preset_names()) CHECK(m.find(n) != std::string::npos);
    }
}

TEST_CASE("config JSON round trip") {
    for (const auto& n : preset_names()) {
        const auto j = config_to_json(preset(n));
        CHECK(config_to_json(config_from_json(j)) == j);
    }
    // piecewise coefficients with an infinite piece survive too
    auto j = config_to_json(preset("paper-xi1-q3"));
    j["driver"]["eta"] = {{"breaks", {0.5}}, {"values", {1.0, "inf"}}};
    const auto c = config_from_json(j);
    CHECK(std::isinf(c.driver.eta.values[1]));
    CHECK(config_to_json(c)["driver"]["eta"] == j["driver"]["eta"]);
}

TEST_CASE("config errors name the problem") {
    SECTION("malformed JSON reports the byte position") {
        try {
            config_from_text("{\"model\": {\"preset\": \"BM\",,}}");
            FAIL("no throw");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("byte 27") != std::string::npos);
        }
    }
    SECTION("unknown keys") {
        auto j = config_to_json(preset("bm-simulate"));
        j["grid"]["steps"] = 5;
        CHECK_THROWS_WITH(config_from_json(j), Catch::Matchers::ContainsSubstring("steps"));
    }
    SECTION("bad values") {
        auto j = config_to_json(preset("bm-simulate"));
        j["grid"]["N"] = "many";
        CHECK_THROWS_AS(config_from_json(j), ConfigError);
        j = config_to_json(preset("bm-simulate"));
        j["terminal"]["kind"] = "xi3";
        CHECK_THROWS_AS(config_from_json(j), ConfigError);
        j = config_to_json(preset("bm-simulate"));
        j["pipeline"] = "everything";
        CHECK_THROWS_AS(config_from_json(j), ConfigError);
        j = config_to_json(preset("bm-simulate"));
        j.erase("model");
        CHECK_THROWS_AS(config_from_json(j), ConfigError);
    }
}

TEST_CASE("simulate writes paths, exit CDF and a manifest") {
    const auto dir = scratch("simulate");
    const auto res = run(preset("bm-simulate"), dir.string(), quiet);
    REQUIRE(res.status == kExitOk);
    CHECK(first_line(dir / "paths.csv") == "path_id,node_index,t,x_1,exited_flag,exit_time,exit_sentinel_flag");
    CHECK(first_line(dir / "exit_cdf.csv") == "s,exit_probability,stderr");
    // 200 paths x 101 nodes plus the header
    std::ifstream in(dir / "paths.csv");
    CHECK(std::count(std::istreambuf_iterator<char>(in), {}, '\n') == 200 * 101 + 1);
    const auto m = json::parse(slurp(dir / "manifest.json"));
    CHECK(m["status"] == 0);
    CHECK(m["seed"] == 7);
    for (const auto& f : m["files"]) CHECK(f["sha256"] == sha256_file((dir / f["path"].get<std::string>()).string()));
}

TEST_CASE("SHA-256 of a known string") {
    const auto p = scratch("sha") / "abc.txt";
    std::ofstream(p, std::ios::binary) << "abc";
    CHECK(sha256_file(p.string()) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("manifests are reproducible and independent of the worker count") {
    const auto cfg = small_solve();
    const auto a = scratch("rep_a"), b = scratch("rep_b");
    set_worker_count(1);
    const auto ra = run(cfg, a.string(), quiet);
    set_worker_count(8);
    const auto rb = run(cfg, b.string(), quiet);
    set_worker_count(1);
    REQUIRE(ra.status == kExitOk);
    CHECK(ra.manifest == rb.manifest);
    CHECK(slurp(a / "ladder.csv") == slurp(b / "ladder.csv"));
    auto other = cfg;
    other.mc.seed += 1;
    const auto rc = run(other, scratch("rep_c").string(), quiet);
    CHECK(rc.manifest["files"] != ra.manifest["files"]);
}

TEST_CASE("solve output layout") {
    const auto dir = scratch("solve");
    const auto res = run(small_solve(), dir.string(), quiet);
    REQUIRE(res.status == kExitOk);
    CHECK(first_line(dir / "ladder.csv") ==
          "node_index,t,k,mean_Y,sd_Y,mean_Y_on_exit_event,mean_Y_on_survival_event,max_Y,regression_condition_number");
    const auto lad = json::parse(slurp(dir / "ladder.json"));
    CHECK(lad["levels"].size() == 3);
    CHECK(res.check_passed("ladder_monotone_in_k"));
    CHECK(res.check_passed("apriori_bound"));
    CHECK(json::parse(slurp(dir / "validation.json"))["passed"] == true);
}

TEST_CASE("continuity output layout") {
    auto cfg = small_solve();
    cfg.pipeline = "continuity";
    cfg.mc.n_paths = 4000;
    cfg.density = DensityConfig{};
    cfg.density->pde = PdeGrid{100, 400};
    const auto dir = scratch("continuity");
    const auto res = run(cfg, dir.string(), quiet);
    CHECK((res.status == kExitOk || res.status == kExitCheckFailed));
    CHECK(first_line(dir / "continuity.csv") == "event,delta,mean_Y,stderr,n_event_paths,k_level");
    CHECK(first_line(dir / "continuity_upper.csv") == "event,delta,mean_Y,stderr,n_event_paths,k_level");
    CHECK(res.find("sandwich_xi1") != nullptr);
    CHECK(res.find("pasting_post_tau_exact") != nullptr);
    REQUIRE(res.find("upper_decay_xi1") != nullptr);
    CHECK_FALSE(res.find("upper_decay_xi1")->gated);
    CHECK(fs::exists(dir / "sandwich.json"));
    CHECK(fs::exists(dir / "pasting.json"));
}

TEST_CASE("density output layout") {
    auto cfg = preset("moving-domain-density");
    cfg.density->pde = PdeGrid{200, 800};
    cfg.density->mc_paths = 20000;
    cfg.density->mc_N = 100;
    const auto dir = scratch("density");
    const auto res = run(cfg, dir.string(), quiet);
    CHECK(first_line(dir / "density.csv") == "method,s,survival,density,error_estimate");
    const auto scen = json::parse(slurp(dir / "density_scenario.json"));
    CHECK(scen.contains("mass_balance_error"));
    CHECK(scen.contains("mc_vs_pde_max_abs_diff"));
    CHECK(res.check_passed("density_mass_balance"));
    CHECK(res.find("density_pde_vs_series") == nullptr);  // the domain moves
}

TEST_CASE("CLI exit statuses") {
    REQUIRE_FALSE(cli().empty());
    const auto dir = scratch("exit");
    const std::string out = (dir / "out").string();

    CHECK(call("presets") == 0);
    CHECK(call("simulate --preset bm-simulate --out '" + out + "'") == 0);
    CHECK(fs::exists(dir / "out" / "manifest.json"));

    // the environment variable wins over --out
    const auto env_out = dir / "env";
    CHECK(call("simulate --preset bm-simulate --out '" + out + "'", "BSDELAB_OUT='" + env_out.string() + "'") == 0);
    CHECK(fs::exists(env_out / "paths.csv"));

    // 2: unusable input
    CHECK(call("simulate") == 2);
    CHECK(call("simulate --preset nope") == 2);
    CHECK(call("fly --preset bm-simulate") == 2);
    {
        const auto p = dir / "bad.json";
        std::ofstream(p) << "{\"model\": ";
        CHECK(call("simulate --config '" + p.string() + "'") == 2);
    }
    {
        auto j = config_to_json(preset("bm-simulate"));
        j["driver"]["q"] = 1.0;  // q > 1 required
        CHECK(call("simulate --config '" + write_config(dir, j) + "' --out '" + out + "'") == 2);
        const auto v = json::parse(slurp(dir / "out" / "validation.json"));
        CHECK(v["passed"] == false);
    }

    // 3: every ladder level is ill-posed
    {
        auto j = config_to_json(small_solve());
        j["driver"]["chi"] = 100.0;
        j["terminal"]["kind"] = "bounded";
        j["terminal"].erase("domain");
        j["terminal"]["payoff"] = {{"c", 1.0}};
        CHECK(call("solve --config '" + write_config(dir, j) + "' --out '" + out + "'") == 3);
        const auto m = json::parse(slurp(dir / "out" / "manifest.json"));
        CHECK(m["status"] == 3);
    }

    // 4: a gated check fails; two exit-time nodes without the bridge ruin the MC density
    {
        auto j = config_to_json(preset("paper-xi1-q3"));
        j["density"]["mc_N"] = 2;
        j["density"]["mc_paths"] = 20000;
        j["density"]["M"] = 200;
        j["density"]["N_pde"] = 800;
        j["mc"]["bridge"] = false;
        CHECK(call("density --config '" + write_config(dir, j) + "' --out '" + out + "'") == 4);
        const auto m = json::parse(slurp(dir / "out" / "manifest.json"));
        bool found = false;
        for (const auto& c : m["checks"])
            if (c["name"] == "density_mc_vs_pde") {
                found = true;
                CHECK(c["pass"] == false);
            }
        CHECK(found);
    }
}

TEST_CASE("CLI seed override and worker flag") {
    const auto dir = scratch("seed");
    const auto a = (dir / "a").string(), b = (dir / "b").string(), c = (dir / "c").string();
    REQUIRE(call("simulate --preset bm-simulate --seed 11 --workers 1 --out '" + a + "'") == 0);
    REQUIRE(call("simulate --preset bm-simulate --seed 11 --workers 4 --out '" + b + "'") == 0);
    REQUIRE(call("simulate --preset bm-simulate --out '" + c + "'") == 0);
    CHECK(slurp(fs::path(a) / "manifest.json") == slurp(fs::path(b) / "manifest.json"));
    CHECK(json::parse(slurp(fs::path(a) / "manifest.json"))["seed"] == 11);
    CHECK(slurp(fs::path(a) / "paths.csv") != slurp(fs::path(c) / "paths.csv"));
    CHECK(call("simulate --preset bm-simulate --workers 0") == 2);
}
