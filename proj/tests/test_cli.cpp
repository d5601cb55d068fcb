#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stochhom/config.hpp"
#include "stochhom/io.hpp"

using namespace stochhom;
namespace fs = std::filesystem;
using nlohmann::json;

#ifndef STOCHHOM_CLI_PATH
#error "STOCHHOM_CLI_PATH must be defined by the build"
#endif

namespace {

struct CliResult {
    int exit_code;
    std::string stderr_text;
};

fs::path scratch_root() {
    const fs::path p = fs::temp_directory_path() / "stochhom_cli_tests";
    fs::create_directories(p);
    return p;
}

CliResult run_cli(const std::string& args, const std::string& tag) {
    const fs::path err_file = scratch_root() / (tag + ".stderr");
    const std::string cmd =
        std::string(STOCHHOM_CLI_PATH) + " " + args + " 2> " + err_file.string();
    const int raw = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::ifstream in(err_file);
    std::ostringstream buf;
    buf << in.rdbuf();
    r.stderr_text = buf.str();
    return r;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = scratch_root() / name;
    fs::remove_all(p);
    return p;
}

// quick settings shared by the CLI smoke runs (Test A-I, tiny meshes)
const std::string kQuick =
    "--set L=4 --set h=1/12 --set h0=1/16 --set h1=1/16 --set distribution=uniform";

}  // namespace

TEST_CASE("parse_config: defaults from an empty file") {
    const auto c = cli::parse_config_text("", {});
    CHECK(c.test_case == micro::TestCase::a1);
    CHECK(c.epsilon == doctest::Approx(0.125));
    CHECK(c.M == 1);
    CHECK(c.f_value == 10.0);
    CHECK(c.trunc_bound == 1.5);
    CHECK(c.n0 == 100);
    CHECK(c.n1 == 96);
    CHECK(c.cell_subdivisions() == 60);  // A-I default
    CHECK(c.distribution == micro::Distribution::truncated_normal);
    CHECK(c.degree == 1);
}

TEST_CASE("parse_config: sections, fractions, lists, overrides") {
    const std::string text =
        "[problem]\n"
        "test_case = B\n"
        "epsilon = 1/4\n"
        "# comment line\n"
        "[mesh]\n"
        "h = 1/36\n"
        "[random]\n"
        "distribution = uniform\n"
        "[study]\n"
        "L_list = 4, 16, 64\n"
        "scale_list = 0.25,0.5,1\n";
    const auto c = cli::parse_config_text(text, {"L=484", "h1=1/40"});
    CHECK(c.test_case == micro::TestCase::b);
    CHECK(c.epsilon == doctest::Approx(0.25));
    CHECK(c.n_cell == 36);
    CHECK(c.L == 484);
    CHECK(c.n1 == 40);
    CHECK(c.study.L_list == std::vector<int>{4, 16, 64});
    CHECK(c.study.scale_list == std::vector<double>{0.25, 0.5, 1.0});
    CHECK(c.cell_subdivisions() == 36);
}

TEST_CASE("parse_config: errors name the key and line") {
    CHECK_THROWS_WITH_AS(cli::parse_config_text("[problem]\nnot_a_key = 3\n", {}),
                         doctest::Contains("not_a_key"), ConfigError);
    try {
        cli::parse_config_text("[mesh]\n\nh = abc\n", {});
        FAIL("expected throw");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        CHECK(std::string(e.what()).find("'h'") != std::string::npos);
    }
    CHECK_THROWS_AS(cli::parse_config_text("[nope]\n", {}), ConfigError);
    CHECK_THROWS_AS(cli::parse_config_text("", {"epsilon"}), ConfigError);
}

TEST_CASE("parse_config: block-alignment invariant enforcement") {
    // defaults have h1 = 1/96, which 1/7-width blocks do not align with
    CHECK_THROWS_AS(cli::parse_config_text("[problem]\nepsilon = 1/7\n", {}), ConfigError);
    // an aligned override is accepted
    const auto ok = cli::parse_config_text("[problem]\nepsilon = 1/7\n[mesh]\nh1 = 1/98\n", {});
    CHECK(ok.n1 == 98);
}

TEST_CASE("config echo reparses to the same configuration") {
    const auto c = cli::parse_config_text(
        "[problem]\nepsilon = 1/4\n[mesh]\nh = 1/24\n[random]\nmaster_seed = 77\n", {});
    const std::string echo = cli::config_echo(c);
    const auto back = cli::parse_config_text(echo, {});
    CHECK(back.epsilon == c.epsilon);
    CHECK(back.master_seed == c.master_seed);
    CHECK(back.cell_subdivisions() == c.cell_subdivisions());
    CHECK(back.n1 == c.n1);
    CHECK(back.study.L_list == c.study.L_list);
}

TEST_CASE("exit codes per category") {
    CHECK(cli::exit_code(ErrorCategory::config) == 2);
    CHECK(cli::exit_code(ErrorCategory::solver) == 3);
    CHECK(cli::exit_code(ErrorCategory::placement) == 4);
    CHECK(cli::exit_code(ErrorCategory::io) == 5);
}

TEST_CASE("cli: two-stage smoke run emits the documented artifacts") {
    const fs::path out = fresh_dir("two_stage_smoke");
    const auto r = run_cli("two-stage " + kQuick + " --set test_case=A_I --out " +
                               out.string(),
                           "smoke");
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(out / "u0_field.vtk"));
    CHECK(fs::exists(out / "u0_field.csv"));
    CHECK(fs::exists(out / "equivalent_stats.csv"));
    CHECK(fs::exists(out / "tensors.csv"));
    CHECK(fs::exists(out / "manifest.json"));

    const json manifest = json::parse(io::read_text_file((out / "manifest.json").string()));
    CHECK(manifest["subcommand"] == "two-stage");
    CHECK(manifest["metrics"].contains("delta"));
    CHECK(manifest["outputs"]["fields"]["u0_field"]["primary"] == true);
}

TEST_CASE("cli: runs are byte-identical across repetition and workers") {
    const fs::path a = fresh_dir("repro_a");
    const fs::path b = fresh_dir("repro_b");
    const fs::path c = fresh_dir("repro_c");
    REQUIRE(run_cli("two-stage " + kQuick + " --seed 31 --out " + a.string(), "ra").exit_code == 0);
    REQUIRE(run_cli("two-stage " + kQuick + " --seed 31 --out " + b.string(), "rb").exit_code == 0);
    REQUIRE(run_cli("two-stage " + kQuick + " --seed 31 --workers 3 --out " + c.string(),
                    "rc").exit_code == 0);

    for (const char* f : {"u0_field.csv", "tensors.csv", "equivalent_stats.csv"}) {
        const auto ta = io::read_text_file((a / f).string());
        CHECK(ta == io::read_text_file((b / f).string()));
        CHECK(ta == io::read_text_file((c / f).string()));
    }
}

TEST_CASE("cli: a run is reproducible from its manifest alone") {
    const fs::path a = fresh_dir("manifest_a");
    REQUIRE(run_cli("two-stage " + kQuick + " --seed 55 --out " + a.string(), "ma").exit_code == 0);
    const json manifest = json::parse(io::read_text_file((a / "manifest.json").string()));

    const fs::path cfg = scratch_root() / "replay.cfg";
    io::write_text_file(cfg.string(), manifest["config_echo"].get<std::string>());
    const fs::path b = fresh_dir("manifest_b");
    REQUIRE(run_cli("two-stage --config " + cfg.string() + " --out " + b.string(),
                    "mb").exit_code == 0);

    for (const char* f : {"u0_field.csv", "tensors.csv", "equivalent_stats.csv"})
        CHECK(io::read_text_file((a / f).string()) == io::read_text_file((b / f).string()));
}

TEST_CASE("cli: refuses to overwrite a previous run") {
    const fs::path out = fresh_dir("no_overwrite");
    REQUIRE(run_cli("homogenize " + kQuick + " --out " + out.string(), "ow1").exit_code == 0);
    const auto r = run_cli("homogenize " + kQuick + " --out " + out.string(), "ow2");
    CHECK(r.exit_code == 5);
    CHECK(r.stderr_text.find("category=io") != std::string::npos);
}

TEST_CASE("cli: compare composes two runs") {
    const fs::path ts = fresh_dir("cmp_two_stage");
    const fs::path ref = fresh_dir("cmp_reference");
    const fs::path cmp = fresh_dir("cmp_out");
    REQUIRE(run_cli("two-stage " + kQuick + " --seed 5 --out " + ts.string(), "c1").exit_code == 0);
    REQUIRE(run_cli("reference " + kQuick + " --seed 5 --out " + ref.string(), "c2").exit_code == 0);
    const auto r = run_cli("compare --out " + cmp.string() + " " + ts.string() + " " +
                               ref.string(),
                           "c3");
    REQUIRE(r.exit_code == 0);

    const std::string csv = io::read_text_file((cmp / "relative_error.csv").string());
    std::istringstream lines(csv);
    std::string header, row, extra;
    std::getline(lines, header);
    std::getline(lines, row);
    CHECK(header == "field,reference,relative_error");
    CHECK_FALSE(row.empty());
    CHECK_FALSE(std::getline(lines, extra));  // exactly one data row

    const json manifest = json::parse(io::read_text_file((cmp / "manifest.json").string()));
    const double err = manifest["metrics"]["relative_error"].get<double>();
    CHECK(err >= 0.0);
    CHECK(err < 0.5);
}

TEST_CASE("cli: config errors exit with code 2 and a parsable line") {
    const auto r = run_cli("two-stage --set epsilon=1/7 --out " +
                               fresh_dir("bad_eps").string(),
                           "bad_eps");
    CHECK(r.exit_code == 2);
    CHECK(r.stderr_text.rfind("error: category=config", 0) == 0);

    const auto r2 = run_cli("direct " + kQuick + " --set n_fine=8 --out " +
                                fresh_dir("bad_fine").string(),
                            "bad_fine");
    CHECK(r2.exit_code == 2);
}

TEST_CASE("cli: placement failures exit with code 4") {
    const auto r = run_cli(
        "cell --set test_case=B --set n_ellipses=400 --set axis_min=0.02 "
        "--set axis_max=0.02 --set h=1/12 --out " +
            fresh_dir("bad_pack").string(),
        "bad_pack");
    CHECK(r.exit_code == 4);
    CHECK(r.stderr_text.find("category=placement") != std::string::npos);
}

TEST_CASE("cli: cell run dumps geometry and tensor") {
    const fs::path out = fresh_dir("cell_run");
    const auto r = run_cli("cell --set test_case=B --set n_ellipses=3 --set h=1/16 --out " +
                               out.string(),
                           "cell");
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(out / "corrector_e1.vtk"));
    CHECK(fs::exists(out / "corrector_e2.vtk"));
    CHECK(fs::exists(out / "geometry.txt"));
    const std::string tensor_csv = io::read_text_file((out / "equivalent_tensor.csv").string());
    CHECK(tensor_csv.rfind("sample_index,block_k1,block_k2,a11,", 0) == 0);
}

TEST_CASE("cli: direct run emits the oscillatory-solve field") {
    const fs::path out = fresh_dir("direct_run");
    const auto r = run_cli("direct " + kQuick + " --set n_fine=32 --out " + out.string(),
                           "direct");
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(out / "u_eps_field.vtk"));
    CHECK(fs::exists(out / "u_eps_field.csv"));
}

TEST_CASE("cli: study subcommands emit their csv artifacts") {
    const fs::path var_out = fresh_dir("study_var");
    const auto rv = run_cli(
        "study-variance " + kQuick + " --set M_list=1,2 --set L=16 --set h=1/8 --out " +
            var_out.string(),
        "sv");
    REQUIRE(rv.exit_code == 0);
    const std::string var_csv = io::read_text_file((var_out / "variance_study.csv").string());
    CHECK(var_csv.rfind("M,var_a11,delta", 0) == 0);

    const fs::path delta_out = fresh_dir("study_delta");
    const auto rd = run_cli(
        "study-delta " + kQuick +
            " --set epsilon=1/4 --set h=1/8 --set h1=1/16 --set samples=4 "
            "--set scale_list=0.5,1 --out " +
            delta_out.string(),
        "sd");
    REQUIRE(rd.exit_code == 0);
    const std::string delta_csv = io::read_text_file((delta_out / "delta_study.csv").string());
    CHECK(delta_csv.rfind("scale,mean_sq_h1_error", 0) == 0);
}

TEST_CASE("cli: study-samples emits the table schema") {
    const fs::path out = fresh_dir("study_samples");
    const auto r = run_cli(
        "study-samples --set L_list=1,4 --set replicates=2 --set h=1/8 "
        "--set distribution=uniform --out " +
            out.string(),
        "t1");
    REQUIRE(r.exit_code == 0);
    const std::string csv = io::read_text_file((out / "paired_comparison.csv").string());
    std::istringstream lines(csv);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "L,mu11,astar11,error,error_se");
    int rows = 0;
    std::string row;
    while (std::getline(lines, row))
        if (!row.empty()) ++rows;
    CHECK(rows == 2);
}
