// Command-line front end: subcommand dispatch, artifact emission, manifests.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stochhom/config.hpp"
#include "stochhom/io.hpp"
#include "stochhom/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stochhom;

namespace {

constexpr const char* kToolVersion = "stochhom 0.1.0";

struct RunContext {
    cli::CommandSpec spec;
    pipeline::RunConfig config;
    fs::path out_dir;
    json manifest;
    std::map<std::string, double> timings_ms;
};

class Stopwatch {
public:
    explicit Stopwatch(RunContext& ctx, std::string name)
        : ctx_(ctx), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
    ~Stopwatch() {
        const auto end = std::chrono::steady_clock::now();
        ctx_.timings_ms[name_] =
            std::chrono::duration<double, std::milli>(end - start_).count();
    }

private:
    RunContext& ctx_;
    std::string name_;
    std::chrono::steady_clock::time_point start_;
};

json mat_to_json(const Mat2& m) {
    return json::array({json::array({m.a11, m.a12}), json::array({m.a21, m.a22})});
}

RunContext prepare(const cli::CommandSpec& spec) {
    RunContext ctx;
    ctx.spec = spec;

    std::vector<std::string> overrides = spec.overrides;
    if (spec.has_seed) overrides.push_back("master_seed=" + std::to_string(spec.seed));
    if (spec.has_workers) overrides.push_back("workers=" + std::to_string(spec.workers));
    ctx.config = cli::parse_config(spec.config_path, overrides);

    ctx.out_dir = spec.output_dir.empty() ? fs::path("out_" + spec.subcommand)
                                          : fs::path(spec.output_dir);
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + ctx.out_dir.string());
    if (fs::exists(ctx.out_dir / "manifest.json"))
        throw IoError("output directory " + ctx.out_dir.string() +
                      " already holds a run (manifest.json present); refusing to overwrite");

    ctx.manifest["tool"] = kToolVersion;
    ctx.manifest["subcommand"] = spec.subcommand;
    ctx.manifest["seed"] = ctx.config.master_seed;
    ctx.manifest["config_echo"] = cli::config_echo(ctx.config);
    ctx.manifest["outputs"] = json::object();
    return ctx;
}

void finish(RunContext& ctx) {
    json timings = json::object();
    for (const auto& [name, ms] : ctx.timings_ms) timings[name] = ms;
    ctx.manifest["timings_ms"] = timings;
    io::write_text_file((ctx.out_dir / "manifest.json").string(),
                        ctx.manifest.dump(2) + "\n");
}

void emit_field(RunContext& ctx, const fem::SolutionField& field, const std::string& stem,
                bool primary) {
    const std::string csv_name = stem + ".csv";
    const std::string vtk_name = stem + ".vtk";
    fem::write_field_csv(field, (ctx.out_dir / csv_name).string());
    mesh::write_vtk(*field.mesh, field.values, stem, (ctx.out_dir / vtk_name).string());
    json meta;
    meta["csv"] = csv_name;
    meta["vtk"] = vtk_name;
    meta["n"] = field.mesh->nx;  // unit-square fields: subdivisions per side
    meta["primary"] = primary;
    ctx.manifest["outputs"]["fields"][stem] = meta;
}

void emit_stats(RunContext& ctx, const homog::EmpiricalStats& stats) {
    std::string csv = "stat,a11,a12,a21,a22\n";
    auto row = [&](const std::string& name, const Mat2& m) {
        csv += name + "," + io::format_double(m.a11) + "," + io::format_double(m.a12) + "," +
               io::format_double(m.a21) + "," + io::format_double(m.a22) + "\n";
    };
    row("mean", stats.mean);
    row("variance", stats.variance);
    io::write_text_file((ctx.out_dir / "equivalent_stats.csv").string(), csv);
    ctx.manifest["outputs"]["equivalent_stats"] = "equivalent_stats.csv";
    ctx.manifest["metrics"]["mean"] = mat_to_json(stats.mean);
    ctx.manifest["metrics"]["variance"] = mat_to_json(stats.variance);
    ctx.manifest["metrics"]["sample_count"] = stats.sample_count;
}

void emit_tensors(RunContext& ctx, const std::vector<homog::EquivalentTensor>& tensors) {
    homog::write_tensor_csv(tensors, (ctx.out_dir / "tensors.csv").string());
    ctx.manifest["outputs"]["tensors"] = "tensors.csv";
}

void emit_study(RunContext& ctx, const pipeline::StudyResult& result,
                const std::string& name) {
    io::write_text_file((ctx.out_dir / (name + ".csv")).string(), result.csv());
    ctx.manifest["outputs"][name] = name + ".csv";
    if (std::isfinite(result.slope)) {
        ctx.manifest["metrics"][name + "_slope"] = result.slope;
        ctx.manifest["metrics"][name + "_intercept"] = result.intercept;
    }
    ctx.manifest["metrics"][name + "_degenerate"] = result.degenerate;
}

void run_cell(RunContext& ctx) {
    const auto& c = ctx.config;
    const auto mp = c.micro_params();
    auto realization = micro::make_realization(mp, c.sample_index, c.M, c.M);
    const auto field = micro::make_coefficient_field(mp, realization, c.epsilon,
                                                     c.diagonal_only);
    const auto cell_mesh = std::make_shared<mesh::TriMesh>(mesh::build_structured_mesh(
        {0.0, 0.0, static_cast<double>(c.M), static_cast<double>(c.M)},
        c.cell_subdivisions()));

    homog::CellProblemSetup setup;
    setup.mesh = cell_mesh.get();
    setup.coefficient = field.cell_fn();
    setup.quadrature_order = c.quadrature_order;

    homog::CellSolution sol1, sol2;
    {
        Stopwatch sw(ctx, "cell_solves");
        sol1 = homog::solve_cell_problem(setup, fem::Direction::e1);
        sol2 = homog::solve_cell_problem(setup, fem::Direction::e2);
    }
    auto tensor = homog::equivalent_matrix(sol1, sol2, setup, field.alpha, field.beta);
    tensor.sample_index = c.sample_index;

    mesh::write_vtk(*cell_mesh, sol1.full_values(), "corrector_e1",
                    (ctx.out_dir / "corrector_e1.vtk").string());
    mesh::write_vtk(*cell_mesh, sol2.full_values(), "corrector_e2",
                    (ctx.out_dir / "corrector_e2.vtk").string());
    homog::write_tensor_csv({tensor}, (ctx.out_dir / "equivalent_tensor.csv").string());
    micro::dump_geometry(field.realization.geometry_at(0, 0),
                         (ctx.out_dir / "geometry.txt").string());

    ctx.manifest["outputs"]["equivalent_tensor"] = "equivalent_tensor.csv";
    ctx.manifest["outputs"]["correctors"] = json::array({"corrector_e1.vtk", "corrector_e2.vtk"});
    ctx.manifest["outputs"]["geometry"] = "geometry.txt";
    ctx.manifest["metrics"]["equivalent_tensor"] = mat_to_json(tensor.m);
    ctx.manifest["metrics"]["cg_iterations"] = tensor.cg_iterations;
}

void run_homogenize(RunContext& ctx) {
    pipeline::TwoStageResult result;
    {
        Stopwatch sw(ctx, "stage1");
        result = pipeline::algorithm1_two_stage(ctx.config, /*with_decomposition=*/false);
    }
    emit_tensors(ctx, result.sample_tensors);
    emit_stats(ctx, result.stats);
    ctx.manifest["metrics"]["delta"] = result.decomposition.delta;
    ctx.manifest["metrics"]["delta_degenerate"] = result.decomposition.degenerate;
}

void run_two_stage(RunContext& ctx) {
    pipeline::TwoStageResult result;
    {
        Stopwatch sw(ctx, "two_stage");
        result = pipeline::algorithm1_two_stage(ctx.config);
    }
    emit_field(ctx, result.first_mode, "u0_field", true);
    emit_stats(ctx, result.stats);
    emit_tensors(ctx, result.sample_tensors);
    ctx.manifest["metrics"]["delta"] = result.decomposition.delta;
    ctx.manifest["metrics"]["delta_degenerate"] = result.decomposition.degenerate;
    ctx.manifest["metrics"]["coefficient_reading"] =
        ctx.config.diagonal_only ? "diagonal" : "literal";
}

void run_reference(RunContext& ctx) {
    pipeline::ReferenceResult result;
    {
        Stopwatch sw(ctx, "reference");
        result = pipeline::algorithm2_reference(ctx.config, /*keep_samples=*/false);
    }
    emit_field(ctx, result.mean_field, "uhat_field", true);
    emit_tensors(ctx, result.tensors);
}

void run_direct(RunContext& ctx) {
    pipeline::DirectSolveResult result;
    {
        Stopwatch sw(ctx, "direct");
        result = pipeline::direct_fine_solve(ctx.config, ctx.config.sample_index,
                                             ctx.config.n_fine);
    }
    emit_field(ctx, result.field, "u_eps_field", true);
    ctx.manifest["metrics"]["sample_index"] = ctx.config.sample_index;
    ctx.manifest["metrics"]["n_fine"] = ctx.config.n_fine;
}

void run_study_variance(RunContext& ctx) {
    pipeline::StudyResult result;
    {
        Stopwatch sw(ctx, "study_variance");
        result = pipeline::variance_decay_study(ctx.config, ctx.config.study.M_list);
    }
    emit_study(ctx, result, "variance_study");
    if (std::isfinite(result.slope))
        ctx.manifest["metrics"]["zeta_hat"] = -result.slope;
}

void run_study_delta(RunContext& ctx) {
    pipeline::StudyResult result;
    {
        Stopwatch sw(ctx, "study_delta");
        result = pipeline::delta_scaling_study(ctx.config, ctx.config.study.scale_list);
    }
    emit_study(ctx, result, "delta_study");
}

void run_study_samples(RunContext& ctx) {
    Stopwatch sw(ctx, "study_samples");
    // Table rows are keyed by L = N^2, so the requested L values must be squares.
    std::vector<int> n_list;
    for (const int L : ctx.config.study.L_list) {
        const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(L))));
        if (n * n != L)
            throw ConfigError("L_list: paired comparison needs square sample counts, got " +
                              std::to_string(L));
        n_list.push_back(n);
    }
    const auto table = pipeline::periodization_comparison_study(ctx.config, n_list);
    emit_study(ctx, table, "paired_comparison");
    if (ctx.config.study.replicates >= 2) {
        const auto clt = pipeline::sample_count_study(ctx.config, ctx.config.study.L_list);
        emit_study(ctx, clt, "clt_variance");
    }
}

void run_compare(RunContext& ctx, const std::string& run_a, const std::string& run_b) {
    auto load_run = [](const std::string& dir)
        -> std::pair<pipeline::MeshPtr, fem::SolutionField> {
        const json manifest = json::parse(io::read_text_file(
            (fs::path(dir) / "manifest.json").string()));
        if (!manifest.contains("outputs") || !manifest["outputs"].contains("fields"))
            throw IoError("run directory " + dir + " has no field outputs");
        for (const auto& [stem, meta] : manifest["outputs"]["fields"].items()) {
            if (!meta.value("primary", false)) continue;
            auto m = pipeline::make_domain_mesh(meta["n"].get<int>());
            fem::SolutionField f;
            f.mesh = m.get();
            f.values = fem::read_field_csv(
                *m, (fs::path(dir) / meta["csv"].get<std::string>()).string());
            return {m, f};
        }
        throw IoError("run directory " + dir + " has no primary field");
    };

    auto [mesh_a, field_a] = load_run(run_a);
    auto [mesh_b, field_b] = load_run(run_b);
    const double err = pipeline::relative_error(field_a, field_b);

    std::string csv = "field,reference,relative_error\n";
    csv += run_a + "," + run_b + "," + io::format_double(err) + "\n";
    io::write_text_file((ctx.out_dir / "relative_error.csv").string(), csv);
    ctx.manifest["outputs"]["relative_error"] = "relative_error.csv";
    ctx.manifest["metrics"]["relative_error"] = err;
}

int dispatch(const cli::CommandSpec& spec, const std::string& run_a,
             const std::string& run_b) {
    RunContext ctx = prepare(spec);
    if (spec.subcommand == "cell") run_cell(ctx);
    else if (spec.subcommand == "homogenize") run_homogenize(ctx);
    else if (spec.subcommand == "two-stage") run_two_stage(ctx);
    else if (spec.subcommand == "reference") run_reference(ctx);
    else if (spec.subcommand == "direct") run_direct(ctx);
    else if (spec.subcommand == "study-variance") run_study_variance(ctx);
    else if (spec.subcommand == "study-delta") run_study_delta(ctx);
    else if (spec.subcommand == "study-samples") run_study_samples(ctx);
    else if (spec.subcommand == "compare") run_compare(ctx, run_a, run_b);
    else throw ConfigError("unknown subcommand " + spec.subcommand);
    finish(ctx);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage stochastic homogenization toolkit"};
    app.require_subcommand(1);

    cli::CommandSpec spec;
    std::string run_a, run_b;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", spec.config_path, "Config file path");
        cmd->add_option("--set", spec.overrides, "Config override key=value (repeatable)");
        cmd->add_option("--out", spec.output_dir, "Output directory");
        cmd->add_option("--seed", spec.seed, "Master seed override")
            ->each([&](const std::string&) { spec.has_seed = true; });
        cmd->add_option("--workers", spec.workers, "Sample-level parallelism bound")
            ->each([&](const std::string&) { spec.has_workers = true; });
    };

    for (const char* name : {"cell", "homogenize", "two-stage", "reference", "direct",
                             "study-variance", "study-delta", "study-samples"}) {
        add_common(app.add_subcommand(name));
    }
    CLI::App* cmp = app.add_subcommand("compare");
    add_common(cmp);
    cmp->add_option("run_a", run_a, "Run directory of the field under test")->required();
    cmp->add_option("run_b", run_b, "Run directory of the reference field")->required();

    CLI11_PARSE(app, argc, argv);
    spec.subcommand = app.get_subcommands().front()->get_name();

    try {
        return dispatch(spec, run_a, run_b);
    } catch (const Error& e) {
        const char* cat = "internal";
        switch (e.category()) {
            case ErrorCategory::config: cat = "config"; break;
            case ErrorCategory::solver: cat = "solver"; break;
            case ErrorCategory::placement: cat = "placement"; break;
            case ErrorCategory::io: cat = "io"; break;
            case ErrorCategory::internal: cat = "internal"; break;
        }
        std::cerr << "error: category=" << cat << " " << e.what() << std::endl;
        return cli::exit_code(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error: category=internal " << e.what() << std::endl;
        return 1;
    }
}
