// hypersolve: command-line front end for the upwind solver.
//
//   hypersolve <solve|converge|check|perturb> --config <path> [--out <dir>] [--seed <u64>] [--safety <f>]
//
// Exit codes: 0 success, 2 validation failure, 3 numerical failure.

#include "hypersolve/config.hpp"
#include "hypersolve/grid.hpp"
#include "hypersolve/harness.hpp"
#include "hypersolve/problems.hpp"
#include "hypersolve/scheme.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace hypersolve;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

std::ofstream open_output(const fs::path& path, bool binary = false)
{
    std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw InputError(path.string() + ": cannot open for writing");
    return out;
}

void print_warnings(const std::vector<std::string>& warnings)
{
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

int run_solve(const RunConfig& cfg, const fs::path& out_dir)
{
    const ProblemInstance p = cfg.problem(cfg.k);
    const GridFunction phi = restrict_to_grid(p.initial, Grid(p.m(), cfg.k), p.n());
    const auto res = solve(Scheme(p.system, p.boundary), phi, p.T_final, cfg.safety);
    {
        auto out = open_output(out_dir / "solution.hsgf", true);
        write_dump(out, res.solution);
    }
    {
        auto out = open_output(out_dir / "energy.csv");
        write_energy_csv(out, res.energy);
    }
    const auto check = energy_check(res.energy);
    std::cerr << "solve: k=" << cfg.k << " steps=" << res.plan.L << " tau=" << res.plan.tau
              << " energy " << res.energy.energies.front() << " -> " << res.energy.energies.back()
              << (check.pass ? "" : " (ENERGY INCREASED)") << '\n';
    return check.pass ? 0 : kExitNumerical;
}

int run_converge(const RunConfig& cfg, const fs::path& out_dir)
{
    const ProblemInstance p = cfg.problem(cfg.k_range.back());
    ConvergenceOptions opts;
    opts.norm = cfg.norm;
    opts.reference = cfg.reference;
    opts.safety = cfg.safety;
    const auto report = convergence_study(p, cfg.k_range, opts);
    {
        auto out = open_output(out_dir / "convergence.csv");
        write_convergence_csv(out, report);
    }
    {
        auto out = open_output(out_dir / "convergence.txt");
        write_convergence_summary(out, report);
    }
    write_convergence_summary(std::cerr, report);
    return 0;
}

int run_check(const RunConfig& cfg)
{
    const ProblemInstance p = cfg.problem(cfg.k);
    const auto report = check_dissipativity(p.system, p.boundary);
    for (const auto& f : report.faces) {
        std::cout << axis_name(f.axis) << '/' << to_string(f.side) << ": ";
        if (!f.checked) {
            std::cout << "wrap\n";
            continue;
        }
        std::cout << "dissipative: " << (f.pass ? "PASS" : "FAIL");
        if (f.witness) std::cout << " witness " << f.witness->transpose();
        std::cout << '\n';
    }

    const Grid grid(p.m(), cfg.k);
    const auto transforms = canonical_transforms(p.system);
    const auto cfl = cfl_timestep(transforms, grid.h(), cfg.safety);
    std::cout << "cfl: k=" << cfg.k << " h=" << grid.h() << " safety=" << cfg.safety << " tau=" << cfl.tau;
    for (std::size_t a = 0; a < cfl.courant_numbers.size(); ++a) {
        std::cout << " nu_" << axis_name(static_cast<int>(a)) << '=' << cfl.courant_numbers[a];
    }
    std::cout << '\n';

    const auto domain = correctness_domain(p.system);
    for (int a = 0; a < domain.dim(); ++a) {
        std::cout << "domain: " << axis_name(a) << " lambda_min=" << domain.lambda_min[static_cast<std::size_t>(a)]
                  << " lambda_max=" << domain.lambda_max[static_cast<std::size_t>(a)] << '\n';
    }
    std::cout << "domain: " << (domain.compact() ? "compact" : "not compact");
    if (domain.compact()) std::cout << ", apex t=" << domain.apex_time();
    const double t_check = std::min(p.T_final, domain.apex_time());
    const auto mask = cells_in_domain(grid, domain, t_check);
    std::cout << ", cells inside at t=" << t_check << ": " << std::count(mask.begin(), mask.end(), true) << " of "
              << mask.size() << '\n';
    for (const auto& ct : transforms) {
        if (ct.near_collision()) {
            std::cerr << "warning: axis " << axis_name(ct.axis) << " pencil eigenvalues nearly collide (gap "
                      << ct.min_gap << ")\n";
        }
    }
    return report.pass() ? 0 : kExitValidation;
}

int run_perturb(const RunConfig& cfg, const fs::path& out_dir)
{
    const ProblemInstance p = cfg.problem(cfg.perturb_k);
    PerturbationOptions opts;
    opts.k = cfg.perturb_k;
    opts.seed = cfg.seed;
    opts.safety = cfg.perturb_safety;
    const auto report = perturbation_study(p, cfg.j_range, opts);
    {
        auto out = open_output(out_dir / "perturbation.csv");
        write_perturbation_csv(out, report);
    }
    print_warnings(report.warnings);
    std::cerr << "perturb: k=" << report.k << " seed=" << report.seed << " slope=" << report.slope
              << " lipschitz=" << report.lipschitz << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Upwind solver for linear symmetric hyperbolic systems on the unit cube"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<double> safety;

    for (const char* name : {"solve", "converge", "check", "perturb"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "problem configuration (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "random seed for perturb");
        sub->add_option("--safety", safety, "CFL safety factor in (0, 1]");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        RunConfig cfg = parse_config(config_path, command_from_string(command));
        if (seed) cfg.seed = *seed;
        if (safety) {
            if (!(*safety > 0.0 && *safety <= 1.0)) throw UsageError("--safety must lie in (0, 1]");
            cfg.safety = *safety;
            cfg.perturb_safety = *safety;
        }
        print_warnings(cfg.warnings);

        if (cfg.command == Command::check) return run_check(cfg);
        fs::create_directories(out_dir);
        switch (cfg.command) {
        case Command::solve: return run_solve(cfg, out_dir);
        case Command::converge: return run_converge(cfg, out_dir);
        case Command::perturb: return run_perturb(cfg, out_dir);
        case Command::check: break;
        }
    } catch (const hypersolve::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.is_numerical() ? kExitNumerical : kExitValidation;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return 0;
}
