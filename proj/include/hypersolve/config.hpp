#pragma once

#include "hypersolve/errors.hpp"
#include "hypersolve/expression.hpp"
#include "hypersolve/harness.hpp"
#include "hypersolve/problems.hpp"
#include "hypersolve/scheme.hpp"

#include <json.hpp>

#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace hypersolve {

enum class Command { solve, converge, check, perturb };

inline std::optional<Command> command_from_string(std::string_view s)
{
    if (s == "solve") return Command::solve;
    if (s == "converge") return Command::converge;
    if (s == "check") return Command::check;
    if (s == "perturb") return Command::perturb;
    return std::nullopt;
}

/// A fully validated run description. `problem(k)` builds the problem instance
/// for refinement level k (some initial data depend on k through quadrature).
struct RunConfig {
    Command command = Command::solve;
    std::function<ProblemInstance(int)> problem;
    std::string problem_name;
    int k = 5;
    std::vector<int> k_range;
    double T_final = 0.0;
    double safety = 1.0;
    NormTag norm = NormTag::sL2;
    ReferenceKind reference = ReferenceKind::analytic;
    std::vector<int> j_range;
    int perturb_k = 6;
    double perturb_safety = 0.8;
    std::uint64_t seed = 1;
    std::vector<std::string> warnings;
};

/// All validation errors of a configuration, one per line.
class ConfigErrors : public ConfigurationError {
public:
    explicit ConfigErrors(std::vector<std::string> errors)
        : ConfigurationError(join(errors)), errors_(std::move(errors))
    {
    }
    [[nodiscard]] const std::vector<std::string>& errors() const noexcept { return errors_; }

private:
    static std::string join(const std::vector<std::string>& errors)
    {
        std::string out = "invalid configuration (" + std::to_string(errors.size()) + " error" +
                          (errors.size() == 1 ? "" : "s") + ")";
        for (const auto& e : errors) out += "\n  " + e;
        return out;
    }
    std::vector<std::string> errors_;
};

namespace detail {

using json = nlohmann::json;

class ConfigReader {
public:
    std::vector<std::string> errors;

    void error(const std::string& path, const std::string& what) { errors.push_back(path + ": " + what); }

    std::optional<double> number(const json& obj, const std::string& key, const std::string& path, bool required,
                                 std::optional<double> fallback = std::nullopt)
    {
        const std::string p = join(path, key);
        if (!obj.is_object() || !obj.contains(key)) {
            if (required) error(p, "missing required field");
            return fallback;
        }
        const auto& v = obj.at(key);
        if (!v.is_number()) {
            error(p, "expected a number");
            return std::nullopt;
        }
        const double d = v.get<double>();
        if (!std::isfinite(d)) {
            error(p, "must be finite");
            return std::nullopt;
        }
        return d;
    }

    std::optional<int> integer(const json& obj, const std::string& key, const std::string& path, bool required,
                               std::optional<int> fallback = std::nullopt)
    {
        const std::string p = join(path, key);
        if (!obj.is_object() || !obj.contains(key)) {
            if (required) error(p, "missing required field");
            return fallback;
        }
        const auto& v = obj.at(key);
        if (!v.is_number_integer()) {
            error(p, "expected an integer");
            return std::nullopt;
        }
        return v.get<int>();
    }

    std::optional<std::string> string(const json& obj, const std::string& key, const std::string& path,
                                      bool required)
    {
        const std::string p = join(path, key);
        if (!obj.is_object() || !obj.contains(key)) {
            if (required) error(p, "missing required field");
            return std::nullopt;
        }
        if (!obj.at(key).is_string()) {
            error(p, "expected a string");
            return std::nullopt;
        }
        return obj.at(key).get<std::string>();
    }

    std::optional<Matrix> matrix(const json& v, const std::string& path, std::optional<int> cols = std::nullopt)
    {
        if (!v.is_array()) {
            error(path, "expected a list of rows");
            return std::nullopt;
        }
        const auto rows = static_cast<Eigen::Index>(v.size());
        Eigen::Index ncols = cols ? *cols : (rows > 0 && v[0].is_array() ? static_cast<Eigen::Index>(v[0].size()) : 0);
        Matrix out = Matrix::Zero(rows, ncols);
        bool ok = true;
        for (Eigen::Index r = 0; r < rows; ++r) {
            const auto& row = v[static_cast<std::size_t>(r)];
            const std::string rp = path + "[" + std::to_string(r) + "]";
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != ncols) {
                error(rp, "expected a row of " + std::to_string(ncols) + " numbers");
                ok = false;
                continue;
            }
            for (Eigen::Index c = 0; c < ncols; ++c) {
                const auto& e = row[static_cast<std::size_t>(c)];
                if (!e.is_number() || !std::isfinite(e.get<double>())) {
                    error(rp + "[" + std::to_string(c) + "]", "expected a finite number");
                    ok = false;
                    continue;
                }
                out(r, c) = e.get<double>();
            }
        }
        if (!ok) return std::nullopt;
        return out;
    }

    std::optional<SymMatrix> symmetric(const json& v, const std::string& path)
    {
        auto m = matrix(v, path);
        if (!m) return std::nullopt;
        if (m->rows() != m->cols() || m->rows() == 0) {
            error(path, "expected a nonempty square matrix, got " + std::to_string(m->rows()) + "x" +
                            std::to_string(m->cols()));
            return std::nullopt;
        }
        const double asym = asymmetry(*m);
        if (asym > 1e-9) {
            std::ostringstream msg;
            msg << "matrix is not symmetric (largest |m_ij - m_ji| = " << asym << ")";
            error(path, msg.str());
            return std::nullopt;
        }
        return SymMatrix(*m);
    }

    std::optional<Expression> expression(const json& v, const std::string& path, std::string_view vars)
    {
        if (!v.is_string() && !v.is_number()) {
            error(path, "expected an expression string");
            return std::nullopt;
        }
        try {
            return Expression::parse(v.is_string() ? v.get<std::string>() : v.dump(), vars);
        } catch (const InputError& e) {
            error(path, e.what());
            return std::nullopt;
        }
    }

    std::optional<std::vector<Expression>> expressions(const json& v, const std::string& path, int n,
                                                       std::string_view vars)
    {
        if (!v.is_array()) {
            error(path, "expected a list of " + std::to_string(n) + " expressions");
            return std::nullopt;
        }
        if (static_cast<int>(v.size()) != n) {
            error(path, "expected " + std::to_string(n) + " expressions (one per component), got " +
                            std::to_string(v.size()));
            return std::nullopt;
        }
        std::vector<Expression> out;
        bool ok = true;
        for (std::size_t i = 0; i < v.size(); ++i) {
            auto e = expression(v[i], path + "[" + std::to_string(i) + "]", vars);
            if (e) out.push_back(std::move(*e));
            else ok = false;
        }
        if (!ok) return std::nullopt;
        return out;
    }

    std::optional<std::vector<int>> int_range(const json& obj, const std::string& key, const std::string& path)
    {
        const std::string p = join(path, key);
        if (!obj.is_object() || !obj.contains(key)) return std::nullopt;
        const auto& v = obj.at(key);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
            error(p, "expected [first, last] integers");
            return std::nullopt;
        }
        const int lo = v[0].get<int>(), hi = v[1].get<int>();
        if (hi < lo) {
            error(p, "last is smaller than first");
            return std::nullopt;
        }
        std::vector<int> out;
        for (int i = lo; i <= hi; ++i) out.push_back(i);
        return out;
    }

    static std::string join(const std::string& path, const std::string& key)
    {
        return path.empty() ? key : path + "." + key;
    }
};

inline Field field_from(std::vector<Expression> exprs)
{
    return [exprs = std::move(exprs)](std::span<const double> x) {
        Vector v(static_cast<Eigen::Index>(exprs.size()));
        for (std::size_t j = 0; j < exprs.size(); ++j) v[static_cast<Eigen::Index>(j)] = exprs[j](x.data(), x.size());
        return v;
    };
}

inline SpaceTimeField spacetime_field_from(std::vector<Expression> exprs)
{
    return [exprs = std::move(exprs)](std::span<const double> x, double t) {
        Vector v(static_cast<Eigen::Index>(exprs.size()));
        for (std::size_t j = 0; j < exprs.size(); ++j) {
            v[static_cast<Eigen::Index>(j)] = exprs[j](x.data(), x.size(), t);
        }
        return v;
    };
}

inline std::size_t line_of(const std::string& text, std::size_t byte)
{
    const std::size_t end = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(end), '\n'));
}

/// Boundary section: "wrap", "pressure_release", "traction_free", or a list
/// with one {"low": ..., "high": ...} entry per axis, each face "wrap" or
/// {"phi": [[...]]}.
inline std::optional<BoundarySpec> read_boundary(ConfigReader& rd, const json& v, int m, int n)
{
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "wrap") return BoundarySpec::all_wrap(m);
        if (s == "pressure_release") {
            if (n != m + 1) {
                rd.error("boundary", "pressure_release needs the acoustics layout (n = m + 1)");
                return std::nullopt;
            }
            return pressure_release_walls(m);
        }
        if (s == "traction_free") {
            if (n != 9 || m != 3) {
                rd.error("boundary", "traction_free needs the elasticity layout (n = 9, m = 3)");
                return std::nullopt;
            }
            return traction_free_walls();
        }
        rd.error("boundary", "unknown boundary shortcut \"" + s + "\" (wrap, pressure_release, traction_free)");
        return std::nullopt;
    }
    if (!v.is_array() || static_cast<int>(v.size()) != m) {
        rd.error("boundary", "expected a shortcut string or a list of " + std::to_string(m) + " axis entries");
        return std::nullopt;
    }
    BoundarySpec spec = BoundarySpec::all_wrap(m);
    bool ok = true;
    for (int a = 0; a < m; ++a) {
        const auto& axis = v[static_cast<std::size_t>(a)];
        for (Side s : {Side::low, Side::high}) {
            const std::string path = "boundary[" + std::to_string(a) + "]." + to_string(s);
            if (!axis.is_object() || !axis.contains(to_string(s))) {
                rd.error(path, "missing face condition");
                ok = false;
                continue;
            }
            const auto& face = axis.at(to_string(s));
            if (face.is_string() && face.get<std::string>() == "wrap") continue;
            if (face.is_object() && face.contains("phi")) {
                const auto& phi = face.at("phi");
                auto mat = phi.is_array() && phi.empty() ? std::optional<Matrix>(Matrix(0, n))
                                                         : rd.matrix(phi, path + ".phi");
                if (!mat) {
                    ok = false;
                    continue;
                }
                if (mat->cols() != n) {
                    rd.error(path + ".phi", "rows have " + std::to_string(mat->cols()) + " entries, expected " +
                                                std::to_string(n));
                    ok = false;
                    continue;
                }
                spec.face(a, s) = Dissipative{*mat};
                continue;
            }
            rd.error(path, "expected \"wrap\" or {\"phi\": [[...]]}");
            ok = false;
        }
    }
    if (!ok) return std::nullopt;
    return spec;
}

} // namespace detail

/// Parses and validates a configuration given as JSON text. `source` names the
/// text in messages. Every problem found is reported, not just the first.
inline RunConfig parse_config_text(const std::string& text, const std::string& source = "config",
                                   std::optional<Command> command = std::nullopt)
{
    using detail::json;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(source + ": syntax error at line " + std::to_string(detail::line_of(text, e.byte)) + ": " +
                         e.what());
    }
    detail::ConfigReader rd;
    if (!root.is_object()) throw ConfigErrors({"(root): expected an object"});

    RunConfig cfg;
    if (command) cfg.command = *command;
    else if (auto c = rd.string(root, "command", "", false)) {
        if (auto parsed = command_from_string(*c)) cfg.command = *parsed;
        else rd.error("command", "unknown command \"" + *c + "\"");
    }

    // problem
    std::optional<SymmetricSystem> system;
    std::function<ProblemInstance(int, BoundarySpec, Field, SpaceTimeField)> builder;
    bool provides_initial = false;
    std::optional<BoundarySpec> default_boundary;
    double rho0 = 1.0, c0 = 1.0;
    std::optional<Expression> wave_phi, wave_psi;

    const json problem = root.value("problem", json());
    if (!root.contains("problem")) rd.error("problem", "missing required field");
    else if (!problem.is_object()) rd.error("problem", "expected an object");
    else {
        const json params = problem.value("params", json::object());
        if (auto name = rd.string(problem, "builtin", "problem", false)) {
            cfg.problem_name = *name;
            try {
                if (*name == "advection") {
                    std::vector<double> speeds{1.0};
                    if (params.contains("speeds")) {
                        const auto& sv = params.at("speeds");
                        if (!sv.is_array() || sv.empty() || sv.size() > 3 ||
                            !std::all_of(sv.begin(), sv.end(), [](const json& e) { return e.is_number(); })) {
                            rd.error("problem.params.speeds", "expected 1 to 3 numbers");
                        } else {
                            speeds = sv.get<std::vector<double>>();
                        }
                    }
                    system = advection_system(speeds);
                } else if (*name == "acoustics" || *name == "standing_mode" || *name == "wave") {
                    rho0 = rd.number(params, "rho0", "problem.params", false, 1.0).value_or(1.0);
                    c0 = rd.number(params, "c0", "problem.params", false, 1.0).value_or(1.0);
                    int dim = 3;
                    if (*name == "acoustics") dim = rd.integer(params, "dim", "problem.params", false, 3).value_or(3);
                    if (dim < 1 || dim > 3) {
                        rd.error("problem.params.dim", "must be 1, 2 or 3");
                        dim = 3;
                    }
                    system = acoustics_system(rho0, c0, dim);
                    if (*name != "acoustics") {
                        provides_initial = true;
                        default_boundary = pressure_release_walls(3);
                    }
                    if (*name == "wave") {
                        if (!params.contains("phi")) rd.error("problem.params.phi", "missing required field");
                        else wave_phi = rd.expression(params.at("phi"), "problem.params.phi", "xyz");
                        if (params.contains("psi")) wave_psi = rd.expression(params.at("psi"), "problem.params.psi", "xyz");
                        else wave_psi = Expression::parse("0");
                    }
                } else if (*name == "elasticity") {
                    const double rho = rd.number(params, "rho", "problem.params", false, 1.0).value_or(1.0);
                    const double lam = rd.number(params, "lambda", "problem.params", false, 1.0).value_or(1.0);
                    const double mu = rd.number(params, "mu", "problem.params", false, 1.0).value_or(1.0);
                    system = elasticity_system(rho, lam, mu);
                } else {
                    rd.error("problem.builtin",
                             "unknown builtin \"" + *name + "\" (advection, acoustics, elasticity, standing_mode, wave)");
                }
            } catch (const ConfigurationError& e) {
                rd.error("problem.params", e.what());
            }
        } else if (problem.contains("matrices")) {
            cfg.problem_name = problem.value("name", std::string("custom"));
            const json& mats = problem.at("matrices");
            std::optional<SymMatrix> A;
            std::vector<SymMatrix> Bs;
            bool ok = true;
            if (!mats.is_object() || !mats.contains("A")) {
                rd.error("problem.matrices.A", "missing required field");
                ok = false;
            } else {
                A = rd.symmetric(mats.at("A"), "problem.matrices.A");
                ok = ok && A.has_value();
            }
            if (!mats.is_object() || !mats.contains("B") || !mats.at("B").is_array() || mats.at("B").empty() ||
                mats.at("B").size() > 3) {
                rd.error("problem.matrices.B", "expected a list of 1 to 3 matrices");
                ok = false;
            } else {
                for (std::size_t i = 0; i < mats.at("B").size(); ++i) {
                    auto b = rd.symmetric(mats.at("B")[i], "problem.matrices.B[" + std::to_string(i) + "]");
                    if (b) Bs.push_back(*b);
                    else ok = false;
                }
            }
            if (ok) {
                try {
                    system = SymmetricSystem(*A, Bs);
                } catch (const Error& e) {
                    rd.error("problem.matrices", e.what());
                }
            }
        } else {
            rd.error("problem", "expected \"builtin\" or \"matrices\"");
        }
    }

    // boundary
    std::optional<BoundarySpec> boundary;
    if (system) {
        if (root.contains("boundary")) boundary = detail::read_boundary(rd, root.at("boundary"), system->m(), system->n());
        else boundary = default_boundary ? default_boundary : BoundarySpec::all_wrap(system->m());
        if (boundary) {
            const auto transforms = canonical_transforms(*system);
            for (const auto& p : boundary_problems(*system, transforms, *boundary)) rd.error("boundary", p);
        }
    }

    // initial data and exact solution
    std::optional<std::vector<Expression>> initial, exact;
    if (system) {
        if (root.contains("initial")) {
            initial = rd.expressions(root.at("initial"), "initial", system->n(), "xyz");
        } else if (!provides_initial) {
            rd.error("initial", "missing required field");
        }
        if (root.contains("exact")) exact = rd.expressions(root.at("exact"), "exact", system->n(), "xyzt");
    }

    // numerics
    if (auto t = rd.number(root, "T_final", "", true)) {
        if (*t < 0.0) rd.error("T_final", "must be nonnegative");
        cfg.T_final = *t;
    }
    if (auto s = rd.number(root, "safety", "", false)) {
        if (!(*s > 0.0 && *s <= 1.0)) rd.error("safety", "must lie in (0, 1]");
        cfg.safety = *s;
    }
    if (auto s = rd.string(root, "norm", "", false)) {
        if (*s == "sL2") cfg.norm = NormTag::sL2;
        else if (*s == "sup") cfg.norm = NormTag::sup;
        else rd.error("norm", "expected \"sL2\" or \"sup\"");
    }
    const bool has_exact = exact.has_value() || cfg.problem_name == "standing_mode";
    cfg.reference = has_exact ? ReferenceKind::analytic : ReferenceKind::richardson;
    if (auto s = rd.string(root, "reference", "", false)) {
        if (*s == "analytic") cfg.reference = ReferenceKind::analytic;
        else if (*s == "analytic_continuous") cfg.reference = ReferenceKind::analytic_continuous;
        else if (*s == "richardson") cfg.reference = ReferenceKind::richardson;
        else rd.error("reference", "expected analytic, analytic_continuous or richardson");
        if (cfg.reference != ReferenceKind::richardson && !has_exact) {
            rd.error("reference", "an analytic reference needs an \"exact\" section");
        }
    }
    if (root.contains("seed")) {
        if (!root.at("seed").is_number_unsigned()) rd.error("seed", "expected a nonnegative integer");
        else cfg.seed = root.at("seed").get<std::uint64_t>();
    }

    const json grid = root.value("grid", json::object());
    if (!grid.is_object()) rd.error("grid", "expected an object");
    const auto k = rd.integer(grid, "k", "grid", false);
    const auto k_range = rd.int_range(grid, "k_range", "grid");
    const int m = system ? system->m() : 1;
    auto check_k = [&](int level, const std::string& path) {
        if (level < 0 || level * m > 30) rd.error(path, "refinement level " + std::to_string(level) + " unsupported");
    };
    if (k) {
        check_k(*k, "grid.k");
        cfg.k = *k;
    } else if (k_range) {
        cfg.k = k_range->back();
    }
    if (k_range) {
        for (int level : *k_range) check_k(level, "grid.k_range");
        cfg.k_range = *k_range;
    }

    const json perturb = root.value("perturb", json::object());
    cfg.j_range = rd.int_range(perturb, "j_range", "perturb").value_or(std::vector<int>{4, 5, 6, 7, 8, 9, 10, 11, 12});
    cfg.perturb_k = rd.integer(perturb, "k", "perturb", false, k.value_or(6)).value_or(6);
    check_k(cfg.perturb_k, "perturb.k");
    if (auto s = rd.number(perturb, "safety", "perturb", false)) {
        if (!(*s > 0.0 && *s <= 1.0)) rd.error("perturb.safety", "must lie in (0, 1]");
        cfg.perturb_safety = *s;
    }

    // command-specific requirements
    switch (cfg.command) {
    case Command::converge:
        if (!k_range) rd.error("grid.k_range", "converge needs a refinement range");
        else if (k_range->size() < 3) rd.error("grid.k_range", "converge needs at least three levels");
        break;
    case Command::perturb:
        if (boundary && !boundary->all_wrap()) rd.error("boundary", "perturb supports periodic (wrap) problems only");
        break;
    case Command::solve:
    case Command::check:
        if (!k && !k_range) rd.error("grid.k", "missing required field");
        break;
    }

    // dissipativity is part of validation, except for `check`, which reports it
    if (system && boundary && rd.errors.empty() && cfg.command != Command::check) {
        const auto report = check_dissipativity(*system, *boundary);
        for (const auto& f : report.faces) {
            if (f.pass) continue;
            std::ostringstream msg;
            msg << "boundary condition on " << axis_name(f.axis) << "/" << to_string(f.side)
                << " is not dissipative (witness " << f.witness->transpose() << ")";
            rd.error("boundary", msg.str());
        }
    }

    if (!rd.errors.empty()) throw ConfigErrors(rd.errors);

    // assemble the problem factory
    const std::string name = cfg.problem_name;
    const double T_final = cfg.T_final;
    Field initial_field = initial ? detail::field_from(*initial) : Field{};
    SpaceTimeField exact_field = exact ? detail::spacetime_field_from(*exact) : SpaceTimeField{};
    if (name == "standing_mode" || name == "wave") {
        auto phi = wave_phi, psi = wave_psi;
        const BoundarySpec bnd = *boundary;
        cfg.problem = [=](int level) {
            ProblemInstance p = name == "standing_mode"
                                    ? standing_mode_problem(rho0, c0, level, T_final)
                                    : wave_to_acoustics(
                                          [phi](double x, double y, double z) {
                                              const double X[3] = {x, y, z};
                                              return (*phi)(X, 3);
                                          },
                                          [psi](double x, double y, double z) {
                                              const double X[3] = {x, y, z};
                                              return (*psi)(X, 3);
                                          },
                                          rho0, c0, level, T_final);
            p.boundary = bnd;
            if (initial_field) p.initial = initial_field;
            if (exact_field) p.exact = exact_field;
            p.name = name;
            return p;
        };
    } else {
        const SymmetricSystem sys = *system;
        const BoundarySpec bnd = *boundary;
        cfg.problem = [=](int) {
            return ProblemInstance{sys, bnd, initial_field, T_final, std::nullopt, exact_field, name};
        };
    }
    if (cfg.command != Command::check) cfg.warnings = validate_problem(cfg.problem(cfg.k));
    return cfg;
}

inline RunConfig parse_config(const std::string& path, std::optional<Command> command = std::nullopt)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(path + ": cannot open configuration file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path, command);
}

} // namespace hypersolve
