#include "hypersolve/problems.hpp"
#include "hypersolve/scheme.hpp"
#include "oracles/scheme_oracle.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace hypersolve;
using Catch::Approx;

namespace {

std::vector<double> seq(std::initializer_list<double> v) { return v; }

GridFunction random_function(const Grid& g, int n, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    GridFunction u(g, n);
    for (double& v : u.values()) v = d(rng);
    return u;
}

std::vector<oracle::Vec> to_cells(const GridFunction& u)
{
    std::vector<oracle::Vec> out;
    for (std::size_t c = 0; c < u.num_cells(); ++c) {
        const auto v = u.cell(c);
        out.emplace_back(Eigen::Map<const oracle::Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    return out;
}

double max_diff(const GridFunction& u, const std::vector<oracle::Vec>& ref)
{
    double d = 0.0;
    for (std::size_t c = 0; c < u.num_cells(); ++c) {
        for (int j = 0; j < u.components(); ++j) d = std::max(d, std::abs(u(c, j) - ref[c][j]));
    }
    return d;
}

SymmetricSystem two_component_2d()
{
    return SymmetricSystem(SymMatrix{{2.0, 0.5}, {0.5, 1.0}},
                           {SymMatrix{{1.0, 0.3}, {0.3, -0.7}}, SymMatrix{{0.2, 1.0}, {1.0, 0.4}}});
}

} // namespace

TEST_CASE("large values")
{
    const auto w = seq({1.0, 2.0, 3.0});
    CHECK(large_values_1d(w, 1, EdgePolicy::wrap) == seq({3.0, 1.0, 2.0, 3.0}));
    CHECK(large_values_1d(w, -1, EdgePolicy::wrap) == seq({1.0, 2.0, 3.0, 1.0}));
    CHECK(large_values_1d(w, 0, EdgePolicy::wrap) == seq({0.0, 0.0, 0.0, 0.0}));
    CHECK(large_values_1d(w, 1, EdgePolicy::external) == seq({0.0, 1.0, 2.0, 3.0}));
    const auto c = seq({4.0, 4.0, 4.0, 4.0});
    CHECK(large_values_1d(c, 1, EdgePolicy::wrap) == seq({4.0, 4.0, 4.0, 4.0, 4.0}));
    CHECK(large_values_1d(c, -1, EdgePolicy::wrap) == seq({4.0, 4.0, 4.0, 4.0, 4.0}));
}

TEST_CASE("step_1d examples")
{
    const auto w = seq({1.0, 2.0, 3.0});
    const double h = 1.0 / 3.0;
    CHECK(step_1d(w, 0.0, h, h, large_values_1d(w, 0, EdgePolicy::wrap)) == w);
    CHECK(step_1d(w, 1.0, h, h, large_values_1d(w, 1, EdgePolicy::wrap)) == seq({3.0, 1.0, 2.0}));
    CHECK(step_1d(w, -1.0, h, h, large_values_1d(w, -1, EdgePolicy::wrap)) == seq({2.0, 3.0, 1.0}));
    const auto delta = seq({0.0, 1.0, 0.0});
    CHECK(step_1d(delta, 1.0, h / 2, h, large_values_1d(delta, 1, EdgePolicy::wrap)) == seq({0.0, 0.5, 0.5}));
}

TEST_CASE("step_1d rejects Courant numbers above one")
{
    const auto w = seq({1.0, 2.0, 3.0});
    try {
        (void)step_1d(w, 2.0, 0.25, 0.25, large_values_1d(w, 1, EdgePolicy::wrap), true, 1);
        FAIL("expected StabilityError");
    } catch (const StabilityError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("axis y") != std::string::npos);
        CHECK(msg.find("eigenvalue 2") != std::string::npos);
    }
    CHECK_NOTHROW(step_1d(w, 1.0, 0.25 * (1 + 1e-13), 0.25, large_values_1d(w, 1, EdgePolicy::wrap)));
}

TEST_CASE("step_1d keeps values within the previous range")
{
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> w(16);
        for (double& v : w) v = d(rng);
        const double nu = 0.5 * (d(rng) + 1.0);
        const double mu = trial % 2 ? 1.0 : -1.0;
        const auto out = step_1d(w, mu, nu / 16.0, 1.0 / 16.0, large_values_1d(w, trial % 2 ? 1 : -1, EdgePolicy::wrap));
        const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
        for (double v : out) {
            CHECK(v >= *lo - 1e-15);
            CHECK(v <= *hi + 1e-15);
        }
    }
}

TEST_CASE("cfl examples")
{
    const auto scalar = advection_system({2.0});
    CHECK(cfl_timestep(scalar, 0.25, 1.0).tau == Approx(0.125));
    CHECK(cfl_timestep(scalar, 0.25, 0.5).tau == Approx(0.0625));
    const auto two = advection_system({1.0, -1.0});
    const auto c = cfl_timestep(two, 0.5, 1.0);
    CHECK(c.tau == Approx(0.25));
    CHECK(c.courant_numbers[0] == Approx(0.5));
    CHECK(c.courant_numbers[1] == Approx(0.5));
    // a zero pencil imposes no limit
    CHECK(cfl_timestep(advection_system({1.0, 0.0}), 0.5, 1.0).tau == Approx(0.5));
    CHECK_THROWS_AS(cfl_timestep(advection_system({0.0, 0.0}), 0.5, 1.0), DegenerateSystemError);
    CHECK_THROWS_AS(cfl_timestep(scalar, 0.25, 1.5), UsageError);
    CHECK_THROWS_AS(cfl_timestep(scalar, 0.25, 0.0), UsageError);
}

TEST_CASE("step plans")
{
    const CflStep cfl{0.1, {1.0}};
    const auto p = make_step_plan(cfl, 0.25);
    CHECK(p.L == 3);
    CHECK(p.L * p.tau >= 0.25);
    CHECK((p.L - 1) * p.tau < 0.25);
    CHECK(make_step_plan(cfl, 0.0).L == 0);
    CHECK(make_step_plan(CflStep{0.125, {1.0}}, 1.0).L == 8);
    CHECK_THROWS_AS(make_step_plan(cfl, -1.0), UsageError);
}

TEST_CASE("boundary face solve")
{
    const auto sys = acoustics_system(1.0, 1.0, 1);
    const auto ct = canonical_transform(sys.A(), sys.B(0));
    const Matrix phi_p = selector_rows(2, {1});

    SECTION("p = 0 at the low face reflects the outgoing wave")
    {
        Vector u(2);
        u << 0.3, -0.8;
        const Vector v = ct.T_inv * u;
        const Vector V = boundary_face_solve(0, Side::low, phi_p, ct, v);
        const Vector U = ct.T * V;
        CHECK(std::abs(U[1]) < 1e-14);
        // outgoing (negative speed) component is copied
        for (int j : ct.indices_with_sign(-1)) CHECK(V[j] == v[j]);
        // by hand: outgoing invariant (u - p)/sqrt(2) is kept, p = 0 forces the incoming one to equal it
        CHECK(U[0] == Approx(0.3 - (-0.8)));
    }
    SECTION("p = 0 at the high face")
    {
        Vector v(2);
        v << 0.4, 1.1;
        const Vector U = ct.T * boundary_face_solve(0, Side::high, phi_p, ct, v);
        CHECK(std::abs(U[1]) < 1e-14);
    }
    SECTION("absorbing condition: Phi selects the incoming invariant")
    {
        const auto in = ct.indices_with_sign(1);
        REQUIRE(in.size() == 1);
        const Matrix phi = ct.T_inv.row(in[0]);
        Vector v(2);
        v << 0.7, -0.2;
        const Vector V = boundary_face_solve(0, Side::low, phi, ct, v);
        CHECK(std::abs(V[in[0]]) < 1e-15);
    }
    SECTION("zero data")
    {
        const Vector V = boundary_face_solve(0, Side::low, phi_p, ct, Vector::Zero(2));
        CHECK(V.cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("singular incoming block")
    {
        // Phi annihilates the incoming eigenvector (1, 1)/sqrt(2)
        Matrix phi(1, 2);
        phi << 1.0, -1.0;
        CHECK_THROWS_AS(boundary_face_solve(0, Side::low, phi, ct, Vector::Ones(2)), IllPosedBoundaryError);
    }
}

TEST_CASE("boundary specifications are validated")
{
    const auto sys = acoustics_system(1.0, 1.0, 2);
    const auto ts = canonical_transforms(sys);
    BoundarySpec b = pressure_release_walls(2);
    CHECK(boundary_problems(sys, ts, b).empty());

    b.face(1, Side::high) = Dissipative{selector_rows(3, {0, 2})};
    auto problems = boundary_problems(sys, ts, b);
    REQUIRE(problems.size() == 1);
    CHECK(problems[0].find("y/high") != std::string::npos);
    CHECK_THROWS_AS(Scheme(sys, b), ConfigurationError);

    BoundarySpec half = BoundarySpec::all_wrap(2);
    half.face(0, Side::low) = Dissipative{selector_rows(3, {2})};
    problems = boundary_problems(sys, ts, half);
    REQUIRE(problems.size() == 1);
    CHECK(problems[0].find("x") == 0);

    CHECK_FALSE(boundary_problems(sys, ts, BoundarySpec::all_wrap(1)).empty());
}

TEST_CASE("step_multi examples")
{
    SECTION("constant data is unchanged under wrap")
    {
        const auto sys = two_component_2d();
        const Grid g(2, 3);
        GridFunction u(g, 2);
        for (std::size_t c = 0; c < u.num_cells(); ++c) {
            u(c, 0) = 1.5;
            u(c, 1) = -0.5;
        }
        const Scheme s(sys, BoundarySpec::all_wrap(2));
        const auto tau = cfl_timestep(s.transforms(), g.h(), 1.0).tau;
        const auto out = s.step(u, tau);
        for (std::size_t c = 0; c < u.num_cells(); ++c) {
            CHECK(out(c, 0) == Approx(1.5).epsilon(1e-14));
            CHECK(out(c, 1) == Approx(-0.5).epsilon(1e-14));
        }
    }
    SECTION("a scalar system reduces to step_1d")
    {
        std::mt19937_64 rng(13);
        const Grid g(1, 4);
        const auto u = random_function(g, 1, rng);
        const auto sys = advection_system({-0.75});
        const auto ts = canonical_transforms(sys);
        const double tau = 0.6 * g.h() / 0.75;
        const auto out = step_multi(u, sys, ts, BoundarySpec::all_wrap(1), tau, g.h());
        const std::vector<double> w(u.values().begin(), u.values().end());
        const auto ref = step_1d(w, -0.75, tau, g.h(), large_values_1d(w, -1, EdgePolicy::wrap));
        for (std::size_t i = 0; i < w.size(); ++i) CHECK(out(i, 0) == Approx(ref[i]).epsilon(1e-14));
    }
    SECTION("2-D scalar advection of a delta on 4x4 matches the hand update")
    {
        const Grid g(2, 2);
        GridFunction u(g, 1);
        u(g.flat_index({1, 2, 0}), 0) = 1.0;
        const auto sys = advection_system({1.0, 1.0});
        const double tau = cfl_timestep(sys, g.h(), 1.0).tau; // nu = 1/2 per axis
        const auto out = step_multi(u, sys, canonical_transforms(sys), BoundarySpec::all_wrap(2), tau, g.h());
        // u' = u - nu (u - u_left) - nu (u - u_below): the delta splits into itself (0),
        // its right neighbour (1/2) and its upper neighbour (1/2)
        for (std::size_t c = 0; c < g.num_cells(); ++c) {
            const auto idx = g.multi_index(c);
            double expected = 0.0;
            if (idx[0] == 2 && idx[1] == 2) expected = 0.5;
            if (idx[0] == 1 && idx[1] == 3) expected = 0.5;
            CHECK(out(c, 0) == Approx(expected).margin(1e-15));
        }
    }
}

TEST_CASE("step_multi matches the independent oracle")
{
    std::mt19937_64 rng(21);
    const auto sys = two_component_2d();
    const Grid g(2, 2);
    std::vector<oracle::Mat> B{sys.B(0).matrix(), sys.B(1).matrix()};

    SECTION("wrap, three levels")
    {
        const Scheme s(sys, BoundarySpec::all_wrap(2));
        const double tau = cfl_timestep(s.transforms(), g.h(), 1.0).tau;
        auto u = random_function(g, 2, rng);
        auto ref = to_cells(u);
        for (int l = 0; l < 3; ++l) {
            u = s.step(u, tau);
            ref = oracle::step(ref, 2, 4, sys.A().matrix(), B, {std::nullopt, std::nullopt}, tau, g.h());
            CHECK(max_diff(u, ref) <= 1e-12);
        }
    }
    SECTION("dissipative faces, three levels")
    {
        // one incoming wave per face on both axes
        BoundarySpec b;
        Matrix phi_x(1, 2), phi_y(1, 2);
        phi_x << 0.3, 1.0;
        phi_y << 1.0, -0.4;
        b.faces.push_back({Dissipative{phi_x}, Dissipative{phi_x}});
        b.faces.push_back({Dissipative{phi_y}, Dissipative{phi_y}});
        const Scheme s(sys, b);
        const double tau = cfl_timestep(s.transforms(), g.h(), 0.9).tau;
        auto u = random_function(g, 2, rng);
        auto ref = to_cells(u);
        std::vector<oracle::AxisBoundary> ob{std::array<oracle::Mat, 2>{phi_x, phi_x},
                                             std::array<oracle::Mat, 2>{phi_y, phi_y}};
        for (int l = 0; l < 3; ++l) {
            u = s.step(u, tau);
            ref = oracle::step(ref, 2, 4, sys.A().matrix(), B, ob, tau, g.h());
            CHECK(max_diff(u, ref) <= 1e-12);
        }
    }
    SECTION("3-D acoustics with p = 0 walls")
    {
        const auto ac = acoustics_system(1.3, 0.8, 3);
        const Grid g3(3, 2);
        const Scheme s(ac, pressure_release_walls(3));
        const double tau = cfl_timestep(s.transforms(), g3.h(), 1.0).tau;
        const auto u = random_function(g3, 4, rng);
        const auto out = s.step(u, tau);
        const Matrix phi = selector_rows(4, {3});
        std::vector<oracle::Mat> B3{ac.B(0).matrix(), ac.B(1).matrix(), ac.B(2).matrix()};
        std::vector<oracle::AxisBoundary> ob(3, std::array<oracle::Mat, 2>{phi, phi});
        const auto ref = oracle::step(to_cells(u), 3, 4, ac.A().matrix(), B3, ob, tau, g3.h());
        CHECK(max_diff(out, ref) <= 1e-12);
    }
}

TEST_CASE("step_multi is linear")
{
    std::mt19937_64 rng(31);
    const auto sys = two_component_2d();
    const Grid g(2, 3);
    BoundarySpec b = BoundarySpec::all_wrap(2);
    Matrix phi(1, 2);
    phi << 0.3, 1.0;
    b.face(0, Side::low) = Dissipative{phi};
    b.face(0, Side::high) = Dissipative{phi};
    const Scheme s(sys, b);
    const double tau = cfl_timestep(s.transforms(), g.h(), 1.0).tau;
    for (int trial = 0; trial < 10; ++trial) {
        const auto u = random_function(g, 2, rng);
        const auto v = random_function(g, 2, rng);
        const double a = 1.7, c = -0.4;
        const auto lhs = s.step(a * u + c * v, tau);
        const auto rhs = a * s.step(u, tau) + c * s.step(v, tau);
        const auto x = lhs.values(), y = rhs.values();
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(x[i] - y[i]) <= 1e-11);
    }
}

TEST_CASE("step checks")
{
    const auto sys = advection_system({1.0});
    const Scheme s(sys, BoundarySpec::all_wrap(1));
    const Grid g(1, 3);
    GridFunction u(g, 1);
    u(0, 0) = 1.0;
    CHECK_THROWS_AS(s.step(u, 1.5 * g.h()), StabilityError);
    CHECK_NOTHROW(s.step(u, 1.5 * g.h(), StepOptions{false, true}));
    CHECK_THROWS_AS(s.step(GridFunction(Grid(2, 2), 1), 0.1), UsageError);

    // combined condition: each axis nu = 0.6 is fine alone, their sum is not
    const Scheme s2(advection_system({1.0, 1.0}), BoundarySpec::all_wrap(2));
    const Grid g2(2, 2);
    try {
        (void)s2.step(GridFunction(g2, 1), 0.6 * g2.h());
        FAIL("expected StabilityError");
    } catch (const StabilityError& e) {
        CHECK(std::string(e.what()).find("combined") != std::string::npos);
    }

    // non-finite results are reported with the time level
    GridFunction huge(g, 1);
    huge(0, 0) = 1.7e308;
    huge(1, 0) = -1.7e308;
    try {
        (void)s.step(huge, 1.5 * g.h(), StepOptions{false, true}, 41);
        FAIL("expected StabilityError");
    } catch (const StabilityError& e) {
        CHECK(std::string(e.what()).find("42") != std::string::npos);
    }
}

TEST_CASE("solve examples")
{
    const auto p = advection_sine_problem(1.0, 1.0);
    const Scheme s(p.system, p.boundary);
    const Grid g(1, 5);
    const auto phi = restrict_to_grid(p.initial, g, 1);

    SECTION("T_final = 0 gives the initial data")
    {
        const auto r = solve(s, phi, 0.0, 1.0);
        REQUIRE(r.solution.levels.size() == 1);
        const auto a = r.solution.levels[0].values(), b = phi.values();
        CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
    }
    SECTION("Courant 1 over a full period returns the initial data bitwise")
    {
        const auto r = solve(s, phi, 1.0, 1.0);
        CHECK(r.plan.L == 32);
        const auto a = r.solution.levels.back().values(), b = phi.values();
        CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
        // every intermediate level is a cyclic shift
        for (int l = 0; l <= r.plan.L; ++l) {
            for (std::size_t c = 0; c < 32; ++c) {
                CHECK(r.solution.levels[static_cast<std::size_t>(l)](c, 0) == phi((c + 32 - static_cast<std::size_t>(l)) % 32, 0));
            }
        }
    }
    SECTION("zero data stays zero")
    {
        const auto r = solve(s, GridFunction(g, 1), 0.5, 0.7);
        for (const auto& lv : r.solution.levels) CHECK(grid_norm(lv, NormKind::sup()) == 0.0);
        for (double e : r.energy.energies) CHECK(e == 0.0);
    }
    SECTION("shortened last step")
    {
        const auto r = solve(s, phi, 0.3, 1.0);
        CHECK(r.plan.L == 10);
        CHECK(r.solution.time_of(r.plan.L) == 0.3);
        CHECK(r.energy.times.back() == 0.3);
        CHECK(r.energy.times[9] == Approx(9.0 / 32.0));
    }
}

TEST_CASE("energy never increases at or under CFL")
{
    std::mt19937_64 rng(41);
    SECTION("wrap, 2-component 2-D system")
    {
        const auto sys = two_component_2d();
        const Grid g(2, 4);
        const auto r = solve(sys, BoundarySpec::all_wrap(2), random_function(g, 2, rng), 0.5, 1.0);
        const auto check = energy_check(r.energy);
        CHECK(check.pass);
        CHECK(check.max_relative_increase <= 1e-12);
    }
    SECTION("dissipative walls")
    {
        const auto sys = two_component_2d();
        BoundarySpec b;
        Matrix phi_x(1, 2), phi_y(1, 2);
        phi_x << 0.0, 1.0;
        phi_y << 1.0, 0.0;
        b.faces.push_back({Dissipative{phi_x}, Dissipative{phi_x}});
        b.faces.push_back({Dissipative{phi_y}, Dissipative{phi_y}});
        const Grid g(2, 4);
        if (check_dissipativity(sys, b).pass()) {
            const auto r = solve(sys, b, random_function(g, 2, rng), 0.5, 1.0);
            CHECK(energy_check(r.energy).pass);
        }
        const auto ac = acoustics_system(1.0, 1.0, 2);
        const auto r = solve(ac, pressure_release_walls(2), random_function(Grid(2, 4), 3, rng), 1.0, 1.0);
        CHECK(energy_check(r.energy).pass);
        CHECK(r.energy.energies.back() < r.energy.energies.front());
    }
}

TEST_CASE("energy check examples")
{
    EnergyTrace flat{{0.0, 0.1, 0.2}, {2.0, 2.0, 2.0}};
    CHECK(energy_check(flat).pass);
    EnergyTrace grows{{0.0, 0.1, 0.2}, {2.0, 2.0, 2.0 * (1 + 1e-9)}};
    const auto c = energy_check(grows);
    CHECK_FALSE(c.pass);
    CHECK(c.worst_level == 2);
    CHECK(c.max_relative_increase == Approx(1e-9));

    // over-CFL run with checks disabled
    const auto p = advection_sine_problem(1.0, 1.0);
    const auto phi = restrict_to_grid(p.initial, Grid(1, 5), 1);
    SolveOptions opts;
    opts.allow_over_cfl = true;
    opts.step.enforce_cfl = false;
    const auto r = solve(Scheme(p.system, p.boundary), phi, 1.0, 1.5, opts);
    const auto over = energy_check(r.energy);
    CHECK_FALSE(over.pass);
    CHECK(over.max_relative_increase > 0.0);
}

TEST_CASE("dissipativity certificates")
{
    SECTION("acoustics p = 0: projected form vanishes")
    {
        const auto sys = acoustics_system(1.0, 1.0, 3);
        const auto report = check_dissipativity(sys, pressure_release_walls(3));
        CHECK(report.pass());
        REQUIRE(report.faces.size() == 6);
        for (const auto& f : report.faces) {
            CHECK(f.checked);
            CHECK(f.form_eigenvalues.cwiseAbs().maxCoeff() < 1e-14);
        }
    }
    SECTION("no incoming waves: vacuous pass")
    {
        const auto cert = check_face_dissipativity(SymMatrix{{-1.0}}, Matrix(0, 1), 0, Side::low);
        CHECK(cert.pass);
    }
    SECTION("counterexample B = diag(1, -1), Phi = [0, 1]")
    {
        Matrix phi(1, 2);
        phi << 0.0, 1.0;
        const auto cert = check_face_dissipativity(SymMatrix{{1.0, 0.0}, {0.0, -1.0}}, phi, 0, Side::low);
        CHECK_FALSE(cert.pass);
        REQUIRE(cert.witness);
        CHECK((*cert.witness)[0] == Approx(1.0));
        CHECK(std::abs((*cert.witness)[1]) < 1e-15);
        CHECK(cert.form_eigenvalues[0] == Approx(1.0));
    }
    SECTION("wrapped faces are not checked")
    {
        const auto report = check_dissipativity(advection_system({1.0}), BoundarySpec::all_wrap(1));
        CHECK(report.pass());
        for (const auto& f : report.faces) CHECK_FALSE(f.checked);
    }
}
