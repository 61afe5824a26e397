#include "hypersolve/problems.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace hypersolve;
using Catch::Approx;

namespace {

std::vector<double> sorted(const Vector& v)
{
    std::vector<double> out(v.data(), v.data() + v.size());
    std::sort(out.begin(), out.end());
    return out;
}

// smallest singular value of mu A - B, relative to the largest
double pencil_residual(const SymmetricSystem& s, int axis, double mu)
{
    Eigen::JacobiSVD<Matrix> svd(mu * s.A().matrix() - s.B(axis).matrix());
    const auto& sv = svd.singularValues();
    return sv[sv.size() - 1] / (1.0 + sv[0]);
}

} // namespace

TEST_CASE("acoustics pencils")
{
    for (int m = 1; m <= 3; ++m) {
        const double rho0 = 1.3, c0 = 0.7;
        const auto s = acoustics_system(rho0, c0, m);
        CHECK(s.n() == m + 1);
        for (int a = 0; a < m; ++a) {
            const auto mu = sorted(pencil_eigenvalues(s.A(), s.B(a)));
            CHECK(mu.front() == Approx(-c0));
            CHECK(mu.back() == Approx(c0));
            for (std::size_t j = 1; j + 1 < mu.size(); ++j) CHECK(std::abs(mu[j]) < 1e-14);
            CHECK(pencil_residual(s, a, c0) < 1e-12);
            CHECK(pencil_residual(s, a, -c0) < 1e-12);
        }
    }
    CHECK_THROWS_AS(acoustics_system(-1.0, 1.0), ConfigurationError);
    CHECK_THROWS_AS(acoustics_system(1.0, 0.0), ConfigurationError);
}

TEST_CASE("elasticity wave speeds")
{
    const double rho = 2.0, lam = 1.5, mu = 0.8;
    const auto s = elasticity_system(rho, lam, mu);
    const double cp = std::sqrt((lam + 2 * mu) / rho), cs = std::sqrt(mu / rho);
    const std::vector<double> expected{-cp, -cs, -cs, 0.0, 0.0, 0.0, cs, cs, cp};
    for (int a = 0; a < 3; ++a) {
        const auto got = sorted(pencil_eigenvalues(s.A(), s.B(a)));
        REQUIRE(got.size() == 9);
        for (std::size_t j = 0; j < 9; ++j) CHECK(got[j] == Approx(expected[j]).margin(1e-12));
        for (double c : {cp, cs, -cp, -cs, 0.0}) CHECK(pencil_residual(s, a, c) < 1e-12);
    }
}

TEST_CASE("elasticity A is positive definite for admissible parameters")
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> d(0.05, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        const double rho = d(rng), mu = d(rng);
        // lam anywhere above -2 mu / 3
        const double lam = -2.0 * mu / 3.0 + 0.01 + d(rng);
        const auto s = elasticity_system(rho, lam, mu);
        CHECK(sym_eigen(s.A()).eigenvalues.minCoeff() > 0.0);
    }
    CHECK_THROWS_AS(elasticity_system(1.0, -1.0, 1.0), ConfigurationError);
    CHECK_THROWS_AS(elasticity_system(1.0, 1.0, 0.0), ConfigurationError);
}

TEST_CASE("wall conditions are dissipative with a vanishing boundary form")
{
    SECTION("traction-free elasticity")
    {
        const auto s = elasticity_system(1.0, 2.0, 1.0);
        const auto b = traction_free_walls();
        CHECK(boundary_problems(s, canonical_transforms(s), b).empty());
        const auto report = check_dissipativity(s, b);
        CHECK(report.pass());
        for (const auto& f : report.faces) CHECK(f.form_eigenvalues.cwiseAbs().maxCoeff() < 1e-14);
    }
    SECTION("pressure release acoustics")
    {
        for (int m = 1; m <= 3; ++m) {
            const auto s = acoustics_system(1.0, 2.0, m);
            const auto report = check_dissipativity(s, pressure_release_walls(m));
            CHECK(report.pass());
            for (const auto& f : report.faces) CHECK(f.form_eigenvalues.cwiseAbs().maxCoeff() < 1e-14);
        }
    }
}

TEST_CASE("advection pencils")
{
    const auto s = advection_system({2.0, -3.0});
    CHECK(pencil_eigenvalues(s.A(), s.B(0))[0] == Approx(2.0));
    CHECK(pencil_eigenvalues(s.A(), s.B(1))[0] == Approx(-3.0));
    const auto z = advection_system({0.0});
    CHECK(pencil_eigenvalues(z.A(), z.B(0))[0] == 0.0);
}

TEST_CASE("correctness domain")
{
    SECTION("one-way advection is not compact")
    {
        const auto d = correctness_domain(advection_system({2.0, -3.0}));
        CHECK_FALSE(d.compact());
        CHECK(std::isinf(d.apex_time()));
    }
    SECTION("acoustics with c0 = 1 closes at t = 1/2")
    {
        const auto d = correctness_domain(acoustics_system(1.0, 1.0, 3));
        CHECK(d.compact());
        CHECK(d.apex_time() == Approx(0.5));
        const std::array<double, 3> centre{0.5, 0.5, 0.5};
        CHECK(d.contains(centre, 0.49));
        CHECK_FALSE(d.contains(centre, 0.51));
    }
    SECTION("zero pencils leave the whole cube")
    {
        const auto d = correctness_domain(advection_system({0.0}));
        const auto mask = cells_in_domain(Grid(1, 3), d, 10.0);
        CHECK(std::all_of(mask.begin(), mask.end(), [](bool b) { return b; }));
    }
}

TEST_CASE("cells in the domain")
{
    const auto acoustic = correctness_domain(acoustics_system(1.0, 1.0, 2));
    const Grid g(2, 3);
    SECTION("t = 0 includes every cell")
    {
        const auto mask = cells_in_domain(g, acoustic, 0.0);
        CHECK(std::count(mask.begin(), mask.end(), true) == 64);
    }
    SECTION("advection with speed 1 at t = 1/2 keeps x in [1/2, 1]")
    {
        const auto mask = cells_in_domain(Grid(1, 2), correctness_domain(advection_system({1.0})), 0.5);
        CHECK(mask == std::vector<bool>{false, false, true, true});
    }
    SECTION("acoustics at t = 1/4 keeps the middle half")
    {
        const auto mask = cells_in_domain(Grid(1, 2), correctness_domain(acoustics_system(1.0, 1.0, 1)), 0.25);
        CHECK(mask == std::vector<bool>{false, true, true, false});
    }
    SECTION("empty beyond the apex")
    {
        const auto mask = cells_in_domain(g, acoustic, 0.6);
        CHECK(std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }));
    }
    SECTION("the included set shrinks with t")
    {
        auto prev = cells_in_domain(g, acoustic, 0.0);
        for (double t = 0.05; t < 0.6; t += 0.05) {
            const auto cur = cells_in_domain(g, acoustic, t);
            for (std::size_t c = 0; c < cur.size(); ++c) {
                if (cur[c]) CHECK(prev[c]);
            }
            prev = cur;
        }
    }
    CHECK_THROWS_AS(cells_in_domain(g, acoustic, -1.0), UsageError);
    CHECK_THROWS_AS(cells_in_domain(Grid(1, 2), acoustic, 0.0), UsageError);
}

TEST_CASE("wave equation as acoustics")
{
    auto phi = [](double x, double y, double z) { return x * y + z; };
    SECTION("psi = 0 starts at rest")
    {
        const auto p = wave_to_acoustics(phi, [](double, double, double) { return 0.0; }, 1.0, 1.0, 3, 0.1);
        const std::array<double, 3> x{0.3, 0.6, 0.2};
        const Vector u = p.initial(x);
        CHECK(u.head(3).cwiseAbs().maxCoeff() == 0.0);
        CHECK(u[3] == Approx(0.38));
    }
    SECTION("psi = 1 gives u = -x")
    {
        const auto p = wave_to_acoustics(phi, [](double, double, double) { return 1.0; }, 1.0, 1.0, 3, 0.1);
        for (double x0 : {0.0, 0.1, 0.55, 1.0}) {
            const std::array<double, 3> x{x0, 0.4, 0.9};
            CHECK(p.initial(x)[0] == Approx(-x0).margin(1e-15));
        }
    }
    SECTION("the velocity scales with 1/(rho0 c0^2)")
    {
        const auto p = wave_to_acoustics(phi, [](double, double, double) { return 1.0; }, 2.0, 0.5, 3, 0.1);
        const std::array<double, 3> x{0.5, 0.4, 0.9};
        CHECK(p.initial(x)[0] == Approx(-0.5 / 0.5));
    }
    CHECK(trapezoid([](double s) { return s * s; }, 1.0, 1000) == Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("standing mode exact solution solves the system")
{
    const double rho0 = 1.2, c0 = 0.9;
    const auto p = standing_mode_problem(rho0, c0, 3, 0.5);
    REQUIRE(p.exact);
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> d(0.1, 0.9);
    const double e = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
        std::array<double, 3> x{d(rng), d(rng), d(rng)};
        const double t = 0.5 * d(rng);
        // A u_t + sum B_i u_{x_i} by central differences
        Vector r = p.system.A().matrix() * (p.exact(x, t + e) - p.exact(x, t - e)) / (2 * e);
        for (int a = 0; a < 3; ++a) {
            auto xp = x, xm = x;
            xp[static_cast<std::size_t>(a)] += e;
            xm[static_cast<std::size_t>(a)] -= e;
            r += p.system.B(a).matrix() * (p.exact(xp, t) - p.exact(xm, t)) / (2 * e);
        }
        CHECK(r.cwiseAbs().maxCoeff() < 1e-7);
        // initial data agrees with the exact solution at t = 0
        CHECK((p.initial(x) - p.exact(x, 0.0)).cwiseAbs().maxCoeff() < 1e-14);
    }
    // p vanishes on the walls
    const std::array<double, 3> wall{0.0, 0.3, 0.7};
    CHECK(std::abs(p.exact(wall, 0.2)[3]) < 1e-15);
}

TEST_CASE("problem validation")
{
    SECTION("acoustics with correct metadata has no warnings")
    {
        auto p = standing_mode_problem(2.0, 1.0, 3, 0.1);
        p.cardinalities = SpectraCardinalities{2, {3, 3, 3}};
        CHECK(validate_problem(p).empty());
    }
    SECTION("mismatched metadata warns")
    {
        auto p = standing_mode_problem(2.0, 1.0, 3, 0.1);
        p.cardinalities = SpectraCardinalities{1, {3, 2, 3}};
        const auto w = validate_problem(p);
        REQUIRE(w.size() == 2);
        CHECK(w[0].find("A has 2") != std::string::npos);
        CHECK(w[1].find("axis y") != std::string::npos);
    }
    SECTION("near collisions warn")
    {
        ProblemInstance p{SymmetricSystem(SymMatrix::identity(2), {SymMatrix{{1.0, 0.0}, {0.0, 1.0 + 1e-9}}}),
                          BoundarySpec::all_wrap(1), [](std::span<const double>) { return Vector::Zero(2); }, 1.0,
                          std::nullopt, {}, "close"};
        const auto w = validate_problem(p);
        REQUIRE(w.size() == 1);
        CHECK(w[0].find("axis x") != std::string::npos);
    }
    SECTION("a non-dissipative face is an error")
    {
        Matrix phi(1, 2);
        phi << 0.0, 1.0;
        BoundarySpec b;
        b.faces.push_back({Dissipative{phi}, Dissipative{selector_rows(2, {0})}});
        ProblemInstance p{SymmetricSystem(SymMatrix::identity(2), {SymMatrix{{1.0, 0.0}, {0.0, -1.0}}}), b,
                          [](std::span<const double>) { return Vector::Zero(2); }, 1.0, std::nullopt, {}, "bad"};
        try {
            (void)validate_problem(p);
            FAIL("expected ConfigurationError");
        } catch (const ConfigurationError& e) {
            CHECK(std::string(e.what()).find("x/low") != std::string::npos);
        }
    }
}
