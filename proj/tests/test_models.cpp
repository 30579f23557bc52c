#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "ksc/errors.hpp"
#include "ksc/models.hpp"
#include "ksc/quadrature.hpp"

using namespace ksc;

namespace {

const double kSqrt3 = std::sqrt(3.0);

// Composite Simpson rule, independent of the library's quadrature.
template <typename F>
double simpson(F f, double a, double b, int intervals = 20000) {
    const double h = (b - a) / intervals;
    double s = f(a) + f(b);
    for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

Eigen::Index flat(const std::vector<GridAxis>& grid, Eigen::Index i0, Eigen::Index i1) { return i0 + grid[0].count * i1; }

} // namespace

TEST_CASE("poisson exact field values") {
    const auto grid = default_poisson_grid();
    CHECK(grid[0].coordinate(16) == 0.0);
    CHECK(grid[0].coordinate(32) == 0.5);
    const auto f0 = poisson_exact_field(0.0, grid);
    CHECK(f0.values()(flat(grid, 16, 16)) == doctest::Approx(1.0).epsilon(1e-15));
    for (Eigen::Index i = 0; i < 33; ++i) CHECK(f0.values()(flat(grid, 32, i)) == 0.0);
    const auto f3 = poisson_exact_field(kSqrt3, grid);
    CHECK(f3.values()(flat(grid, 16, 16)) == doctest::Approx(std::exp(-3.0)).epsilon(1e-14));
    CHECK(f3.values()(flat(grid, 16, 16)) == doctest::Approx(0.0497871).epsilon(1e-6));
    CHECK(f3.size() == 33 * 33);
}

TEST_CASE("poisson exact mean") {
    const auto grid = default_poisson_grid();
    const auto mean = poisson_exact_mean(grid);
    // E[exp(-y^2)] for y uniform on [-sqrt3, sqrt3].
    const double oracle = simpson([](double y) { return std::exp(-y * y); }, -kSqrt3, kSqrt3) / (2 * kSqrt3);
    CHECK(mean.values()(flat(grid, 16, 16)) == doctest::Approx(oracle).epsilon(1e-13));
    CHECK(mean.values()(flat(grid, 16, 16)) == doctest::Approx(0.5043435602).epsilon(1e-9));
    CHECK(std::abs(mean.values()(flat(grid, 32, 32))) <= 1e-16);
    for (Eigen::Index i = 0; i < 33; ++i) {
        for (Eigen::Index j = 0; j < 33; ++j) {
            CHECK(mean.values()(flat(grid, i, j)) == mean.values()(flat(grid, j, i)));
            CHECK(mean.values()(flat(grid, i, j)) == mean.values()(flat(grid, 32 - i, j)));
        }
    }
}

TEST_CASE("poisson mean is the quadrature of the field") {
    const auto grid = default_poisson_grid(9);
    const auto box = ParameterDomain<double>::symmetric(1, kSqrt3);
    const auto rule = cc_rule(box, 10);
    const auto mean = poisson_exact_mean(grid);
    for (Eigen::Index j = 0; j < mean.size(); ++j) {
        const double q = integrate(rule, box, [&](const auto& y) { return poisson_exact_field(y(0), grid).values()(j); });
        CHECK(std::abs(q - mean.values()(j)) <= 1e-10);
    }
}

TEST_CASE("g-function values") {
    CHECK(g_function(Eigen::Vector3d(0.5, 0.5, 0.5)) == 0.0);
    CHECK(g_function(Eigen::Vector3d(0, 0, 0)) == doctest::Approx(10.0).epsilon(1e-15));
    const double avg = (g_function(Eigen::VectorXd::Constant(1, 0.0)) + g_function(Eigen::VectorXd::Constant(1, 0.5))) / 2;
    CHECK(avg == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("g-function Monte Carlo mean") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double sum = 0;
    const int n = 1000000;
    Eigen::Vector3d y;
    for (int i = 0; i < n; ++i) {
        y << u(rng), u(rng), u(rng);
        sum += g_function(y);
    }
    CHECK(sum / n >= 0.99);
    CHECK(sum / n <= 1.01);
}

TEST_CASE("KL expansion") {
    const auto v = kl_log_field(Eigen::VectorXd::Zero(1), 0.3, 2.0);
    CHECK(v.log_field == 1.0);
    CHECK(v.force == doctest::Approx(std::numbers::e - 9.81).epsilon(1e-15));
    CHECK(v.force == doctest::Approx(-7.091718).epsilon(1e-6));

    const double direct = std::sqrt(std::sqrt(std::numbers::pi) * 2.0) * std::exp(-std::pow(std::numbers::pi * 2.0, 2) / 8.0);
    CHECK(std::abs(kl_eigenvalue(2, 2.0) - direct) <= 1e-15);
    CHECK(kl_eigenvalue(2, 2.0) == doctest::Approx(0.0135408242).epsilon(1e-9));
    CHECK(kl_eigenvalue(3, 2.0) == kl_eigenvalue(2, 2.0));
    for (int m = 2; m < 12; ++m) CHECK(kl_eigenvalue(m + 2, 2.0) < kl_eigenvalue(m, 2.0));
    CHECK_THROWS_AS(kl_eigenvalue(1, 2.0), DomainError);

    CHECK(kl_eigenfunction(2, 0.5) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(kl_eigenfunction(3, 0.5) == doctest::Approx(0.0).scale(1.0));
    CHECK(kl_eigenfunction(5, 0.5) == doctest::Approx(-1.0).epsilon(1e-15));

    // First coefficient: y1 = 1 adds (sqrt(pi) Lc / 2)^(1/2).
    const auto one = kl_log_field(Eigen::VectorXd::Ones(1), 0.0, 2.0);
    CHECK(one.log_field == doctest::Approx(1.0 + std::sqrt(std::sqrt(std::numbers::pi))).epsilon(1e-15));
}

TEST_CASE("KL force stays above -9.81") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-kSqrt3, kSqrt3), x(0.0, 1.0);
    for (int t = 0; t < 1000; ++t) {
        Eigen::VectorXd y(1 + t % 6);
        for (auto& v : y) v = u(rng);
        CHECK(kl_log_field(y, x(rng), 2.0).force > -9.81);
    }
}

TEST_CASE("KL exact mean matches quadrature") {
    const KlModel model{3, 2.0, GridAxis{0.0, 1.0, 5}};
    const auto exact = *exact_mean(model);
    const auto box = *default_domain(model);
    const auto rule = cc_rule(box, 6);
    for (Eigen::Index j = 0; j < exact.size(); ++j) {
        const double q = integrate(rule, box, [&](const auto& y) { return evaluate_analytic(model, y).values()(j); });
        CHECK(std::abs(q - exact.values()(j)) <= 1e-11);
    }
}

TEST_CASE("center of mass") {
    const std::vector<GridAxis> grid = {GridAxis{0, 1, 11}, GridAxis{0, 1, 11}, GridAxis{0, 1, 11}};
    auto field = GridField::zeros(grid);
    for (Eigen::Index j = 0; j < field.size(); ++j) {
        const auto x = field.coordinates(j);
        if ((x.array() - 0.5).matrix().norm() < 0.25) field.values()(j) = 1.0;
    }
    CHECK((center_of_mass(field).array() - 0.5).abs().maxCoeff() <= 1e-15);

    auto single = GridField::zeros(grid);
    single.values()(3 + 11 * 4 + 121 * 7) = 1.0;
    CHECK(center_of_mass(single).isApprox(Eigen::Vector3d(0.3, 0.4, 0.7), 1e-15));

    const std::vector<GridAxis> coarse = {GridAxis{0.25, 0.75, 2}, GridAxis{0, 1, 3}, GridAxis{0, 1, 3}};
    auto two = GridField::zeros(coarse);
    two.values()(0 + 2 * 1 + 6 * 1) = 1.0;
    two.values()(1 + 2 * 1 + 6 * 1) = 1.0;
    CHECK(center_of_mass(two)(0) == 0.5);

    CHECK_THROWS_AS(center_of_mass(GridField::zeros(grid)), DomainError);
    CHECK_THROWS_AS(center_of_mass(GridField::scalar(1.0)), DomainError);
}

TEST_CASE("center of mass is translation equivariant") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        const double shift[] = {0.5 * (t % 4), -2.0 * (t % 3), 4.0};
        std::vector<GridAxis> a = {GridAxis{0, 1, 9}, GridAxis{0, 2, 5}, GridAxis{-1, 1, 5}};
        std::vector<GridAxis> b = a;
        for (int d = 0; d < 3; ++d) {
            b[static_cast<std::size_t>(d)].lower += shift[d];
            b[static_cast<std::size_t>(d)].upper += shift[d];
        }
        auto fa = GridField::zeros(a);
        for (auto& v : fa.values()) v = u(rng) < 0.3 ? 1.0 : 0.0;
        if (fa.values().sum() == 0) fa.values()(0) = 1.0;
        const GridField fb(b, fa.values());
        const Eigen::Vector3d delta(shift[0], shift[1], shift[2]);
        CHECK((center_of_mass(fb) - center_of_mass(fa) - delta).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("grid fields") {
    CHECK_THROWS_AS(GridField(default_poisson_grid(3), Eigen::VectorXd::Zero(8)), DomainError);
    const auto a = GridField::zeros(default_poisson_grid(3));
    CHECK(a.same_grid(GridField::zeros(default_poisson_grid(3))));
    CHECK_FALSE(a.same_grid(GridField::zeros(default_poisson_grid(4))));
    CHECK(a.coordinates(1)(0) == 0.0);
    CHECK(a.coordinates(1)(1) == -0.5);
}

TEST_CASE("model dispatch") {
    CHECK(model_dims(PoissonModel{}) == 1);
    CHECK(model_output_size(PoissonModel{}) == 33 * 33);
    CHECK(model_output_size(GFunctionModel{}) == 1);
    CHECK(model_output_size(KlModel{}) == 33);
    CHECK(default_domain(GFunctionModel{})->volume() == 1.0);
    CHECK(default_domain(PoissonModel{})->upper()(0) == kSqrt3);
    CHECK_FALSE(default_domain(ExternalModel{}).has_value());
    CHECK_FALSE(exact_mean(ExternalModel{}).has_value());
    CHECK(exact_mean(GFunctionModel{})->values()(0) == 1.0);
    CHECK_THROWS_AS(evaluate_analytic(GFunctionModel{}, Eigen::Vector2d(0, 0)), DomainError);
    CHECK_THROWS_AS(evaluate_analytic(ExternalModel{}, Eigen::VectorXd::Zero(1)), DomainError);
    CHECK(evaluate_analytic(GFunctionModel{}, Eigen::Vector3d(0, 0, 0)).values()(0) == doctest::Approx(10.0));
}
