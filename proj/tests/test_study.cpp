#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "ksc/errors.hpp"
#include "ksc/study.hpp"

using namespace ksc;
using K = KernelSpec<double>;
using Domain = ParameterDomain<double>;

namespace {

StudyConfig poisson_config() {
    StudyConfig c;
    c.model = PoissonModel{};
    c.domain = Domain::symmetric(1, std::sqrt(3.0));
    c.error = ErrorNorm::abs_l2;
    return c;
}

StudyConfig gfunction_config() {
    StudyConfig c;
    c.model = GFunctionModel{};
    c.domain = Domain::unit_cube(3);
    c.error = ErrorNorm::rel_scalar;
    return c;
}

double g_scalar(const Eigen::Ref<const Eigen::VectorXd>& y) { return g_function(y); }

} // namespace

TEST_CASE("error norm examples") {
    const Eigen::Vector3d r(1.0, -2.0, 0.5);
    CHECK(error_norm(r, r, ErrorNorm::abs_l2) == 0.0);
    CHECK(error_norm(r, r, ErrorNorm::rel_l2) == 0.0);
    const Eigen::Vector3d e = r.array() + 1.0;
    CHECK(error_norm(e, r, ErrorNorm::abs_l2) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(error_norm(e, r, ErrorNorm::rel_l2) ==
          doctest::Approx(1.0 / std::sqrt(r.squaredNorm() / 3)).epsilon(1e-15));
    CHECK(error_norm(Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Constant(1, 1.0), ErrorNorm::rel_scalar) == 1.0);
    CHECK(error_norm(Eigen::VectorXd::Constant(1, -2.0), Eigen::VectorXd::Constant(1, 1.0), ErrorNorm::abs_scalar) == 3.0);

    CHECK_THROWS_AS(error_norm(Eigen::Vector2d(1, 1), Eigen::Vector3d(1, 1, 1), ErrorNorm::abs_l2), DomainError);
    CHECK_THROWS_AS(error_norm(r, r, ErrorNorm::abs_scalar), DomainError);
    CHECK_THROWS_AS(error_norm(r, Eigen::Vector3d::Zero(), ErrorNorm::rel_l2), NumericalError);
    CHECK_THROWS_AS(error_norm(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), ErrorNorm::rel_scalar), NumericalError);

    const GridField a = GridField::zeros(default_poisson_grid(3));
    CHECK_THROWS_AS(error_norm(a, GridField::zeros(default_poisson_grid(4)), ErrorNorm::abs_l2), DomainError);
    CHECK(error_norm(a, a, ErrorNorm::abs_l2) == 0.0);
}

TEST_CASE("error norm tags") {
    for (auto n : {ErrorNorm::abs_l2, ErrorNorm::rel_l2, ErrorNorm::abs_scalar, ErrorNorm::rel_scalar})
        CHECK(parse_error_norm(to_string(n)) == n);
    CHECK_THROWS_AS(parse_error_norm("linf"), ConfigError);
}

TEST_CASE("fit order examples") {
    const ErrorPoint line1[] = {{10, 1e-2}, {100, 1e-3}};
    const ErrorPoint line2[] = {{10, 1e-2}, {100, 1e-4}};
    const ErrorPoint flat[] = {{10, 0.3}, {100, 0.3}, {1000, 0.3}};
    CHECK(fit_order(line1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(fit_order(line2) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(fit_order(flat) == 0.0);

    const ErrorPoint one[] = {{10, 1e-2}};
    const ErrorPoint zero[] = {{10, 1e-2}, {100, 0.0}};
    CHECK_THROWS(fit_order(one));
    CHECK_THROWS(fit_order(zero));
}

TEST_CASE("fit order recovers exact power laws") {
    for (double p : {0.5, 1.0, 2.75, 5.0}) {
        std::vector<ErrorPoint> pts;
        for (double n = 8; n <= 4096; n *= 2) pts.push_back({n, 3.0 * std::pow(n, -p)});
        CHECK(fit_order(pts) == doctest::Approx(p).epsilon(1e-12));
    }
}

TEST_CASE("fit tail window") {
    const std::vector<Eigen::Index> schedule = {2, 4, 8, 16, 32, 64};
    std::vector<double> errors;
    for (auto n : schedule) errors.push_back(std::pow(static_cast<double>(n), -3.0));

    const auto fit = fit_tail(schedule, errors, FitWindow{}, 0.0);
    REQUIRE(fit);
    CHECK(fit->window == std::vector<Eigen::Index>{8, 16, 32, 64});
    CHECK(fit->order == doctest::Approx(3.0).epsilon(1e-12));

    // Points within 10x of the floor leave the window.
    const auto floored = fit_tail(schedule, errors, FitWindow{}, 1e-5);
    REQUIRE(floored);
    CHECK(floored->window == std::vector<Eigen::Index>{2, 4, 8, 16});

    const std::vector<Eigen::Index> single = {64};
    CHECK_FALSE(fit_tail(single, std::vector<double>{1e-3}, FitWindow{}, 0.0));
    CHECK_FALSE(fit_tail(schedule, errors, FitWindow{}, 1.0));
    CHECK(fit_tail(schedule, errors, FitWindow{2, 10.0}, 0.0)->window == std::vector<Eigen::Index>{32, 64});

    CHECK(regularization_floor(Regularization::tikhonov(1e-8)) == 1e-8);
    CHECK(regularization_floor(Regularization::tsvd(1e-3)) == 0.0);
    CHECK(regularization_floor(Regularization::none()) == 0.0);
}

TEST_CASE("schedule of length one reports no fit") {
    auto c = gfunction_config();
    c.kernels = {KernelEntry{"gaussian", K::gaussian(2.0), Regularization::tikhonov(1e-8)}};
    c.schedule = {32};
    const auto report = run_study(c);
    REQUIRE(report.series.size() == 1);
    CHECK(report.series[0].errors.size() == 1);
    CHECK_FALSE(report.series[0].fit);
}

TEST_CASE("samples are reused across the schedule") {
    auto c = gfunction_config();
    c.kernels = {KernelEntry{"gaussian", K::gaussian(2.0), Regularization::tikhonov(1e-8)},
                 KernelEntry{"wendland1", K::wendland(3, 1), Regularization::tikhonov(1e-12)}};
    c.schedule = {4, 16, 64, 128};
    const auto report = run_study(c);
    CHECK(report.model_evaluations == 128);
    for (const auto& s : report.series)
        for (double e : s.errors) CHECK(e >= 0.0);
}

TEST_CASE("study csv is deterministic") {
    auto c = poisson_config();
    c.kernels = {KernelEntry{"gaussian", K::gaussian(1.0), Regularization::tikhonov(1e-15)},
                 KernelEntry{"wendland2", K::wendland(1, 2), Regularization::tikhonov(1e-12)},
                 KernelEntry{"tsvd", K::wendland(1, 2), Regularization::tsvd(1e-6)}};
    c.schedule = {2, 4, 8, 16, 32, 64};
    std::ostringstream a, b;
    write_csv(run_study(c), a);
    write_csv(run_study(c), b);
    const std::string text = a.str();
    CHECK(text == b.str());
    CHECK(text.rfind("collocationpoints,gaussian,wendland2,tsvd\n2,", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 7);
}

TEST_CASE("shared kernels give the same errors as separate runs") {
    auto c = poisson_config();
    c.schedule = {4, 16, 64};
    const KernelEntry tik{"tik", K::wendland(1, 3), Regularization::tikhonov(1e-10)};
    const KernelEntry tsvd{"tsvd", K::wendland(1, 3), Regularization::tsvd(1e-8)};
    c.kernels = {tik, tsvd};
    const auto together = run_study(c);
    c.kernels = {tsvd};
    const auto alone = run_study(c);
    CHECK(together.series[1].errors == alone.series[0].errors);
}

TEST_CASE("poisson gaussian reaches machine precision quickly") {
    auto c = poisson_config();
    c.kernels = {KernelEntry{"gaussian", K::gaussian(1.0), Regularization::tikhonov(1e-15)}};
    c.schedule = {2, 4, 8};
    const auto report = run_study(c);
    CHECK(report.series[0].errors[1] <= 1e-10);
}

TEST_CASE("kernel reference") {
    SUBCASE("same N and kernel as a schedule entry gives the same estimate") {
        auto c = gfunction_config();
        const KernelEntry entry{"w2", K::wendland(3, 2), Regularization::tikhonov(1e-12)};
        const auto pts = halton_points(c.domain, 64);
        const Eigen::MatrixXd samples = sample_model(c, pts);
        const auto est = estimate_with_kernel(c, entry, pts, samples);
        CHECK(kernel_reference(c, 64, entry) == est.mean);
    }
    SUBCASE("poisson reference against the exact mean") {
        auto c = poisson_config();
        const KernelEntry entry{"gaussian", K::gaussian(1.0), Regularization::tikhonov(1e-15)};
        const Eigen::VectorXd ref = kernel_reference(c, 1024, entry);
        const Eigen::VectorXd exact = exact_mean(c.model)->values();
        CHECK((ref - exact).cwiseAbs().maxCoeff() <= 1e-8);
    }
    SUBCASE("g-function reference at 8192") {
        auto c = gfunction_config();
        const KernelEntry entry{"gaussian", K::gaussian(2.0), Regularization::tikhonov(1e-8)};
        CHECK(std::abs(kernel_reference(c, 8192, entry)(0) - 1.0) <= 1e-3);
    }
}

TEST_CASE("errors are annotated with kernel and N") {
    auto c = gfunction_config();
    c.kernels = {KernelEntry{"plain", K::gaussian(1e-3), Regularization::none()}};
    c.schedule = {4, 64};
    try {
        run_study(c);
        FAIL("expected a numerical error");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("kernel 'plain', N=") != std::string::npos);
    }
}

TEST_CASE("baselines") {
    const auto box = Domain::unit_cube(3);
    const ScalarModel constant = [](const auto&) { return 2.75; };
    CHECK(mc_baseline(constant, box, 1000, 1) == 2.75);
    CHECK(qmc_baseline(constant, box, 1000) == 2.75);
    CHECK(mc_baseline(g_scalar, box, 500, 17) == mc_baseline(g_scalar, box, 500, 17));

    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const double m = mc_baseline(g_scalar, box, 1000000, seed);
        CHECK(std::abs(m - 1.0) <= 0.01);
    }

    // QMC against the median MC error over seeds.
    std::vector<double> mc_errors;
    for (std::uint64_t seed = 1; seed <= 11; ++seed) mc_errors.push_back(std::abs(mc_baseline(g_scalar, box, 4096, seed) - 1.0));
    std::nth_element(mc_errors.begin(), mc_errors.begin() + 5, mc_errors.end());
    const double qmc_error = std::abs(qmc_baseline(g_scalar, box, 4096) - 1.0);
    CHECK(qmc_error / mc_errors[5] <= 1.5);
}

TEST_CASE("validation") {
    auto good = gfunction_config();
    good.kernels = {KernelEntry{"g", K::gaussian(2.0), Regularization::tikhonov(1e-8)}};
    good.schedule = {4, 8};
    CHECK_NOTHROW(validate(good));

    auto c = good;
    c.schedule = {8, 4};
    CHECK_THROWS_AS(validate(c), ConfigError);
    c.schedule = {4, 4};
    CHECK_THROWS_AS(validate(c), ConfigError);
    c.schedule = {0, 4};
    CHECK_THROWS_AS(validate(c), ConfigError);
    c.schedule = {};
    CHECK_THROWS_AS(validate(c), ConfigError);

    c = good;
    c.kernels.clear();
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = good;
    c.kernels.push_back(c.kernels[0]);
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = good;
    c.domain = Domain::unit_cube(2);
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = good;
    c.quadrature_level = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = good;
    c.reference = KernelReference{8, good.kernels[0]};
    CHECK_THROWS_AS(validate(c), ConfigError);
    c.reference = KernelReference{9, good.kernels[0]};
    CHECK_NOTHROW(validate(c));

    c = good;
    ExternalModel ext;
    ext.dims = 3;
    c.model = ext;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c.reference = ValueReference{Eigen::VectorXd::Ones(1)};
    CHECK_NOTHROW(validate(c));
}

TEST_CASE("kernel keys") {
    CHECK(kernel_key(K::gaussian(2.0)) == kernel_key(K::gaussian(2.0)));
    CHECK(kernel_key(K::gaussian(2.0)) != kernel_key(K::gaussian(2.5)));
    CHECK(kernel_key(K::wendland(3, 2)) != kernel_key(K::wendland(2, 2)));
    CHECK(kernel_key(K::wendland(3, 2)) != kernel_key(K::wendland(3, 2, NormSpec<double>(0.5))));
    CHECK(kernel_key(K::matern12()) != kernel_key(K::matern32()));
}
