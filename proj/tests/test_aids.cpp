#include "fuelshock/aids.hpp"
#include "fuelshock/params_io.hpp"
#include "fuelshock/serialize.hpp"
#include "fuelshock/synthetic.hpp"

#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace fuelshock;

namespace {

// Independent term-by-term evaluation of the translog deflator.
double translog_oracle(const Eigen::VectorXd& lp, const AidsParameters& p)
{
    double acc = p.alpha0;
    for (int j = 0; j < p.n(); ++j) acc += p.alpha(j) * lp(j);
    for (int i = 0; i < p.n(); ++i)
        for (int j = 0; j < p.n(); ++j) acc += 0.5 * p.gamma(i, j) * lp(i) * lp(j);
    return acc;
}

double max_param_distance(const AidsParameters& a, const AidsParameters& b)
{
    double r = (a.alpha - b.alpha).lpNorm<Eigen::Infinity>();
    r = std::max(r, (a.beta - b.beta).lpNorm<Eigen::Infinity>());
    r = std::max(r, (a.gamma - b.gamma).lpNorm<Eigen::Infinity>());
    return r;
}

} // namespace

TEST_CASE("translog price index")
{
    synthetic::Rng rng(7);
    SECTION("all prices one collapses to alpha0")
    {
        AidsParameters p = synthetic::random_restricted_parameters(rng, 5);
        CHECK(translog_price_index(Eigen::VectorXd::Zero(5), p) == p.alpha0);
    }
    SECTION("uniform alphas and zero gamma average equal log prices")
    {
        AidsParameters p;
        p.alpha = Eigen::VectorXd::Constant(4, 0.25);
        p.beta = Eigen::VectorXd::Zero(4);
        p.gamma = Eigen::MatrixXd::Zero(4, 4);
        const double c = 1.37;
        CHECK_THAT(translog_price_index(Eigen::VectorXd::Constant(4, c), p),
                   Catch::Matchers::WithinAbs(c, 1e-14));
    }
    SECTION("matches the double-loop oracle on random draws")
    {
        for (int rep = 0; rep < 50; ++rep) {
            const int n = 2 + int(rng.uniform(0.0, 7.0));
            AidsParameters p = synthetic::random_restricted_parameters(rng, n, 0.05, 0.1);
            Eigen::VectorXd lp(n);
            for (int j = 0; j < n; ++j) lp(j) = rng.uniform(-1.0, 2.5);
            CHECK_THAT(translog_price_index(lp, p),
                       Catch::Matchers::WithinAbs(translog_oracle(lp, p), 1e-12));
        }
    }
    SECTION("dimension mismatch")
    {
        AidsParameters p = synthetic::random_restricted_parameters(rng, 4);
        CHECK_THROWS_AS(translog_price_index(Eigen::VectorXd::Zero(3), p), ValidationError);
    }
}

TEST_CASE("free parameter map enforces the restrictions exactly")
{
    synthetic::Rng rng(11);
    for (int n : {2, 3, 5, 10}) {
        for (int dropped : {0, n - 1}) {
            const FreeParameterMap map(n, dropped);
            Eigen::VectorXd theta(map.size());
            for (int i = 0; i < theta.size(); ++i) theta(i) = rng.uniform(-0.5, 0.5);
            const AidsParameters p = map.unpack(theta);
            CHECK(p.restriction_residual() < 1e-14);
            // pack is the left inverse of unpack
            CHECK((map.pack(p) - theta).lpNorm<Eigen::Infinity>() < 1e-14);
        }
    }
}

TEST_CASE("fit_aids on constant shares returns the shares and zero slopes")
{
    synthetic::Rng rng(23);
    const int n = 4, t = 60;
    DemandSystemData d;
    d.goods = {"a", "b", "c", "e"};
    Eigen::VectorXd w(n);
    w << 0.1, 0.2, 0.3, 0.4;
    d.shares.resize(t, n);
    d.log_prices.resize(t, n);
    d.log_expenditure.resize(t);
    for (int r = 0; r < t; ++r) {
        d.shares.row(r) = w.transpose();
        for (int j = 0; j < n; ++j) d.log_prices(r, j) = rng.uniform(0.0, 2.0);
        d.log_expenditure(r) = rng.uniform(10.0, 12.0);
        d.group_labels.push_back("g" + std::to_string(r));
    }
    const AidsFit fit = fit_aids(d);
    CHECK((fit.params.alpha - w).lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK(fit.params.beta.lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK(fit.params.gamma.lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK(fit.residuals.lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("fit_aids rejects unidentified price structures")
{
    synthetic::SyntheticSystem sys = synthetic::generate_system(31);
    SECTION("two goods sharing a price series are named")
    {
        DemandSystemData d = sys.data;
        d.log_prices.col(2) = d.log_prices.col(0);
        CHECK_THROWS_MATCHES(
            fit_aids(d), CollinearityError,
            Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("good1") &&
                                            Catch::Matchers::ContainsSubstring("good3")));
    }
    SECTION("a single repeated price vector is rejected")
    {
        DemandSystemData d = sys.data;
        for (int r = 1; r < d.n_groups(); ++r) d.log_prices.row(r) = d.log_prices.row(0);
        CHECK_THROWS_AS(fit_aids(d), EstimationError);
    }
}

TEST_CASE("fit_aids recovers generating parameters on a synthetic panel")
{
    const synthetic::SyntheticSystem sys = synthetic::generate_system(424242);
    const AidsFit fit = fit_aids(sys.data);

    CHECK(fit.converged);
    CHECK(fit.params.restriction_residual() < 1e-8);

    const Eigen::VectorXd truth = fit.map.pack(sys.truth);
    const Eigen::VectorXd se = fit.covariance.diagonal().cwiseSqrt();
    int within3 = 0;
    for (int l = 0; l < truth.size(); ++l) {
        const double z = std::abs(fit.free_params(l) - truth(l)) / se(l);
        CHECK(z < 4.5); // no catastrophic outlier on this seed
        if (z <= 3.0) ++within3;
    }
    CHECK(within3 >= truth.size() - 1);

    SECTION("fitted shares sum to one at every observation")
    {
        // Residual rows sum to zero by the adding-up recovery, so fitted
        // shares inherit the unit sum of observed shares.
        for (int r = 0; r < fit.residuals.rows(); ++r)
            CHECK(std::abs(fit.residuals.row(r).sum()) < 1e-12);
    }
}

TEST_CASE("fit_aids is invariant to the dropped equation")
{
    const synthetic::SyntheticSystem sys = synthetic::generate_system(5150);
    AidsOptions opt;
    opt.tol = 1e-10;
    const AidsFit fit_last = fit_aids(sys.data, opt);
    opt.dropped_equation = 0;
    const AidsFit fit_first = fit_aids(sys.data, opt);
    opt.dropped_equation = 1;
    const AidsFit fit_mid = fit_aids(sys.data, opt);

    CHECK(max_param_distance(fit_last.params, fit_first.params) < 1e-6);
    CHECK(max_param_distance(fit_last.params, fit_mid.params) < 1e-6);
}

TEST_CASE("fit_aids is invariant to a common scale of prices and expenditure")
{
    const synthetic::SyntheticSystem sys = synthetic::generate_system(99);
    const AidsFit base = fit_aids(sys.data);

    DemandSystemData scaled = sys.data;
    const double log_lambda = std::log(7.3);
    scaled.log_prices.array() += log_lambda;
    scaled.log_expenditure.array() += log_lambda;
    const AidsFit fit = fit_aids(scaled);

    CHECK((fit.params.gamma - base.params.gamma).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK((fit.params.beta - base.params.beta).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK((fit.params.alpha - base.params.alpha).lpNorm<Eigen::Infinity>() < 1e-6);
    // identical fitted shares: residuals agree observation by observation
    CHECK((fit.residuals - base.residuals).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("fit_aids error shrinks as the noise vanishes")
{
    synthetic::GeneratorConfig cfg;
    double last_err = std::numeric_limits<double>::infinity();
    for (double sigma : {0.01, 0.001}) {
        cfg.noise_sd = sigma;
        const synthetic::SyntheticSystem sys = synthetic::generate_system(777, cfg);
        const AidsFit fit = fit_aids(sys.data);
        const double err = max_param_distance(fit.params, sys.truth);
        CHECK(err < last_err);
        last_err = err;
    }
    // At sigma 0.001 the worst coordinate (an alpha, leverage-amplified by
    // the intercept / ln(X/P) collinearity) sits around 4e-3.
    CHECK(last_err < 1e-2);
}

TEST_CASE("stone index option fits without relinearization")
{
    const synthetic::SyntheticSystem sys = synthetic::generate_system(2024);
    AidsOptions opt;
    opt.index = PriceIndex::Stone;
    const AidsFit fit = fit_aids(sys.data, opt);
    CHECK(fit.converged);
    CHECK(fit.params.restriction_residual() < 1e-8);
    // The Stone approximation stays close to the translog estimates here.
    const AidsFit exact = fit_aids(sys.data);
    CHECK(max_param_distance(fit.params, exact.params) < 0.05);
}

TEST_CASE("fit_aids reports non-convergence")
{
    const synthetic::SyntheticSystem sys = synthetic::generate_system(8);
    AidsOptions opt;
    opt.max_iter = 1;
    CHECK_THROWS_AS(fit_aids(sys.data, opt), ConvergenceError);
}

TEST_CASE("price grouping pools goods that share a price series")
{
    // Split each good of a 2-good system into two classes with half shares
    // and the same price: pooling must reproduce the 2-good estimates.
    synthetic::GeneratorConfig cfg;
    cfg.n_goods = 2;
    const synthetic::SyntheticSystem base = synthetic::generate_system(62, cfg);
    const DemandSystemData& two = base.data;
    const int t = two.n_groups();

    DemandSystemData four;
    four.goods = {"G1", "G2", "D1", "D2"};
    four.group_labels = two.group_labels;
    four.shares.resize(t, 4);
    four.log_prices.resize(t, 4);
    four.shares.col(0) = 0.5 * two.shares.col(0);
    four.shares.col(1) = 0.5 * two.shares.col(0);
    four.shares.col(2) = 0.5 * two.shares.col(1);
    four.shares.col(3) = 0.5 * two.shares.col(1);
    four.log_prices.col(0) = two.log_prices.col(0);
    four.log_prices.col(1) = two.log_prices.col(0);
    four.log_prices.col(2) = two.log_prices.col(1);
    four.log_prices.col(3) = two.log_prices.col(1);
    four.log_expenditure = two.log_expenditure;

    CHECK_THROWS_AS(fit_aids(four), CollinearityError);

    AidsOptions opt;
    opt.group_prices = true;
    const AidsFit pooled = fit_aids(four, opt);
    const AidsFit direct = fit_aids(two);
    CHECK(pooled.goods == std::vector<std::string>{"G1+G2", "D1+D2"});
    CHECK(max_param_distance(pooled.params, direct.params) < 1e-9);
}

TEST_CASE("fit document round-trips through JSON")
{
    const synthetic::SyntheticSystem sys = synthetic::generate_system(3030);
    const AidsFit fit = fit_aids(sys.data);
    const std::string doc = fit_to_json(fit);
    const AidsFit back = fit_from_json(doc);
    CHECK(max_param_distance(fit.params, back.params) == 0.0);
    CHECK((back.covariance - fit.covariance).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(back.dropped_good == fit.dropped_good);
    CHECK((back.mean_shares - fit.mean_shares).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("double-log model")
{
    // Panel where ln q = a + b ln p + c ln X holds exactly: group expenditure
    // solves the fixed point X = (sum_i e^(a+eps_i) p_i^(1+b))^(1/(1-c)), and
    // population carries q through derive_activity (vmt 1, fuel economy 100).
    synthetic::Rng rng(404);
    const int n = 4, t = 40;
    FleetParams fleet;
    for (int j = 0; j < n; ++j) {
        FleetEntry e;
        e.vehicle = {"c" + std::to_string(j), "", Fuel::Gasoline};
        e.baseline_vmt_km = 10000;
        e.fuel_economy_l_per_100km = 100.0; // quantity == population * vmt
        e.emission_factor_g_per_km = {1.0, 1.0, 1.0};
        fleet.entries.push_back(e);
    }

    const auto build_panel = [&](double a, double b, double c, double noise_sd) {
        FuelPanel panel;
        for (int j = 0; j < n; ++j) panel.classes.push_back("c" + std::to_string(j));
        for (int g = 0; g < t; ++g) {
            Eigen::VectorXd lp(n), eps(n);
            for (int j = 0; j < n; ++j) {
                lp(j) = rng.uniform(0.5, 2.0);
                eps(j) = noise_sd == 0.0 ? 0.0 : noise_sd * rng.normal();
            }
            double s = 0.0;
            for (int j = 0; j < n; ++j)
                s += std::exp(a + eps(j) + (1.0 + b) * lp(j));
            const double x = std::pow(s, 1.0 / (1.0 - c));
            for (int j = 0; j < n; ++j) {
                PanelObservation r;
                r.province = "p" + std::to_string(g);
                r.year = 2002;
                r.vehicle_class = "c" + std::to_string(j);
                r.price = std::exp(lp(j));
                r.vmt = 1.0;
                r.vehicle_population =
                    std::exp(a + b * lp(j) + c * std::log(x) + eps(j));
                panel.rows.push_back(r);
            }
        }
        return derive_activity(panel, fleet);
    };

    SECTION("exact linear recovery")
    {
        const DoubleLogFit fit = fit_double_log(build_panel(2.0, -0.8, 0.5, 0.0));
        for (const auto& eq : fit.equations) {
            CHECK_THAT(eq.intercept, Catch::Matchers::WithinAbs(2.0, 1e-10));
            CHECK_THAT(eq.own_price, Catch::Matchers::WithinAbs(-0.8, 1e-10));
            CHECK_THAT(eq.expenditure, Catch::Matchers::WithinAbs(0.5, 1e-10));
        }
    }
    SECTION("noisy recovery within three standard errors")
    {
        const DoubleLogFit fit = fit_double_log(build_panel(2.0, -0.8, 0.5, 0.02));
        for (const auto& eq : fit.equations) {
            CHECK(std::abs(eq.own_price + 0.8) <= 3.0 * eq.se_own_price);
            CHECK(std::abs(eq.expenditure - 0.5) <= 3.0 * eq.se_expenditure);
            CHECK(eq.se_own_price >= 0.0);
        }
    }
    SECTION("constant price column is rejected")
    {
        FuelPanel panel = build_panel(2.0, -0.8, 0.5, 0.0);
        for (auto& r : panel.rows)
            if (r.vehicle_class == "c1") r.price = 4.0;
        panel = derive_activity(panel, fleet);
        CHECK_THROWS_MATCHES(fit_double_log(panel), EstimationError,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("zero variance")));
    }
    SECTION("too few observations")
    {
        FuelPanel panel = build_panel(2.0, -0.8, 0.5, 0.0);
        panel.rows.resize(2 * n); // two groups
        panel = derive_activity(panel, fleet);
        CHECK_THROWS_MATCHES(fit_double_log(panel), EstimationError,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("at least 3")));
    }
}

TEST_CASE("the bundled sample panel is recoverable")
{
    const auto params = load_parameters(testutil::data_dir() / "paper" / "parameters.json");
    const auto sample_path = testutil::data_dir() / "sample" / "fuel_panel.csv";
    const FuelPanel panel = derive_activity(load_panel(sample_path), params.fleet);
    const AidsFit fit = fit_aids(panel);
    CHECK(fit.converged);
    CHECK(fit.params.restriction_residual() < 1e-8);

    const AidsParameters truth = synthetic::generate_sample_system(params.fleet).truth;
    const Eigen::VectorXd delta = fit.free_params - fit.map.pack(truth);
    const Eigen::VectorXd se = fit.covariance.diagonal().cwiseSqrt();
    int within3 = 0;
    for (int l = 0; l < delta.size(); ++l)
        if (std::abs(delta(l)) <= 3.0 * se(l)) ++within3;
    CHECK(within3 >= int(0.92 * double(delta.size())));
}
