#include "fuelshock/emissions.hpp"
#include "fuelshock/io_util.hpp"
#include "fuelshock/serialize.hpp"

#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdlib>
#include <string>
#include <sys/wait.h>

using namespace fuelshock;
using testutil::TempDir;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const TempDir& dir, const std::string& args, const std::string& env = "")
{
    const auto out_path = dir.file("cli_stdout.txt");
    const auto err_path = dir.file("cli_stderr.txt");
    const std::string cmd = (env.empty() ? "" : env + " ") + std::string(FUELSHOCK_CLI_PATH) +
                            " " + args + " >" + out_path.string() + " 2>" + err_path.string();
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (std::filesystem::exists(out_path)) r.out = read_file(out_path);
    if (std::filesystem::exists(err_path)) r.err = read_file(err_path);
    return r;
}

std::string sample_panel()
{
    return (testutil::data_dir() / "sample" / "fuel_panel.csv").string();
}

std::string paper_dir()
{
    return (testutil::data_dir() / "paper").string();
}

std::string paper_params()
{
    return (testutil::data_dir() / "paper" / "parameters.json").string();
}

} // namespace

TEST_CASE("cli validate")
{
    TempDir dir;
    CliResult ok = run_cli(dir, "validate --panel " + sample_panel() + " --params " + paper_params());
    CHECK(ok.exit_code == 0);
    CHECK(ok.out.find("panel OK") != std::string::npos);
    CHECK(ok.out.find("3100 rows") != std::string::npos);

    CliResult missing = run_cli(dir, "validate --panel " + dir.file("none.csv").string());
    CHECK(missing.exit_code == 2);
}

TEST_CASE("cli estimate")
{
    TempDir dir;
    const std::string fit_path = dir.file("fit.json").string();

    SECTION("writes a fit document with tight restriction residuals")
    {
        CliResult r = run_cli(dir, "estimate --panel " + sample_panel() + " --params " +
                                       paper_params() + " --out " + fit_path);
        REQUIRE(r.exit_code == 0);
        const auto j = nlohmann::json::parse(read_file(fit_path));
        CHECK(j.at("type") == "aids_fit");
        CHECK(j.at("restriction_residual").get<double>() < 1e-8);
        CHECK(j.at("convergence").at("converged").get<bool>());
    }
    SECTION("identical runs produce byte-identical outputs")
    {
        const std::string fit2 = dir.file("fit2.json").string();
        CliResult a = run_cli(dir, "estimate --panel " + sample_panel() + " --params " +
                                       paper_params() + " --out " + fit_path);
        CliResult b = run_cli(dir, "estimate --panel " + sample_panel() + " --params " +
                                       paper_params() + " --out " + fit2);
        REQUIRE(a.exit_code == 0);
        REQUIRE(b.exit_code == 0);
        CHECK(read_file(fit_path) == read_file(fit2));
    }
    SECTION("input failures exit with the validation code and leave outputs alone")
    {
        atomic_write_file(fit_path, "SENTINEL");
        CliResult r = run_cli(dir, "estimate --panel " + dir.file("none.csv").string() +
                                       " --params " + paper_params() + " --out " + fit_path);
        CHECK(r.exit_code == 2);
        CHECK(read_file(fit_path) == "SENTINEL");
    }
    SECTION("rank deficiency exits with its own code")
    {
        // two classes sharing one price series in every observation
        std::string csv = "province,year,class,price,vehicle_population,vmt\n";
        for (int g = 0; g < 8; ++g) {
            const std::string price = std::to_string(5.0 + 0.3 * g);
            csv += "p" + std::to_string(g) + ",2002,LPV-D," + price + ",1000,40000\n";
            csv += "p" + std::to_string(g) + ",2002,HDT-D," + price + ",2000,50000\n";
        }
        const auto panel = testutil::write_temp(dir, "collinear.csv", csv);
        CliResult r = run_cli(dir, "estimate --panel " + panel.string() + " --params " +
                                       paper_params() + " --out " + fit_path);
        CHECK(r.exit_code == 3);
        CHECK(r.err.find("identical price series") != std::string::npos);
    }
    SECTION("non-convergence exits with its own code")
    {
        CliResult r = run_cli(dir, "estimate --max-iter 1 --panel " + sample_panel() +
                                       " --params " + paper_params() + " --out " + fit_path);
        CHECK(r.exit_code == 4);
    }
    SECTION("double-log model writes a per-class coefficient table")
    {
        const std::string out = dir.file("dl.csv").string();
        CliResult r = run_cli(dir, "estimate --model double-log --panel " + sample_panel() +
                                       " --params " + paper_params() + " --out " + out);
        REQUIRE(r.exit_code == 0);
        const std::string text = read_file(out);
        CHECK(text.rfind("class,intercept", 0) == 0);
        CHECK(std::count(text.begin(), text.end(), '\n') == 11); // header + 10 classes
    }
}

TEST_CASE("cli elasticities")
{
    TempDir dir;
    const std::string fit_path = dir.file("fit.json").string();
    REQUIRE(run_cli(dir, "estimate --panel " + sample_panel() + " --params " + paper_params() +
                             " --out " + fit_path)
                .exit_code == 0);

    SECTION("table at the sample means satisfies Engel aggregation")
    {
        const std::string out = dir.file("el.json").string();
        CliResult r =
            run_cli(dir, "elasticities --fit " + fit_path + " --out " + out + " --format json");
        REQUIRE(r.exit_code == 0);
        const auto j = nlohmann::json::parse(read_file(out));
        const auto shares = j.at("evaluation_point").at("shares");
        const auto exp_el = j.at("expenditure");
        double engel = 0.0;
        for (std::size_t i = 0; i < shares.size(); ++i)
            engel += shares[i].get<double>() * exp_el[i].get<double>();
        CHECK_THAT(engel, Catch::Matchers::WithinAbs(1.0, 1e-10));
    }
    SECTION("a supplied evaluation point changes the table")
    {
        const auto fit = fit_from_json(read_file(fit_path));
        Eigen::VectorXd w = fit.mean_shares;
        w(0) *= 0.7;
        w /= w.sum();
        nlohmann::ordered_json point;
        point["shares"] = detail::vector_to_json(w);
        point["log_prices"] = detail::vector_to_json(fit.mean_log_prices);
        const auto point_path = testutil::write_temp(dir, "point.json", point.dump() + "\n");

        const std::string at_means = dir.file("means.csv").string();
        const std::string at_point = dir.file("point.csv").string();
        REQUIRE(run_cli(dir, "elasticities --fit " + fit_path + " --out " + at_means)
                    .exit_code == 0);
        REQUIRE(run_cli(dir, "elasticities --fit " + fit_path + " --out " + at_point + " --at " +
                                 point_path.string())
                    .exit_code == 0);
        CHECK(read_file(at_means) != read_file(at_point));
    }
    SECTION("emission elasticities need fleet parameters")
    {
        CliResult r = run_cli(dir, "elasticities --fit " + fit_path + " --out " +
                                       dir.file("el.csv").string() + " --emissions --panel " +
                                       sample_panel());
        CHECK(r.exit_code == 2);
        CHECK(r.err.find("--params") != std::string::npos);
    }
    SECTION("emission elasticities are written next to the demand table")
    {
        const std::string pi_out = dir.file("pi.csv").string();
        const std::string eta_out = dir.file("eta.csv").string();
        CliResult r = run_cli(dir, "elasticities --fit " + fit_path + " --out " +
                                       dir.file("el.csv").string() + " --emissions --params " +
                                       paper_params() + " --panel " + sample_panel() +
                                       " --pi-out " + pi_out + " --eta-out " + eta_out);
        REQUIRE(r.exit_code == 0);
        const EmissionElasticityTable pi = load_emission_price_elasticities(pi_out);
        CHECK(pi.n_classes() == 10);
        CHECK(read_file(eta_out).rfind("pollutant,eta", 0) == 0);
    }
}

TEST_CASE("cli scenario run")
{
    TempDir dir;
    SECTION("zero shocks produce an all-zero report")
    {
        const auto config = testutil::write_temp(
            dir, "zero.json",
            R"({"scenarios":[{"id":"Z","price_shock":{"gasoline":0.0,"diesel":0.0}}]})");
        const std::string out = dir.file("report.csv").string();
        CliResult r = run_cli(dir, "scenario run --config " + config.string() + " --params " +
                                       paper_params() + " --pi " + paper_dir() +
                                       "/emission_price_elasticities.csv --out " + out);
        REQUIRE(r.exit_code == 0);
        const std::string text = read_file(out);
        for (const std::string line : {"Z,CO,0.000,0.000,0.000,0.000,0.000,0.000,0.000",
                                       "Z,TOTAL,0.000"})
            CHECK(text.find(line) != std::string::npos);
    }
    SECTION("a -100% shock fails config validation")
    {
        const auto config = testutil::write_temp(
            dir, "bad.json",
            R"({"scenarios":[{"id":"X","price_shock":{"gasoline":-1.0,"diesel":-1.0}}]})");
        CliResult r = run_cli(dir, "scenario run --config " + config.string() + " --params " +
                                       paper_params() + " --pi " + paper_dir() +
                                       "/emission_price_elasticities.csv");
        CHECK(r.exit_code == 2);
    }
    SECTION("plot data export")
    {
        const std::string plot = dir.file("long.csv").string();
        CliResult r = run_cli(dir, "scenario run --config " + paper_dir() +
                                       "/scenarios.json --params " + paper_params() + " --pi " +
                                       paper_dir() + "/emission_price_elasticities.csv --out " +
                                       dir.file("report.csv").string() + " --plot-data " + plot);
        REQUIRE(r.exit_code == 0);
        CHECK(read_file(plot).rfind("scenario,pollutant,metric,value", 0) == 0);
    }
    SECTION("the parameter directory environment variable fills in defaults")
    {
        CliResult r = run_cli(dir, "scenario run --out " + dir.file("report.csv").string(),
                              "FUELSHOCK_PARAMS=" + paper_dir());
        CHECK(r.exit_code == 0);
    }
}

TEST_CASE("cli scenario reproduce")
{
    TempDir dir;
    const std::string grid = dir.file("grid.csv").string();
    CliResult r = run_cli(dir, "scenario reproduce --params " + paper_dir() + " --out " + grid);
    REQUIRE(r.exit_code == 0);
    const std::string text = read_file(grid);
    CHECK(std::count(text.begin(), text.end(), '\n') == 105);
    CHECK(text.find("FAIL") == std::string::npos);
    CHECK(r.err.find("104/104 cells within tolerance") != std::string::npos);

    SECTION("scenario filter restricts the grid")
    {
        CliResult s2 = run_cli(dir, "scenario reproduce --params " + paper_dir() +
                                        " --scenario S2 --out " + grid);
        REQUIRE(s2.exit_code == 0);
        const std::string filtered = read_file(grid);
        CHECK(std::count(filtered.begin(), filtered.end(), '\n') == 27);
    }
}
