#include <cmath>
#include <string>

#include <gtest/gtest.h>
#include <mtll/bench.hpp>

using namespace mtll;

namespace {

ExperimentConfig small_phase(double eps, std::size_t R) {
    ExperimentConfig cfg;
    cfg.eps = eps;
    cfg.dt = 1e-2;
    cfg.horizon = 20.0;
    cfg.realizations = R;
    cfg.seed = 11;
    return cfg;
}

Json fake_report(double eps, double mne, double pll) {
    Json j;
    j["config"]["model"]["eps"] = eps;
    j["filters"]["mne"]["mtll"] = mne;
    j["filters"]["pll"]["mtll"] = pll;
    return j;
}

} // namespace

TEST(Config, ParsesAllSections) {
    const auto cfg = parse_config(R"(
[model]
kind = linear
eps = 0.5
sigma = 2
rho = 0.5
a = -1
c = 2
x0 = 0.25
[grid]
dt = 0.01
T = 3
[domain]
lo = -1
hi = 2
[filters]
list = mne, ekf frozen
[mne]
cells = 65
lo = -3
hi = 3
half_width = 4
stride = 2
init = quadratic
prior_scale = 0.5
[pll]
gain = 1.5
[ekf]
P0 = 0.1
[particle]
enabled = true
n = 50
[zakai]
enabled = yes
cells = 64
[run]
realizations = 7
seed = 99
workers = 3
out = results
)");
    EXPECT_EQ(cfg.model_kind, ModelKind::Linear);
    EXPECT_DOUBLE_EQ(cfg.eps, 0.5);
    EXPECT_DOUBLE_EQ(cfg.sigma, 2.0);
    EXPECT_DOUBLE_EQ(cfg.x0, 0.25);
    EXPECT_EQ(cfg.grid().n_steps, 300u);
    ASSERT_TRUE(cfg.domain.has_value());
    EXPECT_DOUBLE_EQ(cfg.domain->lo, -1.0);
    EXPECT_EQ(cfg.filters, (std::vector<std::string>{"mne", "ekf", "frozen"}));
    ASSERT_TRUE(cfg.lattice.has_value());
    EXPECT_EQ(cfg.lattice->cells, 65u);
    EXPECT_EQ(cfg.lattice->half_width, 4u);
    EXPECT_EQ(cfg.lattice->stride, 2u);
    EXPECT_EQ(cfg.lattice->init, LatticeInit::QuadraticPrior);
    EXPECT_DOUBLE_EQ(*cfg.pll_gain, 1.5);
    EXPECT_DOUBLE_EQ(cfg.ekf_p0, 0.1);
    EXPECT_TRUE(cfg.conditional);
    EXPECT_EQ(cfg.particles, 50u);
    EXPECT_TRUE(cfg.zakai);
    EXPECT_EQ(cfg.zakai_cells, 64u);
    EXPECT_EQ(cfg.realizations, 7u);
    EXPECT_EQ(cfg.seed, 99u);
    EXPECT_EQ(cfg.workers, 3u);
    EXPECT_EQ(cfg.out_dir, "results");
}

TEST(Config, DefaultsDescribeThePhaseBenchmark) {
    const auto cfg = parse_config(std::string("[model]\nkind = phase\n"));
    EXPECT_EQ(cfg.model_kind, ModelKind::Phase);
    EXPECT_DOUBLE_EQ(cfg.eps, 0.3);
    EXPECT_EQ(cfg.grid().n_steps, 1000000u);
    EXPECT_EQ(cfg.realizations, 200u);
    EXPECT_TRUE(cfg.lattice_config(cfg.model()).periodic);
    const Json j = config_json(cfg);
    EXPECT_EQ(j["model"]["kind"], "phase");
    EXPECT_DOUBLE_EQ(j["pll"]["gain"].get<double>(), 1.0);
}

TEST(Config, RejectsBadInput) {
    auto kind_of = [](const std::string &text) {
        try {
            (void)parse_config(text);
        } catch (const Error &e) {
            return e.kind();
        }
        return ErrorKind::Io;
    };
    EXPECT_EQ(kind_of("[model]\nkind = cubic\n"), ErrorKind::Configuration);
    EXPECT_EQ(kind_of("[model]\neps = abc\n"), ErrorKind::Configuration);
    EXPECT_EQ(kind_of("[filters]\nlist = mne, kalman\n"), ErrorKind::Configuration);
    EXPECT_EQ(kind_of("[run]\nrealizations = 0\n"), ErrorKind::Configuration);
    EXPECT_EQ(kind_of("this is not ini [\n"), ErrorKind::Configuration);
    EXPECT_EQ(kind_of("[model]\neps = -1\n"), ErrorKind::InvalidParameter);
    EXPECT_EQ(kind_of("[grid]\ndt = 0\n"), ErrorKind::InvalidParameter);
    EXPECT_THROW(load_config("/nonexistent/config.ini"), Error);
}

TEST(Campaign, OracleNeverLosesLock) {
    auto cfg = small_phase(0.5, 1);
    cfg.filters = {"oracle"};
    const auto report = run_mtll_experiment(cfg);
    const auto &f = report.filter("oracle");
    EXPECT_DOUBLE_EQ(f.summary.mean, cfg.grid().horizon());
    EXPECT_DOUBLE_EQ(f.censored_fraction, 1.0);
    EXPECT_EQ(report.json["status"], "ok");
    EXPECT_FALSE(report.json["realizations"][0]["exited"].get<bool>());
}

TEST(Campaign, FrozenEstimateLosesLockBeforeHorizon) {
    auto cfg = small_phase(1.5, 20);
    cfg.filters = {"frozen"};
    const auto report = run_mtll_experiment(cfg);
    const auto &f = report.filter("frozen");
    EXPECT_LT(f.summary.mean, cfg.grid().horizon());
    EXPECT_LT(f.censored_fraction, 0.5);
    for (double tau : f.taus) {
        EXPECT_LE(tau, cfg.grid().horizon());
    }
}

TEST(Campaign, ReportIndependentOfWorkerCount) {
    auto cfg = small_phase(0.7, 12);
    cfg.filters = {"mne", "pll", "ekf"};
    cfg.workers = 1;
    const auto one = without_timing(run_mtll_experiment(cfg).json).dump();
    cfg.workers = 4;
    const auto four = without_timing(run_mtll_experiment(cfg).json).dump();
    EXPECT_EQ(one, four);
    const auto parsed = Json::parse(one);
    EXPECT_TRUE(parsed["comparisons"].contains("mne_vs_pll"));
    EXPECT_FALSE(parsed.contains("timing"));
}

TEST(Campaign, FiltersShareTheSameRealizations) {
    auto cfg = small_phase(2.0, 5);
    cfg.filters = {"frozen", "frozen"};
    const auto report = run_mtll_experiment(cfg);
    EXPECT_EQ(report.filters[0].taus, report.filters[1].taus);
    EXPECT_DOUBLE_EQ(report.json["comparisons"]["frozen_vs_frozen"]["mtll_ratio"].get<double>(),
                     1.0);
}

TEST(Campaign, ConditionalAndZakaiColumns) {
    auto cfg = small_phase(0.8, 2);
    cfg.horizon = 2.0;
    cfg.filters = {"pll"};
    cfg.conditional = true;
    cfg.particles = 500;
    cfg.zakai = true;
    cfg.zakai_cells = 64;
    const auto report = run_mtll_experiment(cfg);
    for (const auto &rec : report.json["realizations"]) {
        ASSERT_TRUE(rec.contains("conditional_mtll"));
        ASSERT_TRUE(rec.contains("zakai_mtll"));
        EXPECT_GT(rec["conditional_mtll"].get<double>(), 0.0);
        EXPECT_LE(rec["zakai_mtll"].get<double>(), 2.0 + 1e-9);
    }
}

TEST(Campaign, PartialReportOnFailure) {
    ExperimentConfig cfg;
    cfg.model_kind = ModelKind::Linear;
    cfg.a = 1000.0;
    cfg.c = 1.0;
    cfg.eps = 1.0;
    cfg.dt = 0.1;
    cfg.horizon = 100.0;
    cfg.x0 = 1.0;
    cfg.realizations = 2;
    cfg.filters = {"oracle"};
    try {
        (void)run_mtll_experiment(cfg);
        FAIL();
    } catch (const CampaignFailure &e) {
        EXPECT_EQ(e.partial()["status"], "failed");
        EXPECT_TRUE(e.partial()["realizations"][0].contains("error"));
        EXPECT_NE(e.partial()["error"].get<std::string>().find("realization 0"),
                  std::string::npos);
    }
}

TEST(CompareReport, TwoPointSlope) {
    const auto out = compare_report({fake_report(0.5, std::exp(4.0), std::exp(2.0)),
                                     fake_report(0.25, std::exp(16.0), std::exp(5.0))});
    const auto &fits = out["log_mtll_vs_inv_eps2"];
    EXPECT_NEAR(fits["mne"]["slope"].get<double>(), 1.0, 1e-12);
    EXPECT_NEAR(fits["pll"]["slope"].get<double>(), 0.25, 1e-12);
    EXPECT_NEAR(fits["mne"]["r_squared"].get<double>(), 1.0, 1e-12);
    EXPECT_NEAR(out["table"][0]["ratio_mne_pll"].get<double>(), std::exp(2.0), 1e-9);
}

TEST(CompareReport, IdenticalFiltersHaveUnitRatio) {
    const auto out = compare_report({fake_report(0.5, 10.0, 10.0), fake_report(0.4, 30.0, 30.0)});
    for (const auto &row : out["table"]) {
        EXPECT_DOUBLE_EQ(row["ratio_mne_pll"].get<double>(), 1.0);
    }
    EXPECT_THROW(compare_report({fake_report(0.5, 1.0, 1.0)}), Error);
}
