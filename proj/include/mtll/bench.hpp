// Monte Carlo campaigns comparing causal filters by their time to lose lock.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "errors.hpp"
#include "filters.hpp"
#include "lock.hpp"
#include "mne.hpp"
#include "model.hpp"
#include "particle.hpp"
#include "rng.hpp"
#include "sde_sim.hpp"
#include "stats.hpp"
#include "trackers.hpp"
#include "zakai.hpp"

namespace mtll {

inline constexpr std::string_view kVersion = "0.1.0";

using Json = nlohmann::ordered_json;

enum class ModelKind { Phase, Linear };

struct ExperimentConfig {
    ModelKind model_kind = ModelKind::Phase;
    double eps = 0.3;
    double sigma = 1.0;
    double rho = 1.0;
    double drift = 0.0; ///< constant drift of the phase model
    double a = 0.0;     ///< linear model drift coefficient
    double c = 1.0;     ///< linear model measurement coefficient
    double x0 = 0.0;

    double dt = 1e-3;
    double horizon = 1000.0;

    std::optional<LockDomain> domain;

    std::vector<std::string> filters{"mne", "pll", "ekf"};

    std::optional<LatticeConfig> lattice; ///< unset: default_lattice()
    std::optional<double> pll_gain;       ///< unset: sigma / rho
    double ekf_p0 = 0.0;

    bool conditional = false;
    std::size_t particles = 100000;
    bool zakai = false;
    std::size_t zakai_cells = 400;

    std::size_t realizations = 200;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    std::string out_dir = ".";

    TimeGrid grid() const { return TimeGrid::with_horizon(dt, horizon); }

    DiffusionModel model() const {
        if (model_kind == ModelKind::Phase) {
            return make_phase_model(eps, sigma, rho, drift).model;
        }
        return make_linear_model(a, c, eps, sigma, rho);
    }

    LockDomain lock_domain() const {
        return domain.value_or(LockDomain{-std::numbers::pi, std::numbers::pi});
    }

    LatticeConfig lattice_config(const DiffusionModel &m) const {
        return lattice.value_or(default_lattice(m, x0));
    }
};

inline const std::vector<std::string> &known_filters() {
    static const std::vector<std::string> names{"mne", "pll", "ekf", "frozen", "oracle"};
    return names;
}

/// Re-checks every module precondition the campaign relies on.
inline void validate(const ExperimentConfig &cfg) {
    require(cfg.realizations >= 1, ErrorKind::Configuration, "realizations must be >= 1");
    require(cfg.workers >= 1, ErrorKind::Configuration, "workers must be >= 1");
    require(!cfg.filters.empty(), ErrorKind::Configuration, "no filters configured");
    for (const auto &f : cfg.filters) {
        require(std::find(known_filters().begin(), known_filters().end(), f) !=
                    known_filters().end(),
                ErrorKind::Configuration, "unknown filter '" + f + "'");
    }
    const DiffusionModel model = cfg.model();
    validate(model, cfg.lock_domain());
    validate(cfg.grid());
    const LatticeConfig lat = cfg.lattice_config(model);
    require(lat.cells >= 1 && lat.lo < lat.hi, ErrorKind::Configuration,
            "invalid MNE lattice");
    require(!cfg.conditional || cfg.particles >= 1, ErrorKind::Configuration,
            "conditional MTLL needs particles >= 1");
    require(!cfg.zakai || cfg.zakai_cells >= 8, ErrorKind::Configuration,
            "Zakai grid needs at least 8 cells");
}

namespace detail {

inline bool parse_bool(const std::string &v) {
    const std::string s = boost::algorithm::to_lower_copy(boost::algorithm::trim_copy(v));
    if (s == "true" || s == "1" || s == "yes" || s == "on") {
        return true;
    }
    if (s == "false" || s == "0" || s == "no" || s == "off") {
        return false;
    }
    fail(ErrorKind::Configuration, "not a boolean: '" + v + "'");
}

template <typename T>
std::optional<T> get_opt(const boost::property_tree::ptree &pt, const std::string &key) {
    const auto v = pt.get_optional<std::string>(key);
    if (!v) {
        return std::nullopt;
    }
    try {
        if constexpr (std::is_same_v<T, bool>) {
            return parse_bool(*v);
        } else if constexpr (std::is_same_v<T, std::string>) {
            return boost::algorithm::trim_copy(*v);
        } else {
            return boost::lexical_cast<T>(boost::algorithm::trim_copy(*v));
        }
    } catch (const boost::bad_lexical_cast &) {
        fail(ErrorKind::Configuration, "bad value for " + key + ": '" + *v + "'");
    }
}

} // namespace detail

/**
 * @brief Parses the sectioned key=value configuration.
 *
 *     [model]   kind=phase|linear eps sigma rho drift a c x0
 *     [grid]    dt T
 *     [domain]  lo hi
 *     [filters] list=mne,pll,ekf
 *     [mne]     cells lo hi periodic half_width stride fixed_lag init prior_scale
 *     [pll]     gain
 *     [ekf]     P0
 *     [particle] enabled n
 *     [zakai]   enabled cells
 *     [run]     realizations seed workers out
 */
inline ExperimentConfig parse_config(std::istream &in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error &e) {
        fail(ErrorKind::Configuration, std::string("config parse error: ") + e.what());
    }
    using detail::get_opt;
    ExperimentConfig cfg;
    if (auto kind = get_opt<std::string>(tree, "model.kind")) {
        if (*kind == "phase") {
            cfg.model_kind = ModelKind::Phase;
        } else if (*kind == "linear") {
            cfg.model_kind = ModelKind::Linear;
        } else {
            fail(ErrorKind::Configuration, "unknown model kind '" + *kind + "'");
        }
    }
    cfg.eps = get_opt<double>(tree, "model.eps").value_or(cfg.eps);
    cfg.sigma = get_opt<double>(tree, "model.sigma").value_or(cfg.sigma);
    cfg.rho = get_opt<double>(tree, "model.rho").value_or(cfg.rho);
    cfg.drift = get_opt<double>(tree, "model.drift").value_or(cfg.drift);
    cfg.a = get_opt<double>(tree, "model.a").value_or(cfg.a);
    cfg.c = get_opt<double>(tree, "model.c").value_or(cfg.c);
    cfg.x0 = get_opt<double>(tree, "model.x0").value_or(cfg.x0);

    cfg.dt = get_opt<double>(tree, "grid.dt").value_or(cfg.dt);
    cfg.horizon = get_opt<double>(tree, "grid.T").value_or(cfg.horizon);

    const auto lo = get_opt<double>(tree, "domain.lo");
    const auto hi = get_opt<double>(tree, "domain.hi");
    if (lo || hi) {
        LockDomain d;
        d.lo = lo.value_or(d.lo);
        d.hi = hi.value_or(d.hi);
        cfg.domain = d;
    }

    if (auto list = get_opt<std::string>(tree, "filters.list")) {
        std::vector<std::string> names;
        boost::algorithm::split(names, *list, boost::algorithm::is_any_of(", "),
                                boost::algorithm::token_compress_on);
        std::erase_if(names, [](const std::string &s) { return s.empty(); });
        cfg.filters = names;
    }

    if (tree.get_child_optional("mne")) {
        LatticeConfig lat = default_lattice(cfg.model(), cfg.x0);
        lat.cells = get_opt<std::size_t>(tree, "mne.cells").value_or(lat.cells);
        lat.lo = get_opt<double>(tree, "mne.lo").value_or(lat.lo);
        lat.hi = get_opt<double>(tree, "mne.hi").value_or(lat.hi);
        lat.periodic = get_opt<bool>(tree, "mne.periodic").value_or(lat.periodic);
        lat.half_width = get_opt<std::size_t>(tree, "mne.half_width").value_or(0);
        lat.stride = get_opt<std::size_t>(tree, "mne.stride").value_or(0);
        lat.fixed_lag = get_opt<std::size_t>(tree, "mne.fixed_lag").value_or(0);
        lat.prior_scale = get_opt<double>(tree, "mne.prior_scale").value_or(lat.prior_scale);
        if (auto init = get_opt<std::string>(tree, "mne.init")) {
            if (*init == "delta") {
                lat.init = LatticeInit::Delta;
            } else if (*init == "quadratic") {
                lat.init = LatticeInit::QuadraticPrior;
            } else {
                fail(ErrorKind::Configuration, "unknown lattice init '" + *init + "'");
            }
        }
        cfg.lattice = lat;
    }
    cfg.pll_gain = get_opt<double>(tree, "pll.gain");
    cfg.ekf_p0 = get_opt<double>(tree, "ekf.P0").value_or(cfg.ekf_p0);

    cfg.conditional = get_opt<bool>(tree, "particle.enabled").value_or(cfg.conditional);
    cfg.particles = get_opt<std::size_t>(tree, "particle.n").value_or(cfg.particles);
    cfg.zakai = get_opt<bool>(tree, "zakai.enabled").value_or(cfg.zakai);
    cfg.zakai_cells = get_opt<std::size_t>(tree, "zakai.cells").value_or(cfg.zakai_cells);

    cfg.realizations = get_opt<std::size_t>(tree, "run.realizations").value_or(cfg.realizations);
    cfg.seed = get_opt<std::uint64_t>(tree, "run.seed").value_or(cfg.seed);
    cfg.workers = get_opt<std::size_t>(tree, "run.workers").value_or(cfg.workers);
    cfg.out_dir = get_opt<std::string>(tree, "run.out").value_or(cfg.out_dir);
    validate(cfg);
    return cfg;
}

inline ExperimentConfig parse_config(const std::string &text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline ExperimentConfig load_config(const std::string &path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open config '" + path + "'");
    return parse_config(in);
}

/// Echo of the effective configuration (everything that affects results).
inline Json config_json(const ExperimentConfig &cfg) {
    const DiffusionModel model = cfg.model();
    const LatticeConfig lat = cfg.lattice_config(model);
    const LockDomain dom = cfg.lock_domain();
    Json j;
    j["model"] = {{"kind", cfg.model_kind == ModelKind::Phase ? "phase" : "linear"},
                  {"eps", cfg.eps},
                  {"sigma", cfg.sigma},
                  {"rho", cfg.rho},
                  {"drift", cfg.drift},
                  {"a", cfg.a},
                  {"c", cfg.c},
                  {"x0", cfg.x0}};
    j["grid"] = {{"dt", cfg.dt}, {"T", cfg.horizon}, {"n_steps", cfg.grid().n_steps}};
    j["domain"] = {{"lo", dom.lo}, {"hi", dom.hi}};
    j["filters"] = cfg.filters;
    j["mne"] = {{"cells", lat.cells},
                {"lo", lat.lo},
                {"hi", lat.hi},
                {"periodic", lat.periodic},
                {"half_width", lat.half_width},
                {"stride", lat.stride},
                {"fixed_lag", lat.fixed_lag},
                {"init", lat.init == LatticeInit::Delta ? "delta" : "quadratic"},
                {"prior_scale", lat.prior_scale}};
    j["pll"] = {{"gain", cfg.pll_gain.value_or(default_pll_gain(model))}};
    j["ekf"] = {{"P0", cfg.ekf_p0}};
    j["particle"] = {{"enabled", cfg.conditional}, {"n", cfg.particles}};
    j["zakai"] = {{"enabled", cfg.zakai}, {"cells", cfg.zakai_cells}};
    j["run"] = {{"realizations", cfg.realizations}, {"seed", cfg.seed}};
    return j;
}

inline std::unique_ptr<CausalFilter> make_filter(const std::string &name,
                                                 const ExperimentConfig &cfg,
                                                 const DiffusionModel &model,
                                                 const TimeGrid &grid) {
    if (name == "mne") {
        return std::make_unique<MneCausalFilter>(model, grid, cfg.x0,
                                                 cfg.lattice_config(model));
    }
    if (name == "pll") {
        return std::make_unique<PllFilter>(model, grid, cfg.x0,
                                           cfg.pll_gain.value_or(default_pll_gain(model)));
    }
    if (name == "ekf") {
        return std::make_unique<EkfFilter>(model, grid, cfg.x0, cfg.ekf_p0);
    }
    if (name == "frozen") {
        return std::make_unique<FrozenFilter>(cfg.x0);
    }
    fail(ErrorKind::Configuration, "filter '" + name + "' cannot run on observations alone");
}

/// One filter on one realization.
struct RealizationResult {
    double tau = 0.0;
    bool exited = false;
    std::optional<double> conditional_mtll;
    std::optional<double> conditional_std_error;
    std::optional<double> zakai_mtll;
};

/**
 * @brief Runs `filter` against realization r and stops at loss of lock.
 *
 * The true pair is drawn with key (seed, r), so every filter sees the same
 * state and observation noise.
 */
inline RealizationResult run_realization(const ExperimentConfig &cfg,
                                         const DiffusionModel &model,
                                         const std::string &filter, std::size_t r) {
    const TimeGrid grid = cfg.grid();
    const LockDomain domain = cfg.lock_domain();
    RealizationResult out;

    const bool oracle = filter == "oracle";
    std::unique_ptr<CausalFilter> f = oracle ? nullptr : make_filter(filter, cfg, model, grid);
    PairStepper truth(model, grid, cfg.x0, cfg.seed, r);
    const bool full_record = cfg.conditional || cfg.zakai;
    std::vector<double> dy_record;
    std::vector<double> xhat_record;
    ExitInfo info = censored(grid);
    for (std::size_t i = 0;; ++i) {
        const double xhat = oracle ? truth.x() : f->estimate();
        if (full_record) {
            xhat_record.push_back(xhat);
        }
        if (!info.exited && !domain.contains(truth.x() - xhat)) {
            info = exited_at(i, grid);
            if (!full_record) {
                break;
            }
        }
        if (i == grid.n_steps) {
            break;
        }
        const double dy = truth.step();
        if (full_record) {
            dy_record.push_back(dy);
        }
        if (!oracle) {
            f->update(dy);
        }
    }
    out.exited = info.exited;
    out.tau = info.tau;

    if (cfg.conditional) {
        const ParticleEnsemble ens =
            propagate_ensemble(model, domain, grid, cfg.particles, dy_record, xhat_record,
                               derive_seed(cfg.seed, r));
        const ConditionalMtll cm = conditional_mtll_stats(ens);
        out.conditional_mtll = cm.mean;
        out.conditional_std_error = cm.std_error;
    }
    if (cfg.zakai) {
        out.zakai_mtll = mtll_oracle(model, domain, dy_record, xhat_record, grid,
                                     cfg.zakai_cells);
    }
    return out;
}

/// A campaign that stopped on a realization error; carries the partial report.
class CampaignFailure : public Error {
public:
    CampaignFailure(const std::string &what, Json partial)
        : Error(ErrorKind::Divergence, what), partial_(std::move(partial)) {}
    const Json &partial() const { return partial_; }

private:
    Json partial_;
};

struct FilterSummary {
    std::string name;
    std::vector<double> taus;
    std::vector<char> exited;
    SampleSummary summary;
    double censored_fraction = 0.0;
};

struct MtllReport {
    Json json;
    std::vector<FilterSummary> filters;

    const FilterSummary &filter(const std::string &name) const {
        for (const auto &f : filters) {
            if (f.name == name) {
                return f;
            }
        }
        fail(ErrorKind::InvalidArgument, "report has no filter '" + name + "'");
    }
};

/**
 * @brief Runs every configured filter over R paired realizations.
 *
 * Work is split over `cfg.workers` threads; results are stored by index and
 * reduced in a fixed order, so the report does not depend on the worker count.
 * Timing goes under the "timing" key only.
 */
inline MtllReport run_mtll_experiment(const ExperimentConfig &cfg) {
    validate(cfg);
    const auto start = std::chrono::steady_clock::now();
    const DiffusionModel model = cfg.model();
    const std::size_t F = cfg.filters.size();
    const std::size_t R = cfg.realizations;
    const std::size_t jobs = F * R;

    std::vector<std::optional<RealizationResult>> results(jobs);
    std::vector<std::string> errors(jobs);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    auto worker = [&] {
        for (;;) {
            const std::size_t job = next.fetch_add(1);
            if (job >= jobs || abort.load()) {
                return;
            }
            const std::size_t fi = job / R;
            const std::size_t r = job % R;
            try {
                results[job] = run_realization(cfg, model, cfg.filters[fi], r);
            } catch (const std::exception &e) {
                errors[job] = e.what();
                abort.store(true);
            }
        }
    };
    const std::size_t nthreads = std::min(cfg.workers, jobs);
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < nthreads; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto &t : pool) {
        t.join();
    }

    Json realizations = Json::array();
    std::string first_error;
    for (std::size_t job = 0; job < jobs; ++job) {
        Json rec;
        rec["filter"] = cfg.filters[job / R];
        rec["realization"] = job % R;
        if (results[job]) {
            const auto &res = *results[job];
            rec["tau"] = res.tau;
            rec["exited"] = res.exited;
            if (res.conditional_mtll) {
                rec["conditional_mtll"] = *res.conditional_mtll;
                rec["conditional_std_error"] = *res.conditional_std_error;
            }
            if (res.zakai_mtll) {
                rec["zakai_mtll"] = *res.zakai_mtll;
            }
        } else if (!errors[job].empty()) {
            rec["error"] = errors[job];
            if (first_error.empty()) {
                first_error = "filter " + cfg.filters[job / R] + ", realization " +
                              std::to_string(job % R) + ": " + errors[job];
            }
        } else {
            rec["skipped"] = true;
        }
        realizations.push_back(rec);
    }

    MtllReport report;
    Json &j = report.json;
    j["version"] = std::string(kVersion);
    j["config"] = config_json(cfg);
    if (!first_error.empty()) {
        j["status"] = "failed";
        j["error"] = first_error;
        j["realizations"] = realizations;
        throw CampaignFailure(first_error, j);
    }
    j["status"] = "ok";

    Json filters = Json::object();
    for (std::size_t fi = 0; fi < F; ++fi) {
        FilterSummary fs;
        fs.name = cfg.filters[fi];
        std::size_t censored_count = 0;
        for (std::size_t r = 0; r < R; ++r) {
            const auto &res = *results[fi * R + r];
            fs.taus.push_back(res.tau);
            fs.exited.push_back(res.exited ? 1 : 0);
            censored_count += res.exited ? 0 : 1;
        }
        fs.summary = summarize(fs.taus);
        fs.censored_fraction = static_cast<double>(censored_count) / static_cast<double>(R);
        filters[fs.name] = {{"mtll", fs.summary.mean},
                            {"std_error", fs.summary.std_error},
                            {"censored_fraction", fs.censored_fraction},
                            {"realizations", R}};
        report.filters.push_back(std::move(fs));
    }
    j["filters"] = filters;

    Json comparisons = Json::object();
    if (R >= 2) {
        for (std::size_t a = 0; a < F; ++a) {
            for (std::size_t b = a + 1; b < F; ++b) {
                const auto &fa = report.filters[a];
                const auto &fb = report.filters[b];
                const PairedTest test = paired_t_test(fa.taus, fb.taus);
                comparisons[fa.name + "_vs_" + fb.name] = {
                    {"mean_difference", test.mean_difference},
                    {"std_error", test.std_error},
                    {"t_statistic", test.t_statistic},
                    {"p_value_one_sided", test.p_value},
                    {"mtll_ratio", fb.summary.mean > 0.0 ? fa.summary.mean / fb.summary.mean : 0.0}};
            }
        }
    }
    j["comparisons"] = comparisons;
    j["realizations"] = realizations;
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    j["timing"] = {{"wall_time_s", wall}, {"workers", cfg.workers}};
    return report;
}

/// Report with the timing block removed; the deterministic part.
inline Json without_timing(Json report) {
    report.erase("timing");
    return report;
}

/**
 * @brief Summarizes reports from an eps sweep.
 *
 * Per filter: least-squares slope of log MTLL against 1/eps^2; per eps: the
 * MTLL ratios mne/pll and mne/ekf when those filters are present.
 */
inline Json compare_report(const std::vector<Json> &reports) {
    require(reports.size() >= 2, ErrorKind::InvalidArgument,
            "compare needs reports for at least two eps values");
    std::vector<std::string> names;
    for (const auto &item : reports.front().at("filters").items()) {
        names.push_back(item.key());
    }
    Json out;
    Json fits = Json::object();
    for (const auto &name : names) {
        std::vector<double> x;
        std::vector<double> y;
        for (const auto &rep : reports) {
            if (!rep.at("filters").contains(name)) {
                x.clear();
                break;
            }
            const double eps = rep.at("config").at("model").at("eps").get<double>();
            const double mtll = rep.at("filters").at(name).at("mtll").get<double>();
            x.push_back(1.0 / (eps * eps));
            y.push_back(std::log(mtll));
        }
        if (x.size() < 2) {
            continue;
        }
        const LinearFit fit = linear_fit(x, y);
        fits[name] = {{"slope", fit.slope},
                      {"intercept", fit.intercept},
                      {"r_squared", fit.r_squared},
                      {"points", x.size()}};
    }
    out["log_mtll_vs_inv_eps2"] = fits;
    Json rows = Json::array();
    for (const auto &rep : reports) {
        Json row;
        row["eps"] = rep.at("config").at("model").at("eps");
        const auto &f = rep.at("filters");
        for (const auto &name : names) {
            if (f.contains(name)) {
                row["mtll_" + name] = f.at(name).at("mtll");
            }
        }
        for (const char *other : {"pll", "ekf"}) {
            if (f.contains("mne") && f.contains(other)) {
                row[std::string("ratio_mne_") + other] =
                    f.at("mne").at("mtll").get<double>() / f.at(other).at("mtll").get<double>();
            }
        }
        rows.push_back(row);
    }
    out["table"] = rows;
    return out;
}

} // namespace mtll
