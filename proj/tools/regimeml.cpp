// regimeml: command-line front end for the regime-switching time-series
// library. Subcommands simulate data, fit by exact maximum likelihood or
// Monte Carlo EM, run the named verification checks, and script the full
// rotating-array tracking experiment.
//
// Conventions shared by every subcommand:
//   - an optional --config JSON file supplies defaults; explicit flags win;
//     unknown keys in the file are an error (exit 2);
//   - every run writes manifest.json with the resolved configuration,
//     so a run is reproducible from its manifest alone;
//   - exit codes: 0 success, 1 verification failure, 2 usage/config/IO error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "regimeml/doa.hpp"
#include "regimeml/filtering.hpp"
#include "regimeml/inference.hpp"
#include "regimeml/io.hpp"
#include "regimeml/mcem.hpp"
#include "regimeml/model.hpp"
#include "regimeml/random.hpp"
#include "regimeml/verify.hpp"

namespace {

using nlohmann::json;
using namespace regimeml;

/// Ties each CLI option to a config-file key of the same name (long flag
/// without the leading dashes) and snapshots resolved values for the
/// manifest. File values apply only to options not given on the command line.
class ConfigBinder {
  public:
    explicit ConfigBinder(CLI::App* cmd) : cmd_(cmd) {
        cmd->add_option("--config", config_path_,
                        "JSON config file with flag names as keys; explicit flags override");
        cmd->add_option("--out", out_dir_, "output directory")->capture_default_str();
    }

    template <typename T>
    CLI::Option* add(const std::string& flag, T& var, const std::string& desc) {
        CLI::Option* opt = cmd_->add_option(flag, var, desc)->capture_default_str();
        bind(flag, opt, var);
        return opt;
    }

    CLI::Option* add_flag(const std::string& flag, bool& var, const std::string& desc) {
        CLI::Option* opt = cmd_->add_flag(flag, var, desc);
        bind(flag, opt, var);
        return opt;
    }

    /// Apply the config file (if any), then create the output directory.
    void resolve() {
        if (!config_path_.empty()) {
            json cfg = read_json(config_path_);
            if (!cfg.is_object())
                throw std::runtime_error(config_path_ + ": config must be a JSON object");
            for (const auto& item : cfg.items()) {
                bool known = false;
                for (auto& e : entries_) {
                    if (e.name != item.key()) continue;
                    known = true;
                    if (e.opt->count() == 0) e.set(item.value());
                    break;
                }
                if (!known)
                    throw std::runtime_error(config_path_ + ": unknown config key '" +
                                             item.key() + "'");
            }
        }
        std::filesystem::create_directories(out_dir_);
    }

    /// Resolved configuration for the manifest.
    json manifest() const {
        json j;
        j["command"] = cmd_->get_name();
        json cfg;
        for (const auto& e : entries_) cfg[e.name] = e.get();
        cfg["out"] = out_dir_;
        if (!config_path_.empty()) cfg["config"] = config_path_;
        j["resolved"] = cfg;
        return j;
    }

    std::string path(const std::string& file) const {
        return (std::filesystem::path(out_dir_) / file).string();
    }

  private:
    struct Entry {
        std::string name;
        CLI::Option* opt;
        std::function<void(const json&)> set;
        std::function<json()> get;
    };

    template <typename T>
    void bind(const std::string& flag, CLI::Option* opt, T& var) {
        std::string name = flag.substr(flag.find_first_not_of('-'));
        entries_.push_back(Entry{name, opt, [&var](const json& v) { var = v.get<T>(); },
                                 [&var]() { return json(var); }});
    }

    CLI::App* cmd_;
    std::string config_path_;
    std::string out_dir_ = ".";
    std::vector<Entry> entries_;
};

json interval_json(const std::vector<ConfidenceInterval>& iv) {
    json out = json::array();
    for (const auto& c : iv) out.push_back(json{{"lo", c.lo}, {"hi", c.hi}});
    return out;
}

json info_json(const InformationEstimate& est) {
    json j;
    j["matrix"] = matrix_to_json(est.info);
    j["provenance"] = est.provenance;
    j["lambda_min"] = est.lambda_min;
    j["lambda_max"] = est.lambda_max;
    j["near_singular"] = est.near_singular;
    j["warnings"] = est.warnings;
    return j;
}

json params_json(const DoaParams& p) {
    return json{{"sigma_eta_sq", p.sigma_eta_sq},
                {"sigma_s_sq", p.sigma_s_sq},
                {"sigma_eps_sq", p.sigma_eps_sq}};
}

Vector params_vector(const DoaParams& p) {
    Vector v(3);
    v << p.sigma_eta_sq, p.sigma_s_sq, p.sigma_eps_sq;
    return v;
}

void write_estep_jsonl(const std::string& path, const McemFit& fit, int mh_samples,
                       double mh_growth) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    double planned = mh_samples;
    for (std::size_t t = 1; t < fit.trajectory.size(); ++t) {
        const McemIterate& it = fit.trajectory[t];
        json line;
        line["iteration"] = t;
        line["mh_samples"] = static_cast<long long>(std::ceil(planned));
        line["sigma_eta_sq"] = it.params.sigma_eta_sq;
        line["sigma_s_sq"] = it.params.sigma_s_sq;
        line["sigma_eps_sq"] = it.params.sigma_eps_sq;
        line["beta_hat"] = it.beta_hat;
        line["accept_rate"] = it.accept_rate;
        json warns = json::array();
        std::string tag = "iteration " + std::to_string(t) + ":";
        for (const auto& w : fit.warnings)
            if (w.rfind(tag, 0) == 0) warns.push_back(w.substr(tag.size() + 1));
        line["warnings"] = warns;
        out << line.dump() << "\n";
        planned *= mh_growth;
    }
}

// ---------------------------------------------------------------------------

int cmd_simulate(ConfigBinder& cfg, const std::string& model_path, bool doa, int n, int d,
                 double sigma_eta_sq, double sigma_s_sq, double sigma_eps_sq, double x0_angle,
                 int x0, std::uint64_t seed) {
    if (n < 1) throw std::runtime_error("--n must be >= 1");
    Rng rng(seed);
    if (doa) {
        DoaParams p{sigma_eta_sq, sigma_s_sq, sigma_eps_sq};
        DoaSimulation sim = simulate_doa(p, n, d, x0_angle, rng);
        write_snapshots_csv(cfg.path("snapshots.csv"), sim.snapshots);
        write_angles_csv(cfg.path("angles.csv"), sim.angles);
    } else {
        if (model_path.empty())
            throw std::runtime_error("simulate needs --model or --doa");
        SwitchingArModel m = read_model_json(model_path);
        ValidationReport rep = validate_model(m);
        if (!rep.ok) throw std::runtime_error(model_path + ": " + rep.failures.front());
        if (x0 < 0 || x0 >= m.num_regimes) throw std::runtime_error("--x0 out of range");
        std::vector<double> lag(static_cast<std::size_t>(m.order), 0.0);
        SimulatedPath path = simulate(m, n, x0, lag, rng);
        write_observations_csv(cfg.path("observations.csv"), path.observations.values);
        write_regimes_csv(cfg.path("regimes.csv"), path.regimes);
    }
    write_json(cfg.path("manifest.json"), cfg.manifest());
    return 0;
}

int cmd_fit_exact(ConfigBinder& cfg, const std::string& model_path, const std::string& data_path,
                  int x0, int starts, double perturb, double level, std::uint64_t seed) {
    SwitchingArModel shape = read_model_json(model_path);
    ValidationReport rep = validate_model(shape);
    if (!rep.ok) throw std::runtime_error(model_path + ": " + rep.failures.front());
    if (x0 < 0 || x0 >= shape.num_regimes) throw std::runtime_error("--x0 out of range");

    std::vector<double> values = read_single_column_csv(data_path, "y");
    if (static_cast<int>(values.size()) <= shape.order)
        throw std::runtime_error(data_path + ": need more rows than the AR order");
    ObservationSeries obs;
    obs.order = shape.order;
    obs.values = values;

    json report;
    report["data"] = data_path;
    report["n"] = obs.length();
    report["x0"] = x0;
    report["level"] = level;
    bool failed = false;
    try {
        Rng rng(seed);
        FitResult fit = multi_start_fit(shape, obs, x0, model_to_theta(shape), starts, perturb,
                                        rng);
        report["converged"] = fit.converged;
        report["used_nelder_mead"] = fit.used_nelder_mead;
        report["message"] = fit.message;
        report["iterations"] = fit.iterations;
        report["log_likelihood"] = fit.log_likelihood;
        report["grad_inf_norm"] = fit.grad_inf_norm;
        report["theta_hat"] = vector_to_json(fit.theta);
        report["model"] = model_to_json(fit.model);
        failed = !fit.converged;
        try {
            InformationEstimate info = observed_information_louis(fit.model, obs, x0);
            report["information"] = info_json(info);
            report["intervals"] = interval_json(confidence_intervals(fit.theta, info.info, level));
            report["intervals_constrained"] =
                interval_json(confidence_intervals_constrained(fit.model, info.info, level));
        } catch (const std::exception& e) {
            report["information_error"] = e.what();
            failed = true;
        }
    } catch (const std::exception& e) {
        report["fit_error"] = e.what();
        failed = true;
    }
    report["fit_failed"] = failed;
    write_json(cfg.path("fit.json"), report);
    write_json(cfg.path("manifest.json"), cfg.manifest());
    return 0;  // analysis commands exit nonzero only on IO/config errors
}

int cmd_fit_mcem(ConfigBinder& cfg, const std::string& snapshots_path, double x0,
                 std::vector<double> init, McemConfig mcfg, std::vector<double> theta_star,
                 long long info_burn_in, long long info_samples, bool skip_info, double level,
                 std::uint64_t seed) {
    ArraySnapshots data = read_snapshots_csv(snapshots_path);
    if (init.size() != 3) throw std::runtime_error("--init needs sigma_eta_sq,sigma_s_sq,sigma_eps_sq");
    DoaParams p0{init[0], init[1], init[2]};
    validate_doa_params(p0);
    validate_mcem_config(mcfg);

    Rng rng(seed);
    McemFit fit = mcem_fit(data, x0, p0, mcfg, rng);
    write_trajectory_csv(cfg.path("trajectory.csv"), fit.trajectory);
    write_estep_jsonl(cfg.path("estep.jsonl"), fit, mcfg.mh_samples, mcfg.mh_growth);

    json report;
    report["snapshots"] = snapshots_path;
    report["n"] = data.size();
    report["d"] = data.sensors;
    report["x0"] = x0;
    report["iterations"] = mcfg.iterations;
    report["theta_tilde"] = params_json(fit.theta_tilde);
    report["warnings"] = fit.warnings;
    double mean_accept = 0.0;
    int accept_rows = 0;
    for (std::size_t t = 1; t < fit.trajectory.size(); ++t) {
        mean_accept += fit.trajectory[t].accept_rate;
        ++accept_rows;
    }
    if (accept_rows > 0) report["mean_accept_rate"] = mean_accept / accept_rows;

    if (!skip_info) {
        McInfoConfig icfg;
        icfg.burn_in = info_burn_in;
        icfg.samples = info_samples;
        InformationEstimate info =
            mc_observed_information(fit.theta_tilde, data, x0, icfg, rng, &fit.chain);
        report["information"] = info_json(info);
        try {
            report["intervals"] =
                interval_json(confidence_intervals(params_vector(fit.theta_tilde), info.info,
                                                   level));
        } catch (const std::exception& e) {
            report["intervals_error"] = e.what();
        }
        if (!theta_star.empty()) {
            if (theta_star.size() != 3)
                throw std::runtime_error("--theta-star needs three values");
            Vector ref(3);
            ref << theta_star[0], theta_star[1], theta_star[2];
            ChiSquareReport chi =
                chi_square_test(params_vector(fit.theta_tilde), ref, info.info);
            report["chi_square"] = json{{"statistic", chi.statistic},
                                        {"df", chi.df},
                                        {"p_value", chi.p_value}};
        }
    }
    report["level"] = level;
    write_json(cfg.path("fit.json"), report);
    write_json(cfg.path("manifest.json"), cfg.manifest());
    return 0;
}

int cmd_verify(ConfigBinder& cfg, const std::vector<std::string>& only, std::uint64_t seed) {
    std::vector<CheckResult> results = run_checks(only, static_cast<unsigned>(seed));
    bool all_pass = true;
    json rows = json::array();
    for (const CheckResult& r : results) {
        all_pass = all_pass && r.pass;
        std::printf("[%s] %s: margin %.3e (threshold %.3e, %.2f s)\n", r.pass ? "PASS" : "FAIL",
                    r.name.c_str(), r.margin, r.threshold, r.seconds);
        rows.push_back(json{{"name", r.name},
                            {"pass", r.pass},
                            {"margin", r.margin},
                            {"threshold", r.threshold},
                            {"seconds", r.seconds},
                            {"details", r.details}});
    }
    json report;
    report["checks"] = rows;
    report["all_pass"] = all_pass;
    write_json(cfg.path("verify.json"), report);
    write_json(cfg.path("manifest.json"), cfg.manifest());
    return all_pass ? 0 : 1;
}

int cmd_reproduce_doa(ConfigBinder& cfg, int n, int d, int starts, McemConfig mcfg,
                      long long info_burn_in, long long info_samples, double level,
                      std::uint64_t seed) {
    if (n < 1 || d < 2 || starts < 1) throw std::runtime_error("bad --n/--d/--starts");
    const DoaParams theta_star{0.25, 0.64, 0.36};
    const double x0 = kPi;
    Rng root(seed);

    Rng sim_rng = root.child(0);
    DoaSimulation sim = simulate_doa(theta_star, n, d, x0, sim_rng);
    write_snapshots_csv(cfg.path("snapshots.csv"), sim.snapshots);
    write_angles_csv(cfg.path("angles.csv"), sim.angles);

    // Start 0 is the true parameter; the rest draw each coordinate uniformly
    // from (0, 1).
    std::vector<DoaParams> inits(static_cast<std::size_t>(starts));
    inits[0] = theta_star;
    for (int s = 1; s < starts; ++s) {
        Rng r = root.child(100 + static_cast<std::uint64_t>(s));
        inits[static_cast<std::size_t>(s)] =
            DoaParams{r.uniform_pos(), r.uniform_pos(), r.uniform_pos()};
    }

    std::vector<McemFit> fits(static_cast<std::size_t>(starts));
    parallel_for(starts, [&](std::int64_t s) {
        Rng r = root.child(200 + static_cast<std::uint64_t>(s));
        fits[static_cast<std::size_t>(s)] =
            mcem_fit(sim.snapshots, x0, inits[static_cast<std::size_t>(s)], mcfg, r);
    });

    json report;
    report["theta_star"] = params_json(theta_star);
    report["n"] = n;
    report["d"] = d;
    json tilde_rows = json::array(), accept_rows = json::array(), init_rows = json::array();
    for (int s = 0; s < starts; ++s) {
        const McemFit& fit = fits[static_cast<std::size_t>(s)];
        write_trajectory_csv(cfg.path("trajectory_" + std::to_string(s) + ".csv"),
                             fit.trajectory);
        write_estep_jsonl(cfg.path("estep_" + std::to_string(s) + ".jsonl"), fit,
                          mcfg.mh_samples, mcfg.mh_growth);
        tilde_rows.push_back(params_json(fit.theta_tilde));
        init_rows.push_back(params_json(inits[static_cast<std::size_t>(s)]));
        double mean_accept = 0.0;
        for (std::size_t t = 1; t < fit.trajectory.size(); ++t)
            mean_accept += fit.trajectory[t].accept_rate;
        accept_rows.push_back(fit.trajectory.size() > 1
                                  ? mean_accept / (fit.trajectory.size() - 1)
                                  : 0.0);
    }
    report["inits"] = init_rows;
    report["theta_tilde_per_start"] = tilde_rows;
    report["mean_accept_rate_per_start"] = accept_rows;

    double agreement = 0.0;
    for (int a = 0; a < starts; ++a)
        for (int b = a + 1; b < starts; ++b) {
            Vector da = params_vector(fits[static_cast<std::size_t>(a)].theta_tilde) -
                        params_vector(fits[static_cast<std::size_t>(b)].theta_tilde);
            agreement = std::max(agreement, da.cwiseAbs().maxCoeff());
        }
    report["agreement_max_pairwise"] = agreement;

    const McemFit& ref = fits[0];
    McInfoConfig icfg;
    icfg.burn_in = info_burn_in;
    icfg.samples = info_samples;
    Rng info_rng = root.child(300);
    MhChain info_chain = ref.chain;
    InformationEstimate info =
        mc_observed_information(ref.theta_tilde, sim.snapshots, x0, icfg, info_rng, &info_chain);
    report["information"] = info_json(info);

    Vector tilde = params_vector(ref.theta_tilde);
    Vector star = params_vector(theta_star);
    bool covers = false;
    try {
        std::vector<ConfidenceInterval> iv = confidence_intervals(tilde, info.info, level);
        report["intervals"] = interval_json(iv);
        covers = true;
        for (int j = 0; j < 3; ++j)
            covers = covers && star(j) >= iv[static_cast<std::size_t>(j)].lo &&
                     star(j) <= iv[static_cast<std::size_t>(j)].hi;
    } catch (const std::exception& e) {
        report["intervals_error"] = e.what();
    }
    report["covers_theta_star"] = covers;
    report["level"] = level;
    ChiSquareReport chi = chi_square_test(tilde, star, info.info);
    report["chi_square"] =
        json{{"statistic", chi.statistic}, {"df", chi.df}, {"p_value", chi.p_value}};

    write_json(cfg.path("report.json"), report);
    write_json(cfg.path("manifest.json"), cfg.manifest());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"regime-switching time-series toolkit"};
    app.require_subcommand(1);

    // --- simulate ---------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "draw a latent path and observations");
    ConfigBinder sim_cfg(sim);
    std::string sim_model;
    bool sim_doa = false;
    int sim_n = 200, sim_d = 4, sim_x0 = 0;
    double sim_v = 0.25, sim_s = 0.64, sim_a = 0.36, sim_x0_angle = kPi;
    std::uint64_t sim_seed = 1;
    sim_cfg.add("--model", sim_model, "finite-regime model JSON file");
    sim_cfg.add_flag("--doa", sim_doa, "simulate the rotating-array tracking model");
    sim_cfg.add("--n", sim_n, "number of time steps");
    sim_cfg.add("--d", sim_d, "number of sensors (with --doa)");
    sim_cfg.add("--sigma-eta-sq", sim_v, "angle-walk variance (with --doa)");
    sim_cfg.add("--sigma-s-sq", sim_s, "source power (with --doa)");
    sim_cfg.add("--sigma-eps-sq", sim_a, "noise power (with --doa)");
    sim_cfg.add("--x0-angle", sim_x0_angle, "initial angle (with --doa)");
    sim_cfg.add("--x0", sim_x0, "initial regime (with --model)");
    sim_cfg.add("--seed", sim_seed, "random seed");

    // --- fit-exact --------------------------------------------------------
    auto* fx = app.add_subcommand("fit-exact",
                                  "maximum likelihood for a finite-regime model");
    ConfigBinder fx_cfg(fx);
    std::string fx_model, fx_data;
    int fx_x0 = 0, fx_starts = 5;
    double fx_perturb = 0.5, fx_level = 0.95;
    std::uint64_t fx_seed = 1;
    fx_cfg.add("--model", fx_model, "model JSON file: shape and starting point")
        ->required();
    fx_cfg.add("--data", fx_data, "observations CSV (column y)")->required();
    fx_cfg.add("--x0", fx_x0, "conditioning initial regime");
    fx_cfg.add("--starts", fx_starts, "number of optimizer starts");
    fx_cfg.add("--perturb", fx_perturb, "start perturbation scale");
    fx_cfg.add("--level", fx_level, "confidence level");
    fx_cfg.add("--seed", fx_seed, "random seed");

    // --- fit-mcem ---------------------------------------------------------
    auto* fm = app.add_subcommand("fit-mcem", "Monte Carlo EM for the tracking model");
    ConfigBinder fm_cfg(fm);
    std::string fm_snapshots;
    double fm_x0 = kPi, fm_level = 0.95, fm_growth = 1.0;
    std::vector<double> fm_init{1.0, 1.0, 1.0}, fm_theta_star;
    int fm_iterations = 50, fm_samples = 40000, fm_burn = 20000, fm_thin = 400, fm_window = 25;
    long long fm_info_burn = 100000, fm_info_samples = 200000;
    bool fm_fresh = false, fm_constant_path = false, fm_skip_info = false;
    std::uint64_t fm_seed = 1;
    fm_cfg.add("--snapshots", fm_snapshots, "snapshot CSV (re0,im0,...)")->required();
    fm_cfg.add("--x0", fm_x0, "known initial angle");
    fm_cfg.add("--init", fm_init, "initial sigma_eta_sq,sigma_s_sq,sigma_eps_sq")
        ->delimiter(',')
        ->expected(3);
    fm_cfg.add("--iterations", fm_iterations, "EM iterations");
    fm_cfg.add("--mh-samples", fm_samples, "post-burn-in proposals per E-step");
    fm_cfg.add("--burn-in", fm_burn, "burn-in proposals per E-step");
    fm_cfg.add("--thin", fm_thin, "keep every thin-th path for the variance search");
    fm_cfg.add("--K", fm_window, "trailing iterates averaged into theta_tilde");
    fm_cfg.add("--mh-growth", fm_growth, "per-iteration sample growth factor");
    fm_cfg.add_flag("--fresh-start", fm_fresh, "redraw the chain from the prior each iteration");
    fm_cfg.add_flag("--constant-init-path", fm_constant_path,
                    "start the first chain at the all-x0 path");
    fm_cfg.add("--theta-star", fm_theta_star, "reference parameter for the Wald test")
        ->delimiter(',')
        ->expected(3);
    fm_cfg.add("--info-burn-in", fm_info_burn, "burn-in for the information run");
    fm_cfg.add("--info-samples", fm_info_samples, "samples for the information run");
    fm_cfg.add_flag("--skip-info", fm_skip_info, "skip the information run");
    fm_cfg.add("--level", fm_level, "confidence level");
    fm_cfg.add("--seed", fm_seed, "random seed");

    // --- verify -----------------------------------------------------------
    auto* vf = app.add_subcommand("verify", "run the named correctness checks");
    ConfigBinder vf_cfg(vf);
    std::vector<std::string> vf_only;
    std::uint64_t vf_seed = 20250822;
    vf_cfg.add("--only", vf_only, "run only these checks (repeatable)");
    vf_cfg.add("--seed", vf_seed, "random seed for check instance generation");

    // --- reproduce-doa ----------------------------------------------------
    auto* rd = app.add_subcommand("reproduce-doa",
                                  "full tracking experiment: simulate, 5 starts, inference");
    ConfigBinder rd_cfg(rd);
    int rd_n = 200, rd_d = 4, rd_starts = 5;
    int rd_iterations = 50, rd_samples = 40000, rd_burn = 20000, rd_thin = 400, rd_window = 25;
    long long rd_info_burn = 100000, rd_info_samples = 200000;
    double rd_level = 0.95;
    std::uint64_t rd_seed = 8301;
    rd_cfg.add("--n", rd_n, "number of time steps");
    rd_cfg.add("--d", rd_d, "number of sensors");
    rd_cfg.add("--starts", rd_starts, "number of EM starts (first is the true value)");
    rd_cfg.add("--iterations", rd_iterations, "EM iterations per start");
    rd_cfg.add("--mh-samples", rd_samples, "post-burn-in proposals per E-step");
    rd_cfg.add("--burn-in", rd_burn, "burn-in proposals per E-step");
    rd_cfg.add("--thin", rd_thin, "keep every thin-th path for the variance search");
    rd_cfg.add("--K", rd_window, "trailing iterates averaged into theta_tilde");
    rd_cfg.add("--info-burn-in", rd_info_burn, "burn-in for the information run");
    rd_cfg.add("--info-samples", rd_info_samples, "samples for the information run");
    rd_cfg.add("--level", rd_level, "confidence level");
    rd_cfg.add("--seed", rd_seed, "root random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(sim)) {
            sim_cfg.resolve();
            return cmd_simulate(sim_cfg, sim_model, sim_doa, sim_n, sim_d, sim_v, sim_s, sim_a,
                                sim_x0_angle, sim_x0, sim_seed);
        }
        if (app.got_subcommand(fx)) {
            fx_cfg.resolve();
            return cmd_fit_exact(fx_cfg, fx_model, fx_data, fx_x0, fx_starts, fx_perturb,
                                 fx_level, fx_seed);
        }
        if (app.got_subcommand(fm)) {
            fm_cfg.resolve();
            McemConfig mcfg;
            mcfg.iterations = fm_iterations;
            mcfg.mh_samples = fm_samples;
            mcfg.burn_in = fm_burn;
            mcfg.eta_thin = fm_thin;
            mcfg.final_mean_window = fm_window;
            mcfg.mh_growth = fm_growth;
            mcfg.warm_start = !fm_fresh;
            mcfg.init_path_constant = fm_constant_path;
            return cmd_fit_mcem(fm_cfg, fm_snapshots, fm_x0, fm_init, mcfg, fm_theta_star,
                                fm_info_burn, fm_info_samples, fm_skip_info, fm_level, fm_seed);
        }
        if (app.got_subcommand(vf)) {
            vf_cfg.resolve();
            return cmd_verify(vf_cfg, vf_only, vf_seed);
        }
        if (app.got_subcommand(rd)) {
            rd_cfg.resolve();
            McemConfig mcfg;
            mcfg.iterations = rd_iterations;
            mcfg.mh_samples = rd_samples;
            mcfg.burn_in = rd_burn;
            mcfg.eta_thin = rd_thin;
            mcfg.final_mean_window = rd_window;
            return cmd_reproduce_doa(rd_cfg, rd_n, rd_d, rd_starts, mcfg, rd_info_burn,
                                     rd_info_samples, rd_level, rd_seed);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::cerr << "error: no subcommand\n";
    return 2;
}
