#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "seqdet/arl_analytic.hpp"
#include "seqdet/detectors.hpp"
#include "seqdet/fredholm.hpp"
#include "seqdet/montecarlo.hpp"
#include "seqdet/power.hpp"
#include "seqdet/pressure_demo.hpp"

namespace {

using json = nlohmann::json;
using namespace seqdet;

constexpr int kExitConfig = 2;
constexpr int kExitParse = 3;
constexpr int kExitNumerical = 4;

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

ProcedureKind parse_procedure(const std::string& name) {
    if (name == "cusum") return ProcedureKind::CusumV;
    if (name == "page") return ProcedureKind::Page;
    if (name == "sr") return ProcedureKind::ShiryaevRoberts;
    if (name == "mosum") return ProcedureKind::Mosum;
    if (name == "genmosum") return ProcedureKind::GenMosum;
    if (name == "fulllr") return ProcedureKind::FullLr;
    throw ConfigError("unknown procedure '" + name + "'");
}

/// Window argument: "L" for MOSUM, "l0:l1" for the generalized statistic.
struct WindowArg {
    std::int64_t mosum = 0;
    TransientWindow general{1, 1};
    bool is_range = false;
};

WindowArg parse_window(const std::string& text) {
    WindowArg out;
    const auto colon = text.find(':');
    try {
        if (colon == std::string::npos) {
            out.mosum = std::stoll(text);
            out.general = TransientWindow{out.mosum, out.mosum};
        } else {
            const std::int64_t l0 = std::stoll(text.substr(0, colon));
            const std::int64_t l1 = std::stoll(text.substr(colon + 1));
            out.general = TransientWindow{l0, l1};
            out.mosum = l1;
            out.is_range = true;
        }
    } catch (const std::invalid_argument&) {
        throw ConfigError("window must be 'L' or 'l0:l1', got '" + text + "'");
    }
    return out;
}

struct CommonOptions {
    std::string procedure = "mosum";
    double mu = 0.0;
    double amplitude = 1.0;
    double sigma = 1.0;
    std::string window = "50";
    double threshold = std::numeric_limits<double>::quiet_NaN();
    double target_arl = std::numeric_limits<double>::quiet_NaN();
    std::int64_t reps = 100000;
    std::uint64_t seed = 1;
    std::string input;
    std::string output;
    std::string config_file;
    bool stop_on_first = false;

    bool has_threshold() const { return !std::isnan(threshold); }
    bool has_target() const { return !std::isnan(target_arl); }
};

/// Wires the shared flags onto a subcommand and remembers the option
/// handles so a JSON config can fill anything the command line left out.
struct OptionSet {
    std::vector<std::pair<CLI::Option*, std::function<void(const json&)>>> bound;

    template <class T>
    CLI::Option* bind(CLI::App* cmd, const std::string& flag, T& var, const std::string& help) {
        CLI::Option* opt = cmd->add_option(flag, var, help);
        std::string key = flag.substr(flag.find_last_of('-') + 1);
        const auto comma = key.find(',');
        if (comma != std::string::npos) key = key.substr(0, comma);
        bound.emplace_back(opt, [&var, key](const json& j) {
            if (j.contains(key)) var = j.at(key).get<T>();
        });
        return opt;
    }

    CLI::Option* bind_flag(CLI::App* cmd, const std::string& flag, bool& var,
                           const std::string& help) {
        CLI::Option* opt = cmd->add_flag(flag, var, help);
        std::string key = flag.substr(flag.find_last_of('-') + 1);
        bound.emplace_back(opt, [&var, key](const json& j) {
            if (j.contains(key)) var = j.at(key).get<bool>();
        });
        return opt;
    }

    /// Command-line values win; config supplies the rest.
    void apply_config(const std::string& path) {
        if (path.empty()) return;
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        json j;
        try {
            in >> j;
        } catch (const json::parse_error& err) {
            throw ConfigError("config file '" + path + "': " + err.what());
        }
        for (auto& [opt, apply] : bound) {
            if (opt->count() == 0) apply(j);
        }
    }
};

void add_common(CLI::App* cmd, CommonOptions& opts, OptionSet& set) {
    set.bind(cmd, "--procedure", opts.procedure,
             "Detector: cusum|page|sr|mosum|genmosum|fulllr");
    set.bind(cmd, "--mu", opts.mu, "Pre-change mean");
    set.bind(cmd, "--amplitude", opts.amplitude, "Mean shift A > 0");
    set.bind(cmd, "--sigma", opts.sigma, "Noise standard deviation");
    set.bind(cmd, "--window", opts.window, "Window: L for mosum, l0:l1 for genmosum");
    set.bind(cmd, "--threshold", opts.threshold, "Alarm threshold on the statistic's native scale");
    set.bind(cmd, "--target-arl", opts.target_arl, "Calibrate the threshold to this ARL");
    set.bind(cmd, "--reps", opts.reps, "Monte Carlo replicates");
    set.bind(cmd, "--seed", opts.seed, "Master RNG seed");
    set.bind(cmd, "--input", opts.input, "Input CSV ('index,value' or bare 'value' rows)");
    set.bind(cmd, "--output", opts.output, "Output file (default: stdout)");
    set.bind_flag(cmd, "--stop-on-first", opts.stop_on_first, "Stop at the first alarm");
    cmd->add_option("--config", opts.config_file, "JSON config; flags win over file values");
}

DetectorConfig detector_config(const CommonOptions& opts) {
    DetectorConfig cfg;
    cfg.kind = parse_procedure(opts.procedure);
    cfg.spec = GaussianChangeSpec(opts.mu, opts.amplitude, opts.sigma);
    const WindowArg window = parse_window(opts.window);
    cfg.mosum_window = window.mosum;
    cfg.window = window.general;
    if (cfg.kind == ProcedureKind::Mosum && window.is_range)
        throw ConfigError("mosum takes a single window length, not a range");
    return cfg;
}

std::ostream& open_output(const CommonOptions& opts, std::ofstream& file) {
    if (opts.output.empty()) return std::cout;
    file.open(opts.output);
    if (!file) throw ConfigError("cannot open output file '" + opts.output + "'");
    return file;
}

/// One observation per row, either "value" or "index,value"; an optional
/// header row is skipped. Failures name the offending row.
std::vector<double> read_csv(std::istream& in, const std::string& name) {
    std::vector<double> values;
    std::string line;
    std::size_t row = 0;
    bool first_data_row = true;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        if (trimmed.empty()) continue;
        const auto comma = trimmed.find_last_of(',');
        const std::string field = comma == std::string::npos ? trimmed : trimmed.substr(comma + 1);
        try {
            std::size_t used = 0;
            const double v = std::stod(field, &used);
            while (used < field.size() && std::isspace(static_cast<unsigned char>(field[used]))) ++used;
            if (used != field.size()) throw std::invalid_argument(field);
            values.push_back(v);
            first_data_row = false;
        } catch (const std::exception&) {
            if (first_data_row && row == 1) continue;  // header
            throw ParseError(name + ": row " + std::to_string(row) + ": cannot parse '" + field +
                             "' as an observation");
        }
    }
    return values;
}

/*
 * Threshold from a target ARL without simulation where theory allows:
 * MOSUM inverts the analytic ARL; CUSUM/Page/SR bisect the Fredholm
 * solution; generalized MOSUM with l0 = 1 inverts the explicit closed
 * form, otherwise falls back to seeded Monte Carlo calibration. Analytic
 * routes assume sigma-standardized inputs (amplitude/sigma).
 */
double threshold_for_target(const DetectorConfig& cfg, double target, std::int64_t reps,
                            std::uint64_t seed) {
    const double amp_std = cfg.spec.amplitude / cfg.spec.sigma;
    switch (cfg.kind) {
        case ProcedureKind::Mosum: {
            const double want = target - static_cast<double>(cfg.mosum_window);
            if (want < 2.0) throw ConfigError("target ARL too small for this window");
            double lo = 0.2, hi = 9.0;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                double arl;
                try {
                    arl = mosum_arl_std(mid, cfg.mosum_window);
                } catch (const std::domain_error&) {
                    lo = mid;
                    continue;
                }
                (arl < want ? lo : hi) = mid;
            }
            const double h = 0.5 * (lo + hi);
            return cfg.spec.mu * static_cast<double>(cfg.mosum_window) +
                   h * cfg.spec.sigma * std::sqrt(static_cast<double>(cfg.mosum_window));
        }
        case ProcedureKind::CusumV:
        case ProcedureKind::Page:
        case ProcedureKind::ShiryaevRoberts: {
            const bool is_sr = cfg.kind == ProcedureKind::ShiryaevRoberts;
            const double kap = kappa(amp_std);
            const double seed_v =
                is_sr ? target * kap : target * amp_std * kap * kap / 2.0;
            double lo = seed_v / 4.0, hi = seed_v * 4.0;
            const auto arl_at = [&](double barrier) {
                FredholmProblem problem{is_sr ? FredholmProcedure::ShiryaevRoberts
                                              : FredholmProcedure::Cusum,
                                        barrier, DelayRegime::NullArl, amp_std, 512};
                return solve(problem).phi_at_start;
            };
            for (int guard = 0; arl_at(lo) >= target && guard < 40; ++guard) lo *= 0.5;
            for (int guard = 0; arl_at(hi) <= target && guard < 40; ++guard) hi *= 2.0;
            for (int it = 0; it < 60; ++it) {
                const double mid = std::sqrt(lo * hi);
                (arl_at(mid) < target ? lo : hi) = mid;
            }
            const double barrier = std::sqrt(lo * hi);
            return cfg.kind == ProcedureKind::Page ? std::log(barrier) : barrier;
        }
        case ProcedureKind::GenMosum: {
            const CalibrationResult cal = calibrate_threshold(cfg, target, 0.02, seed, 0, reps);
            return cal.threshold;
        }
        case ProcedureKind::FullLr:
            throw ConfigError("fulllr has no run-length theory here; give --threshold directly");
    }
    throw ConfigError("unsupported procedure");
}

json alarm_to_json(const AlarmEvent& alarm) {
    return json{{"n", alarm.n},
                {"statistic", alarm.statistic},
                {"threshold", alarm.threshold},
                {"procedure", std::string(procedure_name(alarm.procedure))}};
}

template <class Detector>
int detect_with(Detector detector, double threshold, const std::vector<double>& ys,
                bool stop_on_first, std::ostream& out) {
    const double key = detector.threshold_key(threshold);
    int alarms = 0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        detector.step(ys[i]);
        if (detector.ready() && detector.crossed(key)) {
            AlarmEvent alarm{static_cast<std::int64_t>(i + 1), detector.value(), threshold,
                             Detector::kind};
            out << alarm_to_json(alarm).dump() << "\n";
            ++alarms;
            if (stop_on_first) break;
            detector.reset();
        }
    }
    return alarms;
}

int cmd_detect(const CommonOptions& opts) {
    if (opts.has_threshold() == opts.has_target())
        throw ConfigError("give exactly one of --threshold or --target-arl");
    const DetectorConfig cfg = detector_config(opts);

    std::vector<double> ys;
    if (opts.input.empty() || opts.input == "-") {
        ys = read_csv(std::cin, "<stdin>");
    } else {
        std::ifstream in(opts.input);
        if (!in) throw ConfigError("cannot open input file '" + opts.input + "'");
        ys = read_csv(in, opts.input);
    }

    const double threshold = opts.has_threshold()
                                 ? opts.threshold
                                 : threshold_for_target(cfg, opts.target_arl, opts.reps, opts.seed);

    std::ofstream file;
    std::ostream& out = open_output(opts, file);
    switch (cfg.kind) {
        case ProcedureKind::CusumV:
            detect_with(CusumVDetector(cfg.spec), threshold, ys, opts.stop_on_first, out);
            break;
        case ProcedureKind::Page:
            detect_with(PageDetector(cfg.spec), threshold, ys, opts.stop_on_first, out);
            break;
        case ProcedureKind::ShiryaevRoberts:
            detect_with(ShiryaevRobertsDetector(cfg.spec), threshold, ys, opts.stop_on_first, out);
            break;
        case ProcedureKind::Mosum:
            detect_with(MosumDetector(cfg.mosum_window, cfg.spec), threshold, ys,
                        opts.stop_on_first, out);
            break;
        case ProcedureKind::GenMosum:
            detect_with(GenMosumDetector(cfg.window, cfg.spec), threshold, ys, opts.stop_on_first,
                        out);
            break;
        case ProcedureKind::FullLr:
            detect_with(FullLrDetector(cfg.spec), threshold, ys, opts.stop_on_first, out);
            break;
    }
    return 0;
}

int cmd_calibrate(const CommonOptions& opts) {
    if (!opts.has_target()) throw ConfigError("calibrate requires --target-arl");
    const DetectorConfig cfg = detector_config(opts);
    const CalibrationResult cal =
        calibrate_threshold(cfg, opts.target_arl, 0.02, opts.seed, 0, opts.reps);
    json out{{"procedure", opts.procedure},
             {"threshold", cal.threshold},
             {"achieved_arl", cal.achieved_arl},
             {"std_error", cal.achieved_std_error},
             {"rounds", cal.rounds},
             {"replicates", cal.final_replicates},
             {"target_arl", opts.target_arl},
             {"seed", opts.seed}};
    std::ofstream file;
    open_output(opts, file) << out.dump(2) << "\n";
    return 0;
}

int cmd_arl(const CommonOptions& opts) {
    if (!opts.has_threshold()) throw ConfigError("arl requires --threshold");
    const DetectorConfig cfg = detector_config(opts);
    const double amp_std = cfg.spec.amplitude / cfg.spec.sigma;

    json analytic = json::object();
    try {
        switch (cfg.kind) {
            case ProcedureKind::CusumV: {
                analytic["fast_exact_kappa"] = cusum_arl_fast(opts.threshold, amp_std);
                analytic["fast_proxy_kappa"] =
                    cusum_arl_fast(opts.threshold, amp_std, KappaMode::Proxy);
                analytic["general"] = cusum_arl_general(std::log(opts.threshold), amp_std);
                FredholmProblem problem{FredholmProcedure::Cusum, opts.threshold,
                                        DelayRegime::NullArl, amp_std, 1024};
                analytic["fredholm"] = solve(problem).phi_at_start;
                break;
            }
            case ProcedureKind::Page: {
                analytic["general"] = cusum_arl_general(opts.threshold, amp_std);
                FredholmProblem problem{FredholmProcedure::Cusum, std::exp(opts.threshold),
                                        DelayRegime::NullArl, amp_std, 1024};
                analytic["fredholm"] = solve(problem).phi_at_start;
                break;
            }
            case ProcedureKind::ShiryaevRoberts: {
                analytic["fast_exact_kappa"] = sr_arl_fast(opts.threshold, amp_std);
                analytic["fast_proxy_kappa"] =
                    sr_arl_fast(opts.threshold, amp_std, KappaMode::Proxy);
                FredholmProblem problem{FredholmProcedure::ShiryaevRoberts, opts.threshold,
                                        DelayRegime::NullArl, amp_std, 1024};
                analytic["fredholm"] = solve(problem).phi_at_start;
                break;
            }
            case ProcedureKind::Mosum: {
                const double tau_s =
                    mosum_arl(opts.threshold, cfg.mosum_window, cfg.spec.mu, cfg.spec.sigma);
                analytic["tau_s"] = tau_s;
                analytic["tau_m"] = tau_s + static_cast<double>(cfg.mosum_window);
                break;
            }
            case ProcedureKind::GenMosum: {
                if (cfg.window.l0 == 1) {
                    const double tau_s = approx2_arl(opts.threshold, amp_std, cfg.window.l1);
                    analytic["closed_form_tau_s"] = tau_s;
                    analytic["closed_form_tau_z"] = tau_s + static_cast<double>(cfg.window.l1);
                }
                const auto f1 = estimate_bcp(cfg, opts.threshold, cfg.window.l1, opts.reps, opts.seed);
                const auto f2 =
                    estimate_bcp(cfg, opts.threshold, 2 * cfg.window.l1, opts.reps, opts.seed + 1);
                const double tau_s =
                    genmosum_arl(opts.threshold, cfg.window, f1.probability, f2.probability);
                analytic["geometric_tau_s"] = tau_s;
                analytic["geometric_tau_z"] = tau_s + static_cast<double>(cfg.window.l1);
                analytic["base_f_l1"] = f1.probability;
                analytic["base_f_2l1"] = f2.probability;
                break;
            }
            case ProcedureKind::FullLr:
                break;
        }
    } catch (const std::domain_error& err) {
        analytic["advisory"] = err.what();
    }

    SimulationPlan plan;
    plan.detector = cfg;
    plan.threshold = opts.threshold;
    plan.replicates = opts.reps;
    plan.seed = opts.seed;
    double guess = 1000.0;
    if (analytic.contains("fredholm")) guess = analytic["fredholm"].get<double>();
    if (analytic.contains("tau_m")) guess = analytic["tau_m"].get<double>();
    if (analytic.contains("geometric_tau_z")) guess = analytic["geometric_tau_z"].get<double>();
    plan.max_steps = static_cast<std::int64_t>(100.0 * std::max(guess, 100.0));
    const RunLengthEstimate est = estimate_arl(plan);

    json out{{"procedure", opts.procedure},
             {"threshold", opts.threshold},
             {"analytic", analytic},
             {"monte_carlo",
              {{"mean", est.mean},
               {"std_error", est.std_error},
               {"replicates", est.replicates},
               {"censored", est.censored_count},
               {"censoring_flagged", est.censoring_flagged},
               {"warmup_offset", est.warmup_offset},
               {"seed", est.seed}}}};
    std::ofstream file;
    open_output(opts, file) << out.dump(2) << "\n";
    return 0;
}

/// Tables: approximation rows and Monte Carlo rows side by side.
int cmd_tables(int which, const CommonOptions& opts) {
    std::ofstream file;
    std::ostream& out = open_output(opts, file);
    GaussianChangeSpec unit{0.0, 1.0, 1.0};
    const std::int64_t reps = opts.reps;
    out.precision(10);

    auto arl_of = [&](const DetectorConfig& cfg, double threshold, double cap) {
        SimulationPlan plan;
        plan.detector = cfg;
        plan.threshold = threshold;
        plan.replicates = reps;
        plan.max_steps = static_cast<std::int64_t>(cap);
        plan.seed = opts.seed;
        return estimate_arl(plan);
    };

    switch (which) {
        case 1: {
            out << "H,mc_arl,mc_se,approx_exact_kappa,approx_proxy_kappa\n";
            for (double H : {9.32, 17.33, 80.65, 159.35, 788.00}) {
                DetectorConfig cfg{ProcedureKind::CusumV, unit, 0, {1, 1}};
                const auto est = arl_of(cfg, H, 2e6);
                out << H << ',' << est.mean << ',' << est.std_error << ','
                    << cusum_arl_fast(H, 1.0) << ',' << cusum_arl_fast(H, 1.0, KappaMode::Proxy)
                    << "\n";
            }
            break;
        }
        case 2:
        case 3: {
            const std::int64_t window = which == 2 ? 10 : 50;
            out << "h,approx_tau_s,mc_tau_s,mc_se\n";
            for (double h : {2.0, 2.25, 2.5, 2.75, 3.0, 3.25, 3.5}) {
                DetectorConfig cfg{ProcedureKind::Mosum, unit, window, {1, 1}};
                const double raw = h * std::sqrt(static_cast<double>(window));
                const auto est = arl_of(cfg, raw, 4e6);
                out << h << ',' << mosum_arl_std(h, window) << ','
                    << est.mean - static_cast<double>(est.warmup_offset) << ',' << est.std_error
                    << "\n";
            }
            break;
        }
        case 4: {
            const TransientWindow window{25, 50};
            out << "H,approx_tau_s,mc_tau_s,mc_se,base_f_l1,base_f_2l1\n";
            for (double H : {-5.0, -4.5, -4.0, -3.5, -3.0, -2.5, -2.0}) {
                DetectorConfig cfg{ProcedureKind::GenMosum, unit, 0, window};
                const auto f1 = estimate_bcp(cfg, H, window.l1, reps, opts.seed + 11);
                const auto f2 = estimate_bcp(cfg, H, 2 * window.l1, reps, opts.seed + 12);
                const double approx = genmosum_arl(H, window, f1.probability, f2.probability);
                const auto est = arl_of(cfg, H, 1e5);
                out << H << ',' << approx << ','
                    << est.mean - static_cast<double>(est.warmup_offset) << ',' << est.std_error
                    << ',' << f1.probability << ',' << f2.probability << "\n";
            }
            break;
        }
        case 5: {
            const TransientWindow window{1, 10};
            out << "H,closed_form_tau_s,approx_tau_s,mc_tau_s,mc_se\n";
            for (double H : {2.0, 2.25, 2.5, 2.75, 3.0, 3.25, 3.5}) {
                DetectorConfig cfg{ProcedureKind::GenMosum, unit, 0, window};
                const auto f1 = estimate_bcp(cfg, H, window.l1, reps, opts.seed + 21);
                const auto f2 = estimate_bcp(cfg, H, 2 * window.l1, reps, opts.seed + 22);
                const double geo = genmosum_arl(H, window, f1.probability, f2.probability);
                const auto est = arl_of(cfg, H, 1e5);
                out << H << ',' << approx2_arl(H, 1.0, window.l1) << ',' << geo << ','
                    << est.mean - static_cast<double>(est.warmup_offset) << ',' << est.std_error
                    << "\n";
            }
            break;
        }
        default:
            throw ConfigError("table must be 1..5");
    }
    return 0;
}

int cmd_power_curves(const std::string& scenario, const CommonOptions& opts) {
    std::ofstream file;
    std::ostream& out = open_output(opts, file);
    out.precision(10);

    if (scenario == "fig8" || scenario == "fig9") {
        const double h = scenario == "fig8" ? 3.0 : 4.0;
        out << "gamma,L,empirical,empirical_se,discrete,diffusion\n";
        for (std::int64_t window : {5, 20, 100}) {
            for (double gamma = 0.5; gamma <= 4.0 + 1e-9; gamma += 0.5) {
                const double amplitude = gamma / std::sqrt(static_cast<double>(window));
                const auto emp =
                    empirical_power_mosum(h, amplitude, window, window, opts.reps, opts.seed);
                out << gamma << ',' << window << ',' << emp.power << ',' << emp.std_error << ','
                    << discrete_power(h, amplitude, window) << ',' << diffusion_power(h, gamma)
                    << "\n";
            }
        }
        return 0;
    }

    if (scenario == "fig12" || scenario == "fig13") {
        const double amplitude = scenario == "fig12" ? 1.0 : 0.5;
        const std::int64_t signal = scenario == "fig12" ? 10 : 20;
        const TransientWindow window_z =
            scenario == "fig12" ? TransientWindow{5, 20} : TransientWindow{10, 40};
        const double target = 500.0;
        GaussianChangeSpec spec{0.0, amplitude, 1.0};

        DetectorConfig zcfg{ProcedureKind::GenMosum, spec, 0, window_z};
        const CalibrationResult calib_z =
            calibrate_threshold(zcfg, target, 0.02, opts.seed ^ 0x5A17ULL);
        DetectorConfig vcfg{ProcedureKind::Page, spec, 0, {1, 1}};
        const CalibrationResult calib_v =
            calibrate_threshold(vcfg, target, 0.02, opts.seed ^ 0xC0DEULL);

        const std::int64_t nu = 3 * std::max<std::int64_t>(window_z.l1, 2 * signal);
        const auto pz = empirical_power_genmosum(calib_z.threshold, window_z, amplitude, signal, nu,
                                                 opts.reps, opts.seed ^ 0xB0B5ULL);
        const auto pv = empirical_power_cusum(calib_v.threshold, amplitude, signal, nu, opts.reps,
                                              opts.seed ^ 0xF00DULL);

        out << "lambda,L,p_s,p_s_se,p_z,p_z_se,p_v,p_v_se\n";
        for (std::int64_t window = signal / 2; window <= 2 * signal;
             window += std::max<std::int64_t>(1, signal / 10)) {
            const double want_s = target - static_cast<double>(window);
            double lo = 0.2, hi = 9.0;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                double arl;
                try {
                    arl = mosum_arl_std(mid, window);
                } catch (const std::domain_error&) {
                    lo = mid;
                    continue;
                }
                (arl < want_s ? lo : hi) = mid;
            }
            const double h1 = 0.5 * (lo + hi);
            const auto ps = empirical_power_mosum_window(
                h1, amplitude, window, signal, nu, nu - window + 1, nu - window + 2 * signal - 1,
                opts.reps, opts.seed ^ 0xA11CEULL);
            out << static_cast<double>(signal) / static_cast<double>(window) << ',' << window << ','
                << ps.power << ',' << ps.std_error << ',' << pz.power << ',' << pz.std_error << ','
                << pv.power << ',' << pv.std_error << "\n";
        }
        return 0;
    }
    throw ConfigError("scenario must be fig8|fig9|fig12|fig13");
}

int cmd_pressure_demo(const CommonOptions& opts, std::int64_t length, const std::string& alarms_path) {
    PressureDemoConfig config;
    const WindowArg window = parse_window(opts.window);
    if (window.is_range) throw ConfigError("pressure-demo takes a single MOSUM window length");
    config.window = window.mosum;
    if (opts.has_target()) config.target_arl = opts.target_arl;
    config.seed = opts.seed;
    if (length > 0) config.length = length;
    config.mu = opts.mu;
    config.sigma = opts.sigma;

    const PressureDemoResult result = run_pressure_demo(config);

    std::ofstream file;
    std::ostream& out = open_output(opts, file);
    out.precision(10);
    out << "index,recorded,carrier,residual,statistic,threshold\n";
    for (std::size_t i = 0; i < result.recorded.size(); ++i) {
        out << i + 1 << ',' << result.recorded[i] << ',' << result.carrier[i] << ','
            << result.residual[i] << ',';
        if (std::isnan(result.statistic[i])) {
            out << "";
        } else {
            out << result.statistic[i];
        }
        out << ',' << result.threshold << "\n";
    }

    std::ofstream alarm_file;
    std::ostream* alarm_out = &std::cout;
    if (!alarms_path.empty()) {
        alarm_file.open(alarms_path);
        if (!alarm_file) throw ConfigError("cannot open alarms file '" + alarms_path + "'");
        alarm_out = &alarm_file;
    }
    for (const auto& alarm : result.alarms) (*alarm_out) << alarm_to_json(alarm).dump() << "\n";
    json summary{{"clusters", json::array()},
                 {"threshold", result.threshold},
                 {"threshold_std", result.threshold_std},
                 {"window", config.window},
                 {"target_arl", config.target_arl},
                 {"seed", config.seed}};
    for (const auto& c : result.clusters)
        summary["clusters"].push_back(json{{"first_n", c.first_n}, {"last_n", c.last_n}, {"alarms", c.alarms}});
    (*alarm_out) << summary.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential change-point detection toolkit"};
    app.require_subcommand(1);

    CommonOptions opts;
    // one binding set per subcommand; only the parsed one sees the config
    std::vector<std::pair<CLI::App*, OptionSet>> bindings;
    auto with_common = [&](CLI::App* cmd) {
        bindings.emplace_back(cmd, OptionSet{});
        add_common(cmd, opts, bindings.back().second);
        return cmd;
    };

    auto* detect = with_common(app.add_subcommand("detect", "Stream observations through a detector"));
    auto* calibrate =
        with_common(app.add_subcommand("calibrate", "Find the threshold for a target ARL"));
    auto* arl = with_common(
        app.add_subcommand("arl", "ARL at a threshold: Monte Carlo plus approximations"));

    int table_id = 1;
    auto* tables = with_common(app.add_subcommand("tables", "Reproduce the run-length tables (CSV)"));
    tables->add_option("--which", table_id, "Table number 1..5")->required();

    std::string scenario;
    auto* curves =
        with_common(app.add_subcommand("power-curves", "Detection power data series (CSV)"));
    curves->add_option("--scenario", scenario, "fig8|fig9|fig12|fig13")->required();

    std::int64_t demo_length = 0;
    std::string alarms_path;
    auto* demo =
        with_common(app.add_subcommand("pressure-demo", "Synthetic hold-period monitoring demo"));
    demo->add_option("--length", demo_length, "Record length");
    demo->add_option("--alarms", alarms_path, "Write alarm records here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        for (auto& [cmd, set] : bindings)
            if (cmd->parsed()) set.apply_config(opts.config_file);
        if (detect->parsed()) return cmd_detect(opts);
        if (calibrate->parsed()) return cmd_calibrate(opts);
        if (arl->parsed()) return cmd_arl(opts);
        if (tables->parsed()) return cmd_tables(table_id, opts);
        if (curves->parsed()) return cmd_power_curves(scenario, opts);
        if (demo->parsed()) return cmd_pressure_demo(opts, demo_length, alarms_path);
    } catch (const ParseError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitParse;
    } catch (const ConfigError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& err) {
        std::cerr << "numerical failure: " << err.what() << "\n";
        return kExitNumerical;
    }
    return kExitConfig;
}
