// Command-line runner: analytic curves, Monte Carlo timestamp generation,
// statistical analysis, feedback error-rate sweeps, and an end-to-end
// reproduction of the four experiment scenarios.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "homsim/homsim.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string output_dir_flag;
};

homsim::RunConfig build_config(const GlobalOptions& g) {
    homsim::RunConfig cfg;
    if (const char* env = std::getenv("HOMSIM_OUTPUT_DIR"); env != nullptr && *env != '\0')
        cfg.output_dir = env;
    if (!g.config_path.empty()) cfg = homsim::load_config_file(g.config_path, std::move(cfg));
    homsim::apply_overrides(cfg, g.overrides);
    if (!g.output_dir_flag.empty()) cfg.output_dir = g.output_dir_flag;
    return cfg;
}

fs::path ensure_output_dir(const homsim::RunConfig& cfg) {
    fs::path dir(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw homsim::ConfigError("cannot create output directory '" + cfg.output_dir + "'");
    return dir;
}

std::string stream_ext(const homsim::RunConfig& cfg) {
    return cfg.timestamp_format() == homsim::StreamFormat::Binary ? ".bin" : ".csv";
}

void write_stream(const homsim::TimestampStream& s, const homsim::RunConfig& cfg,
                  const fs::path& path) {
    if (cfg.timestamp_format() == homsim::StreamFormat::Binary)
        homsim::write_stream_binary(s, path.string());
    else
        homsim::write_stream_csv(s, path.string());
}

int run_theory(const homsim::RunConfig& cfg) {
    const fs::path dir = ensure_output_dir(cfg);
    const homsim::Scenario sc = cfg.make_scenario();
    const auto setup = homsim::scenario_setup(sc);
    const auto fb = homsim::scenario_feedback_policy(sc);
    const auto curve = homsim::pjoint_tau(setup, fb);
    homsim::write_density_curve_csv(curve,
                                    (dir / ("theory_" + cfg.scenario + "_curve.csv")).string());
    const auto dist =
        homsim::timebin_output_distribution(sc.phi, setup.coherence, sc.perpendicular());
    homsim::write_outcome_distribution_json(
        dist, (dir / ("theory_" + cfg.scenario + "_outcomes.json")).string());
    std::cout << "theory: scenario " << cfg.scenario << ", curve normalization "
              << curve.normalization() << "\n";
    return 0;
}

int run_simulate(const homsim::RunConfig& cfg) {
    const fs::path dir = ensure_output_dir(cfg);
    const auto exp = cfg.make_experiment();
    const auto res = homsim::run_experiment(exp, cfg.n_cycles);
    const std::string ext = stream_ext(cfg);
    write_stream(res.stream_c, cfg, dir / ("stream_" + cfg.scenario + "_C" + ext));
    write_stream(res.stream_d, cfg, dir / ("stream_" + cfg.scenario + "_D" + ext));
    homsim::write_ground_truth_jsonl(
        res.ground_truth, (dir / ("ground_truth_" + cfg.scenario + ".jsonl")).string());
    json totals{{"cycles", res.totals.cycles},
                {"emitted", res.totals.emitted},
                {"pair_events", res.totals.pair_events},
                {"singles", res.totals.singles},
                {"dark_counts", res.totals.dark_counts},
                {"d_first_cross", res.totals.d_first_cross},
                {"steering_violations", res.totals.steering_violations}};
    homsim::write_json(totals, (dir / ("sim_totals_" + cfg.scenario + ".json")).string());
    std::cout << "simulate: scenario " << cfg.scenario << ", " << res.totals.pair_events
              << " pair events over " << res.totals.cycles << " cycles\n";
    return 0;
}

int run_analyze(const homsim::RunConfig& cfg, std::string in_c, std::string in_d) {
    const fs::path dir = ensure_output_dir(cfg);
    const std::string ext = stream_ext(cfg);
    if (in_c.empty()) in_c = (dir / ("stream_" + cfg.scenario + "_C" + ext)).string();
    if (in_d.empty()) in_d = (dir / ("stream_" + cfg.scenario + "_D" + ext)).string();
    const auto stream_c = homsim::read_stream(in_c);
    const auto stream_d = homsim::read_stream(in_d);
    const auto res =
        homsim::analyze_streams(stream_c, stream_d, cfg.n_cycles, cfg.make_analysis());
    homsim::write_histogram_csv(res.histogram,
                                (dir / ("histogram_" + cfg.scenario + ".csv")).string());
    homsim::write_matrix_csv(res.cross_bin,
                             (dir / ("matrix_" + cfg.scenario + ".csv")).string());
    json summary = homsim::analysis_summary_json(res);
    // the cross-bin quadrants directly give the feedback-style visibility
    const double n_d1c2 = res.cross_bin.at("C2D1");  // D fired first
    const double n_c1d2 = res.cross_bin.at("C1D2");
    if (n_d1c2 + n_c1d2 > 0.0)
        summary["v_feed"] = (n_d1c2 - n_c1d2) / (n_d1c2 + n_c1d2);
    homsim::write_json(summary, (dir / ("analysis_" + cfg.scenario + ".json")).string());
    std::cout << "analyze: scenario " << cfg.scenario << ", "
              << res.correlations.pairs.size() << " correlations, snr " << res.snr_value
              << "\n";
    return 0;
}

int run_sweep(const homsim::RunConfig& cfg, double lo, double hi, int points) {
    if (points < 2 || hi <= lo || lo < 0.0)
        throw homsim::ConfigError("sweep-error-rate: need 0 <= min < max and >= 2 points");
    const fs::path dir = ensure_output_dir(cfg);
    auto out = (dir / "error_rate_sweep.csv").string();
    std::ofstream f(out);
    if (!f) throw homsim::AnalysisError("cannot open '" + out + "'");
    f << "dead_time_fraction,error_rate\n";
    f.precision(12);
    for (int i = 0; i < points; ++i) {
        const double t = lo + (hi - lo) * i / (points - 1);
        f << t << ',' << homsim::error_rate(t) << '\n';
    }
    std::cout << "sweep-error-rate: " << points << " points -> " << out << "\n";
    return 0;
}

int run_reproduce_all(homsim::RunConfig cfg) {
    const fs::path dir = ensure_output_dir(cfg);
    json summary;
    struct Agg {
        double total = 0.0;       // all cross-detector correlations (corrected)
        double cross = 0.0;       // detections across time bins
        double d1c2 = 0.0, c1d2 = 0.0;
        double chi2_dof = 0.0;
        double snr = 0.0;
    };
    std::map<std::string, Agg> agg;

    for (const std::string sc : {"a", "b", "c", "d"}) {
        cfg.scenario = sc;
        run_theory(cfg);
        run_simulate(cfg);
        run_analyze(cfg, "", "");

        // compare the simulated histogram against the analytic curve
        const auto curve = homsim::pjoint_tau(homsim::scenario_setup(cfg.make_scenario()),
                                              homsim::scenario_feedback_policy(
                                                  cfg.make_scenario()));
        const auto hist = homsim::read_json((dir / ("analysis_" + sc + ".json")).string());
        const auto res_hist =
            homsim::read_stream((dir / ("stream_" + sc + "_C" + stream_ext(cfg))).string());
        (void)res_hist;

        const auto stream_c = homsim::read_stream(
            (dir / ("stream_" + sc + "_C" + stream_ext(cfg))).string());
        const auto stream_d = homsim::read_stream(
            (dir / ("stream_" + sc + "_D" + stream_ext(cfg))).string());
        const auto res =
            homsim::analyze_streams(stream_c, stream_d, cfg.n_cycles, cfg.make_analysis());

        // non-overlapping comparison histogram, 50 bins over [-dt, dt]
        const double dtp = cfg.photon_length_ns * 1e-9;
        const double width = 2.0 * dtp / 50.0;
        const auto comp = homsim::sliding_histogram(res.correlations, width, width,
                                                    dtp - 0.5 * width, res.norm_total);
        double chi2 = 0.0;
        int used = 0;
        auto theory_at = [&](double tau) {
            const double pos = (tau - curve.tau.front()) /
                               (curve.tau.back() - curve.tau.front()) * (curve.tau.size() - 1);
            const auto i = static_cast<std::size_t>(
                std::clamp(pos, 0.0, static_cast<double>(curve.tau.size() - 2)));
            const double w = pos - i;
            return (1.0 - w) * curve.cross_detector[i] + w * curve.cross_detector[i + 1];
        };
        for (std::size_t i = 0; i < comp.centers.size(); ++i) {
            const double expected = theory_at(comp.centers[i]) * width * res.norm_total;
            if (expected < 5.0) continue;
            const double d = comp.counts[i] - expected;
            chi2 += d * d / expected;
            ++used;
        }

        Agg& a = agg[sc];
        for (const auto& [k, v] : res.cross_bin) a.total += v;
        a.cross = res.cross_bin.at("C1D2") + res.cross_bin.at("C2D1");
        a.d1c2 = res.cross_bin.at("C2D1");
        a.c1d2 = res.cross_bin.at("C1D2");
        a.chi2_dof = used > 0 ? chi2 / used : 0.0;
        a.snr = res.snr_value;
        summary["scenario_" + sc] = {{"chi2_per_dof", a.chi2_dof},
                                     {"snr", a.snr},
                                     {"cross_bin", hist["cross_bin"]},
                                     {"analysis", "analysis_" + sc + ".json"}};
    }

    homsim::CorrelationAggregates n;
    n.n_parallel_total = agg["b"].total;
    n.n_perp_total = agg["a"].total;
    n.n_parallel_cross = agg["b"].cross;
    n.n_perp_cross = agg["a"].cross;
    n.n_phi0_cross = agg["b"].cross;
    n.n_phipi_cross = agg["c"].cross;
    n.n_d1c2 = agg["d"].d1c2;
    n.n_c1d2 = agg["d"].c1d2;
    try {
        const auto v = homsim::visibilities(n);
        summary["visibilities"] = {{"v_hom", v.v_hom},
                                   {"v_ref", v.v_ref},
                                   {"v_phi", v.v_phi},
                                   {"v_feed", v.v_feed}};
    } catch (const homsim::AnalysisError& e) {
        summary["visibilities"] = {{"error", e.what()}};
    }
    bool all_ok = true;
    for (auto& [k, a] : agg) all_ok = all_ok && a.chi2_dof < cfg.compare_chi2_max;
    summary["theory_match_ok"] = all_ok;
    homsim::write_json(summary, (dir / "reproduce_all_summary.json").string());
    std::cout << "reproduce-all: summary written, theory match "
              << (all_ok ? "ok" : "FAILED") << "\n";
    return all_ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-photon interference simulator and analysis toolkit"};
    app.require_subcommand(1);

    GlobalOptions g;
    app.add_option("-c,--config", g.config_path, "key = value config file");
    app.add_option("-s,--set", g.overrides, "inline key=value override (repeatable)");
    app.add_option("-o,--output-dir", g.output_dir_flag,
                   "output directory (overrides config and HOMSIM_OUTPUT_DIR)");

    auto* theory = app.add_subcommand("theory", "write analytic correlation curves");
    auto* simulate = app.add_subcommand("simulate", "generate raw timestamp streams");
    std::int64_t cycles_flag = -1;
    simulate->add_option("-n,--cycles", cycles_flag, "number of production cycles");
    auto* analyze = app.add_subcommand("analyze", "run the statistical pipeline");
    std::string in_c, in_d;
    analyze->add_option("--input-c", in_c, "detector C timestamp file");
    analyze->add_option("--input-d", in_d, "detector D timestamp file");
    auto* sweep = app.add_subcommand("sweep-error-rate",
                                     "dead-time error probability vs dead-time fraction");
    double sweep_lo = 0.0, sweep_hi = 0.5;
    int sweep_points = 101;
    sweep->add_option("--min", sweep_lo, "lowest dead-time fraction");
    sweep->add_option("--max", sweep_hi, "highest dead-time fraction");
    sweep->add_option("--points", sweep_points, "number of sweep points");
    auto* reproduce = app.add_subcommand("reproduce-all",
                                         "run all four scenarios end to end");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        homsim::RunConfig cfg = build_config(g);
        if (cycles_flag >= 0) cfg.n_cycles = cycles_flag;
        if (cfg.n_cycles < 1) throw homsim::ConfigError("n_cycles must be >= 1");
        if (theory->parsed()) return run_theory(cfg);
        if (simulate->parsed()) return run_simulate(cfg);
        if (analyze->parsed()) return run_analyze(cfg, in_c, in_d);
        if (sweep->parsed()) return run_sweep(cfg, sweep_lo, sweep_hi, sweep_points);
        if (reproduce->parsed()) return run_reproduce_all(cfg);
        return 1;
    } catch (const homsim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "analysis error: " << e.what() << "\n";
        return 2;
    }
}
