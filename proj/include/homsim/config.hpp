#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "homsim/analysis.hpp"
#include "homsim/errors.hpp"
#include "homsim/event_sim.hpp"

namespace homsim {

enum class OutputFormat { Csv, Json };
enum class StreamFormat { Csv, Binary };

// Flat, typed key=value run configuration with explicit units in key names.
// Defaults reproduce the reference experiment: 450 ns photon in a 1 MHz
// cycle, 97 ns feedback latency, 81 ps time tagging.
struct RunConfig {
    std::string scenario = "a";  // a|b|c|d
    double mu = 1.0;
    double repetition_period_ns = 1000.0;
    double photon_window_ns = 450.0;
    double repump_window_ns = 550.0;
    double photon_length_ns = 450.0;
    double feedback_latency_ns = 97.0;
    double delay_transmission = 0.5;
    double photon_emission_probability = 0.5;
    double detector_efficiency = 1.0;
    double dark_rate_per_s = 0.0;
    double tdc_resolution_ps = 81.0;
    std::uint64_t seed = 1;
    std::int64_t n_cycles = 100000;
    double sliding_width_ns = 50.0;
    double sliding_step_ns = 10.0;
    int fold_bins = 250;
    double compare_chi2_max = 2.0;  // sim-vs-theory comparison tolerance
    std::string output_dir = "out";
    std::string output_format = "csv";    // csv|json for result tables
    std::string stream_format = "csv";    // csv|binary for timestamp files

    static const std::vector<std::string>& known_keys() {
        static const std::vector<std::string> keys = {
            "scenario",
            "mu",
            "repetition_period_ns",
            "photon_window_ns",
            "repump_window_ns",
            "photon_length_ns",
            "feedback_latency_ns",
            "delay_transmission",
            "photon_emission_probability",
            "detector_efficiency",
            "dark_rate_per_s",
            "tdc_resolution_ps",
            "seed",
            "n_cycles",
            "sliding_width_ns",
            "sliding_step_ns",
            "fold_bins",
            "compare_chi2_max",
            "output_dir",
            "output_format",
            "stream_format",
        };
        return keys;
    }

    void set(const std::string& key, const std::string& value);

    ScenarioKind scenario_kind() const {
        if (scenario == "a") return ScenarioKind::Perpendicular;
        if (scenario == "b") return ScenarioKind::ParallelPhi0;
        if (scenario == "c") return ScenarioKind::ParallelPhiPi;
        if (scenario == "d") return ScenarioKind::Feedback;
        throw ConfigError("config: scenario must be one of a|b|c|d, got '" + scenario + "'");
    }

    Scenario make_scenario() const {
        return Scenario::make(scenario_kind(), mu, photon_length_ns * 1e-9,
                              feedback_latency_ns * 1e-9);
    }

    ExperimentConfig make_experiment() const {
        ExperimentConfig cfg;
        cfg.repetition_period = repetition_period_ns * 1e-9;
        cfg.photon_window = photon_window_ns * 1e-9;
        cfg.repump_window = repump_window_ns * 1e-9;
        cfg.delay_transmission = delay_transmission;
        cfg.photon_emission_probability = photon_emission_probability;
        cfg.detector_efficiency = detector_efficiency;
        cfg.dark_rate = dark_rate_per_s;
        cfg.tdc_resolution = tdc_resolution_ps * 1e-12;
        cfg.rng_seed = seed;
        cfg.scenario = make_scenario();
        cfg.validate();
        return cfg;
    }

    AnalysisConfig make_analysis() const {
        AnalysisConfig cfg;
        cfg.repetition_period = repetition_period_ns * 1e-9;
        cfg.delta_t = photon_length_ns * 1e-9;
        cfg.eta_delay = delay_transmission;
        cfg.sliding_width = sliding_width_ns * 1e-9;
        cfg.sliding_step = sliding_step_ns * 1e-9;
        cfg.fold_bins = fold_bins;
        return cfg;
    }

    OutputFormat result_format() const {
        if (output_format == "csv") return OutputFormat::Csv;
        if (output_format == "json") return OutputFormat::Json;
        throw ConfigError("config: output_format must be csv or json");
    }

    StreamFormat timestamp_format() const {
        if (stream_format == "csv") return StreamFormat::Csv;
        if (stream_format == "binary") return StreamFormat::Binary;
        throw ConfigError("config: stream_format must be csv or binary");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' needs a number, got '" + value + "'");
    }
    if (pos != value.size())
        throw ConfigError("config: trailing characters in value for '" + key + "'");
    return v;
}

inline std::int64_t parse_int(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    std::int64_t v = 0;
    try {
        v = std::stoll(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' needs an integer, got '" + value + "'");
    }
    if (pos != value.size())
        throw ConfigError("config: trailing characters in value for '" + key + "'");
    return v;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' needs an unsigned integer, got '" +
                          value + "'");
    }
    if (pos != value.size())
        throw ConfigError("config: trailing characters in value for '" + key + "'");
    return v;
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "scenario") scenario = value;
    else if (key == "mu") mu = detail::parse_double(key, value);
    else if (key == "repetition_period_ns") repetition_period_ns = detail::parse_double(key, value);
    else if (key == "photon_window_ns") photon_window_ns = detail::parse_double(key, value);
    else if (key == "repump_window_ns") repump_window_ns = detail::parse_double(key, value);
    else if (key == "photon_length_ns") photon_length_ns = detail::parse_double(key, value);
    else if (key == "feedback_latency_ns") feedback_latency_ns = detail::parse_double(key, value);
    else if (key == "delay_transmission") delay_transmission = detail::parse_double(key, value);
    else if (key == "photon_emission_probability")
        photon_emission_probability = detail::parse_double(key, value);
    else if (key == "detector_efficiency") detector_efficiency = detail::parse_double(key, value);
    else if (key == "dark_rate_per_s") dark_rate_per_s = detail::parse_double(key, value);
    else if (key == "tdc_resolution_ps") tdc_resolution_ps = detail::parse_double(key, value);
    else if (key == "seed") seed = detail::parse_uint(key, value);
    else if (key == "n_cycles") n_cycles = detail::parse_int(key, value);
    else if (key == "sliding_width_ns") sliding_width_ns = detail::parse_double(key, value);
    else if (key == "sliding_step_ns") sliding_step_ns = detail::parse_double(key, value);
    else if (key == "fold_bins") fold_bins = static_cast<int>(detail::parse_int(key, value));
    else if (key == "compare_chi2_max") compare_chi2_max = detail::parse_double(key, value);
    else if (key == "output_dir") output_dir = value;
    else if (key == "output_format") output_format = value;
    else if (key == "stream_format") stream_format = value;
    else throw ConfigError("config: unknown key '" + key + "'");
}

// Parses "key = value" lines; '#' starts a comment; blank lines ignored.
inline RunConfig parse_config_text(std::istream& in, RunConfig base = {}) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string trimmed = detail::trim(line);
        if (trimmed.empty()) continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) +
                              " is not of the form key = value");
        const std::string key = detail::trim(trimmed.substr(0, eq));
        const std::string value = detail::trim(trimmed.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config: empty key on line " + std::to_string(lineno));
        base.set(key, value);
    }
    return base;
}

inline RunConfig load_config_file(const std::string& path, RunConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    return parse_config_text(in, std::move(base));
}

// Applies "key=value" override strings (e.g. from the command line).
inline void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
    for (const std::string& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: override '" + ov + "' is not key=value");
        cfg.set(detail::trim(ov.substr(0, eq)), detail::trim(ov.substr(eq + 1)));
    }
}

}  // namespace homsim
