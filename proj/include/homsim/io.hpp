#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "homsim/analysis.hpp"
#include "homsim/errors.hpp"
#include "homsim/event_sim.hpp"
#include "homsim/interference.hpp"

namespace homsim {

namespace detail {

inline std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw AnalysisError("io: cannot open '" + path + "' for writing");
    return out;
}

inline std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw AnalysisError("io: cannot open '" + path + "' for reading");
    return in;
}

}  // namespace detail

// --------------------------------------------------------------------------
// Joint-density curves

inline void write_density_curve_csv(const JointDensityCurve& curve, const std::string& path) {
    auto out = detail::open_out(path);
    out << "tau_ns,p_cross_per_ns,p_same_per_ns\n";
    out << std::setprecision(12);
    for (std::size_t i = 0; i < curve.tau.size(); ++i)
        out << curve.tau[i] * 1e9 << ',' << curve.cross_detector[i] * 1e-9 << ','
            << curve.same_detector[i] * 1e-9 << '\n';
}

inline JointDensityCurve read_density_curve_csv(const std::string& path) {
    auto in = detail::open_in(path);
    JointDensityCurve curve;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1) continue;  // header
        if (line.empty()) continue;
        std::istringstream ls(line);
        double tau_ns, cross_per_ns, same_per_ns;
        char c1, c2;
        if (!(ls >> tau_ns >> c1 >> cross_per_ns >> c2 >> same_per_ns) || c1 != ',' || c2 != ',')
            throw AnalysisError("io: malformed row at " + path + ":" + std::to_string(lineno));
        curve.tau.push_back(tau_ns * 1e-9);
        curve.cross_detector.push_back(cross_per_ns * 1e9);
        curve.same_detector.push_back(same_per_ns * 1e9);
    }
    return curve;
}

// --------------------------------------------------------------------------
// Outcome distributions

inline nlohmann::json outcome_distribution_json(const OutcomeDistribution& dist) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [label, w] : dist.weights) j[label] = w;
    return j;
}

inline void write_outcome_distribution_json(const OutcomeDistribution& dist,
                                            const std::string& path) {
    auto out = detail::open_out(path);
    out << outcome_distribution_json(dist).dump(2) << '\n';
}

// --------------------------------------------------------------------------
// Timestamp streams

inline void write_stream_csv(const TimestampStream& s, const std::string& path) {
    auto out = detail::open_out(path);
    out << "detector,cycle_index,timestamp_ps\n";
    const char det = s.detector == Detector::C ? 'C' : 'D';
    for (std::size_t i = 0; i < s.timestamp_ps.size(); ++i)
        out << det << ',' << s.cycle_index[i] << ',' << s.timestamp_ps[i] << '\n';
}

inline TimestampStream read_stream_csv(const std::string& path) {
    auto in = detail::open_in(path);
    TimestampStream s;
    std::string line;
    int lineno = 0;
    bool detector_set = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1) continue;  // header
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string det_str;
        if (!std::getline(ls, det_str, ','))
            throw AnalysisError("io: malformed row at " + path + ":" + std::to_string(lineno));
        std::int64_t cycle, ts;
        char comma;
        if (!(ls >> cycle >> comma >> ts) || comma != ',')
            throw AnalysisError("io: malformed row at " + path + ":" + std::to_string(lineno));
        if (det_str != "C" && det_str != "D")
            throw AnalysisError("io: unknown detector '" + det_str + "' at " + path + ":" +
                                std::to_string(lineno));
        const Detector det = det_str == "C" ? Detector::C : Detector::D;
        if (!detector_set) {
            s.detector = det;
            detector_set = true;
        } else if (det != s.detector) {
            throw AnalysisError("io: mixed detectors in one stream at " + path + ":" +
                                std::to_string(lineno));
        }
        s.cycle_index.push_back(cycle);
        s.timestamp_ps.push_back(ts);
    }
    return s;
}

// Binary layout: magic "HOMTS1\0", detector byte, count, then count pairs of
// little-endian int64 (cycle_index, timestamp_ps).
inline void write_stream_binary(const TimestampStream& s, const std::string& path) {
    auto out = detail::open_out(path, std::ios::binary);
    const char magic[7] = {'H', 'O', 'M', 'T', 'S', '1', '\0'};
    out.write(magic, sizeof(magic));
    const char det = s.detector == Detector::C ? 'C' : 'D';
    out.write(&det, 1);
    const std::uint64_t n = s.timestamp_ps.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    for (std::size_t i = 0; i < s.timestamp_ps.size(); ++i) {
        out.write(reinterpret_cast<const char*>(&s.cycle_index[i]), sizeof(std::int64_t));
        out.write(reinterpret_cast<const char*>(&s.timestamp_ps[i]), sizeof(std::int64_t));
    }
}

inline TimestampStream read_stream_binary(const std::string& path) {
    auto in = detail::open_in(path, std::ios::binary);
    char magic[7];
    in.read(magic, sizeof(magic));
    if (!in || std::string(magic, 6) != "HOMTS1")
        throw AnalysisError("io: '" + path + "' is not a timestamp stream file");
    char det;
    in.read(&det, 1);
    if (!in || (det != 'C' && det != 'D'))
        throw AnalysisError("io: bad detector byte in '" + path + "'");
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!in) throw AnalysisError("io: truncated stream file '" + path + "'");
    TimestampStream s;
    s.detector = det == 'C' ? Detector::C : Detector::D;
    s.cycle_index.resize(n);
    s.timestamp_ps.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        in.read(reinterpret_cast<char*>(&s.cycle_index[i]), sizeof(std::int64_t));
        in.read(reinterpret_cast<char*>(&s.timestamp_ps[i]), sizeof(std::int64_t));
    }
    if (!in) throw AnalysisError("io: truncated stream file '" + path + "'");
    return s;
}

// Auto-detects binary vs CSV by the magic bytes.
inline TimestampStream read_stream(const std::string& path) {
    {
        auto in = detail::open_in(path, std::ios::binary);
        char magic[6] = {};
        in.read(magic, sizeof(magic));
        if (in && std::string(magic, 6) == "HOMTS1") return read_stream_binary(path);
    }
    return read_stream_csv(path);
}

// --------------------------------------------------------------------------
// Ground-truth log (JSON lines)

inline void write_ground_truth_jsonl(const std::vector<GroundTruthEntry>& log,
                                     const std::string& path) {
    auto out = detail::open_out(path);
    for (const auto& e : log) {
        nlohmann::json j{{"cycle", e.cycle},
                         {"outcome", e.outcome},
                         {"t_first_ns", e.t_first * 1e9},
                         {"t_second_ns", e.t_second * 1e9},
                         {"coherent", e.coherent},
                         {"phi_eff", e.phi_eff},
                         {"switched", e.switched},
                         {"steering_violation", e.steering_violation}};
        out << j.dump() << '\n';
    }
}

inline std::vector<GroundTruthEntry> read_ground_truth_jsonl(const std::string& path) {
    auto in = detail::open_in(path);
    std::vector<GroundTruthEntry> log;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw AnalysisError("io: malformed row at " + path + ":" + std::to_string(lineno));
        }
        GroundTruthEntry e;
        e.cycle = j.at("cycle").get<std::int64_t>();
        e.outcome = j.at("outcome").get<std::string>();
        e.t_first = j.at("t_first_ns").get<double>() * 1e-9;
        e.t_second = j.at("t_second_ns").get<double>() * 1e-9;
        e.coherent = j.at("coherent").get<bool>();
        e.phi_eff = j.at("phi_eff").get<double>();
        e.switched = j.at("switched").get<bool>();
        e.steering_violation = j.at("steering_violation").get<bool>();
        log.push_back(e);
    }
    return log;
}

// --------------------------------------------------------------------------
// Analysis results

inline void write_histogram_csv(const SlidingHistogram& h, const std::string& path) {
    auto out = detail::open_out(path);
    out << "tau_ns,counts,signal_counts,p_per_ns\n";
    out << std::setprecision(12);
    for (std::size_t i = 0; i < h.centers.size(); ++i)
        out << h.centers[i] * 1e9 << ',' << h.counts[i] << ',' << h.signal_counts[i] << ','
            << h.values[i] * 1e-9 << '\n';
}

inline void write_matrix_csv(const std::map<std::string, double>& matrix,
                             const std::string& path) {
    auto out = detail::open_out(path);
    out << "quadrant,probability\n";
    out << std::setprecision(12);
    for (const auto& [k, v] : matrix) out << k << ',' << v << '\n';
}

inline nlohmann::json gate_fit_json(const GateFit& fit) {
    return {{"a", fit.a},          {"b", fit.b},          {"c", fit.c},
            {"p1_ns", fit.p1 * 1e9}, {"p2_ns", fit.p2 * 1e9}, {"p3_ns", fit.p3 * 1e9},
            {"p4_ns", fit.p4 * 1e9}, {"residual_norm", fit.residual_norm}};
}

inline nlohmann::json analysis_summary_json(const AnalysisResult& res) {
    nlohmann::json j;
    j["fit_c"] = gate_fit_json(res.fit_c);
    j["fit_d"] = gate_fit_json(res.fit_d);
    j["n_correlations"] = res.correlations.pairs.size();
    j["n2_pairs"] = res.n2_pairs;
    j["norm_total"] = res.norm_total;
    j["cross_bin"] = res.cross_bin;
    j["cross_bin_counts"] = res.cross_bin_counts;
    j["quadrant_background"] = res.quadrant_background;
    j["signal_total"] = res.signal_total;
    j["background_total"] = res.background_total;
    j["signal_cross_interval"] = res.signal_cross_interval;
    j["snr"] = res.snr_value;
    return j;
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
    auto out = detail::open_out(path);
    out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::string& path) {
    auto in = detail::open_in(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw AnalysisError("io: malformed JSON in '" + path + "': " + e.what());
    }
    return j;
}

}  // namespace homsim
