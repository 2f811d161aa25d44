#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "metastab/config_io.hpp"
#include "metastab/constants.hpp"
#include "metastab/experiments.hpp"
#include "metastab/isoperimetry.hpp"
#include "metastab/landscape.hpp"

namespace metastab {

/// Shortest text that reads back to the same double.
inline std::string num(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    for (int p = 6; p <= 17; ++p) {
        std::snprintf(buf, sizeof buf, "%.*g", p, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

inline nlohmann::json json_num(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(num(x)); }

/// Files gathered in memory and written together once everything succeeded.
class OutputSet {
public:
    void add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }
    [[nodiscard]] const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

    /// Writes each file to a temporary name, then renames them all into place.
    void commit(const std::string& dir) const {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        std::vector<std::pair<fs::path, fs::path>> staged;
        for (const auto& [name, content] : files_) {
            const fs::path final_path = fs::path(dir) / name;
            const fs::path tmp = fs::path(dir) / (name + ".partial");
            std::ofstream out(tmp, std::ios::binary);
            out << content;
            if (!out) {
                for (const auto& s : staged) fs::remove(s.first);
                fs::remove(tmp);
                throw std::runtime_error("cannot write " + tmp.string());
            }
            staged.emplace_back(tmp, final_path);
        }
        for (const auto& [tmp, final_path] : staged) fs::rename(tmp, final_path);
    }

private:
    std::vector<std::pair<std::string, std::string>> files_;
};

// ---------------------------------------------------------------------------
// Renderers.

inline std::string constants_csv(const CriticalConstants& cc) {
    std::ostringstream o;
    o << "n,quantity,value\n";
    o << "0,h," << cc.h.token() << "\n";
    for (int n = 1; n <= cc.d; ++n) {
        const auto& c = cc.at(n);
        o << n << ",l_c," << c.l_c << "\n";
        o << n << ",m," << c.m << "\n";
        o << n << ",gamma," << c.gamma << "\n";
        o << n << ",gamma_value," << num(c.gamma_value) << "\n";
        o << n << ",kappa," << num(c.kappa) << "\n";
        o << n << ",L," << num(c.L) << "\n";
        o << n << ",box_side," << c.box_side << "\n";
        o << n << ",argmax_tie," << c.argmax_tie << "\n";
        o << n << ",cube_ok," << c.cube_ok << "\n";
        o << n << ",control_ok," << c.control_ok << "\n";
        if (c.oracle_match) o << n << ",oracle_match," << *c.oracle_match << "\n";
    }
    return o.str();
}

inline std::string pattern_of(const LandscapeGraph& G, StateId s) {
    if (!G.context()) return std::to_string(G.pattern(s));
    std::string p;
    const auto c = Configuration::from_mask(G.context()->geometry(), G.pattern(s));
    for (Site x = 0; x < c.size(); ++x) p += c.plus(x) ? '+' : '-';
    return p;
}

inline std::string states_csv(const LandscapeGraph& G) {
    std::ostringstream o;
    o << "state,pattern,bonds,pluses,value\n";
    for (StateId s = 0; s < G.size(); ++s) {
        const auto& e = G.energy(s);
        o << s << "," << pattern_of(G, s) << "," << e.bonds << "," << e.pluses << "," << num(G.field().value_of(e)) << "\n";
    }
    return o.str();
}

inline std::string partition_csv(const CyclePartition& P) {
    std::ostringstream o;
    o << "state,block\n";
    for (std::size_t s = 0; s < P.block_of.size(); ++s)
        if (P.block_of[s] >= 0) o << s << "," << P.block_of[s] << "\n";
    return o.str();
}

inline std::string blocks_csv(const LandscapeGraph& G, const CyclePartition& P) {
    std::ostringstream o;
    o << "block,size,exit_bonds,exit_pluses,bottom_pattern,depth_bonds,depth_pluses,verified\n";
    auto pair = [](const EnergyValue& e) {
        return e.finite() ? std::to_string(e.bonds) + "," + std::to_string(e.pluses) : std::string("inf,inf");
    };
    for (std::size_t b = 0; b < P.blocks.size(); ++b) {
        const auto& B = P.blocks[b];
        std::string bottom;
        for (std::size_t i = 0; i < B.bottom.size(); ++i) bottom += (i ? "|" : "") + pattern_of(G, B.bottom[i]);
        o << b << "," << B.states.size() << "," << pair(B.exit) << "," << bottom << "," << pair(B.depth) << ","
          << B.verified << "\n";
    }
    return o.str();
}

inline std::string isoperimetry_csv(const std::vector<IsoperimetricRow>& rows) {
    std::ostringstream o;
    o << "d,v,min_perimeter,simplified_bound,cube_bound\n";
    for (const auto& r : rows)
        o << r.d << "," << r.v << "," << r.min_perimeter << "," << num(r.simplified_bound) << "," << r.cube_bound << "\n";
    return o.str();
}

inline std::string trajectory_csv(const Trajectory& tr) {
    std::ostringstream o;
    o << "time,site,spin\n";
    for (const auto& e : tr.events) o << num(e.time) << "," << e.site << "," << (e.plus ? 1 : -1) << "\n";
    return o.str();
}

inline nlohmann::json trajectory_summary(const Trajectory& tr, std::uint64_t seed, double beta, const LatticeContext& ctx) {
    nlohmann::json j;
    j["seed"] = seed;
    j["beta"] = beta;
    j["h"] = ctx.field().token();
    j["box"] = ctx.geometry().dims();
    j["bc"] = ctx.boundary().str();
    j["stop_reason"] = to_string(tr.reason);
    j["hitting_time"] = tr.hit() ? json_num(tr.end_time) : nlohmann::json(nullptr);
    j["end_time"] = json_num(tr.end_time);
    j["flips"] = tr.flips;
    j["final_volume"] = tr.final_config.volume();
    return j;
}

inline std::string results_csv(const std::vector<ReplicaRow>& rows) {
    std::ostringstream o;
    o << "seed,beta,hitting_time,censored,nucleation_time,nucleation_censored,flips\n";
    for (const auto& r : rows)
        o << r.seed << "," << num(r.beta) << "," << num(r.hitting_time) << "," << r.censored << "," << num(r.nucleation_time)
          << "," << r.nucleation_censored << "," << r.flips << "\n";
    return o.str();
}

inline nlohmann::json fit_json(const ArrheniusFit& f, double target) {
    nlohmann::json j;
    j["slope"] = f.slope;
    j["intercept"] = f.intercept;
    j["ci_low"] = f.ci_low;
    j["ci_high"] = f.ci_high;
    j["target"] = target;
    j["relative_error"] = std::abs(f.slope - target) / target;
    j["betas"] = f.betas;
    j["log_means"] = f.log_means;
    j["excluded_betas"] = f.excluded;
    j["low_confidence"] = f.low_confidence;
    return j;
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

}  // namespace metastab
