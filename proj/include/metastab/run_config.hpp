#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "metastab/kmc.hpp"

namespace metastab {

/// Experiment settings read from a JSON file; command-line flags override fields afterwards.
struct RunConfig {
    std::string experiment;
    std::vector<int> dims{8, 8};
    std::string bc = "minus";
    std::string h = "sqrt2/2";
    std::vector<double> beta{3.0};
    std::size_t replicas = 1;
    std::uint64_t seed = 1;
    std::uint64_t cap_events = 1ull << 40;
    double cap_time = std::numeric_limits<double>::infinity();
    int block_side = 0;              // stands in for ln beta
    double eligibility_defect = 2;   // stands in for 2 ln ln beta
    int stc_threshold_D = 6;
    std::string out_dir;
    std::string mode = "rejection-free";
    unsigned threads = 0;

    int d = 2;                       // constants, isoperimetry, growth model
    int vmax = 0;
    double growth_gamma = 1.5;
    double growth_kappa_prev = 0.0;
    std::vector<double> L_grid;
    std::string initial = "minus";   // simulate / infection: minus, plus
    std::string stop = "all_plus";   // simulate: all_plus, nucleation, never, volume:<m>, spin:<x>

    [[nodiscard]] double first_beta() const { return beta.at(0); }
    [[nodiscard]] MagneticField field() const { return MagneticField::parse(h); }
    [[nodiscard]] BoundaryCondition boundary() const { return BoundaryCondition::parse(bc); }
    [[nodiscard]] BoxGeometry geometry() const { return BoxGeometry(dims); }
    [[nodiscard]] LatticeContext context() const { return LatticeContext(geometry(), boundary(), field()); }
    [[nodiscard]] Mode kmc_mode() const { return parse_mode(mode); }
    [[nodiscard]] EvolveOptions caps() const {
        EvolveOptions o;
        o.event_cap = cap_events;
        o.time_cap = cap_time;
        return o;
    }

    void validate() const {
        if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
        if (beta.empty()) throw std::invalid_argument("beta list is empty");
        for (double b : beta)
            if (!(b > 0)) throw std::invalid_argument("beta values must be positive");
        if (dims.empty()) throw std::invalid_argument("dims is empty");
        for (int s : dims)
            if (s < 1) throw std::invalid_argument("box sides must be >= 1");
        if (!(cap_time > 0)) throw std::invalid_argument("caps.time must be positive");
        if (cap_events < 1) throw std::invalid_argument("caps.events must be >= 1");
        if (block_side < 0) throw std::invalid_argument("block_side must be >= 0");
        if (eligibility_defect < 0) throw std::invalid_argument("eligibility_defect must be >= 0");
        if (stc_threshold_D < 0) throw std::invalid_argument("stc_threshold_D must be >= 0");
        (void)field();
        (void)boundary();
        (void)kmc_mode();
    }

    static RunConfig from_json(const nlohmann::json& j) {
        static const std::set<std::string> known{
            "experiment", "dims", "bc", "h", "beta", "replicas", "seed", "caps", "block_side", "eligibility_defect",
            "stc_threshold_D", "out_dir", "mode", "threads", "d", "vmax", "growth", "L_grid", "initial", "stop"};
        if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
        for (const auto& [k, v] : j.items())
            if (!known.count(k)) throw std::invalid_argument("unknown config key '" + k + "'");
        RunConfig c;
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) j.at(key).get_to(field);
        };
        get("experiment", c.experiment);
        get("dims", c.dims);
        get("bc", c.bc);
        if (j.contains("h")) c.h = j.at("h").is_string() ? j.at("h").get<std::string>() : j.at("h").dump();
        if (j.contains("beta")) {
            if (j.at("beta").is_array())
                j.at("beta").get_to(c.beta);
            else
                c.beta = {j.at("beta").get<double>()};
        }
        get("replicas", c.replicas);
        get("seed", c.seed);
        if (j.contains("caps")) {
            const auto& caps = j.at("caps");
            for (const auto& [k, v] : caps.items())
                if (k != "events" && k != "time") throw std::invalid_argument("unknown caps key '" + k + "'");
            if (caps.contains("events")) caps.at("events").get_to(c.cap_events);
            if (caps.contains("time")) caps.at("time").get_to(c.cap_time);
        }
        get("block_side", c.block_side);
        get("eligibility_defect", c.eligibility_defect);
        get("stc_threshold_D", c.stc_threshold_D);
        get("out_dir", c.out_dir);
        get("mode", c.mode);
        get("threads", c.threads);
        get("d", c.d);
        get("vmax", c.vmax);
        if (j.contains("growth")) {
            const auto& g = j.at("growth");
            if (g.contains("gamma")) g.at("gamma").get_to(c.growth_gamma);
            if (g.contains("kappa_prev")) {
                const auto& k = g.at("kappa_prev");
                c.growth_kappa_prev = k.is_string() && k.get<std::string>() == "inf" ? std::numeric_limits<double>::infinity()
                                                                                     : k.get<double>();
            }
        }
        get("L_grid", c.L_grid);
        get("initial", c.initial);
        get("stop", c.stop);
        return c;
    }

    static RunConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument("config '" + path + "' is not valid JSON: " + e.what());
        }
        return from_json(j);
    }

    [[nodiscard]] nlohmann::json to_json() const {
        nlohmann::json j;
        j["experiment"] = experiment;
        j["dims"] = dims;
        j["bc"] = bc;
        j["h"] = h;
        j["beta"] = beta;
        j["replicas"] = replicas;
        j["seed"] = seed;
        j["caps"]["events"] = cap_events;
        if (std::isfinite(cap_time)) j["caps"]["time"] = cap_time;
        j["block_side"] = block_side;
        j["eligibility_defect"] = eligibility_defect;
        j["stc_threshold_D"] = stc_threshold_D;
        j["mode"] = mode;
        return j;
    }
};

}  // namespace metastab
