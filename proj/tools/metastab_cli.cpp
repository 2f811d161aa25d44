// metastab: command-line front end for the metastability toolkit.

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "metastab/constants.hpp"
#include "metastab/experiments.hpp"
#include "metastab/export.hpp"
#include "metastab/isoperimetry.hpp"
#include "metastab/landscape.hpp"
#include "metastab/run_config.hpp"
#include "metastab/wgraph.hpp"

using namespace metastab;
using nlohmann::json;

namespace {

struct Flags {
    std::string config;
    std::vector<int> dims;
    std::string bc, h, mode, initial, stop, out_dir;
    std::vector<double> beta, L_grid;
    std::size_t replicas = 0;
    std::uint64_t seed = 0, cap_events = 0;
    double cap_time = 0, defect = 0, growth_gamma = 0, growth_kappa = 0;
    int block_side = 0, stc_D = 0, d = 0, vmax = 0;
    unsigned threads = 0;
    bool compounds = false, no_oracle = false;
    std::string matrix, target;
    int start = 0, count = 0, max_states = 0;
};

void add_common(CLI::App* s, Flags& f) {
    s->add_option("--config", f.config, "JSON run configuration");
    s->add_option("--dims", f.dims, "box side lengths")->delimiter('x');
    s->add_option("--bc", f.bc, "boundary: minus, plus, <n>pm");
    s->add_option("--h", f.h, "field token, e.g. sqrt2/2 or 1/2");
    s->add_option("--beta", f.beta, "inverse temperature(s)")->delimiter(',');
    s->add_option("--replicas", f.replicas);
    s->add_option("--seed", f.seed, "seed base");
    s->add_option("--cap-events", f.cap_events);
    s->add_option("--cap-time", f.cap_time);
    s->add_option("--mode", f.mode, "graphical or rejection-free");
    s->add_option("--threads", f.threads);
    s->add_option("--out", f.out_dir, "output directory");
}

RunConfig resolve(CLI::App* s, const Flags& f, const std::string& experiment) {
    RunConfig c = f.config.empty() ? RunConfig{} : RunConfig::from_file(f.config);
    c.experiment = experiment;
    auto given = [&](const char* name) { return s->get_option_no_throw(name) && s->count(name) > 0; };
    if (given("--dims")) c.dims = f.dims;
    if (given("--bc")) c.bc = f.bc;
    if (given("--h")) c.h = f.h;
    if (given("--beta")) c.beta = f.beta;
    if (given("--replicas")) c.replicas = f.replicas;
    if (given("--seed")) c.seed = f.seed;
    if (given("--cap-events")) c.cap_events = f.cap_events;
    if (given("--cap-time")) c.cap_time = f.cap_time;
    if (given("--mode")) c.mode = f.mode;
    if (given("--threads")) c.threads = f.threads;
    if (given("--out")) c.out_dir = f.out_dir;
    if (given("--block-side")) c.block_side = f.block_side;
    if (given("--defect")) c.eligibility_defect = f.defect;
    if (given("--D")) c.stc_threshold_D = f.stc_D;
    if (given("--d")) c.d = f.d;
    if (given("--vmax")) c.vmax = f.vmax;
    if (given("--gamma")) c.growth_gamma = f.growth_gamma;
    if (given("--kappa-prev")) c.growth_kappa_prev = f.growth_kappa;
    if (given("--L")) c.L_grid = f.L_grid;
    if (given("--initial")) c.initial = f.initial;
    if (given("--stop")) c.stop = f.stop;
    c.validate();
    return c;
}

/// Prints the main file to stdout, and writes the whole set when an output directory is configured.
void emit(const RunConfig& c, OutputSet& out, const std::string& main_file) {
    out.add("config.json", dump(c.to_json()));
    if (!c.out_dir.empty()) out.commit(c.out_dir);
    for (const auto& [name, content] : out.files())
        if (name == main_file) std::cout << content;
}

Configuration initial_state(const RunConfig& c) {
    if (c.initial == "minus") return Configuration(c.geometry(), false);
    if (c.initial == "plus") return Configuration(c.geometry(), true);
    throw std::invalid_argument("initial must be 'minus' or 'plus'");
}

StopPredicate stop_rule(const RunConfig& c, const LatticeContext& ctx) {
    const std::string& s = c.stop;
    if (s == "all_plus") return stop::all_plus();
    if (s == "never") return stop::never();
    if (s == "nucleation") {
        const int d = ctx.geometry().d();
        const auto cc = critical_constants(d, ctx.field(), false);
        return nucleation_predicate(ctx.field(), cc.at(d).m, cc.at(d).gamma);
    }
    if (s.rfind("volume:", 0) == 0) return stop::volume_exceeds(std::stoul(s.substr(7)));
    if (s.rfind("spin:", 0) == 0) return stop::spin_at(static_cast<Site>(std::stoul(s.substr(5))));
    throw std::invalid_argument("unknown stop rule '" + s + "'");
}

// ---------------------------------------------------------------------------

int cmd_constants(const RunConfig& c, bool oracle) {
    const auto cc = critical_constants(c.d, c.field(), oracle);
    OutputSet out;
    out.add("constants.csv", constants_csv(cc));
    emit(c, out, "constants.csv");
    return 0;
}

int cmd_landscape(const RunConfig& c, bool compounds) {
    const auto ctx = c.context();
    const auto G = enumerate_landscape(ctx);
    const auto P = compounds ? maximal_compounds(G, G.all()) : maximal_cycles(G, G.all());
    OutputSet out;
    out.add("states.csv", states_csv(G));
    out.add("partition.csv", partition_csv(P));
    out.add("blocks.csv", blocks_csv(G, P));
    emit(c, out, "blocks.csv");
    return 0;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> v;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) v.push_back(std::stoi(item));
    return v;
}

RateMatrix random_rates(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> r(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            if (x != y && u(rng) < 0.6) r[x][y] = std::exp(4.0 * u(rng) - 2.0);
    for (int x = 0; x + 1 < n; ++x) {
        if (r[x][x + 1] == 0) r[x][x + 1] = 0.5;
        if (r[x + 1][x] == 0) r[x + 1][x] = 0.5;
    }
    return RateMatrix(std::move(r));
}

int cmd_wgraph(const RunConfig& c, const Flags& f) {
    std::ostringstream o;
    o << "case,states,W,start,total_variation,time_relative_error\n";
    auto row = [&](int k, const RateMatrix& R, const std::vector<int>& W, int x) {
        const auto law = exit_point_law(R, W, x);
        const double t = expected_exit_time(R, W, x);
        const auto lin = exit_oracle_linear(R, W, x);
        double tv = 0;
        for (std::size_t y = 0; y < law.size(); ++y) tv += std::abs(law[y] - lin.distribution[y]);
        tv /= 2;
        const double rel = lin.expected_time > 0 ? std::abs(t - lin.expected_time) / lin.expected_time : std::abs(t);
        std::string ws;
        for (std::size_t i = 0; i < W.size(); ++i) ws += (i ? " " : "") + std::to_string(W[i]);
        o << k << "," << R.size() << "," << ws << "," << x << "," << num(tv) << "," << num(rel) << "\n";
    };
    if (!f.matrix.empty()) {
        std::ifstream in(f.matrix);
        if (!in) throw std::invalid_argument("cannot open matrix file '" + f.matrix + "'");
        std::stringstream text;
        text << in.rdbuf();
        const auto R = RateMatrix::from_csv(text.str());
        auto W = parse_int_list(f.target);
        if (W.empty()) W = {static_cast<int>(R.size()) - 1};
        row(0, R, W, f.start);
    } else {
        std::mt19937_64 rng(c.seed);
        const int cases = f.count > 0 ? f.count : 200;
        const int maxn = f.max_states > 1 ? f.max_states : 8;
        for (int k = 0; k < cases; ++k) {
            const int n = std::uniform_int_distribution<int>(2, maxn)(rng);
            const auto R = random_rates(rng, n);
            std::vector<int> W{n - 1};
            for (int z = 1; z + 1 < n; ++z)
                if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.25) W.push_back(z);
            row(k, R, W, 0);
        }
    }
    OutputSet out;
    out.add("wgraph.csv", o.str());
    emit(c, out, "wgraph.csv");
    return 0;
}

int cmd_simulate(const RunConfig& c) {
    const auto ctx = c.context();
    const auto start = initial_state(c);
    const double beta = c.first_beta();
    const auto rule = stop_rule(c, ctx);
    const auto tr = c.kmc_mode() == Mode::Graphical
                        ? evolve_graphical(EventStream(c.seed), ctx, start, beta, rule, c.caps())
                        : evolve_rejection_free(c.seed, ctx, start, beta, rule, c.caps());
    OutputSet out;
    out.add("trajectory.csv", trajectory_csv(tr));
    out.add("summary.json", dump(trajectory_summary(tr, c.seed, beta, ctx)));
    emit(c, out, "summary.json");
    return 0;
}

int cmd_nucleation(const RunConfig& c) {
    NucleationSpec spec{c.context(), c.beta, c.replicas, c.seed, c.kmc_mode(), c.caps(), c.threads};
    const auto rep = run_nucleation(spec);
    json fit = fit_json(rep.fit, rep.target);
    fit["observable"] = "all_plus";
    if (rep.nucleation_fit) {
        fit["nucleation"] = fit_json(*rep.nucleation_fit, rep.target);
        fit["nucleation"]["observable"] = "restricted_exit";
    }
    OutputSet out;
    out.add("results.csv", results_csv(rep.rows));
    out.add("fit.json", dump(fit));
    emit(c, out, "fit.json");
    return 0;
}

int cmd_infection(const RunConfig& c) {
    const auto ctx = c.context();
    const auto start = initial_state(c);
    if (c.block_side < 1) throw std::invalid_argument("infection needs block_side >= 1");
    if (!std::isfinite(c.cap_time)) throw std::invalid_argument("infection needs a finite caps.time horizon");
    struct Run {
        std::uint64_t seed;
        double beta;
        InfectionResult res;
    };
    std::vector<Run> runs;
    for (std::size_t bi = 0; bi < c.beta.size(); ++bi) {
        auto res = run_replicas(
            c.replicas,
            [&](std::size_t r) {
                const std::uint64_t seed = c.seed + bi * c.replicas + r;
                return Run{seed, c.beta[bi],
                           run_infection_microscopic(ctx, start, c.beta[bi], c.block_side, c.eligibility_defect, c.cap_time,
                                                     seed, c.kmc_mode(), c.cap_events)};
            },
            c.threads);
        for (auto& r : res) runs.push_back(std::move(r));
    }
    std::ostringstream ev, rows;
    ev << "seed,beta,time,block,infected\n";
    rows << "seed,beta,first_infection,infected_blocks,deinfected_blocks,persistence_failure\n";
    json summary;
    std::map<double, std::vector<double>> firsts;
    std::map<double, std::pair<std::size_t, std::size_t>> per_beta;
    std::size_t infected = 0, deinfected = 0;
    for (const auto& r : runs) {
        for (const auto& e : r.res.events)
            ev << r.seed << "," << num(r.beta) << "," << num(e.time) << "," << e.block << "," << e.infected << "\n";
        const double first = *std::min_element(r.res.first_infection.begin(), r.res.first_infection.end());
        rows << r.seed << "," << num(r.beta) << "," << num(first) << "," << r.res.infected_blocks << ","
             << r.res.deinfected_blocks << "," << num(r.res.persistence_failure()) << "\n";
        firsts[r.beta].push_back(first);
        infected += r.res.infected_blocks;
        deinfected += r.res.deinfected_blocks;
        per_beta[r.beta].first += r.res.infected_blocks;
        per_beta[r.beta].second += r.res.deinfected_blocks;
    }
    summary["replicas"] = c.replicas;
    summary["horizon"] = c.cap_time;
    summary["block_side"] = c.block_side;
    summary["eligibility_defect"] = c.eligibility_defect;
    summary["infected_blocks"] = infected;
    summary["deinfected_blocks"] = deinfected;
    summary["persistence_failure"] = infected ? static_cast<double>(deinfected) / static_cast<double>(infected) : 0.0;
    for (const auto& [beta, ts] : firsts) {
        const auto never = std::count_if(ts.begin(), ts.end(), [](double t) { return std::isinf(t); });
        summary["never_infected"][num(beta)] = never;
        const auto [in, out] = per_beta[beta];
        summary["persistence_failure_by_beta"][num(beta)] = in ? static_cast<double>(out) / static_cast<double>(in) : 0.0;
    }
    OutputSet out;
    out.add("infection_events.csv", ev.str());
    out.add("results.csv", rows.str());
    out.add("summary.json", dump(summary));
    emit(c, out, "summary.json");
    return 0;
}

int cmd_growth(const RunConfig& c) {
    const auto rep = run_growth_model(c.d, c.growth_gamma, c.growth_kappa_prev, c.beta, c.replicas, c.seed, c.threads);
    std::ostringstream o;
    o << "seed,beta,coverage_time\n";
    for (std::size_t bi = 0; bi < rep.betas.size(); ++bi)
        for (std::size_t r = 0; r < rep.times[bi].size(); ++r)
            o << c.seed + bi * c.replicas + r << "," << num(rep.betas[bi]) << "," << num(rep.times[bi][r]) << "\n";
    json fit = fit_json(rep.fit, rep.predicted);
    fit["boundary_limited"] = rep.boundary_limited;
    OutputSet out;
    out.add("results.csv", o.str());
    out.add("fit.json", dump(fit));
    if (!c.L_grid.empty()) {
        const auto cc = critical_constants(c.d, c.field(), false);
        std::ostringstream t;
        t << "L,inf_max,argmin,closed_form,discrepancy,boundary_branch\n";
        const auto reps = growth_threshold_grid(cc, c.d, c.L_grid);
        for (std::size_t i = 0; i < reps.size(); ++i)
            t << num(c.L_grid[i]) << "," << num(reps[i].inf_max) << "," << num(reps[i].argmin) << ","
              << num(reps[i].closed_form) << "," << num(reps[i].discrepancy) << "," << reps[i].boundary_branch << "\n";
        out.add("threshold.csv", t.str());
    }
    emit(c, out, "fit.json");
    return 0;
}

int cmd_isoperimetry(const RunConfig& c) {
    if (c.vmax < 1) throw std::invalid_argument("isoperimetry needs vmax >= 1");
    OutputSet out;
    out.add("isoperimetry.csv", isoperimetry_csv(isoperimetric_check(c.d, c.vmax)));
    emit(c, out, "isoperimetry.csv");
    return 0;
}

int cmd_stc_audit(const RunConfig& c) {
    const auto ctx = c.context();
    const int d = ctx.geometry().d();
    const auto cc = critical_constants(d, ctx.field(), false);
    const double beta = c.first_beta();
    const auto samples = run_replicas(
        c.replicas, [&](std::size_t r) { return stc_audit_sample(ctx, cc, d, beta, c.seed + r, c.kmc_mode(), c.caps()); },
        c.threads);
    std::ostringstream o;
    o << "seed,diameter,max_cluster,exit_time,censored,flips\n";
    int worst = 0;
    std::size_t censored = 0;
    std::map<int, std::size_t> hist;
    for (const auto& s : samples) {
        o << s.seed << "," << s.diameter << "," << s.max_cluster << "," << num(s.exit_time) << "," << s.censored << ","
          << s.flips << "\n";
        worst = std::max(worst, s.diameter);
        censored += s.censored;
        ++hist[s.diameter];
    }
    json summary;
    summary["replicas"] = c.replicas;
    summary["beta"] = beta;
    summary["threshold"] = c.stc_threshold_D;
    summary["max_diameter"] = worst;
    summary["censored"] = censored;
    summary["within_threshold"] = worst <= c.stc_threshold_D;
    for (const auto& [k, v] : hist) summary["histogram"][std::to_string(k)] = v;
    OutputSet out;
    out.add("audit.csv", o.str());
    out.add("summary.json", dump(summary));
    emit(c, out, "summary.json");
    return worst <= c.stc_threshold_D ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"metastab: metastability of the Ising model under Metropolis dynamics"};
    app.set_help_flag("--help", "print this help message and exit");
    app.require_subcommand(1);
    Flags f;

    auto* constants = app.add_subcommand("constants", "critical constants table");
    auto* landscape = app.add_subcommand("landscape", "enumerate a box landscape and partition it into cycles");
    auto* wgraph = app.add_subcommand("wgraph-check", "W-graph exit laws against the linear solve");
    auto* simulate = app.add_subcommand("simulate", "single trajectory export");
    auto* nucleation = app.add_subcommand("nucleation", "Arrhenius scaling of the nucleation time");
    auto* infection = app.add_subcommand("infection", "microscopic infection process on renormalized blocks");
    auto* growth = app.add_subcommand("growth-model", "abstract renormalized growth model");
    auto* iso = app.add_subcommand("isoperimetry", "minimal perimeters against the lower bounds");
    auto* audit = app.add_subcommand("stc-audit", "space-time cluster diameters before nucleation");
    for (auto* s : app.get_subcommands({})) add_common(s, f);

    for (auto* s : {constants, growth, iso}) s->add_option("--d", f.d, "dimension");
    constants->add_flag("--no-oracle", f.no_oracle, "skip the polyomino cross-check");
    landscape->add_flag("--compounds", f.compounds, "maximal cycle compounds instead of cycles");
    wgraph->add_option("--matrix", f.matrix, "dense rate matrix CSV");
    wgraph->add_option("--W", f.target, "comma separated target states");
    wgraph->add_option("--x", f.start, "start state");
    wgraph->add_option("--count", f.count, "random matrices when no file is given");
    wgraph->add_option("--max-states", f.max_states);
    for (auto* s : {simulate, infection}) s->add_option("--initial", f.initial, "minus or plus");
    simulate->add_option("--stop", f.stop, "all_plus, nucleation, never, volume:<m>, spin:<x>");
    infection->add_option("--block-side", f.block_side);
    infection->add_option("--defect", f.defect, "eligibility defect");
    growth->add_option("--gamma", f.growth_gamma);
    growth->add_option("--kappa-prev", f.growth_kappa);
    growth->add_option("--L", f.L_grid, "threshold grid")->delimiter(',');
    iso->add_option("--vmax", f.vmax);
    audit->add_option("--D", f.stc_D, "diameter threshold");

    if (argc > 1 && argv[1][0] != '-' && !app.get_subcommand_no_throw(argv[1])) {
        std::cerr << "unknown subcommand '" << argv[1] << "'\n\n" << app.help();
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    auto* s = app.get_subcommands().front();
    try {
        const RunConfig c = resolve(s, f, s->get_name());
        if (s == constants) return cmd_constants(c, !f.no_oracle);
        if (s == landscape) return cmd_landscape(c, f.compounds);
        if (s == wgraph) return cmd_wgraph(c, f);
        if (s == simulate) return cmd_simulate(c);
        if (s == nucleation) return cmd_nucleation(c);
        if (s == infection) return cmd_infection(c);
        if (s == growth) return cmd_growth(c);
        if (s == iso) return cmd_isoperimetry(c);
        if (s == audit) return cmd_stc_audit(c);
    } catch (const std::exception& e) {
        std::cerr << "metastab " << s->get_name() << ": " << e.what() << "\n";
        return 1;
    }
    return 2;
}
