#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "metastab/constants.hpp"
#include "metastab/kmc.hpp"
#include "metastab/stc.hpp"

namespace metastab {

// ---------------------------------------------------------------------------
// Replica farm.

/// Runs f(0..n-1) on a pool of threads; results come back in index order.
template <class F>
auto run_replicas(std::size_t n, F f, unsigned threads = 0) -> std::vector<decltype(f(std::size_t{0}))> {
    using R = decltype(f(std::size_t{0}));
    std::vector<std::optional<R>> slots(n);
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    auto work = [&] {
        for (std::size_t i = next++; i < n && !failed; i = next++) {
            try {
                slots[i].emplace(f(i));
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    std::vector<R> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

// ---------------------------------------------------------------------------
// Arrhenius fit.

struct ArrheniusFit {
    double slope = 0, intercept = 0;
    double ci_low = 0, ci_high = 0;
    std::vector<double> betas;       // points used in the fit
    std::vector<double> log_means;
    std::vector<double> excluded;    // beta values dropped for censoring
    bool low_confidence = false;
};

namespace detail {

inline std::pair<double, double> ols(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

/// Least-squares slope of ln(mean time) against beta, with a percentile
/// bootstrap over replicas. A beta point whose censored fraction exceeds
/// `max_censored` is left out; any censoring marks the fit low confidence.
inline ArrheniusFit arrhenius_fit(const std::vector<double>& betas, const std::vector<std::vector<double>>& times,
                                  const std::vector<std::vector<char>>& censored = {}, std::uint64_t seed = 1,
                                  int resamples = 1000, double max_censored = 0.1) {
    if (betas.size() != times.size()) throw std::invalid_argument("one sample list per beta required");
    ArrheniusFit fit;
    std::vector<const std::vector<double>*> used;
    for (std::size_t i = 0; i < betas.size(); ++i) {
        if (times[i].empty()) throw std::invalid_argument("empty sample list");
        std::size_t c = 0;
        if (!censored.empty())
            for (char f : censored.at(i)) c += f != 0;
        if (c > 0) fit.low_confidence = true;
        if (static_cast<double>(c) > max_censored * static_cast<double>(times[i].size())) {
            fit.excluded.push_back(betas[i]);
            continue;
        }
        fit.betas.push_back(betas[i]);
        fit.log_means.push_back(std::log(detail::mean_of(times[i])));
        used.push_back(&times[i]);
    }
    auto distinct = fit.betas;
    std::sort(distinct.begin(), distinct.end());
    if (std::unique(distinct.begin(), distinct.end()) - distinct.begin() < 2)
        throw std::invalid_argument("slope undefined: fewer than two usable beta values");
    std::tie(fit.slope, fit.intercept) = detail::ols(fit.betas, fit.log_means);
    std::mt19937_64 rng(seed);
    std::vector<double> slopes;
    slopes.reserve(static_cast<std::size_t>(resamples));
    std::vector<double> y(used.size());
    for (int r = 0; r < resamples; ++r) {
        for (std::size_t i = 0; i < used.size(); ++i) {
            const auto& v = *used[i];
            std::uniform_int_distribution<std::size_t> pick(0, v.size() - 1);
            double s = 0;
            for (std::size_t k = 0; k < v.size(); ++k) s += v[pick(rng)];
            y[i] = std::log(s / static_cast<double>(v.size()));
        }
        slopes.push_back(detail::ols(fit.betas, y).first);
    }
    fit.ci_low = detail::quantile(slopes, 0.025);
    fit.ci_high = detail::quantile(slopes, 0.975);
    return fit;
}

// ---------------------------------------------------------------------------
// Nucleation.

struct NucleationSpec {
    LatticeContext ctx;
    std::vector<double> betas;
    std::size_t replicas = 100;
    std::uint64_t seed = 1;
    Mode mode = Mode::RejectionFree;
    EvolveOptions caps;
    unsigned threads = 0;
};

struct ReplicaRow {
    std::uint64_t seed;
    double beta;
    double hitting_time;  // all plus
    bool censored;
    double nucleation_time;  // first exit of the restricted ensemble
    bool nucleation_censored;
    std::uint64_t flips;
};

struct NucleationReport {
    std::vector<ReplicaRow> rows;
    ArrheniusFit fit;             // all-plus hitting
    std::optional<ArrheniusFit> nucleation_fit;
    double target = 0;            // value of the barrier for the box dimension
    double relative_error = 0;
};

/// Leaves {volume <= m, H <= gamma}.
inline StopPredicate nucleation_predicate(const MagneticField& h, std::int64_t m, EnergyValue gamma) {
    return [h, m, gamma](const DynView& v) {
        return static_cast<std::int64_t>(v.volume) > m || h.less(gamma, v.energy);
    };
}

inline NucleationReport run_nucleation(const NucleationSpec& spec) {
    if (spec.replicas < 1) throw std::invalid_argument("replicas must be >= 1");
    for (double b : spec.betas)
        if (!(b > 0)) throw std::invalid_argument("beta values must be positive");
    if (spec.betas.size() < 2) throw std::invalid_argument("slope undefined: need at least two beta values");
    const int d = spec.ctx.geometry().d();
    const auto cc = critical_constants(d, spec.ctx.field(), false);
    const auto& dc = cc.at(d);
    NucleationReport rep;
    rep.target = dc.gamma_value;
    const Configuration start(spec.ctx.geometry());
    std::vector<std::vector<double>> times, ntimes;
    std::vector<std::vector<char>> cens, ncens;
    for (std::size_t bi = 0; bi < spec.betas.size(); ++bi) {
        const double beta = spec.betas[bi];
        auto rows = run_replicas(
            spec.replicas,
            [&](std::size_t r) {
                const std::uint64_t seed = spec.seed + bi * spec.replicas + r;
                double first_exit = -1;
                const auto leaves = nucleation_predicate(spec.ctx.field(), dc.m, dc.gamma);
                StopPredicate target = [&](const DynView& v) {
                    if (first_exit < 0 && leaves(v)) first_exit = v.time;
                    return v.config.all_plus();
                };
                EvolveOptions opt = spec.caps;
                opt.record = false;
                const auto tr = spec.mode == Mode::Graphical
                                    ? evolve_graphical(EventStream(seed), spec.ctx, start, beta, target, opt)
                                    : evolve_rejection_free(seed, spec.ctx, start, beta, target, opt);
                const bool nc = first_exit < 0;
                return ReplicaRow{seed, beta, tr.end_time, !tr.hit(), nc ? tr.end_time : first_exit, nc, tr.flips};
            },
            spec.threads);
        times.emplace_back();
        ntimes.emplace_back();
        cens.emplace_back();
        ncens.emplace_back();
        for (const auto& row : rows) {
            times.back().push_back(row.hitting_time);
            cens.back().push_back(row.censored);
            ntimes.back().push_back(row.nucleation_time);
            ncens.back().push_back(row.nucleation_censored);
            rep.rows.push_back(row);
        }
    }
    rep.fit = arrhenius_fit(spec.betas, times, cens, spec.seed);
    try {
        rep.nucleation_fit = arrhenius_fit(spec.betas, ntimes, ncens, spec.seed + 1);
    } catch (const std::invalid_argument&) {
        rep.nucleation_fit.reset();
    }
    rep.relative_error = std::abs(rep.fit.slope - rep.target) / rep.target;
    return rep;
}

// ---------------------------------------------------------------------------
// Microscopic infection.

struct InfectionEvent {
    double time;
    std::size_t block;
    bool infected;
};

struct InfectionResult {
    BoxGeometry blocks;                   // renormalized lattice
    std::vector<double> first_infection;  // T_x, +inf if never
    std::vector<double> deinfection;      // T'_x, +inf if not before the horizon
    std::vector<InfectionEvent> events;
    double horizon = 0;
    std::size_t infected_blocks = 0;
    std::size_t deinfected_blocks = 0;

    /// Fraction of blocks that lost their infection before the horizon.
    [[nodiscard]] double persistence_failure() const {
        return infected_blocks ? static_cast<double>(deinfected_blocks) / static_cast<double>(infected_blocks) : 0.0;
    }
    /// Indicator mu_t(x) straight from the two times.
    [[nodiscard]] bool infected_at(std::size_t x, double t) const { return first_infection[x] <= t && t < deinfection[x]; }
};

/// Block index of each site; the box sides must be multiples of the block side.
inline std::vector<std::size_t> block_map(const BoxGeometry& g, int side, BoxGeometry& blocks) {
    if (side < 1) throw std::invalid_argument("block side must be >= 1");
    std::vector<int> bd;
    for (int a = 0; a < g.d(); ++a) {
        if (g.side(a) % side != 0) throw std::invalid_argument("box sides must be multiples of the block side");
        bd.push_back(g.side(a) / side);
    }
    blocks = BoxGeometry(bd);
    std::vector<std::size_t> out(g.sites());
    for (Site x = 0; x < g.sites(); ++x) {
        auto c = g.coords(x);
        for (auto& v : c) v /= side;
        out[x] = blocks.index(c);
    }
    return out;
}

/// Derives T_x, T'_x and mu from a recorded trajectory. A block is infected
/// from the first time it is entirely plus until the first later time its
/// spin sum drops below |block| - defect.
inline InfectionResult infection_from_trajectory(const BoxGeometry& g, const Trajectory& tr, int block_side, double defect) {
    InfectionResult res;
    const auto map = block_map(g, block_side, res.blocks);
    const auto nb = res.blocks.sites();
    const auto per_block = static_cast<int>(std::lround(std::pow(block_side, g.d())));
    std::vector<int> plus(nb, 0);
    for (Site x = 0; x < g.sites(); ++x) plus[map[x]] += tr.initial.plus(x);
    constexpr double inf = std::numeric_limits<double>::infinity();
    res.first_infection.assign(nb, inf);
    res.deinfection.assign(nb, inf);
    res.horizon = tr.end_time;
    auto spin_sum = [&](std::size_t b) { return 2 * plus[b] - per_block; };
    std::vector<char> mu(nb, 0);
    auto update = [&](std::size_t b, double t) {
        if (res.first_infection[b] == inf && plus[b] == per_block) {
            res.first_infection[b] = t;
            mu[b] = 1;
            ++res.infected_blocks;
            res.events.push_back({t, b, true});
        } else if (mu[b] && spin_sum(b) < per_block - defect) {
            res.deinfection[b] = t;
            mu[b] = 0;
            ++res.deinfected_blocks;
            res.events.push_back({t, b, false});
        }
    };
    for (std::size_t b = 0; b < nb; ++b) update(b, 0.0);
    for (const auto& e : tr.events) {
        plus[map[e.site]] += e.plus ? 1 : -1;
        update(map[e.site], e.time);
    }
    return res;
}

inline InfectionResult run_infection_microscopic(const LatticeContext& ctx, const Configuration& initial, double beta,
                                                 int block_side, double defect, double horizon, std::uint64_t seed,
                                                 Mode mode = Mode::RejectionFree, std::uint64_t event_cap = 1ull << 32) {
    EvolveOptions opt;
    opt.time_cap = horizon;
    opt.event_cap = event_cap;
    const auto tr = mode == Mode::Graphical
                        ? evolve_graphical(EventStream(seed), ctx, initial, beta, stop::never(), opt)
                        : evolve_rejection_free(seed, ctx, initial, beta, stop::never(), opt);
    if (tr.reason == StopReason::EventCap) throw std::runtime_error("event cap exceeded before the horizon");
    return infection_from_trajectory(ctx.geometry(), tr, block_side, defect);
}

// ---------------------------------------------------------------------------
// Renormalized growth model.

struct GrowthModelParams {
    int d = 1;
    double gamma = 1.5;       // nucleation exponent
    double kappa_prev = 0.0;  // growth exponent of one face; +inf freezes growth
    double beta = 4.0;
    int radius = 0;           // lattice half-side; 0 picks one from the predicted scale
};

struct GrowthSample {
    double time;
    int radius;
    bool boundary_limited;  // the covering droplet came from the outer half of the lattice
};

/// Predicted exponent (gamma + d kappa_prev) / (d + 1).
inline double growth_exponent(int d, double gamma, double kappa_prev) { return (gamma + d * kappa_prev) / (d + 1); }

inline int growth_radius(const GrowthModelParams& p) {
    if (p.radius > 0) return p.radius;
    if (!std::isfinite(p.kappa_prev)) return 0;
    const double v = std::exp(-p.beta * p.kappa_prev);
    const double tau = std::exp(p.beta * growth_exponent(p.d, p.gamma, p.kappa_prev));
    return static_cast<int>(std::ceil(4.0 * v * tau)) + 4;
}

/// Sites nucleate at rate exp(-beta gamma); a droplet born at time t_i at x_i
/// covers everything within sup-distance v (t - t_i), v = exp(-beta kappa_prev).
/// The origin is covered at min_i t_i + |x_i| / v.
inline GrowthSample growth_model_sample(const GrowthModelParams& p, std::uint64_t seed) {
    if (p.d < 1 || p.gamma < 0 || p.kappa_prev < 0) throw std::invalid_argument("invalid growth model parameters");
    std::mt19937_64 rng(seed);
    const double rate = std::exp(-p.beta * p.gamma);
    std::exponential_distribution<double> wait(rate);
    const int R = growth_radius(p);
    if (R == 0) return {wait(rng), 0, false};
    const double v = std::exp(-p.beta * p.kappa_prev);
    double best = std::numeric_limits<double>::infinity();
    int best_r = 0;
    // sup-norm shells: 1 site at r=0, (2r+1)^d - (2r-1)^d at r>0
    for (int r = 0; r <= R; ++r) {
        const double delay = r / v;
        if (delay >= best) break;
        const double shell = r == 0 ? 1.0 : std::pow(2.0 * r + 1, p.d) - std::pow(2.0 * r - 1, p.d);
        // earliest of `shell` independent exponentials
        const double t = std::exponential_distribution<double>(rate * shell)(rng) + delay;
        if (t < best) {
            best = t;
            best_r = r;
        }
    }
    return {best, R, 2 * best_r > R};
}

struct GrowthReport {
    std::vector<double> betas;
    std::vector<std::vector<double>> times;
    ArrheniusFit fit;
    double predicted = 0;
    double relative_error = 0;
    std::size_t boundary_limited = 0;
};

inline GrowthReport run_growth_model(int d, double gamma, double kappa_prev, const std::vector<double>& betas,
                                     std::size_t replicas, std::uint64_t seed, unsigned threads = 0) {
    GrowthReport rep;
    rep.betas = betas;
    rep.predicted = std::isfinite(kappa_prev) ? growth_exponent(d, gamma, kappa_prev) : gamma;
    for (std::size_t bi = 0; bi < betas.size(); ++bi) {
        GrowthModelParams p{d, gamma, kappa_prev, betas[bi], 0};
        const auto samples =
            run_replicas(replicas, [&](std::size_t r) { return growth_model_sample(p, seed + bi * replicas + r); }, threads);
        rep.times.emplace_back();
        for (const auto& s : samples) {
            rep.times.back().push_back(s.time);
            rep.boundary_limited += s.boundary_limited;
        }
    }
    rep.fit = arrhenius_fit(betas, rep.times, {}, seed);
    rep.relative_error = std::abs(rep.fit.slope - rep.predicted) / rep.predicted;
    return rep;
}

// ---------------------------------------------------------------------------
// Growth threshold.

struct ThresholdReport {
    double inf_max = 0;      // inf over K <= L of the three-way maximum
    double argmin = 0;
    double closed_form = 0;  // max(gamma_d - d L, kappa_d)
    double discrepancy = 0;
    bool boundary_branch = false;  // minimum sits at K = L
};

/// Minimizes max(gamma_d - d K, gamma_{d-1}, K + kappa_{d-1}) over K <= L by
/// scanning the breakpoints of the piecewise-linear envelope.
inline ThresholdReport solve_growth_threshold(double gamma_d, double gamma_prev, double kappa_prev, int d, double L) {
    if (d < 1) throw std::invalid_argument("dimension must be >= 1");
    struct Line {
        double a, b;  // a K + b
    };
    const std::vector<Line> lines{{-static_cast<double>(d), gamma_d}, {0.0, gamma_prev}, {1.0, kappa_prev}};
    auto f = [&](double K) {
        double m = -std::numeric_limits<double>::infinity();
        for (const auto& l : lines) m = std::max(m, l.a * K + l.b);
        return m;
    };
    std::vector<double> cand{L};
    for (std::size_t i = 0; i < lines.size(); ++i)
        for (std::size_t j = i + 1; j < lines.size(); ++j)
            if (lines[i].a != lines[j].a) {
                const double k = (lines[j].b - lines[i].b) / (lines[i].a - lines[j].a);
                if (k <= L) cand.push_back(k);
            }
    ThresholdReport r;
    r.inf_max = std::numeric_limits<double>::infinity();
    for (double k : cand)
        if (f(k) < r.inf_max) {
            r.inf_max = f(k);
            r.argmin = k;
        }
    const double kappa_d = growth_exponent(d, gamma_d, kappa_prev);
    r.closed_form = std::max(gamma_d - d * L, kappa_d);
    r.discrepancy = std::abs(r.inf_max - r.closed_form);
    r.boundary_branch = r.argmin == L;
    return r;
}

/// The threshold identity along a grid of L values for constants of dimension d.
inline std::vector<ThresholdReport> growth_threshold_grid(const CriticalConstants& cc, int d, const std::vector<double>& Ls) {
    std::vector<ThresholdReport> out;
    for (double L : Ls)
        out.push_back(solve_growth_threshold(cc.at(d).gamma_value, cc.at(d - 1).gamma_value, cc.at(d - 1).kappa, d, L));
    return out;
}

// ---------------------------------------------------------------------------
// Pre-nucleation cluster audit.

struct AuditSample {
    std::uint64_t seed;
    int diameter;       // windowed diameter over [0, exit)
    int max_cluster;    // largest single cluster before exit
    double exit_time;
    bool censored;
    std::uint64_t flips;
};

/// Free dynamics from all-minus until the state leaves {volume <= m, H <= gamma};
/// the clusters are those of the trajectory strictly before the exit flip.
inline AuditSample stc_audit_sample(const LatticeContext& ctx, const CriticalConstants& cc, int n, double beta,
                                    std::uint64_t seed, Mode mode, const EvolveOptions& caps) {
    const auto& dc = cc.at(n);
    const auto leaves = nucleation_predicate(ctx.field(), dc.m, dc.gamma);
    const Configuration start(ctx.geometry());
    EvolveOptions opt = caps;
    opt.record = true;
    auto tr = mode == Mode::Graphical ? evolve_graphical(EventStream(seed), ctx, start, beta, leaves, opt)
                                      : evolve_rejection_free(seed, ctx, start, beta, leaves, opt);
    if (tr.hit() && !tr.events.empty()) tr.events.pop_back();
    StcLedger L(ctx.geometry(), start);
    for (const auto& e : tr.events) L.apply(e);
    int sum = 0, inner = 0;
    for (const auto& c : L.clusters()) {
        if (c.seeded || c.open())
            sum += c.diameter();
        else
            inner = std::max(inner, c.diameter());
    }
    return {seed, std::max(sum, inner), L.max_diameter(), tr.end_time, !tr.hit(), tr.flips};
}

}  // namespace metastab
