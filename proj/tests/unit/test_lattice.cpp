#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "metastab/config_io.hpp"
#include "metastab/field.hpp"
#include "metastab/lattice.hpp"
#include "oracles.hpp"

using namespace metastab;

namespace {
const auto kSqrt2 = MagneticField::sqrt_over(2, 2);

Configuration random_config(const BoxGeometry& g, std::mt19937_64& rng, double p = 0.5) {
    std::bernoulli_distribution coin(p);
    Configuration c(g);
    for (Site x = 0; x < g.sites(); ++x) c.set(x, coin(rng));
    return c;
}
}  // namespace

TEST(Field, ParsesTokens) {
    EXPECT_NEAR(MagneticField::parse("sqrt2/2").value(), std::sqrt(2.0) / 2, 1e-15);
    EXPECT_NEAR(MagneticField::parse("sqrt(3)/3").value(), std::sqrt(3.0) / 3, 1e-15);
    EXPECT_TRUE(MagneticField::parse("sqrt2/2").irrational());
    EXPECT_FALSE(MagneticField::parse("1/2").irrational());
    EXPECT_EQ(MagneticField::parse("0.05"), MagneticField::rational(1, 20));
    EXPECT_THROW(MagneticField::parse("sqrt4/3"), std::invalid_argument);
    EXPECT_THROW(MagneticField::parse("3/2"), std::invalid_argument);
    EXPECT_THROW(MagneticField::parse("sqrt2"), std::invalid_argument);  // >= 1
    EXPECT_THROW(MagneticField::parse("abc"), std::invalid_argument);
}

TEST(Field, ExactSignMatchesLongDouble) {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> b(-60, 60), p(-40, 40);
    for (auto h : {kSqrt2, MagneticField::sqrt_over(3, 3), MagneticField::sqrt_over(5, 4)}) {
        for (int i = 0; i < 5000; ++i) {
            const int bb = b(rng), pp = p(rng);
            const long double v = bb - static_cast<long double>(h.value()) * pp;
            const int s = h.sign(bb, pp);
            if (bb == 0 && pp == 0) EXPECT_EQ(s, 0);
            else {
                EXPECT_NE(s, 0);
                EXPECT_EQ(s, v > 0 ? 1 : -1) << bb << " " << pp;
            }
        }
    }
}

TEST(Field, RationalTiesAreReported) {
    const auto h = MagneticField::rational(1, 2);
    const EnergyValue a{2, 2}, b{1, 0};
    EXPECT_TRUE(h.equal(a, b));
    EXPECT_TRUE(h.tie(a, b));
    EXPECT_FALSE(kSqrt2.equal(EnergyValue{2, 2}, EnergyValue{1, 0}));
}

TEST(Field, FloorRatioExact) {
    EXPECT_EQ(MagneticField::rational(1, 2).floor_ratio(4), 8);
    EXPECT_EQ(kSqrt2.floor_ratio(2), 2);
    EXPECT_EQ(kSqrt2.floor_ratio(4), 5);
    EXPECT_EQ(MagneticField::rational(1, 20).floor_ratio(4), 80);
}

TEST(Context, OneDimensionalBox) {
    LatticeContext ctx(BoxGeometry({4}), BoundaryCondition::all_minus(), kSqrt2);
    EXPECT_EQ(ctx.sites(), 4u);
    int ext = 0;
    for (Site x = 0; x < 4; ++x) ext += ctx.exterior_minus(x);
    EXPECT_EQ(ext, 2);
    EXPECT_EQ(ctx.exterior_minus(0), 1);
    EXPECT_EQ(ctx.exterior_minus(3), 1);
}

TEST(Context, OnePlusMinusFaces) {
    LatticeContext ctx(BoxGeometry({3, 3}), BoundaryCondition::n_plus_minus(1), kSqrt2);
    // corner (0,0): one minus face (axis 0) and one plus face (axis 1)
    EXPECT_EQ(ctx.exterior_minus(0), 1);
    EXPECT_EQ(ctx.exterior_plus(0), 1);
    // (0,1): only the axis-0 face
    EXPECT_EQ(ctx.exterior_minus(1), 1);
    EXPECT_EQ(ctx.exterior_plus(1), 0);
    // (1,0): only the axis-1 face
    EXPECT_EQ(ctx.exterior_minus(3), 0);
    EXPECT_EQ(ctx.exterior_plus(3), 1);
}

TEST(Context, FullNPlusMinusIsAllMinus) {
    const BoxGeometry g({2, 2, 2});
    LatticeContext a(g, BoundaryCondition::n_plus_minus(3), kSqrt2), b(g, BoundaryCondition::all_minus(), kSqrt2);
    for (Site x = 0; x < g.sites(); ++x) {
        EXPECT_EQ(a.exterior_minus(x), b.exterior_minus(x));
        EXPECT_EQ(a.exterior_plus(x), 0);
    }
}

TEST(Context, RejectsBadN) {
    EXPECT_THROW(LatticeContext(BoxGeometry({2, 2}), BoundaryCondition::n_plus_minus(3), kSqrt2), std::invalid_argument);
}

TEST(Hamiltonian, Examples) {
    const BoxGeometry g({5, 5});
    LatticeContext ctx(g, BoundaryCondition::all_minus(), kSqrt2);
    EXPECT_EQ(ctx.hamiltonian(Configuration(g)), EnergyValue::zero());
    auto c = Configuration::from_sites(g, {g.index({2, 2})});
    EXPECT_EQ(ctx.hamiltonian(c), (EnergyValue{4, 1}));
    for (int L : {1, 2, 5, 9}) {
        const BoxGeometry line({L});
        LatticeContext lc(line, BoundaryCondition::all_minus(), kSqrt2);
        EXPECT_EQ(lc.hamiltonian(Configuration(line, true)), (EnergyValue{2, L}));
        // Telescoped along a filling path.
        Configuration s(line);
        EnergyValue acc;
        for (Site x = 0; x < line.sites(); ++x) {
            acc += lc.delta_h(s, x);
            s.set(x, true);
        }
        EXPECT_EQ(acc, (EnergyValue{2, L}));
    }
}

TEST(Hamiltonian, MatchesBruteForceUnderAllBoundaries) {
    std::mt19937_64 rng(11);
    for (auto dims : {std::vector<int>{6}, std::vector<int>{3, 4}, std::vector<int>{3, 3, 2}}) {
        const BoxGeometry g(dims);
        std::vector<BoundaryCondition> bcs{BoundaryCondition::all_minus(), BoundaryCondition::all_plus()};
        for (int n = 0; n <= g.d(); ++n) bcs.push_back(BoundaryCondition::n_plus_minus(n));
        auto ov = BoundaryCondition::all_minus();
        ov.overrides[{0, 0, -1}] = +1;
        bcs.push_back(ov);
        for (const auto& bc : bcs) {
            LatticeContext ctx(g, bc, kSqrt2);
            EXPECT_EQ(ctx.hamiltonian(Configuration(g)), EnergyValue::zero());
            for (int t = 0; t < 50; ++t) {
                auto s = random_config(g, rng);
                EXPECT_EQ(ctx.hamiltonian(s), oracle::energy(g, bc, s));
            }
        }
    }
}

TEST(DeltaH, Examples) {
    const BoxGeometry g({5, 5});
    LatticeContext ctx(g, BoundaryCondition::all_minus(), kSqrt2);
    const Site mid = g.index({2, 2});
    EXPECT_EQ(ctx.delta_h(Configuration(g), mid), (EnergyValue{4, 1}));
    auto full = Configuration(g, true);
    EXPECT_EQ(ctx.delta_h(full, mid), (EnergyValue{4, -1}));
    auto two = Configuration::from_sites(g, {g.index({1, 2}), g.index({2, 1})});
    EXPECT_EQ(ctx.delta_h(two, mid), (EnergyValue{0, 1}));
    EXPECT_THROW((void)ctx.delta_h(two, 99), std::out_of_range);
}

TEST(DeltaH, TelescopesOnRandomFlipSequences) {
    std::mt19937_64 rng(3);
    const BoxGeometry g({4, 5});
    LatticeContext ctx(g, BoundaryCondition::n_plus_minus(1), kSqrt2);
    auto s = random_config(g, rng);
    const auto start = ctx.hamiltonian(s);
    EnergyValue acc;
    std::uniform_int_distribution<Site> site(0, static_cast<Site>(g.sites() - 1));
    for (int k = 0; k < 500; ++k) {
        const Site x = site(rng);
        const auto d = ctx.delta_h(s, x);
        s.flip(x);
        acc += d;
    }
    EXPECT_EQ(acc, ctx.hamiltonian(s) - start);
}

TEST(FlipRate, Examples) {
    const BoxGeometry g({5, 5});
    const auto half = MagneticField::rational(1, 2);
    LatticeContext ctx(g, BoundaryCondition::all_minus(), half);
    EXPECT_NEAR(ctx.flip_rate(Configuration(g), g.index({2, 2}), 2.0), std::exp(-7.0), 1e-18);
    auto two = Configuration::from_sites(g, {g.index({1, 2}), g.index({2, 1})});
    EXPECT_EQ(ctx.flip_rate(two, g.index({2, 2}), 5.0), 1.0);
    auto full = Configuration(g, true);
    EXPECT_NEAR(ctx.flip_rate(full, g.index({2, 2}), 1.0), std::exp(-4.5), 1e-15);
    EXPECT_THROW((void)ctx.flip_rate(full, 0, 0.0), std::invalid_argument);
}

TEST(Components, Examples) {
    const BoxGeometry g({6, 6});
    LatticeContext ctx(g, BoundaryCondition::all_minus(), kSqrt2);
    EXPECT_TRUE(ctx.connected_components(Configuration(g)).empty());
    auto two = Configuration::from_sites(g, {g.index({1, 1}), g.index({3, 3})});
    auto cs = ctx.connected_components(two);
    ASSERT_EQ(cs.size(), 2u);
    for (auto& c : cs) EXPECT_EQ(c.energy, (EnergyValue{4, 1}));
    auto sq = Configuration::from_sites(g, {g.index({2, 2}), g.index({2, 3}), g.index({3, 2}), g.index({3, 3})});
    cs = ctx.connected_components(sq);
    ASSERT_EQ(cs.size(), 1u);
    EXPECT_EQ(cs[0].energy, (EnergyValue{8, 4}));
}

TEST(Components, AdditiveUnderMinusBoundary) {
    std::mt19937_64 rng(5);
    const BoxGeometry g({5, 6});
    LatticeContext ctx(g, BoundaryCondition::all_minus(), kSqrt2);
    for (int t = 0; t < 200; ++t) {
        auto s = random_config(g, rng, 0.35);
        EnergyValue sum;
        for (auto& c : ctx.connected_components(s)) sum += c.energy;
        EXPECT_EQ(sum, ctx.hamiltonian(s));
    }
}

TEST(MeetJoin, AttractiveInequality) {
    std::mt19937_64 rng(9);
    const BoxGeometry g({4, 4});
    for (auto bc : {BoundaryCondition::all_minus(), BoundaryCondition::n_plus_minus(1), BoundaryCondition::all_plus()}) {
        LatticeContext ctx(g, bc, kSqrt2);
        for (int t = 0; t < 500; ++t) {
            auto a = random_config(g, rng), b = random_config(g, rng);
            auto [lo, hi] = meet_join(a, b);
            const auto el = ctx.hamiltonian(lo), eh = ctx.hamiltonian(hi), ea = ctx.hamiltonian(a), eb = ctx.hamiltonian(b);
            EXPECT_EQ(el.pluses + eh.pluses, ea.pluses + eb.pluses);
            EXPECT_LE(el.bonds + eh.bonds, ea.bonds + eb.bonds);
        }
    }
    // Inclusion and disjoint cases hold with equality.
    LatticeContext ctx(g, BoundaryCondition::all_minus(), kSqrt2);
    auto a = Configuration::from_sites(g, {0}), b = Configuration::from_sites(g, {0, 1});
    auto [lo, hi] = meet_join(a, b);
    EXPECT_EQ(lo, a);
    EXPECT_EQ(hi, b);
    auto c = Configuration::from_sites(g, {15});
    auto [lo2, hi2] = meet_join(a, c);
    EXPECT_TRUE(lo2.all_minus());
    EXPECT_EQ(ctx.hamiltonian(hi2), ctx.hamiltonian(a) + ctx.hamiltonian(c));
    // Two 2x2 squares sharing a 1x2 edge.
    auto s1 = Configuration::from_sites(g, {g.index({0, 0}), g.index({0, 1}), g.index({1, 0}), g.index({1, 1})});
    auto s2 = Configuration::from_sites(g, {g.index({1, 0}), g.index({1, 1}), g.index({2, 0}), g.index({2, 1})});
    auto [lo3, hi3] = meet_join(s1, s2);
    EXPECT_TRUE(kSqrt2.less_equal(ctx.hamiltonian(lo3) + ctx.hamiltonian(hi3), ctx.hamiltonian(s1) + ctx.hamiltonian(s2)));
    EXPECT_EQ(ctx.hamiltonian(lo3), (EnergyValue{6, 2}));
    EXPECT_EQ(ctx.hamiltonian(hi3), (EnergyValue{10, 6}));
}

TEST(Boundary, OneExteriorPlusNeverRaisesEnergy) {
    std::mt19937_64 rng(13);
    const BoxGeometry g({3, 4});
    LatticeContext base(g, BoundaryCondition::all_minus(), kSqrt2);
    auto bc = BoundaryCondition::all_minus();
    bc.overrides[{g.index({0, 2}), 0, -1}] = +1;
    LatticeContext flipped(g, bc, kSqrt2);
    for (int t = 0; t < 200; ++t) {
        auto s = random_config(g, rng);
        EXPECT_LE(flipped.hamiltonian(s).bonds, base.hamiltonian(s).bonds);
    }
}

TEST(Irrationality, EqualEnergiesOfNestedConfigsForceEquality) {
    std::mt19937_64 rng(17);
    const BoxGeometry g({3, 3});
    LatticeContext ctx(g, BoundaryCondition::all_minus(), kSqrt2);
    for (int t = 0; t < 2000; ++t) {
        auto s = random_config(g, rng);
        auto eta = s;
        for (Site x : s.plus_sites())
            if (rng() & 1) eta.set(x, false);
        if (kSqrt2.equal(ctx.hamiltonian(eta), ctx.hamiltonian(s))) {
            EXPECT_EQ(eta, s);
        }
    }
}

TEST(ConfigIo, RoundTrips) {
    std::mt19937_64 rng(19);
    const BoxGeometry g({3, 70});
    auto s = random_config(g, rng);
    EXPECT_EQ(from_text_grid(g, to_text_grid(s)), s);
    const auto dump = to_hex_dump(s, BoundaryCondition::n_plus_minus(1));
    EXPECT_EQ(dump.substr(0, dump.find('\n')), "dims=3,70;bc=1pm");
    const auto back = from_hex_dump(dump);
    EXPECT_EQ(back.config, s);
    EXPECT_EQ(back.bc, "1pm");
    EXPECT_EQ(to_text_grid(Configuration::from_sites(BoxGeometry({2, 2}), {1})), "-+\n--\n");
    EXPECT_THROW(from_text_grid(BoxGeometry({2, 2}), "-+-"), std::invalid_argument);
}
