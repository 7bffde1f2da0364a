#include "accdoa/error.hpp"
#include "accdoa/geometry.hpp"
#include "accdoa/metrics.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <sstream>

using namespace accdoa;

namespace {

FrameEntry entry(int c, const Doa& d) { return {c, d}; }

void check_same(const SeldReport& a, const SeldReport& b, double tol = 0.0) {
    CHECK(std::abs(a.le_cd - b.le_cd) <= tol);
    CHECK(std::abs(a.lr_cd - b.lr_cd) <= tol);
    CHECK(std::abs(a.er_20 - b.er_20) <= tol);
    CHECK(std::abs(a.f_20 - b.f_20) <= tol);
}

// Random frame with up to `per_class` entries per class on both sides.
std::pair<std::vector<FrameEntry>, std::vector<FrameEntry>> random_frame(int classes, int per_class, Rng& rng) {
    std::vector<FrameEntry> p, r;
    for (int c = 0; c < classes; ++c) {
        const int np = oracle::pick(rng, per_class + 1);
        const int nr = oracle::pick(rng, per_class + 1);
        for (int i = 0; i < nr; ++i) r.push_back(entry(c, oracle::random_direction(rng)));
        for (int i = 0; i < np; ++i) {
            // Mix near and far predictions so both sides of the 20 degree gate occur.
            if (nr > 0 && rng.bernoulli(0.6))
                p.push_back(entry(c, oracle::displace(r[r.size() - 1 - static_cast<std::size_t>(oracle::pick(rng, nr))].doa,
                                                      rng.uniform(0, 40), rng)));
            else
                p.push_back(entry(c, oracle::random_direction(rng)));
        }
    }
    return {p, r};
}

} // namespace

TEST_CASE("hungarian agrees with exhaustive search") {
    Rng rng(1);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 1 + oracle::pick(rng, 5);
        const int m = 1 + oracle::pick(rng, 5);
        Eigen::MatrixXd cost(n, m);
        for (auto& v : cost.reshaped()) v = rng.uniform(0, 180);
        if (trial % 7 == 0) cost = cost.array().round(); // ties
        const Assignment h = hungarian(cost);
        CHECK(h.size() == static_cast<std::size_t>(std::min(n, m)));
        CHECK(oracle::assignment_cost(cost, h) ==
              doctest::Approx(oracle::assignment_cost(cost, oracle::brute_force_assignment(cost))).epsilon(1e-12));
    }
    CHECK(hungarian(Eigen::MatrixXd(0, 3)).empty());
}

TEST_CASE("match_frame examples") {
    const Doa a = sph_to_cart(0, 0);
    auto m = match_frame({entry(0, a)}, {entry(0, a)});
    REQUIRE(m.pairs.size() == 1);
    CHECK(m.pairs[0].distance_deg == 0.0);

    // Crossed 10/170 degree layout: the assignment must take 10 + 10.
    const Doa r1 = sph_to_cart(0, 0), r2 = sph_to_cart(180, 0);
    const Doa p1 = sph_to_cart(170, 0), p2 = sph_to_cart(10, 0);
    m = match_frame({entry(2, p1), entry(2, p2)}, {entry(2, r1), entry(2, r2)});
    REQUIRE(m.pairs.size() == 2);
    CHECK(m.pairs[0].distance_deg == doctest::Approx(10.0));
    CHECK(m.pairs[1].distance_deg == doctest::Approx(10.0));

    m = match_frame({entry(0, a)}, {entry(1, a)});
    CHECK(m.pairs.empty());
    CHECK(m.unmatched_predictions == 1);
    CHECK(m.unmatched_references == 1);
}

TEST_CASE("LE and LR") {
    Rng rng(2);
    std::vector<FrameMatch> perfect, rotated, empty;
    for (int t = 0; t < 20; ++t) {
        const Doa d = oracle::random_direction(rng);
        perfect.push_back(match_frame({entry(0, d)}, {entry(0, d)}));
        rotated.push_back(match_frame({entry(0, oracle::displace(d, 30, rng))}, {entry(0, d)}));
        empty.push_back(match_frame({}, {entry(0, d)}));
    }
    auto s = compute_le_lr(perfect);
    CHECK(s.le_cd == 0.0);
    CHECK(s.lr_cd == 100.0);
    s = compute_le_lr(rotated);
    CHECK(s.le_cd == doctest::Approx(30.0).epsilon(1e-9));
    CHECK(s.lr_cd == 100.0);
    s = compute_le_lr(empty);
    CHECK(s.lr_cd == 0.0);
    CHECK_FALSE(s.le_defined);
    CHECK(s.le_cd == kUndefinedLocalizationError);
}

TEST_CASE("ER and F") {
    Rng rng(3);
    std::vector<FrameMatch> perfect, rotated;
    for (int t = 0; t < 25; ++t) {
        const Doa d = oracle::random_direction(rng);
        perfect.push_back(match_frame({entry(1, d)}, {entry(1, d)}));
        rotated.push_back(match_frame({entry(1, oracle::displace(d, 30, rng))}, {entry(1, d)}));
    }
    auto s = compute_er_f(perfect);
    CHECK(s.er == 0.0);
    CHECK(s.f == 100.0);
    s = compute_er_f(rotated);
    CHECK(s.f == 0.0);
    CHECK(s.er == 1.0);
    CHECK(s.counts.substitutions == 25);

    s = compute_er_f({match_frame({}, {entry(0, Doa::UnitX())})});
    CHECK(s.er == 1.0);
    CHECK(s.f == 0.0);
    CHECK(s.counts.deletions == 1);

    // A deletion and an insertion in one segment pair up as a substitution,
    // in different segments they do not.
    const FrameMatch del = match_frame({}, {entry(0, Doa::UnitX())});
    const FrameMatch ins = match_frame({entry(0, Doa::UnitY())}, {});
    CHECK(compute_er_f({del, ins}).counts.substitutions == 1);
    CHECK(compute_er_f({del, ins}, 20.0, 1).counts.substitutions == 0);
    CHECK(compute_er_f({del, ins}, 20.0, 10, {0, 1}).counts.substitutions == 0);
    CHECK_THROWS_AS(compute_er_f({del}, 20.0, 0), RangeError);
}

TEST_CASE("self evaluation is exact") {
    Rng rng(4);
    for (int i = 0; i < 10; ++i) {
        const EventLabelTrack l = oracle::random_track(1 + oracle::pick(rng, 6), 50, 0.3, rng);
        const auto rows = track_to_rows(l);
        const SeldReport r = evaluate(rows, rows);
        CHECK(r.le_cd == 0.0);
        CHECK(r.lr_cd == 100.0);
        CHECK(r.er_20 == 0.0);
        CHECK(r.f_20 == 100.0);
        CHECK(r.table_line() == "0.0 100.0 0.00 100.0");
    }
}

TEST_CASE("azimuth displacement of 10 degrees") {
    Rng rng(5);
    std::vector<LabelRow> refs, preds;
    double expect = 0.0;
    for (int t = 0; t < 40; ++t) {
        const double az = rng.uniform(-170, 170), el = rng.uniform(-60, 60);
        refs.push_back({t, 0, az, el});
        preds.push_back({t, 0, az + 10, el});
        expect += angular_distance(sph_to_cart(az, el), sph_to_cart(az + 10, el));
    }
    const SeldReport r = evaluate(preds, refs);
    CHECK(r.f_20 == 100.0);
    CHECK(r.le_cd == doctest::Approx(expect / 40).epsilon(1e-9));
    CHECK(r.le_cd <= 10.0);
}

TEST_CASE("metrics are invariant to a global rotation") {
    Rng rng(6);
    for (int set = 0; set < 20; ++set) {
        FrameTable p, r;
        for (int t = 0; t < 30; ++t) {
            auto [fp, fr] = random_frame(3, 2, rng);
            p.push_back(fp);
            r.push_back(fr);
        }
        const Eigen::Matrix3d rot = oracle::random_rotation_matrix(rng);
        FrameTable pr = p, rr = r;
        for (auto& f : pr)
            for (auto& e : f) e.doa = rot * e.doa;
        for (auto& f : rr)
            for (auto& e : f) e.doa = rot * e.doa;
        check_same(evaluate_tables({{p, r}}), evaluate_tables({{pr, rr}}), 1e-9);
    }
}

TEST_CASE("a spurious prediction never helps") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        FrameTable p, r;
        for (int t = 0; t < 20; ++t) {
            auto [fp, fr] = random_frame(2, 2, rng);
            p.push_back(fp);
            r.push_back(fr);
        }
        const SeldReport before = evaluate_tables({{p, r}});
        p[static_cast<std::size_t>(oracle::pick(rng, 20))].push_back(entry(oracle::pick(rng, 2), oracle::random_direction(rng)));
        const SeldReport after = evaluate_tables({{p, r}});
        CHECK(after.er_20 >= before.er_20);
        CHECK(after.f_20 <= before.f_20);
    }
}

TEST_CASE("LR ignores DOA perturbations") {
    Rng rng(8);
    FrameTable p, r;
    for (int t = 0; t < 30; ++t) {
        auto [fp, fr] = random_frame(3, 1, rng);
        p.push_back(fp);
        r.push_back(fr);
    }
    FrameTable q = p;
    for (auto& f : q)
        for (auto& e : f) e.doa = oracle::random_direction(rng);
    CHECK(evaluate_tables({{p, r}}).lr_cd == evaluate_tables({{q, r}}).lr_cd);
}

TEST_CASE("exhaustive matcher reproduces the report") {
    Rng rng(9);
    FrameTable p, r;
    for (int t = 0; t < 200; ++t) {
        auto [fp, fr] = random_frame(3, 4, rng);
        p.push_back(fp);
        r.push_back(fr);
    }
    EvalOptions brute;
    brute.matcher = oracle::brute_force_assignment;
    check_same(evaluate_tables({{p, r}}), evaluate_tables({{p, r}}, brute), 1e-9);
}

TEST_CASE("empty and degenerate inputs") {
    const std::vector<LabelRow> refs{{0, 0, 10, 0}, {3, 1, 20, 5}};
    const SeldReport none = evaluate({}, refs);
    CHECK(none.lr_cd == 0.0);
    CHECK(none.f_20 == 0.0);
    CHECK(none.er_20 == 1.0);
    const SeldReport nothing = evaluate({}, {});
    CHECK(nothing.degenerate);
    CHECK(nothing.er_20 == 0.0);
    const SeldReport spurious = evaluate(refs, {});
    CHECK(spurious.degenerate);
    CHECK(spurious.er_20 == 2.0);
}

TEST_CASE("report formats") {
    SeldReport r;
    r.le_cd = 12.345;
    r.lr_cd = 88.0;
    r.er_20 = 0.456;
    r.f_20 = 71.25;
    CHECK(r.table_line() == "12.3 88.0 0.46 71.2");
    CHECK(SeldReport::csv_header().rfind("le_cd,lr_cd,er_20,f_20,", 0) == 0);
    const std::string row = r.csv_row(), header = SeldReport::csv_header();
    CHECK(std::count(row.begin(), row.end(), ',') == std::count(header.begin(), header.end(), ','));
    CHECK(r.key_values().find("f_20=71.2500\n") != std::string::npos);
}
