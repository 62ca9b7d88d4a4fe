#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "koopgrip/errors.hpp"
#include "koopgrip/metrics.hpp"

using namespace koopgrip;

namespace {

std::vector<RunRecord> load(const std::string& name) {
    std::ifstream is(std::string(KOOPGRIP_DATA_DIR) + "/" + name);
    REQUIRE(is.good());
    return read_run_records(is);
}

// additive two-way ANOVA from cell sums, written independently of the library
struct Oracle {
    double ssPos, ssSub, ssRes;
};

Oracle anova_oracle(const std::vector<RunRecord>& runs) {
    std::map<std::string, std::vector<double>> byPos, bySub;
    double grand = 0;
    for (const auto& r : runs) {
        byPos[r.position].push_back(r.metric);
        bySub[r.subject].push_back(r.metric);
        grand += r.metric;
    }
    grand /= double(runs.size());
    auto ss = [&](const auto& groups) {
        double s = 0;
        for (const auto& [k, v] : groups) {
            double m = 0;
            for (double x : v) m += x;
            m /= double(v.size());
            s += double(v.size()) * (m - grand) * (m - grand);
        }
        return s;
    };
    double total = 0;
    for (const auto& r : runs) total += (r.metric - grand) * (r.metric - grand);
    const double p = ss(byPos), s = ss(bySub);
    return {p, s, total - p - s};
}

}  // namespace

TEST_CASE("wMAPE") {
    const std::vector<double> a{1, 1}, p{2, 0};
    CHECK(wmape(a, p) == doctest::Approx(100.0));
    CHECK(wmape(a, a) == 0.0);
    const std::vector<double> g{3, -4, 10}, h{2.5, -3, 11};
    std::vector<double> g2, h2;
    for (std::size_t i = 0; i < 3; ++i) g2.push_back(7 * g[2 - i]), h2.push_back(7 * h[2 - i]);
    CHECK(wmape(g2, h2) == doctest::Approx(wmape(g, h)));
    CHECK_THROWS_AS(wmape(std::vector<double>{0, 0}, a), NumericError);
    CHECK_THROWS_AS(wmape(a, std::vector<double>{1}), InputError);
}

TEST_CASE("block effects") {
    std::vector<RunRecord> runs{{"a", "1", 1, 3}, {"a", "1", 2, 5}, {"a", "2", 1, 5}, {"a", "2", 2, 7}};
    const auto pos = block_effects(runs, BlockBy::Position);
    CHECK(pos.grandMean == doctest::Approx(5));
    CHECK(pos.blocks[0].effect == doctest::Approx(-1));
    CHECK(pos.blocks[1].effect == doctest::Approx(1));
    CHECK(block_effects(runs, BlockBy::Subject).blocks[0].effect == doctest::Approx(0));

    const auto est = load("runs_estimation.csv");
    const auto e = block_effects(est, BlockBy::Position);
    CHECK(e.blocks[0].effect == doctest::Approx(0.2).epsilon(0.25));
    CHECK(e.blocks[1].effect == doctest::Approx(-0.2).epsilon(0.25));
    const auto s = block_effects(est, BlockBy::Subject);
    double sum = 0;
    for (const auto& b : s.blocks) sum += b.effect;
    CHECK(std::abs(sum) < 1e-12);
}

TEST_CASE("ANOVA decomposition against an independent oracle") {
    for (const char* name : {"runs_estimation.csv", "runs_prediction.csv"}) {
        const auto runs = load(name);
        REQUIRE(runs.size() == 52);
        const auto t = anova_rbd(runs);
        const auto o = anova_oracle(runs);
        CHECK(t.position.df == 1);
        CHECK(t.subject.df == 12);
        CHECK(t.residual.df == 38);
        CHECK(t.position.sumSq == doctest::Approx(o.ssPos).epsilon(1e-12));
        CHECK(t.subject.sumSq == doctest::Approx(o.ssSub).epsilon(1e-12));
        CHECK(t.residual.sumSq == doctest::Approx(o.ssRes).epsilon(1e-10));
        CHECK(std::abs(t.totalSumSq - t.position.sumSq - t.subject.sumSq - t.residual.sumSq) < 1e-9);
        const double f = (o.ssPos / 1) / (o.ssRes / 38);
        CHECK(t.position.f == doctest::Approx(f).epsilon(1e-10));
        const boost::math::fisher_f dist(1, 38);
        CHECK(t.position.p == doctest::Approx(boost::math::cdf(boost::math::complement(dist, f))).epsilon(1e-9));
    }
}

TEST_CASE("ANOVA degenerate and unbalanced layouts") {
    std::vector<RunRecord> flat;
    for (const char* s : {"a", "b", "c"})
        for (const char* p : {"1", "2"}) flat.push_back({s, p, 1, 4.0});
    const auto t = anova_rbd(flat);
    CHECK(t.position.f == 0.0);
    CHECK(t.position.p == 1.0);
    flat.pop_back();
    CHECK_THROWS_AS(anova_rbd(flat), InputError);
}

TEST_CASE("F survival and incomplete beta match Boost") {
    for (double a : {0.5, 1.0, 6.0, 19.0})
        for (double b : {0.5, 2.0, 19.0})
            for (double x : {0.01, 0.3, 0.5, 0.9, 0.999})
                CHECK(incomplete_beta(a, b, x) == doctest::Approx(boost::math::ibeta(a, b, x)).epsilon(1e-10));
    for (double f : {0.03, 0.66, 2.52, 10.0}) {
        for (auto [d1, d2] : {std::pair{1.0, 38.0}, std::pair{12.0, 38.0}, std::pair{3.0, 7.0}}) {
            const boost::math::fisher_f dist(d1, d2);
            CHECK(f_survival(f, d1, d2) == doctest::Approx(boost::math::cdf(boost::math::complement(dist, f))).epsilon(1e-10));
        }
    }
}

TEST_CASE("summary statistics") {
    const std::vector<double> v{5, 3, 1, 4, 2};
    const auto s = summary_stats(v);
    CHECK(s.min == 1);
    CHECK(s.q1 == 2);
    CHECK(s.median == 3);
    CHECK(s.mean == 3);
    CHECK(s.q3 == 4);
    CHECK(s.max == 5);
    const auto one = summary_stats(std::vector<double>{2.5});
    CHECK(one.min == 2.5);
    CHECK(one.q3 == 2.5);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    std::vector<double> r(37);
    for (auto& x : r) x = n(rng);
    auto sorted = r;
    std::sort(sorted.begin(), sorted.end());
    // type-7: h = (n-1) q
    auto q7 = [&](double q) {
        const double h = 36 * q;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        return sorted[lo] + (h - lo) * (sorted[std::min<std::size_t>(lo + 1, 36)] - sorted[lo]);
    };
    const auto rs = summary_stats(r);
    CHECK(rs.q1 == doctest::Approx(q7(0.25)));
    CHECK(rs.median == doctest::Approx(q7(0.5)));
    CHECK(rs.q3 == doctest::Approx(q7(0.75)));
}

TEST_CASE("run record round trip") {
    const auto runs = load("runs_prediction.csv");
    std::ostringstream os;
    write_run_records(os, runs);
    std::istringstream is(os.str());
    const auto back = read_run_records(is);
    std::ostringstream again;
    write_run_records(again, back);
    CHECK(again.str() == os.str());
    std::istringstream bad("a,1,x,2\n");
    CHECK_THROWS_AS(read_run_records(bad), InputError);
}
