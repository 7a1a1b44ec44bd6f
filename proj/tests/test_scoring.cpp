#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "causal_gate/scoring.hpp"
#include "test_support.hpp"

using namespace causal_gate;
using data::Table;
using graph::Dag;

namespace {

const VariableKind kCont = VariableKind::continuous();

data::ColumnSpec cont(std::string name) { return {std::move(name), kCont, {}}; }
data::ColumnSpec disc(std::string name, int k) { return {std::move(name), VariableKind::discrete(k), {}}; }

std::vector<double> gaussian(std::size_t n, std::mt19937_64& g, double mean = 0, double sd = 1) {
    std::normal_distribution<double> d(mean, sd);
    std::vector<double> v(n);
    for (auto& x : v) x = d(g);
    return v;
}

double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double cov(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = mean(a), mb = mean(b);
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
    return s / static_cast<double>(a.size());
}

double gauss_entropy(double var) { return 0.5 * std::log(2 * std::numbers::pi * std::numbers::e * var); }

// Closed-form simple regression: residual variance var(x) - cov(x,p)^2 / var(p).
double oracle_one_parent(const std::vector<double>& x, const std::vector<double>& p) {
    return gauss_entropy(cov(x, x) - cov(x, p) * cov(x, p) / cov(p, p));
}

// Linear-Gaussian chain a -> b with b = 0.8 a + noise.
Table chain_table(std::size_t n, std::uint64_t seed, double coef = 0.8) {
    std::mt19937_64 g(seed);
    auto a = gaussian(n, g, 1.0, 1.5);
    auto e = gaussian(n, g);
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = coef * a[i] + e[i];
    return Table({cont("a"), cont("b")}, {a, b});
}

}  // namespace

TEST_CASE("discrete entropy of a fair coin is ln 2") {
    std::vector<double> x(100);
    for (std::size_t i = 0; i < 100; ++i) x[i] = static_cast<double>(i % 2);
    const Table t({disc("x", 2)}, {x});
    CHECK(scoring::cond_entropy_discrete(t, 0, {}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("discrete entropy of a uniform k-ary column is ln k") {
    std::vector<double> x(600);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i % 6);
    const Table t({disc("x", 6)}, {x});
    CHECK(std::abs(scoring::cond_entropy_discrete(t, 0, {}) - std::log(6.0)) < 1.0 / 600);
}

TEST_CASE("discrete conditional entropy zero cases and hand-computed value") {
    const std::vector<double> p{0, 0, 1, 1, 1, 0, 1, 0};
    const Table same({disc("x", 2), disc("p", 2)}, {p, p});
    const std::vector<std::size_t> parent{1};
    CHECK(scoring::cond_entropy_discrete(same, 0, parent) == doctest::Approx(0.0));
    const Table constant({disc("x", 3)}, {{2, 2, 2, 2}});
    CHECK(scoring::cond_entropy_discrete(constant, 0, {}) == doctest::Approx(0.0));

    // p=0 cell: x = {0,0,0,1}; p=1 cell: x = {1,1,1,1}
    const Table t({disc("x", 2), disc("p", 2)}, {{0, 0, 1, 1, 1, 0, 1, 1}, p});
    const double h_cell = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
    CHECK(scoring::cond_entropy_discrete(t, 0, parent) == doctest::Approx(0.5 * h_cell).epsilon(1e-12));

    const Table c({cont("x"), disc("p", 2)}, {{0.5, 1}, {0, 1}});
    CHECK_THROWS_CODE(scoring::cond_entropy_discrete(c, 0, parent), NotDiscrete);
}

TEST_CASE("gaussian entropy of a unit-variance column") {
    // ML variance (divide by N) of {1,-1,1,-1} is exactly 1
    const Table t({cont("x")}, {{1, -1, 1, -1, 2, 0, 0, -2, 1, -1}});  // variance 1.4
    const Table u({cont("x")}, {{1, -1, 1, -1}});
    CHECK(scoring::cond_entropy_gaussian(u, 0, {}) == doctest::Approx(1.4189385332046727).epsilon(1e-12));
    CHECK(scoring::cond_entropy_gaussian(t, 0, {}) == doctest::Approx(gauss_entropy(1.4)).epsilon(1e-12));
}

TEST_CASE("gaussian entropy with one parent matches the closed-form regression") {
    const Table t = chain_table(2000, 7);
    const std::vector<std::size_t> parent{0};
    CHECK(scoring::cond_entropy_gaussian(t, 1, parent) ==
          doctest::Approx(oracle_one_parent(t.column(1), t.column(0))).epsilon(1e-9));
}

TEST_CASE("gaussian entropy with two parents matches partial-regression oracle") {
    std::mt19937_64 g(3);
    const std::size_t n = 3000;
    auto a = gaussian(n, g), b = gaussian(n, g), e = gaussian(n, g, 0, 0.5);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = 1.5 * a[i] - 0.7 * b[i] + e[i] + 2;
    // Frisch-Waugh: residualize x and b on a, then regress residuals
    auto resid = [&](const std::vector<double>& y, const std::vector<double>& p) {
        const double beta = cov(y, p) / cov(p, p);
        const double alpha = mean(y) - beta * mean(p);
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - alpha - beta * p[i];
        return r;
    };
    const auto rx = resid(x, a), rb = resid(b, a);
    const double var = cov(rx, rx) - cov(rx, rb) * cov(rx, rb) / cov(rb, rb);
    const Table t({cont("x"), cont("a"), cont("b")}, {x, a, b});
    const std::vector<std::size_t> parents{1, 2};
    CHECK(scoring::cond_entropy_gaussian(t, 0, parents) == doctest::Approx(gauss_entropy(var)).epsilon(1e-8));
}

TEST_CASE("deterministic dependence hits the variance floor") {
    const std::vector<double> p{1, 2, 3, 4, 5, 6};
    std::vector<double> x(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) x[i] = 3 * p[i] - 1;
    const Table t({cont("x"), cont("p")}, {x, p});
    const std::vector<std::size_t> parent{1};
    const double h = scoring::cond_entropy_gaussian(t, 0, parent);
    CHECK(std::isfinite(h));
    CHECK(h == doctest::Approx(gauss_entropy(scoring::kVarianceFloor)).epsilon(1e-3));
}

TEST_CASE("collinear parents are handled by jitter") {
    std::mt19937_64 g(5);
    auto a = gaussian(500, g), x = gaussian(500, g);
    const Table t({cont("x"), cont("a"), cont("a2")}, {x, a, a});
    const std::vector<std::size_t> both{1, 2}, one{1};
    CHECK(scoring::cond_entropy_gaussian(t, 0, both) ==
          doctest::Approx(scoring::cond_entropy_gaussian(t, 0, one)).epsilon(1e-6));
}

TEST_CASE("gaussian entropy needs enough rows") {
    const Table t({cont("x"), cont("p")}, {{1, 2}, {3, 5}});
    const std::vector<std::size_t> parent{1};
    CHECK_THROWS_CODE(scoring::cond_entropy_gaussian(t, 0, parent), TooFewRows);
}

TEST_CASE("independent parent leaves the entropy unchanged") {
    std::mt19937_64 g(11);
    auto x = gaussian(50000, g, 0, 2), p = gaussian(50000, g);
    const Table t({cont("x"), cont("p")}, {x, p});
    const std::vector<std::size_t> parent{1};
    CHECK(std::abs(scoring::cond_entropy_gaussian(t, 0, parent) - scoring::cond_entropy_gaussian(t, 0, {})) < 0.01);
}

TEST_CASE("mixed: continuous child with an uninformative binary parent") {
    std::mt19937_64 g(13);
    const std::size_t n = 20000;
    auto c = gaussian(n, g), e = gaussian(n, g);
    std::bernoulli_distribution coin(0.5);
    std::vector<double> d(n), x(n);
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = coin(g) ? 1 : 0;
        x[i] = 0.5 * c[i] + e[i];
    }
    const Table t({cont("x"), cont("c"), disc("d", 2)}, {x, c, d});
    const std::vector<std::size_t> mixed{1, 2}, cont_only{1};
    CHECK(std::abs(scoring::cond_entropy_mixed(t, 0, mixed) - scoring::cond_entropy_gaussian(t, 0, cont_only)) < 0.01);
}

TEST_CASE("mixed: cell entropies are weighted by cell frequency") {
    std::mt19937_64 g(17);
    const std::size_t n = 4000;
    std::vector<double> d(n), c = gaussian(n, g), x(n);
    std::normal_distribution<double> z;
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = i < 1000 ? 0 : 1;
        x[i] = (d[i] == 0 ? 2.0 * c[i] + 0.5 * z(g) : -c[i] + 3.0 * z(g));
    }
    auto slice = [](const std::vector<double>& v, std::size_t lo, std::size_t hi) {
        return std::vector<double>(v.begin() + static_cast<long>(lo), v.begin() + static_cast<long>(hi));
    };
    const double oracle = 0.25 * oracle_one_parent(slice(x, 0, 1000), slice(c, 0, 1000)) +
                          0.75 * oracle_one_parent(slice(x, 1000, n), slice(c, 1000, n));
    const Table t({cont("x"), cont("c"), disc("d", 2)}, {x, c, d});
    const std::vector<std::size_t> parents{1, 2};
    CHECK(scoring::cond_entropy_mixed(t, 0, parents) == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("mixed: a single-cell partition equals the gaussian case exactly") {
    std::mt19937_64 g(19);
    auto x = gaussian(300, g), c = gaussian(300, g);
    const Table t({cont("x"), cont("c"), disc("d", 3)}, {x, c, std::vector<double>(300, 2.0)});
    const std::vector<std::size_t> parents{1, 2}, cont_only{1};
    CHECK(scoring::cond_entropy_mixed(t, 0, parents) == scoring::cond_entropy_gaussian(t, 0, cont_only));
}

TEST_CASE("mixed: sparse cells fall back to the pooled fit and are counted") {
    std::mt19937_64 g(23);
    auto x = gaussian(50, g), c = gaussian(50, g);
    std::vector<double> d(50, 0.0);
    d[0] = 1;  // one-row cell
    const Table t({cont("x"), cont("c"), disc("d", 2)}, {x, c, d});
    const std::vector<std::size_t> parents{1, 2};
    scoring::EntropyDiagnostics diag;
    CHECK(std::isfinite(scoring::cond_entropy_mixed(t, 0, parents, &diag)));
    CHECK(diag.fallback_cells == 1);
}

TEST_CASE("mixed: discrete child independent of a continuous parent") {
    std::mt19937_64 g(29);
    const std::size_t n = 20000;
    auto c = gaussian(n, g);
    std::discrete_distribution<int> cat({0.5, 0.3, 0.2});
    std::vector<double> x(n);
    for (auto& v : x) v = cat(g);
    const Table t({disc("x", 3), cont("c")}, {x, c});
    const std::vector<std::size_t> parent{1};
    CHECK(std::abs(scoring::cond_entropy_mixed(t, 0, parent) - scoring::cond_entropy_discrete(t, 0, {})) < 0.02);
}

TEST_CASE("mixed: discrete child driven by a continuous parent has lower entropy") {
    std::mt19937_64 g(31);
    const std::size_t n = 5000;
    auto c = gaussian(n, g);
    std::uniform_real_distribution<double> u;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = u(g) < 1 / (1 + std::exp(-3 * c[i])) ? 1 : 0;
    const Table t({disc("x", 2), cont("c")}, {x, c});
    const std::vector<std::size_t> parent{1};
    // oracle: mean negative log-likelihood under the true logistic law bounds the fitted one from above
    double nll = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = 1 / (1 + std::exp(-3 * c[i]));
        nll -= std::log(x[i] == 1 ? p : 1 - p);
    }
    nll /= static_cast<double>(n);
    const double h = scoring::cond_entropy_mixed(t, 0, parent);
    CHECK(h <= nll + 1e-9);
    CHECK(h > nll - 0.01);
    CHECK(h < scoring::cond_entropy_discrete(t, 0, {}));
}

TEST_CASE("mixed: a separable discrete child saturates near zero entropy") {
    const Table t({disc("x", 2), cont("c")}, {{0, 0, 0, 1, 1, 1}, {-3, -2, -1, 1, 2, 3}});
    const std::vector<std::size_t> parent{1};
    const double h = scoring::cond_entropy_mixed(t, 0, parent);
    CHECK(h >= 0.0);
    CHECK(h < 1e-3);
}

TEST_CASE("edgeless graph log-likelihood is the sum of marginals") {
    const Table t = chain_table(500, 2);
    const Dag d({"a", "b"});
    const auto rep = scoring::log_likelihood(d, t);
    const double oracle = -500.0 * (gauss_entropy(cov(t.column(0), t.column(0))) + gauss_entropy(cov(t.column(1), t.column(1))));
    CHECK(rep.log_likelihood == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("chain log-likelihood matches summed OLS log-densities") {
    const Table t = chain_table(5000, 37);
    const auto& a = t.column(0);
    const auto& b = t.column(1);
    const double va = cov(a, a), ma = mean(a);
    const double beta = cov(a, b) / va, alpha = mean(b) - beta * ma;
    double rss = 0;
    for (std::size_t i = 0; i < a.size(); ++i) rss += std::pow(b[i] - alpha - beta * a[i], 2);
    const double vb = rss / 5000.0;
    double ll = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ll += -0.5 * std::log(2 * std::numbers::pi * va) - std::pow(a[i] - ma, 2) / (2 * va);
        ll += -0.5 * std::log(2 * std::numbers::pi * vb) - std::pow(b[i] - alpha - beta * a[i], 2) / (2 * vb);
    }
    const auto rep = scoring::log_likelihood(Dag({"a", "b"}, {}, {{0, 1}}), t);
    CHECK(std::abs(rep.log_likelihood - ll) <= 0.005 * std::abs(ll));
}

TEST_CASE("score report invariants") {
    std::mt19937_64 g(41);
    const std::size_t n = 800;
    auto a = gaussian(n, g), e = gaussian(n, g), z = gaussian(n, g);
    std::vector<double> d(n), x(n);
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = a[i] + z[i] > 0 ? 1 : 0;
        x[i] = a[i] + d[i] + e[i];
    }
    const Table t({cont("a"), disc("d", 2), cont("x")}, {a, d, x});
    const Dag dag({"a", "d", "x"}, {kCont, VariableKind::discrete(2), kCont}, {{0, 1}, {0, 2}, {1, 2}});
    const auto rep = scoring::log_likelihood(dag, t);
    double sum = 0;
    for (const auto& [name, h] : rep.per_node_entropy) sum += h;
    CHECK(std::abs(rep.log_likelihood - (-static_cast<double>(n) * sum)) < 1e-9);
    CHECK(rep.bic == -rep.log_likelihood + std::log2(static_cast<double>(n)) / 2 * static_cast<double>(rep.dimension));
    // a: 2; d: (2-1)(1+1); x: (1+2) per cell, 2 cells
    CHECK(rep.dimension == 2 + 2 + 6);
    CHECK(rep.per_node_entropy[0].first == "a");
    const auto j = scoring::to_json(rep);
    CHECK(j.at("per_node_entropy").contains("x"));
    CHECK(j.at("dimension") == 10);
}

TEST_CASE("log-likelihood is decomposable over components") {
    const Table t1 = chain_table(400, 43);
    const Table t2 = chain_table(400, 44, -1.2);
    const Table both({cont("a"), cont("b"), cont("c"), cont("d")},
                     {t1.column(0), t1.column(1), t2.column(0), t2.column(1)});
    const double whole = scoring::log_likelihood(Dag({"a", "b", "c", "d"}, {}, {{0, 1}, {2, 3}}), both).log_likelihood;
    const double part1 = scoring::log_likelihood(Dag({"a", "b"}, {}, {{0, 1}}), t1).log_likelihood;
    const double part2 = scoring::log_likelihood(Dag({"a", "b"}, {}, {{0, 1}}), t2).log_likelihood;
    CHECK(whole == doctest::Approx(part1 + part2).epsilon(1e-12));
}

TEST_CASE("adding an edge never decreases the log-likelihood") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 g(seed);
        auto a = gaussian(200, g), b = gaussian(200, g), c = gaussian(200, g);
        const Table t({cont("a"), cont("b"), cont("c")}, {a, b, c});
        const double base = scoring::log_likelihood(Dag({"a", "b", "c"}, {}, {{0, 2}}), t).log_likelihood;
        const double more = scoring::log_likelihood(Dag({"a", "b", "c"}, {}, {{0, 2}, {1, 2}}), t).log_likelihood;
        CHECK(more >= base - 1e-9);
    }
}

TEST_CASE("true edges raise the log-likelihood over the edge-deleted graph") {
    int wins = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Table t = chain_table(5000, 1000 + seed, 0.3);
        const double truth = scoring::log_likelihood(Dag({"a", "b"}, {}, {{0, 1}}), t).log_likelihood;
        const double deleted = scoring::log_likelihood(Dag({"a", "b"}), t).log_likelihood;
        wins += truth > deleted;
    }
    CHECK(wins >= 95);
}

TEST_CASE("missing DAG columns are a schema mismatch") {
    const Table t = chain_table(50, 1);
    CHECK_THROWS_CODE(scoring::log_likelihood(Dag({"a", "z"}), t), SchemaMismatch);
    CHECK_THROWS_CODE(scoring::causal_assurance_term(Dag({"a", "z"}, {}, {{0, 1}}), "z", t), SchemaMismatch);
}

TEST_CASE("causal assurance term on the true target column") {
    const Table t = chain_table(1000, 53);
    const Dag d({"a", "b"}, {}, {{0, 1}});
    CHECK(scoring::causal_assurance_term(d, "b", t) ==
          doctest::Approx(1000.0 * oracle_one_parent(t.column(1), t.column(0))).epsilon(1e-9));
}

TEST_CASE("causal assurance term is zero for a parentless target") {
    const Table t = chain_table(100, 59);
    CHECK(scoring::causal_assurance_term(Dag({"a", "b"}, {}, {{0, 1}}), "a", t) == 0.0);
    CHECK(scoring::causal_assurance_term(Dag({"a", "b"}), "b", t) == 0.0);
}

TEST_CASE("causal assurance term ignores the target's children") {
    std::mt19937_64 g(61);
    auto a = gaussian(500, g), y = gaussian(500, g), c = gaussian(500, g);
    const Table t({cont("a"), cont("y"), cont("c")}, {a, y, c});
    const double with_child = scoring::causal_assurance_term(Dag({"a", "y", "c"}, {}, {{0, 1}, {1, 2}}), "y", t);
    const double without = scoring::causal_assurance_term(Dag({"a", "y", "c"}, {}, {{0, 1}}), "y", t);
    CHECK(with_child == without);
}

TEST_CASE("noisier predictions raise the causal assurance term") {
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 g(seed + 500);
        const Table t = chain_table(10000, seed + 700);
        const auto& a = t.column(0);
        std::vector<double> clean(a.size()), noisy(a.size());
        auto e1 = gaussian(a.size(), g, 0, 0.3), e2 = gaussian(a.size(), g, 0, 0.9);
        for (std::size_t i = 0; i < a.size(); ++i) {
            clean[i] = 0.8 * a[i] + e1[i];
            noisy[i] = 0.8 * a[i] + e2[i];
        }
        const Dag d({"a", "b"}, {}, {{0, 1}});
        const double f_clean = scoring::causal_assurance_term(d, "b", data::substitute_predictions(t, "b", clean));
        const double f_noisy = scoring::causal_assurance_term(d, "b", data::substitute_predictions(t, "b", noisy));
        ok += f_noisy > f_clean;
    }
    CHECK(ok >= 18);
}
