#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "causal_gate/eval.hpp"
#include "test_support.hpp"

using namespace causal_gate;
using cam::ModelScore;

namespace {

// Independent AUROC: count winning, losing and tied positive-negative pairs.
double auroc_pairs(const std::vector<double>& labels, const std::vector<double>& scores) {
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = 0; j < labels.size(); ++j)
            if (labels[i] == 1 && labels[j] == 0) {
                pairs += 1;
                wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
            }
    return wins / pairs;
}

std::vector<ModelScore> scores_with(const std::vector<double>& r, const std::vector<double>& h) {
    std::vector<ModelScore> s;
    for (std::size_t i = 0; i < r.size(); ++i) s.push_back({std::to_string(i), 0.0, h[i], r[i]});
    return s;
}

}  // namespace

TEST_CASE("mse") {
    const std::vector<double> a{1, 2, 3};
    CHECK(eval::mse(a, a) == 0.0);
    const std::vector<double> zero{0, 0}, pred{1, 3};
    CHECK(eval::mse(zero, pred) == 5.0);
    const std::vector<double> t{1, 4, 2, 8}, p{0, 5, 5, 1}, tp{8, 2, 1, 4}, pp{1, 5, 0, 5};
    CHECK(eval::mse(t, p) == eval::mse(tp, pp));
    CHECK_THROWS_CODE(eval::mse(a, zero), LengthMismatch);
    CHECK_THROWS_CODE(eval::mse(std::span<const double>{}, std::span<const double>{}), LengthMismatch);
}

TEST_CASE("auroc examples") {
    const std::vector<double> labels{1, 0, 1, 0};
    const std::vector<double> sep{0.9, 0.1, 0.8, 0.2}, flat{0.5, 0.5, 0.5, 0.5}, mixed{0.9, 0.8, 0.7, 0.1};
    CHECK(eval::auroc(labels, sep) == 1.0);
    CHECK(eval::auroc(labels, flat) == 0.5);
    CHECK(eval::auroc(labels, mixed) == 0.75);
    const std::vector<double> ones{1, 1};
    CHECK_THROWS_CODE(eval::auroc(ones, std::vector<double>{0.1, 0.2}), SingleClass);
}

TEST_CASE("auroc matches pair counting and ignores monotone transforms") {
    std::mt19937_64 g(1);
    std::uniform_int_distribution<int> coarse(0, 20);
    std::bernoulli_distribution coin(0.4);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> labels(150), scores(150);
        for (std::size_t i = 0; i < 150; ++i) {
            labels[i] = coin(g) ? 1 : 0;
            scores[i] = coarse(g) / 20.0;  // many ties
        }
        labels[0] = 1;
        labels[1] = 0;
        const double a = eval::auroc(labels, scores);
        CHECK(a == doctest::Approx(auroc_pairs(labels, scores)).epsilon(1e-12));
        std::vector<double> mapped(scores.size());
        const double k = 0.5 + trial;
        for (std::size_t i = 0; i < scores.size(); ++i) mapped[i] = std::exp(k * scores[i]) + std::pow(scores[i], 3);
        CHECK(eval::auroc(labels, mapped) == doctest::Approx(a).epsilon(1e-12));
    }
}

TEST_CASE("top fraction size and mean") {
    CHECK(eval::top_count(100, 0.1) == 10);
    CHECK(eval::top_count(25, 0.1) == 3);
    CHECK(eval::top_count(1, 0.1) == 1);
    CHECK(eval::top_count(7, 1.0) == 7);

    std::vector<double> r(100), h(100), test(100);
    for (std::size_t i = 0; i < 100; ++i) {
        r[i] = static_cast<double>((i * 37) % 100);
        h[i] = static_cast<double>(99 - i);
        test[i] = static_cast<double>(i) * 0.5;
    }
    const auto s = scores_with(r, h);
    // oracle: models with r in 0..9
    double sum = 0;
    for (std::size_t i = 0; i < 100; ++i)
        if (r[i] < 10) sum += test[i];
    CHECK(eval::top_fraction_mean(s, cam::RankKey::r, test) == doctest::Approx(sum / 10));
    // by h: the 10 largest indices
    CHECK(eval::top_fraction_mean(s, cam::RankKey::h, test) == doctest::Approx((90 + 99) / 2.0 * 0.5));
    const double grand = std::accumulate(test.begin(), test.end(), 0.0) / 100;
    CHECK(eval::top_fraction_mean(s, cam::RankKey::r, test, 1.0) == doctest::Approx(grand));
    CHECK(eval::top_fraction_mean(s, cam::RankKey::h, test, 1.0) == doctest::Approx(grand));
    const std::vector<double> one{4.2};
    CHECK(eval::top_fraction_mean(scores_with({1}, {1}), cam::RankKey::r, one) == 4.2);
}

TEST_CASE("with lambda zero the r and h top means coincide") {
    std::mt19937_64 g(2);
    std::uniform_real_distribution<double> u;
    cam::CamConfig c;
    c.fixed_lambda = 0.0;
    std::vector<ModelScore> s;
    std::vector<double> test;
    for (int m = 0; m < 40; ++m) {
        s.push_back(cam::cam_score(u(g) * 100, u(g), c, std::to_string(m)));
        test.push_back(u(g));
    }
    CHECK(eval::top_fraction_mean(s, cam::RankKey::r, test) == eval::top_fraction_mean(s, cam::RankKey::h, test));
}

TEST_CASE("normalized inversion count examples") {
    const std::vector<double> sorted{1, 2, 3, 4}, reversed{4, 3, 2, 1}, mixed{3, 1, 2}, tied{2, 2, 2};
    CHECK(eval::inversion_count_normalized(sorted) == 0.0);
    CHECK(eval::inversion_count_normalized(reversed) == 1.0);
    CHECK(eval::inversion_count_normalized(mixed) == doctest::Approx(2.0 / 3.0));
    CHECK(eval::inversion_count_normalized(tied) == 0.0);
    CHECK_THROWS_CODE(eval::inversion_count_normalized(std::vector<double>{1}), TooFewModels);
}

TEST_CASE("merge inversion count equals the brute-force pair count") {
    std::mt19937_64 g(3);
    std::uniform_int_distribution<int> v(0, 30);
    for (std::size_t n = 0; n <= 200; n += 7) {
        std::vector<double> x(n);
        for (auto& e : x) e = v(g);
        std::uint64_t pairs = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) pairs += x[i] > x[j];
        CHECK(eval::inversion_count(x) == pairs);
        CHECK(eval::inversion_count_brute(x) == pairs);
    }
}

TEST_CASE("ranking order rearranges the test metric") {
    const auto s = scores_with({3, 1, 2}, {0, 0, 0});
    const std::vector<double> test{30, 10, 20};
    const std::vector<std::string> ranking{"1", "2", "0"};
    CHECK(eval::in_rank_order(ranking, s, test) == std::vector<double>{10, 20, 30});
}

TEST_CASE("perturbed average") {
    const data::Table t({{"y", VariableKind::continuous(), {}}}, {{1, 2, 3}});
    const data::Table u({{"y", VariableKind::continuous(), {}}}, {{0, 0, 0}});
    auto predict = [](std::size_t m, const data::Table& table) {
        return std::vector<double>(table.num_rows(), static_cast<double>(m));
    };
    const std::vector<data::Table> single{t};
    const auto one = eval::perturbed_average(2, single, "y", predict);
    CHECK(one[0] == eval::mse(t.column(0), std::vector<double>{0, 0, 0}));
    const std::vector<data::Table> nine(9, t);
    const auto repeated = eval::perturbed_average(2, nine, "y", predict);
    for (std::size_t m = 0; m < 2; ++m) CHECK(repeated[m] == doctest::Approx(one[m]).epsilon(1e-14));
    const std::vector<data::Table> both{t, u};
    const auto avg = eval::perturbed_average(2, both, "y", predict);
    CHECK(avg[1] == doctest::Approx((eval::mse(t.column(0), std::vector<double>{1, 1, 1}) + 1.0) / 2));
}

TEST_CASE("spearman with average ranks") {
    const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 4, 6, 8, 10}, c{5, 4, 3, 2, 1};
    CHECK(eval::spearman(a, b) == doctest::Approx(1.0));
    CHECK(eval::spearman(a, c) == doctest::Approx(-1.0));
    // ranks of {1,1,2} are {1.5,1.5,3}; centered {-0.5,-0.5,1} against {-1,0,1}
    const std::vector<double> t{1, 1, 2}, r{1, 2, 3};
    CHECK(eval::spearman(t, r) == doctest::Approx(1.5 / std::sqrt(1.5 * 2.0)));
    const std::vector<double> flat{3, 3, 3};
    CHECK(eval::spearman(flat, r) == 0.0);
}

TEST_CASE("delta report sign conventions") {
    const auto s = scores_with({1, 2, 3, 4}, {4, 3, 2, 1});
    const std::vector<double> test{1.0, 2.0, 3.0, 4.0};
    const auto cam_sum = eval::summarize(s, cam::RankKey::r, test, cam::HMetric::mse, 0.25);
    const auto stat_sum = eval::summarize(s, cam::RankKey::h, test, cam::HMetric::mse, 0.25);
    CHECK(cam_sum.top_mean == 1.0);
    CHECK(stat_sum.top_mean == 4.0);
    CHECK(cam_sum.ic == 0.0);
    CHECK(stat_sum.ic == 1.0);
    const auto rep = eval::delta_report(cam_sum, stat_sum, cam::HMetric::mse);
    CHECK(rep.delta_top == 3.0);
    CHECK(rep.delta_ic == 1.0);
    const auto swapped = eval::delta_report(stat_sum, cam_sum, cam::HMetric::mse);
    CHECK(swapped.delta_top == -rep.delta_top);
    CHECK(swapped.delta_ic == -rep.delta_ic);
    const auto same = eval::delta_report(cam_sum, cam_sum, cam::HMetric::mse);
    CHECK(same.delta_top == 0.0);
    CHECK(same.delta_ic == 0.0);

    auto other = cam_sum;
    other.ranking[0] = "99";
    CHECK_THROWS_CODE(eval::delta_report(other, stat_sum, cam::HMetric::mse), PopulationMismatch);
}

TEST_CASE("auroc reports flip the sign and rank on the negated metric") {
    const auto s = scores_with({1, 2, 3}, {0.6, 0.7, 0.9});
    const std::vector<double> test{0.9, 0.8, 0.6};  // higher is better
    const auto cam_sum = eval::summarize(s, cam::RankKey::r, test, cam::HMetric::auroc, 0.3);
    CHECK(cam_sum.ic == 0.0);
    CHECK(cam_sum.top_mean == 0.9);
    const auto rep = eval::build_report(s, test, cam::HMetric::auroc, 0.3);
    // h ranks best-first by descending AUROC: model 2 first, the worst on test
    CHECK(rep.stat.ranking.front() == "2");
    CHECK(rep.stat.ic == 1.0);
    CHECK(rep.delta_top == doctest::Approx(0.9 - 0.6));
    CHECK(rep.delta_ic == 1.0);
    const auto j = eval::to_json(rep);
    CHECK(j.contains("auroc10_h"));
    CHECK(j.contains("delta_auroc"));
}

TEST_CASE("report serialization") {
    const auto s = scores_with({2, 1, 3}, {1, 2, 3});
    const std::vector<double> test{0.5, 0.25, 0.75};
    const auto rep = eval::build_report(s, test, cam::HMetric::mse, 0.1);
    const auto j = eval::to_json(rep);
    for (const char* key : {"mse10", "cam10", "ic_mse", "ic_cam", "delta_mse", "delta_ic"}) CHECK(j.contains(key));
    CHECK(j["cam10"] == 0.25);
    CHECK(j["mse10"] == 0.5);
    CHECK(j["delta_mse"] == 0.25);
    const auto csv = eval::to_csv(rep);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "model_id,f,h,r,test,rank_cam,rank_h");
    int rows = 0;
    while (std::getline(in, line)) rows += !line.empty();
    CHECK(rows == 3);
}
