#include "causal_gate/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "causal_gate/error.hpp"

namespace causal_gate::eval {

std::size_t top_count(std::size_t n, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw Error(ErrorCode::InvalidConfig, "top fraction must be in (0, 1]");
    const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n, 1));
}

std::vector<double> in_rank_order(std::span<const std::string> ranking, std::span<const cam::ModelScore> scores,
                                  std::span<const double> test_metric) {
    if (scores.size() != test_metric.size())
        throw Error(ErrorCode::LengthMismatch, "scores and test metrics differ in length");
    std::unordered_map<std::string, std::size_t> where;
    for (std::size_t i = 0; i < scores.size(); ++i) where.emplace(scores[i].model_id, i);
    std::vector<double> out;
    out.reserve(ranking.size());
    for (const auto& id : ranking) {
        const auto it = where.find(id);
        if (it == where.end()) throw Error(ErrorCode::PopulationMismatch, "ranking names unknown model '" + id + "'");
        out.push_back(test_metric[it->second]);
    }
    return out;
}

double top_fraction_mean(std::span<const cam::ModelScore> scores, cam::RankKey key, std::span<const double> test_metric,
                         double fraction, cam::HDirection direction) {
    if (scores.empty()) throw Error(ErrorCode::EmptyModelSet, "no models");
    const auto ranking = cam::rank(scores, key, direction);
    const auto ordered = in_rank_order(ranking, scores, test_metric);
    const std::size_t k = top_count(ordered.size(), fraction);
    return std::accumulate(ordered.begin(), ordered.begin() + static_cast<std::ptrdiff_t>(k), 0.0) /
           static_cast<double>(k);
}

namespace {

std::uint64_t merge_count(std::vector<double>& v, std::vector<double>& tmp, std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::uint64_t count = merge_count(v, tmp, lo, mid) + merge_count(v, tmp, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        // equal values stay put, so ties never count
        if (v[j] < v[i]) {
            count += mid - i;
            tmp[k++] = v[j++];
        } else {
            tmp[k++] = v[i++];
        }
    }
    while (i < mid) tmp[k++] = v[i++];
    while (j < hi) tmp[k++] = v[j++];
    std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo), tmp.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return count;
}

}  // namespace

std::uint64_t inversion_count(std::span<const double> values) {
    std::vector<double> v(values.begin(), values.end());
    std::vector<double> tmp(v.size());
    return merge_count(v, tmp, 0, v.size());
}

std::uint64_t inversion_count_brute(std::span<const double> values) {
    std::uint64_t count = 0;
    for (std::size_t i = 0; i < values.size(); ++i)
        for (std::size_t j = i + 1; j < values.size(); ++j) count += values[i] > values[j] ? 1 : 0;
    return count;
}

double inversion_count_normalized(std::span<const double> values_in_rank_order) {
    const std::size_t n = values_in_rank_order.size();
    if (n < 2) throw Error(ErrorCode::TooFewModels, "inversion count needs at least two models");
    const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    return static_cast<double>(inversion_count(values_in_rank_order)) / pairs;
}

std::vector<double> perturbed_average(std::size_t n_models, std::span<const data::Table> suite, std::string_view target,
                                      const std::function<std::vector<double>(std::size_t, const data::Table&)>& predict) {
    if (suite.empty()) throw Error(ErrorCode::InvalidConfig, "empty test suite");
    std::vector<double> out(n_models, 0.0);
    for (const auto& table : suite) {
        const auto& truth = table.column(target);
        for (std::size_t m = 0; m < n_models; ++m) out[m] += mse(truth, predict(m, table));
    }
    for (double& v : out) v /= static_cast<double>(suite.size());
    return out;
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) throw Error(ErrorCode::LengthMismatch, "spearman needs equal nonempty inputs");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

SelectionSummary summarize(std::span<const cam::ModelScore> scores, cam::RankKey key, std::span<const double> test_metric,
                           cam::HMetric metric, double fraction) {
    const auto direction = metric == cam::HMetric::auroc ? cam::HDirection::maximize : cam::HDirection::minimize;
    SelectionSummary s;
    s.ranking = cam::rank(scores, key, direction);
    auto ordered = in_rank_order(s.ranking, scores, test_metric);
    const std::size_t k = top_count(ordered.size(), fraction);
    s.top_mean = std::accumulate(ordered.begin(), ordered.begin() + static_cast<std::ptrdiff_t>(k), 0.0) /
                 static_cast<double>(k);
    if (metric == cam::HMetric::auroc)
        for (double& v : ordered) v = -v;
    s.ic = inversion_count_normalized(ordered);
    return s;
}

ExperimentReport delta_report(const SelectionSummary& cam_result, const SelectionSummary& stat_result,
                              cam::HMetric metric) {
    const std::set<std::string> a(cam_result.ranking.begin(), cam_result.ranking.end());
    const std::set<std::string> b(stat_result.ranking.begin(), stat_result.ranking.end());
    if (a != b || a.size() != cam_result.ranking.size())
        throw Error(ErrorCode::PopulationMismatch, "the two selections rank different model populations");
    ExperimentReport r;
    r.metric = metric;
    r.cam = cam_result;
    r.stat = stat_result;
    r.delta_top = metric == cam::HMetric::mse ? stat_result.top_mean - cam_result.top_mean
                                              : cam_result.top_mean - stat_result.top_mean;
    r.delta_ic = stat_result.ic - cam_result.ic;
    return r;
}

ExperimentReport build_report(std::span<const cam::ModelScore> scores, std::span<const double> test_metric,
                              cam::HMetric metric, double fraction) {
    auto report = delta_report(summarize(scores, cam::RankKey::r, test_metric, metric, fraction),
                               summarize(scores, cam::RankKey::h, test_metric, metric, fraction), metric);
    report.fraction = fraction;
    for (std::size_t i = 0; i < scores.size(); ++i)
        report.models.push_back({scores[i].model_id, scores[i].f, scores[i].h, scores[i].r, test_metric[i]});
    return report;
}

nlohmann::json to_json(const ExperimentReport& report) {
    const bool mse = report.metric == cam::HMetric::mse;
    nlohmann::json j;
    j["metric"] = std::string(cam::to_string(report.metric));
    j["top_fraction"] = report.fraction;
    j["top_count"] = top_count(std::max<std::size_t>(report.cam.ranking.size(), 1), report.fraction);
    if (mse) {
        j["mse10"] = report.stat.top_mean;
        j["cam10"] = report.cam.top_mean;
        j["ic_mse"] = report.stat.ic;
        j["ic_cam"] = report.cam.ic;
        j["delta_mse"] = report.delta_top;
    } else {
        j["auroc10_h"] = report.stat.top_mean;
        j["auroc10_cam"] = report.cam.top_mean;
        j["ic_h"] = report.stat.ic;
        j["ic_cam"] = report.cam.ic;
        j["delta_auroc"] = report.delta_top;
    }
    j["delta_ic"] = report.delta_ic;
    j["ranking_cam"] = report.cam.ranking;
    j["ranking_h"] = report.stat.ranking;
    nlohmann::json models = nlohmann::json::array();
    for (const auto& m : report.models)
        models.push_back({{"model_id", m.model_id}, {"f", m.f}, {"h", m.h}, {"r", m.r}, {"test", m.test}});
    j["models"] = models;
    return j;
}

std::string to_csv(const ExperimentReport& report) {
    auto position = [](const std::vector<std::string>& order, const std::string& id) {
        return static_cast<std::size_t>(std::find(order.begin(), order.end(), id) - order.begin()) + 1;
    };
    std::string out = "model_id,f,h,r,test,rank_cam,rank_h\n";
    for (const auto& m : report.models) {
        out += m.model_id + "," + data::format_double(m.f) + "," + data::format_double(m.h) + "," +
               data::format_double(m.r) + "," + data::format_double(m.test) + "," +
               std::to_string(position(report.cam.ranking, m.model_id)) + "," +
               std::to_string(position(report.stat.ranking, m.model_id)) + "\n";
    }
    return out;
}

}  // namespace causal_gate::eval
