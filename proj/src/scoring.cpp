#include "causal_gate/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

#include "causal_gate/error.hpp"

namespace causal_gate::scoring {

namespace {

using data::Table;

double gaussian_entropy_from_variance(double variance) {
    return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * std::max(variance, kVarianceFloor));
}

void require_discrete(const Table& t, std::size_t col) {
    if (!t.spec(col).kind.is_discrete())
        throw Error(ErrorCode::NotDiscrete, "column '" + t.spec(col).name + "' is not discrete");
}

void require_continuous(const Table& t, std::size_t col) {
    if (!t.spec(col).kind.is_continuous())
        throw Error(ErrorCode::NotContinuous, "column '" + t.spec(col).name + "' is not continuous");
}

std::vector<std::size_t> all_rows(const Table& t) {
    std::vector<std::size_t> rows(t.num_rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

/// ML residual variance of x regressed on `parents` (plus intercept) over `rows`.
double ols_residual_variance(const Table& t, std::size_t x, std::span<const std::size_t> parents,
                             std::span<const std::size_t> rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(parents.size());
    const auto& xs = t.column(x);

    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = xs[rows[static_cast<std::size_t>(i)]];
    y.array() -= y.mean();
    if (p == 0) return y.squaredNorm() / static_cast<double>(n);

    Eigen::MatrixXd design(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto& col = t.column(parents[static_cast<std::size_t>(j)]);
        for (Eigen::Index i = 0; i < n; ++i) design(i, j) = col[rows[static_cast<std::size_t>(i)]];
    }
    design.rowwise() -= design.colwise().mean();

    Eigen::MatrixXd gram = design.transpose() * design;
    const Eigen::VectorXd rhs = design.transpose() * y;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    const auto& pivots = ldlt.vectorD();
    const double scale = std::max(pivots.cwiseAbs().maxCoeff(), 1.0);
    if (ldlt.info() != Eigen::Success || pivots.minCoeff() <= 1e-12 * scale) {
        gram.diagonal().array() += kRidgeJitter;
        ldlt.compute(gram);
    }
    const Eigen::VectorXd beta = ldlt.solve(rhs);
    return (y - design * beta).squaredNorm() / static_cast<double>(n);
}

std::vector<int> config_of(const Table& t, std::span<const std::size_t> cols, std::size_t row) {
    std::vector<int> key(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) key[j] = static_cast<int>(t.at(row, cols[j]));
    return key;
}

/// Rows grouped by joint configuration of the discrete columns (ordered map,
/// so iteration order is deterministic).
std::map<std::vector<int>, std::vector<std::size_t>> partition_rows(const Table& t,
                                                                    std::span<const std::size_t> discrete_cols) {
    std::map<std::vector<int>, std::vector<std::size_t>> cells;
    for (std::size_t r = 0; r < t.num_rows(); ++r) cells[config_of(t, discrete_cols, r)].push_back(r);
    return cells;
}

void split_by_kind(const Table& t, std::span<const std::size_t> parents, std::vector<std::size_t>& discrete,
                   std::vector<std::size_t>& continuous) {
    for (std::size_t p : parents) (t.spec(p).kind.is_discrete() ? discrete : continuous).push_back(p);
}

double log_sum_exp(const Eigen::VectorXd& z) {
    const double m = z.maxCoeff();
    return m + std::log((z.array() - m).exp().sum());
}

/// Multinomial logistic regression of a discrete column on continuous
/// parents (standardized) and dummy-coded discrete parents. Returns the mean
/// negative log-likelihood at the MLE.
double logistic_entropy(const Table& t, std::size_t x, std::span<const std::size_t> continuous,
                        std::span<const std::size_t> discrete) {
    const std::size_t n = t.num_rows();
    const auto& labels_raw = t.column(x);

    // Only observed classes take part; unobserved ones have zero ML probability.
    std::map<int, int> class_index;
    for (double v : labels_raw) class_index.emplace(static_cast<int>(v), 0);
    if (class_index.size() <= 1) return 0.0;
    int next = 0;
    for (auto& [cls, idx] : class_index) idx = next++;
    const int classes = next;
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = class_index.at(static_cast<int>(labels_raw[i]));

    // Design: intercept, standardized continuous parents, dummies for discrete parents.
    std::vector<Eigen::VectorXd> features;
    for (std::size_t c : continuous) {
        Eigen::VectorXd col = Eigen::Map<const Eigen::VectorXd>(t.column(c).data(), static_cast<Eigen::Index>(n));
        col.array() -= col.mean();
        const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(n));
        if (sd > 0) col /= sd;
        features.push_back(std::move(col));
    }
    for (std::size_t c : discrete) {
        for (int level = 1; level < t.spec(c).kind.cardinality; ++level) {
            Eigen::VectorXd col(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) col[static_cast<Eigen::Index>(i)] = t.at(i, c) == level ? 1.0 : 0.0;
            features.push_back(std::move(col));
        }
    }
    const auto d = static_cast<Eigen::Index>(features.size() + 1);
    Eigen::MatrixXd design(static_cast<Eigen::Index>(n), d);
    design.col(0).setOnes();
    for (Eigen::Index j = 1; j < d; ++j) design.col(j) = features[static_cast<std::size_t>(j - 1)];

    const Eigen::Index k = classes - 1;  // class 0 is the reference
    const Eigen::Index dim = k * d;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);

    auto log_likelihood = [&](const Eigen::VectorXd& params, Eigen::MatrixXd* probs) {
        const Eigen::Map<const Eigen::MatrixXd> W(params.data(), d, k);
        const Eigen::MatrixXd logits = design * W;  // n x k
        double ll = 0.0;
        Eigen::VectorXd z(k + 1);
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
            z[0] = 0.0;
            z.tail(k) = logits.row(i).transpose();
            const double lse = log_sum_exp(z);
            ll += z[labels[static_cast<std::size_t>(i)]] - lse;
            if (probs) probs->row(i) = (z.tail(k).array() - lse).exp().matrix().transpose();
        }
        return ll;
    };

    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::MatrixXd probs(static_cast<Eigen::Index>(n), k);
    double ll = log_likelihood(w, &probs);
    for (int iter = 0; iter < kLogisticMaxIterations; ++iter) {
        Eigen::VectorXd grad(dim);
        Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(dim, dim);
        for (Eigen::Index a = 0; a < k; ++a) {
            Eigen::VectorXd resid = -probs.col(a);
            for (std::size_t i = 0; i < n; ++i)
                if (labels[i] == a + 1) resid[static_cast<Eigen::Index>(i)] += 1.0;
            grad.segment(a * d, d) = design.transpose() * resid;
            for (Eigen::Index b = a; b < k; ++b) {
                Eigen::VectorXd weight = probs.col(a).cwiseProduct(probs.col(b));
                if (a == b) weight = probs.col(a) - weight;
                else weight = -weight;
                const Eigen::MatrixXd block = design.transpose() * weight.asDiagonal() * design;
                hess.block(a * d, b * d, d, d) = block;
                if (a != b) hess.block(b * d, a * d, d, d) = block.transpose();
            }
        }
        if (grad.cwiseAbs().maxCoeff() * inv_n < kLogisticGradientTolerance) return -ll * inv_n;

        hess.diagonal().array() += kRidgeJitter * static_cast<double>(n);
        const Eigen::VectorXd step = hess.ldlt().solve(grad);
        double t_step = 1.0;
        bool improved = false;
        for (int halving = 0; halving < 40; ++halving, t_step *= 0.5) {
            Eigen::VectorXd trial = w + t_step * step;
            Eigen::MatrixXd trial_probs(static_cast<Eigen::Index>(n), k);
            const double trial_ll = log_likelihood(trial, &trial_probs);
            if (std::isfinite(trial_ll) && trial_ll >= ll) {
                improved = trial_ll > ll;
                w = std::move(trial);
                ll = trial_ll;
                probs = std::move(trial_probs);
                break;
            }
        }
        // Flat objective at machine precision: accept when the gradient is already tiny.
        if (!improved && grad.cwiseAbs().maxCoeff() * inv_n < 1e-6) return -ll * inv_n;
    }
    throw Error(ErrorCode::NonConvergence,
                "logistic fit for '" + t.spec(x).name + "' did not converge in " +
                    std::to_string(kLogisticMaxIterations) + " iterations");
}

void check_columns(const Table& t, std::size_t x, std::span<const std::size_t> parents) {
    if (x >= t.num_columns()) throw Error(ErrorCode::InvalidNode, "column index out of range");
    for (std::size_t p : parents)
        if (p >= t.num_columns()) throw Error(ErrorCode::InvalidNode, "parent column index out of range");
}

}  // namespace

double cond_entropy_discrete(const Table& table, std::size_t x, std::span<const std::size_t> parents) {
    check_columns(table, x, parents);
    require_discrete(table, x);
    for (std::size_t p : parents) require_discrete(table, p);

    const int card = table.spec(x).kind.cardinality;
    std::map<std::vector<int>, std::vector<std::size_t>> counts;
    for (std::size_t r = 0; r < table.num_rows(); ++r) {
        auto& cell = counts[config_of(table, parents, r)];
        if (cell.empty()) cell.assign(static_cast<std::size_t>(card), 0);
        ++cell[static_cast<std::size_t>(table.at(r, x))];
    }
    const double n = static_cast<double>(table.num_rows());
    double h = 0.0;
    for (const auto& [config, cell] : counts) {
        const double n_pa = static_cast<double>(std::accumulate(cell.begin(), cell.end(), std::size_t{0}));
        for (std::size_t c : cell) {
            if (c == 0) continue;  // 0 ln 0 = 0
            const double joint = static_cast<double>(c);
            h -= joint / n * std::log(joint / n_pa);
        }
    }
    return h;
}

double cond_entropy_gaussian(const Table& table, std::size_t x, std::span<const std::size_t> parents) {
    check_columns(table, x, parents);
    require_continuous(table, x);
    for (std::size_t p : parents) require_continuous(table, p);
    if (table.num_rows() <= parents.size() + 1)
        throw Error(ErrorCode::TooFewRows, "need more than " + std::to_string(parents.size() + 1) + " rows to regress '" +
                                               table.spec(x).name + "'");
    const auto rows = all_rows(table);
    return gaussian_entropy_from_variance(ols_residual_variance(table, x, parents, rows));
}

double cond_entropy_mixed(const Table& table, std::size_t x, std::span<const std::size_t> parents,
                          EntropyDiagnostics* diagnostics) {
    check_columns(table, x, parents);
    std::vector<std::size_t> discrete, continuous;
    split_by_kind(table, parents, discrete, continuous);

    if (table.spec(x).kind.is_discrete()) {
        if (continuous.empty())
            throw Error(ErrorCode::KindMismatch, "discrete '" + table.spec(x).name + "' has no continuous parents");
        return logistic_entropy(table, x, continuous, discrete);
    }
    if (discrete.empty())
        throw Error(ErrorCode::KindMismatch, "continuous '" + table.spec(x).name + "' has no discrete parents");

    const std::size_t min_rows = continuous.size() + 2;
    const double n = static_cast<double>(table.num_rows());
    const auto cells = partition_rows(table, discrete);
    double pooled = std::numeric_limits<double>::quiet_NaN();
    double h = 0.0;
    for (const auto& [config, rows] : cells) {
        double cell_h;
        if (rows.size() < min_rows) {
            if (std::isnan(pooled)) {
                if (table.num_rows() < min_rows)
                    throw Error(ErrorCode::TooFewRows, "too few rows to regress '" + table.spec(x).name + "'");
                pooled = gaussian_entropy_from_variance(ols_residual_variance(table, x, continuous, all_rows(table)));
            }
            cell_h = pooled;
            if (diagnostics) ++diagnostics->fallback_cells;
        } else {
            cell_h = gaussian_entropy_from_variance(ols_residual_variance(table, x, continuous, rows));
        }
        h += static_cast<double>(rows.size()) / n * cell_h;
    }
    return h;
}

double cond_entropy(const Table& table, std::size_t x, std::span<const std::size_t> parents,
                    EntropyDiagnostics* diagnostics) {
    check_columns(table, x, parents);
    bool any_discrete = false, any_continuous = false;
    for (std::size_t p : parents) (table.spec(p).kind.is_discrete() ? any_discrete : any_continuous) = true;
    if (table.spec(x).kind.is_discrete()) {
        return any_continuous ? cond_entropy_mixed(table, x, parents, diagnostics)
                              : cond_entropy_discrete(table, x, parents);
    }
    return any_discrete ? cond_entropy_mixed(table, x, parents, diagnostics) : cond_entropy_gaussian(table, x, parents);
}

namespace {

std::vector<std::size_t> dag_to_table_columns(const graph::Dag& dag, const Table& table) {
    std::vector<std::size_t> cols(dag.num_nodes());
    for (std::size_t i = 0; i < dag.num_nodes(); ++i) {
        auto c = table.index_of(dag.name(i));
        if (!c) throw Error(ErrorCode::SchemaMismatch, "DAG node '" + dag.name(i) + "' is not a table column");
        cols[i] = *c;
    }
    return cols;
}

std::vector<std::size_t> mapped(const std::vector<std::size_t>& nodes, const std::vector<std::size_t>& to_col) {
    std::vector<std::size_t> out;
    out.reserve(nodes.size());
    for (std::size_t v : nodes) out.push_back(to_col[v]);
    return out;
}

}  // namespace

std::size_t dimension(const graph::Dag& dag, const Table& table) {
    const auto to_col = dag_to_table_columns(dag, table);
    std::size_t total = 0;
    for (std::size_t i = 0; i < dag.num_nodes(); ++i) {
        std::size_t cells = 1, n_continuous = 0;
        for (std::size_t p : dag.parents(i)) {
            const VariableKind k = table.spec(to_col[p]).kind;
            if (k.is_discrete()) cells *= static_cast<std::size_t>(k.cardinality);
            else ++n_continuous;
        }
        const VariableKind kind = table.spec(to_col[i]).kind;
        const std::size_t per_cell = kind.is_discrete()
                                         ? static_cast<std::size_t>(kind.cardinality - 1) * (1 + n_continuous)
                                         : n_continuous + 2;
        total += per_cell * cells;
    }
    return total;
}

ScoreReport log_likelihood(const graph::Dag& dag, const Table& table) {
    graph::validate(dag);
    const auto to_col = dag_to_table_columns(dag, table);
    ScoreReport report;
    report.n_rows = table.num_rows();
    EntropyDiagnostics diag;
    double sum = 0.0;
    for (std::size_t i = 0; i < dag.num_nodes(); ++i) {
        const auto parents = mapped(dag.parents(i), to_col);
        const double h = cond_entropy(table, to_col[i], parents, &diag);
        report.per_node_entropy.emplace_back(dag.name(i), h);
        sum += h;
    }
    const double n = static_cast<double>(report.n_rows);
    report.log_likelihood = -n * sum;
    report.dimension = dimension(dag, table);
    report.bic = -report.log_likelihood + (std::log2(n) / 2.0) * static_cast<double>(report.dimension);
    report.fallback_cells = diag.fallback_cells;
    return report;
}

double causal_assurance_term(const graph::Dag& dag, std::string_view target, const Table& table_with_predictions) {
    const std::size_t t = dag.require_index(target);
    const graph::Dag pruned = graph::prune_target_outgoing(dag, t);
    const auto parents = pruned.parents(t);
    if (parents.empty()) return 0.0;
    const auto to_col = dag_to_table_columns(pruned, table_with_predictions);
    const double h = cond_entropy(table_with_predictions, to_col[t], mapped(parents, to_col));
    return static_cast<double>(table_with_predictions.num_rows()) * h;
}

nlohmann::json to_json(const ScoreReport& report) {
    nlohmann::json per_node = nlohmann::json::object();
    for (const auto& [name, h] : report.per_node_entropy) per_node[name] = h;
    return {{"per_node_entropy", per_node}, {"log_likelihood", report.log_likelihood},
            {"bic", report.bic},            {"n_rows", report.n_rows},
            {"dimension", report.dimension}, {"fallback_cells", report.fallback_cells}};
}

}  // namespace causal_gate::scoring
