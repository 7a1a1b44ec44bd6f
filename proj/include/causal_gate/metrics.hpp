#pragma once

#include <span>

namespace causal_gate::eval {

/// Mean squared difference; LengthMismatch on unequal or empty input.
double mse(std::span<const double> truth, std::span<const double> pred);

/// Mann-Whitney statistic P(score+ > score-) + 0.5 P(tie). Labels are 0/1;
/// SingleClass when either class is absent.
double auroc(std::span<const double> labels, std::span<const double> scores);

}  // namespace causal_gate::eval
