#pragma once

#include <compare>
#include <string>
#include <vector>

namespace causal_gate {

/// Continuous, or discrete with a fixed number of categories.
struct VariableKind {
    int cardinality = 0;  // 0 means continuous

    static constexpr VariableKind continuous() { return {}; }
    static constexpr VariableKind discrete(int card) { return {card}; }

    constexpr bool is_discrete() const { return cardinality > 0; }
    constexpr bool is_continuous() const { return cardinality == 0; }

    friend constexpr bool operator==(VariableKind, VariableKind) = default;
};

/// One model's predictions for the target column of some table.
struct ModelPredictions {
    std::string model_id;
    std::vector<double> values;
};

/// Orders model ids numerically when both are integers, lexicographically
/// otherwise, so "9" sorts before "10".
bool model_id_less(const std::string& a, const std::string& b);

}  // namespace causal_gate
