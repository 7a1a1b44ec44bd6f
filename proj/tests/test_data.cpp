#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "causal_gate/data.hpp"
#include "causal_gate/io.hpp"
#include "test_support.hpp"

using namespace causal_gate;
using data::Table;

namespace {

data::Schema mixed_schema() {
    return {{"age", VariableKind::continuous(), {}},
            {"smoker", VariableKind::discrete(2), {"no", "yes"}},
            {"weight", VariableKind::continuous(), {}}};
}

Table numbers(std::vector<double> v) {
    return Table({{"x", VariableKind::continuous(), {}}}, {std::move(v)});
}

}  // namespace

TEST_CASE("csv columns are reordered to schema order and categories coded") {
    const auto t = data::parse_csv("weight,age,smoker\n70.5,31,yes\n80,45,no\n65,28,yes\n", mixed_schema());
    CHECK(t.num_rows() == 3);
    CHECK(t.column("age") == std::vector<double>{31, 45, 28});
    CHECK(t.column("smoker") == std::vector<double>{1, 0, 1});
    CHECK(t.column("weight") == std::vector<double>{70.5, 80, 65});
    CHECK(t.spec(0).name == "age");
}

TEST_CASE("csv quoting, BOM and CRLF") {
    const data::Schema schema{{"name", VariableKind::discrete(2), {"a,b", "c\"d"}}, {"v", VariableKind::continuous(), {}}};
    const auto t = data::parse_csv("\xEF\xBB\xBFname,v\r\n\"a,b\",1\r\n\"c\"\"d\",2\r\n", schema);
    CHECK(t.column("name") == std::vector<double>{0, 1});
    CHECK(t.column("v") == std::vector<double>{1, 2});
}

TEST_CASE("csv errors name the row and column") {
    CHECK_THROWS_CODE(data::parse_csv("age,smoker\n1,no\n", mixed_schema()), MissingColumn);
    CHECK_THROWS_CODE(data::parse_csv("age,smoker,weight\n1,maybe,2\n", mixed_schema()), UnknownCategory);
    try {
        data::parse_csv("age,smoker,weight\n1,no,2\n3,yes,abc\n", mixed_schema());
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnparseableValue);
        const std::string msg = e.what();
        CHECK(msg.find("row 3") != std::string::npos);  // header is row 1
        CHECK(msg.find("weight") != std::string::npos);
    }
}

TEST_CASE("missing cells fail unless rows may be dropped") {
    const std::string text = "age,smoker,weight\n1,no,2\n,yes,3\n4,no,NA\n5,yes,6\n";
    CHECK_THROWS_CODE(data::parse_csv(text, mixed_schema()), MissingValue);
    data::CsvOptions opts;
    opts.drop_missing = true;
    data::CsvLoadReport report;
    const auto t = data::parse_csv(text, mixed_schema(), opts, &report);
    CHECK(t.num_rows() == 2);
    CHECK(report.dropped_rows == 2);
}

TEST_CASE("csv write and read round trip is exact") {
    const auto t = data::parse_csv("age,smoker,weight\n0.1,no,1e-300\n-3.25,yes,123456789.123\n", mixed_schema());
    CHECK(data::parse_csv(data::to_csv(t), mixed_schema()) == t);
}

TEST_CASE("discrete codes out of range are rejected at construction") {
    CHECK_THROWS_CODE(Table({{"d", VariableKind::discrete(2), {}}}, {{0, 2}}), UnknownCategory);
    CHECK_THROWS_CODE(Table({{"d", VariableKind::continuous(), {}}}, {{}}), EmptyTable);
}

TEST_CASE("schema manifest round trip") {
    test_support::TempDir dir("data");
    io::write_json(dir / "schema.json", data::schema_to_json(mixed_schema()));
    CHECK(data::load_schema(dir / "schema.json") == mixed_schema());
}

TEST_CASE("split sizes follow floor then remainder to train, val, sel") {
    auto sizes = [](std::size_t n) {
        const auto s = data::split_indices(n, {});
        return std::vector<std::size_t>{s.train.size(), s.val.size(), s.sel.size()};
    };
    CHECK(sizes(10000) == std::vector<std::size_t>{6000, 2000, 2000});
    CHECK(sizes(5) == std::vector<std::size_t>{3, 1, 1});
    CHECK(sizes(7) == std::vector<std::size_t>{5, 1, 1});
    CHECK(sizes(9) == std::vector<std::size_t>{6, 2, 1});
    CHECK_THROWS_CODE(data::split_indices(2, {}), TooFewRows);
}

TEST_CASE("split parts are disjoint, exhaustive and deterministic") {
    data::SplitSpec spec;
    spec.seed = 42;
    const auto a = data::split_indices(1001, spec);
    const auto b = data::split_indices(1001, spec);
    CHECK(a.train == b.train);
    CHECK(a.sel == b.sel);
    std::vector<std::size_t> all = a.train;
    all.insert(all.end(), a.val.begin(), a.val.end());
    all.insert(all.end(), a.sel.begin(), a.sel.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected(1001);
    std::iota(expected.begin(), expected.end(), std::size_t{0});
    CHECK(all == expected);
    spec.seed = 43;
    CHECK(data::split_indices(1001, spec).train != a.train);
}

TEST_CASE("split spec validation") {
    data::SplitSpec bad;
    bad.train_fraction = 0.7;
    CHECK_THROWS_CODE(bad.validate(), InvalidSplit);
}

TEST_CASE("split artifact round trip") {
    data::SplitSpec spec;
    spec.seed = 3;
    const auto s = data::split_indices(20, spec);
    const auto back = data::split_from_json(data::split_to_json(s, spec));
    CHECK(back.train == s.train);
    CHECK(back.val == s.val);
    CHECK(back.sel == s.sel);
}

TEST_CASE("ood holdout takes the extreme tail") {
    const auto t = numbers({3, 7, 1, 10, 5, 9, 2, 8, 4, 6});
    const auto high = data::ood_holdout(t, "x", data::Side::high, 0.2);
    auto held = high.held_out.column("x");
    std::sort(held.begin(), held.end());
    CHECK(held == std::vector<double>{9, 10});
    CHECK(high.remainder.num_rows() == 8);
    const double rest_max = *std::max_element(high.remainder.column("x").begin(), high.remainder.column("x").end());
    CHECK(rest_max < 9);

    auto low = data::ood_holdout(t, "x", data::Side::low, 0.2).held_out.column("x");
    std::sort(low.begin(), low.end());
    CHECK(low == std::vector<double>{1, 2});
}

TEST_CASE("ood holdout size uses the ceiling") {
    std::vector<double> v(4177);
    std::iota(v.begin(), v.end(), 0.0);
    CHECK(data::ood_holdout_indices(numbers(v), "x", data::Side::high, 0.2).held_out.size() == 836);
}

TEST_CASE("ood holdout keeps ties together") {
    const auto t = numbers({1, 2, 3, 3, 3, 4});
    const auto h = data::ood_holdout(t, "x", data::Side::high, 0.3);  // ceil(1.8) = 2, tie at 3
    CHECK(h.held_out.num_rows() == 4);
    CHECK(h.remainder.column("x") == std::vector<double>{1, 2});
}

TEST_CASE("ood holdout low mirrors high under negation") {
    const auto t = numbers({0.5, -2, 3.5, 1, 8, -4, 2.25});
    std::vector<double> neg = t.column("x");
    for (double& v : neg) v = -v;
    const auto a = data::ood_holdout_indices(t, "x", data::Side::low, 0.3);
    const auto b = data::ood_holdout_indices(numbers(neg), "x", data::Side::high, 0.3);
    CHECK(a.held_out == b.held_out);
}

TEST_CASE("ood holdout needs a continuous column") {
    const Table t({{"d", VariableKind::discrete(2), {}}}, {{0, 1, 1}});
    CHECK_THROWS_CODE(data::ood_holdout(t, "d", data::Side::high, 0.2), NotContinuous);
}

TEST_CASE("min-max scaling without clipping") {
    const auto train = numbers({0, 5, 10});
    const auto scaler = data::fit_scaler(train);
    CHECK(data::apply_scaler(scaler, train).column("x") == std::vector<double>{0, 0.5, 1});
    CHECK(data::apply_scaler(scaler, numbers({12})).column("x") == std::vector<double>{1.2});
    CHECK(data::apply_scaler(data::fit_scaler(numbers({3, 3})), numbers({3, 3})).column("x") ==
          std::vector<double>{0, 0});
}

TEST_CASE("scaling leaves discrete columns alone") {
    const auto t = data::parse_csv("age,smoker,weight\n10,no,1\n20,yes,3\n", mixed_schema());
    const auto s = data::apply_scaler(data::fit_scaler(t), t);
    CHECK(s.column("smoker") == t.column("smoker"));
    CHECK(s.column("age") == std::vector<double>{0, 1});
}

TEST_CASE("prediction substitution") {
    const auto t = data::parse_csv("age,smoker,weight\n10,no,1\n20,yes,3\n", mixed_schema());
    CHECK(data::substitute_predictions(t, "weight", t.column("weight")) == t);
    const std::vector<double> zeros{0, 0};
    const auto z = data::substitute_predictions(t, "weight", zeros);
    CHECK(z.column("weight") == zeros);
    CHECK(z.column("age") == t.column("age"));
    CHECK(data::substitute_predictions(z, "weight", t.column("weight")) == t);

    const std::vector<double> one{1};
    CHECK_THROWS_CODE(data::substitute_predictions(t, "weight", one), LengthMismatch);
    const std::vector<double> half{0.5, 1};
    CHECK_THROWS_CODE(data::substitute_predictions(t, "smoker", half), KindMismatch);
    const std::vector<double> codes{1, 1};
    CHECK(data::substitute_predictions(t, "smoker", codes).column("smoker") == codes);
}
