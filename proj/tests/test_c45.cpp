#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "chidt/c45.hpp"
#include "chidt/error.hpp"
#include "support.hpp"

using namespace chidt;
using namespace chidt::testing;

namespace {

double resubstitution_accuracy(const DecisionTree& tree, const TrainingSet& set)
{
    std::size_t hits = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        hits += tree.predict(set.rows[i]) == set.targets[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(set.size());
}

TrainingSet single_numeric(const std::vector<double>& values, const std::vector<std::size_t>& targets)
{
    TrainingSet set;
    set.attributes = {{"x", AttributeKind::numeric, {}, 0}};
    set.classes = {"A", "B"};
    for (const double v : values) {
        set.rows.push_back({v});
    }
    set.targets = targets;
    return set;
}

// Best midpoint by exhaustive enumeration; ties to the smallest threshold.
std::optional<std::pair<double, oracle::Split>> numeric_oracle(const std::vector<double>& values,
                                                                const std::vector<int>& classes, int k,
                                                                std::size_t min_leaf = 1)
{
    std::set<double> distinct(values.begin(), values.end());
    std::vector<double> sorted(distinct.begin(), distinct.end());
    std::optional<std::pair<double, oracle::Split>> best;
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const double t = (sorted[i] + sorted[i + 1]) / 2;
        std::vector<int> side;
        std::size_t left = 0;
        for (const double v : values) {
            side.push_back(v <= t ? 0 : 1);
            left += v <= t ? 1 : 0;
        }
        if (left < min_leaf || values.size() - left < min_leaf) {
            continue;
        }
        const auto s = oracle::split_of(side, classes, k);
        if (!best || s.gain > best->second.gain + 1e-12) {
            best = {t, s};
        }
    }
    return best;
}

} // namespace

TEST_CASE("entropy of class distributions")
{
    CHECK(entropy({{8, 8}}) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(entropy({{14, 0}}) == 0.0);
    CHECK(std::abs(entropy({{9, 5}}) - 0.940286) < 1e-6);
    CHECK(std::abs(entropy({{9, 5}}) - oracle::entropy({9, 5})) < 1e-15);
    CHECK_THROWS_AS(entropy({{0, 0}}), ValidationError);
}

TEST_CASE("gain ratio of simple splits")
{
    SUBCASE("perfect separation")
    {
        TrainingSet set;
        set.attributes = binary_attributes(1);
        set.classes = {"+", "-"};
        for (int i = 0; i < 10; ++i) {
            set.rows.push_back({static_cast<double>(i < 5 ? 0 : 1)});
            set.targets.push_back(i < 5 ? 0 : 1);
        }
        const auto c = evaluate_split(set, set.all_rows(), SplitTest{0, AttributeKind::nominal, 0, 2});
        REQUIRE(c);
        CHECK(c->info_gain == doctest::Approx(1.0));
        CHECK(c->split_info == doctest::Approx(1.0));
        CHECK(c->gain_ratio == doctest::Approx(1.0));
    }
    SUBCASE("branches mirror the parent proportions")
    {
        TrainingSet set;
        set.attributes = binary_attributes(1);
        set.classes = {"+", "-"};
        for (int i = 0; i < 8; ++i) {
            set.rows.push_back({static_cast<double>(i % 2)});
            set.targets.push_back(i / 2 % 2);
        }
        const auto g = gain_ratio(set, set.all_rows(), SplitTest{0, AttributeKind::nominal, 0, 2});
        REQUIRE(g);
        CHECK(std::abs(*g) < 1e-12);
    }
    SUBCASE("a single non-empty branch is not a candidate")
    {
        TrainingSet set;
        set.attributes = binary_attributes(1);
        set.classes = {"+", "-"};
        set.rows = {{0}, {0}};
        set.targets = {0, 1};
        CHECK_FALSE(gain_ratio(set, set.all_rows(), SplitTest{0, AttributeKind::nominal, 0, 2}));
    }
}

TEST_CASE("weather outlook gain ratio matches a brute-force recomputation")
{
    const auto set = weather_set();
    std::vector<std::string> keys;
    std::vector<int> classes;
    for (const auto& r : weather_rows()) {
        keys.push_back(r.outlook);
        classes.push_back(r.play == "yes" ? 0 : 1);
    }
    const auto expected = oracle::split_of(keys, classes, 2);
    const auto c = evaluate_split(set, set.all_rows(), SplitTest{0, AttributeKind::nominal, 0, 3});
    REQUIRE(c);
    CHECK(std::abs(c->info_gain - expected.gain) < 1e-12);
    CHECK(std::abs(c->split_info - expected.split_info) < 1e-12);
    CHECK(std::abs(c->gain_ratio - expected.ratio()) < 1e-12);
}

TEST_CASE("numeric threshold search")
{
    SUBCASE("single midpoint")
    {
        const auto set = single_numeric({1, 2}, {0, 1});
        const auto c = best_numeric_threshold(set, set.all_rows(), 0);
        REQUIRE(c);
        CHECK(c->test.threshold == 1.5);
    }
    SUBCASE("constant attribute")
    {
        const auto set = single_numeric({3, 3, 3}, {0, 1, 0});
        CHECK_FALSE(best_numeric_threshold(set, set.all_rows(), 0));
    }
    SUBCASE("min_leaf excludes thin sides")
    {
        const auto set = single_numeric({1, 2, 3}, {0, 1, 1});
        CHECK_FALSE(best_numeric_threshold(set, set.all_rows(), 0, 2));
    }
    SUBCASE("random views agree with exhaustive enumeration")
    {
        Rng rng(11);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> values;
            std::vector<std::size_t> targets;
            std::vector<int> classes;
            for (int i = 0; i < 20; ++i) {
                values.push_back(static_cast<double>(rng.index(8)));
                targets.push_back(rng.index(2));
                classes.push_back(static_cast<int>(targets.back()));
            }
            const auto set = single_numeric(values, targets);
            const auto got = best_numeric_threshold(set, set.all_rows(), 0);
            const auto want = numeric_oracle(values, classes, 2);
            REQUIRE(got.has_value() == want.has_value());
            if (got) {
                CHECK(got->test.threshold == want->first);
                CHECK(std::abs(got->info_gain - want->second.gain) < 1e-12);
                CHECK(std::abs(got->gain_ratio - want->second.ratio()) < 1e-12);
            }
        }
    }
}

TEST_CASE("growing trees")
{
    const C45Params unpruned{1, 0.25, false, std::nullopt, false};

    SUBCASE("pure view gives one leaf")
    {
        const auto set = single_numeric({1, 2, 3}, {1, 1, 1});
        const auto root = grow(set, unpruned);
        CHECK(root.is_leaf());
        CHECK(root.distribution.weights == std::vector<double>{0, 3});
    }
    SUBCASE("one separating attribute gives a depth-1 tree")
    {
        TrainingSet set;
        set.attributes = binary_attributes(2);
        set.classes = {"n", "p"};
        set.rows = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
        set.targets = {0, 0, 1, 1};
        const auto tree = train_c45(set, unpruned);
        CHECK(tree.root().depth() == 1);
        CHECK(tree.root().test->attribute == 0);
        CHECK(resubstitution_accuracy(tree, set) == 1.0);
    }
    SUBCASE("xor is fitted exactly")
    {
        TrainingSet set;
        set.attributes = binary_attributes(2);
        set.classes = {"n", "p"};
        set.rows = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
        set.targets = {0, 1, 1, 0};
        const auto tree = train_c45(set, unpruned);
        CHECK(resubstitution_accuracy(tree, set) == 1.0);
    }
    SUBCASE("max depth")
    {
        auto params = unpruned;
        params.max_depth = 1;
        const auto root = grow(weather_set(), params);
        CHECK(root.depth() <= 1);
    }
    SUBCASE("empty view is an error")
    {
        const auto set = weather_set();
        CHECK_THROWS_AS(grow(set, std::span<const std::size_t>{}, unpruned), ValidationError);
    }
}

TEST_CASE("weather tree: root follows the selection rule and fits the data")
{
    const auto set = weather_set();
    const C45Params unpruned{1, 0.25, false, std::nullopt, false};
    const auto tree = train_c45(set, unpruned);
    CHECK(resubstitution_accuracy(tree, set) == 1.0);

    std::vector<int> classes;
    std::vector<std::string> outlook, windy;
    std::vector<double> temperature, humidity;
    for (const auto& r : weather_rows()) {
        classes.push_back(r.play == "yes" ? 0 : 1);
        outlook.push_back(r.outlook);
        windy.push_back(r.windy);
        temperature.push_back(r.temperature);
        humidity.push_back(r.humidity);
    }
    std::vector<std::optional<oracle::Split>> candidates{
        oracle::split_of(outlook, classes, 2),
        numeric_oracle(temperature, classes, 2)->second,
        numeric_oracle(humidity, classes, 2)->second,
        oracle::split_of(windy, classes, 2),
    };
    double mean = 0;
    int count = 0;
    for (const auto& c : candidates) {
        if (c->gain > 0) {
            mean += c->gain;
            ++count;
        }
    }
    mean /= count;
    std::size_t expected = 0;
    double best = -1;
    for (std::size_t a = 0; a < candidates.size(); ++a) {
        if (candidates[a]->gain >= mean && candidates[a]->ratio() > best + 1e-12) {
            best = candidates[a]->ratio();
            expected = a;
        }
    }
    REQUIRE(tree.root().test);
    CHECK(tree.root().test->attribute == expected);
    CHECK(tree.root().test->attribute == 0);
}

TEST_CASE("pessimistic error bound")
{
    const double z = 0.6744897501960817; // upper 25% point of N(0,1)
    for (const double n : {1.0, 6.0, 14.0, 100.0}) {
        for (const double e : {0.0, 1.0, n / 2}) {
            const double f = e / n;
            const double want =
                (f + z * z / (2 * n) + z * std::sqrt(f / n - f * f / n + z * z / (4 * n * n))) / (1 + z * z / n);
            CHECK(std::abs(pessimistic_rate(e, n, 0.25) - want) < 1e-12);
        }
    }
    CHECK(pessimistic_errors(0, 0, 0.25) == 0.0);
}

TEST_CASE("pruning")
{
    SUBCASE("a leaf is unchanged")
    {
        TreeNode leaf{{{4, 0}}, 4, std::nullopt, {}};
        CHECK(prune_ebp(leaf, C45Params{}) == leaf);
    }
    SUBCASE("children agreeing with the parent majority collapse")
    {
        TreeNode root{{{6, 2}}, 8, SplitTest{0, AttributeKind::nominal, 0, 2}, {}};
        root.children.push_back(TreeNode{{{3, 1}}, 4, std::nullopt, {}});
        root.children.push_back(TreeNode{{{3, 1}}, 4, std::nullopt, {}});
        const auto pruned = prune_ebp(root, C45Params{});
        CHECK(pruned.is_leaf());
        CHECK(pruned.distribution.weights == std::vector<double>{6, 2});
    }
    SUBCASE("a clean split survives")
    {
        TreeNode root{{{20, 20}}, 40, SplitTest{0, AttributeKind::nominal, 0, 2}, {}};
        root.children.push_back(TreeNode{{{20, 0}}, 20, std::nullopt, {}});
        root.children.push_back(TreeNode{{{0, 20}}, 20, std::nullopt, {}});
        CHECK(prune_ebp(root, C45Params{}) == root);
    }
}

TEST_CASE("prediction")
{
    const std::vector<AttributeMeta> attrs = binary_attributes(1);
    SUBCASE("leaf distribution is normalized")
    {
        const DecisionTree tree(attrs, {"a", "b"}, TreeNode{{{3, 1}}, 4, std::nullopt, {}});
        const auto d = tree.predict_distribution({0});
        CHECK(d.weights == std::vector<double>{0.75, 0.25});
        CHECK(tree.predict({0}) == 0);
    }
    SUBCASE("ties go to the lowest class")
    {
        const DecisionTree tree(attrs, {"a", "b"}, TreeNode{{{2, 2}}, 4, std::nullopt, {}});
        CHECK(tree.predict({1}) == 0);
    }
    SUBCASE("out-of-domain values are rejected")
    {
        const DecisionTree tree(attrs, {"a", "b"}, TreeNode{{{2, 2}}, 4, std::nullopt, {}});
        CHECK_THROWS_AS(tree.predict({2}), ValidationError);
    }
    SUBCASE("hand-routed weather lookups")
    {
        const auto set = weather_set();
        const auto tree = train_c45(set, C45Params{1, 0.25, false, std::nullopt, false});
        // overcast always plays
        const FeatureVector overcast{1, 60, 99, 1};
        CHECK(tree.predict_distribution(overcast).weights == std::vector<double>{1, 0});
        for (std::size_t i = 0; i < set.size(); ++i) {
            const auto d = tree.predict_distribution(set.rows[i]);
            double sum = 0;
            for (const double w : d.weights) {
                sum += w;
            }
            CHECK(std::abs(sum - 1.0) < 1e-12);
            CHECK(d.weights[set.targets[i]] == 1.0);
        }
    }
}

TEST_CASE("determinism across runs and parallel evaluation")
{
    Rng rng(5);
    TrainingSet set;
    set.attributes = binary_attributes(6);
    set.attributes.push_back({"n", AttributeKind::numeric, {}, 6});
    set.classes = {"a", "b", "c"};
    for (int i = 0; i < 120; ++i) {
        FeatureVector x;
        for (int j = 0; j < 6; ++j) {
            x.push_back(rng.bernoulli(0.5) ? 1 : 0);
        }
        x.push_back(std::round(rng.uniform() * 100) / 10);
        set.targets.push_back((static_cast<std::size_t>(x[0] + x[1]) + (x[6] > 5 ? 1 : 0)) % 3);
        set.rows.push_back(std::move(x));
    }
    C45Params sequential;
    C45Params parallel;
    parallel.parallel = true;
    const auto a = train_c45(set, sequential);
    const auto b = train_c45(set, sequential);
    const auto c = train_c45(set, parallel);
    CHECK(a == b);
    CHECK(a == c);
    CHECK(grow(set, sequential) == grow(set, parallel));
}

TEST_CASE("tree persistence and rendering")
{
    const auto set = weather_set();
    const auto tree = train_c45(set, C45Params{1, 0.25, false, std::nullopt, false});
    const auto doc = to_json(tree);
    CHECK(tree_from_json(doc) == tree);
    CHECK(tree_from_json(nlohmann::json::parse(doc.dump()), &set.attributes) == tree);

    auto other = set.attributes;
    other[1].name = "temp";
    CHECK_THROWS_AS(tree_from_json(doc, &other), ValidationError);

    const auto text = tree.render();
    CHECK(text.find("outlook = overcast: yes (4)") != std::string::npos);
    CHECK(text.find("|   ") != std::string::npos);
}

TEST_CASE("parameter validation")
{
    CHECK_THROWS_AS((C45Params{0, 0.25, true, std::nullopt, false}.validate()), ValidationError);
    CHECK_THROWS_AS((C45Params{2, 0.0, true, std::nullopt, false}.validate()), ValidationError);
    CHECK_THROWS_AS((C45Params{2, 0.6, true, std::nullopt, false}.validate()), ValidationError);
    CHECK_THROWS_AS(c45_params_from_json(nlohmann::json{{"minleaf", 2}}), ValidationError);
    const auto p = c45_params_from_json(nlohmann::json{{"min_leaf", 3}, {"pruning", false}});
    CHECK(p.min_leaf == 3);
    CHECK_FALSE(p.pruning);
    CHECK(c45_params_from_json(to_json(p)) == p);
}
