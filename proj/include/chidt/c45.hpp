#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "chidt/dataset.hpp"

namespace chidt {

struct ClassDistribution {
    std::vector<double> weights;

    double total() const;
    // argmax, ties to the lowest class index.
    std::size_t majority() const;
    bool pure() const;
    ClassDistribution normalized() const;

    friend bool operator==(const ClassDistribution&, const ClassDistribution&) = default;
};

// Shannon entropy in bits. Throws ValidationError on zero total weight.
double entropy(const ClassDistribution& d);

struct SplitTest {
    std::size_t attribute = 0;
    AttributeKind kind = AttributeKind::nominal;
    double threshold = 0.0;       // numeric: left branch is value <= threshold
    std::size_t branch_count = 2; // nominal: one branch per declared value

    std::size_t branch(const FeatureVector& x) const;

    friend bool operator==(const SplitTest&, const SplitTest&) = default;
};

struct TreeNode {
    // Class weights of the training instances that reached the node. A leaf
    // for an empty nominal branch carries its parent's weights (so that it
    // can still predict) and zero `instances`.
    ClassDistribution distribution;
    double instances = 0.0;
    std::optional<SplitTest> test;
    std::vector<TreeNode> children;

    bool is_leaf() const { return children.empty(); }
    std::size_t majority_class() const { return distribution.majority(); }
    // Training instances at the node not of its majority class.
    double errors() const;

    std::size_t node_count() const;
    std::size_t leaf_count() const;
    std::size_t depth() const;

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct C45Params {
    std::size_t min_leaf = 2;
    double confidence_factor = 0.25;
    bool pruning = true;
    std::optional<std::size_t> max_depth;
    // Evaluate candidate attributes on worker threads. Never changes the tree.
    bool parallel = false;

    void validate() const;

    friend bool operator==(const C45Params&, const C45Params&) = default;
};

nlohmann::json to_json(const C45Params& params);
// Starts from `defaults` and overrides the keys present; unknown keys throw.
C45Params c45_params_from_json(const nlohmann::json& doc, C45Params defaults = {});

// Single-target learning problem: feature rows and a class index per row.
struct TrainingSet {
    std::vector<AttributeMeta> attributes;
    std::vector<std::string> classes;
    std::vector<FeatureVector> rows;
    std::vector<std::size_t> targets;

    std::size_t size() const { return rows.size(); }
    void validate() const;
    ClassDistribution distribution(std::span<const std::size_t> view) const;
    std::vector<std::size_t> all_rows() const;
};

struct SplitCandidate {
    SplitTest test;
    double info_gain = 0.0;
    double split_info = 0.0;
    double gain_ratio = 0.0;
};

// Gain and split information of `test` on the rows in `view`. Empty when the
// test leaves fewer than two non-empty branches (split info is zero).
std::optional<SplitCandidate> evaluate_split(const TrainingSet& set, std::span<const std::size_t> view,
                                             const SplitTest& test);
std::optional<double> gain_ratio(const TrainingSet& set, std::span<const std::size_t> view, const SplitTest& test);

// Scans the midpoints between consecutive distinct values and keeps the one
// with the highest information gain (ties to the smallest threshold) among
// those leaving at least `min_leaf` rows on each side.
std::optional<SplitCandidate> best_numeric_threshold(const TrainingSet& set, std::span<const std::size_t> view,
                                                     std::size_t attribute, std::size_t min_leaf = 1);

// Best admissible split of `view`: highest gain ratio among positive-gain
// candidates whose gain is at least their mean gain. When every admissible
// split has zero gain, the lowest-index one is returned.
std::optional<SplitCandidate> select_split(const TrainingSet& set, std::span<const std::size_t> view,
                                           const C45Params& params);

TreeNode grow(const TrainingSet& set, std::span<const std::size_t> view, const C45Params& params);
TreeNode grow(const TrainingSet& set, const C45Params& params);

// Normal-approximation upper confidence limit on the error rate E/N.
double pessimistic_rate(double errors, double instances, double confidence_factor);
// N * pessimistic_rate; zero for N = 0.
double pessimistic_errors(double errors, double instances, double confidence_factor);

// Bottom-up subtree replacement.
TreeNode prune_ebp(const TreeNode& root, const C45Params& params);

class DecisionTree {
public:
    DecisionTree() = default;
    DecisionTree(std::vector<AttributeMeta> attributes, std::vector<std::string> classes, TreeNode root);

    const std::vector<AttributeMeta>& attributes() const { return attributes_; }
    const std::vector<std::string>& classes() const { return classes_; }
    const TreeNode& root() const { return root_; }

    // Normalized leaf distribution reached by `x`.
    ClassDistribution predict_distribution(const FeatureVector& x) const;
    std::size_t predict(const FeatureVector& x) const;

    // One test per line, J48 style.
    std::string render() const;

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

private:
    std::vector<AttributeMeta> attributes_;
    std::vector<std::string> classes_;
    TreeNode root_;
};

// grow, then prune_ebp when params.pruning.
DecisionTree train_c45(const TrainingSet& set, const C45Params& params);

nlohmann::json schema_fingerprint(const std::vector<AttributeMeta>& attributes);
std::vector<AttributeMeta> attributes_from_fingerprint(const nlohmann::json& fingerprint);
nlohmann::json to_json(const DecisionTree& tree);
// Throws ValidationError when `expected` is given and differs from the
// stored schema fingerprint.
DecisionTree tree_from_json(const nlohmann::json& doc, const std::vector<AttributeMeta>* expected = nullptr);

} // namespace chidt
