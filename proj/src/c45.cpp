#include "chidt/c45.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "chidt/dataset_io.hpp"
#include "chidt/error.hpp"

namespace chidt {

namespace {

// Gains below this are rounding noise, not information.
constexpr double gain_epsilon = 1e-10;
constexpr double tie_epsilon = 1e-12;

double entropy_of(std::span<const double> weights, double total)
{
    double h = 0.0;
    for (const double w : weights) {
        if (w > 0.0) {
            const double p = w / total;
            h -= p * std::log2(p);
        }
    }
    return h;
}

} // namespace

double ClassDistribution::total() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

std::size_t ClassDistribution::majority() const
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < weights.size(); ++i) {
        if (weights[i] > weights[best]) {
            best = i;
        }
    }
    return best;
}

bool ClassDistribution::pure() const
{
    return std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; }) <= 1;
}

ClassDistribution ClassDistribution::normalized() const
{
    const double t = total();
    ClassDistribution out{weights};
    if (t > 0.0) {
        for (auto& w : out.weights) {
            w /= t;
        }
    }
    return out;
}

double entropy(const ClassDistribution& d)
{
    const double t = d.total();
    if (!(t > 0.0)) {
        throw ValidationError("entropy of a distribution with zero total weight");
    }
    return entropy_of(d.weights, t);
}

std::size_t SplitTest::branch(const FeatureVector& x) const
{
    const double v = x[attribute];
    if (kind == AttributeKind::numeric) {
        return v <= threshold ? 0 : 1;
    }
    if (v < 0 || v >= static_cast<double>(branch_count) || v != std::floor(v)) {
        throw ValidationError("nominal value index out of the attribute's domain");
    }
    return static_cast<std::size_t>(v);
}

double TreeNode::errors() const { return instances - (instances > 0.0 ? distribution.weights[majority_class()] : 0.0); }

std::size_t TreeNode::node_count() const
{
    std::size_t n = 1;
    for (const auto& c : children) {
        n += c.node_count();
    }
    return n;
}

std::size_t TreeNode::leaf_count() const
{
    if (is_leaf()) {
        return 1;
    }
    std::size_t n = 0;
    for (const auto& c : children) {
        n += c.leaf_count();
    }
    return n;
}

std::size_t TreeNode::depth() const
{
    std::size_t d = 0;
    for (const auto& c : children) {
        d = std::max(d, 1 + c.depth());
    }
    return d;
}

void C45Params::validate() const
{
    if (min_leaf < 1) {
        throw ValidationError("c45: min_leaf must be at least 1");
    }
    if (!(confidence_factor > 0.0 && confidence_factor <= 0.5)) {
        throw ValidationError("c45: confidence_factor must lie in (0, 0.5]");
    }
}

nlohmann::json to_json(const C45Params& params)
{
    nlohmann::json j{{"min_leaf", params.min_leaf},
                     {"confidence_factor", params.confidence_factor},
                     {"pruning", params.pruning}};
    j["max_depth"] = params.max_depth ? nlohmann::json(*params.max_depth) : nlohmann::json(nullptr);
    return j;
}

C45Params c45_params_from_json(const nlohmann::json& doc, C45Params params)
{
    if (!doc.is_object()) {
        throw ValidationError("c45 params must be a JSON object");
    }
    try {
        for (const auto& [key, value] : doc.items()) {
            if (key == "min_leaf") {
                params.min_leaf = value.get<std::size_t>();
            } else if (key == "confidence_factor") {
                params.confidence_factor = value.get<double>();
            } else if (key == "pruning") {
                params.pruning = value.get<bool>();
            } else if (key == "max_depth") {
                params.max_depth = value.is_null() ? std::nullopt : std::optional(value.get<std::size_t>());
            } else if (key == "parallel") {
                params.parallel = value.get<bool>();
            } else {
                throw ValidationError("c45 params: unknown key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("c45 params: ") + e.what());
    }
    params.validate();
    return params;
}

void TrainingSet::validate() const
{
    if (classes.empty()) {
        throw ValidationError("training set has no classes");
    }
    if (rows.size() != targets.size()) {
        throw ValidationError("training set: row and target counts differ");
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        check_features(attributes, rows[i]);
        if (targets[i] >= classes.size()) {
            throw ValidationError("training set: class index out of range");
        }
    }
}

ClassDistribution TrainingSet::distribution(std::span<const std::size_t> view) const
{
    ClassDistribution d{std::vector<double>(classes.size(), 0.0)};
    for (const auto i : view) {
        d.weights[targets[i]] += 1.0;
    }
    return d;
}

std::vector<std::size_t> TrainingSet::all_rows() const
{
    std::vector<std::size_t> idx(rows.size());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

std::optional<SplitCandidate> evaluate_split(const TrainingSet& set, std::span<const std::size_t> view,
                                             const SplitTest& test)
{
    const auto k = set.classes.size();
    std::vector<std::vector<double>> branches(test.branch_count, std::vector<double>(k, 0.0));
    std::vector<double> sizes(test.branch_count, 0.0);
    for (const auto i : view) {
        const auto b = test.branch(set.rows[i]);
        branches[b][set.targets[i]] += 1.0;
        sizes[b] += 1.0;
    }
    const auto n = static_cast<double>(view.size());
    const auto nonempty = std::count_if(sizes.begin(), sizes.end(), [](double s) { return s > 0.0; });
    if (nonempty < 2) {
        return std::nullopt;
    }
    double remainder = 0.0;
    for (std::size_t b = 0; b < branches.size(); ++b) {
        if (sizes[b] > 0.0) {
            remainder += sizes[b] / n * entropy_of(branches[b], sizes[b]);
        }
    }
    SplitCandidate c;
    c.test = test;
    c.info_gain = std::max(0.0, entropy(set.distribution(view)) - remainder);
    c.split_info = entropy_of(sizes, n);
    c.gain_ratio = c.info_gain / c.split_info;
    return c;
}

std::optional<double> gain_ratio(const TrainingSet& set, std::span<const std::size_t> view, const SplitTest& test)
{
    const auto c = evaluate_split(set, view, test);
    if (!c) {
        return std::nullopt;
    }
    return c->gain_ratio;
}

std::optional<SplitCandidate> best_numeric_threshold(const TrainingSet& set, std::span<const std::size_t> view,
                                                     std::size_t attribute, std::size_t min_leaf)
{
    std::vector<std::size_t> order(view.begin(), view.end());
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return set.rows[a][attribute] < set.rows[b][attribute];
    });
    const auto k = set.classes.size();
    const auto n = static_cast<double>(order.size());
    const auto parent = set.distribution(view);
    const double parent_entropy = order.empty() ? 0.0 : entropy(parent);

    std::vector<double> left(k, 0.0);
    std::vector<double> right = parent.weights;
    std::optional<SplitCandidate> best;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const auto t = set.targets[order[i]];
        left[t] += 1.0;
        right[t] -= 1.0;
        const double lo = set.rows[order[i]][attribute];
        const double hi = set.rows[order[i + 1]][attribute];
        if (!(lo < hi)) {
            continue;
        }
        const auto n_left = i + 1;
        const auto n_right = order.size() - n_left;
        if (n_left < min_leaf || n_right < min_leaf) {
            continue;
        }
        const double nl = static_cast<double>(n_left);
        const double nr = static_cast<double>(n_right);
        const double gain =
            std::max(0.0, parent_entropy - nl / n * entropy_of(left, nl) - nr / n * entropy_of(right, nr));
        if (best && !(gain > best->info_gain + tie_epsilon)) {
            continue;
        }
        double threshold = std::midpoint(lo, hi);
        if (!(threshold < hi)) {
            threshold = lo;
        }
        SplitCandidate c;
        c.test = SplitTest{attribute, AttributeKind::numeric, threshold, 2};
        c.info_gain = gain;
        c.split_info = entropy_of(std::vector<double>{nl, nr}, n);
        c.gain_ratio = gain / c.split_info;
        best = c;
    }
    return best;
}

namespace {

std::optional<SplitCandidate> candidate_for(const TrainingSet& set, std::span<const std::size_t> view,
                                            std::size_t attribute, const C45Params& params)
{
    const auto& meta = set.attributes[attribute];
    std::optional<SplitCandidate> c;
    if (meta.is_nominal()) {
        const SplitTest test{attribute, AttributeKind::nominal, 0.0, meta.values.size()};
        std::vector<std::size_t> sizes(meta.values.size(), 0);
        for (const auto i : view) {
            ++sizes[test.branch(set.rows[i])];
        }
        const auto big = std::count_if(sizes.begin(), sizes.end(), [&](std::size_t s) { return s >= params.min_leaf; });
        if (big < 2) {
            return std::nullopt;
        }
        c = evaluate_split(set, view, test);
    } else {
        c = best_numeric_threshold(set, view, attribute, params.min_leaf);
    }
    if (!c || !(c->split_info > 0.0)) {
        return std::nullopt;
    }
    if (!(c->info_gain > gain_epsilon)) {
        c->info_gain = 0.0;
        c->gain_ratio = 0.0;
    }
    return c;
}

} // namespace

std::optional<SplitCandidate> select_split(const TrainingSet& set, std::span<const std::size_t> view,
                                           const C45Params& params)
{
    const auto m = set.attributes.size();
    std::vector<std::optional<SplitCandidate>> candidates(m);
    if (params.parallel && m > 1) {
        std::vector<std::future<std::optional<SplitCandidate>>> jobs;
        jobs.reserve(m);
        for (std::size_t a = 0; a < m; ++a) {
            jobs.push_back(std::async(std::launch::async, [&, a] { return candidate_for(set, view, a, params); }));
        }
        for (std::size_t a = 0; a < m; ++a) {
            candidates[a] = jobs[a].get();
        }
    } else {
        for (std::size_t a = 0; a < m; ++a) {
            candidates[a] = candidate_for(set, view, a, params);
        }
    }

    double gain_sum = 0.0;
    std::size_t count = 0;
    for (const auto& c : candidates) {
        if (c && c->info_gain > 0.0) {
            gain_sum += c->info_gain;
            ++count;
        }
    }
    if (count == 0) {
        // Only zero-gain splits remain (XOR-like structure). Take the first
        // one so that conflict-free data can still be fitted exactly.
        for (const auto& c : candidates) {
            if (c) {
                return c;
            }
        }
        return std::nullopt;
    }
    const double mean_gain = gain_sum / static_cast<double>(count);
    std::optional<SplitCandidate> best;
    for (const auto& c : candidates) {
        if (!c || !(c->info_gain > 0.0) || c->info_gain < mean_gain - tie_epsilon) {
            continue;
        }
        if (!best || c->gain_ratio > best->gain_ratio + tie_epsilon) {
            best = c;
        }
    }
    return best;
}

namespace {

TreeNode grow_node(const TrainingSet& set, std::vector<std::size_t> view, const C45Params& params, std::size_t depth)
{
    TreeNode node;
    node.distribution = set.distribution(view);
    node.instances = static_cast<double>(view.size());
    if (node.distribution.pure() || view.size() < 2 * params.min_leaf
        || (params.max_depth && depth >= *params.max_depth)) {
        return node;
    }
    const auto split = select_split(set, view, params);
    if (!split) {
        return node;
    }
    std::vector<std::vector<std::size_t>> parts(split->test.branch_count);
    for (const auto i : view) {
        parts[split->test.branch(set.rows[i])].push_back(i);
    }
    node.test = split->test;
    for (auto& part : parts) {
        if (part.empty()) {
            TreeNode empty;
            empty.distribution = node.distribution;
            empty.instances = 0.0;
            node.children.push_back(std::move(empty));
        } else {
            node.children.push_back(grow_node(set, std::move(part), params, depth + 1));
        }
    }
    return node;
}

} // namespace

TreeNode grow(const TrainingSet& set, std::span<const std::size_t> view, const C45Params& params)
{
    params.validate();
    if (view.empty()) {
        throw ValidationError("c45: cannot grow a tree from an empty view");
    }
    return grow_node(set, {view.begin(), view.end()}, params, 0);
}

TreeNode grow(const TrainingSet& set, const C45Params& params)
{
    set.validate();
    return grow(set, set.all_rows(), params);
}

double pessimistic_rate(double errors, double instances, double confidence_factor)
{
    const boost::math::normal standard;
    const double z = boost::math::quantile(boost::math::complement(standard, confidence_factor));
    const double n = instances;
    const double f = errors / n;
    const double z2 = z * z;
    const double radicand = std::max(0.0, f / n - f * f / n + z2 / (4 * n * n));
    return (f + z2 / (2 * n) + z * std::sqrt(radicand)) / (1 + z2 / n);
}

double pessimistic_errors(double errors, double instances, double confidence_factor)
{
    if (!(instances > 0.0)) {
        return 0.0;
    }
    return instances * pessimistic_rate(errors, instances, confidence_factor);
}

namespace {

// Returns the pruned subtree and writes its summed leaf estimate.
TreeNode prune_node(const TreeNode& node, double cf, double& estimate)
{
    if (node.is_leaf()) {
        estimate = pessimistic_errors(node.errors(), node.instances, cf);
        return node;
    }
    TreeNode pruned = node;
    double subtree = 0.0;
    for (auto& child : pruned.children) {
        double e = 0.0;
        child = prune_node(child, cf, e);
        subtree += e;
    }
    const double as_leaf = pessimistic_errors(node.errors(), node.instances, cf);
    if (as_leaf <= subtree + tie_epsilon) {
        pruned.children.clear();
        pruned.test.reset();
        estimate = as_leaf;
    } else {
        estimate = subtree;
    }
    return pruned;
}

} // namespace

TreeNode prune_ebp(const TreeNode& root, const C45Params& params)
{
    params.validate();
    double estimate = 0.0;
    return prune_node(root, params.confidence_factor, estimate);
}

DecisionTree::DecisionTree(std::vector<AttributeMeta> attributes, std::vector<std::string> classes, TreeNode root)
    : attributes_(std::move(attributes))
    , classes_(std::move(classes))
    , root_(std::move(root))
{
}

ClassDistribution DecisionTree::predict_distribution(const FeatureVector& x) const
{
    check_features(attributes_, x);
    const TreeNode* node = &root_;
    while (!node->is_leaf()) {
        node = &node->children[node->test->branch(x)];
    }
    return node->distribution.normalized();
}

std::size_t DecisionTree::predict(const FeatureVector& x) const { return predict_distribution(x).majority(); }

namespace {

void render_node(const DecisionTree& tree, const TreeNode& node, std::size_t depth, std::string& out)
{
    for (std::size_t b = 0; b < node.children.size(); ++b) {
        const auto& test = *node.test;
        const auto& meta = tree.attributes()[test.attribute];
        for (std::size_t d = 0; d < depth; ++d) {
            out += "|   ";
        }
        out += meta.name;
        if (test.kind == AttributeKind::numeric) {
            out += (b == 0 ? " <= " : " > ") + format_number(test.threshold);
        } else {
            out += " = " + meta.values[b];
        }
        const auto& child = node.children[b];
        if (child.is_leaf()) {
            out += ": " + tree.classes()[child.majority_class()] + " (" + format_number(child.instances);
            if (child.errors() > 0.0) {
                out += "/" + format_number(child.errors());
            }
            out += ")\n";
        } else {
            out += '\n';
            render_node(tree, child, depth + 1, out);
        }
    }
}

} // namespace

std::string DecisionTree::render() const
{
    if (root_.is_leaf()) {
        std::string out = ": " + classes_[root_.majority_class()] + " (" + format_number(root_.instances);
        if (root_.errors() > 0.0) {
            out += "/" + format_number(root_.errors());
        }
        return out + ")\n";
    }
    std::string out;
    render_node(*this, root_, 0, out);
    return out;
}

DecisionTree train_c45(const TrainingSet& set, const C45Params& params)
{
    auto root = grow(set, params);
    if (params.pruning) {
        root = prune_ebp(root, params);
    }
    return DecisionTree(set.attributes, set.classes, std::move(root));
}

// ---- persistence ---------------------------------------------------------------

nlohmann::json schema_fingerprint(const std::vector<AttributeMeta>& attributes)
{
    auto out = nlohmann::json::array();
    for (const auto& a : attributes) {
        nlohmann::json entry{{"name", a.name}, {"kind", a.is_nominal() ? "nominal" : "numeric"}};
        if (a.is_nominal()) {
            entry["values"] = a.values;
        }
        out.push_back(std::move(entry));
    }
    return out;
}

namespace {

nlohmann::json node_to_json(const TreeNode& node)
{
    nlohmann::json j{{"weights", node.distribution.weights}, {"instances", node.instances}};
    if (node.is_leaf()) {
        j["kind"] = "leaf";
        return j;
    }
    j["kind"] = "split";
    j["attribute"] = node.test->attribute;
    if (node.test->kind == AttributeKind::numeric) {
        j["test"] = "numeric";
        j["threshold"] = node.test->threshold;
    } else {
        j["test"] = "nominal";
    }
    j["children"] = nlohmann::json::array();
    for (const auto& c : node.children) {
        j["children"].push_back(node_to_json(c));
    }
    return j;
}

TreeNode node_from_json(const nlohmann::json& j, const std::vector<AttributeMeta>& attributes, std::size_t k)
{
    TreeNode node;
    node.distribution.weights = j.at("weights").get<std::vector<double>>();
    node.instances = j.at("instances").get<double>();
    if (node.distribution.weights.size() != k) {
        throw ValidationError("tree: leaf weight vector does not match the class count");
    }
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "leaf") {
        if (!(node.distribution.total() > 0.0)) {
            throw ValidationError("tree: leaf with zero total weight");
        }
        return node;
    }
    if (kind != "split") {
        throw ValidationError("tree: unknown node kind '" + kind + "'");
    }
    SplitTest test;
    test.attribute = j.at("attribute").get<std::size_t>();
    if (test.attribute >= attributes.size()) {
        throw ValidationError("tree: split on an attribute outside the schema");
    }
    const auto& meta = attributes[test.attribute];
    const auto test_kind = j.at("test").get<std::string>();
    if (test_kind == "numeric" && !meta.is_nominal()) {
        test.kind = AttributeKind::numeric;
        test.threshold = j.at("threshold").get<double>();
        test.branch_count = 2;
    } else if (test_kind == "nominal" && meta.is_nominal()) {
        test.kind = AttributeKind::nominal;
        test.branch_count = meta.values.size();
    } else {
        throw ValidationError("tree: split test kind does not match attribute '" + meta.name + "'");
    }
    node.test = test;
    for (const auto& c : j.at("children")) {
        node.children.push_back(node_from_json(c, attributes, k));
    }
    if (node.children.size() != test.branch_count || node.children.size() < 2) {
        throw ValidationError("tree: split node with a wrong number of children");
    }
    return node;
}

} // namespace

std::vector<AttributeMeta> attributes_from_fingerprint(const nlohmann::json& j)
{
    std::vector<AttributeMeta> out;
    for (const auto& entry : j) {
        AttributeMeta a;
        a.name = entry.at("name").get<std::string>();
        const auto kind = entry.at("kind").get<std::string>();
        if (kind == "nominal") {
            a.kind = AttributeKind::nominal;
            a.values = entry.at("values").get<std::vector<std::string>>();
        } else if (kind == "numeric") {
            a.kind = AttributeKind::numeric;
        } else {
            throw ValidationError("schema: unknown attribute kind '" + kind + "'");
        }
        a.index = out.size();
        out.push_back(std::move(a));
    }
    return out;
}

nlohmann::json to_json(const DecisionTree& tree)
{
    return nlohmann::json{{"schema", schema_fingerprint(tree.attributes())},
                          {"classes", tree.classes()},
                          {"root", node_to_json(tree.root())}};
}

DecisionTree tree_from_json(const nlohmann::json& doc, const std::vector<AttributeMeta>* expected)
{
    try {
        if (expected && doc.at("schema") != schema_fingerprint(*expected)) {
            throw ValidationError("tree: schema fingerprint does not match the data");
        }
        auto attributes = attributes_from_fingerprint(doc.at("schema"));
        auto classes = doc.at("classes").get<std::vector<std::string>>();
        if (classes.empty()) {
            throw ValidationError("tree: empty class list");
        }
        auto root = node_from_json(doc.at("root"), attributes, classes.size());
        return DecisionTree(std::move(attributes), std::move(classes), std::move(root));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("tree: ") + e.what());
    }
}

} // namespace chidt
