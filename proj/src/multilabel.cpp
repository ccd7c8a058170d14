#include "chidt/multilabel.hpp"

#include <algorithm>
#include <future>
#include <map>

#include "chidt/error.hpp"

namespace chidt {

using nlohmann::json;

namespace {

std::vector<double> principal_from_marginals(const std::vector<double>& p)
{
    // Labels treated as independent: P(lowest included code = i) is
    // p_i times the probability that no lower code was included.
    std::vector<double> out(p.size() + 1, 0.0);
    double none_below = 1.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        out[i] = none_below * p[i];
        none_below *= 1.0 - p[i];
    }
    out.back() = none_below;
    return out;
}

std::size_t alphabet_index(const std::vector<Code>& alphabet, const Code& code)
{
    const auto it = std::lower_bound(alphabet.begin(), alphabet.end(), code);
    if (it == alphabet.end() || *it != code) {
        throw ValidationError("code '" + code + "' outside the model alphabet");
    }
    return static_cast<std::size_t>(it - alphabet.begin());
}

std::set<std::string> ids_of(const Dataset& ds)
{
    std::set<std::string> ids;
    for (const auto& r : ds.records()) {
        ids.insert(r.id);
    }
    return ids;
}

} // namespace

// ---- binary relevance ----------------------------------------------------------

BRModel::BRModel(std::vector<AttributeMeta> attributes, std::vector<Code> codes, std::vector<DecisionTree> trees,
                 double threshold, std::set<std::string> training_ids, C45Params params)
    : attributes_(std::move(attributes))
    , codes_(std::move(codes))
    , trees_(std::move(trees))
    , threshold_(threshold)
    , training_ids_(std::move(training_ids))
    , params_(params)
{
    if (codes_.size() != trees_.size()) {
        throw ValidationError("br: one tree per code required");
    }
    if (!std::is_sorted(codes_.begin(), codes_.end())) {
        throw ValidationError("br: codes must be in alphabet order");
    }
    for (const auto& t : trees_) {
        if (t.classes().size() != 2) {
            throw ValidationError("br: every tree must be binary");
        }
    }
}

std::set<Code> BRModel::constant_labels() const
{
    std::set<Code> out;
    for (std::size_t i = 0; i < codes_.size(); ++i) {
        if (trees_[i].root().distribution.pure() && trees_[i].root().is_leaf()) {
            out.insert(codes_[i]);
        }
    }
    return out;
}

double BRModel::positive_probability(std::size_t label, const FeatureVector& x) const
{
    return trees_[label].predict_distribution(x).weights[1];
}

LabelSet BRModel::predict(const FeatureVector& x) const { return score(x).labels; }

LabelScores BRModel::score(const FeatureVector& x) const
{
    check_features(attributes_, x);
    LabelScores s;
    s.label_probabilities.reserve(codes_.size());
    for (std::size_t i = 0; i < codes_.size(); ++i) {
        const double p = positive_probability(i, x);
        s.label_probabilities.push_back(p);
        if (p >= threshold_) {
            s.labels.insert(codes_[i]);
        }
    }
    s.principal_probabilities = principal_from_marginals(s.label_probabilities);
    return s;
}

TrainingSet binary_target(const Dataset& ds, const Code& code)
{
    TrainingSet set;
    set.attributes = ds.attributes();
    set.classes = {"0", "1"};
    set.rows.reserve(ds.size());
    set.targets.reserve(ds.size());
    for (const auto& r : ds.records()) {
        set.rows.push_back(r.features);
        set.targets.push_back(r.labels.contains(code) ? 1 : 0);
    }
    return set;
}

BRModel train_br(const Dataset& ds, const C45Params& params, double threshold, bool parallel)
{
    if (ds.empty()) {
        throw ValidationError("br: empty training dataset");
    }
    if (ds.alphabet().empty()) {
        throw ValidationError("br: empty label alphabet");
    }
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw ValidationError("br: threshold outside [0,1]");
    }
    params.validate();
    auto codes = ds.alphabet();
    std::sort(codes.begin(), codes.end());

    auto train_one = [&](const Code& code) { return train_c45(binary_target(ds, code), params); };
    std::vector<DecisionTree> trees;
    trees.reserve(codes.size());
    if (parallel) {
        std::vector<std::future<DecisionTree>> jobs;
        for (const auto& code : codes) {
            jobs.push_back(std::async(std::launch::async, train_one, std::cref(code)));
        }
        for (auto& job : jobs) {
            trees.push_back(job.get());
        }
    } else {
        for (const auto& code : codes) {
            trees.push_back(train_one(code));
        }
    }
    return BRModel(ds.attributes(), std::move(codes), std::move(trees), threshold, ids_of(ds), params);
}

// ---- label powerset ------------------------------------------------------------

LPModel::LPModel(std::vector<Code> alphabet, std::vector<LabelSet> combinations, DecisionTree tree,
                 std::set<std::string> training_ids, C45Params params)
    : alphabet_(std::move(alphabet))
    , combinations_(std::move(combinations))
    , tree_(std::move(tree))
    , training_ids_(std::move(training_ids))
    , params_(params)
{
    if (combinations_.empty()) {
        throw ValidationError("lp: no combinations");
    }
    if (combinations_.size() != tree_.classes().size()) {
        throw ValidationError("lp: tree classes do not match the combination list");
    }
    for (std::size_t i = 0; i < combinations_.size(); ++i) {
        if (combinations_[i].empty()) {
            throw ValidationError("lp: empty combination class");
        }
        if (join_labels(combinations_[i]) != tree_.classes()[i]) {
            throw ValidationError("lp: tree class '" + tree_.classes()[i] + "' does not match its combination");
        }
    }
}

LabelSet LPModel::predict(const FeatureVector& x) const { return combinations_[tree_.predict(x)]; }

LabelScores LPModel::score(const FeatureVector& x) const
{
    const auto dist = tree_.predict_distribution(x);
    LabelScores s;
    s.labels = combinations_[dist.majority()];
    s.label_probabilities.assign(alphabet_.size(), 0.0);
    s.principal_probabilities.assign(alphabet_.size() + 1, 0.0);
    for (std::size_t c = 0; c < combinations_.size(); ++c) {
        const double p = dist.weights[c];
        for (const auto& code : combinations_[c]) {
            s.label_probabilities[alphabet_index(alphabet_, code)] += p;
        }
        s.principal_probabilities[alphabet_index(alphabet_, *combinations_[c].begin())] += p;
    }
    return s;
}

LPModel train_label_powerset(const Dataset& ds, const C45Params& params)
{
    if (ds.empty()) {
        throw ValidationError("lp: empty training dataset");
    }
    std::map<LabelSet, std::size_t> class_of;
    for (const auto& r : ds.records()) {
        if (r.labels.empty()) {
            throw ValidationError("lp: record '" + r.id + "' has an empty label set");
        }
        class_of.emplace(r.labels, 0);
    }
    std::vector<LabelSet> combinations;
    TrainingSet set;
    set.attributes = ds.attributes();
    for (auto& [labels, index] : class_of) {
        index = combinations.size();
        combinations.push_back(labels);
        set.classes.push_back(join_labels(labels));
    }
    for (const auto& r : ds.records()) {
        set.rows.push_back(r.features);
        set.targets.push_back(class_of.at(r.labels));
    }
    auto alphabet = ds.alphabet();
    std::sort(alphabet.begin(), alphabet.end());
    return LPModel(std::move(alphabet), std::move(combinations), train_c45(set, params), ids_of(ds), params);
}

// ---- cascade ---------------------------------------------------------------------

std::string_view to_string(Stage2Strategy strategy)
{
    return strategy == Stage2Strategy::diverse_br ? "diverse-br" : "label-powerset";
}

std::optional<Stage2Strategy> parse_strategy(std::string_view text)
{
    if (text == "diverse-br") {
        return Stage2Strategy::diverse_br;
    }
    if (text == "label-powerset") {
        return Stage2Strategy::label_powerset;
    }
    return std::nullopt;
}

C45Params ChiDTOptions::effective_stage2() const
{
    if (stage2) {
        return *stage2;
    }
    C45Params p;
    if (strategy == Stage2Strategy::diverse_br) {
        p.pruning = false;
        p.min_leaf = 1;
    }
    p.parallel = stage1.parallel;
    return p;
}

ChiDTModel::ChiDTModel(BRModel stage1, Stage2 stage2, ValidCombinationRegistry registry,
                       std::vector<ExclusionGroup> exclusions, bool single_label_fallback)
    : stage1_(std::move(stage1))
    , stage2_(std::move(stage2))
    , registry_(std::move(registry))
    , exclusions_(std::move(exclusions))
    , single_label_fallback_(single_label_fallback)
{
    const auto& ids2 = std::visit([](const auto& m) -> const std::set<std::string>& { return m.training_ids(); },
                                  stage2_);
    if (ids2 != stage1_.training_ids()) {
        throw ValidationError("chidt: both stages must be trained on the same records");
    }
    if (const auto* br = std::get_if<BRModel>(&stage2_); br && br->codes() != stage1_.codes()) {
        throw ValidationError("chidt: stage alphabets differ");
    }
    if (const auto* lp = std::get_if<LPModel>(&stage2_); lp && lp->alphabet() != stage1_.codes()) {
        throw ValidationError("chidt: stage alphabets differ");
    }
}

Stage2Strategy ChiDTModel::strategy() const
{
    return std::holds_alternative<BRModel>(stage2_) ? Stage2Strategy::diverse_br : Stage2Strategy::label_powerset;
}

LabelScores ChiDTModel::stage2_score(const FeatureVector& x) const
{
    return std::visit([&](const auto& m) { return m.score(x); }, stage2_);
}

CascadePrediction ChiDTModel::predict(const FeatureVector& x, CascadeStats* stats) const
{
    CascadePrediction out;
    auto first = stage1_.score(x);
    const auto verdict = is_valid(registry_, exclusions_, first.labels);
    out.trace.stage1_output = first.labels;
    out.trace.reason = verdict.reason;
    out.trace.triggered = !verdict.valid;
    if (stats) {
        ++stats->predictions;
    }
    if (verdict.valid) {
        out.trace.final_output = first.labels;
        out.scores = std::move(first);
        return out;
    }

    if (stats) {
        ++stats->stage2_evaluations;
    }
    out.scores = stage2_score(x);
    if (single_label_fallback_ && !is_valid(registry_, exclusions_, out.scores.labels).valid) {
        const auto& p = out.scores.label_probabilities;
        const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
        out.scores.labels = {alphabet()[best]};
        out.trace.fallback_applied = true;
    }
    out.trace.final_output = out.scores.labels;
    return out;
}

ChiDTModel train_chidt(const Dataset& ds, const ChiDTOptions& options, ValidCombinationRegistry registry,
                       std::vector<ExclusionGroup> exclusions)
{
    auto stage1 = train_br(ds, options.stage1, options.threshold, options.parallel);
    const auto stage2_params = options.effective_stage2();
    ChiDTModel::Stage2 stage2;
    if (options.strategy == Stage2Strategy::diverse_br) {
        stage2 = train_br(ds, stage2_params, options.threshold, options.parallel);
    } else {
        stage2 = train_label_powerset(ds, stage2_params);
    }
    return ChiDTModel(std::move(stage1), std::move(stage2), std::move(registry), std::move(exclusions),
                      options.single_label_fallback);
}

double trigger_rate(const ChiDTModel& model, const Dataset& ds)
{
    if (ds.empty()) {
        return 0.0;
    }
    std::size_t triggered = 0;
    for (const auto& r : ds.records()) {
        triggered += model.predict(r.features).trace.triggered ? 1 : 0;
    }
    return static_cast<double>(triggered) / static_cast<double>(ds.size());
}

// ---- persistence ---------------------------------------------------------------

json to_json(const BRModel& model)
{
    json trees = json::array();
    for (const auto& t : model.trees()) {
        trees.push_back(to_json(t));
    }
    return json{{"kind", "br"},
                {"codes", model.codes()},
                {"threshold", model.threshold()},
                {"params", to_json(model.params())},
                {"constant_labels", model.constant_labels()},
                {"training_ids", model.training_ids()},
                {"schema", schema_fingerprint(model.attributes())},
                {"trees", std::move(trees)}};
}

BRModel br_from_json(const json& doc)
{
    try {
        if (doc.at("kind") != "br") {
            throw ValidationError("model: expected a binary-relevance stage");
        }
        auto attributes = attributes_from_fingerprint(doc.at("schema"));
        std::vector<DecisionTree> trees;
        for (const auto& t : doc.at("trees")) {
            trees.push_back(tree_from_json(t, &attributes));
        }
        return BRModel(std::move(attributes), doc.at("codes").get<std::vector<Code>>(), std::move(trees),
                       doc.at("threshold").get<double>(), doc.at("training_ids").get<std::set<std::string>>(),
                       c45_params_from_json(doc.at("params")));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("model: ") + e.what());
    }
}

json to_json(const LPModel& model)
{
    json combos = json::array();
    for (const auto& c : model.combinations()) {
        combos.push_back(c);
    }
    return json{{"kind", "label-powerset"},
                {"alphabet", model.alphabet()},
                {"combinations", std::move(combos)},
                {"params", to_json(model.params())},
                {"training_ids", model.training_ids()},
                {"tree", to_json(model.tree())}};
}

LPModel lp_from_json(const json& doc)
{
    try {
        if (doc.at("kind") != "label-powerset") {
            throw ValidationError("model: expected a label-powerset stage");
        }
        std::vector<LabelSet> combos;
        for (const auto& c : doc.at("combinations")) {
            combos.push_back(c.get<LabelSet>());
        }
        return LPModel(doc.at("alphabet").get<std::vector<Code>>(), std::move(combos), tree_from_json(doc.at("tree")),
                       doc.at("training_ids").get<std::set<std::string>>(), c45_params_from_json(doc.at("params")));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("model: ") + e.what());
    }
}

json to_json(const ChiDTModel& model)
{
    const auto stage2 = std::visit([](const auto& m) { return to_json(m); }, model.stage2());
    const double threshold2 = std::holds_alternative<BRModel>(model.stage2())
        ? std::get<BRModel>(model.stage2()).threshold()
        : 0.5;
    return json{{"format", "chidt-model/1"},
                {"strategy", to_string(model.strategy())},
                {"schema", schema_fingerprint(model.attributes())},
                {"alphabet", model.alphabet()},
                {"training_ids", model.training_ids()},
                {"thresholds", {{"stage1", model.stage1().threshold()}, {"stage2", threshold2}}},
                {"single_label_fallback", model.single_label_fallback()},
                {"registry", to_json(model.registry())},
                {"exclusions", to_json(model.exclusions())},
                {"stage1", to_json(model.stage1())},
                {"stage2", stage2}};
}

ChiDTModel chidt_from_json(const json& doc, const std::vector<AttributeMeta>* expected)
{
    try {
        if (doc.at("format") != "chidt-model/1") {
            throw ValidationError("model: unsupported format");
        }
        if (expected && doc.at("schema") != schema_fingerprint(*expected)) {
            throw ValidationError("model: schema fingerprint does not match the data");
        }
        const auto strategy = parse_strategy(doc.at("strategy").get<std::string>());
        if (!strategy) {
            throw ValidationError("model: unknown strategy");
        }
        auto stage1 = br_from_json(doc.at("stage1"));
        ChiDTModel::Stage2 stage2;
        if (*strategy == Stage2Strategy::diverse_br) {
            stage2 = br_from_json(doc.at("stage2"));
        } else {
            stage2 = lp_from_json(doc.at("stage2"));
        }
        if (doc.at("training_ids").get<std::set<std::string>>() != stage1.training_ids()) {
            throw ValidationError("model: envelope training ids differ from the stages'");
        }
        std::vector<ExclusionGroup> exclusions;
        for (const auto& g : doc.at("exclusions")) {
            exclusions.push_back(ExclusionGroup{g.get<LabelSet>()});
        }
        return ChiDTModel(std::move(stage1), std::move(stage2), registry_from_json(doc.at("registry")),
                          std::move(exclusions), doc.value("single_label_fallback", false));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("model: ") + e.what());
    }
}

} // namespace chidt
