#pragma once

#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "chidt/c45.hpp"
#include "chidt/dataset.hpp"
#include "chidt/ontology.hpp"

namespace chidt {

// A multi-label prediction together with the probabilities behind it.
struct LabelScores {
    LabelSet labels;
    // P(code in the output), one per alphabet code.
    std::vector<double> label_probabilities;
    // P(lowest-sorted output code = code) per alphabet code, then P(output
    // is empty) as the last entry. Sums to 1.
    std::vector<double> principal_probabilities;
};

// Binary relevance: one C4.5 tree per code, class 0 = absent, 1 = present.
class BRModel {
public:
    BRModel() = default;
    BRModel(std::vector<AttributeMeta> attributes, std::vector<Code> codes, std::vector<DecisionTree> trees,
            double threshold, std::set<std::string> training_ids, C45Params params);

    const std::vector<AttributeMeta>& attributes() const { return attributes_; }
    const std::vector<Code>& codes() const { return codes_; }
    const std::vector<DecisionTree>& trees() const { return trees_; }
    double threshold() const { return threshold_; }
    const std::set<std::string>& training_ids() const { return training_ids_; }
    const C45Params& params() const { return params_; }
    // Codes whose training target had a single class (constant-leaf trees).
    std::set<Code> constant_labels() const;

    double positive_probability(std::size_t label, const FeatureVector& x) const;
    // A code is included iff its positive probability >= threshold.
    LabelSet predict(const FeatureVector& x) const;
    LabelScores score(const FeatureVector& x) const;

    friend bool operator==(const BRModel&, const BRModel&) = default;

private:
    std::vector<AttributeMeta> attributes_;
    std::vector<Code> codes_;
    std::vector<DecisionTree> trees_;
    double threshold_ = 0.5;
    std::set<std::string> training_ids_;
    C45Params params_;
};

// Per-label trees may be trained on worker threads; the result does not
// depend on it.
BRModel train_br(const Dataset& ds, const C45Params& params, double threshold = 0.5, bool parallel = false);

// The binary target dataset for one code.
TrainingSet binary_target(const Dataset& ds, const Code& code);

// Label powerset: one tree whose classes are the observed code combinations.
class LPModel {
public:
    LPModel() = default;
    LPModel(std::vector<Code> alphabet, std::vector<LabelSet> combinations, DecisionTree tree,
            std::set<std::string> training_ids, C45Params params);

    const std::vector<Code>& alphabet() const { return alphabet_; }
    const std::vector<LabelSet>& combinations() const { return combinations_; }
    const DecisionTree& tree() const { return tree_; }
    const std::set<std::string>& training_ids() const { return training_ids_; }
    const C45Params& params() const { return params_; }

    LabelSet predict(const FeatureVector& x) const;
    LabelScores score(const FeatureVector& x) const;

    friend bool operator==(const LPModel&, const LPModel&) = default;

private:
    std::vector<Code> alphabet_;
    std::vector<LabelSet> combinations_;
    DecisionTree tree_;
    std::set<std::string> training_ids_;
    C45Params params_;
};

// Throws ValidationError if a record has an empty label set.
LPModel train_label_powerset(const Dataset& ds, const C45Params& params);

enum class Stage2Strategy { diverse_br, label_powerset };

std::string_view to_string(Stage2Strategy strategy);
std::optional<Stage2Strategy> parse_strategy(std::string_view text);

struct ChiDTOptions {
    Stage2Strategy strategy = Stage2Strategy::diverse_br;
    C45Params stage1;
    // Unset: unpruned, min_leaf 1 for diverse-br; C4.5 defaults for
    // label-powerset.
    std::optional<C45Params> stage2;
    double threshold = 0.5;
    // Replace an invalid stage-2 output with its single most probable code.
    bool single_label_fallback = false;
    bool parallel = false;

    C45Params effective_stage2() const;
};

struct CascadeTrace {
    bool triggered = false;
    ValidityReason reason = ValidityReason::ok;
    LabelSet stage1_output;
    LabelSet final_output;
    bool fallback_applied = false;
};

// Counters a caller can attach to observe the cascade.
struct CascadeStats {
    std::size_t predictions = 0;
    std::size_t stage2_evaluations = 0;
};

struct CascadePrediction {
    LabelScores scores; // from the stage whose output is final
    CascadeTrace trace;
};

class ChiDTModel {
public:
    using Stage2 = std::variant<BRModel, LPModel>;

    ChiDTModel() = default;
    ChiDTModel(BRModel stage1, Stage2 stage2, ValidCombinationRegistry registry, std::vector<ExclusionGroup> exclusions,
               bool single_label_fallback = false);

    Stage2Strategy strategy() const;
    const BRModel& stage1() const { return stage1_; }
    const Stage2& stage2() const { return stage2_; }
    const ValidCombinationRegistry& registry() const { return registry_; }
    const std::vector<ExclusionGroup>& exclusions() const { return exclusions_; }
    const std::set<std::string>& training_ids() const { return stage1_.training_ids(); }
    const std::vector<AttributeMeta>& attributes() const { return stage1_.attributes(); }
    const std::vector<Code>& alphabet() const { return stage1_.codes(); }
    bool single_label_fallback() const { return single_label_fallback_; }

    LabelScores stage2_score(const FeatureVector& x) const;

    // Stage 1 output if it is a valid combination; otherwise stage 2's output,
    // verbatim.
    CascadePrediction predict(const FeatureVector& x, CascadeStats* stats = nullptr) const;

    friend bool operator==(const ChiDTModel&, const ChiDTModel&) = default;

private:
    BRModel stage1_;
    Stage2 stage2_;
    ValidCombinationRegistry registry_;
    std::vector<ExclusionGroup> exclusions_;
    bool single_label_fallback_ = false;
};

ChiDTModel train_chidt(const Dataset& ds, const ChiDTOptions& options, ValidCombinationRegistry registry,
                       std::vector<ExclusionGroup> exclusions = {});

// Fraction of records of `ds` whose prediction triggered the cascade.
double trigger_rate(const ChiDTModel& model, const Dataset& ds);

nlohmann::json to_json(const BRModel& model);
BRModel br_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const LPModel& model);
LPModel lp_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ChiDTModel& model);
// With `expected`, refuses a model trained on a different schema.
ChiDTModel chidt_from_json(const nlohmann::json& doc, const std::vector<AttributeMeta>* expected = nullptr);

} // namespace chidt
