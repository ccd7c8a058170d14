#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "chidt/dataset.hpp"
#include "chidt/multilabel.hpp"

namespace chidt {

// Cell (i, j) counts instances of true class i predicted as class j.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::vector<std::string> classes);

    const std::vector<std::string>& classes() const { return classes_; }
    std::size_t size() const { return classes_.size(); }
    std::size_t count(std::size_t truth, std::size_t predicted) const { return cells_[truth * size() + predicted]; }
    void add(std::size_t truth, std::size_t predicted, std::size_t n = 1);

    std::size_t total() const;
    std::size_t trace() const;
    std::size_t row_sum(std::size_t i) const;
    std::size_t col_sum(std::size_t j) const;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::vector<std::string> classes_;
    std::vector<std::size_t> cells_;
};

struct Accuracy {
    std::size_t correct = 0;
    double percent = 0.0;
};

// Both throw ValidationError on an empty matrix.
Accuracy accuracy(const ConfusionMatrix& cm);
// Cohen's kappa; 0 when chance agreement is already 1.
double kappa(const ConfusionMatrix& cm);

struct ProbabilisticErrors {
    double mae = 0.0;
    double rmse = 0.0;
    // Undefined when the prior predictor makes no error at all.
    std::optional<double> rae_percent;
    std::optional<double> rrse_percent;
};

// `predicted[i]` is a distribution over the k classes, `truth[i]` the true
// class index, `prior` the training class frequencies. Relative errors are
// taken against always predicting `prior`.
ProbabilisticErrors probabilistic_errors(std::span<const std::vector<double>> predicted,
                                         std::span<const std::size_t> truth, std::span<const double> prior);

enum class EvalMode { principal, multilabel };
enum class Protocol { resubstitution, holdout, kfold };

std::string_view to_string(EvalMode mode);
std::optional<EvalMode> parse_mode(std::string_view text);
std::string_view to_string(Protocol protocol);
std::optional<Protocol> parse_protocol(std::string_view text);

struct MetricsReport {
    EvalMode mode = EvalMode::multilabel;
    Protocol protocol = Protocol::resubstitution;
    // Evaluation set includes training records.
    bool contaminated = false;
    std::size_t correct = 0;
    std::size_t total = 0;
    double kappa = 0.0;
    double mae = 0.0;
    double rmse = 0.0;
    std::optional<double> rae_percent;
    std::optional<double> rrse_percent;

    std::size_t incorrect() const { return total - correct; }
    double accuracy_percent() const;
};

struct LabelPrecisionRecall {
    Code code;
    std::optional<double> precision;
    std::optional<double> recall;
};

struct MultiLabelReport {
    double subset_accuracy_percent = 0.0;
    double hamming_loss = 0.0;
    std::vector<LabelPrecisionRecall> per_label;
    std::optional<double> trigger_rate;
};

struct EvaluationResult {
    MetricsReport metrics;
    MultiLabelReport multilabel;
    ConfusionMatrix confusion;
    std::vector<std::string> evaluated_ids;
};

struct ScoredPrediction {
    LabelScores scores;
    std::optional<CascadeTrace> trace;
};

using Predictor = std::function<ScoredPrediction(const FeatureVector&)>;

// The returned predictor holds its own copy of the model.
Predictor predictor_for(const ChiDTModel& model);
Predictor predictor_for(const BRModel& model);
Predictor predictor_for(const LPModel& model);

// Scores every record of `eval` with priors taken from `train`. Both must
// share one schema and alphabet.
EvaluationResult evaluate(const Predictor& predictor, const Dataset& eval, const Dataset& train, EvalMode mode);

// All records, training ones included. The report is flagged contaminated.
EvaluationResult evaluate_resubstitution(const Predictor& predictor, const Dataset& ds, const SplitSpec& split,
                                         EvalMode mode);
// Test records only.
EvaluationResult evaluate_holdout(const Predictor& predictor, const Dataset& ds, const SplitSpec& split,
                                  EvalMode mode);

// Fold index per record: records grouped by their lowest-sorted code,
// shuffled within each group, then dealt round-robin. Fold sizes differ by at
// most one.
std::vector<std::size_t> kfold_assignment(const Dataset& ds, std::size_t k, std::uint64_t seed);

using Trainer = std::function<Predictor(const Dataset& train)>;

struct KFoldResult {
    std::vector<EvaluationResult> folds;
    // Counts pooled over folds; kappa and error metrics averaged over folds.
    MetricsReport mean;
    MultiLabelReport mean_multilabel;
};

KFoldResult evaluate_kfold(const Dataset& ds, std::size_t k, std::uint64_t seed, const Trainer& trainer,
                           EvalMode mode);

// Result-table layout: one "<label>\t<value>" row per metric, percentages and
// plain metrics to four decimals.
std::string format_report(const MetricsReport& report);
std::string format_multilabel(const MultiLabelReport& report);

// Exact four-decimal rendering of 100 * part / whole, e.g. "94.3878 %".
std::string format_percent(std::size_t part, std::size_t whole);

nlohmann::json to_json(const MetricsReport& report);
nlohmann::json to_json(const MultiLabelReport& report);
nlohmann::json to_json(const EvaluationResult& result);

} // namespace chidt
