#include "chidt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>

#include "chidt/error.hpp"
#include "chidt/random.hpp"

namespace chidt {

using nlohmann::json;

namespace {

const std::string none_class = "(none)";

std::string fixed4(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string combination_class(const LabelSet& labels) { return labels.empty() ? none_class : join_labels(labels); }

} // namespace

// ---- confusion matrix and metrics --------------------------------------------------

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> classes)
    : classes_(std::move(classes))
    , cells_(classes_.size() * classes_.size(), 0)
{
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::size_t n)
{
    if (truth >= size() || predicted >= size()) {
        throw ValidationError("confusion matrix: class index out of range");
    }
    cells_[truth * size() + predicted] += n;
}

std::size_t ConfusionMatrix::total() const
{
    std::size_t t = 0;
    for (const auto c : cells_) {
        t += c;
    }
    return t;
}

std::size_t ConfusionMatrix::trace() const
{
    std::size_t t = 0;
    for (std::size_t i = 0; i < size(); ++i) {
        t += count(i, i);
    }
    return t;
}

std::size_t ConfusionMatrix::row_sum(std::size_t i) const
{
    std::size_t s = 0;
    for (std::size_t j = 0; j < size(); ++j) {
        s += count(i, j);
    }
    return s;
}

std::size_t ConfusionMatrix::col_sum(std::size_t j) const
{
    std::size_t s = 0;
    for (std::size_t i = 0; i < size(); ++i) {
        s += count(i, j);
    }
    return s;
}

Accuracy accuracy(const ConfusionMatrix& cm)
{
    const auto total = cm.total();
    if (total == 0) {
        throw ValidationError("accuracy of an empty confusion matrix");
    }
    return {cm.trace(), 100.0 * static_cast<double>(cm.trace()) / static_cast<double>(total)};
}

double kappa(const ConfusionMatrix& cm)
{
    const auto total = cm.total();
    if (total == 0) {
        throw ValidationError("kappa of an empty confusion matrix");
    }
    const double n = static_cast<double>(total);
    const double observed = static_cast<double>(cm.trace()) / n;
    double chance = 0.0;
    for (std::size_t j = 0; j < cm.size(); ++j) {
        chance += static_cast<double>(cm.row_sum(j)) * static_cast<double>(cm.col_sum(j));
    }
    chance /= n * n;
    if (chance >= 1.0) {
        return 0.0;
    }
    return (observed - chance) / (1.0 - chance);
}

ProbabilisticErrors probabilistic_errors(std::span<const std::vector<double>> predicted,
                                         std::span<const std::size_t> truth, std::span<const double> prior)
{
    if (predicted.size() != truth.size() || predicted.empty()) {
        throw ValidationError("probabilistic errors: need one distribution per instance");
    }
    const auto k = prior.size();
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    double prior_abs = 0.0;
    double prior_sq = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i].size() != k || truth[i] >= k) {
            throw ValidationError("probabilistic errors: distribution size differs from the class count");
        }
        for (std::size_t j = 0; j < k; ++j) {
            const double y = truth[i] == j ? 1.0 : 0.0;
            const double d = predicted[i][j] - y;
            const double d0 = prior[j] - y;
            abs_sum += std::abs(d);
            sq_sum += d * d;
            prior_abs += std::abs(d0);
            prior_sq += d0 * d0;
        }
    }
    const double cells = static_cast<double>(predicted.size() * k);
    ProbabilisticErrors e;
    e.mae = abs_sum / cells;
    e.rmse = std::sqrt(sq_sum / cells);
    if (prior_abs > 0.0) {
        e.rae_percent = 100.0 * abs_sum / prior_abs;
    }
    if (prior_sq > 0.0) {
        e.rrse_percent = 100.0 * std::sqrt(sq_sum / prior_sq);
    }
    return e;
}

std::string_view to_string(EvalMode mode) { return mode == EvalMode::principal ? "principal" : "multilabel"; }

std::optional<EvalMode> parse_mode(std::string_view text)
{
    if (text == "principal") {
        return EvalMode::principal;
    }
    if (text == "multilabel") {
        return EvalMode::multilabel;
    }
    return std::nullopt;
}

std::string_view to_string(Protocol protocol)
{
    switch (protocol) {
    case Protocol::resubstitution:
        return "resubstitution";
    case Protocol::holdout:
        return "holdout";
    case Protocol::kfold:
        return "kfold";
    }
    return "?";
}

std::optional<Protocol> parse_protocol(std::string_view text)
{
    for (const auto p : {Protocol::resubstitution, Protocol::holdout, Protocol::kfold}) {
        if (to_string(p) == text) {
            return p;
        }
    }
    return std::nullopt;
}

double MetricsReport::accuracy_percent() const
{
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

// ---- predictors ----------------------------------------------------------------

Predictor predictor_for(const ChiDTModel& model)
{
    return [model = std::make_shared<const ChiDTModel>(model)](const FeatureVector& x) {
        auto p = model->predict(x);
        return ScoredPrediction{std::move(p.scores), std::move(p.trace)};
    };
}

Predictor predictor_for(const BRModel& model)
{
    return [model = std::make_shared<const BRModel>(model)](const FeatureVector& x) {
        return ScoredPrediction{model->score(x), std::nullopt};
    };
}

Predictor predictor_for(const LPModel& model)
{
    return [model = std::make_shared<const LPModel>(model)](const FeatureVector& x) {
        return ScoredPrediction{model->score(x), std::nullopt};
    };
}

// ---- evaluation ----------------------------------------------------------------

EvaluationResult evaluate(const Predictor& predictor, const Dataset& eval, const Dataset& train, EvalMode mode)
{
    if (eval.empty()) {
        throw ValidationError("evaluation set is empty");
    }
    if (eval.attributes() != train.attributes() || eval.alphabet() != train.alphabet()) {
        throw ValidationError("evaluation and training data differ in schema or alphabet");
    }
    auto alphabet = eval.alphabet();
    std::sort(alphabet.begin(), alphabet.end());
    const auto L = alphabet.size();
    const auto code_index = [&](const Code& c) {
        return static_cast<std::size_t>(std::lower_bound(alphabet.begin(), alphabet.end(), c) - alphabet.begin());
    };

    std::vector<ScoredPrediction> predictions;
    predictions.reserve(eval.size());
    EvaluationResult result;
    for (const auto& r : eval.records()) {
        predictions.push_back(predictor(r.features));
        if (predictions.back().scores.label_probabilities.size() != L) {
            throw ValidationError("predictor alphabet differs from the dataset's");
        }
        result.evaluated_ids.push_back(r.id);
    }
    const auto n = eval.size();

    // Multi-label summary, reported in both modes.
    std::size_t exact = 0;
    std::size_t mismatched = 0;
    std::vector<std::size_t> tp(L, 0), fp(L, 0), fn(L, 0);
    std::size_t triggered = 0;
    bool traced = false;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& truth = eval.records()[i].labels;
        const auto& pred = predictions[i].scores.labels;
        exact += truth == pred ? 1 : 0;
        for (std::size_t l = 0; l < L; ++l) {
            const bool t = truth.contains(alphabet[l]);
            const bool p = pred.contains(alphabet[l]);
            mismatched += t != p ? 1 : 0;
            tp[l] += t && p ? 1 : 0;
            fp[l] += !t && p ? 1 : 0;
            fn[l] += t && !p ? 1 : 0;
        }
        if (predictions[i].trace) {
            traced = true;
            triggered += predictions[i].trace->triggered ? 1 : 0;
        }
    }
    auto& ml = result.multilabel;
    ml.subset_accuracy_percent = 100.0 * static_cast<double>(exact) / static_cast<double>(n);
    ml.hamming_loss = L == 0 ? 0.0 : static_cast<double>(mismatched) / static_cast<double>(n * L);
    for (std::size_t l = 0; l < L; ++l) {
        LabelPrecisionRecall pr{alphabet[l], std::nullopt, std::nullopt};
        if (tp[l] + fp[l] > 0) {
            pr.precision = static_cast<double>(tp[l]) / static_cast<double>(tp[l] + fp[l]);
        }
        if (tp[l] + fn[l] > 0) {
            pr.recall = static_cast<double>(tp[l]) / static_cast<double>(tp[l] + fn[l]);
        }
        ml.per_label.push_back(pr);
    }
    if (traced) {
        ml.trigger_rate = static_cast<double>(triggered) / static_cast<double>(n);
    }

    auto& m = result.metrics;
    m.mode = mode;
    m.total = n;
    if (mode == EvalMode::principal) {
        auto classes = alphabet;
        classes.push_back(none_class);
        ConfusionMatrix cm(classes);
        const auto principal_index = [&](const std::optional<Code>& c) { return c ? code_index(*c) : L; };
        std::vector<double> prior(L + 1, 0.0);
        for (const auto& r : train.records()) {
            prior[principal_index(r.principal_code())] += 1.0;
        }
        for (auto& p : prior) {
            p /= train.empty() ? 1.0 : static_cast<double>(train.size());
        }
        std::vector<std::vector<double>> dists;
        std::vector<std::size_t> truths;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& pred = predictions[i].scores.labels;
            const auto truth = principal_index(eval.records()[i].principal_code());
            const auto guess = pred.empty() ? L : code_index(*pred.begin());
            cm.add(truth, guess);
            truths.push_back(truth);
            dists.push_back(predictions[i].scores.principal_probabilities);
        }
        const auto errors = probabilistic_errors(dists, truths, prior);
        m.correct = cm.trace();
        m.kappa = kappa(cm);
        m.mae = errors.mae;
        m.rmse = errors.rmse;
        m.rae_percent = errors.rae_percent;
        m.rrse_percent = errors.rrse_percent;
        result.confusion = std::move(cm);
    } else {
        std::set<std::string> names;
        for (std::size_t i = 0; i < n; ++i) {
            names.insert(combination_class(eval.records()[i].labels));
            names.insert(combination_class(predictions[i].scores.labels));
        }
        const std::vector<std::string> classes(names.begin(), names.end());
        const auto class_index = [&](const LabelSet& s) {
            return static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), combination_class(s))
                                            - classes.begin());
        };
        ConfusionMatrix cm(classes);
        for (std::size_t i = 0; i < n; ++i) {
            cm.add(class_index(eval.records()[i].labels), class_index(predictions[i].scores.labels));
        }
        m.correct = cm.trace();
        m.kappa = kappa(cm);

        double rae_sum = 0.0, rrse_sum = 0.0;
        std::size_t rae_n = 0, rrse_n = 0;
        for (std::size_t l = 0; l < L; ++l) {
            double q = 0.0;
            for (const auto& r : train.records()) {
                q += r.labels.contains(alphabet[l]) ? 1.0 : 0.0;
            }
            q /= train.empty() ? 1.0 : static_cast<double>(train.size());
            const std::vector<double> prior{1.0 - q, q};
            std::vector<std::vector<double>> dists;
            std::vector<std::size_t> truths;
            for (std::size_t i = 0; i < n; ++i) {
                const double p = predictions[i].scores.label_probabilities[l];
                dists.push_back({1.0 - p, p});
                truths.push_back(eval.records()[i].labels.contains(alphabet[l]) ? 1 : 0);
            }
            const auto e = probabilistic_errors(dists, truths, prior);
            m.mae += e.mae;
            m.rmse += e.rmse;
            if (e.rae_percent) {
                rae_sum += *e.rae_percent;
                ++rae_n;
            }
            if (e.rrse_percent) {
                rrse_sum += *e.rrse_percent;
                ++rrse_n;
            }
        }
        if (L > 0) {
            m.mae /= static_cast<double>(L);
            m.rmse /= static_cast<double>(L);
        }
        if (rae_n > 0) {
            m.rae_percent = rae_sum / static_cast<double>(rae_n);
        }
        if (rrse_n > 0) {
            m.rrse_percent = rrse_sum / static_cast<double>(rrse_n);
        }
        result.confusion = std::move(cm);
    }
    return result;
}

EvaluationResult evaluate_resubstitution(const Predictor& predictor, const Dataset& ds, const SplitSpec& split,
                                         EvalMode mode)
{
    if (!split.partitions(ds)) {
        throw ValidationError("split does not partition the dataset");
    }
    auto result = evaluate(predictor, ds, ds.subset(split.train_ids), mode);
    result.metrics.protocol = Protocol::resubstitution;
    result.metrics.contaminated = true;
    return result;
}

EvaluationResult evaluate_holdout(const Predictor& predictor, const Dataset& ds, const SplitSpec& split, EvalMode mode)
{
    if (!split.partitions(ds)) {
        throw ValidationError("split does not partition the dataset");
    }
    auto result = evaluate(predictor, ds.subset(split.test_ids), ds.subset(split.train_ids), mode);
    result.metrics.protocol = Protocol::holdout;
    result.metrics.contaminated = false;
    return result;
}

std::vector<std::size_t> kfold_assignment(const Dataset& ds, std::size_t k, std::uint64_t seed)
{
    if (k < 2) {
        throw ValidationError("k-fold needs k >= 2");
    }
    if (k > ds.size()) {
        throw ValidationError("k-fold: " + std::to_string(k) + " folds over " + std::to_string(ds.size())
                              + " records leaves a fold with zero instances");
    }
    std::map<std::string, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& labels = ds.records()[i].labels;
        strata[labels.empty() ? none_class : *labels.begin()].push_back(i);
    }
    Rng rng(seed);
    std::vector<std::size_t> fold(ds.size(), 0);
    std::size_t dealt = 0;
    for (auto& [_, members] : strata) {
        rng.shuffle(members);
        for (const auto i : members) {
            fold[i] = dealt++ % k;
        }
    }
    return fold;
}

KFoldResult evaluate_kfold(const Dataset& ds, std::size_t k, std::uint64_t seed, const Trainer& trainer, EvalMode mode)
{
    const auto fold = kfold_assignment(ds, k, seed);
    KFoldResult out;
    for (std::size_t f = 0; f < k; ++f) {
        SplitSpec split;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            (fold[i] == f ? split.test_ids : split.train_ids).insert(ds.records()[i].id);
        }
        const auto train = ds.subset(split.train_ids);
        const auto predictor = trainer(train);
        auto result = evaluate(predictor, ds.subset(split.test_ids), train, mode);
        result.metrics.protocol = Protocol::kfold;
        out.folds.push_back(std::move(result));
    }

    auto& mean = out.mean;
    mean.mode = mode;
    mean.protocol = Protocol::kfold;
    double rae = 0.0, rrse = 0.0;
    std::size_t rae_n = 0, rrse_n = 0, traced = 0;
    double trig = 0.0;
    const double folds = static_cast<double>(k);
    for (const auto& r : out.folds) {
        mean.correct += r.metrics.correct;
        mean.total += r.metrics.total;
        mean.kappa += r.metrics.kappa / folds;
        mean.mae += r.metrics.mae / folds;
        mean.rmse += r.metrics.rmse / folds;
        if (r.metrics.rae_percent) {
            rae += *r.metrics.rae_percent;
            ++rae_n;
        }
        if (r.metrics.rrse_percent) {
            rrse += *r.metrics.rrse_percent;
            ++rrse_n;
        }
        out.mean_multilabel.subset_accuracy_percent += r.multilabel.subset_accuracy_percent / folds;
        out.mean_multilabel.hamming_loss += r.multilabel.hamming_loss / folds;
        if (r.multilabel.trigger_rate) {
            trig += *r.multilabel.trigger_rate;
            ++traced;
        }
    }
    if (rae_n > 0) {
        mean.rae_percent = rae / static_cast<double>(rae_n);
    }
    if (rrse_n > 0) {
        mean.rrse_percent = rrse / static_cast<double>(rrse_n);
    }
    if (traced > 0) {
        out.mean_multilabel.trigger_rate = trig / static_cast<double>(traced);
    }
    return out;
}

// ---- rendering -----------------------------------------------------------------

namespace {

// 100 * part / whole in units of 1e-4 percent, rounded half up.
unsigned long long percent_units(std::size_t part, std::size_t whole)
{
    return (2ULL * 1000000ULL * part + whole) / (2ULL * whole);
}

std::string render_units(unsigned long long units)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%llu.%04llu", units / 10000, units % 10000);
    return buf;
}

} // namespace

std::string format_percent(std::size_t part, std::size_t whole)
{
    return whole == 0 ? "undefined" : render_units(percent_units(part, whole)) + " %";
}

std::string format_report(const MetricsReport& r)
{
    // The incorrect row is the complement of the rendered correct row, so
    // the two always add up to exactly 100.
    const auto correct_units = r.total == 0 ? 0ULL : percent_units(r.correct, r.total);
    const auto incorrect = r.total == 0 ? std::string("undefined") : render_units(1000000ULL - correct_units) + " %";
    const auto opt_percent = [](const std::optional<double>& v) { return v ? fixed4(*v) + " %" : "undefined"; };

    std::string out;
    out += "=== Evaluation (mode: " + std::string(to_string(r.mode)) + ", protocol: "
         + std::string(to_string(r.protocol)) + (r.contaminated ? ", resubstitution-contaminated" : "") + ") ===\n";
    out += "Correctly Classified Instances\t" + std::to_string(r.correct) + "\t" + format_percent(r.correct, r.total)
         + "\n";
    out += "Incorrectly Classified Instances\t" + std::to_string(r.incorrect()) + "\t" + incorrect + "\n";
    out += "Kappa statistic\t" + fixed4(r.kappa) + "\n";
    out += "Mean absolute error\t" + fixed4(r.mae) + "\n";
    out += "Root mean squared error\t" + fixed4(r.rmse) + "\n";
    out += "Relative absolute error\t" + opt_percent(r.rae_percent) + "\n";
    out += "Root relative squared error\t" + opt_percent(r.rrse_percent) + "\n";
    out += "Total Number of Instances\t" + std::to_string(r.total) + "\n";
    return out;
}

std::string format_multilabel(const MultiLabelReport& r)
{
    const auto opt = [](const std::optional<double>& v) { return v ? fixed4(*v) : "undefined"; };
    std::string out = "=== Multi-label summary ===\n";
    out += "Subset accuracy\t" + fixed4(r.subset_accuracy_percent) + " %\n";
    out += "Hamming loss\t" + fixed4(r.hamming_loss) + "\n";
    if (r.trigger_rate) {
        out += "Cascade trigger rate\t" + fixed4(*r.trigger_rate) + "\n";
    }
    for (const auto& pr : r.per_label) {
        out += "Label " + pr.code + "\tprecision " + opt(pr.precision) + "\trecall " + opt(pr.recall) + "\n";
    }
    return out;
}

json to_json(const MetricsReport& r)
{
    const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return json{{"mode", to_string(r.mode)},
                {"protocol", to_string(r.protocol)},
                {"resubstitution_contaminated", r.contaminated},
                {"correct", r.correct},
                {"incorrect", r.incorrect()},
                {"accuracy_percent", r.accuracy_percent()},
                {"kappa", r.kappa},
                {"mae", r.mae},
                {"rmse", r.rmse},
                {"rae_percent", opt(r.rae_percent)},
                {"rrse_percent", opt(r.rrse_percent)},
                {"total", r.total}};
}

json to_json(const MultiLabelReport& r)
{
    const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json labels = json::array();
    for (const auto& pr : r.per_label) {
        labels.push_back({{"code", pr.code}, {"precision", opt(pr.precision)}, {"recall", opt(pr.recall)}});
    }
    return json{{"subset_accuracy_percent", r.subset_accuracy_percent},
                {"hamming_loss", r.hamming_loss},
                {"trigger_rate", opt(r.trigger_rate)},
                {"per_label", std::move(labels)}};
}

json to_json(const EvaluationResult& result)
{
    json matrix = json::array();
    for (std::size_t i = 0; i < result.confusion.size(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < result.confusion.size(); ++j) {
            row.push_back(result.confusion.count(i, j));
        }
        matrix.push_back(std::move(row));
    }
    return json{{"metrics", to_json(result.metrics)},
                {"multilabel", to_json(result.multilabel)},
                {"confusion", {{"classes", result.confusion.classes()}, {"counts", std::move(matrix)}}}};
}

} // namespace chidt
