#include "cli.hpp"

#include <chrono>
#include <ctime>
#include <iostream>
#include <sstream>
#include <utility>

#include <CLI11.hpp>

#include "chidt/dataset_io.hpp"
#include "chidt/error.hpp"
#include "chidt/ontology.hpp"

namespace chidt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t RunConfig::require_seed(const char* step) const
{
    if (!seed) {
        throw ValidationError(std::string(step) + " is stochastic and needs a seed (config \"seed\" or --seed)");
    }
    return *seed;
}

namespace {

void reject_unknown(const json& doc, std::initializer_list<std::string_view> known, const std::string& where)
{
    if (!doc.is_object()) {
        throw ValidationError("config: '" + where + "' must be an object");
    }
    for (const auto& [key, _] : doc.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ValidationError("config: unknown key '" + key + "' in " + where);
        }
    }
}

fs::path resolve(const fs::path& base, const std::string& p)
{
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

json load_json_file(const fs::path& path, const char* what)
{
    const auto text = read_file(path.string());
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string(what) + " '" + path.string() + "': " + e.what());
    }
}

std::string dump(const json& j) { return j.dump(1) + "\n"; }

Dataset load_dataset(const RunConfig& cfg) { return load_csv(read_file(cfg.dataset().string()), cfg.csv); }

std::vector<ExclusionGroup> load_exclusion_groups(const RunConfig& cfg)
{
    if (!cfg.exclusions_path) {
        return {};
    }
    std::optional<CodeHierarchy> hierarchy;
    if (cfg.hierarchy_path) {
        hierarchy = load_hierarchy(read_file(cfg.hierarchy_path->string()));
    }
    return load_exclusions(read_file(cfg.exclusions_path->string()), hierarchy ? &*hierarchy : nullptr);
}

json split_to_json(const SplitSpec& split)
{
    return json{{"train_ids", split.train_ids}, {"test_ids", split.test_ids}};
}

SplitSpec split_from_json(const json& doc)
{
    try {
        return SplitSpec{doc.at("train_ids").get<std::set<std::string>>(), doc.at("test_ids").get<std::set<std::string>>()};
    } catch (const json::exception& e) {
        throw ValidationError(std::string("split: ") + e.what());
    }
}

SplitSpec make_split(const RunConfig& cfg, const Dataset& ds)
{
    if (cfg.train_size) {
        return cover_all_labels_split(ds, *cfg.train_size, cfg.require_seed("the training split"));
    }
    SplitSpec all;
    for (const auto& r : ds.records()) {
        all.train_ids.insert(r.id);
    }
    return all;
}

ChiDTModel train_model(const RunConfig& cfg, const Dataset& train)
{
    auto registry = observed_registry(train);
    if (cfg.registry_path) {
        auto declared = registry_from_json(load_json_file(*cfg.registry_path, "registry"));
        for (const auto& [combination, _] : declared.entries()) {
            registry.add(combination, Provenance::declared);
        }
    }
    return train_chidt(train, cfg.chidt, std::move(registry), load_exclusion_groups(cfg));
}

// ---- subcommands ---------------------------------------------------------------

int cmd_gen(const RunConfig& cfg, std::ostream& out)
{
    if (!cfg.generator) {
        throw ValidationError("gen: the config has no \"generator\" section");
    }
    auto gen = generator_config_from_json(*cfg.generator);
    gen.seed = cfg.require_seed("gen");
    const auto corpus = generate_synthetic(gen);

    ValidCombinationRegistry registry;
    for (const auto& p : corpus.profiles) {
        registry.add(p, Provenance::declared);
    }
    const auto dataset_file = cfg.dataset();
    const auto registry_file = cfg.registry_path.value_or(cfg.output_dir / "registry.json");
    write_file(dataset_file.string(), write_csv(corpus.dataset, cfg.csv));
    write_file(registry_file.string(), dump(to_json(registry)));
    out << "records: " << corpus.dataset.size() << "\n"
        << "labels: " << corpus.dataset.alphabet().size() << "\n"
        << "combinations: " << registry.size() << "\n"
        << "dataset: " << dataset_file.string() << "\n"
        << "registry: " << registry_file.string() << "\n";
    return ok;
}

int cmd_train(const RunConfig& cfg, std::ostream& out)
{
    const auto ds = load_dataset(cfg);
    if (cfg.hierarchy_path) {
        const auto hierarchy = load_hierarchy(read_file(cfg.hierarchy_path->string()));
        for (const auto& code : ds.alphabet()) {
            if (!hierarchy.contains(code)) {
                throw ValidationError("train: code '" + code + "' is not in the hierarchy");
            }
        }
    }
    const auto split = make_split(cfg, ds);
    const auto model = train_model(cfg, ds.subset(split.train_ids));
    write_file(cfg.split().string(), dump(split_to_json(split)));
    write_file(cfg.model().string(), dump(to_json(model)));
    out << "strategy: " << to_string(model.strategy()) << "\n"
        << "training records: " << split.train_ids.size() << " of " << ds.size() << "\n"
        << "labels: " << model.alphabet().size() << "\n"
        << "registry combinations: " << model.registry().size() << "\n"
        << "model: " << cfg.model().string() << "\n";
    return ok;
}

Dataset load_prediction_input(const RunConfig& cfg, const ChiDTModel& model, const std::string& input,
                              const std::string& terms)
{
    if (!terms.empty()) {
        if (!cfg.lexicon_path) {
            throw ValidationError("predict --terms needs paths.lexicon in the config");
        }
        const auto lexicon = load_lexicon(read_file(cfg.lexicon_path->string()));
        // One "id,terms" row per record after a header; terms joined by ';'.
        std::vector<Record> records;
        std::istringstream in(read_file(terms));
        std::string line;
        bool header = true;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (line.empty() || std::exchange(header, false)) {
                continue;
            }
            const auto comma = line.find(',');
            if (comma == std::string::npos || comma == 0) {
                throw ValidationError("terms: expected 'id,terms' in '" + line + "'");
            }
            std::vector<std::string> bag;
            std::istringstream cell(line.substr(comma + 1));
            for (std::string term; std::getline(cell, term, ';');) {
                bag.push_back(term);
            }
            records.push_back(Record{line.substr(0, comma), map_terms(lexicon, bag, model.attributes()).features, {}, {}});
        }
        return Dataset("terms", model.attributes(), cfg.csv.label_column, model.alphabet(), std::move(records));
    }
    const auto text = read_file(input.empty() ? cfg.dataset().string() : input);
    auto ds = [&] {
        std::istringstream header_line(text.substr(0, text.find('\n')));
        bool labelled = false;
        for (std::string cell; std::getline(header_line, cell, ',');) {
            labelled = labelled || cell == cfg.csv.label_column || cell == cfg.csv.label_column + "\r";
        }
        if (labelled) {
            return load_csv(text, cfg.csv);
        }
        // Unlabelled rows: append an empty label column.
        std::istringstream in(text);
        std::string line, patched;
        bool header = true;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (line.empty()) {
                continue;
            }
            patched += line + "," + (header ? cfg.csv.label_column : "") + "\n";
            header = false;
        }
        return load_csv(patched, cfg.csv);
    }();
    // Nominal domains are inferred per file; re-encode against the model's.
    std::vector<Record> records;
    const auto& schema = model.attributes();
    for (const auto& r : ds.records()) {
        Record mapped{r.id, {}, r.labels, r.roles};
        for (const auto& meta : schema) {
            const auto it = std::find_if(ds.attributes().begin(), ds.attributes().end(),
                                         [&](const AttributeMeta& a) { return a.name == meta.name; });
            if (it == ds.attributes().end()) {
                throw ValidationError("predict: input lacks attribute '" + meta.name + "'");
            }
            const double v = r.features[it->index];
            if (meta.is_nominal()) {
                const auto text_value = it->is_nominal() ? it->values[static_cast<std::size_t>(v)] : format_number(v);
                const auto idx = meta.value_index(text_value);
                if (!idx) {
                    throw ValidationError("predict: value '" + text_value + "' outside the domain of '" + meta.name
                                          + "'");
                }
                mapped.features.push_back(static_cast<double>(*idx));
            } else {
                if (it->is_nominal()) {
                    mapped.features.push_back(std::stod(it->values[static_cast<std::size_t>(v)]));
                } else {
                    mapped.features.push_back(v);
                }
            }
        }
        records.push_back(std::move(mapped));
    }
    return Dataset(ds.name(), schema, ds.label_name(), ds.alphabet(), std::move(records));
}

int cmd_predict(const RunConfig& cfg, const std::string& input, const std::string& terms, std::ostream& out)
{
    const auto model = chidt_from_json(load_json_file(cfg.model(), "model"));
    const auto ds = load_prediction_input(cfg, model, input, terms);
    std::string csv = "id,codes,triggered,reason\n";
    for (const auto& r : ds.records()) {
        const auto p = model.predict(r.features);
        csv += r.id + "," + join_labels(p.trace.final_output) + "," + (p.trace.triggered ? "true" : "false") + ","
             + std::string(to_string(p.trace.reason)) + "\n";
    }
    write_file((cfg.output_dir / "predictions.csv").string(), csv);
    out << csv;
    return ok;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out)
{
    const auto ds = load_dataset(cfg);
    std::string text;
    json report;
    if (cfg.protocol == Protocol::kfold) {
        const auto seed = cfg.require_seed("k-fold evaluation");
        const Trainer trainer = [&](const Dataset& train) { return predictor_for(train_model(cfg, train)); };
        const auto result = evaluate_kfold(ds, cfg.folds, seed, trainer, cfg.mode);
        text = format_report(result.mean) + "\n" + format_multilabel(result.mean_multilabel);
        json folds = json::array();
        for (const auto& f : result.folds) {
            folds.push_back(to_json(f));
        }
        report = json{{"metrics", to_json(result.mean)},
                      {"multilabel", to_json(result.mean_multilabel)},
                      {"folds", std::move(folds)}};
    } else {
        const auto model = chidt_from_json(load_json_file(cfg.model(), "model"), &ds.attributes());
        SplitSpec split;
        if (fs::exists(cfg.split())) {
            split = split_from_json(load_json_file(cfg.split(), "split"));
        } else {
            for (const auto& r : ds.records()) {
                split.train_ids.insert(r.id);
            }
        }
        if (split.train_ids != model.training_ids()) {
            throw ValidationError("eval: the split's training ids differ from the model's");
        }
        const auto predictor = predictor_for(model);
        const auto result = cfg.protocol == Protocol::holdout ? evaluate_holdout(predictor, ds, split, cfg.mode)
                                                              : evaluate_resubstitution(predictor, ds, split, cfg.mode);
        text = format_report(result.metrics) + "\n" + format_multilabel(result.multilabel);
        report = to_json(result);
    }
    write_file((cfg.output_dir / "report.txt").string(), text);
    write_file((cfg.output_dir / "report.json").string(), dump(report));

    // Wall-clock data stays out of the canonical report files.
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[64];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    write_file((cfg.output_dir / "eval.log").string(),
               std::string("evaluated at ") + stamp + " dataset " + cfg.dataset().string() + "\n");
    out << text;
    return ok;
}

int cmd_inspect(const RunConfig& cfg, std::ostream& out)
{
    const auto model = chidt_from_json(load_json_file(cfg.model(), "model"));
    out << "strategy: " << to_string(model.strategy()) << "\n"
        << "labels: " << join_labels({model.alphabet().begin(), model.alphabet().end()}) << "\n"
        << "training records: " << model.training_ids().size() << "\n"
        << "registry combinations: " << model.registry().size() << "\n"
        << "exclusion groups: " << model.exclusions().size() << "\n"
        << "stage 1 params: " << to_json(model.stage1().params()).dump() << "\n"
        << "stage 1 constant labels: " << join_labels(model.stage1().constant_labels()) << "\n";
    const auto render_br = [&](const BRModel& br, const char* stage) {
        for (std::size_t i = 0; i < br.codes().size(); ++i) {
            const auto& tree = br.trees()[i];
            out << "\n--- " << stage << " tree for " << br.codes()[i] << " (" << tree.root().node_count()
                << " nodes) ---\n"
                << tree.render();
        }
    };
    render_br(model.stage1(), "stage 1");
    if (const auto* br = std::get_if<BRModel>(&model.stage2())) {
        out << "\nstage 2 params: " << to_json(br->params()).dump() << "\n";
        render_br(*br, "stage 2");
    } else {
        const auto& lp = std::get<LPModel>(model.stage2());
        out << "\nstage 2 params: " << to_json(lp.params()).dump() << "\n"
            << "\n--- stage 2 label-powerset tree (" << lp.combinations().size() << " classes) ---\n"
            << lp.tree().render();
    }
    return ok;
}

int cmd_validate(const RunConfig& cfg, const std::vector<std::string>& sets, std::ostream& out)
{
    const auto path = cfg.registry_path.value_or(cfg.output_dir / "registry.json");
    const auto registry = registry_from_json(load_json_file(path, "registry"));
    const auto exclusions = load_exclusion_groups(cfg);
    for (const auto& text : sets) {
        const auto labels = split_labels(text, cfg.csv.label_separator);
        const auto v = is_valid(registry, exclusions, labels);
        out << join_labels(labels) << "\t" << (v.valid ? "valid" : "invalid") << "\t" << to_string(v.reason) << "\n";
    }
    return ok;
}

} // namespace

RunConfig config_from_json(const json& doc, const fs::path& base)
{
    reject_unknown(doc,
                   {"seed", "output_dir", "paths", "dataset", "generator", "split", "strategy", "threshold",
                    "single_label_fallback", "parallel", "stage1", "stage2", "evaluation"},
                   "config");
    RunConfig cfg;
    cfg.output_dir = base;
    try {
        if (doc.contains("seed")) {
            cfg.seed = doc.at("seed").get<std::uint64_t>();
        }
        if (doc.contains("output_dir")) {
            cfg.output_dir = resolve(base, doc.at("output_dir").get<std::string>());
        }
        if (doc.contains("paths")) {
            const auto& p = doc.at("paths");
            reject_unknown(p, {"dataset", "hierarchy", "lexicon", "exclusions", "model", "registry", "split"}, "paths");
            const auto path = [&](const char* key, std::optional<fs::path>& slot) {
                if (p.contains(key) && !p.at(key).is_null()) {
                    slot = resolve(base, p.at(key).get<std::string>());
                }
            };
            path("dataset", cfg.dataset_path);
            path("hierarchy", cfg.hierarchy_path);
            path("lexicon", cfg.lexicon_path);
            path("exclusions", cfg.exclusions_path);
            path("model", cfg.model_path);
            path("registry", cfg.registry_path);
            path("split", cfg.split_path);
        }
        if (doc.contains("dataset")) {
            const auto& d = doc.at("dataset");
            reject_unknown(d, {"label_column", "label_separator", "id_column"}, "dataset");
            cfg.csv.label_column = d.value("label_column", cfg.csv.label_column);
            cfg.csv.id_column = d.value("id_column", cfg.csv.id_column);
            if (d.contains("label_separator")) {
                const auto sep = d.at("label_separator").get<std::string>();
                if (sep.size() != 1) {
                    throw ValidationError("config: label_separator must be one character");
                }
                cfg.csv.label_separator = sep.front();
            }
        }
        if (doc.contains("generator")) {
            cfg.generator = doc.at("generator");
            generator_config_from_json(*cfg.generator);
        }
        if (doc.contains("split")) {
            const auto& s = doc.at("split");
            reject_unknown(s, {"train_size"}, "split");
            cfg.train_size = s.at("train_size").get<std::size_t>();
        }
        if (doc.contains("strategy")) {
            const auto text = doc.at("strategy").get<std::string>();
            const auto strategy = parse_strategy(text);
            if (!strategy) {
                throw ValidationError("config: unknown strategy '" + text + "'");
            }
            cfg.chidt.strategy = *strategy;
        }
        cfg.chidt.threshold = doc.value("threshold", cfg.chidt.threshold);
        cfg.chidt.single_label_fallback = doc.value("single_label_fallback", false);
        cfg.chidt.parallel = doc.value("parallel", false);
        if (doc.contains("stage1")) {
            cfg.chidt.stage1 = c45_params_from_json(doc.at("stage1"));
        }
        if (doc.contains("stage2")) {
            cfg.chidt.stage2 = c45_params_from_json(doc.at("stage2"));
        }
        if (doc.contains("evaluation")) {
            const auto& e = doc.at("evaluation");
            reject_unknown(e, {"mode", "protocol", "folds"}, "evaluation");
            if (e.contains("mode")) {
                const auto mode = parse_mode(e.at("mode").get<std::string>());
                if (!mode) {
                    throw ValidationError("config: unknown evaluation mode");
                }
                cfg.mode = *mode;
            }
            if (e.contains("protocol")) {
                const auto protocol = parse_protocol(e.at("protocol").get<std::string>());
                if (!protocol) {
                    throw ValidationError("config: unknown evaluation protocol");
                }
                cfg.protocol = *protocol;
            }
            cfg.folds = e.value("folds", cfg.folds);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    return cfg;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Cascade decision-tree diagnosis coding", "chidt"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string mode;
    std::string strategy;
    app.add_option("--config", config_path, "Run configuration (JSON)");
    app.add_option("--seed", seed, "Override the config seed");
    app.add_option("--out", out_dir, "Override the output directory");
    app.add_option("--mode", mode, "Evaluation mode")->check(CLI::IsMember({"principal", "multilabel"}));
    app.add_option("--strategy", strategy, "Stage-2 strategy")->check(CLI::IsMember({"diverse-br", "label-powerset"}));

    auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus and its profile registry")->fallthrough();
    auto* train = app.add_subcommand("train", "Train a cascade model")->fallthrough();
    auto* predict = app.add_subcommand("predict", "Predict codes for CSV rows")->fallthrough();
    auto* eval = app.add_subcommand("eval", "Evaluate and write report files")->fallthrough();
    auto* inspect = app.add_subcommand("inspect", "Print model metadata and trees")->fallthrough();
    auto* validate = app.add_subcommand("validate", "Check label sets against a registry")->fallthrough();

    std::string input;
    std::string terms;
    predict->add_option("--input", input, "CSV rows to score (default: the config dataset)");
    predict->add_option("--terms", terms, "CSV of id,terms rows mapped through the lexicon");
    std::string model_override;
    inspect->add_option("--model", model_override, "Model file");
    std::string registry_override;
    std::vector<std::string> sets;
    validate->add_option("--registry", registry_override, "Registry file");
    validate->add_option("sets", sets, "Label sets, codes joined by ';'")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? ok : validation_error;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) {
            const fs::path path(config_path);
            cfg = config_from_json(load_json_file(path, "config"), path.parent_path());
        }
        if (seed) {
            cfg.seed = seed;
        }
        if (!out_dir.empty()) {
            cfg.output_dir = out_dir;
        }
        if (!mode.empty()) {
            cfg.mode = *parse_mode(mode);
        }
        if (!strategy.empty()) {
            cfg.chidt.strategy = *parse_strategy(strategy);
        }
        if (!model_override.empty()) {
            cfg.model_path = model_override;
        }
        if (!registry_override.empty()) {
            cfg.registry_path = registry_override;
        }

        if (*gen) {
            return cmd_gen(cfg, out);
        }
        if (*train) {
            return cmd_train(cfg, out);
        }
        if (*predict) {
            return cmd_predict(cfg, input, terms, out);
        }
        if (*eval) {
            return cmd_eval(cfg, out);
        }
        if (*inspect) {
            return cmd_inspect(cfg, out);
        }
        if (*validate) {
            return cmd_validate(cfg, sets, out);
        }
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return io_error;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return validation_error;
    }
    return validation_error;
}

} // namespace chidt::cli
