#include "chidt/generator.hpp"

#include <set>

#include "chidt/error.hpp"
#include "chidt/random.hpp"

namespace chidt {

namespace {

void check_config(const GeneratorConfig& config)
{
    if (config.profiles.empty()) {
        throw ValidationError("generator: profile list is empty");
    }
    if (config.n_records == 0) {
        throw ValidationError("generator: n_records must be at least 1");
    }
    if (!(config.noise_rate >= 0.0 && config.noise_rate <= 1.0)) {
        throw ValidationError("generator: noise_rate outside [0,1]");
    }
    const auto n_features = config.profiles.front().rates.size();
    if (!config.feature_names.empty() && config.feature_names.size() != n_features) {
        throw ValidationError("generator: feature_names size differs from the rate vectors");
    }
    for (std::size_t p = 0; p < config.profiles.size(); ++p) {
        const auto& profile = config.profiles[p];
        const auto where = "generator: profile " + std::to_string(p + 1);
        if (profile.labels.empty()) {
            throw ValidationError(where + " has an empty label set");
        }
        if (profile.rates.size() != n_features) {
            throw ValidationError(where + " has " + std::to_string(profile.rates.size()) + " rates, expected "
                                  + std::to_string(n_features));
        }
        for (const double r : profile.rates) {
            if (!(r >= 0.0 && r <= 1.0)) {
                throw ValidationError(where + " has a rate outside [0,1]");
            }
        }
        if (profile.pdx && !profile.labels.contains(*profile.pdx)) {
            throw ValidationError(where + ": pdx code is not among its labels");
        }
    }
}

} // namespace

SyntheticCorpus generate_synthetic(const GeneratorConfig& config)
{
    check_config(config);
    const auto n_features = config.profiles.front().rates.size();

    std::vector<AttributeMeta> attributes;
    for (std::size_t f = 0; f < n_features; ++f) {
        AttributeMeta meta;
        meta.name = config.feature_names.empty() ? "f" + std::to_string(f + 1) : config.feature_names[f];
        meta.kind = AttributeKind::nominal;
        meta.values = {"0", "1"};
        meta.index = f;
        attributes.push_back(std::move(meta));
    }

    LabelSet alphabet;
    for (const auto& p : config.profiles) {
        alphabet.insert(p.labels.begin(), p.labels.end());
    }

    const auto width = std::to_string(config.n_records).size();
    Rng rng(config.seed);
    std::vector<Record> records;
    records.reserve(config.n_records);
    for (std::size_t i = 0; i < config.n_records; ++i) {
        const auto& profile = config.profiles[rng.index(config.profiles.size())];
        Record record;
        auto number = std::to_string(i + 1);
        record.id = "s" + std::string(width - number.size(), '0') + number;
        record.features.reserve(n_features);
        for (std::size_t f = 0; f < n_features; ++f) {
            bool bit = rng.bernoulli(profile.rates[f]);
            if (rng.bernoulli(config.noise_rate)) {
                bit = !bit;
            }
            record.features.push_back(bit ? 1.0 : 0.0);
        }
        record.labels = profile.labels;
        if (profile.pdx) {
            record.roles.emplace(*profile.pdx, CodeRole::pdx);
        }
        records.push_back(std::move(record));
    }

    SyntheticCorpus corpus{
        Dataset("synthetic", std::move(attributes), "labels", {alphabet.begin(), alphabet.end()}, std::move(records)),
        {}};
    corpus.dataset.validate();
    for (const auto& p : config.profiles) {
        corpus.profiles.push_back(p.labels);
    }
    return corpus;
}

GeneratorConfig generator_config_from_json(const nlohmann::json& doc)
{
    static const std::set<std::string> known{"profiles", "feature_names", "n_records", "noise_rate", "seed"};
    if (!doc.is_object()) {
        throw ValidationError("generator config must be a JSON object");
    }
    for (const auto& [key, _] : doc.items()) {
        if (!known.contains(key)) {
            throw ValidationError("generator config: unknown key '" + key + "'");
        }
    }
    try {
        GeneratorConfig config;
        for (const auto& p : doc.at("profiles")) {
            LabelProfile profile;
            for (const auto& code : p.at("labels")) {
                profile.labels.insert(code.get<std::string>());
            }
            profile.rates = p.at("rates").get<std::vector<double>>();
            if (p.contains("pdx")) {
                profile.pdx = p.at("pdx").get<std::string>();
            }
            config.profiles.push_back(std::move(profile));
        }
        if (doc.contains("feature_names")) {
            config.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
        }
        const auto n = doc.at("n_records").get<std::int64_t>();
        if (n < 0) {
            throw ValidationError("generator: n_records must be non-negative");
        }
        config.n_records = static_cast<std::size_t>(n);
        config.noise_rate = doc.value("noise_rate", 0.0);
        config.seed = doc.value("seed", std::uint64_t{0});
        return config;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("generator config: ") + e.what());
    }
}

nlohmann::json to_json(const GeneratorConfig& config)
{
    nlohmann::json doc;
    doc["n_records"] = config.n_records;
    doc["noise_rate"] = config.noise_rate;
    doc["seed"] = config.seed;
    if (!config.feature_names.empty()) {
        doc["feature_names"] = config.feature_names;
    }
    doc["profiles"] = nlohmann::json::array();
    for (const auto& p : config.profiles) {
        nlohmann::json entry{{"labels", p.labels}, {"rates", p.rates}};
        if (p.pdx) {
            entry["pdx"] = *p.pdx;
        }
        doc["profiles"].push_back(std::move(entry));
    }
    return doc;
}

} // namespace chidt
