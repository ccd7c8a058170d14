#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chidt/dataset.hpp"

namespace chidt {

// A complete, valid code combination together with the Bernoulli rate of
// each binary feature for records drawn from it.
struct LabelProfile {
    LabelSet labels;
    std::vector<double> rates;
    std::optional<Code> pdx;
};

struct GeneratorConfig {
    std::vector<LabelProfile> profiles;
    std::vector<std::string> feature_names; // defaults to f1..fm
    std::size_t n_records = 0;
    double noise_rate = 0.0;
    std::uint64_t seed = 0;
};

struct SyntheticCorpus {
    Dataset dataset;
    std::vector<LabelSet> profiles;
};

// Each record picks a profile uniformly, samples its binary features at the
// profile's rates, then flips every feature with probability noise_rate.
SyntheticCorpus generate_synthetic(const GeneratorConfig& config);

// Schema in docs/formats.md. `seed` may be absent when the caller supplies it.
GeneratorConfig generator_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const GeneratorConfig& config);

} // namespace chidt
