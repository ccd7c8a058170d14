#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chidt/c45.hpp"
#include "chidt/dataset_io.hpp"
#include "chidt/evaluation.hpp"
#include "chidt/generator.hpp"
#include "chidt/multilabel.hpp"

namespace chidt::cli {

enum ExitCode : int { ok = 0, validation_error = 1, io_error = 2 };

struct RunConfig {
    std::optional<std::uint64_t> seed;
    std::filesystem::path output_dir = ".";

    std::optional<std::filesystem::path> dataset_path;
    std::optional<std::filesystem::path> hierarchy_path;
    std::optional<std::filesystem::path> lexicon_path;
    std::optional<std::filesystem::path> exclusions_path;
    std::optional<std::filesystem::path> model_path;
    std::optional<std::filesystem::path> registry_path;
    std::optional<std::filesystem::path> split_path;

    CsvOptions csv;
    std::optional<nlohmann::json> generator;
    std::optional<std::size_t> train_size;

    ChiDTOptions chidt;
    EvalMode mode = EvalMode::multilabel;
    Protocol protocol = Protocol::resubstitution;
    std::size_t folds = 10;

    std::filesystem::path dataset() const { return dataset_path.value_or(output_dir / "dataset.csv"); }
    std::filesystem::path model() const { return model_path.value_or(output_dir / "model.json"); }
    std::filesystem::path split() const { return split_path.value_or(output_dir / "split.json"); }
    std::uint64_t require_seed(const char* step) const;
};

// Relative paths inside the document resolve against `base`. Unknown keys
// are rejected.
RunConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base);

// Entry point shared by the executable and the tests. `args` excludes the
// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace chidt::cli
