#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "chidt/dataset_io.hpp"
#include "cli.hpp"
#include "support.hpp"

using namespace chidt;
using namespace chidt::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("chidt-test-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// The shipped config with its relative paths anchored at the source tree.
json protocol_config()
{
    auto cfg = json::parse(read_file(source_path("configs/chd_protocol.json")));
    for (auto& [key, value] : cfg["paths"].items()) {
        value = (fs::path(source_path("configs")) / value.get<std::string>()).lexically_normal().string();
    }
    return cfg;
}

std::string write_config(const fs::path& dir, const json& cfg)
{
    const auto path = dir / "config.json";
    write_file(path.string(), cfg.dump(1));
    return path.string();
}

// Single-label variant of the protocol corpus.
json single_label_config()
{
    auto cfg = protocol_config();
    auto& profiles = cfg["generator"]["profiles"];
    for (auto& p : profiles) {
        p["labels"] = json::array({p["pdx"]});
    }
    cfg["strategy"] = "label-powerset";
    return cfg;
}

} // namespace

TEST_CASE("gen writes the corpus and its registry")
{
    const auto dir = scratch("gen");
    const auto config = write_config(dir, protocol_config());
    const auto r = run({"--config", config, "--out", dir.string(), "gen"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("records: 196\n") != std::string::npos);
    CHECK(r.out.find("labels: 11\n") != std::string::npos);
    CHECK(r.out.find("combinations: 8\n") != std::string::npos);
    const auto ds = load_csv(read_file((dir / "dataset.csv").string()));
    CHECK(ds.size() == 196);
    CHECK(ds.alphabet().size() == 11);
    const auto reg = registry_from_json(json::parse(read_file((dir / "registry.json").string())));
    CHECK(reg.size() == 8);
    CHECK(reg.provenance({"I20.9"}) == Provenance::declared);

    const auto first = read_file((dir / "dataset.csv").string());
    REQUIRE(run({"--config", config, "--out", dir.string(), "gen"}).code == 0);
    CHECK(read_file((dir / "dataset.csv").string()) == first);
    REQUIRE(run({"--config", config, "--out", dir.string(), "--seed", "99", "gen"}).code == 0);
    CHECK(read_file((dir / "dataset.csv").string()) != first);
}

TEST_CASE("configuration errors map to exit code 1")
{
    const auto dir = scratch("config-errors");
    SUBCASE("missing seed")
    {
        auto cfg = protocol_config();
        cfg.erase("seed");
        const auto r = run({"--config", write_config(dir, cfg), "--out", dir.string(), "gen"});
        CHECK(r.code == 1);
        CHECK(r.err.find("seed") != std::string::npos);
    }
    SUBCASE("zero records")
    {
        auto cfg = protocol_config();
        cfg["generator"]["n_records"] = 0;
        CHECK(run({"--config", write_config(dir, cfg), "--out", dir.string(), "gen"}).code == 1);
    }
    SUBCASE("unknown keys")
    {
        auto cfg = protocol_config();
        cfg["sede"] = 3;
        CHECK(run({"--config", write_config(dir, cfg), "gen"}).code == 1);
        cfg = protocol_config();
        cfg["evaluation"]["fold"] = 3;
        CHECK(run({"--config", write_config(dir, cfg), "gen"}).code == 1);
        cfg = protocol_config();
        cfg["stage1"]["prune"] = false;
        CHECK(run({"--config", write_config(dir, cfg), "gen"}).code == 1);
    }
    SUBCASE("malformed json")
    {
        write_file((dir / "bad.json").string(), "{ \"seed\": ");
        CHECK(run({"--config", (dir / "bad.json").string(), "gen"}).code == 1);
    }
    SUBCASE("bad flags")
    {
        CHECK(run({"--mode", "fuzzy", "gen"}).code == 1);
        CHECK(run({"--strategy", "chain", "gen"}).code == 1);
        CHECK(run({}).code == 1);
    }
    SUBCASE("help")
    {
        const auto r = run({"--help"});
        CHECK(r.code == 0);
        CHECK(r.out.find("validate") != std::string::npos);
    }
}

TEST_CASE("i/o errors map to exit code 2")
{
    const auto dir = scratch("io-errors");
    CHECK(run({"--config", (dir / "missing.json").string(), "gen"}).code == 2);
    CHECK(run({"--out", dir.string(), "train"}).code == 2);
    CHECK(run({"--out", dir.string(), "inspect"}).code == 2);
    const auto config = write_config(dir, protocol_config());
    write_file((dir / "blocker").string(), "");
    CHECK(run({"--config", config, "--out", (dir / "blocker" / "sub").string(), "gen"}).code == 2);
}

TEST_CASE("train, eval, predict and inspect")
{
    const auto dir = scratch("pipeline");
    auto cfg = protocol_config();
    cfg["output_dir"] = dir.string();
    const auto config = write_config(dir, cfg);
    REQUIRE(run({"--config", config, "gen"}).code == 0);

    const auto trained = run({"--config", config, "train"});
    REQUIRE(trained.code == 0);
    CHECK(trained.out.find("training records: 53 of 196") != std::string::npos);
    const auto split = json::parse(read_file((dir / "split.json").string()));
    CHECK(split.at("train_ids").size() == 53);
    CHECK(split.at("test_ids").size() == 143);

    SUBCASE("resubstitution report")
    {
        const auto r = run({"--config", config, "eval"});
        REQUIRE(r.code == 0);
        const auto report = read_file((dir / "report.txt").string());
        CHECK(report.find("Total Number of Instances\t196\n") != std::string::npos);
        CHECK(report.find("resubstitution-contaminated") != std::string::npos);
        CHECK(report.find("Cascade trigger rate") != std::string::npos);
        const auto doc = json::parse(read_file((dir / "report.json").string()));
        CHECK(doc.at("metrics").at("total") == 196);
        CHECK(report.find("evaluated at") == std::string::npos);
        CHECK(read_file((dir / "eval.log").string()).find("evaluated at") != std::string::npos);
    }
    SUBCASE("holdout report")
    {
        auto holdout = cfg;
        holdout["evaluation"]["protocol"] = "holdout";
        const auto path = write_config(dir, holdout);
        REQUIRE(run({"--config", path, "eval"}).code == 0);
        CHECK(read_file((dir / "report.txt").string()).find("Total Number of Instances\t143\n") != std::string::npos);
    }
    SUBCASE("k-fold report")
    {
        auto kfold = cfg;
        kfold["evaluation"] = {{"protocol", "kfold"}, {"folds", 4}, {"mode", "principal"}};
        const auto path = write_config(dir, kfold);
        REQUIRE(run({"--config", path, "eval"}).code == 0);
        const auto doc = json::parse(read_file((dir / "report.json").string()));
        CHECK(doc.at("folds").size() == 4);
        CHECK(doc.at("metrics").at("protocol") == "kfold");
    }
    SUBCASE("model trained on another split is refused")
    {
        auto other = json::parse(read_file((dir / "split.json").string()));
        std::swap(other["train_ids"], other["test_ids"]);
        write_file((dir / "split.json").string(), other.dump());
        CHECK(run({"--config", config, "eval"}).code == 1);
    }
    SUBCASE("predictions with traces")
    {
        const auto r = run({"--config", config, "predict"});
        REQUIRE(r.code == 0);
        std::istringstream lines(r.out);
        std::string line;
        std::getline(lines, line);
        CHECK(line == "id,codes,triggered,reason");
        const auto reg = registry_from_json(
            json::parse(read_file((dir / "model.json").string())).at("registry"));
        std::size_t rows = 0, untriggered = 0;
        while (std::getline(lines, line)) {
            ++rows;
            const auto a = line.find(',');
            const auto b = line.find(',', a + 1);
            const auto c = line.find(',', b + 1);
            const auto codes = split_labels(line.substr(a + 1, b - a - 1));
            const auto triggered = line.substr(b + 1, c - b - 1);
            const auto reason = line.substr(c + 1);
            CHECK((triggered == "true" || triggered == "false"));
            if (triggered == "false") {
                ++untriggered;
                CHECK(reason == "ok");
                CHECK(reg.contains(codes));
            } else {
                CHECK(reason != "ok");
            }
        }
        CHECK(rows == 196);
        CHECK(untriggered > 0);
        CHECK(read_file((dir / "predictions.csv").string()) == r.out);
    }
    SUBCASE("predictions from unlabelled rows and from terms")
    {
        write_file((dir / "rows.csv").string(),
                   "id,chest_pain_at_rest,exertional_angina,st_elevation_anterior,st_elevation_inferior,troponin_rise,"
                   "non_st_elevation,unspecified_acute_event,coronary_stenosis,q_waves,reduced_ejection_fraction,"
                   "chronic_ischaemia,diabetes,hypertension,smoker,dyslipidaemia,prior_pci\n"
                   "x1,1,0,0,0,0,0,0,1,0,0,0,1,0,1,0,0\n");
        const auto rows = run({"--config", config, "predict", "--input", (dir / "rows.csv").string()});
        REQUIRE(rows.code == 0);
        CHECK(rows.out.find("\nx1,") != std::string::npos);

        write_file((dir / "terms.csv").string(), "id,terms\np1,Unstable  angina;coronary stenosis;fever\n");
        const auto terms = run({"--config", config, "predict", "--terms", (dir / "terms.csv").string()});
        REQUIRE(terms.code == 0);
        CHECK(terms.out.find("\np1,") != std::string::npos);

        write_file((dir / "short.csv").string(), "id,chest_pain_at_rest\nx1,1\n");
        CHECK(run({"--config", config, "predict", "--input", (dir / "short.csv").string()}).code == 1);
    }
    SUBCASE("inspect")
    {
        const auto r = run({"--config", config, "inspect"});
        REQUIRE(r.code == 0);
        CHECK(r.out.find("strategy: diverse-br") != std::string::npos);
        CHECK(r.out.find("stage 1 tree for I21.0") != std::string::npos);
        CHECK(r.out.find("stage 2 tree for I25.9") != std::string::npos);
        CHECK(r.out.find(" = ") != std::string::npos);
    }
    SUBCASE("label-powerset strategy from the flag")
    {
        REQUIRE(run({"--config", config, "--strategy", "label-powerset", "train"}).code == 0);
        const auto r = run({"--config", config, "inspect"});
        CHECK(r.out.find("strategy: label-powerset") != std::string::npos);
        CHECK(r.out.find("label-powerset tree") != std::string::npos);
    }
}

TEST_CASE("validate reports per-set verdicts")
{
    const auto dir = scratch("validate");
    const auto config = write_config(dir, protocol_config());
    REQUIRE(run({"--config", config, "--out", dir.string(), "gen"}).code == 0);
    const auto r = run({"--config", config, "--out", dir.string(), "validate", "I21.0;I25.1", "I21.0;I21.1", ""});
    REQUIRE(r.code == 0);
    CHECK(r.out == "I21.0;I25.1\tvalid\tok\nI21.0;I21.1\tinvalid\tunregistered\n\tinvalid\tempty\n");

    auto with_excl = protocol_config();
    with_excl["paths"]["exclusions"] = source_path("data/chd_exclusions.json");
    with_excl["paths"]["hierarchy"] = source_path("data/icd10_chd_hierarchy.json");
    with_excl["paths"]["registry"] = (dir / "registry.json").string();
    const auto path = write_config(dir, with_excl);
    const auto x = run({"--config", path, "validate", "I21.0;I21.1"});
    CHECK(x.out == "I21.0;I21.1\tinvalid\texclusion-violated\n");
    CHECK(run({"--config", path, "--out", dir.string(), "validate", "--registry", (dir / "nope.json").string(), "a"})
              .code
          == 2);
}

TEST_CASE("principal and multilabel modes agree on single-label data")
{
    const auto dir = scratch("modes");
    const auto config = write_config(dir, single_label_config());
    REQUIRE(run({"--config", config, "--out", dir.string(), "gen"}).code == 0);
    REQUIRE(run({"--config", config, "--out", dir.string(), "train"}).code == 0);
    REQUIRE(run({"--config", config, "--out", dir.string(), "--mode", "principal", "eval"}).code == 0);
    const auto principal = json::parse(read_file((dir / "report.json").string()));
    REQUIRE(run({"--config", config, "--out", dir.string(), "--mode", "multilabel", "eval"}).code == 0);
    const auto multilabel = json::parse(read_file((dir / "report.json").string()));
    CHECK(principal.at("metrics").at("mode") == "principal");
    CHECK(principal.at("metrics").at("correct") == multilabel.at("metrics").at("correct"));
    CHECK(principal.at("metrics").at("correct") != 0);
}

TEST_CASE("config paths resolve against the config file")
{
    auto cfg = json::parse(read_file(source_path("configs/chd_protocol.json")));
    cfg["paths"]["dataset"] = "corpus/d.csv";
    const auto parsed = cli::config_from_json(cfg, "/base/dir");
    CHECK(parsed.dataset() == fs::path("/base/dir/corpus/d.csv"));
    CHECK(parsed.hierarchy_path == fs::path("/base/dir/../data/icd10_chd_hierarchy.json"));
    CHECK(parsed.seed == 7);
    CHECK(parsed.train_size == 53);
    CHECK(parsed.chidt.strategy == Stage2Strategy::diverse_br);
    CHECK(parsed.model() == fs::path("/base/dir/../out/protocol/model.json"));
}
