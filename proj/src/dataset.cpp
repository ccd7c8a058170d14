#include "chidt/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "chidt/error.hpp"
#include "chidt/random.hpp"

namespace chidt {

std::string join_labels(const LabelSet& labels, char separator)
{
    std::string out;
    for (const auto& code : labels) {
        if (!out.empty()) {
            out += separator;
        }
        out += code;
    }
    return out;
}

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

} // namespace

LabelSet split_labels(std::string_view text, char separator)
{
    LabelSet labels;
    while (!text.empty()) {
        const auto cut = text.find(separator);
        const auto token = trim(text.substr(0, cut));
        if (!token.empty()) {
            labels.emplace(token);
        }
        if (cut == std::string_view::npos) {
            break;
        }
        text.remove_prefix(cut + 1);
    }
    return labels;
}

bool AttributeMeta::is_binary_indicator() const
{
    return is_nominal() && values.size() == 2 && value_index("0") && value_index("1");
}

std::optional<std::size_t> AttributeMeta::value_index(std::string_view value) const
{
    const auto it = std::find(values.begin(), values.end(), value);
    if (it == values.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - values.begin());
}

std::string_view to_string(CodeRole role)
{
    switch (role) {
    case CodeRole::pdx:
        return "PDx";
    case CodeRole::sdx:
        return "SDx";
    case CodeRole::proc:
        return "PROC";
    }
    return "?";
}

std::optional<CodeRole> parse_role(std::string_view text)
{
    if (text == "PDx") {
        return CodeRole::pdx;
    }
    if (text == "SDx") {
        return CodeRole::sdx;
    }
    if (text == "PROC") {
        return CodeRole::proc;
    }
    return std::nullopt;
}

std::optional<Code> Record::principal_code() const
{
    for (const auto& [code, role] : roles) {
        if (role == CodeRole::pdx) {
            return code;
        }
    }
    if (labels.empty()) {
        return std::nullopt;
    }
    return *labels.begin();
}

Dataset::Dataset(std::string name, std::vector<AttributeMeta> attributes, std::string label_name,
                 std::vector<Code> alphabet, std::vector<Record> records)
    : name_(std::move(name))
    , attributes_(std::move(attributes))
    , label_name_(std::move(label_name))
    , alphabet_(std::move(alphabet))
    , records_(std::move(records))
{
    for (std::size_t i = 0; i < attributes_.size(); ++i) {
        attributes_[i].index = i;
    }
    for (std::size_t i = 0; i < records_.size(); ++i) {
        by_id_.emplace(records_[i].id, i);
    }
}

const Record& Dataset::record(std::string_view id) const
{
    const auto pos = find(id);
    if (!pos) {
        throw ValidationError("unknown record id '" + std::string(id) + "'");
    }
    return records_[*pos];
}

std::optional<std::size_t> Dataset::find(std::string_view id) const
{
    const auto it = by_id_.find(id);
    if (it == by_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

Dataset Dataset::subset(const std::set<std::string>& ids) const
{
    std::vector<Record> picked;
    for (const auto& id : ids) {
        if (!find(id)) {
            throw ValidationError("unknown record id '" + id + "'");
        }
    }
    for (const auto& r : records_) {
        if (ids.contains(r.id)) {
            picked.push_back(r);
        }
    }
    return Dataset(name_, attributes_, label_name_, alphabet_, std::move(picked));
}

std::vector<Code> Dataset::present_labels() const
{
    LabelSet seen;
    for (const auto& r : records_) {
        seen.insert(r.labels.begin(), r.labels.end());
    }
    return {seen.begin(), seen.end()};
}

void check_features(const std::vector<AttributeMeta>& attributes, const FeatureVector& x)
{
    if (x.size() != attributes.size()) {
        throw ValidationError("feature vector has " + std::to_string(x.size()) + " values, schema has "
                              + std::to_string(attributes.size()) + " attributes");
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto& a = attributes[i];
        if (!std::isfinite(x[i])) {
            throw ValidationError("attribute '" + a.name + "' has a non-finite value");
        }
        if (a.is_nominal()) {
            const double v = x[i];
            if (v < 0 || v != std::floor(v) || v >= static_cast<double>(a.values.size())) {
                throw ValidationError("attribute '" + a.name + "': nominal index out of domain");
            }
        }
    }
}

void Dataset::validate() const
{
    std::set<std::string> names;
    for (const auto& a : attributes_) {
        if (a.name.empty()) {
            throw ValidationError("attribute with empty name");
        }
        if (!names.insert(a.name).second) {
            throw ValidationError("duplicate attribute name '" + a.name + "'");
        }
        if (a.is_nominal()) {
            if (a.values.empty()) {
                throw ValidationError("nominal attribute '" + a.name + "' has an empty domain");
            }
            const std::set<std::string> distinct(a.values.begin(), a.values.end());
            if (distinct.size() != a.values.size()) {
                throw ValidationError("nominal attribute '" + a.name + "' has duplicate values");
            }
        }
    }
    const LabelSet alphabet(alphabet_.begin(), alphabet_.end());
    if (alphabet.size() != alphabet_.size()) {
        throw ValidationError("label alphabet has duplicate codes");
    }
    if (by_id_.size() != records_.size()) {
        throw ValidationError("duplicate record ids");
    }
    for (const auto& r : records_) {
        check_features(attributes_, r.features);
        for (const auto& code : r.labels) {
            if (!alphabet.contains(code)) {
                throw ValidationError("record '" + r.id + "': code '" + code + "' outside the label alphabet");
            }
        }
        std::size_t pdx = 0;
        for (const auto& [code, role] : r.roles) {
            if (!r.labels.contains(code)) {
                throw ValidationError("record '" + r.id + "': role tag on absent code '" + code + "'");
            }
            pdx += role == CodeRole::pdx ? 1 : 0;
        }
        if (pdx > 1) {
            throw ValidationError("record '" + r.id + "': more than one PDx code");
        }
    }
}

bool SplitSpec::partitions(const Dataset& ds) const
{
    if (train_ids.size() + test_ids.size() != ds.size()) {
        return false;
    }
    for (const auto& r : ds.records()) {
        if (train_ids.contains(r.id) == test_ids.contains(r.id)) {
            return false;
        }
    }
    return true;
}

SplitSpec cover_all_labels_split(const Dataset& ds, std::size_t train_size, std::uint64_t seed)
{
    const auto labels = ds.present_labels();
    if (train_size < labels.size()) {
        throw ValidationError("train size " + std::to_string(train_size) + " cannot cover "
                              + std::to_string(labels.size()) + " distinct labels");
    }
    if (train_size > ds.size()) {
        throw ValidationError("train size exceeds the record count");
    }

    Rng rng(seed);
    std::vector<bool> taken(ds.size(), false);
    std::size_t n_taken = 0;
    // Rarest labels first, so a record picked for a rare label also has the
    // best chance of covering common ones.
    std::vector<std::pair<std::size_t, Code>> by_support;
    for (const auto& code : labels) {
        std::size_t support = 0;
        for (const auto& r : ds.records()) {
            support += r.labels.contains(code) ? 1 : 0;
        }
        by_support.emplace_back(support, code);
    }
    std::sort(by_support.begin(), by_support.end());

    for (const auto& [support, code] : by_support) {
        std::vector<std::size_t> bearers;
        bool covered = false;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            if (ds.records()[i].labels.contains(code)) {
                covered = covered || taken[i];
                bearers.push_back(i);
            }
        }
        if (covered) {
            continue;
        }
        const auto pick = bearers[rng.index(bearers.size())];
        taken[pick] = true;
        ++n_taken;
    }

    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (!taken[i]) {
            rest.push_back(i);
        }
    }
    rng.shuffle(rest);
    for (std::size_t i = 0; n_taken < train_size; ++i, ++n_taken) {
        taken[rest[i]] = true;
    }

    SplitSpec split;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        (taken[i] ? split.train_ids : split.test_ids).insert(ds.records()[i].id);
    }
    return split;
}

} // namespace chidt
