#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace chidt {

using Code = std::string;

// A set of diagnosis codes. Ordered, duplicate-free; may be empty.
using LabelSet = std::set<Code>;

// Canonical text form of a label set: sorted codes joined by ';'.
std::string join_labels(const LabelSet& labels, char separator = ';');
LabelSet split_labels(std::string_view text, char separator = ';');

enum class AttributeKind { numeric, nominal };

struct AttributeMeta {
    std::string name;
    AttributeKind kind = AttributeKind::numeric;
    std::vector<std::string> values; // nominal domain, in declared order
    std::size_t index = 0;

    bool is_nominal() const { return kind == AttributeKind::nominal; }
    // Nominal {0,1} indicator attribute.
    bool is_binary_indicator() const;
    std::optional<std::size_t> value_index(std::string_view value) const;

    friend bool operator==(const AttributeMeta&, const AttributeMeta&) = default;
};

// One slot per attribute: a real value for numeric attributes, the value
// index (stored as an integral double) for nominal ones.
using FeatureVector = std::vector<double>;

// Role of a code on the discharge summary it was taken from.
enum class CodeRole { pdx, sdx, proc };

std::string_view to_string(CodeRole role);
std::optional<CodeRole> parse_role(std::string_view text);

struct Record {
    std::string id;
    FeatureVector features;
    LabelSet labels;
    std::map<Code, CodeRole> roles;

    // The PDx-tagged code if present, else the lowest-sorted code.
    std::optional<Code> principal_code() const;

    friend bool operator==(const Record&, const Record&) = default;
};

// Immutable once validated. Construct, then call validate() (the loaders
// and the generator do this for you).
class Dataset {
public:
    Dataset() = default;
    Dataset(std::string name, std::vector<AttributeMeta> attributes, std::string label_name,
            std::vector<Code> alphabet, std::vector<Record> records);

    const std::string& name() const { return name_; }
    const std::vector<AttributeMeta>& attributes() const { return attributes_; }
    const std::string& label_name() const { return label_name_; }
    const std::vector<Code>& alphabet() const { return alphabet_; }
    const std::vector<Record>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    const Record& record(std::string_view id) const;
    std::optional<std::size_t> find(std::string_view id) const;

    // Records whose ids are in `ids`, in this dataset's order.
    Dataset subset(const std::set<std::string>& ids) const;

    // Codes with at least one occurrence, sorted.
    std::vector<Code> present_labels() const;

    // Throws ValidationError on the first broken invariant.
    void validate() const;

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    std::string name_;
    std::vector<AttributeMeta> attributes_;
    std::string label_name_ = "labels";
    std::vector<Code> alphabet_;
    std::vector<Record> records_;
    std::map<std::string, std::size_t, std::less<>> by_id_;
};

// Checks arity and nominal domains of a vector against a schema.
void check_features(const std::vector<AttributeMeta>& attributes, const FeatureVector& x);

struct SplitSpec {
    std::set<std::string> train_ids;
    std::set<std::string> test_ids;

    // Disjoint and covering exactly the ids of `ds`.
    bool partitions(const Dataset& ds) const;

    friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

// Training side holds at least one record bearing every present label; the
// remaining slots are filled uniformly at random from the rest.
SplitSpec cover_all_labels_split(const Dataset& ds, std::size_t train_size, std::uint64_t seed);

} // namespace chidt
