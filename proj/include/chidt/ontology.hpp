#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "chidt/dataset.hpp"

namespace chidt {

// ---- code hierarchy ----------------------------------------------------------

// Concept > major (e.g. I21) > minor (e.g. I21.0).
enum class CodeLevel { concept_level, major, minor };

std::string_view to_string(CodeLevel level);

struct CodeNode {
    Code code;
    std::string title;
    CodeLevel level = CodeLevel::concept_level;
    std::vector<CodeNode> children;

    friend bool operator==(const CodeNode&, const CodeNode&) = default;
};

class CodeHierarchy {
public:
    // Validates on construction; throws ValidationError on duplicate codes,
    // level violations, or (with the prefix rule) a minor code that does not
    // start with "<major>.".
    CodeHierarchy(std::vector<CodeNode> roots, bool prefix_rule = true);

    const std::vector<CodeNode>& roots() const { return roots_; }
    bool prefix_rule() const { return prefix_rule_; }
    std::size_t size() const { return index_.size(); }
    bool contains(std::string_view code) const { return index_.contains(code); }

    const CodeNode& node(std::string_view code) const;
    std::optional<Code> parent(std::string_view code) const;

    // Nearest first: a minor yields {major, concept}; a concept yields {}.
    std::vector<Code> ancestors(std::string_view code) const;

    std::vector<Code> codes_at(CodeLevel level) const;

private:
    // Child positions from the root list down to the node; survives copies.
    struct Entry {
        std::vector<std::size_t> path;
        std::optional<Code> parent;
    };

    void index_subtree(const CodeNode& node, const CodeNode* parent, std::vector<std::size_t>& path);

    std::vector<CodeNode> roots_;
    bool prefix_rule_;
    std::map<Code, Entry, std::less<>> index_;
};

// Accepts {"prefix_rule": bool, "roots": [...]}, a bare node array, or one
// node. Nodes are {"code", "title", "children", optional "level"}.
CodeHierarchy load_hierarchy(std::string_view content);
nlohmann::json to_json(const CodeHierarchy& hierarchy);

// ---- validity registry -------------------------------------------------------

enum class Provenance { observed, declared };

std::string_view to_string(Provenance provenance);

// Label combinations considered possible. Never contains the empty set.
class ValidCombinationRegistry {
public:
    // Returns false if the combination was already present (its first
    // provenance is kept). Throws ValidationError for the empty set.
    bool add(const LabelSet& combination, Provenance provenance);
    void merge(const ValidCombinationRegistry& other);

    bool contains(const LabelSet& combination) const { return entries_.contains(combination); }
    std::optional<Provenance> provenance(const LabelSet& combination) const;
    std::size_t size() const { return entries_.size(); }
    const std::map<LabelSet, Provenance>& entries() const { return entries_; }

    friend bool operator==(const ValidCombinationRegistry&, const ValidCombinationRegistry&) = default;

private:
    std::map<LabelSet, Provenance> entries_;
};

// Distinct non-empty label sets of `ds`, tagged observed.
ValidCombinationRegistry observed_registry(const Dataset& ds);

nlohmann::json to_json(const ValidCombinationRegistry& registry);
ValidCombinationRegistry registry_from_json(const nlohmann::json& doc);

// Codes that may not co-occur in one prediction.
struct ExclusionGroup {
    LabelSet codes;

    friend bool operator==(const ExclusionGroup&, const ExclusionGroup&) = default;
};

// JSON array of code arrays. With a hierarchy, every code must exist in it.
std::vector<ExclusionGroup> load_exclusions(std::string_view content, const CodeHierarchy* hierarchy = nullptr);
nlohmann::json to_json(std::span<const ExclusionGroup> groups);

enum class ValidityReason { ok, empty, unregistered, exclusion_violated };

std::string_view to_string(ValidityReason reason);
std::optional<ValidityReason> parse_validity_reason(std::string_view text);

struct Validity {
    bool valid = false;
    ValidityReason reason = ValidityReason::empty;
};

// Checks in a fixed order: empty, then exclusion groups, then registry
// membership.
Validity is_valid(const ValidCombinationRegistry& registry, std::span<const ExclusionGroup> exclusions,
                  const LabelSet& labels);

// ---- term lexicon --------------------------------------------------------------

class TermLexicon {
public:
    // Lowercase, trim, collapse internal whitespace runs to one space.
    static std::string normalize(std::string_view term);

    void add(std::string_view term, const std::set<std::string>& features);
    const std::map<std::string, std::set<std::string>>& entries() const { return entries_; }
    std::set<std::string> targets() const;

private:
    std::map<std::string, std::set<std::string>> entries_;
};

// JSON object: term -> [feature names].
TermLexicon load_lexicon(std::string_view content);

struct TermMapping {
    FeatureVector features;
    std::size_t ignored = 0; // input terms with no lexicon entry
};

// Presence vector: a binary indicator feature is 1 iff some input term maps to
// it. Every lexicon target must be a {0,1} nominal attribute of `schema`.
TermMapping map_terms(const TermLexicon& lexicon, std::span<const std::string> terms,
                      const std::vector<AttributeMeta>& schema);

} // namespace chidt
