#include "chidt/ontology.hpp"

#include <algorithm>
#include <cctype>

#include "chidt/error.hpp"

namespace chidt {

using nlohmann::json;

std::string_view to_string(CodeLevel level)
{
    switch (level) {
    case CodeLevel::concept_level:
        return "concept";
    case CodeLevel::major:
        return "major";
    case CodeLevel::minor:
        return "minor";
    }
    return "?";
}

namespace {

std::optional<CodeLevel> parse_level(std::string_view text)
{
    if (text == "concept") {
        return CodeLevel::concept_level;
    }
    if (text == "major") {
        return CodeLevel::major;
    }
    if (text == "minor") {
        return CodeLevel::minor;
    }
    return std::nullopt;
}

std::optional<CodeLevel> next_level(CodeLevel level)
{
    switch (level) {
    case CodeLevel::concept_level:
        return CodeLevel::major;
    case CodeLevel::major:
        return CodeLevel::minor;
    case CodeLevel::minor:
        return std::nullopt;
    }
    return std::nullopt;
}

CodeNode parse_node(const json& j, std::optional<CodeLevel> implied)
{
    if (!j.is_object()) {
        throw ValidationError("hierarchy: node must be a JSON object");
    }
    for (const auto& [key, _] : j.items()) {
        if (key != "code" && key != "title" && key != "children" && key != "level") {
            throw ValidationError("hierarchy: unknown node key '" + key + "'");
        }
    }
    CodeNode node;
    try {
        node.code = j.at("code").get<std::string>();
        node.title = j.value("title", std::string());
        if (j.contains("level")) {
            const auto text = j.at("level").get<std::string>();
            const auto level = parse_level(text);
            if (!level) {
                throw ValidationError("hierarchy: node '" + node.code + "' has unknown level '" + text + "'");
            }
            node.level = *level;
        } else if (implied) {
            node.level = *implied;
        } else {
            throw ValidationError("hierarchy: node '" + node.code + "' is below the minor level");
        }
        if (j.contains("children")) {
            for (const auto& child : j.at("children")) {
                node.children.push_back(parse_node(child, next_level(node.level)));
            }
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("hierarchy: ") + e.what());
    }
    return node;
}

json node_to_json(const CodeNode& node)
{
    json j{{"code", node.code}, {"title", node.title}, {"level", to_string(node.level)}};
    j["children"] = json::array();
    for (const auto& child : node.children) {
        j["children"].push_back(node_to_json(child));
    }
    return j;
}

json parse_json(std::string_view content, const char* what)
{
    try {
        return json::parse(content);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string(what) + ": " + e.what());
    }
}

} // namespace

CodeHierarchy::CodeHierarchy(std::vector<CodeNode> roots, bool prefix_rule)
    : roots_(std::move(roots))
    , prefix_rule_(prefix_rule)
{
    std::vector<std::size_t> path;
    for (std::size_t i = 0; i < roots_.size(); ++i) {
        path.assign(1, i);
        index_subtree(roots_[i], nullptr, path);
    }
}

void CodeHierarchy::index_subtree(const CodeNode& node, const CodeNode* parent, std::vector<std::size_t>& path)
{
    if (node.code.empty()) {
        throw ValidationError("hierarchy: empty code");
    }
    if (parent) {
        if (next_level(parent->level) != node.level) {
            throw ValidationError("hierarchy: " + std::string(to_string(node.level)) + " '" + node.code
                                  + "' cannot be a child of " + std::string(to_string(parent->level)) + " '"
                                  + parent->code + "'");
        }
        if (prefix_rule_ && node.level == CodeLevel::minor && !node.code.starts_with(parent->code + ".")) {
            throw ValidationError("hierarchy: minor '" + node.code + "' does not start with '" + parent->code + ".'");
        }
    }
    Entry entry{path, parent ? std::optional<Code>(parent->code) : std::nullopt};
    if (!index_.emplace(node.code, std::move(entry)).second) {
        throw ValidationError("hierarchy: duplicate code '" + node.code + "'");
    }
    for (std::size_t i = 0; i < node.children.size(); ++i) {
        path.push_back(i);
        index_subtree(node.children[i], &node, path);
        path.pop_back();
    }
}

const CodeNode& CodeHierarchy::node(std::string_view code) const
{
    const auto it = index_.find(code);
    if (it == index_.end()) {
        throw ValidationError("unknown code '" + std::string(code) + "'");
    }
    const auto& path = it->second.path;
    const CodeNode* n = &roots_[path.front()];
    for (std::size_t i = 1; i < path.size(); ++i) {
        n = &n->children[path[i]];
    }
    return *n;
}

std::optional<Code> CodeHierarchy::parent(std::string_view code) const
{
    const auto it = index_.find(code);
    if (it == index_.end()) {
        throw ValidationError("unknown code '" + std::string(code) + "'");
    }
    return it->second.parent;
}

std::vector<Code> CodeHierarchy::ancestors(std::string_view code) const
{
    std::vector<Code> chain;
    for (auto p = parent(code); p; p = parent(*p)) {
        chain.push_back(*p);
    }
    return chain;
}

std::vector<Code> CodeHierarchy::codes_at(CodeLevel level) const
{
    std::vector<Code> codes;
    for (const auto& [code, entry] : index_) {
        if (node(code).level == level) {
            codes.push_back(code);
        }
    }
    return codes;
}

CodeHierarchy load_hierarchy(std::string_view content)
{
    const auto doc = parse_json(content, "hierarchy");
    bool prefix_rule = true;
    const json* roots = &doc;
    if (doc.is_object() && doc.contains("roots")) {
        for (const auto& [key, _] : doc.items()) {
            if (key != "roots" && key != "prefix_rule") {
                throw ValidationError("hierarchy: unknown key '" + key + "'");
            }
        }
        if (doc.contains("prefix_rule")) {
            if (!doc.at("prefix_rule").is_boolean()) {
                throw ValidationError("hierarchy: prefix_rule must be a boolean");
            }
            prefix_rule = doc.at("prefix_rule").get<bool>();
        }
        roots = &doc.at("roots");
    }
    std::vector<CodeNode> nodes;
    if (roots->is_array()) {
        for (const auto& r : *roots) {
            nodes.push_back(parse_node(r, CodeLevel::concept_level));
        }
    } else {
        nodes.push_back(parse_node(*roots, CodeLevel::concept_level));
    }
    return CodeHierarchy(std::move(nodes), prefix_rule);
}

json to_json(const CodeHierarchy& hierarchy)
{
    json roots = json::array();
    for (const auto& r : hierarchy.roots()) {
        roots.push_back(node_to_json(r));
    }
    return json{{"prefix_rule", hierarchy.prefix_rule()}, {"roots", std::move(roots)}};
}

// ---- registry ----------------------------------------------------------------

std::string_view to_string(Provenance provenance)
{
    return provenance == Provenance::observed ? "observed" : "declared";
}

bool ValidCombinationRegistry::add(const LabelSet& combination, Provenance provenance)
{
    if (combination.empty()) {
        throw ValidationError("registry: the empty label set is never a valid combination");
    }
    return entries_.emplace(combination, provenance).second;
}

void ValidCombinationRegistry::merge(const ValidCombinationRegistry& other)
{
    for (const auto& [combination, provenance] : other.entries_) {
        add(combination, provenance);
    }
}

std::optional<Provenance> ValidCombinationRegistry::provenance(const LabelSet& combination) const
{
    const auto it = entries_.find(combination);
    if (it == entries_.end()) {
        return std::nullopt;
    }
    return it->second;
}

ValidCombinationRegistry observed_registry(const Dataset& ds)
{
    ValidCombinationRegistry registry;
    for (const auto& r : ds.records()) {
        if (!r.labels.empty()) {
            registry.add(r.labels, Provenance::observed);
        }
    }
    return registry;
}

json to_json(const ValidCombinationRegistry& registry)
{
    json combos = json::array();
    for (const auto& [combination, provenance] : registry.entries()) {
        combos.push_back({{"codes", combination}, {"provenance", to_string(provenance)}});
    }
    return json{{"combinations", std::move(combos)}};
}

ValidCombinationRegistry registry_from_json(const json& doc)
{
    ValidCombinationRegistry registry;
    try {
        for (const auto& entry : doc.at("combinations")) {
            const auto text = entry.value("provenance", std::string("declared"));
            if (text != "observed" && text != "declared") {
                throw ValidationError("registry: unknown provenance '" + text + "'");
            }
            LabelSet codes;
            for (const auto& c : entry.at("codes")) {
                codes.insert(c.get<std::string>());
            }
            registry.add(codes, text == "observed" ? Provenance::observed : Provenance::declared);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("registry: ") + e.what());
    }
    return registry;
}

std::vector<ExclusionGroup> load_exclusions(std::string_view content, const CodeHierarchy* hierarchy)
{
    const auto doc = parse_json(content, "exclusions");
    if (!doc.is_array()) {
        throw ValidationError("exclusions: expected an array of code arrays");
    }
    std::vector<ExclusionGroup> groups;
    try {
        for (const auto& g : doc) {
            ExclusionGroup group;
            for (const auto& c : g) {
                const auto code = c.get<std::string>();
                if (hierarchy && !hierarchy->contains(code)) {
                    throw ValidationError("exclusions: code '" + code + "' is not in the hierarchy");
                }
                group.codes.insert(code);
            }
            if (group.codes.size() < 2) {
                throw ValidationError("exclusions: a group needs at least two distinct codes");
            }
            groups.push_back(std::move(group));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("exclusions: ") + e.what());
    }
    return groups;
}

json to_json(std::span<const ExclusionGroup> groups)
{
    json out = json::array();
    for (const auto& g : groups) {
        out.push_back(g.codes);
    }
    return out;
}

std::string_view to_string(ValidityReason reason)
{
    switch (reason) {
    case ValidityReason::ok:
        return "ok";
    case ValidityReason::empty:
        return "empty";
    case ValidityReason::unregistered:
        return "unregistered";
    case ValidityReason::exclusion_violated:
        return "exclusion-violated";
    }
    return "?";
}

std::optional<ValidityReason> parse_validity_reason(std::string_view text)
{
    for (const auto r : {ValidityReason::ok, ValidityReason::empty, ValidityReason::unregistered,
                         ValidityReason::exclusion_violated}) {
        if (to_string(r) == text) {
            return r;
        }
    }
    return std::nullopt;
}

Validity is_valid(const ValidCombinationRegistry& registry, std::span<const ExclusionGroup> exclusions,
                  const LabelSet& labels)
{
    if (labels.empty()) {
        return {false, ValidityReason::empty};
    }
    for (const auto& group : exclusions) {
        std::size_t hits = 0;
        for (const auto& code : group.codes) {
            hits += labels.contains(code) ? 1 : 0;
        }
        if (hits >= 2) {
            return {false, ValidityReason::exclusion_violated};
        }
    }
    if (!registry.contains(labels)) {
        return {false, ValidityReason::unregistered};
    }
    return {true, ValidityReason::ok};
}

// ---- lexicon -------------------------------------------------------------------

std::string TermLexicon::normalize(std::string_view term)
{
    std::string out;
    bool pending_space = false;
    for (const char c : term) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

void TermLexicon::add(std::string_view term, const std::set<std::string>& features)
{
    auto key = normalize(term);
    if (key.empty()) {
        throw ValidationError("lexicon: empty term");
    }
    entries_[std::move(key)].insert(features.begin(), features.end());
}

std::set<std::string> TermLexicon::targets() const
{
    std::set<std::string> all;
    for (const auto& [_, features] : entries_) {
        all.insert(features.begin(), features.end());
    }
    return all;
}

TermLexicon load_lexicon(std::string_view content)
{
    const auto doc = parse_json(content, "lexicon");
    if (!doc.is_object()) {
        throw ValidationError("lexicon: expected a JSON object of term -> [features]");
    }
    TermLexicon lexicon;
    try {
        for (const auto& [term, features] : doc.items()) {
            lexicon.add(term, features.get<std::set<std::string>>());
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("lexicon: ") + e.what());
    }
    return lexicon;
}

TermMapping map_terms(const TermLexicon& lexicon, std::span<const std::string> terms,
                      const std::vector<AttributeMeta>& schema)
{
    std::map<std::string, std::size_t> by_name;
    for (std::size_t i = 0; i < schema.size(); ++i) {
        by_name.emplace(schema[i].name, i);
    }
    for (const auto& target : lexicon.targets()) {
        const auto it = by_name.find(target);
        if (it == by_name.end()) {
            throw ValidationError("lexicon targets feature '" + target + "' absent from the schema");
        }
        if (!schema[it->second].is_binary_indicator()) {
            throw ValidationError("lexicon targets feature '" + target + "' which is not a {0,1} indicator");
        }
    }

    TermMapping mapping;
    mapping.features.resize(schema.size(), 0.0);
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (schema[i].is_binary_indicator()) {
            mapping.features[i] = static_cast<double>(*schema[i].value_index("0"));
        }
    }
    for (const auto& term : terms) {
        const auto it = lexicon.entries().find(TermLexicon::normalize(term));
        if (it == lexicon.entries().end()) {
            ++mapping.ignored;
            continue;
        }
        for (const auto& feature : it->second) {
            const auto idx = by_name.at(feature);
            mapping.features[idx] = static_cast<double>(*schema[idx].value_index("1"));
        }
    }
    return mapping;
}

} // namespace chidt
