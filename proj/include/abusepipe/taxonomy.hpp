#pragma once

#include <cctype>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "abusepipe/io.hpp"

namespace abusepipe {

// A node of the abuse taxonomy. `level` is derived from the parent chain
// (level 1 types hang off the implicit ROOT). The definition text is kept
// verbatim, punctuation included, because it is substituted byte-for-byte
// into classification prompts.
struct AbuseType {
    std::string name;
    int level = 0;
    std::string parent;  // kRootName for level-1 types
    std::string definition;
};

inline constexpr std::string_view kRootName = "ROOT";

struct TaxonomyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Structural checks over a set of typed nodes. Returns every violation
// found instead of stopping at the first one.
inline std::vector<std::string> validate_taxonomy(std::span<const AbuseType> types) {
    std::vector<std::string> violations;
    std::unordered_map<std::string_view, const AbuseType*> by_name;
    for (const AbuseType& t : types) {
        if (t.name.empty()) {
            violations.push_back("empty type name");
            continue;
        }
        bool bad_token = false;
        for (unsigned char c : t.name) {
            if (std::isspace(c) || std::isupper(c)) bad_token = true;
        }
        if (bad_token) violations.push_back("name not a lowercase token: " + t.name);
        if (!by_name.emplace(t.name, &t).second) violations.push_back("duplicate name: " + t.name);
        if (t.definition.empty()) violations.push_back("empty definition: " + t.name);
    }
    for (const AbuseType& t : types) {
        if (t.name.empty()) continue;
        if (t.parent == kRootName) {
            if (t.level != 1) violations.push_back("level gap: " + t.name + " under ROOT must be level 1");
            continue;
        }
        auto it = by_name.find(t.parent);
        if (it == by_name.end()) {
            violations.push_back("orphan: " + t.name + " has unknown parent " + t.parent);
            continue;
        }
        if (t.level != it->second->level + 1) {
            violations.push_back("level gap: " + t.name + " (level " + std::to_string(t.level) +
                                 ") under " + t.parent + " (level " + std::to_string(it->second->level) + ")");
        }
        if (t.level < 1 || t.level > 3) {
            violations.push_back("level out of range: " + t.name);
        }
    }
    // Cycle / reachability: follow parent chains to ROOT.
    for (const AbuseType& t : types) {
        if (t.name.empty()) continue;
        std::unordered_map<std::string_view, bool> seen;
        std::string_view cur = t.name;
        bool reached_root = false;
        while (true) {
            if (seen.count(cur)) {
                violations.push_back("cycle involving: " + t.name);
                break;
            }
            seen[cur] = true;
            auto it = by_name.find(cur);
            if (it == by_name.end()) break;  // orphan, already reported
            if (it->second->parent == kRootName) {
                reached_root = true;
                break;
            }
            cur = it->second->parent;
        }
        (void)reached_root;
    }
    return violations;
}

// The abuse taxonomy: a tree of AbuseType nodes under an implicit ROOT that
// is never a classification output. Config order is preserved; it defines
// the order of classes in prompts and in every classes_at listing.
// Immutable after construction, safe to share across threads.
class Taxonomy {
public:
    Taxonomy() = default;

    // Builds and validates. Levels are derived from the parent chain; an
    // unresolvable chain (cycle/orphan) yields a validation failure.
    static Taxonomy from_entries(std::vector<AbuseType> entries) {
        derive_levels(entries);
        auto violations = validate_taxonomy(entries);
        if (!violations.empty()) {
            std::string msg = "invalid taxonomy:";
            for (const auto& v : violations) msg += "\n  - " + v;
            throw TaxonomyError(msg);
        }
        Taxonomy t;
        t.types_ = std::move(entries);
        for (std::size_t i = 0; i < t.types_.size(); ++i) t.index_[t.types_[i].name] = i;
        return t;
    }

    const std::vector<AbuseType>& types() const { return types_; }
    std::size_t size() const { return types_.size(); }
    bool contains(std::string_view name) const { return index_.count(std::string(name)) > 0; }

    const AbuseType& at(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) throw TaxonomyError("unknown abuse type: " + std::string(name));
        return types_[it->second];
    }

    int max_level() const {
        int m = 0;
        for (const auto& t : types_) m = std::max(m, t.level);
        return m;
    }

    // Types at a level, in config order.
    std::vector<const AbuseType*> at_level(int level) const {
        std::vector<const AbuseType*> out;
        for (const auto& t : types_)
            if (t.level == level) out.push_back(&t);
        return out;
    }

    // Direct children of a type, in config order. Leaf types yield an
    // empty list; unknown names throw.
    std::vector<const AbuseType*> children_of(std::string_view name) const {
        at(name);  // existence check
        std::vector<const AbuseType*> out;
        for (const auto& t : types_)
            if (t.parent == name) out.push_back(&t);
        return out;
    }

    // True iff `ancestor` lies strictly above `descendant` on its parent chain.
    bool is_ancestor(std::string_view ancestor, std::string_view descendant) const {
        at(ancestor);
        const AbuseType* cur = &at(descendant);
        while (cur->parent != kRootName) {
            if (cur->parent == ancestor) return true;
            cur = &at(cur->parent);
        }
        return false;
    }

private:
    static void derive_levels(std::vector<AbuseType>& entries) {
        std::unordered_map<std::string_view, AbuseType*> by_name;
        for (auto& e : entries) by_name.emplace(e.name, &e);
        for (auto& e : entries) {
            // Walk up to ROOT counting hops; cap the walk so cycles terminate
            // and fall through to validation.
            int depth = 0;
            std::string_view cur = e.name;
            bool ok = false;
            for (std::size_t hops = 0; hops <= entries.size(); ++hops) {
                auto it = by_name.find(cur);
                if (it == by_name.end()) break;
                ++depth;
                if (it->second->parent == kRootName) {
                    ok = true;
                    break;
                }
                cur = it->second->parent;
            }
            e.level = ok ? depth : 0;
        }
    }

    std::vector<AbuseType> types_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Config file format: a JSON array of {name, parent, definition} in
// meaningful order. Level is derived, never stored; ROOT is implicit.
inline Taxonomy taxonomy_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw TaxonomyError(std::string("taxonomy config parse failure: ") + e.what());
    }
    if (!doc.is_array()) throw TaxonomyError("taxonomy config must be a JSON array of entries");
    std::vector<AbuseType> entries;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("name") || !item.contains("parent") ||
            !item.contains("definition")) {
            throw TaxonomyError("taxonomy entry must have name, parent, definition");
        }
        AbuseType t;
        t.name = item.at("name").get<std::string>();
        t.parent = item.at("parent").get<std::string>();
        t.definition = item.at("definition").get<std::string>();
        entries.push_back(std::move(t));
    }
    return Taxonomy::from_entries(std::move(entries));
}

inline Taxonomy load_taxonomy(const std::string& path) {
    return taxonomy_from_json(read_file(path));
}

inline std::string taxonomy_to_json(const Taxonomy& t) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& type : t.types()) {
        arr.push_back(nlohmann::ordered_json{
            {"name", type.name}, {"parent", type.parent}, {"definition", type.definition}});
    }
    return arr.dump(2) + "\n";
}

}  // namespace abusepipe
