#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "abusepipe/io.hpp"
#include "abusepipe/taxonomy.hpp"

namespace abusepipe {

enum class Stage { single, l1, l2, l3 };

inline std::string_view stage_name(Stage s) {
    switch (s) {
        case Stage::single: return "single";
        case Stage::l1: return "l1";
        case Stage::l2: return "l2";
        case Stage::l3: return "l3";
    }
    return "single";
}

inline Stage stage_from_name(std::string_view s) {
    if (s == "single") return Stage::single;
    if (s == "l1") return Stage::l1;
    if (s == "l2") return Stage::l2;
    if (s == "l3") return Stage::l3;
    throw std::invalid_argument("unknown stage: " + std::string(s));
}

// Synthetic "none of these" classes injected into the chain strategies.
// Their definitions are fixed text so every prompt stays byte-deterministic.
struct SyntheticClass {
    std::string name;
    std::string definition;
};

inline SyntheticClass ttb_other_class() {
    return {"ttb_other", "The text does not match any of the other definitions."};
}

inline SyntheticClass btt_other_class() {
    return {"btt_other",
            "The text does not match any of the given definitions and may not even describe an abuse."};
}

struct PromptText {
    std::string text;
    std::vector<std::string> class_names;  // offered classes, in prompt order
    Stage stage = Stage::single;
};

struct PromptError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Renders the classification query. The template is fixed; the three macros
// are the definition list (one "name: definition" line per class, config
// order, synthetic class last), the description text verbatim, and the
// comma-separated class list. Pure function of its inputs.
inline PromptText render_query(std::string_view description_text,
                               std::span<const AbuseType* const> classes,
                               const std::optional<SyntheticClass>& synthetic,
                               Stage stage) {
    if (trim(description_text).empty()) throw PromptError("empty description");
    if (classes.empty()) throw PromptError("empty class list");

    std::string definition_list;
    std::string class_list;
    std::vector<std::string> names;
    for (const AbuseType* c : classes) {
        definition_list += c->name + ": " + c->definition + "\n";
        if (!class_list.empty()) class_list += ", ";
        class_list += c->name;
        names.push_back(c->name);
    }
    if (synthetic) {
        definition_list += synthetic->name + ": " + synthetic->definition + "\n";
        class_list += ", " + synthetic->name;
        names.push_back(synthetic->name);
    }
    if (!definition_list.empty()) definition_list.pop_back();  // no trailing newline

    std::string text;
    text += "You are a cybersecurity expert with extensive knowledge about scams and abuses. "
            "You will help me classify abuse reports given by users, based exclusively on the "
            "content of the given TEXT. Do not infer or assume facts that are not described in "
            "the TEXT.\n\n";
    text += "The following is a LIST OF DEFINITIONS of abuse classes. Read carefully the list "
            "and use it to classify the TEXT at the end, and to answer the QUESTION.\n\n";
    text += "### LIST OF DEFINITIONS ###\n";
    text += definition_list;
    text += "\n\nTEXT: ";
    text += description_text;
    text += "\n\nQUESTION: Given the LIST OF DEFINITIONS above, classify the TEXT in one of the "
            "following classes: ";
    text += class_list;
    text += ". Answer only with the name of the class that clearly matches one of these "
            "definitions and justify your answer by filling the next JSON structure: "
            "{\"answer\": \"\", \"reasoning\": \"\"}";

    return PromptText{std::move(text), std::move(names), stage};
}

struct ParsedAnswer {
    std::string answer;     // normalized class token, one of the allowed set
    std::string reasoning;  // may be empty
    std::string raw;        // original model output
};

// Parsing failures keep the raw answer around so callers can decide to
// re-ask with the identical prompt.
struct AnswerParseError : std::runtime_error {
    AnswerParseError(const std::string& what, std::string raw_answer_)
        : std::runtime_error(what), raw_answer(std::move(raw_answer_)) {}
    std::string raw_answer;
};

namespace detail {

// trim, strip matching surrounding quotes and trailing periods, lowercase.
inline std::string normalize_answer(std::string_view s) {
    std::string cur(trim(s));
    bool changed = true;
    while (changed && !cur.empty()) {
        changed = false;
        if (cur.size() >= 2 && ((cur.front() == '"' && cur.back() == '"') ||
                                (cur.front() == '\'' && cur.back() == '\''))) {
            cur = cur.substr(1, cur.size() - 2);
            changed = true;
        }
        while (!cur.empty() && cur.back() == '.') {
            cur.pop_back();
            changed = true;
        }
        std::string trimmed(trim(cur));
        if (trimmed.size() != cur.size()) {
            cur = trimmed;
            changed = true;
        }
    }
    return to_lower(cur);
}

// Finds the end of the balanced {...} starting at `start` (string-aware).
inline std::optional<std::size_t> balanced_object_end(std::string_view text, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}') {
            if (--depth == 0) return i;
        }
    }
    return std::nullopt;
}

}  // namespace detail

// Extracts the first balanced JSON object from the model output, reads the
// "answer" and "reasoning" fields, and normalizes the answer. Succeeds iff
// the normalized answer equals exactly one allowed token.
inline ParsedAnswer parse_llm_answer(std::string_view raw, std::span<const std::string> allowed) {
    if (allowed.empty()) throw std::invalid_argument("allowed class list must be non-empty");

    nlohmann::json obj;
    bool found = false;
    for (std::size_t pos = raw.find('{'); pos != std::string_view::npos;
         pos = raw.find('{', pos + 1)) {
        auto end = detail::balanced_object_end(raw, pos);
        if (!end) continue;
        auto candidate = raw.substr(pos, *end - pos + 1);
        nlohmann::json parsed = nlohmann::json::parse(candidate, nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) {
            obj = std::move(parsed);
            found = true;
            break;
        }
    }
    if (!found) throw AnswerParseError("no JSON object found in model output", std::string(raw));
    if (!obj.contains("answer") || !obj.at("answer").is_string()) {
        throw AnswerParseError("missing answer field", std::string(raw));
    }

    ParsedAnswer out;
    out.raw = std::string(raw);
    out.answer = detail::normalize_answer(obj.at("answer").get<std::string>());
    if (obj.contains("reasoning") && obj.at("reasoning").is_string()) {
        out.reasoning = obj.at("reasoning").get<std::string>();
    }
    bool ok = false;
    for (const auto& token : allowed) {
        if (out.answer == token) {
            ok = true;
            break;
        }
    }
    if (!ok) {
        throw AnswerParseError("answer not in class list: " + out.answer,
                               obj.at("answer").get<std::string>());
    }
    return out;
}

}  // namespace abusepipe
