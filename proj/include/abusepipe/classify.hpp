#pragma once

#include <atomic>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"

#include "abusepipe/gateway.hpp"
#include "abusepipe/ingest.hpp"
#include "abusepipe/prompt.hpp"
#include "abusepipe/taxonomy.hpp"

namespace abusepipe {

enum class Strategy { one_query, top_to_bottom, bottom_to_top };

inline std::string_view strategy_name(Strategy s) {
    switch (s) {
        case Strategy::one_query: return "one_query";
        case Strategy::top_to_bottom: return "top_to_bottom";
        case Strategy::bottom_to_top: return "bottom_to_top";
    }
    return "one_query";
}

inline Strategy strategy_from_name(std::string_view s) {
    if (s == "one_query") return Strategy::one_query;
    if (s == "top_to_bottom") return Strategy::top_to_bottom;
    if (s == "bottom_to_top") return Strategy::bottom_to_top;
    throw std::invalid_argument("unknown strategy: " + std::string(s));
}

struct TraceEntry {
    Stage stage = Stage::single;
    std::string prompt_sha256;
    std::string raw_answer;
    std::string parsed_answer;  // empty when the final attempt failed to parse
    std::string reasoning;
    Usage usage;
};

// Final label plus the per-stage record of what was asked and answered.
// The trace holds the final attempt of each stage; usage billed on retried
// or failed attempts is kept separately so cost accounting stays exact.
struct ClassificationOutcome {
    enum class Status { ok, unclassified };

    std::string description_sha256;
    Strategy strategy = Strategy::one_query;
    std::string model_id;
    Status status = Status::unclassified;
    std::string label;  // valid taxonomy type, never ROOT; empty unless ok
    int attempts = 0;   // completions issued, parse retries included
    std::vector<TraceEntry> trace;
    std::vector<Usage> retry_usages;
    std::string error;  // reason when unclassified
};

struct ClassifyConfig {
    int parse_retries = 2;  // re-asks with the identical prompt, so 3 attempts total
    int max_output_tokens = 1024;
    double temperature = 0.0;
};

namespace detail {

// Runs one chain stage: renders the prompt, asks, parses, and re-asks with
// the identical prompt on malformed answers. Returns the accepted answer
// token, or nullopt after marking the outcome unclassified.
inline std::optional<std::string> run_stage(const Description& desc,
                                            std::span<const AbuseType* const> classes,
                                            const std::optional<SyntheticClass>& synthetic,
                                            Stage stage, Gateway& gw, const ClassifyConfig& cfg,
                                            ClassificationOutcome& out) {
    PromptText prompt;
    try {
        prompt = render_query(desc.text, classes, synthetic, stage);
    } catch (const PromptError& e) {
        out.status = ClassificationOutcome::Status::unclassified;
        out.error = e.what();
        return std::nullopt;
    }
    CompletionRequest req{out.model_id, prompt, cfg.max_output_tokens, cfg.temperature};
    const std::string prompt_digest = sha256_hex(prompt.text);

    for (int attempt = 0; attempt <= cfg.parse_retries; ++attempt) {
        CompletionResult res;
        try {
            res = gw.complete(req);
        } catch (const TransportError& e) {
            for (const Usage& u : e.billed_attempts) out.retry_usages.push_back(u);
            out.status = ClassificationOutcome::Status::unclassified;
            out.error = e.what();
            return std::nullopt;
        } catch (const GatewayError& e) {
            out.status = ClassificationOutcome::Status::unclassified;
            out.error = e.what();
            return std::nullopt;
        }
        ++out.attempts;
        for (const Usage& u : res.billed_failures) out.retry_usages.push_back(u);

        try {
            ParsedAnswer parsed = parse_llm_answer(res.raw_text, prompt.class_names);
            out.trace.push_back(TraceEntry{stage, prompt_digest, res.raw_text, parsed.answer,
                                           parsed.reasoning, res.usage});
            return parsed.answer;
        } catch (const AnswerParseError& e) {
            if (attempt < cfg.parse_retries) {
                out.retry_usages.push_back(res.usage);
                continue;
            }
            out.trace.push_back(
                TraceEntry{stage, prompt_digest, res.raw_text, "", "", res.usage});
            out.status = ClassificationOutcome::Status::unclassified;
            out.error = std::string("answer parse retries exhausted: ") + e.what();
            return std::nullopt;
        }
    }
    return std::nullopt;  // unreachable
}

inline ClassificationOutcome make_outcome(const Description& desc, Strategy strategy,
                                          const std::string& model) {
    ClassificationOutcome out;
    out.description_sha256 = desc.sha256;
    out.strategy = strategy;
    out.model_id = model;
    return out;
}

inline Stage stage_for_level(int level) {
    switch (level) {
        case 1: return Stage::l1;
        case 2: return Stage::l2;
        default: return Stage::l3;
    }
}

}  // namespace detail

// One prompt carrying every definition in config order, no synthetic class.
inline ClassificationOutcome classify_one_query(const Description& desc, const Taxonomy& t,
                                                Gateway& gw, const std::string& model,
                                                const ClassifyConfig& cfg = {}) {
    auto out = detail::make_outcome(desc, Strategy::one_query, model);
    std::vector<const AbuseType*> classes;
    for (const auto& type : t.types()) classes.push_back(&type);
    auto answer = detail::run_stage(desc, classes, std::nullopt, Stage::single, gw, cfg, out);
    if (answer) {
        out.label = *answer;
        out.status = ClassificationOutcome::Status::ok;
    }
    return out;
}

// Walks the taxonomy downward. The first query offers the L1 types; while
// the answer has children, the next query offers those children plus
// ttb_other. ttb_other stops the walk and outputs the current (parent)
// label, i.e. none of the more specific subtypes matched.
inline ClassificationOutcome classify_top_to_bottom(const Description& desc, const Taxonomy& t,
                                                    Gateway& gw, const std::string& model,
                                                    const ClassifyConfig& cfg = {}) {
    for (const AbuseType* l2 : t.at_level(2)) {
        if (t.children_of(l2->name).empty()) {
            throw std::invalid_argument("top_to_bottom requires every L2 type to have children: " +
                                        l2->name);
        }
    }
    auto out = detail::make_outcome(desc, Strategy::top_to_bottom, model);
    auto l1 = t.at_level(1);
    auto answer = detail::run_stage(desc, l1, std::nullopt, Stage::l1, gw, cfg, out);
    if (!answer) return out;

    std::string current = *answer;
    while (true) {
        auto children = t.children_of(current);
        if (children.empty()) break;
        Stage stage = detail::stage_for_level(t.at(current).level + 1);
        auto next = detail::run_stage(desc, children, ttb_other_class(), stage, gw, cfg, out);
        if (!next) return out;
        if (*next == ttb_other_class().name) break;  // keep the parent label
        current = *next;
    }
    out.label = current;
    out.status = ClassificationOutcome::Status::ok;
    return out;
}

// Walks the taxonomy upward from the deepest level. Each stage offers the
// full level plus btt_other; a non-btt_other answer stops the ascent. The
// final L1 stage offers only the L1 types and always resolves.
inline ClassificationOutcome classify_bottom_to_top(const Description& desc, const Taxonomy& t,
                                                    Gateway& gw, const std::string& model,
                                                    const ClassifyConfig& cfg = {}) {
    auto out = detail::make_outcome(desc, Strategy::bottom_to_top, model);
    for (int level = t.max_level(); level >= 1; --level) {
        auto classes = t.at_level(level);
        if (classes.empty()) continue;
        std::optional<SyntheticClass> synthetic;
        if (level > 1) synthetic = btt_other_class();
        auto answer = detail::run_stage(desc, classes, synthetic, detail::stage_for_level(level),
                                        gw, cfg, out);
        if (!answer) return out;
        if (level == 1 || *answer != btt_other_class().name) {
            out.label = *answer;
            out.status = ClassificationOutcome::Status::ok;
            return out;
        }
    }
    out.status = ClassificationOutcome::Status::unclassified;
    out.error = "taxonomy has no classes";
    return out;
}

inline ClassificationOutcome classify_one(const Description& desc, Strategy strategy,
                                          const Taxonomy& t, Gateway& gw,
                                          const std::string& model,
                                          const ClassifyConfig& cfg = {}) {
    switch (strategy) {
        case Strategy::one_query: return classify_one_query(desc, t, gw, model, cfg);
        case Strategy::top_to_bottom: return classify_top_to_bottom(desc, t, gw, model, cfg);
        case Strategy::bottom_to_top: return classify_bottom_to_top(desc, t, gw, model, cfg);
    }
    throw std::invalid_argument("unknown strategy");
}

struct BatchResult {
    std::vector<ClassificationOutcome> outcomes;  // input order
    CostReport cost;
};

// Fans out across descriptions; chain stages for one description stay
// strictly sequential. Outcomes come back in input order regardless of
// completion order, and partial failures are recorded, never dropped.
inline BatchResult classify_batch(std::span<const Description> descs, Strategy strategy,
                                  const Taxonomy& t, Gateway& gw, const std::string& model,
                                  const PricingTable& pricing, const ClassifyConfig& cfg = {},
                                  int concurrency = 4) {
    if (concurrency < 1) throw std::invalid_argument("concurrency must be >= 1");
    BatchResult result;
    result.outcomes.resize(descs.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= descs.size()) return;
            try {
                result.outcomes[i] = classify_one(descs[i], strategy, t, gw, model, cfg);
            } catch (const std::exception& e) {
                auto out = detail::make_outcome(descs[i], strategy, model);
                out.status = ClassificationOutcome::Status::unclassified;
                out.error = e.what();
                result.outcomes[i] = std::move(out);
            }
        }
    };
    std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(concurrency),
                                                  std::max<std::size_t>(descs.size(), 1));
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
    for (auto& th : threads) th.join();

    std::vector<UsageEntry> usages;
    for (const auto& out : result.outcomes) {
        for (const auto& entry : out.trace) usages.push_back({out.model_id, entry.usage});
        for (const auto& u : out.retry_usages) usages.push_back({out.model_id, u});
    }
    result.cost = accumulate_cost(usages, pricing);
    return result;
}

// --- JSONL serialization ----------------------------------------------------

inline nlohmann::ordered_json usage_to_json(const Usage& u) {
    return nlohmann::ordered_json{{"prompt_tokens", u.prompt_tokens},
                                  {"completion_tokens", u.completion_tokens},
                                  {"estimated", u.estimated}};
}

inline Usage usage_from_json(const nlohmann::json& j) {
    Usage u;
    u.prompt_tokens = j.at("prompt_tokens").get<int64_t>();
    u.completion_tokens = j.at("completion_tokens").get<int64_t>();
    u.estimated = j.value("estimated", false);
    return u;
}

inline nlohmann::ordered_json outcome_to_json(const ClassificationOutcome& o) {
    nlohmann::ordered_json j;
    j["description_sha256"] = o.description_sha256;
    j["strategy"] = std::string(strategy_name(o.strategy));
    j["model_id"] = o.model_id;
    j["status"] = o.status == ClassificationOutcome::Status::ok ? "ok" : "unclassified";
    if (o.status == ClassificationOutcome::Status::ok) j["label"] = o.label;
    if (!o.error.empty()) j["error"] = o.error;
    j["attempts"] = o.attempts;
    auto trace = nlohmann::ordered_json::array();
    for (const auto& entry : o.trace) {
        trace.push_back(nlohmann::ordered_json{{"stage", std::string(stage_name(entry.stage))},
                                               {"prompt_sha256", entry.prompt_sha256},
                                               {"raw_answer", entry.raw_answer},
                                               {"parsed_answer", entry.parsed_answer},
                                               {"reasoning", entry.reasoning},
                                               {"usage", usage_to_json(entry.usage)}});
    }
    j["trace"] = trace;
    if (!o.retry_usages.empty()) {
        auto extra = nlohmann::ordered_json::array();
        for (const auto& u : o.retry_usages) extra.push_back(usage_to_json(u));
        j["retry_usages"] = extra;
    }
    return j;
}

inline ClassificationOutcome outcome_from_json(const nlohmann::json& j) {
    ClassificationOutcome o;
    o.description_sha256 = j.at("description_sha256").get<std::string>();
    o.strategy = strategy_from_name(j.at("strategy").get<std::string>());
    o.model_id = j.at("model_id").get<std::string>();
    o.status = j.at("status").get<std::string>() == "ok" ? ClassificationOutcome::Status::ok
                                                         : ClassificationOutcome::Status::unclassified;
    if (j.contains("label")) o.label = j.at("label").get<std::string>();
    if (j.contains("error")) o.error = j.at("error").get<std::string>();
    o.attempts = j.at("attempts").get<int>();
    for (const auto& entry : j.at("trace")) {
        TraceEntry te;
        te.stage = stage_from_name(entry.at("stage").get<std::string>());
        te.prompt_sha256 = entry.at("prompt_sha256").get<std::string>();
        te.raw_answer = entry.at("raw_answer").get<std::string>();
        te.parsed_answer = entry.at("parsed_answer").get<std::string>();
        te.reasoning = entry.at("reasoning").get<std::string>();
        te.usage = usage_from_json(entry.at("usage"));
        o.trace.push_back(std::move(te));
    }
    if (j.contains("retry_usages")) {
        for (const auto& u : j.at("retry_usages")) o.retry_usages.push_back(usage_from_json(u));
    }
    return o;
}

inline std::string outcomes_to_jsonl(std::span<const ClassificationOutcome> outcomes) {
    std::string out;
    for (const auto& o : outcomes) out += outcome_to_json(o).dump() + "\n";
    return out;
}

inline std::vector<ClassificationOutcome> outcomes_from_jsonl(std::string_view text) {
    std::vector<ClassificationOutcome> out;
    for (const auto& line : split_lines(text)) {
        if (trim(line).empty()) continue;
        out.push_back(outcome_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

}  // namespace abusepipe
