#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"

#include "abusepipe/io.hpp"
#include "abusepipe/money.hpp"
#include "abusepipe/prompt.hpp"
#include "abusepipe/sha256.hpp"

namespace abusepipe {

struct Usage {
    int64_t prompt_tokens = 0;
    int64_t completion_tokens = 0;
    bool estimated = false;  // true when the backend did not report usage

    int64_t total() const { return prompt_tokens + completion_tokens; }
};

struct CompletionRequest {
    std::string model_id;
    PromptText prompt;
    int max_output_tokens = 1024;
    double temperature = 0.0;
};

struct GatewayError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Retryable failure. `billed` is set when the backend charged for the
// failed attempt; such usage must still be accounted exactly once.
struct TransportError : GatewayError {
    TransportError(const std::string& what, std::optional<Usage> billed_ = std::nullopt)
        : GatewayError(what), billed(billed_) {}
    std::optional<Usage> billed;
    std::vector<Usage> billed_attempts;  // filled by the gateway on final failure
};

struct RateLimitError : TransportError {
    using TransportError::TransportError;
};

// Signals the caller to drop the description rather than retry.
struct ContextLengthError : GatewayError {
    using GatewayError::GatewayError;
};

struct ReplayMissError : GatewayError {
    using GatewayError::GatewayError;
};

// An English word typically maps to 1-2 tokens; 1.5 per word is the
// estimation fallback when a backend reports no usage.
inline int64_t estimate_tokens(std::string_view text) {
    return (static_cast<int64_t>(word_count(text)) * 3 + 1) / 2;
}

struct BackendReply {
    std::string raw_text;
    std::optional<Usage> usage;  // absent -> gateway estimates
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string_view name() const = 0;
    virtual BackendReply complete_once(const CompletionRequest& req) = 0;
    // Prompt token budget; requests estimated above it are rejected before
    // any call is made.
    virtual int64_t context_limit() const { return 1'000'000'000; }
};

// --- deterministic test backends -----------------------------------------

// Replies either from a fixed answer sequence or from a responder function.
// Sequence entries are class tokens unless they already look like raw model
// output (start with '{'), in which case they pass through verbatim.
class ScriptedMockBackend : public Backend {
public:
    using Responder = std::function<std::string(const CompletionRequest&)>;

    explicit ScriptedMockBackend(std::vector<std::string> answers) {
        std::lock_guard lock(mu_);
        for (auto& a : answers) sequence_.push_back(std::move(a));
    }
    explicit ScriptedMockBackend(Responder responder) : responder_(std::move(responder)) {}

    std::string_view name() const override { return "mock"; }

    BackendReply complete_once(const CompletionRequest& req) override {
        calls_.fetch_add(1);
        {
            std::lock_guard lock(mu_);
            if (fail_next_ > 0) {
                --fail_next_;
                throw TransportError("scripted transport failure", fail_billed_);
            }
        }
        int cur = in_flight_.fetch_add(1) + 1;
        int prev = max_in_flight_.load();
        while (cur > prev && !max_in_flight_.compare_exchange_weak(prev, cur)) {
        }
        if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
        in_flight_.fetch_sub(1);

        std::string answer;
        if (responder_) {
            answer = responder_(req);
        } else {
            std::lock_guard lock(mu_);
            if (sequence_.empty()) throw TransportError("mock answer sequence exhausted");
            answer = sequence_.front();
            sequence_.pop_front();
        }
        BackendReply reply;
        reply.raw_text = answer.starts_with("{") ? answer : wrap_answer(answer);
        if (report_usage_) reply.usage = Usage{10, 5, false};
        return reply;
    }

    static std::string wrap_answer(std::string_view token) {
        nlohmann::ordered_json j{{"answer", std::string(token)}, {"reasoning", "scripted"}};
        return j.dump();
    }

    int64_t calls() const { return calls_.load(); }
    int max_observed_in_flight() const { return max_in_flight_.load(); }
    void set_latency(std::chrono::milliseconds ms) { latency_ = ms; }
    void set_report_usage(bool v) { report_usage_ = v; }
    void fail_next(int times, std::optional<Usage> billed = std::nullopt) {
        std::lock_guard lock(mu_);
        fail_next_ = times;
        fail_billed_ = billed;
    }

private:
    std::mutex mu_;
    std::deque<std::string> sequence_;
    Responder responder_;
    std::atomic<int64_t> calls_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
    std::chrono::milliseconds latency_{0};
    bool report_usage_ = true;
    int fail_next_ = 0;
    std::optional<Usage> fail_billed_;
};

// Replays recorded completions keyed by (model_id, sha256 of prompt text).
// Misses are not retryable: a miss means the fixture does not cover the
// prompt, which no amount of retrying will fix.
class ReplayBackend : public Backend {
public:
    ReplayBackend() = default;

    static ReplayBackend from_jsonl(const std::string& text) {
        ReplayBackend b;
        for (const auto& line : split_lines(text)) {
            if (trim(line).empty()) continue;
            auto j = nlohmann::json::parse(line);
            Usage u;
            u.prompt_tokens = j.at("usage").at("prompt_tokens").get<int64_t>();
            u.completion_tokens = j.at("usage").at("completion_tokens").get<int64_t>();
            b.records_[key(j.at("model_id").get<std::string>(),
                           j.at("prompt_sha256").get<std::string>())] = {
                j.at("raw_text").get<std::string>(), u};
        }
        return b;
    }

    static ReplayBackend from_file(const std::string& path) {
        return from_jsonl(read_file(path));
    }

    std::string_view name() const override { return "replay"; }

    BackendReply complete_once(const CompletionRequest& req) override {
        auto it = records_.find(key(req.model_id, sha256_hex(req.prompt.text)));
        if (it == records_.end()) {
            throw ReplayMissError("replay fixture has no record for model " + req.model_id +
                                  " prompt sha256 " + sha256_hex(req.prompt.text));
        }
        return {it->second.first, it->second.second};
    }

    std::size_t size() const { return records_.size(); }

private:
    static std::string key(std::string_view model, std::string_view digest) {
        return std::string(model) + "\x1f" + std::string(digest);
    }
    std::map<std::string, std::pair<std::string, Usage>> records_;
};

// Wraps another backend and captures every completion as a replay record.
class RecordingBackend : public Backend {
public:
    explicit RecordingBackend(Backend& inner) : inner_(inner) {}

    std::string_view name() const override { return "recording"; }

    BackendReply complete_once(const CompletionRequest& req) override {
        BackendReply reply = inner_.complete_once(req);
        Usage u = reply.usage.value_or(Usage{estimate_tokens(req.prompt.text),
                                             estimate_tokens(reply.raw_text), true});
        std::lock_guard lock(mu_);
        nlohmann::ordered_json j;
        j["model_id"] = req.model_id;
        j["prompt_sha256"] = sha256_hex(req.prompt.text);
        j["raw_text"] = reply.raw_text;
        j["usage"] = nlohmann::ordered_json{{"prompt_tokens", u.prompt_tokens},
                                            {"completion_tokens", u.completion_tokens}};
        records_ += j.dump() + "\n";
        return reply;
    }

    int64_t context_limit() const override { return inner_.context_limit(); }

    std::string records_jsonl() const {
        std::lock_guard lock(mu_);
        return records_;
    }

private:
    Backend& inner_;
    mutable std::mutex mu_;
    std::string records_;
};

// --- gateway ---------------------------------------------------------------

struct GatewayConfig {
    int max_in_flight = 4;
    int max_retries = 5;
    std::chrono::milliseconds backoff_base{1000};  // 1s * 2^k
    std::function<void(std::chrono::milliseconds)> sleeper =
        [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
};

struct CompletionResult {
    std::string raw_text;
    Usage usage;
    std::vector<Usage> billed_failures;  // usage billed on attempts that failed
};

// Uniform access to a backend: shared in-flight limit, transport retries
// with exponential backoff, usage capture (estimated when the backend does
// not report it). Thread safe; completions may run concurrently up to the
// configured limit.
class Gateway {
public:
    Gateway(Backend& backend, GatewayConfig cfg = {})
        : backend_(backend), cfg_(std::move(cfg)), slots_(cfg_.max_in_flight) {
        if (cfg_.max_in_flight < 1) throw std::invalid_argument("max_in_flight must be >= 1");
    }

    CompletionResult complete(const CompletionRequest& req) {
        if (req.max_output_tokens <= 0) throw GatewayError("max_output_tokens must be > 0");
        if (estimate_tokens(req.prompt.text) > backend_.context_limit()) {
            throw ContextLengthError("prompt exceeds the backend context limit");
        }
        slots_.acquire();
        struct Release {
            std::counting_semaphore<>& s;
            ~Release() { s.release(); }
        } release{slots_};

        std::vector<Usage> billed;
        for (int attempt = 0;; ++attempt) {
            try {
                BackendReply reply = backend_.complete_once(req);
                CompletionResult result;
                result.raw_text = std::move(reply.raw_text);
                if (reply.usage) {
                    result.usage = *reply.usage;
                } else {
                    result.usage = Usage{estimate_tokens(req.prompt.text),
                                         estimate_tokens(result.raw_text), true};
                }
                result.billed_failures = std::move(billed);
                return result;
            } catch (TransportError& e) {
                if (e.billed) billed.push_back(*e.billed);
                if (attempt >= cfg_.max_retries) {
                    e.billed_attempts = std::move(billed);
                    throw;
                }
                cfg_.sleeper(cfg_.backoff_base * (1LL << attempt));
            }
        }
    }

    Backend& backend() { return backend_; }

private:
    Backend& backend_;
    GatewayConfig cfg_;
    std::counting_semaphore<> slots_;
};

// --- pricing and cost accounting -------------------------------------------

struct ModelRates {
    double usd_per_1m_input_tokens = 0;
    double usd_per_1m_output_tokens = 0;
};

struct PricingTable {
    std::map<std::string, ModelRates> rates;

    static PricingTable from_json(const std::string& text) {
        PricingTable p;
        auto doc = nlohmann::json::parse(text);
        for (auto it = doc.begin(); it != doc.end(); ++it) {
            ModelRates r;
            r.usd_per_1m_input_tokens = it.value().at("usd_per_1m_input_tokens").get<double>();
            r.usd_per_1m_output_tokens = it.value().at("usd_per_1m_output_tokens").get<double>();
            if (r.usd_per_1m_input_tokens < 0 || r.usd_per_1m_output_tokens < 0) {
                throw GatewayError("negative rate for model " + it.key());
            }
            p.rates[it.key()] = r;
        }
        return p;
    }

    static PricingTable from_file(const std::string& path) { return from_json(read_file(path)); }
};

struct UsageEntry {
    std::string model_id;
    Usage usage;
};

struct ModelCost {
    int64_t queries = 0;
    int64_t prompt_tokens = 0;
    int64_t completion_tokens = 0;
    double usd = 0.0;        // full precision
    int64_t usd_cents = 0;   // half-up, presentation value
};

struct CostReport {
    std::map<std::string, ModelCost> per_model;
    ModelCost totals;
};

struct UnpricedModelError : GatewayError {
    using GatewayError::GatewayError;
};

// usd = prompt_tokens * in_rate/1e6 + completion_tokens * out_rate/1e6,
// computed from per-model token totals; cents rounding happens only here,
// at report assembly.
inline CostReport accumulate_cost(std::span<const UsageEntry> usages, const PricingTable& pricing) {
    CostReport report;
    for (const auto& entry : usages) {
        if (!pricing.rates.count(entry.model_id)) {
            throw UnpricedModelError("no pricing for model: " + entry.model_id);
        }
        ModelCost& mc = report.per_model[entry.model_id];
        mc.queries += 1;
        mc.prompt_tokens += entry.usage.prompt_tokens;
        mc.completion_tokens += entry.usage.completion_tokens;
    }
    for (auto& [model, mc] : report.per_model) {
        const ModelRates& r = pricing.rates.at(model);
        mc.usd = static_cast<double>(mc.prompt_tokens) * r.usd_per_1m_input_tokens / 1e6 +
                 static_cast<double>(mc.completion_tokens) * r.usd_per_1m_output_tokens / 1e6;
        mc.usd_cents = static_cast<int64_t>(std::llround(mc.usd * 100.0));
        report.totals.queries += mc.queries;
        report.totals.prompt_tokens += mc.prompt_tokens;
        report.totals.completion_tokens += mc.completion_tokens;
        report.totals.usd += mc.usd;
    }
    report.totals.usd_cents = static_cast<int64_t>(std::llround(report.totals.usd * 100.0));
    return report;
}

inline std::string cost_report_to_csv(const CostReport& report) {
    std::string out = "model_id,queries,prompt_tokens,completion_tokens,usd,usd_exact\n";
    auto row = [](const std::string& name, const ModelCost& mc) {
        char exact[64];
        std::snprintf(exact, sizeof(exact), "%.10f", mc.usd);
        return name + "," + std::to_string(mc.queries) + "," + std::to_string(mc.prompt_tokens) +
               "," + std::to_string(mc.completion_tokens) + "," + format_usd_cents(mc.usd_cents) +
               "," + exact + "\n";
    };
    for (const auto& [model, mc] : report.per_model) out += row(model, mc);
    out += row("TOTAL", report.totals);
    return out;
}

inline std::string format_cost_table(const CostReport& report) {
    std::string out = "Model | Queries | Tokens | USD\n";
    auto row = [](const std::string& name, const ModelCost& mc) {
        return name + " | " + format_thousands(mc.queries) + " | " +
               format_thousands(mc.prompt_tokens + mc.completion_tokens) + " | $" +
               format_usd_cents(mc.usd_cents) + "\n";
    };
    for (const auto& [model, mc] : report.per_model) out += row(model, mc);
    out += row("Total", report.totals);
    return out;
}

}  // namespace abusepipe
