#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "abusepipe/io.hpp"
#include "abusepipe/money.hpp"
#include "abusepipe/sha256.hpp"

namespace abusepipe {

enum class Source { bitcoinabuse, bbb };

inline std::string_view source_name(Source s) {
    return s == Source::bitcoinabuse ? "bitcoinabuse" : "bbb";
}

inline Source source_from_name(std::string_view s) {
    if (s == "bitcoinabuse") return Source::bitcoinabuse;
    if (s == "bbb") return Source::bbb;
    throw std::invalid_argument("unknown source: " + std::string(s));
}

struct Indicator {
    std::string kind;  // url | phone | email
    std::string value;
};

// One submitted report, normalized across both sources. Monetary loss is
// stored as integer cents.
struct Report {
    Source source = Source::bitcoinabuse;
    std::string report_id;
    std::string created;  // YYYY-MM-DD
    std::optional<std::string> address;
    std::optional<std::string> ba_type;
    std::optional<std::string> other_abuse;
    std::string description;
    std::optional<int64_t> dollars_lost_cents;
    std::optional<std::string> location;
    std::optional<std::string> language;
    std::vector<Indicator> indicators;
};

struct Reject {
    std::size_t line = 0;  // 1-based line number in the input file
    std::string reason;
    std::string raw;
};

struct ParsedReports {
    std::vector<Report> reports;
    std::vector<Reject> rejects;
};

struct IngestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline bool looks_like_date(std::string_view s) {
    if (s.size() < 10) return false;
    for (int i = 0; i < 10; ++i) {
        char c = s[static_cast<std::size_t>(i)];
        if (i == 4 || i == 7) {
            if (c != '-') return false;
        } else if (c < '0' || c > '9') {
            return false;
        }
    }
    return true;
}

inline std::optional<std::string> opt_string(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw IngestError(std::string("field is not a string: ") + key);
    std::string v = it->get<std::string>();
    if (v.empty()) return std::nullopt;
    return v;
}

inline std::string req_string(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) throw IngestError(std::string("missing field: ") + key);
    return it->get<std::string>();
}

// Maps a raw record onto the unified model; throws IngestError for any
// schema violation so the caller can route the line to the rejects file.
inline Report record_to_report(const nlohmann::json& j, Source source) {
    Report r;
    r.source = source;
    if (source == Source::bitcoinabuse) {
        r.report_id = req_string(j, "report_id");
        r.created = req_string(j, "created");
        r.address = opt_string(j, "address");
        if (!r.address) throw IngestError("missing address");
        r.ba_type = opt_string(j, "abuse_type");
        r.other_abuse = opt_string(j, "other_abuse");
        if (r.other_abuse && r.other_abuse->size() > 200) throw IngestError("other_abuse too long");
        r.description = req_string(j, "description");
        r.language = opt_string(j, "language");
    } else {
        r.report_id = req_string(j, "scam_id");
        r.created = req_string(j, "date");
        r.description = req_string(j, "description");
        r.location = opt_string(j, "location");
        r.language = opt_string(j, "language");
        r.address = opt_string(j, "address");
        if (auto it = j.find("dollars_lost"); it != j.end() && !it->is_null()) {
            if (!it->is_number()) throw IngestError("dollars_lost is not a number");
            double v = it->get<double>();
            if (v < 0) throw IngestError("negative dollars_lost");
            r.dollars_lost_cents = usd_to_cents(v);
        }
        if (auto it = j.find("indicators"); it != j.end() && it->is_array()) {
            for (const auto& ind : *it) {
                std::string kind = req_string(ind, "kind");
                if (kind != "url" && kind != "phone" && kind != "email") {
                    throw IngestError("unknown indicator kind: " + kind);
                }
                r.indicators.push_back({kind, req_string(ind, "value")});
            }
        }
    }
    if (trim(r.description).empty()) throw IngestError("empty description");
    if (r.report_id.empty()) throw IngestError("empty report id");
    if (!looks_like_date(r.created)) throw IngestError("bad created date: " + r.created);
    return r;
}

}  // namespace detail

// Parses a JSON Lines report file. Malformed records are collected into
// rejects with a reason; they are never silently dropped. Addresses are
// kept as-is (reports routinely contain garbage addresses).
inline ParsedReports parse_reports_text(std::string_view text, Source source) {
    ParsedReports out;
    auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            out.rejects.push_back({i + 1, "invalid JSON record", line});
            continue;
        }
        try {
            out.reports.push_back(detail::record_to_report(j, source));
        } catch (const std::exception& e) {
            out.rejects.push_back({i + 1, e.what(), line});
        }
    }
    return out;
}

inline ParsedReports parse_reports(const std::string& path, Source source) {
    return parse_reports_text(read_file(path), source);
}

// One distinct description byte-string; many reports may share it.
struct Description {
    std::string sha256;  // of the exact UTF-8 text bytes
    std::string text;
    int word_count = 0;
    std::optional<std::string> language;
    std::vector<std::pair<std::string, std::string>> report_ids;  // (source, report_id)
};

// First-seen order; the digest is over raw bytes with no normalization.
inline std::vector<Description> dedup_descriptions(std::span<const Report> reports) {
    std::vector<Description> out;
    std::unordered_map<std::string, std::size_t> by_digest;
    for (const Report& r : reports) {
        std::string digest = sha256_hex(r.description);
        auto [it, inserted] = by_digest.emplace(digest, out.size());
        if (inserted) {
            Description d;
            d.sha256 = std::move(digest);
            d.text = r.description;
            d.word_count = word_count(r.description);
            d.language = r.language;
            out.push_back(std::move(d));
        }
        Description& d = out[it->second];
        if (!d.language && r.language) d.language = r.language;
        d.report_ids.emplace_back(std::string(source_name(r.source)), r.report_id);
    }
    return out;
}

struct DescriptionStats {
    std::size_t count = 0;
    int wc_min = 0;
    int wc_median = 0;  // lower median for even counts
    double wc_mean = 0.0;
    int wc_max = 0;
    std::map<std::string, std::size_t> languages;
};

inline DescriptionStats description_stats(std::span<const Description> descs) {
    DescriptionStats s;
    s.count = descs.size();
    if (descs.empty()) return s;
    std::vector<int> wcs;
    wcs.reserve(descs.size());
    int64_t total = 0;
    for (const auto& d : descs) {
        wcs.push_back(d.word_count);
        total += d.word_count;
        if (d.language) ++s.languages[*d.language];
    }
    std::sort(wcs.begin(), wcs.end());
    s.wc_min = wcs.front();
    s.wc_max = wcs.back();
    s.wc_median = wcs[(wcs.size() - 1) / 2];
    s.wc_mean = static_cast<double>(total) / static_cast<double>(descs.size());
    return s;
}

// --- JSONL serialization -------------------------------------------------

inline nlohmann::ordered_json report_to_json(const Report& r) {
    nlohmann::ordered_json j;
    j["source"] = std::string(source_name(r.source));
    j["report_id"] = r.report_id;
    j["created"] = r.created;
    if (r.address) j["address"] = *r.address;
    if (r.ba_type) j["ba_type"] = *r.ba_type;
    if (r.other_abuse) j["other_abuse"] = *r.other_abuse;
    j["description"] = r.description;
    if (r.dollars_lost_cents) j["dollars_lost"] = format_usd_cents(*r.dollars_lost_cents);
    if (r.location) j["location"] = *r.location;
    if (r.language) j["language"] = *r.language;
    if (!r.indicators.empty()) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& ind : r.indicators) {
            arr.push_back(nlohmann::ordered_json{{"kind", ind.kind}, {"value", ind.value}});
        }
        j["indicators"] = arr;
    }
    return j;
}

inline Report report_from_json(const nlohmann::json& j) {
    Report r;
    r.source = source_from_name(j.at("source").get<std::string>());
    r.report_id = j.at("report_id").get<std::string>();
    r.created = j.at("created").get<std::string>();
    r.description = j.at("description").get<std::string>();
    if (j.contains("address")) r.address = j.at("address").get<std::string>();
    if (j.contains("ba_type")) r.ba_type = j.at("ba_type").get<std::string>();
    if (j.contains("other_abuse")) r.other_abuse = j.at("other_abuse").get<std::string>();
    if (j.contains("dollars_lost")) {
        r.dollars_lost_cents = usd_to_cents(std::stod(j.at("dollars_lost").get<std::string>()));
    }
    if (j.contains("location")) r.location = j.at("location").get<std::string>();
    if (j.contains("language")) r.language = j.at("language").get<std::string>();
    if (j.contains("indicators")) {
        for (const auto& ind : j.at("indicators")) {
            r.indicators.push_back(
                {ind.at("kind").get<std::string>(), ind.at("value").get<std::string>()});
        }
    }
    return r;
}

inline std::string reports_to_jsonl(std::span<const Report> reports) {
    std::string out;
    for (const auto& r : reports) out += report_to_json(r).dump() + "\n";
    return out;
}

inline std::vector<Report> reports_from_jsonl(std::string_view text) {
    std::vector<Report> out;
    for (const auto& line : split_lines(text)) {
        if (trim(line).empty()) continue;
        out.push_back(report_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

inline nlohmann::ordered_json description_to_json(const Description& d) {
    nlohmann::ordered_json j;
    j["sha256"] = d.sha256;
    j["text"] = d.text;
    j["word_count"] = d.word_count;
    if (d.language) j["language"] = *d.language;
    auto ids = nlohmann::ordered_json::array();
    for (const auto& [src, id] : d.report_ids) {
        ids.push_back(nlohmann::ordered_json{{"source", src}, {"report_id", id}});
    }
    j["report_ids"] = ids;
    return j;
}

inline Description description_from_json(const nlohmann::json& j) {
    Description d;
    d.sha256 = j.at("sha256").get<std::string>();
    d.text = j.at("text").get<std::string>();
    d.word_count = j.at("word_count").get<int>();
    if (j.contains("language")) d.language = j.at("language").get<std::string>();
    for (const auto& rid : j.at("report_ids")) {
        d.report_ids.emplace_back(rid.at("source").get<std::string>(),
                                  rid.at("report_id").get<std::string>());
    }
    return d;
}

inline std::string descriptions_to_jsonl(std::span<const Description> descs) {
    std::string out;
    for (const auto& d : descs) out += description_to_json(d).dump() + "\n";
    return out;
}

inline std::vector<Description> descriptions_from_jsonl(std::string_view text) {
    std::vector<Description> out;
    for (const auto& line : split_lines(text)) {
        if (trim(line).empty()) continue;
        out.push_back(description_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

inline std::string rejects_to_jsonl(std::span<const Reject> rejects) {
    std::string out;
    for (const auto& rej : rejects) {
        nlohmann::ordered_json j;
        j["line"] = rej.line;
        j["reason"] = rej.reason;
        j["raw"] = rej.raw;
        out += j.dump() + "\n";
    }
    return out;
}

inline nlohmann::ordered_json stats_to_json(const DescriptionStats& s) {
    nlohmann::ordered_json j;
    j["count"] = s.count;
    j["word_count"] = nlohmann::ordered_json{
        {"min", s.wc_min}, {"median", s.wc_median}, {"mean", s.wc_mean}, {"max", s.wc_max}};
    nlohmann::ordered_json langs = nlohmann::ordered_json::object();
    for (const auto& [tag, n] : s.languages) langs[tag] = n;
    j["languages"] = langs;
    return j;
}

}  // namespace abusepipe
