#pragma once

#include <cctype>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "abusepipe/csv.hpp"
#include "abusepipe/hdbscan.hpp"
#include "abusepipe/ingest.hpp"

namespace abusepipe {

struct ClusterError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Function words dropped from cluster term tables.
inline const std::unordered_set<std::string>& stop_words() {
    static const std::unordered_set<std::string> kStopWords = {
        "a",     "about", "an",   "and",  "are",  "as",    "at",    "be",   "been",  "but",
        "by",    "can",   "could", "did",  "do",   "does",  "for",   "from", "had",   "has",
        "have",  "he",    "her",  "him",  "his",  "i",     "if",    "in",   "into",  "is",
        "it",    "its",   "me",   "my",   "no",   "not",   "of",    "on",   "or",    "our",
        "she",   "so",    "that", "the",  "their", "them",  "then",  "they", "this",  "to",
        "us",    "was",   "we",   "were", "what", "when",  "which", "who",  "will",  "with",
        "would", "you",   "your"};
    return kStopWords;
}

// Case-folded tokens: maximal runs of ASCII alphanumerics.
inline std::vector<std::string> term_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

// Term frequencies over a cluster's member descriptions, stop words
// removed, ordered by descending frequency with ties broken by first
// appearance. This is the data behind the per-cluster word clouds.
inline std::vector<std::pair<std::string, int64_t>> cluster_terms(
    const ClusterAssignment& assignment, std::span<const Description> descs, int cluster_id) {
    if (!assignment.cluster_sizes.count(cluster_id)) {
        throw ClusterError("unknown cluster: " + std::to_string(cluster_id));
    }
    std::unordered_map<std::string, std::string_view> text_by_id;
    for (const auto& d : descs) text_by_id.emplace(d.sha256, d.text);

    std::unordered_map<std::string, int64_t> freq;
    std::unordered_map<std::string, int64_t> first_seen;
    int64_t rank = 0;
    for (std::size_t i = 0; i < assignment.ids.size(); ++i) {
        if (assignment.cluster_of[i] != cluster_id) continue;
        auto it = text_by_id.find(assignment.ids[i]);
        if (it == text_by_id.end()) continue;
        for (auto& token : term_tokens(it->second)) {
            if (stop_words().count(token)) continue;
            if (first_seen.emplace(token, rank).second) ++rank;
            ++freq[token];
        }
    }
    std::vector<std::pair<std::string, int64_t>> out(freq.begin(), freq.end());
    std::sort(out.begin(), out.end(), [&](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return first_seen.at(x.first) < first_seen.at(y.first);
    });
    return out;
}

// Ground-truth expansion: every member of a labeled cluster receives the
// cluster's label. Singletons and unlabeled clusters are absent.
inline std::map<std::string, std::string> propagate_cluster_labels(
    const ClusterAssignment& assignment, const std::map<int, std::string>& labeled_clusters) {
    for (const auto& [cluster_id, label] : labeled_clusters) {
        if (!assignment.cluster_sizes.count(cluster_id)) {
            throw ClusterError("label for nonexistent cluster: " + std::to_string(cluster_id));
        }
    }
    std::map<std::string, std::string> out;
    for (std::size_t i = 0; i < assignment.ids.size(); ++i) {
        if (!assignment.cluster_of[i]) continue;
        auto it = labeled_clusters.find(*assignment.cluster_of[i]);
        if (it != labeled_clusters.end()) out[assignment.ids[i]] = it->second;
    }
    return out;
}

// --- serialization ----------------------------------------------------------

inline std::string assignment_to_jsonl(const ClusterAssignment& a) {
    std::string out;
    for (std::size_t i = 0; i < a.ids.size(); ++i) {
        nlohmann::ordered_json j;
        j["sha256"] = a.ids[i];
        if (a.cluster_of[i]) j["cluster_id"] = *a.cluster_of[i];
        else j["cluster_id"] = nullptr;
        out += j.dump() + "\n";
    }
    return out;
}

inline ClusterAssignment assignment_from_jsonl(std::string_view text) {
    ClusterAssignment a;
    for (const auto& line : split_lines(text)) {
        if (trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line);
        a.ids.push_back(j.at("sha256").get<std::string>());
        if (j.at("cluster_id").is_null()) {
            a.cluster_of.push_back(std::nullopt);
            ++a.singleton_count;
        } else {
            int c = j.at("cluster_id").get<int>();
            a.cluster_of.push_back(c);
            ++a.cluster_sizes[c];
        }
    }
    return a;
}

inline std::string terms_to_csv(std::span<const std::pair<std::string, int64_t>> terms) {
    std::string out = "term,frequency\n";
    for (const auto& [term, n] : terms) out += csv_row({term, std::to_string(n)});
    return out;
}

}  // namespace abusepipe
