#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "abusepipe/classify.hpp"
#include "abusepipe/csv.hpp"
#include "abusepipe/ingest.hpp"
#include "abusepipe/money.hpp"
#include "abusepipe/taxonomy.hpp"

namespace abusepipe {

struct TagError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Majority-vote abuse label for one address. notabuse never appears in the
// votes and is never the tag.
struct AddressTag {
    std::string address;
    std::string abuse_type;
    std::map<std::string, int64_t> votes;  // label -> count, notabuse excluded
    int64_t total_reports_considered = 0;  // classified reports, notabuse included
    std::string source;
};

// Counts labels excluding notabuse and outputs the max-count label. Ties
// go to the deeper (more specific) taxonomy level, then lexicographically.
// No tag when every label was notabuse or the list is empty.
inline std::optional<AddressTag> majority_vote_tag(const Taxonomy& t, const std::string& address,
                                                   std::span<const std::string> labels,
                                                   std::string source = "abusepipe") {
    AddressTag tag;
    tag.address = address;
    tag.source = std::move(source);
    tag.total_reports_considered = static_cast<int64_t>(labels.size());
    for (const auto& label : labels) {
        if (label == "notabuse") continue;
        t.at(label);  // labels must be taxonomy types
        ++tag.votes[label];
    }
    if (tag.votes.empty()) return std::nullopt;

    const std::string* best = nullptr;
    int64_t best_count = 0;
    for (const auto& [label, count] : tag.votes) {
        if (best == nullptr || count > best_count) {
            best = &label;
            best_count = count;
            continue;
        }
        if (count == best_count) {
            int level = t.at(label).level;
            int best_level = t.at(*best).level;
            if (level > best_level || (level == best_level && label < *best)) best = &label;
        }
    }
    tag.abuse_type = *best;
    return tag;
}

// Joins classifier outcomes (keyed by description sha256) to reports and
// votes per address. Labels propagate to every report sharing a
// description; reports without an address or without an ok outcome are
// skipped. Output is ordered by ascending address.
inline std::vector<AddressTag> tag_addresses(const Taxonomy& t, std::span<const Report> reports,
                                             std::span<const ClassificationOutcome> outcomes,
                                             std::string source = "abusepipe") {
    std::unordered_map<std::string, const std::string*> label_by_sha;
    for (const auto& o : outcomes) {
        if (o.status == ClassificationOutcome::Status::ok) {
            label_by_sha[o.description_sha256] = &o.label;
        }
    }
    std::map<std::string, std::vector<std::string>> labels_by_address;
    for (const auto& r : reports) {
        if (!r.address) continue;
        auto it = label_by_sha.find(sha256_hex(r.description));
        if (it == label_by_sha.end()) continue;
        labels_by_address[*r.address].push_back(*it->second);
    }
    std::vector<AddressTag> tags;
    for (const auto& [address, labels] : labels_by_address) {
        if (auto tag = majority_vote_tag(t, address, labels, source)) tags.push_back(std::move(*tag));
    }
    return tags;
}

// A generated tag is compatible with a reference tag iff they are equal or
// one is an ancestor of the other.
inline bool tags_compatible(const Taxonomy& t, std::string_view a, std::string_view b) {
    return a == b || t.is_ancestor(a, b) || t.is_ancestor(b, a);
}

// --- deposits and revenue ----------------------------------------------------

struct DepositRecord {
    std::string address;
    std::string tx_id;
    int64_t amount_satoshi = 0;  // > 0
    std::string date;            // YYYY-MM-DD
    int64_t usd_rate_e4 = 0;     // USD per BTC on the deposit date, 1e-4 fixed point
    std::optional<int64_t> sender_cluster;
    std::optional<int64_t> recipient_cluster;
};

// DD-DC double-counting guard: a deposit is a self-deposit iff both
// multi-input cluster ids are known and equal. Unknown provenance is kept.
inline std::vector<DepositRecord> filter_self_deposits(std::span<const DepositRecord> deposits) {
    std::vector<DepositRecord> out;
    for (const auto& d : deposits) {
        if (d.sender_cluster && d.recipient_cluster && *d.sender_cluster == *d.recipient_cluster) {
            continue;
        }
        out.push_back(d);
    }
    return out;
}

struct RevenueRow {
    std::string abuse_type;
    int64_t address_count = 0;   // tagged addresses with at least one deposit
    int64_t total_satoshi = 0;
    usd_e12_t total_usd_e12 = 0;
};

struct RevenueReport {
    std::vector<RevenueRow> rows;  // descending USD
    RevenueRow remainder;          // deposits to untagged addresses
    RevenueRow totals;             // over tagged rows only, like the source table
};

// Revenue per abuse type over self-deposit-filtered deposits. Excluded
// addresses (known internal service wallets) contribute nothing anywhere.
inline RevenueReport revenue_by_type(std::span<const AddressTag> tags,
                                     std::span<const DepositRecord> deposits,
                                     std::span<const std::string> exclusions) {
    std::set<std::string> excluded(exclusions.begin(), exclusions.end());
    std::unordered_map<std::string, const std::string*> tag_by_address;
    std::map<std::string, RevenueRow> by_type;
    for (const auto& t : tags) {
        tag_by_address[t.address] = &t.abuse_type;
        by_type.emplace(t.abuse_type, RevenueRow{t.abuse_type, 0, 0, 0});
    }

    RevenueReport report;
    report.remainder.abuse_type = "(untagged)";
    std::map<std::string, std::set<std::string>> addresses_seen;
    std::set<std::string> remainder_addresses;
    for (const auto& d : deposits) {
        if (d.amount_satoshi <= 0) throw TagError("deposit amount must be positive: " + d.tx_id);
        if (excluded.count(d.address)) continue;
        auto it = tag_by_address.find(d.address);
        if (it == tag_by_address.end()) {
            report.remainder.total_satoshi += d.amount_satoshi;
            report.remainder.total_usd_e12 += deposit_usd_e12(d.amount_satoshi, d.usd_rate_e4);
            remainder_addresses.insert(d.address);
            continue;
        }
        RevenueRow& row = by_type.at(*it->second);
        row.total_satoshi += d.amount_satoshi;
        row.total_usd_e12 += deposit_usd_e12(d.amount_satoshi, d.usd_rate_e4);
        addresses_seen[*it->second].insert(d.address);
    }
    report.remainder.address_count = static_cast<int64_t>(remainder_addresses.size());
    for (auto& [type, row] : by_type) {
        row.address_count = static_cast<int64_t>(addresses_seen[type].size());
        report.totals.address_count += row.address_count;
        report.totals.total_satoshi += row.total_satoshi;
        report.totals.total_usd_e12 += row.total_usd_e12;
        report.rows.push_back(row);
    }
    report.totals.abuse_type = "Total";
    std::sort(report.rows.begin(), report.rows.end(), [](const RevenueRow& x, const RevenueRow& y) {
        if (x.total_usd_e12 != y.total_usd_e12) return x.total_usd_e12 > y.total_usd_e12;
        if (x.total_satoshi != y.total_satoshi) return x.total_satoshi > y.total_satoshi;
        return x.abuse_type < y.abuse_type;
    });
    return report;
}

// --- financial loss statistics ------------------------------------------------

struct LossRow {
    int64_t reports_all = 0;
    int64_t reports_with_loss = 0;  // dollars_lost > 0
    int64_t total_cents = 0;
    int64_t mean_cents = 0;    // total / reports_with_loss, half-up; 0 when none
    int64_t median_cents = 0;  // lower median over all reports, missing loss = 0
};

// Joins BBB-style reports to their classified labels and aggregates the
// reported dollar losses per abuse type.
inline std::map<std::string, LossRow> loss_stats_by_type(
    std::span<const ClassificationOutcome> outcomes, std::span<const Report> reports) {
    std::unordered_map<std::string, const std::string*> label_by_sha;
    for (const auto& o : outcomes) {
        if (o.status == ClassificationOutcome::Status::ok) {
            label_by_sha[o.description_sha256] = &o.label;
        }
    }
    std::map<std::string, std::vector<int64_t>> losses_by_type;
    for (const auto& r : reports) {
        auto it = label_by_sha.find(sha256_hex(r.description));
        if (it == label_by_sha.end()) continue;
        losses_by_type[*it->second].push_back(r.dollars_lost_cents.value_or(0));
    }
    std::map<std::string, LossRow> out;
    for (auto& [type, losses] : losses_by_type) {
        LossRow row;
        row.reports_all = static_cast<int64_t>(losses.size());
        for (int64_t cents : losses) {
            row.total_cents += cents;
            if (cents > 0) ++row.reports_with_loss;
        }
        if (row.reports_with_loss > 0) {
            row.mean_cents = (row.total_cents + row.reports_with_loss / 2) / row.reports_with_loss;
        }
        std::sort(losses.begin(), losses.end());
        row.median_cents = losses[(losses.size() - 1) / 2];
        out[type] = row;
    }
    return out;
}

// --- serialization ------------------------------------------------------------

inline std::string tags_to_csv(std::span<const AddressTag> tags) {
    std::string out = "address,abuse_type,votes,total_reports_considered,source\n";
    for (const auto& t : tags) {
        std::string votes;
        for (const auto& [label, count] : t.votes) {
            if (!votes.empty()) votes += ";";
            votes += label + ":" + std::to_string(count);
        }
        out += csv_row({t.address, t.abuse_type, votes,
                        std::to_string(t.total_reports_considered), t.source});
    }
    return out;
}

inline std::vector<AddressTag> tags_from_csv(std::string_view text) {
    auto rows = parse_csv(text);
    std::vector<AddressTag> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {  // skip header
        const auto& row = rows[i];
        if (row.size() < 5) throw TagError("bad tags csv row");
        AddressTag t;
        t.address = row[0];
        t.abuse_type = row[1];
        std::string_view votes = row[2];
        while (!votes.empty()) {
            auto end = votes.find(';');
            std::string_view part = votes.substr(0, end);
            votes = end == std::string_view::npos ? std::string_view{} : votes.substr(end + 1);
            auto colon = part.find(':');
            if (colon == std::string_view::npos) {
                throw TagError("bad votes field: " + std::string(part));
            }
            t.votes[std::string(part.substr(0, colon))] =
                std::stoll(std::string(part.substr(colon + 1)));
        }
        t.total_reports_considered = std::stoll(row[3]);
        t.source = row[4];
        out.push_back(std::move(t));
    }
    return out;
}

inline DepositRecord deposit_from_json(const nlohmann::json& j) {
    DepositRecord d;
    d.address = j.at("address").get<std::string>();
    d.tx_id = j.at("tx_id").get<std::string>();
    d.amount_satoshi = j.at("amount_satoshi").get<int64_t>();
    d.date = j.at("date").get<std::string>();
    d.usd_rate_e4 = rate_to_e4(j.at("usd_rate").get<double>());
    if (j.contains("sender_cluster") && !j.at("sender_cluster").is_null()) {
        d.sender_cluster = j.at("sender_cluster").get<int64_t>();
    }
    if (j.contains("recipient_cluster") && !j.at("recipient_cluster").is_null()) {
        d.recipient_cluster = j.at("recipient_cluster").get<int64_t>();
    }
    if (d.amount_satoshi <= 0) throw TagError("deposit amount must be positive: " + d.tx_id);
    if (d.usd_rate_e4 < 0) throw TagError("negative usd rate: " + d.tx_id);
    return d;
}

inline std::vector<DepositRecord> deposits_from_jsonl(std::string_view text) {
    std::vector<DepositRecord> out;
    for (const auto& line : split_lines(text)) {
        if (trim(line).empty()) continue;
        out.push_back(deposit_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

inline std::string revenue_to_csv(const RevenueReport& r) {
    std::string out = "abuse_type,addresses,total_btc,total_usd\n";
    auto emit = [&](const RevenueRow& row) {
        out += csv_row({row.abuse_type, std::to_string(row.address_count),
                        format_btc(row.total_satoshi),
                        std::to_string(usd_e12_to_whole(row.total_usd_e12))});
    };
    for (const auto& row : r.rows) emit(row);
    emit(r.remainder);
    emit(r.totals);
    return out;
}

// "investment | 196 | 10,601.76548108 | $251,082,116"
inline std::string format_revenue_row(const RevenueRow& row) {
    return row.abuse_type + " | " + format_thousands(row.address_count) + " | " +
           format_btc(row.total_satoshi) + " | " +
           format_usd_whole(usd_e12_to_whole(row.total_usd_e12));
}

inline std::string format_revenue_table(const RevenueReport& r) {
    std::string out = "Abuse | Addrs | BTC | USD\n";
    for (const auto& row : r.rows) out += format_revenue_row(row) + "\n";
    out += format_revenue_row(r.totals) + "\n";
    return out;
}

inline std::string loss_to_csv(const std::map<std::string, LossRow>& stats) {
    std::string out = "abuse_type,reports_all,reports_with_loss,total_usd,mean_usd,median_usd\n";
    for (const auto& [type, row] : stats) {
        out += csv_row({type, std::to_string(row.reports_all),
                        std::to_string(row.reports_with_loss), format_usd_cents(row.total_cents),
                        format_usd_cents(row.mean_cents), format_usd_cents(row.median_cents)});
    }
    return out;
}

// Mirrors the reported-losses table: All / w/Loss / Total / Avg. / Med.
inline std::string format_loss_table(const std::map<std::string, LossRow>& stats) {
    std::string out = "Abuse | All | w/Loss | Total | Avg. | Med.\n";
    std::vector<std::pair<std::string, LossRow>> rows(stats.begin(), stats.end());
    std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) {
        if (x.second.total_cents != y.second.total_cents)
            return x.second.total_cents > y.second.total_cents;
        return x.first < y.first;
    });
    for (const auto& [type, row] : rows) {
        out += type + " | " + format_thousands(row.reports_all) + " | " +
               format_thousands(row.reports_with_loss) + " | " +
               format_usd_whole(cents_to_whole(row.total_cents)) + " | " +
               format_usd_whole(cents_to_whole(row.mean_cents)) + " | " +
               format_usd_whole(cents_to_whole(row.median_cents)) + "\n";
    }
    return out;
}

}  // namespace abusepipe
