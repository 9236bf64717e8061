#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "abusepipe/csv.hpp"

namespace abusepipe {

struct EvaluateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// counts[i][j] = samples with gold class i predicted as class j.
struct ConfusionMatrix {
    std::vector<std::string> classes;
    std::vector<std::vector<int64_t>> counts;

    int64_t total() const {
        int64_t t = 0;
        for (const auto& row : counts)
            for (int64_t c : row) t += c;
        return t;
    }
};

// Class list = union of observed classes, ordered by `class_order` (the
// taxonomy config order). Unknown classes are an error: gold and predicted
// labels must come from one taxonomy.
inline ConfusionMatrix confusion(std::span<const std::pair<std::string, std::string>> pairs,
                                 std::span<const std::string> class_order) {
    std::map<std::string, std::size_t> order_index;
    for (std::size_t i = 0; i < class_order.size(); ++i) order_index[class_order[i]] = i;

    std::map<std::size_t, std::size_t> observed;  // order index -> matrix index (filled later)
    for (const auto& [gold, predicted] : pairs) {
        for (const std::string* name : {&gold, &predicted}) {
            auto it = order_index.find(*name);
            if (it == order_index.end()) throw EvaluateError("class not in taxonomy order: " + *name);
            observed.emplace(it->second, 0);
        }
    }
    ConfusionMatrix cm;
    std::size_t next = 0;
    for (auto& [order_pos, matrix_pos] : observed) {
        matrix_pos = next++;
        cm.classes.push_back(class_order[order_pos]);
    }
    cm.counts.assign(cm.classes.size(), std::vector<int64_t>(cm.classes.size(), 0));
    for (const auto& [gold, predicted] : pairs) {
        std::size_t i = observed.at(order_index.at(gold));
        std::size_t j = observed.at(order_index.at(predicted));
        ++cm.counts[i][j];
    }
    return cm;
}

struct ClassMetrics {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    int64_t support = 0;
};

struct AverageMetrics {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

struct MetricsReport {
    std::vector<std::pair<std::string, ClassMetrics>> per_class;
    AverageMetrics weighted;  // classes weighted by support
    AverageMetrics macro;     // unweighted mean over classes with support > 0
};

inline double support_weighted_mean(std::span<const double> values,
                                    std::span<const int64_t> supports) {
    double num = 0;
    int64_t den = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        num += values[i] * static_cast<double>(supports[i]);
        den += supports[i];
    }
    return den > 0 ? num / static_cast<double>(den) : 0.0;
}

// Per class: P = diag/column sum (0 on empty column), R = diag/row sum,
// F1 = harmonic mean (0 when P+R = 0). Zero-support classes are excluded
// from the macro average, mirroring the "-" entries convention.
inline MetricsReport metrics(const ConfusionMatrix& cm) {
    if (cm.classes.empty()) throw EvaluateError("metrics over an empty confusion matrix");
    const std::size_t k = cm.classes.size();
    MetricsReport report;

    std::vector<double> ps, rs, fs;
    std::vector<int64_t> supports;
    for (std::size_t i = 0; i < k; ++i) {
        int64_t row_sum = 0, col_sum = 0;
        for (std::size_t j = 0; j < k; ++j) {
            row_sum += cm.counts[i][j];
            col_sum += cm.counts[j][i];
        }
        ClassMetrics cmx;
        cmx.support = row_sum;
        int64_t tp = cm.counts[i][i];
        cmx.precision = col_sum > 0 ? static_cast<double>(tp) / static_cast<double>(col_sum) : 0.0;
        cmx.recall = row_sum > 0 ? static_cast<double>(tp) / static_cast<double>(row_sum) : 0.0;
        cmx.f1 = (cmx.precision + cmx.recall) > 0
                     ? 2 * cmx.precision * cmx.recall / (cmx.precision + cmx.recall)
                     : 0.0;
        report.per_class.emplace_back(cm.classes[i], cmx);
        ps.push_back(cmx.precision);
        rs.push_back(cmx.recall);
        fs.push_back(cmx.f1);
        supports.push_back(cmx.support);
    }

    report.weighted.precision = support_weighted_mean(ps, supports);
    report.weighted.recall = support_weighted_mean(rs, supports);
    report.weighted.f1 = support_weighted_mean(fs, supports);

    double mp = 0, mr = 0, mf = 0;
    int64_t populated = 0;
    for (std::size_t i = 0; i < k; ++i) {
        if (supports[i] == 0) continue;
        mp += ps[i];
        mr += rs[i];
        mf += fs[i];
        ++populated;
    }
    if (populated > 0) {
        report.macro.precision = mp / static_cast<double>(populated);
        report.macro.recall = mr / static_cast<double>(populated);
        report.macro.f1 = mf / static_cast<double>(populated);
    }
    return report;
}

// Row-normalized crosstab of user-selected types against gold taxonomy
// labels. Each row sums to one.
struct Crosstab {
    std::vector<std::string> row_labels;  // user-selected types
    std::vector<std::string> col_labels;  // taxonomy labels
    std::vector<std::vector<double>> fractions;
    std::vector<int64_t> row_totals;
};

inline Crosstab crosstab_user_types(std::span<const std::pair<std::string, std::string>> pairs,
                                    std::span<const std::string> col_order = {}) {
    std::map<std::string, std::map<std::string, int64_t>> counts;
    std::map<std::string, std::size_t> col_seen;
    for (const auto& [user_type, gold] : pairs) {
        ++counts[user_type][gold];
        col_seen.emplace(gold, col_seen.size());
    }
    Crosstab x;
    for (const auto& name : col_order) {
        if (col_seen.count(name)) x.col_labels.push_back(name);
    }
    if (x.col_labels.empty()) {
        for (const auto& [name, pos] : col_seen) x.col_labels.push_back(name);
    }
    for (const auto& [row, row_counts] : counts) {
        x.row_labels.push_back(row);
        int64_t total = 0;
        for (const auto& [col, c] : row_counts) total += c;
        x.row_totals.push_back(total);
        std::vector<double> fracs;
        for (const auto& col : x.col_labels) {
            auto it = row_counts.find(col);
            int64_t c = it == row_counts.end() ? 0 : it->second;
            fracs.push_back(static_cast<double>(c) / static_cast<double>(total));
        }
        x.fractions.push_back(std::move(fracs));
    }
    return x;
}

// --- emitters ---------------------------------------------------------------

namespace detail {
inline std::string fmt_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}
}  // namespace detail

inline std::string metrics_to_csv(const MetricsReport& r) {
    std::string out = "class,precision,recall,f1,support\n";
    for (const auto& [name, m] : r.per_class) {
        out += csv_row({name, detail::fmt_metric(m.precision), detail::fmt_metric(m.recall),
                        detail::fmt_metric(m.f1), std::to_string(m.support)});
    }
    out += csv_row({"weighted_average", detail::fmt_metric(r.weighted.precision),
                    detail::fmt_metric(r.weighted.recall), detail::fmt_metric(r.weighted.f1), ""});
    out += csv_row({"macro_average", detail::fmt_metric(r.macro.precision),
                    detail::fmt_metric(r.macro.recall), detail::fmt_metric(r.macro.f1), ""});
    return out;
}

// Human-readable table following the papers' column layout:
// per-class P/R/F1, then Weighted Average and Macro Average rows.
inline std::string format_metrics_table(const MetricsReport& r) {
    auto fmt2 = [](double v) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        return std::string(buf);
    };
    std::string out = "Category | Prec. | Rec. | F1 | Support\n";
    for (const auto& [name, m] : r.per_class) {
        if (m.support == 0) {
            out += name + " | - | - | - | 0\n";
            continue;
        }
        out += name + " | " + fmt2(m.precision) + " | " + fmt2(m.recall) + " | " + fmt2(m.f1) +
               " | " + std::to_string(m.support) + "\n";
    }
    out += "Weighted Average | " + fmt2(r.weighted.precision) + " | " + fmt2(r.weighted.recall) +
           " | " + fmt2(r.weighted.f1) + " |\n";
    out += "Macro Average | " + fmt2(r.macro.precision) + " | " + fmt2(r.macro.recall) + " | " +
           fmt2(r.macro.f1) + " |\n";
    return out;
}

inline std::string confusion_to_csv(const ConfusionMatrix& cm) {
    std::vector<std::string> header{"gold\\predicted"};
    for (const auto& c : cm.classes) header.push_back(c);
    std::string out = csv_row(header);
    for (std::size_t i = 0; i < cm.classes.size(); ++i) {
        std::vector<std::string> row{cm.classes[i]};
        for (int64_t v : cm.counts[i]) row.push_back(std::to_string(v));
        out += csv_row(row);
    }
    return out;
}

inline std::string crosstab_to_csv(const Crosstab& x) {
    std::vector<std::string> header{"user_type"};
    for (const auto& c : x.col_labels) header.push_back(c);
    header.push_back("reports");
    std::string out = csv_row(header);
    for (std::size_t i = 0; i < x.row_labels.size(); ++i) {
        std::vector<std::string> row{x.row_labels[i]};
        for (double f : x.fractions[i]) row.push_back(detail::fmt_metric(f));
        row.push_back(std::to_string(x.row_totals[i]));
        out += csv_row(row);
    }
    return out;
}

}  // namespace abusepipe
