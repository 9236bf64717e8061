// abusepipe — classify cryptocurrency abuse reports with an LLM over a
// hierarchical abuse taxonomy, and derive evaluation, clustering, tagging,
// revenue, and loss artifacts from the results.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "abusepipe/classify.hpp"
#include "abusepipe/cluster.hpp"
#include "abusepipe/csv.hpp"
#include "abusepipe/evaluate.hpp"
#include "abusepipe/gateway.hpp"
#include "abusepipe/http_backend.hpp"
#include "abusepipe/ingest.hpp"
#include "abusepipe/pca.hpp"
#include "abusepipe/tagchain.hpp"
#include "abusepipe/taxonomy.hpp"

namespace ap = abusepipe;

namespace {

struct IngestOptions {
    std::string schema;
    std::string input;
    std::string descriptions_out;
    std::string reports_out;
    std::string rejects_out;
    std::string stats_out;
};

int run_ingest(const IngestOptions& opt) {
    auto parsed = ap::parse_reports(opt.input, ap::source_from_name(opt.schema));
    auto descs = ap::dedup_descriptions(parsed.reports);
    ap::write_file(opt.descriptions_out, ap::descriptions_to_jsonl(descs));
    if (!opt.reports_out.empty()) {
        ap::write_file(opt.reports_out, ap::reports_to_jsonl(parsed.reports));
    }
    if (!opt.rejects_out.empty()) {
        ap::write_file(opt.rejects_out, ap::rejects_to_jsonl(parsed.rejects));
    }
    if (!opt.stats_out.empty()) {
        ap::write_file(opt.stats_out, ap::stats_to_json(ap::description_stats(descs)).dump(2) + "\n");
    }
    std::cout << "ingested " << parsed.reports.size() << " reports, " << descs.size()
              << " unique descriptions, " << parsed.rejects.size() << " rejects\n";
    return 0;
}

struct ClassifyOptions {
    std::string taxonomy = "taxonomy/default.json";
    std::string descriptions;
    std::string strategy = "top_to_bottom";
    std::string backend = "replay";
    std::string model = "gpt-4-0125-preview";
    std::string pricing;
    std::string fixtures;
    std::string mock_answer;
    std::string base_url;
    std::string api_path = "/v1/chat/completions";
    std::string outcomes_out;
    std::string cost_out;
    int concurrency = 4;
    int max_retries = 5;
    int parse_retries = 2;
    int backoff_ms = 1000;
    int max_output_tokens = 1024;
    double temperature = 0.0;
};

int run_classify(const ClassifyOptions& opt) {
    auto taxonomy = ap::load_taxonomy(opt.taxonomy);
    auto descs = ap::descriptions_from_jsonl(ap::read_file(opt.descriptions));
    auto pricing = ap::PricingTable::from_file(opt.pricing);
    auto strategy = ap::strategy_from_name(opt.strategy);

    std::unique_ptr<ap::Backend> backend;
    if (opt.backend == "replay") {
        if (opt.fixtures.empty()) throw std::runtime_error("replay backend needs --fixtures");
        backend = std::make_unique<ap::ReplayBackend>(ap::ReplayBackend::from_file(opt.fixtures));
    } else if (opt.backend == "mock") {
        if (opt.mock_answer.empty()) throw std::runtime_error("mock backend needs --mock-answer");
        std::string answer = opt.mock_answer;
        backend = std::make_unique<ap::ScriptedMockBackend>(
            [answer](const ap::CompletionRequest&) { return answer; });
    } else if (opt.backend == "http") {
        if (opt.base_url.empty()) throw std::runtime_error("http backend needs --base-url");
        ap::HttpBackendConfig cfg;
        cfg.base_url = opt.base_url;
        cfg.path = opt.api_path;
        backend = std::make_unique<ap::HttpChatBackend>(cfg);
    } else {
        throw std::runtime_error("unknown backend: " + opt.backend);
    }

    ap::GatewayConfig gw_cfg;
    gw_cfg.max_in_flight = opt.concurrency;
    gw_cfg.max_retries = opt.max_retries;
    gw_cfg.backoff_base = std::chrono::milliseconds(opt.backoff_ms);
    ap::Gateway gateway(*backend, gw_cfg);

    ap::ClassifyConfig cfg;
    cfg.parse_retries = opt.parse_retries;
    cfg.max_output_tokens = opt.max_output_tokens;
    cfg.temperature = opt.temperature;

    auto result = ap::classify_batch(descs, strategy, taxonomy, gateway, opt.model, pricing, cfg,
                                     opt.concurrency);
    ap::write_file(opt.outcomes_out, ap::outcomes_to_jsonl(result.outcomes));
    if (!opt.cost_out.empty()) ap::write_file(opt.cost_out, ap::cost_report_to_csv(result.cost));

    std::size_t unclassified = 0;
    for (const auto& o : result.outcomes) {
        if (o.status != ap::ClassificationOutcome::Status::ok) ++unclassified;
    }
    std::cout << "classified " << result.outcomes.size() - unclassified << "/"
              << result.outcomes.size() << " descriptions (" << unclassified << " unclassified)\n"
              << ap::format_cost_table(result.cost);
    return 0;
}

struct EvaluateOptions {
    std::string taxonomy = "taxonomy/default.json";
    std::string outcomes;
    std::string gold;
    std::string reports;
    std::string metrics_out;
    std::string confusion_out;
    std::string crosstab_out;
};

std::map<std::string, std::string> read_gold_csv(const std::string& path) {
    auto rows = ap::parse_csv(ap::read_file(path));
    std::map<std::string, std::string> gold;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i == 0 && !rows[i].empty() && rows[i][0] == "sha256") continue;  // header
        if (rows[i].size() < 2) throw std::runtime_error("gold csv row needs sha256,label");
        gold[rows[i][0]] = rows[i][1];
    }
    return gold;
}

int run_evaluate(const EvaluateOptions& opt) {
    auto taxonomy = ap::load_taxonomy(opt.taxonomy);
    auto outcomes = ap::outcomes_from_jsonl(ap::read_file(opt.outcomes));
    auto gold = read_gold_csv(opt.gold);

    std::vector<std::string> class_order;
    for (const auto& t : taxonomy.types()) class_order.push_back(t.name);

    std::map<std::string, std::string> predicted;
    std::size_t unclassified = 0;
    for (const auto& o : outcomes) {
        if (o.status == ap::ClassificationOutcome::Status::ok) {
            predicted[o.description_sha256] = o.label;
        } else {
            ++unclassified;
        }
    }
    // Unclassified outcomes stay out of the scoring denominators.
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& [sha, gold_label] : gold) {
        auto it = predicted.find(sha);
        if (it != predicted.end()) pairs.emplace_back(gold_label, it->second);
    }
    if (pairs.empty()) throw std::runtime_error("no scored (gold, predicted) pairs");

    auto cm = ap::confusion(pairs, class_order);
    auto report = ap::metrics(cm);
    ap::write_file(opt.metrics_out, ap::metrics_to_csv(report));
    ap::write_file(opt.confusion_out, ap::confusion_to_csv(cm));
    std::cout << "scored " << pairs.size() << " descriptions (" << unclassified
              << " unclassified excluded)\n"
              << ap::format_metrics_table(report);

    if (!opt.reports.empty() && !opt.crosstab_out.empty()) {
        auto reports = ap::reports_from_jsonl(ap::read_file(opt.reports));
        std::vector<std::pair<std::string, std::string>> user_pairs;
        for (const auto& r : reports) {
            if (!r.ba_type) continue;
            auto it = gold.find(ap::sha256_hex(r.description));
            if (it != gold.end()) user_pairs.emplace_back(*r.ba_type, it->second);
        }
        ap::write_file(opt.crosstab_out, ap::crosstab_to_csv(ap::crosstab_user_types(user_pairs, class_order)));
    }
    return 0;
}

struct ClusterOptions {
    std::string embeddings;
    std::string descriptions;
    std::string assignments_out;
    std::string terms_dir;
    std::string taxonomy = "taxonomy/default.json";
    std::string cluster_labels;
    std::string gold_out;
    double variance = 0.7;
    int min_cluster_size = 5;
    int min_samples = 2;
    std::string selection = "excess_of_mass";
    bool no_pca = false;
};

int run_cluster(const ClusterOptions& opt) {
    auto embeddings = ap::load_embeddings(opt.embeddings);
    ap::ClusterParams params;
    params.min_cluster_size = opt.min_cluster_size;
    params.min_samples = opt.min_samples;
    params.selection = opt.selection == "leaf" ? ap::ClusterParams::Selection::leaf
                                               : ap::ClusterParams::Selection::excess_of_mass;

    ap::ClusterAssignment assignment;
    if (opt.no_pca) {
        assignment = ap::hdbscan(embeddings, params);
    } else {
        auto pca = ap::pca_reduce(embeddings, opt.variance);
        std::cout << "pca kept " << pca.k << " components (explained ratio "
                  << pca.explained_ratio << ")\n";
        assignment = ap::hdbscan(pca.reduced, params);
    }
    ap::write_file(opt.assignments_out, ap::assignment_to_jsonl(assignment));
    std::cout << "clusters: " << assignment.cluster_sizes.size()
              << ", singletons: " << assignment.singleton_count << "\n";

    if (!opt.terms_dir.empty()) {
        if (opt.descriptions.empty()) {
            throw std::runtime_error("--terms-dir needs --descriptions for the texts");
        }
        auto descs = ap::descriptions_from_jsonl(ap::read_file(opt.descriptions));
        std::filesystem::create_directories(opt.terms_dir);
        for (const auto& [cluster_id, size] : assignment.cluster_sizes) {
            auto terms = ap::cluster_terms(assignment, descs, cluster_id);
            ap::write_file(opt.terms_dir + "/cluster_" + std::to_string(cluster_id) + ".csv",
                           ap::terms_to_csv(terms));
        }
    }

    // Ground-truth expansion: analyst-labeled clusters propagate their label
    // to every member description.
    if (!opt.cluster_labels.empty()) {
        if (opt.gold_out.empty()) throw std::runtime_error("--cluster-labels needs --gold-out");
        auto taxonomy = ap::load_taxonomy(opt.taxonomy);
        std::map<int, std::string> labels;
        auto rows = ap::parse_csv(ap::read_file(opt.cluster_labels));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i == 0 && !rows[i].empty() && rows[i][0] == "cluster_id") continue;
            if (rows[i].size() < 2) throw std::runtime_error("cluster labels csv needs cluster_id,label");
            taxonomy.at(rows[i][1]);  // labels must be taxonomy types
            labels[std::stoi(rows[i][0])] = rows[i][1];
        }
        auto gold = ap::propagate_cluster_labels(assignment, labels);
        std::string csv = "sha256,label\n";
        for (const auto& [sha, label] : gold) csv += ap::csv_row({sha, label});
        ap::write_file(opt.gold_out, csv);
        std::cout << "propagated " << labels.size() << " cluster labels to " << gold.size()
                  << " descriptions\n";
    }
    return 0;
}

struct TagOptions {
    std::string taxonomy = "taxonomy/default.json";
    std::string reports;
    std::string outcomes;
    std::string tags_out;
    std::string source = "abusepipe";
};

int run_tag(const TagOptions& opt) {
    auto taxonomy = ap::load_taxonomy(opt.taxonomy);
    auto reports = ap::reports_from_jsonl(ap::read_file(opt.reports));
    auto outcomes = ap::outcomes_from_jsonl(ap::read_file(opt.outcomes));
    auto tags = ap::tag_addresses(taxonomy, reports, outcomes, opt.source);
    ap::write_file(opt.tags_out, ap::tags_to_csv(tags));
    std::cout << "tagged " << tags.size() << " addresses\n";
    return 0;
}

struct RevenueOptions {
    std::string tags;
    std::string deposits;
    std::string exclusions;
    std::string revenue_out;
    std::string outcomes;
    std::string reports;
    std::string loss_out;
};

int run_revenue(const RevenueOptions& opt) {
    auto tags = ap::tags_from_csv(ap::read_file(opt.tags));
    auto deposits = ap::filter_self_deposits(ap::deposits_from_jsonl(ap::read_file(opt.deposits)));
    std::vector<std::string> exclusions;
    if (!opt.exclusions.empty()) {
        for (const auto& line : ap::split_lines(ap::read_file(opt.exclusions))) {
            auto addr = ap::trim(line);
            if (!addr.empty()) exclusions.emplace_back(addr);
        }
    }
    auto report = ap::revenue_by_type(tags, deposits, exclusions);
    ap::write_file(opt.revenue_out, ap::revenue_to_csv(report));
    std::cout << ap::format_revenue_table(report);

    if (!opt.loss_out.empty()) {
        if (opt.outcomes.empty() || opt.reports.empty()) {
            throw std::runtime_error("--loss-out needs --outcomes and --reports");
        }
        auto outcomes = ap::outcomes_from_jsonl(ap::read_file(opt.outcomes));
        auto reports = ap::reports_from_jsonl(ap::read_file(opt.reports));
        auto losses = ap::loss_stats_by_type(outcomes, reports);
        ap::write_file(opt.loss_out, ap::loss_to_csv(losses));
        std::cout << ap::format_loss_table(losses);
    }
    return 0;
}

struct CostReportOptions {
    std::string outcomes;
    std::string pricing;
    std::string cost_out;
};

int run_cost_report(const CostReportOptions& opt) {
    auto outcomes = ap::outcomes_from_jsonl(ap::read_file(opt.outcomes));
    auto pricing = ap::PricingTable::from_file(opt.pricing);
    std::vector<ap::UsageEntry> usages;
    for (const auto& o : outcomes) {
        for (const auto& entry : o.trace) usages.push_back({o.model_id, entry.usage});
        for (const auto& u : o.retry_usages) usages.push_back({o.model_id, u});
    }
    auto report = ap::accumulate_cost(usages, pricing);
    ap::write_file(opt.cost_out, ap::cost_report_to_csv(report));
    std::cout << ap::format_cost_table(report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"abusepipe: LLM classification pipeline for cryptocurrency abuse reports"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Optional config file; command-line flags override it");

    IngestOptions ingest_opt;
    auto* ingest = app.add_subcommand("ingest", "Parse raw report files and dedup descriptions");
    ingest->add_option("--schema", ingest_opt.schema, "Input schema: bitcoinabuse or bbb")
        ->required()
        ->check(CLI::IsMember({"bitcoinabuse", "bbb"}));
    ingest->add_option("--input", ingest_opt.input, "Raw reports JSONL")->required();
    ingest->add_option("--descriptions-out", ingest_opt.descriptions_out)->required();
    ingest->add_option("--reports-out", ingest_opt.reports_out, "Normalized reports JSONL");
    ingest->add_option("--rejects-out", ingest_opt.rejects_out, "Rejected records with reasons");
    ingest->add_option("--stats-out", ingest_opt.stats_out, "Description stats JSON");

    ClassifyOptions classify_opt;
    auto* classify = app.add_subcommand("classify", "Classify descriptions against the taxonomy");
    classify->add_option("--taxonomy", classify_opt.taxonomy);
    classify->add_option("--descriptions", classify_opt.descriptions)->required();
    classify->add_option("--strategy", classify_opt.strategy)
        ->check(CLI::IsMember({"one_query", "top_to_bottom", "bottom_to_top"}));
    classify->add_option("--backend", classify_opt.backend)
        ->check(CLI::IsMember({"replay", "mock", "http"}));
    classify->add_option("--model", classify_opt.model);
    classify->add_option("--pricing", classify_opt.pricing)->required();
    classify->add_option("--fixtures", classify_opt.fixtures, "Replay fixture JSONL");
    classify->add_option("--mock-answer", classify_opt.mock_answer, "Constant mock answer token");
    classify->add_option("--base-url", classify_opt.base_url, "HTTP backend base URL");
    classify->add_option("--api-path", classify_opt.api_path);
    classify->add_option("--outcomes-out", classify_opt.outcomes_out)->required();
    classify->add_option("--cost-out", classify_opt.cost_out);
    classify->add_option("--concurrency", classify_opt.concurrency)->check(CLI::PositiveNumber);
    classify->add_option("--max-retries", classify_opt.max_retries);
    classify->add_option("--parse-retries", classify_opt.parse_retries);
    classify->add_option("--backoff-ms", classify_opt.backoff_ms);
    classify->add_option("--max-output-tokens", classify_opt.max_output_tokens);
    classify->add_option("--temperature", classify_opt.temperature);

    EvaluateOptions evaluate_opt;
    auto* evaluate = app.add_subcommand("evaluate", "Score outcomes against gold labels");
    evaluate->add_option("--taxonomy", evaluate_opt.taxonomy);
    evaluate->add_option("--outcomes", evaluate_opt.outcomes)->required();
    evaluate->add_option("--gold", evaluate_opt.gold, "CSV of sha256,label")->required();
    evaluate->add_option("--reports", evaluate_opt.reports, "Normalized reports for the crosstab");
    evaluate->add_option("--metrics-out", evaluate_opt.metrics_out)->required();
    evaluate->add_option("--confusion-out", evaluate_opt.confusion_out)->required();
    evaluate->add_option("--crosstab-out", evaluate_opt.crosstab_out);

    ClusterOptions cluster_opt;
    auto* cluster = app.add_subcommand("cluster", "PCA + HDBSCAN over description embeddings");
    cluster->add_option("--embeddings", cluster_opt.embeddings)->required();
    cluster->add_option("--descriptions", cluster_opt.descriptions, "For term tables");
    cluster->add_option("--assignments-out", cluster_opt.assignments_out)->required();
    cluster->add_option("--terms-dir", cluster_opt.terms_dir, "Per-cluster term CSV directory");
    cluster->add_option("--variance", cluster_opt.variance, "PCA explained-variance threshold");
    cluster->add_option("--min-cluster-size", cluster_opt.min_cluster_size);
    cluster->add_option("--min-samples", cluster_opt.min_samples);
    cluster->add_option("--selection", cluster_opt.selection)
        ->check(CLI::IsMember({"excess_of_mass", "leaf"}));
    cluster->add_flag("--no-pca", cluster_opt.no_pca, "Cluster the raw embeddings");
    cluster->add_option("--taxonomy", cluster_opt.taxonomy, "For validating --cluster-labels");
    cluster->add_option("--cluster-labels", cluster_opt.cluster_labels,
                        "CSV of cluster_id,label to propagate to members");
    cluster->add_option("--gold-out", cluster_opt.gold_out, "Propagated sha256,label CSV");

    TagOptions tag_opt;
    auto* tag = app.add_subcommand("tag", "Majority-vote abuse tags per address");
    tag->add_option("--taxonomy", tag_opt.taxonomy);
    tag->add_option("--reports", tag_opt.reports)->required();
    tag->add_option("--outcomes", tag_opt.outcomes)->required();
    tag->add_option("--tags-out", tag_opt.tags_out)->required();
    tag->add_option("--source", tag_opt.source, "Provenance string stored with each tag");

    RevenueOptions revenue_opt;
    auto* revenue = app.add_subcommand("revenue", "Revenue per abuse type; optional loss stats");
    revenue->add_option("--tags", revenue_opt.tags)->required();
    revenue->add_option("--deposits", revenue_opt.deposits)->required();
    revenue->add_option("--exclusions", revenue_opt.exclusions, "Internal wallets, one per line");
    revenue->add_option("--revenue-out", revenue_opt.revenue_out)->required();
    revenue->add_option("--outcomes", revenue_opt.outcomes, "For --loss-out");
    revenue->add_option("--reports", revenue_opt.reports, "For --loss-out");
    revenue->add_option("--loss-out", revenue_opt.loss_out, "Per-type loss statistics CSV");

    CostReportOptions cost_opt;
    auto* cost = app.add_subcommand("cost-report", "Re-aggregate an outcomes file under a pricing file");
    cost->add_option("--outcomes", cost_opt.outcomes)->required();
    cost->add_option("--pricing", cost_opt.pricing)->required();
    cost->add_option("--cost-out", cost_opt.cost_out)->required();

    CLI11_PARSE(app, argc, argv);

    std::string name;
    try {
        if (ingest->parsed()) { name = "ingest"; return run_ingest(ingest_opt); }
        if (classify->parsed()) { name = "classify"; return run_classify(classify_opt); }
        if (evaluate->parsed()) { name = "evaluate"; return run_evaluate(evaluate_opt); }
        if (cluster->parsed()) { name = "cluster"; return run_cluster(cluster_opt); }
        if (tag->parsed()) { name = "tag"; return run_tag(tag_opt); }
        if (revenue->parsed()) { name = "revenue"; return run_revenue(revenue_opt); }
        if (cost->parsed()) { name = "cost-report"; return run_cost_report(cost_opt); }
    } catch (const std::exception& e) {
        nlohmann::ordered_json err{{"error", e.what()}, {"subcommand", name}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
