// Regenerates the checked-in fixtures under fixtures/: golden prompt
// renderings and the replay-backed pipeline inputs. Run from the repo root
// after changing the prompt template, the default taxonomy, or the fixture
// inputs, then review the diff before committing.

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "abusepipe/classify.hpp"
#include "abusepipe/gateway.hpp"
#include "abusepipe/ingest.hpp"
#include "abusepipe/prompt.hpp"
#include "abusepipe/taxonomy.hpp"

namespace ap = abusepipe;

namespace {

const char* kToyTaxonomyJson = R"([
  {
    "name": "abuse",
    "parent": "ROOT",
    "definition": "Any attempt to defraud, coerce, or steal from the person writing the report."
  },
  {
    "name": "notabuse",
    "parent": "ROOT",
    "definition": "The text does not describe abuse; it advertises a service or states an opinion."
  },
  {
    "name": "scam",
    "parent": "abuse",
    "definition": "An attempt to defraud the victim by first gaining their confidence."
  }
])";

const char* kGoldenDescription =
    "I received an email threatening to expose a private video unless I pay 0.05 BTC.";

void write_prompt_goldens(const std::string& root, const ap::Taxonomy& default_taxonomy) {
    std::filesystem::create_directories(root + "/fixtures/prompts");
    ap::write_file(root + "/fixtures/prompts/toy_taxonomy.json", std::string(kToyTaxonomyJson) + "\n");

    auto toy = ap::taxonomy_from_json(kToyTaxonomyJson);
    std::vector<const ap::AbuseType*> toy_all;
    for (const auto& t : toy.types()) toy_all.push_back(&t);
    ap::write_file(root + "/fixtures/prompts/toy_single.txt",
                   ap::render_query(kGoldenDescription, toy_all, std::nullopt, ap::Stage::single).text);

    std::vector<const ap::AbuseType*> all;
    for (const auto& t : default_taxonomy.types()) all.push_back(&t);
    ap::write_file(root + "/fixtures/prompts/default_one_query.txt",
                   ap::render_query(kGoldenDescription, all, std::nullopt, ap::Stage::single).text);
    ap::write_file(root + "/fixtures/prompts/default_l1.txt",
                   ap::render_query(kGoldenDescription, default_taxonomy.at_level(1), std::nullopt,
                                    ap::Stage::l1)
                       .text);
    ap::write_file(root + "/fixtures/prompts/default_ttb_l2.txt",
                   ap::render_query(kGoldenDescription, default_taxonomy.at_level(2),
                                    ap::ttb_other_class(), ap::Stage::l2)
                       .text);
    ap::write_file(root + "/fixtures/prompts/default_btt_l3.txt",
                   ap::render_query(kGoldenDescription, default_taxonomy.at_level(3),
                                    ap::btt_other_class(), ap::Stage::l3)
                       .text);
}

// Pipeline fixture inputs. Descriptions and their scripted top-to-bottom
// answer paths cover: a 3-stage leaf label, ttb_other fallback at L3 and at
// L2, a 1-stage notabuse, and label propagation across shared descriptions.
const char* kBaReports = R"({"report_id": "r1", "created": "2022-01-14", "address": "bc1qexample000001", "abuse_type": "Sextortion", "description": "I received an email saying they have a video of me watching adult sites and demand 500 dollars in bitcoin."}
{"report_id": "r2", "created": "2022-01-15", "address": "bc1qexample000002", "abuse_type": "Blackmail-Scam", "description": "I received an email saying they have a video of me watching adult sites and demand 500 dollars in bitcoin."}
{"report_id": "r3", "created": "2022-02-02", "address": "bc1qexample000001", "abuse_type": "Other", "description": "Fake giveaway impersonating the party"}
{"report_id": "r4", "created": "2022-03-10", "address": "bc1qexample000003", "abuse_type": "Ransomware", "description": "Check out this great investment platform, guaranteed profits!", "language": "en"}
{"report_id": "r5", "created": "2022-04-21", "address": "bc1qexample000004", "abuse_type": "Other", "description": "They hacked my exchange account and withdrew all my funds without permission."}
{"report_id": "r6", "created": "2022-05-30", "address": "bc1qexample000004", "abuse_type": "Other", "description": "Scammer promised to double any bitcoin sent to this address."}
{"report_id": "r7", "created": "2023-01-07", "address": "bc1qexample000005", "abuse_type": "Other", "description": "This address belongs to hackers from somewhere, I just know it."}
{"report_id": "r8", "created": "2023-02-11", "address": "bc1qexample000001", "abuse_type": "Sextortion", "description": "I received an email saying they have a video of me watching adult sites and demand 500 dollars in bitcoin."}
{"report_id": "r9", "created": "2023-03-01", "address": "bc1qexample000006", "abuse_type": "Other", "description": "   "}
{this line is not valid json}
{"report_id": "r11", "created": "2023-03-02", "abuse_type": "Other", "description": "Report without any address field."}
)";

const char* kBbbReports = R"({"scam_id": "b1", "date": "2023-06-01", "description": "I invested 1200 dollars into a crypto trading site and they refused to let me withdraw anything.", "dollars_lost": 1200.50, "location": "Denver, CO"}
{"scam_id": "b2", "date": "2023-06-12", "description": "A trading platform kept asking for more deposits before releasing my profits.", "dollars_lost": 0}
{"scam_id": "b3", "date": "2023-07-03", "description": "I met someone online who after months of chatting asked me to send bitcoin for a family emergency.", "dollars_lost": 300, "indicators": [{"kind": "email", "value": "example@example.test"}]}
{"scam_id": "b4", "date": "2023-07-19", "description": "They asked for an upfront fee to unlock a large inheritance payout in bitcoin."}
{"scam_id": "b5", "date": "2023-08-02", "description": "A trading platform kept asking for more deposits before releasing my profits.", "dollars_lost": 55, "location": "Tulsa, OK"}
)";

const char* kDeposits = R"({"address": "bc1qexample000001", "tx_id": "t1", "amount_satoshi": 50000000, "date": "2022-02-01", "usd_rate": 30000.00}
{"address": "bc1qexample000001", "tx_id": "t2", "amount_satoshi": 100000000, "date": "2022-02-03", "usd_rate": 20000.50, "sender_cluster": 3, "recipient_cluster": 9}
{"address": "bc1qexample000001", "tx_id": "t3", "amount_satoshi": 20000000, "date": "2022-02-04", "usd_rate": 21000.00, "sender_cluster": 7, "recipient_cluster": 7}
{"address": "bc1qexample000002", "tx_id": "t4", "amount_satoshi": 200000000, "date": "2022-03-05", "usd_rate": 10000.00}
{"address": "bc1qexample000004", "tx_id": "t5", "amount_satoshi": 5000000, "date": "2022-06-11", "usd_rate": 40000.00, "sender_cluster": 1, "recipient_cluster": 2}
{"address": "bc1qexample000005", "tx_id": "t6", "amount_satoshi": 31000000, "date": "2023-02-01", "usd_rate": 15000.25}
{"address": "bc1qexample000099", "tx_id": "t7", "amount_satoshi": 300000000, "date": "2023-04-20", "usd_rate": 5000.00}
{"address": "bc1qexample000001", "tx_id": "t8", "amount_satoshi": 25000000, "date": "2023-05-06", "usd_rate": 28000.00, "recipient_cluster": 12}
)";

const char* kPricing = R"({
  "replay-gpt4": {"usd_per_1m_input_tokens": 10.0, "usd_per_1m_output_tokens": 30.0}
}
)";

const char* kModel = "replay-gpt4";

std::map<std::string, std::vector<std::string>> answer_scripts() {
    return {
        {"I received an email saying they have a video of me watching adult sites and demand 500 "
         "dollars in bitcoin.",
         {"abuse", "extortion", "sextortion"}},
        {"Fake giveaway impersonating the party", {"abuse", "scam", "giveaway"}},
        {"Check out this great investment platform, guaranteed profits!", {"notabuse"}},
        {"They hacked my exchange account and withdrew all my funds without permission.",
         {"abuse", "unauthwithdrawal", "ttb_other"}},
        {"Scammer promised to double any bitcoin sent to this address.",
         {"abuse", "scam", "giveaway"}},
        {"This address belongs to hackers from somewhere, I just know it.", {"abuse", "ttb_other"}},
        {"I invested 1200 dollars into a crypto trading site and they refused to let me withdraw "
         "anything.",
         {"abuse", "scam", "investment"}},
        {"A trading platform kept asking for more deposits before releasing my profits.",
         {"abuse", "scam", "investment"}},
        {"I met someone online who after months of chatting asked me to send bitcoin for a family "
         "emergency.",
         {"abuse", "scam", "romance"}},
        {"They asked for an upfront fee to unlock a large inheritance payout in bitcoin.",
         {"abuse", "scam", "advancefee"}},
    };
}

std::string record_replay(const ap::Taxonomy& taxonomy, const std::vector<ap::Description>& descs) {
    auto scripts = answer_scripts();
    std::string records;
    for (const auto& desc : descs) {
        auto it = scripts.find(desc.text);
        if (it == scripts.end()) throw std::runtime_error("no answer script for: " + desc.text);
        ap::ScriptedMockBackend mock(it->second);
        mock.set_report_usage(false);  // recording estimates usage from word counts
        ap::RecordingBackend recording(mock);
        ap::GatewayConfig cfg;
        cfg.max_in_flight = 1;
        cfg.max_retries = 0;
        cfg.backoff_base = std::chrono::milliseconds(0);
        ap::Gateway gateway(recording, cfg);
        auto outcome = ap::classify_top_to_bottom(desc, taxonomy, gateway, kModel);
        if (outcome.status != ap::ClassificationOutcome::Status::ok) {
            throw std::runtime_error("scripted classification failed for: " + desc.text);
        }
        records += recording.records_jsonl();
    }
    return records;
}

const char* kGoldBa = R"(sha256,label
)";

}  // namespace

int main(int argc, char** argv) {
    std::string root = argc > 1 ? argv[1] : ".";
    auto taxonomy = ap::load_taxonomy(root + "/taxonomy/default.json");

    write_prompt_goldens(root, taxonomy);

    std::filesystem::create_directories(root + "/fixtures/pipeline");
    ap::write_file(root + "/fixtures/pipeline/ba_reports.jsonl", kBaReports);
    ap::write_file(root + "/fixtures/pipeline/bbb_reports.jsonl", kBbbReports);
    ap::write_file(root + "/fixtures/pipeline/deposits.jsonl", kDeposits);
    ap::write_file(root + "/fixtures/pipeline/exclusions.txt", "bc1qexample000002\n");
    ap::write_file(root + "/fixtures/pipeline/pricing.json", kPricing);

    auto ba = ap::parse_reports_text(kBaReports, ap::Source::bitcoinabuse);
    auto ba_descs = ap::dedup_descriptions(ba.reports);
    auto bbb = ap::parse_reports_text(kBbbReports, ap::Source::bbb);
    auto bbb_descs = ap::dedup_descriptions(bbb.reports);

    // Gold labels for evaluation: the d6 prediction (abuse) deliberately
    // disagrees with its gold label (notabuse) so metrics are non-trivial.
    std::map<std::string, std::string> gold = {
        {ba_descs[0].sha256, "sextortion"},   {ba_descs[1].sha256, "giveaway"},
        {ba_descs[2].sha256, "notabuse"},     {ba_descs[3].sha256, "unauthwithdrawal"},
        {ba_descs[4].sha256, "giveaway"},     {ba_descs[5].sha256, "notabuse"},
    };
    std::string gold_csv = kGoldBa;
    for (const auto& d : ba_descs) gold_csv += d.sha256 + "," + gold.at(d.sha256) + "\n";
    ap::write_file(root + "/fixtures/pipeline/gold_ba.csv", gold_csv);

    std::string replay = record_replay(taxonomy, ba_descs) + record_replay(taxonomy, bbb_descs);
    ap::write_file(root + "/fixtures/pipeline/replay.jsonl", replay);

    std::cout << "fixtures regenerated under " << root << "/fixtures ("
              << ba_descs.size() + bbb_descs.size() << " scripted descriptions)\n";
    return 0;
}
