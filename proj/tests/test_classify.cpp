#include <gtest/gtest.h>

#include <algorithm>

#include "abusepipe/classify.hpp"

namespace ap = abusepipe;

namespace {

const ap::Taxonomy& default_taxonomy() {
    static ap::Taxonomy t =
        ap::load_taxonomy(std::string(ABUSEPIPE_SOURCE_DIR) + "/taxonomy/default.json");
    return t;
}

ap::Description desc(const std::string& text) {
    ap::Description d;
    d.text = text;
    d.sha256 = ap::sha256_hex(text);
    d.word_count = ap::word_count(text);
    return d;
}

ap::GatewayConfig fast_config() {
    ap::GatewayConfig cfg;
    cfg.max_in_flight = 8;
    cfg.max_retries = 0;
    cfg.sleeper = [](std::chrono::milliseconds) {};
    return cfg;
}

bool offers(const ap::CompletionRequest& req, const std::string& name) {
    const auto& cs = req.prompt.class_names;
    return std::find(cs.begin(), cs.end(), name) != cs.end();
}

std::string expected_prompt_sha(const std::string& text,
                                const std::vector<const ap::AbuseType*>& classes,
                                std::optional<ap::SyntheticClass> synthetic, ap::Stage stage) {
    return ap::sha256_hex(ap::render_query(text, classes, synthetic, stage).text);
}

}  // namespace

TEST(ClassifyOneQuery, SingleStageWithAllDefinitions) {
    ap::ScriptedMockBackend mock({"sextortion"});
    ap::Gateway gw(mock, fast_config());
    auto out = ap::classify_one_query(desc("webcam video threat"), default_taxonomy(), gw, "m");
    ASSERT_EQ(out.status, ap::ClassificationOutcome::Status::ok);
    EXPECT_EQ(out.label, "sextortion");
    ASSERT_EQ(out.trace.size(), 1u);
    EXPECT_EQ(out.trace[0].stage, ap::Stage::single);
    EXPECT_EQ(out.attempts, 1);
    EXPECT_EQ(mock.calls(), 1);

    // The single prompt offers all 19 classes in config order, no synthetic.
    std::vector<const ap::AbuseType*> all;
    for (const auto& t : default_taxonomy().types()) all.push_back(&t);
    EXPECT_EQ(out.trace[0].prompt_sha256,
              expected_prompt_sha("webcam video threat", all, std::nullopt, ap::Stage::single));
}

TEST(ClassifyOneQuery, PersistentBadAnswerBecomesUnclassified) {
    // The root symbol is never an allowed class, so parsing fails each time.
    ap::ScriptedMockBackend mock(
        std::vector<std::string>{"\xE2\x8A\xA4", "\xE2\x8A\xA4", "\xE2\x8A\xA4"});
    ap::Gateway gw(mock, fast_config());
    auto out = ap::classify_one_query(desc("text"), default_taxonomy(), gw, "m");
    EXPECT_EQ(out.status, ap::ClassificationOutcome::Status::unclassified);
    EXPECT_EQ(out.attempts, 3);  // initial ask + 2 identical re-asks
    EXPECT_EQ(mock.calls(), 3);
    EXPECT_TRUE(out.label.empty());
    ASSERT_EQ(out.trace.size(), 1u);
    EXPECT_TRUE(out.trace[0].parsed_answer.empty());
    EXPECT_EQ(out.retry_usages.size(), 2u);
}

TEST(ClassifyOneQuery, RecoversAfterOneBadAnswer) {
    ap::ScriptedMockBackend mock(std::vector<std::string>{"not a class", "giveaway"});
    ap::Gateway gw(mock, fast_config());
    auto out = ap::classify_one_query(desc("text"), default_taxonomy(), gw, "m");
    ASSERT_EQ(out.status, ap::ClassificationOutcome::Status::ok);
    EXPECT_EQ(out.label, "giveaway");
    EXPECT_EQ(out.attempts, 2);
    EXPECT_EQ(out.retry_usages.size(), 1u);  // the failed attempt still costs
}

TEST(ClassifyTopToBottom, NotabuseStopsAtOneStage) {
    ap::ScriptedMockBackend mock({"notabuse"});
    ap::Gateway gw(mock, fast_config());
    auto out = ap::classify_top_to_bottom(desc("buy my service"), default_taxonomy(), gw, "m");
    ASSERT_EQ(out.status, ap::ClassificationOutcome::Status::ok);
    EXPECT_EQ(out.label, "notabuse");
    ASSERT_EQ(out.trace.size(), 1u);
    EXPECT_EQ(out.trace[0].stage, ap::Stage::l1);
}

TEST(ClassifyTopToBottom, TtbOtherAtL2OutputsAbuse) {
    ap::ScriptedMockBackend mock({"abuse", "ttb_other"});
    ap::Gateway gw(mock, fast_config());
    auto out = ap::classify_top_to_bottom(desc("vague abuse"), default_taxonomy(), gw, "m");
    ASSERT_EQ(out.status, ap::ClassificationOutcome::Status::ok);
    EXPECT_EQ(out.label, "abuse");
    EXPECT_EQ(out.trace.size(), 2u);
}

TEST(ClassifyTopToBottom, ThreeStageLeafWithExactClassSets) {
    const std::string text = "they have a webcam video of me";
    ap::ScriptedMockBackend mock({"abuse", "extortion", "sextortion"});
    ap::Gateway gw(mock, fast_config());
    const auto& t = default_taxonomy();
    auto out = ap::classify_top_to_bottom(desc(text), t, gw, "m");
    ASSERT_EQ(out.status, ap::ClassificationOutcome::Status::ok);
    EXPECT_EQ(out.label, "sextortion");
    ASSERT_EQ(out.trace.size(), 3u);
    EXPECT_EQ(out.trace[0].stage, ap::Stage::l1);
    EXPECT_EQ(out.trace[1].stage, ap::Stage::l2);
    EXPECT_EQ(out.trace[2].stage, ap::Stage::l3);

    // Each stage offered exactly the specified class set.
    EXPECT_EQ(out.trace[0].prompt_sha256,
              expected_prompt_sha(text, t.at_level(1), std::nullopt, ap::Stage::l1));
    EXPECT_EQ(out.trace[1].prompt_sha256,
              expected_prompt_sha(text, t.at_level(2), ap::ttb_other_class(), ap::Stage::l2));
    EXPECT_EQ(out.trace[2].prompt_sha256,
              expected_prompt_sha(text, t.children_of("extortion"), ap::ttb_other_class(),
                                  ap::Stage::l3));
    EXPECT_EQ(t.children_of("extortion").size(), 5u);  // only the 5 extortion children
}

TEST(ClassifyTopToBottom, TtbOtherAtL3FallsBackToParent) {
    ap::ScriptedMockBackend mock({"abuse", "unauthwithdrawal", "ttb_other"});
    ap::Gateway gw(mock, fast_config());
    auto out = ap::classify_top_to_bottom(desc("funds moved without consent"), default_taxonomy(),
                                          gw, "m");
    ASSERT_EQ(out.status, ap::ClassificationOutcome::Status::ok);
    EXPECT_EQ(out.label, "unauthwithdrawal");
    EXPECT_EQ(out.trace.size(), 3u);
}

TEST(ClassifyTopToBottom, ParseFailureMidChainKeepsEarlierStages) {
    ap::ScriptedMockBackend mock(
        std::vector<std::string>{"abuse", "nonsense", "nonsense", "nonsense"});
    ap::Gateway gw(mock, fast_config());
    auto out = ap::classify_top_to_bottom(desc("text"), default_taxonomy(), gw, "m");
    EXPECT_EQ(out.status, ap::ClassificationOutcome::Status::unclassified);
    ASSERT_EQ(out.trace.size(), 2u);  // successful L1 + failed final L2 attempt
    EXPECT_EQ(out.trace[0].parsed_answer, "abuse");
    EXPECT_TRUE(out.trace[1].parsed_answer.empty());
    EXPECT_EQ(out.attempts, 4);
}

TEST(ClassifyBottomToTop, LeafAnswerStopsImmediately) {
    ap::ScriptedMockBackend mock({"investment"});
    ap::Gateway gw(mock, fast_config());
    const auto& t = default_taxonomy();
    auto out = ap::classify_bottom_to_top(desc("guaranteed profits"), t, gw, "m");
    ASSERT_EQ(out.status, ap::ClassificationOutcome::Status::ok);
    EXPECT_EQ(out.label, "investment");
    ASSERT_EQ(out.trace.size(), 1u);
    EXPECT_EQ(out.trace[0].stage, ap::Stage::l3);
    EXPECT_EQ(out.trace[0].prompt_sha256,
              expected_prompt_sha("guaranteed profits", t.at_level(3), ap::btt_other_class(),
                                  ap::Stage::l3));
    EXPECT_EQ(t.at_level(3).size(), 13u);  // all 13 leaves offered
}

TEST(ClassifyBottomToTop, AscendsToL2) {
    ap::ScriptedMockBackend mock({"btt_other", "scam"});
    ap::Gateway gw(mock, fast_config());
    auto out = ap::classify_bottom_to_top(desc("some scam"), default_taxonomy(), gw, "m");
    ASSERT_EQ(out.status, ap::ClassificationOutcome::Status::ok);
    EXPECT_EQ(out.label, "scam");
    EXPECT_EQ(out.trace.size(), 2u);
}

TEST(ClassifyBottomToTop, AscendsAllTheWayToL1) {
    ap::ScriptedMockBackend mock({"btt_other", "btt_other", "notabuse"});
    ap::Gateway gw(mock, fast_config());
    const auto& t = default_taxonomy();
    auto out = ap::classify_bottom_to_top(desc("just an ad"), t, gw, "m");
    ASSERT_EQ(out.status, ap::ClassificationOutcome::Status::ok);
    EXPECT_EQ(out.label, "notabuse");
    ASSERT_EQ(out.trace.size(), 3u);
    // The final L1 stage offers only the L1 classes, no synthetic.
    EXPECT_EQ(out.trace[2].prompt_sha256,
              expected_prompt_sha("just an ad", t.at_level(1), std::nullopt, ap::Stage::l1));
}

TEST(ClassifyBatch, EmptyInputYieldsEmptyOutputAndZeroCost) {
    ap::ScriptedMockBackend mock([](const ap::CompletionRequest&) { return "abuse"; });
    ap::Gateway gw(mock, fast_config());
    auto pricing = ap::PricingTable::from_json(
        R"({"m": {"usd_per_1m_input_tokens": 1, "usd_per_1m_output_tokens": 1}})");
    auto result = ap::classify_batch({}, ap::Strategy::one_query, default_taxonomy(), gw, "m",
                                     pricing, {}, 4);
    EXPECT_TRUE(result.outcomes.empty());
    EXPECT_EQ(result.cost.totals.queries, 0);
}

TEST(ClassifyBatch, PreservesInputOrderUnderConcurrency) {
    ap::ScriptedMockBackend mock([](const ap::CompletionRequest& req) {
        // Vary latency so completion order scrambles.
        std::this_thread::sleep_for(std::chrono::milliseconds(req.prompt.text.size() % 7));
        return std::string("giveaway");
    });
    ap::Gateway gw(mock, fast_config());
    auto pricing = ap::PricingTable::from_json(
        R"({"m": {"usd_per_1m_input_tokens": 1, "usd_per_1m_output_tokens": 1}})");
    std::vector<ap::Description> descs;
    for (int i = 0; i < 40; ++i) descs.push_back(desc("text number " + std::to_string(i)));
    auto result = ap::classify_batch(descs, ap::Strategy::one_query, default_taxonomy(), gw, "m",
                                     pricing, {}, 8);
    ASSERT_EQ(result.outcomes.size(), descs.size());
    for (std::size_t i = 0; i < descs.size(); ++i) {
        EXPECT_EQ(result.outcomes[i].description_sha256, descs[i].sha256);
    }
    EXPECT_EQ(result.cost.totals.queries, 40);
    EXPECT_EQ(mock.calls(), 40);
}

TEST(ClassifyBatch, QueryCountBounds) {
    const int n = 25;
    std::vector<ap::Description> descs;
    for (int i = 0; i < n; ++i) descs.push_back(desc("report " + std::to_string(i)));
    auto pricing = ap::PricingTable::from_json(
        R"({"m": {"usd_per_1m_input_tokens": 1, "usd_per_1m_output_tokens": 1}})");

    {  // top_to_bottom with notabuse at L1: exactly N queries
        ap::ScriptedMockBackend mock([](const ap::CompletionRequest&) { return "notabuse"; });
        ap::Gateway gw(mock, fast_config());
        ap::classify_batch(descs, ap::Strategy::top_to_bottom, default_taxonomy(), gw, "m",
                           pricing, {}, 4);
        EXPECT_EQ(mock.calls(), n);
    }
    {  // full descent: exactly 3N, within the [N, 3N] bound
        ap::ScriptedMockBackend mock([](const ap::CompletionRequest& req) {
            if (offers(req, "notabuse") && req.prompt.class_names.size() == 2) return "abuse";
            if (offers(req, "extortion")) return "extortion";
            return "sextortion";
        });
        ap::Gateway gw(mock, fast_config());
        auto result = ap::classify_batch(descs, ap::Strategy::top_to_bottom, default_taxonomy(),
                                         gw, "m", pricing, {}, 4);
        EXPECT_EQ(mock.calls(), 3 * n);
        for (const auto& o : result.outcomes) EXPECT_EQ(o.label, "sextortion");
    }
}

TEST(ClassifyBatch, MissingReplayRecordBecomesUnclassifiedNotDropped) {
    auto d1 = desc("covered text");
    auto d2 = desc("uncovered text");
    const auto& t = default_taxonomy();
    std::vector<const ap::AbuseType*> all;
    for (const auto& type : t.types()) all.push_back(&type);
    auto prompt = ap::render_query(d1.text, all, std::nullopt, ap::Stage::single);
    std::string fixture =
        R"({"model_id": "m", "prompt_sha256": ")" + ap::sha256_hex(prompt.text) +
        R"(", "raw_text": "{\"answer\": \"scam\", \"reasoning\": \"\"}", "usage": {"prompt_tokens": 5, "completion_tokens": 5}})" +
        "\n";
    auto backend = ap::ReplayBackend::from_jsonl(fixture);
    ap::Gateway gw(backend, fast_config());
    auto pricing = ap::PricingTable::from_json(
        R"({"m": {"usd_per_1m_input_tokens": 1, "usd_per_1m_output_tokens": 1}})");
    auto result = ap::classify_batch(std::vector<ap::Description>{d1, d2},
                                     ap::Strategy::one_query, t, gw, "m", pricing, {}, 2);
    ASSERT_EQ(result.outcomes.size(), 2u);
    EXPECT_EQ(result.outcomes[0].status, ap::ClassificationOutcome::Status::ok);
    EXPECT_EQ(result.outcomes[0].label, "scam");
    EXPECT_EQ(result.outcomes[1].status, ap::ClassificationOutcome::Status::unclassified);
    EXPECT_NE(result.outcomes[1].error.find("replay"), std::string::npos);
}

TEST(ClassifyOutcome, JsonlRoundTrip) {
    ap::ScriptedMockBackend mock({"abuse", "scam", "romance"});
    ap::Gateway gw(mock, fast_config());
    auto out = ap::classify_top_to_bottom(desc("love scam"), default_taxonomy(), gw, "m");
    auto jsonl = ap::outcomes_to_jsonl(std::vector<ap::ClassificationOutcome>{out});
    auto back = ap::outcomes_from_jsonl(jsonl);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].label, "romance");
    EXPECT_EQ(back[0].trace.size(), 3u);
    EXPECT_EQ(back[0].trace[1].parsed_answer, "scam");
    EXPECT_EQ(ap::outcomes_to_jsonl(back), jsonl);
}

TEST(ClassifyTopToBottom, RequiresChildlessL2Rejected) {
    // A taxonomy where an L2 type has no children violates the chain's
    // stage-count contract, so the strategy refuses to run.
    std::vector<ap::AbuseType> entries;
    entries.push_back({"abuse", 0, "ROOT", "d"});
    entries.push_back({"notabuse", 0, "ROOT", "d"});
    entries.push_back({"scam", 0, "abuse", "d"});
    auto t = ap::Taxonomy::from_entries(entries);
    ap::ScriptedMockBackend mock({"abuse"});
    ap::Gateway gw(mock, fast_config());
    EXPECT_THROW(ap::classify_top_to_bottom(desc("x"), t, gw, "m"), std::invalid_argument);
}
