#include <gtest/gtest.h>

#include "abusepipe/ingest.hpp"
#include "abusepipe/sha256.hpp"

namespace ap = abusepipe;

TEST(Sha256, KnownVectors) {
    EXPECT_EQ(ap::sha256_hex(""),
              "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(ap::sha256_hex("abc"),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Ingest, ParsesBitcoinAbuseRecord) {
    std::string line =
        R"({"report_id": "77", "created": "2021-06-01", "address": "1BoatSLRHtKNngkdXEeobR76b53LETtpyT", )"
        R"("abuse_type": "Sextortion", "description": "threatened to send a video to my contacts"})";
    auto parsed = ap::parse_reports_text(line, ap::Source::bitcoinabuse);
    ASSERT_EQ(parsed.reports.size(), 1u);
    EXPECT_TRUE(parsed.rejects.empty());
    const auto& r = parsed.reports[0];
    EXPECT_EQ(r.ba_type, "Sextortion");
    EXPECT_EQ(r.address, "1BoatSLRHtKNngkdXEeobR76b53LETtpyT");
    EXPECT_EQ(r.report_id, "77");
}

TEST(Ingest, BbbZeroLossIsKept) {
    std::string line =
        R"({"scam_id": "900", "date": "2023-01-01", "description": "fake trading site", "dollars_lost": 0})";
    auto parsed = ap::parse_reports_text(line, ap::Source::bbb);
    ASSERT_EQ(parsed.reports.size(), 1u);
    ASSERT_TRUE(parsed.reports[0].dollars_lost_cents.has_value());
    EXPECT_EQ(*parsed.reports[0].dollars_lost_cents, 0);
    EXPECT_FALSE(parsed.reports[0].address.has_value());
}

TEST(Ingest, RejectsRoutedWithReasons) {
    std::string text =
        R"({"report_id": "1", "created": "2021-06-01", "address": "a1", "description": "  "})"
        "\n{broken json\n"
        R"({"report_id": "3", "created": "2021-06-01", "description": "no address"})"
        "\n"
        R"({"scam_id": "x", "date": "2023-01-01", "description": "ok", "dollars_lost": -5})";
    auto ba = ap::parse_reports_text(text, ap::Source::bitcoinabuse);
    EXPECT_TRUE(ba.reports.empty());
    ASSERT_EQ(ba.rejects.size(), 4u);
    EXPECT_NE(ba.rejects[0].reason.find("empty description"), std::string::npos);
    EXPECT_NE(ba.rejects[1].reason.find("invalid JSON"), std::string::npos);
    EXPECT_NE(ba.rejects[2].reason.find("missing address"), std::string::npos);
    EXPECT_EQ(ba.rejects[1].line, 2u);

    auto bbb = ap::parse_reports_text(
        R"({"scam_id": "x", "date": "2023-01-01", "description": "ok", "dollars_lost": -5})",
        ap::Source::bbb);
    ASSERT_EQ(bbb.rejects.size(), 1u);
    EXPECT_NE(bbb.rejects[0].reason.find("negative dollars_lost"), std::string::npos);
}

TEST(Ingest, UnreadableFileThrows) {
    EXPECT_THROW(ap::parse_reports("/nonexistent/nowhere.jsonl", ap::Source::bbb), ap::IoError);
}

TEST(Ingest, DedupMergesIdenticaltexts) {
    ap::Report a, b;
    a.source = ap::Source::bitcoinabuse;
    a.report_id = "1";
    a.description = "Sextortion";
    b.source = ap::Source::bitcoinabuse;
    b.report_id = "2";
    b.description = "Sextortion";
    auto descs = ap::dedup_descriptions(std::vector<ap::Report>{a, b});
    ASSERT_EQ(descs.size(), 1u);
    EXPECT_EQ(descs[0].report_ids.size(), 2u);
    EXPECT_EQ(descs[0].sha256, ap::sha256_hex("Sextortion"));
}

TEST(Ingest, DedupEmptyInput) {
    EXPECT_TRUE(ap::dedup_descriptions(std::vector<ap::Report>{}).empty());
}

TEST(Ingest, DedupPreservesFirstSeenOrderAndCountsWords) {
    std::vector<ap::Report> reports(3);
    reports[0].description = "Fake giveaway impersonating the party";
    reports[0].report_id = "1";
    reports[1].description = "one two";
    reports[1].report_id = "2";
    reports[2].description = "Fake giveaway impersonating the party";
    reports[2].report_id = "3";
    auto descs = ap::dedup_descriptions(reports);
    ASSERT_EQ(descs.size(), 2u);
    EXPECT_EQ(descs[0].text, "Fake giveaway impersonating the party");
    EXPECT_EQ(descs[0].word_count, 5);
    EXPECT_EQ(descs[1].word_count, 2);
}

TEST(Ingest, HashIsOverRawBytesWithoutNormalization) {
    std::vector<ap::Report> reports(2);
    reports[0].description = "scam";
    reports[0].report_id = "1";
    reports[1].description = " scam";  // leading space: a distinct description
    reports[1].report_id = "2";
    EXPECT_EQ(ap::dedup_descriptions(reports).size(), 2u);
}

TEST(Ingest, ReportIdsSumToAcceptedReports) {
    std::vector<ap::Report> reports;
    for (int i = 0; i < 17; ++i) {
        ap::Report r;
        r.report_id = std::to_string(i);
        r.description = "text " + std::to_string(i % 5);
        reports.push_back(r);
    }
    auto descs = ap::dedup_descriptions(reports);
    std::size_t total = 0;
    for (const auto& d : descs) total += d.report_ids.size();
    EXPECT_EQ(total, reports.size());
}

TEST(Ingest, DedupIsIdempotent) {
    std::vector<ap::Report> reports(4);
    for (int i = 0; i < 4; ++i) {
        reports[static_cast<std::size_t>(i)].report_id = std::to_string(i);
        reports[static_cast<std::size_t>(i)].description = i % 2 ? "alpha" : "beta";
    }
    auto once = ap::dedup_descriptions(reports);
    // Re-expand one report per (description, report_id) pair and dedup again.
    std::vector<ap::Report> expanded;
    for (const auto& d : once) {
        for (const auto& [src, id] : d.report_ids) {
            ap::Report r;
            r.report_id = id;
            r.description = d.text;
            expanded.push_back(r);
        }
    }
    auto twice = ap::dedup_descriptions(expanded);
    ASSERT_EQ(once.size(), twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(once[i].sha256, twice[i].sha256);
}

TEST(Ingest, StatsSingleDescription) {
    ap::Description d;
    d.word_count = 4;
    auto s = ap::description_stats(std::vector<ap::Description>{d});
    EXPECT_EQ(s.count, 1u);
    EXPECT_EQ(s.wc_min, 4);
    EXPECT_EQ(s.wc_median, 4);
    EXPECT_EQ(s.wc_max, 4);
    EXPECT_DOUBLE_EQ(s.wc_mean, 4.0);
}

TEST(Ingest, StatsLowerMedianAndExactMean) {
    std::vector<ap::Description> descs(4);
    descs[0].word_count = 2;
    descs[1].word_count = 4;
    descs[2].word_count = 6;
    descs[3].word_count = 100;
    auto s = ap::description_stats(descs);
    EXPECT_EQ(s.wc_median, 4);  // lower median of {2, 4, 6, 100}
    EXPECT_DOUBLE_EQ(s.wc_mean, 28.0);
    EXPECT_EQ(s.wc_min, 2);
    EXPECT_EQ(s.wc_max, 100);
}

TEST(Ingest, StatsLanguageHistogram) {
    std::vector<ap::Description> descs(3);
    descs[0].language = "en";
    descs[1].language = "en";
    descs[2].language = "ru";
    auto s = ap::description_stats(descs);
    EXPECT_EQ(s.languages.at("en"), 2u);
    EXPECT_EQ(s.languages.at("ru"), 1u);
}

TEST(Ingest, ReportJsonRoundTrip) {
    std::string line =
        R"({"scam_id": "b1", "date": "2023-06-01", "description": "lost money, \"quoted\"", )"
        R"("dollars_lost": 1200.50, "location": "Denver, CO", "indicators": [{"kind": "url", "value": "http://x.test"}]})";
    auto parsed = ap::parse_reports_text(line, ap::Source::bbb);
    ASSERT_EQ(parsed.reports.size(), 1u);
    auto jsonl = ap::reports_to_jsonl(parsed.reports);
    auto back = ap::reports_from_jsonl(jsonl);
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].description, parsed.reports[0].description);
    EXPECT_EQ(back[0].dollars_lost_cents, parsed.reports[0].dollars_lost_cents);
    EXPECT_EQ(back[0].indicators.size(), 1u);
    EXPECT_EQ(ap::reports_to_jsonl(back), jsonl);
}
