#include <gtest/gtest.h>

#include "abusepipe/taxonomy.hpp"

namespace ap = abusepipe;

namespace {

std::string default_config_path() {
    return std::string(ABUSEPIPE_SOURCE_DIR) + "/taxonomy/default.json";
}

ap::AbuseType entry(std::string name, std::string parent, std::string definition = "def") {
    ap::AbuseType t;
    t.name = std::move(name);
    t.parent = std::move(parent);
    t.definition = std::move(definition);
    return t;
}

}  // namespace

TEST(Taxonomy, DefaultConfigLoadsNineteenTypes) {
    auto t = ap::load_taxonomy(default_config_path());
    EXPECT_EQ(t.size(), 19u);
    EXPECT_EQ(t.at_level(1).size(), 2u);
    EXPECT_EQ(t.at_level(2).size(), 4u);
    EXPECT_EQ(t.at_level(3).size(), 13u);
    EXPECT_TRUE(ap::validate_taxonomy(t.types()).empty());
}

TEST(Taxonomy, DefaultParentStructure) {
    auto t = ap::load_taxonomy(default_config_path());
    EXPECT_EQ(t.at("abuse").parent, "ROOT");
    EXPECT_EQ(t.at("notabuse").parent, "ROOT");
    for (const char* l2 : {"extortion", "ransom", "scam", "unauthwithdrawal"}) {
        EXPECT_EQ(t.at(l2).parent, "abuse") << l2;
    }
    for (const char* name : {"sextortion", "reputation", "harm", "ddos", "bomb"}) {
        EXPECT_EQ(t.at(name).parent, "extortion") << name;
    }
    EXPECT_EQ(t.at("deleteransom").parent, "ransom");
    EXPECT_EQ(t.at("clipper").parent, "unauthwithdrawal");
    for (const char* name :
         {"advancefee", "eshop", "fundsrecovery", "giveaway", "investment", "romance"}) {
        EXPECT_EQ(t.at(name).parent, "scam") << name;
    }
}

TEST(Taxonomy, MinimalSingleTypeTreeIsValid) {
    auto t = ap::Taxonomy::from_entries({entry("abuse", "ROOT")});
    EXPECT_EQ(t.size(), 1u);
    EXPECT_EQ(t.at("abuse").level, 1);
}

TEST(Taxonomy, CycleIsRejected) {
    std::vector<ap::AbuseType> entries{entry("abuse", "ROOT"), entry("clipper", "scam"),
                                       entry("scam", "clipper")};
    EXPECT_THROW(ap::Taxonomy::from_entries(entries), ap::TaxonomyError);
}

TEST(Taxonomy, ValidateReportsDuplicateName) {
    std::vector<ap::AbuseType> entries{entry("abuse", "ROOT"), entry("scam", "abuse"),
                                       entry("scam", "abuse")};
    entries[0].level = 1;
    entries[1].level = 2;
    entries[2].level = 2;
    auto violations = ap::validate_taxonomy(entries);
    ASSERT_FALSE(violations.empty());
    bool found = false;
    for (const auto& v : violations) found |= v.find("duplicate name") != std::string::npos;
    EXPECT_TRUE(found);
}

TEST(Taxonomy, ValidateReportsLevelGap) {
    // An L3 type directly under an L1 parent.
    std::vector<ap::AbuseType> entries{entry("abuse", "ROOT"), entry("sextortion", "abuse")};
    entries[0].level = 1;
    entries[1].level = 3;
    auto violations = ap::validate_taxonomy(entries);
    ASSERT_FALSE(violations.empty());
    bool found = false;
    for (const auto& v : violations) found |= v.find("level gap") != std::string::npos;
    EXPECT_TRUE(found);
}

TEST(Taxonomy, ValidateReportsEmptyDefinitionAndOrphan) {
    std::vector<ap::AbuseType> entries{entry("abuse", "ROOT", ""), entry("ghost", "nowhere")};
    entries[0].level = 1;
    entries[1].level = 2;
    auto violations = ap::validate_taxonomy(entries);
    bool empty_def = false, orphan = false;
    for (const auto& v : violations) {
        empty_def |= v.find("empty definition") != std::string::npos;
        orphan |= v.find("orphan") != std::string::npos;
    }
    EXPECT_TRUE(empty_def);
    EXPECT_TRUE(orphan);
}

TEST(Taxonomy, ClassesAtLevelAndChildren) {
    auto t = ap::load_taxonomy(default_config_path());
    std::vector<std::string> l1;
    for (const auto* x : t.at_level(1)) l1.push_back(x->name);
    EXPECT_EQ(l1, (std::vector<std::string>{"abuse", "notabuse"}));

    std::vector<std::string> scam_children;
    for (const auto* x : t.children_of("scam")) scam_children.push_back(x->name);
    EXPECT_EQ(scam_children, (std::vector<std::string>{"advancefee", "eshop", "fundsrecovery",
                                                       "giveaway", "investment", "romance"}));

    EXPECT_TRUE(t.children_of("clipper").empty());
    EXPECT_THROW(t.children_of("phishing"), ap::TaxonomyError);
}

TEST(Taxonomy, IsAncestorIsStrict) {
    auto t = ap::load_taxonomy(default_config_path());
    EXPECT_TRUE(t.is_ancestor("extortion", "sextortion"));
    EXPECT_TRUE(t.is_ancestor("abuse", "sextortion"));
    EXPECT_FALSE(t.is_ancestor("sextortion", "sextortion"));
    EXPECT_FALSE(t.is_ancestor("scam", "sextortion"));
    EXPECT_THROW(t.is_ancestor("ghost", "scam"), ap::TaxonomyError);
}

TEST(Taxonomy, LevelsAreParentPlusOne) {
    auto t = ap::load_taxonomy(default_config_path());
    for (const auto& type : t.types()) {
        if (type.parent == ap::kRootName) {
            EXPECT_EQ(type.level, 1);
        } else {
            EXPECT_EQ(type.level, t.at(type.parent).level + 1) << type.name;
        }
    }
}

TEST(Taxonomy, LevelsPartitionTypes) {
    auto t = ap::load_taxonomy(default_config_path());
    std::size_t total = 0;
    for (int level = 1; level <= t.max_level(); ++level) total += t.at_level(level).size();
    EXPECT_EQ(total, t.size());
}

TEST(Taxonomy, EveryL2TypeHasChildrenInDefaultConfig) {
    auto t = ap::load_taxonomy(default_config_path());
    for (const auto* l2 : t.at_level(2)) {
        EXPECT_FALSE(t.children_of(l2->name).empty()) << l2->name;
    }
}

TEST(Taxonomy, SerializeReloadRoundTrip) {
    auto t = ap::load_taxonomy(default_config_path());
    auto reloaded = ap::taxonomy_from_json(ap::taxonomy_to_json(t));
    ASSERT_EQ(reloaded.size(), t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        EXPECT_EQ(t.types()[i].name, reloaded.types()[i].name);
        EXPECT_EQ(t.types()[i].parent, reloaded.types()[i].parent);
        EXPECT_EQ(t.types()[i].level, reloaded.types()[i].level);
        EXPECT_EQ(t.types()[i].definition, reloaded.types()[i].definition);
    }
}

TEST(Taxonomy, ParseFailureThrows) {
    EXPECT_THROW(ap::taxonomy_from_json("not json at all"), ap::TaxonomyError);
    EXPECT_THROW(ap::taxonomy_from_json("{\"types\": 3}"), ap::TaxonomyError);
}
