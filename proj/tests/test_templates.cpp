#include <gtest/gtest.h>

#include "fcdata/templates.hpp"
#include "prompt_fixtures.hpp"
#include "support.hpp"

using namespace fcdata;
using namespace testing_support;

namespace {

const std::vector<std::string> kNames{"consistency_checker", "fewshot_generator", "counterfactual_generation",
                                      "system_reasoning", "system_direct"};

const std::string& slot(const TemplateSet& set, const std::string& name) {
    if (name == "consistency_checker") return set.consistency_checker;
    if (name == "fewshot_generator") return set.fewshot_generator;
    if (name == "counterfactual_generation") return set.counterfactual_generation;
    if (name == "system_reasoning") return set.system_reasoning;
    return set.system_direct;
}

}  // namespace

TEST(Placeholders, BothSpellings) {
    const auto keys = placeholder_keys("a {{NAME}} b {expr:.4f} c {step-1}");
    EXPECT_EQ(keys, (std::set<std::string>{"NAME", "expr:.4f", "step-1"}));
}

TEST(Placeholders, JsonLiteralsAreNotPlaceholders) {
    EXPECT_TRUE(find_placeholders(R"([{"result": "Consistent"}] and { "a": 1 } and {})").empty());
    EXPECT_TRUE(find_placeholders("{1} {\n} {unterminated").empty());
}

TEST(RenderTemplate, SubstitutesWithoutRescanning) {
    EXPECT_EQ(render_template("x={x}, y={{y}}", {{"x", "{y}"}, {"y", "2"}}), "x={y}, y=2");
}

TEST(RenderTemplate, MissingBindingNamesEveryKey) {
    try {
        render_template("{a} {b} {a}", {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingPlaceholderData);
        const std::string msg = e.what();
        EXPECT_NE(msg.find("'a'"), std::string::npos);
        EXPECT_NE(msg.find("'b'"), std::string::npos);
    }
}

TEST(TemplateFiles, MatchEmbeddedDefaults) {
    const TemplateSet embedded;
    for (const auto& name : kNames) {
        const std::string file = read_text(std::string(FCDATA_TEMPLATES_DIR) + "/" + name + ".txt");
        EXPECT_EQ(file, slot(embedded, name)) << name;
    }
}

TEST(TemplateFiles, ExpectedPlaceholders) {
    const TemplateSet t;
    EXPECT_EQ(placeholder_keys(t.consistency_checker), (std::set<std::string>{"query", "tools", "tool_call"}));
    EXPECT_EQ(placeholder_keys(t.fewshot_generator),
              (std::set<std::string>{"FEW_SHOT_EXAMPLES", "CURRENT_QUERY", "CURRENT_TOOLSET"}));
    EXPECT_EQ(placeholder_keys(t.system_reasoning), (std::set<std::string>{"TOOLS"}));
    EXPECT_EQ(placeholder_keys(t.system_direct), (std::set<std::string>{"TOOLS"}));
    const auto aug = placeholder_keys(t.counterfactual_generation);
    for (const char* k : {"step", "step-1", "tool_param", "tool_param.split('.')[-1]",
                          "current_state['entropy_ratio']:.4f", "history_desc", "stable_params_desc",
                          "blind_entropy_ration_threshold", "user_query", "tool_call"}) {
        EXPECT_TRUE(aug.contains(k)) << k;
    }
}

TEST(TemplateFiles, RequiredSectionsPresentVerbatim) {
    const TemplateSet t;
    for (const auto& name : kNames) EXPECT_TRUE(missing_sections(name, slot(t, name)).empty()) << name;
}

TEST(TemplateSet, DirectoryOverridesSingleFiles) {
    TempDir dir("tmpl");
    write_text(dir.file("system_direct.txt"), "## Role:\ncustom {{TOOLS}}\n");
    const auto set = TemplateSet::load(dir.path);
    EXPECT_EQ(set.system_direct, "## Role:\ncustom {{TOOLS}}\n");
    EXPECT_EQ(set.consistency_checker, TemplateSet{}.consistency_checker);
}

TEST(RenderedPrompts, NoUnresolvedPlaceholdersAndAllSections) {
    const auto rendered = render_bundled_prompts(TemplateSet::load(FCDATA_TEMPLATES_DIR));
    ASSERT_EQ(rendered.size(), kNames.size());
    for (const auto& [name, text] : rendered) {
        EXPECT_TRUE(unresolved_placeholders(text).empty()) << name << ": " << unresolved_placeholders(text).front();
        EXPECT_TRUE(find_placeholders(text).empty()) << name;
        EXPECT_TRUE(missing_sections(name, text).empty()) << name;
    }
}

TEST(RenderedPrompts, CounterfactualRoundOne) {
    const auto rendered = render_bundled_prompts(TemplateSet{});
    const std::string& text = rendered.at("counterfactual_generation");
    EXPECT_NE(text.find("Step 1"), std::string::npos);
    EXPECT_NE(text.find("No prior rounds"), std::string::npos);
    EXPECT_TRUE(std::regex_search(text, std::regex(R"(\b0\.0000\b)")));
    EXPECT_TRUE(std::regex_search(text, std::regex(R"(\+0\.0000)")));
}

TEST(RenderedPrompts, FewShotHasFiveExamples) {
    const auto rendered = render_bundled_prompts(TemplateSet{});
    const std::string& text = rendered.at("fewshot_generator");
    for (int i = 1; i <= 5; ++i) EXPECT_NE(text.find("Example " + std::to_string(i) + ":"), std::string::npos);
    EXPECT_EQ(text.find("Example 6:"), std::string::npos);
    EXPECT_EQ(text.find("fewer than five"), std::string::npos);
}
