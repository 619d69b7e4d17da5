#include <gtest/gtest.h>

#include <random>

#include "fcdata/corpus.hpp"
#include "support.hpp"

using namespace fcdata;
using namespace testing_support;

namespace {

const char* kQuoteTool =
    R"({"name":"get_quote","description":"Stock quote","parameters":{"symbol":{"type":"str","description":"ticker"},"limit":{"type":"int, optional","default":10}}})";

std::string record(const std::string& answers, const std::string& tools = std::string("[") + kQuoteTool + "]") {
    return R"({"query":"Price of TCEHY?","answers":)" + answers + R"(,"tools":)" + tools + "}";
}

}  // namespace

TEST(ParseSample, EmptyAnswersAndTools) {
    const Sample s = parse_sample(R"({"query":"q","answers":[],"tools":[]})");
    EXPECT_EQ(s.query, "q");
    EXPECT_TRUE(s.answers.empty());
    EXPECT_TRUE(s.tools.empty());
    EXPECT_EQ(s.origin, Origin::Seed);
    EXPECT_EQ(s.id.size(), 64u);
}

TEST(ParseSample, StringEncodedAnswersMatchInlineForm) {
    const Sample inline_form = parse_sample(
        R"({"query":"q","answers":[{"name":"f","arguments":{}}],"tools":[{"name":"f","parameters":{}}]})");
    const Sample encoded = parse_sample(
        R"({"query":"q","answers":"[{\"name\":\"f\",\"arguments\":{}}]","tools":"[{\"name\":\"f\",\"parameters\":{}}]"})");
    EXPECT_EQ(inline_form.id, encoded.id);
    EXPECT_EQ(inline_form, encoded);
}

TEST(ParseSample, UnknownToolInAnswerIsRejected) {
    try {
        parse_sample(record(R"([{"name":"get_news","arguments":{}}])"));
        FAIL() << "expected UnknownToolInAnswer";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownToolInAnswer);
    }
}

TEST(ParseSample, StructuralErrors) {
    auto code_of = [](const std::string& text) {
        try {
            parse_sample(text);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::Io;  // sentinel: nothing thrown
    };
    EXPECT_EQ(code_of("{not json"), ErrorCode::MalformedJson);
    EXPECT_EQ(code_of(R"({"answers":[],"tools":[]})"), ErrorCode::MissingField);
    EXPECT_EQ(code_of(R"({"query":"q","tools":[]})"), ErrorCode::MissingField);
    EXPECT_EQ(code_of(record(R"([{"name":"get_quote","arguments":{"symbol":["A","B"]}}])")),
              ErrorCode::NonScalarArgument);
    EXPECT_EQ(code_of(record("[]", R"([{"name":"f","parameters":{"x":{"type":"list"}}}])")),
              ErrorCode::UnsupportedType);
    EXPECT_EQ(code_of(record("[]", R"([{"name":"f"},{"name":"f"}])")), ErrorCode::MalformedJson);
}

TEST(ParseSample, XlamParameterShape) {
    const Sample s = parse_sample(record(R"([{"name":"get_quote","arguments":{"symbol":"TCEHY"}}])"));
    const ToolSpec* t = s.tool("get_quote");
    ASSERT_NE(t, nullptr);
    EXPECT_EQ(t->parameters.at("symbol").kind, ValueKind::String);
    EXPECT_TRUE(t->parameters.at("symbol").required);
    EXPECT_EQ(t->parameters.at("limit").kind, ValueKind::Integer);
    EXPECT_FALSE(t->parameters.at("limit").required);
}

TEST(ParseSample, JsonSchemaParameterShape) {
    const Sample s = parse_sample(R"({"query":"q","answers":[],"tools":[{"name":"f","parameters":{
        "type":"object","properties":{"a":{"type":"string"},"b":{"type":"number"},"c":{"type":"string","enum":["x","y"]}},
        "required":["a"]}}]})");
    const auto& p = s.tools[0].parameters;
    EXPECT_TRUE(p.at("a").required);
    EXPECT_FALSE(p.at("b").required);
    EXPECT_EQ(p.at("b").kind, ValueKind::Float);
    EXPECT_EQ(p.at("c").kind, ValueKind::Enum);
    EXPECT_EQ(p.at("c").allowed, (std::vector<std::string>{"x", "y"}));
}

TEST(SampleId, IgnoresKeyOrderAndSuppliedId) {
    const Sample a = parse_sample(R"({"query":"q","answers":[{"name":"f","arguments":{"x":1,"y":"b"}}],"tools":[{"name":"f"}]})");
    const Sample b = parse_sample(
        R"({"id":"bogus","tools":[{"name":"f"}],"answers":[{"arguments":{"y":"b","x":1},"name":"f"}],"query":"q"})");
    EXPECT_EQ(a.id, b.id);
    EXPECT_EQ(a.id, compute_sample_id("q", a.answers));
}

TEST(SampleId, DependsOnAnswerOrder) {
    const auto tools = std::vector<ToolSpec>{string_tool("f", {}), string_tool("g", {})};
    const Sample a = make_sample("q", {call("f"), call("g")}, tools);
    const Sample b = make_sample("q", {call("g"), call("f")}, tools);
    EXPECT_NE(a.id, b.id);
}

TEST(SerializeSample, EmptyAnswersRoundTrip) {
    const Sample s = make_sample("q", {}, {});
    const std::string text = serialize_sample(s);
    EXPECT_EQ(parse_sample(text), s);
    EXPECT_EQ(serialize_sample(parse_sample(text)), text);
}

TEST(SerializeSample, PreservesAnswerOrder) {
    const auto tools = std::vector<ToolSpec>{string_tool("f", {"x"}), string_tool("g", {"x"})};
    const Sample s = make_sample("q", {call("g", {{"x", "2"}}), call("f", {{"x", "1"}})}, tools);
    const Sample back = parse_sample(serialize_sample(s));
    ASSERT_EQ(back.answers.size(), 2u);
    EXPECT_EQ(back.answers[0].name, "g");
    EXPECT_EQ(back.answers[1].name, "f");
}

TEST(SerializeSample, CanonicalFormHasNoInsignificantWhitespace) {
    const Sample s = parse_sample(R"({ "query" : "q" , "answers" : [ ] , "tools" : [ ] })");
    EXPECT_EQ(serialize_sample(s).find(": "), std::string::npos);
    EXPECT_EQ(serialize_sample(s).find('\n'), std::string::npos);
}

TEST(SerializeSample, RandomSamplesRoundTrip) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 100; ++i) {
        const Sample s = random_sample(rng);
        const Sample back = parse_sample(serialize_sample(s));
        ASSERT_EQ(back.id, s.id) << serialize_sample(s);
        ASSERT_EQ(back, s);
        const Sample xlam = parse_sample(encode_xlam(s));
        ASSERT_EQ(xlam.id, s.id);
    }
}

TEST(Values, NormalizationAndMatching) {
    EXPECT_EQ(normalize_value(Value{std::string(" Tencent ")}), "Tencent");
    EXPECT_EQ(normalize_value(Value{7.0}), "7");
    EXPECT_EQ(normalize_value(Value{std::int64_t{7}}), "7");
    EXPECT_EQ(normalize_value(Value{2.5}), "2.5");
    EXPECT_EQ(normalize_value(Value{true}), "true");
    EXPECT_TRUE(values_match(std::string("7"), 7.0));
    EXPECT_TRUE(values_match(std::int64_t{7}, 7.0));
    EXPECT_FALSE(values_match(std::string("tencent"), std::string("Tencent")));
    EXPECT_TRUE(values_match(std::string(" Tencent"), std::string("Tencent")));
    EXPECT_FALSE(values_match(std::string("true"), true));
    EXPECT_FALSE(values_match(std::string("seven"), std::int64_t{7}));
}

class ValidateCall : public ::testing::Test {
protected:
    ToolSpec spec = tool("get_report", {{"company", param(ValueKind::String, true)},
                                        {"year", param(ValueKind::Integer, true)},
                                        {"period", param(ValueKind::Enum, false, {"annual", "quarterly"})},
                                        {"adjusted", param(ValueKind::Boolean)}});
};

TEST_F(ValidateCall, ExactRequiredParamsPass) {
    EXPECT_TRUE(validate_call(call("get_report", {{"company", "Tencent"}, {"year", std::int64_t{2023}}}), spec).empty());
}

TEST_F(ValidateCall, MissingRequired) {
    const auto r = validate_call(call("get_report", {{"company", "Tencent"}}), spec);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].code, "MissingRequired");
    EXPECT_EQ(r[0].path, "arguments.year");
}

TEST_F(ValidateCall, StringWhereIntegerExpected) {
    const auto r = validate_call(call("get_report", {{"company", "Tencent"}, {"year", "700"}}), spec);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].code, "KindMismatch");
}

TEST_F(ValidateCall, UndeclaredAndEnumViolations) {
    const auto r = validate_call(call("get_report", {{"company", "Tencent"},
                                                     {"year", 2023.0},
                                                     {"period", "monthly"},
                                                     {"currency", "USD"}}),
                                 spec);
    ASSERT_EQ(r.size(), 2u);
    std::set<std::string> codes{r[0].code, r[1].code};
    EXPECT_EQ(codes, (std::set<std::string>{"EnumViolation", "UndeclaredParameter"}));
}

TEST_F(ValidateCall, NameMismatchThrows) {
    EXPECT_THROW(validate_call(call("other"), spec), Error);
}

TEST(ValidateSample, DetectsTamperedId) {
    Sample s = make_sample("q", {}, {});
    EXPECT_TRUE(validate_sample(s).empty());
    s.query = "changed";
    const auto r = validate_sample(s);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].code, "IdMismatch");
}

namespace {

Buffer numbered(std::initializer_list<int> ns) {
    std::vector<Sample> v;
    for (int n : ns) v.push_back(make_sample("query " + std::to_string(n), {}, {}));
    return Buffer(std::move(v));
}

}  // namespace

TEST(Merge, IdentityAndIdempotence) {
    const Buffer x = numbered({1, 2, 3});
    EXPECT_EQ(merge(x, Buffer{}).samples(), x.samples());
    EXPECT_EQ(merge(x, x).samples(), x.samples());
}

TEST(Merge, SharedIdsCountedOnce) {
    const Buffer a = numbered({1, 2, 3});
    const Buffer b = numbered({2, 3, 4, 5});
    const Buffer m = merge(a, b);
    EXPECT_EQ(m.size(), 5u);
    EXPECT_EQ(m[0].query, "query 1");
    EXPECT_EQ(m[4].query, "query 5");
}

TEST(Merge, LeftCopyWinsOnCollision) {
    Sample left = make_sample("q", {}, {}, Origin::Seed);
    Sample right = make_sample("q", {}, {}, Origin::Online);
    const Buffer m = merge(Buffer({left}), Buffer({right}));
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m[0].origin, Origin::Seed);
}

TEST(Buffer, KeepsFirstOccurrence) {
    const Buffer b({make_sample("a", {}, {}), make_sample("b", {}, {}), make_sample("a", {}, {}, Origin::Online)});
    EXPECT_EQ(b.size(), 2u);
    EXPECT_EQ(b.find(compute_sample_id("a", {}))->origin, Origin::Seed);
    EXPECT_EQ(*b.position(compute_sample_id("b", {})), 1u);
}

TEST(Corpus, ParseReportsLineNumbers) {
    const std::string text = serialize_sample(make_sample("a", {}, {})) + "\n\n{bad\n";
    try {
        parse_corpus(text);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedJson);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
}

TEST(Corpus, FileRoundTripIsByteStable) {
    TempDir dir("corpus");
    std::mt19937_64 rng(5);
    std::vector<Sample> v;
    for (int i = 0; i < 20; ++i) v.push_back(random_sample(rng));
    const Buffer b(std::move(v));
    save_corpus(dir.file("nested/c.jsonl"), b);
    const Buffer back = load_corpus(dir.file("nested/c.jsonl"));
    EXPECT_EQ(back.samples(), b.samples());
    EXPECT_EQ(serialize_corpus(back), read_text(dir.file("nested/c.jsonl")));
}

TEST(Corpus, MissingFileIsIoError) {
    try {
        load_corpus("/nonexistent/path.jsonl");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Io);
    }
}
