#include <gtest/gtest.h>

#include "fcdata/constructor.hpp"
#include "fcdata/synthetic.hpp"
#include "prompt_fixtures.hpp"
#include "support.hpp"

using namespace fcdata;
using namespace testing_support;

namespace {

const ToolSpec kQuote = string_tool("get_quote", {"symbol", "market"});

Sample quote(const std::string& query, const std::string& symbol, const std::string& market = "NYSE") {
    return make_sample(query, {call("get_quote", {{"symbol", symbol}, {"market", market}})}, {kQuote});
}

IncomingQuery incoming(const std::string& query, const std::string& symbol, const std::string& market = "NYSE") {
    return IncomingQuery{query, {call("get_quote", {{"symbol", symbol}, {"market", market}})}, {kQuote}, ""};
}

struct SmallBuffer {
    MockEmbeddingBackend embedder{MockEmbeddingOptions{}};
    Buffer buffer;

    explicit SmallBuffer(std::size_t n = 8) {
        std::vector<Sample> v;
        const char* symbols[] = {"AAPL", "MSFT", "GOOG", "AMZN", "NVDA", "TSLA", "META", "NFLX"};
        for (std::size_t i = 0; i < n; ++i) v.push_back(quote(std::string("Price of ") + symbols[i] + " today", symbols[i]));
        buffer = with_embeddings(Buffer(std::move(v)), embedder);
    }
};

MockChatBackend always(const std::string& response) {
    return MockChatBackend(MockChatBackend::parse_script(json::array({{{"response", response}, {"repeat", true}}})));
}

}  // namespace

TEST(Ingest, DropsVerbatimBufferQuery) {
    SmallBuffer sb;
    const auto r = ingest({incoming("Price of MSFT today", "MSFT"), incoming("Dividend yield of IBM", "IBM")}, sb.buffer,
                          sb.embedder);
    ASSERT_EQ(r.candidates.size(), 1u);
    EXPECT_EQ(r.candidates[0].query, "Dividend yield of IBM");
    EXPECT_EQ(r.candidate_index, std::vector<std::size_t>{1});
    ASSERT_EQ(r.dropped.size(), 1u);
    EXPECT_EQ(r.dropped[0].index, 0u);
    EXPECT_EQ(r.dropped[0].matched, sb.buffer[1].id);
    EXPECT_NEAR(r.dropped[0].similarity, 1.0, 1e-12);
}

TEST(Ingest, FirstOccurrenceWinsWithinBatch) {
    SmallBuffer sb;
    const auto r = ingest({incoming("Dividend yield of IBM", "IBM"), incoming("Earnings of ORCL", "ORCL"),
                           incoming("Dividend yield of IBM", "IBM", "NASDAQ")},
                          sb.buffer, sb.embedder);
    EXPECT_EQ(r.candidates.size(), 2u);
    ASSERT_EQ(r.dropped.size(), 1u);
    EXPECT_EQ(r.dropped[0].index, 2u);
    EXPECT_EQ(r.dropped[0].matched, "batch:0");
}

TEST(Ingest, PlantedFixtureOfTwenty) {
    const auto fx = synthetic::make_fixture({.incoming = 20});
    MockEmbeddingBackend embedder(fx.embedding);
    const auto buffer = with_embeddings(fx.seed, embedder);
    ASSERT_EQ(fx.incoming.size(), 20u);
    ASSERT_EQ(fx.planted_duplicates, 4u);
    const auto r = ingest(fx.incoming, buffer, embedder);
    EXPECT_EQ(r.candidates.size(), 16u);
    EXPECT_EQ(r.dropped.size(), 4u);
    for (const auto& d : r.dropped) EXPECT_GE(d.similarity, kDefaultDedupThreshold);
}

TEST(Ingest, RequiresEmbeddings) {
    MockEmbeddingBackend embedder{MockEmbeddingOptions{}};
    const Buffer bare({quote("Price of AAPL today", "AAPL")});
    EXPECT_THROW(ingest({incoming("x", "X")}, bare, embedder), Error);
}

TEST(FewShot, FiveExamplesMostSimilarFirst) {
    SmallBuffer sb;
    RecordingBackend backend("[]");
    reference_calls("Price of NVDA today", sb.buffer, {kQuote}, backend, sb.embedder, TemplateSet{});
    ASSERT_EQ(backend.requests.size(), 1u);
    const std::string& text = backend.requests[0].user;
    for (int i = 1; i <= 5; ++i) EXPECT_NE(text.find("Example " + std::to_string(i) + ":"), std::string::npos);
    EXPECT_EQ(text.find("Example 6:"), std::string::npos);
    EXPECT_NE(text.find("Example 1:\n- User query: Price of NVDA today\n"), std::string::npos);
    EXPECT_EQ(text.find("only "), std::string::npos);
}

TEST(FewShot, DegradedNoteWithSmallBuffer) {
    SmallBuffer sb(3);
    RecordingBackend backend("[]");
    reference_calls("Price of AAPL now", sb.buffer, {kQuote}, backend, sb.embedder, TemplateSet{});
    const std::string& text = backend.requests.at(0).user;
    EXPECT_NE(text.find("Example 3:"), std::string::npos);
    EXPECT_EQ(text.find("Example 4:"), std::string::npos);
    EXPECT_NE(text.find("only 3 example(s)"), std::string::npos);
}

TEST(FewShot, EmptyBufferIsAnError) {
    EXPECT_THROW(render_fewshot_prompt("q", {}, {kQuote}, TemplateSet{}), Error);
}

TEST(ReferenceCalls, ParsesResponses) {
    SmallBuffer sb;
    auto empty = always("[]");
    EXPECT_TRUE(reference_calls("Hello there", sb.buffer, {kQuote}, empty, sb.embedder, TemplateSet{}).empty());

    auto one = always(R"([{"name": "get_quote", "arguments": {"symbol": "IBM", "market": "NYSE"}}])");
    const auto calls = reference_calls("Price of IBM", sb.buffer, {kQuote}, one, sb.embedder, TemplateSet{});
    ASSERT_EQ(calls.size(), 1u);
    EXPECT_EQ(calls[0], call("get_quote", {{"symbol", "IBM"}, {"market", "NYSE"}}));

    auto wrapped = always("Sure. The calls are:\n```json\n[{\"name\": \"get_quote\", \"arguments\": {\"symbol\": \"IBM\"}}]\n```\nDone.");
    EXPECT_EQ(reference_calls("Price of IBM", sb.buffer, {kQuote}, wrapped, sb.embedder, TemplateSet{}).size(), 1u);

    auto prose = always("I am not sure which tool applies.");
    try {
        reference_calls("Price of IBM", sb.buffer, {kQuote}, prose, sb.embedder, TemplateSet{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnparseableResponse);
    }
}

TEST(Consistent, OrderInsensitiveStructuralEquality) {
    const auto a = call("get_quote", {{"symbol", "IBM"}, {"market", "NYSE"}});
    const auto b = call("get_quote", {{"symbol", "ORCL"}, {"market", "NYSE"}});
    EXPECT_TRUE(consistent({a, b}, {b, a}));
    EXPECT_TRUE(consistent({}, {}));
    EXPECT_FALSE(consistent({a}, {b}));
    EXPECT_FALSE(consistent({a}, {a, a}));
    EXPECT_FALSE(consistent({a, a}, {a, b}));
    EXPECT_FALSE(consistent({a}, {call("get_quote", {{"symbol", "IBM"}})}));
    EXPECT_TRUE(consistent({call("f", {{"n", std::int64_t{7}}})}, {call("f", {{"n", 7.0}})}));
}

TEST(Consistent, RandomPermutationsAgree) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 200; ++t) {
        auto calls = random_calls(rng);
        auto shuffled = calls;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        ASSERT_TRUE(consistent(calls, shuffled));
        ASSERT_EQ(consistent(calls, shuffled), consistent(shuffled, calls));
    }
}

TEST(Triage, AgreementMergesDisagreementExports) {
    SmallBuffer sb;
    const std::vector<IncomingQuery> cands{incoming("Dividend yield of IBM", "IBM"),
                                           incoming("Earnings of ORCL", "ORCL")};
    auto generator = MockChatBackend(MockChatBackend::parse_script(json::array({
        {{"match", "Dividend yield of IBM"},
         {"response", R"([{"name": "get_quote", "arguments": {"market": "NYSE", "symbol": "IBM"}}])"}},
        {{"match", "Earnings of ORCL"},
         {"response", R"([{"name": "get_quote", "arguments": {"symbol": "ORCL", "market": "LSE"}}])"}},
    })));
    const auto r = triage(cands, sb.buffer, generator, sb.embedder, TemplateSet{});
    ASSERT_EQ(r.delta.size(), 1u);
    EXPECT_EQ(r.delta[0].query, "Dividend yield of IBM");
    EXPECT_EQ(r.delta[0].origin, Origin::Online);
    ASSERT_EQ(r.exports.size(), 1u);
    EXPECT_EQ(r.exports[0].query, "Earnings of ORCL");
    EXPECT_EQ(r.exports[0].reference_calls.front().arguments.at("market"), Value{std::string("LSE")});
    ASSERT_EQ(r.log.size(), 2u);
    EXPECT_EQ(r.log[0].status, TriageStatus::Merged);
    EXPECT_EQ(r.log[1].status, TriageStatus::Exported);
}

TEST(Triage, FailuresAndProseAreParked) {
    SmallBuffer sb;
    const std::vector<IncomingQuery> cands{incoming("Dividend yield of IBM", "IBM"), incoming("Earnings of ORCL", "ORCL")};
    auto generator = MockChatBackend(MockChatBackend::parse_script(json::array({
        {{"match", "Dividend yield of IBM"}, {"fail", true}},
        {{"match", "Earnings of ORCL"}, {"response", "no idea"}},
    })));
    const auto r = triage(cands, sb.buffer, generator, sb.embedder, TemplateSet{});
    EXPECT_TRUE(r.delta.empty());
    EXPECT_TRUE(r.exports.empty());
    EXPECT_EQ(r.parked.size(), 2u);
    for (const auto& e : r.log) EXPECT_EQ(e.status, TriageStatus::Parked);
}

TEST(Triage, PlantedSevenOfTenAgree) {
    const auto fx = synthetic::make_fixture();
    MockEmbeddingBackend embedder(fx.embedding);
    const auto buffer = with_embeddings(fx.seed, embedder);
    const auto candidates = ingest(fx.incoming, buffer, embedder).candidates;
    const std::vector<IncomingQuery> first_ten(candidates.begin(), candidates.begin() + 10);
    MockChatBackend generator(MockChatBackend::parse_script(fx.constructor_script));
    const auto r = triage(first_ten, buffer, generator, embedder, TemplateSet{});
    EXPECT_EQ(r.delta.size(), 7u);
    EXPECT_EQ(r.exports.size(), 3u);
    EXPECT_TRUE(r.parked.empty());
    for (const auto& s : r.delta) EXPECT_TRUE(validate_sample(s).empty());
}

TEST(Annotations, ImportApprovedRows) {
    AnnotationRow row{"Earnings of ORCL", {call("get_quote", {{"symbol", "ORCL"}})},
                      {call("get_quote", {{"symbol", "ORCL"}, {"market", "NYSE"}})}, {kQuote}, "approved",
                      std::nullopt, ""};
    AnnotationRow pending = row;
    pending.query = "Something else";
    pending.status = "pending";
    const auto r = import_annotations(serialize_annotations({row, pending}));
    ASSERT_EQ(r.delta.size(), 1u);
    EXPECT_EQ(r.delta[0].answers, row.reference_calls);
    EXPECT_EQ(r.delta[0].origin, Origin::Online);
    EXPECT_EQ(r.skipped, 1u);
    EXPECT_TRUE(r.rejected.empty());
}

TEST(Annotations, UnknownToolRowRejected) {
    AnnotationRow row{"Weather in Paris", {}, {call("get_weather", {{"city", "Paris"}})}, {kQuote}, "approved",
                      std::nullopt, ""};
    const auto r = import_annotations(serialize_annotations({row}));
    EXPECT_TRUE(r.delta.empty());
    ASSERT_EQ(r.rejected.size(), 1u);
    EXPECT_EQ(r.rejected[0].line, 1u);
}

TEST(Annotations, StructurallyBrokenRowThrows) {
    try {
        import_annotations("{\"query\": \"q\"}\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedAnnotationRow);
    }
    EXPECT_THROW(import_annotations("not json\n"), Error);
}

TEST(Annotations, ExportEditImportRoundTrip) {
    SmallBuffer sb;
    auto generator = always(R"([{"name": "get_quote", "arguments": {"symbol": "ORCL", "market": "LSE"}}])");
    const auto r = triage({incoming("Earnings of ORCL", "ORCL")}, sb.buffer, generator, sb.embedder, TemplateSet{});
    ASSERT_EQ(r.exports.size(), 1u);
    TempDir dir("annot");
    write_text(dir.file("exports.jsonl"), serialize_annotations(r.exports));

    std::string edited;
    for (const auto& line : read_lines(dir.file("exports.jsonl"))) {
        json j = json::parse(line);
        j["status"] = "approved";
        j["approved_calls"] = j["online_calls"];
        edited += j.dump() + "\n";
    }
    const auto imported = import_annotations(edited);
    ASSERT_EQ(imported.delta.size(), 1u);
    EXPECT_EQ(imported.delta[0].answers, r.exports[0].online_calls);
    EXPECT_EQ(imported.delta[0].query, "Earnings of ORCL");
}
