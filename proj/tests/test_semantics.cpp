#include <gtest/gtest.h>

#include <random>

#include "fcdata/semantics.hpp"
#include "oracles/oracles.hpp"
#include "stub_server.hpp"
#include "support.hpp"

using namespace fcdata;
using namespace testing_support;

namespace {

class CountingBackend : public EmbeddingBackend {
public:
    std::vector<Embedding> embed(std::span<const std::string> texts) override {
        texts_seen += texts.size();
        return inner.embed(texts);
    }
    MockEmbeddingBackend inner;
    std::size_t texts_seen = 0;
};

const std::vector<std::string> kTenQueries{
    "What is the share price of Tencent today?",
    "Show me last year's annual report for Alibaba",
    "Convert 100 USD into EUR",
    "Latest news about the semiconductor sector",
    "NAV of fund 000001 in CNY",
    "How did the Hang Seng close yesterday?",
    "Quarterly cash flow statement for Meituan",
    "Exchange rate between GBP and JPY on March 3",
    "Tell me the price of Tencent stock right now",
    "Weekly candles for NVDA, adjusted",
};

Buffer embedded_buffer(const std::vector<std::string>& queries, EmbeddingBackend& backend) {
    std::vector<Sample> v;
    for (const auto& q : queries) v.push_back(make_sample(q, {}, {}));
    return with_embeddings(Buffer(std::move(v)), backend);
}

Embedding vec(std::vector<double> v) { return Embedding{std::move(v)}; }

}  // namespace

TEST(MockEmbedding, DeterministicAndUnitNorm) {
    MockEmbeddingBackend backend;
    const std::vector<std::string> texts{"a", "b", "a"};
    const auto e = embed_batch(texts, backend);
    ASSERT_EQ(e.size(), 3u);
    EXPECT_EQ(e[0], e[2]);
    EXPECT_NE(e[0], e[1]);
    for (const auto& x : e) {
        EXPECT_EQ(x.dim(), 256u);
        EXPECT_NEAR(detail::norm(x.values), 1.0, 1e-9);
    }
    MockEmbeddingBackend again;
    EXPECT_EQ(embed_batch(texts, again), e);
}

TEST(MockEmbedding, SeedChangesVectors) {
    MockEmbeddingBackend a;
    MockEmbeddingBackend b(MockEmbeddingOptions{.seed = 9});
    EXPECT_NE(a.embed_one("x"), b.embed_one("x"));
}

TEST(MockEmbedding, SynonymsShareVectors) {
    MockEmbeddingOptions o;
    o.synonyms["How much is TCEHY?"] = "What is the share price of Tencent today?";
    MockEmbeddingBackend backend(o);
    EXPECT_EQ(backend.embed_one("How much is TCEHY?"), backend.embed_one("What is the share price of Tencent today?"));
}

TEST(MockEmbedding, AnchorsPullTextsTogether) {
    MockEmbeddingOptions o;
    o.anchors["stock"] = 2.0;
    MockEmbeddingBackend backend(o);
    const double related = cosine(backend.embed_one("stock one"), backend.embed_one("stock two"));
    const double unrelated = cosine(backend.embed_one("fund one"), backend.embed_one("fund two"));
    EXPECT_GT(related, 0.7);
    EXPECT_LT(std::abs(unrelated), 0.3);
}

TEST(EmbedBatch, RejectsEmptyInput) {
    MockEmbeddingBackend backend;
    try {
        embed_batch(std::vector<std::string>{}, backend);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
    }
}

TEST(EmbedBatch, BatchingAndParallelismPreserveOrder) {
    MockEmbeddingBackend backend;
    std::vector<std::string> texts;
    for (int i = 0; i < 37; ++i) texts.push_back("text " + std::to_string(i));
    const auto serial = embed_batch(texts, backend);
    const auto batched = embed_batch(texts, backend, EmbedOptions{.batch_size = 5, .parallelism = 4});
    EXPECT_EQ(serial, batched);
}

TEST(Cosine, HandCases) {
    const auto u = vec({0.3, -0.2, 0.9});
    EXPECT_NEAR(cosine(u, u), 1.0, 1e-12);
    EXPECT_NEAR(cosine(vec({1, 0}), vec({0, 1})), 0.0, 1e-12);
    EXPECT_NEAR(cosine(vec({1, 0}), vec({1, 1})), 0.7071, 1e-4);
    EXPECT_THROW(cosine(vec({1, 0}), vec({1, 0, 0})), Error);
    EXPECT_THROW(cosine(vec({0, 0}), vec({1, 0})), Error);
}

TEST(NearDuplicates, VerbatimQueryFound) {
    MockEmbeddingBackend backend;
    const Buffer b = embedded_buffer(kTenQueries, backend);
    const auto hits = find_near_duplicates(kTenQueries[2], b, 0.95, backend);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].id, b[2].id);
    EXPECT_NEAR(hits[0].similarity, 1.0, 1e-9);
    EXPECT_TRUE(find_near_duplicates(kTenQueries[2], b, 1.01, backend).empty());
}

TEST(NearDuplicates, PlantedPairMatchesExhaustiveScan) {
    MockEmbeddingOptions o;
    o.synonyms[kTenQueries[8]] = kTenQueries[0];
    MockEmbeddingBackend backend(o);
    const Buffer b = embedded_buffer(kTenQueries, backend);

    std::size_t pairs = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        for (std::size_t j = i + 1; j < b.size(); ++j) {
            if (oracle::cosine(b[i].embedding->values, b[j].embedding->values) >= 0.95) ++pairs;
        }
    }
    EXPECT_EQ(pairs, 1u);

    const Buffer without_first(std::vector<Sample>(b.begin() + 1, b.end()));
    const auto hits = find_near_duplicates(kTenQueries[0], without_first, 0.95, backend);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].id, b[8].id);
}

TEST(NearDuplicates, NeedsEmbeddings) {
    MockEmbeddingBackend backend;
    const Buffer b({make_sample("q", {}, {})});
    try {
        find_near_duplicates(std::string("q"), b, 0.9, backend);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingEmbeddings);
    }
}

TEST(TopK, MatchesExhaustiveOracle) {
    MockEmbeddingOptions o;
    o.anchors["price"] = 1.0;
    o.anchors["Tencent"] = 1.0;
    MockEmbeddingBackend backend(o);
    const Buffer b = embedded_buffer(kTenQueries, backend);
    const std::string q = "Tencent price please";
    const auto qe = backend.embed_one(q);

    std::vector<std::pair<double, std::string>> scan;
    for (const auto& s : b) scan.emplace_back(-oracle::cosine(qe.values, s.embedding->values), s.id);
    std::sort(scan.begin(), scan.end());

    const auto top = top_k_similar(q, b, 3, backend);
    ASSERT_EQ(top.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(top[i].id, scan[i].second);
}

TEST(TopK, EdgeCases) {
    MockEmbeddingBackend backend;
    const Buffer b = embedded_buffer(kTenQueries, backend);
    EXPECT_EQ(top_k_similar(kTenQueries[4], b, 50, backend).size(), b.size());
    EXPECT_EQ(top_k_similar(kTenQueries[4], b, 1, backend).front().query, kTenQueries[4]);
    EXPECT_THROW(top_k_similar(kTenQueries[4], b, 0, backend), Error);
}

namespace {

/// Two tight blobs around orthogonal directions.
std::vector<Embedding> blobs(std::size_t per_blob, std::uint64_t seed, std::vector<std::size_t>* truth) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.02);
    std::vector<Embedding> pts;
    for (std::size_t i = 0; i < 2 * per_blob; ++i) {
        const std::size_t blob = i % 2;
        std::vector<double> v(8, 0.0);
        v[blob] = 1.0;
        for (double& x : v) x += noise(rng);
        pts.push_back(Embedding{v});
        if (truth) truth->push_back(blob);
    }
    return pts;
}

}  // namespace

TEST(KMeans, SingleClusterCentroidIsNormalizedMean) {
    const auto pts = blobs(10, 1, nullptr);
    const auto c = kmeans(pts, 1, 42);
    std::vector<double> mean(8, 0.0);
    for (const auto& p : pts) {
        const double n = detail::norm(p.values);
        for (std::size_t d = 0; d < 8; ++d) mean[d] += p.values[d] / n;
    }
    const auto expected = detail::normalized(mean);
    for (std::size_t d = 0; d < 8; ++d) EXPECT_NEAR(c.centroids[0].values[d], expected[d], 1e-9);
    for (auto l : c.labels) EXPECT_EQ(l, 0u);
}

TEST(KMeans, RecoversPlantedBlobs) {
    std::vector<std::size_t> truth;
    const auto pts = blobs(25, 2, &truth);
    const auto c = kmeans(pts, 2, 42);
    // labels are arbitrary up to permutation
    const std::size_t flip = c.labels[0] == truth[0] ? 0 : 1;
    for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(c.labels[i], truth[i] ^ flip);
}

TEST(KMeans, DeterministicForSeed) {
    MockEmbeddingBackend backend;
    std::vector<std::string> texts;
    for (int i = 0; i < 60; ++i) texts.push_back("query number " + std::to_string(i));
    const auto pts = embed_batch(texts, backend);
    const auto a = kmeans(pts, 6, 7);
    const auto b = kmeans(pts, 6, 7);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.centroids, b.centroids);
}

TEST(KMeans, NoEmptyClustersAndValidation) {
    MockEmbeddingBackend backend;
    std::vector<std::string> texts;
    for (int i = 0; i < 12; ++i) texts.push_back("t" + std::to_string(i));
    const auto pts = embed_batch(texts, backend);
    const auto c = kmeans(pts, 12, 3);
    std::set<std::size_t> used(c.labels.begin(), c.labels.end());
    EXPECT_EQ(used.size(), 12u);
    try {
        kmeans(pts, 13, 3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TooFewPoints);
    }
    EXPECT_THROW(kmeans(pts, 0, 3), Error);
}

TEST(KMeans, DefaultK) {
    EXPECT_EQ(default_k(1), 1u);
    EXPECT_EQ(default_k(8), 2u);
    EXPECT_EQ(default_k(200), 10u);
    EXPECT_EQ(default_k(1000000), 50u);
}

TEST(Clustering, JsonRoundTrip) {
    MockEmbeddingBackend backend;
    const Buffer b = embedded_buffer(kTenQueries, backend);
    const auto c = cluster_buffer(b, 3, 11);
    const auto back = clustering_from_json(json::parse(to_json(c).dump()));
    EXPECT_EQ(back.k, c.k);
    EXPECT_EQ(back.assignment, c.assignment);
    EXPECT_EQ(back.centroids, c.centroids);
}

TEST(Representatives, MatchesExhaustiveScan) {
    MockEmbeddingBackend backend;
    std::vector<std::string> texts(kTenQueries);
    for (int i = 0; i < 20; ++i) texts.push_back("extra query " + std::to_string(i));
    const Buffer b = embedded_buffer(texts, backend);
    const auto c = cluster_buffer(b, 3, 5);
    for (std::size_t k = 0; k < 3; ++k) {
        const Sample* best = nullptr;
        double best_sim = -2;
        std::size_t members = 0;
        for (const auto& s : b) {
            if (c.assignment.at(s.id) != k) continue;
            ++members;
            const double sim = oracle::cosine(s.embedding->values, c.centroids[k].values);
            if (sim > best_sim) {
                best_sim = sim;
                best = &s;
            }
        }
        const auto one = representatives(k, c, b, 1);
        ASSERT_EQ(one.size(), 1u);
        EXPECT_EQ(one[0].id, best->id);
        EXPECT_EQ(representatives(k, c, b, 1000).size(), members);
    }
}

TEST(Representatives, SingletonCluster) {
    MockEmbeddingBackend backend;
    const Buffer b = embedded_buffer({"only"}, backend);
    const auto c = cluster_buffer(b, 1, 0);
    const auto r = representatives(0, c, b, 5);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].query, "only");
}

TEST(EmbeddingCache, AvoidsRecomputationAndPersists) {
    TempDir dir("cache");
    CountingBackend inner;
    EmbeddingCache cache;
    CachedEmbeddingBackend cached(inner, cache);
    const std::vector<std::string> texts{"a", "b", "c"};
    const auto first = cached.embed(texts);
    const auto second = cached.embed(texts);
    EXPECT_EQ(first, second);
    EXPECT_EQ(inner.texts_seen, 3u);

    cache.save(dir.file("cache.jsonl"));
    EmbeddingCache reloaded;
    reloaded.load(dir.file("cache.jsonl"));
    EXPECT_EQ(reloaded.size(), 3u);
    EXPECT_EQ(*reloaded.get("b"), first[1]);
}

TEST(HttpEmbedding, ParsesDataRowsByIndex) {
    StubServer server("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body);
        json data = json::array();
        const auto n = body.at("input").size();
        for (std::size_t i = n; i-- > 0;) {
            data.push_back({{"index", i}, {"embedding", {1.0 + static_cast<double>(i), 0.5}}});
        }
        res.set_content(json{{"data", data}}.dump(), "application/json");
    });
    BackendConfig cfg;
    cfg.kind = BackendKind::Http;
    cfg.endpoint = server.url("/v1/embeddings");
    HttpEmbeddingBackend backend(cfg);
    const auto e = embed_batch(std::vector<std::string>{"x", "y"}, backend);
    EXPECT_EQ(e[0].values, (std::vector<double>{1.0, 0.5}));
    EXPECT_EQ(e[1].values, (std::vector<double>{2.0, 0.5}));
}
