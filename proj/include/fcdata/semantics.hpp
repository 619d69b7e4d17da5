#pragma once

// Query embeddings and everything computed from them: cosine similarity,
// near-duplicate detection, top-k retrieval for few-shot prompts, spherical
// k-means clustering, and representative selection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fcdata/corpus.hpp"
#include "fcdata/digest.hpp"
#include "fcdata/gateway.hpp"
#include "fcdata/parallel.hpp"

namespace fcdata {

inline constexpr double kDefaultDedupThreshold = 0.95;

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    /// One vector per text, in order. Must be safe to call concurrently.
    virtual std::vector<Embedding> embed(std::span<const std::string> texts) = 0;
};

namespace detail {

inline double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double norm(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline std::vector<double> normalized(std::vector<double> v) {
    const double n = norm(v);
    if (n == 0) throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
    for (double& x : v) x /= n;
    return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Mock backend

/// Deterministic stand-in for an embedding model. Each text maps to a
/// pseudo-random unit vector seeded from its digest. Synonyms map a text onto
/// another text's vector; anchors add a weighted shared direction to every
/// text containing the anchor substring, which gives fixtures controllable
/// cluster structure.
struct MockEmbeddingOptions {
    std::size_t dim = 256;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> synonyms;
    std::map<std::string, double> anchors;

    static MockEmbeddingOptions from_json(const json& j) {
        MockEmbeddingOptions o;
        o.dim = j.value("dim", o.dim);
        o.seed = j.value("seed", o.seed);
        if (auto s = j.find("synonyms"); s != j.end()) o.synonyms = s->get<std::map<std::string, std::string>>();
        if (auto a = j.find("anchors"); a != j.end()) o.anchors = a->get<std::map<std::string, double>>();
        if (o.dim == 0) throw Error(ErrorCode::InvalidConfig, "mock embedding dim must be positive");
        return o;
    }
};

class MockEmbeddingBackend : public EmbeddingBackend {
public:
    explicit MockEmbeddingBackend(MockEmbeddingOptions opts = {}) : opts_(std::move(opts)) {}

    Embedding embed_one(const std::string& text) const {
        std::string canon(trim(text));
        if (auto it = opts_.synonyms.find(canon); it != opts_.synonyms.end()) canon = std::string(trim(it->second));
        std::vector<double> v = direction("text", canon);
        for (const auto& [anchor, weight] : opts_.anchors) {
            if (canon.find(anchor) == std::string::npos) continue;
            const auto a = direction("anchor", anchor);
            for (std::size_t i = 0; i < v.size(); ++i) v[i] += weight * a[i];
        }
        return Embedding{detail::normalized(std::move(v))};
    }

    std::vector<Embedding> embed(std::span<const std::string> texts) override {
        std::vector<Embedding> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(embed_one(t));
        return out;
    }

private:
    std::vector<double> direction(std::string_view domain, const std::string& text) const {
        std::string key = std::to_string(opts_.seed);
        key += '\0';
        key += domain;
        key += '\0';
        key += text;
        std::mt19937_64 rng(digest_seed(key));
        std::vector<double> v(opts_.dim);
        for (double& x : v) x = 2.0 * detail::unit_uniform(rng) - 1.0;
        return detail::normalized(std::move(v));
    }

    MockEmbeddingOptions opts_;
};

// ---------------------------------------------------------------------------
// HTTP backend: POST {model, input: [...]} -> {data: [{embedding: [...]}]}

class HttpEmbeddingBackend : public EmbeddingBackend {
public:
    explicit HttpEmbeddingBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.endpoint.empty()) throw Error(ErrorCode::InvalidConfig, "http embedding backend needs an endpoint");
    }

    std::vector<Embedding> embed(std::span<const std::string> texts) override {
        const json body{{"model", cfg_.model}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
        const json resp = detail::post_json_with_retry(cfg_, body);
        std::vector<Embedding> out(texts.size());
        try {
            const auto& data = resp.at("data");
            if (data.size() != texts.size()) {
                throw Error(ErrorCode::BackendUnavailable, "embedding response has " + std::to_string(data.size()) +
                                                               " rows for " + std::to_string(texts.size()) + " inputs");
            }
            for (std::size_t i = 0; i < data.size(); ++i) {
                const std::size_t slot = data[i].value("index", i);
                if (slot >= out.size()) throw Error(ErrorCode::BackendUnavailable, "embedding index out of range");
                out[slot].values = data[i].at("embedding").get<std::vector<double>>();
            }
        } catch (const json::exception& e) {
            throw Error(ErrorCode::BackendUnavailable, std::string("malformed embedding response: ") + e.what());
        }
        return out;
    }

private:
    BackendConfig cfg_;
};

// ---------------------------------------------------------------------------
// Cache: JSONL rows {"key": sha256(text), "embedding": [...]}

class EmbeddingCache {
public:
    static std::string key_for(std::string_view text) { return sha256_hex(text); }

    std::optional<Embedding> get(std::string_view text) const {
        std::lock_guard lock(mu_);
        auto it = rows_.find(key_for(text));
        if (it == rows_.end()) return std::nullopt;
        return it->second;
    }

    void put(std::string_view text, Embedding e) {
        std::lock_guard lock(mu_);
        rows_.insert_or_assign(key_for(text), std::move(e));
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return rows_.size();
    }

    void load(const std::string& path) {
        std::lock_guard lock(mu_);
        for (const auto& line : read_lines(path)) {
            if (trim(line).empty()) continue;
            auto j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.contains("key") || !j.contains("embedding")) {
                throw Error(ErrorCode::MalformedJson, "bad embedding cache row in " + path);
            }
            rows_.insert_or_assign(j["key"].get<std::string>(), Embedding{j["embedding"].get<std::vector<double>>()});
        }
    }

    void save(const std::string& path) const {
        std::lock_guard lock(mu_);
        std::map<std::string, const Embedding*> sorted;
        for (const auto& [k, e] : rows_) sorted.emplace(k, &e);
        std::string out;
        for (const auto& [k, e] : sorted) out += json{{"key", k}, {"embedding", e->values}}.dump() + "\n";
        write_text(path, out);
    }

private:
    std::unordered_map<std::string, Embedding> rows_;
    mutable std::mutex mu_;
};

/// Serves cached vectors and forwards misses to the wrapped backend.
class CachedEmbeddingBackend : public EmbeddingBackend {
public:
    CachedEmbeddingBackend(EmbeddingBackend& inner, EmbeddingCache& cache) : inner_(inner), cache_(cache) {}

    std::vector<Embedding> embed(std::span<const std::string> texts) override {
        std::vector<Embedding> out(texts.size());
        std::vector<std::size_t> miss_idx;
        std::vector<std::string> miss_text;
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (auto hit = cache_.get(texts[i])) {
                out[i] = std::move(*hit);
            } else {
                miss_idx.push_back(i);
                miss_text.push_back(texts[i]);
            }
        }
        if (!miss_text.empty()) {
            auto fresh = inner_.embed(miss_text);
            if (fresh.size() != miss_text.size()) throw Error(ErrorCode::BackendUnavailable, "embedding count mismatch");
            for (std::size_t j = 0; j < fresh.size(); ++j) {
                cache_.put(miss_text[j], fresh[j]);
                out[miss_idx[j]] = std::move(fresh[j]);
            }
        }
        return out;
    }

private:
    EmbeddingBackend& inner_;
    EmbeddingCache& cache_;
};

// ---------------------------------------------------------------------------
// Batch embedding and similarity

struct EmbedOptions {
    std::size_t batch_size = 64;
    std::size_t parallelism = 1;  // batches in flight
};

inline std::vector<Embedding> embed_batch(std::span<const std::string> texts, EmbeddingBackend& backend,
                                          EmbedOptions opts = {}) {
    if (texts.empty()) throw Error(ErrorCode::EmptyInput, "no texts to embed");
    const std::size_t bs = std::max<std::size_t>(opts.batch_size, 1);
    const std::size_t batches = (texts.size() + bs - 1) / bs;
    std::vector<Embedding> out(texts.size());
    std::vector<std::optional<Error>> failures(batches);
    bounded_for_each(batches, opts.parallelism, [&](std::size_t b) {
        const std::size_t lo = b * bs;
        const std::size_t hi = std::min(texts.size(), lo + bs);
        try {
            auto part = backend.embed(texts.subspan(lo, hi - lo));
            if (part.size() != hi - lo) throw Error(ErrorCode::BackendUnavailable, "backend returned a short batch");
            std::move(part.begin(), part.end(), out.begin() + static_cast<std::ptrdiff_t>(lo));
        } catch (const Error& e) {
            failures[b] = e;
        } catch (const std::exception& e) {
            failures[b] = Error(ErrorCode::BackendUnavailable, e.what());
        }
    });
    for (const auto& f : failures) {
        if (f) throw *f;
    }
    const std::size_t dim = out.front().dim();
    for (const auto& e : out) {
        if (e.dim() != dim || dim == 0) throw Error(ErrorCode::DimensionMismatch, "backend returned inconsistent dimensions");
        if (detail::norm(e.values) == 0) throw Error(ErrorCode::ZeroVector, "backend returned a zero vector");
    }
    return out;
}

inline double cosine(const Embedding& u, const Embedding& v) {
    if (u.dim() != v.dim()) {
        throw Error(ErrorCode::DimensionMismatch, std::to_string(u.dim()) + " vs " + std::to_string(v.dim()));
    }
    const double nu = detail::norm(u.values);
    const double nv = detail::norm(v.values);
    if (nu == 0 || nv == 0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
    return std::clamp(detail::dot(u.values, v.values) / (nu * nv), -1.0, 1.0);
}

/// Copy of `buffer` where every sample carries an embedding of its query.
inline Buffer with_embeddings(const Buffer& buffer, EmbeddingBackend& backend, EmbedOptions opts = {}) {
    std::vector<Sample> samples(buffer.begin(), buffer.end());
    std::vector<std::string> texts;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!samples[i].embedding) {
            texts.push_back(samples[i].query);
            where.push_back(i);
        }
    }
    if (!texts.empty()) {
        auto vecs = embed_batch(texts, backend, opts);
        for (std::size_t j = 0; j < where.size(); ++j) samples[where[j]].embedding = std::move(vecs[j]);
    }
    return Buffer(std::move(samples));
}

struct Similar {
    std::string id;
    double similarity = 0;
};

namespace detail {

inline void require_embeddings(const Buffer& buffer) {
    for (const auto& s : buffer) {
        if (!s.embedding) throw Error(ErrorCode::MissingEmbeddings, "sample " + s.id + " has no embedding");
    }
}

inline std::vector<Similar> ranked(const Embedding& q, const Buffer& buffer) {
    require_embeddings(buffer);
    std::vector<Similar> all;
    all.reserve(buffer.size());
    for (const auto& s : buffer) all.push_back({s.id, cosine(q, *s.embedding)});
    std::sort(all.begin(), all.end(), [](const Similar& a, const Similar& b) {
        return a.similarity != b.similarity ? a.similarity > b.similarity : a.id < b.id;
    });
    return all;
}

}  // namespace detail

/// Every sample with cosine >= threshold, most similar first.
inline std::vector<Similar> find_near_duplicates(const Embedding& q, const Buffer& buffer, double threshold) {
    auto all = detail::ranked(q, buffer);
    auto cut = std::find_if(all.begin(), all.end(), [&](const Similar& s) { return s.similarity < threshold; });
    all.erase(cut, all.end());
    return all;
}

inline std::vector<Similar> find_near_duplicates(const std::string& q, const Buffer& buffer, double threshold,
                                                 EmbeddingBackend& backend) {
    detail::require_embeddings(buffer);
    return find_near_duplicates(embed_batch(std::span(&q, 1), backend).front(), buffer, threshold);
}

/// The k most similar samples (fewer if the buffer is smaller); ties by id.
inline std::vector<Sample> top_k_similar(const Embedding& q, const Buffer& buffer, std::size_t k) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    auto all = detail::ranked(q, buffer);
    std::vector<Sample> out;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(*buffer.find(all[i].id));
    return out;
}

inline std::vector<Sample> top_k_similar(const std::string& q, const Buffer& buffer, std::size_t k,
                                         EmbeddingBackend& backend) {
    detail::require_embeddings(buffer);
    return top_k_similar(embed_batch(std::span(&q, 1), backend).front(), buffer, k);
}

// ---------------------------------------------------------------------------
// Clustering

struct Clustering {
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::vector<Embedding> centroids;              // unit vectors
    std::vector<std::size_t> labels;               // per input point
    std::map<std::string, std::size_t> assignment;  // sample id -> cluster

    std::optional<std::size_t> cluster_of(const std::string& id) const {
        auto it = assignment.find(id);
        if (it == assignment.end()) return std::nullopt;
        return it->second;
    }
};

/// clamp(ceil(sqrt(n / 2)), 2, 50), never more than n.
inline std::size_t default_k(std::size_t n) {
    const auto k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n) / 2.0)));
    return std::min(std::clamp<std::size_t>(k, 2, 50), std::max<std::size_t>(n, 1));
}

/// Spherical Lloyd iterations on unit-normalized points with k-means++
/// seeding. Stops after 100 iterations or when no centroid moves by 1e-6.
/// An emptied cluster is re-seeded with the point farthest from its centroid.
inline Clustering kmeans(std::span<const Embedding> points, std::size_t k, std::uint64_t seed,
                         std::size_t max_iter = 100, double tol = 1e-6) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    if (points.size() < k) {
        throw Error(ErrorCode::TooFewPoints, std::to_string(points.size()) + " points for k = " + std::to_string(k));
    }
    const std::size_t n = points.size();
    const std::size_t dim = points.front().dim();
    std::vector<std::vector<double>> x;
    x.reserve(n);
    for (const auto& p : points) {
        if (p.dim() != dim) throw Error(ErrorCode::DimensionMismatch, "points have mixed dimensions");
        x.push_back(detail::normalized(p.values));
    }

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> chosen;
    chosen.push_back(static_cast<std::size_t>(detail::unit_uniform(rng) * static_cast<double>(n)));
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    while (chosen.size() < k) {
        const auto& c = x[chosen.back()];
        double total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            dist[i] = std::min(dist[i], std::max(0.0, 1.0 - detail::dot(x[i], c)));
            total += dist[i] * dist[i];
        }
        std::size_t pick = n;
        if (total > 0) {
            double r = detail::unit_uniform(rng) * total;
            for (std::size_t i = 0; i < n; ++i) {
                r -= dist[i] * dist[i];
                if (r < 0 && dist[i] > 0) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) {
                for (std::size_t i = n; i-- > 0;) {
                    if (dist[i] > 0) {
                        pick = i;
                        break;
                    }
                }
            }
        } else {
            for (std::size_t i = 0; i < n && pick == n; ++i) {
                if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) pick = i;
            }
        }
        chosen.push_back(pick);
    }

    std::vector<std::vector<double>> centroids;
    for (auto i : chosen) centroids.push_back(x[i]);
    std::vector<std::size_t> labels(n, 0);

    auto assign = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_sim = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double s = detail::dot(x[i], centroids[c]);
                if (s > best_sim) {
                    best_sim = s;
                    best = c;
                }
            }
            labels[i] = best;
        }
    };

    auto fill_empty = [&] {
        std::vector<std::size_t> sizes(k, 0);
        for (auto l : labels) ++sizes[l];
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] > 0) continue;
            std::size_t far = n;
            double far_sim = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < n; ++i) {
                if (sizes[labels[i]] < 2) continue;
                const double s = detail::dot(x[i], centroids[labels[i]]);
                if (s < far_sim) {
                    far_sim = s;
                    far = i;
                }
            }
            --sizes[labels[far]];
            labels[far] = c;
            sizes[c] = 1;
            centroids[c] = x[far];
        }
    };

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        assign();
        fill_empty();
        std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < dim; ++d) sums[labels[i]][d] += x[i][d];
        }
        double shift = 0;
        for (std::size_t c = 0; c < k; ++c) {
            if (detail::norm(sums[c]) == 0) continue;
            auto next = detail::normalized(std::move(sums[c]));
            double moved = 0;
            for (std::size_t d = 0; d < dim; ++d) moved += (next[d] - centroids[c][d]) * (next[d] - centroids[c][d]);
            shift = std::max(shift, std::sqrt(moved));
            centroids[c] = std::move(next);
        }
        if (shift < tol) break;
    }

    Clustering out;
    out.k = k;
    out.seed = seed;
    out.labels = std::move(labels);
    for (auto& c : centroids) out.centroids.push_back(Embedding{std::move(c)});
    return out;
}

inline Clustering cluster_buffer(const Buffer& buffer, std::size_t k, std::uint64_t seed) {
    detail::require_embeddings(buffer);
    std::vector<Embedding> pts;
    pts.reserve(buffer.size());
    for (const auto& s : buffer) pts.push_back(*s.embedding);
    Clustering c = kmeans(pts, k, seed);
    for (std::size_t i = 0; i < buffer.size(); ++i) c.assignment.emplace(buffer[i].id, c.labels[i]);
    return c;
}

inline json to_json(const Clustering& c) {
    json centroids = json::array();
    for (const auto& e : c.centroids) centroids.push_back(e.values);
    return json{{"k", c.k}, {"seed", c.seed}, {"centroids", std::move(centroids)}, {"assignment", c.assignment}};
}

inline Clustering clustering_from_json(const json& j) {
    try {
        Clustering c;
        c.k = j.at("k").get<std::size_t>();
        c.seed = j.value("seed", std::uint64_t{0});
        for (const auto& v : j.at("centroids")) c.centroids.push_back(Embedding{v.get<std::vector<double>>()});
        c.assignment = j.at("assignment").get<std::map<std::string, std::size_t>>();
        if (c.centroids.size() != c.k) throw Error(ErrorCode::MalformedJson, "centroid count differs from k");
        for (const auto& [id, l] : c.assignment) {
            if (l >= c.k) throw Error(ErrorCode::MalformedJson, "assignment of " + id + " out of range");
        }
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedJson, std::string("clustering: ") + e.what());
    }
}

/// The m members of `cluster` nearest the centroid, ties by id.
inline std::vector<Sample> representatives(std::size_t cluster, const Clustering& clustering, const Buffer& buffer,
                                           std::size_t m) {
    if (cluster >= clustering.k) throw Error(ErrorCode::InvalidArgument, "cluster index out of range");
    std::vector<std::pair<double, const Sample*>> members;
    for (const auto& s : buffer) {
        auto c = clustering.cluster_of(s.id);
        if (!c || *c != cluster) continue;
        if (!s.embedding) throw Error(ErrorCode::MissingEmbeddings, "sample " + s.id + " has no embedding");
        members.emplace_back(cosine(*s.embedding, clustering.centroids[cluster]), &s);
    }
    if (members.empty()) throw Error(ErrorCode::EmptyCluster, "cluster " + std::to_string(cluster) + " has no members");
    std::sort(members.begin(), members.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second->id < b.second->id;
    });
    std::vector<Sample> out;
    for (std::size_t i = 0; i < std::min(m, members.size()); ++i) out.push_back(*members[i].second);
    return out;
}

}  // namespace fcdata
