#pragma once

// Synthetic financial tool-calling corpus with planted structure: five topic
// clusters (driven by mock-embedding anchors), five tools with twenty
// parameters, one collapsed parameter per cluster, planted duplicate queries
// in the online stream, and scripted mock backends that agree with the online
// model 70% of the time and repair each planted blind spot in one round.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fcdata/augmentor.hpp"
#include "fcdata/constructor.hpp"
#include "fcdata/corpus.hpp"
#include "fcdata/semantics.hpp"
#include "fcdata/templates.hpp"

namespace fcdata::synthetic {

struct Options {
    std::size_t seeds_per_cell = 4;  // per (topic, tool)
    std::size_t incoming = 200;      // including the 4 planted duplicates
    std::uint64_t seed = 7;
    std::size_t dim = 256;
    double anchor_weight = 2.0;
};

struct PlantedSpot {
    std::string tool;
    std::string parameter;
    std::size_t topic = 0;
};

struct Fixture {
    std::vector<ToolSpec> toolset;
    std::vector<std::string> topics;  // anchor phrases, one per planted cluster
    Buffer seed;
    std::map<std::string, std::size_t> topic_of;  // sample id -> topic, for every sample the fixture can produce
    std::vector<IncomingQuery> incoming;
    std::size_t planted_duplicates = 0;
    std::size_t expected_consistent = 0;
    std::size_t expected_inconsistent = 0;
    std::vector<PlantedSpot> planted;
    json constructor_script = json::array();
    json generator_script = json::array();
    json checker_script = json::array();
    std::map<std::string, std::string> plans;  // sample id -> plan text
    MockEmbeddingOptions embedding;
    Options options;
};

namespace detail {

struct ParamPlan {
    std::string name;
    ValueKind kind;
    std::vector<Value> pool;
};

struct ToolPlan {
    std::string name;
    std::string description;
    std::vector<ParamPlan> params;
    std::string planted_param;
    Value planted_value;
    std::vector<Value> fresh_values;  // offered by the scripted generator
    std::string flip_param;           // altered when the reference disagrees
    std::vector<std::string> phrasings;  // seed, online, augmented
};

inline std::vector<Value> strings(std::initializer_list<const char*> xs) {
    std::vector<Value> out;
    for (const char* x : xs) out.emplace_back(std::string(x));
    return out;
}

inline std::vector<Value> ints(std::initializer_list<std::int64_t> xs) {
    std::vector<Value> out;
    for (auto x : xs) out.emplace_back(x);
    return out;
}

inline const std::vector<std::string>& topic_phrases() {
    static const std::vector<std::string> t{
        "for my retirement portfolio review",
        "ahead of the quarterly earnings call",
        "for the treasury desk morning memo",
        "for the cross-border payments team",
        "before the weekly risk committee",
    };
    return t;
}

inline const std::vector<ToolPlan>& tool_plans() {
    static const std::vector<ToolPlan> plans{
        {"get_stock_quote",
         "Historical price quotes for a listed stock.",
         {{"symbol", ValueKind::String, strings({"AAPL", "MSFT", "GOOGL", "AMZN", "META", "BABA", "0700.HK", "JD",
                                                 "NFLX", "ORCL", "IBM", "SAP"})},
          {"market", ValueKind::Enum, strings({"NASDAQ", "HKEX"})},
          {"interval", ValueKind::String, strings({"1d", "5d", "1m", "3m", "6m", "1y", "ytd", "max"})},
          {"adjusted", ValueKind::Boolean, {Value(true), Value(false)}}},
         "symbol",
         Value(std::string("TSLA")),
         strings({"NVDA", "AMD", "INTC"}),
         "market",
         {"Show me the {interval} price chart of {symbol} on {market} (adjusted: {adjusted})",
          "Can you fetch {symbol} quotes from {market} over {interval}, adjusted {adjusted},",
          "I need the {interval} trading data of {symbol} from {market} with adjusted set to {adjusted}"}},
        {"get_financial_report",
         "Financial statements filed by a company.",
         {{"company", ValueKind::String, strings({"Apple", "Microsoft", "Alphabet", "Amazon", "Meta", "Alibaba",
                                                  "Tencent", "JD.com", "Netflix", "Oracle", "IBM", "SAP"})},
          {"year", ValueKind::Integer, ints({2013, 2014, 2015, 2016, 2017, 2018, 2019, 2020, 2021, 2022, 2023, 2024})},
          {"period", ValueKind::Enum, strings({"Q1", "Q2", "Q3", "Q4", "FY"})},
          {"statement", ValueKind::Enum, strings({"income", "balance", "cashflow"})}},
         "company",
         Value(std::string("Tesla")),
         strings({"Nvidia", "AMD", "Intel"}),
         "statement",
         {"Get the {period} {year} {statement} statement of {company}",
          "What did {company} report in its {statement} statement for {period} {year}",
          "Please retrieve the {year} {period} {statement} figures published by {company}"}},
        {"get_fund_nav",
         "Net asset value of a mutual fund share class.",
         {{"fund_code", ValueKind::String, strings({"000001", "110022", "161725", "519674", "003095", "001632",
                                                    "000961", "005827", "260108", "163406", "001938", "110011"})},
          {"currency", ValueKind::Enum, strings({"USD", "CNY"})},
          {"date", ValueKind::String, strings({"2024-01-31", "2024-02-29", "2024-03-29", "2024-04-30", "2024-05-31",
                                               "2024-06-28", "2024-07-31", "2024-08-30", "2024-09-30", "2024-10-31",
                                               "2024-11-29", "2024-12-31"})},
          {"share_class", ValueKind::Enum, strings({"A", "C"})}},
         "fund_code",
         Value(std::string("000300")),
         strings({"510300", "159915", "512880"}),
         "currency",
         {"What was the NAV of fund {fund_code} in {currency} on {date} for class {share_class}",
          "Look up the net asset value of fund {fund_code} on {date}, class {share_class}, quoted in {currency},",
          "Check the {currency} net value of {fund_code} share class {share_class} as of {date}"}},
        {"get_exchange_rate",
         "Spot exchange rate between two currencies.",
         {{"base", ValueKind::String, strings({"USD", "EUR", "GBP", "JPY", "CHF", "AUD", "CAD", "SGD", "HKD", "KRW",
                                               "INR", "NZD"})},
          {"quote", ValueKind::String, strings({"CNY", "MXN", "BRL", "ZAR", "SEK", "NOK", "TRY", "THB"})},
          {"date", ValueKind::String, strings({"2024-01-15", "2024-02-15", "2024-03-15", "2024-04-15", "2024-05-15",
                                               "2024-06-14", "2024-07-15", "2024-08-15", "2024-09-13", "2024-10-15",
                                               "2024-11-15", "2024-12-13"})},
          {"amount", ValueKind::Float, {Value(100.0), Value(250.5), Value(1000.0), Value(2500.75), Value(5000.0),
                                        Value(12000.0), Value(75.25), Value(300.0), Value(640.0), Value(8800.0),
                                        Value(15.5), Value(99999.0)}}},
         "base",
         Value(std::string("RUB")),
         strings({"PLN", "CZK", "HUF"}),
         "quote",
         {"Convert {amount} {base} to {quote} at the rate of {date}",
          "How much {quote} would I get for {amount} {base} using the {date} rate",
          "Give me the {base} to {quote} rate on {date} for an amount of {amount}"}},
        {"get_market_news",
         "Recent market news articles.",
         {{"topic", ValueKind::String, strings({"interest rates", "oil prices", "semiconductors", "crypto", "gold",
                                                "real estate", "inflation", "bond yields", "electric vehicles",
                                                "banking", "retail sales", "employment"})},
          {"limit", ValueKind::Integer, ints({5, 10, 15, 20, 25, 30, 40, 50})},
          {"language", ValueKind::Enum, strings({"en", "zh"})},
          {"region", ValueKind::String, strings({"US", "EU", "China", "Japan", "UK", "India"})}},
         "topic",
         Value(std::string("artificial intelligence")),
         strings({"shipping", "agriculture", "insurance"}),
         "language",
         {"Show {limit} {language} news headlines about {topic} in {region}",
          "Find the latest {limit} articles on {topic} from {region} written in {language}",
          "Summarize {limit} {region} stories about {topic} in {language}"}},
    };
    return plans;
}

inline ToolSpec spec_of(const ToolPlan& t) {
    ToolSpec s;
    s.name = t.name;
    s.description = t.description;
    for (const auto& p : t.params) {
        ParamSpec ps;
        ps.kind = p.kind;
        ps.required = true;
        ps.description = p.name;
        if (p.kind == ValueKind::Enum) {
            for (const auto& v : p.pool) ps.allowed.push_back(normalize_value(v));
        }
        s.parameters.emplace(p.name, ps);
    }
    return s;
}

inline ToolCall call_for(const ToolPlan& t, std::size_t topic, std::size_t j, std::size_t planted_topic) {
    ToolCall c;
    c.name = t.name;
    for (std::size_t pi = 0; pi < t.params.size(); ++pi) {
        const auto& p = t.params[pi];
        if (p.name == t.planted_param && topic == planted_topic) {
            c.arguments.emplace(p.name, t.planted_value);
        } else {
            c.arguments.emplace(p.name, p.pool[(j + 3 * topic + pi) % p.pool.size()]);
        }
    }
    return c;
}

inline std::string phrase(const ToolPlan& t, const ToolCall& c, std::size_t variant, std::size_t topic) {
    std::map<std::string, std::string> b;
    for (const auto& [k, v] : c.arguments) b.emplace(k, normalize_value(v));
    return render_template(t.phrasings.at(variant), b) + " " + topic_phrases().at(topic) + ".";
}

inline std::string plan_for(const ToolCall& c) {
    std::string args;
    for (const auto& [k, v] : c.arguments) args += (args.empty() ? "" : ", ") + k + " = " + normalize_value(v);
    return "The request maps to " + c.name + "; the query fixes " + args + ".";
}

inline ToolCall flipped(const ToolPlan& t, ToolCall c) {
    for (const auto& p : t.params) {
        if (p.name != t.flip_param) continue;
        const auto current = normalize_value(c.arguments.at(p.name));
        for (std::size_t i = 0; i < p.pool.size(); ++i) {
            if (normalize_value(p.pool[i]) == current) {
                c.arguments[p.name] = p.pool[(i + 1) % p.pool.size()];
                break;
            }
        }
    }
    return c;
}

}  // namespace detail

inline Fixture make_fixture(const Options& opt = {}) {
    Fixture fx;
    fx.options = opt;
    const auto& tools = detail::tool_plans();
    const std::size_t n_topics = detail::topic_phrases().size();
    fx.topics = detail::topic_phrases();
    for (const auto& t : tools) fx.toolset.push_back(detail::spec_of(t));

    fx.embedding.dim = opt.dim;
    fx.embedding.seed = opt.seed;
    for (const auto& a : fx.topics) fx.embedding.anchors.emplace(a, opt.anchor_weight);

    // Tool t is collapsed in topic t.
    for (std::size_t t = 0; t < tools.size(); ++t) fx.planted.push_back({tools[t].name, tools[t].planted_param, t});

    auto note = [&](const Sample& s, std::size_t topic) {
        fx.topic_of.emplace(s.id, topic);
        fx.plans.emplace(s.id, detail::plan_for(s.answers.front()));
    };

    std::vector<Sample> seeds;
    for (std::size_t c = 0; c < n_topics; ++c) {
        for (std::size_t t = 0; t < tools.size(); ++t) {
            for (std::size_t j = 0; j < opt.seeds_per_cell; ++j) {
                ToolCall call = detail::call_for(tools[t], c, j, t);
                Sample s = make_sample(detail::phrase(tools[t], call, 0, c), {call}, fx.toolset, Origin::Seed);
                note(s, c);
                seeds.push_back(std::move(s));
            }
        }
    }
    fx.seed = Buffer(seeds);

    // Online stream: novel queries, plus two verbatim repeats of seed queries,
    // one paraphrase of a seed query and one paraphrase within the batch.
    const std::size_t n_dup = opt.incoming >= 8 ? 4 : 0;
    const std::size_t n_novel = opt.incoming - n_dup;
    std::vector<IncomingQuery> novel;
    std::vector<std::size_t> novel_topic;
    for (std::size_t i = 0; i < n_novel; ++i) {
        const std::size_t c = i % n_topics;
        const std::size_t t = (i / n_topics) % tools.size();
        const std::size_t j = opt.seeds_per_cell + i / (n_topics * tools.size());
        ToolCall call = detail::call_for(tools[t], c, j, t);
        novel.push_back({detail::phrase(tools[t], call, 1, c), {call}, fx.toolset, "2024-12-" + std::to_string(1 + i % 28)});
        novel_topic.push_back(c);
    }

    std::vector<IncomingQuery> stream = novel;
    if (n_dup == 4) {
        const auto& s0 = seeds.at(1);
        const auto& s1 = seeds.at(seeds.size() / 2);
        const auto& s2 = seeds.at(seeds.size() - 3);
        const auto& n0 = novel.at(novel.size() / 3);
        IncomingQuery d0{s0.query, s0.answers, fx.toolset, "2024-12-29"};
        IncomingQuery d1{s1.query, s1.answers, fx.toolset, "2024-12-29"};
        IncomingQuery d2{"Quick one: " + s2.query, s2.answers, fx.toolset, "2024-12-30"};
        IncomingQuery d3{"Again, " + n0.query, n0.online_answer, fx.toolset, "2024-12-30"};
        fx.embedding.synonyms.emplace(d2.query, s2.query);
        fx.embedding.synonyms.emplace(d3.query, n0.query);
        auto at = [&](std::size_t frac) { return stream.begin() + static_cast<std::ptrdiff_t>(stream.size() * frac / 5); };
        stream.insert(at(1), d0);
        stream.insert(at(2), d1);
        stream.insert(at(3), d2);
        stream.insert(at(4), d3);
        fx.planted_duplicates = 4;
    }
    fx.incoming = stream;

    // Reference generator: agrees on 7 of every 10 novel queries.
    for (std::size_t i = 0; i < novel.size(); ++i) {
        const auto& q = novel[i];
        const auto& plan = tools[(i / n_topics) % tools.size()];
        const bool agree = i % 10 < 7;
        std::vector<ToolCall> ref = agree ? q.online_answer : std::vector<ToolCall>{detail::flipped(plan, q.online_answer.front())};
        fx.constructor_script.push_back({{"match", "### Current Query:\n" + q.query + "\n"}, {"response", to_json(ref).dump()}});
        if (agree) {
            ++fx.expected_consistent;
            note(make_sample(q.query, q.online_answer, fx.toolset, Origin::Online), novel_topic[i]);
        } else {
            ++fx.expected_inconsistent;
        }
    }

    // Augmentation generator: three fresh values per planted spot in round 1.
    for (std::size_t t = 0; t < tools.size(); ++t) {
        const auto& plan = tools[t];
        const std::size_t c = t;
        json cands = json::array();
        for (std::size_t f = 0; f < plan.fresh_values.size(); ++f) {
            ToolCall call = detail::call_for(plan, c, f, t);
            call.arguments[plan.planted_param] = plan.fresh_values[f];
            const std::string q = detail::phrase(plan, call, 2, c);
            cands.push_back({{"new_query", q},
                             {"new_value_for_" + plan.planted_param, value_to_json(plan.fresh_values[f])},
                             {"new_tool_call", to_json(std::vector<ToolCall>{call}).dump()},
                             {"step_rationale", "Introduce " + normalize_value(plan.fresh_values[f]) +
                                                    " so the cluster no longer repeats a single value."}});
            note(make_sample(q, {call}, fx.toolset, Origin::Augmented), c);
        }
        const std::string match = "Multi-Round Generation Context (Step 1):\nWe are in a multi-round generation process "
                                  "to mitigate distribution collapse in parameter \"" +
                                  plan.name + "." + plan.planted_param + "\"";
        fx.generator_script.push_back({{"match", match}, {"response", "```json\n" + cands.dump(2) + "\n```"}});
    }
    fx.generator_script.push_back({{"response", "[]"}, {"repeat", true}});

    fx.checker_script.push_back(
        {{"response", R"([{"analysis": "The parameters follow from the query.", "result": "Consistent"}])"},
         {"repeat", true}});
    return fx;
}

/// Clustering that assigns every fixture sample to its planted topic.
inline Clustering planted_clustering(const Fixture& fx, const Buffer& buffer, EmbeddingBackend& embedder) {
    Clustering c;
    c.k = fx.topics.size();
    c.seed = fx.options.seed;
    for (const auto& a : fx.topics) c.centroids.push_back(embed_batch(std::vector<std::string>{a}, embedder).front());
    for (const auto& s : buffer) {
        if (auto it = fx.topic_of.find(s.id); it != fx.topic_of.end()) c.assignment.emplace(s.id, it->second);
    }
    return c;
}

inline json config_json(const Fixture& fx) {
    json anchors = json::object();
    for (const auto& [a, w] : fx.embedding.anchors) anchors[a] = w;
    json synonyms = json::object();
    for (const auto& [a, b] : fx.embedding.synonyms) synonyms[a] = b;
    return json{
        {"paths", {{"buffer", "seed.jsonl"}, {"incoming", "incoming.jsonl"}, {"exports", "out"}, {"plans", "plans.jsonl"}}},
        {"thresholds", {{"dedup", kDefaultDedupThreshold}, {"tau_g", 1.5}, {"tau_b", 0.1}, {"min_support", 3}}},
        {"clustering", {{"k", fx.topics.size()}, {"seed", fx.options.seed}}},
        {"augmentation", {{"max_rounds", 5}, {"candidates_per_round", 5}, {"reps", 5}}},
        {"backends",
         {{"embedding",
           {{"kind", "mock"}, {"dim", fx.embedding.dim}, {"seed", fx.embedding.seed}, {"anchors", anchors},
            {"synonyms", synonyms}}},
          {"constructor", {{"kind", "mock"}, {"script", "scripts/constructor.json"}}},
          {"generator", {{"kind", "mock"}, {"script", "scripts/generator.json"}}},
          {"checker", {{"kind", "mock"}, {"script", "scripts/checker.json"}}}}},
    };
}

inline std::string serialize_plans(const std::map<std::string, std::string>& plans) {
    std::string out;
    for (const auto& [id, p] : plans) out += json{{"id", id}, {"plan", p}}.dump() + "\n";
    return out;
}

/// Writes seed.jsonl, incoming.jsonl, plans.jsonl, scripts/*.json and
/// config.json into `dir`.
inline void write_fixture(const Fixture& fx, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "scripts");
    save_corpus((dir / "seed.jsonl").string(), fx.seed);
    write_text((dir / "incoming.jsonl").string(), serialize_incoming(fx.incoming));
    write_text((dir / "plans.jsonl").string(), serialize_plans(fx.plans));
    write_text((dir / "scripts" / "constructor.json").string(), fx.constructor_script.dump(2) + "\n");
    write_text((dir / "scripts" / "generator.json").string(), fx.generator_script.dump(2) + "\n");
    write_text((dir / "scripts" / "checker.json").string(), fx.checker_script.dump(2) + "\n");
    write_text((dir / "config.json").string(), config_json(fx).dump(2) + "\n");
}

}  // namespace fcdata::synthetic
