#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "retex/attribution.hpp"
#include "retex/common.hpp"
#include "retex/corpus.hpp"
#include "retex/encoder.hpp"
#include "retex/index.hpp"

namespace retex {

struct InstanceExplanation {
    std::string query_id;
    std::string doc_id;
    AttributionResult query_attr;
    AttributionResult doc_attr;
    double score = 0.0;
};

struct RankingExplanation {
    std::string query_id;
    int k = 0;  // documents actually explained
    std::map<std::string, double> per_token_totals;
    // positive-only / negative-only parts, accumulated alongside the net
    // totals; per_token_totals[t] = positive_parts[t] - negative_parts[t]
    // up to rounding
    std::map<std::string, double> positive_parts;
    std::map<std::string, double> negative_parts;
    std::map<std::string, int> contributing_docs;
    std::vector<std::string> doc_ids;  // explained documents, doc_id ascending
};

struct TitleRow {
    std::string query_id;
    std::string doc_id;
    double title_sum_model_a = 0.0;
    double title_sum_model_b = 0.0;
};

struct TitleAttributionReport {
    std::vector<TitleRow> rows;
    std::uint64_t seed = 0;
    int skipped_queries = 0;  // queries with no relevant titled document
};

inline InstanceExplanation explain_instance(const Query& query, const Document& doc,
                                            const EncoderBackend& backend,
                                            const IGConfig& cfg) {
    TokenizedText query_tok = backend.tokenize(query.text, TextRole::kQuery);
    TokenizedText doc_tok = tokenize_document(backend, doc);

    InstanceExplanation ex;
    ex.query_id = query.query_id;
    ex.doc_id = doc.doc_id;
    ex.query_attr = attribute_side(query_tok, doc_tok, backend, Side::kQuery, cfg);
    ex.doc_attr = attribute_side(query_tok, doc_tok, backend, Side::kDocument, cfg);
    ex.score = ex.query_attr.score_f_x;
    return ex;
}

namespace detail {

inline std::unordered_map<std::string, const Document*> doc_lookup(
    const std::vector<Document>& corpus) {
    std::unordered_map<std::string, const Document*> lookup;
    lookup.reserve(corpus.size());
    for (const auto& d : corpus) lookup.emplace(d.doc_id, &d);
    return lookup;
}

inline bool excluded_token_string(const std::string& token) {
    return token == Vocabulary::kPadToken || token == Vocabulary::kClsToken ||
           token == Vocabulary::kSepToken;
}

// Accumulates one document's signed token scores into the totals, keyed by
// surface string. Special positions and special strings stay out.
inline void accumulate_document(const TokenizedText& tok, const AttributionResult& attr,
                                RankingExplanation& re) {
    std::set<std::string> seen_in_doc;
    for (std::size_t t = 0; t < tok.size(); ++t) {
        if (tok.special_mask[t]) continue;
        const std::string& token = attr.tokens[t];
        if (excluded_token_string(token)) continue;
        double s = attr.token_scores[t];
        re.per_token_totals[token] += s;
        if (s > 0.0)
            re.positive_parts[token] += s;
        else if (s < 0.0)
            re.negative_parts[token] -= s;
        seen_in_doc.insert(token);
    }
    for (const auto& token : seen_in_doc) re.contributing_docs[token] += 1;
}

}  // namespace detail

// Top-k retrieval followed by document-side attribution of every retrieved
// document, summed per token string. Attributions may run on several
// threads when the backend allows it; aggregation always walks the
// documents in doc_id-ascending order.
inline RankingExplanation explain_ranking(const Query& query,
                                          const std::vector<Document>& corpus,
                                          const DenseIndex& index,
                                          const EncoderBackend& backend, std::size_t k = 25,
                                          const IGConfig& cfg = IGConfig{},
                                          unsigned threads = 1) {
    if (index.model_fingerprint != backend.fingerprint())
        throw Error("explain_ranking: index fingerprint does not match backend");

    const Eigen::VectorXd query_vec = backend.encode(query.text, TextRole::kQuery);
    std::vector<ScoredDoc> top = retrieve(index, query_vec, k);

    auto lookup = detail::doc_lookup(corpus);
    TokenizedText query_tok = backend.tokenize(query.text, TextRole::kQuery);

    std::vector<std::string> ids;
    ids.reserve(top.size());
    for (const auto& sd : top) ids.push_back(sd.doc_id);
    std::sort(ids.begin(), ids.end());

    struct PerDoc {
        TokenizedText tok;
        AttributionResult attr;
    };
    std::vector<PerDoc> per_doc(ids.size());
    unsigned workers = backend.thread_safe() ? threads : 1;
    parallel_for(ids.size(), workers, [&](std::size_t i) {
        auto it = lookup.find(ids[i]);
        if (it == lookup.end())
            throw Error("explain_ranking: retrieved doc '" + ids[i] + "' not in corpus");
        try {
            per_doc[i].tok = tokenize_document(backend, *it->second);
            per_doc[i].attr =
                attribute_side(query_tok, per_doc[i].tok, backend, Side::kDocument, cfg);
        } catch (const Error& e) {
            throw Error("explain_ranking: attribution for doc '" + ids[i] +
                        "' failed: " + e.what());
        }
    });

    RankingExplanation re;
    re.query_id = query.query_id;
    re.k = static_cast<int>(ids.size());
    re.doc_ids = ids;
    for (std::size_t i = 0; i < ids.size(); ++i)
        detail::accumulate_document(per_doc[i].tok, per_doc[i].attr, re);
    return re;
}

// Default weighting: positive net totals keep their value, negative ones
// flip sign, zero totals land in neither map. With separate_accumulation a
// token is weighted by its positive-only / negative-only parts instead and
// may appear in both maps.
inline std::pair<std::map<std::string, double>, std::map<std::string, double>> split_signed(
    const RankingExplanation& re, bool separate_accumulation = false) {
    if (separate_accumulation) return {re.positive_parts, re.negative_parts};
    std::map<std::string, double> positive, negative;
    for (const auto& [token, total] : re.per_token_totals) {
        if (total > 0.0)
            positive[token] = total;
        else if (total < 0.0)
            negative[token] = -total;
    }
    return {std::move(positive), std::move(negative)};
}

// Sum of token scores over a content span.
inline double span_sum(const AttributionResult& attr, const TokenSpan& span) {
    double sum = 0.0;
    for (std::size_t t = span.begin; t < span.end && t < attr.token_scores.size(); ++t)
        sum += attr.token_scores[t];
    return sum;
}

// For each query, draws one relevant (grade >= 1) titled document with the
// seeded generator and attributes it under both backends; the report row
// carries the per-model title-span sums. Queries without such a document
// are skipped and counted. Selection happens sequentially over queries in
// query_id order before any attribution runs, so the drawn documents depend
// only on (seed, queries, qrels, corpus).
inline TitleAttributionReport title_attribution(const std::vector<Query>& queries,
                                                const Qrels& qrels,
                                                const std::vector<Document>& corpus,
                                                const EncoderBackend& backend_a,
                                                const EncoderBackend& backend_b,
                                                const IGConfig& cfg, std::uint64_t seed,
                                                unsigned threads = 1) {
    auto lookup = detail::doc_lookup(corpus);

    std::vector<const Query*> ordered;
    ordered.reserve(queries.size());
    for (const auto& q : queries) ordered.push_back(&q);
    std::sort(ordered.begin(), ordered.end(),
              [](const Query* a, const Query* b) { return a->query_id < b->query_id; });

    TitleAttributionReport report;
    report.seed = seed;

    struct Selection {
        const Query* query;
        const Document* doc;
    };
    std::vector<Selection> selected;
    std::mt19937_64 rng(seed);
    for (const Query* q : ordered) {
        std::vector<const Document*> candidates;
        for (const auto& [doc_id, grade] : qrels.judged_for(q->query_id)) {
            if (grade < 1) continue;
            auto it = lookup.find(doc_id);
            if (it == lookup.end() || it->second->title.empty()) continue;
            candidates.push_back(it->second);
        }
        if (candidates.empty()) {
            ++report.skipped_queries;
            continue;
        }
        std::size_t pick = static_cast<std::size_t>(rng() % candidates.size());
        selected.push_back({q, candidates[pick]});
    }
    if (selected.empty())
        throw Error("title_attribution: no query has a relevant titled document");

    report.rows.resize(selected.size());
    unsigned workers = (backend_a.thread_safe() && backend_b.thread_safe()) ? threads : 1;
    parallel_for(selected.size(), workers, [&](std::size_t i) {
        const Query& q = *selected[i].query;
        const Document& doc = *selected[i].doc;

        TitleRow row;
        row.query_id = q.query_id;
        row.doc_id = doc.doc_id;

        for (int model = 0; model < 2; ++model) {
            const EncoderBackend& backend = model == 0 ? backend_a : backend_b;
            TokenizedText query_tok = backend.tokenize(q.text, TextRole::kQuery);
            TokenizedText doc_tok = tokenize_document(backend, doc);
            if (!doc_tok.title_span)
                throw Error("title_attribution: doc '" + doc.doc_id + "' lost its title span");
            AttributionResult attr =
                attribute_side(query_tok, doc_tok, backend, Side::kDocument, cfg);
            double sum = span_sum(attr, *doc_tok.title_span);
            (model == 0 ? row.title_sum_model_a : row.title_sum_model_b) = sum;
        }
        report.rows[i] = std::move(row);
    });
    return report;
}

struct ModelComparison {
    RankingExplanation model_a;
    RankingExplanation model_b;
    std::map<std::string, double> delta;  // total_b - total_a over the key union
};

inline ModelComparison compare_models(const Query& query, const std::vector<Document>& corpus,
                                      const DenseIndex& index_a, const EncoderBackend& backend_a,
                                      const DenseIndex& index_b, const EncoderBackend& backend_b,
                                      std::size_t k, const IGConfig& cfg, unsigned threads = 1) {
    ModelComparison cmp;
    cmp.model_a = explain_ranking(query, corpus, index_a, backend_a, k, cfg, threads);
    cmp.model_b = explain_ranking(query, corpus, index_b, backend_b, k, cfg, threads);
    for (const auto& [token, total] : cmp.model_a.per_token_totals) cmp.delta[token] -= total;
    for (const auto& [token, total] : cmp.model_b.per_token_totals) cmp.delta[token] += total;
    return cmp;
}

inline nlohmann::json ranking_record(const RankingExplanation& re) {
    auto to_object = [](const auto& map) {
        nlohmann::json obj = nlohmann::json::object();
        for (const auto& [key, value] : map) obj[key] = value;
        return obj;
    };
    return nlohmann::json{{"query_id", re.query_id},
                          {"k", re.k},
                          {"doc_ids", re.doc_ids},
                          {"per_token_totals", to_object(re.per_token_totals)},
                          {"positive_parts", to_object(re.positive_parts)},
                          {"negative_parts", to_object(re.negative_parts)},
                          {"contributing_docs", to_object(re.contributing_docs)}};
}

inline nlohmann::json title_report_record(const TitleAttributionReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows)
        rows.push_back({{"query_id", r.query_id},
                        {"doc_id", r.doc_id},
                        {"title_sum_model_a", r.title_sum_model_a},
                        {"title_sum_model_b", r.title_sum_model_b}});
    return nlohmann::json{
        {"seed", report.seed}, {"skipped_queries", report.skipped_queries}, {"rows", rows}};
}

}  // namespace retex
