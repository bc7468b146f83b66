#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "retex/common.hpp"
#include "retex/corpus.hpp"
#include "retex/encoder.hpp"
#include "retex/index.hpp"

namespace retex {

struct EvalResult {
    std::string metric = "ndcg@10";
    std::map<std::string, double> per_query;
    double mean = 0.0;
    int excluded_queries = 0;  // zero-IDCG queries left out of the mean
};

// Standard graded formulation: gain 2^g - 1, discount log2(i + 1) at
// 1-based rank i. IDCG comes from the ideal ordering of every judged
// document for the query. Unjudged documents carry grade 0. Returns
// nullopt when the query has no positively judged document (IDCG = 0).
inline std::optional<double> ndcg_at_k(const std::vector<std::string>& ranked_doc_ids,
                                       const Qrels& qrels, const std::string& query_id,
                                       std::size_t k = 10) {
    if (ranked_doc_ids.empty()) throw Error("ndcg_at_k: empty ranking");

    auto gain = [](int grade) { return std::exp2(static_cast<double>(grade)) - 1.0; };
    auto discount = [](std::size_t rank1) {
        return std::log2(static_cast<double>(rank1) + 1.0);
    };

    double dcg = 0.0;
    std::size_t cutoff = std::min(k, ranked_doc_ids.size());
    for (std::size_t i = 0; i < cutoff; ++i)
        dcg += gain(qrels.grade(query_id, ranked_doc_ids[i])) / discount(i + 1);

    std::vector<int> grades;
    for (const auto& [doc_id, grade] : qrels.judged_for(query_id))
        if (grade > 0) grades.push_back(grade);
    if (grades.empty()) return std::nullopt;
    std::sort(grades.begin(), grades.end(), std::greater<int>());

    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, grades.size()); ++i)
        idcg += gain(grades[i]) / discount(i + 1);
    return dcg / idcg;
}

// Retrieves top max(k, 100) per query and reports mean NDCG@k over the
// evaluable queries, in query_id order.
inline EvalResult evaluate_run(const DenseIndex& index, const EncoderBackend& backend,
                               const std::vector<Query>& queries, const Qrels& qrels,
                               std::size_t k = 10) {
    if (index.model_fingerprint != backend.fingerprint())
        throw Error("evaluate_run: index fingerprint does not match backend");
    if (queries.empty()) throw Error("evaluate_run: no queries");

    std::vector<const Query*> ordered;
    ordered.reserve(queries.size());
    for (const auto& q : queries) ordered.push_back(&q);
    std::sort(ordered.begin(), ordered.end(),
              [](const Query* a, const Query* b) { return a->query_id < b->query_id; });

    EvalResult result;
    result.metric = "ndcg@" + std::to_string(k);
    double sum = 0.0;
    for (const Query* q : ordered) {
        Eigen::VectorXd qvec = backend.encode(q->text, TextRole::kQuery);
        std::vector<ScoredDoc> top = retrieve(index, qvec, std::max<std::size_t>(k, 100));
        std::vector<std::string> ids;
        ids.reserve(top.size());
        for (const auto& sd : top) ids.push_back(sd.doc_id);
        std::optional<double> ndcg = ndcg_at_k(ids, qrels, q->query_id, k);
        if (!ndcg) {
            ++result.excluded_queries;
            continue;
        }
        result.per_query[q->query_id] = *ndcg;
        sum += *ndcg;
    }
    if (result.per_query.empty())
        throw Error("evaluate_run: no evaluable queries (all have empty qrels)");
    result.mean = sum / static_cast<double>(result.per_query.size());
    return result;
}

inline nlohmann::json eval_record(const EvalResult& result) {
    nlohmann::json per_query = nlohmann::json::object();
    for (const auto& [qid, v] : result.per_query) per_query[qid] = v;
    return nlohmann::json{{"metric", result.metric},
                          {"mean", result.mean},
                          {"excluded_queries", result.excluded_queries},
                          {"per_query", per_query}};
}

}  // namespace retex
