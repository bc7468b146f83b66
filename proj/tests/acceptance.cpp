// Acceptance suite: one [PASS]/[FAIL] line per criterion, nonzero exit on
// any failure. Criteria 10 and 11 need external model runtimes and full
// collections; they run only when the matching RETEX_EXTENDED_*_CONFIG
// environment variable points at a config file and print [SKIP] otherwise.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "retex/retex.hpp"

using namespace retex;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << criterion << ": " << detail
              << "\n";
    if (!ok) ++g_failures;
}

void report_skip(int criterion, const std::string& detail) {
    std::cout << "[SKIP] criterion " << criterion << ": " << detail << "\n";
}

const std::vector<std::string>& words() {
    static const std::vector<std::string> w = {
        "gold",    "invest", "hedge",  "inflation", "market", "bond",   "risk",  "fund",
        "corona",  "virus",  "vaccine", "symptom",  "fever",  "cough",  "study", "trial",
        "price",   "asset",  "yield",  "trade",     "bank",   "spread", "mask",  "disease"};
    return w;
}

std::string random_text(std::mt19937_64& rng, std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += " ";
        out += words()[rng() % words().size()];
    }
    return out;
}

Vocabulary shared_vocab() {
    Vocabulary v;
    for (const auto& w : words()) v.add(w);
    return v;
}

ReferenceEncoder make_encoder(std::uint64_t seed, int dim = 12) {
    return ReferenceEncoder(shared_vocab(), dim, 64, seed);
}

struct SpecialZeroLedger {
    long checked = 0;
    long violations = 0;

    void inspect(const TokenizedText& tok, const AttributionResult& attr) {
        for (std::size_t t = 0; t < tok.size(); ++t) {
            if (!tok.special_mask[t]) continue;
            ++checked;
            if (attr.token_scores[t] != 0.0) ++violations;
        }
    }
};

SpecialZeroLedger g_special_zero;

// --- criterion 1 + data for 6 ------------------------------------------

void criterion_1_completeness() {
    auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1001);
    IGConfig cfg;  // m = 128, trapezoid
    int violations = 0;
    double worst_margin = 0.0;
    for (int pair = 0; pair < 50; ++pair) {
        auto enc = make_encoder(2000 + pair);
        TokenizedText q = enc.tokenize(random_text(rng, 2 + rng() % 6), TextRole::kQuery);
        TokenizedText d = enc.tokenize(random_text(rng, 6 + rng() % 20), TextRole::kDocument);
        for (Side side : {Side::kQuery, Side::kDocument}) {
            AttributionResult r = attribute_side(q, d, enc, side, cfg);
            double bound = cfg.tolerance_for(r.score_f_x - r.score_f_baseline);
            if (r.completeness_residual > bound) ++violations;
            worst_margin = std::max(worst_margin, r.completeness_residual - bound);
            g_special_zero.inspect(side == Side::kQuery ? q : d, r);
        }
    }
    auto elapsed = std::chrono::duration_cast<std::chrono::seconds>(
                       std::chrono::steady_clock::now() - start)
                       .count();
    bool ok = violations == 0 && elapsed < 60;
    report(1, ok,
           "IG completeness on 50 pairs x 2 sides, m=128 trapezoid: " +
               std::to_string(violations) + " violations, " + std::to_string(elapsed) + "s");
}

// --- criterion 2 --------------------------------------------------------

void criterion_2_analytic_exactness() {
    std::mt19937_64 rng(1002);
    auto rnd = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0; };
    const Eigen::Index L = 5, d = 4;
    Eigen::MatrixXd w(L, d), x(L, d), x_base(L, d);
    for (Eigen::Index r = 0; r < L; ++r)
        for (Eigen::Index c = 0; c < d; ++c) {
            w(r, c) = rnd();
            x(r, c) = rnd();
            x_base(r, c) = rnd();
        }

    double worst_linear = 0.0;
    auto lin_f = [&](const Eigen::MatrixXd& e) { return w.cwiseProduct(e).sum(); };
    auto lin_g = [&](const Eigen::MatrixXd&) { return w; };
    Eigen::MatrixXd lin_expected = w.cwiseProduct(x - x_base);
    for (int m : {1, 16, 128}) {
        for (QuadratureRule rule : {QuadratureRule::kLeftRiemann, QuadratureRule::kTrapezoid}) {
            IGConfig cfg;
            cfg.steps = m;
            cfg.rule = rule;
            auto [attr, diag] = integrated_gradients(lin_f, lin_g, x, x_base, cfg);
            worst_linear =
                std::max(worst_linear, (attr - lin_expected).cwiseAbs().maxCoeff());
        }
    }

    double worst_quadratic = 0.0;
    auto quad_f = [](const Eigen::MatrixXd& e) { return e.squaredNorm(); };
    auto quad_g = [](const Eigen::MatrixXd& e) { return Eigen::MatrixXd(2.0 * e); };
    Eigen::MatrixXd quad_expected = x.cwiseProduct(x) - x_base.cwiseProduct(x_base);
    for (int m : {1, 2, 3, 7, 64, 128}) {
        IGConfig cfg;
        cfg.steps = m;
        cfg.rule = QuadratureRule::kTrapezoid;
        auto [attr, diag] = integrated_gradients(quad_f, quad_g, x, x_base, cfg);
        worst_quadratic =
            std::max(worst_quadratic, (attr - quad_expected).cwiseAbs().maxCoeff());
    }

    bool ok = worst_linear <= 1e-12 && worst_quadratic <= 1e-12;
    report(2, ok,
           "linear max dev " + format_double(worst_linear) + ", quadratic (trapezoid) " +
               format_double(worst_quadratic));
}

// --- criterion 3 --------------------------------------------------------

void criterion_3_gradient_vs_finite_differences() {
    std::mt19937_64 rng(1003);
    const double h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        auto enc = make_encoder(3000 + trial, 8);
        TokenizedText tok = enc.tokenize(random_text(rng, 5), TextRole::kDocument);
        Eigen::MatrixXd x = enc.embed(tok);
        Eigen::VectorXd fixed(enc.embedding_dim());
        for (Eigen::Index i = 0; i < fixed.size(); ++i)
            fixed(i) = static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;

        Eigen::MatrixXd analytic = enc.gradient_wrt_embeddings(tok, x, fixed);
        auto f = [&](const Eigen::MatrixXd& e) {
            return score(enc.forward_pooled(e, tok), fixed);
        };
        for (Eigen::Index t = 0; t < x.rows(); ++t)
            for (Eigen::Index c = 0; c < x.cols(); ++c) {
                Eigen::MatrixXd xp = x, xm = x;
                xp(t, c) += h;
                xm(t, c) -= h;
                double fd = (f(xp) - f(xm)) / (2 * h);
                worst = std::max(worst, std::abs(fd - analytic(t, c)));
            }
    }
    report(3, worst <= 1e-6,
           "max |analytic - central difference| = " + format_double(worst) +
               " over 20 five-token inputs");
}

// --- criterion 4 --------------------------------------------------------

void criterion_4_convergence_ordering() {
    std::mt19937_64 rng(1004);
    double coarse = 0.0, fine = 0.0;
    for (int pair = 0; pair < 20; ++pair) {
        auto enc = make_encoder(4000 + pair);
        TokenizedText q = enc.tokenize(random_text(rng, 2 + rng() % 5), TextRole::kQuery);
        TokenizedText d = enc.tokenize(random_text(rng, 5 + rng() % 15), TextRole::kDocument);
        IGConfig c16;
        c16.steps = 16;
        IGConfig c256;
        c256.steps = 256;
        coarse += attribute_side(q, d, enc, Side::kDocument, c16).completeness_residual;
        fine += attribute_side(q, d, enc, Side::kDocument, c256).completeness_residual;
    }
    coarse /= 20.0;
    fine /= 20.0;
    report(4, fine <= coarse,
           "mean residual m=256 (" + format_double(fine) + ") <= m=16 (" +
               format_double(coarse) + ")");
}

// --- criterion 5 --------------------------------------------------------

void criterion_5_retrieval_exactness() {
    std::mt19937_64 rng(1005);
    int mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 1 + rng() % 1000;
        Eigen::Index d = static_cast<Eigen::Index>(1 + rng() % 64);
        DenseIndex index;
        index.model_fingerprint = "acceptance";
        index.embeddings.resize(static_cast<Eigen::Index>(n), d);
        for (std::size_t i = 0; i < n; ++i) {
            index.doc_ids.push_back("doc" + std::to_string(rng() % (2 * n)) + "_" +
                                    std::to_string(i));
            for (Eigen::Index c = 0; c < d; ++c)
                index.embeddings(static_cast<Eigen::Index>(i), c) =
                    static_cast<double>(rng() % 5) - 2.0;  // coarse grid forces ties
        }
        Eigen::VectorXd q(d);
        for (Eigen::Index c = 0; c < d; ++c) q(c) = static_cast<double>(rng() % 5) - 2.0;

        auto got = retrieve(index, q, 25);

        std::vector<ScoredDoc> all;
        for (std::size_t i = 0; i < n; ++i)
            all.push_back({index.doc_ids[i],
                           index.embeddings.row(static_cast<Eigen::Index>(i)) * q});
        std::sort(all.begin(), all.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.doc_id < b.doc_id;
        });
        if (all.size() > 25) all.resize(25);
        if (got != all) ++mismatches;
    }
    report(5, mismatches == 0,
           "retrieve(k=25) vs brute-force sort on 100 random indexes: " +
               std::to_string(mismatches) + " mismatches");
}

// --- criterion 6 --------------------------------------------------------

void criterion_6_special_token_zero() {
    // extra explanations beyond criterion 1's ledger
    std::mt19937_64 rng(1006);
    IGConfig cfg;
    cfg.steps = 32;
    for (int i = 0; i < 5; ++i) {
        auto enc = make_encoder(6000 + i);
        Query q{"q", random_text(rng, 3)};
        Document doc{"d", random_text(rng, 2), random_text(rng, 10)};
        InstanceExplanation ex = explain_instance(q, doc, enc, cfg);
        TokenizedText q_tok = enc.tokenize(q.text, TextRole::kQuery);
        TokenizedText d_tok = tokenize_document(enc, doc);
        g_special_zero.inspect(q_tok, ex.query_attr);
        g_special_zero.inspect(d_tok, ex.doc_attr);
    }
    bool ok = g_special_zero.violations == 0 && g_special_zero.checked > 0;
    report(6, ok,
           "[CLS]/[SEP] scores exactly zero across " +
               std::to_string(g_special_zero.checked) + " special positions (" +
               std::to_string(g_special_zero.violations) + " violations)");
}

// --- criterion 7 --------------------------------------------------------

void criterion_7_ranking_aggregation_oracle() {
    std::mt19937_64 rng(1007);
    auto enc = make_encoder(7000);
    IGConfig cfg;
    cfg.steps = 32;
    std::vector<Document> corpus;
    for (int i = 0; i < 8; ++i)
        corpus.push_back({"d" + std::to_string(i), "", random_text(rng, 8)});
    DenseIndex index = build_index(corpus, enc);
    Query query{"q1", random_text(rng, 3)};

    RankingExplanation re = explain_ranking(query, corpus, index, enc, 5, cfg);

    // independent loop-and-sum over the same five documents
    std::vector<std::string> ids = re.doc_ids;
    std::sort(ids.begin(), ids.end());
    TokenizedText query_tok = enc.tokenize(query.text, TextRole::kQuery);
    std::map<std::string, double> expected;
    for (const auto& id : ids) {
        const Document* doc = nullptr;
        for (const auto& c : corpus)
            if (c.doc_id == id) doc = &c;
        TokenizedText doc_tok = tokenize_document(enc, *doc);
        AttributionResult attr = attribute_side(query_tok, doc_tok, enc, Side::kDocument, cfg);
        for (std::size_t t = 0; t < doc_tok.size(); ++t)
            if (!doc_tok.special_mask[t]) expected[attr.tokens[t]] += attr.token_scores[t];
    }
    bool ok = re.k == 5 && re.per_token_totals == expected;
    report(7, ok, "explain_ranking totals equal loop-and-sum re-aggregation on k=5 exactly");
}

// --- criterion 8 --------------------------------------------------------

double oracle_ndcg(const std::vector<std::string>& ranking,
                   const std::map<std::string, int>& grades, std::size_t k) {
    auto log2_of = [](double v) { return std::log(v) / std::log(2.0); };
    double dcg = 0.0;
    for (std::size_t i = 0; i < ranking.size() && i < k; ++i) {
        int g = grades.count(ranking[i]) ? grades.at(ranking[i]) : 0;
        dcg += (std::pow(2.0, g) - 1.0) / log2_of(static_cast<double>(i) + 2.0);
    }
    std::vector<int> ideal;
    for (const auto& [doc, g] : grades)
        if (g > 0) ideal.push_back(g);
    std::sort(ideal.rbegin(), ideal.rend());
    double idcg = 0.0;
    for (std::size_t i = 0; i < ideal.size() && i < k; ++i)
        idcg += (std::pow(2.0, ideal[i]) - 1.0) / log2_of(static_cast<double>(i) + 2.0);
    return idcg == 0.0 ? -1.0 : dcg / idcg;
}

void criterion_8_ndcg_oracle() {
    std::mt19937_64 rng(1008);
    double worst = 0.0;
    int disagreements = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::map<std::string, int> grades;
        std::vector<std::string> ranking;
        for (int i = 0; i < 50; ++i) {
            std::string id = "d" + std::to_string(i);
            ranking.push_back(id);
            if (rng() % 3 == 0) grades[id] = static_cast<int>(rng() % 4);
        }
        std::shuffle(ranking.begin(), ranking.end(), rng);
        Qrels qrels;
        for (const auto& [doc, g] : grades) qrels.judgments[{"q", doc}] = g;
        auto mine = ndcg_at_k(ranking, qrels, "q", 10);
        double expected = oracle_ndcg(ranking, grades, 10);
        if (expected < 0.0) {
            if (mine.has_value()) ++disagreements;
        } else if (!mine.has_value()) {
            ++disagreements;
        } else {
            worst = std::max(worst, std::abs(*mine - expected));
        }
    }

    Qrels fixture;
    fixture.judgments[{"q", "d1"}] = 1;
    auto perfect = ndcg_at_k({"d1", "d2", "d3"}, fixture, "q", 10);
    auto second = ndcg_at_k({"d2", "d1", "d3"}, fixture, "q", 10);
    bool fixtures_ok = perfect && std::abs(*perfect - 1.0) <= 1e-12 && second &&
                       std::abs(*second - 0.6309) <= 1e-4;

    bool ok = disagreements == 0 && worst <= 1e-9 && fixtures_ok;
    report(8, ok,
           "ndcg oracle max dev " + format_double(worst) + ", perfect=1.0, rank-2=" +
               (second ? format_double(*second) : "n/a"));
}

// --- criterion 9 --------------------------------------------------------

void criterion_9_title_determinism_and_additivity() {
    std::mt19937_64 rng(1009);
    auto enc_a = make_encoder(9001);
    auto enc_b = make_encoder(9002);
    IGConfig cfg;
    cfg.steps = 32;

    std::vector<Document> corpus;
    std::vector<Query> queries;
    Qrels qrels;
    for (int i = 0; i < 6; ++i) {
        corpus.push_back({"d" + std::to_string(i), random_text(rng, 2), random_text(rng, 10)});
        std::string qid = "q" + std::to_string(i % 4);
        if (i < 4) queries.push_back({qid, random_text(rng, 3)});
        qrels.judgments[{qid, "d" + std::to_string(i)}] = 1;
    }

    TitleAttributionReport r1 =
        title_attribution(queries, qrels, corpus, enc_a, enc_b, cfg, 13);
    TitleAttributionReport r2 =
        title_attribution(queries, qrels, corpus, enc_a, enc_b, cfg, 13);

    bool deterministic = r1.rows.size() == r2.rows.size();
    for (std::size_t i = 0; deterministic && i < r1.rows.size(); ++i)
        deterministic = r1.rows[i].query_id == r2.rows[i].query_id &&
                        r1.rows[i].doc_id == r2.rows[i].doc_id &&
                        r1.rows[i].title_sum_model_a == r2.rows[i].title_sum_model_a &&
                        r1.rows[i].title_sum_model_b == r2.rows[i].title_sum_model_b;

    // additivity: title sum + non-title content sum == total content sum
    double worst_gap = 0.0;
    for (const auto& row : r1.rows) {
        const Document* doc = nullptr;
        for (const auto& c : corpus)
            if (c.doc_id == row.doc_id) doc = &c;
        const Query* query = nullptr;
        for (const auto& q : queries)
            if (q.query_id == row.query_id) query = &q;
        TokenizedText q_tok = enc_a.tokenize(query->text, TextRole::kQuery);
        TokenizedText d_tok = tokenize_document(enc_a, *doc);
        AttributionResult attr = attribute_side(q_tok, d_tok, enc_a, Side::kDocument, cfg);
        double title = span_sum(attr, *d_tok.title_span);
        double non_title = 0.0;
        for (std::size_t t = 0; t < attr.token_scores.size(); ++t) {
            bool in_title = t >= d_tok.title_span->begin && t < d_tok.title_span->end;
            if (!in_title && !d_tok.special_mask[t]) non_title += attr.token_scores[t];
        }
        worst_gap =
            std::max(worst_gap, std::abs(title + non_title - attr.token_score_sum()));
        if (std::abs(title - row.title_sum_model_a) > 1e-15) deterministic = false;
    }

    bool ok = deterministic && worst_gap <= 1e-9;
    report(9, ok,
           "seeded selection bit-exact across runs; title+non-title vs total gap " +
               format_double(worst_gap));
}

// --- criteria 10 and 11 (extended, opt-in) ------------------------------

struct ExtendedTarget {
    const char* env;
    const char* collection;
    double base_expected;
    double adapted_expected;
};

// Expects a config whose backend/backend_b point at external runtimes
// serving the published base and domain-adapted models, with corpus,
// queries and qrels set to the full collection. Index files are reused
// when present since encoding takes hours.
EvalResult run_external_eval(const RunConfig& cfg, bool model_b) {
    auto corpus = load_corpus(cfg.corpus_path);
    auto queries = load_queries(cfg.queries_path);
    auto qrels = load_qrels(cfg.qrels_path);
    Vocabulary vocab = Vocabulary::from_corpus(corpus);
    auto backend = make_backend(cfg, model_b, vocab);
    std::string index_path = cfg.resolved_index_path(model_b);
    DenseIndex index;
    if (std::ifstream(index_path).good()) {
        index = load_index(index_path, backend.get());
    } else {
        index = build_index(corpus, *backend, 32, [](std::size_t done, std::size_t total) {
            if (done % 1024 == 0 || done == total)
                std::cerr << "encoded " << done << "/" << total << "\n";
        });
        save_index(index, index_path);
    }
    return evaluate_run(index, *backend, queries, qrels, 10);
}

void criterion_10_table_reproduction() {
    const ExtendedTarget targets[] = {
        {"RETEX_EXTENDED_TRECCOVID_CONFIG", "TREC-COVID", 0.6510, 0.7160},
        {"RETEX_EXTENDED_FIQA_CONFIG", "FIQA", 0.2670, 0.3680},
    };
    bool any_ran = false, all_ok = true;
    std::string detail;
    for (const auto& target : targets) {
        const char* path = std::getenv(target.env);
        if (!path) continue;
        any_ran = true;
        RunConfig cfg;
        load_config_file(cfg, path);
        EvalResult base = run_external_eval(cfg, false);
        EvalResult adapted = run_external_eval(cfg, true);
        bool ok = std::abs(base.mean - target.base_expected) <= 0.01 &&
                  std::abs(adapted.mean - target.adapted_expected) <= 0.01;
        all_ok = all_ok && ok;
        detail += std::string(target.collection) + " base " + format_double(base.mean) +
                  " adapted " + format_double(adapted.mean) + "; ";
    }
    if (!any_ran) {
        report_skip(10,
                    "NDCG@10 table reproduction needs external model runtimes; set "
                    "RETEX_EXTENDED_TRECCOVID_CONFIG / RETEX_EXTENDED_FIQA_CONFIG to enable");
        return;
    }
    report(10, all_ok, detail + "expected within +/-0.01 of published values");
}

void criterion_11_title_directionality() {
    const char* path = std::getenv("RETEX_EXTENDED_TRECCOVID_CONFIG");
    if (!path) {
        report_skip(11,
                    "title-attribution directionality needs the TREC-COVID external setup; "
                    "set RETEX_EXTENDED_TRECCOVID_CONFIG to enable");
        return;
    }
    RunConfig cfg;
    load_config_file(cfg, path);
    auto corpus = load_corpus(cfg.corpus_path);
    auto queries = load_queries(cfg.queries_path);
    auto qrels = load_qrels(cfg.qrels_path);
    Vocabulary vocab = Vocabulary::from_corpus(corpus);
    auto base = make_backend(cfg, false, vocab);
    auto adapted = make_backend(cfg, true, vocab);
    TitleAttributionReport report_rows = title_attribution(
        queries, qrels, corpus, *base, *adapted, cfg.ig, cfg.title_sampling_seed());
    double sum_base = 0.0, sum_adapted = 0.0;
    for (const auto& row : report_rows.rows) {
        sum_base += row.title_sum_model_a;
        sum_adapted += row.title_sum_model_b;
    }
    bool ok = sum_adapted > sum_base && sum_base < 0.0;
    report(11, ok,
           "aggregate title sums: base " + format_double(sum_base) + ", adapted " +
               format_double(sum_adapted) + " (adapted > base, base < 0)");
}

}  // namespace

int main() {
    criterion_1_completeness();
    criterion_2_analytic_exactness();
    criterion_3_gradient_vs_finite_differences();
    criterion_4_convergence_ordering();
    criterion_5_retrieval_exactness();
    criterion_6_special_token_zero();
    criterion_7_ranking_aggregation_oracle();
    criterion_8_ndcg_oracle();
    criterion_9_title_determinism_and_additivity();
    criterion_10_table_reproduction();
    criterion_11_title_directionality();

    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all runnable criteria passed\n";
    return 0;
}
