// retex command-line driver: index, retrieve, explain, explain-ranking,
// title-attrib, eval, compare. A flat key = value config file supplies
// paths and model settings; --set and dedicated flags override it.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "retex/retex.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliState {
    retex::RunConfig cfg;
    std::string config_path;
    std::vector<std::string> overrides;
};

json config_echo(const retex::RunConfig& cfg) {
    json j;
    j["corpus"] = cfg.corpus_path;
    j["queries"] = cfg.queries_path;
    j["qrels"] = cfg.qrels_path;
    j["backend.kind"] = cfg.backend_a.kind;
    j["backend.seed"] = cfg.backend_seed(false);
    j["backend.dim"] = cfg.backend_a.dim;
    j["backend.max_seq_len"] = cfg.backend_a.max_seq_len;
    j["backend_b.kind"] = cfg.backend_b.kind;
    j["backend_b.seed"] = cfg.backend_seed(true);
    j["backend_b.dim"] = cfg.backend_b.dim;
    j["ig.steps"] = cfg.ig.steps;
    j["ig.rule"] = retex::to_string(cfg.ig.rule);
    j["ig.tolerance_rel"] = cfg.ig.tolerance_rel;
    j["ig.tolerance_abs"] = cfg.ig.tolerance_abs;
    j["k.retrieve"] = cfg.k_retrieve;
    j["k.explain"] = cfg.k_explain;
    j["k.eval"] = cfg.k_eval;
    j["ranking.separate_accumulation"] = cfg.separate_accumulation;
    j["output.dir"] = cfg.output_dir;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    return j;
}

std::string sanitize_id(const std::string& id) {
    std::string out;
    out.reserve(id.size());
    for (char c : id)
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.'
                          ? c
                          : '_');
    return out;
}

void ensure_writable(const retex::RunConfig& cfg, const std::string& path) {
    if (!cfg.force && fs::exists(path))
        throw retex::Error("output exists: " + path + " (pass --force to overwrite)");
}

void prepare_output_dir(const retex::RunConfig& cfg) {
    fs::create_directories(cfg.output_dir);
}

std::vector<retex::Document> load_corpus_checked(const retex::RunConfig& cfg) {
    if (cfg.corpus_path.empty()) throw retex::Error("config: corpus path not set");
    return retex::load_corpus(cfg.corpus_path);
}

std::vector<retex::Query> load_queries_checked(const retex::RunConfig& cfg) {
    if (cfg.queries_path.empty()) throw retex::Error("config: queries path not set");
    return retex::load_queries(cfg.queries_path);
}

retex::Qrels load_qrels_checked(const retex::RunConfig& cfg) {
    if (cfg.qrels_path.empty()) throw retex::Error("config: qrels path not set");
    return retex::load_qrels(cfg.qrels_path);
}

const retex::Query& find_query(const std::vector<retex::Query>& queries,
                               const std::string& query_id) {
    for (const auto& q : queries)
        if (q.query_id == query_id) return q;
    throw retex::Error("unknown query_id '" + query_id + "'");
}

const retex::Document& find_document(const std::vector<retex::Document>& corpus,
                                     const std::string& doc_id) {
    for (const auto& d : corpus)
        if (d.doc_id == doc_id) return d;
    throw retex::Error("unknown doc_id '" + doc_id + "'");
}

std::unique_ptr<retex::EncoderBackend> backend_from(const CliState& st, bool model_b,
                                                    const std::vector<retex::Document>& corpus) {
    retex::Vocabulary vocab = retex::Vocabulary::from_corpus(corpus);
    return retex::make_backend(st.cfg, model_b, vocab);
}

void write_jsonl(const std::string& path, const std::vector<json>& records) {
    std::ofstream out(path);
    if (!out) throw retex::Error("cannot write " + path);
    for (const auto& r : records) out << r.dump() << "\n";
}

int cmd_index(CliState& st, bool model_b) {
    const auto& cfg = st.cfg;
    auto corpus = load_corpus_checked(cfg);
    auto backend = backend_from(st, model_b, corpus);

    prepare_output_dir(cfg);
    std::string index_path = cfg.resolved_index_path(model_b);
    ensure_writable(cfg, index_path);

    retex::DenseIndex index =
        retex::build_index(corpus, *backend, 32, [](std::size_t done, std::size_t total) {
            std::fprintf(stderr, "encoded %zu/%zu documents\n", done, total);
        });
    retex::save_index(index, index_path);

    // Reference backends also persist their parameters and vocabulary next
    // to the index so the exact model can be inspected or reloaded.
    if ((model_b ? cfg.backend_b.kind : cfg.backend_a.kind) == "reference") {
        auto* ref = dynamic_cast<retex::ReferenceEncoder*>(backend.get());
        std::string params_path =
            cfg.output_dir + (model_b ? "/encoder_b.bin" : "/encoder.bin");
        std::string vocab_path = cfg.output_dir + (model_b ? "/vocab_b.txt" : "/vocab.txt");
        ensure_writable(cfg, params_path);
        ensure_writable(cfg, vocab_path);
        ref->save_params(params_path);
        ref->vocabulary().save(vocab_path);
    }

    if (cfg.json_only) {
        json j{{"command", "index"},
               {"n", index.size()},
               {"dim", index.dim()},
               {"fingerprint", index.model_fingerprint},
               {"index_path", index_path},
               {"config", config_echo(cfg)}};
        std::cout << j.dump() << "\n";
    } else {
        std::cout << "indexed N=" << index.size() << " d=" << index.dim()
                  << " fingerprint=" << index.model_fingerprint << " -> " << index_path
                  << "\n";
    }
    return 0;
}

int cmd_retrieve(CliState& st, const std::string& query_id, const std::string& text,
                 std::size_t k) {
    const auto& cfg = st.cfg;
    auto corpus = load_corpus_checked(cfg);
    auto backend = backend_from(st, false, corpus);
    retex::DenseIndex index = retex::load_index(cfg.resolved_index_path(), backend.get());

    std::string query_text = text;
    if (query_text.empty()) {
        auto queries = load_queries_checked(cfg);
        query_text = find_query(queries, query_id).text;
    }
    Eigen::VectorXd qvec = backend->encode(query_text, retex::TextRole::kQuery);
    auto ranked = retex::retrieve(index, qvec, k == 0 ? cfg.k_retrieve : k);

    if (cfg.json_only) {
        json rows = json::array();
        for (const auto& sd : ranked) rows.push_back({{"doc_id", sd.doc_id}, {"score", sd.score}});
        std::cout << json{{"command", "retrieve"}, {"results", rows}}.dump() << "\n";
    } else {
        std::size_t rank = 1;
        for (const auto& sd : ranked)
            std::cout << rank++ << "\t" << sd.doc_id << "\t" << retex::format_double(sd.score)
                      << "\n";
    }
    return 0;
}

int cmd_explain(CliState& st, const std::string& query_id, const std::string& doc_id) {
    const auto& cfg = st.cfg;
    auto corpus = load_corpus_checked(cfg);
    auto queries = load_queries_checked(cfg);
    const auto& query = find_query(queries, query_id);
    const auto& doc = find_document(corpus, doc_id);
    auto backend = backend_from(st, false, corpus);

    // refuse before attributing; IG runs can be expensive
    std::string stem = cfg.output_dir + "/explain_" + sanitize_id(query_id) + "_" +
                       sanitize_id(doc_id);
    if (!cfg.json_only) {
        ensure_writable(cfg, stem + ".html");
        ensure_writable(cfg, stem + ".jsonl");
    }

    retex::InstanceExplanation ex = retex::explain_instance(query, doc, *backend, cfg.ig);
    json query_rec = retex::attribution_record(query_id, doc_id, ex.query_attr, cfg.ig);
    json doc_rec = retex::attribution_record(query_id, doc_id, ex.doc_attr, cfg.ig);

    if (cfg.json_only) {
        std::cout << query_rec.dump() << "\n" << doc_rec.dump() << "\n";
        return 0;
    }

    prepare_output_dir(cfg);
    retex::render_instance(ex, stem + ".html");
    write_jsonl(stem + ".jsonl", {query_rec, doc_rec});

    bool ok_q = ex.query_attr.within_tolerance(cfg.ig);
    bool ok_d = ex.doc_attr.within_tolerance(cfg.ig);
    std::cout << "explained " << query_id << "/" << doc_id
              << " score=" << retex::format_double(ex.score)
              << " query_residual=" << retex::format_double(ex.query_attr.completeness_residual)
              << (ok_q ? " (within tolerance)" : " (EXCEEDS tolerance)")
              << " doc_residual=" << retex::format_double(ex.doc_attr.completeness_residual)
              << (ok_d ? " (within tolerance)" : " (EXCEEDS tolerance)") << "\n"
              << "wrote " << stem << ".html, " << stem << ".jsonl\n";
    return 0;
}

int cmd_explain_ranking(CliState& st, const std::string& query_id) {
    const auto& cfg = st.cfg;
    auto corpus = load_corpus_checked(cfg);
    auto queries = load_queries_checked(cfg);
    const auto& query = find_query(queries, query_id);
    auto backend = backend_from(st, false, corpus);
    retex::DenseIndex index = retex::load_index(cfg.resolved_index_path(), backend.get());

    std::string stem = cfg.output_dir + "/ranking_" + sanitize_id(query_id);
    if (!cfg.json_only) {
        ensure_writable(cfg, stem + ".jsonl");
        ensure_writable(cfg, stem + ".tsv");
    }

    retex::RankingExplanation re = retex::explain_ranking(query, corpus, index, *backend,
                                                          cfg.k_explain, cfg.ig, cfg.threads);
    auto [positive, negative] = retex::split_signed(re, cfg.separate_accumulation);

    if (cfg.json_only) {
        std::cout << retex::ranking_record(re).dump() << "\n";
        return 0;
    }

    prepare_output_dir(cfg);
    std::vector<std::string> written;
    write_jsonl(stem + ".jsonl", {retex::ranking_record(re)});
    written.push_back(stem + ".jsonl");
    retex::emit_ranking_table(re, stem + ".tsv");
    written.push_back(stem + ".tsv");

    for (auto [weights, polarity, suffix] :
         {std::tuple{&positive, retex::Polarity::kPositive, "_positive.tsv"},
          std::tuple{&negative, retex::Polarity::kNegative, "_negative.tsv"}}) {
        std::string path = stem + suffix;
        if (weights->empty()) {
            std::cout << "no " << retex::to_string(polarity) << " attributions for "
                      << query_id << "; " << path << " not written\n";
            continue;
        }
        ensure_writable(cfg, path);
        retex::emit_cloud(retex::make_cloud(*weights, polarity, query_id, re.k), path);
        written.push_back(path);
    }
    std::cout << "explained ranking for " << query_id << " over k=" << re.k << " documents\n";
    for (const auto& p : written) std::cout << "wrote " << p << "\n";
    return 0;
}

int cmd_title_attrib(CliState& st) {
    const auto& cfg = st.cfg;
    auto corpus = load_corpus_checked(cfg);
    auto queries = load_queries_checked(cfg);
    auto qrels = load_qrels_checked(cfg);
    qrels.validate_against(queries);
    auto backend_a = backend_from(st, false, corpus);
    auto backend_b = backend_from(st, true, corpus);

    std::string path = cfg.output_dir + "/title_summary.tsv";
    if (!cfg.json_only) ensure_writable(cfg, path);

    retex::TitleAttributionReport report =
        retex::title_attribution(queries, qrels, corpus, *backend_a, *backend_b, cfg.ig,
                                 cfg.title_sampling_seed(), cfg.threads);

    if (cfg.json_only) {
        std::cout << retex::title_report_record(report).dump() << "\n";
        return 0;
    }

    prepare_output_dir(cfg);
    retex::emit_title_summary(report, path);
    std::cout << "title attribution over " << report.rows.size() << " queries ("
              << report.skipped_queries << " skipped) -> " << path << "\n";
    return 0;
}

int cmd_eval(CliState& st) {
    const auto& cfg = st.cfg;
    auto corpus = load_corpus_checked(cfg);
    auto queries = load_queries_checked(cfg);
    auto qrels = load_qrels_checked(cfg);
    qrels.validate_against(queries);
    auto backend = backend_from(st, false, corpus);
    retex::DenseIndex index = retex::load_index(cfg.resolved_index_path(), backend.get());

    retex::EvalResult result = retex::evaluate_run(index, *backend, queries, qrels, cfg.k_eval);

    if (cfg.json_only) {
        json j = retex::eval_record(result);
        j["config"] = config_echo(cfg);
        std::cout << j.dump() << "\n";
        return 0;
    }

    prepare_output_dir(cfg);
    std::string path = cfg.output_dir + "/eval.jsonl";
    ensure_writable(cfg, path);
    write_jsonl(path, {retex::eval_record(result)});

    for (const auto& [qid, v] : result.per_query)
        std::cout << qid << "\t" << retex::format_double(v) << "\n";
    std::cout << "mean " << result.metric << "\t" << retex::format_double(result.mean) << "\n";
    if (result.excluded_queries > 0)
        std::cout << "excluded " << result.excluded_queries << " zero-IDCG queries\n";
    std::cout << "wrote " << path << "\n";
    return 0;
}

int cmd_compare(CliState& st, const std::string& query_id) {
    const auto& cfg = st.cfg;
    auto corpus = load_corpus_checked(cfg);
    auto queries = load_queries_checked(cfg);
    const auto& query = find_query(queries, query_id);
    auto backend_a = backend_from(st, false, corpus);
    auto backend_b = backend_from(st, true, corpus);
    retex::DenseIndex index_a = retex::load_index(cfg.resolved_index_path(false), backend_a.get());
    retex::DenseIndex index_b = retex::load_index(cfg.resolved_index_path(true), backend_b.get());

    if (!cfg.json_only) {
        std::string base = cfg.output_dir + "/compare_" + sanitize_id(query_id);
        ensure_writable(cfg, base + "_delta.tsv");
        ensure_writable(cfg, base + ".jsonl");
    }

    retex::ModelComparison cmp =
        retex::compare_models(query, corpus, index_a, *backend_a, index_b, *backend_b,
                              cfg.k_explain, cfg.ig, cfg.threads);

    json delta = json::object();
    for (const auto& [token, d] : cmp.delta) delta[token] = d;
    json record{{"query_id", query_id},
                {"delta", delta},
                {"model_a", retex::ranking_record(cmp.model_a)},
                {"model_b", retex::ranking_record(cmp.model_b)}};

    if (cfg.json_only) {
        std::cout << record.dump() << "\n";
        return 0;
    }

    prepare_output_dir(cfg);
    std::string stem = cfg.output_dir + "/compare_" + sanitize_id(query_id);
    std::vector<std::string> written;

    for (auto [re, tag] : {std::pair{&cmp.model_a, "a"}, std::pair{&cmp.model_b, "b"}}) {
        auto [positive, negative] = retex::split_signed(*re, cfg.separate_accumulation);
        for (auto [weights, polarity, suffix] :
             {std::tuple{&positive, retex::Polarity::kPositive, "_positive.tsv"},
              std::tuple{&negative, retex::Polarity::kNegative, "_negative.tsv"}}) {
            if (weights->empty()) continue;
            std::string path = stem + "_model_" + tag + suffix;
            ensure_writable(cfg, path);
            retex::emit_cloud(retex::make_cloud(*weights, polarity, query_id, re->k), path);
            written.push_back(path);
        }
    }

    std::string delta_path = stem + "_delta.tsv";
    ensure_writable(cfg, delta_path);
    {
        std::ofstream out(delta_path);
        if (!out) throw retex::Error("cannot write " + delta_path);
        out << "# query_id=" << query_id << "\tk=" << cfg.k_explain << "\tdelta=b-a\n";
        std::vector<std::pair<std::string, double>> rows(cmp.delta.begin(), cmp.delta.end());
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            double aa = std::abs(a.second), bb = std::abs(b.second);
            if (aa != bb) return aa > bb;
            return a.first < b.first;
        });
        for (const auto& [token, d] : rows)
            out << token << "\t" << retex::format_double(d) << "\n";
    }
    written.push_back(delta_path);

    std::string record_path = stem + ".jsonl";
    ensure_writable(cfg, record_path);
    write_jsonl(record_path, {record});
    written.push_back(record_path);

    std::cout << "compared models for " << query_id << "\n";
    for (const auto& p : written) std::cout << "wrote " << p << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"token attributions for bi-encoder dense retrievers"};
    app.require_subcommand(1);
    app.fallthrough();

    CliState st;
    std::uint64_t seed_flag = 0;
    unsigned threads_flag = 0;
    std::string output_dir_flag;
    bool force = false, json_only = false;

    app.add_option("--config", st.config_path, "flat key = value config file");
    app.add_option("--set", st.overrides, "override a config key, e.g. --set ig.steps=64");
    auto* opt_outdir = app.add_option("--output-dir", output_dir_flag, "artifact directory");
    auto* opt_seed = app.add_option("--seed", seed_flag, "global seed");
    auto* opt_threads = app.add_option("--threads", threads_flag, "worker thread cap");
    app.add_flag("--force", force, "overwrite existing outputs");
    app.add_flag("--json", json_only, "print records to stdout instead of writing files");

    auto* sc_index = app.add_subcommand("index", "encode the corpus and persist the index");
    bool index_model_b = false;
    sc_index->add_flag("--model-b", index_model_b, "index with backend_b into index_b");

    auto* sc_retrieve = app.add_subcommand("retrieve", "top-k dot-product retrieval");
    std::string r_query_id, r_text;
    std::size_t r_k = 0;
    sc_retrieve->add_option("--query-id", r_query_id, "query id from the query file");
    sc_retrieve->add_option("--text", r_text, "free-form query text");
    sc_retrieve->add_option("-k", r_k, "result count (default k.retrieve)");

    auto* sc_explain = app.add_subcommand("explain", "instance attribution heatmap + records");
    std::string e_query_id, e_doc_id;
    sc_explain->add_option("query_id", e_query_id)->required();
    sc_explain->add_option("doc_id", e_doc_id)->required();

    auto* sc_ranking = app.add_subcommand("explain-ranking",
                                          "aggregate attributions over top-k documents");
    std::string rk_query_id;
    sc_ranking->add_option("query_id", rk_query_id)->required();

    auto* sc_title = app.add_subcommand("title-attrib",
                                        "title attribution comparison between two models");

    auto* sc_eval = app.add_subcommand("eval", "NDCG@k retrieval effectiveness");

    auto* sc_compare = app.add_subcommand("compare", "paired ranking explanations + deltas");
    std::string c_query_id;
    sc_compare->add_option("query_id", c_query_id)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (!st.config_path.empty()) retex::load_config_file(st.cfg, st.config_path);
        for (const auto& kv : st.overrides) {
            std::size_t eq = kv.find('=');
            if (eq == std::string::npos)
                throw retex::Error("--set expects key=value, got '" + kv + "'");
            retex::apply_config_key(st.cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (*opt_outdir) st.cfg.output_dir = output_dir_flag;
        if (*opt_seed) st.cfg.seed = seed_flag;
        if (*opt_threads) st.cfg.threads = threads_flag;
        st.cfg.force = force;
        st.cfg.json_only = json_only;
        st.cfg.ig.validate();

        if (sc_index->parsed()) return cmd_index(st, index_model_b);
        if (sc_retrieve->parsed()) {
            if (r_query_id.empty() && r_text.empty())
                throw retex::Error("retrieve needs --query-id or --text");
            return cmd_retrieve(st, r_query_id, r_text, r_k);
        }
        if (sc_explain->parsed()) return cmd_explain(st, e_query_id, e_doc_id);
        if (sc_ranking->parsed()) return cmd_explain_ranking(st, rk_query_id);
        if (sc_title->parsed()) return cmd_title_attrib(st);
        if (sc_eval->parsed()) return cmd_eval(st);
        if (sc_compare->parsed()) return cmd_compare(st, c_query_id);
        throw retex::Error("no subcommand given");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
