#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "retex/attribution.hpp"
#include "retex/common.hpp"
#include "retex/encoder.hpp"
#include "retex/external_encoder.hpp"
#include "retex/reference_encoder.hpp"

namespace retex {

struct BackendSpec {
    std::string kind = "reference";  // reference | external
    std::optional<std::uint64_t> seed;
    int dim = 16;
    std::size_t max_seq_len = 350;
    std::string url;  // external only
};

// Flat key = value configuration. Every module receives its settings
// through this record; file values are overridden by --set pairs and then
// by dedicated flags, last writer wins. The effective map is echoed into
// run summaries.
struct RunConfig {
    std::string corpus_path;
    std::string queries_path;
    std::string qrels_path;

    BackendSpec backend_a;
    BackendSpec backend_b;

    IGConfig ig;
    std::size_t k_retrieve = 100;
    std::size_t k_explain = 25;
    std::size_t k_eval = 10;

    // Weight ranking clouds by separately accumulated positive-only and
    // negative-only parts instead of sign-split net totals.
    bool separate_accumulation = false;

    std::string output_dir = "out";
    std::uint64_t seed = 42;
    unsigned threads = 1;
    bool force = false;
    bool json_only = false;

    std::string index_path;    // defaults to <output_dir>/index.bin
    std::string index_b_path;  // defaults to <output_dir>/index_b.bin

    std::map<std::string, std::string> effective;  // resolved key/value echo

    std::string resolved_index_path(bool model_b = false) const {
        if (model_b) return index_b_path.empty() ? output_dir + "/index_b.bin" : index_b_path;
        return index_path.empty() ? output_dir + "/index.bin" : index_path;
    }

    std::uint64_t backend_seed(bool model_b = false) const {
        const BackendSpec& spec = model_b ? backend_b : backend_a;
        if (spec.seed) return *spec.seed;
        return derive_seed(seed, model_b ? "encoder-b" : "encoder-a");
    }

    std::uint64_t title_sampling_seed() const { return derive_seed(seed, "title-sampling"); }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        std::uint64_t out = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw Error("config: key '" + key + "' expects an unsigned integer, got '" + v + "'");
    }
}

inline double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw Error("config: key '" + key + "' expects a number, got '" + v + "'");
    }
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw Error("config: key '" + key + "' expects true/false, got '" + v + "'");
}

inline void apply_backend_key(BackendSpec& spec, const std::string& sub,
                              const std::string& value, const std::string& key) {
    if (sub == "kind") {
        if (value != "reference" && value != "external")
            throw Error("config: backend kind must be reference or external, got '" + value +
                        "'");
        spec.kind = value;
    } else if (sub == "seed") {
        spec.seed = parse_u64(value, key);
    } else if (sub == "dim") {
        spec.dim = static_cast<int>(parse_u64(value, key));
    } else if (sub == "max_seq_len") {
        spec.max_seq_len = parse_u64(value, key);
    } else if (sub == "url") {
        spec.url = value;
    } else {
        throw Error("config: unknown key '" + key + "'");
    }
}

}  // namespace detail

inline void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    using detail::parse_double;
    using detail::parse_u64;
    if (key == "corpus") cfg.corpus_path = value;
    else if (key == "queries") cfg.queries_path = value;
    else if (key == "qrels") cfg.qrels_path = value;
    else if (key.rfind("backend_b.", 0) == 0)
        detail::apply_backend_key(cfg.backend_b, key.substr(10), value, key);
    else if (key.rfind("backend.", 0) == 0)
        detail::apply_backend_key(cfg.backend_a, key.substr(8), value, key);
    else if (key == "ig.steps") cfg.ig.steps = static_cast<int>(parse_u64(value, key));
    else if (key == "ig.rule") cfg.ig.rule = quadrature_rule_from_string(value);
    else if (key == "ig.tolerance_rel") cfg.ig.tolerance_rel = parse_double(value, key);
    else if (key == "ig.tolerance_abs") cfg.ig.tolerance_abs = parse_double(value, key);
    else if (key == "k.retrieve") cfg.k_retrieve = parse_u64(value, key);
    else if (key == "k.explain") cfg.k_explain = parse_u64(value, key);
    else if (key == "k.eval") cfg.k_eval = parse_u64(value, key);
    else if (key == "ranking.separate_accumulation")
        cfg.separate_accumulation = detail::parse_bool(value, key);
    else if (key == "output.dir") cfg.output_dir = value;
    else if (key == "seed") cfg.seed = parse_u64(value, key);
    else if (key == "threads") cfg.threads = static_cast<unsigned>(parse_u64(value, key));
    else if (key == "index.path") cfg.index_path = value;
    else if (key == "index_b.path") cfg.index_b_path = value;
    else throw Error("config: unknown key '" + key + "'");
    cfg.effective[key] = value;
}

inline void load_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw Error(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = detail::trim(t.substr(0, eq));
        std::string value = detail::trim(t.substr(eq + 1));
        if (key.empty())
            throw Error(path + ":" + std::to_string(lineno) + ": empty key");
        apply_config_key(cfg, key, value);
    }
}

// Builds the configured backend. Reference backends derive the vocabulary
// from the corpus, so the same config plus the same collection reproduces
// the same model bit for bit.
inline std::unique_ptr<EncoderBackend> make_backend(const RunConfig& cfg, bool model_b,
                                                    const Vocabulary& vocab) {
    const BackendSpec& spec = model_b ? cfg.backend_b : cfg.backend_a;
    if (spec.kind == "reference") {
        return std::make_unique<ReferenceEncoder>(vocab, spec.dim, spec.max_seq_len,
                                                  cfg.backend_seed(model_b));
    }
    if (spec.kind == "external") {
        if (spec.url.empty())
            throw Error(std::string("config: backend") + (model_b ? "_b" : "") +
                        ".url required for the external backend");
        return std::make_unique<ExternalEncoder>(spec.url);
    }
    throw Error("config: unknown backend kind '" + spec.kind + "'");
}

}  // namespace retex
