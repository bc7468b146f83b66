#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "retex/binio.hpp"
#include "retex/common.hpp"
#include "retex/corpus.hpp"
#include "retex/encoder.hpp"

namespace retex {

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;
    bool operator==(const ScoredDoc&) const = default;
};

// Exact dot-product index. Row i of `embeddings` is the encoding of
// doc_ids[i]'s full text. Immutable after build; concurrent retrieval is
// safe. built_at is informational only and is not persisted, so index files
// are byte-stable across identical rebuilds.
struct DenseIndex {
    std::vector<std::string> doc_ids;
    Eigen::MatrixXd embeddings;  // N x d
    std::string model_fingerprint;
    std::int64_t built_at = 0;  // unix seconds; 0 when loaded from disk

    std::size_t size() const { return doc_ids.size(); }
    Eigen::Index dim() const { return embeddings.cols(); }
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

inline DenseIndex build_index(const std::vector<Document>& corpus, const EncoderBackend& backend,
                              std::size_t batch_size = 32, const ProgressFn& progress = {}) {
    if (corpus.empty()) throw Error("build_index: empty corpus");
    if (batch_size == 0) throw Error("build_index: batch_size must be positive");

    std::unordered_set<std::string> seen;
    for (const auto& d : corpus)
        if (!seen.insert(d.doc_id).second)
            throw Error("build_index: duplicate doc_id '" + d.doc_id + "'");

    DenseIndex index;
    index.doc_ids.reserve(corpus.size());
    index.embeddings.resize(static_cast<Eigen::Index>(corpus.size()), backend.embedding_dim());
    index.model_fingerprint = backend.fingerprint();
    index.built_at = std::chrono::duration_cast<std::chrono::seconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();

    // Batches only chunk progress reporting; each document encodes
    // independently, so batch size never changes the rows.
    std::size_t done = 0;
    for (std::size_t start = 0; start < corpus.size(); start += batch_size) {
        std::size_t end = std::min(start + batch_size, corpus.size());
        for (std::size_t i = start; i < end; ++i) {
            const Document& doc = corpus[i];
            try {
                index.embeddings.row(static_cast<Eigen::Index>(i)) =
                    backend.encode(doc.full_text(), TextRole::kDocument).transpose();
            } catch (const Error& e) {
                throw Error("build_index: encoding doc '" + doc.doc_id +
                            "' failed: " + e.what());
            }
            index.doc_ids.push_back(doc.doc_id);
        }
        done = end;
        if (progress) progress(done, corpus.size());
    }
    return index;
}

// The k highest dot products, scores descending, ties broken by ascending
// doc_id. Returns min(k, N) entries.
inline std::vector<ScoredDoc> retrieve(const DenseIndex& index, const Eigen::VectorXd& query_vec,
                                       std::size_t k) {
    if (k == 0) throw Error("retrieve: k must be >= 1");
    if (query_vec.size() != index.dim())
        throw Error("retrieve: query dimension " + std::to_string(query_vec.size()) +
                    " does not match index dimension " + std::to_string(index.dim()));

    const Eigen::VectorXd scores = index.embeddings * query_vec;
    std::vector<std::size_t> order(index.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    auto better = [&](std::size_t a, std::size_t b) {
        double sa = scores(static_cast<Eigen::Index>(a));
        double sb = scores(static_cast<Eigen::Index>(b));
        if (sa != sb) return sa > sb;
        return index.doc_ids[a] < index.doc_ids[b];
    };
    std::size_t take = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                      order.end(), better);

    std::vector<ScoredDoc> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i)
        out.push_back({index.doc_ids[order[i]], scores(static_cast<Eigen::Index>(order[i]))});
    return out;
}

// Layout: magic "RXIX", u32 version, u64 N, u64 d, fingerprint string,
// doc_id table (u64 length + bytes each), then row-major f64 embeddings.
inline void save_index(const DenseIndex& index, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write index file: " + path);
    binio::write_bytes(out, "RXIX", 4);
    binio::write_u32(out, 1);
    binio::write_u64(out, index.size());
    binio::write_u64(out, static_cast<std::uint64_t>(index.dim()));
    binio::write_string(out, index.model_fingerprint);
    for (const auto& id : index.doc_ids) binio::write_string(out, id);
    for (Eigen::Index r = 0; r < index.embeddings.rows(); ++r)
        for (Eigen::Index c = 0; c < index.embeddings.cols(); ++c) {
            double v = index.embeddings(r, c);
            binio::write_f64(out, &v, 1);
        }
}

// Pass the active backend to refuse explaining with a different model than
// the one that produced the index.
inline DenseIndex load_index(const std::string& path, const EncoderBackend* expected = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open index file: " + path);
    char magic[4] = {};
    binio::read_bytes(in, magic, 4, "magic");
    if (std::string_view(magic, 4) != "RXIX")
        throw Error(path + ": not an index file");
    std::uint32_t version = binio::read_u32(in, "version");
    if (version != 1) throw Error(path + ": unsupported index version");
    std::uint64_t n = binio::read_u64(in, "document count");
    std::uint64_t d = binio::read_u64(in, "dimension");

    DenseIndex index;
    index.model_fingerprint = binio::read_string(in, "fingerprint");
    index.doc_ids.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i)
        index.doc_ids.push_back(binio::read_string(in, "doc_id"));
    index.embeddings.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index r = 0; r < index.embeddings.rows(); ++r)
        for (Eigen::Index c = 0; c < index.embeddings.cols(); ++c)
            binio::read_f64(in, &index.embeddings(r, c), 1, "embeddings");

    if (expected && expected->fingerprint() != index.model_fingerprint)
        throw Error(path + ": index fingerprint '" + index.model_fingerprint +
                    "' does not match active backend '" + expected->fingerprint() + "'");
    return index;
}

}  // namespace retex
