#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "retex/common.hpp"
#include "retex/tokenize.hpp"

namespace retex {

// Differentiable encoding contract. A backend maps text -> tokens -> input
// embeddings (rows) -> pooled vector, and exposes the gradient of
// F(x) = dot(pool(forward(x)), fixed_vec) with respect to the input
// embedding rows. Backends are immutable after construction; thread_safe()
// declares whether one instance may serve concurrent calls.
class EncoderBackend {
public:
    virtual ~EncoderBackend() = default;

    virtual TokenizedText tokenize(std::string_view text, TextRole role) const = 0;

    // Row t is the input embedding of token t.
    virtual Eigen::MatrixXd embed(const TokenizedText& tok) const = 0;

    // Mean over non-special, attended positions of the per-position output.
    virtual Eigen::VectorXd forward_pooled(const Eigen::MatrixXd& x,
                                           const TokenizedText& tok) const = 0;

    // d/dx of dot(forward_pooled(x, tok), fixed_vec), same shape as x.
    virtual Eigen::MatrixXd gradient_wrt_embeddings(const TokenizedText& tok,
                                                    const Eigen::MatrixXd& x,
                                                    const Eigen::VectorXd& fixed_vec) const = 0;

    virtual bool supports_gradients() const { return true; }

    virtual int embedding_dim() const = 0;
    virtual std::size_t max_seq_len() const = 0;
    virtual std::optional<int> pad_token_id() const = 0;
    virtual std::string pad_token_string() const { return Vocabulary::kPadToken; }
    virtual std::string fingerprint() const = 0;
    virtual bool thread_safe() const { return false; }

    Eigen::VectorXd encode(std::string_view text, TextRole role) const {
        TokenizedText tok = tokenize(text, role);
        return forward_pooled(embed(tok), tok);
    }
};

// Dot-product similarity between pooled vectors.
inline double score(const Eigen::VectorXd& query_vec, const Eigen::VectorXd& doc_vec) {
    if (query_vec.size() != doc_vec.size())
        throw Error("score: dimension mismatch (" + std::to_string(query_vec.size()) +
                    " vs " + std::to_string(doc_vec.size()) + ")");
    return query_vec.dot(doc_vec);
}

// Shared by backends whose per-position outputs pool by plain averaging.
inline Eigen::VectorXd mean_pool(const Eigen::MatrixXd& per_position,
                                 const TokenizedText& tok) {
    if (static_cast<std::size_t>(per_position.rows()) != tok.size())
        throw Error("mean_pool: row count does not match token count");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(per_position.cols());
    std::size_t count = 0;
    for (std::size_t t = 0; t < tok.size(); ++t) {
        if (tok.special_mask[t] || !tok.attention_mask[t]) continue;
        sum += per_position.row(static_cast<Eigen::Index>(t)).transpose();
        ++count;
    }
    if (count == 0) throw Error("mean_pool: no poolable (non-special, attended) positions");
    return sum / static_cast<double>(count);
}

// Tokenizes a document's full text and records the title span.
inline TokenizedText tokenize_document(const EncoderBackend& backend, const Document& doc) {
    TokenizedText tok = backend.tokenize(doc.full_text(), TextRole::kDocument);
    apply_title_span(tok, doc.title);
    return tok;
}

}  // namespace retex
