#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "retex/common.hpp"
#include "retex/encoder.hpp"

// httplib drags in <resolv.h>, whose _res macro breaks Eigen; keep the
// Eigen-including headers above it.
#include <httplib.h>
#include <nlohmann/json.hpp>

namespace retex {

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows, const char* what) {
    if (!rows.is_array() || rows.empty())
        throw Error(std::string("external backend: malformed matrix in ") + what);
    const auto nr = static_cast<Eigen::Index>(rows.size());
    const auto nc = static_cast<Eigen::Index>(rows[0].size());
    Eigen::MatrixXd m(nr, nc);
    for (Eigen::Index r = 0; r < nr; ++r) {
        const auto& row = rows[static_cast<std::size_t>(r)];
        if (static_cast<Eigen::Index>(row.size()) != nc)
            throw Error(std::string("external backend: ragged matrix in ") + what);
        for (Eigen::Index c = 0; c < nc; ++c)
            m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& arr, const char* what) {
    if (!arr.is_array())
        throw Error(std::string("external backend: malformed vector in ") + what);
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v(i) = arr[static_cast<std::size_t>(i)].get<double>();
    return v;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

}  // namespace detail

// Adapter onto an external model runtime (a pretrained transformer served
// out of process) speaking a small JSON-over-HTTP protocol:
//
//   GET  /info            -> {fingerprint, embedding_dim, max_seq_len,
//                             pad_token_id, pad_token_string,
//                             supports_gradients}
//   POST /tokenize        {text, role}
//                         -> {token_ids, tokens, special_mask, attention_mask}
//   POST /embed           {token_ids} -> {embeddings}
//   POST /forward_pooled  {embeddings, special_mask, attention_mask}
//                         -> {pooled}
//   POST /gradient        {embeddings, special_mask, attention_mask,
//                          fixed_vec} -> {gradient}
//
// Matrices are row lists of doubles. The adapter keeps one connection and
// is not thread-safe; use one instance per worker.
class ExternalEncoder final : public EncoderBackend {
public:
    explicit ExternalEncoder(const std::string& base_url) : base_url_(base_url) {
        client_ = std::make_unique<httplib::Client>(base_url.c_str());
        client_->set_connection_timeout(10, 0);
        client_->set_read_timeout(120, 0);
        auto res = client_->Get("/info");
        if (!res || res->status != 200)
            throw Error("external backend unreachable at " + base_url +
                        (res ? " (status " + std::to_string(res->status) + ")"
                             : " (no response)"));
        nlohmann::json info = parse_body(res->body, "/info");
        fingerprint_ = info.at("fingerprint").get<std::string>();
        dim_ = info.at("embedding_dim").get<int>();
        max_seq_len_ = info.at("max_seq_len").get<std::size_t>();
        if (info.contains("pad_token_id") && !info["pad_token_id"].is_null())
            pad_token_id_ = info["pad_token_id"].get<int>();
        if (info.contains("pad_token_string"))
            pad_token_string_ = info["pad_token_string"].get<std::string>();
        if (info.contains("supports_gradients"))
            supports_gradients_ = info["supports_gradients"].get<bool>();
    }

    TokenizedText tokenize(std::string_view text, TextRole role) const override {
        nlohmann::json req{{"text", std::string(text)}, {"role", to_string(role)}};
        nlohmann::json resp = post("/tokenize", req);
        TokenizedText tok;
        tok.token_ids = resp.at("token_ids").get<std::vector<int>>();
        tok.tokens = resp.at("tokens").get<std::vector<std::string>>();
        tok.special_mask = resp.at("special_mask").get<std::vector<bool>>();
        tok.attention_mask = resp.at("attention_mask").get<std::vector<bool>>();
        if (tok.tokens.size() != tok.token_ids.size() ||
            tok.special_mask.size() != tok.token_ids.size() ||
            tok.attention_mask.size() != tok.token_ids.size())
            throw Error("external backend: /tokenize returned misaligned sequences");
        return tok;
    }

    Eigen::MatrixXd embed(const TokenizedText& tok) const override {
        nlohmann::json req{{"token_ids", tok.token_ids}};
        nlohmann::json resp = post("/embed", req);
        Eigen::MatrixXd x = detail::matrix_from_json(resp.at("embeddings"), "/embed");
        if (static_cast<std::size_t>(x.rows()) != tok.size() || x.cols() != dim_)
            throw Error("external backend: /embed shape mismatch");
        return x;
    }

    Eigen::VectorXd forward_pooled(const Eigen::MatrixXd& x,
                                   const TokenizedText& tok) const override {
        nlohmann::json req{{"embeddings", detail::matrix_to_json(x)},
                           {"special_mask", tok.special_mask},
                           {"attention_mask", tok.attention_mask}};
        nlohmann::json resp = post("/forward_pooled", req);
        Eigen::VectorXd pooled = detail::vector_from_json(resp.at("pooled"), "/forward_pooled");
        if (pooled.size() != dim_)
            throw Error("external backend: /forward_pooled dimension mismatch");
        return pooled;
    }

    Eigen::MatrixXd gradient_wrt_embeddings(const TokenizedText& tok, const Eigen::MatrixXd& x,
                                            const Eigen::VectorXd& fixed_vec) const override {
        if (!supports_gradients_)
            throw Error("external backend '" + fingerprint_ + "' does not support gradients");
        nlohmann::json req{{"embeddings", detail::matrix_to_json(x)},
                           {"special_mask", tok.special_mask},
                           {"attention_mask", tok.attention_mask},
                           {"fixed_vec", detail::vector_to_json(fixed_vec)}};
        nlohmann::json resp = post("/gradient", req);
        Eigen::MatrixXd g = detail::matrix_from_json(resp.at("gradient"), "/gradient");
        if (g.rows() != x.rows() || g.cols() != x.cols())
            throw Error("external backend: /gradient shape mismatch");
        return g;
    }

    bool supports_gradients() const override { return supports_gradients_; }
    int embedding_dim() const override { return dim_; }
    std::size_t max_seq_len() const override { return max_seq_len_; }
    std::optional<int> pad_token_id() const override { return pad_token_id_; }
    std::string pad_token_string() const override { return pad_token_string_; }
    std::string fingerprint() const override { return fingerprint_; }
    bool thread_safe() const override { return false; }

private:
    static nlohmann::json parse_body(const std::string& body, const char* endpoint) {
        nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
        if (j.is_discarded())
            throw Error(std::string("external backend: invalid JSON from ") + endpoint);
        return j;
    }

    nlohmann::json post(const char* endpoint, const nlohmann::json& req) const {
        auto res = client_->Post(endpoint, req.dump(), "application/json");
        if (!res)
            throw Error(std::string("external backend: no response from ") + endpoint);
        if (res->status != 200)
            throw Error(std::string("external backend: ") + endpoint + " returned status " +
                        std::to_string(res->status) + ": " + res->body);
        return parse_body(res->body, endpoint);
    }

    std::string base_url_;
    std::unique_ptr<httplib::Client> client_;
    std::string fingerprint_;
    int dim_ = 0;
    std::size_t max_seq_len_ = 0;
    std::optional<int> pad_token_id_;
    std::string pad_token_string_ = Vocabulary::kPadToken;
    bool supports_gradients_ = true;
};

}  // namespace retex
