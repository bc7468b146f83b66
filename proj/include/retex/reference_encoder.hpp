#pragma once

#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "retex/binio.hpp"
#include "retex/common.hpp"
#include "retex/encoder.hpp"
#include "retex/tokenize.hpp"

namespace retex {

// Desk-scale stand-in for a transformer encoder. Per-position output is
//   h_t = tanh(W (E[token_t] + P[t]) + b)
// pooled over non-special attended positions, which makes the gradient of
// any pooled scalar available in closed form:
//   dF/dx_t = W^T ((1 - h_t^2) .* fixed_vec) / C          (content positions)
// with C the pooled-position count, zero rows elsewhere.
//
// Initialization draws every parameter from a seeded mt19937_64, mapped to
// [-0.5, 0.5) via (u >> 11) * 2^-53 - 0.5, filling E, P, W, b in that order
// row by row. The mapping avoids std::uniform_real_distribution, whose
// output is implementation-defined; same seed means bitwise-equal
// parameters on any platform.
class ReferenceEncoder final : public EncoderBackend {
public:
    ReferenceEncoder(Vocabulary vocab, int dim, std::size_t max_seq_len, std::uint64_t seed)
        : vocab_(std::move(vocab)), dim_(dim), max_seq_len_(max_seq_len), seed_(seed) {
        if (dim <= 0) throw Error("embedding_dim must be positive");
        if (max_seq_len < 3) throw Error("max_seq_len must be at least 3");
        std::mt19937_64 rng(seed);
        auto next = [&rng]() {
            return static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
        };
        token_table_ = draw_matrix(static_cast<Eigen::Index>(vocab_.size()), dim_, next);
        position_table_ = draw_matrix(static_cast<Eigen::Index>(max_seq_len_), dim_, next);
        projection_ = draw_matrix(dim_, dim_, next);
        bias_ = Eigen::VectorXd(dim_);
        for (Eigen::Index i = 0; i < dim_; ++i) bias_(i) = next();
        fingerprint_ = compute_fingerprint();
    }

    // Explicit parameters; shapes fix dim and max_seq_len.
    ReferenceEncoder(Vocabulary vocab, Eigen::MatrixXd token_table,
                     Eigen::MatrixXd position_table, Eigen::MatrixXd projection,
                     Eigen::VectorXd bias, std::uint64_t seed)
        : vocab_(std::move(vocab)),
          dim_(projection.cols()),
          max_seq_len_(static_cast<std::size_t>(position_table.rows())),
          seed_(seed),
          token_table_(std::move(token_table)),
          position_table_(std::move(position_table)),
          projection_(std::move(projection)),
          bias_(std::move(bias)) {
        if (projection_.rows() != dim_ || token_table_.cols() != dim_ ||
            position_table_.cols() != dim_ || bias_.size() != dim_)
            throw Error("parameter shapes are inconsistent");
        if (static_cast<std::size_t>(token_table_.rows()) != vocab_.size())
            throw Error("token table rows must match vocabulary size");
        if (max_seq_len_ < 3) throw Error("max_seq_len must be at least 3");
        fingerprint_ = compute_fingerprint();
    }

    TokenizedText tokenize(std::string_view text, TextRole /*role*/) const override {
        return tokenize_with_vocab(vocab_, text, max_seq_len_);
    }

    Eigen::MatrixXd embed(const TokenizedText& tok) const override {
        const auto L = static_cast<Eigen::Index>(tok.size());
        if (tok.size() > max_seq_len_)
            throw Error("sequence longer than max_seq_len");
        Eigen::MatrixXd x(L, dim_);
        for (Eigen::Index t = 0; t < L; ++t) {
            int id = tok.token_ids[static_cast<std::size_t>(t)];
            if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size())
                throw Error("token id out of vocabulary: " + std::to_string(id));
            x.row(t) = token_table_.row(id) + position_table_.row(t);
        }
        return x;
    }

    Eigen::VectorXd forward_pooled(const Eigen::MatrixXd& x,
                                   const TokenizedText& tok) const override {
        return mean_pool(per_position_outputs(x, tok), tok);
    }

    Eigen::MatrixXd gradient_wrt_embeddings(const TokenizedText& tok, const Eigen::MatrixXd& x,
                                            const Eigen::VectorXd& fixed_vec) const override {
        check_shape(x, tok);
        if (fixed_vec.size() != dim_)
            throw Error("gradient: fixed vector dimension mismatch");
        const auto L = static_cast<Eigen::Index>(tok.size());
        std::size_t count = tok.content_count();
        if (count == 0) throw Error("gradient: no poolable positions");
        Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(L, dim_);
        const double inv_count = 1.0 / static_cast<double>(count);
        for (Eigen::Index t = 0; t < L; ++t) {
            auto ut = static_cast<std::size_t>(t);
            if (tok.special_mask[ut] || !tok.attention_mask[ut]) continue;
            Eigen::VectorXd h =
                (projection_ * x.row(t).transpose() + bias_).array().tanh().matrix();
            Eigen::VectorXd upstream =
                ((1.0 - h.array().square()) * fixed_vec.array()).matrix() * inv_count;
            grad.row(t) = (projection_.transpose() * upstream).transpose();
        }
        return grad;
    }

    int embedding_dim() const override { return static_cast<int>(dim_); }
    std::size_t max_seq_len() const override { return max_seq_len_; }
    std::optional<int> pad_token_id() const override { return Vocabulary::kPadId; }
    std::string fingerprint() const override { return fingerprint_; }
    bool thread_safe() const override { return true; }

    const Vocabulary& vocabulary() const { return vocab_; }
    std::uint64_t seed() const { return seed_; }
    const Eigen::MatrixXd& token_table() const { return token_table_; }
    const Eigen::MatrixXd& position_table() const { return position_table_; }
    const Eigen::MatrixXd& projection() const { return projection_; }
    const Eigen::VectorXd& bias() const { return bias_; }

    // Flat binary layout: magic "RXEC", u32 version, u64 |V|, u64 d,
    // u64 max_seq_len, u64 seed, then E, P, W, b row-major as f64 LE.
    void save_params(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write encoder params: " + path);
        binio::write_bytes(out, kMagic, 4);
        binio::write_u32(out, kVersion);
        binio::write_u64(out, vocab_.size());
        binio::write_u64(out, static_cast<std::uint64_t>(dim_));
        binio::write_u64(out, max_seq_len_);
        binio::write_u64(out, seed_);
        write_rows(out, token_table_);
        write_rows(out, position_table_);
        write_rows(out, projection_);
        binio::write_f64(out, bias_.data(), static_cast<std::size_t>(bias_.size()));
    }

    static ReferenceEncoder load_params(const std::string& path, Vocabulary vocab) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot open encoder params: " + path);
        char magic[4] = {};
        binio::read_bytes(in, magic, 4, "magic");
        if (std::string_view(magic, 4) != kMagic)
            throw Error(path + ": not an encoder parameter file");
        std::uint32_t version = binio::read_u32(in, "version");
        if (version != kVersion)
            throw Error(path + ": unsupported version " + std::to_string(version));
        std::uint64_t vocab_size = binio::read_u64(in, "vocab size");
        std::uint64_t dim = binio::read_u64(in, "dim");
        std::uint64_t max_seq_len = binio::read_u64(in, "max_seq_len");
        std::uint64_t seed = binio::read_u64(in, "seed");
        if (vocab_size != vocab.size())
            throw Error(path + ": vocabulary size mismatch (file " +
                        std::to_string(vocab_size) + ", vocab " +
                        std::to_string(vocab.size()) + ")");
        auto d = static_cast<Eigen::Index>(dim);
        Eigen::MatrixXd token_table(static_cast<Eigen::Index>(vocab_size), d);
        Eigen::MatrixXd position_table(static_cast<Eigen::Index>(max_seq_len), d);
        Eigen::MatrixXd projection(d, d);
        Eigen::VectorXd bias(d);
        read_rows(in, token_table, "token table");
        read_rows(in, position_table, "position table");
        read_rows(in, projection, "projection");
        binio::read_f64(in, bias.data(), static_cast<std::size_t>(bias.size()), "bias");
        return ReferenceEncoder(std::move(vocab), std::move(token_table),
                                std::move(position_table), std::move(projection),
                                std::move(bias), seed);
    }

private:
    static constexpr const char* kMagic = "RXEC";
    static constexpr std::uint32_t kVersion = 1;

    template <typename Next>
    static Eigen::MatrixXd draw_matrix(Eigen::Index rows, Eigen::Index cols, Next&& next) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = next();
        return m;
    }

    Eigen::MatrixXd per_position_outputs(const Eigen::MatrixXd& x,
                                         const TokenizedText& tok) const {
        check_shape(x, tok);
        Eigen::MatrixXd h(x.rows(), dim_);
        for (Eigen::Index t = 0; t < x.rows(); ++t)
            h.row(t) =
                (projection_ * x.row(t).transpose() + bias_).array().tanh().matrix();
        return h;
    }

    void check_shape(const Eigen::MatrixXd& x, const TokenizedText& tok) const {
        if (static_cast<std::size_t>(x.rows()) != tok.size() || x.cols() != dim_)
            throw Error("embedding matrix shape does not match tokenization");
    }

    static void write_rows(std::ostream& os, const Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                double v = m(r, c);
                binio::write_f64(os, &v, 1);
            }
    }

    static void read_rows(std::istream& is, Eigen::MatrixXd& m, const char* what) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) binio::read_f64(is, &m(r, c), 1, what);
    }

    std::uint64_t params_hash() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto mix = [&h](const double* data, std::size_t n) {
            h = fnv1a64(std::string_view(reinterpret_cast<const char*>(data),
                                         n * sizeof(double)),
                        h);
        };
        mix(token_table_.data(), static_cast<std::size_t>(token_table_.size()));
        mix(position_table_.data(), static_cast<std::size_t>(position_table_.size()));
        mix(projection_.data(), static_cast<std::size_t>(projection_.size()));
        mix(bias_.data(), static_cast<std::size_t>(bias_.size()));
        return h;
    }

    std::string compute_fingerprint() const {
        return "ref-v1:d=" + std::to_string(dim_) + ":msl=" + std::to_string(max_seq_len_) +
               ":seed=" + std::to_string(seed_) + ":vocab=" + hex64(vocab_.content_hash()) +
               ":params=" + hex64(params_hash());
    }

    Vocabulary vocab_;
    Eigen::Index dim_;
    std::size_t max_seq_len_;
    std::uint64_t seed_;
    Eigen::MatrixXd token_table_;     // |V| x d
    Eigen::MatrixXd position_table_;  // max_seq_len x d
    Eigen::MatrixXd projection_;      // d x d
    Eigen::VectorXd bias_;            // d
    std::string fingerprint_;
};

}  // namespace retex
