#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "retex/common.hpp"
#include "retex/encoder.hpp"
#include "retex/tokenize.hpp"

namespace retex {

enum class QuadratureRule { kLeftRiemann, kTrapezoid };

inline const char* to_string(QuadratureRule rule) {
    return rule == QuadratureRule::kLeftRiemann ? "left-riemann" : "trapezoid";
}

inline QuadratureRule quadrature_rule_from_string(const std::string& s) {
    if (s == "left-riemann") return QuadratureRule::kLeftRiemann;
    if (s == "trapezoid") return QuadratureRule::kTrapezoid;
    throw Error("unknown quadrature rule '" + s + "' (expected left-riemann or trapezoid)");
}

struct IGConfig {
    int steps = 128;
    QuadratureRule rule = QuadratureRule::kTrapezoid;
    double tolerance_rel = 1e-3;
    double tolerance_abs = 1e-6;

    void validate() const {
        if (steps < 1) throw Error("ig steps must be >= 1");
        if (tolerance_rel < 0 || tolerance_abs < 0)
            throw Error("ig tolerance must be non-negative");
    }

    double tolerance_for(double delta_f) const {
        return tolerance_rel * std::abs(delta_f) + tolerance_abs;
    }
};

struct IGDiagnostics {
    double f_input = 0.0;
    double f_baseline = 0.0;
    double residual = 0.0;  // |sum(attributions) - (f_input - f_baseline)|
};

enum class Side { kQuery, kDocument };

inline const char* to_string(Side side) {
    return side == Side::kQuery ? "query" : "document";
}

struct AttributionResult {
    std::vector<std::string> tokens;
    std::vector<double> token_scores;
    double score_f_x = 0.0;
    double score_f_baseline = 0.0;
    double completeness_residual = 0.0;
    Side side = Side::kQuery;

    double token_score_sum() const {
        return std::accumulate(token_scores.begin(), token_scores.end(), 0.0);
    }

    bool within_tolerance(const IGConfig& cfg) const {
        return completeness_residual <= cfg.tolerance_for(score_f_x - score_f_baseline);
    }
};

// Replaces every non-special content token with [PAD]. Masks, spans and the
// special tokens stay untouched, so the baseline occupies the same positions
// and stays attended along the whole interpolation path.
inline TokenizedText pad_baseline(const TokenizedText& tok, const EncoderBackend& backend) {
    std::optional<int> pad_id = backend.pad_token_id();
    if (!pad_id) throw Error("backend vocabulary has no [PAD] token");
    TokenizedText base = tok;
    const std::string pad_str = backend.pad_token_string();
    for (std::size_t t = 0; t < base.size(); ++t) {
        if (base.special_mask[t]) continue;
        base.token_ids[t] = *pad_id;
        base.tokens[t] = pad_str;
    }
    return base;
}

// Straight-line path integral of the gradient, approximated by the chosen
// quadrature rule:
//   attribution = (x - x_base) .* sum_k w_k grad_f(x_base + a_k (x - x_base))
// Left-Riemann uses a_k = k/m, k = 0..m-1, weight 1/m. Trapezoid uses
// a_k = k/m, k = 0..m, endpoint weight 1/(2m). Steps accumulate in index
// order, so results are bitwise deterministic.
template <typename F, typename Grad>
std::pair<Eigen::MatrixXd, IGDiagnostics> integrated_gradients(F&& f, Grad&& grad_f,
                                                               const Eigen::MatrixXd& x,
                                                               const Eigen::MatrixXd& x_base,
                                                               const IGConfig& cfg) {
    if (x.rows() != x_base.rows() || x.cols() != x_base.cols())
        throw Error("integrated_gradients: input and baseline shapes differ");
    cfg.validate();

    const Eigen::MatrixXd delta = x - x_base;
    const int m = cfg.steps;
    Eigen::MatrixXd avg_grad = Eigen::MatrixXd::Zero(x.rows(), x.cols());

    auto accumulate_step = [&](int k, double weight) {
        const double alpha = static_cast<double>(k) / static_cast<double>(m);
        Eigen::MatrixXd g = grad_f(Eigen::MatrixXd(x_base + alpha * delta));
        if (!g.allFinite())
            throw Error("integrated_gradients: non-finite gradient at step " +
                        std::to_string(k) + " (alpha=" + std::to_string(alpha) + ")");
        avg_grad += weight * g;
    };

    if (cfg.rule == QuadratureRule::kLeftRiemann) {
        const double w = 1.0 / m;
        for (int k = 0; k < m; ++k) accumulate_step(k, w);
    } else {
        const double w_end = 0.5 / m;
        const double w_mid = 1.0 / m;
        for (int k = 0; k <= m; ++k) accumulate_step(k, (k == 0 || k == m) ? w_end : w_mid);
    }

    Eigen::MatrixXd attribution = delta.cwiseProduct(avg_grad);

    IGDiagnostics diag;
    diag.f_input = f(x);
    diag.f_baseline = f(x_base);
    diag.residual = std::abs(attribution.sum() - (diag.f_input - diag.f_baseline));
    return {std::move(attribution), diag};
}

// Per-token score = sum of the attribution row over embedding dimensions,
// which keeps the completeness identity at token granularity.
inline std::vector<double> reduce_to_tokens(const Eigen::MatrixXd& attribution) {
    std::vector<double> scores(static_cast<std::size_t>(attribution.rows()));
    for (Eigen::Index t = 0; t < attribution.rows(); ++t)
        scores[static_cast<std::size_t>(t)] = attribution.row(t).sum();
    return scores;
}

// Attributes one side of a query-document pair. The other side's encoded
// vector is held constant; the attributed side interpolates between its
// input embeddings and the [PAD]-baseline embeddings.
inline AttributionResult attribute_side(const TokenizedText& query_tok,
                                        const TokenizedText& doc_tok,
                                        const EncoderBackend& backend, Side side,
                                        const IGConfig& cfg) {
    if (!backend.supports_gradients())
        throw Error("backend '" + backend.fingerprint() + "' does not support gradients");

    const TokenizedText& attributed = side == Side::kQuery ? query_tok : doc_tok;
    const TokenizedText& fixed_side = side == Side::kQuery ? doc_tok : query_tok;

    const Eigen::VectorXd fixed_vec =
        backend.forward_pooled(backend.embed(fixed_side), fixed_side);

    const Eigen::MatrixXd x = backend.embed(attributed);
    const Eigen::MatrixXd x_base = backend.embed(pad_baseline(attributed, backend));

    auto f = [&](const Eigen::MatrixXd& e) {
        return score(backend.forward_pooled(e, attributed), fixed_vec);
    };
    auto grad = [&](const Eigen::MatrixXd& e) {
        return backend.gradient_wrt_embeddings(attributed, e, fixed_vec);
    };

    auto [attribution, diag] = integrated_gradients(f, grad, x, x_base, cfg);

    AttributionResult result;
    result.tokens = attributed.tokens;
    result.token_scores = reduce_to_tokens(attribution);
    result.score_f_x = diag.f_input;
    result.score_f_baseline = diag.f_baseline;
    result.completeness_residual = diag.residual;
    result.side = side;
    return result;
}

// One line-delimited record per attribution run, config echoed.
inline nlohmann::json attribution_record(const std::string& query_id,
                                         const std::string& doc_id,
                                         const AttributionResult& result,
                                         const IGConfig& cfg) {
    return nlohmann::json{
        {"query_id", query_id},
        {"doc_id", doc_id},
        {"side", to_string(result.side)},
        {"tokens", result.tokens},
        {"token_scores", result.token_scores},
        {"score_f_x", result.score_f_x},
        {"score_f_baseline", result.score_f_baseline},
        {"residual", result.completeness_residual},
        {"config", {{"steps", cfg.steps},
                    {"rule", to_string(cfg.rule)},
                    {"tolerance_rel", cfg.tolerance_rel},
                    {"tolerance_abs", cfg.tolerance_abs}}},
    };
}

}  // namespace retex
