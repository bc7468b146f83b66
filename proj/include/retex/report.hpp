#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "retex/common.hpp"
#include "retex/explain.hpp"

namespace retex {

// Formats doubles identically on every run; file emitters below promise
// byte-identical output for identical inputs.
inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

struct HeatmapToken {
    std::string token;
    double intensity = 0.0;  // signed, in [-1, 1]
};

struct HeatmapDoc {
    std::vector<HeatmapToken> query_segment;
    std::vector<HeatmapToken> document_segment;
};

// Per-segment normalization by the max absolute score; the strongest token
// sits at intensity +/-1 and an all-zero segment stays unshaded.
inline std::vector<HeatmapToken> normalize_segment(const std::vector<std::string>& tokens,
                                                   const std::vector<double>& scores) {
    double max_abs = 0.0;
    for (double s : scores) max_abs = std::max(max_abs, std::abs(s));
    std::vector<HeatmapToken> out;
    out.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i)
        out.push_back({tokens[i], max_abs == 0.0 ? 0.0 : scores[i] / max_abs});
    return out;
}

inline HeatmapDoc make_heatmap(const InstanceExplanation& ex) {
    HeatmapDoc hm;
    hm.query_segment = normalize_segment(ex.query_attr.tokens, ex.query_attr.token_scores);
    hm.document_segment = normalize_segment(ex.doc_attr.tokens, ex.doc_attr.token_scores);
    return hm;
}

namespace detail {

inline std::string escape_html(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

// Positive shades green, negative red, alpha linear in |intensity|. The
// hues are a rendering constant, not an analytic claim.
inline void write_segment(std::ofstream& out, const std::vector<HeatmapToken>& segment) {
    for (const auto& ht : segment) {
        double a = std::abs(ht.intensity);
        const char* rgb = ht.intensity >= 0 ? "46,160,67" : "218,54,51";
        out << "<span class=\"tok\" style=\"background-color:rgba(" << rgb << ","
            << format_double(a) << ")\">" << escape_html(ht.token) << "</span> ";
    }
}

}  // namespace detail

// Self-contained HTML heatmap for one query-document pair.
inline void render_instance(const InstanceExplanation& ex, const std::string& path) {
    HeatmapDoc hm = make_heatmap(ex);
    std::ofstream out(path);
    if (!out) throw Error("cannot write heatmap file: " + path);
    out << "<!doctype html>\n<html><head><meta charset=\"utf-8\">\n"
        << "<title>" << detail::escape_html(ex.query_id) << " / "
        << detail::escape_html(ex.doc_id) << "</title>\n"
        << "<style>body{font-family:sans-serif;max-width:60em;margin:2em auto}"
        << ".tok{padding:1px 2px;border-radius:2px}"
        << "h2{font-size:1em;color:#555}footer{margin-top:2em;color:#555;font-size:0.9em}"
        << "</style></head><body>\n";
    out << "<h2>query " << detail::escape_html(ex.query_id) << "</h2>\n<p>";
    detail::write_segment(out, hm.query_segment);
    out << "</p>\n<h2>document " << detail::escape_html(ex.doc_id) << "</h2>\n<p>";
    detail::write_segment(out, hm.document_segment);
    out << "</p>\n<footer>score=" << format_double(ex.score)
        << " query_residual=" << format_double(ex.query_attr.completeness_residual)
        << " doc_residual=" << format_double(ex.doc_attr.completeness_residual)
        << "</footer>\n</body></html>\n";
    if (!out) throw Error("write failed: " + path);
}

enum class Polarity { kPositive, kNegative };

inline const char* to_string(Polarity p) {
    return p == Polarity::kPositive ? "positive" : "negative";
}

struct CloudWeights {
    std::vector<std::pair<std::string, double>> entries;  // weight > 0, descending
    Polarity polarity = Polarity::kPositive;
    std::string query_id;
    int k = 0;
};

// Orders a split_signed map by descending weight (ties by token) for the
// word-cloud weight file.
inline CloudWeights make_cloud(const std::map<std::string, double>& weights, Polarity polarity,
                               const std::string& query_id, int k) {
    CloudWeights cw;
    cw.polarity = polarity;
    cw.query_id = query_id;
    cw.k = k;
    cw.entries.assign(weights.begin(), weights.end());
    std::sort(cw.entries.begin(), cw.entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return cw;
}

// token<TAB>weight rows under one '#' metadata header; any word-cloud
// renderer can consume this directly.
inline void emit_cloud(const CloudWeights& weights, const std::string& path) {
    if (weights.entries.empty()) throw Error("emit_cloud: no entries for " + path);
    std::ofstream out(path);
    if (!out) throw Error("cannot write cloud file: " + path);
    out << "# query_id=" << weights.query_id << "\tk=" << weights.k
        << "\tpolarity=" << to_string(weights.polarity) << "\n";
    for (const auto& [token, weight] : weights.entries) {
        if (weight <= 0.0) throw Error("emit_cloud: non-positive weight for '" + token + "'");
        out << token << "\t" << format_double(weight) << "\n";
    }
    if (!out) throw Error("write failed: " + path);
}

inline CloudWeights read_cloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open cloud file: " + path);
    CloudWeights cw;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
        throw Error(path + ": missing metadata header");
    std::string meta = line.substr(2);
    std::size_t pos = 0;
    while (pos < meta.size()) {
        std::size_t tab = meta.find('\t', pos);
        std::string field = meta.substr(pos, tab == std::string::npos ? tab : tab - pos);
        std::size_t eq = field.find('=');
        if (eq != std::string::npos) {
            std::string key = field.substr(0, eq), value = field.substr(eq + 1);
            if (key == "query_id") cw.query_id = value;
            else if (key == "k") cw.k = std::stoi(value);
            else if (key == "polarity")
                cw.polarity = value == "negative" ? Polarity::kNegative : Polarity::kPositive;
        }
        if (tab == std::string::npos) break;
        pos = tab + 1;
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos) throw Error(path + ": malformed row '" + line + "'");
        cw.entries.emplace_back(line.substr(0, tab), std::stod(line.substr(tab + 1)));
    }
    return cw;
}

// Per-query rows plus a final "all" aggregate row summing each model's
// title attributions.
inline void emit_title_summary(const TitleAttributionReport& report, const std::string& path) {
    if (report.rows.empty()) throw Error("emit_title_summary: empty report");
    std::ofstream out(path);
    if (!out) throw Error("cannot write title summary: " + path);
    out << "# seed=" << report.seed << "\trows=" << report.rows.size()
        << "\tskipped_queries=" << report.skipped_queries << "\n";
    double sum_a = 0.0, sum_b = 0.0;
    for (const auto& row : report.rows) {
        out << row.query_id << "\t" << row.doc_id << "\t"
            << format_double(row.title_sum_model_a) << "\t"
            << format_double(row.title_sum_model_b) << "\n";
        sum_a += row.title_sum_model_a;
        sum_b += row.title_sum_model_b;
    }
    out << "all\t-\t" << format_double(sum_a) << "\t" << format_double(sum_b) << "\n";
    if (!out) throw Error("write failed: " + path);
}

// token<TAB>total<TAB>doc_count, descending |total|; shared by the ranking
// and compare commands.
inline void emit_ranking_table(const RankingExplanation& re, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write ranking table: " + path);
    out << "# query_id=" << re.query_id << "\tk=" << re.k << "\n";
    std::vector<std::pair<std::string, double>> rows(re.per_token_totals.begin(),
                                                     re.per_token_totals.end());
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        double aa = std::abs(a.second), bb = std::abs(b.second);
        if (aa != bb) return aa > bb;
        return a.first < b.first;
    });
    for (const auto& [token, total] : rows) {
        auto it = re.contributing_docs.find(token);
        int count = it == re.contributing_docs.end() ? 0 : it->second;
        out << token << "\t" << format_double(total) << "\t" << count << "\n";
    }
    if (!out) throw Error("write failed: " + path);
}

}  // namespace retex
