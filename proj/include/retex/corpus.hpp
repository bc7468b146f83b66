#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "retex/common.hpp"

// BEIR-style collection loading: line-delimited JSON for corpus/queries and
// tab-separated qrels. Loaded collections are immutable value types.

namespace retex {

struct Document {
    std::string doc_id;
    std::string title;  // may be empty
    std::string text;

    // Title goes strictly first so the title token span stays a prefix of
    // the content tokens.
    std::string full_text() const {
        if (title.empty()) return text;
        return title + " " + text;
    }

    bool operator==(const Document&) const = default;
};

struct Query {
    std::string query_id;
    std::string text;

    bool operator==(const Query&) const = default;
};

struct Qrels {
    // (query_id, doc_id) -> relevance grade, graded not binarized.
    std::map<std::pair<std::string, std::string>, int> judgments;
    int duplicate_warnings = 0;

    int grade(const std::string& query_id, const std::string& doc_id) const {
        auto it = judgments.find({query_id, doc_id});
        return it == judgments.end() ? 0 : it->second;
    }

    // All judged (doc_id, grade) pairs for one query.
    std::vector<std::pair<std::string, int>> judged_for(const std::string& query_id) const {
        std::vector<std::pair<std::string, int>> out;
        auto it = judgments.lower_bound({query_id, std::string()});
        for (; it != judgments.end() && it->first.first == query_id; ++it)
            out.emplace_back(it->first.second, it->second);
        return out;
    }

    // Every referenced query_id must exist in the query set.
    void validate_against(const std::vector<Query>& queries) const {
        std::unordered_set<std::string> known;
        for (const auto& q : queries) known.insert(q.query_id);
        for (const auto& [key, grade] : judgments) {
            if (!known.count(key.first))
                throw Error("qrels reference unknown query_id '" + key.first + "'");
        }
    }
};

namespace detail {

inline nlohmann::json parse_record_line(const std::string& line, const std::string& path,
                                        std::size_t lineno) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw Error(path + ":" + std::to_string(lineno) + ": malformed record");
    return j;
}

inline std::string require_string_field(const nlohmann::json& j, const char* field,
                                        const std::string& path, std::size_t lineno) {
    auto it = j.find(field);
    if (it == j.end() || !it->is_string())
        throw Error(path + ":" + std::to_string(lineno) + ": missing string field '" +
                    field + "'");
    return it->get<std::string>();
}

}  // namespace detail

inline std::vector<Document> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open corpus file: " + path);
    std::vector<Document> docs;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j = detail::parse_record_line(line, path, lineno);
        Document d;
        d.doc_id = detail::require_string_field(j, "_id", path, lineno);
        if (auto it = j.find("title"); it != j.end() && it->is_string())
            d.title = it->get<std::string>();
        d.text = detail::require_string_field(j, "text", path, lineno);
        if (d.doc_id.empty())
            throw Error(path + ":" + std::to_string(lineno) + ": empty _id");
        if (d.text.empty())
            throw Error(path + ":" + std::to_string(lineno) + ": empty text for doc '" +
                        d.doc_id + "'");
        if (!seen.insert(d.doc_id).second)
            throw Error(path + ":" + std::to_string(lineno) + ": duplicate doc_id '" +
                        d.doc_id + "'");
        docs.push_back(std::move(d));
    }
    return docs;
}

inline std::vector<Query> load_queries(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open queries file: " + path);
    std::vector<Query> queries;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j = detail::parse_record_line(line, path, lineno);
        Query q;
        q.query_id = detail::require_string_field(j, "_id", path, lineno);
        q.text = detail::require_string_field(j, "text", path, lineno);
        if (q.query_id.empty())
            throw Error(path + ":" + std::to_string(lineno) + ": empty _id");
        if (q.text.empty())
            throw Error(path + ":" + std::to_string(lineno) + ": empty text for query '" +
                        q.query_id + "'");
        if (!seen.insert(q.query_id).second)
            throw Error(path + ":" + std::to_string(lineno) + ": duplicate query_id '" +
                        q.query_id + "'");
        queries.push_back(std::move(q));
    }
    return queries;
}

// Tab-separated query-id, corpus-id, grade. A non-numeric first row is
// treated as the customary header and skipped; duplicates resolve
// last-wins and are counted.
inline Qrels load_qrels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open qrels file: " + path);
    Qrels qrels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::size_t t1 = line.find('\t');
        std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos)
            throw Error(path + ":" + std::to_string(lineno) + ": expected 3 tab-separated columns");
        std::string qid = line.substr(0, t1);
        std::string did = line.substr(t1 + 1, t2 - t1 - 1);
        std::string grade_str = line.substr(t2 + 1);
        while (!grade_str.empty() && (grade_str.back() == '\r' || grade_str.back() == ' '))
            grade_str.pop_back();
        int grade = 0;
        try {
            std::size_t pos = 0;
            grade = std::stoi(grade_str, &pos);
            if (pos != grade_str.size()) throw std::invalid_argument(grade_str);
        } catch (const std::exception&) {
            if (lineno == 1) continue;  // header row
            throw Error(path + ":" + std::to_string(lineno) + ": non-integer grade '" +
                        grade_str + "'");
        }
        if (grade < 0)
            throw Error(path + ":" + std::to_string(lineno) + ": negative grade");
        auto [it, inserted] = qrels.judgments.insert_or_assign({qid, did}, grade);
        (void)it;
        if (!inserted) ++qrels.duplicate_warnings;
    }
    return qrels;
}

inline void save_corpus(const std::vector<Document>& docs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write corpus file: " + path);
    for (const auto& d : docs) {
        nlohmann::json j{{"_id", d.doc_id}, {"title", d.title}, {"text", d.text}};
        out << j.dump() << "\n";
    }
}

inline void save_queries(const std::vector<Query>& queries, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write queries file: " + path);
    for (const auto& q : queries) {
        nlohmann::json j{{"_id", q.query_id}, {"text", q.text}};
        out << j.dump() << "\n";
    }
}

inline void save_qrels(const Qrels& qrels, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write qrels file: " + path);
    out << "query-id\tcorpus-id\tscore\n";
    for (const auto& [key, grade] : qrels.judgments)
        out << key.first << "\t" << key.second << "\t" << grade << "\n";
}

}  // namespace retex
