#pragma once

#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "retex/common.hpp"
#include "retex/corpus.hpp"

namespace retex {

// Token-index interval [begin, end), end exclusive.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
    bool operator==(const TokenSpan&) const = default;
};

struct TokenizedText {
    std::vector<int> token_ids;
    std::vector<std::string> tokens;      // surface strings, aligned with ids
    std::vector<bool> special_mask;       // true for [CLS]/[SEP]/[PAD]
    std::vector<bool> attention_mask;
    std::optional<TokenSpan> title_span;  // content positions covered by the title

    std::size_t size() const { return token_ids.size(); }

    std::size_t content_count() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < size(); ++i)
            if (!special_mask[i] && attention_mask[i]) ++n;
        return n;
    }
};

enum class TextRole { kQuery, kDocument };

inline const char* to_string(TextRole role) {
    return role == TextRole::kQuery ? "query" : "document";
}

// Lowercase whitespace-plus-punctuation splitting. Bytes >= 0x80 are kept
// inside words so multi-byte UTF-8 sequences never split.
inline std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            words.push_back(current);
            current.clear();
        }
    };
    for (unsigned char c : text) {
        if (c < 0x80 && std::isspace(c)) {
            flush();
        } else if (c < 0x80 && std::ispunct(c)) {
            flush();
            words.emplace_back(1, static_cast<char>(c));
        } else {
            current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c))
                                       : static_cast<char>(c));
        }
    }
    flush();
    return words;
}

// Fixed ids for the special tokens; content ids follow in first-seen corpus
// order, so a vocabulary is reproducible from the collection alone.
class Vocabulary {
public:
    static constexpr int kPadId = 0;
    static constexpr int kUnkId = 1;
    static constexpr int kClsId = 2;
    static constexpr int kSepId = 3;

    static constexpr const char* kPadToken = "[PAD]";
    static constexpr const char* kUnkToken = "[UNK]";
    static constexpr const char* kClsToken = "[CLS]";
    static constexpr const char* kSepToken = "[SEP]";

    Vocabulary() {
        for (const char* t : {kPadToken, kUnkToken, kClsToken, kSepToken}) add(t);
    }

    static Vocabulary from_texts(const std::vector<std::string>& texts) {
        Vocabulary v;
        for (const auto& t : texts)
            for (const auto& w : split_words(t)) v.add(w);
        return v;
    }

    static Vocabulary from_corpus(const std::vector<Document>& docs) {
        Vocabulary v;
        for (const auto& d : docs)
            for (const auto& w : split_words(d.full_text())) v.add(w);
        return v;
    }

    int add(const std::string& token) {
        auto it = id_by_token_.find(token);
        if (it != id_by_token_.end()) return it->second;
        int id = static_cast<int>(tokens_.size());
        tokens_.push_back(token);
        id_by_token_.emplace(token, id);
        return id;
    }

    int id_or_unk(const std::string& token) const {
        auto it = id_by_token_.find(token);
        return it == id_by_token_.end() ? kUnkId : it->second;
    }

    const std::string& token(int id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
            throw Error("token id out of range: " + std::to_string(id));
        return tokens_[static_cast<std::size_t>(id)];
    }

    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    std::uint64_t content_hash() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& t : tokens_) {
            h = fnv1a64(t, h);
            h = fnv1a64(std::string_view("\x1f", 1), h);
        }
        return h;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw Error("cannot write vocabulary file: " + path);
        for (const auto& t : tokens_) out << t << "\n";
    }

    static Vocabulary load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open vocabulary file: " + path);
        Vocabulary v;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (lineno <= 4) {
                // reserved rows must match the fixed special tokens
                if (line != v.tokens_[lineno - 1])
                    throw Error(path + ": reserved token row " + std::to_string(lineno) +
                                " mismatch");
                continue;
            }
            v.add(line);
        }
        return v;
    }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> id_by_token_;
};

// [CLS] content... [SEP], truncated so the total length never exceeds
// max_seq_len and [SEP] stays the final token.
inline TokenizedText tokenize_with_vocab(const Vocabulary& vocab, std::string_view text,
                                         std::size_t max_seq_len) {
    if (max_seq_len < 3) throw Error("max_seq_len must allow [CLS], one token, [SEP]");
    std::vector<std::string> words = split_words(text);
    if (words.empty()) throw Error("text has no content tokens");
    if (words.size() > max_seq_len - 2) words.resize(max_seq_len - 2);

    TokenizedText tok;
    const std::size_t n = words.size() + 2;
    tok.token_ids.reserve(n);
    tok.tokens.reserve(n);
    tok.special_mask.reserve(n);
    tok.attention_mask.assign(n, true);

    tok.token_ids.push_back(Vocabulary::kClsId);
    tok.tokens.emplace_back(Vocabulary::kClsToken);
    tok.special_mask.push_back(true);
    for (auto& w : words) {
        tok.token_ids.push_back(vocab.id_or_unk(w));
        tok.tokens.push_back(std::move(w));
        tok.special_mask.push_back(false);
    }
    tok.token_ids.push_back(Vocabulary::kSepId);
    tok.tokens.emplace_back(Vocabulary::kSepToken);
    tok.special_mask.push_back(true);
    return tok;
}

// Marks the content positions occupied by the title. The whitespace
// tokenizer guarantees tokenize(title) is a prefix of the full-text content
// tokens; truncation clamps the span.
inline void apply_title_span(TokenizedText& tok, const std::string& title) {
    if (title.empty()) {
        tok.title_span.reset();
        return;
    }
    std::size_t title_len = split_words(title).size();
    if (title_len == 0) {
        tok.title_span.reset();
        return;
    }
    std::size_t begin = 1;  // position 0 is [CLS]
    std::size_t end = begin + title_len;
    std::size_t content_end = tok.size() - 1;  // position size-1 is [SEP]
    if (end > content_end) end = content_end;
    tok.title_span = TokenSpan{begin, end};
}

}  // namespace retex
