#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "retex/corpus.hpp"
#include "retex/reference_encoder.hpp"
#include "retex/tokenize.hpp"

namespace testutil {

// Unique scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static std::atomic<unsigned> counter{0};
        auto base = std::filesystem::temp_directory_path();
        path = base / ("retex_test_" + std::to_string(::getpid()) + "_" +
                       std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline const std::vector<std::string>& word_pool() {
    static const std::vector<std::string> words = {
        "gold",  "invest", "hedge",   "inflation", "market",  "bond",     "risk",
        "fund",  "corona", "disease", "vaccine",   "symptom", "treat",    "virus",
        "study", "trial",  "paper",   "result",    "price",   "currency", "asset",
        "yield", "trade",  "bank",    "cough",     "fever",   "spread",   "mask"};
    return words;
}

inline std::string random_text(std::mt19937_64& rng, std::size_t n_words) {
    const auto& pool = word_pool();
    std::string out;
    for (std::size_t i = 0; i < n_words; ++i) {
        if (i) out += " ";
        out += pool[rng() % pool.size()];
    }
    return out;
}

inline retex::Vocabulary pool_vocab() {
    return retex::Vocabulary::from_texts(word_pool());
}

inline retex::ReferenceEncoder make_encoder(std::uint64_t seed, int dim = 8,
                                            std::size_t max_seq_len = 64) {
    return retex::ReferenceEncoder(pool_vocab(), dim, max_seq_len, seed);
}

inline std::vector<retex::Document> tiny_corpus() {
    return {
        {"d1", "", "gold is a hedge against inflation"},
        {"d2", "corona vaccine study", "the vaccine trial result shows fever and cough"},
        {"d3", "", "bond yield and market risk move with currency trade"},
    };
}

}  // namespace testutil
