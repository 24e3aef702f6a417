#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "deltatrain/corpus.hpp"
#include "deltatrain/errors.hpp"
#include "deltatrain/rng.hpp"

namespace deltatrain {

enum class EmbeddingKind { random, pretrained };

inline std::string kind_name(EmbeddingKind k) {
    return k == EmbeddingKind::random ? "random" : "pretrained";
}

// |V| x dim, row-major. Row 0 is the padding row and stays exactly zero
// before and after training; row 1 is the OOV token.
struct EmbeddingMatrix {
    int vocab_size = 0;
    int dim = 0;
    EmbeddingKind kind = EmbeddingKind::random;
    double coverage = 1.0; // fraction of non-reserved vocab tokens found in the vector file
    std::vector<double> values;

    double* row(int i) { return values.data() + static_cast<std::size_t>(i) * dim; }
    const double* row(int i) const { return values.data() + static_cast<std::size_t>(i) * dim; }
};

constexpr double kRandomEmbeddingScale = 0.25; // i.i.d. uniform on [-0.25, 0.25]

// Random matrix of the given shape; rows 1.. are drawn in index order so the
// result is a pure function of (vocab_size, dim, seed).
inline EmbeddingMatrix random_matrix(int vocab_size, int dim, std::int64_t seed) {
    if (dim < 1) throw ConfigError("embedding dim must be >= 1");
    EmbeddingMatrix m;
    m.vocab_size = vocab_size;
    m.dim = dim;
    m.kind = EmbeddingKind::random;
    m.values.assign(static_cast<std::size_t>(vocab_size) * dim, 0.0);
    Rng rng(static_cast<std::uint64_t>(seed));
    for (int r = 1; r < vocab_size; ++r) {
        double* row = m.row(r);
        for (int d = 0; d < dim; ++d)
            row[d] = rng.uniform(-kRandomEmbeddingScale, kRandomEmbeddingScale);
    }
    return m;
}

inline EmbeddingMatrix random_embeddings(const Vocabulary& vocab, int dim, std::int64_t seed) {
    return random_matrix(vocab.size(), dim, seed);
}

// Word-vector text format: "<token> <v1> ... <vd>", one entry per line. An
// optional first line "<count> <dim>" (two integer fields) is skipped.
// Vocabulary tokens found in the file are copied verbatim; missing tokens and
// the OOV row fall back to the random distribution under fallback_seed, drawn
// in row order after the whole file is read, so loading is idempotent.
inline EmbeddingMatrix load_pretrained(const std::string& path, const Vocabulary& vocab, int dim,
                                       std::int64_t fallback_seed) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vector file: " + path);

    EmbeddingMatrix m;
    m.vocab_size = vocab.size();
    m.dim = dim;
    m.kind = EmbeddingKind::pretrained;
    m.values.assign(static_cast<std::size_t>(m.vocab_size) * dim, 0.0);
    std::vector<char> filled(static_cast<std::size_t>(m.vocab_size), 0);

    std::string line;
    long line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first) {
            first = false;
            // header detection: exactly two integer fields
            long a = 0, b = 0;
            std::string f1, f2, extra;
            std::istringstream probe(line);
            if (probe >> f1 >> f2 && !(probe >> extra) && detail::parse_int(f1, a) &&
                detail::parse_int(f2, b))
                continue;
        }
        std::istringstream ss(line);
        std::string token;
        ss >> token;
        std::vector<double> vals;
        vals.reserve(static_cast<std::size_t>(dim));
        double v = 0.0;
        while (ss >> v) vals.push_back(v);
        if (static_cast<int>(vals.size()) != dim)
            throw DataError(path + ": line " + std::to_string(line_no) + ": expected " +
                            std::to_string(dim) + " values, got " + std::to_string(vals.size()));
        auto it = vocab.token_to_index.find(token);
        if (it != vocab.token_to_index.end()) {
            double* row = m.row(it->second);
            for (int d = 0; d < dim; ++d) row[d] = vals[static_cast<std::size_t>(d)];
            filled[static_cast<std::size_t>(it->second)] = 1;
        }
    }

    long found = 0;
    for (int r = 2; r < m.vocab_size; ++r)
        if (filled[static_cast<std::size_t>(r)]) ++found;
    const long total = m.vocab_size - 2;
    m.coverage = total > 0 ? static_cast<double>(found) / static_cast<double>(total) : 1.0;

    Rng rng(static_cast<std::uint64_t>(fallback_seed));
    for (int r = 1; r < m.vocab_size; ++r) {
        if (filled[static_cast<std::size_t>(r)]) continue;
        double* row = m.row(r);
        for (int d = 0; d < dim; ++d)
            row[d] = rng.uniform(-kRandomEmbeddingScale, kRandomEmbeddingScale);
    }
    return m;
}

} // namespace deltatrain
