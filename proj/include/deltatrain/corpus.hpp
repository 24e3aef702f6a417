#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "deltatrain/errors.hpp"
#include "deltatrain/rng.hpp"
#include "deltatrain/util.hpp"

namespace deltatrain {

struct Document {
    std::string id;
    std::string raw_text;
    std::vector<std::string> tokens;
    std::optional<int> gold_label; // absent on the unlabeled pool
};

enum class DatasetFormat { csv_class_title_body, folder_per_class };

inline std::string format_name(DatasetFormat f) {
    return f == DatasetFormat::csv_class_title_body ? "csv_class_title_body" : "folder_per_class";
}

inline DatasetFormat parse_format(const std::string& s) {
    if (s == "csv_class_title_body") return DatasetFormat::csv_class_title_body;
    if (s == "folder_per_class") return DatasetFormat::folder_per_class;
    throw ConfigError("unknown dataset format: " + s);
}

class Vocabulary {
public:
    static constexpr int kPadIndex = 0;
    static constexpr int kOovIndex = 1;

    std::unordered_map<std::string, int> token_to_index; // non-reserved tokens only, indices >= 2
    int num_classes = 0;

    int size() const { return 2 + static_cast<int>(token_to_index.size()); }

    int lookup(const std::string& token) const {
        auto it = token_to_index.find(token);
        return it == token_to_index.end() ? kOovIndex : it->second;
    }
};

using TokenIdSequence = std::vector<int>;

// ---------------------------------------------------------------------------
// Tokenization: lowercase, split on whitespace, every ASCII punctuation
// character becomes its own token. Bytes >= 0x80 pass through unchanged, so
// UTF-8 text stays intact.

namespace detail {
inline bool is_space_byte(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
inline bool is_punct_byte(unsigned char c) {
    return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
           (c >= '{' && c <= '~');
}
inline char lower_byte(unsigned char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}
} // namespace detail

inline std::vector<std::string> tokenize(const std::string& raw_text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            tokens.push_back(current);
            current.clear();
        }
    };
    for (unsigned char c : raw_text) {
        if (detail::is_space_byte(c)) {
            flush();
        } else if (detail::is_punct_byte(c)) {
            flush();
            tokens.emplace_back(1, static_cast<char>(c));
        } else {
            current += detail::lower_byte(c);
        }
    }
    flush();
    return tokens;
}

// ---------------------------------------------------------------------------
// Ingestion

namespace detail {

// Minimal CSV reader: comma separator, optional double-quoting with ""
// escapes, quoted fields may contain commas and newlines.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    auto end_field = [&] {
        fields.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        // skip blank lines (a single empty field)
        if (!(fields.size() == 1 && fields[0].empty())) records.push_back(fields);
        fields.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            end_record();
        } else {
            field += c;
            field_started = true;
        }
    }
    if (!field.empty() && field.back() == '\r') field.pop_back();
    if (!field.empty() || !fields.empty()) end_record();
    return records;
}

inline bool parse_int(const std::string& s, long& out) {
    if (s.empty()) return false;
    std::size_t pos = 0;
    try {
        out = std::stol(s, &pos);
    } catch (...) {
        return false;
    }
    return pos == s.size();
}

} // namespace detail

// Loads a labeled dataset. CSV format: column 1 is a 1-based class index,
// remaining columns are concatenated with a space as the text. Folder
// format: <root>/<class_name>/*.txt with class indices assigned in sorted
// class-name order. Ids are "<id_prefix><record index>".
inline std::vector<Document> load_dataset(const std::string& path, DatasetFormat format,
                                          int declared_num_classes = 0,
                                          const std::string& id_prefix = "") {
    std::vector<Document> docs;
    if (format == DatasetFormat::csv_class_title_body) {
        const std::string text = read_file(path);
        const auto records = detail::parse_csv(text);
        for (std::size_t r = 0; r < records.size(); ++r) {
            const auto& rec = records[r];
            const std::string row = "row " + std::to_string(r + 1);
            if (rec.size() < 2)
                throw DataError(path + ": " + row + ": expected at least 2 columns, got " +
                                std::to_string(rec.size()));
            long cls = 0;
            if (!detail::parse_int(rec[0], cls))
                throw DataError(path + ": " + row + ": malformed class index '" + rec[0] + "'");
            if (cls < 1 || (declared_num_classes > 0 && cls > declared_num_classes))
                throw DataError(path + ": " + row + ": class index " + std::to_string(cls) +
                                " outside declared range 1.." +
                                std::to_string(declared_num_classes > 0 ? declared_num_classes : 0));
            Document d;
            d.id = id_prefix + std::to_string(docs.size());
            d.raw_text = join(std::vector<std::string>(rec.begin() + 1, rec.end()), " ");
            d.tokens = tokenize(d.raw_text);
            d.gold_label = static_cast<int>(cls - 1); // 1-based -> 0-based
            docs.push_back(std::move(d));
        }
    } else {
        namespace fs = std::filesystem;
        if (!fs::is_directory(path)) throw DataError("not a directory: " + path);
        std::vector<std::string> class_names;
        for (const auto& entry : fs::directory_iterator(path))
            if (entry.is_directory()) class_names.push_back(entry.path().filename().string());
        std::sort(class_names.begin(), class_names.end());
        if (declared_num_classes > 0 && static_cast<int>(class_names.size()) > declared_num_classes)
            throw DataError(path + ": found " + std::to_string(class_names.size()) +
                            " class directories, declared " + std::to_string(declared_num_classes));
        for (std::size_t c = 0; c < class_names.size(); ++c) {
            std::vector<std::string> files;
            for (const auto& entry : fs::directory_iterator(fs::path(path) / class_names[c]))
                if (entry.is_regular_file() && entry.path().extension() == ".txt")
                    files.push_back(entry.path().string());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) {
                Document d;
                d.id = id_prefix + std::to_string(docs.size());
                d.raw_text = read_file(f);
                d.tokens = tokenize(d.raw_text);
                d.gold_label = static_cast<int>(c);
                docs.push_back(std::move(d));
            }
        }
    }
    if (docs.empty()) throw DataError(path + ": empty dataset");
    return docs;
}

inline int infer_num_classes(const std::vector<Document>& docs) {
    int max_label = -1;
    for (const auto& d : docs)
        if (d.gold_label) max_label = std::max(max_label, *d.gold_label);
    return max_label + 1;
}

// Indices 2.. in descending corpus frequency, ties broken lexicographically.
inline Vocabulary build_vocabulary(const std::vector<Document>& documents, int min_freq = 1) {
    std::unordered_map<std::string, long> freq;
    for (const auto& d : documents)
        for (const auto& t : d.tokens) ++freq[t];
    std::vector<std::pair<std::string, long>> entries;
    entries.reserve(freq.size());
    for (auto& kv : freq)
        if (kv.second >= min_freq) entries.emplace_back(kv.first, kv.second);
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocabulary vocab;
    vocab.num_classes = infer_num_classes(documents);
    int next = 2;
    for (auto& e : entries) vocab.token_to_index.emplace(e.first, next++);
    return vocab;
}

// First max_len tokens mapped through the vocabulary (unknown -> OOV index 1),
// right-padded with the padding index 0.
inline TokenIdSequence encode(const Document& document, const Vocabulary& vocab, int max_len) {
    TokenIdSequence ids(static_cast<std::size_t>(max_len), Vocabulary::kPadIndex);
    const std::size_t n = std::min<std::size_t>(document.tokens.size(), static_cast<std::size_t>(max_len));
    for (std::size_t i = 0; i < n; ++i) ids[i] = vocab.lookup(document.tokens[i]);
    return ids;
}

// ---------------------------------------------------------------------------
// Semi-supervised split

struct SplitBundle {
    std::vector<Document> train;     // labeled
    std::vector<Document> dev;       // labeled
    std::vector<Document> test;      // labeled, untouched by training
    std::vector<Document> unlabeled; // gold_label stripped
    // True labels of the unlabeled pool, kept for diagnostics only. Training
    // code never receives this map; only metrics read it.
    std::unordered_map<std::string, int> hidden_gold;
    std::int64_t split_seed = 0;
    double labeled_fraction = 0.0;
    double dev_fraction = 0.0;
    int num_classes = 0;
    std::vector<std::string> warnings;
};

// |labeled pool| = rhu(labeled_fraction * N), |dev| = rhu(dev_fraction * |labeled pool|),
// sampled uniformly without replacement. The remainder becomes the unlabeled
// pool with labels hidden. The test partition is attached separately.
inline SplitBundle split_semi_supervised(const std::vector<Document>& dataset,
                                         double labeled_fraction, double dev_fraction,
                                         std::int64_t seed) {
    const std::size_t n = dataset.size();
    const long n_labeled = round_half_up(labeled_fraction * static_cast<double>(n));
    const long n_dev = round_half_up(dev_fraction * static_cast<double>(n_labeled));
    const int num_classes = infer_num_classes(dataset);
    if (n_labeled < num_classes)
        throw DataError("insufficient labeled data: pool of " + std::to_string(n_labeled) +
                        " is smaller than " + std::to_string(num_classes) + " classes");
    if (n_dev >= n_labeled)
        throw DataError("dev fraction leaves no training documents");

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(static_cast<std::uint64_t>(seed));
    rng.shuffle(perm);

    std::vector<std::size_t> dev_idx(perm.begin(), perm.begin() + n_dev);
    std::vector<std::size_t> train_idx(perm.begin() + n_dev, perm.begin() + n_labeled);
    std::vector<std::size_t> pool_idx(perm.begin() + n_labeled, perm.end());
    std::sort(dev_idx.begin(), dev_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(pool_idx.begin(), pool_idx.end());

    SplitBundle bundle;
    bundle.split_seed = seed;
    bundle.labeled_fraction = labeled_fraction;
    bundle.dev_fraction = dev_fraction;
    bundle.num_classes = num_classes;
    for (auto i : train_idx) bundle.train.push_back(dataset[i]);
    for (auto i : dev_idx) bundle.dev.push_back(dataset[i]);
    for (auto i : pool_idx) {
        Document d = dataset[i];
        if (d.gold_label) bundle.hidden_gold.emplace(d.id, *d.gold_label);
        d.gold_label.reset();
        bundle.unlabeled.push_back(std::move(d));
    }

    std::vector<char> seen(static_cast<std::size_t>(std::max(num_classes, 1)), 0);
    for (const auto& d : bundle.train)
        if (d.gold_label) seen[static_cast<std::size_t>(*d.gold_label)] = 1;
    for (const auto& d : bundle.dev)
        if (d.gold_label) seen[static_cast<std::size_t>(*d.gold_label)] = 1;
    for (int c = 0; c < num_classes; ++c)
        if (!seen[static_cast<std::size_t>(c)])
            bundle.warnings.push_back("class " + std::to_string(c) + " absent from labeled pool");
    return bundle;
}

} // namespace deltatrain
