#pragma once

#include <string>
#include <vector>

#include "deltatrain/errors.hpp"
#include "deltatrain/textcnn.hpp"

namespace deltatrain {

inline double accuracy(const std::vector<int>& predicted, const std::vector<int>& gold) {
    if (predicted.size() != gold.size())
        throw DataError("accuracy: length mismatch (" + std::to_string(predicted.size()) + " vs " +
                        std::to_string(gold.size()) + ")");
    if (predicted.empty()) throw DataError("accuracy: empty inputs");
    long correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == gold[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

inline double accuracy(const std::vector<Prediction>& predictions, const std::vector<int>& gold) {
    std::vector<int> labels;
    labels.reserve(predictions.size());
    for (const auto& p : predictions) labels.push_back(p.label);
    return accuracy(labels, gold);
}

// Joint correctness of (rand, emb) over a pool: TT both correct, TF rand
// correct only, FT emb correct only, FF both wrong. By construction
// accuracy(rand) = TT + TF and accuracy(emb) = TT + FT.
struct QuadrantRatios {
    double tt = 0.0, tf = 0.0, ft = 0.0, ff = 0.0;
};

inline QuadrantRatios quadrant_ratios(const std::vector<int>& rand_labels,
                                      const std::vector<int>& emb_labels,
                                      const std::vector<int>& gold_labels) {
    if (rand_labels.size() != gold_labels.size() || emb_labels.size() != gold_labels.size())
        throw DataError("quadrant_ratios: length mismatch");
    if (gold_labels.empty()) throw DataError("quadrant_ratios: empty inputs");
    long tt = 0, tf = 0, ft = 0, ff = 0;
    for (std::size_t i = 0; i < gold_labels.size(); ++i) {
        const bool r = rand_labels[i] == gold_labels[i];
        const bool e = emb_labels[i] == gold_labels[i];
        (r ? (e ? tt : tf) : (e ? ft : ff))++;
    }
    const double n = static_cast<double>(gold_labels.size());
    return QuadrantRatios{tt / n, tf / n, ft / n, ff / n};
}

inline const char* quadrant_name(bool rand_correct, bool emb_correct) {
    return rand_correct ? (emb_correct ? "TT" : "TF") : (emb_correct ? "FT" : "FF");
}

} // namespace deltatrain
