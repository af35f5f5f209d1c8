#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "experts/rng.hpp"

namespace testutil {

// Independent AP oracle: walks distinct score thresholds from high to low
// and accumulates the non-interpolated PR area as sum over thresholds of
// (recall gain) * (precision at threshold). Deliberately a different
// formulation than the library's single sorted pass.
inline double ap_brute_force(const std::vector<double>& scores,
                             const std::vector<uint8_t>& labels) {
    const size_t n = scores.size();
    int64_t total_pos = 0;
    for (uint8_t b : labels) total_pos += b;
    std::vector<double> thresholds = scores;
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    double area = 0.0;
    double prev_recall = 0.0;
    for (double th : thresholds) {
        int64_t tp = 0, fp = 0;
        for (size_t i = 0; i < n; ++i) {
            if (scores[i] >= th) {
                if (labels[i]) ++tp;
                else ++fp;
            }
        }
        double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return area;
}

// Fraction of label permutations whose AP is >= the observed one.
template <typename ApFn>
double permutation_test_p(ApFn&& ap_of_labels, std::vector<uint8_t> labels, double observed,
                          int n_perm, uint64_t seed) {
    experts::Philox rng(seed, 0x9e4);
    int ge = 0;
    for (int p = 0; p < n_perm; ++p) {
        for (size_t i = labels.size(); i > 1; --i) {
            uint32_t j = rng.bounded(static_cast<uint32_t>(i));
            std::swap(labels[i - 1], labels[static_cast<size_t>(j)]);
        }
        if (ap_of_labels(labels) >= observed) ++ge;
    }
    return (ge + 1.0) / (n_perm + 1.0);
}

// Two-proportion z-test (normal approximation), one-sided p-value for
// p1 > p2.
inline double two_proportion_p(int hits1, int n1, int hits2, int n2) {
    double p1 = static_cast<double>(hits1) / n1;
    double p2 = static_cast<double>(hits2) / n2;
    double pooled = static_cast<double>(hits1 + hits2) / (n1 + n2);
    double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
    if (se == 0.0) return p1 > p2 ? 0.0 : 1.0;
    double z = (p1 - p2) / se;
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

inline std::string temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("experts_test_" + tag);
    std::filesystem::create_directories(dir);
    return dir.string();
}

} // namespace testutil
