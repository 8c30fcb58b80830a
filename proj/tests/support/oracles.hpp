#pragma once

// Independent reference implementations the tests check the library
// against. Everything here recomputes results from first principles
// (finite differences, exhaustive enumeration, direct tallies) and must
// not call the code paths under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "histokit/network.hpp"

namespace oracles {

// ---------------------------------------------------------------------------
// Central finite differences at 64-bit.

struct GradCheckStats {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

inline double rel_err(double analytic, double numeric) {
    const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    return std::abs(analytic - numeric) / scale;
}

// Compares analytic parameter gradients of a scalar loss against central
// differences. `loss` must recompute the full forward pass from params.
inline GradCheckStats finite_diff_check(histokit::nn::ParametersT<double>& params,
                                        const histokit::nn::ParametersT<double>& analytic,
                                        const std::function<double()>& loss, double h = 1e-5) {
    GradCheckStats stats;
    auto p_tensors = histokit::nn::tensor_list(params);
    auto g_tensors = histokit::nn::tensor_list(const_cast<histokit::nn::ParametersT<double>&>(analytic));
    for (std::size_t t = 0; t < p_tensors.size(); ++t) {
        auto& pt = *p_tensors[t];
        const auto& gt = *g_tensors[t];
        for (std::size_t i = 0; i < pt.size(); ++i) {
            const double orig = pt.data[i];
            pt.data[i] = orig + h;
            const double fp = loss();
            pt.data[i] = orig - h;
            const double fm = loss();
            pt.data[i] = orig;
            const double numeric = (fp - fm) / (2 * h);
            stats.max_rel_err = std::max(stats.max_rel_err, rel_err(gt.data[i], numeric));
            ++stats.checked;
        }
    }
    return stats;
}

// ---------------------------------------------------------------------------
// Exhaustive 2-partition k-means optimum (n <= ~16).

inline double partition_inertia(const std::vector<std::vector<double>>& pts, std::uint32_t mask) {
    const std::size_t dim = pts[0].size();
    double inertia = 0.0;
    for (int side = 0; side < 2; ++side) {
        std::vector<double> mean(dim, 0.0);
        int count = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (((mask >> i) & 1u) == static_cast<std::uint32_t>(side)) {
                for (std::size_t d = 0; d < dim; ++d) mean[d] += pts[i][d];
                ++count;
            }
        }
        if (count == 0) continue;
        for (double& m : mean) m /= count;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (((mask >> i) & 1u) == static_cast<std::uint32_t>(side)) {
                for (std::size_t d = 0; d < dim; ++d) {
                    const double diff = pts[i][d] - mean[d];
                    inertia += diff * diff;
                }
            }
        }
    }
    return inertia;
}

inline double best_two_partition_inertia(const std::vector<std::vector<double>>& pts) {
    const std::uint32_t n = static_cast<std::uint32_t>(pts.size());
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        best = std::min(best, partition_inertia(pts, mask));
    }
    return best;
}

// ---------------------------------------------------------------------------
// Majority vote by direct counting with the declared tie rule.

inline int vote_count_oracle(const std::vector<int>& votes,
                             const std::vector<std::vector<float>>& probs, int classes) {
    std::vector<int> tally(static_cast<std::size_t>(classes), 0);
    for (const int v : votes) tally[static_cast<std::size_t>(v)]++;
    const int top = *std::max_element(tally.begin(), tally.end());
    int best = -1;
    double best_sum = -1.0;
    for (int c = 0; c < classes; ++c) {
        if (tally[static_cast<std::size_t>(c)] != top) continue;
        if (probs.empty()) return c;  // first (lowest) tied class
        double s = 0.0;
        for (const auto& row : probs) s += row[static_cast<std::size_t>(c)];
        if (s > best_sum) {
            best_sum = s;
            best = c;
        }
    }
    return best;
}

// Eq.-style binary closed form: floor(1/2 + (sum - 1/2)/n).
inline int binary_vote_closed_form(const std::vector<int>& votes) {
    double sum = 0.0;
    for (const int v : votes) sum += v;
    return static_cast<int>(std::floor(0.5 + (sum - 0.5) / static_cast<double>(votes.size())));
}

// ---------------------------------------------------------------------------
// Direct metric tallies.

struct TallyCounts {
    long long tp = 0, fp = 0, fn = 0, tn = 0;
};

inline TallyCounts tally_one_vs_rest(const std::vector<int>& truths, const std::vector<int>& preds,
                                     int cls) {
    TallyCounts t;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const bool is_true = truths[i] == cls;
        const bool is_pred = preds[i] == cls;
        if (is_true && is_pred) ++t.tp;
        else if (is_true) ++t.fn;
        else if (is_pred) ++t.fp;
        else ++t.tn;
    }
    return t;
}

// Pairwise Mann-Whitney statistic with ties counted one half.
inline double mann_whitney_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
    long long pairs = 0;
    double wins = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!positive[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (positive[j]) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

// Threshold-by-threshold ROC recount at a given threshold value
// (prediction = score >= threshold).
inline std::pair<double, double> roc_point_recount(const std::vector<double>& scores,
                                                   const std::vector<bool>& positive,
                                                   double threshold) {
    long long tp = 0, fp = 0, pos = 0, neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (positive[i]) {
            ++pos;
            if (scores[i] >= threshold) ++tp;
        } else {
            ++neg;
            if (scores[i] >= threshold) ++fp;
        }
    }
    return {static_cast<double>(fp) / static_cast<double>(neg),
            static_cast<double>(tp) / static_cast<double>(pos)};
}

// ---------------------------------------------------------------------------
// Slide aggregation by accumulate-then-scan.

inline int aggregate_argmax_oracle(const std::vector<std::vector<float>>& patch_probs) {
    const std::size_t classes = patch_probs[0].size();
    std::vector<double> sums(classes, 0.0);
    for (const auto& p : patch_probs) {
        for (std::size_t c = 0; c < classes; ++c) sums[c] += p[c];
    }
    int best = 0;
    for (int c = 1; c < static_cast<int>(classes); ++c) {
        if (sums[static_cast<std::size_t>(c)] > sums[static_cast<std::size_t>(best)]) best = c;
    }
    return best;
}

}  // namespace oracles
