#include "histokit/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "histokit/rng.hpp"

namespace histokit::filter {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw DimensionError("point dimensions differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

int kmeans_assign(const ClusterModel& model, const std::vector<double>& point) {
    if (model.k < 1) throw StateError("cluster model is empty");
    int best = 0;
    double best_d = squared_distance(model.centroids[0], point);
    for (int j = 1; j < model.k; ++j) {
        const double d = squared_distance(model.centroids[static_cast<std::size_t>(j)], point);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

namespace {

double total_inertia(const std::vector<std::vector<double>>& points,
                     const std::vector<std::vector<double>>& centroids,
                     const std::vector<int>& assignment) {
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        s += squared_distance(points[i], centroids[static_cast<std::size_t>(assignment[i])]);
    }
    return s;
}

}  // namespace

ClusterModel kmeans_fit(const std::vector<std::vector<double>>& points, int k, std::uint64_t seed,
                        int max_iters, double tol) {
    const int n = static_cast<int>(points.size());
    if (k < 1) throw DomainError("k must be >= 1");
    if (n < k) throw DomainError("need at least k points, got " + std::to_string(n));
    const std::size_t dim = points[0].size();
    for (const auto& p : points) {
        if (p.size() != dim) throw DimensionError("points have mixed dimensions");
    }

    Rng rng(seed);
    ClusterModel model;
    model.k = k;
    for (const int idx : rng.sample_indices(n, k)) {
        model.centroids.push_back(points[static_cast<std::size_t>(idx)]);
    }

    std::vector<int> assignment(static_cast<std::size_t>(n), -1);
    double prev_inertia = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            const int a = kmeans_assign(model, points[static_cast<std::size_t>(i)]);
            if (a != assignment[static_cast<std::size_t>(i)]) changed = true;
            assignment[static_cast<std::size_t>(i)] = a;
        }

        // Re-seed empty clusters at the point farthest from its centroid.
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (const int a : assignment) counts[static_cast<std::size_t>(a)]++;
        for (int j = 0; j < k; ++j) {
            if (counts[static_cast<std::size_t>(j)] > 0) continue;
            int far = -1;
            double far_d = -1.0;
            for (int i = 0; i < n; ++i) {
                const int a = assignment[static_cast<std::size_t>(i)];
                if (counts[static_cast<std::size_t>(a)] <= 1) continue;  // keep donor non-empty
                const double d = squared_distance(points[static_cast<std::size_t>(i)],
                                                  model.centroids[static_cast<std::size_t>(a)]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far < 0) break;  // all points coincide; leave the cluster empty
            counts[static_cast<std::size_t>(assignment[static_cast<std::size_t>(far)])]--;
            assignment[static_cast<std::size_t>(far)] = j;
            counts[static_cast<std::size_t>(j)] = 1;
            model.centroids[static_cast<std::size_t>(j)] = points[static_cast<std::size_t>(far)];
            changed = true;
        }

        const double inertia = total_inertia(points, model.centroids, assignment);
        if (inertia > prev_inertia + 1e-9) {
            throw StateError("kmeans objective increased; invariant violated");
        }
        prev_inertia = inertia;

        // Means update.
        std::vector<std::vector<double>> next(static_cast<std::size_t>(k),
                                              std::vector<double>(dim, 0.0));
        for (int i = 0; i < n; ++i) {
            const auto& p = points[static_cast<std::size_t>(i)];
            auto& c = next[static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)])];
            for (std::size_t dd = 0; dd < dim; ++dd) c[dd] += p[dd];
        }
        double shift = 0.0;
        for (int j = 0; j < k; ++j) {
            if (counts[static_cast<std::size_t>(j)] == 0) continue;
            for (std::size_t dd = 0; dd < dim; ++dd) {
                next[static_cast<std::size_t>(j)][dd] /= counts[static_cast<std::size_t>(j)];
            }
            shift += squared_distance(next[static_cast<std::size_t>(j)],
                                      model.centroids[static_cast<std::size_t>(j)]);
            model.centroids[static_cast<std::size_t>(j)] = next[static_cast<std::size_t>(j)];
        }

        if (!changed || shift < tol) break;
    }

    // Final assignment against the converged centroids.
    for (int i = 0; i < n; ++i) {
        assignment[static_cast<std::size_t>(i)] = kmeans_assign(model, points[static_cast<std::size_t>(i)]);
    }
    model.inertia = total_inertia(points, model.centroids, assignment);
    return model;
}

double patch_intensity_variance(const img::RgbImage& patch) {
    const std::size_t n = static_cast<std::size_t>(patch.width) * patch.height;
    if (n == 0) return 0.0;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean += (patch.pixels[i * 3] + patch.pixels[i * 3 + 1] + patch.pixels[i * 3 + 2]) / 3.0;
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v =
            (patch.pixels[i * 3] + patch.pixels[i * 3 + 1] + patch.pixels[i * 3 + 2]) / 3.0;
        var += (v - mean) * (v - mean);
    }
    return var / static_cast<double>(n);
}

int select_useful_cluster(const ClusterModel& model, const std::vector<img::RgbImage>& patches,
                          const std::vector<int>& assignments) {
    if (model.k != 2) throw ConfigError("useful-cluster selection expects exactly 2 clusters");
    if (patches.size() != assignments.size()) {
        throw DimensionError("patch/assignment count mismatch");
    }
    double sum[2] = {0.0, 0.0};
    long long count[2] = {0, 0};
    for (std::size_t i = 0; i < patches.size(); ++i) {
        const int a = assignments[i];
        if (a < 0 || a > 1) throw DomainError("assignment out of range");
        sum[a] += patch_intensity_variance(patches[i]);
        count[a] += 1;
    }
    const double mean0 = count[0] ? sum[0] / static_cast<double>(count[0]) : 0.0;
    const double mean1 = count[1] ? sum[1] / static_cast<double>(count[1]) : 0.0;
    return mean1 > mean0 ? 1 : 0;
}

std::string format_count_pct(long long count, long long total) {
    std::string digits = std::to_string(count);
    std::string grouped;
    int run = 0;
    for (int i = static_cast<int>(digits.size()) - 1; i >= 0; --i) {
        grouped.push_back(digits[static_cast<std::size_t>(i)]);
        if (++run == 3 && i > 0) {
            grouped.push_back(',');
            run = 0;
        }
    }
    std::reverse(grouped.begin(), grouped.end());
    const long long pct = total > 0 ? std::llround(100.0 * static_cast<double>(count) / static_cast<double>(total)) : 0;
    return grouped + " (" + std::to_string(pct) + "%)";
}

}  // namespace histokit::filter
