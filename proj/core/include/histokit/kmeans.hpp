#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "histokit/error.hpp"
#include "histokit/image.hpp"

namespace histokit::filter {

struct ClusterModel {
    int k = 0;
    std::vector<std::vector<double>> centroids;
    double inertia = 0.0;  // sum of squared distances to the nearest centroid
};

// Lloyd iterations: assign to the nearest centroid (ties to the lowest
// index), recompute means; stops on stable assignments, centroid shift
// < tol, or max_iters. The objective is non-increasing across iterations.
// Empty clusters are re-seeded at the point farthest from its centroid.
ClusterModel kmeans_fit(const std::vector<std::vector<double>>& points, int k, std::uint64_t seed,
                        int max_iters = 100, double tol = 1e-9);

// Nearest centroid by Euclidean distance; ties to the lowest index.
int kmeans_assign(const ClusterModel& model, const std::vector<double>& point);

double squared_distance(const std::vector<double>& a, const std::vector<double>& b);

// Mean per-pixel intensity variance of a patch, intensity = (r+g+b)/3 on
// the 0..255 scale.
double patch_intensity_variance(const img::RgbImage& patch);

// The cluster whose member patches carry the higher mean intensity
// variance (textured tissue rather than blank background). k must be 2;
// ties go to the lower index.
int select_useful_cluster(const ClusterModel& model, const std::vector<img::RgbImage>& patches,
                          const std::vector<int>& assignments);

// "7,742 (46%)" style count-with-percentage cell.
std::string format_count_pct(long long count, long long total);

}  // namespace histokit::filter
