#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace stagelens {

// Observations are matrix rows throughout.

struct KMeansOptions {
  int restarts = 10;
  int max_iterations = 300;
  double tolerance = 1e-6;  // max centroid shift
  std::uint64_t seed = 0;
};

struct KMeansResult {
  Eigen::MatrixXd centroids;  // k x d
  std::vector<int> labels;    // 0-based, canonicalized: descending size, then centroid order
  double inertia = 0.0;
  int iterations = 0;
};

std::size_t distinct_rows(const Eigen::MatrixXd& points);

/// Lloyd iterations from k-means++ seeds; best inertia over the restarts.
/// Throws std::invalid_argument when k exceeds the number of distinct points.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, const KMeansOptions& options);

/// Index of the nearest centroid (ties to the lowest index).
int nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& x);

struct SilhouetteResult {
  double score = 0.0;
  bool degenerate = false;  // fewer than 2 or more than N-1 clusters, or no spread
};

SilhouetteResult silhouette(const Eigen::MatrixXd& points, const std::vector<int>& labels);

/// Exact when N <= max_points, otherwise silhouette of a seeded subsample.
SilhouetteResult silhouette_sampled(const Eigen::MatrixXd& points, const std::vector<int>& labels,
                                    std::size_t max_points, std::uint64_t seed);

/// Between/within dispersion ratio. 0 when undefined.
double calinski_harabasz(const Eigen::MatrixXd& points, const std::vector<int>& labels);

Eigen::MatrixXd cosine_similarity(const Eigen::MatrixXd& centroids);

std::vector<double> size_proportions(const std::vector<int>& labels, int k);

/// Agglomerative clustering with Ward linkage, cut at n_clusters. Labels are
/// numbered by first appearance.
std::vector<int> ward_clusters(const Eigen::MatrixXd& points, int n_clusters);

}  // namespace stagelens
