#include "stagelens/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "stagelens/random.hpp"

namespace stagelens {
namespace {

struct RowLess {
  bool operator()(const std::vector<double>& a, const std::vector<double>& b) const {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  }
};

std::vector<double> to_vec(const Eigen::RowVectorXd& r) {
  return std::vector<double>(r.data(), r.data() + r.size());
}

std::vector<int> kmeanspp_seeds(const Eigen::MatrixXd& x, int k, Rng& rng) {
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<int> seeds{static_cast<int>(rng.index(n))};
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (x.row(i) - x.row(seeds[0])).squaredNorm();
  while (static_cast<int>(seeds.size()) < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    double target = rng.uniform() * total;
    for (pick = 0; pick < n; ++pick) {
      if (d2[pick] <= 0.0) continue;
      target -= d2[pick];
      if (target < 0.0) break;
    }
    if (pick == n) {
      // Rounding left the target unconsumed; take the last point with mass.
      for (pick = n; pick-- > 0;)
        if (d2[pick] > 0.0) break;
    }
    seeds.push_back(static_cast<int>(pick));
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (x.row(i) - x.row(static_cast<Eigen::Index>(pick))).squaredNorm());
  }
  return seeds;
}

KMeansResult lloyd(const Eigen::MatrixXd& x, Eigen::MatrixXd centroids, const KMeansOptions& opt) {
  const Eigen::Index n = x.rows();
  const Eigen::Index k = centroids.rows();
  KMeansResult res;
  res.labels.assign(static_cast<std::size_t>(n), 0);
  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    for (Eigen::Index i = 0; i < n; ++i) res.labels[i] = nearest_centroid(centroids, x.row(i));

    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      next.row(res.labels[i]) += x.row(i);
      ++counts[res.labels[i]];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        next.row(c) /= counts[c];
        continue;
      }
      // Empty cluster: move it to the point farthest from its centroid.
      Eigen::Index far = 0;
      double best = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = (x.row(i) - centroids.row(res.labels[i])).squaredNorm();
        if (d > best) {
          best = d;
          far = i;
        }
      }
      next.row(c) = x.row(far);
    }
    const double shift = (next - centroids).rowwise().norm().maxCoeff();
    centroids = std::move(next);
    if (shift < opt.tolerance) break;
  }
  for (Eigen::Index i = 0; i < n; ++i) res.labels[i] = nearest_centroid(centroids, x.row(i));
  res.inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) res.inertia += (x.row(i) - centroids.row(res.labels[i])).squaredNorm();
  res.centroids = std::move(centroids);
  return res;
}

void canonicalize(KMeansResult& res) {
  const auto k = static_cast<int>(res.centroids.rows());
  std::vector<int> sizes(k, 0);
  for (int l : res.labels) ++sizes[l];
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (sizes[a] != sizes[b]) return sizes[a] > sizes[b];
    return RowLess{}(to_vec(res.centroids.row(a)), to_vec(res.centroids.row(b)));
  });
  std::vector<int> remap(k);
  Eigen::MatrixXd sorted(res.centroids.rows(), res.centroids.cols());
  for (int pos = 0; pos < k; ++pos) {
    remap[order[pos]] = pos;
    sorted.row(pos) = res.centroids.row(order[pos]);
  }
  for (int& l : res.labels) l = remap[l];
  res.centroids = std::move(sorted);
}

}  // namespace

std::size_t distinct_rows(const Eigen::MatrixXd& points) {
  std::set<std::vector<double>, RowLess> rows;
  for (Eigen::Index i = 0; i < points.rows(); ++i) rows.insert(to_vec(points.row(i)));
  return rows.size();
}

int nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (x - centroids.row(c)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, const KMeansOptions& options) {
  if (k < 1) throw std::invalid_argument("k must be positive");
  if (static_cast<std::size_t>(k) > distinct_rows(points))
    throw std::invalid_argument("degenerate clustering: k exceeds the number of distinct points");
  Rng rng(options.seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    const auto seeds = kmeanspp_seeds(points, k, rng);
    Eigen::MatrixXd init(k, points.cols());
    for (int c = 0; c < k; ++c) init.row(c) = points.row(seeds[c]);
    auto res = lloyd(points, std::move(init), options);
    if (res.inertia < best.inertia) best = std::move(res);
  }
  canonicalize(best);
  return best;
}

SilhouetteResult silhouette(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
  const auto n = static_cast<std::size_t>(points.rows());
  SilhouetteResult out;
  if (n == 0) {
    out.degenerate = true;
    return out;
  }
  const int k = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<int> sizes(k, 0);
  for (int l : labels) ++sizes[l];
  const auto used = std::count_if(sizes.begin(), sizes.end(), [](int s) { return s > 0; });
  if (used < 2 || static_cast<std::size_t>(used) > n - 1) {
    out.degenerate = true;
    return out;
  }
  double total = 0.0;
  bool any_spread = false;
  std::vector<double> sums(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      sums[labels[j]] += (points.row(i) - points.row(j)).norm();
    }
    const int own = labels[i];
    if (sizes[own] == 1) continue;  // s(i) = 0
    const double a = sums[own] / (sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c)
      if (c != own && sizes[c] > 0) b = std::min(b, sums[c] / sizes[c]);
    const double denom = std::max(a, b);
    if (denom > 0.0) {
      total += (b - a) / denom;
      any_spread = true;
    }
  }
  out.score = total / static_cast<double>(n);
  out.degenerate = !any_spread;
  return out;
}

SilhouetteResult silhouette_sampled(const Eigen::MatrixXd& points, const std::vector<int>& labels,
                                    std::size_t max_points, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n <= max_points) return silhouette(points, labels);
  Rng rng(seed);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < max_points; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
  idx.resize(max_points);
  std::sort(idx.begin(), idx.end());
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(max_points), points.cols());
  std::vector<int> sub_labels(max_points);
  for (std::size_t i = 0; i < max_points; ++i) {
    sub.row(static_cast<Eigen::Index>(i)) = points.row(static_cast<Eigen::Index>(idx[i]));
    sub_labels[i] = labels[idx[i]];
  }
  return silhouette(sub, sub_labels);
}

double calinski_harabasz(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
  const auto n = points.rows();
  if (n == 0) return 0.0;
  const int k = *std::max_element(labels.begin(), labels.end()) + 1;
  Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(k, points.cols());
  std::vector<int> sizes(k, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    centers.row(labels[i]) += points.row(i);
    ++sizes[labels[i]];
  }
  const auto used = std::count_if(sizes.begin(), sizes.end(), [](int s) { return s > 0; });
  if (used < 2 || used >= n) return 0.0;
  for (int c = 0; c < k; ++c)
    if (sizes[c] > 0) centers.row(c) /= sizes[c];
  const Eigen::RowVectorXd mean = points.colwise().mean();
  double between = 0.0, within = 0.0;
  for (int c = 0; c < k; ++c) between += sizes[c] * (centers.row(c) - mean).squaredNorm();
  for (Eigen::Index i = 0; i < n; ++i) within += (points.row(i) - centers.row(labels[i])).squaredNorm();
  if (within <= 0.0) return 0.0;
  return (between / static_cast<double>(used - 1)) / (within / static_cast<double>(n - used));
}

Eigen::MatrixXd cosine_similarity(const Eigen::MatrixXd& centroids) {
  const auto k = centroids.rows();
  Eigen::MatrixXd out(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = a; b < k; ++b) {
      const double na = centroids.row(a).norm(), nb = centroids.row(b).norm();
      const double s = (na > 0.0 && nb > 0.0) ? centroids.row(a).dot(centroids.row(b)) / (na * nb) : 0.0;
      out(a, b) = out(b, a) = s;
    }
  }
  return out;
}

std::vector<double> size_proportions(const std::vector<int>& labels, int k) {
  std::vector<double> p(static_cast<std::size_t>(k), 0.0);
  if (labels.empty()) return p;
  for (int l : labels) p[l] += 1.0;
  for (double& v : p) v /= static_cast<double>(labels.size());
  return p;
}

std::vector<int> ward_clusters(const Eigen::MatrixXd& points, int n_clusters) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n_clusters < 1 || static_cast<std::size_t>(n_clusters) > n)
    throw std::invalid_argument("ward: cluster count out of range");
  // Lance-Williams on squared Euclidean distances.
  std::vector<std::vector<double>> d2(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      d2[i][j] = d2[j][i] = (points.row(i) - points.row(j)).squaredNorm();
  std::vector<int> size(n, 1);
  std::vector<bool> alive(n, true);
  std::vector<std::size_t> owner(n);
  std::iota(owner.begin(), owner.end(), 0);
  std::size_t clusters = n;
  while (clusters > static_cast<std::size_t>(n_clusters)) {
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (alive[j] && d2[i][j] < best) {
          best = d2[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    for (std::size_t m = 0; m < n; ++m) {
      if (!alive[m] || m == bi || m == bj) continue;
      const double ni = size[bi], nj = size[bj], nm = size[m];
      const double v = ((ni + nm) * d2[bi][m] + (nj + nm) * d2[bj][m] - nm * d2[bi][bj]) / (ni + nj + nm);
      d2[bi][m] = d2[m][bi] = v;
    }
    size[bi] += size[bj];
    alive[bj] = false;
    for (auto& o : owner)
      if (o == bj) o = bi;
    --clusters;
  }
  std::vector<int> labels(n);
  std::vector<long> first(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (first[owner[i]] < 0) first[owner[i]] = next++;
    labels[i] = static_cast<int>(first[owner[i]]);
  }
  return labels;
}

}  // namespace stagelens
