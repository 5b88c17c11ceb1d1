#pragma once

// Reference implementations the library is checked against. Deliberately
// naive: direct formulas, exhaustive enumeration, no shared code with src/.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stagelens/patterns.hpp"
#include "stagelens/random.hpp"

namespace oracle {

// Multivariate normal log density, straight from the formula.
inline double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma) {
  const double n = static_cast<double>(x.size());
  const Eigen::VectorXd d = x - mu;
  return -0.5 * (n * std::log(2.0 * std::numbers::pi) + std::log(sigma.determinant()) +
                 d.dot(sigma.inverse() * d));
}

// Regularized loglik of a slice: sum of log densities minus the ridge trace term.
inline double slice_objective(const Eigen::MatrixXd& x, int a, int b, double lambda_reg) {
  const int m = b - a;
  const Eigen::MatrixXd s = x.middleRows(a, m);
  const Eigen::VectorXd mu = s.colwise().mean().transpose();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  for (int i = 0; i < m; ++i) {
    const Eigen::VectorXd d = s.row(i).transpose() - mu;
    sigma += d * d.transpose();
  }
  sigma /= m;
  sigma += lambda_reg * Eigen::MatrixXd::Identity(x.cols(), x.cols());
  double ll = 0.0;
  for (int i = 0; i < m; ++i) ll += mvn_logpdf(s.row(i).transpose(), mu, sigma);
  return ll - 0.5 * m * lambda_reg * sigma.inverse().trace();
}

// Best objective over every tiling into exactly k segments.
inline double exhaustive_best(const Eigen::MatrixXd& x, int k, double lambda_reg) {
  const int T = static_cast<int>(x.rows());
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> cut;
  std::function<void(int, int)> rec = [&](int from, int left) {
    if (left == 0) {
      std::vector<int> b{0};
      b.insert(b.end(), cut.begin(), cut.end());
      b.push_back(T);
      double v = 0.0;
      for (std::size_t i = 0; i + 1 < b.size(); ++i) v += slice_objective(x, b[i], b[i + 1], lambda_reg);
      best = std::max(best, v);
      return;
    }
    for (int t = from; t <= T - left; ++t) {
      cut.push_back(t);
      rec(t + 1, left - 1);
      cut.pop_back();
    }
  };
  if (k >= 1 && k <= T) rec(1, k - 1);
  return best;
}

// ---------------------------------------------------------------------------
// Warping

inline Eigen::MatrixXd keogh_derivative(const Eigen::MatrixXd& q) {
  const int n = static_cast<int>(q.rows());
  Eigen::MatrixXd d(n, q.cols());
  for (int i = 1; i < n - 1; ++i)
    for (int c = 0; c < q.cols(); ++c)
      d(i, c) = ((q(i, c) - q(i - 1, c)) + (q(i + 1, c) - q(i - 1, c)) / 2.0) / 2.0;
  d.row(0) = d.row(1);
  d.row(n - 1) = d.row(n - 2);
  return d;
}

inline double logistic_weight(int offset, int max_len) {
  return 1.0 / (1.0 + std::exp(-0.05 * (offset - max_len / 2.0)));
}

// Minimum over every monotone path from (0,0) to (n-1,m-1), enumerated by DFS.
inline double brute_wddtw(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const bool der = a.rows() >= 3 && b.rows() >= 3;
  const Eigen::MatrixXd da = der ? keogh_derivative(a) : a;
  const Eigen::MatrixXd db = der ? keogh_derivative(b) : b;
  const int n = static_cast<int>(a.rows()), m = static_cast<int>(b.rows());
  const int g = std::max(n, m);
  auto cost = [&](int i, int j) {
    double s = 0.0;
    for (int c = 0; c < a.cols(); ++c) s += (da(i, c) - db(j, c)) * (da(i, c) - db(j, c));
    return logistic_weight(std::abs(i - j), g) * s;
  };
  double best = std::numeric_limits<double>::infinity();
  std::function<void(int, int, double)> walk = [&](int i, int j, double acc) {
    acc += cost(i, j);
    if (i == n - 1 && j == m - 1) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < n) walk(i + 1, j, acc);
    if (j + 1 < m) walk(i, j + 1, acc);
    if (i + 1 < n && j + 1 < m) walk(i + 1, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

// ---------------------------------------------------------------------------
// Clustering

inline double silhouette(const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  const int n = static_cast<int>(x.rows());
  std::set<int> ks(labels.begin(), labels.end());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    std::map<int, double> sum;
    std::map<int, int> cnt;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      sum[labels[j]] += (x.row(i) - x.row(j)).norm();
      ++cnt[labels[j]];
    }
    if (cnt[labels[i]] == 0) continue;  // singleton: s = 0
    const double a = sum[labels[i]] / cnt[labels[i]];
    double b = std::numeric_limits<double>::infinity();
    for (int k : ks)
      if (k != labels[i]) b = std::min(b, sum[k] / cnt[k]);
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / n;
}

inline double adjusted_rand(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> nij;
  std::map<int, double> ai, bj;
  for (std::size_t i = 0; i < a.size(); ++i) {
    nij[{a[i], b[i]}] += 1;
    ai[a[i]] += 1;
    bj[b[i]] += 1;
  }
  auto c2 = [](double v) { return v * (v - 1) / 2.0; };
  double index = 0, sa = 0, sb = 0;
  for (auto& [k, v] : nij) index += c2(v);
  for (auto& [k, v] : ai) sa += c2(v);
  for (auto& [k, v] : bj) sb += c2(v);
  const double expected = sa * sb / c2(static_cast<double>(a.size()));
  const double max_index = (sa + sb) / 2.0;
  return max_index == expected ? 1.0 : (index - expected) / (max_index - expected);
}

// ---------------------------------------------------------------------------
// Patterns

inline bool contains(const std::vector<int>& seq, const std::vector<int>& pat) {
  for (std::size_t i = 0; i + pat.size() <= seq.size(); ++i) {
    bool ok = true;
    for (std::size_t k = 0; k < pat.size(); ++k) ok = ok && seq[i + k] == pat[k];
    if (ok) return true;
  }
  return false;
}

struct Counts {
  double f_r = 0, f_d = 0, f_m = 0;
};

// Every contiguous substring of every sequence, with containment fractions per group.
inline std::map<std::vector<int>, Counts> brute_mine(const std::vector<stagelens::StageSequence>& seqs,
                                                     int max_len) {
  std::set<std::vector<int>> all;
  for (const auto& s : seqs)
    for (std::size_t i = 0; i < s.stages.size(); ++i)
      for (std::size_t j = i + 1; j <= s.stages.size() && j - i <= static_cast<std::size_t>(max_len); ++j)
        all.insert(std::vector<int>(s.stages.begin() + i, s.stages.begin() + j));
  double nr = 0, nd = 0, nm = 0;
  for (const auto& s : seqs)
    (s.group == stagelens::Group::Recovery ? nr : s.group == stagelens::Group::Deterioration ? nd : nm) += 1;
  std::map<std::vector<int>, Counts> out;
  for (const auto& p : all) {
    Counts c;
    for (const auto& s : seqs) {
      if (!contains(s.stages, p)) continue;
      (s.group == stagelens::Group::Recovery ? c.f_r : s.group == stagelens::Group::Deterioration ? c.f_d : c.f_m) +=
          1;
    }
    c.f_r = nr ? c.f_r / nr : 0;
    c.f_d = nd ? c.f_d / nd : 0;
    c.f_m = nm ? c.f_m / nm : 0;
    out[p] = c;
  }
  return out;
}

inline std::vector<stagelens::StageSequence> random_corpus(stagelens::Rng& rng, int n_seq, int max_len, int alphabet) {
  std::vector<stagelens::StageSequence> out;
  for (int i = 0; i < n_seq; ++i) {
    stagelens::StageSequence s;
    s.user_id = "u" + std::to_string(i);
    s.group = static_cast<stagelens::Group>(rng.index(3));
    const int len = rng.integer(1, max_len);
    for (int t = 0; t < len; ++t) s.stages.push_back(rng.integer(1, alphabet));
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<stagelens::StageSequence> swap_groups(std::vector<stagelens::StageSequence> seqs) {
  for (auto& s : seqs) {
    if (s.group == stagelens::Group::Recovery) s.group = stagelens::Group::Deterioration;
    else if (s.group == stagelens::Group::Deterioration) s.group = stagelens::Group::Recovery;
  }
  return seqs;
}

// ---------------------------------------------------------------------------
// Generators

// T x n standard normal rows; rows from `at` on shifted by `shift` in every dimension.
inline Eigen::MatrixXd mean_shift(stagelens::Rng& rng, int T, int n, int at, double shift) {
  Eigen::MatrixXd x(T, n);
  for (int t = 0; t < T; ++t)
    for (int d = 0; d < n; ++d) x(t, d) = rng.normal() + (t >= at ? shift : 0.0);
  return x;
}

}  // namespace oracle
