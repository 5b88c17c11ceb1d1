#include "stagelens/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "stagelens/random.hpp"

namespace stagelens {
namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// O(n^2) per segment evaluation via prefix sums.
class PrefixCost {
 public:
  PrefixCost(const Eigen::MatrixXd& x, double lambda_reg)
      : n_(x.cols()),
        lambda_(lambda_reg),
        stride_(x.rows() + 1),
        sum_(x.rows() + 1),
        outer_(x.rows() + 1),
        memo_(static_cast<std::size_t>(stride_ * stride_), std::numeric_limits<double>::quiet_NaN()) {
    sum_[0] = Eigen::VectorXd::Zero(n_);
    outer_[0] = Eigen::MatrixXd::Zero(n_, n_);
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
      const Eigen::VectorXd v = x.row(t).transpose();
      sum_[t + 1] = sum_[t] + v;
      outer_[t + 1] = outer_[t] + v * v.transpose();
    }
  }

  // Memoized: the sweeps revisit the same slices many times.
  double operator()(int a, int b) const {
    double& slot = memo_[static_cast<std::size_t>(a * stride_ + b)];
    if (std::isnan(slot)) slot = evaluate(a, b);
    return slot;
  }

 private:
  double evaluate(int a, int b) const {
    const double m = b - a;
    const Eigen::VectorXd mu = (sum_[b] - sum_[a]) / m;
    Eigen::MatrixXd sigma = (outer_[b] - outer_[a]) / m - mu * mu.transpose();
    sigma.diagonal().array() += lambda_;
    const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * m * (static_cast<double>(n_) * (kLog2Pi + 1.0) + logdet);
  }

  Eigen::Index n_;
  double lambda_;
  Eigen::Index stride_;
  std::vector<Eigen::VectorXd> sum_;
  std::vector<Eigen::MatrixXd> outer_;
  mutable std::vector<double> memo_;
};

struct Split {
  int position = -1;
  double value = -std::numeric_limits<double>::infinity();  // F(a,t) + F(t,b)
};

Split best_split(const PrefixCost& cost, int a, int b) {
  Split s;
  for (int t = a + 1; t < b; ++t) {
    const double v = cost(a, t) + cost(t, b);
    if (v > s.value) {
      s.value = v;
      s.position = t;
    }
  }
  return s;
}

double total(const PrefixCost& cost, const std::vector<int>& bounds) {
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) sum += cost(bounds[i], bounds[i + 1]);
  return sum;
}

void adjust(const PrefixCost& cost, std::vector<int>& bounds) {
  constexpr int kMaxPasses = 100;
  constexpr double kImprovementTol = 1e-10;
  for (int pass = 0; pass < kMaxPasses; ++pass) {
    bool moved = false;
    for (std::size_t i = 1; i + 1 < bounds.size(); ++i) {
      const int a = bounds[i - 1], b = bounds[i + 1];
      const double current = cost(a, bounds[i]) + cost(bounds[i], b);
      const Split s = best_split(cost, a, b);
      if (s.position != bounds[i] && s.value > current + kImprovementTol) {
        bounds[i] = s.position;
        moved = true;
      }
    }
    if (moved) continue;
    // Adjacent pairs, jointly, between their outer neighbors.
    for (std::size_t i = 1; i + 2 < bounds.size(); ++i) {
      const int a = bounds[i - 1], b = bounds[i + 2];
      double best_value = cost(a, bounds[i]) + cost(bounds[i], bounds[i + 1]) + cost(bounds[i + 1], b) +
                          kImprovementTol;
      int p = -1, q = -1;
      for (int u = a + 1; u < b - 1; ++u)
        for (int v = u + 1; v < b; ++v) {
          const double value = cost(a, u) + cost(u, v) + cost(v, b);
          if (value > best_value) {
            best_value = value;
            p = u;
            q = v;
          }
        }
      if (p >= 0) {
        bounds[i] = p;
        bounds[i + 1] = q;
        moved = true;
      }
    }
    if (moved) continue;
    // Still stuck: try lifting one breakpoint and dropping it
    // at the best position anywhere, keeping the best such move overall.
    const double current = total(cost, bounds);
    double best_value = current + kImprovementTol;
    std::vector<int> best_bounds;
    for (std::size_t i = 1; i + 1 < bounds.size(); ++i) {
      std::vector<int> rest = bounds;
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i));
      const double base = total(cost, rest);
      for (std::size_t j = 0; j + 1 < rest.size(); ++j) {
        const int a = rest[j], b = rest[j + 1];
        if (b - a < 2) continue;
        const Split s = best_split(cost, a, b);
        const double value = base - cost(a, b) + s.value;
        if (value > best_value) {
          best_value = value;
          best_bounds = rest;
          best_bounds.insert(best_bounds.begin() + static_cast<std::ptrdiff_t>(j) + 1, s.position);
        }
      }
    }
    if (best_bounds.empty()) break;
    bounds = std::move(best_bounds);
  }
}

}  // namespace

GaussianSummary segment_loglik(const Eigen::MatrixXd& slice, double lambda_reg) {
  if (slice.rows() < 1) throw std::invalid_argument("segment_loglik: empty slice");
  if (!(lambda_reg > 0.0)) throw std::invalid_argument("segment_loglik: lambda_reg must be positive");
  if (!slice.allFinite()) throw std::invalid_argument("segment_loglik: non-finite input");
  const auto m = static_cast<double>(slice.rows());
  const auto n = static_cast<double>(slice.cols());

  GaussianSummary g;
  g.length = static_cast<int>(slice.rows());
  g.mu = slice.colwise().mean().transpose();
  const Eigen::MatrixXd centered = slice.rowwise() - g.mu.transpose();
  g.sigma = centered.transpose() * centered / m;
  g.sigma.diagonal().array() += lambda_reg;

  const Eigen::LLT<Eigen::MatrixXd> llt(g.sigma);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(slice.cols(), slice.cols()));
  double quad = 0.0;
  for (Eigen::Index i = 0; i < slice.rows(); ++i) quad += centered.row(i) * inv * centered.row(i).transpose();
  g.loglik = -0.5 * m * (n * kLog2Pi + logdet) - 0.5 * quad;
  g.regularized_loglik = g.loglik - 0.5 * m * lambda_reg * inv.trace();
  return g;
}

double tiling_objective(const Eigen::MatrixXd& x, const std::vector<int>& boundaries, double lambda_reg) {
  return total(PrefixCost(x, lambda_reg), boundaries);
}

double null_split_gain(const Eigen::MatrixXd& x, double lambda_reg, int permutations, std::uint64_t seed) {
  const int T = static_cast<int>(x.rows());
  if (T < 2 || permutations < 1) return 0.0;
  Rng rng(seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) order[static_cast<std::size_t>(t)] = t;
  double worst = 0.0;
  Eigen::MatrixXd shuffled(x.rows(), x.cols());
  for (int r = 0; r < permutations; ++r) {
    rng.shuffle(order);
    for (int t = 0; t < T; ++t) shuffled.row(t) = x.row(order[static_cast<std::size_t>(t)]);
    const PrefixCost cost(shuffled, lambda_reg);
    worst = std::max(worst, best_split(cost, 0, T).value - cost(0, T));
  }
  return worst;
}

SegmentationTrace greedy_segmentation(const Eigen::MatrixXd& x, const SegmentationParams& params) {
  if (params.max_segments < 1) throw std::invalid_argument("max_segments must be >= 1");
  if (!(params.lambda_reg > 0.0)) throw std::invalid_argument("lambda_reg must be positive");
  if (params.min_gain < 0.0) throw std::invalid_argument("min_gain must be >= 0");
  if (x.rows() < 1) throw std::invalid_argument("cannot segment an empty sequence");
  if (!x.allFinite()) throw std::invalid_argument("non-finite input to segmentation");
  const int T = static_cast<int>(x.rows());
  const PrefixCost cost(x, params.lambda_reg);

  // Greedy path: one breakpoint per step, each followed by a relocation sweep.
  std::vector<int> bounds{0, T};
  std::vector<std::vector<int>> path{bounds};
  std::vector<double> objective{total(cost, bounds)};
  while (static_cast<int>(bounds.size()) - 1 < params.max_segments) {
    int best_pos = -1;
    double best_gain = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
      const int a = bounds[i], b = bounds[i + 1];
      if (b - a < 2) continue;
      const Split s = best_split(cost, a, b);
      const double gain = s.value - cost(a, b);
      if (gain > best_gain) {
        best_gain = gain;
        best_pos = s.position;
      }
    }
    if (best_pos < 0) break;
    bounds.insert(std::upper_bound(bounds.begin(), bounds.end(), best_pos), best_pos);
    adjust(cost, bounds);
    const double next = total(cost, bounds);
    if (next < objective.back() - 1e-9) throw std::logic_error("segmentation objective decreased after insertion");
    path.push_back(bounds);
    objective.push_back(next);
  }

  SegmentationTrace trace;
  if (params.min_gain > 0.0) {
    // Noise level: residuals around the finest tiling on the path with at
    // most T/4 breakpoints, shuffled. Finer tilings on short sequences leave
    // too little residual and the threshold collapses.
    // Rows are rescaled by sqrt(m/(m-1)) to undo the shrinkage of fitting the
    // mean; single-window segments carry no residual and are left out.
    const std::size_t cap = std::max<std::size_t>(1, static_cast<std::size_t>(T / 4));
    const auto& finest = path[std::min(cap, path.size() - 1)];
    std::vector<Eigen::RowVectorXd> rows;
    for (std::size_t i = 0; i + 1 < finest.size(); ++i) {
      const int a = finest[i], m = finest[i + 1] - finest[i];
      if (m < 2) continue;
      const Eigen::RowVectorXd mu = x.middleRows(a, m).colwise().mean();
      const double scale = std::sqrt(static_cast<double>(m) / (m - 1));
      for (int t = a; t < a + m; ++t) rows.push_back((x.row(t) - mu) * scale);
    }
    Eigen::MatrixXd residual(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) residual.row(static_cast<Eigen::Index>(r)) = rows[r];
    trace.threshold =
        params.min_gain * null_split_gain(residual, params.lambda_reg, params.null_permutations, params.seed);
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < path.size(); ++k)
    if (objective[k] - trace.threshold * static_cast<double>(k) >
        objective[best] - trace.threshold * static_cast<double>(best))
      best = k;
  trace.boundaries = path[best];
  trace.objective = objective[best];
  for (std::size_t k = 1; k <= best; ++k) trace.gains.push_back(objective[k] - objective[k - 1]);
  trace.path_objectives = std::move(objective);
  return trace;
}

Eigen::MatrixXd normalized_matrix(const BehaviorSequence& sequence) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(sequence.events.size()), static_cast<Eigen::Index>(kBehaviorDims));
  for (std::size_t t = 0; t < sequence.events.size(); ++t)
    for (std::size_t d = 0; d < kBehaviorDims; ++d)
      x(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d)) = sequence.events[t].normalized[d];
  return x;
}

std::vector<Segment> segment_sequence(const BehaviorSequence& sequence, const SegmentationParams& params) {
  const Eigen::MatrixXd x = normalized_matrix(sequence);
  // Seeded by user id so the result does not depend on dataset order.
  SegmentationParams p = params;
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : sequence.user_id) h = (h ^ c) * 1099511628211ull;
  p.seed = params.seed ^ h;
  const SegmentationTrace trace = greedy_segmentation(x, p);
  std::vector<Segment> out;
  out.reserve(trace.boundaries.size() - 1);
  for (std::size_t i = 0; i + 1 < trace.boundaries.size(); ++i) {
    Segment s;
    s.user_id = sequence.user_id;
    s.start = trace.boundaries[i];
    s.end = trace.boundaries[i + 1];
    s.summary = segment_loglik(x.middleRows(s.start, s.end - s.start), params.lambda_reg);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace stagelens
