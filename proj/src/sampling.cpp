#include "pfacts/sampling.hpp"

#include <algorithm>
#include <limits>

#include "pfacts/rng.hpp"

namespace pfacts {

namespace {

using Eigen::Index;

double sq_dist(const Eigen::MatrixXd& a, Index i, const Eigen::MatrixXd& b, Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

Eigen::MatrixXd plus_plus_init(const Eigen::MatrixXd& points, std::size_t k, Rng& rng) {
  const Index n = points.rows();
  Eigen::MatrixXd centroids(static_cast<Index>(k), points.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);

  auto first = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
  centroids.row(0) = points.row(first);
  chosen[static_cast<std::size_t>(first)] = true;
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = sq_dist(points, i, centroids, 0);

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    Index pick = -1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (Index i = 0; i < n; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (acc > target && d2[static_cast<std::size_t>(i)] > 0.0) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {
        // Rounding pushed `target` past the accumulated sum.
        for (Index i = n - 1; i >= 0; --i) {
          if (d2[static_cast<std::size_t>(i)] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // Every remaining point coincides with a centroid.
      for (Index i = 0; i < n; ++i) {
        if (!chosen[static_cast<std::size_t>(i)]) {
          pick = i;
          break;
        }
      }
    }
    chosen[static_cast<std::size_t>(pick)] = true;
    const auto ci = static_cast<Index>(c);
    centroids.row(ci) = points.row(pick);
    for (Index i = 0; i < n; ++i) {
      auto& v = d2[static_cast<std::size_t>(i)];
      v = std::min(v, sq_dist(points, i, centroids, ci));
    }
  }
  return centroids;
}

// Nearest centroid per point, lowest index on ties. Returns the inertia.
double assign(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
              std::vector<std::size_t>& assignments, std::vector<double>& dist) {
  double inertia = 0.0;
  for (Index i = 0; i < points.rows(); ++i) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < centroids.rows(); ++c) {
      const double d = sq_dist(points, i, centroids, c);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    assignments[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
    dist[static_cast<std::size_t>(i)] = best_d;
    inertia += best_d;
  }
  return inertia;
}

}  // namespace

double kmeans_inertia(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                      const std::vector<std::size_t>& assignments) {
  double total = 0.0;
  for (Index i = 0; i < points.rows(); ++i) {
    total += sq_dist(points, i, centroids,
                     static_cast<Index>(assignments[static_cast<std::size_t>(i)]));
  }
  return total;
}

KMeansModel kmeans_fit(const Eigen::MatrixXd& points, const KMeansOptions& options) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (options.k == 0 || options.k > n) {
    throw Error(ErrorCategory::kData, "KTooLarge",
                "k=" + std::to_string(options.k) + " must be in [1, " +
                    std::to_string(n) + "]");
  }
  if (!points.allFinite()) {
    throw Error(ErrorCategory::kNumeric, "NonFiniteValue", "points contain NaN or Inf");
  }
  Rng rng(options.seed);
  KMeansModel model;
  model.k = options.k;
  model.centroids = plus_plus_init(points, options.k, rng);
  model.assignments.assign(n, 0);
  std::vector<double> dist(n);

  const auto k = static_cast<Index>(options.k);
  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    model.inertia_history.push_back(assign(points, model.centroids, model.assignments, dist));
    ++model.iterations;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<std::size_t> counts(options.k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(static_cast<Index>(model.assignments[i])) += points.row(static_cast<Index>(i));
      ++counts[model.assignments[i]];
    }
    Eigen::MatrixXd next = model.centroids;
    for (Index c = 0; c < k; ++c) {
      const auto count = counts[static_cast<std::size_t>(c)];
      if (count > 0) next.row(c) = sums.row(c) / static_cast<double>(count);
    }
    std::vector<bool> used(n, false);
    for (Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (used[i]) continue;
        const double d = sq_dist(points, static_cast<Index>(i), next,
                                 static_cast<Index>(model.assignments[i]));
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      used[far] = true;
      next.row(c) = points.row(static_cast<Index>(far));
    }

    const double movement = (next - model.centroids).rowwise().norm().maxCoeff();
    model.centroids = std::move(next);
    if (movement < options.tol) break;
  }
  model.inertia = assign(points, model.centroids, model.assignments, dist);
  model.inertia_history.push_back(model.inertia);
  return model;
}

std::vector<FactRecord> cluster_sample(const std::vector<FactRecord>& facts,
                                       const KMeansModel& model, std::size_t cap,
                                       std::uint64_t seed) {
  if (facts.size() != model.assignments.size()) {
    throw Error(ErrorCategory::kData, "AlignmentError",
                "facts and cluster assignments differ in length");
  }
  if (cap == 0) throw Error(ErrorCategory::kConfig, "BadCap", "cap must be positive");
  std::vector<std::vector<std::size_t>> members(model.k);
  for (std::size_t i = 0; i < facts.size(); ++i) {
    members.at(model.assignments[i]).push_back(i);
  }
  Rng rng(seed);
  std::vector<FactRecord> out;
  for (auto& cluster : members) {
    const auto take = std::min(cap, cluster.size());
    for (std::size_t i = 0; i < take; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(cluster.size() - i));
      std::swap(cluster[i], cluster[j]);
    }
    std::sort(cluster.begin(), cluster.begin() + static_cast<std::ptrdiff_t>(take));
    for (std::size_t i = 0; i < take; ++i) out.push_back(facts[cluster[i]]);
  }
  return out;
}

}  // namespace pfacts
