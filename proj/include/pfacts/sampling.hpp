#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "pfacts/core.hpp"

namespace pfacts {

struct KMeansOptions {
  std::size_t k = 1000;
  std::uint64_t seed = 42;
  std::size_t max_iter = 100;
  double tol = 1e-4;  // max centroid movement (Euclidean)
};

struct KMeansModel {
  std::size_t k = 0;
  Eigen::MatrixXd centroids;  // k x d
  std::vector<std::size_t> assignments;
  double inertia = 0.0;
  std::size_t iterations = 0;
  // Inertia after every assignment step, ending with the final one.
  std::vector<double> inertia_history;
};

// Lloyd's algorithm under squared Euclidean distance with k-means++
// seeding. Empty clusters are re-seeded with the point farthest from its
// assigned centroid. Points are rows of `points`.
KMeansModel kmeans_fit(const Eigen::MatrixXd& points, const KMeansOptions& options);

// Sum of squared distances of each point to its assigned centroid.
double kmeans_inertia(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                      const std::vector<std::size_t>& assignments);

// Up to `cap` facts per cluster, drawn without replacement, ordered by
// (cluster, original index).
std::vector<FactRecord> cluster_sample(const std::vector<FactRecord>& facts,
                                       const KMeansModel& model, std::size_t cap,
                                       std::uint64_t seed);

}  // namespace pfacts
