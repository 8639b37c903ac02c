#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wprocer/common.hpp"
#include "wprocer/encoder.hpp"

namespace wprocer {

/// Cluster centers over the O-labeled token embeddings of one sentence.
/// assignment[i] is the center index of input row i; k_effective <= k_requested.
struct PrototypeSet {
  Eigen::MatrixXd centers;
  std::vector<int> assignment;
  int k_requested = 0;
  int k_effective = 0;
  std::vector<double> inertia_trace;  // one value per Lloyd iteration

  bool empty() const { return centers.rows() == 0; }
};

namespace detail {

inline int nearest_center(const Eigen::MatrixXd& centers, const Eigen::RowVectorXd& point) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    const double d = (centers.row(c) - point).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

// distance-weighted seeding (k-means++ style)
inline Eigen::MatrixXd seed_centers(const Eigen::MatrixXd& points, int k, Rng& rng) {
  const Eigen::Index m = points.rows();
  Eigen::MatrixXd centers(k, points.cols());
  centers.row(0) = points.row(static_cast<Eigen::Index>(rng.below(m)));
  Eigen::VectorXd d2 = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick;
    if (total <= 0.0) {
      pick = static_cast<Eigen::Index>(rng.below(m));
    } else {
      const double target = rng.uniform() * total;
      double cum = 0.0;
      pick = m - 1;
      for (Eigen::Index i = 0; i < m; ++i) {
        cum += d2[i];
        if (cum >= target) {
          pick = i;
          break;
        }
      }
    }
    centers.row(c) = points.row(pick);
    d2 = d2.cwiseMin((points.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

}  // namespace detail

/// Lloyd iterations from the given initial centers. Ties in assignment go to
/// the lowest center index. An empty cluster steals the point farthest from
/// its assigned center; if that distance is zero the center is dropped and
/// k_effective shrinks.
inline PrototypeSet kmeans_lloyd(const Eigen::MatrixXd& points, Eigen::MatrixXd centers, int k_requested,
                                 int max_iter = 50, double tol = 1e-6) {
  const Eigen::Index m = points.rows();
  PrototypeSet out;
  out.k_requested = k_requested;
  std::vector<int> assign(m, 0);

  for (int iter = 0; iter < max_iter; ++iter) {
    for (Eigen::Index i = 0; i < m; ++i)
      assign[i] = detail::nearest_center(centers, points.row(i));

    // fix empty clusters
    for (Eigen::Index c = 0; c < centers.rows();) {
      bool used = false;
      for (Eigen::Index i = 0; i < m && !used; ++i) used = (assign[i] == c);
      if (used) {
        ++c;
        continue;
      }
      Eigen::Index far_i = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        const double d = (points.row(i) - centers.row(assign[i])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far_i = i;
        }
      }
      if (far_d <= 0.0) {
        // all points coincide with their centers; drop this center
        const Eigen::Index last = centers.rows() - 1;
        if (c != last) {
          centers.row(c) = centers.row(last);
          for (auto& a : assign)
            if (a == last) a = static_cast<int>(c);
        }
        centers.conservativeResize(last, Eigen::NoChange);
      } else {
        centers.row(c) = points.row(far_i);
        assign[far_i] = static_cast<int>(c);
        ++c;
      }
    }

    double inertia = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) inertia += (points.row(i) - centers.row(assign[i])).squaredNorm();
    out.inertia_trace.push_back(inertia);

    double movement = 0.0;
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(points.cols());
      int count = 0;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (assign[i] != c) continue;
        mean += points.row(i);
        ++count;
      }
      mean /= static_cast<double>(count);
      movement = std::max(movement, (mean - centers.row(c)).norm());
      centers.row(c) = mean;
    }
    if (movement < tol) break;
  }

  out.centers = std::move(centers);
  out.assignment = std::move(assign);
  out.k_effective = static_cast<int>(out.centers.rows());
  return out;
}

/// K-means over the rows of `points` with distance-weighted seeding.
/// Deterministic given seed; an empty input yields an empty PrototypeSet.
inline PrototypeSet kmeans(const Eigen::MatrixXd& points, int k, uint64_t seed, int max_iter = 50,
                           double tol = 1e-6) {
  if (k < 1) throw ValidationError("kmeans: k must be >= 1");
  PrototypeSet out;
  out.k_requested = k;
  if (points.rows() == 0) return out;
  const int k_init = std::min<int>(k, static_cast<int>(points.rows()));
  Rng rng(derive_seed(seed, 0x6b));
  Eigen::MatrixXd centers = detail::seed_centers(points, k_init, rng);
  return kmeans_lloyd(points, std::move(centers), k, max_iter, tol);
}

/// Per-anchor positive/negative split of the prototype centers: a center is
/// positive iff its Euclidean distance to the anchor is strictly below alpha.
struct ProtoPartition {
  std::vector<std::vector<int>> positives;  // indexed by type
  std::vector<std::vector<int>> negatives;
};

inline ProtoPartition partition_prototypes(const PrototypeSet& protos, const TypeAnchors& anchors,
                                           double alpha) {
  if (alpha <= 0.0) throw ValidationError("partition_prototypes: alpha must be > 0");
  const Eigen::Index n = anchors.T.rows();
  ProtoPartition part;
  part.positives.resize(n);
  part.negatives.resize(n);
  if (protos.empty()) return part;
  if (protos.centers.cols() != anchors.T.cols())
    throw DimensionError("partition_prototypes: center dim " + std::to_string(protos.centers.cols()) +
                         " != anchor dim " + std::to_string(anchors.T.cols()));
  for (Eigen::Index t = 0; t < n; ++t) {
    for (Eigen::Index c = 0; c < protos.centers.rows(); ++c) {
      const double dist = (protos.centers.row(c) - anchors.T.row(t)).norm();
      if (dist < alpha)
        part.positives[t].push_back(static_cast<int>(c));
      else
        part.negatives[t].push_back(static_cast<int>(c));  // ties are negative
    }
  }
  return part;
}

}  // namespace wprocer
