#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ldoc/embedding_store.hpp"

namespace ldoc {

struct ClusterParams {
  int min_cluster_size = 15;
  int min_samples = 10;
};

struct ClusterAssignment {
  std::vector<int> labels;  // per point; -1 = noise, else dense 0..C-1
  int num_clusters = 0;
};

struct ClusterSummary {
  std::vector<int> counts;  // per cluster id
  double noise_fraction = 0.0;
  int num_clusters = 0;
};

struct MstEdge {
  int a = 0, b = 0;
  double weight = 0.0;  // mutual reachability
};

// Euclidean distance from point i to its min_samples-th nearest neighbor
// (self excluded).
double core_distance(const std::vector<double>& points, int n, int dim, int i,
                     int min_samples);
std::vector<double> core_distances(const std::vector<double>& points, int n,
                                   int dim, int min_samples);

// Fitted model: everything assign() needs without refitting.
class ClusterModel {
 public:
  ClusterParams params;
  int dim = 0;
  std::vector<double> points;      // fit-set coordinates, n x dim
  std::vector<int> labels;         // fit-time flat labels
  std::vector<double> core_dists;  // per fit point
  std::vector<double> cluster_radius;    // per cluster: max internal
                                         // mutual-reachability edge
  std::vector<std::vector<int>> exemplars;  // per cluster: longest-surviving
                                            // member point indices
  std::vector<MstEdge> mst;  // kept for oracle checks and radii

  int n() const { return static_cast<int>(labels.size()); }

  // Nearest-fit-point rule: returns that point's cluster when the mutual
  // reachability to it is within the cluster's internal radius, else -1.
  int assign(const std::vector<double>& point) const;

  void save(const std::string& path) const;
  static ClusterModel load(const std::string& path);
};

// Full HDBSCAN: mutual-reachability MST (dense Prim), condensed tree with
// min_cluster_size, excess-of-mass flat extraction. The hierarchy root is
// a selectable cluster, so fully merged data yields one cluster rather
// than all-noise.
std::pair<ClusterModel, ClusterAssignment> fit_hdbscan(
    const std::vector<double>& points, int n, int dim,
    const ClusterParams& params);

// Convenience overload over a store's chunk vectors; the store must hold
// train+validation splits only ("test leakage" error otherwise).
std::pair<ClusterModel, ClusterAssignment> fit_hdbscan(
    const EmbeddingStore& store, const ClusterParams& params);

ClusterSummary cluster_summary(const std::vector<int>& labels);

}  // namespace ldoc
