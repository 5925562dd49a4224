#include "ldoc/clusterer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "ldoc/io.hpp"
#include "ldoc/kernels.hpp"

namespace ldoc {

namespace {

// Cap for lambda = 1/distance so zero-distance merges stay finite.
constexpr double kLambdaMax = 1e12;

double to_lambda(double dist) {
  if (dist <= 1.0 / kLambdaMax) return kLambdaMax;
  return 1.0 / dist;
}

struct LinkageNode {
  int left = -1, right = -1;  // node ids; < n are points
  double dist = 0.0;
  int size = 1;
};

struct CondensedCluster {
  int parent = -1;
  double lambda_birth = 0.0;
  std::vector<int> child_clusters;
  std::vector<std::pair<int, double>> points;  // (point id, fall-out lambda)
  int size = 0;
  double stability = 0.0;
};

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n) {
    for (int i = 0; i < n; ++i) parent_[i] = i;
  }
  int find(int x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void link(int root_a, int root_b, int new_id) {
    parent_.push_back(new_id);
    parent_[root_a] = new_id;
    parent_[root_b] = new_id;
  }

 private:
  std::vector<int> parent_;
};

std::vector<int> leaves_under(const std::vector<LinkageNode>& tree, int node,
                              int n) {
  std::vector<int> leaves, stack{node};
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (v < n) {
      leaves.push_back(v);
    } else {
      stack.push_back(tree[static_cast<std::size_t>(v)].left);
      stack.push_back(tree[static_cast<std::size_t>(v)].right);
    }
  }
  return leaves;
}

}  // namespace

double core_distance(const std::vector<double>& points, int n, int dim, int i,
                     int min_samples) {
  if (min_samples < 1) throw std::invalid_argument("min_samples must be >= 1");
  if (n <= min_samples)
    throw std::invalid_argument("core_distance: need more than min_samples points");
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) - 1);
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    double s = 0.0;
    for (int d = 0; d < dim; ++d) {
      const double diff = points[static_cast<std::size_t>(i) * dim + d] -
                          points[static_cast<std::size_t>(j) * dim + d];
      s += diff * diff;
    }
    dists.push_back(std::sqrt(s));
  }
  std::nth_element(dists.begin(), dists.begin() + (min_samples - 1),
                   dists.end());
  return dists[static_cast<std::size_t>(min_samples - 1)];
}

std::vector<double> core_distances(const std::vector<double>& points, int n,
                                   int dim, int min_samples) {
  if (min_samples < 1) throw std::invalid_argument("min_samples must be >= 1");
  if (n <= min_samples)
    throw std::invalid_argument("core_distances: need more than min_samples points");
  std::vector<double> core(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 16)
  for (long long i = 0; i < n; ++i)
    core[static_cast<std::size_t>(i)] =
        core_distance(points, n, dim, static_cast<int>(i), min_samples);
  return core;
}

std::pair<ClusterModel, ClusterAssignment> fit_hdbscan(
    const std::vector<double>& points, int n, int dim,
    const ClusterParams& params) {
  if (params.min_cluster_size < 1 || params.min_samples < 1)
    throw std::invalid_argument("cluster parameters must be >= 1");
  if (n < params.min_cluster_size)
    throw std::invalid_argument("fit_hdbscan: fewer points than min_cluster_size");
  if (n <= params.min_samples)
    throw std::invalid_argument("fit_hdbscan: need more than min_samples points");
  for (double v : points)
    if (!std::isfinite(v))
      throw std::invalid_argument("fit_hdbscan: non-finite coordinate");

  const auto sq = kernels::pairwise_sq_dists(points, static_cast<std::size_t>(n),
                                             static_cast<std::size_t>(dim));
  const auto core = core_distances(points, n, dim, params.min_samples);
  auto mreach = [&](int i, int j) {
    return std::max({core[static_cast<std::size_t>(i)],
                     core[static_cast<std::size_t>(j)],
                     std::sqrt(sq[static_cast<std::size_t>(i) * n + j])});
  };

  // Dense Prim MST over mutual reachability. Equal-weight ties break on the
  // lexicographically smallest (min index, max index) edge.
  std::vector<MstEdge> mst;
  mst.reserve(static_cast<std::size_t>(n) - 1);
  {
    std::vector<char> in_tree(static_cast<std::size_t>(n), 0);
    std::vector<double> best(static_cast<std::size_t>(n),
                             std::numeric_limits<double>::infinity());
    std::vector<int> from(static_cast<std::size_t>(n), 0);
    in_tree[0] = 1;
    for (int v = 1; v < n; ++v) best[static_cast<std::size_t>(v)] = mreach(0, v);
    for (int step = 1; step < n; ++step) {
      int pick = -1;
      for (int v = 0; v < n; ++v) {
        if (in_tree[static_cast<std::size_t>(v)]) continue;
        if (pick < 0 || best[static_cast<std::size_t>(v)] <
                            best[static_cast<std::size_t>(pick)]) {
          pick = v;
        } else if (best[static_cast<std::size_t>(v)] ==
                   best[static_cast<std::size_t>(pick)]) {
          const auto ev = std::minmax(from[static_cast<std::size_t>(v)], v);
          const auto ep =
              std::minmax(from[static_cast<std::size_t>(pick)], pick);
          if (ev < ep) pick = v;
        }
      }
      in_tree[static_cast<std::size_t>(pick)] = 1;
      mst.push_back({from[static_cast<std::size_t>(pick)], pick,
                     best[static_cast<std::size_t>(pick)]});
      for (int v = 0; v < n; ++v) {
        if (in_tree[static_cast<std::size_t>(v)]) continue;
        const double w = mreach(pick, v);
        if (w < best[static_cast<std::size_t>(v)]) {
          best[static_cast<std::size_t>(v)] = w;
          from[static_cast<std::size_t>(v)] = pick;
        }
      }
    }
  }

  // Single-linkage dendrogram from the sorted MST.
  std::stable_sort(mst.begin(), mst.end(), [](const MstEdge& a, const MstEdge& b) {
    if (a.weight != b.weight) return a.weight < b.weight;
    return std::minmax(a.a, a.b) < std::minmax(b.a, b.b);
  });
  std::vector<LinkageNode> tree(static_cast<std::size_t>(n));  // leaves
  {
    UnionFind uf(n);
    for (const auto& e : mst) {
      const int ra = uf.find(e.a), rb = uf.find(e.b);
      LinkageNode node;
      node.left = ra;
      node.right = rb;
      node.dist = e.weight;
      node.size = (ra < n ? 1 : tree[static_cast<std::size_t>(ra)].size) +
                  (rb < n ? 1 : tree[static_cast<std::size_t>(rb)].size);
      const int id = static_cast<int>(tree.size());
      tree.push_back(node);
      uf.link(ra, rb, id);
    }
  }
  const int root = 2 * n - 2;

  // Condense: only splits where both sides reach min_cluster_size spawn new
  // clusters; smaller sides fall out as points at the split's lambda.
  std::vector<CondensedCluster> clusters;
  const int mcs = params.min_cluster_size;
  {
    clusters.push_back({});  // root cluster, lambda_birth 0
    std::vector<std::pair<int, int>> stack;  // (linkage node, condensed id)
    if (n == 1) {
      clusters[0].points.emplace_back(0, kLambdaMax);
    } else {
      stack.emplace_back(root, 0);
    }
    while (!stack.empty()) {
      const auto [node, cid] = stack.back();
      stack.pop_back();
      if (node < n) {  // a bare point reached directly
        clusters[static_cast<std::size_t>(cid)].points.emplace_back(node,
                                                                    kLambdaMax);
        continue;
      }
      const auto& ln = tree[static_cast<std::size_t>(node)];
      const double lambda = to_lambda(ln.dist);
      const int ls = ln.left < n ? 1 : tree[static_cast<std::size_t>(ln.left)].size;
      const int rs =
          ln.right < n ? 1 : tree[static_cast<std::size_t>(ln.right)].size;
      if (ls >= mcs && rs >= mcs) {
        for (int child : {ln.left, ln.right}) {
          CondensedCluster cc;
          cc.parent = cid;
          cc.lambda_birth = lambda;
          const int ccid = static_cast<int>(clusters.size());
          clusters.push_back(cc);
          clusters[static_cast<std::size_t>(cid)].child_clusters.push_back(ccid);
          stack.emplace_back(child, ccid);
        }
      } else if (ls < mcs && rs < mcs) {
        for (int child : {ln.left, ln.right})
          for (int leaf : leaves_under(tree, child, n))
            clusters[static_cast<std::size_t>(cid)].points.emplace_back(leaf,
                                                                        lambda);
      } else {
        const int big = ls >= mcs ? ln.left : ln.right;
        const int small = ls >= mcs ? ln.right : ln.left;
        for (int leaf : leaves_under(tree, small, n))
          clusters[static_cast<std::size_t>(cid)].points.emplace_back(leaf,
                                                                      lambda);
        stack.emplace_back(big, cid);
      }
    }
  }

  // Sizes and stabilities (children have larger ids than their parents).
  for (int c = static_cast<int>(clusters.size()) - 1; c >= 0; --c) {
    auto& cc = clusters[static_cast<std::size_t>(c)];
    cc.size = static_cast<int>(cc.points.size());
    cc.stability = 0.0;
    for (const auto& [p, lambda] : cc.points)
      cc.stability += lambda - cc.lambda_birth;
    for (int child : cc.child_clusters) {
      const auto& ch = clusters[static_cast<std::size_t>(child)];
      cc.size += ch.size;
      cc.stability += (ch.lambda_birth - cc.lambda_birth) * ch.size;
    }
  }

  // Excess-of-mass selection, bottom-up; the root is a candidate.
  std::vector<char> selected(clusters.size(), 0);
  std::vector<double> best_value(clusters.size(), 0.0);
  for (int c = static_cast<int>(clusters.size()) - 1; c >= 0; --c) {
    auto& cc = clusters[static_cast<std::size_t>(c)];
    if (cc.child_clusters.empty()) {
      selected[static_cast<std::size_t>(c)] = 1;
      best_value[static_cast<std::size_t>(c)] = cc.stability;
      continue;
    }
    double child_sum = 0.0;
    for (int child : cc.child_clusters)
      child_sum += best_value[static_cast<std::size_t>(child)];
    if (cc.stability >= child_sum) {
      selected[static_cast<std::size_t>(c)] = 1;
      best_value[static_cast<std::size_t>(c)] = cc.stability;
    } else {
      best_value[static_cast<std::size_t>(c)] = child_sum;
    }
  }

  // Keep only the topmost selected clusters; label their full subtrees.
  ClusterAssignment assignment;
  assignment.labels.assign(static_cast<std::size_t>(n), -1);
  ClusterModel model;
  {
    std::vector<std::pair<int, int>> stack{{0, -1}};  // (cluster, flat label)
    while (!stack.empty()) {
      const auto [c, inherited] = stack.back();
      stack.pop_back();
      int label = inherited;
      if (inherited < 0 && selected[static_cast<std::size_t>(c)]) {
        label = assignment.num_clusters++;
        // Exemplars: the longest-surviving members of the cluster subtree.
        std::vector<std::pair<double, int>> survivors;
        std::vector<int> sub{c};
        while (!sub.empty()) {
          const int s = sub.back();
          sub.pop_back();
          for (const auto& [p, lambda] : clusters[static_cast<std::size_t>(s)].points)
            survivors.emplace_back(lambda, p);
          for (int child : clusters[static_cast<std::size_t>(s)].child_clusters)
            sub.push_back(child);
        }
        std::sort(survivors.rbegin(), survivors.rend());
        std::vector<int> ex;
        for (std::size_t t = 0; t < survivors.size() && t < 8; ++t)
          ex.push_back(survivors[t].second);
        model.exemplars.push_back(std::move(ex));
      }
      if (label >= 0)
        for (const auto& [p, lambda] : clusters[static_cast<std::size_t>(c)].points)
          assignment.labels[static_cast<std::size_t>(p)] = label;
      // Descend in reverse so lower cluster ids are discovered first.
      const auto& kids = clusters[static_cast<std::size_t>(c)].child_clusters;
      for (auto it = kids.rbegin(); it != kids.rend(); ++it)
        stack.emplace_back(*it, label);
    }
  }

  model.params = params;
  model.dim = dim;
  model.points = points;
  model.labels = assignment.labels;
  model.core_dists = core;
  model.mst = mst;
  model.cluster_radius.assign(static_cast<std::size_t>(assignment.num_clusters),
                              0.0);
  for (const auto& e : mst) {
    const int la = assignment.labels[static_cast<std::size_t>(e.a)];
    const int lb = assignment.labels[static_cast<std::size_t>(e.b)];
    if (la >= 0 && la == lb)
      model.cluster_radius[static_cast<std::size_t>(la)] =
          std::max(model.cluster_radius[static_cast<std::size_t>(la)], e.weight);
  }
  return {std::move(model), std::move(assignment)};
}

int ClusterModel::assign(const std::vector<double>& point) const {
  if (static_cast<int>(point.size()) != dim)
    throw std::invalid_argument("assign: point dimension " +
                                std::to_string(point.size()) + " != " +
                                std::to_string(dim));
  const int count = n();
  std::vector<double> dists(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) {
    double s = 0.0;
    for (int d = 0; d < dim; ++d) {
      const double diff =
          point[static_cast<std::size_t>(d)] -
          points[static_cast<std::size_t>(j) * dim + d];
      s += diff * diff;
    }
    dists[static_cast<std::size_t>(j)] = std::sqrt(s);
  }
  const int nearest = static_cast<int>(
      std::min_element(dists.begin(), dists.end()) - dists.begin());
  const int label = labels[static_cast<std::size_t>(nearest)];
  if (label < 0) return -1;
  // Core distance of the query w.r.t. the fit set.
  std::vector<double> sorted = dists;
  const int ms = std::min(params.min_samples, count);
  std::nth_element(sorted.begin(), sorted.begin() + (ms - 1), sorted.end());
  const double core_new = sorted[static_cast<std::size_t>(ms - 1)];
  const double mr = std::max(
      {core_new, core_dists[static_cast<std::size_t>(nearest)],
       dists[static_cast<std::size_t>(nearest)]});
  return mr <= cluster_radius[static_cast<std::size_t>(label)] ? label : -1;
}

ClusterSummary cluster_summary(const std::vector<int>& labels) {
  ClusterSummary s;
  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  s.num_clusters = max_label + 1;
  s.counts.assign(static_cast<std::size_t>(s.num_clusters), 0);
  std::size_t noise = 0;
  for (int l : labels) {
    if (l < 0) ++noise;
    else ++s.counts[static_cast<std::size_t>(l)];
  }
  s.noise_fraction =
      labels.empty() ? 0.0
                     : static_cast<double>(noise) /
                           static_cast<double>(labels.size());
  return s;
}

namespace {
constexpr char kModelMagic[] = "LDOCCLU1";
}

void ClusterModel::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write cluster model: " + path);
  os.write(kModelMagic, 8);
  io::write_u32(os, 1);
  io::write_i32(os, params.min_cluster_size);
  io::write_i32(os, params.min_samples);
  io::write_i32(os, dim);
  io::write_i32(os, n());
  io::write_f64s(os, points);
  for (int l : labels) io::write_i32(os, l);
  io::write_f64s(os, core_dists);
  io::write_f64s(os, cluster_radius);
  io::write_u64(os, exemplars.size());
  for (const auto& ex : exemplars) {
    io::write_u64(os, ex.size());
    for (int p : ex) io::write_i32(os, p);
  }
  io::write_u64(os, mst.size());
  for (const auto& e : mst) {
    io::write_i32(os, e.a);
    io::write_i32(os, e.b);
    io::write_f64(os, e.weight);
  }
  if (!os) throw std::runtime_error("cluster model write failed: " + path);
}

ClusterModel ClusterModel::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open cluster model: " + path);
  io::check_magic(is, kModelMagic, "cluster model");
  if (io::read_u32(is) != 1)
    throw std::runtime_error("unsupported cluster model version");
  ClusterModel m;
  m.params.min_cluster_size = io::read_i32(is);
  m.params.min_samples = io::read_i32(is);
  m.dim = io::read_i32(is);
  const int count = io::read_i32(is);
  m.points = io::read_f64s(is);
  m.labels.resize(static_cast<std::size_t>(count));
  for (int& l : m.labels) l = io::read_i32(is);
  m.core_dists = io::read_f64s(is);
  m.cluster_radius = io::read_f64s(is);
  const auto nex = io::read_u64(is);
  m.exemplars.resize(nex);
  for (auto& ex : m.exemplars) {
    ex.resize(io::read_u64(is));
    for (int& p : ex) p = io::read_i32(is);
  }
  const auto nmst = io::read_u64(is);
  m.mst.resize(nmst);
  for (auto& e : m.mst) {
    e.a = io::read_i32(is);
    e.b = io::read_i32(is);
    e.weight = io::read_f64(is);
  }
  return m;
}

std::pair<ClusterModel, ClusterAssignment> fit_hdbscan(
    const EmbeddingStore& store, const ClusterParams& params) {
  for (const auto& doc : store.docs)
    if (doc.split == Split::kTest)
      throw std::invalid_argument(
          "test leakage: clusterer must be fit on train+validation only");
  const auto points =
      store.points_for({Split::kTrain, Split::kValidation});
  const int n = static_cast<int>(store.total_chunks());
  return fit_hdbscan(points, n, store.dim, params);
}

}  // namespace ldoc
