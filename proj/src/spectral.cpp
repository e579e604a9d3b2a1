#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "canopy/error.hpp"
#include "canopy/rng.hpp"
#include "canopy/segment.hpp"
#include "segment_internal.hpp"

namespace canopy::detail {

std::vector<std::uint32_t> graph_components(
    const std::vector<std::vector<std::uint32_t>>& adj, std::uint32_t* count) {
  const std::size_t n = adj.size();
  constexpr std::uint32_t kUnset = 0xffffffffu;
  std::vector<std::uint32_t> comp(n, kUnset);
  std::uint32_t next = 0;
  std::vector<std::uint32_t> stack;
  for (std::uint32_t s = 0; s < n; ++s) {
    if (comp[s] != kUnset) continue;
    const std::uint32_t id = next++;
    comp[s] = id;
    stack.assign(1, s);
    while (!stack.empty()) {
      const std::uint32_t q = stack.back();
      stack.pop_back();
      for (const std::uint32_t t : adj[q]) {
        if (comp[t] != kUnset) continue;
        comp[t] = id;
        stack.push_back(t);
      }
    }
  }
  if (count != nullptr) *count = next;
  return comp;
}

std::vector<double> laplacian_smallest(const std::vector<std::vector<std::uint32_t>>& adj,
                                       std::size_t m, std::uint64_t seed,
                                       std::vector<std::vector<double>>* vectors) {
  const std::size_t n = adj.size();
  if (m < 1 || m > n) throw ParamError("laplacian_smallest: m out of range");

  Eigen::VectorXd dinv(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t deg = adj[i].size();
    dinv[static_cast<Eigen::Index>(i)] =
        deg > 0 ? 1.0 / std::sqrt(static_cast<double>(deg)) : 0.0;
  }

  // work with B = 2I - L = I + D^(-1/2) A D^(-1/2); the m largest
  // eigenpairs of B are the m smallest of L and B's spectrum sits in [0, 2]
  const auto bmul = [&](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd y = x;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ei = static_cast<Eigen::Index>(i);
      for (const std::uint32_t j : adj[i])
        y.row(ei) += dinv[ei] * dinv[static_cast<Eigen::Index>(j)] *
                     x.row(static_cast<Eigen::Index>(j));
    }
    return y;
  };

  const auto en = static_cast<Eigen::Index>(n);
  const auto block = static_cast<Eigen::Index>(std::min(n, m + 8));
  Eigen::MatrixXd x(en, block);
  Rng rng = make_rng(seed, 0);
  for (Eigen::Index c = 0; c < block; ++c)
    for (Eigen::Index r = 0; r < en; ++r) x(r, c) = gaussian(rng);

  const auto orthonormalize = [&](Eigen::MatrixXd& q) {
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(q);
    q = qr.householderQ() * Eigen::MatrixXd::Identity(en, block);
  };
  orthonormalize(x);

  constexpr int kMaxIters = 500;
  constexpr double kRitzTol = 1e-11;
  Eigen::VectorXd ritz = Eigen::VectorXd::Constant(block, -1.0);
  Eigen::VectorXd eigs;
  for (int iter = 0; iter < kMaxIters; ++iter) {
    const Eigen::MatrixXd bx = bmul(x);
    // Rayleigh-Ritz in the current subspace, columns ordered by
    // descending B-eigenvalue (ascending Laplacian eigenvalue)
    const Eigen::MatrixXd t = x.transpose() * bx;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        0.5 * (t + t.transpose()));
    if (es.info() != Eigen::Success)
      throw SegmentationError("laplacian_smallest: dense eigensolver failed");
    Eigen::VectorXd theta(block);
    Eigen::MatrixXd rot(block, block);
    for (Eigen::Index c = 0; c < block; ++c) {
      theta[c] = es.eigenvalues()[block - 1 - c];
      rot.col(c) = es.eigenvectors().col(block - 1 - c);
    }
    x = bx * rot;  // one power step in the Ritz basis
    orthonormalize(x);
    if (!x.allFinite())
      throw SegmentationError("laplacian_smallest: iteration produced non-finite values");

    eigs = (2.0 - theta.array()).matrix();
    double delta = 0.0;
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(m); ++c)
      delta = std::max(delta, std::abs(theta[c] - ritz[c]));
    ritz = theta;
    if (delta < kRitzTol) break;
  }

  // final Ritz extraction so the returned columns are eigenvector estimates
  const Eigen::MatrixXd bx = bmul(x);
  const Eigen::MatrixXd t = x.transpose() * bx;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (t + t.transpose()));
  if (es.info() != Eigen::Success)
    throw SegmentationError("laplacian_smallest: dense eigensolver failed");
  Eigen::MatrixXd v(en, static_cast<Eigen::Index>(m));
  std::vector<double> out(m);
  for (std::size_t c = 0; c < m; ++c) {
    const Eigen::Index src = block - 1 - static_cast<Eigen::Index>(c);
    v.col(static_cast<Eigen::Index>(c)) = x * es.eigenvectors().col(src);
    out[c] = 2.0 - es.eigenvalues()[src];
  }
  if (!v.allFinite())
    throw SegmentationError("laplacian_smallest: eigenvectors are non-finite");

  if (vectors != nullptr) {
    vectors->assign(n, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < m; ++c)
        (*vectors)[i][c] = v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
  }
  return out;
}

namespace {

double row_dist2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

namespace {

std::vector<std::uint32_t> kmeans_once(const std::vector<std::vector<double>>& rows,
                                       std::size_t k, int max_iters, double tol,
                                       std::uint64_t seed, double* wcss) {
  const std::size_t n = rows.size();
  const std::size_t dim = rows[0].size();
  Rng rng = make_rng(seed, 0);

  // k-means++ seeding
  std::vector<std::vector<double>> centers;
  centers.reserve(k);
  centers.push_back(rows[uniform_below(rng, n)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = row_dist2(rows[i], centers[0]);
  while (centers.size() < k) {
    double total = 0.0;
    for (const double d : d2) total += d;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double r = uniform01(rng) * total;
      double cum = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        cum += d2[i];
        if (cum > r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(uniform_below(rng, n));
    }
    centers.push_back(rows[pick]);
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], row_dist2(rows[i], centers.back()));
  }

  std::vector<std::uint32_t> assign(n, 0);
  const auto assign_all = [&]() {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = row_dist2(rows[i], centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = row_dist2(rows[i], centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      assign[i] = static_cast<std::uint32_t>(best);
    }
  };

  for (int iter = 0; iter < max_iters; ++iter) {
    assign_all();
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < dim; ++c) sums[assign[i]][c] += rows[i][c];
      ++counts[assign[i]];
    }
    // reseed emptied centers at the points farthest from their centers
    std::vector<char> taken(n, 0);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      double far_d = -1.0;
      std::size_t far_i = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i] || counts[assign[i]] <= 1) continue;
        const double d = row_dist2(rows[i], centers[assign[i]]);
        if (d > far_d) {
          far_d = d;
          far_i = i;
        }
      }
      sums[c] = rows[far_i];
      counts[c] = 1;
      taken[far_i] = 1;
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double moved = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double nc = sums[c][d] / static_cast<double>(counts[c]);
        const double delta = nc - centers[c][d];
        moved += delta * delta;
        centers[c][d] = nc;
      }
      shift = std::max(shift, std::sqrt(moved));
    }
    if (shift <= tol) break;
  }
  assign_all();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += row_dist2(rows[i], centers[assign[i]]);
  *wcss = total;
  return assign;
}

}  // namespace

std::vector<std::uint32_t> kmeans_rows(const std::vector<std::vector<double>>& rows,
                                       std::size_t k, int max_iters, double tol,
                                       std::uint64_t seed) {
  if (k < 1 || k > rows.size()) throw ParamError("kmeans_rows: k out of range");
  // k-means++ on a chained-blob embedding lands in poor optima often enough
  // to matter; eight seeded restarts keep the lowest within-cluster sum of
  // squares, earlier restart on ties
  Rng restart_rng = make_rng(seed, 0);
  std::vector<std::uint32_t> best;
  double best_wcss = 0.0;
  for (int r = 0; r < 8; ++r) {
    double wcss = 0.0;
    std::vector<std::uint32_t> assign = kmeans_once(rows, k, max_iters, tol, restart_rng(), &wcss);
    if (r == 0 || wcss < best_wcss) {
      best_wcss = wcss;
      best = std::move(assign);
    }
  }
  return best;
}

}  // namespace canopy::detail

namespace canopy {

namespace {

void validate(const SpectralParams& params) {
  if (params.max_cluster_size < 1)
    throw ParamError("spectral: max_cluster_size must be >= 1");
  if (params.knn_k < 1) throw ParamError("spectral: knn_k must be >= 1");
  if (params.embed_sample_cap < params.knn_k + 1)
    throw ParamError("spectral: embed_sample_cap must be at least knn_k + 1");
  if (params.kmeans_max_iters < 1)
    throw ParamError("spectral: kmeans_max_iters must be >= 1");
  if (!(params.kmeans_tol >= 0.0)) throw ParamError("spectral: kmeans_tol must be >= 0");
}

}  // namespace

std::vector<TreeCluster> spectral_split(const PointCloud& cloud, const TreeCluster& cluster,
                                        const SpectralParams& params,
                                        std::int32_t source_cluster_id) {
  validate(params);
  const std::size_t size = cluster.point_indices.size();
  if (size <= params.max_cluster_size)
    throw ParamError("spectral_split: cluster does not exceed max_cluster_size");
  for (const std::uint32_t i : cluster.point_indices)
    if (i >= cloud.size()) throw ParamError("spectral_split: cluster index out of range");

  const std::string cluster_name = std::to_string(source_cluster_id);
  Rng rng = make_rng(params.seed, static_cast<std::uint32_t>(source_cluster_id));

  // working set: the whole cluster, or a seeded uniform sample of it
  std::vector<std::uint32_t> members = cluster.point_indices;
  const std::size_t nw = std::min(size, params.embed_sample_cap);
  if (nw < size) {
    for (std::size_t i = 0; i < nw; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, size - i));
      std::swap(members[i], members[j]);
    }
    members.resize(nw);
    std::sort(members.begin(), members.end());
  }
  const std::uint64_t eig_seed = rng();
  const std::uint64_t kmeans_seed = rng();

  PointCloud work;
  work.points.reserve(nw);
  for (const std::uint32_t i : members) work.points.push_back(cloud[i]);

  std::size_t m = std::min(subcluster_count(size, params.max_cluster_size), nw);
  const std::size_t k_eff = std::min(params.knn_k, nw - 1);
  const std::vector<std::vector<std::uint32_t>> adj = knn_graph(work, k_eff);

  std::uint32_t comp_count = 0;
  const std::vector<std::uint32_t> comp = detail::graph_components(adj, &comp_count);

  std::vector<std::uint32_t> work_assign;
  std::size_t parts;
  std::string note;
  if (comp_count > m) {
    // more components than requested parts: keep the components themselves
    work_assign = comp;
    parts = comp_count;
    note = "knn graph has " + std::to_string(comp_count) + " components, requested " +
           std::to_string(m) + "; returned components directly";
  } else {
    std::vector<std::vector<double>> embed;
    try {
      detail::laplacian_smallest(adj, m, eig_seed, &embed);
    } catch (const SegmentationError& e) {
      throw SegmentationError("spectral split of cluster " + cluster_name + ": " + e.what());
    }
    for (std::vector<double>& row : embed) {
      double len = 0.0;
      for (const double v : row) len += v * v;
      if (len > 0.0) {
        len = std::sqrt(len);
        for (double& v : row) v /= len;
      }
    }
    work_assign = detail::kmeans_rows(embed, m, params.kmeans_max_iters, params.kmeans_tol,
                                      kmeans_seed);
    parts = m;
  }

  // 3D centroids over sampled members; parts that attracted no sample are
  // dropped before the full assignment
  std::vector<Point3> part_centroid(parts, Point3{0.0, 0.0, 0.0});
  std::vector<std::size_t> part_count(parts, 0);
  for (std::size_t w = 0; w < nw; ++w) {
    part_centroid[work_assign[w]] = part_centroid[work_assign[w]] + work.points[w];
    ++part_count[work_assign[w]];
  }
  std::vector<std::uint32_t> remap(parts, 0);
  std::vector<Point3> kept_centroid;
  for (std::size_t p = 0; p < parts; ++p) {
    if (part_count[p] == 0) continue;
    remap[p] = static_cast<std::uint32_t>(kept_centroid.size());
    kept_centroid.push_back(part_centroid[p] * (1.0 / static_cast<double>(part_count[p])));
  }
  const std::size_t kept = kept_centroid.size();

  std::vector<TreeCluster> out(kept);
  std::size_t w = 0;
  for (const std::uint32_t idx : cluster.point_indices) {
    std::uint32_t part;
    if (w < nw && members[w] == idx) {
      part = remap[work_assign[w]];
      ++w;
    } else {
      // unsampled member: nearest sampled-part centroid, lowest index wins ties
      std::size_t best = 0;
      double best_d = squared_distance(cloud[idx], kept_centroid[0]);
      for (std::size_t p = 1; p < kept; ++p) {
        const double d = squared_distance(cloud[idx], kept_centroid[p]);
        if (d < best_d) {
          best_d = d;
          best = p;
        }
      }
      part = static_cast<std::uint32_t>(best);
    }
    out[part].point_indices.push_back(idx);
  }

  std::vector<TreeCluster> result;
  result.reserve(kept);
  for (TreeCluster& c : out) {
    if (c.point_indices.empty()) continue;
    Point3 sum{0.0, 0.0, 0.0};
    for (const std::uint32_t i : c.point_indices) sum = sum + cloud[i];
    c.centroid = sum * (1.0 / static_cast<double>(c.point_indices.size()));
    c.provenance = Provenance::spectral_split;
    c.source_cluster_id = source_cluster_id;
    c.note = note;
    result.push_back(std::move(c));
  }
  std::sort(result.begin(), result.end(), [](const TreeCluster& a, const TreeCluster& b) {
    return a.point_indices.front() < b.point_indices.front();
  });
  return result;
}

}  // namespace canopy
