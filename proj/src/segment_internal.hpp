#pragma once

#include <cstdint>
#include <vector>

namespace canopy::detail {

/// Connected components of an undirected adjacency list; returns one
/// component id per vertex, ids numbered 0.. in order of first appearance.
std::vector<std::uint32_t> graph_components(
    const std::vector<std::vector<std::uint32_t>>& adj, std::uint32_t* count = nullptr);

/// The m smallest eigenpairs of the symmetric normalized Laplacian
/// L = I - D^(-1/2) A D^(-1/2) of an unweighted adjacency list (degree-0
/// rows act as identity rows). Seeded block subspace iteration on 2I - L;
/// eigenvalues come back ascending, vectors[v][j] is component v of
/// eigenvector j. m must satisfy 1 <= m <= n.
std::vector<double> laplacian_smallest(const std::vector<std::vector<std::uint32_t>>& adj,
                                       std::size_t m, std::uint64_t seed,
                                       std::vector<std::vector<double>>* vectors);

/// Seeded k-means++ followed by Lloyd iterations over row vectors. Returns
/// one label per row in [0, k); ties in assignment resolve to the lowest
/// center index; an emptied center is reseeded at the point farthest from
/// its current center. Deterministic for a fixed seed.
std::vector<std::uint32_t> kmeans_rows(const std::vector<std::vector<double>>& rows,
                                       std::size_t k, int max_iters, double tol,
                                       std::uint64_t seed);

}  // namespace canopy::detail
