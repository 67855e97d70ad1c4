#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dppsp {

/// Undirected simple graph over nodes 0..node_count-1.
/// Edges are stored as (i, j) with i < j, sorted lexicographically.
/// Every Graph produced by this library is connected.
struct Graph {
    int node_count = 0;
    std::vector<std::pair<int, int>> edges;
    std::uint64_t seed = 0;  // seed used to generate it, 0 for loaded graphs

    int edge_count() const { return static_cast<int>(edges.size()); }
    bool has_edge(int i, int j) const;
    std::vector<int> degrees() const;
};

bool is_connected(const Graph& g);

/// Erdos-Renyi G(n, p): each unordered pair drawn independently with
/// probability p from a generator seeded with `seed`. If the draw is
/// disconnected, a spanning tree over the components (same generator)
/// is added so the result is always connected. Deterministic in
/// (n, p, seed).
Graph build_er_graph(int n, double p, std::uint64_t seed);

/// Path graph 0-1-...-(n-1). Used for small fixtures.
Graph build_path_graph(int n);

/// Combinatorial Laplacian L = deg - adj, dense.
Eigen::MatrixXd laplacian(const Graph& g);

/// Plain text edge list: a header line "n <N>" followed by one "i j" line
/// per edge. Round-trips through read_edge_list.
std::string write_edge_list(const Graph& g);
Graph read_edge_list(const std::string& text);
Graph read_edge_list_file(const std::string& path);
void write_edge_list_file(const Graph& g, const std::string& path);

}  // namespace dppsp
