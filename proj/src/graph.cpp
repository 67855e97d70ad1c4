#include "dppsp/graph.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "dppsp/errors.hpp"

namespace dppsp {

bool Graph::has_edge(int i, int j) const {
    if (i == j) return false;
    if (i > j) std::swap(i, j);
    return std::binary_search(edges.begin(), edges.end(), std::make_pair(i, j));
}

std::vector<int> Graph::degrees() const {
    std::vector<int> deg(node_count, 0);
    for (auto [i, j] : edges) {
        ++deg[i];
        ++deg[j];
    }
    return deg;
}

namespace {

// Component labels via BFS; returns number of components.
int label_components(const Graph& g, std::vector<int>& label) {
    label.assign(g.node_count, -1);
    std::vector<std::vector<int>> adj(g.node_count);
    for (auto [i, j] : g.edges) {
        adj[i].push_back(j);
        adj[j].push_back(i);
    }
    int comp = 0;
    std::vector<int> stack;
    for (int s = 0; s < g.node_count; ++s) {
        if (label[s] >= 0) continue;
        label[s] = comp;
        stack.push_back(s);
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int v : adj[u]) {
                if (label[v] < 0) {
                    label[v] = comp;
                    stack.push_back(v);
                }
            }
        }
        ++comp;
    }
    return comp;
}

void normalize_edges(Graph& g) {
    for (auto& e : g.edges) {
        if (e.first > e.second) std::swap(e.first, e.second);
    }
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
}

}  // namespace

bool is_connected(const Graph& g) {
    if (g.node_count <= 0) return false;
    std::vector<int> label;
    return label_components(g, label) == 1;
}

Graph build_er_graph(int n, double p, std::uint64_t seed) {
    if (n < 1) throw DimensionMismatch("build_er_graph: n must be >= 1");
    if (p < 0.0 || p > 1.0) throw NumericalError("build_er_graph: p outside [0,1]");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Graph g;
    g.node_count = n;
    g.seed = seed;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (unit(rng) < p) g.edges.emplace_back(i, j);
        }
    }

    // Repair: connect the components with a random spanning tree drawn from
    // the same generator, so the result stays deterministic in (n, p, seed).
    std::vector<int> label;
    int comps = label_components(g, label);
    if (comps > 1) {
        std::vector<std::vector<int>> members(comps);
        for (int v = 0; v < n; ++v) members[label[v]].push_back(v);

        std::vector<int> order(comps);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (int k = 1; k < comps; ++k) {
            // attach component order[k] to a uniformly chosen earlier one
            std::uniform_int_distribution<int> pick_prev(0, k - 1);
            const auto& a = members[order[pick_prev(rng)]];
            const auto& b = members[order[k]];
            std::uniform_int_distribution<int> pick_a(0, static_cast<int>(a.size()) - 1);
            std::uniform_int_distribution<int> pick_b(0, static_cast<int>(b.size()) - 1);
            g.edges.emplace_back(a[pick_a(rng)], b[pick_b(rng)]);
        }
    }

    normalize_edges(g);
    return g;
}

Graph build_path_graph(int n) {
    if (n < 1) throw DimensionMismatch("build_path_graph: n must be >= 1");
    Graph g;
    g.node_count = n;
    for (int i = 0; i + 1 < n; ++i) g.edges.emplace_back(i, i + 1);
    return g;
}

Eigen::MatrixXd laplacian(const Graph& g) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(g.node_count, g.node_count);
    for (auto [i, j] : g.edges) {
        L(i, i) += 1.0;
        L(j, j) += 1.0;
        L(i, j) -= 1.0;
        L(j, i) -= 1.0;
    }
    return L;
}

std::string write_edge_list(const Graph& g) {
    std::ostringstream out;
    out << "n " << g.node_count << "\n";
    for (auto [i, j] : g.edges) out << i << " " << j << "\n";
    return out.str();
}

Graph read_edge_list(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    Graph g;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        // strip comments and blank lines
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first)) continue;
        if (!have_header) {
            if (first != "n") throw ParseError("edge list must start with 'n <count>'", line_no);
            if (!(ls >> g.node_count) || g.node_count < 1)
                throw ParseError("bad node count in edge list header", line_no);
            have_header = true;
            continue;
        }
        int i, j;
        std::istringstream es(line);
        if (!(es >> i >> j)) throw ParseError("expected 'i j' edge line", line_no);
        std::string extra;
        if (es >> extra) throw ParseError("trailing tokens on edge line", line_no);
        if (i < 0 || j < 0 || i >= g.node_count || j >= g.node_count)
            throw ValidationError("edge_list", "edge endpoint out of range: " +
                                                   std::to_string(i) + " " + std::to_string(j));
        if (i == j)
            throw ValidationError("edge_list", "self-loop at node " + std::to_string(i));
        g.edges.emplace_back(i, j);
    }
    if (!have_header) throw ParseError("empty edge list", line_no);
    auto raw = g.edges;
    normalize_edges(g);
    if (raw.size() != g.edges.size())
        throw ValidationError("edge_list", "duplicate edge in edge list");
    if (!is_connected(g))
        throw ValidationError("edge_list", "edge list describes a disconnected graph");
    return g;
}

Graph read_edge_list_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("edge_list", "cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return read_edge_list(buf.str());
}

void write_edge_list_file(const Graph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write edge list: " + path);
    out << write_edge_list(g);
}

}  // namespace dppsp
