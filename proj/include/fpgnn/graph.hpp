#pragma once

#include "fpgnn/autograd.hpp"
#include "fpgnn/tensor.hpp"

#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fpgnn {

/// Undirected edge stored with u < v.
struct Edge {
    std::size_t u = 0;
    std::size_t v = 0;
    auto operator<=>(const Edge&) const = default;
};

struct LoadStats {
    std::size_t self_loops_dropped = 0;
    std::size_t duplicates_collapsed = 0;
};

/// A citation-style graph with node features, labels and a fixed split.
///
/// Edges are canonical: u < v, sorted, no duplicates, no self-loops. The three
/// masks are disjoint and every masked node carries a label in [0, c). Nodes
/// outside all masks may use label -1.
struct GraphDataset {
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t c = 0;
    Tensor features; // n x d
    Labels labels;
    std::vector<Edge> edges;
    Mask train;
    Mask val;
    Mask test;
    LoadStats stats;

    /// Throws DataError / IndexError when an invariant is violated.
    void validate() const;

    bool operator==(const GraphDataset& other) const {
        return n == other.n && d == other.d && c == other.c && features == other.features &&
               labels == other.labels && edges == other.edges && train == other.train && val == other.val &&
               test == other.test;
    }
};

std::size_t mask_count(const Mask& m);

/// Reads the text directory format:
///   meta          "n d c"
///   features.csv  n lines of d comma-separated floats
///   edges.txt     "u v" per line, 0-indexed, undirected
///   labels.txt    n integers (-1 allowed for unsplit nodes)
///   split.txt     n tokens from {train, val, test, none}
/// Duplicate edges collapse and self-loops are dropped; both are counted in stats.
GraphDataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const GraphDataset& g, const std::filesystem::path& dir);

/// Validates endpoints against n and returns the canonical edge list.
std::vector<Edge> canonicalize_edges(std::span<const Edge> raw, std::size_t n, LoadStats* stats = nullptr);

/// (D+I)^(-1/2) (A+I) (D+I)^(-1/2) as CSR with sorted columns.
SparseMatrix build_normalized_adjacency(std::size_t n, std::span<const Edge> edges);
SparseMatrix build_normalized_adjacency(const GraphDataset& g);

/// Removes each edge independently with probability `rate`; a pure function of seed.
std::vector<Edge> drop_edges(std::span<const Edge> edges, double rate, std::uint64_t seed);
GraphDataset drop_edges(const GraphDataset& g, double rate, std::uint64_t seed);

/// Divides each feature row by its sum; all-zero rows are left unchanged.
void row_normalize(Tensor& features);

/// Relabels node i as perm[i].
GraphDataset permute_nodes(const GraphDataset& g, std::span<const std::size_t> perm);

} // namespace fpgnn
