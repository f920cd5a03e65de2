#include "fpgnn/graph.hpp"

#include "fpgnn/errors.hpp"
#include "fpgnn/rng.hpp"
#include "fpgnn/textio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fpgnn {

namespace fs = std::filesystem;

namespace {

std::ifstream open_input(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw DataError("missing file: " + p.string());
    return in;
}

} // namespace

std::size_t mask_count(const Mask& m) {
    return static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](std::uint8_t b) { return b != 0; }));
}

void GraphDataset::validate() const {
    if (features.rank() != 2 || features.rows() != n || features.cols() != d) {
        throw DataError("features must be " + std::to_string(n) + "x" + std::to_string(d));
    }
    if (labels.size() != n || train.size() != n || val.size() != n || test.size() != n) {
        throw DataError("labels and masks must have one entry per node");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const int in_masks = (train[i] ? 1 : 0) + (val[i] ? 1 : 0) + (test[i] ? 1 : 0);
        if (in_masks > 1) throw DataError("overlapping masks at node " + std::to_string(i));
        const int y = labels[i];
        if (y == -1 && in_masks == 0) continue;
        if (y < 0 || static_cast<std::size_t>(y) >= c) {
            throw DataError("label " + std::to_string(y) + " of node " + std::to_string(i) + " outside [0," +
                            std::to_string(c) + ")");
        }
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const Edge& ed = edges[e];
        if (ed.u >= n || ed.v >= n) {
            throw IndexError("edge (" + std::to_string(ed.u) + "," + std::to_string(ed.v) + ") out of range for n=" +
                             std::to_string(n));
        }
        if (ed.u == ed.v) throw DataError("self-loop in canonical edge list at node " + std::to_string(ed.u));
        if (ed.u > ed.v || (e > 0 && !(edges[e - 1] < ed))) throw DataError("edge list is not canonical");
    }
}

std::vector<Edge> canonicalize_edges(std::span<const Edge> raw, std::size_t n, LoadStats* stats) {
    std::vector<Edge> out;
    out.reserve(raw.size());
    std::size_t loops = 0;
    for (const Edge& e : raw) {
        if (e.u >= n || e.v >= n) {
            throw IndexError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ") out of range for n=" +
                             std::to_string(n));
        }
        if (e.u == e.v) {
            ++loops;
            continue;
        }
        out.push_back(e.u < e.v ? e : Edge{e.v, e.u});
    }
    std::sort(out.begin(), out.end());
    const std::size_t before = out.size();
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (stats) {
        stats->self_loops_dropped += loops;
        stats->duplicates_collapsed += before - out.size();
    }
    return out;
}

GraphDataset load_dataset(const fs::path& dir) {
    GraphDataset g;
    {
        auto in = open_input(dir / "meta");
        long long n = -1, d = -1, c = -1;
        if (!(in >> n >> d >> c) || n < 0 || d < 0 || c <= 0) throw DataError("meta must contain 'n d c'");
        g.n = static_cast<std::size_t>(n);
        g.d = static_cast<std::size_t>(d);
        g.c = static_cast<std::size_t>(c);
    }
    {
        auto in = open_input(dir / "features.csv");
        g.features = Tensor({g.n, g.d});
        std::string line;
        std::size_t i = 0;
        while (std::getline(in, line)) {
            if (text::is_blank(line)) continue;
            if (i >= g.n) throw DataError("features.csv has more than n rows");
            const auto fields = text::split(line, ',');
            if (fields.size() != g.d) {
                throw DataError("features.csv row " + std::to_string(i) + " has " + std::to_string(fields.size()) +
                                " values, expected " + std::to_string(g.d));
            }
            for (std::size_t j = 0; j < g.d; ++j) g.features(i, j) = text::parse_double(fields[j], "features.csv");
            ++i;
        }
        if (i != g.n) throw DataError("features.csv has " + std::to_string(i) + " rows, expected " + std::to_string(g.n));
    }
    {
        auto in = open_input(dir / "labels.txt");
        g.labels.reserve(g.n);
        long long y;
        while (in >> y) g.labels.push_back(static_cast<int>(y));
        if (!in.eof()) throw DataError("labels.txt: non-integer token");
        if (g.labels.size() != g.n) throw DataError("labels.txt must hold n labels");
    }
    {
        auto in = open_input(dir / "split.txt");
        g.train.assign(g.n, 0);
        g.val.assign(g.n, 0);
        g.test.assign(g.n, 0);
        std::string tok;
        std::size_t i = 0;
        while (in >> tok) {
            if (i >= g.n) throw DataError("split.txt has more than n tokens");
            if (tok == "train") g.train[i] = 1;
            else if (tok == "val") g.val[i] = 1;
            else if (tok == "test") g.test[i] = 1;
            else if (tok != "none") throw DataError("split.txt: unknown token '" + tok + "'");
            ++i;
        }
        if (i != g.n) throw DataError("split.txt must hold n tokens");
    }
    {
        auto in = open_input(dir / "edges.txt");
        std::vector<Edge> raw;
        std::string line;
        while (std::getline(in, line)) {
            if (text::is_blank(line)) continue;
            std::istringstream ls(line);
            long long u, v;
            if (!(ls >> u >> v)) throw DataError("edges.txt: malformed line '" + line + "'");
            if (u < 0 || v < 0) throw IndexError("edges.txt: negative node index in '" + line + "'");
            raw.push_back({static_cast<std::size_t>(u), static_cast<std::size_t>(v)});
        }
        g.edges = canonicalize_edges(raw, g.n, &g.stats);
    }
    g.validate();
    return g;
}

void save_dataset(const GraphDataset& g, const fs::path& dir) {
    g.validate();
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "meta");
        out << g.n << ' ' << g.d << ' ' << g.c << '\n';
    }
    {
        std::ofstream out(dir / "features.csv");
        std::string line;
        for (std::size_t i = 0; i < g.n; ++i) {
            line.clear();
            for (std::size_t j = 0; j < g.d; ++j) {
                if (j) line += ',';
                line += text::format_double(g.features(i, j));
            }
            out << line << '\n';
        }
    }
    {
        std::ofstream out(dir / "edges.txt");
        for (const Edge& e : g.edges) out << e.u << ' ' << e.v << '\n';
    }
    {
        std::ofstream out(dir / "labels.txt");
        for (int y : g.labels) out << y << '\n';
    }
    {
        std::ofstream out(dir / "split.txt");
        for (std::size_t i = 0; i < g.n; ++i)
            out << (g.train[i] ? "train" : g.val[i] ? "val" : g.test[i] ? "test" : "none") << '\n';
    }
}

SparseMatrix build_normalized_adjacency(std::size_t n, std::span<const Edge> edges) {
    std::vector<double> deg(n, 1.0);
    for (const Edge& e : edges) {
        if (e.u >= n || e.v >= n) throw IndexError("edge endpoint out of range");
        deg[e.u] += 1.0;
        deg[e.v] += 1.0;
    }
    std::vector<SparseMatrix::Triplet> trips;
    trips.reserve(n + 2 * edges.size());
    for (std::size_t i = 0; i < n; ++i) trips.push_back({i, i, 1.0 / deg[i]});
    for (const Edge& e : edges) {
        // Same expression for (u,v) and (v,u) keeps the matrix exactly symmetric.
        const double w = 1.0 / std::sqrt(deg[e.u] * deg[e.v]);
        trips.push_back({e.u, e.v, w});
        trips.push_back({e.v, e.u, w});
    }
    return SparseMatrix::from_triplets(n, n, std::move(trips));
}

SparseMatrix build_normalized_adjacency(const GraphDataset& g) { return build_normalized_adjacency(g.n, g.edges); }

std::vector<Edge> drop_edges(std::span<const Edge> edges, double rate, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw DomainError("drop-edge rate must lie in [0,1), got " + std::to_string(rate));
    if (rate == 0.0) return {edges.begin(), edges.end()};
    CounterRng rng(derive_seed(seed, hash_string("drop_edges")));
    std::vector<Edge> kept;
    kept.reserve(edges.size());
    for (const Edge& e : edges)
        if (rng.uniform() >= rate) kept.push_back(e);
    return kept;
}

GraphDataset drop_edges(const GraphDataset& g, double rate, std::uint64_t seed) {
    GraphDataset out = g;
    out.edges = drop_edges(g.edges, rate, seed);
    return out;
}

void row_normalize(Tensor& features) {
    for (std::size_t i = 0; i < features.rows(); ++i) {
        auto r = features.row(i);
        double s = 0.0;
        for (double v : r) s += v;
        if (s == 0.0) continue;
        for (double& v : r) v /= s;
    }
}

GraphDataset permute_nodes(const GraphDataset& g, std::span<const std::size_t> perm) {
    if (perm.size() != g.n) throw ShapeError("permutation length must equal n");
    std::vector<std::uint8_t> seen(g.n, 0);
    for (std::size_t p : perm) {
        if (p >= g.n || seen[p]) throw DomainError("not a permutation");
        seen[p] = 1;
    }
    GraphDataset out = g;
    for (std::size_t i = 0; i < g.n; ++i) {
        const std::size_t t = perm[i];
        std::copy(g.features.row(i).begin(), g.features.row(i).end(), out.features.row(t).begin());
        out.labels[t] = g.labels[i];
        out.train[t] = g.train[i];
        out.val[t] = g.val[i];
        out.test[t] = g.test[i];
    }
    std::vector<Edge> raw;
    raw.reserve(g.edges.size());
    for (const Edge& e : g.edges) raw.push_back({perm[e.u], perm[e.v]});
    out.edges = canonicalize_edges(raw, g.n);
    return out;
}

} // namespace fpgnn
