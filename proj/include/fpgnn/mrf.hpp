#pragma once

#include "fpgnn/tensor.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fpgnn {

/// Discrete pairwise Markov random field over n nodes with k states each.
///
/// The public constructors take strictly positive potentials; they are stored
/// as logarithms. One k x k table is kept per undirected edge {i, j} (with
/// i < j), indexed psi(z_i, z_j); the reverse direction reads its transpose,
/// which makes psi_ji(b, a) == psi_ij(a, b) by construction.
class PairwiseMrf {
public:
    struct EdgePotential {
        std::size_t i = 0;
        std::size_t j = 0;
        /// k*k row-major table psi(z_i = a, z_j = b) at [a * k + b].
        std::vector<double> psi;
    };

    struct Incidence {
        std::size_t edge;
        std::size_t neighbor;
        /// True when this node is the edge's first endpoint (rows of the table).
        bool as_first;
    };

    PairwiseMrf() = default;
    /// `phi` holds n rows of k positive values. Throws DomainError on
    /// non-positive or non-finite potentials, IndexError on bad endpoints and
    /// DataError on self-loops or contradictory duplicate edges.
    PairwiseMrf(std::size_t k, const std::vector<std::vector<double>>& phi, std::vector<EdgePotential> edges);

    std::size_t num_nodes() const noexcept { return n_; }
    std::size_t num_states() const noexcept { return k_; }
    std::size_t num_edges() const noexcept { return edge_nodes_.size(); }

    double log_phi(std::size_t i, std::size_t a) const { return log_phi_[i * k_ + a]; }
    /// log psi_e(z_first = a, z_second = b).
    double log_psi(std::size_t e, std::size_t a, std::size_t b) const { return log_psi_[e * k_ * k_ + a * k_ + b]; }
    std::pair<std::size_t, std::size_t> edge(std::size_t e) const { return edge_nodes_[e]; }
    std::span<const Incidence> neighbors(std::size_t i) const { return adjacency_[i]; }

private:
    std::size_t n_ = 0;
    std::size_t k_ = 0;
    std::vector<double> log_phi_;
    std::vector<double> log_psi_;
    std::vector<std::pair<std::size_t, std::size_t>> edge_nodes_;
    std::vector<std::vector<Incidence>> adjacency_;
};

/// Product-form approximation q(z) = prod_i q_i(z_i).
struct MeanFieldState {
    Tensor q; // n x k, rows on the simplex
    std::size_t iteration = 0;
    std::vector<double> free_energy_trace;
    bool converged = false;
};

enum class Schedule { sequential, parallel };

struct MeanFieldOptions {
    Schedule schedule = Schedule::sequential;
    double tol = 1e-10;
    std::size_t max_iters = 10000;
};

MeanFieldState uniform_state(const PairwiseMrf& m);
MeanFieldState random_state(const PairwiseMrf& m, std::uint64_t seed);

/// Writes F_i(q) -- the normalized fixed-point map at node i -- into `out`.
void fixed_point_map(const PairwiseMrf& m, const Tensor& q, std::size_t i, std::span<double> out);

/// Replaces q_i by F_i(q); all other rows are unchanged.
MeanFieldState mean_field_update(const PairwiseMrf& m, MeanFieldState s, std::size_t i);

/// max_i || q_i - F_i(q) ||_inf.
double fixed_point_residual(const PairwiseMrf& m, const MeanFieldState& s);

/// sum q log q - sum q log phi - sum_edges sum q_i q_j log psi.
double free_energy(const PairwiseMrf& m, const MeanFieldState& s);

/// Sweeps until the largest per-sweep change drops below tol or max_iters
/// sweeps have run. The trace holds F at the initial state and after every
/// sweep. Failing to converge is reported through `converged`, not thrown.
MeanFieldState run_mean_field(const PairwiseMrf& m, MeanFieldState init, const MeanFieldOptions& opts = {});

struct ExactResult {
    Tensor marginals; // n x k
    double log_partition = 0.0;
};

inline constexpr std::size_t kMaxEnumeration = std::size_t{1} << 20;

/// Brute-force marginals over all k^n configurations; DomainError when
/// k^n exceeds kMaxEnumeration.
ExactResult exact_marginals(const PairwiseMrf& m);

PairwiseMrf read_mrf(std::istream& in);
PairwiseMrf read_mrf_file(const std::string& path);
void write_mrf(std::ostream& out, const PairwiseMrf& m);

/// Result of comparing a smooth function with its order-k Taylor polynomial at 0.
struct TaylorReport {
    int order = 1;
    std::vector<double> radii;
    std::vector<double> errors;
    /// Least-squares slope of log(error) against log(radius); NaN when degenerate.
    double slope = 0.0;
    /// All errors sit at rounding level, so the slope carries no information.
    bool degenerate = false;
};

struct SmoothFunction {
    std::size_t dim = 1;
    std::function<double(std::span<const double>)> value;
};

/// Measures max over a fixed set of unit directions of |f(r v) - T_k(r v)| for
/// each radius r. Orders 1 and 2 use finite-difference gradient and Hessian at
/// 0; higher orders add finite-difference directional derivatives.
TaylorReport taylor_order_check(const SmoothFunction& f, int order, std::span<const double> radii);

} // namespace fpgnn
