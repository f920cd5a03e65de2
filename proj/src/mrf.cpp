#include "fpgnn/mrf.hpp"

#include "fpgnn/errors.hpp"
#include "fpgnn/rng.hpp"
#include "fpgnn/textio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace fpgnn {

namespace {

void check_potential(double v, const std::string& what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(what + " must be positive and finite, got " + std::to_string(v));
}

} // namespace

PairwiseMrf::PairwiseMrf(std::size_t k, const std::vector<std::vector<double>>& phi, std::vector<EdgePotential> edges)
    : n_(phi.size()), k_(k), log_phi_(phi.size() * k), adjacency_(phi.size()) {
    if (k == 0) throw DomainError("an MRF needs at least one state per node");
    for (std::size_t i = 0; i < n_; ++i) {
        if (phi[i].size() != k) throw ShapeError("phi of node " + std::to_string(i) + " must have k entries");
        for (std::size_t a = 0; a < k; ++a) {
            check_potential(phi[i][a], "phi");
            log_phi_[i * k + a] = std::log(phi[i][a]);
        }
    }
    // Canonical orientation i < j; duplicates must agree.
    std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> canon;
    for (auto& e : edges) {
        if (e.i >= n_ || e.j >= n_) {
            throw IndexError("psi edge (" + std::to_string(e.i) + "," + std::to_string(e.j) + ") out of range");
        }
        if (e.i == e.j) throw DataError("psi on a self-loop at node " + std::to_string(e.i));
        if (e.psi.size() != k * k) throw ShapeError("psi table must have k*k entries");
        for (double v : e.psi) check_potential(v, "psi");
        std::vector<double> table = e.psi;
        std::size_t a = e.i, b = e.j;
        if (a > b) {
            std::swap(a, b);
            for (std::size_t x = 0; x < k; ++x)
                for (std::size_t y = 0; y < k; ++y) table[x * k + y] = e.psi[y * k + x];
        }
        auto [it, inserted] = canon.emplace(std::make_pair(a, b), table);
        if (!inserted && it->second != table) {
            throw DataError("contradictory psi tables for edge (" + std::to_string(a) + "," + std::to_string(b) + ")");
        }
    }
    log_psi_.reserve(canon.size() * k * k);
    for (const auto& [ij, table] : canon) {
        const std::size_t e = edge_nodes_.size();
        edge_nodes_.push_back(ij);
        for (double v : table) log_psi_.push_back(std::log(v));
        adjacency_[ij.first].push_back({e, ij.second, true});
        adjacency_[ij.second].push_back({e, ij.first, false});
    }
}

MeanFieldState uniform_state(const PairwiseMrf& m) {
    MeanFieldState s;
    s.q = Tensor({m.num_nodes(), m.num_states()}, 1.0 / static_cast<double>(m.num_states()));
    return s;
}

MeanFieldState random_state(const PairwiseMrf& m, std::uint64_t seed) {
    MeanFieldState s = uniform_state(m);
    CounterRng rng(derive_seed(seed, hash_string("mean_field_init")));
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
        auto r = s.q.row(i);
        double z = 0.0;
        for (double& v : r) z += (v = 0.05 + rng.uniform());
        for (double& v : r) v /= z;
    }
    return s;
}

void fixed_point_map(const PairwiseMrf& m, const Tensor& q, std::size_t i, std::span<double> out) {
    const std::size_t k = m.num_states();
    for (std::size_t a = 0; a < k; ++a) out[a] = m.log_phi(i, a);
    for (const auto& inc : m.neighbors(i)) {
        const auto qj = q.row(inc.neighbor);
        for (std::size_t a = 0; a < k; ++a) {
            double s = 0.0;
            for (std::size_t b = 0; b < k; ++b)
                s += qj[b] * (inc.as_first ? m.log_psi(inc.edge, a, b) : m.log_psi(inc.edge, b, a));
            out[a] += s;
        }
    }
    // Normalization absorbs the additive constant.
    const double mx = *std::max_element(out.begin(), out.end());
    double z = 0.0;
    for (double& v : out) z += (v = std::exp(v - mx));
    for (double& v : out) v /= z;
}

MeanFieldState mean_field_update(const PairwiseMrf& m, MeanFieldState s, std::size_t i) {
    if (i >= m.num_nodes()) throw IndexError("mean_field_update: node " + std::to_string(i) + " out of range");
    std::vector<double> next(m.num_states());
    fixed_point_map(m, s.q, i, next);
    std::copy(next.begin(), next.end(), s.q.row(i).begin());
    return s;
}

double fixed_point_residual(const PairwiseMrf& m, const MeanFieldState& s) {
    std::vector<double> next(m.num_states());
    double worst = 0.0;
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
        fixed_point_map(m, s.q, i, next);
        const auto qi = s.q.row(i);
        for (std::size_t a = 0; a < next.size(); ++a) worst = std::max(worst, std::abs(next[a] - qi[a]));
    }
    return worst;
}

double free_energy(const PairwiseMrf& m, const MeanFieldState& s) {
    const std::size_t k = m.num_states();
    double f = 0.0;
    for (std::size_t i = 0; i < m.num_nodes(); ++i)
        for (std::size_t a = 0; a < k; ++a) {
            const double q = s.q(i, a);
            if (q > 0.0) f += q * std::log(q);
            f -= q * m.log_phi(i, a);
        }
    for (std::size_t e = 0; e < m.num_edges(); ++e) {
        const auto [i, j] = m.edge(e);
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) f -= s.q(i, a) * s.q(j, b) * m.log_psi(e, a, b);
    }
    return f;
}

MeanFieldState run_mean_field(const PairwiseMrf& m, MeanFieldState s, const MeanFieldOptions& opts) {
    if (!(opts.tol > 0.0)) throw DomainError("run_mean_field: tol must be positive");
    if (s.q.rank() != 2 || s.q.rows() != m.num_nodes() || s.q.cols() != m.num_states()) {
        throw ShapeError("run_mean_field: initial state has the wrong shape");
    }
    const std::size_t n = m.num_nodes(), k = m.num_states();
    std::vector<double> next(k);
    s.converged = false;
    s.free_energy_trace.push_back(free_energy(m, s));
    while (s.iteration < opts.max_iters) {
        double delta = 0.0;
        if (opts.schedule == Schedule::sequential) {
            for (std::size_t i = 0; i < n; ++i) {
                fixed_point_map(m, s.q, i, next);
                auto qi = s.q.row(i);
                for (std::size_t a = 0; a < k; ++a) {
                    delta = std::max(delta, std::abs(next[a] - qi[a]));
                    qi[a] = next[a];
                }
            }
        } else {
            const Tensor snapshot = s.q;
            for (std::size_t i = 0; i < n; ++i) {
                fixed_point_map(m, snapshot, i, next);
                auto qi = s.q.row(i);
                for (std::size_t a = 0; a < k; ++a) {
                    delta = std::max(delta, std::abs(next[a] - qi[a]));
                    qi[a] = next[a];
                }
            }
        }
        ++s.iteration;
        s.free_energy_trace.push_back(free_energy(m, s));
        if (delta < opts.tol) {
            s.converged = true;
            break;
        }
    }
    return s;
}

ExactResult exact_marginals(const PairwiseMrf& m) {
    const std::size_t n = m.num_nodes(), k = m.num_states();
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) {
        if (total > kMaxEnumeration / k) throw DomainError("exact_marginals: k^n exceeds the enumeration bound 2^20");
        total *= k;
    }
    std::vector<double> logw(total);
    std::vector<std::size_t> z(n, 0);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < total; ++c) {
        // Node 0 is the fastest-varying digit.
        std::size_t rest = c;
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = rest % k;
            rest /= k;
        }
        double lw = 0.0;
        for (std::size_t i = 0; i < n; ++i) lw += m.log_phi(i, z[i]);
        for (std::size_t e = 0; e < m.num_edges(); ++e) {
            const auto [i, j] = m.edge(e);
            lw += m.log_psi(e, z[i], z[j]);
        }
        logw[c] = lw;
        mx = std::max(mx, lw);
    }
    ExactResult r;
    r.marginals = Tensor({n, k});
    double zsum = 0.0;
    for (std::size_t c = 0; c < total; ++c) {
        const double w = std::exp(logw[c] - mx);
        zsum += w;
        std::size_t rest = c;
        for (std::size_t i = 0; i < n; ++i) {
            r.marginals(i, rest % k) += w;
            rest /= k;
        }
    }
    for (double& v : r.marginals.storage()) v /= zsum;
    r.log_partition = mx + std::log(zsum);
    return r;
}

PairwiseMrf read_mrf(std::istream& in) {
    std::string line;
    auto next_line = [&](std::string& out) {
        while (std::getline(in, out)) {
            const auto t = text::trim(out);
            if (!t.empty() && t.front() != '#') return true;
        }
        return false;
    };
    if (!next_line(line)) throw DataError("mrf file: missing 'n k' header");
    std::size_t n = 0, k = 0;
    {
        std::istringstream hs(line);
        long long nn, kk;
        if (!(hs >> nn >> kk) || nn < 0 || kk <= 0) throw DataError("mrf file: bad header '" + line + "'");
        n = static_cast<std::size_t>(nn);
        k = static_cast<std::size_t>(kk);
    }
    std::vector<std::vector<double>> phi(n, std::vector<double>(k, 1.0));
    std::vector<PairwiseMrf::EdgePotential> edges;
    auto parse_index = [&](const std::string& tok) {
        const long long v = text::parse_int(tok, "mrf file");
        if (v < 0 || static_cast<std::size_t>(v) >= n) throw IndexError("mrf file: node index " + tok + " out of range");
        return static_cast<std::size_t>(v);
    };
    while (next_line(line)) {
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "phi") {
            std::string idx;
            ls >> idx;
            const std::size_t i = parse_index(idx);
            for (std::size_t a = 0; a < k; ++a) {
                std::string tok;
                if (!(ls >> tok)) throw DataError("mrf file: phi line needs k values: '" + line + "'");
                phi[i][a] = text::parse_double(tok, "mrf phi");
            }
        } else if (kind == "psi") {
            std::string si, sj;
            if (!(ls >> si >> sj)) throw DataError("mrf file: psi line needs two node indices");
            PairwiseMrf::EdgePotential e{parse_index(si), parse_index(sj), {}};
            for (std::size_t a = 0; a < k; ++a) {
                std::string row;
                if (!next_line(row)) throw DataError("mrf file: truncated psi table");
                const auto fields = text::split(text::trim(row), ' ');
                std::vector<double> vals;
                for (auto f : fields)
                    if (!f.empty()) vals.push_back(text::parse_double(f, "mrf psi"));
                if (vals.size() != k) throw DataError("mrf file: psi row needs k values: '" + row + "'");
                e.psi.insert(e.psi.end(), vals.begin(), vals.end());
            }
            edges.push_back(std::move(e));
        } else {
            throw DataError("mrf file: unknown record '" + kind + "'");
        }
    }
    return PairwiseMrf(k, phi, std::move(edges));
}

PairwiseMrf read_mrf_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing file: " + path);
    return read_mrf(in);
}

void write_mrf(std::ostream& out, const PairwiseMrf& m) {
    const std::size_t k = m.num_states();
    out << m.num_nodes() << ' ' << k << '\n';
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
        out << "phi " << i;
        for (std::size_t a = 0; a < k; ++a) out << ' ' << text::format_double(std::exp(m.log_phi(i, a)));
        out << '\n';
    }
    for (std::size_t e = 0; e < m.num_edges(); ++e) {
        const auto [i, j] = m.edge(e);
        out << "psi " << i << ' ' << j << '\n';
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = 0; b < k; ++b) out << (b ? " " : "") << text::format_double(std::exp(m.log_psi(e, a, b)));
            out << '\n';
        }
    }
}

namespace {

std::vector<std::vector<double>> probe_directions(std::size_t dim) {
    std::vector<std::vector<double>> dirs;
    dirs.emplace_back(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
    CounterRng rng(hash_string("taylor_order_check"));
    for (int r = 0; r < 3; ++r) {
        std::vector<double> v(dim);
        double norm = 0.0;
        for (double& x : v) {
            x = rng.normal();
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
        dirs.push_back(std::move(v));
    }
    return dirs;
}

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

} // namespace

TaylorReport taylor_order_check(const SmoothFunction& f, int order, std::span<const double> radii) {
    if (order < 1) throw DomainError("taylor_order_check: order must be >= 1");
    if (radii.size() < 2) throw DomainError("taylor_order_check: need at least two radii");
    for (double r : radii)
        if (!(r > 0.0)) throw DomainError("taylor_order_check: radii must be positive");
    const std::size_t m = f.dim;
    std::vector<double> x(m, 0.0);
    auto eval = [&](const std::vector<double>& u) { return f.value(std::span<const double>(u)); };

    const double f0 = eval(x);
    // Central-difference gradient (step ~ eps^(1/3)) and Hessian (step ~ eps^(1/4)).
    const double hg = 1e-5, hh = 1e-4;
    std::vector<double> grad(m);
    for (std::size_t a = 0; a < m; ++a) {
        x[a] = hg;
        const double fp = eval(x);
        x[a] = -hg;
        const double fm = eval(x);
        x[a] = 0.0;
        grad[a] = (fp - fm) / (2.0 * hg);
    }
    std::vector<double> hess;
    if (order >= 2) {
        hess.assign(m * m, 0.0);
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = a; b < m; ++b) {
                double acc = 0.0;
                for (int sa : {1, -1})
                    for (int sb : {1, -1}) {
                        x[a] += sa * hh;
                        x[b] += sb * hh;
                        acc += sa * sb * eval(x);
                        x[a] = 0.0;
                        x[b] = 0.0;
                    }
                hess[a * m + b] = hess[b * m + a] = acc / (4.0 * hh * hh);
            }
    }

    const auto dirs = probe_directions(m);
    // Directional derivatives of order >= 3 along each probe direction.
    std::vector<std::vector<double>> higher(dirs.size());
    for (std::size_t d = 0; d < dirs.size(); ++d) {
        for (int j = 3; j <= order; ++j) {
            const double h = std::pow(std::numeric_limits<double>::epsilon(), 1.0 / (j + 2));
            double acc = 0.0;
            for (int i = 0; i <= j; ++i) {
                const double t = (0.5 * j - i) * h;
                std::vector<double> u(m);
                for (std::size_t a = 0; a < m; ++a) u[a] = t * dirs[d][a];
                acc += ((i % 2) ? -1.0 : 1.0) * binomial(j, i) * eval(u);
            }
            higher[d].push_back(acc / std::pow(h, j));
        }
    }

    TaylorReport rep;
    rep.order = order;
    rep.radii.assign(radii.begin(), radii.end());
    for (double r : radii) {
        double worst = 0.0;
        for (std::size_t d = 0; d < dirs.size(); ++d) {
            std::vector<double> u(m);
            for (std::size_t a = 0; a < m; ++a) u[a] = r * dirs[d][a];
            double t = f0;
            for (std::size_t a = 0; a < m; ++a) t += grad[a] * u[a];
            if (order >= 2) {
                double quad = 0.0;
                for (std::size_t a = 0; a < m; ++a)
                    for (std::size_t b = 0; b < m; ++b) quad += u[a] * hess[a * m + b] * u[b];
                t += 0.5 * quad;
            }
            double fact = 2.0;
            for (int j = 3; j <= order; ++j) {
                fact *= j;
                t += higher[d][static_cast<std::size_t>(j - 3)] * std::pow(r, j) / fact;
            }
            worst = std::max(worst, std::abs(eval(u) - t));
        }
        rep.errors.push_back(worst);
    }

    // Rounding noise of the finite-difference polynomial at radius r.
    const double eps = std::numeric_limits<double>::epsilon();
    const double scale = std::max(1.0, std::abs(f0));
    rep.degenerate = true;
    for (std::size_t p = 0; p < rep.radii.size(); ++p) {
        const double r = rep.radii[p];
        const double noise = 16.0 * eps * scale * (1.0 + r / hg + (order >= 2 ? r * r / (hh * hh) : 0.0));
        if (rep.errors[p] >= noise) rep.degenerate = false;
    }
    if (rep.degenerate) {
        rep.slope = std::numeric_limits<double>::quiet_NaN();
        return rep;
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double cnt = static_cast<double>(rep.radii.size());
    for (std::size_t p = 0; p < rep.radii.size(); ++p) {
        const double lx = std::log(rep.radii[p]);
        const double ly = std::log(std::max(rep.errors[p], std::numeric_limits<double>::min()));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    rep.slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    return rep;
}

} // namespace fpgnn
