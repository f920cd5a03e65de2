// mrf: mean-field inference on a pairwise MRF text file.
#include "exit_codes.hpp"

#include "fpgnn/mrf.hpp"
#include "fpgnn/runtime.hpp"
#include "fpgnn/textio.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <optional>

using namespace fpgnn;

namespace {

void print_marginals(const char* title, const Tensor& q) {
    std::cout << "# " << title << "\nnode";
    for (std::size_t a = 0; a < q.cols(); ++a) std::cout << ",q" << a;
    std::cout << '\n';
    for (std::size_t i = 0; i < q.rows(); ++i) {
        std::cout << i;
        for (std::size_t a = 0; a < q.cols(); ++a) std::cout << ',' << text::format_double(q(i, a));
        std::cout << '\n';
    }
}

} // namespace

int main(int argc, char** argv) {
    configure_allocator();
    CLI::App app{"Mean-field inference for discrete pairwise Markov random fields"};
    app.require_subcommand(1);

    std::string file;
    std::string schedule = "seq";
    double tol = 1e-10;
    std::size_t max_iters = 10000;
    std::optional<std::uint64_t> init_seed;
    bool exact = false;
    auto* solve = app.add_subcommand("solve", "Run mean-field to a fixed point and print marginals");
    solve->add_option("file", file, "MRF file")->required();
    solve->add_option("--schedule", schedule, "seq (Gauss-Seidel) or par (Jacobi)")
        ->check(CLI::IsMember({"seq", "par", "sequential", "parallel"}));
    solve->add_option("--tol", tol, "Stop when no marginal moves by more than this in a sweep");
    solve->add_option("--max-iters", max_iters, "Sweep limit");
    solve->add_option("--init-seed", init_seed, "Random initial marginals instead of uniform");
    solve->add_flag("--exact", exact, "Also enumerate exact marginals and log Z");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? cli::ok : cli::config_error;
    }

    try {
        const PairwiseMrf m = read_mrf_file(file);
        MeanFieldOptions opts;
        opts.schedule = (schedule == "par" || schedule == "parallel") ? Schedule::parallel : Schedule::sequential;
        opts.tol = tol;
        opts.max_iters = max_iters;
        const MeanFieldState init = init_seed ? random_state(m, *init_seed) : uniform_state(m);
        const MeanFieldState s = run_mean_field(m, init, opts);

        print_marginals("mean-field marginals", s.q);
        std::cout << "# free energy per sweep\nsweep,free_energy\n";
        for (std::size_t t = 0; t < s.free_energy_trace.size(); ++t)
            std::cout << t << ',' << text::format_double(s.free_energy_trace[t]) << '\n';
        std::cout << "# sweeps " << s.iteration << ", converged " << (s.converged ? "yes" : "no") << ", residual "
                  << text::format_double(fixed_point_residual(m, s)) << '\n';
        if (exact) {
            const ExactResult ex = exact_marginals(m);
            print_marginals("exact marginals", ex.marginals);
            std::cout << "# log Z " << text::format_double(ex.log_partition) << ", -log Z "
                      << text::format_double(-ex.log_partition) << '\n';
        }
        return cli::ok;
    } catch (...) {
        return cli::report_current_exception("mrf");
    }
}
