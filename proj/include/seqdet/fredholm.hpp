#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "seqdet/math_util.hpp"
#include "seqdet/quadrature.hpp"

namespace seqdet {

/*
 * Exact ARL (and zero-state detection delay) of CUSUM and Shiryaev-Roberts
 * on the Gaussian model, by solving the renewal-type Fredholm equation
 *
 *     phi(s) = 1 + int_0^H phi(x) d/dx F(x / xi(s)) dx ,   s in [0, H],
 *
 * with xi(s) = max(1, s) for CUSUM and xi(s) = 1 + s for Shiryaev-Roberts.
 * F is the likelihood-ratio distribution: under the no-change measure
 * F(x) = Phi((ln x + A^2/2)/A), under a change at time zero
 * F(x) = Phi((ln x - A^2/2)/A). The kernel density is the corresponding
 * lognormal-type density in closed form; differentiating numerically
 * would wreck the conditioning of the Nystrom matrix.
 *
 * Discretization: composite Gauss-Legendre panels on [0, H] with
 * geometric clustering toward x = 0, where the density is steep for small
 * amplitudes. The linear system (I - K) phi = 1 is solved by dense LU.
 */

enum class FredholmProcedure { Cusum, ShiryaevRoberts };
enum class DelayRegime { NullArl, ZeroDelay };

struct FredholmProblem {
    FredholmProcedure procedure = FredholmProcedure::Cusum;
    double threshold = 0.0;  // V/R-scale barrier H
    DelayRegime regime = DelayRegime::NullArl;
    double amplitude = 1.0;
    int grid_size = 1024;

    void validate() const {
        if (!(threshold > 0.0)) throw std::invalid_argument("FredholmProblem: threshold must be > 0");
        if (!(amplitude > 0.0)) throw std::invalid_argument("FredholmProblem: amplitude must be > 0");
        if (grid_size < 64) throw std::invalid_argument("FredholmProblem: grid_size must be >= 64");
    }
};

/// Pr(likelihood ratio <= x) under the regime's measure.
inline double kernel_cdf(double x, double amplitude, DelayRegime regime) {
    if (x < 0.0) throw std::invalid_argument("kernel_cdf: x must be >= 0");
    if (x == 0.0) return 0.0;
    const double shift = (regime == DelayRegime::NullArl ? 0.5 : -0.5) * amplitude * amplitude;
    return normal_cdf((std::log(x) + shift) / amplitude);
}

namespace detail {

inline double kernel_log_shift(double amplitude, DelayRegime regime) {
    return (regime == DelayRegime::NullArl ? 0.5 : -0.5) * amplitude * amplitude;
}

/// d/dx F(x / xi) evaluated with ln x precomputed; x > 0.
inline double kernel_density(double log_xi, double x, double log_x, double amplitude,
                             double log_shift) {
    const double z = (log_x - log_xi + log_shift) / amplitude;
    return kInvSqrt2Pi * std::exp(-0.5 * z * z) / (amplitude * x);
}

inline double xi_of(FredholmProcedure procedure, double s) {
    return procedure == FredholmProcedure::Cusum ? std::max(1.0, s) : 1.0 + s;
}

}  // namespace detail

struct ArlSolution {
    std::vector<double> nodes;
    std::vector<double> weights;
    std::vector<double> phi_values;
    double phi_at_start = 0.0;  // phi(1) for CUSUM, phi(0) for Shiryaev-Roberts
    double residual_norm = 0.0;
    FredholmProblem problem;

    /// Nystrom interpolation: phi(s) = 1 + sum_j w_j k(s, x_j) phi(x_j).
    double phi_at(double s) const {
        const double log_xi = std::log(detail::xi_of(problem.procedure, s));
        const double shift = detail::kernel_log_shift(problem.amplitude, problem.regime);
        double acc = 1.0;
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            acc += weights[j] *
                   detail::kernel_density(log_xi, nodes[j], std::log(nodes[j]), problem.amplitude,
                                          shift) *
                   phi_values[j];
        }
        return acc;
    }
};

inline ArlSolution solve(const FredholmProblem& problem) {
    problem.validate();
    const double barrier = problem.threshold;

    // Panel edges: [0, H*1e-7] then geometric up to H.
    const int per_panel = 16;
    const int n_panels = std::max(8, problem.grid_size / per_panel);
    std::vector<double> edges;
    edges.reserve(static_cast<std::size_t>(n_panels) + 2);
    edges.push_back(0.0);
    const double lo = barrier * 1e-7;
    edges.push_back(lo);
    const double ratio = std::pow(barrier / lo, 1.0 / n_panels);
    double edge = lo;
    for (int p = 1; p < n_panels; ++p) {
        edge *= ratio;
        edges.push_back(edge);
    }
    edges.push_back(barrier);

    std::vector<double> ref_x, ref_w;
    gauss_legendre(per_panel, ref_x, ref_w);

    std::vector<double> nodes, weights;
    nodes.reserve(edges.size() * per_panel);
    weights.reserve(edges.size() * per_panel);
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
        const double a = edges[p], b = edges[p + 1];
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (int i = 0; i < per_panel; ++i) {
            nodes.push_back(mid + half * ref_x[static_cast<std::size_t>(i)]);
            weights.push_back(half * ref_w[static_cast<std::size_t>(i)]);
        }
    }

    const auto n = static_cast<Eigen::Index>(nodes.size());
    const double shift = detail::kernel_log_shift(problem.amplitude, problem.regime);
    std::vector<double> log_nodes(nodes.size());
    for (std::size_t j = 0; j < nodes.size(); ++j) log_nodes[j] = std::log(nodes[j]);

    Eigen::MatrixXd system(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double log_xi =
            std::log(detail::xi_of(problem.procedure, nodes[static_cast<std::size_t>(i)]));
        for (Eigen::Index j = 0; j < n; ++j) {
            const double k = detail::kernel_density(log_xi, nodes[static_cast<std::size_t>(j)],
                                                    log_nodes[static_cast<std::size_t>(j)],
                                                    problem.amplitude, shift);
            system(i, j) = (i == j ? 1.0 : 0.0) - weights[static_cast<std::size_t>(j)] * k;
        }
    }

    const Eigen::VectorXd rhs = Eigen::VectorXd::Ones(n);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    const Eigen::VectorXd phi = lu.solve(rhs);
    if (!phi.allFinite()) throw std::runtime_error("fredholm solve: singular Nystrom system");

    ArlSolution sol;
    sol.nodes = std::move(nodes);
    sol.weights = std::move(weights);
    sol.phi_values.assign(phi.data(), phi.data() + n);
    sol.problem = problem;
    sol.residual_norm = (system * phi - rhs).cwiseAbs().maxCoeff();
    sol.phi_at_start =
        sol.phi_at(problem.procedure == FredholmProcedure::Cusum ? 1.0 : 0.0);
    return sol;
}

struct RefinedSolution {
    ArlSolution solution;
    bool converged = false;
    double last_relative_change = 0.0;
};

/// Doubles the grid until phi_at_start moves by less than rel_tol, capped.
inline RefinedSolution solve_refined(FredholmProblem problem, double rel_tol = 0.005,
                                     int max_grid = 8192) {
    ArlSolution current = solve(problem);
    RefinedSolution out{current, false, 0.0};
    while (problem.grid_size * 2 <= max_grid) {
        problem.grid_size *= 2;
        ArlSolution next = solve(problem);
        out.last_relative_change =
            std::abs(next.phi_at_start - out.solution.phi_at_start) / out.solution.phi_at_start;
        out.solution = std::move(next);
        if (out.last_relative_change < rel_tol) {
            out.converged = true;
            return out;
        }
    }
    return out;
}

/// E_0 tau at threshold H; equals the Lorden and supremum-delay values for
/// these procedures, both attained at a change at time zero.
inline double detection_delay(FredholmProblem problem) {
    problem.regime = DelayRegime::ZeroDelay;
    return solve(problem).phi_at_start;
}

}  // namespace seqdet
