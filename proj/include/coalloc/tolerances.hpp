#pragma once

// All numeric tolerances used across the library, pinned in one place.
// Tests compare against these same constants; do not scatter ad-hoc epsilons.

namespace coalloc::tol {

// Primal feasibility: constraint residuals, balance-of-injections checks,
// acceptance clamping.
inline constexpr double feasibility = 1e-9;

// Optimality: strong-duality gap, complementary slackness, the relative
// band used when tracing dual ranges at the optimal objective.
inline constexpr double optimality = 1e-7;

// Comparisons of reported values (welfare, acceptances, prices) in tests
// and in the verifier.
inline constexpr double comparison = 1e-6;

// Entrywise reproduction of closed-form PTDF tables.
inline constexpr double ptdf = 1e-12;

} // namespace coalloc::tol
