#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coalloc/errors.hpp"
#include "coalloc/tolerances.hpp"

// Dense bounded-variable primal simplex, maximization form.
//
//   maximize    c'x
//   subject to  a_r'x  {<=, =, >=}  b_r      for each row r
//               l <= x <= u                  (entries may be +-inf)
//
// Dual convention: the Lagrangian is c'x + sum_r y_r (b_r - a_r'x), so
// <= rows have y >= 0, >= rows have y <= 0, = rows are free.  The reduced
// cost of column j is d_j = c_j - sum_r y_r a_rj; at an optimum, columns at
// their lower bound have d <= 0, columns at their upper bound have d >= 0.
//
// Termination is exact: Optimal solutions carry verified feasibility,
// complementarity and duality-gap residuals; anything that cannot be
// certified within tolerance comes back as Failed rather than as a number.

namespace coalloc::lp {

inline constexpr double inf = std::numeric_limits<double>::infinity();

enum class Relation { LessEq, Equal, GreaterEq };
enum class Status { Optimal, Infeasible, Unbounded, Failed };

inline const char* status_name(Status s) {
    switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::Failed: return "failed";
    }
    return "?";
}

struct LinearProgram {
    struct Row {
        std::vector<std::pair<int, double>> terms; // (variable, coefficient)
        Relation rel = Relation::LessEq;
        double rhs = 0.0;
        std::string tag; // optional handle for dual lookups
    };

    std::vector<double> objective;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<Row> rows;

    int num_vars() const { return static_cast<int>(objective.size()); }
    int num_rows() const { return static_cast<int>(rows.size()); }

    int add_variable(double lo, double hi, double obj = 0.0) {
        if (std::isnan(lo) || std::isnan(hi) || !std::isfinite(obj))
            throw InputError("lp: variable bounds/objective must not be NaN");
        if (lo > hi) throw InputError("lp: variable lower bound exceeds upper bound");
        lower.push_back(lo);
        upper.push_back(hi);
        objective.push_back(obj);
        return num_vars() - 1;
    }

    void set_objective(int var, double obj) {
        if (var < 0 || var >= num_vars()) throw InputError("lp: unknown variable");
        if (!std::isfinite(obj)) throw InputError("lp: objective must be finite");
        objective[static_cast<std::size_t>(var)] = obj;
    }

    int add_constraint(std::vector<std::pair<int, double>> terms, Relation rel, double rhs,
                       std::string tag = "") {
        for (const auto& [j, a] : terms) {
            if (j < 0 || j >= num_vars())
                throw InputError("lp: constraint references unknown variable");
            if (!std::isfinite(a))
                throw InputError("lp: constraint coefficient must be finite");
        }
        if (!std::isfinite(rhs)) throw InputError("lp: constraint rhs must be finite");
        rows.push_back(Row{std::move(terms), rel, rhs, std::move(tag)});
        return num_rows() - 1;
    }

    // First row carrying the tag, -1 when absent.
    int row_by_tag(const std::string& tag) const {
        for (std::size_t r = 0; r < rows.size(); ++r)
            if (rows[r].tag == tag) return static_cast<int>(r);
        return -1;
    }
};

struct Solution {
    Status status = Status::Failed;
    double objective = 0.0;
    std::vector<double> x; // structural values, meaningful only when Optimal
    std::vector<double> y; // row duals, sign convention above
    double feasibility_residual = 0.0;
    double dual_residual = 0.0;
    double duality_gap = 0.0;
    int iterations = 0;

    bool ok() const { return status == Status::Optimal; }
};

namespace detail {

class Simplex {
public:
    explicit Simplex(const LinearProgram& p) : p_(p) {}

    Solution run() {
        build();
        if (nart_ > 0) {
            set_costs_phase1();
            refresh_duals();
            const Status s1 = iterate();
            if (s1 != Status::Optimal) return plain(Status::Failed);
            double art_sum = 0.0;
            for (int j = art_begin_; j < ncols_; ++j) art_sum += col_value(j);
            if (art_sum > tol::feasibility * bscale_) return plain(Status::Infeasible);
            retire_artificials();
        }
        set_costs_phase2();
        if (!refactor()) return plain(Status::Failed);
        const Status s2 = iterate();
        if (s2 == Status::Unbounded) return plain(Status::Unbounded);
        if (s2 != Status::Optimal) return plain(Status::Failed);
        return extract();
    }

private:
    enum ColState : std::uint8_t { kAtLower = 0, kAtUpper = 1, kFree = 2, kBasic = 3 };

    const LinearProgram& p_;
    int n_ = 0;     // structural columns
    int m_ = 0;     // rows
    int ncols_ = 0; // structural + slack + artificial
    int art_begin_ = 0;
    int nart_ = 0;

    Eigen::MatrixXd A_; // m x ncols, original coefficients (slack block = I)
    Eigen::VectorXd b_;
    Eigen::MatrixXd T_;    // m x ncols, Binv * A
    Eigen::VectorXd beta_; // basic values by row
    Eigen::VectorXd d_;    // reduced costs by column
    Eigen::VectorXd y_;    // row multipliers for the current cost vector
    std::vector<double> lo_, up_, cost_, xN_;
    std::vector<int> basis_; // row -> basic column
    std::vector<int> pos_;   // column -> row when basic, else -1
    std::vector<ColState> state_;

    double bscale_ = 1.0;
    double cscale_ = 1.0;
    double dtol_ = 1e-9;
    static constexpr double kPivTol = 1e-9;
    static constexpr double kThetaTie = 1e-10;
    int iters_ = 0;
    int max_iters_ = 0;
    int since_refactor_ = 0;

    double col_value(int j) const { return state_[j] == kBasic ? beta_(pos_[j]) : xN_[j]; }

    Solution plain(Status s) const {
        Solution out;
        out.status = s;
        out.iterations = iters_;
        return out;
    }

    void build() {
        n_ = p_.num_vars();
        m_ = p_.num_rows();

        Eigen::MatrixXd base = Eigen::MatrixXd::Zero(m_, n_ + m_);
        b_.resize(m_);
        lo_.assign(n_ + m_, 0.0);
        up_.assign(n_ + m_, 0.0);
        for (int j = 0; j < n_; ++j) {
            lo_[j] = p_.lower[j];
            up_[j] = p_.upper[j];
        }
        for (int r = 0; r < m_; ++r) {
            const auto& row = p_.rows[r];
            for (const auto& [j, a] : row.terms) base(r, j) += a;
            base(r, n_ + r) = 1.0;
            b_(r) = row.rhs;
            switch (row.rel) {
            case Relation::LessEq:
                lo_[n_ + r] = 0.0;
                up_[n_ + r] = inf;
                break;
            case Relation::GreaterEq:
                lo_[n_ + r] = -inf;
                up_[n_ + r] = 0.0;
                break;
            case Relation::Equal:
                lo_[n_ + r] = 0.0;
                up_[n_ + r] = 0.0;
                break;
            }
        }

        bscale_ = 1.0;
        for (int r = 0; r < m_; ++r) bscale_ = std::max(bscale_, 1.0 + std::abs(b_(r)));
        cscale_ = 1.0;
        for (int j = 0; j < n_; ++j) cscale_ = std::max(cscale_, 1.0 + std::abs(p_.objective[j]));

        // Nonbasic start values: finite lower bound first, else finite upper,
        // else free at zero.
        xN_.assign(n_ + m_, 0.0);
        state_.assign(n_ + m_, kAtLower);
        for (int j = 0; j < n_ + m_; ++j) {
            if (lo_[j] > -inf) {
                state_[j] = kAtLower;
                xN_[j] = lo_[j];
            } else if (up_[j] < inf) {
                state_[j] = kAtUpper;
                xN_[j] = up_[j];
            } else {
                state_[j] = kFree;
                xN_[j] = 0.0;
            }
        }

        // Choose the starting basis row by row: the slack if its implied value
        // fits its bounds, otherwise an artificial covering the gap.
        std::vector<double> resid(m_);
        std::vector<int> art_of(m_, -1);
        nart_ = 0;
        for (int r = 0; r < m_; ++r) {
            double act = 0.0;
            for (int j = 0; j < n_; ++j)
                if (base(r, j) != 0.0) act += base(r, j) * xN_[j];
            resid[r] = b_(r) - act; // value the slack would need
            if (resid[r] < lo_[n_ + r] - 0.0 || resid[r] > up_[n_ + r] + 0.0)
                art_of[r] = nart_++;
        }

        art_begin_ = n_ + m_;
        ncols_ = art_begin_ + nart_;
        A_ = Eigen::MatrixXd::Zero(m_, ncols_);
        A_.leftCols(n_ + m_) = base;
        lo_.resize(ncols_, 0.0);
        up_.resize(ncols_, inf);
        xN_.resize(ncols_, 0.0);
        state_.resize(ncols_, kAtLower);

        basis_.assign(m_, -1);
        pos_.assign(ncols_, -1);
        T_.resize(m_, ncols_);
        beta_.resize(m_);
        for (int r = 0; r < m_; ++r) {
            if (art_of[r] < 0) {
                basis_[r] = n_ + r;
                beta_(r) = resid[r];
                T_.row(r) = A_.row(r);
            } else {
                // Slack parks at the bound nearest its required value; the
                // artificial absorbs the remainder with a +-1 coefficient so
                // that its basic value is nonnegative.
                const int s = n_ + r;
                const double clamped = std::min(std::max(resid[r], lo_[s]), up_[s]);
                xN_[s] = clamped;
                state_[s] = (clamped == up_[s] && up_[s] < inf && lo_[s] != up_[s]) ? kAtUpper
                                                                                    : kAtLower;
                const double gap = resid[r] - clamped;
                const int a = art_begin_ + art_of[r];
                A_(r, a) = (gap >= 0.0) ? 1.0 : -1.0;
                basis_[r] = a;
                beta_(r) = std::abs(gap);
                T_.row(r) = A_.row(r) * A_(r, a); // Binv row is +-1 here
            }
            pos_[basis_[r]] = r;
            state_[basis_[r]] = kBasic;
        }

        cost_.assign(ncols_, 0.0);
        max_iters_ = 1000 + 20 * (m_ + ncols_);
        iters_ = 0;
    }

    void set_costs_phase1() {
        std::fill(cost_.begin(), cost_.end(), 0.0);
        for (int j = art_begin_; j < ncols_; ++j) cost_[j] = -1.0;
        dtol_ = 1e-9 * 2.0;
    }

    void set_costs_phase2() {
        std::fill(cost_.begin(), cost_.end(), 0.0);
        for (int j = 0; j < n_; ++j) cost_[j] = p_.objective[j];
        dtol_ = 1e-9 * cscale_;
    }

    // y = Binv' c_B read from the slack block of T_, then d = c - A'y.
    void refresh_duals() {
        y_.resize(m_);
        for (int i = 0; i < m_; ++i) {
            double acc = 0.0;
            for (int r = 0; r < m_; ++r) acc += cost_[basis_[r]] * T_(r, n_ + i);
            y_(i) = acc;
        }
        Eigen::VectorXd c(ncols_);
        for (int j = 0; j < ncols_; ++j) c(j) = cost_[j];
        d_ = c - A_.transpose() * y_;
        for (int r = 0; r < m_; ++r) d_(basis_[r]) = 0.0;
    }

    // Rebuild T_, beta_ and duals from the original data.  Returns false on a
    // numerically singular basis.
    bool refactor() {
        Eigen::MatrixXd B(m_, m_);
        for (int r = 0; r < m_; ++r) B.col(r) = A_.col(basis_[r]);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
        if (m_ > 0 && !lu.isInvertible()) return false;

        Eigen::VectorXd v = Eigen::VectorXd::Zero(ncols_);
        for (int j = 0; j < ncols_; ++j)
            if (state_[j] != kBasic && xN_[j] != 0.0) v(j) = xN_[j];
        // T_ = Binv A is solved columnwise; row permutations inside LU keep
        // the slack block equal to Binv, which refresh_duals relies on.
        T_ = lu.solve(A_);
        beta_ = lu.solve(b_ - A_ * v);
        // Re-associate basic values with their rows' basic columns.
        refresh_duals();
        since_refactor_ = 0;
        return true;
    }

    void retire_artificials() {
        // Pivot leftover basic artificials onto any usable column; rows that
        // offer none are redundant and keep a fixed artificial at zero.
        for (int r = 0; r < m_; ++r) {
            if (basis_[r] < art_begin_) continue;
            int pick = -1;
            double best = kPivTol;
            for (int j = 0; j < art_begin_; ++j) {
                if (state_[j] == kBasic || lo_[j] == up_[j]) continue;
                if (std::abs(T_(r, j)) > best) {
                    best = std::abs(T_(r, j));
                    pick = j;
                }
            }
            if (pick >= 0) apply_pivot(pick, r, 0.0, +1, false);
        }
        for (int j = art_begin_; j < ncols_; ++j) {
            lo_[j] = 0.0;
            up_[j] = 0.0;
            if (state_[j] != kBasic) {
                state_[j] = kAtLower;
                xN_[j] = 0.0;
            }
        }
    }

    Status iterate() {
        bool bland = false;
        int degen_streak = 0;
        for (;;) {
            if (++iters_ > max_iters_) return Status::Failed;
            if (++since_refactor_ >= 100) {
                if (!refactor()) return Status::Failed;
            }

            // Pricing: Dantzig by default, Bland once degeneracy drags on.
            int e = -1, dir = 0;
            double best = 0.0;
            for (int j = 0; j < ncols_; ++j) {
                if (state_[j] == kBasic || lo_[j] == up_[j]) continue;
                const double dj = d_(j);
                int cdir = 0;
                if (state_[j] == kAtLower) {
                    if (dj > dtol_) cdir = +1;
                } else if (state_[j] == kAtUpper) {
                    if (dj < -dtol_) cdir = -1;
                } else { // free
                    if (dj > dtol_)
                        cdir = +1;
                    else if (dj < -dtol_)
                        cdir = -1;
                }
                if (cdir == 0) continue;
                if (bland) {
                    e = j;
                    dir = cdir;
                    break;
                }
                const double score = std::abs(dj);
                if (score > best) {
                    best = score;
                    e = j;
                    dir = cdir;
                }
            }
            if (e < 0) return Status::Optimal;

            // Ratio test over basic columns, plus the bound-flip option.
            double row_theta = inf;
            int leave_row = -1;
            bool to_upper = false;
            double best_piv = 0.0;
            for (int r = 0; r < m_; ++r) {
                const double t = T_(r, e);
                const double delta = dir * t;
                if (std::abs(delta) <= kPivTol) continue;
                const int bc = basis_[r];
                double limit;
                bool up_hit;
                if (delta > 0.0) {
                    if (lo_[bc] == -inf) continue;
                    limit = (beta_(r) - lo_[bc]) / delta;
                    up_hit = false;
                } else {
                    if (up_[bc] == inf) continue;
                    limit = (beta_(r) - up_[bc]) / delta;
                    up_hit = true;
                }
                if (limit < 0.0) limit = 0.0;
                bool take = false;
                if (limit < row_theta - kThetaTie) {
                    take = true;
                } else if (limit <= row_theta + kThetaTie && leave_row >= 0) {
                    if (bland)
                        take = bc < basis_[leave_row];
                    else
                        take = std::abs(t) > best_piv;
                } else if (leave_row < 0 && limit < inf) {
                    take = true;
                }
                if (take) {
                    row_theta = std::min(row_theta, limit);
                    leave_row = r;
                    to_upper = up_hit;
                    best_piv = std::abs(t);
                }
            }

            const bool can_flip = lo_[e] > -inf && up_[e] < inf;
            const double flip_theta = can_flip ? up_[e] - lo_[e] : inf;

            double theta;
            bool flip;
            if (leave_row < 0 || flip_theta < row_theta - kThetaTie) {
                if (!can_flip && leave_row < 0) return Status::Unbounded;
                theta = flip_theta;
                flip = true;
            } else {
                theta = row_theta;
                flip = false;
            }

            if (theta <= kThetaTie) {
                if (++degen_streak > 400) bland = true;
            } else {
                degen_streak = 0;
            }

            if (flip) {
                beta_ -= (dir * theta) * T_.col(e);
                state_[e] = (state_[e] == kAtLower) ? kAtUpper : kAtLower;
                xN_[e] = (state_[e] == kAtLower) ? lo_[e] : up_[e];
            } else {
                apply_pivot(e, leave_row, theta, dir, to_upper);
            }
        }
    }

    void apply_pivot(int e, int r, double theta, int dir, bool leave_to_upper) {
        const Eigen::VectorXd colE = T_.col(e);
        const double enter_val = xN_[e] + dir * theta;
        beta_ -= (dir * theta) * colE;
        beta_(r) = enter_val;

        const int leave = basis_[r];
        state_[leave] = leave_to_upper ? kAtUpper : kAtLower;
        xN_[leave] = leave_to_upper ? up_[leave] : lo_[leave];
        pos_[leave] = -1;

        basis_[r] = e;
        pos_[e] = r;
        state_[e] = kBasic;

        const double piv = colE(r);
        T_.row(r) /= piv;
        Eigen::RowVectorXd rowR = T_.row(r);
        Eigen::VectorXd mult = colE;
        mult(r) = 0.0;
        T_.noalias() -= mult * rowR;
        T_.row(r) = rowR;

        const double de = d_(e);
        if (de != 0.0) d_ -= de * rowR.transpose();
        d_(e) = 0.0;
    }

    Solution extract() {
        if (!refactor()) return plain(Status::Failed);

        Eigen::VectorXd v(ncols_);
        for (int j = 0; j < ncols_; ++j) v(j) = col_value(j);

        // Feasibility over the original rows and bounds, before clamping.
        double feas = 0.0;
        for (int r = 0; r < m_; ++r) {
            double act = 0.0;
            for (const auto& [j, a] : p_.rows[r].terms) act += a * v(j);
            const double scale = 1.0 + std::abs(b_(r));
            double viol = 0.0;
            switch (p_.rows[r].rel) {
            case Relation::LessEq: viol = act - b_(r); break;
            case Relation::GreaterEq: viol = b_(r) - act; break;
            case Relation::Equal: viol = std::abs(act - b_(r)); break;
            }
            feas = std::max(feas, viol / scale);
        }
        for (int j = 0; j < n_; ++j) {
            if (lo_[j] > -inf)
                feas = std::max(feas, (lo_[j] - v(j)) / (1.0 + std::abs(lo_[j])));
            if (up_[j] < inf)
                feas = std::max(feas, (v(j) - up_[j]) / (1.0 + std::abs(up_[j])));
        }

        // Dual feasibility / complementarity and the bounded-dual objective.
        double dual_viol = 0.0;
        double dual_obj = y_.dot(b_);
        for (int j = 0; j < ncols_; ++j) {
            if (j >= art_begin_) continue; // fixed at zero, no dual role
            const double dj = d_(j);
            if (state_[j] == kBasic) {
                dual_viol = std::max(dual_viol, std::abs(dj));
                continue;
            }
            if (state_[j] == kAtLower && lo_[j] != up_[j])
                dual_viol = std::max(dual_viol, dj > 0.0 && up_[j] == inf ? dj : 0.0);
            if (state_[j] == kAtUpper)
                dual_viol = std::max(dual_viol, dj < 0.0 && lo_[j] == -inf ? -dj : 0.0);
            if (state_[j] == kFree) dual_viol = std::max(dual_viol, std::abs(dj));
            if (up_[j] < inf && dj > 0.0) dual_obj += dj * up_[j];
            if (lo_[j] > -inf && dj < 0.0) dual_obj += dj * lo_[j];
        }

        Solution out;
        out.iterations = iters_;
        out.x.resize(n_);
        for (int j = 0; j < n_; ++j) {
            double xj = v(j);
            if (lo_[j] > -inf) xj = std::max(xj, lo_[j]);
            if (up_[j] < inf) xj = std::min(xj, up_[j]);
            out.x[j] = xj;
        }
        double obj = 0.0;
        for (int j = 0; j < n_; ++j) obj += p_.objective[j] * out.x[j];
        out.objective = obj;
        out.y.assign(y_.data(), y_.data() + m_);
        out.feasibility_residual = feas;
        out.dual_residual = dual_viol;
        out.duality_gap = std::abs(dual_obj - obj);

        const bool certified = feas <= tol::feasibility &&
                               dual_viol <= tol::optimality * cscale_ &&
                               out.duality_gap <= tol::optimality * (1.0 + std::abs(obj));
        out.status = certified ? Status::Optimal : Status::Failed;
        return out;
    }
};

} // namespace detail

inline Solution solve(const LinearProgram& p) {
    detail::Simplex s(p);
    return s.run();
}

// Dual value of a tagged row in an optimal solution.
inline double dual_of(const LinearProgram& p, const Solution& sol, const std::string& tag) {
    if (!sol.ok()) throw SolverError("dual_of requires an optimal solution");
    const int r = p.row_by_tag(tag);
    if (r < 0) throw InputError("no constraint tagged '" + tag + "'");
    return sol.y[static_cast<std::size_t>(r)];
}

struct Interval {
    double lo = -inf;
    double hi = inf;
};

// Range of a tagged row's dual over the (near-)optimal dual polyhedron: the
// explicit dual program is constrained to optimal dual objective within
// tol::optimality relative, then the target multiplier is pushed both ways.
// Unbounded directions come back as +-inf.
inline Interval dual_range(const LinearProgram& p, const Solution& sol, const std::string& tag) {
    if (!sol.ok()) throw SolverError("dual_range requires an optimal solution");
    const int target = p.row_by_tag(tag);
    if (target < 0) throw InputError("no constraint tagged '" + tag + "'");

    const int m = p.num_rows();
    const int n = p.num_vars();

    LinearProgram dual;
    std::vector<int> yvar(m);
    for (int r = 0; r < m; ++r) {
        switch (p.rows[r].rel) {
        case Relation::LessEq: yvar[r] = dual.add_variable(0.0, inf); break;
        case Relation::GreaterEq: yvar[r] = dual.add_variable(-inf, 0.0); break;
        case Relation::Equal: yvar[r] = dual.add_variable(-inf, inf); break;
        }
    }
    std::vector<int> wplus(n, -1), wminus(n, -1);
    for (int j = 0; j < n; ++j) {
        if (p.upper[j] < inf) wplus[j] = dual.add_variable(0.0, inf);
        if (p.lower[j] > -inf) wminus[j] = dual.add_variable(0.0, inf);
    }

    // Stationarity per primal variable: sum_r a_rj y_r + w+_j - w-_j = c_j.
    std::vector<std::vector<std::pair<int, double>>> cols(n);
    for (int r = 0; r < m; ++r)
        for (const auto& [j, a] : p.rows[r].terms)
            if (a != 0.0) cols[j].push_back({yvar[r], a});
    for (int j = 0; j < n; ++j) {
        auto terms = cols[j];
        if (wplus[j] >= 0) terms.push_back({wplus[j], 1.0});
        if (wminus[j] >= 0) terms.push_back({wminus[j], -1.0});
        dual.add_constraint(std::move(terms), Relation::Equal, p.objective[j]);
    }

    // Near-optimality of the dual objective y'b + w+'u - w-'l.
    std::vector<std::pair<int, double>> objrow;
    for (int r = 0; r < m; ++r)
        if (p.rows[r].rhs != 0.0) objrow.push_back({yvar[r], p.rows[r].rhs});
    for (int j = 0; j < n; ++j) {
        if (wplus[j] >= 0 && p.upper[j] != 0.0) objrow.push_back({wplus[j], p.upper[j]});
        if (wminus[j] >= 0 && p.lower[j] != 0.0) objrow.push_back({wminus[j], -p.lower[j]});
    }
    const double band = tol::optimality * std::max(1.0, std::abs(sol.objective));
    dual.add_constraint(std::move(objrow), Relation::LessEq, sol.objective + band);

    Interval out;
    dual.objective[yvar[target]] = 1.0;
    Solution hi = solve(dual);
    if (hi.ok())
        out.hi = hi.objective;
    else if (hi.status == Status::Unbounded)
        out.hi = inf;
    else
        throw SolverError(std::string("dual_range: upper trace ") + status_name(hi.status));

    dual.objective[yvar[target]] = -1.0;
    Solution lo = solve(dual);
    if (lo.ok())
        out.lo = -lo.objective;
    else if (lo.status == Status::Unbounded)
        out.lo = -inf;
    else
        throw SolverError(std::string("dual_range: lower trace ") + status_name(lo.status));

    return out;
}

} // namespace coalloc::lp
