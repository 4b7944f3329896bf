#include "sqmatch/qap.hpp"

#include "sqmatch/common.hpp"
#include "sqmatch/io_util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace sqmatch {

int SparsityPattern::anchor_count() const {
    int k = 0;
    for (int t : anchor_of_row)
        if (t >= 0) ++k;
    return k;
}

std::vector<int> SparsityPattern::col_free_counts() const {
    std::vector<int> cnt(n2, 0);
    for (int t : col_idx) cnt[t]++;
    return cnt;
}

std::vector<double> SparsityPattern::col_anchor_mass() const {
    std::vector<double> mass(n2, 0.0);
    for (int t : anchor_of_row)
        if (t >= 0) mass[t] += 1.0;
    return mass;
}

void SparsityPattern::validate_total() const {
    for (int s = 0; s < n1; ++s)
        if (!row_active(s))
            throw Error("qap.infeasible_pattern",
                        "row " + std::to_string(s) + " has no admissible entries");
    std::vector<char> covered(n2, 0);
    for (int t : col_idx) covered[t] = 1;
    for (int t : anchor_of_row)
        if (t >= 0) covered[t] = 1;
    for (int t = 0; t < n2; ++t)
        if (!covered[t])
            throw Error("qap.infeasible_pattern",
                        "column " + std::to_string(t) + " has no admissible entries");
}

std::shared_ptr<SparsityPattern>
SparsityPattern::from_entries(int n1, int n2, std::vector<std::pair<int, int>> free_entries,
                              std::vector<std::pair<int, int>> anchors) {
    auto p = std::make_shared<SparsityPattern>();
    p->n1 = n1;
    p->n2 = n2;
    p->anchor_of_row.assign(n1, -1);
    for (const auto& [s, t] : anchors) {
        if (s < 0 || s >= n1 || t < 0 || t >= n2)
            throw Error("qap.bad_pattern", "anchor entry out of range");
        if (p->anchor_of_row[s] >= 0)
            throw Error("qap.bad_pattern", "duplicate anchor source " + std::to_string(s));
        p->anchor_of_row[s] = t;
    }
    std::sort(free_entries.begin(), free_entries.end());
    free_entries.erase(std::unique(free_entries.begin(), free_entries.end()),
                       free_entries.end());
    p->row_ptr.assign(n1 + 1, 0);
    for (const auto& [s, t] : free_entries) {
        if (s < 0 || s >= n1 || t < 0 || t >= n2)
            throw Error("qap.bad_pattern", "free entry out of range");
        if (p->anchor_of_row[s] >= 0)
            throw Error("qap.bad_pattern",
                        "free entry in anchored row " + std::to_string(s));
        p->row_ptr[s + 1]++;
    }
    for (int s = 0; s < n1; ++s) p->row_ptr[s + 1] += p->row_ptr[s];
    p->col_idx.resize(free_entries.size());
    for (size_t i = 0; i < free_entries.size(); ++i)
        p->col_idx[i] = free_entries[i].second; // already row-major sorted
    return p;
}

double TransportPlan::value_at(int s, int t) const {
    if (pattern->anchor_of_row[s] == t) return 1.0;
    auto lo = pattern->col_idx.begin() + pattern->row_ptr[s];
    auto hi = pattern->col_idx.begin() + pattern->row_ptr[s + 1];
    auto it = std::lower_bound(lo, hi, t);
    if (it == hi || *it != t) return 0.0;
    return values[it - pattern->col_idx.begin()];
}

void QapProblem::check_dimensions(const SparsityPattern& pattern) const {
    if (!S1 || !S2 || !M1 || !M2) throw Error("qap.bad_problem", "missing operator");
    if (S1->n != pattern.n1 || M1->n != pattern.n1 || S2->n != pattern.n2 ||
        M2->n != pattern.n2)
        throw Error("qap.dimension_mismatch", "operator/pattern dimensions disagree");
    if (mu < 0) throw Error("qap.bad_problem", "mu must be nonnegative");
}

// ---------------------------------------------------------------------------
// Projection

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

} // namespace

Projector::Projector(std::shared_ptr<const SparsityPattern> pattern)
    : pattern_(std::move(pattern)) {
    const auto& p = *pattern_;
    row_cnt_.resize(p.n1);
    for (int s = 0; s < p.n1; ++s) row_cnt_[s] = p.row_free_count(s);
    col_cnt_ = p.col_free_counts();

    UnionFind uf(p.n1 + p.n2);
    for (int s = 0; s < p.n1; ++s)
        for (int e = p.row_ptr[s]; e < p.row_ptr[s + 1]; ++e)
            uf.unite(s, p.n1 + p.col_idx[e]);

    component_.assign(p.n1 + p.n2, -1);
    std::vector<int> comp_rows, comp_cols, comp_nnz;
    std::vector<double> comp_d;
    std::vector<int> root_to_comp(p.n1 + p.n2, -1);
    auto comp_of = [&](int node) {
        int r = uf.find(node);
        if (root_to_comp[r] < 0) {
            root_to_comp[r] = static_cast<int>(comp_rows.size());
            comp_rows.push_back(0);
            comp_cols.push_back(0);
            comp_nnz.push_back(0);
            comp_d.push_back(0.0);
        }
        return root_to_comp[r];
    };

    std::vector<double> anchor_mass = p.col_anchor_mass();
    double col_base = p.n2 > 0 ? static_cast<double>(p.n1) / p.n2 : 0.0;
    for (int s = 0; s < p.n1; ++s)
        if (row_cnt_[s] > 0) {
            int c = comp_of(s);
            component_[s] = c;
            comp_rows[c]++;
            comp_nnz[c] += row_cnt_[s];
        }
    col_target_.assign(p.n2, 0.0);
    for (int t = 0; t < p.n2; ++t)
        if (col_cnt_[t] > 0) {
            int c = comp_of(p.n1 + t);
            component_[p.n1 + t] = c;
            comp_cols[c]++;
            comp_d[c] += std::max(col_base - anchor_mass[t], 0.0);
        }
    // rebalance column targets per component so the equality constraints
    // stay consistent with unit row sums
    std::vector<double> comp_scale(comp_rows.size(), 0.0);
    for (size_t c = 0; c < comp_rows.size(); ++c)
        if (comp_d[c] > 1e-12)
            comp_scale[c] = static_cast<double>(comp_rows[c]) / comp_d[c];
    for (int t = 0; t < p.n2; ++t)
        if (col_cnt_[t] > 0) {
            int c = component_[p.n1 + t];
            double d = std::max(col_base - anchor_mass[t], 0.0);
            col_target_[t] = comp_d[c] > 1e-12
                                 ? d * comp_scale[c]
                                 : static_cast<double>(comp_rows[c]) / comp_cols[c];
        }
    comp_inv_nnz_.resize(comp_rows.size());
    for (size_t c = 0; c < comp_rows.size(); ++c)
        comp_inv_nnz_[c] = comp_nnz[c] > 0 ? 1.0 / comp_nnz[c] : 0.0;
}

void Projector::marginals(std::span<const double> v, std::vector<double>& row_sum,
                          std::vector<double>& col_sum) const {
    const auto& p = *pattern_;
    row_sum.assign(p.n1, 0.0);
    col_sum.assign(p.n2, 0.0);
    // compensated summation: on large patterns plain accumulation leaves a
    // rounding floor near n*eps*|v| that the dual correction cannot beat
    std::vector<double> col_comp(p.n2, 0.0);
    for (int s = 0; s < p.n1; ++s) {
        double rsum = 0.0, rcomp = 0.0;
        for (int e = p.row_ptr[s]; e < p.row_ptr[s + 1]; ++e) {
            double x = v[e];
            double yr = x - rcomp;
            double tr = rsum + yr;
            rcomp = (tr - rsum) - yr;
            rsum = tr;
            int t = p.col_idx[e];
            double yc = x - col_comp[t];
            double tc = col_sum[t] + yc;
            col_comp[t] = (tc - col_sum[t]) - yc;
            col_sum[t] = tc;
        }
        row_sum[s] = rsum;
    }
}

double Projector::residual(std::span<const double> v) const {
    const auto& p = *pattern_;
    std::vector<double> rs, cs;
    marginals(v, rs, cs);
    double r = 0.0;
    for (int s = 0; s < p.n1; ++s)
        if (row_cnt_[s] > 0) r = std::max(r, std::abs(rs[s] - 1.0));
    for (int t = 0; t < p.n2; ++t)
        if (col_cnt_[t] > 0) r = std::max(r, std::abs(cs[t] - col_target_[t]));
    return r;
}

void Projector::apply(std::span<const double> y, std::span<double> out) {
    const auto& p = *pattern_;
    used_fallback_ = false;
    // y and out may alias, and the fallback needs the original input after
    // the closed-form pass has written through out
    std::vector<double> yc(y.begin(), y.end());
    std::vector<double> rs, cs;
    marginals(yc, rs, cs);

    std::vector<double> comp_exc(comp_inv_nnz_.size(), 0.0);
    for (int s = 0; s < p.n1; ++s)
        if (row_cnt_[s] > 0) comp_exc[component_[s]] += rs[s] - 1.0;

    // closed-form Hadamard update (exact on component-regular patterns)
    for (int s = 0; s < p.n1; ++s) {
        if (row_cnt_[s] == 0) continue;
        double row_corr = (rs[s] - 1.0) / row_cnt_[s];
        double comp_corr = comp_exc[component_[s]] * comp_inv_nnz_[component_[s]];
        for (int e = p.row_ptr[s]; e < p.row_ptr[s + 1]; ++e) {
            int t = p.col_idx[e];
            out[e] = yc[e] - row_corr - (cs[t] - col_target_[t]) / col_cnt_[t] + comp_corr;
        }
    }
    last_residual_ = residual(out);
    if (last_residual_ <= 1e-9) return;

    // iterative KKT solve: D = Y - lambda_s - mu_t with the dual system
    //   [diag(r)  B ] [lambda]   [row excess]
    //   [B^T  diag(c)] [mu   ] = [col excess]
    // solved by Jacobi-preconditioned CG (singular but consistent).
    used_fallback_ = true;
    const int nr = p.n1, nc = p.n2, m = nr + nc;
    std::vector<double> g(m, 0.0);

    // a small Tikhonov shift keeps the (per-component singular) system
    // positive definite for CG; the refinement passes remove its bias
    const double shift = 1e-8;
    auto matvec = [&](const std::vector<double>& z, std::vector<double>& kz) {
        std::fill(kz.begin(), kz.end(), 0.0);
        for (int s = 0; s < nr; ++s) {
            if (row_cnt_[s] == 0) continue;
            double zs = z[s];
            double acc = (row_cnt_[s] + shift) * zs;
            for (int e = p.row_ptr[s]; e < p.row_ptr[s + 1]; ++e) {
                int t = p.col_idx[e];
                acc += z[nr + t];
                kz[nr + t] += zs;
            }
            kz[s] = acc;
        }
        for (int t = 0; t < nc; ++t)
            if (col_cnt_[t] > 0) kz[nr + t] += (col_cnt_[t] + shift) * z[nr + t];
    };
    auto precond = [&](const std::vector<double>& r, std::vector<double>& z) {
        for (int s = 0; s < nr; ++s) z[s] = row_cnt_[s] > 0 ? r[s] / row_cnt_[s] : 0.0;
        for (int t = 0; t < nc; ++t)
            z[nr + t] = col_cnt_[t] > 0 ? r[nr + t] / col_cnt_[t] : 0.0;
    };

    // iterative refinement: each pass CG-solves for the dual correction of
    // the remaining marginal deficit and subtracts it from out
    std::vector<double> x(m), r(m), z(m), q(m), d(m);
    const int max_iter = std::max(500, 20 * m);
    // per-component nullspace of K: +1 on active rows, -1 on active columns
    const int ncomp = static_cast<int>(comp_inv_nnz_.size());
    std::vector<double> comp_size(ncomp, 0.0);
    for (int i = 0; i < m; ++i)
        if (component_[i] >= 0) comp_size[component_[i]] += 1.0;
    std::vector<double> null_dot(ncomp);

    for (int pass = 0; pass < 8 && last_residual_ > 1e-10; ++pass) {
        marginals(out, rs, cs);
        for (int s = 0; s < nr; ++s) g[s] = row_cnt_[s] > 0 ? rs[s] - 1.0 : 0.0;
        for (int t = 0; t < nc; ++t)
            g[nr + t] = col_cnt_[t] > 0 ? cs[t] - col_target_[t] : 0.0;

        // deflate the (rounding-level) inconsistent part of the deficit
        std::fill(null_dot.begin(), null_dot.end(), 0.0);
        for (int s = 0; s < nr; ++s)
            if (component_[s] >= 0) null_dot[component_[s]] += g[s];
        for (int t = 0; t < nc; ++t)
            if (component_[nr + t] >= 0) null_dot[component_[nr + t]] -= g[nr + t];
        for (int s = 0; s < nr; ++s)
            if (component_[s] >= 0)
                g[s] -= null_dot[component_[s]] / comp_size[component_[s]];
        for (int t = 0; t < nc; ++t)
            if (component_[nr + t] >= 0)
                g[nr + t] += null_dot[component_[nr + t]] / comp_size[component_[nr + t]];

        std::fill(x.begin(), x.end(), 0.0);
        r = g;
        precond(r, z);
        d = z;
        double rz = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
        double gnorm = std::sqrt(std::inner_product(g.begin(), g.end(), g.begin(), 0.0));
        double tol = 1e-14 * std::max(1.0, gnorm);
        for (int it = 0; it < max_iter; ++it) {
            double rnorm =
                std::sqrt(std::inner_product(r.begin(), r.end(), r.begin(), 0.0));
            if (rnorm <= tol) break;
            matvec(d, q);
            double dq = std::inner_product(d.begin(), d.end(), q.begin(), 0.0);
            if (dq <= 0) break; // nullspace direction; consistent system is solved
            double alpha = rz / dq;
            for (int i = 0; i < m; ++i) {
                x[i] += alpha * d[i];
                r[i] -= alpha * q[i];
            }
            precond(r, z);
            double rz_new = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
            double beta = rz_new / rz;
            rz = rz_new;
            for (int i = 0; i < m; ++i) d[i] = z[i] + beta * d[i];
        }
        for (int s = 0; s < nr; ++s)
            for (int e = p.row_ptr[s]; e < p.row_ptr[s + 1]; ++e)
                out[e] -= x[s] + x[nr + p.col_idx[e]];
        double updated = residual(out);
        if (updated >= last_residual_) {
            // CG breakdown (near-singular system at this scale); revert
            for (int s = 0; s < nr; ++s)
                for (int e = p.row_ptr[s]; e < p.row_ptr[s + 1]; ++e)
                    out[e] += x[s] + x[nr + p.col_idx[e]];
            break;
        }
        last_residual_ = updated;
    }
    double vmax = 0.0;
    for (int e = 0; e < p.row_ptr[nr]; ++e) vmax = std::max(vmax, std::abs(out[e]));
    if (last_residual_ > 1e-9 * std::max(1.0, vmax))
        throw Error("qap.projection_failed",
                    "marginal residual " + format_double(last_residual_) +
                        " after iterative KKT refinement (pattern " + std::to_string(nr) +
                        "x" + std::to_string(nc) + ", " + std::to_string(p.free_count()) +
                        " free entries, max |value| " + format_double(vmax) + ")");
}

TransportPlan project(const std::vector<double>& y,
                      std::shared_ptr<const SparsityPattern> pattern) {
    pattern->validate_total();
    TransportPlan plan;
    plan.pattern = pattern;
    plan.values.resize(y.size());
    Projector proj(pattern);
    proj.apply(y, plan.values);
    return plan;
}

// ---------------------------------------------------------------------------
// Objective / gradient

QapEngine::QapEngine(const QapProblem& problem, std::shared_ptr<const SparsityPattern> pattern)
    : problem_(problem), pattern_(std::move(pattern)) {
    problem_.check_dimensions(*pattern_);
    scratch_.assign(std::max(pattern_->n1, pattern_->n2), 0.0);
    touched_.reserve(1024);
}

void QapEngine::residual_matrix(std::span<const double> values, const SparseOperator& A1,
                                const SparseOperator& A2, Csr& R) {
    const auto& p = *pattern_;
    R.ptr.assign(p.n1 + 1, 0);
    R.col.clear();
    R.val.clear();
    auto for_each_d_row = [&](int row, auto&& fn) {
        int a = p.anchor_of_row[row];
        if (a >= 0) fn(a, 1.0);
        for (int e = p.row_ptr[row]; e < p.row_ptr[row + 1]; ++e)
            fn(p.col_idx[e], values[e]);
    };
    for (int s = 0; s < p.n1; ++s) {
        touched_.clear();
        // (A1 D)(s,:) — rows of D at mesh-1 neighbors of s
        for (int e1 = A1.offsets[s]; e1 < A1.offsets[s + 1]; ++e1) {
            int k = A1.cols[e1];
            double a = A1.vals[e1];
            for_each_d_row(k, [&](int t, double v) {
                if (scratch_[t] == 0.0) touched_.push_back(t);
                scratch_[t] += a * v;
            });
        }
        // -(D A2)(s,:)
        for_each_d_row(s, [&](int t, double v) {
            for (int e2 = A2.offsets[t]; e2 < A2.offsets[t + 1]; ++e2) {
                int j = A2.cols[e2];
                if (scratch_[j] == 0.0) touched_.push_back(j);
                scratch_[j] -= v * A2.vals[e2];
            }
        });
        for (int t : touched_) {
            double v = scratch_[t];
            scratch_[t] = 0.0;
            if (v != 0.0) {
                R.col.push_back(t);
                R.val.push_back(v);
            }
        }
        R.ptr[s + 1] = static_cast<int>(R.col.size());
    }
}

void QapEngine::gradient_term(const Csr& R, const SparseOperator& A1, const SparseOperator& A2,
                              double weight, std::span<double> grad) {
    const auto& p = *pattern_;
    for (int s = 0; s < p.n1; ++s) {
        if (p.row_free_count(s) == 0) continue; // anchors are fixed
        touched_.clear();
        // (A1 R)(s,:)
        for (int e1 = A1.offsets[s]; e1 < A1.offsets[s + 1]; ++e1) {
            int k = A1.cols[e1];
            double a = A1.vals[e1];
            for (int e = R.ptr[k]; e < R.ptr[k + 1]; ++e) {
                int t = R.col[e];
                if (scratch_[t] == 0.0) touched_.push_back(t);
                scratch_[t] += a * R.val[e];
            }
        }
        // -(R A2)(s,:)
        for (int e = R.ptr[s]; e < R.ptr[s + 1]; ++e) {
            int t = R.col[e];
            double v = R.val[e];
            for (int e2 = A2.offsets[t]; e2 < A2.offsets[t + 1]; ++e2) {
                int j = A2.cols[e2];
                if (scratch_[j] == 0.0) touched_.push_back(j);
                scratch_[j] -= v * A2.vals[e2];
            }
        }
        for (int e = p.row_ptr[s]; e < p.row_ptr[s + 1]; ++e)
            grad[e] += weight * scratch_[p.col_idx[e]];
        for (int t : touched_) scratch_[t] = 0.0;
    }
}

double QapEngine::objective(std::span<const double> values) {
    residual_matrix(values, *problem_.S1, *problem_.S2, Rs_);
    residual_matrix(values, *problem_.M1, *problem_.M2, Rm_);
    double fs = 0.0, fm = 0.0;
    for (double v : Rs_.val) fs += v * v;
    for (double v : Rm_.val) fm += v * v;
    return 0.5 * fs + 0.5 * problem_.mu * fm;
}

double QapEngine::objective_and_gradient(std::span<const double> values,
                                         std::span<double> grad) {
    double f = objective(values);
    std::fill(grad.begin(), grad.end(), 0.0);
    gradient_term(Rs_, *problem_.S1, *problem_.S2, 1.0, grad);
    gradient_term(Rm_, *problem_.M1, *problem_.M2, problem_.mu, grad);
    return f;
}

double qap_objective(const TransportPlan& plan, const QapProblem& problem) {
    QapEngine engine(problem, plan.pattern);
    return engine.objective(plan.values);
}

TransportPlan qap_gradient(const TransportPlan& plan, const QapProblem& problem) {
    QapEngine engine(problem, plan.pattern);
    TransportPlan grad;
    grad.pattern = plan.pattern;
    grad.values.assign(plan.values.size(), 0.0);
    engine.objective_and_gradient(plan.values, grad.values);
    return grad;
}

// ---------------------------------------------------------------------------
// Projected gradient with BB steps

SolveResult solve(const QapProblem& problem, const TransportPlan& d0,
                  const SolveOptions& options) {
    QapEngine engine(problem, d0.pattern);
    Projector projector(d0.pattern);
    const int nfree = d0.pattern->free_count();

    std::vector<double> vals = d0.values, grad(nfree), new_vals(nfree), new_grad(nfree);
    double f = engine.objective_and_gradient(vals, grad);
    if (!std::isfinite(f))
        throw Error("qap.diverged", "objective not finite at the initial plan");

    SolveResult result;
    result.plan.pattern = d0.pattern;
    result.plan.values = vals;
    result.objective = f;
    result.log.push_back({0, f, options.step0, 0.0});
    if (f == 0.0 || nfree == 0) return result;

    double alpha = options.step0;
    const double alpha_hi = 1e3 * options.step0;
    // nonmonotone (GLL) reference window: BB steps may go uphill, but a step
    // above the recent maximum is rejected and backtracked, below the BB
    // clamp if needed, since step0 is calibrated for a different operator
    // scale than some instances have
    constexpr int window = 5;
    std::vector<double> recent{f};
    for (int k = 1; k <= options.max_iters; ++k) {
        double fref = *std::max_element(recent.begin(), recent.end());
        double f_new = 0.0;
        for (int bt = 0;; ++bt) {
            for (int i = 0; i < nfree; ++i) new_vals[i] = vals[i] - alpha * grad[i];
            projector.apply(new_vals, new_vals);
            f_new = engine.objective(new_vals);
            if (std::isfinite(f_new) && (f_new <= fref || bt >= 30)) break;
            alpha *= 0.25;
        }
        engine.objective_and_gradient(new_vals, new_grad);
        if (!std::isfinite(f_new))
            throw Error("qap.diverged",
                        "objective not finite at iteration " + std::to_string(k) +
                            ", last step " + format_double(alpha));
        result.log.push_back({k, f_new, alpha, projector.last_residual()});
        if (f_new < result.objective) {
            result.objective = f_new;
            result.plan.values = new_vals;
        }
        recent.push_back(f_new);
        if (static_cast<int>(recent.size()) > window) recent.erase(recent.begin());

        // BB1 step from successive differences
        double sts = 0.0, sty = 0.0;
        for (int i = 0; i < nfree; ++i) {
            double ds = new_vals[i] - vals[i];
            sts += ds * ds;
            sty += ds * (new_grad[i] - grad[i]);
        }
        // no lower clamp: on stiff operators the stable step sits well below
        // any fixed fraction of step0, and flooring it there makes every
        // iteration overshoot just so the safeguard can reject it
        alpha = sty > 0 ? std::min(sts / sty, alpha_hi) : options.step0;

        // BB steps are nonmonotone; an uphill iteration is not convergence,
        // so only a decrease below tolerance stops the loop
        double decrease = f - f_new;
        bool stop = decrease >= 0 && decrease < options.tol * std::max(std::abs(f), 1e-300);
        vals.swap(new_vals);
        grad.swap(new_grad);
        f = f_new;
        if (stop) break;
    }
    return result;
}

Correspondence extract_map(const TransportPlan& plan) {
    const auto& p = *plan.pattern;
    Correspondence phi;
    phi.n1 = p.n1;
    phi.n2 = p.n2;
    phi.map.assign(p.n1, -1);
    for (int s = 0; s < p.n1; ++s) {
        if (p.anchor_of_row[s] >= 0) {
            phi.map[s] = p.anchor_of_row[s];
            continue;
        }
        double best = -std::numeric_limits<double>::infinity();
        int best_t = -1;
        for (int e = p.row_ptr[s]; e < p.row_ptr[s + 1]; ++e)
            if (plan.values[e] > best) { // strict: ties keep the smaller target
                best = plan.values[e];
                best_t = p.col_idx[e];
            }
        phi.map[s] = best_t;
    }
    return phi;
}

void write_plan_csv(const TransportPlan& plan, const std::string& path) {
    const auto& p = *plan.pattern;
    std::ostringstream out;
    out << "row,col,value\n";
    for (int s = 0; s < p.n1; ++s) {
        int a = p.anchor_of_row[s];
        int e = p.row_ptr[s];
        bool anchor_written = false;
        while (e < p.row_ptr[s + 1] || (a >= 0 && !anchor_written)) {
            bool take_anchor =
                a >= 0 && !anchor_written && (e >= p.row_ptr[s + 1] || a < p.col_idx[e]);
            if (take_anchor) {
                out << s << "," << a << ",1\n";
                anchor_written = true;
            } else {
                out << s << "," << p.col_idx[e] << "," << format_double(plan.values[e]) << "\n";
                ++e;
            }
        }
    }
    write_text_file(path, out.str());
}

void write_solve_log_csv(const std::vector<SolveIter>& log, const std::string& path) {
    std::ostringstream out;
    out << "iter,objective,step,marginal_residual\n";
    for (const auto& it : log)
        out << it.iter << "," << format_double(it.objective) << "," << format_double(it.step)
            << "," << format_double(it.marginal_residual) << "\n";
    write_text_file(path, out.str());
}

} // namespace sqmatch
