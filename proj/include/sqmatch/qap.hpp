#pragma once

#include "sqmatch/operators.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sqmatch {

/// Admissible-entry pattern for the relaxed transport matrix. Rows index
/// source vertices, columns index target vertices. Anchor sources carry a
/// single fixed entry (value 1) and no free entries; free entries are
/// stored CSR with sorted columns per row. Rows with neither free nor
/// anchor entries are inactive.
struct SparsityPattern {
    int n1 = 0, n2 = 0;
    std::vector<int> row_ptr;  // size n1+1, free entries
    std::vector<int> col_idx;  // sorted within each row
    std::vector<int> anchor_of_row; // size n1; target id or -1

    int free_count() const { return static_cast<int>(col_idx.size()); }
    int row_free_count(int s) const { return row_ptr[s + 1] - row_ptr[s]; }
    bool row_active(int s) const {
        return row_free_count(s) > 0 || anchor_of_row[s] >= 0;
    }
    int anchor_count() const;
    std::vector<int> col_free_counts() const;
    std::vector<double> col_anchor_mass() const;

    /// Requires every row in [0,n1) and column in [0,n2) to be covered by
    /// a free or anchor entry; throws "qap.infeasible_pattern" naming the
    /// first offender. Used when the pattern is meant to be total.
    void validate_total() const;

    static std::shared_ptr<SparsityPattern>
    from_entries(int n1, int n2, std::vector<std::pair<int, int>> free_entries,
                 std::vector<std::pair<int, int>> anchors = {});
};

/// Relaxed transport plan supported on a SparsityPattern. `values` holds
/// the free entries aligned with the pattern CSR; anchor entries are
/// implicitly 1. Values may be negative (nonnegativity is dropped).
struct TransportPlan {
    std::shared_ptr<const SparsityPattern> pattern;
    std::vector<double> values;

    double value_at(int s, int t) const; // 0 outside the pattern
};

struct QapProblem {
    const SparseOperator* S1 = nullptr;
    const SparseOperator* S2 = nullptr;
    const SparseOperator* M1 = nullptr;
    const SparseOperator* M2 = nullptr;
    double mu = 1.0;

    void check_dimensions(const SparsityPattern& pattern) const;
};

/// Projection onto {row sums 1, column sums at their targets, support in
/// the pattern, anchors fixed}. Column targets are n1/n2 minus fixed
/// anchor mass, rebalanced per connected component of the free-entry
/// bipartite graph so the constraints stay consistent. The closed-form
/// Hadamard update is applied first; when its marginal residual exceeds
/// 1e-9 an iterative KKT (dual conjugate-gradient) solve takes over.
class Projector {
public:
    explicit Projector(std::shared_ptr<const SparsityPattern> pattern);

    /// Projects y (free entries) in place into out. y and out may alias.
    void apply(std::span<const double> y, std::span<double> out);

    double last_residual() const { return last_residual_; }
    bool used_fallback() const { return used_fallback_; }

private:
    void marginals(std::span<const double> v, std::vector<double>& row_sum,
                   std::vector<double>& col_sum) const;
    double residual(std::span<const double> v) const;

    std::shared_ptr<const SparsityPattern> pattern_;
    std::vector<int> row_cnt_, col_cnt_;
    std::vector<double> col_target_;  // per column with free entries
    std::vector<int> component_;      // per row (0..n1) then col (n1..n1+n2), -1 if unused
    std::vector<double> comp_inv_nnz_; // 1/nnz per component
    double last_residual_ = 0.0;
    bool used_fallback_ = false;
};

/// One-shot projection; validates that the pattern is total.
TransportPlan project(const std::vector<double>& y,
                      std::shared_ptr<const SparsityPattern> pattern);

/// Sparse objective/gradient engine; keeps scratch between evaluations.
class QapEngine {
public:
    QapEngine(const QapProblem& problem, std::shared_ptr<const SparsityPattern> pattern);

    double objective(std::span<const double> values);
    double objective_and_gradient(std::span<const double> values, std::span<double> grad);

private:
    struct Csr {
        std::vector<int> ptr, col;
        std::vector<double> val;
    };
    // R = A1 D - D A2 restricted to its natural support
    void residual_matrix(std::span<const double> values, const SparseOperator& A1,
                         const SparseOperator& A2, Csr& R);
    void gradient_term(const Csr& R, const SparseOperator& A1, const SparseOperator& A2,
                       double weight, std::span<double> grad);

    QapProblem problem_;
    std::shared_ptr<const SparsityPattern> pattern_;
    Csr Rs_, Rm_;
    std::vector<double> scratch_;
    std::vector<int> touched_;
};

double qap_objective(const TransportPlan& plan, const QapProblem& problem);
TransportPlan qap_gradient(const TransportPlan& plan, const QapProblem& problem);

struct SolveOptions {
    double step0 = 75.0;
    int max_iters = 30;
    double tol = 1e-4; // relative objective decrease
};

struct SolveIter {
    int iter;
    double objective;
    double step;
    double marginal_residual;
};

struct SolveResult {
    TransportPlan plan; // iterate with the lowest recorded objective
    double objective = 0.0;
    std::vector<SolveIter> log;
};

/// Projected gradient with Barzilai-Borwein (BB1) steps, clamped to
/// [1e-3, 1e3] * step0, falling back to step0 when the BB denominator is
/// nonpositive. D0 must be feasible.
SolveResult solve(const QapProblem& problem, const TransportPlan& d0,
                  const SolveOptions& options);

struct Correspondence {
    int n1 = 0, n2 = 0;
    std::vector<int> map; // target id per source, -1 when unmapped
};

/// Per-source argmax over admissible entries; ties break toward the
/// smallest target index; anchored rows return their anchor target;
/// inactive rows are unmapped.
Correspondence extract_map(const TransportPlan& plan);

void write_plan_csv(const TransportPlan& plan, const std::string& path);
void write_solve_log_csv(const std::vector<SolveIter>& log, const std::string& path);

} // namespace sqmatch
