#include <doctest.h>

#include "sqmatch/common.hpp"
#include "sqmatch/operators.hpp"
#include "sqmatch/qap.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

using namespace sqmatch;

namespace {

SparseOperator random_symmetric(int n, std::mt19937_64& rng, double density = 0.5) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::bernoulli_distribution keep(density);
    std::vector<std::tuple<int, int, double>> trip;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j)
            if (i == j || keep(rng)) trip.emplace_back(i, j, u(rng));
    return operator_from_triplets(n, SparseOperator::Kind::stiffness, trip);
}

Eigen::MatrixXd dense(const SparseOperator& op) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(op.n, op.n);
    for (int i = 0; i < op.n; ++i)
        for (int e = op.offsets[i]; e < op.offsets[i + 1]; ++e) d(i, op.cols[e]) += op.vals[e];
    return d;
}

Eigen::MatrixXd dense_plan(const TransportPlan& plan) {
    const auto& p = *plan.pattern;
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(p.n1, p.n2);
    for (int s = 0; s < p.n1; ++s) {
        if (p.anchor_of_row[s] >= 0) d(s, p.anchor_of_row[s]) = 1.0;
        for (int e = p.row_ptr[s]; e < p.row_ptr[s + 1]; ++e)
            d(s, p.col_idx[e]) = plan.values[e];
    }
    return d;
}

double dense_objective(const Eigen::MatrixXd& d, const Eigen::MatrixXd& s1,
                       const Eigen::MatrixXd& s2, const Eigen::MatrixXd& m1,
                       const Eigen::MatrixXd& m2, double mu) {
    return 0.5 * (s1 * d - d * s2).squaredNorm() + 0.5 * mu * (m1 * d - d * m2).squaredNorm();
}

// equality-constrained least-squares oracle for the projection: minimize
// ||d - y||^2 subject to free-row sums 1 and free-column sums equal to
// n1/n2 minus anchored mass (patterns are generated connected, so these
// targets are mutually consistent)
std::vector<double> kkt_projection_oracle(const std::vector<double>& y,
                                          const SparsityPattern& p) {
    const int nfree = p.free_count();
    std::vector<int> free_rows, free_cols;
    std::vector<int> row_id(p.n1, -1), col_id(p.n2, -1);
    std::vector<int> col_cnt = p.col_free_counts();
    for (int s = 0; s < p.n1; ++s)
        if (p.row_free_count(s) > 0) {
            row_id[s] = static_cast<int>(free_rows.size());
            free_rows.push_back(s);
        }
    for (int t = 0; t < p.n2; ++t)
        if (col_cnt[t] > 0) {
            col_id[t] = static_cast<int>(free_cols.size());
            free_cols.push_back(t);
        }
    const int mc = static_cast<int>(free_rows.size() + free_cols.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(mc, nfree);
    Eigen::VectorXd b(mc);
    for (size_t r = 0; r < free_rows.size(); ++r) b[r] = 1.0;
    std::vector<double> anchor_mass = p.col_anchor_mass();
    for (size_t c = 0; c < free_cols.size(); ++c)
        b[free_rows.size() + c] =
            static_cast<double>(p.n1) / p.n2 - anchor_mass[free_cols[c]];
    for (int s = 0; s < p.n1; ++s)
        for (int e = p.row_ptr[s]; e < p.row_ptr[s + 1]; ++e) {
            a(row_id[s], e) = 1.0;
            a(free_rows.size() + col_id[p.col_idx[e]], e) = 1.0;
        }
    // KKT system [I A^T; A 0] [d; lambda] = [y; b]; singular but consistent
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nfree + mc, nfree + mc);
    kkt.topLeftCorner(nfree, nfree).setIdentity();
    kkt.topRightCorner(nfree, mc) = a.transpose();
    kkt.bottomLeftCorner(mc, nfree) = a;
    Eigen::VectorXd rhs(nfree + mc);
    for (int e = 0; e < nfree; ++e) rhs[e] = y[e];
    rhs.tail(mc) = b;
    Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    return std::vector<double>(sol.data(), sol.data() + nfree);
}

// connected random pattern: a permutation backbone over the free rows and
// columns, chained for connectivity, plus random extra entries and
// optional anchor rows
std::shared_ptr<SparsityPattern> random_pattern(int n1, int n2, int num_anchors,
                                                std::mt19937_64& rng) {
    std::vector<int> rows(n1), cols(n2);
    std::iota(rows.begin(), rows.end(), 0);
    std::iota(cols.begin(), cols.end(), 0);
    std::shuffle(rows.begin(), rows.end(), rng);
    std::shuffle(cols.begin(), cols.end(), rng);

    std::vector<std::pair<int, int>> anchors, free;
    for (int k = 0; k < num_anchors; ++k) anchors.emplace_back(rows[k], cols[k]);
    std::vector<int> frows(rows.begin() + num_anchors, rows.end());
    // every remaining column must be reachable: cycle the free rows over
    // all n2 columns (anchored columns may also appear as free targets)
    std::bernoulli_distribution extra(0.3);
    std::uniform_int_distribution<int> pick_col(0, n2 - 1);
    for (size_t k = 0; k < std::max(frows.size(), static_cast<size_t>(n2)); ++k) {
        int r = frows[k % frows.size()];
        int c = cols[(num_anchors + k) % n2];
        free.emplace_back(r, c);
        free.emplace_back(frows[(k + 1) % frows.size()], c); // chain for connectivity
    }
    for (int r : frows)
        for (int j = 0; j < n2; ++j)
            if (extra(rng)) free.emplace_back(r, pick_col(rng));
    return SparsityPattern::from_entries(n1, n2, free, anchors);
}

} // namespace

TEST_CASE("projection: Y = 2I on the full 2x2 pattern") {
    auto pattern = SparsityPattern::from_entries(2, 2, {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
    TransportPlan d = project({2.0, 0.0, 0.0, 2.0}, pattern);
    CHECK(d.values[0] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(d.values[1] == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(d.values[2] == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(d.values[3] == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("projection is the identity on feasible input and idempotent") {
    auto pattern = SparsityPattern::from_entries(2, 2, {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
    TransportPlan d = project({1.0, 0.0, 0.0, 1.0}, pattern);
    CHECK(d.values[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.values[1] == doctest::Approx(0.0).epsilon(1e-12));

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        auto p = random_pattern(7, 7, trial % 3, rng);
        std::vector<double> y(p->free_count());
        for (double& v : y) v = u(rng);
        TransportPlan once = project(y, p);
        TransportPlan twice = project(once.values, p);
        for (int e = 0; e < p->free_count(); ++e)
            CHECK(std::abs(twice.values[e] - once.values[e]) < 1e-10);
    }
}

TEST_CASE("projection matches the KKT least-squares oracle") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::uniform_int_distribution<int> size(3, 12);
    for (int trial = 0; trial < 200; ++trial) {
        int n = size(rng);
        int anchors = trial % 3 == 0 ? std::min(2, n - 3) : 0;
        auto p = random_pattern(n, n, anchors, rng);
        std::vector<double> y(p->free_count());
        for (double& v : y) v = u(rng);
        TransportPlan d = project(y, p);
        std::vector<double> oracle = kkt_projection_oracle(y, *p);
        for (int e = 0; e < p->free_count(); ++e)
            CHECK(std::abs(d.values[e] - oracle[e]) < 1e-8);
        // marginal residuals
        Projector proj(p);
        std::vector<double> out(y.size());
        proj.apply(d.values, out);
        CHECK(proj.last_residual() < 1e-9);
    }
}

TEST_CASE("rectangular projection: row sums 1, column sums n1/n2") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto p = SparsityPattern::from_entries(6, 4, [] {
        std::vector<std::pair<int, int>> all;
        for (int s = 0; s < 6; ++s)
            for (int t = 0; t < 4; ++t) all.emplace_back(s, t);
        return all;
    }());
    std::vector<double> y(p->free_count());
    for (double& v : y) v = u(rng);
    TransportPlan d = project(y, p);
    Eigen::MatrixXd dm = dense_plan(d);
    for (int s = 0; s < 6; ++s) CHECK(dm.row(s).sum() == doctest::Approx(1.0).epsilon(1e-9));
    for (int t = 0; t < 4; ++t) CHECK(dm.col(t).sum() == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("infeasible patterns are reported with the offender") {
    SparsityPattern p;
    p.n1 = 2;
    p.n2 = 2;
    p.row_ptr = {0, 1, 1};
    p.col_idx = {0};
    p.anchor_of_row = {-1, -1};
    try {
        p.validate_total();
        FAIL("expected qap.infeasible_pattern");
    } catch (const Error& e) {
        CHECK(e.code() == "qap.infeasible_pattern");
        CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    }
}

TEST_CASE("objective vanishes on commuting identity and exact conjugation") {
    std::mt19937_64 rng(7);
    int n = 8;
    SparseOperator s1 = random_symmetric(n, rng);
    SparseOperator m1 = random_symmetric(n, rng);

    std::vector<std::pair<int, int>> full;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) full.emplace_back(i, j);
    auto pattern = SparsityPattern::from_entries(n, n, full);

    QapProblem prob{&s1, &s1, &m1, &m1, 1.0};
    TransportPlan ident;
    ident.pattern = pattern;
    ident.values.assign(n * n, 0.0);
    for (int i = 0; i < n; ++i) ident.values[i * n + i] = 1.0;
    CHECK(qap_objective(ident, prob) == doctest::Approx(0.0).epsilon(1e-14));

    // conjugated instance: D = P_pi must again reach zero
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd pm = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) pm(i, perm[i]) = 1.0;
    Eigen::MatrixXd s2d = pm.transpose() * dense(s1) * pm;
    Eigen::MatrixXd m2d = pm.transpose() * dense(m1) * pm;
    std::vector<std::tuple<int, int, double>> s2t, m2t;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            if (s2d(i, j) != 0.0) s2t.emplace_back(i, j, s2d(i, j));
            if (m2d(i, j) != 0.0) m2t.emplace_back(i, j, m2d(i, j));
        }
    SparseOperator s2 = operator_from_triplets(n, SparseOperator::Kind::stiffness, s2t);
    SparseOperator m2 = operator_from_triplets(n, SparseOperator::Kind::mass, m2t);
    QapProblem prob2{&s1, &s2, &m1, &m2, 1.0};
    TransportPlan pplan;
    pplan.pattern = pattern;
    pplan.values.assign(n * n, 0.0);
    for (int i = 0; i < n; ++i) pplan.values[i * n + perm[i]] = 1.0;
    CHECK(qap_objective(pplan, prob2) < 1e-20);
}

TEST_CASE("objective and gradient match the dense oracle on random instances") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 8;
        SparseOperator s1 = random_symmetric(n, rng), s2 = random_symmetric(n, rng);
        SparseOperator m1 = random_symmetric(n, rng), m2 = random_symmetric(n, rng);
        auto pattern = random_pattern(n, n, trial % 4 == 0 ? 2 : 0, rng);
        QapProblem prob{&s1, &s2, &m1, &m2, 0.7};

        TransportPlan d;
        d.pattern = pattern;
        d.values.resize(pattern->free_count());
        for (double& v : d.values) v = u(rng);

        Eigen::MatrixXd dd = dense_plan(d);
        Eigen::MatrixXd s1d = dense(s1), s2d = dense(s2), m1d = dense(m1), m2d = dense(m2);
        double oracle = dense_objective(dd, s1d, s2d, m1d, m2d, 0.7);
        CHECK(qap_objective(d, prob) ==
              doctest::Approx(oracle).epsilon(1e-12));

        // dense gradient masked to the pattern equals the sparse gradient
        Eigen::MatrixXd rs = s1d * dd - dd * s2d, rm = m1d * dd - dd * m2d;
        Eigen::MatrixXd dg =
            s1d * rs - rs * s2d + 0.7 * (m1d * rm - rm * m2d);
        TransportPlan g = qap_gradient(d, prob);
        for (int s = 0; s < n; ++s)
            for (int e = pattern->row_ptr[s]; e < pattern->row_ptr[s + 1]; ++e)
                CHECK(g.values[e] ==
                      doctest::Approx(dg(s, pattern->col_idx[e])).epsilon(1e-11));
    }
}

TEST_CASE("gradient matches central finite differences") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double h = 1e-5;
    for (int trial = 0; trial < 50; ++trial) {
        int n = 8;
        SparseOperator s1 = random_symmetric(n, rng), s2 = random_symmetric(n, rng);
        SparseOperator m1 = random_symmetric(n, rng), m2 = random_symmetric(n, rng);
        auto pattern = random_pattern(n, n, trial % 5 == 0 ? 2 : 0, rng);
        QapProblem prob{&s1, &s2, &m1, &m2, 1.3};
        TransportPlan d;
        d.pattern = pattern;
        d.values.resize(pattern->free_count());
        for (double& v : d.values) v = u(rng);

        TransportPlan g = qap_gradient(d, prob);
        for (int e = 0; e < pattern->free_count(); ++e) {
            TransportPlan dp = d, dm_ = d;
            dp.values[e] += h;
            dm_.values[e] -= h;
            double fd = (qap_objective(dp, prob) - qap_objective(dm_, prob)) / (2 * h);
            CHECK(std::abs(g.values[e] - fd) / std::max(1.0, std::abs(fd)) < 1e-5);
        }
    }
}

TEST_CASE("single free entry gradient equals the 1D derivative") {
    std::mt19937_64 rng(41);
    int n = 4;
    SparseOperator s1 = random_symmetric(n, rng), s2 = random_symmetric(n, rng);
    SparseOperator m1 = random_symmetric(n, rng), m2 = random_symmetric(n, rng);
    auto pattern = SparsityPattern::from_entries(n, n, {{3, 2}},
                                                 {{0, 0}, {1, 1}, {2, 3}});
    QapProblem prob{&s1, &s2, &m1, &m2, 1.0};
    TransportPlan d;
    d.pattern = pattern;
    d.values = {0.4};
    TransportPlan g = qap_gradient(d, prob);
    double h = 1e-6;
    TransportPlan dp = d, dm_ = d;
    dp.values[0] += h;
    dm_.values[0] -= h;
    double fd = (qap_objective(dp, prob) - qap_objective(dm_, prob)) / (2 * h);
    CHECK(g.values[0] == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("solve returns D0 when the objective is already zero") {
    std::mt19937_64 rng(5);
    int n = 6;
    SparseOperator s1 = random_symmetric(n, rng), m1 = random_symmetric(n, rng);
    std::vector<std::pair<int, int>> full;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) full.emplace_back(i, j);
    auto pattern = SparsityPattern::from_entries(n, n, full);
    TransportPlan d0;
    d0.pattern = pattern;
    d0.values.assign(n * n, 0.0);
    for (int i = 0; i < n; ++i) d0.values[i * n + i] = 1.0;
    QapProblem prob{&s1, &s1, &m1, &m1, 1.0};
    SolveResult res = solve(prob, d0, SolveOptions{});
    CHECK(res.objective == 0.0);
    CHECK(res.log.size() == 1);
    CHECK(res.plan.values == d0.values);
}

TEST_CASE("solve drives a conjugation instance to near zero from uniform") {
    std::mt19937_64 rng(77);
    int n = 8;
    SparseOperator s1 = random_symmetric(n, rng, 0.8), m1 = random_symmetric(n, rng, 0.8);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd pm = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) pm(i, perm[i]) = 1.0;
    auto conjugate = [&](const SparseOperator& op) {
        Eigen::MatrixXd c = pm.transpose() * dense(op) * pm;
        std::vector<std::tuple<int, int, double>> t;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j)
                if (c(i, j) != 0.0) t.emplace_back(i, j, c(i, j));
        return operator_from_triplets(n, op.kind, t);
    };
    SparseOperator s2 = conjugate(s1), m2 = conjugate(m1);

    std::vector<std::pair<int, int>> full;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) full.emplace_back(i, j);
    auto pattern = SparsityPattern::from_entries(n, n, full);
    TransportPlan d0;
    d0.pattern = pattern;
    d0.values.assign(n * n, 1.0 / n);
    QapProblem prob{&s1, &s2, &m1, &m2, 1.0};

    SolveOptions opt;
    opt.step0 = 0.05; // random dense operators need a smaller scale than meshes
    opt.max_iters = 200;
    opt.tol = 0.0;
    SolveResult res = solve(prob, d0, opt);
    double initial = res.log.front().objective;
    CHECK(res.objective < 1e-6 * initial);
    // best-so-far is the minimum of the log
    double best = initial;
    for (const auto& it : res.log) best = std::min(best, it.objective);
    CHECK(res.objective == best);
}

TEST_CASE("relaxed optimum lower-bounds every permutation (n = 5)") {
    std::mt19937_64 rng(15);
    int n = 5;
    SparseOperator s1 = random_symmetric(n, rng, 0.9), s2 = random_symmetric(n, rng, 0.9);
    SparseOperator m1 = random_symmetric(n, rng, 0.9), m2 = random_symmetric(n, rng, 0.9);
    std::vector<std::pair<int, int>> full;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) full.emplace_back(i, j);
    auto pattern = SparsityPattern::from_entries(n, n, full);
    QapProblem prob{&s1, &s2, &m1, &m2, 1.0};

    TransportPlan d0;
    d0.pattern = pattern;
    d0.values.assign(n * n, 1.0 / n);
    SolveOptions opt;
    opt.step0 = 0.05;
    opt.max_iters = 500;
    opt.tol = 0.0;
    SolveResult res = solve(prob, d0, opt);

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best_perm = std::numeric_limits<double>::infinity();
    do {
        TransportPlan p;
        p.pattern = pattern;
        p.values.assign(n * n, 0.0);
        for (int i = 0; i < n; ++i) p.values[i * n + perm[i]] = 1.0;
        best_perm = std::min(best_perm, qap_objective(p, prob));
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(res.objective <= best_perm + 1e-9);
}

TEST_CASE("extract_map: permutations, ties, anchors, empty rows") {
    auto pattern = SparsityPattern::from_entries(
        3, 3, {{0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1}, {1, 2}}, {{2, 0}});
    TransportPlan d;
    d.pattern = pattern;
    d.values = {0.4, 0.4, 0.2, 0.1, 0.2, 0.7};
    Correspondence phi = extract_map(d);
    CHECK(phi.map[0] == 0); // tie broken toward the smaller index
    CHECK(phi.map[1] == 2);
    CHECK(phi.map[2] == 0); // anchor

    SparsityPattern empty_row;
    empty_row.n1 = 2;
    empty_row.n2 = 2;
    empty_row.row_ptr = {0, 2, 2};
    empty_row.col_idx = {0, 1};
    empty_row.anchor_of_row = {-1, -1};
    TransportPlan d2;
    d2.pattern = std::make_shared<SparsityPattern>(empty_row);
    d2.values = {0.9, 0.1};
    Correspondence phi2 = extract_map(d2);
    CHECK(phi2.map[0] == 0);
    CHECK(phi2.map[1] == -1);
}
