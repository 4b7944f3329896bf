#include "sqmatch/operators.hpp"

#include "sqmatch/common.hpp"
#include "sqmatch/io_util.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>
#include <unordered_map>

namespace sqmatch {

double SparseOperator::total() const {
    double s = 0.0;
    for (double v : vals) s += v;
    return s;
}

std::vector<double> SparseOperator::row_sums() const {
    std::vector<double> out(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int e = offsets[i]; e < offsets[i + 1]; ++e) out[i] += vals[e];
    return out;
}

void SparseOperator::multiply(const std::vector<double>& x, std::vector<double>& y) const {
    y.assign(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int e = offsets[i]; e < offsets[i + 1]; ++e) y[i] += vals[e] * x[cols[e]];
}

namespace {

uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<uint64_t>(a) << 32) | static_cast<uint32_t>(b);
}

// CSR from per-edge symmetric weights plus an explicit diagonal.
SparseOperator build_from_edge_weights(const TriMesh& mesh, SparseOperator::Kind kind,
                                       const std::unordered_map<uint64_t, double>& edge_w,
                                       bool zero_row_sum) {
    SparseOperator op;
    op.kind = kind;
    op.n = mesh.n_vertices();
    op.offsets.assign(op.n + 1, 0);
    for (int v = 0; v < op.n; ++v)
        op.offsets[v + 1] = op.offsets[v] + (mesh.vtx_offsets[v + 1] - mesh.vtx_offsets[v]) + 1;
    op.cols.resize(op.offsets[op.n]);
    op.vals.resize(op.offsets[op.n]);
    op.diag.resize(op.n);
    for (int v = 0; v < op.n; ++v) {
        int e = op.offsets[v];
        bool diag_placed = false;
        double offdiag_sum = 0.0;
        // neighbors are sorted; emit the diagonal in column order
        for (int k = mesh.vtx_offsets[v]; k < mesh.vtx_offsets[v + 1]; ++k) {
            int u = mesh.vtx_nbrs[k];
            if (!diag_placed && u > v) {
                op.cols[e++] = v;
                diag_placed = true;
            }
            double w = edge_w.at(edge_key(v, u));
            op.cols[e++] = u;
            op.vals[e - 1] = w;
            offdiag_sum += w;
        }
        if (!diag_placed) op.cols[e++] = v;
        double d = zero_row_sum ? -offdiag_sum : offdiag_sum;
        op.diag[v] = d;
        // locate the diagonal slot and fill it
        for (int s = op.offsets[v]; s < op.offsets[v + 1]; ++s)
            if (op.cols[s] == v) op.vals[s] = d;
    }
    return op;
}

} // namespace

SparseOperator assemble_stiffness(const TriMesh& mesh, std::vector<std::string>* warnings) {
    std::unordered_map<uint64_t, double> edge_w;
    edge_w.reserve(mesh.edge_count);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        bool flagged = false;
        for (int j = 0; j < 3; ++j) {
            int a = tri[j], b = tri[(j + 1) % 3], c = tri[(j + 2) % 3];
            // cotangent of the angle at c, opposite edge (a,b)
            Eigen::Vector3d u = mesh.vertices[a] - mesh.vertices[c];
            Eigen::Vector3d v = mesh.vertices[b] - mesh.vertices[c];
            double cross = u.cross(v).norm();
            double cot = u.dot(v) / cross;
            if (std::abs(cot) > 1e8 && !flagged) {
                flagged = true;
                if (warnings)
                    warnings->push_back("near-degenerate triangle " + std::to_string(t) +
                                        ": |cot| = " + format_double(std::abs(cot)));
            }
            edge_w[edge_key(a, b)] += -0.5 * cot;
        }
    }
    return build_from_edge_weights(mesh, SparseOperator::Kind::stiffness, edge_w, true);
}

SparseOperator assemble_mass(const TriMesh& mesh) {
    std::unordered_map<uint64_t, double> edge_w;
    edge_w.reserve(mesh.edge_count);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        double a12 = mesh.tri_area[t] / 12.0;
        for (int j = 0; j < 3; ++j)
            edge_w[edge_key(tri[j], tri[(j + 1) % 3])] += a12;
    }
    return build_from_edge_weights(mesh, SparseOperator::Kind::mass, edge_w, false);
}

SparseOperator operator_from_triplets(int n, SparseOperator::Kind kind,
                                      const std::vector<std::tuple<int, int, double>>& entries) {
    std::map<std::pair<int, int>, double> acc;
    for (const auto& [r, c, v] : entries) {
        if (r < 0 || r >= n || c < 0 || c >= n)
            throw Error("operator.bad_index", "triplet index out of range");
        acc[{r, c}] += v;
        if (r != c) acc[{c, r}] += v;
    }
    SparseOperator op;
    op.kind = kind;
    op.n = n;
    op.offsets.assign(n + 1, 0);
    for (const auto& [rc, v] : acc) op.offsets[rc.first + 1]++;
    for (int i = 0; i < n; ++i) op.offsets[i + 1] += op.offsets[i];
    op.cols.resize(acc.size());
    op.vals.resize(acc.size());
    op.diag.assign(n, 0.0);
    std::vector<int> cursor(op.offsets.begin(), op.offsets.end() - 1);
    for (const auto& [rc, v] : acc) {
        int slot = cursor[rc.first]++;
        op.cols[slot] = rc.second;
        op.vals[slot] = v;
        if (rc.first == rc.second) op.diag[rc.first] = v;
    }
    return op;
}

void write_matrix_market(const SparseOperator& op, const std::string& path) {
    // lower triangle of the symmetric matrix, 1-based coordinates
    std::ostringstream out;
    out << "%%MatrixMarket matrix coordinate real symmetric\n";
    int nnz = 0;
    for (int i = 0; i < op.n; ++i)
        for (int e = op.offsets[i]; e < op.offsets[i + 1]; ++e)
            if (op.cols[e] <= i) ++nnz;
    out << op.n << " " << op.n << " " << nnz << "\n";
    for (int i = 0; i < op.n; ++i)
        for (int e = op.offsets[i]; e < op.offsets[i + 1]; ++e)
            if (op.cols[e] <= i)
                out << (i + 1) << " " << (op.cols[e] + 1) << " " << format_double(op.vals[e])
                    << "\n";
    write_text_file(path, out.str());
}

SparseOperator read_matrix_market(const std::string& path, SparseOperator::Kind kind) {
    std::istringstream in(read_text_file(path));
    std::string line;
    bool symmetric = false;
    if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0)
        throw Error("io.bad_format", "not a MatrixMarket file: " + path);
    symmetric = line.find("symmetric") != std::string::npos;
    while (std::getline(in, line) && (line.empty() || line[0] == '%')) {}
    std::istringstream hdr(line);
    int rows = 0, cols = 0, nnz = 0;
    if (!(hdr >> rows >> cols >> nnz) || rows != cols)
        throw Error("io.bad_format", "bad MatrixMarket header in " + path);
    std::vector<std::tuple<int, int, double>> entries;
    entries.reserve(nnz);
    for (int k = 0; k < nnz; ++k) {
        if (!std::getline(in, line)) throw Error("io.bad_format", "truncated " + path);
        std::istringstream ls(line);
        int r, c;
        double v;
        if (!(ls >> r >> c >> v)) throw Error("io.bad_format", "bad entry in " + path);
        entries.emplace_back(r - 1, c - 1, v);
    }
    if (!symmetric) {
        // keep only one representative of each symmetric pair
        std::vector<std::tuple<int, int, double>> lower;
        for (const auto& [r, c, v] : entries)
            if (c <= r) lower.emplace_back(r, c, v);
        entries = std::move(lower);
    }
    return operator_from_triplets(rows, kind, entries);
}

} // namespace sqmatch
