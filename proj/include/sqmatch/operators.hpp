#pragma once

#include "sqmatch/mesh.hpp"

#include <string>
#include <vector>

namespace sqmatch {

/// Symmetric sparse operator in CSR form (diagonal included, columns
/// sorted per row). The sparsity pattern equals edge adjacency plus the
/// diagonal for mesh assembly.
struct SparseOperator {
    enum class Kind { stiffness, mass };

    Kind kind = Kind::stiffness;
    int n = 0;
    std::vector<int> offsets; // size n+1
    std::vector<int> cols;
    std::vector<double> vals;
    std::vector<double> diag; // convenience copy of the diagonal

    double total() const;
    std::vector<double> row_sums() const;
    /// y = A * x
    void multiply(const std::vector<double>& x, std::vector<double>& y) const;
};

/// Cotangent stiffness: off-diagonal -1/2 (cot a + cot b) for interior
/// edges (single-triangle term on boundary edges), diagonal set so every
/// row sums to zero. Appends a warning per face whose cotangent magnitude
/// exceeds 1e8.
SparseOperator assemble_stiffness(const TriMesh& mesh,
                                  std::vector<std::string>* warnings = nullptr);

/// Mass: off-diagonal (|t1|+|t2|)/12 per edge, diagonal equal to the
/// off-diagonal row sum. Total entry sum equals the surface area.
SparseOperator assemble_mass(const TriMesh& mesh);

void write_matrix_market(const SparseOperator& op, const std::string& path);
SparseOperator read_matrix_market(const std::string& path, SparseOperator::Kind kind);

/// Builds CSR from coordinate triplets (upper or full symmetric input);
/// duplicate entries are summed.
SparseOperator operator_from_triplets(int n, SparseOperator::Kind kind,
                                      const std::vector<std::tuple<int, int, double>>& entries);

} // namespace sqmatch
