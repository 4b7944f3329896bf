#include <doctest.h>

#include "shapes.hpp"
#include "sqmatch/common.hpp"
#include "sqmatch/graph.hpp"
#include "sqmatch/operators.hpp"
#include "sqmatch/signatures.hpp"

#include <Eigen/Geometry>

#include <cmath>

using namespace sqmatch;
using namespace sqmatch::testsupport;

TEST_CASE("identical clouds give identical descriptors") {
    PointCloud c = sphere_cloud(200, 5);
    auto normals = cloud_normals(c.points);
    ShotParams params;
    params.radius = 0.5;
    PointSignature a = shot_like_descriptor(c.points, normals, params);
    PointSignature b = shot_like_descriptor(c.points, normals, params);
    CHECK(a.length() == 352);
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
    // unit norm rows
    for (int i = 0; i < a.values.rows(); ++i)
        CHECK(a.values.row(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rotated copies keep descriptor distance tiny on anisotropic shapes") {
    // the torus bumps make every neighborhood anisotropic, so the local
    // reference frame is well-conditioned; a handful of points may still
    // flip a disambiguation vote on a near-tie
    TriMesh m = bumpy_torus(12, 16, 6);
    Eigen::Matrix3d rot =
        Eigen::AngleAxisd(0.83, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
    TriMesh m2;
    m2.triangles = m.triangles;
    for (const auto& v : m.vertices) m2.vertices.push_back(rot * v);
    m2.finalize();

    ShotParams params;
    params.radius = 2.0;
    PointSignature a =
        shot_like_descriptor(m.vertices, mesh_vertex_normals(m), params);
    PointSignature b =
        shot_like_descriptor(m2.vertices, mesh_vertex_normals(m2), params);
    int stable = 0;
    for (int i = 0; i < a.values.rows(); ++i)
        if ((a.values.row(i) - b.values.row(i)).norm() < 1e-6) ++stable;
    CHECK(stable >= static_cast<int>(0.9 * a.values.rows()));
}

TEST_CASE("empty neighborhoods yield the zero descriptor and a warning") {
    std::vector<Eigen::Vector3d> pts = {{0, 0, 0}, {100, 0, 0}, {0, 100, 0}, {50, 50, 7}};
    auto normals = cloud_normals(pts, 3);
    ShotParams params;
    params.radius = 0.01;
    std::vector<std::string> warnings;
    PointSignature sig = shot_like_descriptor(pts, normals, params, &warnings);
    CHECK(sig.values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(!warnings.empty());
}

TEST_CASE("spectral basis: zero eigenvalue with constant eigenvector on closed meshes") {
    TriMesh m = icosphere(2);
    SparseOperator S = assemble_stiffness(m);
    SparseOperator M = assemble_mass(m);
    SpectralBasis basis = spectral_basis(S, M, 10);
    CHECK(std::abs(basis.eigenvalues[0]) < 1e-8);
    Eigen::VectorXd psi0 = basis.eigenvectors.col(0);
    CHECK((psi0.array() - psi0.mean()).abs().maxCoeff() < 1e-8 * std::abs(psi0.mean()));
    for (int k = 1; k < 10; ++k) CHECK(basis.eigenvalues[k] >= basis.eigenvalues[k - 1]);
}

TEST_CASE("icosphere spectrum approximates l(l+1) shells") {
    TriMesh m = icosphere(4); // 2562 vertices
    SparseOperator S = assemble_stiffness(m);
    SparseOperator M = assemble_mass(m);
    SpectralBasis basis = spectral_basis(S, M, 16); // shells l = 0..3
    int idx = 1;
    for (int l = 1; l <= 3; ++l) {
        double expect = l * (l + 1.0);
        for (int k = 0; k < 2 * l + 1; ++k, ++idx) {
            CHECK(basis.eigenvalues[idx] == doctest::Approx(expect).epsilon(0.05));
        }
    }
}

TEST_CASE("hks is positive and decreasing in t at large times") {
    TriMesh m = icosphere(2);
    PointSignature h1 = hks(m, 30, 1.0);
    PointSignature h2 = hks(m, 30, 4.0);
    for (int i = 0; i < h1.values.rows(); ++i) {
        CHECK(h1.values(i, 0) > 0.0);
        CHECK(h2.values(i, 0) < h1.values(i, 0));
    }
}

TEST_CASE("hks size limit is enforced") {
    TriMesh m = grid_mesh(2, 3);
    SparseOperator S = assemble_stiffness(m);
    SparseOperator M = assemble_mass(m);
    CHECK_THROWS_WITH_AS(spectral_basis(S, M, 100), doctest::Contains("bad_num_eigs"), Error);
    TriMesh big = bumpy_torus(80, 80, 1); // 6400 > 6000
    SparseOperator Sb = assemble_stiffness(big);
    SparseOperator Mb = assemble_mass(big);
    CHECK_THROWS_WITH_AS(spectral_basis(Sb, Mb, 10), doctest::Contains("hks_size_limit"),
                         Error);
}

TEST_CASE("geodesic signature is normalized, zero at own anchor, monotone on a path") {
    TriMesh m = bumpy_torus(6, 8, 3);
    Graph g = graph_from_mesh(m);
    double diam = geodesic_diameter(g, g.n);
    std::vector<int> anchors = {0, 5, 17};
    PointSignature sig = geodesic_signature(g, anchors, diam);
    CHECK(sig.length() == 3);
    CHECK(sig.values(0, 0) == 0.0);
    CHECK(sig.values(5, 1) == 0.0);
    CHECK(sig.values.minCoeff() >= 0.0);
    CHECK(sig.values.maxCoeff() <= 1.0 + 1e-12);
}
