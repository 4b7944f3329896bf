#include <doctest.h>

#include "shapes.hpp"
#include "sqmatch/common.hpp"
#include "sqmatch/eval.hpp"
#include "sqmatch/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

using namespace sqmatch;
using namespace sqmatch::testsupport;

namespace {

std::vector<std::vector<double>> floyd_warshall(const Graph& g) {
    std::vector<std::vector<double>> d(g.n, std::vector<double>(g.n, kInf));
    for (int i = 0; i < g.n; ++i) d[i][i] = 0.0;
    for (int i = 0; i < g.n; ++i)
        for (int e = g.offsets[i]; e < g.offsets[i + 1]; ++e)
            d[i][g.nbrs[e]] = std::min(d[i][g.nbrs[e]], g.len[e]);
    for (int k = 0; k < g.n; ++k)
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
    return d;
}

Eigen::MatrixXd dense(const SparseOperator& op) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(op.n, op.n);
    for (int i = 0; i < op.n; ++i)
        for (int e = op.offsets[i]; e < op.offsets[i + 1]; ++e) d(i, op.cols[e]) += op.vals[e];
    return d;
}

} // namespace

TEST_CASE("geodesic error matches the all-pairs oracle on random maps") {
    TriMesh m = bumpy_torus(10, 20, 6); // 200 vertices
    Graph g = graph_from_mesh(m);
    auto oracle = floyd_warshall(g);
    double diam = geodesic_diameter(g, g.n);

    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> pick(0, 199);
    Correspondence phi;
    phi.n1 = 200;
    phi.n2 = 200;
    phi.map.resize(200);
    GroundTruth gt;
    gt.true_map.resize(200);
    for (int i = 0; i < 200; ++i) {
        phi.map[i] = pick(rng);
        gt.true_map[i] = pick(rng);
    }
    gt.true_map[17] = -1; // unmatchable
    phi.map[33] = -1;     // unmapped prediction

    std::vector<double> err = geodesic_error(phi, gt, g, diam);
    REQUIRE(err.size() == 200);
    CHECK(std::isnan(err[17]));
    CHECK(std::isnan(err[33]));
    for (int i = 0; i < 200; ++i) {
        if (i == 17 || i == 33) continue;
        CHECK(err[i] ==
              doctest::Approx(oracle[phi.map[i]][gt.true_map[i]] / diam).epsilon(1e-12));
    }
    // exact prediction scores zero
    phi.map[5] = gt.true_map[5];
    err = geodesic_error(phi, gt, g, diam);
    CHECK(err[5] == 0.0);
}

TEST_CASE("error cdf is monotone, normalized, and skips NaN") {
    std::vector<double> errors = {0.0, 0.1, 0.2, std::nan(""), 0.05, kInf};
    std::vector<double> thr = default_thresholds();
    REQUIRE(thr.size() == 100);
    CHECK(thr.front() == 0.0);
    CHECK(thr.back() == doctest::Approx(0.25));
    std::vector<CdfPoint> cdf = error_cdf(errors, thr);
    REQUIRE(cdf.size() == 100);
    // 5 evaluated entries (NaN excluded); infinity is never correct
    CHECK(cdf.front().fraction == doctest::Approx(1.0 / 5));
    CHECK(cdf.back().fraction == doctest::Approx(4.0 / 5));
    for (size_t i = 1; i < cdf.size(); ++i)
        CHECK(cdf[i].fraction >= cdf[i - 1].fraction);

    ErrorReport report = make_error_report(errors, thr);
    CHECK(report.evaluated == 5);
    CHECK(report.unreachable == 1);
    CHECK(report.mean == doctest::Approx((0.0 + 0.1 + 0.2 + 0.05) / 4));
    CHECK(report.median == doctest::Approx(0.075));
}

TEST_CASE("synth identity options reproduce the mesh bit for bit") {
    TriMesh m = bumpy_torus(8, 10, 3);
    SynthOptions opt;
    opt.permute = false;
    SynthPair pair = synth_pair(m, opt);
    CHECK(pair.gt.provenance == "synthetic");
    REQUIRE(pair.mesh2.n_vertices() == m.n_vertices());
    for (int i = 0; i < m.n_vertices(); ++i) {
        CHECK(pair.gt.true_map[i] == i);
        CHECK((pair.mesh2.vertices[i] - m.vertices[i]).norm() == 0.0);
    }
    CHECK(pair.mesh2.triangles == m.triangles);
}

TEST_CASE("rotation plus permutation conjugates the stiffness operator") {
    TriMesh m = bumpy_torus(7, 9, 13);
    SynthOptions opt;
    opt.rotation_axis = Eigen::Vector3d(1, 2, 0.5);
    opt.rotation_deg = 47.0;
    opt.translation = Eigen::Vector3d(0.2, -1.0, 3.0);
    opt.permute = true;
    opt.seed = 5;
    SynthPair pair = synth_pair(m, opt);

    // gt is a bijection
    std::set<int> targets(pair.gt.true_map.begin(), pair.gt.true_map.end());
    CHECK(targets.size() == pair.gt.true_map.size());

    Eigen::MatrixXd S1 = dense(assemble_stiffness(m));
    Eigen::MatrixXd S2 = dense(assemble_stiffness(pair.mesh2));
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(m.n_vertices(), m.n_vertices());
    for (int i = 0; i < m.n_vertices(); ++i) P(i, pair.gt.true_map[i]) = 1.0;
    CHECK((S1 - P * S2 * P.transpose()).cwiseAbs().maxCoeff() <
          1e-10 * S1.cwiseAbs().maxCoeff());
}

TEST_CASE("face deletion keeps a total ground truth on the survivors") {
    TriMesh m = bumpy_torus(10, 12, 2);
    SynthOptions opt;
    opt.delete_faces_pct = 10.0;
    opt.permute = true;
    opt.seed = 9;
    SynthPair pair = synth_pair(m, opt);
    CHECK(pair.mesh2.n_triangles() < m.n_triangles());
    CHECK(pair.mesh2.n_triangles() >= m.n_triangles() * 0.85);
    REQUIRE(static_cast<int>(pair.gt.true_map.size()) == m.n_vertices());
    int matched = 0;
    for (int t : pair.gt.true_map)
        if (t >= 0) {
            ++matched;
            CHECK(t < pair.mesh2.n_vertices());
        }
    CHECK(matched == pair.mesh2.n_vertices());
    CHECK(!pair.mesh2.boundary_edges.empty()); // deletion opens the surface
}

TEST_CASE("cropping keeps the geodesic ball around the center") {
    TriMesh m = bumpy_torus(12, 16, 8);
    Graph g = graph_from_mesh(m);
    SynthOptions opt;
    opt.permute = false;
    opt.crop_center = 40;
    opt.crop_radius = 2.0;
    SynthPair pair = synth_pair(m, opt);
    CHECK(pair.mesh2.n_vertices() < m.n_vertices());
    std::vector<double> d = dijkstra(g, 40);
    for (int i = 0; i < m.n_vertices(); ++i) {
        if (pair.gt.true_map[i] >= 0) CHECK(d[i] <= opt.crop_radius + 1e-12);
    }
    CHECK(pair.gt.true_map[40] >= 0);
}

TEST_CASE("excessive deletion parameters are rejected") {
    TriMesh m = bumpy_torus(5, 7, 1);
    SynthOptions opt;
    opt.delete_faces_pct = 60.0;
    CHECK_THROWS_WITH_AS(synth_pair(m, opt), doctest::Contains("synth.bad_params"), Error);

    // a crop radius so small the fragment is below 10 vertices
    SynthOptions crop;
    crop.crop_center = 0;
    crop.crop_radius = 1e-6;
    CHECK_THROWS_WITH_AS(synth_pair(m, crop), doctest::Contains("synth.fragmented"), Error);
}

TEST_CASE("csv and svg outputs round trip") {
    auto tmp = std::filesystem::temp_directory_path();
    GroundTruth gt;
    gt.true_map = {0, 2, -1, 1};
    gt.provenance = "synthetic";
    std::string gt_path = (tmp / "sq_gt.csv").string();
    write_gt_csv(gt, gt_path);
    GroundTruth back = read_gt_csv(gt_path);
    CHECK(back.true_map == gt.true_map);

    std::vector<CdfPoint> cdf = {{0.0, 0.25}, {0.1, 0.5}, {0.25, 1.0}};
    std::string cdf_path = (tmp / "sq_cdf.csv").string();
    write_cdf_csv(cdf, cdf_path);
    std::vector<CdfPoint> cdf_back = read_cdf_csv(cdf_path);
    REQUIRE(cdf_back.size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(cdf_back[i].threshold == cdf[i].threshold);
        CHECK(cdf_back[i].fraction == cdf[i].fraction);
    }

    std::string svg_path = (tmp / "sq_cdf.svg").string();
    write_cdf_svg({{"run", cdf}}, svg_path);
    std::ifstream in(svg_path);
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    CHECK(content.find("<svg") != std::string::npos);
    CHECK(content.find("polyline") != std::string::npos);
    CHECK(content.find("run") != std::string::npos);

    std::remove(gt_path.c_str());
    std::remove(cdf_path.c_str());
    std::remove(svg_path.c_str());
}
