#pragma once

#include "sqmatch/mesh.hpp"
#include "sqmatch/pipeline.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sqmatch {

struct GroundTruth {
    std::vector<int> true_map; // target id per source, -1 unmatchable
    std::string provenance;    // "synthetic" or "file"
};

struct CdfPoint {
    double threshold = 0.0;
    double fraction = 0.0;
};

/// Per-vertex errors plus summary statistics. NaN entries mark vertices
/// excluded from evaluation (unmatchable ground truth); +infinity marks
/// unreachable predictions, counted as never-correct and excluded from the
/// mean/median with `unreachable` reporting how many.
struct ErrorReport {
    std::vector<double> per_vertex;
    std::vector<CdfPoint> cdf;
    double mean = 0.0;
    double median = 0.0;
    int unreachable = 0;
    int evaluated = 0;
};

/// Normalized geodesic error e(x) = d2(phi(x), gt(x)) / diameter per
/// source; NaN where gt is unmatchable or phi unmapped, +infinity where
/// the two targets are disconnected.
std::vector<double> geodesic_error(const Correspondence& phi, const GroundTruth& gt,
                                   const Graph& g2, double diameter);

/// 100 thresholds evenly spaced on [0, 0.25].
std::vector<double> default_thresholds();

/// Fraction of evaluated vertices with error <= threshold, per threshold.
std::vector<CdfPoint> error_cdf(const std::vector<double>& errors,
                                const std::vector<double>& thresholds);

ErrorReport make_error_report(const std::vector<double>& errors,
                              const std::vector<double>& thresholds);

struct SynthOptions {
    Eigen::Vector3d rotation_axis{0.0, 0.0, 1.0};
    double rotation_deg = 0.0;
    Eigen::Vector3d translation{0.0, 0.0, 0.0};
    bool permute = true;
    std::uint64_t seed = 0;
    double delete_faces_pct = 0.0; // must stay < 50
    int crop_center = -1;          // keep the geodesic ball around this vertex
    double crop_radius = 0.0;      // absolute units; used when crop_center >= 0
    double noise_sigma = 0.0;      // fraction of the mean edge length
};

struct SynthPair {
    TriMesh mesh2;
    GroundTruth gt;
};

/// Rigidly transformed, optionally perturbed and vertex-relabeled copy
/// with the generating ground truth. Deletion/cropping that leaves a
/// connected fragment below 10 vertices throws "synth.fragmented".
SynthPair synth_pair(const TriMesh& mesh, const SynthOptions& options);

/// Per-vertex local distortion of phi plus its CDF (the unsupervised
/// counterpart of geodesic error).
ErrorReport distortion_report(const Correspondence& phi, const Surface& s1, const Surface& s2,
                              int ring_depth, const std::vector<double>& thresholds,
                              int threads = 1);

struct CdfSeries {
    std::string name;
    std::vector<CdfPoint> curve;
};

/// Hand-rolled SVG line plot of one or more CDF curves (axes, ticks,
/// legend); no plotting dependency.
void write_cdf_svg(const std::vector<CdfSeries>& series, const std::string& path);

void write_gt_csv(const GroundTruth& gt, const std::string& path);
GroundTruth read_gt_csv(const std::string& path);
void write_errors_csv(const std::vector<double>& errors, const std::string& path);
void write_cdf_csv(const std::vector<CdfPoint>& cdf, const std::string& path);
std::vector<CdfPoint> read_cdf_csv(const std::string& path);

} // namespace sqmatch
