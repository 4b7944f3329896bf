#pragma once

#include "sqmatch/graph.hpp"
#include "sqmatch/localmesh.hpp"
#include "sqmatch/mesh.hpp"
#include "sqmatch/operators.hpp"
#include "sqmatch/qap.hpp"
#include "sqmatch/signatures.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sqmatch {

/// Uniform view of a matching input: positions, edge graph for geodesics,
/// and the assembled operators. Meshes keep a closedness flag so HKS can
/// refuse open surfaces; clouds are never HKS-capable.
struct Surface {
    std::vector<Eigen::Vector3d> positions;
    std::vector<Eigen::Vector3d> normals;
    Graph graph;
    SparseOperator S, M;
    std::vector<double> mass_diag;
    double mean_edge = 0.0;
    bool is_mesh = false;
    bool closed = false;

    int n() const { return static_cast<int>(positions.size()); }
};

Surface surface_from_mesh(const TriMesh& mesh, std::vector<std::string>* warnings = nullptr);
Surface surface_from_cloud(const PointCloud& cloud, const AdaptiveKnnParams& params = {},
                           int threads = 1, std::vector<std::string>* warnings = nullptr);

struct AnchorSet {
    std::vector<std::pair<int, int>> pairs; // (source, target), distinct sources
    std::vector<double> distortion;         // score at selection time
    double epsilon_used = 0.0;
};

enum class PostprocessMode { automatic, hks, geodesic_sig };
enum class InitMode { shot_like, random, provided };

struct PipelineConfig {
    int outer_iters = 5;
    double epsilon_start = 5.0;
    double epsilon_end = 1.0;
    int distortion_ring = 2;
    int sparsity_ring = 4;
    double mu = 1.0;
    double step0 = 75.0;
    int inner_iters = 30;
    double tol = 1e-4;
    PostprocessMode postprocess = PostprocessMode::automatic;
    InitMode init = InitMode::shot_like;
    int num_eigs = 300;
    double hks_t = 50.0;
    double shot_radius_factor = 3.0;
    int max_signature_anchors = 100;
    int diameter_samples = 30;
    std::uint64_t seed = 0;
    int threads = 1;

    /// Throws "pipeline.bad_config" when the schedule is not strictly
    /// decreasing (for outer_iters > 1) or distortion_ring >= sparsity_ring.
    void validate() const;
    /// Tolerance admitting anchors at outer iteration k (1-based), linear
    /// from epsilon_start to epsilon_end.
    double epsilon_at(int k) const;
};

/// Mass-weighted average ring-ball metric distortion of phi at every
/// source vertex (the anchor admission score). Vertices that are
/// unmapped, isolated, or whose whole ball is unmapped score +infinity.
std::vector<double> local_distortion(const Correspondence& phi, const Surface& s1,
                                     const Surface& s2, int ring_depth, int threads = 1);

/// Exactly the sources with distortion < epsilon; prior anchors carry no
/// privilege.
AnchorSet select_anchors(const std::vector<double>& distortion, const Correspondence& phi,
                         double epsilon);

/// Anchor-induced sparsity pattern: anchor rows fixed, free rows get the
/// union of the sparsity_ring-neighborhoods of the targets of every anchor
/// whose source neighborhood contains them. Sources outside all anchor
/// neighborhoods are left inactive and reported via `dropped`.
std::shared_ptr<SparsityPattern> build_pattern(const AnchorSet& anchors, const Surface& s1,
                                               const Surface& s2, int sparsity_ring,
                                               std::vector<int>* dropped = nullptr);

/// Initial map per config.init: provided passes phi0 through, shot_like
/// does mutual-consistency nearest-neighbor matching of SHOT-style
/// descriptors (non-mutual sources get seeded random targets), random is a
/// seeded uniform assignment.
Correspondence initial_map(const Surface& s1, const Surface& s2, const PipelineConfig& config,
                           const Correspondence* phi0 = nullptr,
                           std::vector<std::string>* warnings = nullptr);

/// Completes the anchor map to a total correspondence by nearest-neighbor
/// matching in anchor-referenced signature space (HKS cross-signature or
/// normalized geodesic distances). Anchor pairs pass through unchanged.
/// HKS mode requires two closed meshes within the dense eigensolve bound,
/// otherwise throws "pipeline.hks_unavailable" pointing at geodesic_sig.
Correspondence postprocess(const AnchorSet& anchors, const Surface& s1, const Surface& s2,
                           PostprocessMode mode, const PipelineConfig& config,
                           std::vector<std::string>* warnings = nullptr);

struct IterationRecord {
    int iter = 0;
    double epsilon = 0.0;
    int num_anchors = 0;
    double objective = 0.0;
    double seconds = 0.0;
};

struct PipelineResult {
    Correspondence map;
    AnchorSet anchors; // selected at epsilon_end from the final map
    std::vector<IterationRecord> log;
    std::vector<std::string> warnings;
};

/// Full outer loop: init, then per iteration distortion -> anchors ->
/// pattern -> solve -> map merge, and signature post-processing at the
/// end. Throws "pipeline.no_anchors" when an iteration admits none.
PipelineResult run_pipeline(const Surface& s1, const Surface& s2, const PipelineConfig& config,
                            const Correspondence* phi0 = nullptr);

void write_correspondence_csv(const Correspondence& phi, const std::string& path);
Correspondence read_correspondence_csv(const std::string& path);
void write_anchors_csv(const AnchorSet& anchors, const std::string& path);
void write_pipeline_log_csv(const std::vector<IterationRecord>& log, const std::string& path);

} // namespace sqmatch
