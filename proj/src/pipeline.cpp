#include "sqmatch/pipeline.hpp"

#include "sqmatch/common.hpp"
#include "sqmatch/io_util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

namespace sqmatch {

Surface surface_from_mesh(const TriMesh& mesh, std::vector<std::string>* warnings) {
    Surface s;
    s.positions = mesh.vertices;
    s.normals = mesh_vertex_normals(mesh);
    s.graph = graph_from_mesh(mesh);
    s.S = assemble_stiffness(mesh, warnings);
    s.M = assemble_mass(mesh);
    s.mass_diag = s.M.diag;
    s.mean_edge = mesh.mean_edge_length;
    s.is_mesh = true;
    s.closed = mesh.closed();
    return s;
}

Surface surface_from_cloud(const PointCloud& cloud, const AdaptiveKnnParams& params,
                           int threads, std::vector<std::string>* warnings) {
    Surface s;
    s.positions = cloud.points;
    s.normals = cloud_normals(cloud.points);
    CloudOperators ops = assemble_cloud_operators(cloud, params, threads, warnings);
    s.S = std::move(ops.S);
    s.M = std::move(ops.M);
    s.graph = std::move(ops.graph);
    s.mass_diag = s.M.diag;
    double total = 0.0;
    for (double l : s.graph.len) total += l;
    s.mean_edge = s.graph.len.empty() ? 0.0 : total / s.graph.len.size();
    s.is_mesh = false;
    s.closed = false;
    return s;
}

void PipelineConfig::validate() const {
    if (outer_iters < 1) throw Error("pipeline.bad_config", "outer_iters must be >= 1");
    if (outer_iters > 1 && !(epsilon_start > epsilon_end))
        throw Error("pipeline.bad_config", "epsilon schedule must be strictly decreasing");
    if (epsilon_end <= 0) throw Error("pipeline.bad_config", "epsilon_end must be > 0");
    if (!(distortion_ring < sparsity_ring))
        throw Error("pipeline.bad_config", "distortion_ring must be < sparsity_ring");
    if (distortion_ring < 1) throw Error("pipeline.bad_config", "distortion_ring must be >= 1");
    if (inner_iters < 1 || step0 <= 0 || mu < 0)
        throw Error("pipeline.bad_config", "bad solver parameters");
}

double PipelineConfig::epsilon_at(int k) const {
    if (outer_iters <= 1) return epsilon_start;
    double f = static_cast<double>(k - 1) / (outer_iters - 1);
    return epsilon_start + f * (epsilon_end - epsilon_start);
}

namespace {

// distortion of vertex i if it were mapped to `target`, with the rest of the
// map taken from phi
double vertex_distortion(const Correspondence& phi, const Surface& s1, const Surface& s2,
                         int ring_depth, int i, int target) {
    if (target < 0) return kInf;
    std::vector<int> ball = ring_members(s1.graph, i, ring_depth);
    std::erase(ball, i);
    if (ball.empty()) return kInf;
    std::vector<double> d1 = dijkstra_targets(s1.graph, i, ball);
    double gamma = 0.0;
    for (double d : d1) gamma = std::max(gamma, d);
    if (gamma <= 0.0) return 0.0; // coincident ball: no metric to distort

    std::vector<int> mapped_idx, targets;
    for (size_t j = 0; j < ball.size(); ++j)
        if (phi.map[ball[j]] >= 0) {
            mapped_idx.push_back(static_cast<int>(j));
            targets.push_back(phi.map[ball[j]]);
        }
    if (mapped_idx.empty()) return kInf; // whole ball unmapped
    std::vector<double> d2 = dijkstra_targets(s2.graph, target, targets);
    double num = 0.0, den = 0.0;
    for (size_t m = 0; m < mapped_idx.size(); ++m) {
        int j = ball[mapped_idx[m]];
        if (!std::isfinite(d2[m])) {
            num = kInf;
            den = 1.0;
            break;
        }
        double w = s1.mass_diag[j];
        num += w * std::abs(d1[mapped_idx[m]] - d2[m]) / gamma;
        den += w;
    }
    return den > 0 ? num / den : kInf;
}

} // namespace

std::vector<double> local_distortion(const Correspondence& phi, const Surface& s1,
                                     const Surface& s2, int ring_depth, int threads) {
    const int n1 = s1.n();
    std::vector<double> score(n1, 0.0);
    parallel_for(n1, threads, [&](int i) {
        score[i] = vertex_distortion(phi, s1, s2, ring_depth, i, phi.map[i]);
    });
    return score;
}

AnchorSet select_anchors(const std::vector<double>& distortion, const Correspondence& phi,
                         double epsilon) {
    AnchorSet anchors;
    anchors.epsilon_used = epsilon;
    for (int i = 0; i < static_cast<int>(distortion.size()); ++i)
        if (phi.map[i] >= 0 && distortion[i] < epsilon) {
            anchors.pairs.emplace_back(i, phi.map[i]);
            anchors.distortion.push_back(distortion[i]);
        }
    return anchors;
}

std::shared_ptr<SparsityPattern> build_pattern(const AnchorSet& anchors, const Surface& s1,
                                               const Surface& s2, int sparsity_ring,
                                               std::vector<int>* dropped) {
    const int n1 = s1.n(), n2 = s2.n();
    if (anchors.pairs.empty()) throw Error("qap.infeasible_pattern", "no anchors given");

    std::vector<char> is_anchor(n1, 0);
    for (const auto& [x, y] : anchors.pairs) is_anchor[x] = 1;

    // per-anchor target neighborhoods and, per free source, the anchors
    // covering it
    std::vector<std::vector<int>> target_ring(anchors.pairs.size());
    std::vector<std::vector<int>> covering(n1);
    for (size_t a = 0; a < anchors.pairs.size(); ++a) {
        const auto& [x, y] = anchors.pairs[a];
        target_ring[a] = ring_members(s2.graph, y, sparsity_ring);
        for (int sid : ring_members(s1.graph, x, sparsity_ring))
            if (!is_anchor[sid]) covering[sid].push_back(static_cast<int>(a));
    }

    std::vector<std::pair<int, int>> free_entries;
    std::vector<int> merged;
    for (int sid = 0; sid < n1; ++sid) {
        if (covering[sid].empty()) {
            if (!is_anchor[sid] && dropped) dropped->push_back(sid);
            continue;
        }
        merged.clear();
        for (int a : covering[sid])
            merged.insert(merged.end(), target_ring[a].begin(), target_ring[a].end());
        std::sort(merged.begin(), merged.end());
        merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
        for (int t : merged) free_entries.emplace_back(sid, t);
    }
    return SparsityPattern::from_entries(n1, n2, std::move(free_entries), anchors.pairs);
}

namespace {

// per-row argmin of squared Euclidean distance between rows of a and b,
// blocked matrix products; ties break toward the smaller index
std::vector<int> nearest_rows(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const int n1 = static_cast<int>(a.rows()), n2 = static_cast<int>(b.rows());
    Eigen::VectorXd b_sq = b.rowwise().squaredNorm();
    std::vector<int> out(n1, -1);
    const int block = 256;
    for (int start = 0; start < n1; start += block) {
        int rows = std::min(block, n1 - start);
        Eigen::MatrixXd g = a.middleRows(start, rows) * b.transpose(); // rows x n2
        for (int r = 0; r < rows; ++r) {
            double a_sq = a.row(start + r).squaredNorm();
            double best = kInf;
            int best_t = -1;
            for (int t = 0; t < n2; ++t) {
                double d = a_sq + b_sq[t] - 2.0 * g(r, t);
                if (d < best) {
                    best = d;
                    best_t = t;
                }
            }
            out[start + r] = best_t;
        }
    }
    return out;
}

Eigen::MatrixXd sanitized(const Eigen::MatrixXd& m) {
    return m.unaryExpr([](double v) {
        if (!std::isfinite(v)) return 1e6;
        return std::min(v, 1e6);
    });
}

PointSignature shot_signature(const Surface& s, double radius_factor,
                              std::vector<std::string>* warnings) {
    ShotParams params;
    params.radius = radius_factor * s.mean_edge;
    if (params.radius <= 0)
        throw Error("pipeline.bad_config", "degenerate surface: zero mean edge length");
    return shot_like_descriptor(s.positions, s.normals, params, warnings);
}

} // namespace

Correspondence initial_map(const Surface& s1, const Surface& s2, const PipelineConfig& config,
                           const Correspondence* phi0, std::vector<std::string>* warnings) {
    Correspondence phi;
    phi.n1 = s1.n();
    phi.n2 = s2.n();
    if (config.init == InitMode::provided) {
        if (!phi0)
            throw Error("pipeline.bad_config", "init mode 'provided' needs an initial map");
        if (phi0->n1 != phi.n1 || phi0->n2 != phi.n2)
            throw Error("pipeline.bad_config", "provided initial map has wrong dimensions");
        return *phi0;
    }
    std::mt19937_64 rng(config.seed);
    std::uniform_int_distribution<int> pick(0, phi.n2 - 1);
    if (config.init == InitMode::random) {
        phi.map.resize(phi.n1);
        for (int& t : phi.map) t = pick(rng);
        return phi;
    }
    PointSignature d1 = shot_signature(s1, config.shot_radius_factor, warnings);
    PointSignature d2 = shot_signature(s2, config.shot_radius_factor, warnings);
    std::vector<int> fwd = nearest_rows(d1.values, d2.values);
    std::vector<int> bwd = nearest_rows(d2.values, d1.values);
    phi.map.resize(phi.n1);
    int kept = 0;
    for (int i = 0; i < phi.n1; ++i) {
        if (fwd[i] >= 0 && bwd[fwd[i]] == i) {
            phi.map[i] = fwd[i];
            ++kept;
        } else {
            phi.map[i] = pick(rng);
        }
    }
    if (warnings && kept * 2 < phi.n1)
        warnings->push_back("mutual descriptor matches cover only " + std::to_string(kept) +
                            " of " + std::to_string(phi.n1) + " sources");
    return phi;
}

namespace {

// farthest-point subsample of the anchor pairs by source position,
// starting from the first (smallest-source) pair
std::vector<int> fps_anchor_subset(const AnchorSet& anchors, const Surface& s1, int count) {
    const int k = static_cast<int>(anchors.pairs.size());
    if (k <= count) {
        std::vector<int> all(k);
        for (int i = 0; i < k; ++i) all[i] = i;
        return all;
    }
    std::vector<double> min_d(k, kInf);
    std::vector<int> chosen{0};
    while (static_cast<int>(chosen.size()) < count) {
        const Eigen::Vector3d& last = s1.positions[anchors.pairs[chosen.back()].first];
        int far = -1;
        double far_d = -1.0;
        for (int i = 0; i < k; ++i) {
            double d = (s1.positions[anchors.pairs[i].first] - last).squaredNorm();
            min_d[i] = std::min(min_d[i], d);
            if (min_d[i] > far_d) {
                far_d = min_d[i];
                far = i;
            }
        }
        if (far_d <= 0) break; // duplicates only from here on
        chosen.push_back(far);
    }
    return chosen;
}

} // namespace

Correspondence postprocess(const AnchorSet& anchors, const Surface& s1, const Surface& s2,
                           PostprocessMode mode, const PipelineConfig& config,
                           std::vector<std::string>* warnings) {
    if (anchors.pairs.empty())
        throw Error("pipeline.no_anchors", "post-processing needs a nonempty anchor set");
    bool hks_ok = s1.is_mesh && s2.is_mesh && s1.closed && s2.closed && s1.n() <= 6000 &&
                  s2.n() <= 6000;
    if (mode == PostprocessMode::automatic)
        mode = hks_ok ? PostprocessMode::hks : PostprocessMode::geodesic_sig;
    if (mode == PostprocessMode::hks && !hks_ok)
        throw Error("pipeline.hks_unavailable",
                    "HKS post-processing needs two closed meshes with at most 6000 "
                    "vertices; use geodesic_sig instead");

    std::vector<int> subset = fps_anchor_subset(anchors, s1, config.max_signature_anchors);
    std::vector<int> sources(subset.size()), targets(subset.size());
    for (size_t i = 0; i < subset.size(); ++i) {
        sources[i] = anchors.pairs[subset[i]].first;
        targets[i] = anchors.pairs[subset[i]].second;
    }

    PointSignature sig1, sig2;
    if (mode == PostprocessMode::hks) {
        int k1 = std::min(config.num_eigs, s1.n());
        int k2 = std::min(config.num_eigs, s2.n());
        int k = std::min(k1, k2);
        sig1 = hks_cross(spectral_basis(s1.S, s1.M, k), sources, config.hks_t);
        sig2 = hks_cross(spectral_basis(s2.S, s2.M, k), targets, config.hks_t);
    } else {
        int samples1 = std::min(config.diameter_samples, s1.n());
        int samples2 = std::min(config.diameter_samples, s2.n());
        // one common scale: with partial inputs the two diameters differ and
        // per-mesh normalization would bias every signature comparison
        double diam = std::max(geodesic_diameter(s1.graph, samples1),
                               geodesic_diameter(s2.graph, samples2));
        sig1 = geodesic_signature(s1.graph, sources, diam, warnings);
        sig2 = geodesic_signature(s2.graph, targets, diam, warnings);
    }

    std::vector<int> nn = nearest_rows(sanitized(sig1.values), sanitized(sig2.values));
    Correspondence out;
    out.n1 = s1.n();
    out.n2 = s2.n();
    out.map = nn;
    for (const auto& [x, y] : anchors.pairs) out.map[x] = y;
    return out;
}

PipelineResult run_pipeline(const Surface& s1, const Surface& s2, const PipelineConfig& config,
                            const Correspondence* phi0) {
    config.validate();
    PipelineResult result;
    Correspondence phi = initial_map(s1, s2, config, phi0, &result.warnings);

    QapProblem problem;
    problem.S1 = &s1.S;
    problem.S2 = &s2.S;
    problem.M1 = &s1.M;
    problem.M2 = &s2.M;
    problem.mu = config.mu;
    SolveOptions options;
    options.step0 = config.step0;
    options.max_iters = config.inner_iters;
    options.tol = config.tol;

    std::vector<double> dist =
        local_distortion(phi, s1, s2, config.distortion_ring, config.threads);
    for (int k = 1; k <= config.outer_iters; ++k) {
        auto t0 = std::chrono::steady_clock::now();
        double eps = config.epsilon_at(k);
        int post_anchors = 0;
        double objective = 0.0;
        // repairing a region can push an anchored neighbor's distortion back
        // over eps; repeat selection + solve at this eps until the anchor set
        // is self-consistent (bounded: exposures shrink fast in practice)
        for (int rep = 0; rep < 3; ++rep) {
            AnchorSet anchors = select_anchors(dist, phi, eps);
            if (anchors.pairs.empty())
                throw Error("pipeline.no_anchors",
                            "iteration " + std::to_string(k) +
                                " admitted no anchors at epsilon " + format_double(eps) +
                                "; increase epsilon_start");
            std::vector<int> dropped;
            auto pattern = build_pattern(anchors, s1, s2, config.sparsity_ring, &dropped);
            if (!dropped.empty() && k == config.outer_iters)
                result.warnings.push_back(std::to_string(dropped.size()) +
                                          " sources outside all anchor neighborhoods in the "
                                          "final round");

            // warm start: indicator of the current map inside the pattern
            TransportPlan d0;
            d0.pattern = pattern;
            d0.values.assign(pattern->free_count(), 0.0);
            for (int s = 0; s < pattern->n1; ++s) {
                int t = phi.map[s];
                if (t < 0) continue;
                for (int e = pattern->row_ptr[s]; e < pattern->row_ptr[s + 1]; ++e)
                    if (pattern->col_idx[e] == t) {
                        d0.values[e] = 1.0;
                        break;
                    }
            }
            Projector projector(pattern);
            projector.apply(d0.values, d0.values);

            SolveResult solved = solve(problem, d0, options);
            Correspondence next = extract_map(solved.plan);
            for (int s = 0; s < phi.n1; ++s)
                if (next.map[s] < 0) next.map[s] = phi.map[s];

            // the relaxation is convex, so two equally good assignments pull
            // the minimizer to their average and the row argmax becomes a
            // coin flip; break such near-ties with the same distortion
            // criterion that selects anchors
            for (int s = 0; s < pattern->n1; ++s) {
                if (pattern->row_free_count(s) == 0) continue;
                double vmax = -kInf;
                for (int e = pattern->row_ptr[s]; e < pattern->row_ptr[s + 1]; ++e)
                    vmax = std::max(vmax, solved.plan.values[e]);
                double best = kInf;
                int arg = next.map[s];
                for (int e = pattern->row_ptr[s]; e < pattern->row_ptr[s + 1]; ++e) {
                    if (solved.plan.values[e] < vmax - 0.05 * std::max(vmax, 0.0)) continue;
                    int t = pattern->col_idx[e];
                    double d = vertex_distortion(next, s1, s2, config.distortion_ring, s, t);
                    if (d < best) {
                        best = d;
                        arg = t;
                    }
                }
                next.map[s] = arg;
            }
            phi = std::move(next);

            // the logged count describes the map this iteration produced,
            // judged at this iteration's tolerance — the same reading that
            // the final anchor set below uses
            dist = local_distortion(phi, s1, s2, config.distortion_ring, config.threads);
            post_anchors = static_cast<int>(select_anchors(dist, phi, eps).pairs.size());
            objective = solved.objective;

            bool exposed = false;
            for (const auto& [src, tgt] : anchors.pairs)
                if (phi.map[src] == tgt && dist[src] >= eps) {
                    exposed = true;
                    break;
                }
            if (!exposed) break;
        }

        double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                             .count();
        result.log.push_back({k, eps, post_anchors, objective, seconds});
    }

    result.anchors = select_anchors(dist, phi, config.epsilon_end);
    result.map = postprocess(result.anchors, s1, s2, config.postprocess, config,
                             &result.warnings);
    return result;
}

void write_correspondence_csv(const Correspondence& phi, const std::string& path) {
    std::ostringstream out;
    out << "source_index,target_index\n";
    for (int i = 0; i < phi.n1; ++i) out << i << "," << phi.map[i] << "\n";
    write_text_file(path, out.str());
}

Correspondence read_correspondence_csv(const std::string& path) {
    Correspondence phi;
    int max_t = -1;
    for (const auto& row : read_csv(path)) {
        if (row.size() < 2) throw Error("io.bad_format", "bad correspondence row in " + path);
        int s = std::stoi(row[0]), t = std::stoi(row[1]);
        if (s < 0) throw Error("io.bad_format", "negative source index in " + path);
        if (s >= static_cast<int>(phi.map.size())) phi.map.resize(s + 1, -1);
        phi.map[s] = t;
        max_t = std::max(max_t, t);
    }
    phi.n1 = static_cast<int>(phi.map.size());
    phi.n2 = max_t + 1;
    return phi;
}

void write_anchors_csv(const AnchorSet& anchors, const std::string& path) {
    std::ostringstream out;
    out << "source_index,target_index,distortion\n";
    for (size_t i = 0; i < anchors.pairs.size(); ++i)
        out << anchors.pairs[i].first << "," << anchors.pairs[i].second << ","
            << format_double(anchors.distortion[i]) << "\n";
    write_text_file(path, out.str());
}

void write_pipeline_log_csv(const std::vector<IterationRecord>& log, const std::string& path) {
    std::ostringstream out;
    out << "iter,epsilon,num_anchors,objective,seconds\n";
    for (const auto& rec : log)
        out << rec.iter << "," << format_double(rec.epsilon) << "," << rec.num_anchors << ","
            << format_double(rec.objective) << "," << format_double(rec.seconds) << "\n";
    write_text_file(path, out.str());
}

} // namespace sqmatch
