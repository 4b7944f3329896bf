#include "sqmatch/eval.hpp"

#include "sqmatch/common.hpp"
#include "sqmatch/io_util.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace sqmatch {

std::vector<double> geodesic_error(const Correspondence& phi, const GroundTruth& gt,
                                   const Graph& g2, double diameter) {
    if (static_cast<size_t>(phi.n1) != gt.true_map.size())
        throw Error("eval.bad_index", "correspondence and ground truth sizes disagree");
    if (!(diameter > 0)) throw Error("eval.bad_index", "nonpositive diameter");
    std::vector<double> err(phi.n1, std::nan(""));
    for (int i = 0; i < phi.n1; ++i) {
        int truth = gt.true_map[i];
        int pred = phi.map[i];
        if (truth < 0 || pred < 0) continue;
        if (truth >= g2.n || pred >= g2.n)
            throw Error("eval.bad_index", "target index out of range at source " +
                                              std::to_string(i));
        if (pred == truth) {
            err[i] = 0.0;
            continue;
        }
        int targets[1] = {truth};
        err[i] = dijkstra_targets(g2, pred, targets)[0] / diameter;
    }
    return err;
}

std::vector<double> default_thresholds() {
    std::vector<double> t(100);
    for (int i = 0; i < 100; ++i) t[i] = 0.25 * i / 99.0;
    return t;
}

std::vector<CdfPoint> error_cdf(const std::vector<double>& errors,
                                const std::vector<double>& thresholds) {
    std::vector<double> valid;
    for (double e : errors)
        if (!std::isnan(e)) valid.push_back(e);
    std::vector<CdfPoint> cdf;
    cdf.reserve(thresholds.size());
    for (double t : thresholds) {
        int hits = 0;
        for (double e : valid)
            if (e <= t) ++hits;
        cdf.push_back({t, valid.empty() ? 0.0 : static_cast<double>(hits) / valid.size()});
    }
    return cdf;
}

ErrorReport make_error_report(const std::vector<double>& errors,
                              const std::vector<double>& thresholds) {
    ErrorReport rep;
    rep.per_vertex = errors;
    rep.cdf = error_cdf(errors, thresholds);
    std::vector<double> finite;
    for (double e : errors) {
        if (std::isnan(e)) continue;
        ++rep.evaluated;
        if (std::isinf(e))
            ++rep.unreachable;
        else
            finite.push_back(e);
    }
    if (!finite.empty()) {
        rep.mean = std::accumulate(finite.begin(), finite.end(), 0.0) / finite.size();
        std::sort(finite.begin(), finite.end());
        size_t m = finite.size() / 2;
        rep.median = finite.size() % 2 ? finite[m] : 0.5 * (finite[m - 1] + finite[m]);
    }
    return rep;
}

SynthPair synth_pair(const TriMesh& mesh, const SynthOptions& options) {
    if (options.delete_faces_pct < 0 || options.delete_faces_pct >= 50)
        throw Error("synth.bad_params", "delete_faces_pct must be in [0, 50)");
    if (options.noise_sigma < 0) throw Error("synth.bad_params", "noise_sigma must be >= 0");

    std::mt19937_64 rng(options.seed);
    const int n = mesh.n_vertices();

    // surviving faces after deletion and cropping
    std::vector<char> keep_face(mesh.n_triangles(), 1);
    if (options.delete_faces_pct > 0) {
        int kill = static_cast<int>(std::llround(mesh.n_triangles() *
                                                 options.delete_faces_pct / 100.0));
        std::vector<int> order(mesh.n_triangles());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (int f = 0; f < kill; ++f) keep_face[order[f]] = 0;
    }
    if (options.crop_center >= 0) {
        if (options.crop_center >= n)
            throw Error("synth.bad_params", "crop_center out of range");
        Graph g = graph_from_mesh(mesh);
        std::vector<double> d = dijkstra(g, options.crop_center, options.crop_radius);
        for (int f = 0; f < mesh.n_triangles(); ++f)
            for (int v : mesh.triangles[f])
                if (!(d[v] <= options.crop_radius)) keep_face[f] = 0;
    }

    // vertices used by surviving faces, in original order
    std::vector<char> used(n, 0);
    for (int f = 0; f < mesh.n_triangles(); ++f)
        if (keep_face[f])
            for (int v : mesh.triangles[f]) used[v] = 1;
    int survivors = std::accumulate(used.begin(), used.end(), 0);
    if (survivors < 3) throw Error("synth.fragmented", "nothing usable survives");

    // relabeling of survivors
    std::vector<int> new_id(n, -1);
    std::vector<int> order;
    order.reserve(survivors);
    for (int v = 0; v < n; ++v)
        if (used[v]) order.push_back(v);
    if (options.permute) std::shuffle(order.begin(), order.end(), rng);
    for (int k = 0; k < survivors; ++k) new_id[order[k]] = k;

    Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
    if (options.rotation_deg != 0.0) {
        Eigen::Vector3d axis = options.rotation_axis;
        if (axis.norm() == 0) throw Error("synth.bad_params", "zero rotation axis");
        rot = Eigen::AngleAxisd(options.rotation_deg * M_PI / 180.0, axis.normalized())
                  .toRotationMatrix();
    }
    std::normal_distribution<double> gauss(0.0, options.noise_sigma * mesh.mean_edge_length);

    SynthPair out;
    out.mesh2.vertices.resize(survivors);
    for (int v = 0; v < n; ++v) {
        if (!used[v]) continue;
        Eigen::Vector3d p = rot * mesh.vertices[v] + options.translation;
        if (options.noise_sigma > 0) p += Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
        out.mesh2.vertices[new_id[v]] = p;
    }
    for (int f = 0; f < mesh.n_triangles(); ++f)
        if (keep_face[f])
            out.mesh2.triangles.push_back({new_id[mesh.triangles[f][0]],
                                           new_id[mesh.triangles[f][1]],
                                           new_id[mesh.triangles[f][2]]});
    out.mesh2.finalize();

    // reject tiny disconnected fragments
    {
        Graph g2 = graph_from_mesh(out.mesh2);
        std::vector<int> comp(g2.n, -1);
        for (int v = 0; v < g2.n; ++v) {
            if (comp[v] >= 0) continue;
            std::vector<int> stack{v};
            comp[v] = v;
            int size = 0;
            while (!stack.empty()) {
                int u = stack.back();
                stack.pop_back();
                ++size;
                for (int e = g2.offsets[u]; e < g2.offsets[u + 1]; ++e)
                    if (comp[g2.nbrs[e]] < 0) {
                        comp[g2.nbrs[e]] = v;
                        stack.push_back(g2.nbrs[e]);
                    }
            }
            if (size < 10)
                throw Error("synth.fragmented", "component of " + std::to_string(size) +
                                                    " vertices after perturbation");
        }
    }

    out.gt.true_map = new_id;
    out.gt.provenance = "synthetic";
    return out;
}

ErrorReport distortion_report(const Correspondence& phi, const Surface& s1, const Surface& s2,
                              int ring_depth, const std::vector<double>& thresholds,
                              int threads) {
    std::vector<double> dist = local_distortion(phi, s1, s2, ring_depth, threads);
    return make_error_report(dist, thresholds);
}

void write_cdf_svg(const std::vector<CdfSeries>& series, const std::string& path) {
    const double w = 640, h = 440, ml = 60, mr = 20, mt = 20, mb = 50;
    const double pw = w - ml - mr, ph = h - mt - mb;
    double xmax = 1e-12;
    for (const auto& s : series)
        for (const auto& p : s.curve) xmax = std::max(xmax, p.threshold);
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
    // axes
    out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
        << mt + ph << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
        << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        double fx = ml + pw * i / 5.0, vy = mt + ph - ph * i / 5.0;
        out << "<line x1=\"" << fx << "\" y1=\"" << mt + ph << "\" x2=\"" << fx << "\" y2=\""
            << mt + ph + 5 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << fx << "\" y=\"" << mt + ph + 20
            << "\" font-size=\"11\" text-anchor=\"middle\">" << format_double(xmax * i / 5.0)
            << "</text>\n";
        out << "<line x1=\"" << ml - 5 << "\" y1=\"" << vy << "\" x2=\"" << ml << "\" y2=\""
            << vy << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << vy + 4
            << "\" font-size=\"11\" text-anchor=\"end\">" << format_double(i / 5.0)
            << "</text>\n";
    }
    out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << h - 10
        << "\" font-size=\"12\" text-anchor=\"middle\">threshold</text>\n";
    out << "<text x=\"15\" y=\"" << mt + ph / 2
        << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
        << mt + ph / 2 << ")\">fraction</text>\n";

    for (size_t s = 0; s < series.size(); ++s) {
        const char* color = colors[s % 6];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& p : series[s].curve) {
            double fx = ml + pw * p.threshold / xmax;
            double fy = mt + ph - ph * std::clamp(p.fraction, 0.0, 1.0);
            out << fx << "," << fy << " ";
        }
        out << "\"/>\n";
        double ly = mt + 15 + 16.0 * s;
        out << "<line x1=\"" << ml + pw - 130 << "\" y1=\"" << ly << "\" x2=\""
            << ml + pw - 110 << "\" y2=\"" << ly << "\" stroke=\"" << color
            << "\" stroke-width=\"1.5\"/>\n";
        out << "<text x=\"" << ml + pw - 105 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
            << series[s].name << "</text>\n";
    }
    out << "</svg>\n";
    write_text_file(path, out.str());
}

void write_gt_csv(const GroundTruth& gt, const std::string& path) {
    std::ostringstream out;
    out << "source_index,target_index\n";
    for (size_t i = 0; i < gt.true_map.size(); ++i) out << i << "," << gt.true_map[i] << "\n";
    write_text_file(path, out.str());
}

GroundTruth read_gt_csv(const std::string& path) {
    GroundTruth gt;
    gt.provenance = "file";
    for (const auto& row : read_csv(path)) {
        if (row.size() < 2) throw Error("io.bad_format", "bad ground-truth row in " + path);
        int s = std::stoi(row[0]);
        if (s < 0) throw Error("io.bad_format", "negative source index in " + path);
        if (s >= static_cast<int>(gt.true_map.size())) gt.true_map.resize(s + 1, -1);
        gt.true_map[s] = std::stoi(row[1]);
    }
    return gt;
}

void write_errors_csv(const std::vector<double>& errors, const std::string& path) {
    std::ostringstream out;
    out << "source_index,error\n";
    for (size_t i = 0; i < errors.size(); ++i)
        out << i << "," << format_double(errors[i]) << "\n";
    write_text_file(path, out.str());
}

void write_cdf_csv(const std::vector<CdfPoint>& cdf, const std::string& path) {
    std::ostringstream out;
    out << "threshold,fraction\n";
    for (const auto& p : cdf)
        out << format_double(p.threshold) << "," << format_double(p.fraction) << "\n";
    write_text_file(path, out.str());
}

std::vector<CdfPoint> read_cdf_csv(const std::string& path) {
    std::vector<CdfPoint> cdf;
    for (const auto& row : read_csv(path)) {
        if (row.size() < 2) throw Error("io.bad_format", "bad cdf row in " + path);
        cdf.push_back({std::stod(row[0]), std::stod(row[1])});
    }
    return cdf;
}

} // namespace sqmatch
