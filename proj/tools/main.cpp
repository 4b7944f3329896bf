#include "sqmatch/common.hpp"
#include "sqmatch/eval.hpp"
#include "sqmatch/io_util.hpp"
#include "sqmatch/localmesh.hpp"
#include "sqmatch/mesh.hpp"
#include "sqmatch/operators.hpp"
#include "sqmatch/pipeline.hpp"
#include "sqmatch/signatures.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>

namespace {

using namespace sqmatch;

struct RunConfig {
    PipelineConfig pipe;
    AdaptiveKnnParams knn;
    std::string kind = "auto"; // mesh | cloud | auto (by extension)
};

PostprocessMode parse_postprocess(const std::string& v) {
    if (v == "auto") return PostprocessMode::automatic;
    if (v == "hks") return PostprocessMode::hks;
    if (v == "geodesic_sig") return PostprocessMode::geodesic_sig;
    throw Error("config.bad_value", "postprocess must be auto, hks, or geodesic_sig");
}

InitMode parse_init(const std::string& v) {
    if (v == "shot_like") return InitMode::shot_like;
    if (v == "random") return InitMode::random;
    if (v == "provided") return InitMode::provided;
    throw Error("config.bad_value", "init must be shot_like, random, or provided");
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    try {
        if (key == "outer_iters") cfg.pipe.outer_iters = std::stoi(value);
        else if (key == "epsilon_start") cfg.pipe.epsilon_start = std::stod(value);
        else if (key == "epsilon_end") cfg.pipe.epsilon_end = std::stod(value);
        else if (key == "distortion_ring") cfg.pipe.distortion_ring = std::stoi(value);
        else if (key == "sparsity_ring") cfg.pipe.sparsity_ring = std::stoi(value);
        else if (key == "mu") cfg.pipe.mu = std::stod(value);
        else if (key == "step0") cfg.pipe.step0 = std::stod(value);
        else if (key == "inner_iters") cfg.pipe.inner_iters = std::stoi(value);
        else if (key == "tol") cfg.pipe.tol = std::stod(value);
        else if (key == "postprocess") cfg.pipe.postprocess = parse_postprocess(value);
        else if (key == "init") cfg.pipe.init = parse_init(value);
        else if (key == "num_eigs") cfg.pipe.num_eigs = std::stoi(value);
        else if (key == "hks_t") cfg.pipe.hks_t = std::stod(value);
        else if (key == "shot_radius_factor") cfg.pipe.shot_radius_factor = std::stod(value);
        else if (key == "max_signature_anchors")
            cfg.pipe.max_signature_anchors = std::stoi(value);
        else if (key == "diameter_samples") cfg.pipe.diameter_samples = std::stoi(value);
        else if (key == "seed") cfg.pipe.seed = std::stoull(value);
        else if (key == "threads") cfg.pipe.threads = std::stoi(value);
        else if (key == "kind") cfg.kind = value;
        else if (key == "knn_k0") cfg.knn.k0 = std::stoi(value);
        else if (key == "knn_ratio") cfg.knn.ratio = std::stod(value);
        else if (key == "knn_shrink") cfg.knn.shrink = std::stoi(value);
        else if (key == "knn_kmin") cfg.knn.kmin = std::stoi(value);
        else throw Error("config.bad_key", "unknown config key: " + key);
    } catch (const std::invalid_argument&) {
        throw Error("config.bad_value", "cannot parse value for " + key + ": " + value);
    } catch (const std::out_of_range&) {
        throw Error("config.bad_value", "value out of range for " + key + ": " + value);
    }
}

void load_config_file(RunConfig& cfg, const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error("config.bad_line",
                        path + ":" + std::to_string(lineno) + ": expected key = value");
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        apply_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

std::string default_config_text() {
    RunConfig d;
    std::ostringstream out;
    out << "# sqmatch configuration (key = value; '#' starts a comment)\n";
    out << "outer_iters = " << d.pipe.outer_iters << "\n";
    out << "epsilon_start = " << d.pipe.epsilon_start << "  # anchor tolerance, first round\n";
    out << "epsilon_end = " << d.pipe.epsilon_end << "      # anchor tolerance, last round\n";
    out << "distortion_ring = " << d.pipe.distortion_ring << "\n";
    out << "sparsity_ring = " << d.pipe.sparsity_ring << "\n";
    out << "mu = " << d.pipe.mu << "               # mass-term weight in the objective\n";
    out << "step0 = " << d.pipe.step0 << "           # initial gradient step\n";
    out << "inner_iters = " << d.pipe.inner_iters << "\n";
    out << "tol = " << d.pipe.tol << "\n";
    out << "postprocess = auto   # auto | hks | geodesic_sig\n";
    out << "init = shot_like     # shot_like | random | provided\n";
    out << "num_eigs = " << d.pipe.num_eigs << "\n";
    out << "hks_t = " << d.pipe.hks_t << "           # diffusion time\n";
    out << "shot_radius_factor = " << d.pipe.shot_radius_factor << "\n";
    out << "max_signature_anchors = " << d.pipe.max_signature_anchors << "\n";
    out << "diameter_samples = " << d.pipe.diameter_samples << "\n";
    out << "seed = " << d.pipe.seed << "\n";
    out << "threads = " << d.pipe.threads << "\n";
    out << "kind = auto          # mesh | cloud | auto (by file extension)\n";
    out << "knn_k0 = " << d.knn.k0 << "         # point-cloud neighborhood start size\n";
    out << "knn_ratio = " << d.knn.ratio << "\n";
    out << "knn_shrink = " << d.knn.shrink << "\n";
    out << "knn_kmin = " << d.knn.kmin << "\n";
    return out.str();
}

bool is_cloud_path(const std::string& path, const std::string& kind) {
    if (kind == "cloud") return true;
    if (kind == "mesh") return false;
    if (kind != "auto") throw Error("config.bad_value", "kind must be mesh, cloud, or auto");
    auto dot = path.rfind('.');
    return dot != std::string::npos && path.substr(dot) == ".xyz";
}

Surface load_surface(const std::string& path, const RunConfig& cfg,
                     std::vector<std::string>* warnings) {
    if (is_cloud_path(path, cfg.kind))
        return surface_from_cloud(load_cloud(path), cfg.knn, cfg.pipe.threads, warnings);
    return surface_from_mesh(load_mesh(path), warnings);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("io.write_failed", "cannot create directory " + dir);
}

int exit_code_for(const Error& e) {
    const std::string& c = e.code();
    if (c.rfind("io.", 0) == 0) return 2;
    if (c.rfind("config.", 0) == 0 || c == "pipeline.bad_config" || c == "synth.bad_params" ||
        c == "cli.bad_args")
        return 3;
    return 4;
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

// ---------------------------------------------------------------------------

int cmd_match(const std::string& src, const std::string& dst, const RunConfig& cfg,
              const std::string& out_dir, const std::string& init_map_path) {
    ensure_dir(out_dir);
    std::vector<std::string> warnings;
    Surface s1 = load_surface(src, cfg, &warnings);
    Surface s2 = load_surface(dst, cfg, &warnings);
    Correspondence phi0;
    const Correspondence* phi0_ptr = nullptr;
    if (!init_map_path.empty()) {
        phi0 = read_correspondence_csv(init_map_path);
        phi0.map.resize(s1.n(), -1);
        phi0.n1 = s1.n();
        phi0.n2 = s2.n();
        phi0_ptr = &phi0;
    }
    PipelineResult result = run_pipeline(s1, s2, cfg.pipe, phi0_ptr);
    warnings.insert(warnings.end(), result.warnings.begin(), result.warnings.end());
    write_correspondence_csv(result.map, out_dir + "/map.csv");
    write_anchors_csv(result.anchors, out_dir + "/anchors.csv");
    write_pipeline_log_csv(result.log, out_dir + "/log.csv");
    print_warnings(warnings);
    return 0;
}

int cmd_eval(const std::string& map_path, const std::string& gt_path,
             const std::string& mesh_path, const RunConfig& cfg, const std::string& out_dir,
             const std::string& map2_path) {
    ensure_dir(out_dir);
    GroundTruth gt = read_gt_csv(gt_path);
    Graph g2;
    if (is_cloud_path(mesh_path, cfg.kind)) {
        std::vector<std::string> warnings;
        g2 = assemble_cloud_operators(load_cloud(mesh_path), cfg.knn, cfg.pipe.threads,
                                      &warnings)
                 .graph;
        print_warnings(warnings);
    } else {
        g2 = graph_from_mesh(load_mesh(mesh_path));
    }
    double diam = geodesic_diameter(g2, std::min(cfg.pipe.diameter_samples, g2.n));

    auto evaluate = [&](const std::string& path) {
        Correspondence phi = read_correspondence_csv(path);
        phi.map.resize(gt.true_map.size(), -1);
        phi.n1 = static_cast<int>(gt.true_map.size());
        return make_error_report(geodesic_error(phi, gt, g2, diam), default_thresholds());
    };
    ErrorReport rep = evaluate(map_path);
    write_errors_csv(rep.per_vertex, out_dir + "/errors.csv");
    write_cdf_csv(rep.cdf, out_dir + "/cdf.csv");
    std::vector<CdfSeries> series{{std::filesystem::path(map_path).stem().string(), rep.cdf}};
    if (!map2_path.empty()) {
        ErrorReport rep2 = evaluate(map2_path);
        series.push_back({std::filesystem::path(map2_path).stem().string(), rep2.cdf});
    }
    write_cdf_svg(series, out_dir + "/cdf.svg");
    std::printf("mean %s median %s unreachable %d of %d\n", format_double(rep.mean).c_str(),
                format_double(rep.median).c_str(), rep.unreachable, rep.evaluated);
    return 0;
}

int cmd_synth(const std::string& mesh_path, const SynthOptions& options,
              const std::string& out_dir) {
    ensure_dir(out_dir);
    TriMesh mesh = load_mesh(mesh_path);
    SynthPair pair = synth_pair(mesh, options);
    save_off(pair.mesh2, out_dir + "/target.off");
    write_gt_csv(pair.gt, out_dir + "/gt.csv");
    return 0;
}

int cmd_descriptors(const std::string& input, const std::string& which, const RunConfig& cfg,
                    const std::string& out_path, const std::vector<int>& anchors) {
    std::vector<std::string> warnings;
    if (which == "stiffness" || which == "mass") {
        if (is_cloud_path(input, cfg.kind)) {
            CloudOperators ops = assemble_cloud_operators(load_cloud(input), cfg.knn,
                                                          cfg.pipe.threads, &warnings);
            write_matrix_market(which == "stiffness" ? ops.S : ops.M, out_path);
        } else {
            TriMesh mesh = load_mesh(input);
            write_matrix_market(which == "stiffness" ? assemble_stiffness(mesh, &warnings)
                                                     : assemble_mass(mesh),
                                out_path);
        }
    } else if (which == "shot") {
        Surface s = load_surface(input, cfg, &warnings);
        ShotParams params;
        params.radius = cfg.pipe.shot_radius_factor * s.mean_edge;
        write_signature_csv(shot_like_descriptor(s.positions, s.normals, params, &warnings),
                            out_path);
    } else if (which == "hks") {
        TriMesh mesh = load_mesh(input);
        write_signature_csv(hks(mesh, std::min(cfg.pipe.num_eigs, mesh.n_vertices()),
                                cfg.pipe.hks_t),
                            out_path);
    } else if (which == "geodesic_sig") {
        if (anchors.empty())
            throw Error("cli.bad_args", "geodesic_sig export needs --anchors");
        Surface s = load_surface(input, cfg, &warnings);
        double diam = geodesic_diameter(s.graph, std::min(cfg.pipe.diameter_samples, s.n()));
        write_signature_csv(geodesic_signature(s.graph, anchors, diam, &warnings), out_path);
    } else {
        throw Error("cli.bad_args", "unknown descriptor kind: " + which);
    }
    print_warnings(warnings);
    return 0;
}

int cmd_plot(const std::vector<std::string>& csv_paths, const std::string& out_path) {
    std::vector<CdfSeries> series;
    for (const auto& p : csv_paths)
        series.push_back({std::filesystem::path(p).stem().string(), read_cdf_csv(p)});
    write_cdf_svg(series, out_path);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dense correspondence between near-isometric surfaces via "
                 "sparsity-enforced quadratic assignment"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key = value configuration file");
        sub->add_option_function<std::vector<std::string>>(
            "--set",
            [&overrides](const std::vector<std::string>& kvs) {
                for (const auto& kv : kvs) {
                    auto eq = kv.find('=');
                    if (eq == std::string::npos)
                        throw CLI::ValidationError("--set expects key=value");
                    overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
                }
            },
            "config override key=value (repeatable)");
        sub->add_option("--seed", cfg.pipe.seed, "random seed");
        sub->add_option("--threads", cfg.pipe.threads, "worker thread count");
        sub->add_option("--kind", cfg.kind, "input kind: mesh | cloud | auto");
    };

    // match
    std::string src, dst, out_dir = "out", init_map_path, write_config_path, init_mode,
                          postprocess_mode;
    auto* match = app.add_subcommand("match", "compute a dense correspondence");
    match->add_option("source", src, "source mesh/cloud");
    match->add_option("target", dst, "target mesh/cloud");
    add_common(match);
    match->add_option("--out", out_dir, "output directory");
    match->add_option("--init", init_mode, "init mode: shot_like | random | provided");
    match->add_option("--init-map", init_map_path, "initial map CSV (init mode provided)");
    match->add_option("--postprocess", postprocess_mode, "auto | hks | geodesic_sig");
    match->add_option("--write-config", write_config_path,
                      "write the default configuration to this path and exit");

    // eval
    std::string map_path, gt_path, mesh_path, map2_path;
    auto* eval = app.add_subcommand("eval", "score a correspondence against ground truth");
    eval->add_option("map", map_path, "correspondence CSV");
    eval->add_option("gt", gt_path, "ground-truth CSV");
    eval->add_option("target", mesh_path, "target mesh/cloud");
    add_common(eval);
    eval->add_option("--out", out_dir, "output directory");
    eval->add_option("--map2", map2_path, "second correspondence for a two-series plot");

    // synth
    SynthOptions synth_opts;
    std::string synth_mesh;
    std::vector<double> axis{0.0, 0.0, 1.0}, translation{0.0, 0.0, 0.0};
    bool no_permute = false;
    auto* synth = app.add_subcommand("synth", "generate a synthetic test pair");
    synth->add_option("mesh", synth_mesh, "input mesh");
    add_common(synth);
    synth->add_option("--out", out_dir, "output directory");
    synth->add_option("--rotate-deg", synth_opts.rotation_deg, "rotation angle in degrees");
    synth->add_option("--axis", axis, "rotation axis (3 values)")->expected(3);
    synth->add_option("--translate", translation, "translation (3 values)")->expected(3);
    synth->add_flag("--no-permute", no_permute, "keep the vertex order");
    synth->add_option("--delete-faces", synth_opts.delete_faces_pct,
                      "percent of faces to delete");
    synth->add_option("--crop-center", synth_opts.crop_center, "crop-ball center vertex");
    synth->add_option("--crop-radius", synth_opts.crop_radius, "crop-ball geodesic radius");
    synth->add_option("--noise", synth_opts.noise_sigma,
                      "vertex noise sigma (fraction of mean edge)");

    // descriptors
    std::string desc_input, desc_which, desc_out = "descriptor.out";
    std::vector<int> desc_anchors;
    auto* desc = app.add_subcommand("descriptors", "export operators or signatures");
    desc->add_option("input", desc_input, "input mesh/cloud");
    desc->add_option("which", desc_which, "stiffness | mass | shot | hks | geodesic_sig");
    add_common(desc);
    desc->add_option("--out", desc_out, "output file");
    desc->add_option("--anchors", desc_anchors, "anchor vertex ids for geodesic_sig");

    // plot
    std::vector<std::string> plot_inputs;
    std::string plot_out = "cdf.svg";
    auto* plot = app.add_subcommand("plot", "re-render CDF CSVs to SVG");
    plot->add_option("csv", plot_inputs, "cdf CSV files");
    plot->add_option("--out", plot_out, "output SVG");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_path.empty()) load_config_file(cfg, config_path);
        for (const auto& [k, v] : overrides) apply_key(cfg, k, v);
        if (!init_mode.empty()) cfg.pipe.init = parse_init(init_mode);
        if (!postprocess_mode.empty()) cfg.pipe.postprocess = parse_postprocess(postprocess_mode);
        if (!init_map_path.empty() && init_mode.empty()) cfg.pipe.init = InitMode::provided;

        if (match->parsed()) {
            if (!write_config_path.empty()) {
                write_text_file(write_config_path, default_config_text());
                return 0;
            }
            if (src.empty() || dst.empty())
                throw Error("cli.bad_args", "match needs source and target paths");
            return cmd_match(src, dst, cfg, out_dir, init_map_path);
        }
        if (eval->parsed()) {
            if (map_path.empty() || gt_path.empty() || mesh_path.empty())
                throw Error("cli.bad_args", "eval needs map, gt, and target paths");
            return cmd_eval(map_path, gt_path, mesh_path, cfg, out_dir, map2_path);
        }
        if (synth->parsed()) {
            if (synth_mesh.empty()) throw Error("cli.bad_args", "synth needs a mesh path");
            synth_opts.rotation_axis = {axis[0], axis[1], axis[2]};
            synth_opts.translation = {translation[0], translation[1], translation[2]};
            synth_opts.permute = !no_permute;
            synth_opts.seed = cfg.pipe.seed;
            return cmd_synth(synth_mesh, synth_opts, out_dir);
        }
        if (desc->parsed()) {
            if (desc_input.empty() || desc_which.empty())
                throw Error("cli.bad_args", "descriptors needs an input and a kind");
            return cmd_descriptors(desc_input, desc_which, cfg, desc_out, desc_anchors);
        }
        if (plot->parsed()) {
            if (plot_inputs.empty()) throw Error("cli.bad_args", "plot needs CDF CSV files");
            return cmd_plot(plot_inputs, plot_out);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: internal: %s\n", e.what());
        return 4;
    }
    return 0;
}
