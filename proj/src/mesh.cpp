#include "sqmatch/mesh.hpp"

#include "sqmatch/common.hpp"
#include "sqmatch/io_util.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace sqmatch {

namespace {

uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<uint64_t>(a) << 32) | static_cast<uint32_t>(b);
}

std::string lower_ext(const std::string& path) {
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    for (auto& c : ext) c = static_cast<char>(std::tolower(c));
    return ext;
}

// Pulls the next non-comment, non-empty line.
bool next_line(std::istringstream& in, std::string& line, char comment = '#') {
    while (std::getline(in, line)) {
        auto pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos) continue;
        if (line[pos] == comment) continue;
        return true;
    }
    return false;
}

void push_face(std::vector<std::array<int, 3>>& tris, const std::vector<int>& poly) {
    if (poly.size() < 3)
        throw Error("mesh.parse", "face with fewer than 3 vertices");
    // fan-triangulate polygons, preserving winding
    for (size_t i = 1; i + 1 < poly.size(); ++i)
        tris.push_back({poly[0], poly[static_cast<int>(i)], poly[i + 1]});
}

TriMesh parse_off(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!next_line(in, line)) throw Error("mesh.parse", "empty OFF file");
    std::istringstream header(line);
    std::string tag;
    header >> tag;
    long nv = 0, nf = 0, ne = 0;
    if (tag == "OFF" || tag == "COFF" || tag == "NOFF") {
        if (!(header >> nv >> nf >> ne)) {
            if (!next_line(in, line)) throw Error("mesh.parse", "OFF missing counts");
            std::istringstream counts(line);
            if (!(counts >> nv >> nf >> ne)) throw Error("mesh.parse", "OFF bad counts");
        }
    } else {
        std::istringstream counts(line);
        if (!(counts >> nv >> nf >> ne)) throw Error("mesh.parse", "OFF bad counts");
    }
    TriMesh mesh;
    mesh.vertices.reserve(nv);
    for (long i = 0; i < nv; ++i) {
        if (!next_line(in, line)) throw Error("mesh.parse", "OFF truncated vertex list");
        std::istringstream v(line);
        double x, y, z;
        if (!(v >> x >> y >> z)) throw Error("mesh.parse", "OFF bad vertex line");
        mesh.vertices.emplace_back(x, y, z);
    }
    for (long i = 0; i < nf; ++i) {
        if (!next_line(in, line)) throw Error("mesh.parse", "OFF truncated face list");
        std::istringstream f(line);
        int k;
        if (!(f >> k)) throw Error("mesh.parse", "OFF bad face line");
        std::vector<int> poly(k);
        for (int j = 0; j < k; ++j)
            if (!(f >> poly[j])) throw Error("mesh.parse", "OFF bad face line");
        push_face(mesh.triangles, poly);
    }
    return mesh;
}

TriMesh parse_obj(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    TriMesh mesh;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z)) throw Error("mesh.parse", "OBJ bad vertex line");
            mesh.vertices.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<int> poly;
            std::string tok;
            while (ls >> tok) {
                // "i", "i/t", "i/t/n", "i//n" — the vertex index leads
                int idx = 0;
                size_t p = 0;
                bool neg = false;
                if (p < tok.size() && tok[p] == '-') { neg = true; ++p; }
                while (p < tok.size() && std::isdigit(static_cast<unsigned char>(tok[p])))
                    idx = idx * 10 + (tok[p++] - '0');
                if (idx == 0) throw Error("mesh.parse", "OBJ bad face token: " + tok);
                if (neg)
                    idx = static_cast<int>(mesh.vertices.size()) - idx; // relative index
                else
                    idx -= 1; // OBJ is 1-based
                poly.push_back(idx);
            }
            push_face(mesh.triangles, poly);
        }
    }
    return mesh;
}

struct PlyData {
    std::vector<Eigen::Vector3d> points;
    std::vector<std::array<int, 3>> faces;
};

PlyData parse_ply(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.substr(0, 3) != "ply")
        throw Error("mesh.parse", "not a PLY file");
    struct Element {
        std::string name;
        long count = 0;
        std::vector<std::string> props;
        bool list = false;
    };
    std::vector<Element> elements;
    bool ascii = false;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "format") {
            std::string fmt;
            ls >> fmt;
            ascii = (fmt == "ascii");
        } else if (tag == "element") {
            Element e;
            ls >> e.name >> e.count;
            elements.push_back(e);
        } else if (tag == "property") {
            if (elements.empty()) throw Error("mesh.parse", "PLY property before element");
            std::string type;
            ls >> type;
            if (type == "list") {
                std::string t1, t2, name;
                ls >> t1 >> t2 >> name;
                elements.back().list = true;
                elements.back().props.push_back(name);
            } else {
                std::string name;
                ls >> name;
                elements.back().props.push_back(name);
            }
        } else if (tag == "end_header") {
            break;
        }
    }
    if (!ascii) throw Error("mesh.parse", "only ASCII PLY is supported");

    PlyData data;
    for (const auto& e : elements) {
        if (e.name == "vertex") {
            int xi = -1, yi = -1, zi = -1;
            for (size_t i = 0; i < e.props.size(); ++i) {
                if (e.props[i] == "x") xi = static_cast<int>(i);
                if (e.props[i] == "y") yi = static_cast<int>(i);
                if (e.props[i] == "z") zi = static_cast<int>(i);
            }
            if (xi < 0 || yi < 0 || zi < 0)
                throw Error("mesh.parse", "PLY vertex element lacks x/y/z");
            for (long i = 0; i < e.count; ++i) {
                if (!next_line(in, line)) throw Error("mesh.parse", "PLY truncated vertices");
                std::istringstream vs(line);
                std::vector<double> vals(e.props.size());
                for (auto& v : vals)
                    if (!(vs >> v)) throw Error("mesh.parse", "PLY bad vertex line");
                data.points.emplace_back(vals[xi], vals[yi], vals[zi]);
            }
        } else if (e.name == "face") {
            for (long i = 0; i < e.count; ++i) {
                if (!next_line(in, line)) throw Error("mesh.parse", "PLY truncated faces");
                std::istringstream fs(line);
                int k;
                if (!(fs >> k)) throw Error("mesh.parse", "PLY bad face line");
                std::vector<int> poly(k);
                for (int j = 0; j < k; ++j)
                    if (!(fs >> poly[j])) throw Error("mesh.parse", "PLY bad face line");
                push_face(data.faces, poly);
            }
        } else {
            for (long i = 0; i < e.count; ++i) next_line(in, line); // skip unknown element
        }
    }
    return data;
}

} // namespace

void TriMesh::finalize() {
    const int n = n_vertices();
    // index range and repeated vertices
    for (size_t t = 0; t < triangles.size(); ++t) {
        const auto& tri = triangles[t];
        for (int j = 0; j < 3; ++j)
            if (tri[j] < 0 || tri[j] >= n)
                throw Error("mesh.parse",
                            "face " + std::to_string(t) + " has out-of-range vertex index");
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
            throw Error("mesh.degenerate_face",
                        "face " + std::to_string(t) + " repeats a vertex");
    }

    // areas + degenerate test (area > 1e-12 * squared mean edge length of the face)
    tri_area.resize(triangles.size());
    std::string offenders;
    for (size_t t = 0; t < triangles.size(); ++t) {
        const auto& tri = triangles[t];
        Eigen::Vector3d e1 = vertices[tri[1]] - vertices[tri[0]];
        Eigen::Vector3d e2 = vertices[tri[2]] - vertices[tri[0]];
        Eigen::Vector3d e3 = vertices[tri[2]] - vertices[tri[1]];
        double area = 0.5 * e1.cross(e2).norm();
        tri_area[t] = area;
        double mean_edge = (e1.norm() + e2.norm() + e3.norm()) / 3.0;
        if (!(area > 1e-12 * mean_edge * mean_edge)) {
            if (!offenders.empty()) offenders += ",";
            offenders += std::to_string(t);
        }
    }
    if (!offenders.empty())
        throw Error("mesh.degenerate_face", "degenerate faces: " + offenders);

    // edge -> incident triangle count
    std::unordered_map<uint64_t, int> edge_tris;
    edge_tris.reserve(triangles.size() * 2);
    for (size_t t = 0; t < triangles.size(); ++t) {
        const auto& tri = triangles[t];
        for (int j = 0; j < 3; ++j) {
            int a = tri[j], b = tri[(j + 1) % 3];
            int cnt = ++edge_tris[edge_key(a, b)];
            if (cnt > 2)
                throw Error("mesh.nonmanifold_edge",
                            "edge (" + std::to_string(std::min(a, b)) + "," +
                                std::to_string(std::max(a, b)) +
                                ") has more than two incident triangles");
        }
    }

    boundary_edges.clear();
    edge_count = static_cast<int>(edge_tris.size());
    double edge_len_sum = 0.0;
    std::vector<std::vector<int>> nbrs(n);
    for (const auto& [key, cnt] : edge_tris) {
        int a = static_cast<int>(key >> 32);
        int b = static_cast<int>(key & 0xffffffffu);
        nbrs[a].push_back(b);
        nbrs[b].push_back(a);
        edge_len_sum += (vertices[a] - vertices[b]).norm();
        if (cnt == 1) boundary_edges.push_back({a, b});
    }
    std::sort(boundary_edges.begin(), boundary_edges.end());
    mean_edge_length = edge_count > 0 ? edge_len_sum / edge_count : 0.0;
    surface_area = 0.0;
    for (double a : tri_area) surface_area += a;

    vtx_offsets.assign(n + 1, 0);
    for (int v = 0; v < n; ++v) {
        std::sort(nbrs[v].begin(), nbrs[v].end());
        vtx_offsets[v + 1] = vtx_offsets[v] + static_cast<int>(nbrs[v].size());
    }
    vtx_nbrs.resize(vtx_offsets[n]);
    for (int v = 0; v < n; ++v)
        std::copy(nbrs[v].begin(), nbrs[v].end(), vtx_nbrs.begin() + vtx_offsets[v]);

    tri_offsets.assign(n + 1, 0);
    for (const auto& tri : triangles)
        for (int j = 0; j < 3; ++j) tri_offsets[tri[j] + 1]++;
    for (int v = 0; v < n; ++v) tri_offsets[v + 1] += tri_offsets[v];
    tri_ids.resize(tri_offsets[n]);
    std::vector<int> cursor(tri_offsets.begin(), tri_offsets.end() - 1);
    for (size_t t = 0; t < triangles.size(); ++t)
        for (int j = 0; j < 3; ++j) tri_ids[cursor[triangles[t][j]]++] = static_cast<int>(t);
}

TriMesh load_mesh_text(const std::string& text, MeshFormat format) {
    TriMesh mesh;
    switch (format) {
    case MeshFormat::off:
        mesh = parse_off(text);
        break;
    case MeshFormat::obj:
        mesh = parse_obj(text);
        break;
    case MeshFormat::ply_ascii: {
        PlyData data = parse_ply(text);
        mesh.vertices = std::move(data.points);
        mesh.triangles = std::move(data.faces);
        break;
    }
    }
    mesh.finalize();
    return mesh;
}

TriMesh load_mesh(const std::string& path) {
    std::string ext = lower_ext(path);
    MeshFormat fmt;
    if (ext == "off") fmt = MeshFormat::off;
    else if (ext == "obj") fmt = MeshFormat::obj;
    else if (ext == "ply") fmt = MeshFormat::ply_ascii;
    else throw Error("io.bad_format", "unknown mesh extension: " + path);
    return load_mesh_text(read_text_file(path), fmt);
}

void save_off(const TriMesh& mesh, const std::string& path) {
    std::ostringstream out;
    out << "OFF\n" << mesh.n_vertices() << " " << mesh.n_triangles() << " 0\n";
    for (const auto& v : mesh.vertices)
        out << format_double(v.x()) << " " << format_double(v.y()) << " "
            << format_double(v.z()) << "\n";
    for (const auto& t : mesh.triangles)
        out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
    write_text_file(path, out.str());
}

PointCloud cloud_from_points(std::vector<Eigen::Vector3d> points) {
    PointCloud cloud;
    cloud.points = std::move(points);
    if (cloud.points.empty()) return cloud;

    Eigen::Vector3d lo = cloud.points[0], hi = cloud.points[0];
    for (const auto& p : cloud.points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    double tol = 1e-12 * std::max((hi - lo).norm(), 1.0);

    // coincidence check: sort by x, compare within the tolerance window
    std::vector<int> order(cloud.points.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return cloud.points[a].x() < cloud.points[b].x();
    });
    for (size_t i = 0; i < order.size(); ++i) {
        for (size_t j = i + 1; j < order.size(); ++j) {
            if (cloud.points[order[j]].x() - cloud.points[order[i]].x() > tol) break;
            if ((cloud.points[order[i]] - cloud.points[order[j]]).norm() <= tol)
                throw Error("cloud.coincident_points",
                            "points " + std::to_string(order[i]) + " and " +
                                std::to_string(order[j]) + " coincide");
        }
    }
    return cloud;
}

PointCloud load_cloud(const std::string& path) {
    std::string ext = lower_ext(path);
    std::string text = read_text_file(path);
    std::vector<Eigen::Vector3d> pts;
    if (ext == "ply") {
        PlyData data = parse_ply(text);
        pts = std::move(data.points);
    } else { // xyz text
        std::istringstream in(text);
        std::string line;
        while (next_line(in, line)) {
            std::istringstream ls(line);
            double x, y, z;
            if (!(ls >> x >> y >> z)) throw Error("cloud.parse", "bad XYZ line: " + line);
            pts.emplace_back(x, y, z);
        }
    }
    return cloud_from_points(std::move(pts));
}

void save_xyz(const PointCloud& cloud, const std::string& path) {
    std::ostringstream out;
    for (const auto& p : cloud.points)
        out << format_double(p.x()) << " " << format_double(p.y()) << " "
            << format_double(p.z()) << "\n";
    write_text_file(path, out.str());
}

} // namespace sqmatch
