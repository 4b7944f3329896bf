#include "sqmatch/io_util.hpp"

#include "sqmatch/common.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace sqmatch {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io.not_found", "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io.write_failed", "cannot write " + path);
    out << content;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               std::vector<std::string>* header) {
    std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    std::vector<std::vector<std::string>> rows;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line);
        if (first) {
            first = false;
            if (header) *header = fields;
            continue;
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

} // namespace sqmatch
