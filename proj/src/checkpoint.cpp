#include "cfdg/checkpoint.hpp"

#include <fstream>
#include <sstream>

namespace cfdg {

const MlpParams& Checkpoint::net(const std::string& name) const {
    for (const auto& [n, p] : nets) {
        if (n == name) return p;
    }
    throw IoError("checkpoint: no network named '" + name + "'");
}

const Vec& Checkpoint::vec(const std::string& name) const {
    for (const auto& [n, v] : vectors) {
        if (n == name) return v;
    }
    throw IoError("checkpoint: no vector named '" + name + "'");
}

std::string Checkpoint::meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta) {
        if (k == key) return v;
    }
    throw IoError("checkpoint: no meta key '" + key + "'");
}

static void write_values(std::ostream& os, const double* p, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        os << (i ? " " : "") << fmt_double(p[i]);
    }
    os << "\n";
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    os << "ckpt 1\n";
    for (const auto& [k, v] : meta) os << "meta " << k << " " << v << "\n";
    for (const auto& [name, v] : vectors) {
        os << "vec " << name << " " << v.size() << "\n";
        write_values(os, v.data(), v.size());
    }
    for (const auto& [name, p] : nets) {
        os << "net " << name << " " << p.layers.size() << " " << (p.residual ? 1 : 0) << "\n";
        for (size_t k = 0; k < p.layers.size(); ++k) {
            const auto& l = p.layers[k];
            os << "layer " << k << " weight " << l.w.rows << " " << l.w.cols << "\n";
            write_values(os, l.w.a.data(), l.w.size());
            os << "layer " << k << " bias " << l.b.size() << "\n";
            write_values(os, l.b.data(), l.b.size());
        }
    }
    os << "end\n";
    if (!os) throw IoError("write failed: " + path);
}

static Vec read_values(std::istream& is, size_t n, const std::string& path) {
    Vec v(n);
    std::string line;
    if (!std::getline(is, line)) throw IoError("truncated checkpoint: " + path);
    std::istringstream ls(line);
    std::string tok;
    for (size_t i = 0; i < n; ++i) {
        if (!(ls >> tok)) throw IoError("truncated value row in: " + path);
        v[i] = parse_double(tok);
    }
    return v;
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    Checkpoint c;
    std::string line;
    if (!std::getline(is, line) || line != "ckpt 1") {
        throw IoError("not a checkpoint file: " + path);
    }
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "end") break;
        if (tag == "meta") {
            std::string key;
            ls >> key;
            std::string value;
            std::getline(ls, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            c.add_meta(key, value);
        } else if (tag == "vec") {
            std::string name;
            size_t n = 0;
            ls >> name >> n;
            c.add_vec(name, read_values(is, n, path));
        } else if (tag == "net") {
            std::string name;
            size_t n_layers = 0;
            int residual = 0;
            ls >> name >> n_layers >> residual;
            MlpParams p;
            p.residual = residual != 0;
            for (size_t k = 0; k < n_layers; ++k) {
                std::string lt, role;
                size_t idx = 0;
                int rows = 0, cols = 0;
                if (!std::getline(is, line)) throw IoError("truncated checkpoint: " + path);
                std::istringstream wl(line);
                wl >> lt >> idx >> role >> rows >> cols;
                if (lt != "layer" || role != "weight" || idx != k) {
                    throw IoError("malformed layer header in: " + path);
                }
                Linear l;
                l.w = Mat(rows, cols);
                l.w.a = read_values(is, static_cast<size_t>(rows) * cols, path);
                if (!std::getline(is, line)) throw IoError("truncated checkpoint: " + path);
                std::istringstream bl(line);
                size_t blen = 0;
                bl >> lt >> idx >> role >> blen;
                if (lt != "layer" || role != "bias" || idx != k) {
                    throw IoError("malformed bias header in: " + path);
                }
                l.b = read_values(is, blen, path);
                p.layers.push_back(std::move(l));
            }
            c.add_net(name, std::move(p));
        } else {
            throw IoError("unknown checkpoint tag '" + tag + "' in: " + path);
        }
    }
    return c;
}

}  // namespace cfdg
