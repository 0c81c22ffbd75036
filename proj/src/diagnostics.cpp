#include "cfdg/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cfdg {

HistogramGrid HistogramGrid::from_samples(std::span<const Vec> p, std::span<const Vec> q, int n_bins) {
    if (p.empty() || q.empty()) throw ValidationError("histogram grid: empty sample set");
    if (n_bins < 1) throw ValidationError("histogram grid: n_bins must be >= 1");
    const size_t dims = p[0].size();
    if (q[0].size() != dims) throw ValidationError("histogram grid: dimension mismatch");
    HistogramGrid g;
    g.edges.resize(dims);
    for (size_t d = 0; d < dims; ++d) {
        double lo = p[0][d], hi = p[0][d];
        auto scan = [&](std::span<const Vec> set) {
            for (const auto& v : set) {
                if (v.size() != dims) throw ValidationError("histogram grid: ragged samples");
                lo = std::min(lo, v[d]);
                hi = std::max(hi, v[d]);
            }
        };
        scan(p);
        scan(q);
        if (!(hi > lo)) hi = lo + 1.0;  // degenerate dimension: single occupied bin
        Vec edges(n_bins + 1);
        for (int i = 0; i <= n_bins; ++i) {
            edges[i] = lo + (hi - lo) * static_cast<double>(i) / n_bins;
        }
        edges[n_bins] = hi;
        g.edges[d] = std::move(edges);
    }
    return g;
}

int HistogramGrid::bin_index(int dim, double x) const {
    const Vec& e = edges[dim];
    const int n = static_cast<int>(e.size()) - 1;
    if (x <= e.front()) return 0;
    if (x >= e.back()) return n - 1;  // last bin closed
    const double w = (e.back() - e.front()) / n;
    int i = static_cast<int>((x - e.front()) / w);
    if (i >= n) i = n - 1;
    // uniform-width arithmetic can land one off at bin boundaries
    if (x < e[i]) --i;
    if (x >= e[i + 1]) ++i;
    return i;
}

double js_divergence(std::span<const Vec> samples_p, std::span<const Vec> samples_q,
                     const HistogramGrid& grid) {
    if (samples_p.empty() || samples_q.empty()) {
        throw ValidationError("js_divergence: empty sample set");
    }
    if (samples_p[0].size() != samples_q[0].size() ||
        static_cast<int>(samples_p[0].size()) != grid.dims()) {
        throw ValidationError("js_divergence: dimension mismatch");
    }
    const int dims = grid.dims();
    const int nb = grid.bins();
    auto kl_term = [](double a, double m) {  // a * log2(a/m), 0 log 0 = 0
        if (a <= 0.0) return 0.0;
        return a * std::log2(a / m);
    };
    double total = 0.0;
    Vec hp(nb), hq(nb);
    for (int d = 0; d < dims; ++d) {
        std::fill(hp.begin(), hp.end(), 0.0);
        std::fill(hq.begin(), hq.end(), 0.0);
        for (const auto& v : samples_p) hp[grid.bin_index(d, v[d])] += 1.0;
        for (const auto& v : samples_q) hq[grid.bin_index(d, v[d])] += 1.0;
        for (auto& x : hp) x /= static_cast<double>(samples_p.size());
        for (auto& x : hq) x /= static_cast<double>(samples_q.size());
        double js = 0.0;
        for (int i = 0; i < nb; ++i) {
            const double m = 0.5 * (hp[i] + hq[i]);
            if (m <= 0.0) continue;
            js += 0.5 * kl_term(hp[i], m) + 0.5 * kl_term(hq[i], m);
        }
        total += js;
    }
    double out = total / dims;
    if (out < 0.0) out = 0.0;
    if (out > 1.0) out = 1.0;
    return out;
}

static std::vector<Vec> subsample(std::vector<Vec> v, size_t n, Rng& rng) {
    if (v.size() <= n) return v;
    // partial Fisher-Yates: first n entries are a uniform sample
    for (size_t i = 0; i < n; ++i) {
        std::swap(v[i], v[i + rng.uniform_index(v.size() - i)]);
    }
    v.resize(n);
    return v;
}

std::vector<DivergenceRow> divergence_report(const BufferSet& buffers, const TransitionCodec& codec,
                                             int n_bins, uint64_t subsample_seed) {
    auto extract = [&](const ReplayBuffer& buf, int what) {  // 0 state, 1 action, 2 encoded
        std::vector<Vec> out;
        out.reserve(buf.size());
        for (size_t i = 0; i < buf.size(); ++i) {
            const Transition& t = buf.at(i);
            if (what == 0) out.push_back(t.state);
            else if (what == 1) out.push_back(t.action);
            else out.push_back(codec.encode(t));
        }
        return out;
    };
    struct PairDef {
        const char* name;
        const ReplayBuffer* lhs;
    };
    const std::vector<PairDef> pairs = {
        {"off_vs_on", &buffers.d_off},
        {"syn_on_vs_on", &buffers.d_on_syn},
        {"syn_off_vs_on", &buffers.d_off_syn},
        {"syn_all_vs_on", nullptr},  // union of the two synthetic buffers
    };
    const char* quantities[3] = {"State", "Action", "Transition"};
    std::vector<DivergenceRow> rows;
    for (int what = 0; what < 3; ++what) {
        std::vector<Vec> on = extract(buffers.d_on, what);
        if (on.empty()) throw ValidationError("divergence_report: d_on is empty");
        for (const auto& pd : pairs) {
            std::vector<Vec> lhs;
            if (pd.lhs) {
                lhs = extract(*pd.lhs, what);
            } else {
                lhs = extract(buffers.d_on_syn, what);
                auto more = extract(buffers.d_off_syn, what);
                lhs.insert(lhs.end(), more.begin(), more.end());
            }
            if (lhs.empty()) {
                throw ValidationError(std::string("divergence_report: no samples for ") + pd.name);
            }
            const size_t n = std::min(lhs.size(), on.size());
            Rng rng_l(derive_seed(subsample_seed, "sub-l", static_cast<uint64_t>(what)));
            Rng rng_r(derive_seed(subsample_seed, "sub-r", static_cast<uint64_t>(what)));
            std::vector<Vec> a = subsample(lhs, n, rng_l);
            std::vector<Vec> b = subsample(on, n, rng_r);
            HistogramGrid grid = HistogramGrid::from_samples(a, b, n_bins);
            rows.push_back({quantities[what], pd.name, js_divergence(a, b, grid)});
        }
    }
    return rows;
}

void save_divergence_csv(const std::vector<DivergenceRow>& rows, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    os << "quantity,pair,value\n";
    for (const auto& r : rows) {
        os << r.quantity << "," << r.pair << "," << fmt_double(r.value) << "\n";
    }
    if (!os) throw IoError("write failed: " + path);
}

std::vector<DivergenceRow> load_divergence_csv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    std::vector<DivergenceRow> rows;
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty divergence file: " + path);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        DivergenceRow r;
        std::string value;
        if (!std::getline(ss, r.quantity, ',') || !std::getline(ss, r.pair, ',') ||
            !std::getline(ss, value)) {
            throw IoError("bad divergence row in: " + path);
        }
        r.value = parse_double(value);
        rows.push_back(std::move(r));
    }
    return rows;
}

CurveStats aggregate_curves(const std::vector<CurveSeries>& runs) {
    if (runs.empty()) throw ValidationError("aggregate_curves: no runs");
    const size_t len = runs[0].size();
    CurveStats out;
    out.steps.reserve(len);
    for (const auto& run : runs) {
        if (run.size() != len) throw ValidationError("aggregate_curves: cadence mismatch");
    }
    for (size_t i = 0; i < len; ++i) {
        const long step = runs[0][i].first;
        double sum = 0.0;
        for (const auto& run : runs) {
            if (run[i].first != step) throw ValidationError("aggregate_curves: cadence mismatch");
            sum += run[i].second;
        }
        const double mean = sum / runs.size();
        double var = 0.0;
        for (const auto& run : runs) {
            const double d = run[i].second - mean;
            var += d * d;
        }
        out.steps.push_back(step);
        out.mean.push_back(mean);
        out.stdev.push_back(std::sqrt(var / runs.size()));
    }
    return out;
}

}  // namespace cfdg
