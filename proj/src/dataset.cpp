#include "cfdg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cfdg {

std::vector<TierSpec> parse_mix(const std::string& text) {
    std::vector<TierSpec> mix;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        TierSpec t;
        std::istringstream is(item);
        std::string field;
        std::getline(is, t.policy, ':');
        if (std::getline(is, field, ':')) t.fraction = parse_double(field);
        if (std::getline(is, field, ':')) t.noise_scale = parse_double(field);
        mix.push_back(t);
    }
    if (mix.empty()) throw ValidationError("empty behavior mix");
    if (mix.size() == 1 && mix[0].fraction == 1.0) return mix;
    double total = 0.0;
    for (const auto& t : mix) total += t.fraction;
    if (std::abs(total - 1.0) > 1e-9) {
        throw ValidationError("mix fractions must sum to 1 (got " + fmt_double(total) + ")");
    }
    return mix;
}

std::string mix_to_string(const std::vector<TierSpec>& mix) {
    std::string out;
    for (const auto& t : mix) {
        if (!out.empty()) out += ",";
        out += t.policy + ":" + fmt_double(t.fraction);
        if (t.noise_scale >= 0.0) out += ":" + fmt_double(t.noise_scale);
    }
    return out;
}

OfflineDataset build_offline_dataset(const EnvSpec& spec, const std::vector<TierSpec>& mix,
                                     size_t n, uint64_t seed) {
    if (mix.empty()) throw ValidationError("build_offline_dataset: empty mix");
    if (n < 1) throw ValidationError("build_offline_dataset: n must be >= 1");
    // Largest-remainder apportionment keeps every tier within +-1 of its share.
    std::vector<size_t> counts(mix.size());
    std::vector<std::pair<double, size_t>> rema;
    size_t assigned = 0;
    for (size_t i = 0; i < mix.size(); ++i) {
        const double share = mix[i].fraction * static_cast<double>(n);
        counts[i] = static_cast<size_t>(share);
        assigned += counts[i];
        rema.push_back({share - static_cast<double>(counts[i]), i});
    }
    std::stable_sort(rema.begin(), rema.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (size_t k = 0; assigned < n; ++k, ++assigned) counts[rema[k % rema.size()].second] += 1;

    OfflineDataset ds;
    ds.transitions.reserve(n);
    for (size_t i = 0; i < mix.size(); ++i) {
        Policy pol = make_tier_policy(spec, mix[i].policy, mix[i].noise_scale);
        const uint64_t tier_seed = derive_seed(seed, "tier", i);
        size_t produced = 0;
        uint64_t episode = 0;
        while (produced < counts[i]) {
            Rng rng(derive_seed(tier_seed, "episode", episode++));
            Vec state = sample_start(spec, rng);
            for (int t = 1; t <= spec.horizon && produced < counts[i]; ++t) {
                Vec action = pol(state, rng);
                StepResult r = env_step(spec, state, action, t);
                ds.transitions.push_back({state, action, r.reward, r.next_state, r.terminal});
                ++produced;
                state = r.next_state;
                if (r.terminal) break;
            }
        }
    }
    ds.meta = {spec.name, mix_to_string(mix), seed, ds.transitions.size()};
    return ds;
}

static std::string meta_path(const std::string& path) { return path + ".meta"; }

void save_dataset(const OfflineDataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    if (ds.transitions.empty()) throw ValidationError("save_dataset: empty dataset");
    const size_t sd = ds.transitions[0].state.size();
    const size_t ad = ds.transitions[0].action.size();
    for (size_t i = 0; i < sd; ++i) os << "s" << i << ",";
    for (size_t i = 0; i < ad; ++i) os << "a" << i << ",";
    os << "r,";
    for (size_t i = 0; i < sd; ++i) os << "ns" << i << ",";
    os << "terminal\n";
    for (const auto& t : ds.transitions) {
        for (double v : t.state) os << fmt_double(v) << ",";
        for (double v : t.action) os << fmt_double(v) << ",";
        os << fmt_double(t.reward) << ",";
        for (double v : t.next_state) os << fmt_double(v) << ",";
        os << (t.terminal ? 1 : 0) << "\n";
    }
    if (!os) throw IoError("write failed: " + path);

    std::ofstream ms(meta_path(path), std::ios::binary);
    if (!ms) throw IoError("cannot open for write: " + meta_path(path));
    ms << "env = " << ds.meta.env << "\n";
    ms << "mix = " << ds.meta.mix << "\n";
    ms << "seed = " << ds.meta.seed << "\n";
    ms << "size = " << ds.meta.size << "\n";
    if (!ms) throw IoError("write failed: " + meta_path(path));
}

static std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

OfflineDataset load_dataset(const std::string& path, const EnvSpec& spec) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open dataset: " + path);
    OfflineDataset ds;
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty dataset file: " + path);
    const size_t want = 2 * spec.state_dim + spec.action_dim + 2;
    if (split_csv(line).size() != want) {
        throw ValidationError("dataset header does not match env '" + spec.name + "'");
    }
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (f.size() != want) throw ValidationError("bad dataset row in: " + path);
        Transition t;
        size_t i = 0;
        t.state.resize(spec.state_dim);
        for (int d = 0; d < spec.state_dim; ++d) t.state[d] = parse_double(f[i++]);
        t.action.resize(spec.action_dim);
        for (int d = 0; d < spec.action_dim; ++d) t.action[d] = parse_double(f[i++]);
        t.reward = parse_double(f[i++]);
        t.next_state.resize(spec.state_dim);
        for (int d = 0; d < spec.state_dim; ++d) t.next_state[d] = parse_double(f[i++]);
        t.terminal = parse_long(f[i++]) != 0;
        ds.transitions.push_back(std::move(t));
    }
    if (ds.transitions.empty()) throw IoError("dataset has no rows: " + path);

    std::ifstream ms(meta_path(path), std::ios::binary);
    if (ms) {
        while (std::getline(ms, line)) {
            auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(0, eq);
            std::string val = line.substr(eq + 1);
            auto trim = [](std::string& s) {
                while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(0, 1);
                while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.pop_back();
            };
            trim(key);
            trim(val);
            if (key == "env") ds.meta.env = val;
            if (key == "mix") ds.meta.mix = val;
            if (key == "seed") ds.meta.seed = static_cast<uint64_t>(parse_long(val));
        }
    }
    ds.meta.size = ds.transitions.size();
    return ds;
}

double normalized_score(double raw, double random_ref, double expert_ref) {
    if (!(expert_ref > random_ref)) {
        throw ValidationError("normalized_score: expert_ref must exceed random_ref");
    }
    return 100.0 * (raw - random_ref) / (expert_ref - random_ref);
}

RefScores reference_scores(const EnvSpec& spec) {
    const uint64_t ref_seed = derive_seed(0x5eedULL, spec.name);
    RefScores r;
    r.random_ref = rollout(spec, make_tier_policy(spec, "random"), ref_seed, 20).mean_return;
    r.expert_ref = rollout(spec, make_tier_policy(spec, "expert"), ref_seed, 20).mean_return;
    return r;
}

}  // namespace cfdg
