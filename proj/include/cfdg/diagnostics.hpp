#pragma once

#include <span>
#include <string>
#include <vector>

#include "cfdg/augmentor.hpp"

namespace cfdg {

// Per-dimension uniform bin edges over the pooled range of two sample sets.
// Bin boundaries go right; the last bin is closed.
struct HistogramGrid {
    std::vector<Vec> edges;  // dims x (n_bins + 1), strictly increasing

    static HistogramGrid from_samples(std::span<const Vec> p, std::span<const Vec> q, int n_bins);
    int dims() const { return static_cast<int>(edges.size()); }
    int bins() const { return edges.empty() ? 0 : static_cast<int>(edges[0].size()) - 1; }
    int bin_index(int dim, double x) const;
};

// Jensen-Shannon divergence in bits (base-2, range [0,1]): per-dimension 1-D
// histograms on the shared grid, averaged across dimensions.
double js_divergence(std::span<const Vec> samples_p, std::span<const Vec> samples_q,
                     const HistogramGrid& grid);

struct DivergenceRow {
    std::string quantity;  // State | Action | Transition
    std::string pair;      // off_vs_on | syn_on_vs_on | syn_off_vs_on | syn_all_vs_on
    double value = 0.0;
};

// Table-3 style report. Both sides of each pair are subsampled to equal size
// (seeded) before histogramming.
std::vector<DivergenceRow> divergence_report(const BufferSet& buffers, const TransitionCodec& codec,
                                             int n_bins = 20, uint64_t subsample_seed = 0);

void save_divergence_csv(const std::vector<DivergenceRow>& rows, const std::string& path);
std::vector<DivergenceRow> load_divergence_csv(const std::string& path);

// Pointwise mean and population standard deviation across runs sharing an
// evaluation cadence.
struct CurveStats {
    std::vector<long> steps;
    Vec mean;
    Vec stdev;
};
using CurveSeries = std::vector<std::pair<long, double>>;
CurveStats aggregate_curves(const std::vector<CurveSeries>& runs);

}  // namespace cfdg
