#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stnet/network.hpp"
#include "stnet/rf_geometry.hpp"
#include "stnet/volume.hpp"

namespace stnet {

// Post-synaptic activities of one top node: the elementwise products of its
// receptive-field activities with its kernel. Entries are stored
// channel-outermost over `window` (spatial layers) or as a plain vector (fc).
struct PSField {
  std::vector<double> values;
  // Flat index into the lower volume for each entry of `values`.
  std::vector<std::size_t> source_indices;
  bool spatial = false;
  Window window;
  std::size_t channels = 0;

  std::size_t size() const noexcept { return values.size(); }
  // Row / column of entry i, local to the window.
  std::size_t local_row(std::size_t i) const noexcept { return (i % window.area()) / window.cols(); }
  std::size_t local_col(std::size_t i) const noexcept { return (i % window.area()) % window.cols(); }
};

// PS field of top node (h, w, c) of `layer`, given the layer's input volume.
// Throws Error for elementwise and flatten layers.
PSField ps_activities(const FeatureVolume& lower, const LayerSpec& layer, std::size_t top_h,
                      std::size_t top_w, std::size_t top_c);

// Lower bound of the activity-preserving margin. NEG entries (<= 0) seed a
// buffer; positives are added largest first until the buffer reaches
// epsilon. Returns the last positive added, or nullopt when no entry is
// positive (a dead node).
std::optional<double> ap_threshold(std::span<const double> ps, double epsilon);

struct Stage1Result {
  std::vector<std::size_t> winners;  // ascending positions in the PS field
  double theta = 0.0;
  double lower_bound = 0.0;
};

// Parametric WTA with theta tuned by ap_threshold: keeps every entry at or
// above max(PS) - theta. nullopt for a dead node.
std::optional<Stage1Result> stage1_pwta(std::span<const double> ps, double epsilon);

inline const std::vector<double>& default_si_coefficients() {
  static const std::vector<double> coefficients{3, 2, 1, 0, -1, -2, -3};
  return coefficients;
}

// Statistically-important selection over the subset `candidates` of `values`:
// finds the first coefficient a (scanning `coefficients` in order) for which
// {v > mean + a * stddev} is nonempty, steps `offset` coefficients further
// down the list (clamped to the last), and returns that selection. A single
// candidate, or candidates with zero spread, come back unchanged.
std::vector<std::size_t> stage2_si(std::span<const std::size_t> candidates,
                                   std::span<const double> values, int offset,
                                   std::span<const double> coefficients = default_si_coefficients());

// An 8-connected region of occupied window cells.
struct SpatialRegion {
  std::vector<std::size_t> cells;  // row-major local cell ids, ascending
  double ps_sum = 0.0;             // sum of channel-summed PS over the cells
  std::size_t anchor = 0;          // smallest cell id (lexicographic (h, w))
};

// Channel-summed projection of `winners` onto the window grid, partitioned
// into 8-connected regions, ordered by anchor.
std::vector<SpatialRegion> sc_regions(std::span<const std::size_t> winners, const PSField& ps);

// Score of a region under the SC trade-off multiplier.
inline double sc_score(const SpatialRegion& region, double sc_alpha) {
  return sc_alpha * region.ps_sum + (1.0 - sc_alpha) * static_cast<double>(region.cells.size());
}

// Index into `regions` of the winning region: highest score, then larger
// ps_sum, then smallest anchor.
std::size_t sc_winning_region(std::span<const SpatialRegion> regions, double sc_alpha);

// Spatially-contiguous selection: members of `winners` whose cell lies in the
// winning region.
std::vector<std::size_t> stage2_sc(std::span<const std::size_t> winners, const PSField& ps,
                                   double sc_alpha);

// Normalized connection weights PS_j / sum(PS over winners).
std::vector<double> normalized_weights(std::span<const std::size_t> winners,
                                       std::span<const double> values);

// lower[source(j)] += weight_j * top_gating for every winner j.
void stage3_propagate(double top_gating, std::span<const std::size_t> winners, const PSField& ps,
                      GatingVolume& lower);

// SI pruning over the nonzero entries of a bridge gating volume. Throws
// TdPassDied when nothing is active.
GatingVolume bridge_select(const GatingVolume& gating, int offset,
                           std::span<const double> coefficients = default_si_coefficients());

struct SelectionConfig {
  double epsilon = 0.0;
  int offset_fc = 0;
  std::optional<int> offset_bridge = 0;  // nullopt disables bridge pruning
  double sc_alpha = 0.2;
  std::vector<double> si_coefficients = default_si_coefficients();
  std::string stop_layer = "input";
  // false replaces Stage 2 with "single highest PS" at fc layers and the
  // identity at spatial layers.
  bool stage2_enabled = true;
};

void validate(const SelectionConfig& config);

struct WinnerSet {
  std::vector<std::size_t> stage1;
  std::vector<std::size_t> stage2;
  double theta = 0.0;
  std::vector<double> normalized_weights;
};

// Stages 1 and 2 plus weight normalization for one PS field. nullopt for a
// dead node.
std::optional<WinnerSet> select_winners(const PSField& ps, LayerKind kind,
                                        const SelectionConfig& config);

struct LayerTdStats {
  std::string layer;
  std::size_t upper_index = 0;  // trace index of the gating volume above
  std::size_t active_nodes = 0;
  std::size_t dead_nodes = 0;
  double dead_mass = 0.0;
  std::size_t stage1_winners = 0;
  std::size_t stage2_winners = 0;
  double mean_theta = 0.0;
  double mass_upper = 0.0;
  double mass_lower = 0.0;
  bool bridge_pruned = false;
  double pruned_mass = 0.0;
};

struct TdResult {
  // Indexed like ActivationTrace::volumes; entries below stop_index are empty.
  std::vector<GatingVolume> gating;
  std::size_t stop_index = 0;
  std::size_t class_k = 0;
  std::vector<LayerTdStats> layers;  // top-down order

  const GatingVolume& at_stop() const { return gating.at(stop_index); }
  // Nonzero gating nodes over all computed volumes / their total size.
  double active_fraction() const;
};

// Top-down selective-tuning pass from class `class_k` down to
// config.stop_layer.
TdResult td_pass(const ActivationTrace& trace, const Network& net, std::size_t class_k,
                 const SelectionConfig& config, const ExecOptions& exec = {});

nlohmann::json to_json(const TdResult& result);

}  // namespace stnet
