#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "stnet/attention.hpp"

namespace stnet {

std::optional<double> ap_threshold(std::span<const double> ps, double epsilon) {
  double buffer = 0.0;
  std::vector<double> positives;
  for (double s : ps) {
    if (s > 0.0) {
      positives.push_back(s);
    } else {
      buffer += s;
    }
  }
  if (positives.empty()) return std::nullopt;
  std::sort(positives.begin(), positives.end(), std::greater<>());
  double last = positives.front();
  for (double p : positives) {
    buffer += p;
    last = p;
    if (buffer >= epsilon) break;
  }
  return last;
}

std::optional<Stage1Result> stage1_pwta(std::span<const double> ps, double epsilon) {
  const auto bound = ap_threshold(ps, epsilon);
  if (!bound) return std::nullopt;
  const double peak = *std::max_element(ps.begin(), ps.end());
  Stage1Result r;
  r.lower_bound = *bound;
  r.theta = peak - *bound;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i] >= r.lower_bound) r.winners.push_back(i);
  }
  return r;
}

std::vector<std::size_t> stage2_si(std::span<const std::size_t> candidates,
                                   std::span<const double> values, int offset,
                                   std::span<const double> coefficients) {
  std::vector<std::size_t> all(candidates.begin(), candidates.end());
  if (candidates.size() <= 1 || coefficients.empty()) return all;

  double mean = 0.0;
  for (std::size_t i : candidates) mean += values[i];
  mean /= static_cast<double>(candidates.size());
  double var = 0.0;
  for (std::size_t i : candidates) var += (values[i] - mean) * (values[i] - mean);
  const double sigma = std::sqrt(var / static_cast<double>(candidates.size()));
  if (sigma == 0.0) return all;

  const auto select = [&](double alpha) {
    std::vector<std::size_t> out;
    const double cut = mean + alpha * sigma;
    for (std::size_t i : candidates) {
      if (values[i] > cut) out.push_back(i);
    }
    return out;
  };

  for (std::size_t a = 0; a < coefficients.size(); ++a) {
    if (select(coefficients[a]).empty()) continue;
    const std::size_t loosened =
        std::min(a + static_cast<std::size_t>(std::max(offset, 0)), coefficients.size() - 1);
    return select(coefficients[loosened]);
  }
  return all;
}

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

std::vector<SpatialRegion> sc_regions(std::span<const std::size_t> winners, const PSField& ps) {
  if (!ps.spatial) throw Error("spatially-contiguous selection needs a spatial PS field");
  const std::size_t rows = ps.window.rows();
  const std::size_t cols = ps.window.cols();
  const std::size_t cells = rows * cols;

  std::vector<double> projected(cells, 0.0);
  std::vector<char> occupied(cells, 0);
  for (std::size_t i : winners) {
    const std::size_t cell = ps.local_row(i) * cols + ps.local_col(i);
    projected[cell] += ps.values[i];
    occupied[cell] = 1;
  }

  // Raster-order union-find over the 8-neighbourhood.
  std::vector<std::size_t> parent(cells);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t cell = r * cols + c;
      if (!occupied[cell]) continue;
      const auto link = [&](std::size_t other) {
        if (!occupied[other]) return;
        const std::size_t a = find_root(parent, cell);
        const std::size_t b = find_root(parent, other);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      };
      if (c > 0) link(cell - 1);
      if (r > 0) {
        link(cell - cols);
        if (c > 0) link(cell - cols - 1);
        if (c + 1 < cols) link(cell - cols + 1);
      }
    }
  }

  // Roots are the smallest cell of each region, so regions come out ordered
  // by anchor.
  std::vector<SpatialRegion> regions;
  std::vector<std::size_t> region_of(cells, 0);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    if (!occupied[cell]) continue;
    const std::size_t root = find_root(parent, cell);
    if (root == cell) {
      region_of[cell] = regions.size();
      regions.push_back({{}, 0.0, cell});
    }
    SpatialRegion& region = regions[region_of[root]];
    region.cells.push_back(cell);
    region.ps_sum += projected[cell];
  }
  return regions;
}

std::size_t sc_winning_region(std::span<const SpatialRegion> regions, double sc_alpha) {
  if (regions.empty()) throw Error("no regions to select from");
  std::size_t best = 0;
  double best_score = sc_score(regions[0], sc_alpha);
  for (std::size_t i = 1; i < regions.size(); ++i) {
    const double score = sc_score(regions[i], sc_alpha);
    const bool better =
        score > best_score || (score == best_score && regions[i].ps_sum > regions[best].ps_sum) ||
        (score == best_score && regions[i].ps_sum == regions[best].ps_sum &&
         regions[i].anchor < regions[best].anchor);
    if (better) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

std::vector<std::size_t> stage2_sc(std::span<const std::size_t> winners, const PSField& ps,
                                   double sc_alpha) {
  const auto regions = sc_regions(winners, ps);
  if (regions.empty()) return {};
  const auto& win = regions[sc_winning_region(regions, sc_alpha)];
  std::vector<std::size_t> out;
  for (std::size_t i : winners) {
    const std::size_t cell = ps.local_row(i) * ps.window.cols() + ps.local_col(i);
    if (std::binary_search(win.cells.begin(), win.cells.end(), cell)) out.push_back(i);
  }
  return out;
}

std::vector<double> normalized_weights(std::span<const std::size_t> winners,
                                       std::span<const double> values) {
  double total = 0.0;
  for (std::size_t i : winners) total += values[i];
  std::vector<double> w;
  w.reserve(winners.size());
  for (std::size_t i : winners) w.push_back(values[i] / total);
  return w;
}

void stage3_propagate(double top_gating, std::span<const std::size_t> winners, const PSField& ps,
                      GatingVolume& lower) {
  if (top_gating == 0.0 || winners.empty()) return;
  const auto weights = normalized_weights(winners, ps.values);
  for (std::size_t j = 0; j < winners.size(); ++j) {
    lower[ps.source_indices[winners[j]]] += weights[j] * top_gating;
  }
}

GatingVolume bridge_select(const GatingVolume& gating, int offset,
                           std::span<const double> coefficients) {
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < gating.size(); ++i) {
    if (gating[i] != 0.0) active.push_back(i);
  }
  if (active.empty()) throw TdPassDied("bridge");
  const auto keep = stage2_si(active, gating.data(), offset, coefficients);
  GatingVolume out(gating.shape());
  for (std::size_t i : keep) out[i] = gating[i];
  return out;
}

void validate(const SelectionConfig& config) {
  if (!(config.epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
  if (config.offset_fc < 0) throw ConfigError("offset_fc must be >= 0");
  if (config.offset_bridge && *config.offset_bridge < 0) {
    throw ConfigError("offset_bridge must be >= 0");
  }
  if (!(config.sc_alpha >= 0.0 && config.sc_alpha <= 1.0)) {
    throw ConfigError("sc_alpha must lie in [0, 1]");
  }
  if (config.si_coefficients.empty()) throw ConfigError("si_coefficients must be nonempty");
  if (!std::is_sorted(config.si_coefficients.begin(), config.si_coefficients.end(),
                      std::greater<>())) {
    throw ConfigError("si_coefficients must be in descending order");
  }
}

std::optional<WinnerSet> select_winners(const PSField& ps, LayerKind kind,
                                        const SelectionConfig& config) {
  auto first = stage1_pwta(ps.values, config.epsilon);
  if (!first) return std::nullopt;

  WinnerSet w;
  w.theta = first->theta;
  w.stage1 = std::move(first->winners);
  if (!config.stage2_enabled) {
    if (kind == LayerKind::fc) {
      std::size_t best = w.stage1.front();
      for (std::size_t i : w.stage1) {
        if (ps.values[i] > ps.values[best]) best = i;
      }
      w.stage2 = {best};
    } else {
      w.stage2 = w.stage1;
    }
  } else if (kind == LayerKind::fc) {
    w.stage2 = stage2_si(w.stage1, ps.values, config.offset_fc, config.si_coefficients);
  } else {
    w.stage2 = stage2_sc(w.stage1, ps, config.sc_alpha);
  }
  w.normalized_weights = normalized_weights(w.stage2, ps.values);
  return w;
}

}  // namespace stnet
