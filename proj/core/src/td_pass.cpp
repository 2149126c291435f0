#include <utility>

#include "parallel.hpp"
#include "stnet/attention.hpp"

namespace stnet {
namespace {

struct NodeOutcome {
  bool dead = false;
  std::size_t stage1 = 0;
  double theta = 0.0;
  // (lower flat index, normalized weight) in winner order.
  std::vector<std::pair<std::size_t, double>> weights;
};

NodeOutcome select_for_node(const FeatureVolume& lower, const LayerSpec& layer,
                            const Shape3& upper, std::size_t flat,
                            const SelectionConfig& config) {
  const std::size_t plane = upper.plane();
  const std::size_t c = flat / plane;
  const std::size_t h = (flat % plane) / upper.width;
  const std::size_t w = flat % upper.width;
  const PSField ps = ps_activities(lower, layer, h, w, c);

  NodeOutcome out;
  const auto winners = select_winners(ps, layer.kind, config);
  if (!winners) {
    out.dead = true;
    return out;
  }
  out.stage1 = winners->stage1.size();
  out.theta = winners->theta;
  out.weights.reserve(winners->stage2.size());
  for (std::size_t j = 0; j < winners->stage2.size(); ++j) {
    out.weights.emplace_back(ps.source_indices[winners->stage2[j]],
                             winners->normalized_weights[j]);
  }
  return out;
}

}  // namespace

double TdResult::active_fraction() const {
  std::size_t active = 0;
  std::size_t total = 0;
  for (std::size_t i = stop_index; i < gating.size(); ++i) {
    active += count_nonzero(gating[i]);
    total += gating[i].size();
  }
  return total == 0 ? 0.0 : static_cast<double>(active) / static_cast<double>(total);
}

TdResult td_pass(const ActivationTrace& trace, const Network& net, std::size_t class_k,
                 const SelectionConfig& config, const ExecOptions& exec) {
  validate(config);
  const std::size_t depth = net.depth();
  if (trace.volumes.size() != depth + 1) {
    throw ShapeError("activation trace has " + std::to_string(trace.volumes.size()) +
                     " volumes, network needs " + std::to_string(depth + 1));
  }
  for (std::size_t i = 0; i <= depth; ++i) {
    if (trace.volumes[i].shape() != net.volume_shape(i)) {
      throw ShapeError("activation trace does not belong to this network");
    }
  }
  if (class_k >= net.class_count()) {
    throw ConfigError("class index " + std::to_string(class_k) + " out of range (" +
                      std::to_string(net.class_count()) + " classes)");
  }

  TdResult result;
  result.class_k = class_k;
  result.stop_index = net.trace_index_of(config.stop_layer);
  result.gating.resize(depth + 1);
  result.gating[depth] = GatingVolume(net.volume_shape(depth));
  result.gating[depth][class_k] = 1.0;

  const auto bridge = net.bridge_index();

  for (std::size_t i = depth; i-- > result.stop_index;) {
    const LayerSpec& layer = net.layers()[i];
    const GatingVolume& upper = result.gating[i + 1];
    const Shape3& lower_shape = net.volume_shape(i);

    LayerTdStats stats;
    stats.layer = layer.name;
    stats.upper_index = i + 1;
    stats.mass_upper = sum(upper);

    if (is_elementwise(layer.kind) || layer.kind == LayerKind::flatten) {
      result.gating[i] = upper.reshaped(lower_shape);
      stats.active_nodes = count_nonzero(upper);
    } else {
      std::vector<std::size_t> active;
      for (std::size_t n = 0; n < upper.size(); ++n) {
        if (upper[n] != 0.0) active.push_back(n);
      }
      std::vector<NodeOutcome> outcomes(active.size());
      detail::parallel_for(active.size(), exec.threads, [&](std::size_t a) {
        outcomes[a] =
            select_for_node(trace.volumes[i], layer, upper.shape(), active[a], config);
      });

      // Ordered reduction: scan order of the upper volume.
      GatingVolume lower(lower_shape);
      double theta_sum = 0.0;
      for (std::size_t a = 0; a < active.size(); ++a) {
        const double g = upper[active[a]];
        const NodeOutcome& o = outcomes[a];
        if (o.dead) {
          ++stats.dead_nodes;
          stats.dead_mass += g;
          continue;
        }
        stats.stage1_winners += o.stage1;
        stats.stage2_winners += o.weights.size();
        theta_sum += o.theta;
        for (const auto& [idx, w] : o.weights) lower[idx] += w * g;
      }
      stats.active_nodes = active.size();
      const std::size_t alive = active.size() - stats.dead_nodes;
      stats.mean_theta = alive == 0 ? 0.0 : theta_sum / static_cast<double>(alive);
      if (!active.empty() && alive == 0) throw TdPassDied(layer.name);
      result.gating[i] = std::move(lower);
    }

    if (bridge && i == *bridge + 1 && config.offset_bridge) {
      const double before = sum(result.gating[i]);
      result.gating[i] = bridge_select(result.gating[i], *config.offset_bridge,
                                       config.si_coefficients);
      stats.bridge_pruned = true;
      stats.pruned_mass = before - sum(result.gating[i]);
    }
    stats.mass_lower = sum(result.gating[i]);
    result.layers.push_back(std::move(stats));
  }
  return result;
}

nlohmann::json to_json(const TdResult& result) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& s : result.layers) {
    layers.push_back({
        {"layer", s.layer},
        {"active_nodes", s.active_nodes},
        {"dead_nodes", s.dead_nodes},
        {"dead_mass", s.dead_mass},
        {"stage1_winners", s.stage1_winners},
        {"stage2_winners", s.stage2_winners},
        {"mean_theta", s.mean_theta},
        {"mass_upper", s.mass_upper},
        {"mass_lower", s.mass_lower},
        {"bridge_pruned", s.bridge_pruned},
        {"pruned_mass", s.pruned_mass},
    });
  }
  return {
      {"class_k", result.class_k},
      {"stop_index", result.stop_index},
      {"active_fraction", result.active_fraction()},
      {"layers", std::move(layers)},
  };
}

}  // namespace stnet
