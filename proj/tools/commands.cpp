#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>

#include "stnet/attention.hpp"
#include "stnet/chviz.hpp"
#include "stnet/localize.hpp"
#include "stnet/model_io.hpp"
#include "stnet/netpbm.hpp"

namespace stnet::cli {
namespace {

struct RunConfig {
  std::string net_path;
  std::string weights_path;
  std::string image_path;
  std::string manifest_path;
  std::optional<std::size_t> class_k;  // unset: predicted class (eval: ground truth)
  std::optional<std::string> stop_layer;
  double epsilon = 0.0;
  std::optional<double> sc_alpha;
  std::optional<int> offset_fc;
  std::optional<int> offset_bridge;
  bool no_bridge = false;
  std::string threshold = "mean-all";
  bool no_stage2 = false;
  std::string debug_trace;
  std::string out_path;
  std::string map_out;
  std::string overlay_out;
  std::string format = "json";
  double sigma = 6.0;
  std::size_t top = 5;
  unsigned threads = 1;
};

void add_model_options(CLI::App& cmd, RunConfig& cfg) {
  cmd.add_option("--net", cfg.net_path, "Network config JSON")->required();
  cmd.add_option("--weights", cfg.weights_path, "STNT weight file")->required();
  cmd.add_option("--threads", cfg.threads, "Worker threads")->check(CLI::Range(1u, 256u));
}

void add_attention_options(CLI::App& cmd, RunConfig& cfg) {
  cmd.add_option("--stop-layer", cfg.stop_layer, "Layer whose gating forms the attention map");
  cmd.add_option("--epsilon", cfg.epsilon, "Activity-preserve termination threshold")
      ->check(CLI::NonNegativeNumber);
  cmd.add_option("--sc-alpha", cfg.sc_alpha, "SC trade-off multiplier (default 0.2)")
      ->check(CLI::Range(0.0, 1.0));
  cmd.add_option("--offset-fc", cfg.offset_fc, "SI offset at fully-connected layers")
      ->check(CLI::NonNegativeNumber);
  cmd.add_option("--offset-bridge", cfg.offset_bridge, "SI offset at the bridge layer")
      ->check(CLI::NonNegativeNumber);
  cmd.add_flag("--no-bridge", cfg.no_bridge, "Disable bridge pruning");
  cmd.add_option("--threshold", cfg.threshold, "Attention-map threshold mean")
      ->check(CLI::IsMember({"mean-all", "mean-nonzero"}));
  cmd.add_flag("--no-stage2", cfg.no_stage2,
               "Ablation: single highest-PS winner at fc layers, no SC grouping");
  cmd.add_option("--debug-trace", cfg.debug_trace, "Write per-layer TD statistics as JSON");
}

LocalizeConfig make_localize_config(const RunConfig& cfg, const Network& net) {
  LocalizeConfig lc;
  auto& s = lc.selection;
  s.epsilon = cfg.epsilon;
  s.stop_layer = cfg.stop_layer.value_or(net.attention.stop_layer.value_or("input"));
  s.sc_alpha = cfg.sc_alpha.value_or(net.attention.sc_alpha.value_or(0.2));
  s.offset_fc = cfg.offset_fc.value_or(net.attention.offset_fc.value_or(0));
  const int bridge = cfg.offset_bridge.value_or(net.attention.offset_bridge.value_or(0));
  s.offset_bridge = (cfg.no_bridge || bridge < 0) ? std::nullopt : std::optional<int>(bridge);
  s.stage2_enabled = !cfg.no_stage2;
  lc.threshold = cfg.threshold == "mean-nonzero" ? ThresholdMode::mean_nonzero
                                                 : ThresholdMode::mean_all;
  validate(s);
  net.trace_index_of(s.stop_layer);
  return lc;
}

Network load_model(const RunConfig& cfg) {
  return load_network(cfg.net_path, load_weights(cfg.weights_path));
}

std::size_t predicted_class(const ActivationTrace& trace) {
  const auto scores = trace.output().data();
  return static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

std::size_t resolve_class(const RunConfig& cfg, const Network& net, const FeatureVolume& image,
                          const ExecOptions& exec) {
  if (cfg.class_k) {
    if (*cfg.class_k >= net.class_count()) {
      throw ConfigError("class index " + std::to_string(*cfg.class_k) + " out of range");
    }
    return *cfg.class_k;
  }
  return predicted_class(network_forward(net, image, exec));
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  f << j.dump(2) << '\n';
}

void emit(const nlohmann::json& j, const RunConfig& cfg, std::ostream& out) {
  if (cfg.out_path.empty()) {
    out << j.dump(2) << '\n';
  } else {
    write_json_file(j, cfg.out_path);
  }
}

int cmd_classify(const RunConfig& cfg, std::ostream& out) {
  const Network net = load_model(cfg);
  const ExecOptions exec{cfg.threads};
  const ActivationTrace trace = network_forward(net, read_image(cfg.image_path), exec);
  const auto scores = trace.output().data();
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  nlohmann::json top = nlohmann::json::array();
  for (std::size_t r = 0; r < std::min(cfg.top, order.size()); ++r) {
    nlohmann::json entry{{"class", order[r]}, {"score", scores[order[r]]}};
    if (!net.class_names.empty()) entry["name"] = net.class_names[order[r]];
    top.push_back(std::move(entry));
  }
  emit({{"top", std::move(top)}}, cfg, out);
  return kSuccess;
}

int cmd_localize(const RunConfig& cfg, std::ostream& out) {
  const Network net = load_model(cfg);
  const ExecOptions exec{cfg.threads};
  const LocalizeConfig lc = make_localize_config(cfg, net);
  const FeatureVolume image = read_image(cfg.image_path);
  const std::size_t k = resolve_class(cfg, net, image, exec);

  const Localization loc = localize(net, image, k, lc, exec);
  if (!cfg.debug_trace.empty()) write_json_file(to_json(loc.td), cfg.debug_trace);
  if (!cfg.map_out.empty()) {
    render(CHMap{loc.map.height, loc.map.width, loc.map.values}, cfg.map_out);
  }
  nlohmann::json j{
      {"class", k},
      {"stop_layer", lc.selection.stop_layer},
      {"box", to_json(loc.box)},
      {"attended_cells", loc.thresholded.nonzero()},
      {"active_fraction", loc.td.active_fraction()},
      {"stage2", lc.selection.stage2_enabled},
  };
  emit(j, cfg, out);
  return kSuccess;
}

int cmd_chmap(const RunConfig& cfg, std::ostream& out) {
  const Network net = load_model(cfg);
  const ExecOptions exec{cfg.threads};
  const LocalizeConfig lc = make_localize_config(cfg, net);
  const NetpbmImage source = read_netpbm(cfg.image_path);
  const FeatureVolume image = to_volume(source);
  const std::size_t k = resolve_class(cfg, net, image, exec);

  const Localization loc = localize(net, image, k, lc, exec);
  if (!cfg.debug_trace.empty()) write_json_file(to_json(loc.td), cfg.debug_trace);
  const ImageDims dims{net.input_shape().height, net.input_shape().width};
  const CHMap ch = gaussian_smooth(ch_accumulate(loc.points, loc.geometry, dims), cfg.sigma);
  render(ch, cfg.map_out);
  if (!cfg.overlay_out.empty()) render_overlay(ch, source, cfg.overlay_out);

  const auto peak = static_cast<std::size_t>(
      std::max_element(ch.values.begin(), ch.values.end()) - ch.values.begin());
  nlohmann::json j{
      {"class", k},
      {"stop_layer", lc.selection.stop_layer},
      {"sigma", cfg.sigma},
      {"ch_map", cfg.map_out},
      {"peak", {peak % ch.width, peak / ch.width}},
      {"box", to_json(loc.box)},
  };
  if (!cfg.overlay_out.empty()) j["overlay"] = cfg.overlay_out;
  emit(j, cfg, out);
  return kSuccess;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  const Network net = load_model(cfg);
  const LocalizeConfig lc = make_localize_config(cfg, net);
  const auto dataset = load_manifest(cfg.manifest_path);
  if (dataset.empty()) throw ConfigError("manifest '" + cfg.manifest_path + "' has no records");
  const LocalizationReport report = evaluate(dataset, net, lc, ExecOptions{cfg.threads});
  if (cfg.format == "text") {
    out << format_table(report);
    if (!cfg.out_path.empty()) write_json_file(to_json(report), cfg.out_path);
  } else {
    emit(to_json(report), cfg, out);
  }
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Selective-tuning attention over convolutional networks", "stnet"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* classify = app.add_subcommand("classify", "Top-k class scores for one image");
  add_model_options(*classify, cfg);
  classify->add_option("--image", cfg.image_path, "Input PGM/PPM")->required();
  classify->add_option("--top", cfg.top, "Number of classes to report")->check(CLI::PositiveNumber);
  classify->add_option("--out", cfg.out_path, "Write JSON here instead of stdout");

  auto* loc = app.add_subcommand("localize", "Bounding box for one image");
  add_model_options(*loc, cfg);
  add_attention_options(*loc, cfg);
  loc->add_option("--image", cfg.image_path, "Input PGM/PPM")->required();
  loc->add_option("--class", cfg.class_k, "Class to attend (default: predicted)");
  loc->add_option("--map-out", cfg.map_out, "Write the attention map as PGM");
  loc->add_option("--out", cfg.out_path, "Write JSON here instead of stdout");

  auto* chmap = app.add_subcommand("chmap", "Class Hypothesis map for one image");
  add_model_options(*chmap, cfg);
  add_attention_options(*chmap, cfg);
  chmap->add_option("--image", cfg.image_path, "Input PGM/PPM")->required();
  chmap->add_option("--class", cfg.class_k, "Class to attend (default: predicted)");
  chmap->add_option("--sigma", cfg.sigma, "Gaussian smoothing sigma")->check(CLI::PositiveNumber);
  chmap->add_option("--map-out", cfg.map_out, "CH map PGM")->required();
  chmap->add_option("--overlay", cfg.overlay_out, "Heat overlay PPM");
  chmap->add_option("--out", cfg.out_path, "Write JSON here instead of stdout");

  auto* eval = app.add_subcommand("eval", "Localization error over a JSONL manifest");
  add_model_options(*eval, cfg);
  add_attention_options(*eval, cfg);
  eval->add_option("--manifest", cfg.manifest_path, "JSON-lines dataset manifest")->required();
  eval->add_option("--format", cfg.format, "json or text")->check(CLI::IsMember({"json", "text"}));
  eval->add_option("--out", cfg.out_path, "Write the JSON report here");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    if (*classify) return cmd_classify(cfg, out);
    if (*loc) return cmd_localize(cfg, out);
    if (*chmap) return cmd_chmap(cfg, out);
    return cmd_eval(cfg, out);
  } catch (const TdPassDied& e) {
    err << "error: " << e.what() << '\n';
    return kPipelineError;
  } catch (const NoAttendedRegion& e) {
    err << "error: " << e.what() << '\n';
    return kPipelineError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }
}

}  // namespace stnet::cli
