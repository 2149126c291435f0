#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "parallel.hpp"
#include "stnet/localize.hpp"
#include "stnet/netpbm.hpp"

namespace stnet {

std::vector<Sample> load_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw ConfigError("cannot open manifest '" + manifest.string() + "'");
  const auto base = manifest.parent_path();
  std::vector<Sample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = manifest.string() + ":" + std::to_string(line_no);
    try {
      const auto record = nlohmann::json::parse(line);
      Sample s;
      s.path = record.at("path").get<std::string>();
      s.label = record.at("label_index").get<std::size_t>();
      for (const auto& b : record.at("boxes")) {
        if (b.size() != 4) throw ConfigError(where + ": box needs 4 coordinates");
        BBox box{b[0].get<long>(), b[1].get<long>(), b[2].get<long>(), b[3].get<long>()};
        if (box.x_min > box.x_max || box.y_min > box.y_max) {
          throw ConfigError(where + ": inverted box");
        }
        s.boxes.push_back(box);
      }
      std::filesystem::path image_path(s.path);
      if (image_path.is_relative()) image_path = base / image_path;
      s.image = read_image(image_path);
      samples.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where + ": " + e.what());
    } catch (const FormatError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return samples;
}

LocalizationReport evaluate(std::span<const Sample> dataset, const Network& net,
                            const LocalizeConfig& config, const ExecOptions& exec) {
  if (dataset.empty()) throw ConfigError("evaluation dataset is empty");
  validate(config.selection);

  LocalizationReport report;
  report.images.resize(dataset.size());
  // Images run in parallel; each inner pass stays single-threaded.
  detail::parallel_for(dataset.size(), exec.threads, [&](std::size_t i) {
    const Sample& s = dataset[i];
    ImageResult& r = report.images[i];
    r.path = s.path;
    r.label = s.label;
    try {
      const Localization loc = localize(net, s.image, s.label, config);
      r.box = loc.box;
      r.active_fraction = loc.td.active_fraction();
      for (const auto& gt : s.boxes) r.best_iou = std::max(r.best_iou, iou(loc.box, gt));
      r.correct = r.best_iou > 0.5;
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      r.error = e.what();
    }
  });

  double area_sum = 0.0;
  std::size_t boxes = 0;
  for (const auto& r : report.images) {
    report.correct += r.correct;
    if (r.box) {
      area_sum += static_cast<double>(r.box->area());
      ++boxes;
      report.mean_active_fraction += r.active_fraction;
      report.max_active_fraction = std::max(report.max_active_fraction, r.active_fraction);
    }
  }
  report.total = dataset.size();
  report.error_rate =
      1.0 - static_cast<double>(report.correct) / static_cast<double>(report.total);
  if (boxes > 0) {
    report.mean_active_fraction /= static_cast<double>(boxes);
    report.mean_box_area = area_sum / static_cast<double>(boxes);
  }
  return report;
}

nlohmann::json to_json(const BBox& box) {
  return nlohmann::json::array({box.x_min, box.y_min, box.x_max, box.y_max});
}

nlohmann::json to_json(const LocalizationReport& report) {
  nlohmann::json images = nlohmann::json::array();
  for (const auto& r : report.images) {
    nlohmann::json j{
        {"path", r.path},
        {"label_index", r.label},
        {"iou", r.best_iou},
        {"correct", r.correct},
        {"active_fraction", r.active_fraction},
    };
    j["box"] = r.box ? to_json(*r.box) : nlohmann::json(nullptr);
    if (!r.error.empty()) j["error"] = r.error;
    images.push_back(std::move(j));
  }
  return {
      {"total", report.total},
      {"correct", report.correct},
      {"error_rate", report.error_rate},
      {"mean_box_area", report.mean_box_area},
      {"sparsity", {{"mean_active_fraction", report.mean_active_fraction},
                    {"max_active_fraction", report.max_active_fraction}}},
      {"images", std::move(images)},
  };
}

std::string format_table(const LocalizationReport& report) {
  std::size_t path_width = 4;
  for (const auto& r : report.images) path_width = std::max(path_width, r.path.size());

  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(path_width)) << "path" << "  " << std::right
      << std::setw(5) << "label" << "  " << std::setw(6) << "iou" << "  " << std::setw(7)
      << "active" << "  " << std::setw(7) << "correct" << "  box\n";
  out << std::fixed;
  for (const auto& r : report.images) {
    out << std::left << std::setw(static_cast<int>(path_width)) << r.path << "  " << std::right
        << std::setw(5) << r.label << "  " << std::setw(6) << std::setprecision(3) << r.best_iou
        << "  " << std::setw(6) << std::setprecision(2) << r.active_fraction * 100.0 << "%"
        << "  " << std::setw(7) << (r.correct ? "yes" : "no") << "  ";
    if (r.box) {
      out << "(" << r.box->x_min << "," << r.box->y_min << ")-(" << r.box->x_max << ","
          << r.box->y_max << ")";
    } else {
      out << r.error;
    }
    out << '\n';
  }
  out << std::setprecision(4) << "images " << report.total << ", correct " << report.correct
      << ", error rate " << report.error_rate << ", mean active fraction "
      << report.mean_active_fraction * 100.0 << "%\n";
  return out.str();
}

}  // namespace stnet
