#include "uda/harness/evaluator.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "uda/detector/codec.hpp"

namespace uda {

using nlohmann::json;

double average_precision(std::vector<std::pair<double, bool>> matches, int ground_truth_count) {
  if (ground_truth_count <= 0) return 0.0;
  if (matches.empty()) return 0.0;
  std::stable_sort(matches.begin(), matches.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<double> precision, recall;
  int tp = 0, fp = 0;
  for (const auto& [conf, is_tp] : matches) {
    (void)conf;
    is_tp ? ++tp : ++fp;
    precision.push_back(static_cast<double>(tp) / (tp + fp));
    recall.push_back(static_cast<double>(tp) / ground_truth_count);
  }
  // Precision envelope: monotone non-increasing from the right.
  for (int i = static_cast<int>(precision.size()) - 2; i >= 0; --i)
    precision[static_cast<std::size_t>(i)] =
        std::max(precision[static_cast<std::size_t>(i)], precision[static_cast<std::size_t>(i) + 1]);

  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

EvalReport evaluate(const Detector& detector, const Dataset& split, double conf_threshold,
                    double nms_iou, double map_iou) {
  if (split.unlabeled) throw std::invalid_argument("evaluate: split must be labeled");
  const DetectorConfig& cfg = detector.config();
  const int classes = cfg.class_count;

  struct Pred {
    double confidence;
    int image;
    Box box;
  };
  std::vector<std::vector<Pred>> preds(static_cast<std::size_t>(classes));
  std::vector<std::vector<std::vector<Box>>> truth(
      static_cast<std::size_t>(classes),
      std::vector<std::vector<Box>>(split.images.size()));
  std::vector<int> truth_count(static_cast<std::size_t>(classes), 0);

  for (std::size_t i = 0; i < split.images.size(); ++i) {
    const LabeledImage& li = split.images[i];
    for (const Detection& d : li.truth) {
      if (d.class_id >= classes)
        throw std::invalid_argument("evaluate: ground-truth class outside detector classes");
      truth[static_cast<std::size_t>(d.class_id)][i].push_back(d.box);
      ++truth_count[static_cast<std::size_t>(d.class_id)];
    }
    const DetectorOutput out = detector.forward_image(li.image);
    const DetectionSet dets = decode(out.raw_predictions, conf_threshold, nms_iou, cfg);
    for (const Detection& d : dets)
      preds[static_cast<std::size_t>(d.class_id)].push_back(
          {d.confidence, static_cast<int>(i), d.box});
  }

  EvalReport report;
  report.images = static_cast<int>(split.images.size());
  report.conf_threshold = conf_threshold;
  report.nms_iou = nms_iou;
  report.map_iou = map_iou;

  double ap_sum = 0.0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    ClassAP entry;
    entry.class_id = c;
    entry.name = c < static_cast<int>(split.class_names.size())
                     ? split.class_names[static_cast<std::size_t>(c)]
                     : std::to_string(c);
    entry.ground_truths = truth_count[static_cast<std::size_t>(c)];
    entry.detections = static_cast<int>(preds[static_cast<std::size_t>(c)].size());
    report.total_detections += entry.detections;
    report.total_ground_truths += entry.ground_truths;
    entry.present = entry.ground_truths > 0;

    if (entry.present) {
      auto& p = preds[static_cast<std::size_t>(c)];
      std::stable_sort(p.begin(), p.end(),
                       [](const Pred& a, const Pred& b) { return a.confidence > b.confidence; });
      std::vector<std::vector<bool>> used(split.images.size());
      for (std::size_t i = 0; i < split.images.size(); ++i)
        used[i].assign(truth[static_cast<std::size_t>(c)][i].size(), false);

      std::vector<std::pair<double, bool>> matches;
      matches.reserve(p.size());
      for (const Pred& d : p) {
        const auto& boxes = truth[static_cast<std::size_t>(c)][static_cast<std::size_t>(d.image)];
        int best = -1;
        double best_iou = 0.0;
        for (std::size_t g = 0; g < boxes.size(); ++g) {
          if (used[static_cast<std::size_t>(d.image)][g]) continue;
          const double v = iou(d.box, boxes[g]);
          if (v >= map_iou && v > best_iou) {
            best_iou = v;
            best = static_cast<int>(g);
          }
        }
        if (best >= 0) {
          used[static_cast<std::size_t>(d.image)][static_cast<std::size_t>(best)] = true;
          matches.emplace_back(d.confidence, true);
        } else {
          matches.emplace_back(d.confidence, false);
        }
      }
      entry.ap = average_precision(std::move(matches), entry.ground_truths);
      ap_sum += entry.ap;
      ++present;
    }
    report.per_class.push_back(std::move(entry));
  }
  report.map50 = present > 0 ? ap_sum / present : 0.0;
  return report;
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  json j;
  j["map50"] = report.map50;
  j["images"] = report.images;
  j["total_detections"] = report.total_detections;
  j["total_ground_truths"] = report.total_ground_truths;
  j["conf_threshold"] = report.conf_threshold;
  j["nms_iou"] = report.nms_iou;
  j["map_iou"] = report.map_iou;
  j["config_fingerprint"] = report.config_fingerprint;
  j["method"] = report.method;
  j["seed"] = report.seed;
  json classes = json::array();
  for (const ClassAP& c : report.per_class) {
    classes.push_back({{"class_id", c.class_id},
                       {"name", c.name},
                       {"present", c.present},
                       {"ap", c.ap},
                       {"ground_truths", c.ground_truths},
                       {"detections", c.detections}});
  }
  j["per_class"] = classes;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_report: cannot open " + path.string());
  out << j.dump(2) << "\n";
}

EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_report: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("read_report: bad report " + path.string() + ": " + e.what());
  }
  EvalReport r;
  r.map50 = j.at("map50").get<double>();
  r.images = j.value("images", 0);
  r.total_detections = j.value("total_detections", 0);
  r.total_ground_truths = j.value("total_ground_truths", 0);
  r.conf_threshold = j.value("conf_threshold", 0.25);
  r.nms_iou = j.value("nms_iou", 0.7);
  r.map_iou = j.value("map_iou", 0.5);
  r.config_fingerprint = j.value("config_fingerprint", "");
  r.method = j.value("method", "");
  r.seed = j.value("seed", 0ULL);
  for (const auto& c : j.value("per_class", json::array())) {
    ClassAP e;
    e.class_id = c.at("class_id").get<int>();
    e.name = c.value("name", "");
    e.present = c.value("present", false);
    e.ap = c.value("ap", 0.0);
    e.ground_truths = c.value("ground_truths", 0);
    e.detections = c.value("detections", 0);
    r.per_class.push_back(std::move(e));
  }
  return r;
}

}  // namespace uda
