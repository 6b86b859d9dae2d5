#include "uda/harness/train_config.hpp"

#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace uda {

namespace {

constexpr std::array<const char*, kMethodCount> kMethodNames = {
    "source_only",    "target_only",    "inst_adv_visga", "inst_adv_pc",
    "inst_adv_pc_sff", "inst_con_visga", "inst_con_pc",    "inst_con_pc_sff",
    "feat_adv_yocov1", "feat_adv_pc_kmeans", "feat_adv_ptap"};

}  // namespace

Method method_from_string(const std::string& name) {
  for (int i = 0; i < kMethodCount; ++i)
    if (name == kMethodNames[static_cast<std::size_t>(i)]) return static_cast<Method>(i);
  throw std::invalid_argument("unknown method: " + name);
}

const char* to_string(Method m) { return kMethodNames[static_cast<std::size_t>(m)]; }

std::vector<std::string> all_method_names() {
  return {kMethodNames.begin(), kMethodNames.end()};
}

MethodTraits traits_of(Method m) {
  MethodTraits t;
  switch (m) {
    case Method::SourceOnly:
      break;
    case Method::TargetOnly:
      break;
    case Method::InstAdvVisga:
      t = {true, true, true, false, false, false, MethodTraits::Feature::None};
      break;
    case Method::InstAdvPc:
      t = {true, true, true, false, false, true, MethodTraits::Feature::None};
      break;
    case Method::InstAdvPcSff:
      t = {true, true, true, false, true, true, MethodTraits::Feature::None};
      break;
    case Method::InstConVisga:
      t = {true, true, true, true, false, false, MethodTraits::Feature::None};
      break;
    case Method::InstConPc:
      t = {true, true, true, true, false, true, MethodTraits::Feature::None};
      break;
    case Method::InstConPcSff:
      t = {true, true, true, true, true, true, MethodTraits::Feature::None};
      break;
    case Method::FeatAdvYocov1:
      t = {true, true, false, false, false, false, MethodTraits::Feature::Hierarchical};
      break;
    case Method::FeatAdvPcKmeans:
      t = {true, true, false, false, false, true, MethodTraits::Feature::KMeans};
      break;
    case Method::FeatAdvPtap:
      t = {true, true, false, false, false, false, MethodTraits::Feature::Ptap};
      break;
  }
  return t;
}

void TrainConfig::validate() const {
  detector.validate();
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (lr <= 0) throw std::invalid_argument("TrainConfig: lr must be positive");
  if (merge_threshold < 0) throw std::invalid_argument("TrainConfig: merge_threshold must be >= 0");
  if (keep_fraction <= 0 || keep_fraction > 1)
    throw std::invalid_argument("TrainConfig: keep_fraction must lie in (0,1]");
  if (margin <= 0) throw std::invalid_argument("TrainConfig: margin must be positive");
  if (conf_threshold < 0 || conf_threshold > 1)
    throw std::invalid_argument("TrainConfig: conf_threshold must lie in [0,1]");
  if (nms_iou < 0 || nms_iou > 1)
    throw std::invalid_argument("TrainConfig: nms_iou must lie in [0,1]");
  if (pool_size < 1) throw std::invalid_argument("TrainConfig: pool_size must be >= 1");
  if (attention_kernel < 1 || attention_kernel % 2 == 0)
    throw std::invalid_argument("TrainConfig: attention_kernel must be odd");
  if (kmeans_k < 1) throw std::invalid_argument("TrainConfig: kmeans_k must be >= 1");
  if (max_instances_per_image < 1)
    throw std::invalid_argument("TrainConfig: max_instances_per_image must be >= 1");
}

std::string serialize_config(const TrainConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "method = " << to_string(cfg.method) << "\n";
  out << "epochs = " << cfg.epochs << "\n";
  out << "batch_size = " << cfg.batch_size << "\n";
  out << "lambda_img = " << cfg.lambda_img << "\n";
  out << "lambda_inst = " << cfg.lambda_inst << "\n";
  out << "lambda_pc = " << cfg.lambda_pc << "\n";
  out << "lr = " << cfg.lr << "\n";
  out << "lr_floor_ratio = " << cfg.lr_floor_ratio << "\n";
  out << "momentum = " << cfg.momentum << "\n";
  out << "grad_clip = " << cfg.grad_clip << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "merge_threshold = " << cfg.merge_threshold << "\n";
  out << "keep_fraction = " << cfg.keep_fraction << "\n";
  out << "margin = " << cfg.margin << "\n";
  out << "conf_threshold = " << cfg.conf_threshold << "\n";
  out << "nms_iou = " << cfg.nms_iou << "\n";
  out << "pool_size = " << cfg.pool_size << "\n";
  out << "attention_kernel = " << cfg.attention_kernel << "\n";
  out << "grl_lambda = " << cfg.grl_lambda << "\n";
  out << "pc_normalize = " << (cfg.pc_normalize ? "true" : "false") << "\n";
  out << "contrastive_on_representatives = "
      << (cfg.contrastive_on_representatives ? "true" : "false") << "\n";
  out << "kmeans_k = " << cfg.kmeans_k << "\n";
  out << "kmeans_max_iter = " << cfg.kmeans_max_iter << "\n";
  out << "max_instances_per_image = " << cfg.max_instances_per_image << "\n";
  out << "val_interval = " << cfg.val_interval << "\n";
  out << "detector.input_size = " << cfg.detector.input_size << "\n";
  out << "detector.class_count = " << cfg.detector.class_count << "\n";
  out << "detector.backbone_channels = " << cfg.detector.backbone_channels << "\n";
  out << "detector.neck_large = " << cfg.detector.neck_channels[0] << "\n";
  out << "detector.neck_medium = " << cfg.detector.neck_channels[1] << "\n";
  out << "detector.neck_small = " << cfg.detector.neck_channels[2] << "\n";
  out << "detector.stride_large = " << cfg.detector.strides[0] << "\n";
  out << "detector.stride_medium = " << cfg.detector.strides[1] << "\n";
  out << "detector.stride_small = " << cfg.detector.strides[2] << "\n";
  return out.str();
}

namespace {

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("expected boolean, got: " + v);
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

void apply_config_line(TrainConfig& cfg, const std::string& key, const std::string& value) {
  try {
    if (key == "method") cfg.method = method_from_string(value);
    else if (key == "epochs") cfg.epochs = std::stoi(value);
    else if (key == "batch_size") cfg.batch_size = std::stoi(value);
    else if (key == "lambda_img") cfg.lambda_img = std::stod(value);
    else if (key == "lambda_inst") cfg.lambda_inst = std::stod(value);
    else if (key == "lambda_pc") cfg.lambda_pc = std::stod(value);
    else if (key == "lr") cfg.lr = std::stod(value);
    else if (key == "lr_floor_ratio") cfg.lr_floor_ratio = std::stod(value);
    else if (key == "momentum") cfg.momentum = std::stod(value);
    else if (key == "grad_clip") cfg.grad_clip = std::stod(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "merge_threshold") cfg.merge_threshold = std::stod(value);
    else if (key == "keep_fraction") cfg.keep_fraction = std::stod(value);
    else if (key == "margin") cfg.margin = std::stod(value);
    else if (key == "conf_threshold") cfg.conf_threshold = std::stod(value);
    else if (key == "nms_iou") cfg.nms_iou = std::stod(value);
    else if (key == "pool_size") cfg.pool_size = std::stoi(value);
    else if (key == "attention_kernel") cfg.attention_kernel = std::stoi(value);
    else if (key == "grl_lambda") cfg.grl_lambda = std::stod(value);
    else if (key == "pc_normalize") cfg.pc_normalize = parse_bool(value);
    else if (key == "contrastive_on_representatives")
      cfg.contrastive_on_representatives = parse_bool(value);
    else if (key == "kmeans_k") cfg.kmeans_k = std::stoi(value);
    else if (key == "kmeans_max_iter") cfg.kmeans_max_iter = std::stoi(value);
    else if (key == "max_instances_per_image") cfg.max_instances_per_image = std::stoi(value);
    else if (key == "val_interval") cfg.val_interval = std::stoi(value);
    else if (key == "detector.input_size") cfg.detector.input_size = std::stoi(value);
    else if (key == "detector.class_count") cfg.detector.class_count = std::stoi(value);
    else if (key == "detector.backbone_channels")
      cfg.detector.backbone_channels = std::stoi(value);
    else if (key == "detector.neck_large") cfg.detector.neck_channels[0] = std::stoi(value);
    else if (key == "detector.neck_medium") cfg.detector.neck_channels[1] = std::stoi(value);
    else if (key == "detector.neck_small") cfg.detector.neck_channels[2] = std::stoi(value);
    else if (key == "detector.stride_large") cfg.detector.strides[0] = std::stoi(value);
    else if (key == "detector.stride_medium") cfg.detector.strides[1] = std::stoi(value);
    else if (key == "detector.stride_small") cfg.detector.strides[2] = std::stoi(value);
    else throw std::invalid_argument("unknown config key: " + key);
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad value for config key " + key + ": " + value);
  }
}

TrainConfig parse_config(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    apply_config_line(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

TrainConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_fingerprint(const TrainConfig& cfg) {
  const std::string s = serialize_config(cfg);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace uda
