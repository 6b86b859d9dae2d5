#include "uda/align/instance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "uda/nn/optim.hpp"

namespace uda {

using nn::Var;

ExtractResult extract_instances(const std::array<Var, kScaleCount>& features, int item,
                                const DetectionSet& detections, int pool_size,
                                const DetectorConfig& cfg) {
  if (pool_size < 1) throw std::invalid_argument("extract_instances: pool_size must be >= 1");
  ExtractResult out;
  for (std::size_t di = 0; di < detections.size(); ++di) {
    const Detection& d = detections[di];
    const int s = assign_scale(d.box, cfg);
    const Var& fmap = features[static_cast<std::size_t>(s)];
    const int h = fmap->value.dim(2);
    const int w = fmap->value.dim(3);
    const double x0 = std::clamp(d.box.x0(), 0.0, 1.0) * w;
    const double x1 = std::clamp(d.box.x1(), 0.0, 1.0) * w;
    const double y0 = std::clamp(d.box.y0(), 0.0, 1.0) * h;
    const double y1 = std::clamp(d.box.y1(), 0.0, 1.0) * h;
    if (x1 - x0 < 1e-9 || y1 - y0 < 1e-9) {
      ++out.dropped;
      continue;
    }
    InstanceCrop crop;
    crop.features = nn::region_pool(fmap, item, x0, y0, x1, y1, pool_size);
    crop.detection_index = static_cast<int>(di);
    crop.scale = s;
    out.crops.push_back(std::move(crop));
  }
  return out;
}

ChannelAttention::ChannelAttention(int kernel_size, std::uint64_t seed) {
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw std::invalid_argument("ChannelAttention: kernel size must be odd");
  std::mt19937_64 rng(seed);
  kernel_ = nn::parameter(nn::he_normal({kernel_size}, kernel_size, rng));
  bias_ = nn::parameter(nn::Tensor::zeros({1}));
}

ChannelRanking ChannelAttention::rank(const Var& x) const {
  if (x->value.rank() != 3) throw std::invalid_argument("ChannelAttention: expected [C,H,W]");
  ChannelRanking r;
  r.weights = nn::sigmoid(nn::conv1d_same(nn::gap_spatial(x), kernel_, bias_));
  const int c = static_cast<int>(r.weights->value.size());
  r.order.resize(static_cast<std::size_t>(c));
  std::iota(r.order.begin(), r.order.end(), 0);
  const nn::Tensor& w = r.weights->value;
  std::stable_sort(r.order.begin(), r.order.end(), [&](int a, int b) { return w[a] > w[b]; });
  return r;
}

void ChannelAttention::collect_parameters(const std::string& prefix,
                                          std::map<std::string, nn::Var>& out) const {
  out[prefix + ".kernel"] = kernel_;
  out[prefix + ".bias"] = bias_;
}

Var sff_filter(const Var& crop, const ChannelRanking& ranking, double keep_fraction) {
  if (keep_fraction <= 0 || keep_fraction > 1)
    throw std::invalid_argument("sff_filter: keep_fraction must lie in (0,1]");
  const int c = crop->value.dim(0);
  const int keep = static_cast<int>(std::ceil(keep_fraction * c));
  Var scaled = nn::mul_cvec(crop, ranking.weights);
  std::vector<int> idx(ranking.order.begin(), ranking.order.begin() + keep);
  return nn::gather_channels(scaled, std::move(idx));
}

Var instance_embedding(const Var& crop) {
  return nn::l2_normalize(nn::reshape(crop, {static_cast<int>(crop->value.size())}));
}

ClusterAssignment agglomerative_cluster(const std::vector<Var>& embeddings,
                                        double merge_threshold, AlignCounters* counters) {
  if (embeddings.empty()) throw std::invalid_argument("agglomerative_cluster: no embeddings");
  if (counters) ++counters->instance_cluster_calls;
  std::vector<std::vector<double>> points;
  points.reserve(embeddings.size());
  for (const auto& e : embeddings)
    points.emplace_back(e->value.data(), e->value.data() + e->value.size());
  const ClusterLabels labels = agglomerate_threshold(points, merge_threshold);

  ClusterAssignment out;
  out.labels = labels.labels;
  out.representatives.resize(static_cast<std::size_t>(labels.count));
  std::vector<std::vector<Var>> members(static_cast<std::size_t>(labels.count));
  for (std::size_t i = 0; i < embeddings.size(); ++i)
    members[static_cast<std::size_t>(labels.labels[i])].push_back(embeddings[i]);
  for (int g = 0; g < labels.count; ++g)
    out.representatives[static_cast<std::size_t>(g)] =
        nn::mean_items(members[static_cast<std::size_t>(g)]);
  return out;
}

int nearest_neighbor(const Var& src, const std::vector<Var>& targets) {
  if (targets.empty()) throw std::invalid_argument("nearest_neighbor: empty target set");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < targets.size(); ++j) {
    double d = 0;
    for (std::int64_t i = 0; i < src->value.size(); ++i) {
      const double diff = src->value[i] - targets[j]->value[i];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

Var contrastive_loss(const std::vector<Var>& src, const std::vector<Var>& tgt, double margin,
                     AlignCounters* counters) {
  if (counters) ++counters->contrastive_calls;
  if (src.empty() || tgt.empty()) {
    if (counters) ++counters->empty_domain_skips;
    return nn::constant(nn::Tensor::scalar(0.0));
  }
  Var total = nn::constant(nn::Tensor::scalar(0.0));
  for (const Var& s : src) {
    const int nn_idx = nearest_neighbor(s, tgt);
    total = nn::add(total, nn::squared_distance(s, tgt[static_cast<std::size_t>(nn_idx)]));
    for (std::size_t j = 0; j < tgt.size(); ++j) {
      if (static_cast<int>(j) == nn_idx) continue;
      Var hinge = nn::relu(nn::rsub_scalar(margin, nn::squared_distance(s, tgt[j])));
      total = nn::add(total, hinge);
    }
  }
  return total;
}

Var instance_adv_loss(const std::vector<Var>& src_reps, const std::vector<Var>& tgt_reps,
                      const VectorDiscriminator& disc, double lambda, AlignCounters* counters) {
  Var total = nn::constant(nn::Tensor::scalar(0.0));
  auto domain_term = [&](const std::vector<Var>& reps, int label) {
    if (reps.empty()) {
      if (counters) ++counters->empty_domain_skips;
      return;
    }
    Var acc = nn::constant(nn::Tensor::scalar(0.0));
    for (const Var& r : reps) {
      if (counters) {
        ++counters->grl_calls;
        ++counters->disc_instance_calls;
      }
      acc = nn::add(acc, adv_loss(disc.logit(nn::grl(r, lambda)), label));
    }
    total = nn::add(total, nn::scale(acc, 1.0 / static_cast<double>(reps.size())));
  };
  domain_term(src_reps, 0);
  domain_term(tgt_reps, 1);
  return total;
}

}  // namespace uda
