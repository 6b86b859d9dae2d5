#include "uda/align/feature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "uda/core/distance.hpp"

namespace uda {

using nn::Var;

namespace {

std::vector<std::vector<double>> channel_vectors(const nn::Tensor& t) {
  const int c = t.dim(0);
  const std::int64_t plane = static_cast<std::int64_t>(t.dim(1)) * t.dim(2);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(c));
  for (int i = 0; i < c; ++i)
    out[static_cast<std::size_t>(i)].assign(t.data() + plane * i, t.data() + plane * (i + 1));
  return out;
}

std::vector<Var> group_mean_maps(const Var& fmap, const std::vector<int>& labels, int groups) {
  std::vector<std::vector<int>> members(static_cast<std::size_t>(groups));
  for (std::size_t c = 0; c < labels.size(); ++c)
    members[static_cast<std::size_t>(labels[c])].push_back(static_cast<int>(c));
  std::vector<Var> maps;
  maps.reserve(static_cast<std::size_t>(groups));
  for (auto& m : members) {
    if (m.empty()) throw std::logic_error("group_mean_maps: empty group");
    maps.push_back(nn::mean_over_channels(nn::gather_channels(fmap, m)));
  }
  return maps;
}

}  // namespace

ChannelGrouping channel_cluster_hierarchical(const Var& fmap, int groups,
                                             AlignCounters* counters) {
  if (fmap->value.rank() != 3)
    throw std::invalid_argument("channel_cluster_hierarchical: expected [C,H,W]");
  if (fmap->value.dim(0) < groups)
    throw std::invalid_argument("channel_cluster_hierarchical: fewer channels than groups");
  if (counters) ++counters->feature_cluster_calls;

  const ClusterLabels labels = agglomerate_count(channel_vectors(fmap->value), groups);
  ChannelGrouping out;
  out.labels = labels.labels;
  out.group_maps = group_mean_maps(fmap, labels.labels, labels.count);
  return out;
}

ChannelGrouping channel_cluster_kmeans(const Var& fmap, int k, int max_iter, std::uint64_t seed,
                                       AlignCounters* counters) {
  if (fmap->value.rank() != 3)
    throw std::invalid_argument("channel_cluster_kmeans: expected [C,H,W]");
  const int c = fmap->value.dim(0);
  if (c < k) throw std::invalid_argument("channel_cluster_kmeans: fewer channels than k");
  if (counters) ++counters->feature_cluster_calls;

  const auto points = channel_vectors(fmap->value);
  const std::size_t dim = points[0].size();

  // Farthest-point init: seeded uniform first pick, then repeatedly the point
  // farthest from its nearest chosen center (ties toward lower index).
  std::vector<std::vector<double>> centers;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> first(0, c - 1);
  centers.push_back(points[static_cast<std::size_t>(first(rng))]);
  std::vector<double> nearest(static_cast<std::size_t>(c),
                              std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    int far = 0;
    double far_d = -1;
    for (int i = 0; i < c; ++i) {
      nearest[static_cast<std::size_t>(i)] =
          std::min(nearest[static_cast<std::size_t>(i)],
                   squared_euclidean(points[static_cast<std::size_t>(i)], centers.back()));
      if (nearest[static_cast<std::size_t>(i)] > far_d) {
        far_d = nearest[static_cast<std::size_t>(i)];
        far = i;
      }
    }
    centers.push_back(points[static_cast<std::size_t>(far)]);
  }

  std::vector<int> labels(static_cast<std::size_t>(c), -1);
  std::vector<double> inertia_trace;
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double inertia = 0;
    for (int i = 0; i < c; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int g = 0; g < k; ++g) {
        const double d =
            squared_euclidean(points[static_cast<std::size_t>(i)], centers[static_cast<std::size_t>(g)]);
        if (d < best_d) {
          best_d = d;
          best = g;
        }
      }
      inertia += best_d;
      if (labels[static_cast<std::size_t>(i)] != best) {
        labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    inertia_trace.push_back(inertia);
    if (!changed) break;
    for (int g = 0; g < k; ++g) {
      std::vector<double> mean(dim, 0.0);
      int count = 0;
      for (int i = 0; i < c; ++i) {
        if (labels[static_cast<std::size_t>(i)] != g) continue;
        ++count;
        for (std::size_t d = 0; d < dim; ++d) mean[d] += points[static_cast<std::size_t>(i)][d];
      }
      if (count == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t d = 0; d < dim; ++d) mean[d] /= count;
      centers[static_cast<std::size_t>(g)] = std::move(mean);
    }
  }

  ChannelGrouping out;
  out.labels = labels;
  out.inertia_trace = std::move(inertia_trace);
  const int h = fmap->value.dim(1), w = fmap->value.dim(2);
  std::vector<std::vector<int>> members(static_cast<std::size_t>(k));
  for (int i = 0; i < c; ++i)
    members[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].push_back(i);
  for (int g = 0; g < k; ++g) {
    if (members[static_cast<std::size_t>(g)].empty()) {
      out.group_maps.push_back(nn::constant(
          nn::Tensor({1, h, w}, centers[static_cast<std::size_t>(g)])));
    } else {
      out.group_maps.push_back(nn::mean_over_channels(
          nn::gather_channels(fmap, members[static_cast<std::size_t>(g)])));
    }
  }
  return out;
}

Var ptap_pool(const Var& fmap, const ChannelRanking& ranking, double keep_fraction,
              AlignCounters* counters) {
  if (fmap->value.rank() != 3) throw std::invalid_argument("ptap_pool: expected [C,H,W]");
  if (keep_fraction <= 0 || keep_fraction > 1)
    throw std::invalid_argument("ptap_pool: keep_fraction must lie in (0,1]");
  if (counters) ++counters->ptap_calls;
  const int c = fmap->value.dim(0);
  const int k = static_cast<int>(std::ceil(keep_fraction * c));
  return nn::ptap(fmap, ranking.weights, k);
}

Var feature_adv_loss(const std::array<std::vector<Var>, kScaleCount>& src_maps,
                     const std::array<std::vector<Var>, kScaleCount>& tgt_maps,
                     const std::array<const ConvDiscriminator*, kScaleCount>& discs,
                     double lambda, AlignCounters* counters) {
  Var total = nn::constant(nn::Tensor::scalar(0.0));
  for (int s = 0; s < kScaleCount; ++s) {
    auto domain_term = [&](const std::vector<Var>& maps, int label) {
      if (maps.empty()) {
        if (counters) ++counters->empty_domain_skips;
        return;
      }
      if (counters) {
        counters->grl_calls += static_cast<long>(maps.size());
        counters->disc_feature_calls += static_cast<long>(maps.size());
      }
      std::vector<Var> reversed;
      reversed.reserve(maps.size());
      for (const Var& m : maps) reversed.push_back(nn::grl(m, lambda));
      Var logits = discs[static_cast<std::size_t>(s)]->logits(nn::stack_items(reversed));
      total = nn::add(total, adv_loss(logits, label));
    };
    domain_term(src_maps[static_cast<std::size_t>(s)], 0);
    domain_term(tgt_maps[static_cast<std::size_t>(s)], 1);
  }
  return total;
}

}  // namespace uda
