#include "uda/harness/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "uda/align/feature.hpp"
#include "uda/align/global.hpp"
#include "uda/align/pc.hpp"
#include "uda/detector/loss.hpp"

namespace uda {

using nn::Var;

Trainer::Trainer(TrainConfig cfg, Dataset source, Dataset target)
    : cfg_(std::move(cfg)),
      traits_(cfg_.traits()),
      source_(std::move(source)),
      target_(std::move(target)),
      bundle_(ModelBundle::build(cfg_)) {
  const Dataset& supervised = cfg_.method == Method::TargetOnly ? target_ : source_;
  if (supervised.unlabeled)
    throw std::invalid_argument("Trainer: the supervised split must be labeled");
  if (supervised.images.empty()) throw std::invalid_argument("Trainer: empty supervised split");
  if (traits_.uses_target && target_.images.empty())
    throw std::invalid_argument("Trainer: method needs a target split");
  auto check_sizes = [&](const Dataset& ds, const char* name) {
    for (const auto& li : ds.images)
      if (li.image.rank() != 2 || li.image.dim(0) != cfg_.detector.input_size ||
          li.image.dim(1) != cfg_.detector.input_size)
        throw std::invalid_argument(std::string("Trainer: ") + name +
                                    " image size does not match detector input");
  };
  check_sizes(source_, "source");
  if (traits_.uses_target || cfg_.method == Method::TargetOnly) check_sizes(target_, "target");
}

void Trainer::set_validation(Dataset val, std::filesystem::path best_checkpoint_path) {
  if (val.unlabeled) throw std::invalid_argument("Trainer: validation split must be labeled");
  val_ = std::move(val);
  best_checkpoint_path_ = std::move(best_checkpoint_path);
}

void Trainer::set_log(std::ostream* train_log, std::ostream* diag_log) {
  train_log_ = train_log;
  diag_log_ = diag_log;
}

nn::Tensor Trainer::make_batch(const Dataset& ds, const std::vector<int>& order,
                               std::size_t start) const {
  const int s = cfg_.detector.input_size;
  nn::Tensor batch({cfg_.batch_size, 1, s, s});
  const std::int64_t stride = static_cast<std::int64_t>(s) * s;
  for (int b = 0; b < cfg_.batch_size; ++b) {
    const int idx = order[(start + static_cast<std::size_t>(b)) % order.size()];
    const nn::Tensor& img = ds.images[static_cast<std::size_t>(idx)].image;
    std::copy_n(img.data(), stride, batch.data() + stride * b);
  }
  return batch;
}

std::vector<DetectionSet> Trainer::decode_batch(const std::array<Var, kScaleCount>& raw,
                                                bool cap) const {
  const int n = raw[0]->value.dim(0);
  std::vector<DetectionSet> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::array<nn::Tensor, kScaleCount> per_image;
    for (int s = 0; s < kScaleCount; ++s) {
      const nn::Tensor& t = raw[static_cast<std::size_t>(s)]->value;
      const std::int64_t stride = static_cast<std::int64_t>(t.dim(1)) * t.dim(2) * t.dim(3);
      per_image[static_cast<std::size_t>(s)] =
          nn::Tensor({t.dim(1), t.dim(2), t.dim(3)},
                     {t.data() + stride * i, t.data() + stride * (i + 1)});
    }
    DetectionSet dets = decode(per_image, cfg_.conf_threshold, cfg_.nms_iou, cfg_.detector);
    if (cap && static_cast<int>(dets.size()) > cfg_.max_instances_per_image)
      dets.resize(static_cast<std::size_t>(cfg_.max_instances_per_image));  // sorted by confidence
    out[static_cast<std::size_t>(i)] = std::move(dets);
  }
  return out;
}

Var Trainer::instance_term(const BatchOutput& src_out, const BatchOutput& tgt_out,
                           const std::vector<DetectionSet>& src_dets,
                           const std::vector<DetectionSet>& tgt_dets, InstanceStats& stats) {
  std::array<std::vector<Var>, kScaleCount> src_emb, tgt_emb;
  auto collect = [&](const BatchOutput& out, const std::vector<DetectionSet>& dets,
                     std::array<std::vector<Var>, kScaleCount>& emb, int& instance_count) {
    for (std::size_t i = 0; i < dets.size(); ++i) {
      ExtractResult ex = extract_instances(out.inst, static_cast<int>(i), dets[i],
                                           cfg_.pool_size, cfg_.detector);
      counters_.dropped_instances += ex.dropped;
      for (auto& crop : ex.crops) {
        Var features = crop.features;
        if (traits_.sff) {
          const ChannelAttention& att = *bundle_.attentions[static_cast<std::size_t>(crop.scale)];
          features = sff_filter(features, att.rank(features), cfg_.keep_fraction);
        }
        Var e = instance_embedding(features);
        double norm2 = 0;
        for (std::int64_t k = 0; k < e->value.size(); ++k) norm2 += e->value[k] * e->value[k];
        if (norm2 == 0.0) {  // dead embedding carries no signal; skip it
          ++counters_.dropped_instances;
          continue;
        }
        emb[static_cast<std::size_t>(crop.scale)].push_back(std::move(e));
        ++instance_count;
      }
    }
  };
  collect(src_out, src_dets, src_emb, stats.src_instances);
  collect(tgt_out, tgt_dets, tgt_emb, stats.tgt_instances);

  Var total = nn::constant(nn::Tensor::scalar(0.0));
  for (int s = 0; s < kScaleCount; ++s) {
    auto& se = src_emb[static_cast<std::size_t>(s)];
    auto& te = tgt_emb[static_cast<std::size_t>(s)];
    if (se.size() < 2 || te.size() < 2) continue;
    ClusterAssignment cs = agglomerative_cluster(se, cfg_.merge_threshold, &counters_);
    ClusterAssignment ct = agglomerative_cluster(te, cfg_.merge_threshold, &counters_);
    stats.src_clusters += static_cast<int>(cs.representatives.size());
    stats.tgt_clusters += static_cast<int>(ct.representatives.size());
    Var term;
    if (traits_.contrastive) {
      const auto& anchors = cfg_.contrastive_on_representatives ? cs.representatives : se;
      const auto& others = cfg_.contrastive_on_representatives ? ct.representatives : te;
      term = contrastive_loss(anchors, others, cfg_.margin, &counters_);
    } else {
      term = instance_adv_loss(cs.representatives, ct.representatives,
                               *bundle_.instance_discs[static_cast<std::size_t>(s)],
                               cfg_.grl_lambda, &counters_);
    }
    total = nn::add(total, term);
    stats.contributed = true;
  }
  if (!stats.contributed) ++counters_.skipped_instance_batches;
  return total;
}

Var Trainer::feature_term(const BatchOutput& src_out, const BatchOutput& tgt_out, long step) {
  std::array<std::vector<Var>, kScaleCount> src_maps, tgt_maps;
  auto collect = [&](const BatchOutput& out, std::array<std::vector<Var>, kScaleCount>& maps,
                     int domain) {
    const int n = out.inst[0]->value.dim(0);
    for (int s = 0; s < kScaleCount; ++s) {
      for (int i = 0; i < n; ++i) {
        Var fmap = nn::select_item(out.inst[static_cast<std::size_t>(s)], i);
        switch (traits_.feature) {
          case MethodTraits::Feature::Hierarchical: {
            ChannelGrouping g = channel_cluster_hierarchical(
                fmap, cfg_.detector.class_count + 1, &counters_);
            for (auto& m : g.group_maps) maps[static_cast<std::size_t>(s)].push_back(m);
            break;
          }
          case MethodTraits::Feature::KMeans: {
            const std::uint64_t seed =
                cfg_.seed ^ (static_cast<std::uint64_t>(step) * 0x9E3779B97F4A7C15ULL) ^
                (static_cast<std::uint64_t>(s) << 32) ^ (static_cast<std::uint64_t>(i) << 16) ^
                static_cast<std::uint64_t>(domain);
            ChannelGrouping g = channel_cluster_kmeans(fmap, cfg_.kmeans_k, cfg_.kmeans_max_iter,
                                                       seed, &counters_);
            for (auto& m : g.group_maps) maps[static_cast<std::size_t>(s)].push_back(m);
            break;
          }
          case MethodTraits::Feature::Ptap: {
            const ChannelAttention& att = *bundle_.attentions[static_cast<std::size_t>(s)];
            maps[static_cast<std::size_t>(s)].push_back(
                ptap_pool(fmap, att.rank(fmap), cfg_.keep_fraction, &counters_));
            break;
          }
          case MethodTraits::Feature::None:
            break;
        }
      }
    }
  };
  collect(src_out, src_maps, 0);
  collect(tgt_out, tgt_maps, 1);

  std::array<const ConvDiscriminator*, kScaleCount> discs = {
      bundle_.feature_discs[0].get(), bundle_.feature_discs[1].get(),
      bundle_.feature_discs[2].get()};
  return feature_adv_loss(src_maps, tgt_maps, discs, cfg_.grl_lambda, &counters_);
}

TrainResult Trainer::run() {
  const Dataset& supervised = cfg_.method == Method::TargetOnly ? target_ : source_;
  const int steps_per_epoch =
      std::max<int>(1, static_cast<int>(supervised.images.size()) / cfg_.batch_size);
  const long total_steps = static_cast<long>(steps_per_epoch) * cfg_.epochs;

  nn::SgdMomentum optimizer(bundle_.all_parameters(), cfg_.momentum, cfg_.grad_clip);
  std::mt19937_64 shuffle_rng(cfg_.seed ^ 0xD1B54A32D192ED03ULL);

  std::vector<int> sup_order(supervised.images.size());
  std::vector<int> tgt_order(target_.images.empty() ? 0 : target_.images.size());
  for (std::size_t i = 0; i < sup_order.size(); ++i) sup_order[i] = static_cast<int>(i);
  for (std::size_t i = 0; i < tgt_order.size(); ++i) tgt_order[i] = static_cast<int>(i);
  std::size_t tgt_pos = 0;

  if (train_log_)
    *train_log_ << "step,L_total,L_yolo,L_img,L_inst,L_pc,skipped_instance_batches\n";
  if (diag_log_)
    *diag_log_ << "step,src_instances,tgt_instances,src_clusters,tgt_clusters\n";

  TrainResult result;
  long step = 0;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::shuffle(sup_order.begin(), sup_order.end(), shuffle_rng);
    for (int es = 0; es < steps_per_epoch; ++es, ++step) {
      const std::size_t start = static_cast<std::size_t>(es) * cfg_.batch_size;

      // Supervised forward.
      Var sup_imgs = nn::constant(make_batch(supervised, sup_order, start));
      BatchOutput sup_out = bundle_.detector->forward(sup_imgs);
      std::vector<DetectionSet> gt(static_cast<std::size_t>(cfg_.batch_size));
      for (int b = 0; b < cfg_.batch_size; ++b)
        gt[static_cast<std::size_t>(b)] =
            supervised.images[static_cast<std::size_t>(
                                  sup_order[(start + static_cast<std::size_t>(b)) % sup_order.size()])]
                .truth;
      Var l_yolo = supervised_loss_batch(sup_out.raw, gt, cfg_.detector);

      Var l_img, l_inst, l_pc;
      InstanceStats stats;
      if (traits_.uses_target) {
        // Cyclic target batch.
        std::vector<int> batch_idx(static_cast<std::size_t>(cfg_.batch_size));
        for (int b = 0; b < cfg_.batch_size; ++b) {
          if (tgt_pos == 0 && !tgt_order.empty())
            std::shuffle(tgt_order.begin(), tgt_order.end(), shuffle_rng);
          batch_idx[static_cast<std::size_t>(b)] = tgt_order[tgt_pos];
          tgt_pos = (tgt_pos + 1) % tgt_order.size();
        }
        nn::Tensor tgt_batch({cfg_.batch_size, 1, cfg_.detector.input_size,
                              cfg_.detector.input_size});
        const std::int64_t stride =
            static_cast<std::int64_t>(cfg_.detector.input_size) * cfg_.detector.input_size;
        for (int b = 0; b < cfg_.batch_size; ++b)
          std::copy_n(
              target_.images[static_cast<std::size_t>(batch_idx[static_cast<std::size_t>(b)])]
                  .image.data(),
              stride, tgt_batch.data() + stride * b);
        BatchOutput tgt_out = bundle_.detector->forward(nn::constant(std::move(tgt_batch)));

        if (traits_.global_adv)
          l_img = img_loss(sup_out.global, tgt_out.global, *bundle_.global_disc, cfg_.grl_lambda,
                           &counters_);
        if (traits_.pc) {
          ++counters_.pc_calls;
          l_pc = pc_loss(sup_out.inst, tgt_out.inst, cfg_.pc_normalize);
        }
        if (traits_.instance) {
          const auto src_dets = decode_batch(sup_out.raw, true);
          const auto tgt_dets = decode_batch(tgt_out.raw, true);
          l_inst = instance_term(sup_out, tgt_out, src_dets, tgt_dets, stats);
        } else if (traits_.feature != MethodTraits::Feature::None) {
          l_inst = feature_term(sup_out, tgt_out, step);
        }
      }

      Var total = l_yolo;
      if (l_img) total = nn::add(total, nn::scale(l_img, cfg_.lambda_img));
      if (l_inst) total = nn::add(total, nn::scale(l_inst, cfg_.lambda_inst));
      if (l_pc) total = nn::add(total, nn::scale(l_pc, cfg_.lambda_pc));

      StepRecord rec;
      rec.step = step;
      rec.total = total->value[0];
      rec.yolo = l_yolo->value[0];
      rec.img = l_img ? l_img->value[0] : 0.0;
      rec.inst = l_inst ? l_inst->value[0] : 0.0;
      rec.pc = l_pc ? l_pc->value[0] : 0.0;
      rec.skipped_instance_batches = counters_.skipped_instance_batches;

      if (!std::isfinite(rec.total)) {
        throw TrainAbort("non-finite loss at step " + std::to_string(step) + " (epoch " +
                             std::to_string(epoch) + ", batch " + std::to_string(es) +
                             "): yolo=" + std::to_string(rec.yolo) + " img=" +
                             std::to_string(rec.img) + " inst=" + std::to_string(rec.inst) +
                             " pc=" + std::to_string(rec.pc),
                         step, es);
      }

      nn::backward(total);
      optimizer.step(nn::cosine_lr(cfg_.lr, cfg_.lr_floor_ratio, step, total_steps));
      optimizer.zero_grad();

      history_.push_back(rec);
      if (train_log_) {
        char line[256];
        std::snprintf(line, sizeof(line), "%ld,%.6f,%.6f,%.6f,%.6f,%.6f,%ld\n", rec.step,
                      rec.total, rec.yolo, rec.img, rec.inst, rec.pc,
                      rec.skipped_instance_batches);
        *train_log_ << line;
      }
      if (diag_log_) {
        char line[160];
        std::snprintf(line, sizeof(line), "%ld,%d,%d,%d,%d\n", rec.step, stats.src_instances,
                      stats.tgt_instances, stats.src_clusters, stats.tgt_clusters);
        *diag_log_ << line;
      }
      result.final_total = rec.total;
    }

    if (val_ && ((epoch + 1) % std::max(1, cfg_.val_interval) == 0 || epoch + 1 == cfg_.epochs)) {
      const EvalReport r = evaluate(*bundle_.detector, *val_, cfg_.conf_threshold, cfg_.nms_iou);
      if (r.map50 > result.best_val_map) {
        result.best_val_map = r.map50;
        if (!best_checkpoint_path_.empty()) save_checkpoint(bundle_, best_checkpoint_path_);
      }
    }
  }
  result.steps = step;
  return result;
}

}  // namespace uda
