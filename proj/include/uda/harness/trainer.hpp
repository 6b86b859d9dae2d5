#pragma once

#include <filesystem>
#include <optional>
#include <ostream>

#include "uda/data/dataset.hpp"
#include "uda/harness/checkpoint.hpp"
#include "uda/harness/evaluator.hpp"
#include "uda/nn/optim.hpp"

namespace uda {

/// Raised when a step produces a non-finite total loss.
class TrainAbort : public std::runtime_error {
 public:
  TrainAbort(const std::string& what, long step, int batch_index)
      : std::runtime_error(what), step(step), batch_index(batch_index) {}
  long step;
  int batch_index;
};

struct StepRecord {
  long step = 0;
  double total = 0, yolo = 0, img = 0, inst = 0, pc = 0;
  long skipped_instance_batches = 0;
};

struct TrainResult {
  long steps = 0;
  double final_total = 0;
  double best_val_map = -1.0;  // -1 when no validation split was given
};

/// Paired source/target training over one method's loss composition. The
/// supervised term always trains on the labeled split (source, or target for
/// the oracle method); alignment terms pair each source batch with a
/// cyclically drawn target batch.
class Trainer {
 public:
  Trainer(TrainConfig cfg, Dataset source, Dataset target);

  /// Enables best-checkpoint tracking on a labeled validation split.
  void set_validation(Dataset val, std::filesystem::path best_checkpoint_path);
  void set_log(std::ostream* train_log, std::ostream* diag_log = nullptr);

  TrainResult run();

  const ModelBundle& bundle() const { return bundle_; }
  const AlignCounters& counters() const { return counters_; }
  const std::vector<StepRecord>& history() const { return history_; }

 private:
  struct InstanceStats {
    int src_instances = 0, tgt_instances = 0;
    int src_clusters = 0, tgt_clusters = 0;
    bool contributed = false;
  };

  nn::Tensor make_batch(const Dataset& ds, const std::vector<int>& order, std::size_t start) const;
  std::vector<DetectionSet> decode_batch(const std::array<nn::Var, kScaleCount>& raw,
                                         bool cap) const;
  nn::Var instance_term(const BatchOutput& src_out, const BatchOutput& tgt_out,
                        const std::vector<DetectionSet>& src_dets,
                        const std::vector<DetectionSet>& tgt_dets, InstanceStats& stats);
  nn::Var feature_term(const BatchOutput& src_out, const BatchOutput& tgt_out, long step);

  TrainConfig cfg_;
  MethodTraits traits_;
  Dataset source_;
  Dataset target_;
  std::optional<Dataset> val_;
  std::filesystem::path best_checkpoint_path_;
  ModelBundle bundle_;
  AlignCounters counters_;
  std::vector<StepRecord> history_;
  std::ostream* train_log_ = nullptr;
  std::ostream* diag_log_ = nullptr;
};

}  // namespace uda
