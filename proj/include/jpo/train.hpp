#pragma once

// Supervised finetuning and preference training for the tiny model, plus a
// finite-difference gradient check over the same objectives.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jpo/corpus.hpp"
#include "jpo/losses.hpp"
#include "jpo/tinylm.hpp"

namespace jpo::train {

enum class Objective { sft, dpo, jpo, kto };

std::string_view to_string(Objective o);
// Throws Errc::UnsupportedObjective for unknown names.
Objective parse_objective(std::string_view name);

// Reference hyperparameters for full-size models are recorded here for
// documentation; desk-scale runs override them.
struct FullScaleDefaults {
  static constexpr int kPrefBatchSize = 32;
  static constexpr int kPrefEpochsSummarization = 10;
  static constexpr int kPrefEpochsDialogue = 5;
  static constexpr double kPrefPeakLearningRate = 5e-5;
  static constexpr int kPrefWarmupSteps = 100;
  static constexpr int kSftEpochs = 3;
  static constexpr double kSftLearningRateSummarization = 2e-5;
  static constexpr double kSftLearningRateDialogue = 1.5e-6;
};

struct TrainConfig {
  Objective objective = Objective::jpo;
  double beta = losses::kDefaultBeta;
  double step_size = 1.0;
  int steps = 100;
  int batch_size = FullScaleDefaults::kPrefBatchSize;
  std::uint64_t seed = 0;
  losses::KtoOptions kto;

  // Throws Errc::ConfigInvalid when a positivity constraint fails.
  void validate() const;
};

struct TrainLogEntry {
  int step = 0;
  double loss = 0.0;  // batch loss before the update of this step
};

struct TrainResult {
  lm::PolicyModel model;
  std::vector<TrainLogEntry> log;
};

// Called after every update with the 1-based step index.
using StepObserver = std::function<void(int step, const lm::PolicyModel& model)>;

// Token-level form of an instruction-response pair.
struct EncodedPair {
  std::vector<lm::Token> instruction;
  std::vector<lm::Token> response;
};

struct EncodedComparison {
  EncodedPair winner;
  EncodedPair loser;
};

EncodedPair encode(const lm::Vocabulary& vocab, const corpus::InstructionResponsePair& pair);
std::vector<EncodedComparison> encode(const lm::Vocabulary& vocab,
                                      std::span<const corpus::TrainingComparison> data);

// Mean negative conditional log-likelihood with response-only loss.
TrainResult sft_train(const lm::PolicyModel& model,
                      std::span<const corpus::InstructionResponsePair> data,
                      const TrainConfig& config, const StepObserver& observer = {});

// The input model is copied as the frozen reference. Throws
// Errc::EmptyDataset and Errc::UnsupportedObjective (for sft).
TrainResult pref_train(const lm::PolicyModel& model,
                       std::span<const corpus::TrainingComparison> data,
                       const TrainConfig& config, const StepObserver& observer = {});

// Batch objective value; adds d(loss)/d(params) into grad when non-empty.
// For sft only the winner side of each comparison is used.
double objective_value(const lm::PolicyModel& policy, const lm::PolicyModel& reference,
                       std::span<const EncodedComparison> batch, const TrainConfig& config,
                       std::span<double> grad = {});

// Mean preference margin (conditional log-ratios for dpo/kto, joint for jpo).
double mean_preference_margin(const lm::PolicyModel& policy, const lm::PolicyModel& reference,
                              std::span<const EncodedComparison> data, Objective objective,
                              losses::Beta beta);

struct GradCheckOptions {
  double epsilon = 1e-4;
  std::size_t sample_size = 32;
  std::uint64_t seed = 0;
  // When set, checks exactly these parameter indices instead of a random subset.
  std::optional<std::vector<std::size_t>> indices;
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor); 0 when both vanish.
double relative_error(double analytic, double numeric);

// Largest relative error between analytic gradients and fourth-order central
// differences.
double grad_check(const lm::PolicyModel& policy, const lm::PolicyModel& reference,
                  std::span<const EncodedComparison> data, const TrainConfig& config,
                  const GradCheckOptions& options = {});

}  // namespace jpo::train
