#pragma once

// Win-rate evaluation against gold responses and the experiment runners
// built on it (preference-data construction, scaling sweep, ablation arms).

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jpo/corpus.hpp"
#include "jpo/judge.hpp"
#include "jpo/tinylm.hpp"
#include "jpo/train.hpp"

namespace jpo::eval {

enum class Outcome { Win, Loss, Tie };

// (wins + 0.5 * ties) / total. Throws Errc::EmptyOutcomes.
double win_rate(std::span<const Outcome> outcomes);

inline const std::vector<double> kDefaultTemperatures{0.001, 0.5, 1.0};
constexpr std::size_t kDefaultEvalSize = 500;

struct EvalOptions {
  std::vector<double> temperatures = kDefaultTemperatures;
  std::size_t max_len = 8;
  std::uint64_t seed = 0;
};

struct TemperatureResult {
  double temperature = 0.0;
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::size_t ties = 0;
  double win_rate = 0.0;

  bool operator==(const TemperatureResult&) const = default;
};

struct WinRateReport {
  std::string model_id;
  std::string judge_id;
  std::vector<TemperatureResult> per_temperature;
  double averaged = 0.0;
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::size_t ties = 0;
  std::size_t total = 0;

  bool operator==(const WinRateReport&) const = default;
};

// One sample per instruction and temperature, judged model (a) vs gold (b)
// with the order flip. An empty sample is a loss without a judge call.
WinRateReport run_eval(const lm::PolicyModel& model,
                       std::span<const corpus::InstructionResponsePair> test_set, judge::Judge& judge,
                       const EvalOptions& options, std::string model_id = "policy");

// Every dataset derived from a triplet corpus by AI annotation.
struct PreferenceData {
  std::vector<corpus::TripletRecord> triplets;                 // deduplicated
  std::vector<corpus::ConditionalPreferenceRecord> conditional;  // D_C
  std::vector<corpus::InstructionResponsePair> singles;          // D_S
  std::vector<corpus::JointPreferenceRecord> joint;              // D_H
  std::vector<corpus::InstructionResponsePair> sft;              // chosen responses of D_C
  std::vector<corpus::TrainingComparison> merged;                // de-tied D_C + D_H
  std::vector<corpus::TrainingComparison> conditional_only;      // de-tied D_C
  std::vector<corpus::TrainingComparison> joint_only;            // de-tied D_H
};

PreferenceData build_preference_data(std::span<const corpus::TripletRecord> triplets, judge::Judge& judge,
                                     std::uint64_t seed);

// Sorted first `size` entries of a seeded permutation of 0..n-1; smaller
// sizes are subsets of larger ones. Throws Errc::SizeExceedsCorpus.
std::vector<std::size_t> nested_subsample(std::size_t n, std::size_t size, std::uint64_t seed);

struct ScalingPoint {
  std::size_t size = 0;
  double win_rate = 0.0;
  WinRateReport report;

  bool operator==(const ScalingPoint&) const = default;
};

struct ScalingCurve {
  std::vector<ScalingPoint> points;

  bool operator==(const ScalingCurve&) const = default;
};

// Trains from the SFT checkpoint on nested subsamples and evaluates each.
ScalingCurve scaling_run(std::span<const std::size_t> sizes, const lm::PolicyModel& sft_model,
                         std::span<const corpus::TrainingComparison> corpus,
                         std::span<const corpus::InstructionResponsePair> test_set,
                         const train::TrainConfig& config, judge::Judge& judge, const EvalOptions& options,
                         std::uint64_t seed);

struct AblationArm {
  std::string name;
  std::size_t conditional_count = 0;
  std::size_t joint_count = 0;
  WinRateReport report;

  bool operator==(const AblationArm&) const = default;
};

struct AblationReport {
  std::size_t arm_size = 0;
  std::vector<AblationArm> arms;

  bool operator==(const AblationReport&) const = default;
};

// Training sets of the three arms, each of size N = min(|conditional|, |joint|).
struct AblationData {
  std::size_t arm_size = 0;
  std::vector<corpus::TrainingComparison> conditional_only;
  std::vector<corpus::TrainingComparison> joint_only;
  std::vector<corpus::TrainingComparison> mixed;  // ceil(N/2) conditional + floor(N/2) joint
};

// Throws Errc::InsufficientData when either source has fewer than 2 comparisons.
AblationData ablation_data(std::span<const corpus::TrainingComparison> conditional,
                           std::span<const corpus::TrainingComparison> joint, std::uint64_t seed);

AblationReport ablation_suite(const lm::PolicyModel& sft_model,
                              std::span<const corpus::TrainingComparison> conditional,
                              std::span<const corpus::TrainingComparison> joint,
                              std::span<const corpus::InstructionResponsePair> test_set,
                              const train::TrainConfig& config, judge::Judge& judge, const EvalOptions& options,
                              std::uint64_t seed);

nlohmann::json to_json(const WinRateReport& r);
nlohmann::json to_json(const ScalingCurve& c);
nlohmann::json to_json(const AblationReport& r);
std::string scaling_csv(const ScalingCurve& c);  // size,win_rate

}  // namespace jpo::eval
