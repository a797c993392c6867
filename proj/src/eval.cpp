#include "jpo/eval.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>

#include "jpo/error.hpp"
#include "jpo/util.hpp"

namespace jpo::eval {

double win_rate(std::span<const Outcome> outcomes) {
  if (outcomes.empty()) throw Error(Errc::EmptyOutcomes, "win_rate of no outcomes");
  double credit = 0.0;
  for (Outcome o : outcomes) {
    if (o == Outcome::Win) credit += 1.0;
    if (o == Outcome::Tie) credit += 0.5;
  }
  return credit / static_cast<double>(outcomes.size());
}

WinRateReport run_eval(const lm::PolicyModel& model,
                       std::span<const corpus::InstructionResponsePair> test_set, judge::Judge& judge,
                       const EvalOptions& options, std::string model_id) {
  if (test_set.empty()) throw Error(Errc::EmptyDataset, "empty evaluation set");
  if (options.temperatures.empty()) throw Error(Errc::ConfigInvalid, "no evaluation temperatures");
  const auto& vocab = model.vocab();
  std::vector<std::vector<lm::Token>> instructions;
  for (const auto& item : test_set) instructions.push_back(vocab.encode(item.instruction));

  WinRateReport report;
  report.model_id = std::move(model_id);
  report.judge_id = judge.annotator_tag();
  double sum = 0.0;
  for (std::size_t t = 0; t < options.temperatures.size(); ++t) {
    const double temp = options.temperatures[t];
    const std::uint64_t temp_seed = derive_seed(options.seed, t);
    std::vector<std::string> samples(test_set.size());
    std::vector<judge::Comparison> items;
    std::vector<std::size_t> judged;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
      samples[i] = vocab.decode(lm::sample(model, instructions[i], temp, options.max_len, derive_seed(temp_seed, i)));
      if (samples[i].empty()) continue;
      items.push_back(judge::conditional_comparison(test_set[i].instruction, samples[i], test_set[i].response));
      judged.push_back(i);
    }
    auto verdicts = judge.adjudicate_all(items);
    std::vector<Outcome> outcomes(test_set.size(), Outcome::Loss);
    for (std::size_t k = 0; k < judged.size(); ++k) {
      switch (verdicts[k].choice) {
        case judge::Choice::ResponseA: outcomes[judged[k]] = Outcome::Win; break;
        case judge::Choice::ResponseB: outcomes[judged[k]] = Outcome::Loss; break;
        case judge::Choice::Equal: outcomes[judged[k]] = Outcome::Tie; break;
      }
    }
    TemperatureResult r;
    r.temperature = temp;
    r.wins = static_cast<std::size_t>(std::count(outcomes.begin(), outcomes.end(), Outcome::Win));
    r.losses = static_cast<std::size_t>(std::count(outcomes.begin(), outcomes.end(), Outcome::Loss));
    r.ties = static_cast<std::size_t>(std::count(outcomes.begin(), outcomes.end(), Outcome::Tie));
    r.win_rate = win_rate(outcomes);
    sum += r.win_rate;
    report.wins += r.wins;
    report.losses += r.losses;
    report.ties += r.ties;
    report.total += outcomes.size();
    report.per_temperature.push_back(r);
  }
  report.averaged = sum / static_cast<double>(options.temperatures.size());
  return report;
}

PreferenceData build_preference_data(std::span<const corpus::TripletRecord> triplets, judge::Judge& judge,
                                     std::uint64_t seed) {
  PreferenceData d;
  d.triplets = corpus::dedupe_instructions(triplets);
  d.conditional = judge::annotate_conditional(d.triplets, judge);
  d.singles = corpus::select_single_responses(d.triplets, derive_seed(seed, 1));
  auto candidates = corpus::pair_for_joint(d.singles, derive_seed(seed, 2));
  d.joint = judge::annotate_joint(candidates, judge);
  d.sft = corpus::build_sft_from_conditional(d.conditional);
  d.merged = corpus::to_training_set(corpus::merge_preference_sets(d.conditional, d.joint));
  d.conditional_only = corpus::to_training_set(corpus::merge_preference_sets(d.conditional, {}));
  d.joint_only = corpus::to_training_set(d.joint);
  return d;
}

std::vector<std::size_t> nested_subsample(std::size_t n, std::size_t size, std::uint64_t seed) {
  if (size > n) {
    throw Error(Errc::SizeExceedsCorpus,
                "size " + std::to_string(size) + " exceeds corpus of " + std::to_string(n));
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  perm.resize(size);
  std::sort(perm.begin(), perm.end());
  return perm;
}

namespace {

template <typename T>
std::vector<T> pick(std::span<const T> items, std::span<const std::size_t> indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(items[i]);
  return out;
}

}  // namespace

ScalingCurve scaling_run(std::span<const std::size_t> sizes, const lm::PolicyModel& sft_model,
                         std::span<const corpus::TrainingComparison> corpus,
                         std::span<const corpus::InstructionResponsePair> test_set,
                         const train::TrainConfig& config, judge::Judge& judge, const EvalOptions& options,
                         std::uint64_t seed) {
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0) throw Error(Errc::ConfigInvalid, "scaling sizes must be positive");
    if (i > 0 && sizes[i] <= sizes[i - 1]) throw Error(Errc::ConfigInvalid, "scaling sizes must be strictly increasing");
    if (sizes[i] > corpus.size()) {
      throw Error(Errc::SizeExceedsCorpus,
                  "size " + std::to_string(sizes[i]) + " exceeds corpus of " + std::to_string(corpus.size()));
    }
  }
  ScalingCurve curve;
  for (std::size_t size : sizes) {
    auto idx = nested_subsample(corpus.size(), size, seed);
    auto data = pick(corpus, std::span<const std::size_t>(idx));
    auto trained = train::pref_train(sft_model, data, config);
    ScalingPoint p;
    p.size = size;
    p.report = run_eval(trained.model, test_set, judge, options, "scaling-" + std::to_string(size));
    p.win_rate = p.report.averaged;
    curve.points.push_back(std::move(p));
  }
  return curve;
}

AblationData ablation_data(std::span<const corpus::TrainingComparison> conditional,
                           std::span<const corpus::TrainingComparison> joint, std::uint64_t seed) {
  if (conditional.size() < 2 || joint.size() < 2) {
    throw Error(Errc::InsufficientData, "ablation needs at least 2 conditional and 2 joint comparisons (have " +
                                            std::to_string(conditional.size()) + " and " +
                                            std::to_string(joint.size()) + ")");
  }
  AblationData d;
  const std::size_t n = std::min(conditional.size(), joint.size());
  d.arm_size = n;
  auto ci = nested_subsample(conditional.size(), n, derive_seed(seed, 11));
  auto ji = nested_subsample(joint.size(), n, derive_seed(seed, 12));
  d.conditional_only = pick(conditional, std::span<const std::size_t>(ci));
  d.joint_only = pick(joint, std::span<const std::size_t>(ji));
  auto half_c = nested_subsample(conditional.size(), (n + 1) / 2, derive_seed(seed, 13));
  auto half_j = nested_subsample(joint.size(), n / 2, derive_seed(seed, 14));
  d.mixed = pick(conditional, std::span<const std::size_t>(half_c));
  auto tail = pick(joint, std::span<const std::size_t>(half_j));
  d.mixed.insert(d.mixed.end(), tail.begin(), tail.end());
  return d;
}

AblationReport ablation_suite(const lm::PolicyModel& sft_model,
                              std::span<const corpus::TrainingComparison> conditional,
                              std::span<const corpus::TrainingComparison> joint,
                              std::span<const corpus::InstructionResponsePair> test_set,
                              const train::TrainConfig& config, judge::Judge& judge, const EvalOptions& options,
                              std::uint64_t seed) {
  auto data = ablation_data(conditional, joint, seed);
  AblationReport report;
  report.arm_size = data.arm_size;
  auto run_arm = [&](std::string name, const std::vector<corpus::TrainingComparison>& set, std::size_t nc,
                     std::size_t nj) {
    auto trained = train::pref_train(sft_model, set, config);
    AblationArm arm{name, nc, nj, run_eval(trained.model, test_set, judge, options, name)};
    report.arms.push_back(std::move(arm));
  };
  const std::size_t n = data.arm_size;
  run_arm("conditional-only", data.conditional_only, n, 0);
  run_arm("joint-only", data.joint_only, 0, n);
  run_arm("mixed-50-50", data.mixed, (n + 1) / 2, n / 2);
  return report;
}

nlohmann::json to_json(const WinRateReport& r) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& t : r.per_temperature) {
    per.push_back({{"temperature", t.temperature},
                   {"wins", t.wins},
                   {"losses", t.losses},
                   {"ties", t.ties},
                   {"win_rate", t.win_rate}});
  }
  return {{"model", r.model_id}, {"judge", r.judge_id}, {"per_temperature", per}, {"averaged_win_rate", r.averaged},
          {"wins", r.wins},      {"losses", r.losses},  {"ties", r.ties},        {"total", r.total}};
}

nlohmann::json to_json(const ScalingCurve& c) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : c.points) points.push_back({{"size", p.size}, {"win_rate", p.win_rate}, {"report", to_json(p.report)}});
  return {{"version", 1}, {"points", points}};
}

nlohmann::json to_json(const AblationReport& r) {
  nlohmann::json arms = nlohmann::json::array();
  for (const auto& a : r.arms) {
    arms.push_back({{"arm", a.name},
                    {"conditional_count", a.conditional_count},
                    {"joint_count", a.joint_count},
                    {"report", to_json(a.report)}});
  }
  return {{"version", 1}, {"arm_size", r.arm_size}, {"arms", arms}};
}

std::string scaling_csv(const ScalingCurve& c) {
  std::string out = "size,win_rate\n";
  for (const auto& p : c.points) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), p.win_rate);
    out += std::to_string(p.size) + "," + std::string(buf, res.ptr) + "\n";
  }
  return out;
}

}  // namespace jpo::eval
