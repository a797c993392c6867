#include <algorithm>
#include <cmath>
#include <numeric>

#include "jpo/error.hpp"
#include "jpo/train.hpp"
#include "jpo/util.hpp"

namespace jpo::train {

std::string_view to_string(Objective o) {
  switch (o) {
    case Objective::sft: return "sft";
    case Objective::dpo: return "dpo";
    case Objective::jpo: return "jpo";
    case Objective::kto: return "kto";
  }
  return "jpo";
}

Objective parse_objective(std::string_view name) {
  if (name == "sft") return Objective::sft;
  if (name == "dpo") return Objective::dpo;
  if (name == "jpo") return Objective::jpo;
  if (name == "kto") return Objective::kto;
  throw Error(Errc::UnsupportedObjective, "unknown objective '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw Error(Errc::ConfigInvalid, "beta must be > 0");
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw Error(Errc::ConfigInvalid, "step_size must be > 0");
  if (steps <= 0) throw Error(Errc::ConfigInvalid, "steps must be > 0");
  if (batch_size <= 0) throw Error(Errc::ConfigInvalid, "batch_size must be > 0");
}

EncodedPair encode(const lm::Vocabulary& vocab, const corpus::InstructionResponsePair& pair) {
  EncodedPair out{vocab.encode(pair.instruction), vocab.encode(pair.response)};
  if (out.instruction.empty() || out.response.empty()) {
    throw Error(Errc::EmptySequence, "pair '" + pair.id + "' has an empty instruction or response");
  }
  return out;
}

std::vector<EncodedComparison> encode(const lm::Vocabulary& vocab,
                                      std::span<const corpus::TrainingComparison> data) {
  std::vector<EncodedComparison> out;
  out.reserve(data.size());
  for (const auto& c : data) out.push_back({encode(vocab, c.winner), encode(vocab, c.loser)});
  return out;
}

namespace {

struct SideRef {
  double conditional = 0.0;
  double joint = 0.0;
};

struct ComparisonRef {
  SideRef winner;
  SideRef loser;
};

SideRef reference_side(const lm::PolicyModel& ref, const EncodedPair& p) {
  return {lm::conditional_logprob(ref, p.instruction, p.response),
          lm::joint_logprob(ref, p.instruction, p.response)};
}

ComparisonRef reference_values(const lm::PolicyModel& ref, const EncodedComparison& c) {
  return {reference_side(ref, c.winner), reference_side(ref, c.loser)};
}

// Log-probability of one side under the objective's likelihood, with optional
// gradient accumulation.
double side_logprob(const lm::PolicyModel& m, const EncodedPair& p, bool joint,
                    std::span<double> grad, double scale) {
  auto seq = lm::full_sequence(p.instruction, p.response);
  const std::size_t first = joint ? 1 : p.instruction.size() + 2;
  return m.score(seq, first, grad, scale);
}

// Two passes when a gradient is wanted: the value pass fixes the per-example
// loss slopes, the second accumulates the parameter gradient.
double batch_objective(const lm::PolicyModel& policy, std::span<const EncodedComparison> batch,
                       std::span<const ComparisonRef> refs, const TrainConfig& config,
                       std::span<double> grad) {
  if (batch.empty()) throw Error(Errc::EmptyDataset, "empty batch");
  const bool want_grad = !grad.empty();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  losses::Beta beta(config.beta);

  switch (config.objective) {
    case Objective::sft: {
      double total = 0.0;
      for (const auto& c : batch) {
        total -= side_logprob(policy, c.winner, false, want_grad ? grad : std::span<double>{}, -inv_n);
      }
      return total * inv_n;
    }
    case Objective::dpo:
    case Objective::jpo: {
      const bool joint = config.objective == Objective::jpo;
      double total = 0.0;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        losses::LogProbQuad q;
        q.policy_winner = side_logprob(policy, batch[i].winner, joint, {}, 0.0);
        q.policy_loser = side_logprob(policy, batch[i].loser, joint, {}, 0.0);
        q.ref_winner = joint ? refs[i].winner.joint : refs[i].winner.conditional;
        q.ref_loser = joint ? refs[i].loser.joint : refs[i].loser.conditional;
        auto pl = joint ? losses::jpo_loss(q, beta) : losses::dpo_loss(q, beta);
        total += pl.loss;
        if (want_grad) {
          side_logprob(policy, batch[i].winner, joint, grad, pl.grad_winner * inv_n);
          side_logprob(policy, batch[i].loser, joint, grad, pl.grad_loser * inv_n);
        }
      }
      return total * inv_n;
    }
    case Objective::kto: {
      std::vector<losses::KtoItem> items;
      items.reserve(batch.size() * 2);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const double w = side_logprob(policy, batch[i].winner, false, {}, 0.0);
        const double l = side_logprob(policy, batch[i].loser, false, {}, 0.0);
        items.push_back({w - refs[i].winner.conditional, true});
        items.push_back({l - refs[i].loser.conditional, false});
      }
      auto kl = losses::kto_loss(items, beta, config.kto);
      if (want_grad) {
        for (std::size_t i = 0; i < batch.size(); ++i) {
          side_logprob(policy, batch[i].winner, false, grad, kl.grads[2 * i]);
          side_logprob(policy, batch[i].loser, false, grad, kl.grads[2 * i + 1]);
        }
      }
      return kl.loss;
    }
  }
  throw Error(Errc::UnsupportedObjective, "unsupported objective");
}

// Epoch-wise shuffled minibatches; a batch covering the whole dataset keeps
// the original order so full-batch runs do not depend on the sampler.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed)
      : n_(n), batch_size_(std::min(batch_size, n)), rng_(seed), order_(n) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    cursor_ = n_;
  }

  std::span<const std::size_t> next() {
    if (batch_size_ == n_) return order_;
    if (cursor_ + batch_size_ > n_) {
      rng_.shuffle(std::span<std::size_t>(order_));
      cursor_ = 0;
    }
    auto out = std::span<const std::size_t>(order_).subspan(cursor_, batch_size_);
    cursor_ += batch_size_;
    return out;
  }

 private:
  std::size_t n_;
  std::size_t batch_size_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_;
};

TrainResult run_descent(const lm::PolicyModel& init, std::span<const EncodedComparison> data,
                        std::span<const ComparisonRef> refs, const TrainConfig& config,
                        const StepObserver& observer) {
  TrainResult result{init, {}};
  lm::PolicyModel& model = result.model;
  BatchSampler sampler(data.size(), static_cast<std::size_t>(config.batch_size),
                       derive_seed(config.seed, 0x5a3b));
  std::vector<double> grad(model.parameter_count());
  std::vector<EncodedComparison> batch;
  std::vector<ComparisonRef> batch_refs;
  result.log.reserve(static_cast<std::size_t>(config.steps));
  for (int step = 1; step <= config.steps; ++step) {
    auto idx = sampler.next();
    batch.clear();
    batch_refs.clear();
    for (std::size_t i : idx) {
      batch.push_back(data[i]);
      batch_refs.push_back(refs.empty() ? ComparisonRef{} : refs[i]);
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    const double loss = batch_objective(model, batch, batch_refs, config, grad);
    result.log.push_back({step, loss});
    auto params = model.mutable_parameters();
    for (std::size_t k = 0; k < params.size(); ++k) params[k] -= config.step_size * grad[k];
    if (observer) observer(step, model);
  }
  return result;
}

}  // namespace

TrainResult sft_train(const lm::PolicyModel& model,
                      std::span<const corpus::InstructionResponsePair> data,
                      const TrainConfig& config, const StepObserver& observer) {
  if (data.empty()) throw Error(Errc::EmptyDataset, "SFT dataset is empty");
  config.validate();
  std::vector<EncodedComparison> encoded;
  encoded.reserve(data.size());
  for (const auto& p : data) encoded.push_back({encode(model.vocab(), p), {}});
  TrainConfig sft = config;
  sft.objective = Objective::sft;
  return run_descent(model, encoded, {}, sft, observer);
}

TrainResult pref_train(const lm::PolicyModel& model,
                       std::span<const corpus::TrainingComparison> data,
                       const TrainConfig& config, const StepObserver& observer) {
  if (data.empty()) throw Error(Errc::EmptyDataset, "preference dataset is empty");
  if (config.objective == Objective::sft) {
    throw Error(Errc::UnsupportedObjective, "pref_train needs dpo, jpo or kto");
  }
  config.validate();
  const lm::PolicyModel reference = model;
  auto encoded = encode(model.vocab(), data);
  std::vector<ComparisonRef> refs;
  refs.reserve(encoded.size());
  for (const auto& c : encoded) refs.push_back(reference_values(reference, c));
  return run_descent(model, encoded, refs, config, observer);
}

double objective_value(const lm::PolicyModel& policy, const lm::PolicyModel& reference,
                       std::span<const EncodedComparison> batch, const TrainConfig& config,
                       std::span<double> grad) {
  std::vector<ComparisonRef> refs;
  if (config.objective != Objective::sft) {
    refs.reserve(batch.size());
    for (const auto& c : batch) refs.push_back(reference_values(reference, c));
  } else {
    refs.resize(batch.size());
  }
  return batch_objective(policy, batch, refs, config, grad);
}

double mean_preference_margin(const lm::PolicyModel& policy, const lm::PolicyModel& reference,
                              std::span<const EncodedComparison> data, Objective objective,
                              losses::Beta beta) {
  if (data.empty()) throw Error(Errc::EmptyDataset, "no comparisons");
  const bool joint = objective == Objective::jpo;
  double total = 0.0;
  for (const auto& c : data) {
    auto ref = reference_values(reference, c);
    losses::LogProbQuad q;
    q.policy_winner = side_logprob(policy, c.winner, joint, {}, 0.0);
    q.policy_loser = side_logprob(policy, c.loser, joint, {}, 0.0);
    q.ref_winner = joint ? ref.winner.joint : ref.winner.conditional;
    q.ref_loser = joint ? ref.loser.joint : ref.loser.conditional;
    total += losses::preference_margin(q, beta);
  }
  return total / static_cast<double>(data.size());
}

double relative_error(double analytic, double numeric) {
  // Gradients below the floor are compared on an absolute scale. Roundoff in
  // the differenced losses is around 1e-11, so a structurally zero gradient
  // shows up numerically at that size and cannot be judged relatively.
  constexpr double kFloor = 1e-6;
  const double diff = std::abs(analytic - numeric);
  if (diff == 0.0) return 0.0;
  return diff / std::max({std::abs(analytic), std::abs(numeric), kFloor});
}

double grad_check(const lm::PolicyModel& policy, const lm::PolicyModel& reference,
                  std::span<const EncodedComparison> data, const TrainConfig& config,
                  const GradCheckOptions& options) {
  if (!(options.epsilon > 0.0 && options.epsilon <= 1e-3)) {
    throw Error(Errc::ConfigInvalid, "grad_check epsilon must be in (0, 1e-3]");
  }
  std::vector<double> analytic(policy.parameter_count(), 0.0);
  objective_value(policy, reference, data, config, analytic);

  std::vector<std::size_t> indices;
  if (options.indices) {
    indices = *options.indices;
  } else {
    Rng rng(options.seed);
    std::vector<std::size_t> all(policy.parameter_count());
    std::iota(all.begin(), all.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(all));
    indices.assign(all.begin(), all.begin() + std::min(options.sample_size, all.size()));
  }

  lm::PolicyModel probe = policy;
  double worst = 0.0;
  for (std::size_t k : indices) {
    if (k >= probe.parameter_count()) throw Error(Errc::LengthMismatch, "parameter index out of range");
    const double original = policy.parameters()[k];
    auto at = [&](double offset) {
      probe.mutable_parameters()[k] = original + offset;
      return objective_value(probe, reference, data, config);
    };
    // Fourth-order central stencil.
    const double h = options.epsilon;
    const double numeric = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
    probe.mutable_parameters()[k] = original;
    worst = std::max(worst, relative_error(analytic[k], numeric));
  }
  return worst;
}

}  // namespace jpo::train
