#pragma once

#include <span>
#include <vector>

namespace jpo::losses {

// Sequence log-probabilities (nats) of the preferred and dispreferred sides
// under the policy and the frozen reference. For DPO these are conditional
// log p(R | I); for JPO they are joint log p(R, I).
struct LogProbQuad {
  double policy_winner = 0.0;
  double policy_loser = 0.0;
  double ref_winner = 0.0;
  double ref_loser = 0.0;
};

class Beta {
 public:
  // Throws Errc::InvalidBeta unless beta is finite and > 0.
  explicit Beta(double beta);
  double value() const noexcept { return beta_; }

 private:
  double beta_;
};

inline constexpr double kDefaultBeta = 0.1;
inline constexpr double kBroadInstructionBeta = 0.01;

// Loss of one comparison and its derivatives w.r.t. the two policy terms.
struct PairLoss {
  double loss = 0.0;
  double grad_winner = 0.0;
  double grad_loser = 0.0;
};

// log(sigmoid(x)) without overflow; throws Errc::NonFiniteInput.
double stable_log_sigmoid(double x);

// beta * ((policy_winner - ref_winner) - (policy_loser - ref_loser))
double preference_margin(const LogProbQuad& quad, Beta beta);

// -log sigmoid(margin) on conditional log-probabilities.
PairLoss dpo_loss(const LogProbQuad& quad, Beta beta);

// Same functional form as dpo_loss, evaluated on joint log-probabilities.
PairLoss jpo_loss(const LogProbQuad& quad, Beta beta);

struct KtoItem {
  double log_ratio = 0.0;  // log p_policy(R|I) - log p_ref(R|I)
  bool desirable = true;
};

enum class KtoReference {
  OppositeLabelMean,  // mean of max(0, log_ratio) over the opposite-label items
  Fixed,              // a constant reference point
};

struct KtoOptions {
  double lambda_desirable = 1.0;
  double lambda_undesirable = 1.0;
  KtoReference reference = KtoReference::OppositeLabelMean;
  double fixed_reference = 0.0;
};

struct KtoLoss {
  double loss = 0.0;
  std::vector<double> grads;       // d loss / d log_ratio_i
  std::vector<double> item_losses; // lambda_y - value_i, before batch averaging
};

// Batch-mean KTO objective. The gradient includes the dependence of the
// batch reference point on the log-ratios, so it is the exact derivative of
// the returned loss. Throws Errc::EmptyBatch or Errc::InvalidBeta.
KtoLoss kto_loss(std::span<const KtoItem> batch, Beta beta, const KtoOptions& options = {});

}  // namespace jpo::losses
