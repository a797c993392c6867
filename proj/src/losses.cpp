#include "jpo/losses.hpp"

#include <cmath>
#include <string>

#include "jpo/error.hpp"

namespace jpo::losses {

namespace {

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw Error(Errc::NonFiniteInput, std::string(what) + " is not finite");
}

void require_finite(const LogProbQuad& q) {
  require_finite(q.policy_winner, "policy_winner");
  require_finite(q.policy_loser, "policy_loser");
  require_finite(q.ref_winner, "ref_winner");
  require_finite(q.ref_loser, "ref_loser");
}

double sigmoid(double x) { return std::exp(stable_log_sigmoid(x)); }

PairLoss bradley_terry_loss(const LogProbQuad& quad, Beta beta) {
  const double margin = preference_margin(quad, beta);
  // d/dm [-log sigmoid(m)] = -sigmoid(-m)
  const double slope = sigmoid(-margin);
  return {-stable_log_sigmoid(margin), -beta.value() * slope, beta.value() * slope};
}

}  // namespace

Beta::Beta(double beta) : beta_(beta) {
  if (!std::isfinite(beta) || beta <= 0.0) {
    throw Error(Errc::InvalidBeta, "beta must be finite and > 0, got " + std::to_string(beta));
  }
}

double stable_log_sigmoid(double x) {
  require_finite(x, "log-sigmoid argument");
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

double preference_margin(const LogProbQuad& quad, Beta beta) {
  require_finite(quad);
  const double winner_ratio = quad.policy_winner - quad.ref_winner;
  const double loser_ratio = quad.policy_loser - quad.ref_loser;
  return beta.value() * (winner_ratio - loser_ratio);
}

PairLoss dpo_loss(const LogProbQuad& quad, Beta beta) { return bradley_terry_loss(quad, beta); }

PairLoss jpo_loss(const LogProbQuad& quad, Beta beta) { return bradley_terry_loss(quad, beta); }

KtoLoss kto_loss(std::span<const KtoItem> batch, Beta beta, const KtoOptions& options) {
  if (batch.empty()) throw Error(Errc::EmptyBatch, "KTO batch is empty");
  const double b = beta.value();
  const std::size_t n = batch.size();

  // Reference points: z_desirable is taken from the undesirable items and
  // vice versa, following the opposite-label estimator.
  double sum_pos_des = 0.0, sum_pos_und = 0.0;
  std::size_t n_des = 0, n_und = 0;
  for (const auto& item : batch) {
    require_finite(item.log_ratio, "log_ratio");
    const double clipped = std::max(0.0, item.log_ratio);
    if (item.desirable) {
      sum_pos_des += clipped;
      ++n_des;
    } else {
      sum_pos_und += clipped;
      ++n_und;
    }
  }
  double z_for_des = 0.0, z_for_und = 0.0;
  if (options.reference == KtoReference::Fixed) {
    z_for_des = z_for_und = options.fixed_reference;
  } else {
    z_for_des = n_und ? sum_pos_und / static_cast<double>(n_und) : 0.0;
    z_for_und = n_des ? sum_pos_des / static_cast<double>(n_des) : 0.0;
  }

  KtoLoss out;
  out.grads.assign(n, 0.0);
  out.item_losses.assign(n, 0.0);
  // d(value_i)/d(z) summed per group, needed for the reference-point path.
  double dvalue_dz_des = 0.0, dvalue_dz_und = 0.0;
  std::vector<double> dvalue_dr(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& item = batch[i];
    if (item.desirable) {
      const double s = sigmoid(b * (item.log_ratio - z_for_des));
      const double value = options.lambda_desirable * s;
      out.item_losses[i] = options.lambda_desirable - value;
      const double d = options.lambda_desirable * b * s * (1.0 - s);
      dvalue_dr[i] = d;
      dvalue_dz_des -= d;
    } else {
      const double s = sigmoid(b * (z_for_und - item.log_ratio));
      const double value = options.lambda_undesirable * s;
      out.item_losses[i] = options.lambda_undesirable - value;
      const double d = options.lambda_undesirable * b * s * (1.0 - s);
      dvalue_dr[i] = -d;
      dvalue_dz_und += d;
    }
    total += out.item_losses[i];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loss = total * inv_n;

  for (std::size_t i = 0; i < n; ++i) {
    double dvalue_total = dvalue_dr[i];
    if (options.reference == KtoReference::OppositeLabelMean && batch[i].log_ratio > 0.0) {
      // A desirable item's ratio feeds z_for_und, an undesirable one feeds z_for_des.
      if (batch[i].desirable) {
        dvalue_total += dvalue_dz_und / static_cast<double>(n_des);
      } else {
        dvalue_total += dvalue_dz_des / static_cast<double>(n_und);
      }
    }
    out.grads[i] = -dvalue_total * inv_n;
  }
  return out;
}

}  // namespace jpo::losses
