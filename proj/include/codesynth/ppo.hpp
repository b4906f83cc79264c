#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "codesynth/value.hpp"

namespace codesynth {

// Dense row-major (batch, max_tokens) array of doubles. The kernel never
// reads masked-out entries, so callers may leave them uninitialized garbage
// without affecting any result.
struct Matrix {
  size_t rows = 0, cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(size_t r, size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(size_t r, size_t c) { return data[r * cols + c]; }
  double at(size_t r, size_t c) const { return data[r * cols + c]; }
  bool same_shape(const Matrix& o) const {
    return rows == o.rows && cols == o.cols;
  }
};

// Aligned per-token arrays for one PPO step. logp_* are log-probabilities of
// the taken token under the current policy, the rollout policy and the
// frozen initialization policy; mask selects response tokens;
// terminal_reward is the per-sequence sandbox score (0.0 or 1.0).
struct PpoBatch {
  Matrix logp_policy;
  Matrix logp_old;
  Matrix logp_ref;
  Matrix values;
  Matrix mask;
  std::vector<double> terminal_reward;

  void validate() const;  // ShapeError on any violated invariant
};

struct PpoHyper {
  double eps_clip = 0.2;
  double beta = 0.0;        // KL penalty coefficient
  double gamma = 1.0;
  double lam = 0.95;
  double whiten_eps = 1e-8;
  bool whiten_rewards = false;
  bool whiten_advantages = true;

  void validate() const;
};

// Masked whitening: (x - mean) / (std + eps) over masked-in entries, mean
// added back when shift_mean is false; masked-out entries are zeroed. Uses
// the population standard deviation. Throws DegenerateMaskError for fewer
// than 2 masked-in entries.
Matrix whiten(const Matrix& x, const Matrix& mask, double eps,
              bool shift_mean);

// Per-token reward: -beta * (logp_policy - logp_ref) at every masked-in
// token, plus terminal_reward at the last masked-in token of each sequence.
// With hyper.whiten_rewards the result is whitened keeping the mean.
Matrix shaped_rewards(const PpoBatch& batch, const PpoHyper& hyper);

struct GaeResult {
  Matrix advantages;
  Matrix returns;
};

// Backward recursion delta_t = r_t + gamma*V_{t+1} - V_t,
// A_t = delta_t + gamma*lam*A_{t+1} over the masked-in tokens of each
// sequence (V beyond the last masked token is 0); returns = A + V.
// No whitening here; see compute_advantages.
GaeResult gae(const Matrix& rewards, const Matrix& values, const Matrix& mask,
              double gamma, double lam);

// shaped_rewards -> gae -> advantage whitening per hyper.
GaeResult compute_advantages(const PpoBatch& batch, const PpoHyper& hyper);

struct SurrogateStats {
  double loss = 0.0;           // negative masked mean of the objective
  double ratio_mean = 0.0;     // masked mean of exp(logp_policy - logp_old)
  double clip_fraction = 0.0;  // share of masked tokens on the clipped branch
};

SurrogateStats clipped_surrogate_loss(const Matrix& logp_policy,
                                      const Matrix& logp_old,
                                      const Matrix& advantages,
                                      const Matrix& mask, double eps_clip);

// Analytic d(loss)/d(logp_policy). Zero where the clipped branch is active
// (the PPO dead zone) and at masked-out tokens.
Matrix clipped_surrogate_grad_logp(const Matrix& logp_policy,
                                   const Matrix& logp_old,
                                   const Matrix& advantages,
                                   const Matrix& mask, double eps_clip);

// Masked mean of 0.5*(V - returns)^2. With clip_range, V is clipped to
// old_values +- clip_range and the pessimistic maximum of the clipped and
// unclipped squared errors is taken; old_values defaults to values, which
// makes the clipped variant coincide with the plain one.
double value_loss(const Matrix& values, const Matrix& returns,
                  const Matrix& mask,
                  std::optional<double> clip_range = std::nullopt,
                  const Matrix* old_values = nullptr);

// Masked mean of -logp over taken tokens: a sampled-entropy diagnostic.
double entropy_diag(const Matrix& logp_policy, const Matrix& mask);

// ---- golden batch files -----------------------------------------------------

// JSON document with the six batch arrays, hyperparameters and (optionally)
// expected outputs, used by golden tests.
struct PpoBatchFile {
  PpoBatch batch;
  PpoHyper hyper;
  Json expected;  // object; empty when absent
};

PpoBatchFile load_ppo_batch_file(const std::string& path);
Matrix matrix_from_json(const Json& j);
Json matrix_to_json(const Matrix& m);

}  // namespace codesynth
