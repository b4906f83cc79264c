#include "codesynth/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "codesynth/errors.hpp"

namespace codesynth {

namespace {

bool masked_in(const Matrix& mask, size_t r, size_t c) {
  return mask.at(r, c) != 0.0;
}

void check_finite_masked(const Matrix& m, const Matrix& mask,
                         const char* where) {
  for (size_t r = 0; r < m.rows; ++r)
    for (size_t c = 0; c < m.cols; ++c)
      if (masked_in(mask, r, c) && !std::isfinite(m.at(r, c)))
        throw NonFiniteInputError(where);
}

}  // namespace

void PpoBatch::validate() const {
  const Matrix* all[] = {&logp_policy, &logp_old, &logp_ref, &values, &mask};
  for (const Matrix* m : all)
    if (!m->same_shape(logp_policy))
      throw ShapeError("batch arrays must share one shape");
  if (terminal_reward.size() != logp_policy.rows)
    throw ShapeError("terminal_reward must have one entry per sequence");
  for (size_t r = 0; r < mask.rows; ++r) {
    size_t in = 0;
    for (size_t c = 0; c < mask.cols; ++c) {
      double v = mask.at(r, c);
      if (v != 0.0 && v != 1.0) throw ShapeError("mask entries must be 0 or 1");
      if (v == 1.0) ++in;
    }
    if (in == 0)
      throw ShapeError("sequence " + std::to_string(r) +
                       " has no masked-in token");
  }
}

void PpoHyper::validate() const {
  if (!(eps_clip > 0.0 && eps_clip < 1.0))
    throw ShapeError("eps_clip must be in (0, 1)");
  if (beta < 0.0) throw ShapeError("beta must be >= 0");
  if (gamma < 0.0 || gamma > 1.0) throw ShapeError("gamma must be in [0, 1]");
  if (lam < 0.0 || lam > 1.0) throw ShapeError("lam must be in [0, 1]");
}

Matrix whiten(const Matrix& x, const Matrix& mask, double eps,
              bool shift_mean) {
  if (!x.same_shape(mask)) throw ShapeError("whiten: shape mismatch");

  size_t n = 0;
  double sum = 0.0;
  for (size_t r = 0; r < x.rows; ++r)
    for (size_t c = 0; c < x.cols; ++c)
      if (masked_in(mask, r, c)) {
        sum += x.at(r, c);
        ++n;
      }
  if (n < 2) throw DegenerateMaskError(n);
  const double mean = sum / static_cast<double>(n);

  double var = 0.0;
  for (size_t r = 0; r < x.rows; ++r)
    for (size_t c = 0; c < x.cols; ++c)
      if (masked_in(mask, r, c)) {
        const double d = x.at(r, c) - mean;
        var += d * d;
      }
  var /= static_cast<double>(n);  // population variance
  const double denom = std::sqrt(var) + eps;

  Matrix out(x.rows, x.cols, 0.0);
  for (size_t r = 0; r < x.rows; ++r)
    for (size_t c = 0; c < x.cols; ++c)
      if (masked_in(mask, r, c)) {
        double w = (x.at(r, c) - mean) / denom;
        if (!shift_mean) w += mean;
        out.at(r, c) = w;
      }
  return out;
}

Matrix shaped_rewards(const PpoBatch& batch, const PpoHyper& hyper) {
  batch.validate();
  hyper.validate();

  Matrix rewards(batch.mask.rows, batch.mask.cols, 0.0);
  for (size_t r = 0; r < batch.mask.rows; ++r) {
    size_t last = 0;
    bool any = false;
    for (size_t c = 0; c < batch.mask.cols; ++c) {
      if (!masked_in(batch.mask, r, c)) continue;
      // direct per-token KL estimate against the initialization policy
      const double kl = batch.logp_policy.at(r, c) - batch.logp_ref.at(r, c);
      rewards.at(r, c) = -hyper.beta * kl;
      last = c;
      any = true;
    }
    if (any) rewards.at(r, last) += batch.terminal_reward[r];
  }
  if (hyper.whiten_rewards)
    rewards = whiten(rewards, batch.mask, hyper.whiten_eps,
                     /*shift_mean=*/false);
  return rewards;
}

GaeResult gae(const Matrix& rewards, const Matrix& values, const Matrix& mask,
              double gamma, double lam) {
  if (!rewards.same_shape(values) || !rewards.same_shape(mask))
    throw ShapeError("gae: shape mismatch");

  GaeResult out;
  out.advantages = Matrix(mask.rows, mask.cols, 0.0);
  out.returns = Matrix(mask.rows, mask.cols, 0.0);

  for (size_t r = 0; r < mask.rows; ++r) {
    std::vector<size_t> idx;
    for (size_t c = 0; c < mask.cols; ++c)
      if (masked_in(mask, r, c)) idx.push_back(c);
    double next_adv = 0.0;
    double next_value = 0.0;  // V beyond the last token is 0
    for (size_t i = idx.size(); i-- > 0;) {
      const size_t c = idx[i];
      const double delta =
          rewards.at(r, c) + gamma * next_value - values.at(r, c);
      const double adv = delta + gamma * lam * next_adv;
      out.advantages.at(r, c) = adv;
      out.returns.at(r, c) = adv + values.at(r, c);
      next_adv = adv;
      next_value = values.at(r, c);
    }
  }
  return out;
}

GaeResult compute_advantages(const PpoBatch& batch, const PpoHyper& hyper) {
  Matrix rewards = shaped_rewards(batch, hyper);
  GaeResult res =
      gae(rewards, batch.values, batch.mask, hyper.gamma, hyper.lam);
  if (hyper.whiten_advantages)
    res.advantages = whiten(res.advantages, batch.mask, hyper.whiten_eps,
                            /*shift_mean=*/true);
  return res;
}

SurrogateStats clipped_surrogate_loss(const Matrix& logp_policy,
                                      const Matrix& logp_old,
                                      const Matrix& advantages,
                                      const Matrix& mask, double eps_clip) {
  if (!logp_policy.same_shape(logp_old) || !logp_policy.same_shape(advantages) ||
      !logp_policy.same_shape(mask))
    throw ShapeError("clipped_surrogate_loss: shape mismatch");
  check_finite_masked(logp_policy, mask, "logp_policy");
  check_finite_masked(logp_old, mask, "logp_old");
  check_finite_masked(advantages, mask, "advantages");

  double obj_sum = 0.0;
  double ratio_sum = 0.0;
  size_t n = 0;
  size_t clipped = 0;
  for (size_t r = 0; r < mask.rows; ++r)
    for (size_t c = 0; c < mask.cols; ++c) {
      if (!masked_in(mask, r, c)) continue;
      const double ratio =
          std::exp(logp_policy.at(r, c) - logp_old.at(r, c));
      const double a = advantages.at(r, c);
      const double unclipped = ratio * a;
      const double clipped_ratio =
          std::clamp(ratio, 1.0 - eps_clip, 1.0 + eps_clip);
      const double clipped_term = clipped_ratio * a;
      obj_sum += std::min(unclipped, clipped_term);
      if (clipped_term < unclipped) ++clipped;
      ratio_sum += ratio;
      ++n;
    }
  if (n == 0) throw ShapeError("clipped_surrogate_loss: empty mask");

  SurrogateStats s;
  s.loss = -obj_sum / static_cast<double>(n);
  s.ratio_mean = ratio_sum / static_cast<double>(n);
  s.clip_fraction = static_cast<double>(clipped) / static_cast<double>(n);
  return s;
}

Matrix clipped_surrogate_grad_logp(const Matrix& logp_policy,
                                   const Matrix& logp_old,
                                   const Matrix& advantages,
                                   const Matrix& mask, double eps_clip) {
  if (!logp_policy.same_shape(logp_old) || !logp_policy.same_shape(advantages) ||
      !logp_policy.same_shape(mask))
    throw ShapeError("clipped_surrogate_grad_logp: shape mismatch");

  size_t n = 0;
  for (size_t r = 0; r < mask.rows; ++r)
    for (size_t c = 0; c < mask.cols; ++c)
      if (masked_in(mask, r, c)) ++n;
  if (n == 0) throw ShapeError("clipped_surrogate_grad_logp: empty mask");

  Matrix grad(mask.rows, mask.cols, 0.0);
  for (size_t r = 0; r < mask.rows; ++r)
    for (size_t c = 0; c < mask.cols; ++c) {
      if (!masked_in(mask, r, c)) continue;
      const double ratio =
          std::exp(logp_policy.at(r, c) - logp_old.at(r, c));
      const double a = advantages.at(r, c);
      const double unclipped = ratio * a;
      const double clipped_term =
          std::clamp(ratio, 1.0 - eps_clip, 1.0 + eps_clip) * a;
      // d(ratio)/d(logp) = ratio; gradient flows only through the
      // unclipped branch (ties resolve to it)
      if (unclipped <= clipped_term)
        grad.at(r, c) = -(ratio * a) / static_cast<double>(n);
    }
  return grad;
}

double value_loss(const Matrix& values, const Matrix& returns,
                  const Matrix& mask, std::optional<double> clip_range,
                  const Matrix* old_values) {
  if (!values.same_shape(returns) || !values.same_shape(mask))
    throw ShapeError("value_loss: shape mismatch");
  if (old_values && !old_values->same_shape(values))
    throw ShapeError("value_loss: old_values shape mismatch");

  double sum = 0.0;
  size_t n = 0;
  for (size_t r = 0; r < mask.rows; ++r)
    for (size_t c = 0; c < mask.cols; ++c) {
      if (!masked_in(mask, r, c)) continue;
      const double v = values.at(r, c);
      const double ret = returns.at(r, c);
      double err = 0.5 * (v - ret) * (v - ret);
      if (clip_range) {
        const double base = old_values ? old_values->at(r, c) : v;
        const double vc =
            std::clamp(v, base - *clip_range, base + *clip_range);
        const double errc = 0.5 * (vc - ret) * (vc - ret);
        err = std::max(err, errc);
      }
      sum += err;
      ++n;
    }
  if (n == 0) throw ShapeError("value_loss: empty mask");
  return sum / static_cast<double>(n);
}

double entropy_diag(const Matrix& logp_policy, const Matrix& mask) {
  if (!logp_policy.same_shape(mask)) throw ShapeError("entropy_diag: shape mismatch");
  double sum = 0.0;
  size_t n = 0;
  for (size_t r = 0; r < mask.rows; ++r)
    for (size_t c = 0; c < mask.cols; ++c) {
      if (!masked_in(mask, r, c)) continue;
      sum += -logp_policy.at(r, c);
      ++n;
    }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

// ---- golden batch files -----------------------------------------------------

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array()) throw ShapeError("matrix json must be an array of rows");
  Matrix m;
  m.rows = j.size();
  m.cols = m.rows == 0 ? 0 : j[0].size();
  m.data.reserve(m.rows * m.cols);
  for (const auto& row : j) {
    if (row.size() != m.cols) throw ShapeError("ragged matrix json");
    for (const auto& v : row) m.data.push_back(v.get<double>());
  }
  return m;
}

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (size_t r = 0; r < m.rows; ++r) {
    Json row = Json::array();
    for (size_t c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

PpoBatchFile load_ppo_batch_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  PpoBatchFile f;
  const Json& b = j.at("batch");
  f.batch.logp_policy = matrix_from_json(b.at("logp_policy"));
  f.batch.logp_old = matrix_from_json(b.at("logp_old"));
  f.batch.logp_ref = matrix_from_json(b.at("logp_ref"));
  f.batch.values = matrix_from_json(b.at("values"));
  f.batch.mask = matrix_from_json(b.at("mask"));
  f.batch.terminal_reward = b.at("terminal_reward").get<std::vector<double>>();
  if (j.contains("hyper")) {
    const Json& h = j["hyper"];
    f.hyper.eps_clip = h.value("eps_clip", f.hyper.eps_clip);
    f.hyper.beta = h.value("beta", f.hyper.beta);
    f.hyper.gamma = h.value("gamma", f.hyper.gamma);
    f.hyper.lam = h.value("lam", f.hyper.lam);
    f.hyper.whiten_eps = h.value("whiten_eps", f.hyper.whiten_eps);
    f.hyper.whiten_rewards = h.value("whiten_rewards", f.hyper.whiten_rewards);
    f.hyper.whiten_advantages =
        h.value("whiten_advantages", f.hyper.whiten_advantages);
  }
  if (j.contains("expected")) f.expected = j["expected"];
  f.batch.validate();
  f.hyper.validate();
  return f;
}

}  // namespace codesynth
