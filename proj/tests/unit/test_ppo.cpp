#include <doctest.h>

#include <cmath>

#include "codesynth/errors.hpp"
#include "codesynth/ppo.hpp"
#include "codesynth/rng.hpp"

using namespace codesynth;

namespace {

Matrix row(const std::vector<double>& v) {
  Matrix m(1, v.size());
  for (size_t i = 0; i < v.size(); ++i) m.at(0, i) = v[i];
  return m;
}

Matrix ones_like(const Matrix& m) { return Matrix(m.rows, m.cols, 1.0); }

// brute-force A_t = sum_k (gamma*lam)^k delta_{t+k} over the masked span
Matrix gae_bruteforce(const Matrix& rewards, const Matrix& values,
                      const Matrix& mask, double gamma, double lam) {
  Matrix adv(rewards.rows, rewards.cols, 0.0);
  for (size_t r = 0; r < mask.rows; ++r) {
    std::vector<size_t> idx;
    for (size_t c = 0; c < mask.cols; ++c)
      if (mask.at(r, c) != 0.0) idx.push_back(c);
    const size_t n = idx.size();
    for (size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (size_t k = i; k < n; ++k) {
        double v_next = (k + 1 < n) ? values.at(r, idx[k + 1]) : 0.0;
        double delta =
            rewards.at(r, idx[k]) + gamma * v_next - values.at(r, idx[k]);
        acc += std::pow(gamma * lam, static_cast<double>(k - i)) * delta;
      }
      adv.at(r, idx[i]) = acc;
    }
  }
  return adv;
}

PpoBatch random_batch(Rng& rng, size_t rows, size_t cols,
                      bool engineered_clipping = false) {
  PpoBatch b;
  b.logp_policy = Matrix(rows, cols);
  b.logp_old = Matrix(rows, cols);
  b.logp_ref = Matrix(rows, cols);
  b.values = Matrix(rows, cols);
  b.mask = Matrix(rows, cols, 0.0);
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng.below(1u << 30)) /
                             static_cast<double>(1u << 30));
  };
  for (size_t r = 0; r < rows; ++r) {
    size_t start = rng.below(cols / 2 + 1);
    size_t len = 1 + rng.below(cols - start);
    for (size_t c = start; c < start + len; ++c) b.mask.at(r, c) = 1.0;
    for (size_t c = 0; c < cols; ++c) {
      b.logp_old.at(r, c) = uniform(-3.0, -0.05);
      if (engineered_clipping && rng.below(2) == 0) {
        // push the ratio well outside [1-eps, 1+eps]
        double shift = (rng.below(2) == 0 ? 1.0 : -1.0) * uniform(0.5, 1.2);
        b.logp_policy.at(r, c) = b.logp_old.at(r, c) + shift;
      } else {
        b.logp_policy.at(r, c) = b.logp_old.at(r, c) + uniform(-0.1, 0.1);
      }
      b.logp_ref.at(r, c) = uniform(-3.0, -0.05);
      b.values.at(r, c) = uniform(-1.0, 1.0);
    }
    b.terminal_reward.push_back(rng.below(2) ? 1.0 : 0.0);
  }
  return b;
}

Matrix random_advantages(Rng& rng, size_t rows, size_t cols) {
  Matrix a(rows, cols);
  for (auto& v : a.data)
    v = -2.0 + 4.0 * (static_cast<double>(rng.below(1u << 30)) /
                      static_cast<double>(1u << 30));
  return a;
}

}  // namespace

TEST_CASE("whiten normalizes to zero mean and unit std") {
  Matrix x = row({1, 2, 3});
  Matrix m = ones_like(x);
  Matrix w = whiten(x, m, 1e-8, true);
  CHECK(w.at(0, 0) == doctest::Approx(-1.2247448).epsilon(1e-6));
  CHECK(w.at(0, 1) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(w.at(0, 2) == doctest::Approx(1.2247448).epsilon(1e-6));
  double mean = (w.at(0, 0) + w.at(0, 1) + w.at(0, 2)) / 3.0;
  CHECK(std::abs(mean) < 1e-9);
  double var = 0;
  for (int i = 0; i < 3; ++i) var += w.at(0, i) * w.at(0, i);
  CHECK(std::abs(std::sqrt(var / 3.0) - 1.0) < 1e-6);
}

TEST_CASE("whiten keeps the mean when shift_mean is false") {
  Matrix x = row({1, 2, 3});
  Matrix w = whiten(x, ones_like(x), 1e-8, false);
  double mean = (w.at(0, 0) + w.at(0, 1) + w.at(0, 2)) / 3.0;
  CHECK(mean == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("whitening a constant vector yields zeros, no division error") {
  Matrix x = row({5, 5, 5});
  Matrix w = whiten(x, ones_like(x), 1e-8, true);
  for (int i = 0; i < 3; ++i) CHECK(w.at(0, i) == 0.0);
}

TEST_CASE("whiten needs at least two masked elements") {
  Matrix x = row({1, 2, 3});
  Matrix m = row({0, 1, 0});
  CHECK_THROWS_AS(whiten(x, m, 1e-8, true), DegenerateMaskError);
}

TEST_CASE("whiten ignores masked-out entries entirely") {
  Matrix x = row({1, 2, 3, 1e9});
  Matrix m = row({1, 1, 1, 0});
  Matrix w = whiten(x, m, 1e-8, true);
  CHECK(w.at(0, 3) == 0.0);
  Matrix x2 = row({1, 2, 3, -7e22});
  Matrix w2 = whiten(x2, m, 1e-8, true);
  for (int i = 0; i < 4; ++i) CHECK(w.at(0, i) == w2.at(0, i));
}

TEST_CASE("whitening is idempotent within 1e-9") {
  // the eps guard shifts rewhitened values by about |x| * eps, so the
  // 1e-9 bound is checked at a guard well below it
  Rng rng(4);
  Matrix x(3, 8);
  for (auto& v : x.data)
    v = static_cast<double>(rng.below(1000)) / 100.0 - 5.0;
  Matrix m(3, 8, 1.0);
  Matrix w1 = whiten(x, m, 1e-12, true);
  Matrix w2 = whiten(w1, m, 1e-12, true);
  for (size_t i = 0; i < w1.data.size(); ++i)
    CHECK(std::abs(w1.data[i] - w2.data[i]) < 1e-9);
}

TEST_CASE("beta=0 reduces the shaped reward to the terminal score exactly") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    PpoBatch b = random_batch(rng, 3, 7);
    PpoHyper h;
    h.beta = 0.0;
    h.whiten_rewards = false;
    Matrix rw = shaped_rewards(b, h);
    for (size_t r = 0; r < 3; ++r) {
      double sum = 0.0;
      size_t last = 0;
      for (size_t c = 0; c < 7; ++c) {
        if (b.mask.at(r, c) == 0.0) {
          CHECK(rw.at(r, c) == 0.0);
          continue;
        }
        sum += rw.at(r, c);
        last = c;
      }
      CHECK(sum == b.terminal_reward[r]);  // exact, not approximate
      CHECK(rw.at(r, last) == b.terminal_reward[r]);
    }
  }
}

TEST_CASE("per-token KL penalty with terminal reward at the last token") {
  PpoBatch b;
  b.logp_policy = row({-1.0, -1.2});
  b.logp_ref = row({-1.2, -1.5});  // kl = [0.2, 0.3]
  b.logp_old = row({-1.0, -1.2});
  b.values = row({0.0, 0.0});
  b.mask = row({1, 1});
  b.terminal_reward = {1.0};
  PpoHyper h;
  h.beta = 0.1;
  h.whiten_rewards = false;
  Matrix rw = shaped_rewards(b, h);
  CHECK(rw.at(0, 0) == doctest::Approx(-0.02).epsilon(1e-12));
  CHECK(rw.at(0, 1) == doctest::Approx(0.97).epsilon(1e-12));
}

TEST_CASE("zero divergence gives R = r exactly") {
  Rng rng(21);
  PpoBatch b = random_batch(rng, 2, 5);
  b.logp_ref = b.logp_policy;
  PpoHyper h;
  h.beta = 0.7;
  h.whiten_rewards = false;
  Matrix rw = shaped_rewards(b, h);
  for (size_t r = 0; r < 2; ++r) {
    double sum = 0.0;
    for (size_t c = 0; c < 5; ++c) sum += rw.at(r, c);
    CHECK(sum == b.terminal_reward[r]);
  }
}

TEST_CASE("gae telescopes to the terminal reward at gamma=lam=1") {
  Matrix rewards = row({0, 0, 0, 0.5});
  Matrix values = row({0, 0, 0, 0});
  Matrix mask = row({1, 1, 1, 1});
  GaeResult g = gae(rewards, values, mask, 1.0, 1.0);
  for (int c = 0; c < 4; ++c) {
    CHECK(g.advantages.at(0, c) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(g.returns.at(0, c) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("gamma=0 collapses gae to the one-step TD error") {
  Matrix rewards = row({0.3, -0.1, 0.8});
  Matrix values = row({0.5, 0.2, -0.4});
  Matrix mask = row({1, 1, 1});
  GaeResult g = gae(rewards, values, mask, 0.0, 0.95);
  for (int c = 0; c < 3; ++c)
    CHECK(g.advantages.at(0, c) ==
          doctest::Approx(rewards.at(0, c) - values.at(0, c)).epsilon(1e-12));
}

TEST_CASE("gae matches the brute-force oracle within 1e-10") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    size_t cols = 2 + rng.below(11);  // up to length 12
    PpoBatch b = random_batch(rng, 4, cols);
    Matrix rewards(4, cols);
    for (auto& v : rewards.data)
      v = -1.0 + 2.0 * (static_cast<double>(rng.below(1u << 20)) /
                        static_cast<double>(1u << 20));
    for (double gamma : {1.0, 0.99, 0.5}) {
      for (double lam : {1.0, 0.95, 0.3}) {
        GaeResult g = gae(rewards, b.values, b.mask, gamma, lam);
        Matrix oracle = gae_bruteforce(rewards, b.values, b.mask, gamma, lam);
        for (size_t i = 0; i < oracle.data.size(); ++i)
          CHECK(std::abs(g.advantages.data[i] - oracle.data[i]) < 1e-10);
        // returns = advantages + values on masked tokens
        for (size_t r = 0; r < 4; ++r)
          for (size_t c = 0; c < cols; ++c)
            if (b.mask.at(r, c) != 0.0)
              CHECK(std::abs(g.returns.at(r, c) - g.advantages.at(r, c) -
                             b.values.at(r, c)) < 1e-12);
      }
    }
  }
}

TEST_CASE("surrogate objective at ratio 1 is the advantage") {
  Matrix lp = row({-1.0, -1.0});
  Matrix adv = row({2.0, 2.0});
  Matrix mask = row({1, 1});
  SurrogateStats s = clipped_surrogate_loss(lp, lp, adv, mask, 0.2);
  CHECK(s.loss == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(s.ratio_mean == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.clip_fraction == 0.0);
}

TEST_CASE("clip arithmetic follows the objective") {
  // ratio 1.5, eps 0.2, A=1 -> min(1.5, 1.2) = 1.2
  Matrix lp_new = row({std::log(1.5)});
  Matrix lp_old = row({0.0});
  Matrix adv = row({1.0});
  Matrix mask = row({1});
  // a single masked element cannot be whitened but can be scored
  SurrogateStats s = clipped_surrogate_loss(lp_new, lp_old, adv, mask, 0.2);
  CHECK(s.loss == doctest::Approx(-1.2).epsilon(1e-12));
  CHECK(s.clip_fraction == 1.0);

  // ratio 0.5, A=-1 -> min(-0.5, -0.8) = -0.8
  Matrix lp_low = row({std::log(0.5)});
  Matrix neg = row({-1.0});
  s = clipped_surrogate_loss(lp_low, lp_old, neg, mask, 0.2);
  CHECK(s.loss == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(s.clip_fraction == 1.0);
}

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(41);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    size_t rows = 1 + rng.below(4), cols = 2 + rng.below(8);
    PpoBatch b = random_batch(rng, rows, cols, trial % 2 == 1);
    Matrix adv = random_advantages(rng, rows, cols);
    const double eps = 0.2;
    Matrix grad = clipped_surrogate_grad_logp(b.logp_policy, b.logp_old, adv,
                                              b.mask, eps);
    for (size_t r = 0; r < rows; ++r)
      for (size_t c = 0; c < cols; ++c) {
        Matrix plus = b.logp_policy, minus = b.logp_policy;
        plus.at(r, c) += h;
        minus.at(r, c) -= h;
        double fd = (clipped_surrogate_loss(plus, b.logp_old, adv, b.mask, eps)
                         .loss -
                     clipped_surrogate_loss(minus, b.logp_old, adv, b.mask, eps)
                         .loss) /
                    (2 * h);
        double an = grad.at(r, c);
        double denom = std::max(std::abs(fd), std::abs(an));
        if (denom < 1e-6) {
          CHECK(std::abs(fd - an) < 1e-7);
        } else {
          CHECK(std::abs(fd - an) / denom < 1e-4);
        }
      }
  }
}

TEST_CASE("clip dead zone has exactly zero gradient") {
  Matrix lp_old = row({0.0, 0.0});
  Matrix mask = row({1, 1});
  // A>0 and ratio above 1+eps; A<0 and ratio below 1-eps
  Matrix lp_new = row({std::log(1.6), std::log(0.4)});
  Matrix adv = row({1.5, -2.0});
  Matrix grad = clipped_surrogate_grad_logp(lp_new, lp_old, adv, mask, 0.2);
  CHECK(grad.at(0, 0) == 0.0);
  CHECK(grad.at(0, 1) == 0.0);
}

TEST_CASE("masked-out tokens never influence any output") {
  Rng rng(51);
  PpoBatch b = random_batch(rng, 3, 6);
  Matrix adv = random_advantages(rng, 3, 6);
  SurrogateStats base =
      clipped_surrogate_loss(b.logp_policy, b.logp_old, adv, b.mask, 0.2);
  PpoBatch poisoned = b;
  for (size_t r = 0; r < 3; ++r)
    for (size_t c = 0; c < 6; ++c)
      if (b.mask.at(r, c) == 0.0) {
        poisoned.logp_policy.at(r, c) = 1e18;
        poisoned.logp_old.at(r, c) = -1e18;
        poisoned.values.at(r, c) = std::nan("");
      }
  SurrogateStats poisoned_stats = clipped_surrogate_loss(
      poisoned.logp_policy, poisoned.logp_old, adv, b.mask, 0.2);
  CHECK(base.loss == poisoned_stats.loss);
  CHECK(base.ratio_mean == poisoned_stats.ratio_mean);
  CHECK(base.clip_fraction == poisoned_stats.clip_fraction);

  GaeResult g1 = gae(adv, b.values, b.mask, 0.9, 0.95);
  GaeResult g2 = gae(adv, poisoned.values, b.mask, 0.9, 0.95);
  for (size_t i = 0; i < g1.advantages.data.size(); ++i)
    CHECK(g1.advantages.data[i] == g2.advantages.data[i]);
}

TEST_CASE("non-finite masked-in inputs are rejected") {
  Matrix lp = row({std::nan(""), -1.0});
  Matrix ok = row({-1.0, -1.0});
  Matrix mask = row({1, 1});
  CHECK_THROWS_AS(clipped_surrogate_loss(lp, ok, ok, mask, 0.2),
                  NonFiniteInputError);
}

TEST_CASE("value loss basics") {
  Matrix v = row({1.0, 2.0});
  Matrix mask = row({1, 1});
  CHECK(value_loss(v, v, mask) == 0.0);

  Matrix zero = row({0.0});
  Matrix two = row({2.0});
  Matrix one = row({1});
  CHECK(value_loss(zero, two, one) == doctest::Approx(2.0));  // 0.5 * 4
}

TEST_CASE("clipped value loss is pessimistic: never below the plain one") {
  Rng rng(61);
  for (int trial = 0; trial < 1000; ++trial) {
    size_t cols = 2 + rng.below(6);
    Matrix v(1, cols), ret(1, cols), old(1, cols), mask(1, cols, 1.0);
    for (size_t c = 0; c < cols; ++c) {
      v.at(0, c) = -1.0 + 0.002 * static_cast<double>(rng.below(1000));
      ret.at(0, c) = -1.0 + 0.002 * static_cast<double>(rng.below(1000));
      old.at(0, c) = -1.0 + 0.002 * static_cast<double>(rng.below(1000));
    }
    double plain = value_loss(v, ret, mask);
    double clipped = value_loss(v, ret, mask, 0.1, &old);
    CHECK(clipped >= plain - 1e-15);
  }
}

TEST_CASE("entropy diagnostic") {
  Matrix zeros = row({0.0, 0.0});
  Matrix mask = row({1, 1});
  CHECK(entropy_diag(zeros, mask) == 0.0);
  Matrix ln2 = row({-std::log(2.0), -std::log(2.0)});
  CHECK(entropy_diag(ln2, mask) == doctest::Approx(std::log(2.0)));
  Rng rng(71);
  PpoBatch b = random_batch(rng, 2, 5);
  CHECK(entropy_diag(b.logp_policy, b.mask) >= 0.0);
}

TEST_CASE("compute_advantages whitens advantages when asked") {
  Rng rng(81);
  PpoBatch b = random_batch(rng, 4, 9);
  PpoHyper h;
  h.beta = 0.05;
  h.whiten_advantages = true;
  GaeResult g = compute_advantages(b, h);
  double sum = 0.0, sq = 0.0;
  size_t n = 0;
  for (size_t r = 0; r < 4; ++r)
    for (size_t c = 0; c < 9; ++c)
      if (b.mask.at(r, c) != 0.0) {
        sum += g.advantages.at(r, c);
        ++n;
      }
  double mean = sum / static_cast<double>(n);
  for (size_t r = 0; r < 4; ++r)
    for (size_t c = 0; c < 9; ++c)
      if (b.mask.at(r, c) != 0.0) {
        double d = g.advantages.at(r, c) - mean;
        sq += d * d;
      }
  CHECK(std::abs(mean) < 1e-9);
  CHECK(std::abs(std::sqrt(sq / static_cast<double>(n)) - 1.0) < 1e-6);
}

TEST_CASE("batch invariants are validated") {
  PpoBatch b;
  b.logp_policy = Matrix(2, 3);
  b.logp_old = Matrix(2, 3);
  b.logp_ref = Matrix(2, 3);
  b.values = Matrix(2, 3);
  b.mask = Matrix(2, 3, 1.0);
  b.terminal_reward = {0.0};  // wrong length
  CHECK_THROWS_AS(b.validate(), ShapeError);
  b.terminal_reward = {0.0, 1.0};
  b.mask.at(1, 0) = 0.5;  // not 0/1
  CHECK_THROWS_AS(b.validate(), ShapeError);
  b.mask.at(1, 0) = 1.0;
  CHECK_NOTHROW(b.validate());
  for (size_t c = 0; c < 3; ++c) b.mask.at(0, c) = 0.0;  // empty sequence
  CHECK_THROWS_AS(b.validate(), ShapeError);
}

TEST_CASE("golden batch file reproduces frozen expectations") {
  PpoBatchFile f =
      load_ppo_batch_file(CODESYNTH_SOURCE_DIR "/tests/data/ppo_golden.json");
  REQUIRE(f.expected.is_object());

  Matrix rewards = shaped_rewards(f.batch, f.hyper);
  Matrix exp_rewards = matrix_from_json(f.expected.at("shaped_rewards"));
  REQUIRE(rewards.same_shape(exp_rewards));
  for (size_t i = 0; i < rewards.data.size(); ++i)
    CHECK(rewards.data[i] == doctest::Approx(exp_rewards.data[i]).epsilon(1e-10));

  GaeResult g = compute_advantages(f.batch, f.hyper);
  Matrix exp_adv = matrix_from_json(f.expected.at("advantages"));
  Matrix exp_ret = matrix_from_json(f.expected.at("returns"));
  for (size_t i = 0; i < exp_adv.data.size(); ++i) {
    CHECK(g.advantages.data[i] ==
          doctest::Approx(exp_adv.data[i]).epsilon(1e-9));
    CHECK(g.returns.data[i] == doctest::Approx(exp_ret.data[i]).epsilon(1e-9));
  }

  SurrogateStats s = clipped_surrogate_loss(
      f.batch.logp_policy, f.batch.logp_old, g.advantages, f.batch.mask,
      f.hyper.eps_clip);
  CHECK(s.loss ==
        doctest::Approx(f.expected.at("surrogate_loss").get<double>())
            .epsilon(1e-9));
  CHECK(s.ratio_mean ==
        doctest::Approx(f.expected.at("ratio_mean").get<double>())
            .epsilon(1e-9));
  CHECK(s.clip_fraction ==
        doctest::Approx(f.expected.at("clip_fraction").get<double>())
            .epsilon(1e-12));

  CHECK(value_loss(f.batch.values, g.returns, f.batch.mask) ==
        doctest::Approx(f.expected.at("value_loss").get<double>())
            .epsilon(1e-9));
  CHECK(entropy_diag(f.batch.logp_policy, f.batch.mask) ==
        doctest::Approx(f.expected.at("entropy").get<double>()).epsilon(1e-9));
}
