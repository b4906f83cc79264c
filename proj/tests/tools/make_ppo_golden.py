#!/usr/bin/env python3
"""Regenerates tests/data/ppo_golden.json.

Independent numpy reference for the reward/advantage/objective math; the
frozen outputs pin the C++ kernel. Run from the repo root:

    python3 tests/tools/make_ppo_golden.py > tests/data/ppo_golden.json
"""
import json
import numpy as np

rng = np.random.default_rng(20240817)

ROWS, COLS = 4, 10
EPS_CLIP = 0.2
BETA = 0.08
GAMMA = 0.98
LAM = 0.9
WHITEN_EPS = 1e-8

logp_old = rng.uniform(-3.0, -0.05, size=(ROWS, COLS))
logp_policy = logp_old + rng.uniform(-0.6, 0.6, size=(ROWS, COLS))
logp_ref = rng.uniform(-3.0, -0.05, size=(ROWS, COLS))
values = rng.uniform(-1.0, 1.0, size=(ROWS, COLS))

mask = np.zeros((ROWS, COLS))
spans = [(0, 10), (2, 7), (1, 9), (4, 10)]
for r, (a, b) in enumerate(spans):
    mask[r, a:b] = 1.0

terminal = np.array([1.0, 0.0, 1.0, 1.0])


def whiten(x, mask, eps, shift_mean):
    sel = mask != 0.0
    vals = x[sel]
    mean = vals.mean()
    std = vals.std()  # population
    out = np.zeros_like(x)
    w = (vals - mean) / (std + eps)
    if not shift_mean:
        w = w + mean
    out[sel] = w
    return out


def shaped_rewards():
    rw = np.zeros((ROWS, COLS))
    for r in range(ROWS):
        idx = np.flatnonzero(mask[r])
        kl = logp_policy[r, idx] - logp_ref[r, idx]
        rw[r, idx] = -BETA * kl
        rw[r, idx[-1]] += terminal[r]
    return rw


def gae(rewards):
    adv = np.zeros((ROWS, COLS))
    ret = np.zeros((ROWS, COLS))
    for r in range(ROWS):
        idx = np.flatnonzero(mask[r])
        next_adv = 0.0
        next_val = 0.0
        for i in reversed(range(len(idx))):
            c = idx[i]
            delta = rewards[r, c] + GAMMA * next_val - values[r, c]
            a = delta + GAMMA * LAM * next_adv
            adv[r, c] = a
            ret[r, c] = a + values[r, c]
            next_adv = a
            next_val = values[r, c]
    return adv, ret


rewards = shaped_rewards()
adv_raw, returns = gae(rewards)
advantages = whiten(adv_raw, mask, WHITEN_EPS, shift_mean=True)

sel = mask != 0.0
ratio = np.exp(logp_policy - logp_old)
unclipped = ratio * advantages
clipped = np.clip(ratio, 1 - EPS_CLIP, 1 + EPS_CLIP) * advantages
objective = np.minimum(unclipped, clipped)
loss = -objective[sel].mean()
ratio_mean = ratio[sel].mean()
clip_fraction = float((clipped[sel] < unclipped[sel]).mean())
value_loss = float((0.5 * (values[sel] - returns[sel]) ** 2).mean())
entropy = float((-logp_policy[sel]).mean())

doc = {
    "batch": {
        "logp_policy": logp_policy.tolist(),
        "logp_old": logp_old.tolist(),
        "logp_ref": logp_ref.tolist(),
        "values": values.tolist(),
        "mask": mask.tolist(),
        "terminal_reward": terminal.tolist(),
    },
    "hyper": {
        "eps_clip": EPS_CLIP,
        "beta": BETA,
        "gamma": GAMMA,
        "lam": LAM,
        "whiten_eps": WHITEN_EPS,
        "whiten_rewards": False,
        "whiten_advantages": True,
    },
    "expected": {
        "shaped_rewards": rewards.tolist(),
        "advantages": advantages.tolist(),
        "returns": returns.tolist(),
        "surrogate_loss": float(loss),
        "ratio_mean": float(ratio_mean),
        "clip_fraction": clip_fraction,
        "value_loss": value_loss,
        "entropy": entropy,
    },
}
print(json.dumps(doc, indent=1))
