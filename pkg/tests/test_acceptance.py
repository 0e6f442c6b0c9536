"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in
the terminal summary) or directly with ``python3 tests/test_acceptance.py``.
Learning criteria take several minutes on one core.
"""

from __future__ import annotations

import functools
import math
import os
import sys
import time

import numpy as np
import pytest

from vmpo import autodiff as ad
from vmpo import distributions as D
from vmpo import objective as O
from vmpo import returns as R
from vmpo import trainer as T
from vmpo.checkpoint import Checkpoint
from vmpo.config import load_config
from vmpo.envs import chain_mdp, point_mass
from vmpo.network import ActionSpec, AgentNet, NetSpec, forward_params
from vmpo.optim import adam_step
from vmpo.oracles import finite_horizon_lqr, golden_section, undiscounted_return, value_iteration

HERE = os.path.dirname(os.path.abspath(__file__))
CONFIGS = os.path.join(HERE, os.pardir, "configs")
SEEDS = range(5)

RESULTS: dict[int, tuple[bool, str]] = {}


def report(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = (bool(ok), detail)
    print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)


def _run_dir(name):
    base = os.environ.get("VMPO_ACCEPTANCE_DIR", os.path.join(HERE, os.pardir, "runs", "acceptance"))
    return os.path.join(base, name)


@functools.lru_cache(maxsize=None)
def learning_run(cfg_name: str, seed: int):
    """Train one config/seed once per session; returns (trainer, rows, seconds)."""
    cfg = load_config(os.path.join(CONFIGS, f"{cfg_name}.cfg"), seed=seed,
                      out_dir=_run_dir(f"{cfg_name}-seed{seed}"))
    t0 = time.perf_counter()
    res = T.train(cfg)
    secs = time.perf_counter() - t0
    _, rows = T.read_metrics(res.metrics_path)
    return res, rows, secs


# ---------------------------------------------------------------------- 1

def _central_grad(fn, flat, step=1e-6):
    out = np.zeros_like(flat)
    for i in range(flat.size):
        hi, lo = flat.copy(), flat.copy()
        hi[i] += step
        lo[i] -= step
        out[i] = (fn(hi) - fn(lo)) / (2 * step)
    return out


def _loss_setting(seed: int):
    """Random small network, batch, target policy and multipliers.

    Returns the parameter store plus builders for each loss. Every builder
    takes (leaves, frozen) where ``frozen`` holds the stop-gradient values
    (psi weights, KLs, multipliers) taken at the base point, so finite
    differences see the same function the analytic gradient differentiates.
    """
    rng = np.random.default_rng(seed)
    continuous = seed % 2 == 1
    action = ActionSpec(False, 2) if continuous else ActionSpec(True, 3)
    spec = NetSpec(obs_dim=3, action=action, num_tasks=1, trunk=(4,), head=4)
    net = AgentNet.create(spec, rng)
    net.params.flat += 0.3 * rng.normal(size=net.params.size)
    target = net.snapshot()
    net.params.flat += 0.05 * rng.normal(size=net.params.size)
    n = 10
    obs = rng.normal(size=(n, 3))
    tdist, _ = target.forward(obs)
    actions = D.sample(tdist, rng)
    adv = rng.normal(size=n)
    g_norm = rng.normal(size=n)
    state = (O.LagrangeState.continuous_defaults(eta=rng.uniform(0.3, 2.0))
             if continuous else O.LagrangeState.discrete_defaults(eta=rng.uniform(0.3, 2.0)))
    shapes = dict(spec.shapes())
    shapes.update({name: () for name in state.names})
    flat = np.concatenate([net.params.flat, state.vector() * rng.uniform(0.5, 1.5, len(state.names))])
    store = ad.ParameterStore(shapes, flat)
    sel = O.select_top_half(adv)
    old = D.detach(tdist)

    def online(p):
        return forward_params(spec, p, obs)

    def kls(dist):
        if continuous:
            return {"mu": D.kl_gaussian_mean(old, dist), "sigma": D.kl_gaussian_cov(old, dist),
                    "total": D.kl_gaussian_total(old, dist)}
        return {"total": D.kl_categorical(old, dist)}

    def frozen_at(p_flat):
        p = store.leaves(p_flat)
        dist, _ = online(p)
        k = {key: v.data for key, v in kls(dist).items()}
        eta = float(p["eta"].data)
        return {"psi": O.psi_weights(adv[sel.indices], eta), "kl": k,
                "mult": {name: float(p[name].data) for name in state.names}}

    def sg_alpha(alpha_t, kl_t, kl0, alpha0, eps):
        # the value of alpha_loss with its stop-gradients frozen at the base point
        return (alpha_t * (eps - ad.tensor(kl0)) + alpha0 * kl_t).mean()

    losses = {}
    losses["L_V"] = (lambda p, fz: O.value_loss(online(p)[1].sum(axis=1), g_norm),) * 2
    losses["L_pi"] = (
        lambda p, fz: O.policy_loss(O.psi_weights(adv[sel.indices], float(p["eta"].data)),
                                    D.log_prob(online(p)[0], actions)[sel.indices]),
        lambda p, fz: O.policy_loss(fz["psi"], D.log_prob(online(p)[0], actions)[sel.indices]),
    )
    losses["L_eta"] = (lambda p, fz: O.temperature_loss(adv[sel.indices], p["eta"], state.eps_eta),) * 2
    if continuous:
        losses["L_alpha_coupled"] = (
            lambda p, fz: O.alpha_loss(kls(online(p)[0])["total"], p["alpha_mu"], state.eps_alpha_mu),
            lambda p, fz: sg_alpha(p["alpha_mu"], kls(online(p)[0])["total"], fz["kl"]["total"],
                                   fz["mult"]["alpha_mu"], state.eps_alpha_mu),
        )
        losses["L_alpha_decoupled"] = (
            lambda p, fz: O.decoupled_alpha_losses(
                kls(online(p)[0])["mu"], kls(online(p)[0])["sigma"], p["alpha_mu"], p["alpha_sigma"],
                state.eps_alpha_mu, state.eps_alpha_sigma),
            lambda p, fz: (sg_alpha(p["alpha_mu"], kls(online(p)[0])["mu"], fz["kl"]["mu"],
                                    fz["mult"]["alpha_mu"], state.eps_alpha_mu)
                           + sg_alpha(p["alpha_sigma"], kls(online(p)[0])["sigma"], fz["kl"]["sigma"],
                                      fz["mult"]["alpha_sigma"], state.eps_alpha_sigma)),
        )
    else:
        losses["L_alpha_coupled"] = (
            lambda p, fz: O.alpha_loss(kls(online(p)[0])["total"], p["alpha"], state.eps_alpha),
            lambda p, fz: sg_alpha(p["alpha"], kls(online(p)[0])["total"], fz["kl"]["total"],
                                   fz["mult"]["alpha"], state.eps_alpha),
        )

    def total_analytic(p, fz):
        dist, values = online(p)
        mults = {name: p[name] for name in state.names}
        terms = O.improvement_loss(dist, tdist, actions, adv, mults, state)
        return O.total_loss(O.value_loss(values.sum(axis=1), g_norm), terms.total)

    def total_frozen(p, fz):
        parts = [losses["L_V"][1](p, fz), losses["L_pi"][1](p, fz), losses["L_eta"][1](p, fz)]
        parts.append(losses["L_alpha_decoupled" if continuous else "L_alpha_coupled"][1](p, fz))
        return O.total_loss(*parts)

    losses["total"] = (total_analytic, total_frozen)
    return store, losses, frozen_at


def test_criterion_01_gradient_integrity():
    t0 = time.perf_counter()
    worst: dict[str, float] = {}
    for seed in range(20):
        store, losses, frozen_at = _loss_setting(seed)
        fz = frozen_at(store.flat)
        for name, (analytic_fn, frozen_fn) in losses.items():
            leaves = store.leaves()
            value = analytic_fn(leaves, fz)
            ad.backward(value)
            analytic = store.grad_vector(leaves)
            base = float(frozen_fn(store.leaves(), fz).data)
            assert base == pytest.approx(float(value.data), rel=1e-12, abs=1e-14), name
            numeric = _central_grad(lambda x: float(frozen_fn(store.leaves(x), fz).data), store.flat)
            err = float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))))
            worst[name] = max(worst.get(name, 0.0), err)
    secs = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-5 and secs < 30
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report(1, ok, f"max rel err {detail}; {secs:.1f}s (limit 1e-5, 30s)")
    assert ok


# ---------------------------------------------------------------------- 2

def _sample_kl(adv, eta):
    psi = O.psi_weights(adv, eta)
    return float(np.sum(psi * np.log(psi * len(adv))))


def test_criterion_02_temperature_dual():
    rng = np.random.default_rng(2)
    worst_kl, worst_rel = 0.0, 0.0
    for _ in range(100):
        batch = rng.normal(size=64)
        adv = batch[O.select_top_half(batch).indices]
        assert len(adv) == 32
        for eps in (0.01, 0.1, 0.5):
            f = lambda log_eta: O.temperature_loss(adv, math.exp(log_eta), eps).item()
            eta_star = math.exp(golden_section(f, math.log(1e-4), math.log(1e4), tol=1e-12))
            worst_kl = max(worst_kl, abs(_sample_kl(adv, eta_star) - eps))
            # Adam with default moments on L_eta alone, from the default start
            x, m, v = np.array([1.0]), np.zeros(1), np.zeros(1)
            for step in range(1, 5001):
                eta = ad.Tensor(x[0], requires_grad=True)
                ad.backward(O.temperature_loss(adv, eta, eps))
                x, m, v = adam_step(x, np.array([float(eta.grad)]), m, v, 1e-2, step)
                x = np.maximum(x, O.MULTIPLIER_FLOOR)
            worst_rel = max(worst_rel, abs(x[0] - eta_star) / eta_star)
    ok = worst_kl <= 1e-3 and worst_rel <= 0.05
    report(2, ok, f"max |KL(psi)-eps| {worst_kl:.1e} (limit 1e-3); "
                  f"max |eta_gd-eta*|/eta* {worst_rel:.2%} (limit 5%)")
    assert ok


# ---------------------------------------------------------------------- 3

def _gauss(m, s):
    return D.DiagGaussian(np.asarray(m, float), np.asarray(s, float))


def _mc(old_logpdf, new_logpdf, draws):
    lp = old_logpdf(draws) - new_logpdf(draws)
    return lp.mean(), lp.std(ddof=1) / math.sqrt(len(lp))


def _norm_logpdf(m, s):
    return lambda x: np.sum(-0.5 * ((x - m) / s) ** 2 - np.log(s) - 0.5 * math.log(2 * math.pi), axis=-1)


def test_criterion_03_kl_geometry():
    rng = np.random.default_rng(3)
    # (a) decoupling identity on random diagonal pairs
    gap = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 5))
        old = _gauss(rng.normal(size=d), np.exp(0.5 * rng.normal(size=d)))
        new = _gauss(rng.normal(size=d), np.exp(0.5 * rng.normal(size=d)))
        parts = D.kl_gaussian_mean(old, new).item() + D.kl_gaussian_cov(old, new).item()
        gap = max(gap, abs(D.kl_gaussian_total(old, new).item() - parts))
    ok_identity = gap <= 1e-12

    # (b) closed forms against Monte Carlo, 1e6 draws each
    n = 1_000_000
    worst_z = 0.0
    for _ in range(4):
        p, q = rng.normal(size=4), rng.normal(size=4)
        pc, qc = D.Categorical(p), D.Categorical(q)
        a = D.sample(D.Categorical(np.tile(p, (n, 1))), rng)
        est, se = _mc(lambda x: np.log(pc.probs())[x], lambda x: np.log(qc.probs())[x], a)
        worst_z = max(worst_z, abs(D.kl_categorical(pc, qc).item() - est) / se)
        m0, m1 = rng.normal(size=2), rng.normal(size=2)
        s0, s1 = np.exp(0.4 * rng.normal(size=2)), np.exp(0.4 * rng.normal(size=2))
        old, new = _gauss(m0, s0), _gauss(m1, s1)
        x = m0 + s0 * rng.standard_normal((n, 2))
        for closed, (mt, st) in ((D.kl_gaussian_total, (m1, s1)),
                                 (D.kl_gaussian_mean, (m1, s0)),
                                 (D.kl_gaussian_cov, (m0, s1))):
            est, se = _mc(_norm_logpdf(m0, s0), _norm_logpdf(mt, st), x)
            worst_z = max(worst_z, abs(closed(old, new).item() - est) / se)
    ok_mc = worst_z <= 5.0

    # (c) KL against the empirical-Fisher quadratic form at delta = 1e-3
    delta = 1e-3
    worst_ratio = 0.0
    m0, s0 = np.array([0.3, -0.5]), np.array([0.8, 1.4])
    x = m0 + s0 * rng.standard_normal((n, 2))
    score = np.hstack([(x - m0) / s0 ** 2, ((x - m0) ** 2 / s0 ** 3 - 1 / s0)])
    F = score.T @ score / n
    logits = np.array([0.2, -0.4, 1.0])
    probs = D.Categorical(logits).probs()
    a = D.sample(D.Categorical(np.tile(logits, (n, 1))), rng)
    cscore = np.eye(3)[a] - probs
    Fc = cscore.T @ cscore / n
    for _ in range(5):
        u = rng.normal(size=4)
        u /= np.linalg.norm(u)
        th = delta * u
        kl = D.kl_gaussian_total(_gauss(m0, s0), _gauss(m0 + th[:2], s0 + th[2:])).item()
        worst_ratio = max(worst_ratio, abs(kl / (0.5 * th @ F @ th) - 1))
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        th = delta * u
        kl = D.kl_categorical(D.Categorical(logits), D.Categorical(logits + th)).item()
        worst_ratio = max(worst_ratio, abs(kl / (0.5 * th @ Fc @ th) - 1))
    ok_fisher = worst_ratio <= 0.02

    ok = ok_identity and ok_mc and ok_fisher
    report(3, ok, f"identity max gap {gap:.2e} (limit 1e-12) {'ok' if ok_identity else 'FAILS'}; "
                  f"MC max |z| {worst_z:.2f} (limit 5); Fisher max |ratio-1| {worst_ratio:.2%} (limit 2%)")
    assert ok


# ---------------------------------------------------------------------- 4

def _alpha_after_one_update(kl_scale, eps=0.005):
    rng = np.random.default_rng(4)
    n = 256
    base = rng.normal(size=(n, 4))
    target = D.Categorical(base)
    online_logits = ad.tensor(base + kl_scale * rng.normal(size=(n, 4)))
    state = O.LagrangeState.discrete_defaults(eps_alpha=eps)
    mults = {k: ad.Tensor(v, requires_grad=True) for k, v in zip(state.names, state.vector())}
    actions = D.sample(target, rng)
    terms = O.improvement_loss(D.Categorical(online_logits), target, actions, rng.normal(size=n),
                               mults, state)
    ad.backward(terms.total)
    grads = np.array([float(mults[k].grad) for k in state.names])
    new, _, _ = adam_step(state.vector(), grads, np.zeros(2), np.zeros(2), 1e-4, 1, beta1=0.0)
    new = O.project_multipliers(state.with_vector(new))
    return float(terms.kl["total"].mean()), state.alpha, new.alpha


def test_criterion_04_multiplier_dynamics():
    agree = 0
    cases = np.concatenate([np.linspace(0.0, 0.4, 21), [0.09, 0.1, 0.11]])
    seen = set()
    for s in cases:
        kl, before, after = _alpha_after_one_update(s)
        seen.add(kl > 0.005)
        agree += (after > before) == (kl > 0.005)
    ok_sign = agree == len(cases) and seen == {True, False}

    floor_ok, rows_checked = True, 0
    for seed in SEEDS:
        _, rows, _ = learning_run("chain", seed)
        for r in rows:
            floor_ok &= r["eta"] >= 1e-8 and r["alpha"] >= 1e-8
        rows_checked += len(rows)
    for seed in SEEDS:
        _, rows, _ = learning_run("pointmass", seed)
        for r in rows:
            floor_ok &= min(r["eta"], r["alpha_mu"], r["alpha_sigma"]) >= 1e-8
        rows_checked += len(rows)
    ok = ok_sign and floor_ok
    report(4, ok, f"alpha rises iff KL>eps in {agree}/{len(cases)} controlled updates; "
                  f"multipliers >= 1e-8 in all {rows_checked} training rows: {floor_ok}")
    assert ok


# ---------------------------------------------------------------------- 5

def test_criterion_05_popart():
    rng = np.random.default_rng(5)
    spec = NetSpec(obs_dim=3, action=ActionSpec(True, 2), num_tasks=2, trunk=(8,), head=8)
    net = AgentNet.create(spec, rng)
    net.params["value.w_out"] = rng.normal(size=(8, 2))
    net.params["value.b_out"] = rng.normal(size=2)
    x = rng.normal(size=(50, 3))
    stats = R.PopArtStats.create(2)
    _, v = net.forward(x)
    pred = R.denormalize(stats, v.data, np.arange(2))
    worst = 0.0
    for _ in range(1000):
        k = int(rng.integers(1, 40))
        targets = rng.normal(loc=rng.normal(scale=20), scale=np.exp(rng.normal(scale=2)), size=k)
        new = R.popart_update_batch(stats, targets, rng.integers(0, 2, size=k))
        net.popart_compensate(stats, new)
        stats = new
        _, v = net.forward(x)
        now = R.denormalize(stats, v.data, np.arange(2))
        worst = max(worst, float(np.max(np.abs(now - pred) / np.maximum(1, np.abs(pred)))))
    ok_comp = worst <= 1e-8

    lo = R.PopArtStats.create(1, 0.5)
    hi = R.PopArtStats.create(1, 1e-4)
    for _ in range(50):
        lo = R.popart_update(lo, np.full(8, 3.0), 0)
        hi = R.popart_update(hi, np.tile([1e9, -1e9], 500), 0)
    ok_clamp = lo.sigma[0] == 1e-2 and hi.sigma[0] == 1e6

    cfg = load_config(os.path.join(CONFIGS, "cartpole.cfg"), num_tasks=2, task_reward_scales="1,100",
                      learn_steps=300, eval_interval=1000, eval_episodes=1)
    tr = T.Trainer(cfg)
    absmax = 0.0
    for _ in range(cfg.learn_steps):
        absmax = max(absmax, tr.step()["norm_target_absmax"])
    ok_two = absmax <= 10.0
    ok = ok_comp and ok_clamp and ok_two
    report(5, ok, f"compensation max rel drift {worst:.1e} over 1000 updates (limit 1e-8); "
                  f"clamp lo/hi {lo.sigma[0]:g}/{hi.sigma[0]:g}; two-channel x100 max |target| "
                  f"{absmax:.2f} (limit 10), scales {tr.stats.sigma[0]:.3g}/{tr.stats.sigma[1]:.3g}")
    assert ok


# ---------------------------------------------------------------------- 6

def test_criterion_06_chain_learning():
    env = chain_mdp(5)
    P, Rm = env.transition_model()
    V, policy, residual = value_iteration(P, Rm, 0.99)
    assert residual < 1e-10
    optimum = undiscounted_return(P, Rm, policy, 0, env.max_steps)
    finals, total = [], 0.0
    for seed in SEEDS:
        res, rows, secs = learning_run("chain", seed)
        assert rows[-1]["step"] <= 2000
        ev = T.evaluate(res.checkpoint_path, 100, seed=1000 + seed)
        finals.append(ev.mean)
        total += secs
    ok = all(f >= 0.95 * optimum for f in finals) and total < 300
    report(6, ok, f"final eval returns {[round(f, 3) for f in finals]} vs 0.95 x optimum "
                  f"{0.95 * optimum:.3f}; {total:.0f}s for 5 seeds (limit 300s)")
    assert ok


# ---------------------------------------------------------------------- 7

def test_criterion_07_cartpole_learning():
    finals, total = [], 0.0
    for seed in SEEDS:
        res, rows, secs = learning_run("cartpole", seed)
        assert rows[-1]["env_frames"] <= 500_000
        ev = T.evaluate(res.checkpoint_path, 100, seed=2000 + seed)
        finals.append(ev.mean)
        total += secs
    passed = sum(f >= 450 for f in finals)
    ok = passed >= 4 and total < 1800
    report(7, ok, f"100-episode eval returns {[round(f, 1) for f in finals]}; {passed}/5 >= 450 "
                  f"(need 4) within {rows[-1]['env_frames']:.0f} frames; {total:.0f}s (limit 1800s)")
    assert ok


# ---------------------------------------------------------------------- 8

def test_criterion_08_point_mass_learning():
    env = point_mass()
    A, B, Q, Rm = env.linear_model()
    _, P0 = finite_horizon_lqr(A, B, Q, Rm, env.horizon)
    ratios, total = [], 0.0
    for seed in SEEDS:
        res, rows, secs = learning_run("pointmass", seed)
        assert rows[-1]["env_frames"] <= 1_000_000
        ev = T.evaluate(res.checkpoint_path, 100, seed=3000 + seed, mode_actions=True)
        x0 = ev.initial_observations
        oracle = float(np.mean(np.einsum("ni,ij,nj->n", x0, P0, x0)))
        ratios.append(-ev.mean / oracle)
        total += secs
    passed = sum(r <= 1.25 for r in ratios)
    ok = passed >= 4 and total < 2700
    report(8, ok, f"cost / Riccati cost {[round(r, 3) for r in ratios]}; {passed}/5 within 25% "
                  f"(need 4); {total:.0f}s (limit 2700s)")
    assert ok


# ---------------------------------------------------------------------- 9

def test_criterion_09_importance_weighting():
    ok_examples = (O.importance_weights(np.log(0.2), np.log(0.1)) == 1.0
                   and abs(O.importance_weights(np.log(0.05), np.log(0.1)) - 0.5) < 1e-15)

    cfg = load_config(os.path.join(CONFIGS, "chain.cfg"), learn_steps=300, t_target=5,
                      eval_interval=1000, eval_episodes=2, importance_weighting=True)
    on = T.Trainer(cfg)
    rho_one = True
    for _ in range(20):
        on.step()
        rho_one &= bool(np.all(on.last_terms.rho == 1.0))

    stale = T.Trainer(cfg.replace(behavior_lag=2))
    rows, rho_min, lagged, invariants = [], 1.0, 0, True
    for _ in range(cfg.learn_steps):
        row = stale.step()
        rows.append(row)
        rho = stale.last_terms.rho
        invariants &= bool(np.all((rho > 0) & (rho <= 1)))
        rho_min = min(rho_min, float(rho.min()))
        lagged += stale.behavior.version < stale.target.version
        w = stale.last_terms.weights
        invariants &= abs(w.sum() - 1) <= 1e-12 and bool(np.all(w >= 0))
    for cur, nxt in zip(rows, rows[1:]):
        invariants &= nxt["alpha"] >= cur["alpha"] or cur["kl_mean"] <= cfg.eps_alpha
    invariants &= all(r["eta"] >= 1e-8 and r["alpha"] >= 1e-8 for r in rows)
    invariants &= all(np.isfinite(list(r.values())).all() for r in rows)
    ok = ok_examples and rho_one and invariants and lagged > 0 and rho_min < 1
    report(9, ok, f"clip examples {ok_examples}; rho == 1 with behavior = target: {rho_one}; "
                  f"stale behavior on {lagged}/{len(rows)} steps, min rho {rho_min:.3f}, "
                  f"invariants hold: {invariants}")
    assert ok


# --------------------------------------------------------------------- 10

def test_criterion_10_reproducibility(tmp_path):
    base = load_config(os.path.join(CONFIGS, "pointmass.cfg"), learn_steps=40, eval_interval=20,
                       eval_episodes=3)
    a = T.train(base.replace(out_dir=str(tmp_path / "a")))
    b = T.train(base.replace(out_dir=str(tmp_path / "b")))
    same_csv = open(a.metrics_path, "rb").read() == open(b.metrics_path, "rb").read()

    tr = T.Trainer(base.replace(learn_steps=60))
    for _ in range(25):
        tr.step()
    path = tmp_path / "mid.vmpo"
    tr.save(path)
    blob = open(path, "rb").read()
    resaved = Checkpoint.load(path).to_bytes() == blob
    clone = T.Trainer.load(path)
    same_step = all(tr.step() == clone.step() for _ in range(5))
    same_state = tr.to_checkpoint().to_bytes() == clone.to_checkpoint().to_bytes()
    ok = same_csv and resaved and same_step and same_state
    report(10, ok, f"metrics CSV byte-identical: {same_csv}; save-load-save identical: {resaved}; "
                   f"resumed steps bit-exact: {same_step and same_state}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
