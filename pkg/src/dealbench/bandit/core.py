"""Softmax policy-gradient bandit over the strategy prompt space."""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .. import _kernels
from ..errors import DealbenchError

log = logging.getLogger(__name__)

N_ARMS = 96
HIGH, LOW = "high", "low"


class InactiveArm(DealbenchError, ValueError):
    pass


class TrainingInterrupted(DealbenchError):
    """The environment failed; ``checkpoint`` is the state saved just before the failing step."""

    def __init__(self, message: str, checkpoint: dict, path: Path | None):
        super().__init__(message)
        self.checkpoint = checkpoint
        self.path = path


@dataclass(frozen=True)
class RewardSpec:
    w_overpay_high: float = 2.0
    w_oob_low: float = 1.0
    w_deadlock: float = 1.0

    def __post_init__(self):
        if min(self.w_overpay_high, self.w_oob_low, self.w_deadlock) <= 0:
            raise ValueError("penalty weights must be positive")


@dataclass(frozen=True)
class Schedule:
    total_steps: int = 500
    eps_start: float = 0.10
    eps_end: float = 0.02
    low_budget_phase_fraction: float = 0.5
    high_budget_prob_phase2: float = 0.7
    k_initial: int = 24
    k_final: int = 12
    shrink_at_fraction: float = 2 / 3
    forced_coverage_interval: int = 10
    learning_rate: float = 0.1
    global_pi: bool = False

    def __post_init__(self):
        if not 0 < self.eps_end <= self.eps_start < 1:
            raise ValueError("need 0 < eps_end <= eps_start < 1")
        if not 1 <= self.k_final <= self.k_initial <= N_ARMS:
            raise ValueError("need 1 <= k_final <= k_initial <= 96")
        if self.total_steps < 0 or self.forced_coverage_interval < 1:
            raise ValueError("bad step counts")

    def epsilon(self, progress: float) -> float:
        p = min(max(progress, 0.0), 1.0)
        return self.eps_start + (self.eps_end - self.eps_start) * p


@dataclass
class BanditState:
    theta: np.ndarray
    baseline: float = 0.0
    step: int = 0
    pull_counts: np.ndarray = None
    active_set: list[int] = None
    rng_seed: int = 0

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64).copy()
        n = self.theta.shape[0]
        if self.pull_counts is None:
            self.pull_counts = np.zeros(n, dtype=np.int64)
        self.pull_counts = np.asarray(self.pull_counts, dtype=np.int64).copy()
        if self.active_set is None:
            self.active_set = list(range(n))
        self.active_set = [int(i) for i in self.active_set]
        if not self.active_set or any(not 0 <= i < n for i in self.active_set):
            raise ValueError("active set must be a non-empty subset of the arms")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta must be finite")

    @classmethod
    def fresh(cls, n_arms: int = N_ARMS, rng_seed: int = 0) -> "BanditState":
        return cls(np.zeros(n_arms), rng_seed=rng_seed)

    def to_dict(self) -> dict:
        return {
            "theta": [float(x) for x in self.theta],
            "baseline": float(self.baseline),
            "step": int(self.step),
            "pull_counts": [int(x) for x in self.pull_counts],
            "active_set": list(self.active_set),
            "rng_seed": int(self.rng_seed),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "BanditState":
        return cls(np.array(d["theta"], dtype=np.float64), float(d["baseline"]), int(d["step"]),
                   np.array(d["pull_counts"], dtype=np.int64), list(d["active_set"]), int(d.get("rng_seed", 0)))


@dataclass(frozen=True)
class UpdateInfo:
    baseline: float
    advantage: float
    pi: float


def softmax_policy(theta, subset: Sequence[int]) -> np.ndarray:
    subset = np.asarray(list(subset), dtype=np.int64)
    if subset.size == 0:
        raise ValueError("subset must be non-empty")
    return _kernels.softmax(np.asarray(theta, dtype=np.float64), subset)


def compute_reward(flags, budget_level: str, spec: RewardSpec = RewardSpec()) -> float:
    """Penalty for high-budget overpayment, low-budget out-of-budget acceptance and deadlock."""
    get = flags.get if isinstance(flags, Mapping) else (lambda k, d=False: getattr(flags, k, d))
    level = getattr(budget_level, "value", budget_level)
    r = 0.0
    if level == HIGH and get("over_retail", False):
        r -= spec.w_overpay_high
    if level == LOW and get("over_budget", False):
        r -= spec.w_oob_low
    if get("deadlock", False):
        r -= spec.w_deadlock
    return r


def update(state: BanditState, action: int, reward: float, eta: float, *, global_pi: bool = False) -> UpdateInfo:
    """EMA baseline first, then advantage against it, then move only the chosen arm's logit."""
    if action not in state.active_set:
        raise InactiveArm(f"arm {action} is not in the active set")
    support = range(len(state.theta)) if global_pi else state.active_set
    b, adv, pi = _kernels.update(state.theta, np.asarray(list(support), dtype=np.int64), int(action),
                                 float(reward), float(state.baseline), float(eta))
    state.baseline = b
    state.pull_counts[action] += 1
    state.step += 1
    return UpdateInfo(b, adv, pi)


def least_sampled(state: BanditState) -> int:
    return min(state.active_set, key=lambda i: (state.pull_counts[i], i))


def select_action(state: BanditState, eps: float, rng: np.random.Generator,
                  coverage_interval: int | None = None) -> tuple[int, str]:
    """Returns (arm, mode) with mode in {forced, explore, exploit}. Always draws two uniforms."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must be in [0, 1]")
    u_explore, u_pick = rng.random(2)
    if coverage_interval and state.step % coverage_interval == 0:
        return least_sampled(state), "forced"
    arm, explored = _kernels.choose(state.theta, np.asarray(state.active_set, dtype=np.int64),
                                    float(eps), float(u_explore), float(u_pick))
    return int(arm), "explore" if explored else "exploit"


def top_k(state: BanditState, k: int, among: Sequence[int] | None = None) -> list[int]:
    """Highest-theta arms; ties go to fewer pulls, then lower index. Returned in index order."""
    pool = list(range(len(state.theta))) if among is None else list(among)
    ranked = sorted(pool, key=lambda i: (-state.theta[i], state.pull_counts[i], i))
    return sorted(ranked[:k])


# -- training ---------------------------------------------------------------

Env = Callable[[int, str, np.random.Generator], object]


@dataclass
class TrainResult:
    best_action: int
    history: list[dict]
    state: BanditState
    schedule: Schedule
    reward_spec: RewardSpec = field(default_factory=RewardSpec)

    def write_history(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for row in self.history:
                fh.write(json.dumps(row, sort_keys=True) + "\n")


def _rngs(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    ss = np.random.SeedSequence(seed)
    a, b = ss.spawn(2)
    return np.random.default_rng(a), np.random.default_rng(b)


def _reward_from(result, level: str, spec: RewardSpec) -> tuple[float, dict]:
    if isinstance(result, (int, float)):
        return float(result), {}
    flags = dict(result) if isinstance(result, Mapping) else {
        k: bool(getattr(result, k, False)) for k in ("over_budget", "over_retail", "deadlock")}
    return compute_reward(flags, level, spec), flags


def checkpoint_dict(state: BanditState, schedule: Schedule, spec: RewardSpec, rng, env_rng, history) -> dict:
    return {
        **state.to_dict(),
        "schedule": asdict(schedule),
        "reward_spec": asdict(spec),
        "rng_state": {"select": rng.bit_generator.state, "env": env_rng.bit_generator.state},
        "history": history,
    }


def save_checkpoint(path, payload: dict) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")
    os.replace(tmp, path)


def load_checkpoint(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def train(env: Env, schedule: Schedule = Schedule(), spec: RewardSpec = RewardSpec(), rng_seed: int = 0, *,
          n_arms: int = N_ARMS, checkpoint_path=None, checkpoint_every: int = 50,
          resume: dict | None = None) -> TrainResult:
    """Warmup (every arm once per budget condition), then the scheduled main phase.

    ``env(arm, budget_level, rng)`` returns either a float reward or outcome flags
    (``over_budget``, ``over_retail``, ``deadlock``).
    """
    warmup = [(a, lv) for a in range(n_arms) for lv in (HIGH, LOW)]
    total = len(warmup) + schedule.total_steps
    rng, env_rng = _rngs(rng_seed)
    if resume is not None:
        state = BanditState.from_dict(resume)
        rng.bit_generator.state = resume["rng_state"]["select"]
        env_rng.bit_generator.state = resume["rng_state"]["env"]
        history = list(resume.get("history", []))
    else:
        state = BanditState.fresh(n_arms, rng_seed)
        history = []
    T = schedule.total_steps

    def snapshot() -> dict:
        return checkpoint_dict(state, schedule, spec, rng, env_rng, history)

    step_start: dict = {}

    def run_env(arm: int, level: str):
        try:
            return env(arm, level, env_rng)
        except Exception as exc:
            # rewind both streams so a resume replays this step from its start
            rng.bit_generator.state = step_start["select"]
            env_rng.bit_generator.state = step_start["env"]
            payload = snapshot()
            if checkpoint_path is not None:
                save_checkpoint(checkpoint_path, payload)
            raise TrainingInterrupted(f"environment failed at step {state.step}: {exc}", payload,
                                      checkpoint_path) from exc

    while state.step < total:
        t = state.step
        baseline_before = state.baseline
        step_start = {"select": rng.bit_generator.state, "env": env_rng.bit_generator.state}
        if t < len(warmup):
            arm, level = warmup[t]
            eps, mode, phase = None, "warmup", "warmup"
            state.active_set = list(range(n_arms))
        else:
            i = t - len(warmup)
            progress = i / T
            if i == 0:
                state.active_set = top_k(state, schedule.k_initial)
            if progress >= schedule.shrink_at_fraction and len(state.active_set) > schedule.k_final:
                state.active_set = top_k(state, schedule.k_final, among=state.active_set)
            eps = schedule.epsilon(i / (T - 1) if T > 1 else 1.0)
            if progress < schedule.low_budget_phase_fraction:
                level = LOW
            else:
                level = HIGH if rng.random() < schedule.high_budget_prob_phase2 else LOW
            arm, mode = select_action(state, eps, rng, schedule.forced_coverage_interval)
            phase = "main"
        result = run_env(arm, level)
        reward, flags = _reward_from(result, level, spec)
        info = update(state, arm, reward, schedule.learning_rate, global_pi=schedule.global_pi)
        history.append({
            "step": t, "phase": phase, "mode": mode, "action": arm, "budget": level,
            "reward": reward, "baseline_before": baseline_before, "baseline": info.baseline,
            "advantage": info.advantage, "pi": info.pi, "epsilon": eps,
            "active_size": len(state.active_set), "theta_action": float(state.theta[arm]),
            "flags": flags,
        })
        if checkpoint_path is not None and state.step % checkpoint_every == 0:
            save_checkpoint(checkpoint_path, snapshot())

    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, snapshot())
    best = int(np.argmax(state.theta))
    return TrainResult(best, history, state, schedule, spec)


def summarize(history: Sequence[dict], last_fraction: float = 1.0) -> dict:
    """Anomaly percentages over the main phase, in the layout of a vanilla-vs-optimized table."""
    main = [h for h in history if h["phase"] == "main"]
    tail = main[int(len(main) * (1 - last_fraction)):] if main else []

    def pct(pred) -> float | None:
        pool = [h for h in tail if pred(h)]
        return None if not tail else 100.0 * len(pool) / len(tail)

    return {
        "out_of_budget": pct(lambda h: h["budget"] == LOW and h["flags"].get("over_budget")),
        "overpay": pct(lambda h: h["budget"] == HIGH and h["flags"].get("over_retail")),
        "deadlock": pct(lambda h: h["flags"].get("deadlock")),
        "mean_reward": (math.fsum(h["reward"] for h in tail) / len(tail)) if tail else None,
        "steps": len(tail),
    }
