"""Noisy iterated Prisoner's Dilemma between automaton strategies."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .analysis import IPD_ACTIONS, IPD_PREDICTORS, builtin_strategy, model_error
from .codec import Layout
from .dataset import Dataset, concat
from .fsm import Fsm

PAPER_NOISE_LEVELS = tuple(round(0.025 * i, 3) for i in range(21))
PAPER_PAIRINGS = (("tft", "tft"), ("tft", "grim"), ("grim", "tft"), ("grim", "grim"))
BOTH_NOISY = "both-noisy"
OPPONENT_ONLY = "opponent-only"


@dataclass(frozen=True)
class PayoffMatrix:
    """Payoffs (player, opponent) indexed by the joint action, 0 = cooperate."""

    cc: tuple[float, float] = (3, 3)
    cd: tuple[float, float] = (0, 4)
    dc: tuple[float, float] = (4, 0)
    dd: tuple[float, float] = (1, 1)

    def table(self) -> np.ndarray:
        return np.array([[self.cc, self.cd], [self.dc, self.dd]], dtype=float)


@dataclass(frozen=True)
class MatchConfig:
    player: Fsm
    opponent: Fsm
    player_noise: float = 0.0
    opponent_noise: float = 0.0
    periods: int = 4000
    seed: int = 0
    # which seed substream drives each side's noise; swapped() keeps it with the agent
    streams: tuple[int, int] = (0, 1)
    payoffs: PayoffMatrix = field(default_factory=PayoffMatrix)

    def __post_init__(self) -> None:
        for name in ("player_noise", "opponent_noise"):
            if not 0.0 <= getattr(self, name) <= 0.5:
                raise ValueError(f"{name} must lie in [0, 0.5]")
        if self.periods < 1:
            raise ValueError("periods must be at least 1")
        for m in (self.player, self.opponent):
            if m.n_predictors != 2 or m.n_actions != 2:
                raise ValueError("IPD strategies need 2 actions and 2 predictors (own, opponent)")

    def swapped(self) -> MatchConfig:
        return MatchConfig(self.opponent, self.player, self.opponent_noise, self.player_noise,
                           self.periods, self.seed, self.streams[::-1], self.payoffs)


@dataclass(frozen=True)
class MatchSummary:
    player_cooperation: float
    opponent_cooperation: float
    player_mean_payoff: float
    opponent_mean_payoff: float
    player_flip_rate: float
    opponent_flip_rate: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class MatchResult:
    player_data: Dataset
    opponent_data: Dataset
    summary: MatchSummary
    actions: np.ndarray  # (periods, 2) realized 0/1 actions, player first


def _noise_draws(cfg: MatchConfig) -> tuple[np.ndarray, np.ndarray]:
    seqs = np.random.SeedSequence(cfg.seed).spawn(2)
    u = [np.random.default_rng(s).random(cfg.periods) for s in seqs]
    return u[cfg.streams[0]] < cfg.player_noise, u[cfg.streams[1]] < cfg.opponent_noise


def play_match(cfg: MatchConfig, group: str = "1") -> MatchResult:
    """Play one match; machines move on the realized (post-noise) actions.

    Each returned dataset holds one group whose predictors at period t are
    the realized (own, opponent) actions at t-1; period 1 carries (0, 0).
    """
    flips_p, flips_o = _noise_draws(cfg)
    ap, mp = cfg.player.arrays()
    ao, mo = cfg.opponent.arrays()
    realized = np.zeros((cfg.periods, 2), dtype=np.int64)
    intended = np.zeros((cfg.periods, 2), dtype=np.int64)
    sp = so = 0
    for t in range(cfg.periods):
        if t > 0:
            a, b = realized[t - 1]
            sp = mp[sp, a + 2 * b]
            so = mo[so, b + 2 * a]
        intended[t] = ap[sp], ao[so]
        realized[t, 0] = ap[sp] ^ flips_p[t]
        realized[t, 1] = ao[so] ^ flips_o[t]

    def perspective(own: int) -> Dataset:
        lagged = np.zeros((cfg.periods, 2), dtype=np.uint8)
        lagged[1:, 0] = realized[:-1, own]
        lagged[1:, 1] = realized[:-1, 1 - own]
        return Dataset((group,), np.array([0, cfg.periods]), np.arange(1, cfg.periods + 1),
                       realized[:, own] + 1, lagged, IPD_PREDICTORS, IPD_ACTIONS)

    pay = cfg.payoffs.table()[realized[:, 0], realized[:, 1]]
    summary = MatchSummary(
        float(np.mean(realized[:, 0] == 0)), float(np.mean(realized[:, 1] == 0)),
        float(pay[:, 0].mean()), float(pay[:, 1].mean()),
        float(np.mean(realized[:, 0] != intended[:, 0])),
        float(np.mean(realized[:, 1] != intended[:, 1])),
    )
    return MatchResult(perspective(0), perspective(1), summary, realized)


@dataclass(frozen=True)
class Condition:
    index: int
    player: str
    opponent: str
    noise: float
    noise_condition: str

    @property
    def player_noise(self) -> float:
        return 0.0 if self.noise_condition == OPPONENT_ONLY else self.noise

    @property
    def opponent_noise(self) -> float:
        return self.noise

    def to_dict(self) -> dict:
        return {"condition": self.index, "player": self.player, "opponent": self.opponent,
                "noise": self.noise, "noise_condition": self.noise_condition,
                "player_noise": self.player_noise, "opponent_noise": self.opponent_noise}


@dataclass(frozen=True)
class ExperimentDesign:
    pairings: tuple[tuple[str, str], ...] = PAPER_PAIRINGS
    noise_levels: tuple[float, ...] = PAPER_NOISE_LEVELS
    noise_conditions: tuple[str, ...] = (BOTH_NOISY, OPPONENT_ONLY)
    replicates: int = 25
    periods: int = 4000
    base_seed: int = 0
    # each replicate is periods/match_length restarted matches; None = one long match
    match_length: int | None = 100

    def __post_init__(self) -> None:
        if self.match_length is not None and (
            self.match_length < 1 or self.periods % self.match_length
        ):
            raise ValueError("match_length must divide periods")
        for c in self.noise_conditions:
            if c not in (BOTH_NOISY, OPPONENT_ONLY):
                raise ValueError(f"unknown noise condition {c!r}")
        for player, opponent in self.pairings:
            builtin_strategy(player), builtin_strategy(opponent)
        if self.replicates < 1 or self.periods < 1:
            raise ValueError("replicates and periods must be positive")
        if any(not 0 <= p <= 0.5 for p in self.noise_levels):
            raise ValueError("noise levels must lie in [0, 0.5]")

    def conditions(self) -> list[Condition]:
        combos = itertools.product(self.pairings, self.noise_levels, self.noise_conditions)
        return [Condition(i, pl, op, float(p), nc) for i, ((pl, op), p, nc) in enumerate(combos)]

    def n_runs(self) -> int:
        return len(self.conditions()) * self.replicates

    def seed_for(self, condition: Condition, replicate: int) -> int:
        ss = np.random.SeedSequence(self.base_seed, spawn_key=(condition.index, replicate))
        return int(ss.generate_state(1)[0])

    def match_config(self, condition: Condition, replicate: int) -> MatchConfig:
        return MatchConfig(builtin_strategy(condition.player), builtin_strategy(condition.opponent),
                           condition.player_noise, condition.opponent_noise, self.periods,
                           self.seed_for(condition, replicate))

    def to_dict(self) -> dict:
        return {"pairings": [list(p) for p in self.pairings], "noise_levels": list(self.noise_levels),
                "noise_conditions": list(self.noise_conditions), "replicates": self.replicates,
                "periods": self.periods, "base_seed": self.base_seed,
                "match_length": self.match_length}


@dataclass(frozen=True)
class Replicate:
    condition: Condition
    replicate: int
    seed: int
    data: Dataset
    summary: MatchSummary
    path: str | None = None


def play_series(cfg: MatchConfig, match_length: int | None = None, group: str = "1") -> tuple[Dataset, MatchSummary]:
    """``cfg.periods`` periods split into independent matches of
    ``match_length`` periods, one group each; both machines restart every match."""
    if match_length is None or match_length >= cfg.periods:
        res = play_match(cfg, group=group)
        return res.player_data, res.summary
    n_matches = cfg.periods // match_length
    seeds = np.random.SeedSequence(cfg.seed).generate_state(n_matches)
    results = [
        play_match(replace(cfg, periods=match_length, seed=int(s)), group=f"{group}m{m + 1}")
        for m, s in enumerate(seeds)
    ]
    fields = MatchSummary.__dataclass_fields__
    summary = MatchSummary(**{
        k: float(np.mean([getattr(r.summary, k) for r in results])) for k in fields
    })
    return concat([r.player_data for r in results]), summary


def iter_experiment(design: ExperimentDesign) -> Iterator[Replicate]:
    for cond in design.conditions():
        for rep in range(design.replicates):
            cfg = design.match_config(cond, rep)
            data, summary = play_series(cfg, design.match_length, group=f"c{cond.index}r{rep}")
            yield Replicate(cond, rep, cfg.seed, data, summary)


def run_experiment(design: ExperimentDesign, out_dir: str | Path | None = None) -> tuple[list[Replicate], dict]:
    """Generate every (condition, replicate) match; optionally write CSVs and
    a ``manifest.json`` describing each file."""
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    reps, entries = [], []
    for r in iter_experiment(design):
        path = None
        if out is not None:
            name = (f"{r.condition.player}-vs-{r.condition.opponent}_{r.condition.noise_condition}"
                    f"_p{r.condition.noise:.3f}_rep{r.replicate:02d}.csv")
            try:
                (out / name).write_text(r.data.to_csv(), encoding="utf-8")
            except OSError as exc:
                raise OSError(f"writing condition {r.condition.to_dict()}: {exc}") from exc
            path = name
        r = Replicate(r.condition, r.replicate, r.seed, r.data, r.summary, path)
        reps.append(r)
        entries.append({**r.condition.to_dict(), "replicate": r.replicate, "seed": r.seed,
                        "rows": r.data.n_rows, "file": path, "summary": r.summary.to_dict()})
    manifest = {"design": design.to_dict(), "runs": entries,
                "schema": {"predictors": list(IPD_PREDICTORS), "action_labels": list(IPD_ACTIONS),
                           "period_1_predictors": "placeholder (0,0); never read by the machine"}}
    if out is not None:
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return reps, manifest


@dataclass(frozen=True)
class RecoveryRow:
    condition: Condition
    replicate: int
    seed: int
    model_error: int
    best_fitness: float
    estimated: Fsm
    monotone_log: bool

    def to_dict(self) -> dict:
        return {**self.condition.to_dict(), "replicate": self.replicate, "seed": self.seed,
                "model_error": self.model_error, "best_fitness": self.best_fitness,
                "estimated": self.estimated.to_dict()}


def recovery_study(design: ExperimentDesign, layout: Layout | None = None,
                   ga_config=None, progress=None) -> list[RecoveryRow]:
    """Estimate the player's machine for every replicate and score it against
    the true strategy with the deterministic-accessibility mask."""
    from .ga import GaConfig, evolve

    layout = layout or Layout(2, 2, 4)
    ga_config = ga_config or GaConfig()
    rows = []
    for r in iter_experiment(design):
        truth = builtin_strategy(r.condition.player)
        result = evolve(r.data, layout, ga_config.replace(seed=r.seed))
        best = [b for b, _ in result.generation_log]
        row = RecoveryRow(r.condition, r.replicate, r.seed,
                          model_error(result.best_fsm, truth), result.best_fitness,
                          result.best_fsm, all(x <= y for x, y in zip(best, best[1:])))
        rows.append(row)
        if progress is not None:
            progress(row)
    return rows


def recovery_table(rows: Sequence[RecoveryRow]) -> list[dict]:
    """Mean/max model error per (pairing, noise condition, noise level)."""
    buckets: dict[tuple, list[int]] = {}
    for r in rows:
        key = (r.condition.player, r.condition.opponent, r.condition.noise_condition, r.condition.noise)
        buckets.setdefault(key, []).append(r.model_error)
    return [{"player": k[0], "opponent": k[1], "noise_condition": k[2], "noise": k[3],
             "replicates": len(v), "mean_error": float(np.mean(v)), "max_error": int(max(v)),
             "exact": sum(e == 0 for e in v)} for k, v in buckets.items()]
