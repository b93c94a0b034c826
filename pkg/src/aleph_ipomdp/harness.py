"""Experiment orchestration: single episodes, delta x omega grids over seeds,
baseline-vs-aleph comparisons, and CSV/JSON export.

Every random draw in an episode comes from ``RandomSource(seed)`` through a
fixed label path, so an episode is a pure function of (cell, seed).  Nature
draws first, from the ``nature`` sub-stream, in this order:

  iug     deceiver threshold (only when the cell asks for a draw)
  rowcol  payoff matrix (unless fixed), then informedness of a DoM(-1) row
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from itertools import product
from typing import Optional, Sequence, Union

from . import __version__
from . import game_iug as iug
from . import game_zerosum as zs
from .core import ConfigError, EngineConfig, History, RandomSource, RandomSender, ThresholdSender
from .metrics import EpisodeTrace, TrialStep, cumulative_regret, reward_summaries

DEFAULT_DELTAS = (0.01, 0.05, 0.1, 0.2, 0.3)
DEFAULT_OMEGAS = (0.01, 0.05, 0.1, 0.2, 0.3)
DEFAULT_SEEDS = 50
OUT_DIR_ENV = "ALEPH_OUT_DIR"

Threshold = Union[float, str, None]


class ExportError(RuntimeError):
    pass


@dataclass(frozen=True)
class Cell:
    """One agent pairing under one configuration.

    iug: ``threshold`` is the sender's psi, "random" (DoM(-1) only) or "draw"
    (nature picks).  rowcol: ``matrix`` 1/2 fixes the game, None lets nature
    pick; ``row_type`` for a DoM(-1) row is "informed", "uninformed" or None
    (drawn with the column's prior).
    """
    game: str = "iug"
    deceiver_dom: int = 1
    victim_dom: int = 0
    threshold: Threshold = 0.1
    matrix: Optional[int] = None
    row_type: Optional[str] = None
    aleph_aware: bool = True
    config: EngineConfig = field(default_factory=EngineConfig)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.game == "iug":
            if self.deceiver_dom not in (-1, 1):
                raise ConfigError("iug sender must be DoM(-1) or DoM(1)")
            if self.victim_dom != 0:
                raise ConfigError("iug receiver must be DoM(0)")
            th = self.threshold
            if th == "random" and self.deceiver_dom == 1:
                raise ConfigError("a DoM(1) sender needs a threshold")
            if not (th in ("random", "draw") or (isinstance(th, (int, float)) and 0.0 <= th < 1.0)):
                raise ConfigError(f"bad threshold {th!r}")
        elif self.game == "rowcol":
            if self.deceiver_dom not in (-1, 1):
                raise ConfigError("row player must be DoM(-1) or DoM(1)")
            if self.victim_dom not in (0, 2):
                raise ConfigError("column player must be DoM(0) or DoM(2)")
            if self.matrix not in (None, 1, 2):
                raise ConfigError("matrix must be 1, 2 or unset")
            if self.row_type not in (None, "informed", "uninformed"):
                raise ConfigError(f"bad row type {self.row_type!r}")
        else:
            raise ConfigError(f"unknown game {self.game!r}")
        self.config.validate()


@dataclass(frozen=True)
class ExperimentPlan:
    cell: Cell = field(default_factory=Cell)
    seeds: tuple = tuple(range(DEFAULT_SEEDS))
    deltas: tuple = (0.1,)
    omegas: tuple = (0.3,)
    out_dir: Optional[str] = None

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seed list is empty")
        if not self.deltas or not self.omegas:
            raise ConfigError("delta and omega lists must be non-empty")
        for s in self.seeds:
            if not 0 <= int(s) < 2**64:
                raise ConfigError("seeds must be non-negative 64-bit integers")
        for d in self.deltas:
            if d < 0:
                raise ConfigError("delta must be >= 0")
        for w in self.omegas:
            if not 0.0 <= w < 0.5:
                raise ConfigError("omega must be in [0, 0.5)")

    def cells(self) -> list:
        return [replace(self.cell, config=self.cell.config.with_(delta=d, omega=w))
                for d, w in product(self.deltas, self.omegas)]

    def tasks(self) -> list:
        return [(c, s) for c in self.cells() for s in self.seeds]


# ---------------------------------------------------------------------------
# episodes

def run_episode(cell: Cell, seed: int) -> EpisodeTrace:
    cell.validate()
    if cell.game == "iug":
        return _run_iug(cell, int(seed))
    return _run_rowcol(cell, int(seed))


def _feed(agents, record):
    # agents only ever see the masked record
    seen = record.masked()
    for a in agents:
        a.observe(seen)


def _run_iug(cell: Cell, seed: int) -> EpisodeTrace:
    cfg = cell.config
    rs = RandomSource(seed)
    nature = rs.child("nature")
    th = cell.threshold
    if th == "draw":
        if cell.deceiver_dom == 1:
            th = (0.1, 0.5)[nature.categorical((0.5, 0.5))]
        else:
            th = ("random", 0.1, 0.5)[nature.categorical((1 / 3, 1 / 3, 1 / 3))]
    persona = RandomSender() if th == "random" else ThresholdSender(float(th))
    mech = rs.child("receiver").child("aleph")
    receiver = iug.ReceiverAgent(cfg, mech if cfg.aleph_enabled else None)
    if cell.deceiver_dom == 1:
        sender = iug.Dom1Sender(float(th), cfg, mech, aleph_aware=cell.aleph_aware)
    else:
        sender = iug.ScriptedSender(persona, cfg)

    hist = History(horizon=cfg.horizon)
    steps = []
    for t in range(1, cfg.horizon + 1):
        pre = receiver.state
        ex = receiver.dynamics.expectations(pre)
        e_recv = math.fsum(b * e[0] for b, e in zip(pre.belief, ex))
        e_send = math.fsum(b * e[1] for b, e in zip(pre.belief, ex))
        offer = sender.act(rs.child("sender").child(str(t)))
        response = receiver.respond(offer, rs.child("receiver").child(str(t)))
        ra, rb = iug.iug_reward(offer, response)
        hist = hist.append(offer, response, ra, rb)
        _feed((sender, receiver), hist[-1])
        st = receiver.state
        steps.append(TrialStep(t, tuple(st.belief), tuple(st.flags), bool(st.triggered), e_recv, e_send))
    return EpisodeTrace("iug", seed, cfg.delta, cfg.omega, hist, tuple(steps), iug.TYPE_LABELS,
                        iug.TYPE_LABELS, persona.label,
                        {"threshold": th, "aleph": cfg.aleph_enabled})


def _run_rowcol(cell: Cell, seed: int) -> EpisodeTrace:
    cfg = cell.config
    rs = RandomSource(seed)
    nature = rs.child("nature")
    m = cell.matrix if cell.matrix is not None else 1 + nature.categorical((0.5, 0.5))
    matrix = zs.MATRICES[m]
    if cell.deceiver_dom == -1:
        rt = cell.row_type
        if rt is None:
            p_un = zs.row_prior(cfg)[0]
            rt = ("uninformed", "informed")[nature.categorical((p_un, 1.0 - p_un))]
        theta = 0 if rt == "uninformed" else m
        row = zs.ScriptedRow(theta, cfg)
    else:
        theta = m
        row = zs.Dom1Row(matrix, cfg)
    if cell.victim_dom == 0:
        col = zs.Dom0Column(cfg)
        true_type = zs.ROW_TYPE_LABELS[theta]
    else:
        col = zs.Dom2Column(cfg)
        if cell.deceiver_dom == 1:
            true_type = f"dom1_matrix_{m}"
        else:
            true_type = "uninformed" if theta == 0 else None
    aleph_row = isinstance(row, zs.Dom1Row) and cfg.aleph_enabled

    records = []
    steps = []
    T = cfg.horizon
    hist = History(horizon=T)
    for t in range(1, T + 1):
        ex = col.expected_rewards()
        e_col = math.fsum(b * e for b, e in zip(col.belief, ex))
        r = row.act(rs.child("row").child(str(t)))
        c = col.act(rs.child("column").child(str(t)))
        ga, gb = zs.payoff(matrix, r, c)
        # payoffs are revealed only once the game is over
        hist = hist.append(r, c, ga, gb, reward_visible=(t == T))
        _feed((row, col), hist[-1])
        flags = tuple(row.flags.flags) if aleph_row else (1,)
        steps.append(TrialStep(t, tuple(col.belief), flags, bool(aleph_row and row.triggered), e_col, -e_col))
        records.append(hist[-1])
    revealed = History(tuple(replace(rec, reward_visible=True) for rec in records), T)
    return EpisodeTrace("rowcol", seed, cfg.delta, cfg.omega, revealed, tuple(steps), col.labels,
                        ("dom0_column",), true_type,
                        {"matrix": m, "row_type": theta, "aleph": cfg.aleph_enabled})


# ---------------------------------------------------------------------------
# grids

def _run_task(task):
    cell, seed = task
    return run_episode(cell, seed)


def run_traces(plan: ExperimentPlan, workers: int = 1) -> list:
    """All traces of a plan, ordered by (delta, omega, seed)."""
    tasks = plan.tasks()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_run_task, tasks, chunksize=1))
    else:
        traces = [_run_task(t) for t in tasks]
    return sorted(traces, key=lambda tr: (tr.delta, tr.omega, tr.seed))


def _nan_to_none(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _nan_to_none(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_nan_to_none(v) for v in x]
    return x


def summarize(traces: Sequence[EpisodeTrace]) -> dict:
    out = reward_summaries(traces)
    excess = []
    regrets = []
    fb_hits = fb_total = 0
    for tr in traces:
        expected_a = math.fsum(s.expected_opponent_reward for s in tr.steps)
        if expected_a > 0:
            excess.append(tr.cumulative("a") / expected_a - 1.0)
        regrets.append(cumulative_regret(tr.victim_rewards(), [s.expected_reward for s in tr.steps]))
        if tr.true_type is not None:
            fb = tr.false_beliefs()
            fb_hits += sum(fb)
            fb_total += len(fb)
    out["excess_a_over_expected"] = sum(excess) / len(excess) if excess else math.nan
    out["victim_cumulative_regret"] = sum(regrets) / len(regrets)
    out["negative_regret_rate"] = sum(r < 0 for r in regrets) / len(regrets)
    out["false_belief_rate"] = fb_hits / fb_total if fb_total else math.nan
    return out


def grid_table(traces: Sequence[EpisodeTrace]) -> list:
    cells = {}
    for tr in traces:
        cells.setdefault((tr.delta, tr.omega), []).append(tr)
    rows = []
    for (d, w), group in sorted(cells.items()):
        s = summarize(group)
        rows.append({"delta": d, "omega": w, "episodes": s["episodes"],
                     "receiver_reward_per_trial": s["reward_b_per_trial"]["mean"],
                     "trigger_rate": s["trigger_rate"],
                     "trigger_trial": s["trigger_trial"]["mean"],
                     "reward_ratio": s["ratio_a_to_b"],
                     "summary": s})
    return rows


def run_grid(plan: ExperimentPlan, workers: int = 1):
    """(traces, per-(delta, omega) summary rows)."""
    traces = run_traces(plan, workers)
    return traces, grid_table(traces)


def compare(plan: ExperimentPlan, workers: int = 1) -> dict:
    """Paired baseline (aleph off) vs aleph-on runs over the same seeds."""
    base_plan = replace(plan, cell=replace(plan.cell, config=plan.cell.config.with_(aleph_enabled=False)),
                        deltas=plan.deltas[:1], omegas=plan.omegas[:1])
    on_plan = replace(plan, cell=replace(plan.cell, config=plan.cell.config.with_(aleph_enabled=True)))
    base = run_traces(base_plan, workers)
    on = run_traces(on_plan, workers)
    b = summarize(base)
    rows = []
    for row in grid_table(on):
        s = row["summary"]
        rows.append({"delta": row["delta"], "omega": row["omega"],
                     "ratio_baseline": b["ratio_a_to_b"], "ratio_aleph": s["ratio_a_to_b"],
                     "ratio_reduction": 1.0 - s["ratio_a_to_b"] / b["ratio_a_to_b"],
                     "receiver_reward_change": s["reward_b_per_trial"]["mean"] - b["reward_b_per_trial"]["mean"],
                     "trigger_rate": s["trigger_rate"]})
    return {"baseline": b, "cells": rows, "baseline_traces": base, "aleph_traces": on}


# ---------------------------------------------------------------------------
# export

def _num(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".9g")


def trial_rows(trace: EpisodeTrace) -> list:
    rows = []
    for rec, st in zip(trace.history, trace.steps):
        row = [str(trace.seed), _num(trace.delta), _num(trace.omega), str(rec.trial), str(rec.action_a),
               str(rec.action_b), _num(rec.reward_a), _num(rec.reward_b)]
        row += [_num(b) for b in st.belief]
        row += [str(f) for f in st.flags]
        row += [_num(st.triggered), _num(st.expected_reward), _num(rec.reward_b - st.expected_reward)]
        rows.append(row)
    return rows


def csv_header(trace: EpisodeTrace) -> list:
    return (["seed", "delta", "omega", "trial", "action_a", "action_b", "reward_a", "reward_b"]
            + [f"belief_{l}" for l in trace.type_labels] + [f"flag_{l}" for l in trace.flag_labels]
            + ["triggered", "expected_reward", "regret"])


def render_csv(traces: Sequence[EpisodeTrace]) -> str:
    traces = sorted(traces, key=lambda tr: (tr.delta, tr.omega, tr.seed))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if traces:
        w.writerow(csv_header(traces[0]))
    for tr in traces:
        w.writerows(trial_rows(tr))
    return buf.getvalue()


def config_echo(plan: Optional[ExperimentPlan]) -> dict:
    if plan is None:
        return {}
    cell = asdict(plan.cell)
    return {"cell": cell, "seeds": list(plan.seeds), "deltas": list(plan.deltas),
            "omegas": list(plan.omegas)}


def render_json(traces: Sequence[EpisodeTrace], plan: Optional[ExperimentPlan] = None,
                extra: Optional[dict] = None) -> str:
    rows = grid_table(traces)
    doc = {"version": __version__, "config": config_echo(plan), "cells": rows}
    if extra:
        doc.update(extra)
    return json.dumps(_nan_to_none(doc), indent=2, sort_keys=True) + "\n"


def _write(path: str, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as e:
        raise ExportError(f"cannot write {path}: {e.strerror or e}") from e


def export(traces: Sequence[EpisodeTrace], format: str, path: str,
           plan: Optional[ExperimentPlan] = None, extra: Optional[dict] = None) -> str:
    if format == "csv":
        _write(path, render_csv(traces))
    elif format == "json":
        _write(path, render_json(traces, plan, extra))
    else:
        raise ConfigError(f"unknown export format {format!r}")
    return path


def default_out_dir() -> str:
    return os.environ.get(OUT_DIR_ENV, "aleph_out")


def config_from_dict(d: dict) -> EngineConfig:
    names = {f.name for f in fields(EngineConfig)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    return EngineConfig(**d)
