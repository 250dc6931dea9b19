"""Psychophysical procedures run against synthetic observers.

Covers the interleaved ascending/descending staircase for vibration
thresholds, seeded trial schedules for the intensity, discrimination and
texture-comparison experiments, and the linear / exponential intensity fits.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .stimulus import preset

__all__ = [
    "StateError",
    "FitError",
    "STEP",
    "StaircaseState",
    "ObserverModel",
    "Trial",
    "TrialSchedule",
    "FitResult",
    "new_staircase",
    "staircase_next",
    "staircase_estimate",
    "run_interleaved",
    "run_observer",
    "schedule",
    "fit_linear",
    "fit_exponential",
]

STEP = 0.02
_LEVELS = 50  # 1 / STEP; values are held as integer levels to avoid drift
REVERSALS_PER_SERIES = 6


class StateError(RuntimeError):
    """Operation not valid for the staircase's current state."""


class FitError(ValueError):
    """Degenerate input for a fit."""


@dataclass(frozen=True)
class StaircaseState:
    direction: str  # "ascending" | "descending"
    level: int
    reversals: tuple[float, ...] = ()
    last_response: str | None = None
    finished: bool = False
    series: str = "ascending"
    trials: int = 0

    @property
    def current(self) -> float:
        return self.level / _LEVELS

    @property
    def step(self) -> float:
        return STEP


def new_staircase(series: str) -> StaircaseState:
    """Ascending series start at 0 going up; descending series at 1 going down."""
    if series == "ascending":
        return StaircaseState("ascending", 0, series="ascending")
    if series == "descending":
        return StaircaseState("descending", _LEVELS, series="descending")
    raise ValueError(f"series must be 'ascending' or 'descending', got {series!r}")


def _as_response(response) -> str:
    if response in (True, "yes", "y"):
        return "yes"
    if response in (False, "no", "n"):
        return "no"
    raise ValueError(f"response must be yes/no, got {response!r}")


def staircase_next(state: StaircaseState, response) -> StaircaseState:
    """Apply one yes/no response.

    "yes" moves down a step, "no" moves up. A reversal is recorded at the
    current value when the response differs from the previous one, or when the
    move would leave [0, 1] (the value is clamped and the bound counts as a
    turning point, which keeps floor/ceiling observers finite).
    """
    if state.finished:
        raise StateError("staircase already finished")
    r = _as_response(response)
    new_dir = "descending" if r == "yes" else "ascending"
    target = state.level + (-1 if r == "yes" else 1)
    clamped = not 0 <= target <= _LEVELS
    flipped = state.last_response is not None and r != state.last_response
    reversals = state.reversals
    if flipped or clamped:
        reversals = reversals + (state.current,)
    return replace(
        state,
        direction=new_dir,
        level=min(max(target, 0), _LEVELS),
        reversals=reversals,
        last_response=r,
        finished=len(reversals) >= REVERSALS_PER_SERIES,
        trials=state.trials + 1,
    )


def staircase_estimate(asc: StaircaseState, desc: StaircaseState, last: int = 3) -> float:
    """Mean of the last ``last`` reversals of each series."""
    if not (asc.finished and desc.finished):
        raise StateError("both series must be finished before estimating")
    values = list(asc.reversals[-last:]) + list(desc.reversals[-last:])
    return float(np.mean(values))


@dataclass(frozen=True)
class ObserverModel:
    """Hard-threshold observer: answers "yes" iff value >= threshold.

    With probability ``lapse_rate`` the answer is flipped.
    """

    threshold: float
    lapse_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if not 0.0 <= self.lapse_rate < 0.5:
            raise ValueError("lapse_rate must lie in [0, 0.5)")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> ObserverModel:
        doc = json.loads(text)
        return cls(float(doc["threshold"]), float(doc.get("lapse_rate", 0.0)), int(doc.get("seed", 0)))


@dataclass
class StaircaseRun:
    ascending: StaircaseState
    descending: StaircaseState
    trials: list[tuple[str, float, str]] = field(default_factory=list)  # (series, value, response)

    @property
    def estimate(self) -> float:
        return staircase_estimate(self.ascending, self.descending)

    @property
    def reversal_count(self) -> int:
        return len(self.ascending.reversals) + len(self.descending.reversals)


def run_interleaved(model: ObserverModel, order: str = "alternate", max_trials: int = 10_000) -> StaircaseRun:
    """Drive both series to completion, alternating or in seeded random order."""
    if order not in ("alternate", "random"):
        raise ValueError("order must be 'alternate' or 'random'")
    rng = np.random.default_rng(model.seed)
    states = {"ascending": new_staircase("ascending"), "descending": new_staircase("descending")}
    trials = []
    turn = 0
    while not all(s.finished for s in states.values()):
        if len(trials) >= max_trials:
            raise StateError(f"staircase did not finish within {max_trials} trials")
        open_series = [k for k in ("ascending", "descending") if not states[k].finished]
        if order == "random":
            name = open_series[int(rng.integers(len(open_series)))]
        else:
            name = open_series[turn % len(open_series)]
            turn += 1
        s = states[name]
        yes = s.current >= model.threshold
        if model.lapse_rate and rng.random() < model.lapse_rate:
            yes = not yes
        trials.append((name, s.current, "yes" if yes else "no"))
        states[name] = staircase_next(s, yes)
    return StaircaseRun(states["ascending"], states["descending"], trials)


def run_observer(model: ObserverModel, procedure: str = "interleaved-staircase", order: str = "alternate") -> float:
    if procedure != "interleaved-staircase":
        raise ValueError(f"unknown procedure {procedure!r}")
    return run_interleaved(model, order).estimate


# -- trial schedules -----------------------------------------------------------

VIBRATION_TYPES = ("S-30Hz", "S-150Hz", "S-Mix1", "S-Mix2")
DISCRIMINATION_SET = ("S-LM", "S-30Hz-w", "S-30Hz-s", "S-150Hz-w", "S-150Hz-s", "S-Mix2")
MATERIALS = ("glass marble", "cotton fabric", "sandpaper #100", "artificial turf")
EXP3_REFERENCE = "S-30Hz-s"
EXP3_REFERENCE_A_MAX = 0.9


@dataclass(frozen=True)
class Trial:
    block: str
    stimulus: str
    value: float | str  # A^AM for exp2/exp3, material for exp4
    repetition: int
    reference: str = ""
    duration: float = 1.0
    a_max: float = 1.0


@dataclass(frozen=True)
class TrialSchedule:
    experiment: str
    trials: tuple[Trial, ...]
    seed: int

    def __len__(self):
        return len(self.trials)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "block", "stimulus", "value", "repetition", "reference", "duration_s", "a_max"])
            for i, t in enumerate(self.trials):
                w.writerow([i, t.block, t.stimulus, t.value, t.repetition, t.reference, t.duration, t.a_max])


def schedule(experiment: str, seed: int = 0, a_max: dict[str, float] | None = None) -> TrialSchedule:
    """Seeded trial order for ``exp2``, ``exp3`` or ``exp4``.

    ``a_max`` overrides per-stimulus output level (the intensity equalisation
    done before discrimination); unspecified stimuli use the preset value,
    except the discrimination reference which defaults to 0.9.
    """
    rng = np.random.default_rng(seed)
    levels = dict(a_max or {})
    trials: list[Trial] = []
    if experiment == "exp2":
        steps = [i / 10 for i in range(11)]
        for block in ("vibration", "pressure"):
            for stim in rng.permutation(VIBRATION_TYPES):
                stim = str(stim)
                ref = f"{stim} a_am=1 static-foci" if block == "vibration" else "S-LM"
                for value in rng.permutation(steps):
                    trials.append(Trial(block, stim, float(value), 0, ref, 1.0, levels.get(stim, 1.0)))
    elif experiment == "exp3":
        levels.setdefault(EXP3_REFERENCE, EXP3_REFERENCE_A_MAX)
        pool = [(s, r) for s in DISCRIMINATION_SET for r in range(2)]
        for idx in rng.permutation(len(pool)):
            s, r = pool[idx]
            trials.append(Trial("discrimination", s, preset(s).a_am, r, s, 0.5, levels.get(s, preset(s).a_max)))
    elif experiment == "exp4":
        stroke = 0.07 / 0.018
        pool = [(s, m) for s in DISCRIMINATION_SET + ("control",) for m in MATERIALS]
        for idx in rng.permutation(len(pool)):
            s, m = pool[idx]
            lvl = levels.get(s, 1.0 if s == "control" else preset(s).a_max)
            trials.append(Trial("texture", s, m, 0, m, stroke, lvl))
    else:
        raise ValueError(f"unknown experiment {experiment!r}; use exp2, exp3 or exp4")
    return TrialSchedule(experiment, tuple(trials), seed)


# -- intensity fits ------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    model: str
    params: tuple[float, ...]  # (a, b) or (a, b, c)
    r_squared: float
    converged: bool = True
    message: str = ""

    def predict(self, x):
        x = np.asarray(x, float)
        if self.model == "linear":
            a, b = self.params
            return a * x + b
        a, b, c = self.params
        return c * np.exp(a * x) + b


def _points(points) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise FitError("points must be a sequence of (x, intensity) pairs")
    return arr[:, 0], arr[:, 1]


def _r_squared(y, pred) -> float:
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    scale = max(float(np.sum(y ** 2)), 1.0)
    if ss_tot <= 1e-24 * scale:
        # constant data: a perfect fit counts as R^2 = 1
        return 1.0 if ss_res <= 1e-20 * scale else 0.0
    return 1.0 - ss_res / ss_tot


def fit_linear(points) -> FitResult:
    """Least squares I = a x + b."""
    x, y = _points(points)
    if len(x) < 2 or np.ptp(x) == 0:
        raise FitError("linear fit needs at least two distinct x values")
    design = np.column_stack([x, np.ones_like(x)])
    (a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    return FitResult("linear", (float(a), float(b)), _r_squared(y, a * x + b))


def _exp_linear_part(a: float, x, y, x_ref: float):
    basis = np.exp(a * (x - x_ref))
    design = np.column_stack([basis, np.ones_like(x)])
    (c_ref, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    sse = float(np.sum((design @ np.array([c_ref, b]) - y) ** 2))
    return float(c_ref * np.exp(-a * x_ref)), float(b), sse


def fit_exponential(points, a_bounds: tuple[float, float] = (-50.0, 50.0)) -> FitResult:
    """Least squares I = c exp(a x) + b.

    ``a`` is first searched on a log-spaced grid, with (b, c) solved in
    closed form per candidate; ties go to the smaller |a|. The best candidate
    is then polished jointly in (a, b, c).
    """
    x, y = _points(points)
    if len(x) < 3 or np.ptp(x) == 0:
        raise FitError("exponential fit needs at least three points with distinct x values")
    lo, hi = a_bounds
    mags = np.logspace(-4, np.log10(max(abs(lo), abs(hi))), 600)
    grid = np.concatenate([[0.0], mags, -mags])
    grid = grid[(grid >= lo) & (grid <= hi)]
    grid = grid[np.argsort(np.abs(grid), kind="stable")]

    def ref(a):
        return x.max() if a > 0 else x.min()

    best = None
    for a in grid:
        c, b, sse = _exp_linear_part(a, x, y, ref(a))
        if best is None or sse < best[3] * (1 - 1e-12) - 1e-300:
            best = (float(a), b, c, sse)
    a0, b0, c0, _ = best

    def resid(p):
        a, b, c = p
        return c * np.exp(a * x) + b - y

    # Near a = 0 the model degenerates to a line; skip polishing there.
    if a0 == 0.0:
        pred = c0 + b0 + 0 * x
        return FitResult("exponential", (0.0, b0, c0), _r_squared(y, pred), True, "degenerate: a = 0")
    try:
        sol = least_squares(resid, [a0, b0, c0], bounds=([lo, -np.inf, -np.inf], [hi, np.inf, np.inf]),
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    except ValueError as exc:
        return FitResult("exponential", (a0, b0, c0), _r_squared(y, c0 * np.exp(a0 * x) + b0), False,
                         f"polish failed ({exc}); returning best grid candidate")
    a, b, c = (float(v) for v in sol.x)
    # re-solve (b, c) exactly for the polished a
    c, b, _ = _exp_linear_part(a, x, y, ref(a))
    pred = c * np.exp(a * x) + b
    r2 = _r_squared(y, pred)
    if sol.status <= 0:
        return FitResult("exponential", (a, b, c), r2, False,
                         f"did not converge: {sol.message}; best grid candidate a={a0:.6g}")
    return FitResult("exponential", (a, b, c), r2)


def write_fit_csv(results: Sequence[tuple[str, FitResult]], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "model", "a", "b", "c", "r_squared", "converged"])
        for label, r in results:
            a, b = r.params[:2]
            c = r.params[2] if len(r.params) > 2 else ""
            w.writerow([label, r.model, repr(a), repr(b), repr(c) if c != "" else "", repr(r.r_squared), int(r.converged)])


def read_points_csv(path) -> dict[str, np.ndarray]:
    """Intensity data CSV with columns ``stimulus,a_am,intensity`` (stimulus optional)."""
    groups: dict[str, list[tuple[float, float]]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            groups.setdefault(row.get("stimulus") or "all", []).append((float(row["a_am"]), float(row["intensity"])))
    return {k: np.array(v) for k, v in groups.items()}


def write_estimates_csv(rows: Sequence[dict], path) -> None:
    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
