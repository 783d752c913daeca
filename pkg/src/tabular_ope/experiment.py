"""Seeded Monte Carlo harness for the horizon- and sample-scaling studies.

Each replication ``k`` at grid point ``(H, n)`` draws its dataset from the
substream ``derive_seed(seed, H, n, k)``, so results depend only on the
configuration, never on worker count or scheduling order.
"""

from __future__ import annotations

import csv
import io
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy import stats

from ._rng import STREAM_SIM_MDP, as_key, derive_seed, uniform_array
from .data import rollout
from .estimators import estimate_model, opema_value
from .hard import BanditMDPSpec, build_gated_mdp
from .mdp import Policy, TabularMDP, evaluate, load_policy
from .planning import backward_induction

KINDS = ("fix-ope", "suboptimality", "empirical-gap", "n-scaling", "hard-instance")
CSV_COLUMNS = (
    "kind", "H", "n", "K",
    "rmse_fix", "se_fix", "rmse_sub", "se_sub", "rmse_empirical", "se_empirical",
)

# the two a_2 kernels: rows are (s_0, s_1) next-state probabilities
_KERNELS = (
    np.array([[0.5, 0.5], [0.25, 0.75]]),
    np.array([[0.75, 0.25], [0.5, 0.5]]),
)


def build_sim_mdp(H: int, seed: int = 0) -> tuple[TabularMDP, Policy]:
    """Two-state, two-action non-stationary MDP with a uniform logging policy.

    Action ``a_1`` (index 0) keeps the current state. Action ``a_2`` follows one
    of two kernels per step, and every mean reward is one of 1/4, 2/4, 3/4, 1.
    Both are read off the counter-based sequence keyed by ``seed``: step ``t``
    uses counter ``8 t`` for the kernel bit and ``8 t + 1 .. 8 t + 4`` for the
    rewards of ``(s_0, a_1), (s_0, a_2), (s_1, a_1), (s_1, a_2)``.
    """
    if H < 2:
        raise ValueError(f"H must be >= 2, got {H}")
    key = as_key(seed)
    t = np.arange(H, dtype=np.uint64)
    u = uniform_array(key, np.uint64(STREAM_SIM_MDP), t[:, None] * np.uint64(8) + np.arange(5, dtype=np.uint64))
    kernel = (u[: H - 1, 0] >= 0.5).astype(int)
    P = np.zeros((H - 1, 2, 2, 2))
    P[:, 0, 0, 0] = 1.0
    P[:, 1, 0, 1] = 1.0
    for step, k in enumerate(kernel):
        P[step, :, 1, :] = _KERNELS[k]
    r = (1.0 + np.floor(4.0 * u[:, 1:5])).reshape(H, 2, 2) / 4.0
    mdp = TabularMDP(P=P, r=r, d1=np.array([0.5, 0.5]))
    return mdp, Policy.uniform(H, 2, 2)


@dataclass
class ExperimentConfig:
    kind: str = "suboptimality"
    horizons: tuple[int, ...] = (16, 32, 64, 128, 256, 512)
    n: int = 2048
    K: int = 100
    seed: int = 0
    target: str = "mu"
    n_grid: tuple[int, ...] | None = None
    workers: int = 1
    S: int = 4
    A: int = 2
    tau: float = 0.1
    d_m: float = 0.05
    out: str | None = None

    def problems(self) -> list[str]:
        out = []
        if self.kind not in KINDS:
            out.append(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        h = list(self.horizons)
        if not h or any(b <= a for a, b in zip(h, h[1:])):
            out.append(f"horizon grid must be non-empty and strictly increasing, got {h}")
        if self.K < 2:
            out.append(f"K must be >= 2, got {self.K}")
        if self.n < 1:
            out.append(f"n must be >= 1, got {self.n}")
        if self.n_grid is not None and (not self.n_grid or min(self.n_grid) < 1):
            out.append(f"n grid must contain positive sizes, got {self.n_grid}")
        if self.kind == "n-scaling" and not self.n_grid:
            out.append("n-scaling needs an n grid")
        if self.workers < 1:
            out.append("workers must be >= 1")
        return out

    def check(self) -> None:
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(self.n_grid) if self.n_grid else (self.n,)


@dataclass(frozen=True)
class RmseRow:
    kind: str
    H: int
    n: int
    K: int
    rmse_fix: float
    se_fix: float
    rmse_sub: float
    se_sub: float
    rmse_empirical: float
    se_empirical: float


@dataclass
class _Instance:
    mdp: TabularMDP
    mu: Policy
    target: Policy
    v_target: float
    v_star: float


def _instance(cfg: ExperimentConfig, H: int) -> _Instance:
    if cfg.kind == "hard-instance":
        spec = BanditMDPSpec(H_half=H, S=cfg.S, A=cfg.A, tau=cfg.tau, d_m=cfg.d_m)
        mdp, mu, _ = build_gated_mdp(spec, seed=derive_seed(cfg.seed, H))
    else:
        mdp, mu = build_sim_mdp(H, cfg.seed)
    star = backward_induction(mdp).policy
    if cfg.target == "mu":
        target = mu
    elif cfg.target == "optimal":
        target = star
    else:
        target = load_policy(cfg.target)
    return _Instance(mdp, mu, target, evaluate(mdp, target).v, evaluate(mdp, star).v)


def replicate(inst: _Instance, n: int, seed: int) -> tuple[float, float, float]:
    """Errors ``(v_hat^pi - v^pi, v^{pi_hat} - v*, v_hat^{pi_hat} - v^{pi_hat})`` for one dataset."""
    model = estimate_model(rollout(inst.mdp, inst.mu, n, seed))
    e_fix = opema_value(model, inst.target).v - inst.v_target
    pi_hat = backward_induction(model).policy
    v_true = evaluate(inst.mdp, pi_hat).v
    v_hat = evaluate(model, pi_hat).v
    return e_fix, v_true - inst.v_star, v_hat - v_true


def _rmse(e: np.ndarray) -> tuple[float, float]:
    sq = e * e
    rmse = float(np.sqrt(sq.mean()))
    if rmse == 0.0:
        return 0.0, 0.0
    se_mse = float(sq.std(ddof=1) / np.sqrt(len(e)))
    return rmse, se_mse / (2.0 * rmse)


def run_experiment(cfg: ExperimentConfig) -> list[RmseRow]:
    cfg.check()
    rows = []
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        for H in cfg.horizons:
            inst = _instance(cfg, H)
            for n in cfg.sizes:
                seeds = [derive_seed(cfg.seed, H, n, k) for k in range(cfg.K)]
                errs = np.array(list(pool.map(lambda s: replicate(inst, n, s), seeds)))
                fix, sub, emp = (_rmse(errs[:, j]) for j in range(3))
                rows.append(RmseRow(cfg.kind, H, n, cfg.K, *fix, *sub, *emp))
    return rows


def rows_to_csv(rows: list[RmseRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(row, c) for c in CSV_COLUMNS)])
    return buf.getvalue()


def write_csv(rows: list[RmseRow], path) -> None:
    Path(path).write_text(rows_to_csv(rows))


def read_csv(source) -> list[dict]:
    """Rows of a results CSV as dicts of floats (``kind`` kept as text)."""
    text = Path(source).read_text() if not isinstance(source, io.StringIO) else source.getvalue()
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        out.append({k: (v if k == "kind" else float(v)) for k, v in rec.items()})
    return out


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    slope_se: float
    intercept_se: float
    points: int
    excluded: int = 0


def loglog_slope(rows, column: str, x: str = "H") -> SlopeFit:
    """OLS fit of ``log(column)`` on ``log(x)``.

    ``rows`` is a CSV path or a list of row dicts / :class:`RmseRow`. Rows with
    a nonpositive value are dropped with a warning; at least three must remain.
    """
    if isinstance(rows, (str, Path)):
        rows = read_csv(rows)
    get = (lambda r, k: r[k]) if rows and isinstance(rows[0], dict) else getattr
    xs = np.array([float(get(r, x)) for r in rows])
    ys = np.array([float(get(r, column)) for r in rows])
    keep = (ys > 0) & (xs > 0)
    dropped = int((~keep).sum())
    if dropped:
        warnings.warn(f"dropping {dropped} row(s) with nonpositive {column!r}", RuntimeWarning, stacklevel=2)
    if keep.sum() < 3:
        raise ValueError(f"need at least 3 positive rows to fit a slope, have {int(keep.sum())}")
    fit = stats.linregress(np.log(xs[keep]), np.log(ys[keep]))
    return SlopeFit(
        float(fit.slope), float(fit.intercept), float(fit.stderr), float(fit.intercept_stderr),
        int(keep.sum()), dropped,
    )


CONFIG_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def parse_config_file(path) -> dict:
    """Flat ``key=value`` file; blank lines and ``#`` comments ignored."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        k, v = (p.strip() for p in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def coerce_config(values: dict) -> ExperimentConfig:
    """Build a config from string or typed values, e.g. parsed from a config file."""
    kw = {}
    for k, v in values.items():
        if k not in CONFIG_FIELDS:
            raise ValueError(f"unknown config key {k!r}")
        if v is None:
            continue
        if k in ("horizons", "n_grid"):
            kw[k] = tuple(int(x) for x in v.split(",")) if isinstance(v, str) else tuple(v)
        elif k in ("n", "K", "seed", "workers", "S", "A"):
            kw[k] = int(v)
        elif k in ("tau", "d_m"):
            kw[k] = float(v)
        else:
            kw[k] = v
    return ExperimentConfig(**kw)
