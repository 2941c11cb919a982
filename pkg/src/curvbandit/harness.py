"""Episode runner, pseudo-regret curves, log-log scaling fits and experiment configs."""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats
from sklearn.base import clone

from ._validation import check_rng
from .environments import (
    GaussianLbParams,
    LossSequence,
    gen_ball_noisy,
    gen_gaussian_lb,
    gen_low_variation,
    gen_sparse,
    gen_starved_bernoulli,
    info_diagnostic,
    starved_wrap,
)
from .exceptions import ConvergenceError
from .strategies import LpBallBandit, SparseMAB, UniformExploreCommit, VariationMAB, holder_extremizer

CSV_COLUMNS = ("t", "cum_player", "cum_best", "regret")


# ---------------------------------------------------------------------------
# regret curves
# ---------------------------------------------------------------------------


@dataclass
class RegretCurve:
    cum_player: np.ndarray
    cum_best: np.ndarray
    seed: object = None
    config_hash: str = ""
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.cum_player = np.asarray(self.cum_player, dtype=float)
        self.cum_best = np.asarray(self.cum_best, dtype=float)
        if self.cum_player.shape != self.cum_best.shape:
            raise ValueError("player and comparator curves differ in length")
        if not (np.all(np.isfinite(self.cum_player)) and np.all(np.isfinite(self.cum_best))):
            raise ValueError("regret curve has non-finite entries")

    @property
    def regret(self):
        return self.cum_player - self.cum_best

    @property
    def final_regret(self):
        return float(self.regret[-1])

    @property
    def T(self):
        return self.cum_player.size

    def to_csv(self, path):
        head = {"seed": self.seed, "config_hash": self.config_hash, "extras": self.extras}
        table = np.column_stack([np.arange(1, self.T + 1), self.cum_player, self.cum_best, self.regret])
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# " + json.dumps(head, default=float) + "\n")
            fh.write(",".join(CSV_COLUMNS) + "\n")
            np.savetxt(fh, table, fmt=["%d", "%.17g", "%.17g", "%.17g"], delimiter=",")

    @classmethod
    def from_csv(cls, path):
        with open(path, encoding="utf-8") as fh:
            head = json.loads(fh.readline()[2:])
            fh.readline()
            table = np.loadtxt(fh, delimiter=",", ndmin=2)
        return cls(table[:, 1], table[:, 2], head["seed"], head["config_hash"], head.get("extras", {}))


# ---------------------------------------------------------------------------
# comparators
# ---------------------------------------------------------------------------


def best_fixed_loss(seq, domain="simplex", p=None, mode="final"):
    """Cumulative loss of the best fixed action, per round.

    ``mode="final"`` fixes the comparator that is best against the whole
    sequence and returns its running loss; ``mode="prefix"`` re-optimizes
    the comparator at every round (for plotting only).

    Domains: ``"simplex"`` (best arm), ``"lp-ball"`` (unit l_p ball, needs
    ``p``). Gaussian lower-bound sequences always use the closed-form
    expected-loss comparator over their own body.
    """
    if mode not in ("final", "prefix"):
        raise ValueError(f"unknown comparator mode {mode!r}")
    L = seq.losses
    T = L.shape[0]
    if seq.kind == "gaussian-lb":
        return seq.certificate["comparator_per_round"] * np.arange(1, T + 1)
    if domain == "simplex":
        if mode == "final":
            return np.cumsum(L[:, int(np.argmin(L.sum(axis=0)))])
        return np.cumsum(L, axis=0).min(axis=1)
    if domain == "lp-ball":
        if p is None:
            raise ValueError("the l_p ball comparator needs p")
        q = p / (p - 1.0)
        if mode == "final":
            return np.cumsum(L @ holder_extremizer(L.sum(axis=0), q))
        return -np.linalg.norm(np.cumsum(L, axis=0), q, axis=1)
    raise ValueError(f"unknown domain {domain!r}")


def _played_vectors(strategy, n):
    if hasattr(strategy, "actions_"):
        return strategy.actions_
    return np.eye(n)[strategy.arms_]


def run_episode(strategy, seq, seed=None, debug=False, config_hash=""):
    """Play ``strategy`` against ``seq`` and return its regret curve.

    ``debug`` switches on the strategy's audit mode (per-round invariant
    checks plus the be-the-leader audit) when it has one. On the Gaussian
    construction the player is charged its expected loss, which is what the
    comparator there measures.
    """
    if not isinstance(seq, LossSequence):
        seq = LossSequence(seq)
    strategy = clone(strategy)
    if strategy.horizon is not None and strategy.horizon != seq.T:
        raise ValueError(f"strategy horizon {strategy.horizon} != sequence length {seq.T}")
    if debug and "audit" in strategy.get_params():
        strategy.set_params(audit=True)
    try:
        strategy.fit(seq.losses, check_rng(seed))
    except ConvergenceError as exc:
        round_ = exc.diagnostics.get("round", "?")
        raise ConvergenceError(f"round {round_}: {exc}", **exc.diagnostics) from exc
    extras = {}
    if seq.kind == "gaussian-lb":
        played = _played_vectors(strategy, seq.n)
        per_round = played @ seq.certificate["mean_loss"]
        params = GaussianLbParams(seq.params["n"], seq.params["T"], seq.params["p"], seq.params["C"], np.array(seq.params["xi"]))
        extras["information"] = float(sum(info_diagnostic(a, params) for a in played))
    else:
        per_round = strategy.suffered_
    if hasattr(strategy, "explored_"):
        extras["explorations"] = int(np.sum(strategy.explored_))
    if hasattr(strategy, "audit_"):
        extras["audit_slack"] = float(strategy.audit_.slack)
    cum_best = best_fixed_loss(seq, strategy.domain, getattr(strategy, "p", None))
    return RegretCurve(np.cumsum(per_round), cum_best, _seed_tag(seed), config_hash, extras)


def _seed_tag(seed):
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    if isinstance(seed, np.random.SeedSequence):
        return seed.entropy if not seed.spawn_key else [seed.entropy, *seed.spawn_key]
    return None


# ---------------------------------------------------------------------------
# scaling fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    stderr: float
    intercept: float


def scaling_fit(points):
    """Least-squares slope of ``log(value)`` against ``log(scale)``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValueError("need at least three (scale, value) points")
    if np.any(pts <= 0.0):
        raise ValueError("scales and values must be positive for a log-log fit")
    fit = stats.linregress(np.log(pts[:, 0]), np.log(pts[:, 1]))
    return ScalingFit(float(fit.slope), float(fit.stderr), float(fit.intercept))


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------


def sparse_regret_bound(n, T, L):
    """``10 sqrt(L log n) + 20 n log T``."""
    return 10.0 * math.sqrt(L * math.log(n)) + 20.0 * n * math.log(T)


def lp_regret_bound(n, T, p):
    """``2^(6/(p-1)) sqrt(n T log T)``."""
    return 2.0 ** (6.0 / (p - 1.0)) * math.sqrt(n * T * math.log(T))


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


STRATEGIES = {
    "sparse-mab": SparseMAB,
    "variation-mab": VariationMAB,
    "lp-ball": LpBallBandit,
    "explore-commit": UniformExploreCommit,
}


def _env_sparse(n, T, rng, s=2, style="hidden-good-arm"):
    return gen_sparse(n, T, int(s), style, rng)


def _env_low_variation(n, T, rng, Q=100.0, delta=0.5, base="independent"):
    return gen_low_variation(n, T, float(Q), rng, delta=delta, base=base)


def _env_ball_noisy(n, T, rng, p=1.5, noise=0.5):
    return gen_ball_noisy(n, T, float(p), rng, noise=noise)


def _env_gaussian(n, T, rng, p=3.0, C=0.1):
    return gen_gaussian_lb(GaussianLbParams(n, T, float(p), float(C)), rng)


def _env_starved(n, T, rng, epsilon=None):
    if epsilon is None:
        epsilon = min(0.25, (n / T) ** (1.0 / 3.0))
    return gen_starved_bernoulli(n, T, float(epsilon), rng)


ENVIRONMENTS = {
    "sparse": _env_sparse,
    "low-variation": _env_low_variation,
    "ball-noisy": _env_ball_noisy,
    "gaussian-lb": _env_gaussian,
    "starved-bernoulli": _env_starved,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One strategy on one environment over a list of seeds."""

    strategy: str
    env: str
    n: int
    T: int
    seeds: tuple = (0,)
    strategy_params: dict = field(default_factory=dict)
    env_params: dict = field(default_factory=dict)
    debug: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {sorted(STRATEGIES)}")
        if self.env not in ENVIRONMENTS:
            raise ValueError(f"unknown environment {self.env!r}; choose from {sorted(ENVIRONMENTS)}")
        seeds = tuple(int(s) for s in self.seeds)
        if len(set(seeds)) != len(seeds):
            raise ValueError("seeds must be distinct")
        if not seeds:
            raise ValueError("need at least one seed")
        object.__setattr__(self, "seeds", seeds)

    def identity(self):
        """Everything that determines a single episode except the seed."""
        d = asdict(self)
        del d["seeds"]
        return d

    def config_hash(self):
        blob = json.dumps(self.identity(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_params(self, **changes):
        """Copy with ``changes`` routed to n, T, the strategy or the environment."""
        fields = {"n": self.n, "T": self.T}
        sp, ep = dict(self.strategy_params), dict(self.env_params)
        for key, value in changes.items():
            if key in fields:
                fields[key] = int(value)
            elif key in _strategy_keys(self.strategy):
                sp[key] = value
            else:
                ep[key] = value
        return ExperimentConfig(self.strategy, self.env, fields["n"], fields["T"], self.seeds, sp, ep, self.debug)


def _strategy_keys(name):
    return set(STRATEGIES[name]().get_params())


def build_strategy(config, seq):
    """Instantiate the configured strategy, filling budgets from the sequence certificate."""
    params = dict(config.strategy_params)
    params.setdefault("horizon", seq.T)
    cert = seq.certificate
    if config.strategy == "sparse-mab" and params.get("loss_budget") is None and cert.get("L2sum_bound"):
        params["loss_budget"] = cert["L2sum_bound"]
    if config.strategy == "variation-mab" and params.get("variation_budget") is None and "variation_bound" in cert:
        params["variation_budget"] = cert["variation_bound"]
    if config.strategy == "lp-ball" and "p" not in params:
        env_p = seq.params.get("p")
        # bodies with p > 2 contain the Euclidean ball, which the strategy then plays in
        params["p"] = 2.0 if env_p is None or env_p > 2.0 else env_p
    return STRATEGIES[config.strategy](**params)


def episode_streams(seed):
    """Independent environment and strategy streams derived from one integer seed."""
    env_ss, strat_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(env_ss), np.random.default_rng(strat_ss)


def make_sequence(config, seed):
    env_rng, _ = episode_streams(seed)
    seq = ENVIRONMENTS[config.env](config.n, config.T, env_rng, **config.env_params)
    return LossSequence(seq.losses, seq.kind, seq.params, seed, seq.certificate)


def run_seed(config, seed):
    seq = make_sequence(config, seed)
    strategy = build_strategy(config, seq)
    _, strat_rng = episode_streams(seed)
    curve = run_episode(strategy, seq, strat_rng, debug=config.debug, config_hash=config.config_hash())
    curve.seed = int(seed)
    return curve


def run_starved_seed(config, seed):
    """Round-by-round episode under the starved protocol; extras hold the exploration count."""
    seq = make_sequence(config, seed)
    strategy = build_strategy(config, seq)
    _, strat_rng = episode_streams(seed)
    n = seq.n
    wrapped = starved_wrap(strategy).reset(n, strat_rng)
    suffered = np.array([wrapped.play_round(loss)[1] for loss in seq.losses])
    cum_best = best_fixed_loss(seq, strategy.domain, getattr(strategy, "p", None))
    extras = {"explorations": wrapped.explorations_}
    return RegretCurve(np.cumsum(suffered), cum_best, int(seed), config.config_hash(), extras)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    curves: list

    @property
    def final_regrets(self):
        return np.array([c.final_regret for c in self.curves])

    def summary(self):
        r = self.final_regrets
        cfg = self.config
        out = {
            "strategy": cfg.strategy,
            "env": cfg.env,
            "n": cfg.n,
            "T": cfg.T,
            "seeds": len(r),
            "config_hash": cfg.config_hash(),
            "mean_regret": float(r.mean()),
            "stderr_regret": float(r.std(ddof=1) / math.sqrt(r.size)) if r.size > 1 else 0.0,
            "min_regret": float(r.min()),
            "max_regret": float(r.max()),
        }
        for key in ("explorations", "information"):
            vals = [c.extras[key] for c in self.curves if key in c.extras]
            if vals:
                out[f"mean_{key}"] = float(np.mean(vals))
        slacks = [c.extras["audit_slack"] for c in self.curves if "audit_slack" in c.extras]
        if slacks:
            out["min_audit_slack"] = float(np.min(slacks))
        for key, value in sorted({**cfg.env_params, **cfg.strategy_params}.items()):
            out[f"param.{key}"] = value
        return out

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for curve in self.curves:
            curve.to_csv(out / f"curve_seed{curve.seed}.csv")
        write_summary(out / "summary.txt", self.summary())


def write_summary(path, summary):
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in summary.items():
            fh.write(f"{key}={_fmt(value)}\n")


def read_summary(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if "=" in line:
                key, value = line.rstrip("\n").split("=", 1)
                out[key] = value
    return out


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_experiment(config, starved=False):
    """Run every seed in order; results are sorted by seed."""
    runner = run_starved_seed if starved else run_seed
    curves = [runner(config, seed) for seed in sorted(config.seeds)]
    return ExperimentResult(config, curves)


@dataclass
class SweepResult:
    name: str
    values: list
    results: list
    fit: ScalingFit

    def summary(self):
        out = {"vary": self.name, "values": ",".join(str(v) for v in self.values)}
        for v, res in zip(self.values, self.results):
            s = res.summary()
            out[f"mean_regret[{v}]"] = s["mean_regret"]
            out[f"stderr_regret[{v}]"] = s["stderr_regret"]
        out["slope"] = self.fit.slope
        out["slope_stderr"] = self.fit.stderr
        return out


def sweep(config, name, values, starved=False):
    """Re-run ``config`` for each value of parameter ``name`` and fit the log-log slope."""
    results = [run_experiment(config.with_params(**{name: v}), starved) for v in values]
    points = [(float(v), res.final_regrets.mean()) for v, res in zip(values, results)]
    return SweepResult(name, list(values), results, scaling_fit(points))
