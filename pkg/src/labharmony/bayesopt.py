"""Gaussian-process optimization of fusion weights by expected improvement.

The surrogate is a squared-exponential GP with unit signal variance and
per-dimension length scales chosen by log-marginal-likelihood over the
grid {0.1, 0.3, 1, 3} (coordinate sweeps, inputs rescaled to the unit
cube). Acquisition is the classic closed form

    EI(x) = (mu - best) * Phi(z) + sigma * phi(z),   z = (mu - best) / sigma

with EI = 0 where sigma = 0. The tuner runs a fixed budget: an initial
Latin-hypercube design, then sequential EI proposals located by
multi-start local search from 256 seeded random points.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import erf

from .errors import ObjectiveFailure, UnfittedSurrogate, ValidationError
from .types import WEIGHT_BOUNDS, WeightVector

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

LENGTH_SCALE_GRID = (0.1, 0.3, 1.0, 3.0)


def norm_cdf(z):
    """Standard normal CDF, exact to double precision via erf."""
    return 0.5 * (1.0 + erf(np.asarray(z, dtype=np.float64) / _SQRT2))


def norm_pdf(z):
    z = np.asarray(z, dtype=np.float64)
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


@dataclass(frozen=True)
class Observation:
    """One evaluated configuration; the objective is an MRR in [0, 1]."""

    theta: tuple[float, ...]
    objective: float

    def __post_init__(self):
        if not (0.0 <= self.objective <= 1.0) or not math.isfinite(self.objective):
            raise ValidationError(
                f"objective must lie in [0, 1], got {self.objective}"
            )


@dataclass(frozen=True)
class TunerConfig:
    """Search bounds and budget of one tuning run."""

    bounds: tuple[tuple[float, float], ...] = WEIGHT_BOUNDS
    budget: int = 120
    n_initial: int = 20
    seed: int = 0
    noise: float = 1e-6
    n_starts: int = 256

    def __post_init__(self):
        if not (self.budget >= self.n_initial >= 2):
            raise ValidationError(
                f"need budget >= n_initial >= 2, got {self.budget}/{self.n_initial}"
            )
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValidationError(f"degenerate bound ({lo}, {hi})")

    @property
    def dim(self) -> int:
        return len(self.bounds)


class GpSurrogate:
    """Squared-exponential GP over a box domain, inputs scaled to [0, 1]^d."""

    def __init__(self, bounds, noise: float = 1e-6,
                 length_scale_grid=LENGTH_SCALE_GRID):
        self.bounds = np.asarray(bounds, dtype=np.float64)
        self.noise = noise
        self.length_scale_grid = tuple(length_scale_grid)
        self._fitted = False

    # -- fitting ---------------------------------------------------------

    def _to_unit(self, X: np.ndarray) -> np.ndarray:
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return (np.atleast_2d(X) - lo) / (hi - lo)

    @staticmethod
    def _kernel(Xa: np.ndarray, Xb: np.ndarray, scales: np.ndarray) -> np.ndarray:
        diff = Xa[:, None, :] - Xb[None, :, :]
        return np.exp(-0.5 * np.sum((diff / scales) ** 2, axis=-1))

    def _factorize(self, scales: np.ndarray):
        K = self._kernel(self._X, self._X, scales)
        n = K.shape[0]
        jitter = self.noise
        for _ in range(8):
            try:
                L = np.linalg.cholesky(K + jitter * np.eye(n))
                return L, jitter
            except np.linalg.LinAlgError:
                jitter *= 10.0
        raise ValidationError("GP kernel matrix is not positive definite")

    def _log_marginal(self, scales: np.ndarray) -> float:
        L, _ = self._factorize(scales)
        alpha = np.linalg.solve(L.T, np.linalg.solve(L, self._yc))
        n = len(self._yc)
        return float(
            -0.5 * self._yc @ alpha
            - np.sum(np.log(np.diag(L)))
            - 0.5 * n * math.log(2.0 * math.pi)
        )

    def fit(self, thetas, objectives, refit_scales: bool = True) -> "GpSurrogate":
        """Condition on observations; optionally re-select length scales.

        With ``refit_scales=False`` the previously chosen scales are kept
        and only the factorization is refreshed (cheap incremental path).
        """
        X = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        y = np.asarray(objectives, dtype=np.float64)
        if X.shape[0] == 0:
            raise UnfittedSurrogate("no observations to fit")
        self._X = self._to_unit(X)
        self._y_mean = float(y.mean())
        self._yc = y - self._y_mean
        d = X.shape[1]

        scales = getattr(self, "length_scales_", np.ones(d)).copy()
        if refit_scales and X.shape[0] >= 3:
            # Coordinate sweeps over the length-scale grid.
            for _ in range(2):
                for j in range(d):
                    best_v, best_lml = scales[j], -np.inf
                    for v in self.length_scale_grid:
                        scales[j] = v
                        lml = self._log_marginal(scales)
                        if lml > best_lml:
                            best_v, best_lml = v, lml
                    scales[j] = best_v
        self.length_scales_ = scales
        self._L, self.jitter_ = self._factorize(scales)
        self._alpha = solve_triangular(
            self._L.T, solve_triangular(self._L, self._yc, lower=True), lower=False
        )
        self._fitted = True
        return self

    # -- prediction --------------------------------------------------------

    def posterior(self, thetas) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and standard deviation at query points (batched)."""
        if not self._fitted:
            raise UnfittedSurrogate("call fit() before posterior()")
        Xq = self._to_unit(np.asarray(thetas, dtype=np.float64))
        Ks = self._kernel(Xq, self._X, self.length_scales_)
        mu = Ks @ self._alpha + self._y_mean
        v = solve_triangular(self._L, Ks.T, lower=True)
        var = 1.0 - np.sum(v * v, axis=0)
        var = np.maximum(var, 0.0)
        return mu, np.sqrt(var)


def _as_array(theta) -> np.ndarray:
    if isinstance(theta, WeightVector):
        return np.asarray(theta.as_tuple(), dtype=np.float64)
    return np.asarray(theta, dtype=np.float64)


def expected_improvement(surrogate: GpSurrogate, theta, best: float):
    """Closed-form EI of one point or a batch against the incumbent."""
    x = _as_array(theta)
    single = x.ndim == 1
    mu, sigma = surrogate.posterior(np.atleast_2d(x))
    improve = mu - best
    ei = np.zeros_like(mu)
    pos = sigma > 0.0
    z = np.divide(improve, sigma, out=np.zeros_like(mu), where=pos)
    ei[pos] = improve[pos] * norm_cdf(z[pos]) + sigma[pos] * norm_pdf(z[pos])
    ei = np.maximum(ei, 0.0)
    return float(ei[0]) if single else ei


def propose_next(surrogate: GpSurrogate, cfg: TunerConfig,
                 best: float | None = None,
                 rng: np.random.Generator | None = None) -> np.ndarray:
    """Approximate argmax of EI over the bounds.

    Multi-start search: EI is evaluated on ``cfg.n_starts`` seeded random
    points, then the best seeds are refined by shrinking Gaussian
    neighborhood sampling. Always returns a point inside the bounds.
    """
    if not surrogate._fitted:
        raise UnfittedSurrogate("call fit() before propose_next()")
    if best is None:
        best = float((surrogate._yc + surrogate._y_mean).max())
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    lo = surrogate.bounds[:, 0]
    hi = surrogate.bounds[:, 1]
    span = hi - lo

    d = len(lo)
    X = rng.uniform(lo, hi, size=(cfg.n_starts, d))
    ei = expected_improvement(surrogate, X, best)
    order = np.argsort(-ei)[:8]

    # Refine the best seeds in lockstep: per-start shrinking Gaussian
    # neighborhoods, all starts batched into one posterior call per round.
    m = len(order)
    xs = X[order].copy()
    cur = ei[order].astype(np.float64)
    widths = np.full(m, 0.25)
    per_round = 24
    for _ in range(44):
        if np.all(widths < 1e-6):
            break
        noise = rng.standard_normal((m, per_round, d))
        samples = xs[:, None, :] + noise * (widths[:, None, None] * span)
        np.clip(samples, lo, hi, out=samples)
        vals = expected_improvement(
            surrogate, samples.reshape(m * per_round, d), best
        ).reshape(m, per_round)
        j = np.argmax(vals, axis=1)
        v = vals[np.arange(m), j]
        improved = v > cur + 1e-12 + 1e-6 * np.abs(cur)
        xs[improved] = samples[np.arange(m), j][improved]
        cur[improved] = v[improved]
        widths[~improved] *= 0.5
    k = int(np.argmax(cur))
    return np.clip(xs[k], lo, hi)


@dataclass
class TuneResult:
    best_theta: tuple[float, ...]
    best_value: float
    trace: list[Observation] = field(default_factory=list)


def tune(objective, cfg: TunerConfig, extra_designs=None) -> TuneResult:
    """Maximize a deterministic objective in [0, 1] over the bounds.

    Runs ``cfg.n_initial`` Latin-hypercube designs (prepended with any
    ``extra_designs``, e.g. known-good anchors), then EI proposals up to
    ``cfg.budget`` total evaluations. Reproducible for a fixed seed.
    """
    rng = np.random.default_rng(cfg.seed)
    lo = np.array([b[0] for b in cfg.bounds])
    hi = np.array([b[1] for b in cfg.bounds])
    d = cfg.dim

    anchors = [np.clip(np.asarray(x, dtype=np.float64), lo, hi)
               for x in (extra_designs or [])][: cfg.budget - 2]

    # Latin hypercube initial design.
    n_lhs = max(2, cfg.n_initial - len(anchors))
    strata = np.empty((n_lhs, d))
    for j in range(d):
        perm = rng.permutation(n_lhs)
        strata[:, j] = (perm + rng.uniform(size=n_lhs)) / n_lhs
    designs = anchors + list(lo + strata * (hi - lo))[: cfg.budget - len(anchors)]

    def evaluate(x: np.ndarray) -> Observation:
        theta = tuple(float(v) for v in x)
        try:
            value = float(objective(np.asarray(theta)))
        except Exception as exc:  # noqa: BLE001 - rewrapped with the offending theta
            raise ObjectiveFailure(theta, exc) from exc
        return Observation(theta=theta, objective=value)

    trace = [evaluate(x) for x in designs]

    surrogate = GpSurrogate(cfg.bounds, noise=cfg.noise)
    while len(trace) < cfg.budget:
        X = [obs.theta for obs in trace]
        y = [obs.objective for obs in trace]
        # Length-scale selection is the expensive part of the fit; refresh
        # it every few observations and just recondition in between.
        surrogate.fit(X, y, refit_scales=(len(trace) % 5 == 0) or len(trace) <= cfg.n_initial + 1)
        proposal = propose_next(surrogate, cfg, best=max(y), rng=rng)
        trace.append(evaluate(proposal))

    best = max(trace, key=lambda obs: obs.objective)
    return TuneResult(best_theta=best.theta, best_value=best.objective, trace=trace)


def tune_weights(objective, cfg: TunerConfig | None = None) -> tuple[WeightVector, float, list[Observation]]:
    """Tune over the standard fusion-weight box; objective takes a WeightVector."""
    cfg = cfg or TunerConfig()
    if cfg.bounds != WEIGHT_BOUNDS:
        raise ValidationError("tune_weights requires the standard weight bounds")
    result = tune(lambda x: objective(WeightVector.from_sequence(x)), cfg)
    return WeightVector.from_sequence(result.best_theta), result.best_value, result.trace


def write_trace(path, trace: list[Observation]) -> None:
    """Persist a tuning trace as JSON-lines with a running incumbent."""
    incumbent = -math.inf
    with open(path, "w", encoding="utf-8") as handle:
        for i, obs in enumerate(trace):
            incumbent = max(incumbent, obs.objective)
            handle.write(json.dumps({
                "iteration": i,
                "theta": list(obs.theta),
                "objective": obs.objective,
                "incumbent": incumbent,
            }) + "\n")
