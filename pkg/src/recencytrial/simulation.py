"""Monte Carlo operating characteristics of the recency-based efficacy test.

Each replicate draws

1. ``N+ ~ Bin(N, p)`` and ``N- = N - N+``;
2. ``N_R ~ Bin(N+, P_R)``, ``frr_hat ~ Normal(frr, sd_frr^2)`` and
   ``mdri_hat ~ Normal(mdri, sd_mdri^2)``;
3. ``N_enroll ~ Bin(N-, r)`` and ``N_event ~ Poisson(tau lambda1 N_enroll)``
   with ``lambda1 = lambda0 * true_ratio``;

then forms both incidence estimates, their log-variance estimates and Z.

Reproducibility: replicates are generated in fixed blocks of
``BLOCK_SIZE``. Block ``b`` draws from a Philox stream keyed by
``SeedSequence(master_seed, spawn_key=(b,))``, and always draws a full
block, so replicate ``i`` depends only on ``(master_seed, i)`` and results
do not depend on how blocks are spread over workers.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .asymptotics import p_recent, z_variance
from .domain import DesignContext, HypothesisSpec
from .errors import SimulationError, ValidationError
from .estimators import kassanjee_incidence, kassanjee_log_variance

logger = logging.getLogger(__name__)

BLOCK_SIZE = 1024
DEGENERATE_WARN_RATE = 0.02

REPLICATE_COLUMNS = (
    "replicate", "n_positive", "n_recent", "frr_hat", "mdri_hat", "n_enrolled", "n_events",
    "lambda0_hat", "lambda1_hat", "v0_hat", "v1_hat", "z", "degenerate_lambda0",
    "degenerate_lambda1",
)


@dataclass(frozen=True)
class SimulationConfig:
    """One simulation cell.

    ``zero_rse_mode`` sets both assay RSEs to zero, so the assay estimates
    equal their true values in every replicate.
    """

    ctx: DesignContext
    hyp: HypothesisSpec
    true_ratio: float
    n_screened: int
    replicates: int
    master_seed: int = 0
    zero_rse_mode: bool = False
    legacy_inctools_variance: bool = False

    def __post_init__(self):
        if not (isinstance(self.replicates, int) and self.replicates >= 1):
            raise ValidationError(f"replicates must be a positive integer, got {self.replicates!r}")
        if not (isinstance(self.n_screened, int) and self.n_screened >= 1):
            raise ValidationError(f"n_screened must be a positive integer, got {self.n_screened!r}")
        if not (isinstance(self.master_seed, int) and 0 <= self.master_seed < 2 ** 64):
            raise ValidationError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed!r}")
        if not (self.true_ratio >= 0 and math.isfinite(self.true_ratio)):
            raise ValidationError(f"true_ratio must be >= 0, got {self.true_ratio}")

    @property
    def effective_ctx(self) -> DesignContext:
        return self.ctx.without_assay_uncertainty() if self.zero_rse_mode else self.ctx


@dataclass(frozen=True)
class ReplicateRecord:
    replicate: int
    n_positive: int
    n_recent: int
    frr_hat: float
    mdri_hat: float
    n_enrolled: int
    n_events: int
    lambda0_hat: float
    lambda1_hat: float
    v0_hat: float
    v1_hat: float
    z: float
    degenerate_lambda0: bool
    degenerate_lambda1: bool

    @property
    def degenerate(self) -> bool:
        return self.degenerate_lambda0 or self.degenerate_lambda1


@dataclass(frozen=True)
class SimulationReport:
    """Aggregate of a simulation cell.

    ``rejection_rate`` is computed over the non-degenerate replicates only;
    ``n_degenerate`` counts the rest. Moment fields are over non-degenerate
    replicates too, while ``mean_counts`` uses every replicate.
    """

    replicate_count: int
    n_degenerate: int
    n_rejected: int
    rejection_rate: float
    mean_log_lambda0: float
    var_log_lambda0: float
    mean_log_lambda1: float
    var_log_lambda1: float
    cov_log_lambdas: float
    corr_log_lambdas: float
    var_log_ratio: float
    mean_z: float
    var_z: float
    mean_counts: Dict[str, float]
    true_ratio: float
    n_screened: int
    master_seed: int

    @property
    def n_valid(self) -> int:
        return self.replicate_count - self.n_degenerate


@dataclass(frozen=True)
class Moment:
    estimate: float
    se: float


def _block_generator(master_seed: int, block: int) -> np.random.Generator:
    seq = np.random.SeedSequence(master_seed, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(seq))


def simulate_block(cfg: SimulationConfig, block: int) -> Dict[str, np.ndarray]:
    """All ``BLOCK_SIZE`` replicates of block ``block`` as column arrays."""
    ctx = cfg.effective_ctx
    a = ctx.assay
    rng = _block_generator(cfg.master_seed, block)
    n = cfg.n_screened
    size = BLOCK_SIZE
    pr = p_recent(ctx)

    n_pos = rng.binomial(n, ctx.prevalence_p, size)
    n_rec = rng.binomial(n_pos, pr)
    frr_hat = a.frr + a.frr_sd * rng.standard_normal(size)
    mdri_hat = a.mdri + a.mdri_sd * rng.standard_normal(size)
    n_neg = n - n_pos
    n_enr = rng.binomial(n_neg, ctx.enroll_rate_r)
    lambda1 = ctx.lambda0 * cfg.true_ratio
    n_ev = rng.poisson(ctx.followup_tau * lambda1 * n_enr)

    T = a.cutoff_T
    adjusted = n_rec - frr_hat * n_pos
    window = mdri_hat - frr_hat * T
    bad0 = (n_pos == 0) | (n_neg == 0) | (frr_hat < 0) | (window <= 0) | (adjusted <= 0)
    bad1 = n_ev == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        lam0 = kassanjee_incidence(n, n_pos, n_rec, frr_hat, mdri_hat, T)
        # assay SDs are the design values, not re-estimated per replicate
        v0 = kassanjee_log_variance(n, n_pos, n_rec, frr_hat, mdri_hat, T, a.frr_sd, a.mdri_sd,
                                    legacy_inctools_variance=cfg.legacy_inctools_variance)
        lam1 = n_ev / (ctx.followup_tau * n_enr)
        v1 = 1.0 / n_ev
        z = (np.log(lam1 / lam0) - math.log(cfg.hyp.r0)) / np.sqrt(v0 + v1)
    lam0[bad0] = np.nan
    v0[bad0] = np.nan
    lam1[bad1] = np.nan
    v1[bad1] = np.nan
    z[bad0 | bad1] = np.nan
    return {
        "replicate": block * BLOCK_SIZE + np.arange(size),
        "n_positive": n_pos, "n_recent": n_rec, "frr_hat": frr_hat, "mdri_hat": mdri_hat,
        "n_enrolled": n_enr, "n_events": n_ev, "lambda0_hat": lam0, "lambda1_hat": lam1,
        "v0_hat": v0, "v1_hat": v1, "z": z,
        "degenerate_lambda0": bad0, "degenerate_lambda1": bad1,
    }


def simulate_replicates(cfg: SimulationConfig, workers: int = 1) -> Dict[str, np.ndarray]:
    """Column arrays for replicates ``0 .. cfg.replicates - 1``."""
    n_blocks = -(-cfg.replicates // BLOCK_SIZE)
    if workers <= 1 or n_blocks == 1:
        blocks = [simulate_block(cfg, b) for b in range(n_blocks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(lambda b: simulate_block(cfg, b), range(n_blocks)))
    return {k: np.concatenate([blk[k] for blk in blocks])[:cfg.replicates] for k in blocks[0]}


def simulate_replicate(cfg: SimulationConfig, index: int) -> ReplicateRecord:
    """Record of replicate ``index``; identical to its row in any full run."""
    if not 0 <= index < cfg.replicates:
        raise ValidationError(f"replicate index {index} outside [0, {cfg.replicates})")
    block = simulate_block(cfg, index // BLOCK_SIZE)
    row = {k: v[index % BLOCK_SIZE].item() for k, v in block.items()}
    return ReplicateRecord(**row)


def _valid_mask(arrays) -> np.ndarray:
    return ~(arrays["degenerate_lambda0"] | arrays["degenerate_lambda1"])


def run_study(cfg: SimulationConfig, workers: int = 1,
              arrays: Optional[Dict[str, np.ndarray]] = None) -> SimulationReport:
    """Empirical rejection rate (``|Z| > z_{1 - alpha/2}``) and moments for one cell.

    Raises
    ------
    SimulationError
        If every replicate is degenerate.
    """
    if arrays is None:
        arrays = simulate_replicates(cfg, workers)
    ok = _valid_mask(arrays)
    n_valid = int(ok.sum())
    n_deg = cfg.replicates - n_valid
    if n_valid == 0:
        raise SimulationError(f"all {cfg.replicates} replicates are degenerate")
    if n_deg / cfg.replicates > DEGENERATE_WARN_RATE:
        logger.warning("%d of %d replicates degenerate (%.1f%%)", n_deg, cfg.replicates,
                       100 * n_deg / cfg.replicates)
    z = arrays["z"][ok]
    l0 = np.log(arrays["lambda0_hat"][ok])
    l1 = np.log(arrays["lambda1_hat"][ok])
    n_rej = int(np.sum(np.abs(z) > cfg.hyp.z_alpha))
    nan = float("nan")

    def var(x):
        # sample variance; undefined for a single replicate
        return float(x.var(ddof=1)) if n_valid > 1 else nan

    if n_valid > 1:
        cov = float(np.cov(l0, l1)[0, 1])
        sd = float(np.std(l0, ddof=1) * np.std(l1, ddof=1))
        corr = cov / sd if sd > 0 else float("nan")
    else:
        cov = corr = nan
    return SimulationReport(
        replicate_count=cfg.replicates,
        n_degenerate=n_deg,
        n_rejected=n_rej,
        rejection_rate=n_rej / n_valid,
        mean_log_lambda0=float(l0.mean()),
        var_log_lambda0=var(l0),
        mean_log_lambda1=float(l1.mean()),
        var_log_lambda1=var(l1),
        cov_log_lambdas=cov,
        corr_log_lambdas=corr,
        var_log_ratio=var(l1 - l0),
        mean_z=float(z.mean()),
        var_z=var(z),
        mean_counts={k: float(arrays[k].mean())
                     for k in ("n_positive", "n_recent", "n_enrolled", "n_events")},
        true_ratio=cfg.true_ratio,
        n_screened=cfg.n_screened,
        master_seed=cfg.master_seed,
    )


def _var_moment(x: np.ndarray) -> Moment:
    c = x - x.mean()
    m2 = float(np.mean(c ** 2))
    m4 = float(np.mean(c ** 4))
    return Moment(float(x.var(ddof=1)), math.sqrt(max(m4 - m2 ** 2, 0.0) / len(x)))


def moment_oracle(cfg: SimulationConfig, workers: int = 1) -> Dict[str, Moment]:
    """Empirical second moments with Monte Carlo standard errors.

    Keys: ``var_log_lambda0``, ``var_log_lambda1``, ``cov_log_lambdas``,
    ``corr_log_lambdas``, ``var_log_ratio``, ``var_z``, ``mean_z``. Intended
    for at least 1e5 replicates.
    """
    arrays = simulate_replicates(cfg, workers)
    ok = _valid_mask(arrays)
    n = int(ok.sum())
    if n < 2:
        raise SimulationError("fewer than two non-degenerate replicates")
    l0 = np.log(arrays["lambda0_hat"][ok])
    l1 = np.log(arrays["lambda1_hat"][ok])
    z = arrays["z"][ok]
    prod = (l0 - l0.mean()) * (l1 - l1.mean())
    cov = float(prod.sum() / (n - 1))
    corr = cov / float(np.std(l0, ddof=1) * np.std(l1, ddof=1))
    return {
        "var_log_lambda0": _var_moment(l0),
        "var_log_lambda1": _var_moment(l1),
        "cov_log_lambdas": Moment(cov, float(prod.std(ddof=1)) / math.sqrt(n)),
        "corr_log_lambdas": Moment(corr, (1 - corr ** 2) / math.sqrt(n)),
        "var_log_ratio": _var_moment(l1 - l0),
        "var_z": _var_moment(z),
        "mean_z": Moment(float(z.mean()), float(z.std(ddof=1)) / math.sqrt(n)),
    }


def z_variance_diagnostic(cfg: SimulationConfig, workers: int = 1) -> Dict[str, float]:
    """Compare the known-assay ``var(Z)`` formula with the empirical ``var(Z)`` of ``cfg``.

    Useful when ``cfg`` keeps the assay RSEs, where the formula is only an
    approximation.
    """
    analytic = z_variance(cfg.ctx, cfg.true_ratio, cfg.hyp.r0)
    empirical = moment_oracle(cfg, workers)["var_z"]
    return {"analytic": analytic, "empirical": empirical.estimate, "se": empirical.se,
            "relative_error": abs(empirical.estimate - analytic) / analytic}


def write_replicates(arrays: Dict[str, np.ndarray], path) -> None:
    """Write one CSV row per replicate with header ``REPLICATE_COLUMNS``.

    Degenerate estimates are written as empty fields.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPLICATE_COLUMNS)
        cols = [arrays[c] for c in REPLICATE_COLUMNS]
        for row in zip(*cols):
            out = []
            for v in row:
                v = v.item()
                if isinstance(v, bool):
                    out.append(int(v))
                elif isinstance(v, float):
                    out.append("" if math.isnan(v) else repr(v))
                else:
                    out.append(v)
            writer.writerow(out)
