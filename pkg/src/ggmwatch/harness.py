"""Seeded Monte Carlo experiment drivers.

Replicate ``r`` of any experiment draws from a Philox stream keyed by
``sha256(master_seed | tag | ... | r)``, so results are reproducible
bit-for-bit for a given ``(config, master_seed)`` at any worker count:
replicates are processed in fixed chunks and reduced in chunk order.

Power grids share replicate streams along the beta and w axes (common random
numbers), which makes the monotonicity properties of the curves visible at
desk-scale replicate counts.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from . import __version__, kernels
from .clime import ClimeConfig, clime_estimate, normalized_error
from .errors import InvalidConfig
from .modelgen import (
    PrecisionMatrix,
    cholesky_factor,
    gen_chain_precision,
    gen_random_sparse,
    invert_spd,
    make_antidiag_change,
    make_block_change,
)
from .statistic import scale_entries
from .threshold import (
    critical_value_asymptotic,
    critical_value_exact,
    critical_value_union,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "CellResult",
    "MetricValue",
    "PRESETS",
    "DEFAULT_MASTER_SEED",
    "run_experiment",
    "fa_calibration",
    "plugin_calibration",
    "power_curve",
    "delay_profile",
    "lcpd_block_power",
]

DEFAULT_MASTER_SEED = 1729
_CHUNK = 250

_KINDS = (
    "fa_calibration",
    "plugin_calibration",
    "power_curve",
    "delay_curve",
    "delay_profile",
    "lcpd_block",
)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    replicates: int
    master_seed: int
    params: dict

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise InvalidConfig(f"unknown experiment kind {self.kind!r}")
        if self.replicates < 1:
            raise InvalidConfig("replicates must be >= 1")


@dataclass(frozen=True)
class MetricValue:
    value: float
    se: float | None


@dataclass(frozen=True)
class CellResult:
    cell: dict
    n: int
    metrics: dict[str, MetricValue]
    series: dict | None = None


@dataclass(frozen=True)
class ExperimentResult:
    kind: str
    cells: list[CellResult]
    provenance: dict


def derive_key(master_seed: int, *parts) -> int:
    """Fixed public hash mapping (master_seed, labels...) to a Philox key."""
    text = "|".join([str(master_seed), *map(str, parts)])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:16], "big")


def _generator(master_seed: int, *parts) -> Generator:
    return Generator(Philox(key=derive_key(master_seed, *parts)))


def _rate_metric(hits: int, n: int) -> MetricValue:
    r = hits / n
    return MetricValue(value=r, se=math.sqrt(r * (1.0 - r) / n))


def _upper_quantile(values: np.ndarray, pi0: float) -> float:
    k = int(math.ceil((1.0 - pi0) * len(values)))
    return float(np.sort(values)[k - 1])


def _chunks(n: int) -> list[tuple[int, int]]:
    return [(a, min(a + _CHUNK, n)) for a in range(0, n, _CHUNK)]


def _map_chunks(kind: str, ctx: dict, n: int, jobs: int) -> list:
    spans = _chunks(n)
    if jobs <= 1:
        return [_run_chunk(kind, ctx, a, b) for a, b in spans]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_run_chunk, kind, ctx, a, b) for a, b in spans]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# chunk workers (top-level for pickling)


def _draw_window(master_seed: int, tag: tuple, w: int, chol: np.ndarray) -> np.ndarray:
    z = _generator(master_seed, *tag).standard_normal((w, chol.shape[0]))
    return z @ chol.T


def _fa_chunk(ctx: dict, start: int, stop: int) -> np.ndarray:
    w = ctx["w"]
    xs = np.empty((stop - start, w, ctx["p"]))
    for i, r in enumerate(range(start, stop)):
        xs[i] = _draw_window(ctx["master_seed"], ("fa", r), w, ctx["chol"])
    return kernels.window_supnorms(xs, ctx["omega"], ctx["psi"])


def _plugin_chunk(ctx: dict, start: int, stop: int) -> np.ndarray:
    w = ctx["w"]
    fits = ctx["omega_fits"]
    out = np.empty(stop - start)
    for f in range(len(fits)):
        rows = [i for i, r in enumerate(range(start, stop)) if r % len(fits) == f]
        if not rows:
            continue
        xs = np.empty((len(rows), w, ctx["p"]))
        for k, i in enumerate(rows):
            xs[k] = _draw_window(ctx["master_seed"], ("window", start + i), w, ctx["chol"])
        out[rows] = kernels.window_supnorms(xs, fits[f], ctx["psi_fits"][f])
    return out


def _power_chunk(ctx: dict, start: int, stop: int) -> np.ndarray:
    w = ctx["w"]
    xs = np.empty((stop - start, w, ctx["p"]))
    for i, r in enumerate(range(start, stop)):
        xs[i] = _draw_window(ctx["master_seed"], (ctx["tag"], ctx["s"], r), w, ctx["chol_post"])
    return kernels.window_supnorms(xs, ctx["omega_hat"], ctx["psi_hat"])


def _delay_chunk(ctx: dict, start: int, stop: int) -> dict:
    w, t0, p = ctx["w"], ctx["t0"], ctx["p"]
    t_len = t0 + w
    zeta = ctx["zeta"]
    first_post = t0 - w + 1  # first window index containing post-change data
    traj_sum = np.zeros(t0 + 1)
    traj_sumsq = np.zeros(t0 + 1)
    delay_sum = 0.0
    delay_sumsq = 0.0
    detected = 0
    pre_cross = 0
    for r in range(start, stop):
        z = _generator(ctx["master_seed"], "rep", r).standard_normal((t_len, p))
        x = np.empty((t_len, p))
        x[:t0] = z[:t0] @ ctx["chol_pre"].T
        x[t0:] = z[t0:] @ ctx["chol_post"].T
        sup = kernels.sliding_supnorms(x, ctx["omega_hat"], ctx["psi_hat"], w)
        traj_sum += sup
        traj_sumsq += sup * sup
        if np.any(sup[:first_post] >= zeta):
            pre_cross += 1
        hits = np.nonzero(sup[first_post:] >= zeta)[0]
        if len(hits):
            delay = float(hits[0] + 1)  # post-change samples inside the window
            delay_sum += delay
            delay_sumsq += delay * delay
            detected += 1
    return {
        "traj_sum": traj_sum,
        "traj_sumsq": traj_sumsq,
        "delay_sum": delay_sum,
        "delay_sumsq": delay_sumsq,
        "detected": detected,
        "pre_cross": pre_cross,
        "n": stop - start,
    }


def _control_chunk(ctx: dict, start: int, stop: int) -> dict:
    w, t0, p = ctx["w"], ctx["t0"], ctx["p"]
    t_len = t0 + w
    zeta = ctx["zeta"]
    traj_sum = np.zeros(t0 + 1)
    exceed = 0
    windows = 0
    for r in range(start, stop):
        z = _generator(ctx["master_seed"], "control", r).standard_normal((t_len, p))
        sup = kernels.sliding_supnorms(z @ ctx["chol_pre"].T, ctx["omega_hat"], ctx["psi_hat"], w)
        traj_sum += sup
        exceed += int(np.sum(sup >= zeta))
        windows += len(sup)
    return {"traj_sum": traj_sum, "exceed": exceed, "windows": windows, "n": stop - start}


_CHUNK_FNS = {
    "fa": _fa_chunk,
    "plugin": _plugin_chunk,
    "power": _power_chunk,
    "delay": _delay_chunk,
    "control": _control_chunk,
}


def _run_chunk(kind: str, ctx: dict, start: int, stop: int):
    return _CHUNK_FNS[kind](ctx, start, stop)


# ---------------------------------------------------------------------------
# experiments


def _provenance(config: ExperimentConfig, **extra) -> dict:
    return {
        "kind": config.kind,
        "replicates": config.replicates,
        "master_seed": config.master_seed,
        "params": config.params,
        "tool_version": __version__,
        "backend": kernels.BACKEND,
        **extra,
    }


def fa_calibration(config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Oracle-statistic calibration on the chain model: exceedance rates at the
    exact and union thresholds plus the empirical upper quantile."""
    prm = config.params
    p, rho0, w, pi0 = prm["p"], prm["rho0"], prm["w"], prm["pi0"]
    omega = gen_chain_precision(p, rho0)
    chol = cholesky_factor(invert_spd(omega.entries))
    ze = critical_value_exact(pi0, p, w)
    zu = critical_value_union(pi0, p) if pi0 < 0.5 else None
    za = critical_value_asymptotic(pi0, p)
    ctx = {
        "master_seed": config.master_seed,
        "p": p,
        "w": w,
        "chol": chol,
        "omega": omega.entries,
        "psi": scale_entries(omega.entries),
    }
    sups = np.concatenate(_map_chunks("fa", ctx, config.replicates, jobs))
    n = len(sups)
    metrics = {
        "exceed_exact": _rate_metric(int(np.sum(sups >= ze)), n),
        "quantile": MetricValue(_upper_quantile(sups, pi0), None),
        "mean_sup": MetricValue(float(sups.mean()), float(sups.std(ddof=1) / math.sqrt(n))),
    }
    if zu is not None:
        metrics["exceed_union"] = _rate_metric(int(np.sum(sups >= zu)), n)
    cell = CellResult(cell={"p": p, "rho0": rho0, "w": w, "pi0": pi0}, n=n, metrics=metrics)
    prov = _provenance(config, zeta_exact=ze, zeta_union=zu, zeta_asymptotic=za)
    return ExperimentResult(kind=config.kind, cells=[cell], provenance=prov)


def _fit_clime(samples: np.ndarray, lambda_level: float) -> np.ndarray:
    cfg = ClimeConfig(lambda_rule="scaled", lambda_level=lambda_level, psd_project=True)
    return clime_estimate(samples, cfg).omega_hat


def plugin_calibration(config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Plug-in calibration over a burn-in grid: several CLIME fits per cell,
    pooled no-rejection rate p_N and averaged normalized error e_N."""
    prm = config.params
    p, w, pi0 = prm["p"], prm["w"], prm["pi0"]
    fits_per_cell = prm.get("fits", 4)
    lambda_level = prm.get("lambda_level", 0.5)
    omega = gen_random_sparse(
        p, prm["density"], prm["inflation"], derive_key(config.master_seed, "model")
    )
    chol = cholesky_factor(invert_spd(omega.entries))
    ze = critical_value_exact(pi0, p, w)
    cells = []
    for n_burn in prm["n_grid"]:
        omega_fits, errs = [], []
        for f in range(fits_per_cell):
            xb = _generator(config.master_seed, "burnin", n_burn, f).standard_normal((n_burn, p))
            omh = _fit_clime(xb @ chol.T, lambda_level)
            omega_fits.append(omh)
            errs.append(normalized_error(omh, omega))
        ctx = {
            "master_seed": config.master_seed,
            "p": p,
            "w": w,
            "chol": chol,
            "omega_fits": omega_fits,
            "psi_fits": [scale_entries(o) for o in omega_fits],
        }
        sups = np.concatenate(_map_chunks("plugin", ctx, config.replicates, jobs))
        errs = np.asarray(errs)
        metrics = {
            "p_n": _rate_metric(int(np.sum(sups <= ze)), len(sups)),
            "e_n": MetricValue(
                float(errs.mean()),
                float(errs.std(ddof=1) / math.sqrt(len(errs))) if len(errs) > 1 else None,
            ),
        }
        cells.append(CellResult(cell={"n_burnin": n_burn}, n=len(sups), metrics=metrics))
    if prm.get("include_oracle", False):
        ctx = {
            "master_seed": config.master_seed,
            "p": p,
            "w": w,
            "chol": chol,
            "omega_fits": [omega.entries],
            "psi_fits": [scale_entries(omega.entries)],
        }
        sups = np.concatenate(_map_chunks("plugin", ctx, config.replicates, jobs))
        metrics = {
            "p_n": _rate_metric(int(np.sum(sups <= ze)), len(sups)),
            "e_n": MetricValue(0.0, None),
        }
        cells.append(
            CellResult(cell={"n_burnin": 0, "oracle": 1}, n=len(sups), metrics=metrics)
        )
    prov = _provenance(config, zeta_exact=ze)
    return ExperimentResult(kind=config.kind, cells=cells, provenance=prov)


def _power_engine(
    config: ExperimentConfig, jobs: int, change: str, oracle: bool, tag: str
) -> ExperimentResult:
    prm = config.params
    p, pi0 = prm["p"], prm["pi0"]
    omega = gen_random_sparse(
        p, prm["density"], prm["inflation"], derive_key(config.master_seed, "model")
    )
    chol_pre = cholesky_factor(invert_spd(omega.entries))
    lam_min = float(np.linalg.eigvalsh(omega.entries)[0])
    if oracle:
        omega_hat = omega.entries
        e_n = 0.0
    else:
        n_burn = prm["n_burnin"]
        xb = _generator(config.master_seed, "burnin").standard_normal((n_burn, p))
        omega_hat = _fit_clime(xb @ chol_pre.T, prm.get("lambda_level", 0.5))
        e_n = normalized_error(omega_hat, omega)
    psi_hat = scale_entries(omega_hat)

    if change == "block":
        betas = [float(b) for b in prm["beta_grid"]]
        cells_axis = [(b, {"beta": b}) for b in betas]

        def post_of(s, beta):
            return make_block_change(omega, s, beta)

    elif change == "antidiag":
        fracs = [float(f) for f in prm["beta_fracs"]]
        cells_axis = [(f * lam_min, {"beta_frac": f, "beta": f * lam_min}) for f in fracs]

        def post_of(s, beta):
            return make_antidiag_change(omega, s, beta)

    else:
        raise InvalidConfig(f"unknown change kind {change!r}")

    w_grid = [int(w) for w in prm["w_grid"]]
    zetas = {w: critical_value_exact(pi0, p, w) for w in w_grid}
    cells = []
    for s in prm["s_grid"]:
        post_chols = {}
        for beta, _ in cells_axis:
            post = post_of(s, beta) if beta != 0.0 else omega
            post_chols[beta] = cholesky_factor(invert_spd(post.entries))
        for beta, beta_cell in cells_axis:
            for w in w_grid:
                ctx = {
                    "master_seed": config.master_seed,
                    "p": p,
                    "w": w,
                    "s": s,
                    "tag": tag,
                    "chol_post": post_chols[beta],
                    "omega_hat": omega_hat,
                    "psi_hat": psi_hat,
                }
                sups = np.concatenate(_map_chunks("power", ctx, config.replicates, jobs))
                metrics = {"pi1": _rate_metric(int(np.sum(sups < zetas[w])), len(sups))}
                cell = {"s": s, "w": w, **beta_cell}
                cells.append(CellResult(cell=cell, n=len(sups), metrics=metrics))
    prov = _provenance(
        config,
        zetas={str(w): z for w, z in zetas.items()},
        e_n=e_n,
        lambda_min=lam_min,
        oracle=oracle,
    )
    return ExperimentResult(kind=config.kind, cells=cells, provenance=prov)


def power_curve(config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Mis-detection rate over (s, beta, w) grids for the leading-block change,
    testing the first full post-change window with a plug-in (or oracle) fit."""
    return _power_engine(
        config, jobs, change="block", oracle=bool(config.params.get("oracle", False)), tag="rep"
    )


def lcpd_block_power(config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Oracle-mode power against added anti-corner edges; beta values are
    fractions of the pre-change smallest eigenvalue (the PD limit)."""
    return _power_engine(config, jobs, change="antidiag", oracle=True, tag="rep")


def delay_profile(config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Mean sup-norm trajectory around a change plus first-crossing delays.

    The change scenario interpolates between two independently generated
    sparse models: ``post = (1 - a) pre + a post_raw`` with attenuation ``a``
    (``a = 1`` reproduces a full redraw). First-crossing delays are measured
    over windows containing post-change samples; crossings strictly before
    that are reported separately as ``pre_any_exceed``.
    """
    prm = config.params
    p, w, t0, pi0 = prm["p"], prm["w"], prm["t0"], prm["pi0"]
    if w > t0:
        raise InvalidConfig("delay profile requires w <= t0")
    atten = prm.get("attenuation", 1.0)
    pre = gen_random_sparse(
        p, prm["density"], prm["inflation"], derive_key(config.master_seed, "model-pre")
    )
    post_raw = gen_random_sparse(
        p, prm["density"], prm["inflation"], derive_key(config.master_seed, "model-post")
    )
    post = PrecisionMatrix.from_entries(
        (1.0 - atten) * pre.entries + atten * post_raw.entries
    )
    chol_pre = cholesky_factor(invert_spd(pre.entries))
    chol_post = cholesky_factor(invert_spd(post.entries))
    n_burn = prm["n_burnin"]
    xb = _generator(config.master_seed, "burnin").standard_normal((n_burn, p))
    omega_hat = _fit_clime(xb @ chol_pre.T, prm.get("lambda_level", 0.5))
    e_n = normalized_error(omega_hat, pre)
    zeta = critical_value_exact(pi0, p, w)
    ctx = {
        "master_seed": config.master_seed,
        "p": p,
        "w": w,
        "t0": t0,
        "zeta": zeta,
        "chol_pre": chol_pre,
        "chol_post": chol_post,
        "omega_hat": omega_hat,
        "psi_hat": scale_entries(omega_hat),
    }
    parts = _map_chunks("delay", ctx, config.replicates, jobs)
    n = sum(c["n"] for c in parts)
    traj_sum = sum((c["traj_sum"] for c in parts), np.zeros(t0 + 1))
    traj_sumsq = sum((c["traj_sumsq"] for c in parts), np.zeros(t0 + 1))
    detected = sum(c["detected"] for c in parts)
    delay_sum = sum(c["delay_sum"] for c in parts)
    delay_sumsq = sum(c["delay_sumsq"] for c in parts)
    pre_cross = sum(c["pre_cross"] for c in parts)
    traj_mean = traj_sum / n
    traj_se = np.sqrt(np.maximum(traj_sumsq / n - traj_mean**2, 0.0) / n)
    rel_t = list(range(-t0, 1))
    over = np.nonzero(traj_mean >= zeta)[0]
    traj_cross_delay = float(over[0] - t0 + w) if len(over) else math.nan
    mean_delay = delay_sum / detected if detected else math.nan
    delay_se = (
        math.sqrt(max(delay_sumsq / detected - mean_delay**2, 0.0) / detected)
        if detected
        else math.nan
    )
    metrics = {
        "mean_delay": MetricValue(mean_delay, delay_se),
        "miss_rate": _rate_metric(n - detected, n),
        "pre_any_exceed": _rate_metric(pre_cross, n),
        "traj_cross_delay": MetricValue(traj_cross_delay, None),
        "traj_start": MetricValue(float(traj_mean[0]), float(traj_se[0])),
        "traj_end": MetricValue(float(traj_mean[-1]), float(traj_se[-1])),
    }
    series = {"t": rel_t, "mean": traj_mean.tolist(), "se": traj_se.tolist()}
    cells = [
        CellResult(
            cell={"scenario": "change", "attenuation": atten},
            n=n,
            metrics=metrics,
            series=series,
        )
    ]
    if prm.get("control", True):
        parts = _map_chunks("control", ctx, config.replicates, jobs)
        n = sum(c["n"] for c in parts)
        traj_mean = sum((c["traj_sum"] for c in parts), np.zeros(t0 + 1)) / n
        exceed = sum(c["exceed"] for c in parts)
        windows = sum(c["windows"] for c in parts)
        metrics = {
            "window_exceed": _rate_metric(exceed, windows),
            "traj_max": MetricValue(float(traj_mean.max()), None),
        }
        cells.append(
            CellResult(
                cell={"scenario": "control", "attenuation": atten},
                n=n,
                metrics=metrics,
                series={"t": rel_t, "mean": traj_mean.tolist()},
            )
        )
    prov = _provenance(config, zeta_exact=zeta, e_n=e_n)
    return ExperimentResult(kind=config.kind, cells=cells, provenance=prov)


_RUNNERS = {
    "fa_calibration": fa_calibration,
    "plugin_calibration": plugin_calibration,
    "power_curve": power_curve,
    "delay_curve": power_curve,  # mis-detection versus window length
    "delay_profile": delay_profile,
    "lcpd_block": lcpd_block_power,
}


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    return _RUNNERS[config.kind](config, jobs=jobs)


def _preset(kind: str, replicates: int, **params) -> ExperimentConfig:
    return ExperimentConfig(
        kind=kind, replicates=replicates, master_seed=DEFAULT_MASTER_SEED, params=params
    )


PRESETS: dict[str, ExperimentConfig] = {
    "fig1-desk": _preset(
        "fa_calibration", 10_000, p=100, rho0=0.5, w=50, pi0=0.05
    ),
    "fig2-desk": _preset(
        "plugin_calibration",
        4_000,
        p=80,
        density=0.06,
        inflation=0.1,
        w=50,
        pi0=0.05,
        n_grid=[300],
        fits=4,
        include_oracle=True,
    ),
    "table1-desk": _preset(
        "plugin_calibration",
        1_000,
        p=80,
        density=0.06,
        inflation=0.1,
        w=40,
        pi0=0.05,
        n_grid=[200, 300, 400, 500, 600, 700],
        fits=4,
        include_oracle=True,
    ),
    "fig3-desk": _preset(
        "delay_profile",
        1_000,
        p=100,
        density=0.04,
        inflation=0.1,
        n_burnin=1_500,
        t0=100,
        w=75,
        pi0=0.05,
        attenuation=0.7,
        control=True,
    ),
    "fig4-desk": _preset(
        "power_curve",
        1_000,
        p=100,
        density=0.05,
        inflation=0.1,
        n_burnin=2_000,
        pi0=0.05,
        s_grid=[1, 2, 3],
        beta_grid=[0.0, 1.0, 2.0, 3.0, 4.5, 6.0],
        w_grid=[150],
    ),
    "fig5-desk": _preset(
        "delay_curve",
        1_000,
        p=100,
        density=0.05,
        inflation=0.1,
        n_burnin=2_000,
        pi0=0.05,
        s_grid=[1, 2, 3],
        beta_grid=[3.0],
        w_grid=[60, 120, 180, 240, 300],
    ),
    "fig6-desk": _preset(
        "lcpd_block",
        1_000,
        p=100,
        density=0.047,
        inflation=1.1,
        pi0=0.05,
        s_grid=[1, 5, 20],
        beta_fracs=[0.0, 0.25, 0.5, 0.75, 0.9, 0.98],
        w_grid=[100],
    ),
}
