"""Experiment orchestration: configs, runners, reports.

Configs are flat ``section.key = value`` files; every run echoes its full
effective configuration, carries per-row tolerances with pass flags, and
serializes deterministically (the wall-clock timing block is the one part
excluded from the canonical byte form).
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

from .families import ConnectingFamily
from .geometry import WEIGHT_PRESETS, MetricGrid, NormTag
from .modulus import SHARP_PRODUCT_BOUND, SolverConfig, solve_modulus, verify_reciprocity
from .potential import chain_potential, coarea_check

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "Report",
    "parse_config_file",
    "run",
    "emit_csv",
    "canonical_json",
]

SCHEMA_VERSION = 1

EXPERIMENTS = ("modulus", "reciprocity", "sharpness", "coarea", "convergence")


class ConfigError(ValueError):
    """Invalid experiment configuration, with the offending field named."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "modulus"
    n: int = 32
    width: float = 1.0
    height: float = 1.0
    norm: str = "l2"
    weight: str = "ones"
    p: float = 2.0
    tol_gap: float = 1e-3
    tol_admissibility: float = 1e-4
    max_outer_iters: int = 500
    max_inner_iters: int = 2000
    levels: int = 64
    n_sweep: tuple = ()
    reference: float | None = None
    rel_tol: float = 0.05
    tol_reciprocity: float = 0.1
    ratio_min: float = 0.0
    ratio_max: float = 1.1
    gradient: float = 1.0
    density: float = 1.0
    seed: int = 0
    workers: int = 1
    reduction_order: str = "instance-index"

    _KEYMAP = {
        "grid.n": ("n", int),
        "grid.width": ("width", float),
        "grid.height": ("height", float),
        "grid.norm": ("norm", str),
        "grid.weight": ("weight", str),
        "solver.p": ("p", float),
        "solver.tol_gap": ("tol_gap", float),
        "solver.tol_admissibility": ("tol_admissibility", float),
        "solver.max_outer_iters": ("max_outer_iters", int),
        "solver.max_inner_iters": ("max_inner_iters", int),
        "experiment.levels": ("levels", int),
        "experiment.n_sweep": ("n_sweep", "sweep"),
        "experiment.reference": ("reference", float),
        "experiment.rel_tol": ("rel_tol", float),
        "experiment.tol_reciprocity": ("tol_reciprocity", float),
        "experiment.ratio_min": ("ratio_min", float),
        "experiment.ratio_max": ("ratio_max", float),
        "experiment.gradient": ("gradient", float),
        "experiment.density": ("density", float),
    }

    @classmethod
    def from_mapping(cls, experiment: str, mapping: dict) -> "ExperimentConfig":
        if experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}"
            )
        kwargs = {"experiment": experiment}
        for key, raw in mapping.items():
            if key not in cls._KEYMAP:
                raise ConfigError(
                    f"unknown config key {key!r}; known keys: {sorted(cls._KEYMAP)}"
                )
            name, conv = cls._KEYMAP[key]
            try:
                if conv == "sweep":
                    value = tuple(int(v) for v in str(raw).replace(",", " ").split())
                else:
                    value = conv(raw)
            except (TypeError, ValueError):
                raise ConfigError(f"config key {key!r} has invalid value {raw!r}") from None
            kwargs[name] = value
        config = cls(**kwargs)
        config.validate()
        return config

    def validate(self) -> None:
        if self.n < 3:
            raise ConfigError(f"grid.n must be >= 3, got {self.n}")
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("grid.width and grid.height must be positive")
        try:
            NormTag.coerce(self.norm)
        except ValueError as exc:
            raise ConfigError(f"grid.norm: {exc}") from None
        try:
            float(self.weight)
        except ValueError:
            if self.weight not in WEIGHT_PRESETS:
                raise ConfigError(
                    f"grid.weight must be a number or one of {sorted(WEIGHT_PRESETS)}, "
                    f"got {self.weight!r}"
                ) from None
        try:
            self.solver_config().validate()
        except ValueError as exc:
            raise ConfigError(f"solver: {exc}") from None
        if self.levels < 16:
            raise ConfigError(f"experiment.levels must be >= 16, got {self.levels}")
        if any(v < 3 for v in self.n_sweep):
            raise ConfigError(f"experiment.n_sweep entries must be >= 3, got {self.n_sweep}")

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            p=self.p,
            tol_gap=self.tol_gap,
            tol_admissibility=self.tol_admissibility,
            max_outer_iters=self.max_outer_iters,
            max_inner_iters=self.max_inner_iters,
        )

    def grid(self, n: int | None = None, norm: str | None = None) -> MetricGrid:
        return MetricGrid(
            n if n is not None else self.n,
            width=self.width,
            height=self.height,
            norm=norm or self.norm,
            weight=self.weight,
        )

    def effective(self) -> dict:
        out = asdict(self)
        out["n_sweep"] = list(self.n_sweep)
        return out


def parse_config_file(path: str) -> dict:
    """Read a flat ``section.key = value`` file (# starts a comment)."""
    mapping = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, value = text.split("=", 1)
            mapping[key.strip()] = value.strip()
    return mapping


@dataclass
class Report:
    """Machine-readable experiment report."""

    experiment: str
    config: dict
    results: list = field(default_factory=list)
    passed: bool = True
    timings: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self, include_timings: bool = True) -> dict:
        out = {
            "schema_version": self.schema_version,
            "experiment": self.experiment,
            "config": self.config,
            "results": self.results,
            "passed": self.passed,
        }
        if include_timings:
            out["timings"] = self.timings
        return out

    def write_json(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def canonical_json(report: Report) -> bytes:
    """Byte-stable serialization: identical config and seed, identical bytes.

    Wall-clock timings are reported but excluded from the canonical form.
    """
    return json.dumps(report.to_dict(include_timings=False), sort_keys=True).encode()


def _row(instance, n, p, norm, value, reference, tolerance, passed, **extra) -> dict:
    rel_error = None
    if reference not in (None, 0.0) and math.isfinite(value):
        rel_error = abs(value - reference) / abs(reference)
    row = {
        "instance": instance,
        "n": n,
        "p": p,
        "norm": norm,
        "value": _json_safe(value),
        "reference": reference,
        "rel_error": rel_error,
        "tolerance": tolerance,
        "passed": bool(passed),
    }
    row.update(extra)
    return row


def _json_safe(value):
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
    return value


def _sweep_instance(args) -> dict:
    config, n = args
    grid = config.grid(n=n)
    result = solve_modulus(ConnectingFamily(grid), config.solver_config())
    reference = config.reference
    ok = result.converged and (
        reference is None
        or abs(result.value - reference) / abs(reference) <= config.rel_tol
    )
    return _row(
        f"n={n}",
        n,
        config.p,
        config.norm,
        result.value,
        reference,
        config.rel_tol,
        ok,
        lower_bound=result.lower_bound,
        gap=result.gap,
        status=result.status,
    )


def _run_sweep(config: ExperimentConfig, ns) -> list[dict]:
    tasks = [(config, n) for n in ns]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(_sweep_instance, tasks))
    return [_sweep_instance(task) for task in tasks]


def _run_modulus(config: ExperimentConfig) -> list[dict]:
    return _run_sweep(config, [config.n])


def _run_sharpness(config: ExperimentConfig) -> list[dict]:
    # the sharp product case lives on the sup-norm square, where the
    # connecting modulus equals pi/4 for every exponent
    ns = config.n_sweep or (16, 32, 64)
    config = replace(
        config, norm="linf", reference=config.reference or SHARP_PRODUCT_BOUND
    )
    return _run_sweep(config, ns)


def _run_convergence(config: ExperimentConfig) -> list[dict]:
    ns = config.n_sweep or (8, 16, 32, 64)
    if config.reference is None and config.norm == "linf":
        config = replace(config, reference=SHARP_PRODUCT_BOUND)
    return _run_sweep(config, ns)


def _run_reciprocity(config: ExperimentConfig) -> list[dict]:
    grid = config.grid()
    report = verify_reciprocity(
        grid, config.p, config.solver_config(), tol_reciprocity=config.tol_reciprocity
    )
    rows = [
        _row(
            "mod_p_gamma", config.n, config.p, config.norm,
            report.mod_p_gamma, None, None, report.gamma_result.converged,
            status=report.gamma_result.status,
        ),
        _row(
            "mod_q_sigma", config.n, report.q, config.norm,
            report.mod_q_sigma, None, None,
            report.sigma_result.status in ("converged", "infinite"),
            status=report.sigma_result.status,
        ),
        _row(
            "product", config.n, config.p, config.norm,
            _json_safe(report.product), report.threshold, config.tol_reciprocity,
            report.passed, bound="lower",
        ),
    ]
    return rows


def _run_coarea(config: ExperimentConfig) -> list[dict]:
    grid = config.grid()
    pot = chain_potential(grid, config.gradient, "A", sink_label="C")
    check = coarea_check(pot, config.density, num_levels=config.levels)
    ok = config.ratio_min <= check.ratio <= config.ratio_max
    return [
        _row(
            "coarea_ratio", config.n, config.p, config.norm,
            check.ratio, None, (config.ratio_min, config.ratio_max), ok,
            lhs=check.lhs, rhs=check.rhs, levels=check.num_levels,
            empty_slices=check.empty_slices,
        )
    ]


_RUNNERS = {
    "modulus": _run_modulus,
    "sharpness": _run_sharpness,
    "convergence": _run_convergence,
    "reciprocity": _run_reciprocity,
    "coarea": _run_coarea,
}


def run(config: ExperimentConfig) -> Report:
    """Execute the configured experiment and assemble its report."""
    config.validate()
    start = time.perf_counter()
    rows = _RUNNERS[config.experiment](config)
    elapsed = time.perf_counter() - start
    report = Report(
        experiment=config.experiment,
        config=config.effective(),
        results=rows,
        passed=all(r["passed"] for r in rows),
        timings={"total_seconds": elapsed},
    )
    return report


CSV_COLUMNS = ["instance", "n", "p", "norm", "value", "reference", "rel_error", "tolerance", "passed"]


def emit_csv(report: Report, path: str) -> None:
    """One row per experiment instance; header only for an empty report."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore")
            writer.writeheader()
            for row in report.results:
                writer.writerow({k: row.get(k) for k in CSV_COLUMNS})
    except OSError as exc:
        raise OSError(f"could not write CSV report to {path}: {exc}") from exc
