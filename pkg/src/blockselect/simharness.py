"""Simulation studies over parameter grids with reproducible seeding.

A study runs community detection (mislabel rate against planted truth) or
one of the bootstrap tests (rejection indicator) over a grid of generator
settings, replicated with per-(point, replicate, method) derived seeds so
any single cell value can be recomputed in isolation. Failed replicates
are recorded, never redrawn: here the failure rate is itself data.
"""

from __future__ import annotations

import configparser
import enum
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._seeds import derive_seed
from .blockmodels import (
    Beta,
    Constant,
    PowerLaw,
    ThetaLaw,
    beta_ratio_omega,
    gen_dcbm,
    gen_pabm,
    gen_sbm,
)
from .cluster import mislabel_rate, minimize_q1, minimize_q_subspace, osc, rsc_l, sc_l
from .errors import ConfigError
from .modelselect import test_dcbm_vs_pabm, test_sbm_vs_dcbm
from .netcore import Graph
from .spectral import ase


class Study(enum.Enum):
    COMM_DET_SBM = "comm_det_sbm"
    COMM_DET_DCBM = "comm_det_dcbm"
    COMM_DET_PABM = "comm_det_pabm"
    TEST_SBM_VS_DCBM = "test_sbm_vs_dcbm"
    TEST_DCBM_VS_PABM = "test_dcbm_vs_pabm"


_COMM_DET_STUDIES = {Study.COMM_DET_SBM, Study.COMM_DET_DCBM, Study.COMM_DET_PABM}
_METHODS = {"q1", "q2", "q3", "sc_l", "rsc_l", "osc"}


@dataclass(frozen=True)
class GridPoint:
    """One generator configuration.

    ``omega`` (explicit base matrix) and ``beta`` (ratio of between- to
    within-block probability) are alternative ways to specify the block
    matrix for SBM/DCBM settings. Exactly one of ``density`` /
    ``avg_degree`` sets the expected scale; for the popularity model
    ``density`` is an optional rescale target and both may be absent.
    """

    n: int
    k: int
    beta: float | None = None
    omega: tuple[tuple[float, ...], ...] | None = None
    fractions: tuple[float, ...] | None = None
    density: float | None = None
    avg_degree: float | None = None
    theta_law: ThetaLaw | None = None
    true_model: str | None = None

    def base_omega(self) -> np.ndarray:
        if self.omega is not None:
            return np.asarray(self.omega, dtype=np.float64)
        if self.beta is not None:
            return beta_ratio_omega(self.k, self.beta)
        raise ConfigError(f"grid point n={self.n}: needs omega or beta")

    def block_fractions(self) -> np.ndarray:
        if self.fractions is not None:
            return np.asarray(self.fractions, dtype=np.float64)
        return np.full(self.k, 1.0 / self.k)


@dataclass(frozen=True)
class ExperimentSpec:
    study: Study
    grid: tuple[GridPoint, ...]
    methods: tuple[str, ...]
    n_replicates: int = 20
    n_boot: int = 100
    alpha: float = 0.05
    restarts: int | None = None
    base_seed: int = 0

    def validate(self) -> None:
        if self.n_replicates < 1:
            raise ConfigError("n_replicates must be >= 1")
        if not self.grid:
            raise ConfigError("grid must contain at least one point")
        if self.study in _COMM_DET_STUDIES:
            bad = set(self.methods) - _METHODS
            if bad or not self.methods:
                raise ConfigError(f"invalid methods {sorted(bad)} for {self.study.value}")
        if self.restarts is not None and self.restarts < 1:
            raise ConfigError("restarts must be >= 1")
        for i, pt in enumerate(self.grid):
            if pt.n < 2 or pt.k < 1 or pt.k > pt.n:
                raise ConfigError(f"grid point {i + 1}: bad (n, k) = ({pt.n}, {pt.k})")
            if pt.true_model is not None and pt.true_model not in ("sbm", "dcbm", "pabm"):
                raise ConfigError(
                    f"grid point {i + 1}: true_model must be sbm/dcbm/pabm"
                )
            needs_pabm = (
                self.study is Study.COMM_DET_PABM
                or (pt.true_model == "pabm")
            )
            if needs_pabm and pt.n % pt.k != 0:
                raise ConfigError(f"grid point {i + 1}: n must be divisible by k")
            if self.study not in _COMM_DET_STUDIES and pt.true_model is None:
                raise ConfigError(f"grid point {i + 1}: test study needs true_model")


@dataclass
class CellResult:
    """Replicate-level metric values for one (grid point, method) cell."""

    values: list[float] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    metric: str = "mislabel"

    @property
    def ok_values(self) -> np.ndarray:
        return np.asarray(
            [v for v in self.values if not math.isnan(v)], dtype=np.float64
        )

    @property
    def mean(self) -> float:
        vals = self.ok_values
        return float(vals.mean()) if vals.size else float("nan")

    @property
    def se(self) -> float:
        vals = self.ok_values
        if vals.size <= 1:
            return 0.0
        return float(vals.std(ddof=1) / np.sqrt(vals.size))

    @property
    def n_failed(self) -> int:
        return len(self.errors)

    def failed(self, n_replicates: int) -> bool:
        return self.n_failed > 0.1 * n_replicates


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    cells: dict[tuple[int, str], CellResult]


def _generate(study: Study, pt: GridPoint, seed: int):
    """Graph plus planted parameters for one replicate."""
    model = pt.true_model
    if study is Study.COMM_DET_SBM:
        model = "sbm"
    elif study is Study.COMM_DET_DCBM:
        model = "dcbm"
    elif study is Study.COMM_DET_PABM:
        model = "pabm"
    if model == "sbm":
        return gen_sbm(
            pt.n, pt.k, pt.block_fractions(), pt.base_omega(),
            target_density=pt.density, target_avg_degree=pt.avg_degree, seed=seed,
        )
    if model == "dcbm":
        law = pt.theta_law if pt.theta_law is not None else Beta(1, 5)
        return gen_dcbm(
            pt.n, pt.k, pt.block_fractions(), pt.base_omega(), law,
            target_density=pt.density, target_avg_degree=pt.avg_degree, seed=seed,
        )
    if model == "pabm":
        return gen_pabm(pt.n, pt.k, density_scale=pt.density, seed=seed)
    raise ConfigError(f"unknown true_model {model!r}")


def _run_method(method: str, g: Graph, k: int, restarts: int | None, seed: int):
    if method == "q1":
        emb = ase(g, k)
        return minimize_q1(emb, k, n_restarts=restarts or 10, seed=seed)
    if method == "q2":
        emb = ase(g, k)
        return minimize_q_subspace(emb, k, r=1, n_restarts=restarts or 20, seed=seed)
    if method == "q3":
        # rank-K subspace structure lives in the orthonormal eigenvector
        # rows, and its landscape needs a deeper restart budget
        emb = ase(g, k * k, scaled=False)
        return minimize_q_subspace(emb, k, r=k, n_restarts=restarts or 100, seed=seed)
    if method == "sc_l":
        return sc_l(g, k, n_restarts=restarts or 10, seed=seed)
    if method == "rsc_l":
        return rsc_l(g, k, n_restarts=restarts or 10, seed=seed)
    if method == "osc":
        return osc(g, k, n_restarts=restarts or 10, seed=seed)
    raise ConfigError(f"unknown method {method!r}")


def replicate_seed(spec: ExperimentSpec, point_idx: int, rep_idx: int, method: str) -> int:
    return derive_seed(spec.base_seed, point_idx, rep_idx, method)


def run_single_replicate(
    spec: ExperimentSpec, point_idx: int, rep_idx: int, method: str
) -> float:
    """Metric for one replicate; re-runnable in isolation from its seed."""
    pt = spec.grid[point_idx]
    seed = replicate_seed(spec, point_idx, rep_idx, method)
    if spec.study in _COMM_DET_STUDIES:
        g, params = _generate(spec.study, pt, derive_seed(seed, "gen"))
        sol = _run_method(method, g, pt.k, spec.restarts, derive_seed(seed, "method"))
        return mislabel_rate(sol.labels, params.labels, pt.k)
    g, _ = _generate(spec.study, pt, derive_seed(seed, "gen"))
    if spec.study is Study.TEST_SBM_VS_DCBM:
        result, _ = test_sbm_vs_dcbm(
            g, pt.k, n_boot=spec.n_boot, alpha=spec.alpha,
            restarts=spec.restarts or 10, seed=derive_seed(seed, "test"),
        )
    else:
        result, _ = test_dcbm_vs_pabm(
            g, pt.k, n_boot=spec.n_boot, alpha=spec.alpha,
            restarts=spec.restarts or 20, seed=derive_seed(seed, "test"),
        )
    return 1.0 if result.rejected else 0.0


def run_experiment(spec: ExperimentSpec, progress=None) -> ExperimentReport:
    """Run the full grid; deterministic given the experiment settings.

    ``progress`` is an optional callable(point_idx, method, rep_idx) used
    by the CLI for status output.
    """
    spec.validate()
    methods = tuple(spec.methods) if spec.study in _COMM_DET_STUDIES else ("test",)
    metric = "mislabel" if spec.study in _COMM_DET_STUDIES else "rejection"
    cells: dict[tuple[int, str], CellResult] = {}
    for point_idx in range(len(spec.grid)):
        for method in methods:
            cell = CellResult(metric=metric)
            for rep_idx in range(spec.n_replicates):
                if progress is not None:
                    progress(point_idx, method, rep_idx)
                cell.seeds.append(replicate_seed(spec, point_idx, rep_idx, method))
                try:
                    value = run_single_replicate(spec, point_idx, rep_idx, method)
                except Exception as exc:  # failures are data here
                    cell.values.append(float("nan"))
                    cell.errors.append(f"replicate {rep_idx}: {exc}")
                else:
                    cell.values.append(value)
            cells[(point_idx, method)] = cell
    return ExperimentReport(spec=spec, cells=cells)


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

class TableLayout(enum.Enum):
    """Reference layouts mirroring the bundled simulation studies."""

    SBM_MISLABEL = ("sbm_mislabel", "delta", ("q1", "sc_l"), "mean_se")
    DCBM_MISLABEL = ("dcbm_mislabel", "delta", ("q2", "rsc_l"), "mean_se")
    PABM_MISLABEL = ("pabm_mislabel", "delta", ("q3", "osc"), "mean_se")
    SBM_NULL_REJECTION = ("sbm_null", "beta_deg", ("test",), "proportion")
    DCBM_ALT_REJECTION = ("dcbm_alt", "beta_deg", ("test",), "proportion")
    DCBM_NULL_REJECTION = ("dcbm_null", "beta_deg", ("test",), "proportion")
    PABM_ALT_REJECTION = ("pabm_alt", "delta", ("test",), "proportion")


_METHOD_HEADER = {
    "q1": "Q1", "q2": "Q2", "q3": "Q3",
    "sc_l": "SC-L", "rsc_l": "RSC-L", "osc": "OSC", "test": "rejection",
}


def _point_columns(kind: str, pt: GridPoint) -> list[tuple[str, str]]:
    cols = [("n", str(pt.n)), ("K", str(pt.k))]
    if kind == "delta":
        delta = "" if pt.density is None else f"{pt.density:g}"
        cols.append(("delta", delta))
    else:
        cols.append(("beta", "" if pt.beta is None else f"{pt.beta:g}"))
        cols.append(
            ("avg.degree", "" if pt.avg_degree is None else f"{pt.avg_degree:g}")
        )
    return cols


def emit_table(report: ExperimentReport, layout: TableLayout) -> tuple[str, str]:
    """(csv, aligned_text) rendering of the report in the given layout.

    Cells without data render as NA; failed cells are marked with '!'.
    """
    _, kind, methods, style = layout.value
    point_names = ["n", "K", "delta"] if kind == "delta" else ["n", "K", "beta", "avg.degree"]
    header = point_names + [_METHOD_HEADER[m] for m in methods]
    rows: list[list[str]] = []
    for point_idx, pt in enumerate(report.spec.grid):
        cols = _point_columns(kind, pt)
        row = [value for _, value in cols]
        for method in methods:
            cell = report.cells.get((point_idx, method))
            if cell is None or not cell.ok_values.size:
                row.append("NA")
                continue
            if style == "mean_se":
                text = f"{cell.mean:.2f} +/- {cell.se:.3f}"
            else:
                text = f"{cell.mean:.2f}"
            if cell.failed(report.spec.n_replicates):
                text += " !"
            row.append(text)
        rows.append(row)
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(row) + "\n")
    csv_text = buf.getvalue()
    widths = [
        max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i])
        for i in range(len(header))
    ]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return csv_text, "\n".join(lines) + "\n"


def report_provenance(report: ExperimentReport) -> dict:
    """JSON-ready record sufficient to recompute every cell."""
    spec = report.spec
    return {
        "study": spec.study.value,
        "n_replicates": spec.n_replicates,
        "n_boot": spec.n_boot,
        "alpha": spec.alpha,
        "restarts": spec.restarts,
        "base_seed": spec.base_seed,
        "methods": list(spec.methods),
        "grid": [
            {
                "n": pt.n, "k": pt.k, "beta": pt.beta,
                "omega": pt.omega, "fractions": pt.fractions,
                "density": pt.density, "avg_degree": pt.avg_degree,
                "theta_law": repr(pt.theta_law) if pt.theta_law else None,
                "true_model": pt.true_model,
            }
            for pt in spec.grid
        ],
        "cells": {
            f"{point_idx}:{method}": {
                "metric": cell.metric,
                "values": cell.values,
                "seeds": cell.seeds,
                "errors": cell.errors,
                "mean": cell.mean,
                "se": cell.se,
            }
            for (point_idx, method), cell in report.cells.items()
        },
    }


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

def _parse_theta_law(text: str) -> ThetaLaw:
    name, _, args = text.partition(":")
    parts = [float(tok) for tok in args.split(",")] if args else []
    name = name.strip().lower()
    if name == "beta" and len(parts) == 2:
        return Beta(parts[0], parts[1])
    if name == "powerlaw" and len(parts) == 2:
        return PowerLaw(parts[0], parts[1])
    if name == "constant" and len(parts) == 1:
        return Constant(parts[0])
    raise ConfigError(f"bad theta_law {text!r} (want beta:a,b | powerlaw:xmin,alpha | constant:v)")


def _parse_matrix(text: str) -> tuple[tuple[float, ...], ...]:
    try:
        return tuple(
            tuple(float(tok) for tok in row.split(","))
            for row in text.split(";")
        )
    except ValueError as exc:
        raise ConfigError(f"bad matrix {text!r}: {exc}") from exc


def _get(section, key, conv, default=None, *, where=""):
    if key not in section:
        return default
    raw = section[key]
    try:
        return conv(raw)
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"{where}{key} = {raw!r}: {exc}") from exc


def load_experiment_config(stream) -> ExperimentSpec:
    """Parse an INI-style experiment file: one [experiment] section plus
    [grid.N] sections, numbered from 1."""
    parser = configparser.ConfigParser()
    try:
        parser.read_file(stream)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    if "experiment" not in parser:
        raise ConfigError("missing [experiment] section")
    exp = parser["experiment"]
    try:
        study = Study(exp.get("study", ""))
    except ValueError:
        valid = ", ".join(s.value for s in Study)
        raise ConfigError(f"study must be one of: {valid}") from None
    methods_raw = exp.get("methods", "")
    methods = tuple(m.strip() for m in methods_raw.split(",") if m.strip())
    spec = ExperimentSpec(
        study=study,
        grid=(),
        methods=methods,
        n_replicates=_get(exp, "replicates", int, 20, where="[experiment] "),
        n_boot=_get(exp, "bootstrap", int, 100, where="[experiment] "),
        alpha=_get(exp, "alpha", float, 0.05, where="[experiment] "),
        restarts=_get(exp, "restarts", int, None, where="[experiment] "),
        base_seed=_get(exp, "base_seed", int, 0, where="[experiment] "),
    )
    grid: list[GridPoint] = []
    idx = 1
    while f"grid.{idx}" in parser:
        sec = parser[f"grid.{idx}"]
        where = f"[grid.{idx}] "
        n = _get(sec, "n", int, where=where)
        k = _get(sec, "k", int, where=where)
        if n is None or k is None:
            raise ConfigError(f"{where}requires n and k")
        grid.append(
            GridPoint(
                n=n,
                k=k,
                beta=_get(sec, "beta", float, where=where),
                omega=_get(sec, "omega", _parse_matrix, where=where),
                fractions=_get(
                    sec, "fractions",
                    lambda s: tuple(float(t) for t in s.split(",")), where=where,
                ),
                density=_get(sec, "density", float, where=where),
                avg_degree=_get(sec, "avg_degree", float, where=where),
                theta_law=_get(sec, "theta_law", _parse_theta_law, where=where),
                true_model=_get(sec, "true_model", str, where=where),
            )
        )
        idx += 1
    stray = [
        s for s in parser.sections()
        if s != "experiment" and not (s.startswith("grid.") and s[5:].isdigit())
    ]
    if stray:
        raise ConfigError(f"unknown section(s): {stray}")
    if not grid:
        raise ConfigError("no [grid.N] sections found")
    spec = replace(spec, grid=tuple(grid))
    spec.validate()
    return spec
