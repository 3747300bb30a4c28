"""Experiment runner: domain families, equivalence tables and reports.

The equivalence experiment measures, per domain and resolution, the three
energies of B chi (weighted derivative, fractional Sobolev, Besov) and the
boundary-normal seminorm ||N||^p, and reports their ratios in log10.  The
additive-term experiment evaluates both sides of
||N|| <= c ||B chi||_{W^{alpha,p}} + c H^1(boundary)^{2/p - alpha}
on bounded domains and reports the implied constant c.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .besov import BesovError, SeminormParams, normal_besov
from .beurling import (BeurlingError, besov_energy, frac_sobolev_energy, weighted_energy,
                       whitney_for)
from .geometry import (Disk, GeometryError, GraphDomain, HalfPlane, LipschitzGraph,
                       LipschitzPolygon, rounded_square, square_polygon)

log = logging.getLogger(__name__)

MAX_DELTA = 0.5
MAX_DEGREE = 32
_DENSE = 8193


class ConfigError(ValueError):
    pass


def load_schema(name: str) -> dict:
    return json.loads(resources.files("beurling_lab").joinpath("schemas", name).read_text())


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment configuration.

    ``steps`` (graph sampling steps, decreasing) and ``levels`` (Whitney
    depths, increasing) form the resolution ladder, finest last.
    """

    deltas: tuple = (0.05,)
    seed: int = 7
    count: int = 20
    degree: int = 8
    include_reference: bool = True
    params: SeminormParams = field(default_factory=lambda: SeminormParams(0.6, 3.0))
    steps: tuple = (1 / 128, 1 / 256)
    levels: tuple = (6, 7)
    n_radial: int = 6
    n_angular: int = 8
    replicates: int = 2
    sample_seed: int = 0
    theorem_deltas: tuple = (0.05,)
    theorem_count: int = 3
    theorem_scales: tuple = (1.0, 2.0)
    theorem_level: int = 6
    run: tuple = ("equivalence", "theorem_dom")
    out_dir: str = "lab_out"
    threads: int = 1

    def __post_init__(self):
        if any(not (0 <= d <= MAX_DELTA) for d in self.deltas + self.theorem_deltas):
            raise ConfigError(f"delta values must lie in [0, {MAX_DELTA}]")
        if len(self.steps) != len(self.levels) or not self.steps:
            raise ConfigError("steps and levels must have the same non-zero length")
        if any(b >= a for a, b in zip(self.steps, self.steps[1:])):
            raise ConfigError("resolution ladder must refine: steps strictly decreasing")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ConfigError("resolution ladder must refine: levels strictly increasing")
        if not 1 <= self.degree <= MAX_DEGREE:
            raise ConfigError(f"degree must lie in [1, {MAX_DEGREE}]")
        if self.count < 0 or self.threads < 1:
            raise ConfigError("count must be >= 0 and threads >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(d, load_schema("config.schema.json"))
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"config: {exc.message}") from exc
        fam = d.get("family", {})
        res = d.get("resolution", {})
        smp = d.get("sampling", {})
        thm = d.get("theorem_dom", {})
        par = d.get("params", {})
        kw = {}
        try:
            kw["params"] = SeminormParams(float(par.get("alpha", 0.6)), float(par.get("p", 3.0)))
        except BesovError as exc:
            raise ConfigError(str(exc)) from exc
        if "deltas" in fam:
            kw["deltas"] = tuple(float(x) for x in fam["deltas"])
        for key in ("seed", "count", "degree", "include_reference"):
            if key in fam:
                kw[key] = fam[key]
        if "steps" in res:
            kw["steps"] = tuple(float(x) for x in res["steps"])
        if "levels" in res:
            kw["levels"] = tuple(int(x) for x in res["levels"])
        for key in ("n_radial", "n_angular", "replicates"):
            if key in smp:
                kw[key] = int(smp[key])
        if "seed" in smp:
            kw["sample_seed"] = int(smp["seed"])
        if "deltas" in thm:
            kw["theorem_deltas"] = tuple(float(x) for x in thm["deltas"])
        if "count" in thm:
            kw["theorem_count"] = int(thm["count"])
        if "scales" in thm:
            kw["theorem_scales"] = tuple(float(x) for x in thm["scales"])
        if "level" in thm:
            kw["theorem_level"] = int(thm["level"])
        if "run" in d:
            kw["run"] = tuple(d["run"])
        if "out_dir" in d.get("outputs", {}):
            kw["out_dir"] = d["outputs"]["out_dir"]
        if "threads" in d:
            kw["threads"] = int(d["threads"])
        return cls(**kw)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["params"] = {"alpha": self.params.alpha, "p": self.params.p, "s": self.params.s}
        # execution details, not part of the experiment
        d.pop("threads")
        d.pop("out_dir")
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


# ---------------------------------------------------------------------------
# domain families


def _window_graph(func, dfunc, delta: float, step: float, pad: float) -> GraphDomain:
    """Graph of (1 - x^2) S(x) on [-1, 1], rescaled so that max |A'| = delta."""
    x = np.linspace(-1, 1, _DENSE)
    slope = np.max(np.abs(-2 * x * func(x) + (1 - x ** 2) * dfunc(x)))
    if delta == 0:
        scale = 0.0
    elif not slope > 0:
        raise ConfigError("degenerate family member: cannot reach the requested slope")
    else:
        scale = delta / slope
    A = LipschitzGraph.from_callable(lambda t: scale * (1 - t ** 2) * func(t), 1.0, step, pad=pad)
    return GraphDomain(A)


def fourier_graph(coeffs, delta: float, step: float, pad: float = 0.5) -> GraphDomain:
    """A(x) = c (1 - x^2) sum_k a_k sin(k pi (x + 1) / 2) on [-1, 1], zero outside.

    The window makes A' vanish at +-1, so the graph has no corners; c is
    chosen from a dense evaluation of the exact derivative.
    """
    a = np.asarray(coeffs, float)
    k = np.arange(1, a.size + 1)

    def S(x):
        return np.sin(np.multiply.outer(x, k) * np.pi / 2 + k * np.pi / 2) @ a

    def dS(x):
        return np.cos(np.multiply.outer(x, k) * np.pi / 2 + k * np.pi / 2) @ (a * k * np.pi / 2)
    return _window_graph(S, dS, delta, step, pad)


def bump_graph(delta: float, step: float, pad: float = 0.5) -> GraphDomain:
    return fourier_graph([1.0], delta, step, pad)


def lacunary_graph(delta: float, step: float, terms: int = 4, decay: float = 1.6,
                   pad: float = 0.5) -> GraphDomain:
    k = 2.0 ** np.arange(1, terms + 1)
    c = k ** -decay

    def S(x):
        return np.sin(np.pi * np.multiply.outer(x, k)) @ c

    def dS(x):
        return np.cos(np.pi * np.multiply.outer(x, k)) @ (c * np.pi * k)
    return _window_graph(S, dS, delta, step, pad)


def random_coefficients(seed: int, index: int, degree: int) -> np.ndarray:
    rng = np.random.default_rng([seed, index])
    return rng.standard_normal(degree) / np.arange(1, degree + 1) ** 2


@dataclass(frozen=True)
class DomainSpec:
    """Recipe for a family member; ``build(step)`` instantiates it at a resolution."""

    domain_id: str
    kind: str
    delta: float | None
    coeffs: tuple = ()

    @property
    def flat(self) -> bool:
        return self.kind in ("half_plane", "disk") or self.delta == 0

    def build(self, step: float):
        if self.kind == "fourier":
            return fourier_graph(self.coeffs, self.delta, step)
        if self.kind == "bump":
            return bump_graph(self.delta, step)
        if self.kind == "lacunary":
            return lacunary_graph(self.delta, step)
        if self.kind == "half_plane":
            return HalfPlane()
        if self.kind == "disk":
            return Disk(0j, 1.0)
        if self.kind == "square":
            return square_polygon(2.0, 16)
        raise ConfigError(f"unknown family kind {self.kind!r}")


def reference_specs(delta: float) -> list[DomainSpec]:
    return [DomainSpec("half_plane", "half_plane", None), DomainSpec("disk", "disk", None),
            DomainSpec("square", "square", None), DomainSpec(f"bump-{delta:g}", "bump", delta),
            DomainSpec(f"lacunary-{delta:g}", "lacunary", delta)]


def family_specs(config: ExperimentConfig) -> list[DomainSpec]:
    out = []
    seen = set()
    for delta in config.deltas:
        for i in range(config.count):
            out.append(DomainSpec(f"fourier-{delta:g}-{i:03d}", "fourier", delta,
                                  tuple(random_coefficients(config.seed, i, config.degree))))
        if config.include_reference:
            for s in reference_specs(delta):
                if s.domain_id not in seen:
                    seen.add(s.domain_id)
                    out.append(s)
    return out


def generate_family(config: ExperimentConfig, step: float | None = None) -> list:
    """Domains of the family (random graphs then the reference set) at ``step``."""
    step = config.steps[-1] if step is None else step
    return [s.build(step) for s in family_specs(config)]


# ---------------------------------------------------------------------------
# equivalence


@dataclass
class EquivalenceRow:
    domain_id: str
    kind: str
    delta: float | None
    resolution: int
    step: float
    level: int
    normal_p: float
    weighted: float
    frac_sobolev: float
    besov: float
    besov_restricted: float
    frac_se: float
    besov_se: float
    log10_r1: float | None
    log10_r2: float | None
    log10_r3: float | None

    def check(self, flat: bool) -> None:
        vals = (self.normal_p, self.weighted, self.frac_sobolev, self.besov)
        if not all(math.isfinite(v) for v in vals):
            raise BeurlingError(f"{self.domain_id}: non-finite entries")
        if not flat and not all(v > 0 for v in vals):
            raise BeurlingError(f"{self.domain_id}: non-positive entries on a non-flat domain")


@dataclass
class EquivalenceTable:
    rows: list
    summary: dict
    errors: list
    per_scale: dict = field(default_factory=dict, repr=False)


def _log_ratio(num: float, den: float):
    return math.log10(num / den) if num > 0 and den > 0 else None


def _measure(spec: DomainSpec, config: ExperimentConfig, r: int, workers: int = 1):
    step, level = config.steps[r], config.levels[r]
    dom = spec.build(step)
    prm = config.params
    W = whitney_for(dom, level)
    we = weighted_energy(dom, prm, W, workers=workers)
    kw = dict(n_radial=config.n_radial, n_angular=config.n_angular, replicates=config.replicates,
              seed=config.sample_seed, workers=workers)
    fe = frac_sobolev_energy(dom, prm, W, **kw)
    be = besov_energy(dom, prm, W, **kw)
    npow = normal_besov(dom, prm).value ** prm.p
    row = EquivalenceRow(spec.domain_id, spec.kind, spec.delta, r, step, level, npow, we.power,
                         fe.power, be.power, be.restricted or 0.0, fe.standard_error, be.standard_error,
                         _log_ratio(we.power, npow), _log_ratio(fe.power, npow),
                         _log_ratio(be.power, npow))
    row.check(spec.flat)
    scales: dict = {}
    for lvl, _, _, _, _, _, c in we.cubes:
        n, tot = scales.get(lvl, (0, 0.0))
        scales[lvl] = (n + 1, tot + c)
    return row, {"levels": sorted((k, n, t) for k, (n, t) in scales.items()),
                 "collar": we.collar_estimate, "tail": we.tail}


def _ordered_map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


RATIOS = ("log10_r1", "log10_r2", "log10_r3")


def summarize(rows: list, n_res: int) -> dict:
    """Ratio ranges at the finest resolution and stability along the ladder."""
    top = n_res - 1
    out: dict = {"ratios": {}, "resolution_stability": {}, "richardson_slope": {}, "by_delta": {}}
    by_dom: dict = {}
    for row in rows:
        by_dom.setdefault(row.domain_id, {})[row.resolution] = row
    for key in RATIOS:
        vals = [getattr(r, key) for r in rows if r.resolution == top and getattr(r, key) is not None]
        fam = [getattr(r, key) for r in rows
               if r.resolution == top and r.kind == "fourier" and getattr(r, key) is not None]
        out["ratios"][key] = {
            "min": min(vals) if vals else None, "max": max(vals) if vals else None,
            "family_spread": 10 ** (max(fam) - min(fam)) if fam else None,
        }
        changes, slopes = [], []
        for d in by_dom.values():
            seq = [getattr(d[k], key) for k in sorted(d)]
            if len(seq) >= 2 and all(v is not None for v in seq[-2:]):
                changes.append(abs(10 ** (seq[-1] - seq[-2]) - 1))
            if len(seq) >= 3 and all(v is not None for v in seq[-3:]):
                d1, d2 = abs(seq[-2] - seq[-3]), abs(seq[-1] - seq[-2])
                if d1 > 0 and d2 > 0:
                    slopes.append(math.log2(d1 / d2))
        out["resolution_stability"][key] = max(changes) if changes else None
        out["richardson_slope"][key] = float(np.median(slopes)) if slopes else None
    deltas = sorted({r.delta for r in rows if r.kind == "fourier"})
    for delta in deltas:
        sub = {}
        for key in RATIOS:
            v = [getattr(r, key) for r in rows if r.kind == "fourier" and r.delta == delta
                 and r.resolution == top and getattr(r, key) is not None]
            sub[key] = 10 ** (max(v) - min(v)) if v else None
        out["by_delta"][f"{delta:g}"] = sub
    return out


def run_equivalence(config: ExperimentConfig) -> EquivalenceTable:
    """All energies and ||N||^p per domain and resolution; failures are isolated."""
    specs = family_specs(config)
    jobs = [(s, r) for s in specs for r in range(len(config.steps))]

    def one(job):
        s, r = job
        try:
            return _measure(s, config, r), None
        except (BeurlingError, BesovError, GeometryError, ConfigError, FloatingPointError) as exc:
            log.warning("%s at resolution %d failed: %s", s.domain_id, r, exc)
            return None, {"domain_id": s.domain_id, "resolution": r, "error": str(exc)}

    results = _ordered_map(one, jobs, config.threads)
    rows, errors, per_scale = [], [], {}
    for (s, r), (res, err) in zip(jobs, results):
        if err is not None:
            errors.append(err)
            continue
        row, scales = res
        rows.append(row)
        per_scale[f"{s.domain_id}_r{r}"] = scales
    summary = summarize(rows, len(config.steps))
    summary.update(n_rows=len(rows), n_errors=len(errors))
    return EquivalenceTable(rows, summary, errors, per_scale)


# ---------------------------------------------------------------------------
# additive-term experiment


@dataclass
class TheoremDomRow:
    domain_id: str
    scale: float
    normal: float
    energy: float
    h1: float
    h1_term: float
    implied_c: float
    c_without_term: float | None


def perturbed_polygon(delta: float, index: int, seed: int = 11, modes: int = 6) -> LipschitzPolygon:
    """Rounded square whose boundary is pushed along its normal by a random smooth profile.

    The displacement is a trigonometric polynomial in arc length with
    max |derivative| = delta.
    """
    base = rounded_square(2.0, 0.4, 16, edge_points=32)
    v = base.vertices
    L = base.length
    s = np.concatenate([[0.0], np.cumsum(base.edge_lengths)[:-1]])
    tang = np.roll(v, -1) - np.roll(v, 1)
    nrm = -1j * tang / np.abs(tang)
    rng = np.random.default_rng([seed, index])
    k = np.arange(1, modes + 1)
    a = rng.standard_normal(modes) / k ** 2
    ph = rng.uniform(0, 2 * np.pi, modes)
    arg = 2 * np.pi * np.multiply.outer(s, k) / L + ph
    f = np.sin(arg) @ a
    dense = np.linspace(0, L, 4096, endpoint=False)
    df = np.cos(2 * np.pi * np.multiply.outer(dense, k) / L + ph) @ (a * 2 * np.pi * k / L)
    scale = delta / np.max(np.abs(df)) if delta > 0 else 0.0
    return LipschitzPolygon(v + scale * f * nrm)


def theorem_dom_domains(config: ExperimentConfig) -> list[tuple[str, float, object]]:
    out = [("disk", 1.0, Disk(0j, 1.0))]
    for lam in config.theorem_scales:
        out.append((f"rounded_square-x{lam:g}", lam, rounded_square(2.0, 0.4, 16).dilated(lam)))
    for delta in config.theorem_deltas:
        for i in range(config.theorem_count):
            out.append((f"perturbed-{delta:g}-{i:02d}", 1.0, perturbed_polygon(delta, i)))
    return out


def run_theorem_dom(config: ExperimentConfig) -> tuple[list, list]:
    """Both sides of ||N|| <= c ||B chi||_{W^{alpha,p}} + c H^1^{2/p - alpha} on bounded domains."""
    prm = config.params
    expo = 2 / prm.p - prm.alpha

    def one(item):
        name, lam, dom = item
        try:
            nv = normal_besov(dom, prm).value
            W = whitney_for(dom, config.theorem_level)
            ev = frac_sobolev_energy(dom, prm, W, n_radial=config.n_radial, n_angular=config.n_angular,
                                     replicates=config.replicates, seed=config.sample_seed).value
            h1 = float(dom.length)
            term = h1 ** expo
            return TheoremDomRow(name, lam, nv, ev, h1, term, nv / (ev + term),
                                 nv / ev if ev > 0 else None), None
        except (BeurlingError, BesovError, GeometryError) as exc:
            log.warning("%s failed: %s", name, exc)
            return None, {"domain_id": name, "error": str(exc)}

    res = _ordered_map(one, theorem_dom_domains(config), config.threads)
    rows = [r for r, _ in res if r is not None]
    errs = [e for _, e in res if e is not None]
    return rows, errs


# ---------------------------------------------------------------------------
# reports


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def _write_csv(path: Path, cls, rows) -> None:
    names = [f.name for f in fields(cls)]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(names)
        for r in rows:
            wr.writerow(["" if getattr(r, n) is None else
                         (repr(float(getattr(r, n))) if isinstance(getattr(r, n), float) else getattr(r, n))
                         for n in names])


def emit_reports(tables: dict, config: ExperimentConfig, out_dir=None) -> list[Path]:
    """CSV tables, per-scale .dat files and a schema-checked JSON summary."""
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    eq = tables.get("equivalence")
    td = tables.get("theorem_dom")
    errors = []
    summary: dict = {"config": config.as_dict(), "discretization": {
        "steps": list(config.steps), "levels": list(config.levels), "samples_per_cube": 3,
        "n_radial": config.n_radial, "n_angular": config.n_angular, "replicates": config.replicates}}
    p = out / "equivalence.csv"
    _write_csv(p, EquivalenceRow, eq.rows if eq is not None else [])
    written.append(p)
    if eq is not None:
        summary["equivalence"] = eq.summary
        errors += eq.errors
        sd = out / "scales"
        sd.mkdir(exist_ok=True)
        for key in sorted(eq.per_scale):
            q = sd / f"{key}.dat"
            with open(q, "w") as fh:
                sc = eq.per_scale[key]
                fh.write(f"# collar {sc['collar']!r}\n# tail {sc['tail']!r}\n")
                fh.write("# level n_cubes weighted_contribution\n")
                for lvl, n, c in sc["levels"]:
                    fh.write(f"{lvl} {n} {c!r}\n")
            written.append(q)
    p = out / "theorem_dom.csv"
    _write_csv(p, TheoremDomRow, td[0] if td is not None else [])
    written.append(p)
    if td is not None:
        errors += td[1]
        cs = [r.implied_c for r in td[0]]
        summary["theorem_dom"] = {"max_implied_c": max(cs) if cs else None, "n_rows": len(td[0])}
    summary["errors"] = errors
    summary = _clean(summary)
    jsonschema.validate(summary, load_schema("summary.schema.json"))
    p = out / "summary.json"
    p.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written.append(p)
    return written


def run(config: ExperimentConfig, out_dir=None) -> tuple[dict, list]:
    """Run the configured experiments and write the reports; returns (tables, errors)."""
    tables: dict = {}
    if "equivalence" in config.run:
        tables["equivalence"] = run_equivalence(config)
    if "theorem_dom" in config.run:
        tables["theorem_dom"] = run_theorem_dom(config)
    emit_reports(tables, config, out_dir)
    errors = list(tables["equivalence"].errors) if "equivalence" in tables else []
    if "theorem_dom" in tables:
        errors += tables["theorem_dom"][1]
    return tables, errors


# ---------------------------------------------------------------------------
# domain description files


def _xy(v, name):
    try:
        a, b = v
        return complex(float(a), float(b))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a pair of numbers") from exc


def _graph_from_samples(x, A, support_radius=None) -> GraphDomain:
    x = np.asarray(x, float)
    A = np.asarray(A, float)
    if x.ndim != 1 or x.shape != A.shape or x.size < 2:
        raise ConfigError("graph samples need matching x and A columns")
    h = np.diff(x)
    if not (np.all(h > 0) and np.allclose(h, h[0], rtol=1e-9, atol=0)):
        raise ConfigError("graph samples must lie on a uniform increasing grid")
    step = float(h[0])
    nz = np.nonzero(A)[0]
    if support_radius is None:
        support_radius = float(np.max(np.abs(x[nz]))) + step if nz.size else step
    R = float(support_radius)
    # zero-pad so that the sampled range covers [-R, R]
    left = max(0, int(math.ceil((x[0] + R) / step - 1e-9)))
    right = max(0, int(math.ceil((R - x[-1]) / step - 1e-9)))
    vals = np.concatenate([np.zeros(left), A, np.zeros(right)])
    origin = float(x[0] - left * step)
    slope = float(np.max(np.abs(np.diff(vals)))) / step
    try:
        return GraphDomain(LipschitzGraph(origin, step, vals, True, slope, R))
    except GeometryError as exc:
        raise ConfigError(f"graph samples: {exc}") from exc


def domain_from_dict(d: dict, base: Path | None = None):
    """Build a domain from its JSON description.

    Keys by variant:

    * ``half_plane``: ``point`` [x, y], ``direction`` [x, y] (domain on the left)
    * ``disk``: ``center`` [x, y], ``radius``
    * ``graph``: ``samples`` {"x": [...], "A": [...]} or ``csv`` (path with
      columns x,A, relative to the file), optional ``support_radius``
    * ``polygon``: ``vertices`` [[x, y], ...] counter-clockwise
    """
    if not isinstance(d, dict) or "variant" not in d:
        raise ConfigError("domain description needs a 'variant' key")
    kind = d["variant"]
    try:
        if kind == "half_plane":
            return HalfPlane(_xy(d.get("point", (0, 0)), "point"), _xy(d.get("direction", (1, 0)), "direction"))
        if kind == "disk":
            return Disk(_xy(d.get("center", (0, 0)), "center"), float(d.get("radius", 1.0)))
        if kind == "polygon":
            v = np.array([_xy(p, "vertex") for p in d["vertices"]])
            return LipschitzPolygon(v)
        if kind == "graph":
            if "samples" in d:
                x, A = d["samples"]["x"], d["samples"]["A"]
            elif "csv" in d:
                p = Path(d["csv"])
                if base is not None and not p.is_absolute():
                    p = base / p
                with open(p, newline="") as fh:
                    rows = list(csv.DictReader(fh))
                x = [float(r["x"]) for r in rows]
                A = [float(r["A"]) for r in rows]
            else:
                raise ConfigError("graph domain needs 'samples' or 'csv'")
            return _graph_from_samples(x, A, d.get("support_radius"))
    except (KeyError, TypeError, ValueError, OSError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad {kind} description: {exc}") from exc
    raise ConfigError(f"unknown domain variant {kind!r}")


def load_domain(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read domain file {path}: {exc}") from exc
    return domain_from_dict(data, path.parent)
