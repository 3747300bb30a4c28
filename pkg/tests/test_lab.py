import csv
import json

import jsonschema
import numpy as np
import pytest

from beurling_lab import lab
from beurling_lab.besov import SeminormParams
from beurling_lab.geometry import GraphDomain, HalfPlane, LipschitzPolygon
from beurling_lab.lab import (ConfigError, DomainSpec, ExperimentConfig, domain_from_dict,
                              emit_reports, family_specs, fourier_graph, generate_family,
                              load_domain, perturbed_polygon, run, run_equivalence,
                              run_theorem_dom)

SMALL = dict(count=1, include_reference=False, steps=(1 / 32, 1 / 64), levels=(4, 5),
             theorem_count=1, theorem_level=4, theorem_scales=(1.0, 2.0))


def test_config_defaults_and_validation():
    cfg = ExperimentConfig()
    assert cfg.params.alpha * cfg.params.p > 1
    with pytest.raises(ConfigError):
        ExperimentConfig(deltas=(0.6,))
    with pytest.raises(ConfigError):
        ExperimentConfig(steps=(1 / 64, 1 / 32), levels=(5, 6))
    with pytest.raises(ConfigError):
        ExperimentConfig(steps=(1 / 64, 1 / 128), levels=(6, 6))
    with pytest.raises(ConfigError):
        ExperimentConfig(degree=40)


def test_config_from_dict():
    cfg = ExperimentConfig.from_dict({"params": {"alpha": 0.5, "p": 4},
                                      "family": {"deltas": [0.1], "count": 3},
                                      "resolution": {"steps": [0.25, 0.125], "levels": [3, 4]}})
    assert cfg.params == SeminormParams(0.5, 4.0)
    assert cfg.deltas == (0.1,) and cfg.count == 3 and cfg.levels == (3, 4)
    for bad in ({"params": {"alpha": 0.3, "p": 2}},       # alpha p <= 1
                {"family": {"deltas": [0.7]}},
                {"unknown": 1},
                {"resolution": {"steps": [0.1], "levels": [3, 4]}}):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(bad)


def test_shipped_configs_validate():
    from pathlib import Path
    root = Path(__file__).resolve().parents[1] / "configs"
    for p in sorted(root.glob("*.json")):
        ExperimentConfig.from_file(p)


def test_family_slopes_and_reference_set():
    cfg = ExperimentConfig(deltas=(0.0, 0.05), count=4, steps=(1 / 64,), levels=(5,))
    specs = family_specs(cfg)
    doms = generate_family(cfg)
    assert len(specs) == len(doms)
    ids = [s.domain_id for s in specs]
    for ref in ("half_plane", "disk", "square", "bump-0.05", "lacunary-0.05"):
        assert ref in ids
    assert len(ids) == len(set(ids))
    for s, d in zip(specs, doms):
        if isinstance(d, GraphDomain):
            slope = d.graph.measured_slope
            if s.delta == 0:
                assert np.all(d.graph.values == 0)
            else:
                assert 0.9 * s.delta <= slope <= s.delta * (1 + 1e-9)


def test_family_is_deterministic():
    a = family_specs(ExperimentConfig(count=3))
    b = family_specs(ExperimentConfig(count=3))
    c = family_specs(ExperimentConfig(count=3, seed=8))
    assert a == b
    assert a[0].coeffs != c[0].coeffs


def test_degenerate_member():
    with pytest.raises(ConfigError):
        fourier_graph([0.0, 0.0], 0.05, 1 / 64)


def test_perturbed_polygon():
    P = perturbed_polygon(0.05, 0)
    assert isinstance(P, LipschitzPolygon)
    assert P.contains(0j)
    base = perturbed_polygon(0.0, 0)
    assert np.max(np.abs(P.vertices - base.vertices)) < 0.05


def test_run_equivalence_small():
    tab = run_equivalence(ExperimentConfig(**SMALL))
    assert not tab.errors
    assert len(tab.rows) == 2
    for r in tab.rows:
        assert r.normal_p > 0 and r.weighted > 0 and r.frac_sobolev > 0 and r.besov > 0
        assert r.log10_r1 == pytest.approx(np.log10(r.weighted / r.normal_p))
    s = tab.summary
    assert s["n_rows"] == 2
    assert s["ratios"]["log10_r1"]["family_spread"] == pytest.approx(1.0)
    assert s["resolution_stability"]["log10_r1"] < 0.5
    assert tab.per_scale


def test_flat_reference_rows():
    cfg = ExperimentConfig(**{**SMALL, "count": 0, "include_reference": True})
    specs = [s for s in family_specs(cfg) if s.kind in ("half_plane", "disk")]
    for s in specs:
        row, _ = lab._measure(s, cfg, 0)
        assert row.weighted == row.frac_sobolev == row.besov == 0
        assert row.log10_r1 is None


def test_failures_are_isolated(monkeypatch):
    cfg = ExperimentConfig(**SMALL)
    good = family_specs(cfg)
    monkeypatch.setattr(lab, "family_specs", lambda c: good + [DomainSpec("broken", "nope", 0.05)])
    tab = run_equivalence(cfg)
    assert len(tab.rows) == 2
    assert {e["domain_id"] for e in tab.errors} == {"broken"}


def test_theorem_dom_rows():
    rows, errs = run_theorem_dom(ExperimentConfig(**SMALL))
    assert not errs
    byid = {r.domain_id: r for r in rows}
    disk = byid["disk"]
    assert disk.energy == 0 and disk.normal > 0 and disk.c_without_term is None
    a, b = byid["rounded_square-x1"], byid["rounded_square-x2"]
    # every term scales like lambda^{2/p - alpha}
    assert a.implied_c == pytest.approx(b.implied_c, rel=1e-6)
    for r in rows:
        assert r.normal <= r.implied_c * (r.energy + r.h1_term) * (1 + 1e-12)


def test_reports_schema_and_determinism(tmp_path):
    cfg = ExperimentConfig(**SMALL)
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    for name in ("equivalence.csv", "theorem_dom.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    jsonschema.validate(summary, lab.load_schema("summary.schema.json"))
    assert summary["discretization"]["levels"] == [4, 5]
    with open(tmp_path / "a" / "equivalence.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 and float(rows[0]["normal_p"]) > 0
    dat = sorted((tmp_path / "a" / "scales").glob("*.dat"))
    assert len(dat) == 2
    # the finest file accounts for the whole weighted energy
    text = dat[-1].read_text().splitlines()
    parts = {l.split()[1]: float(l.split()[2]) for l in text[:2]}
    levels = [l.split() for l in text if not l.startswith("#")]
    assert levels and all(len(l) == 3 for l in levels)
    total = sum(float(l[2]) for l in levels) + parts["collar"] + parts["tail"]
    assert total == pytest.approx(float(rows[1]["weighted"]), rel=1e-9)


def test_emit_rejects_bad_summary(tmp_path, monkeypatch):
    cfg = ExperimentConfig(**SMALL)
    tab = run_equivalence(cfg)
    tab.summary["n_rows"] = -1
    with pytest.raises(jsonschema.ValidationError):
        emit_reports({"equivalence": tab}, cfg, tmp_path)


def test_domain_loader(tmp_path):
    assert isinstance(domain_from_dict({"variant": "half_plane"}), HalfPlane)
    d = domain_from_dict({"variant": "disk", "center": [1, 2], "radius": 3})
    assert d.center == 1 + 2j and d.radius == 3
    P = domain_from_dict({"variant": "polygon", "vertices": [[1, -1], [1, 1], [-1, 1], [-1, -1]]})
    assert P.contains(0j)
    x = np.linspace(-0.5, 1.0, 7)
    A = np.maximum(0, 0.1 * (0.75 - np.abs(x - 0.25)))
    A[[0, -1]] = 0
    g = domain_from_dict({"variant": "graph", "samples": {"x": x.tolist(), "A": A.tolist()}})
    assert g.graph.lo <= -g.graph.support_radius and g.graph(x) == pytest.approx(A)
    (tmp_path / "a.csv").write_text("x,A\n" + "\n".join(f"{float(a)!r},{float(b)!r}" for a, b in zip(x, A)))
    (tmp_path / "g.json").write_text(json.dumps({"variant": "graph", "csv": "a.csv"}))
    g2 = load_domain(tmp_path / "g.json")
    assert np.array_equal(g2.graph.values, g.graph.values)


@pytest.mark.parametrize("bad", [{"variant": "blob"}, {"radius": 1}, {"variant": "graph"},
                                 {"variant": "disk", "radius": -1},
                                 {"variant": "graph", "samples": {"x": [0, 1, 3], "A": [0, 0, 0]}},
                                 {"variant": "polygon", "vertices": [[0, 0], [1, 1]]}])
def test_domain_loader_errors(bad):
    with pytest.raises((ConfigError, ValueError)):
        domain_from_dict(bad)


def test_bump_ratios_resolution_stable():
    cfg = ExperimentConfig(count=0, steps=(1 / 64, 1 / 128), levels=(5, 6))
    spec = DomainSpec("bump", "bump", 0.05)
    (a, sa), (b, sb) = lab._measure(spec, cfg, 0), lab._measure(spec, cfg, 1)
    for key in lab.RATIOS:
        assert abs(10 ** (getattr(b, key) - getattr(a, key)) - 1) < 0.15
    # the unresolved collar shrinks along the ladder
    assert sb["collar"] < sa["collar"]


def test_delta_sweep_spread_bounded():
    cfg = ExperimentConfig(deltas=(0.025, 0.05, 0.1), count=3, include_reference=False,
                           steps=(1 / 64,), levels=(5,))
    tab = run_equivalence(cfg)
    assert not tab.errors
    for key in lab.RATIOS:
        vals = [getattr(r, key) for r in tab.rows]
        assert 10 ** (max(vals) - min(vals)) < 100
