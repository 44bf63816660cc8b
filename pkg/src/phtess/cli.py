"""Command line experiment runner.

Subcommands::

    phtess census  --config cfg.json [--seed S] [--replicates K] [--out DIR] [--threads N]
    phtess event   --config cfg.json ...
    phtess certify --config cfg.json ...
    phtess render  --config cfg.json ...

Exit codes: 0 ok, 2 configuration error, 3 certification refused,
4 internal invariant violated.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .combinatorics import catalog, reference_polytope, canonical_type
from .construction import (
    BulletViolation,
    CertificationRefused,
    TargetSpec,
    classify_event,
    event_probability,
    event_realization,
    verify_bullet_on_event,
)
from .estimator import CensusRadiusError, census, sandwich_check, tail_relative_variation, type_predicate, all_cells
from .geometry import DegenerateArrangementError, ball_volume, extract_cells
from .model import ProcessIntensity, distribution_from_spec
from .sampler import general_position_report, sample_process

log = logging.getLogger("phtess")

EXIT_OK, EXIT_CONFIG, EXIT_REFUSED, EXIT_INVARIANT = 0, 2, 3, 4
EVENT_CHUNK = 500
VOLUME_TOL = 1e-6

DEFAULTS = {
    "dimension": 2,
    "gamma": 1.0,
    "distribution": {"kind": "isotropic"},
    "window_radius": 20.0,
    "sample_radius": None,
    "radii": None,
    "ladder": {"count": 10, "min_fraction": 0.25, "max_fraction": 0.5},
    "seeds": None,
    "base_seed": 0,
    "replicates": 1,
    "targets": [],
    "event": {"trials": 10000, "seed": 0, "conditional": 100, "density_check": True},
    "sandwich": None,
    "render": False,
    "output_dir": "out",
    "general_position_max_hyperplanes": 400,
    "tolerances": {
        "general_position": 1e-9,
        "tail_variation": 0.1,
        "positive_fraction": 0.95,
        "sigmas": 3.0,
    },
}

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "dimension": {"type": "integer", "minimum": 2},
        "gamma": _POS,
        "distribution": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["isotropic", "atomic", "density"]},
                "atoms": {"type": "array", "minItems": 1,
                          "items": {"type": "array", "minItems": 2, "maxItems": 2}},
                "name": {"type": "string"},
                "params": {"type": "object"},
            },
        },
        "window_radius": _POS,
        "sample_radius": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "radii": {"type": ["array", "null"], "items": _POS, "minItems": 1},
        "ladder": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"count": {"type": "integer", "minimum": 1},
                           "min_fraction": _POS, "max_fraction": _POS},
        },
        "seeds": {"type": ["array", "null"], "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "base_seed": {"type": "integer", "minimum": 0},
        "replicates": {"type": "integer", "minimum": 1},
        "targets": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["eps", "D"],
                "properties": {
                    "name": {"type": "string"},
                    "vertices": {"type": "array", "items": {"type": "array", "items": _NUM}},
                    "eps": _POS,
                    "D": _POS,
                    "draws": {"type": "integer", "minimum": 1},
                    "cert_seed": {"type": "integer", "minimum": 0},
                    "trials": {"type": "integer", "minimum": 0},
                },
                "anyOf": [{"required": ["name"]}, {"required": ["vertices"]}],
            },
        },
        "event": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"trials": {"type": "integer", "minimum": 0},
                           "seed": {"type": "integer", "minimum": 0},
                           "conditional": {"type": "integer", "minimum": 0},
                           "density_check": {"type": "boolean"}},
        },
        "sandwich": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "required": ["radii"],
            "properties": {"radii": {"type": "array", "items": _POS, "minItems": 1},
                           "points": {"type": "integer", "minimum": 100},
                           "predicates": {"type": "array", "items": {"type": "string"}}},
        },
        "render": {"type": "boolean"},
        "output_dir": {"type": "string"},
        "general_position_max_hyperplanes": {"type": "integer", "minimum": 0},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"general_position": _POS, "tail_variation": _POS,
                           "positive_fraction": _POS, "sigmas": _POS},
        },
    },
}


class ConfigError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    pass


class RefusedRun(RuntimeError):
    """Certification refused; ``files`` documents the refusal."""

    def __init__(self, message, files):
        super().__init__(message)
        self.files = files


# ---------------------------------------------------------------------------
# configuration

def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(source, seed=None, replicates=None, out=None):
    """Validate a config (path, JSON text or dict) and fill in defaults."""
    if isinstance(source, dict):
        raw = source
    else:
        text = Path(source).read_text() if not str(source).lstrip().startswith("{") else source
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {path}: {exc.message}") from exc
    cfg = _merge(DEFAULTS, raw)
    if seed is not None:
        cfg["base_seed"], cfg["seeds"] = int(seed), None
    if replicates is not None:
        if replicates < 1:
            raise ConfigError("replicates must be at least 1")
        cfg["replicates"], cfg["seeds"] = int(replicates), None
    if out is not None:
        cfg["output_dir"] = str(out)
    d = cfg["dimension"]
    R = float(cfg["window_radius"])
    if cfg["sample_radius"] is None:
        cfg["sample_radius"] = R * math.sqrt(d)
    if cfg["sample_radius"] < R:
        raise ConfigError("sample_radius must be at least window_radius")
    if cfg["radii"] is None:
        lad = cfg["ladder"]
        top = lad["max_fraction"] * R
        cfg["radii"] = [float(x) for x in np.linspace(lad["min_fraction"] * R, top, lad["count"])]
    cfg["radii"] = sorted(float(x) for x in cfg["radii"])
    if cfg["radii"][-1] >= R:
        raise ConfigError(f"largest ladder radius {cfg['radii'][-1]:g} must be below window_radius {R:g}")
    if cfg["seeds"] is None:
        cfg["seeds"] = [cfg["base_seed"] + i for i in range(cfg["replicates"])]
    cfg["seeds"] = sorted(set(int(s) for s in cfg["seeds"]))
    try:
        distribution_from_spec(cfg["distribution"], d)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad distribution: {exc}") from exc
    return cfg


def _dist(cfg):
    return distribution_from_spec(cfg["distribution"], cfg["dimension"])


def _intensity(cfg):
    return ProcessIntensity(float(cfg["gamma"]))


# ---------------------------------------------------------------------------
# census

def _predicate(name, d):
    if name == "all":
        return all_cells
    return type_predicate(canonical_type(reference_polytope(name)))


def census_task(cfg, seed, max_diameter=None):
    """One replicate; every failure is caught and reported in the result."""
    d = cfg["dimension"]
    R = float(cfg["window_radius"])
    res = {"seed": seed, "status": "ok", "message": ""}
    try:
        sample = sample_process(_dist(cfg), _intensity(cfg), cfg["sample_radius"], seed)
        res["n_hyperplanes"] = len(sample)
        if len(sample) <= cfg["general_position_max_hyperplanes"]:
            gp = general_position_report(sample, cfg["tolerances"]["general_position"])
            res["general_position"] = gp.summary()
        else:
            res["general_position"] = None
        cells = extract_cells(sample, R)
        res["n_cells"] = len(cells)
        vol = sum(c.volume for c in cells)
        rel = abs(vol - (2 * R) ** d) / (2 * R) ** d
        res["volume_rel_error"] = rel
        if rel > VOLUME_TOL:
            res.update(status="invariant", message=f"cell volumes miss the window volume by {rel:.3g}")
            return res
        tc = census(cells, cfg["radii"], window_radius=R, max_diameter=max_diameter)
        res["max_safe_radius"] = tc.max_safe_radius
        res["counts"] = {fp.hex: {"contained": tc.contained[fp].tolist(),
                                  "centered": tc.centered[fp].tolist()} for fp in tc.centered}
        res["types"] = {fp.hex: {"name": fp.name, "facets": fp.n_facets,
                                 "vertices": fp.n_vertices, "f_vector": list(fp.f_vector)}
                        for fp in tc.centered}
        sw = cfg.get("sandwich")
        if sw:
            res["sandwich"] = []
            for name in sw.get("predicates", ["all"]):
                pred = _predicate(name, d)
                for n in sw["radii"]:
                    rep = sandwich_check(cells, pred, n, R, seed=seed,
                                         n_points=sw.get("points", 10_000),
                                         sigmas=cfg["tolerances"]["sigmas"])
                    res["sandwich"].append({"predicate": name, "n": n, "lower": rep.lower,
                                            "lower_se": rep.lower_se, "middle": rep.middle,
                                            "upper": rep.upper, "upper_se": rep.upper_se,
                                            "holds": rep.holds})
    except DegenerateArrangementError as exc:
        res.update(status="degenerate", message=str(exc))
    except CensusRadiusError as exc:
        res.update(status="radius", message=str(exc), max_safe_radius=exc.max_safe)
    except Exception as exc:  # isolate any other per-seed failure
        res.update(status="error", message=f"{type(exc).__name__}: {exc}")
    return res


def _run_pool(fn, jobs, threads):
    if threads <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        futures = [ex.submit(fn, *job) for job in jobs]
        return [f.result() for f in futures]


def _ordered_types(results, k):
    tot = {}
    for r in results:
        for h, c in r["counts"].items():
            tot[h] = tot.get(h, 0) + c["centered"][k]
    return sorted(tot, key=lambda h: (-tot[h], h))


def run_census_experiment(cfg, threads=1):
    """Run all replicates; returns ``(files, exit_code)`` with file contents as text."""
    d = cfg["dimension"]
    radii = np.array(cfg["radii"])
    vols = np.array([ball_volume(n, d) for n in radii])
    top = len(radii) - 1
    results = _run_pool(census_task, [(cfg, s) for s in cfg["seeds"]], threads)
    results.sort(key=lambda r: r["seed"])
    ok = [r for r in results if r["status"] == "ok"]
    for r in results:
        if r["status"] != "ok":
            log.warning("seed %s: %s (%s)", r["seed"], r["status"], r["message"])

    types = {}
    for r in ok:
        types.update(r["types"])
    order = _ordered_types(ok, top)
    header = ["seed", "n", "fingerprint", "name", "count_contained", "count_centered",
              "density_contained", "density_centered"]
    per_seed = [header]
    for r in ok:
        for h in _ordered_types([r], top):
            c = r["counts"][h]
            for i, n in enumerate(radii):
                a, b = c["contained"][i], c["centered"][i]
                per_seed.append([r["seed"], repr(float(n)), h, types[h]["name"] or "", a, b,
                                 repr(float(a / vols[i])), repr(float(b / vols[i]))])
    agg = [header]
    pooled = {}
    for h in order:
        a = np.zeros(len(radii), dtype=np.int64)
        b = np.zeros(len(radii), dtype=np.int64)
        for r in ok:
            if h in r["counts"]:
                a += r["counts"][h]["contained"]
                b += r["counts"][h]["centered"]
        pooled[h] = (a, b)
        for i, n in enumerate(radii):
            agg.append(["all", repr(float(n)), h, types[h]["name"] or "", int(a[i]), int(b[i]),
                        repr(float(a[i] / (vols[i] * len(ok)))),
                        repr(float(b[i] / (vols[i] * len(ok))))])

    tol = cfg["tolerances"]
    type_rows = []
    for h in order:
        a, b = pooled[h]
        per = [np.array(r["counts"][h]["centered"]) / vols if h in r["counts"] else np.zeros(len(radii))
               for r in ok]
        headline = next((p for p in per if p[top] > 0), per[0])
        pos = float(np.mean([p[top] > 0 for p in per]))
        curve = b / (vols * len(ok))
        type_rows.append({
            "fingerprint": h, **types[h],
            "density_centered": float(curve[top]),
            "density_contained": float(a[top] / (vols[top] * len(ok))),
            "contained_over_centered": float(a[top] / b[top]) if b[top] else None,
            "positive_fraction": pos,
            "tail_variation_pooled": tail_relative_variation(curve),
            "tail_variation_headline": tail_relative_variation(headline),
            "converged": bool(tail_relative_variation(curve) < tol["tail_variation"]),
        })
    by_name = {row["name"]: row for row in type_rows if row["name"]}
    verdicts = []
    for (dim, canon), name in sorted(catalog().items(), key=lambda kv: kv[1]):
        if dim != d:
            continue
        row = by_name.get(name)
        frac = row["positive_fraction"] if row else 0.0
        verdict = ("positive" if frac >= tol["positive_fraction"] else
                   "sporadic" if frac > 0 else "not_observed")
        verdicts.append({"name": name, "observed": row is not None,
                         "positive_fraction": frac, "verdict": verdict})

    tot_b = sum(pooled[h][1] for h in order) if order else np.zeros(len(radii))
    tot_a = sum(pooled[h][0] for h in order) if order else np.zeros(len(radii))
    nv_b = sum(types[h]["vertices"] * pooled[h][1] for h in order) if order else np.zeros(len(radii))
    nv_a = sum(types[h]["vertices"] * pooled[h][0] for h in order) if order else np.zeros(len(radii))
    dist = _dist(cfg)
    summary = {
        "version": __version__,
        "config": _provenance(cfg),
        "hypotheses": {
            "supports_full_sphere": dist.supports_full_sphere,
            "vanishes_on_great_subspheres": dist.vanishes_on_great_subspheres,
            "hypotheses_violated": not dist.satisfies_hypotheses,
        },
        "radii": [float(n) for n in radii],
        "seeds": [{k: r.get(k) for k in ("seed", "status", "message", "n_hyperplanes", "n_cells",
                                         "max_safe_radius", "volume_rel_error", "general_position")}
                  for r in results],
        "n_ok": len(ok),
        "n_failed": len(results) - len(ok),
        "n_fingerprints": len(order),
        "types": type_rows,
        "catalog": verdicts,
        "mean_vertex_count": {
            "centered": float(nv_b[top] / tot_b[top]) if len(ok) and tot_b[top] else None,
            "contained": float(nv_a[top] / tot_a[top]) if len(ok) and tot_a[top] else None,
        },
        "contained_over_centered": float(tot_a[top] / tot_b[top]) if len(ok) and tot_b[top] else None,
    }
    if cfg.get("sandwich"):
        summary["sandwich"] = [dict(s, seed=r["seed"]) for r in ok for s in r.get("sandwich", [])]
    files = {"census.csv": _csv(per_seed), "census_aggregate.csv": _csv(agg),
             "summary.json": dumps(summary)}
    if cfg["render"] and d == 2:
        files["render.svg"] = render_text(cfg, cfg["seeds"][0])
    code = EXIT_INVARIANT if any(r["status"] == "invariant" for r in results) else EXIT_OK
    return files, code


# ---------------------------------------------------------------------------
# event experiments

def _wilson(k, n, z):
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


def event_chunk(cfg, spec, start, stop):
    """Monte Carlo trials ``start..stop-1`` of the event for one target."""
    dist, inten = _dist(cfg), _intensity(cfg)
    R = spec.circumradius + 1.0 + spec.eps
    seed = cfg["event"]["seed"]
    out = {"occurrences": [], "a_sum": np.zeros(spec.m), "a_sq": np.zeros(spec.m),
           "c_sum": 0.0, "c_sq": 0.0, "overlaps": 0, "failures": []}
    for t in range(start, stop):
        s = sample_process(dist, inten, R, seed, t)
        ev = classify_event(s, spec)
        a = np.array(ev.a_counts, dtype=float)
        out["a_sum"] += a
        out["a_sq"] += a * a
        out["c_sum"] += ev.c_count
        out["c_sq"] += ev.c_count ** 2
        out["overlaps"] += ev.overlaps
        if ev.occurred:
            out["occurrences"].append(t)
            try:
                verify_bullet_on_event(s, spec)
            except BulletViolation as exc:
                out["failures"].append({"trial": t, "error": str(exc)})
    return out


def conditional_chunk(cfg, spec, start, stop):
    dist, inten = _dist(cfg), _intensity(cfg)
    seed = cfg["event"]["seed"]
    fails = []
    for t in range(start, stop):
        s = event_realization(spec, dist, inten, seed, t)
        try:
            verify_bullet_on_event(s, spec)
        except BulletViolation as exc:
            fails.append({"realization": t, "error": str(exc)})
    return fails


def build_targets(cfg):
    specs = []
    for i, t in enumerate(cfg["targets"]):
        P = t.get("vertices") or t["name"]
        name = t.get("name", f"target-{i}")
        try:
            spec = TargetSpec(P, t["eps"], t["D"], name)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"target {name!r}: {exc}") from exc
        if spec.dimension != cfg["dimension"]:
            raise ConfigError(f"target {name!r} has dimension {spec.dimension}, "
                              f"config has {cfg['dimension']}")
        specs.append(spec)
    return specs


def certify_targets(cfg):
    specs = build_targets(cfg)
    for spec, t in zip(specs, cfg["targets"]):
        spec.certify(t.get("draws", 1000), t.get("cert_seed", 0))
    return specs


def run_certify(cfg, threads=1):
    specs = certify_targets(cfg)
    doc = {"version": __version__, "config": _provenance(cfg),
           "targets": [{"target": s.to_dict(), "certificate": s.certificate.to_dict()} for s in specs]}
    code = EXIT_OK if all(s.certified for s in specs) else EXIT_REFUSED
    return {"certificates.json": dumps(doc)}, code


def _density_check(cfg, spec, p, threads):
    d = spec.dimension
    top = len(cfg["radii"]) - 1
    vol = ball_volume(cfg["radii"][top], d)
    jobs = [(cfg, s, spec.D) for s in cfg["seeds"]]
    res = [r for r in _run_pool(census_task, jobs, threads) if r["status"] == "ok"]
    h = spec.fingerprint.hex
    dens = np.array([r["counts"][h]["centered"][top] / vol if h in r["counts"] else 0.0
                     for r in res])
    bound = p / ball_volume(1.0, d)
    se = float(dens.std(ddof=1) / math.sqrt(len(dens))) if len(dens) > 1 else math.inf
    mean = float(dens.mean()) if len(dens) else math.nan
    sig = cfg["tolerances"]["sigmas"]
    return {"n": cfg["radii"][top], "seeds": len(dens), "density_centered": mean,
            "standard_error": se, "lower_bound": bound,
            "holds": bool(len(dens) and mean >= bound - sig * se)}


def run_event_experiment(cfg, threads=1):
    specs = certify_targets(cfg)
    refused = [s for s in specs if not s.certified]
    if refused:
        doc = {"version": __version__, "config": _provenance(cfg),
               "refused": [{"target": s.to_dict(), "certificate": s.certificate.to_dict()}
                           for s in refused]}
        raise RefusedRun(f"target {refused[0].name!r}: {refused[0].certificate.reason}",
                         {"event.json": dumps(doc)})
    dist, inten = _dist(cfg), _intensity(cfg)
    sig = cfg["tolerances"]["sigmas"]
    blocks = []
    violated = False
    for spec, t in zip(specs, cfg["targets"]):
        ep = event_probability(spec, dist, inten)
        block = {"target": spec.to_dict(), "certificate": spec.certificate.to_dict(),
                 "analytic_p": ep.value, "analytic_error": ep.error,
                 "theta_a": [e.value for e in ep.theta_a], "theta_c": ep.theta_c.value,
                 "quadrature_converged": ep.converged, "positive": ep.value > 0}
        N = t.get("trials", cfg["event"]["trials"])
        block["trials"] = N
        checked, failures = 0, []
        if N:
            jobs = [(cfg, spec, a, min(a + EVENT_CHUNK, N)) for a in range(0, N, EVENT_CHUNK)]
            parts = _run_pool(event_chunk, jobs, threads)
            occ = [o for p in parts for o in p["occurrences"]]
            a_sum = sum(p["a_sum"] for p in parts)
            c_sum = sum(p["c_sum"] for p in parts)
            overlaps = sum(p["overlaps"] for p in parts)
            failures += [f for p in parts for f in p["failures"]]
            checked += len(occ)
            lo, hi = _wilson(len(occ), N, sig)
            theta = np.array([e.value for e in ep.theta_a])
            z_a = (a_sum / N - theta) / np.sqrt(theta / N)
            z_c = (c_sum / N - ep.theta_c.value) / math.sqrt(ep.theta_c.value / N)
            block.update({
                "occurrences": len(occ), "occurrence_trials": occ[:100],
                "mc_freq": len(occ) / N, "ci": [lo, hi], "agrees": bool(lo <= ep.value <= hi),
                "class_mean_z": [float(z) for z in z_a], "residual_mean_z": float(z_c),
                "class_means_agree": bool(np.all(np.abs(z_a) <= sig) and abs(z_c) <= sig),
                "class_overlaps": int(overlaps),
            })
            if overlaps:
                violated = True
        else:
            block.update({"occurrences": None, "mc_freq": None, "ci": None, "agrees": None})
        K = cfg["event"]["conditional"]
        if K:
            jobs = [(cfg, spec, a, min(a + EVENT_CHUNK, K)) for a in range(0, K, EVENT_CHUNK)]
            cond_fail = [f for p in _run_pool(conditional_chunk, jobs, threads) for f in p]
            failures += cond_fail
            checked += K
        block["bullets_checked"] = checked
        block["bullet_failures"] = failures
        block["bullets_pass_rate"] = (checked - len(failures)) / checked if checked else None
        if failures:
            violated = True
        if cfg["event"]["density_check"]:
            block["density_lower_bound"] = _density_check(cfg, spec, ep.value, threads)
        blocks.append(block)
    doc = {"version": __version__, "config": _provenance(cfg), "targets": blocks}
    return {"event.json": dumps(doc)}, (EXIT_INVARIANT if violated else EXIT_OK)


# ---------------------------------------------------------------------------
# output helpers

def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    return x


def _provenance(cfg):
    # the output location is not part of what produced the numbers
    return {k: v for k, v in cfg.items() if k != "output_dir"}


def dumps(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=1) + "\n"


def _csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerows(rows)
    return buf.getvalue()


def render_text(cfg, seed):
    from .render import render_svg

    R = float(cfg["window_radius"])
    sample = sample_process(_dist(cfg), _intensity(cfg), cfg["sample_radius"], seed)
    cells = extract_cells(sample, R)
    return render_svg(cells, R, title=f"seed {seed}")


def run_render(cfg, threads=1):
    if cfg["dimension"] != 2:
        raise ConfigError("render supports dimension 2 only")
    return {"render.svg": render_text(cfg, cfg["seeds"][0])}, EXIT_OK


def write_files(files, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(files.items()):
        with open(out / name, "w", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# entry point

COMMANDS = {
    "census": run_census_experiment,
    "event": run_event_experiment,
    "certify": run_certify,
    "render": run_render,
}


def build_parser():
    p = argparse.ArgumentParser(prog="phtess", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON experiment config")
        s.add_argument("--seed", type=int, help="base seed (replaces any seed list)")
        s.add_argument("--replicates", type=int, help="number of replicates")
        s.add_argument("--out", help="output directory")
        s.add_argument("--threads", type=int, default=1, help="worker processes")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.seed, args.replicates, args.out)
        files, code = COMMANDS[args.command](cfg, max(1, args.threads))
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RefusedRun as exc:
        write_files(exc.files, cfg["output_dir"])
        print(f"certification refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except CertificationRefused as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (BulletViolation, InvariantViolation) as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    write_files(files, cfg["output_dir"])
    if code == EXIT_REFUSED:
        print("error: certification refused; see certificates.json", file=sys.stderr)
    elif code == EXIT_INVARIANT:
        print("invariant violated; see output files", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
