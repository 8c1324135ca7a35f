"""Command-line front end: reproducible scenario runs with CSV/JSON reports.

Every run is described by a Scenario, a plain dataclass mirroring the TOML
scenario file (versioned ``schema = 1``).  A scenario assembled from flags
and one parsed from the equivalent file compare equal, and
``serialize_scenario`` round-trips through ``parse_config``, so any CLI
invocation can be frozen into a config file and rerun byte-identically.
The only non-deterministic output is an optional ``# generated <time>``
header on the CSV, disabled with ``--no-timestamp``.

Exit codes: 0 success, 1 errors (bad config, solver failure), 2
assertion-style failures (ambiguous cluster, nonzero charge sum over the
Fermi points, invariant mismatch, failed selftest).

``LOCALIZER_THREADS`` caps sweep parallelism (and is exported to the BLAS
thread variables for any worker that honours them).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from . import clifford
from .lattice_model import (
    HoppingTerm,
    ModelError,
    builtin_model,
    charge_of,
    find_fermi_points,
    linearize_at,
    load_model,
    model_from_hoppings,
    model_from_toml,
    model_hash,
    model_to_toml,
)
from .localizer import (
    DisorderSpec,
    LocalizerConfig,
    LocalizerError,
    MassTermSpec,
    add_disorder,
    add_mass_term,
    assemble,
    check_tuning_bounds,
    continuum_dirac_localizer,
    continuum_weyl_localizer,
    default_rho,
    export_coo,
    import_coo,
)
from .spectra import (
    ClusterWarning,
    callias_kernel,
    count_cluster,
    eig_window,
    eigen_report_csv,
    half_signature_chern,
    inertia,
    spectral_flow,
)
from .topo import (
    GaplessSampleError,
    InvariantMismatchError,
    QuadratureError,
    chern_even_bz,
    chern_even_bz_riemann,
    chern_integral_dirac,
    chern_integral_weyl,
    chern_odd_bz,
    chiral_block_sampler,
    dirac_integral_closed_form,
    flat_band_sampler,
    invariant_report_csv,
    local_charge,
    mass_term_chern_jump,
    nn_sum,
    weyl_integral_closed_form,
)

SCHEMA = 1

_COMMANDS = (
    "count",
    "charges",
    "signature",
    "chern",
    "flow",
    "disorder",
    "callias",
    "sweep",
    "selftest",
)

# canonical section/key order; parse rejects anything not listed here
_SECTION_KEYS = {
    "model": ("builtin", "file", "mu", "delta", "eta", "mu_hat", "scale"),
    "localizer": ("kappa", "rho", "flavor"),
    "spectra": ("k", "window", "method"),
    "topo": (
        "method",
        "grid",
        "eps",
        "faces_grid",
        "integral",
        "b",
        "d",
        "m",
        "quadrature",
    ),
    "flow": ("mass", "axis", "m_start", "m_stop", "steps"),
    "disorder": ("lam",),
    "callias": ("b", "points", "interior_fraction", "k"),
    "sweep": ("axis", "values", "seeds", "b"),
}

_TOP_KEYS = ("schema", "command", "seed", "output", "timestamp")


class ConfigError(ValueError):
    """Malformed scenario: bad TOML, unknown key, missing required field."""


@dataclasses.dataclass
class Scenario:
    command: str
    schema: int = SCHEMA
    seed: int = 0
    output: str | None = None
    timestamp: bool = True
    model: dict = field(default_factory=dict)
    localizer: dict = field(default_factory=dict)
    spectra: dict = field(default_factory=dict)
    topo: dict = field(default_factory=dict)
    flow: dict = field(default_factory=dict)
    disorder: dict = field(default_factory=dict)
    callias: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)


# ---------------------------------------------------------------- config IO


def parse_config(text):
    """Parse a TOML scenario string; reject unknown keys by name."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:  # message carries line/column
        raise ConfigError(f"TOML parse error: {exc}") from exc
    if "schema" not in raw:
        raise ConfigError("missing required key 'schema'")
    if raw["schema"] != SCHEMA:
        raise ConfigError(f"unsupported schema {raw['schema']!r}; expected {SCHEMA}")
    if "command" not in raw:
        raise ConfigError("missing required key 'command'")
    command = raw["command"]
    if command not in _COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    scn = Scenario(command=command)
    for key, value in raw.items():
        if key in ("schema", "command"):
            continue
        if key == "seed":
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError("'seed' must be an integer")
            scn.seed = value
        elif key == "output":
            if not isinstance(value, str):
                raise ConfigError("'output' must be a string")
            scn.output = value
        elif key == "timestamp":
            if not isinstance(value, bool):
                raise ConfigError("'timestamp' must be a boolean")
            scn.timestamp = value
        elif key in _SECTION_KEYS:
            if not isinstance(value, dict):
                raise ConfigError(f"'{key}' must be a table")
            allowed = _SECTION_KEYS[key]
            for sub in value:
                if sub not in allowed:
                    raise ConfigError(f"unknown key '{key}.{sub}'")
            getattr(scn, key).update(value)
        else:
            raise ConfigError(f"unknown key '{key}'")
    return scn


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))  # repr keeps the '.'/exponent TOML floats need
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize {type(v).__name__} to TOML")


def serialize_scenario(scn):
    """Canonical TOML: fixed key order, so serialize(parse(x)) is stable."""
    lines = [f"schema = {scn.schema}", f"command = {json.dumps(scn.command)}"]
    lines.append(f"seed = {scn.seed}")
    if scn.output is not None:
        lines.append(f"output = {json.dumps(scn.output)}")
    lines.append(f"timestamp = {_toml_value(scn.timestamp)}")
    for section, allowed in _SECTION_KEYS.items():
        table = getattr(scn, section)
        if not table:
            continue
        lines.append("")
        lines.append(f"[{section}]")
        for key in allowed:
            if key in table:
                lines.append(f"{key} = {_toml_value(table[key])}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------ shared pieces


def _floats(spec):
    """Parse '1,1,-2' (or pass through a list) as a list of floats."""
    if isinstance(spec, str):
        parts = [p for p in spec.split(",") if p.strip()]
        if not parts:
            raise ConfigError(f"empty number list {spec!r}")
        return [float(p) for p in parts]
    if isinstance(spec, (list, tuple)):
        return [float(x) for x in spec]
    return [float(spec)]


def _require(table, section, key):
    if key not in table:
        raise ConfigError(f"'{section}.{key}' is required for this command")
    return table[key]


def _model_from_scenario(scn):
    sec = scn.model
    if "file" in sec and "builtin" in sec:
        raise ConfigError("give either model.builtin or model.file, not both")
    if "file" in sec:
        return load_model(sec["file"])
    name = _require(sec, "model", "builtin")
    params = {k: sec[k] for k in ("mu", "delta", "eta", "mu_hat", "scale") if k in sec}
    try:
        return builtin_model(name, **params)
    except TypeError as exc:
        raise ConfigError(f"model parameters: {exc}") from exc


def _localizer_config(scn, default_flavor="generic"):
    sec = scn.localizer
    kappa = float(_require(sec, "localizer", "kappa"))
    rho = sec.get("rho", default_rho(kappa))
    flavor = sec.get("flavor", default_flavor)
    return LocalizerConfig(kappa=kappa, rho=float(rho), flavor=flavor)


def _mass_model(profile, d, axis=0):
    """Scalar on-site mass profile Y as an N=1 tight-binding model."""
    if not 0 <= axis < d:
        raise ConfigError(f"mass axis {axis} out of range for d={d}")
    ej = tuple(1 if j == axis else 0 for j in range(d))
    if profile == "uniform":
        terms = [HoppingTerm((0,) * d, [[1.0]])]
    elif profile == "cos":
        terms = [HoppingTerm(ej, [[0.5]])]
    elif profile == "sin":
        terms = [HoppingTerm(ej, [[-0.5j]])]
    else:
        raise ConfigError(f"unknown mass profile {profile!r}")
    return model_from_hoppings(d, 1, terms)


def _threads():
    raw = os.environ.get("LOCALIZER_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return None
    return n if n > 0 else None


def _pmap(fn, values):
    workers = _threads() or min(4, max(1, len(values)))
    if workers == 1 or len(values) <= 1:
        return [fn(v) for v in values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, values))  # input order, deterministic


@dataclasses.dataclass
class _RunResult:
    exit_code: int
    summary: dict
    rows: list | None = None  # invariant rows (name, params, raw, rounded, dev)
    write_csv: object = None  # callable(path) for non-invariant CSV layouts


def _fmt_point(p):
    return "(" + ", ".join(f"{x:.6g}" for x in p) + ")"


# ----------------------------------------------------------------- handlers


def _run_count(scn):
    model = _model_from_scenario(scn)
    cfg = _localizer_config(scn)
    L = assemble(model, cfg)
    window = scn.spectra.get("window")
    k = scn.spectra.get("k", 12)
    method = scn.spectra.get("method", "auto")
    if window is not None:
        w = eig_window(L, k=None, window=(-abs(window), abs(window)),
                       method=method, seed=scn.seed)
    else:
        w = eig_window(L, k=int(k), method=method, seed=scn.seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClusterWarning)  # exit code carries it
        rep = count_cluster(w.values, cfg.kappa)
    summary = {
        "cluster_count": rep.cluster_count,
        "gap_ratio": float(rep.gap_ratio),
        "ambiguous": rep.ambiguous,
        "power_radius": float(rep.power_radius),
        "gap_split_count": rep.gap_split_count,
        "dim": int(L.matrix.shape[0]),
        "eig_method": w.method,
    }
    return _RunResult(
        exit_code=2 if rep.ambiguous else 0,
        summary=summary,
        write_csv=lambda path: eigen_report_csv(path, w, rep),
    )


def _run_charges(scn):
    model = _model_from_scenario(scn)
    if model.d % 2 == 0:
        raise ConfigError("local charges are defined for odd dimension")
    pts = find_fermi_points(model)
    eps = scn.topo.get("eps")
    faces_grid = scn.topo.get("faces_grid", 12)
    rows = []
    charges = []
    for p in pts:
        c = local_charge(model, p, eps=eps, faces_grid=int(faces_grid))
        charges.append(c)
        rows.append(("local_charge", f"k*={_fmt_point(p)}", c, c, 0.0))
    total = nn_sum(charges) if charges else 0
    rows.append(("nn_sum", f"points={len(pts)}", total, total, 0.0))
    summary = {
        "n_points": len(pts),
        "charges": charges,
        "nn_sum": total,
    }
    return _RunResult(exit_code=0 if total == 0 else 2, summary=summary, rows=rows)


def _run_signature(scn):
    model = _model_from_scenario(scn)
    flavor = "odd" if model.d % 2 else "even"
    cfg = _localizer_config(scn, default_flavor=flavor)
    L = assemble(model, cfg)
    half = half_signature_chern(L)
    params = f"kappa={cfg.kappa:g} rho={cfg.rho:g} flavor={cfg.flavor}"
    rows = [("half_signature", params, half, half, 0.0)]
    return _RunResult(exit_code=0, summary={"half_signature": half}, rows=rows)


def _run_chern(scn):
    topo_sec = scn.topo
    if "integral" in topo_sec:
        return _run_chern_integral(scn)
    model = _model_from_scenario(scn)
    method = topo_sec.get("method")
    if method is None:
        method = {1: "winding", 2: "plaquette"}.get(model.d)
    if method is None:
        raise ConfigError(
            "topo.method is required for this dimension "
            "(winding, plaquette, riemann, or jump)"
        )
    grid = topo_sec.get("grid")
    if method == "winding":
        res = chern_odd_bz(chiral_block_sampler(model), d=1,
                           grid=int(grid) if grid else None)
        name = "winding"
    elif method == "plaquette":
        res = chern_even_bz(flat_band_sampler(model),
                            grid=int(grid) if grid else 24)
        name = "chern_plaquette"
    elif method == "riemann":
        res = chern_even_bz_riemann(flat_band_sampler(model),
                                    grid=int(grid) if grid else 48)
        name = "chern_riemann"
    elif method == "jump":
        mass = _require(topo_sec, "topo", "m")
        # mass profile for the jump comes from the flow section
        prof = scn.flow.get("mass", "cos")
        axis = scn.flow.get("axis", model.d - 1)
        Y = _mass_model(prof, model.d, int(axis))
        jump = mass_term_chern_jump(model, Y, float(mass),
                                    grid=int(grid) if grid else None)
        rows = [("chern_jump", f"mass={prof} m={float(mass):g}", jump, jump, 0.0)]
        return _RunResult(exit_code=0, summary={"chern_jump": jump}, rows=rows)
    else:
        raise ConfigError(f"unknown topo.method {method!r}")
    rows = [(name, f"grid={'x'.join(str(g) for g in res.grid)}",
             res.value_float, res.value_int, res.deviation)]
    summary = {
        "raw": res.value_float,
        "value": res.value_int,
        "deviation": res.deviation,
        "accepted": res.accepted,
    }
    return _RunResult(exit_code=0 if res.accepted else 2, summary=summary, rows=rows)


def _run_chern_integral(scn):
    topo_sec = scn.topo
    family = topo_sec["integral"]
    b = _floats(_require(topo_sec, "topo", "b"))
    m = float(_require(topo_sec, "topo", "m"))
    if "d" in topo_sec and int(topo_sec["d"]) != len(b):
        raise ConfigError(f"topo.d={topo_sec['d']} disagrees with len(b)={len(b)}")
    quad = topo_sec.get("quadrature")
    quad = int(quad) if quad else None
    if family == "weyl":
        raw = chern_integral_weyl(b, m, quadrature=quad)
        closed = weyl_integral_closed_form(b, m)
    elif family == "dirac":
        raw = chern_integral_dirac(b, m, quadrature=quad)
        closed = dirac_integral_closed_form(b, m)
    else:
        raise ConfigError(f"unknown topo.integral {family!r}")
    rounded = round(2.0 * raw) / 2.0
    dev = abs(raw - rounded)
    params = f"b=({', '.join(f'{x:g}' for x in b)}) m={m:g}"
    rows = [
        (f"chern_integral_{family}", params, raw, rounded, dev),
        ("closed_form", params, closed, closed, 0.0),
    ]
    ok = abs(raw - closed) <= 1e-2
    summary = {"raw": raw, "closed_form": closed, "deviation": dev, "match": ok}
    return _RunResult(exit_code=0 if ok else 2, summary=summary, rows=rows)


def _run_flow(scn):
    model = _model_from_scenario(scn)
    cfg = _localizer_config(scn)
    sec = scn.flow
    profile = sec.get("mass", "uniform")
    axis = int(sec.get("axis", 0))
    m0 = float(sec.get("m_start", -0.1))
    m1 = float(sec.get("m_stop", 0.1))
    steps = int(sec.get("steps", 8))
    Y = _mass_model(profile, model.d, axis)
    L0 = assemble(model, cfg)

    def path(m):
        return add_mass_term(L0, model, MassTermSpec(Y=Y, m=m))

    flow = spectral_flow(path, (m0, m1), steps=steps)
    params = f"mass={profile} m={m0:g}..{m1:g} steps={steps}"
    rows = [
        ("spectral_flow", params, flow, flow, 0.0),
        ("half_flow", params, flow / 2.0, flow / 2.0, 0.0),
    ]
    summary = {"spectral_flow": flow, "half_flow": flow / 2.0}
    return _RunResult(exit_code=0, summary=summary, rows=rows)


def _run_disorder(scn):
    model = _model_from_scenario(scn)
    cfg = _localizer_config(scn)
    lam = float(_require(scn.disorder, "disorder", "lam"))
    k = int(scn.spectra.get("k", 12))
    L = assemble(model, cfg)
    Ld = add_disorder(L, model, DisorderSpec(lam=lam, seed=scn.seed))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClusterWarning)
        w0 = eig_window(L, k=k, seed=scn.seed)
        r0 = count_cluster(w0.values, cfg.kappa)
        w1 = eig_window(Ld, k=k, seed=scn.seed)
        r1 = count_cluster(w1.values, cfg.kappa)
    if r0.cluster_count == r1.cluster_count and r0.cluster_count > 0:
        spread = float(np.max(np.abs(np.sort(r1.cluster) - np.sort(r0.cluster))))
    else:
        spread = float("nan")
    summary = {
        "cluster_count_clean": r0.cluster_count,
        "cluster_count_disordered": r1.cluster_count,
        "count_preserved": r0.cluster_count == r1.cluster_count,
        "cluster_spread": spread,
        "lam": lam,
        "seed": scn.seed,
        "ambiguous": r1.ambiguous,
    }
    exit_code = 2 if (r0.ambiguous or r1.ambiguous) else 0
    return _RunResult(
        exit_code=exit_code,
        summary=summary,
        write_csv=lambda path: eigen_report_csv(path, w1, r1),
    )


def _callias_localizer(b, kappa, points=None):
    B = np.diag(b)
    if len(b) % 2:
        return continuum_weyl_localizer(B, kappa, points=points)
    return continuum_dirac_localizer(B, kappa, points=points)


def _run_callias(scn):
    sec = scn.callias
    b = _floats(sec.get("b", [1.0]))
    kappa = float(_require(scn.localizer, "localizer", "kappa"))
    points = sec.get("points")
    L = _callias_localizer(b, kappa, points=int(points) if points else None)
    rep = callias_kernel(
        L,
        interior_fraction=float(sec.get("interior_fraction", 0.75)),
        k=int(sec.get("k", 3)),
        seed=scn.seed,
    )
    params = f"d={len(b)} b=({', '.join(f'{x:g}' for x in b)}) kappa={kappa:g}"
    rows = [
        ("kernel_dim", params, rep.kernel_dim, rep.kernel_dim, 0.0),
        ("index", params, rep.index, rep.index, 0.0),
        ("n_plus", params, rep.n_plus, rep.n_plus, 0.0),
        ("n_minus", params, rep.n_minus, rep.n_minus, 0.0),
        ("first_excited", params, rep.first_excited, rep.first_excited, 0.0),
    ]
    summary = {
        "kernel_dim": rep.kernel_dim,
        "index": rep.index,
        "first_excited": float(rep.first_excited),
    }
    return _RunResult(exit_code=0, summary=summary, rows=rows)


def _run_sweep(scn):
    sec = scn.sweep
    axis = _require(sec, "sweep", "axis")
    if axis not in ("kappa", "lambda", "m"):
        raise ConfigError(f"unknown sweep.axis {axis!r}")
    values = _floats(_require(sec, "sweep", "values"))
    if not values:
        raise ConfigError("'sweep.values' must be a non-empty list")
    rows = []  # long form: (axis, value, observable, result)
    summary = {"axis": axis, "n_values": len(values)}

    if axis == "kappa":
        b = _floats(sec.get("b", [1.0]))

        def job(kv):
            L = _callias_localizer(b, kv)
            return callias_kernel(L, seed=scn.seed)

        reps = _pmap(job, values)
        for kv, rep in zip(values, reps):
            rows.append(("kappa", kv, "first_excited", float(rep.first_excited)))
            rows.append(("kappa", kv, "kernel_dim", rep.kernel_dim))
            rows.append(("kappa", kv, "index", rep.index))
        gaps = [r.first_excited for r in reps]
        slope = float(np.polyfit(np.log(values), np.log(gaps), 1)[0])
        rows.append(("fit", "", "loglog_slope_first_excited", slope))
        summary["loglog_slope_first_excited"] = slope
        summary["kernel_dims"] = [r.kernel_dim for r in reps]

    elif axis == "lambda":
        model = _model_from_scenario(scn)
        cfg = _localizer_config(scn)
        seeds = int(sec.get("seeds", 1))
        k = int(scn.spectra.get("k", 12))
        L = assemble(model, cfg)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClusterWarning)
            w0 = eig_window(L, k=k, seed=scn.seed)
            r0 = count_cluster(w0.values, cfg.kappa)
        clean = np.sort(r0.cluster)

        def job(lam):
            spreads, mismatches = [], 0
            for s in range(seeds):
                Ld = add_disorder(L, model, DisorderSpec(lam=lam, seed=scn.seed + s))
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", ClusterWarning)
                    w = eig_window(Ld, k=k, seed=scn.seed)
                    r = count_cluster(w.values, cfg.kappa)
                if r.cluster_count == r0.cluster_count:
                    spreads.append(np.max(np.abs(np.sort(r.cluster) - clean)))
                else:
                    mismatches += 1
            mean = float(np.mean(spreads)) if spreads else float("nan")
            return mean, mismatches

        results = _pmap(job, values)
        for lam, (mean, mismatches) in zip(values, results):
            rows.append(("lambda", lam, "cluster_spread_mean", mean))
            rows.append(("lambda", lam, "count_changes", mismatches))
        good = [(lam, m) for lam, (m, _) in zip(values, results)
                if np.isfinite(m) and m > 0]
        if len(good) >= 2:
            lv, mv = zip(*good)
            slope = float(np.polyfit(np.log(lv), np.log(mv), 1)[0])
            rows.append(("fit", "", "loglog_slope_spread", slope))
            summary["loglog_slope_spread"] = slope
        summary["count_changes_total"] = sum(n for _, n in results)
        summary["clean_count"] = r0.cluster_count

    else:  # axis == "m"
        model = _model_from_scenario(scn)
        cfg = _localizer_config(scn)
        profile = scn.flow.get("mass", "uniform")
        ax = int(scn.flow.get("axis", 0))
        Y = _mass_model(profile, model.d, ax)
        L0 = assemble(model, cfg)

        def job(m):
            tri = inertia(add_mass_term(L0, model, MassTermSpec(Y=Y, m=m)))
            return tri.n_plus - tri.n_minus

        sigs = _pmap(job, values)
        for m, sig in zip(values, sigs):
            rows.append(("m", m, "signature", sig))
        summary["signatures"] = sigs

    def write_csv(path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["axis", "value", "observable", "result"])
            for ax, val, obs, res in rows:
                writer.writerow([
                    ax,
                    "" if val == "" else f"{float(val):.12g}",
                    obs,
                    f"{float(res):.12g}",
                ])

    return _RunResult(exit_code=0, summary=summary, rows=None, write_csv=write_csv)


# ---------------------------------------------------------------- selftest


def _st_clifford_algebra():
    rep = clifford.clifford_generators(3)
    for i, gi in enumerate(rep.generators):
        assert np.allclose(gi @ gi, np.eye(gi.shape[0]))
        for gj in rep.generators[i + 1:]:
            assert np.allclose(gi @ gj + gj @ gi, 0)
    got = clifford.clifford_trace_det(rep, list(np.eye(3).T))
    assert abs(got - 2j) < 1e-12  # 2^1 i^1 det(e1,e2,e3)


def _st_extremal_multiplicities():
    spec = clifford.m_spectrum_analytic(3, (1.0, 1.0, 1.0))
    assert spec == [(-3.0, 1), (1.0, 3)]
    assert sum(mult for _, mult in spec) == 4  # dim of the tensor space


def _st_model_roundtrip():
    model = builtin_model("ssh_chain", mu=0.5)
    again = model_from_toml(model_to_toml(model))
    assert model_hash(model) == model_hash(again)


def _st_fermi_points():
    pts = find_fermi_points(builtin_model("minimal_weyl", delta=0.5, mu=4.0))
    assert len(pts) == 2
    assert max(abs(pts[0][2] - 0.25), abs(pts[1][2] - 0.75)) < 1e-6


def _st_coo_roundtrip():
    import tempfile

    model = builtin_model("sin_chain")
    L = assemble(model, LocalizerConfig(kappa=0.1, rho=10))
    with tempfile.TemporaryDirectory() as td:
        path = os.path.join(td, "L.coo")
        export_coo(L, path)
        back, header = import_coo(path)
    assert header["model"] == L.model_hash
    assert (L.matrix != back).nnz == 0


def _st_eig_window_folded():
    rng = np.random.default_rng(7)
    A = rng.normal(size=(240, 240)) + 1j * rng.normal(size=(240, 240))
    A = (A + A.conj().T) / 2
    dense = eig_window(A, k=6)
    fold = eig_window(A, k=6, method="folded")
    assert np.allclose(np.sort(dense.values), np.sort(fold.values), atol=1e-8)


def _st_inertia():
    rng = np.random.default_rng(11)
    A = rng.normal(size=(80, 80))
    A = (A + A.T) / 2
    tri = inertia(A)
    evals = np.linalg.eigvalsh(A)
    assert tri.n_plus == int(np.sum(evals > 0))
    assert tri.n_minus == int(np.sum(evals < 0))


def _st_cluster_count():
    L = assemble(builtin_model("sin_chain"),
                 LocalizerConfig(kappa=0.02, rho=default_rho(0.02)))
    win = math.sqrt(0.02)
    w = eig_window(L, window=(-win, win), k=None)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClusterWarning)
        r = count_cluster(w.values, 0.02)
    assert r.cluster_count == 2 and not r.ambiguous


def _st_callias_d1():
    rep = callias_kernel(continuum_weyl_localizer(np.array([[1.0]]), 0.05))
    assert rep.kernel_dim == 1 and rep.index == -1
    assert abs(rep.first_excited - math.sqrt(2 * 0.05)) < 0.15 * math.sqrt(2 * 0.05)


def _st_winding():
    res = chern_odd_bz(chiral_block_sampler(builtin_model("ssh_chain", mu=0.5)), d=1)
    assert res.value_int == 1 and res.accepted


def _st_plaquette():
    res = chern_even_bz(flat_band_sampler(builtin_model("p_ip", delta=1.0,
                                                        mu_hat=-2.0)), grid=24)
    assert res.value_int == 1 and res.accepted


def _st_integrals():
    assert abs(chern_integral_weyl([1.0], 1.0) - 0.5) < 1e-3
    assert abs(chern_integral_dirac([1.0, 1.0], 1.0) - 0.5) < 1e-3


def _st_local_charges():
    model = builtin_model("sin_chain")
    cs = [local_charge(model, p) for p in find_fermi_points(model)]
    assert cs == [-1, 1] and nn_sum(cs) == 0


def _st_flow():
    model = builtin_model("sin_chain")
    L0 = assemble(model, LocalizerConfig(kappa=0.1, rho=30))
    Y = _mass_model("cos", 1)

    def path(m):
        return add_mass_term(L0, model, MassTermSpec(Y=Y, m=m))

    assert spectral_flow(path, (-0.1, 0.1), steps=8) == -4


def _st_tuning_report():
    model = builtin_model("p_ip", delta=1.0, mu_hat=-2.0, scale=0.01)
    rep = check_tuning_bounds(model, kappa=0.008, rho=6.0)
    assert rep.gap > 0 and rep.kappa_bound > 0


def _st_config_roundtrip():
    scn = Scenario(command="count", seed=3,
                   model={"builtin": "sin_chain"},
                   localizer={"kappa": 0.02})
    assert parse_config(serialize_scenario(scn)) == scn


_SELFTESTS = [
    ("clifford_algebra", _st_clifford_algebra),
    ("extremal_multiplicities", _st_extremal_multiplicities),
    ("model_toml_roundtrip", _st_model_roundtrip),
    ("fermi_points", _st_fermi_points),
    ("localizer_coo_roundtrip", _st_coo_roundtrip),
    ("eig_window_folded", _st_eig_window_folded),
    ("inertia_vs_eigh", _st_inertia),
    ("cluster_count_sin_chain", _st_cluster_count),
    ("callias_kernel_d1", _st_callias_d1),
    ("winding_ssh", _st_winding),
    ("plaquette_p_ip", _st_plaquette),
    ("integral_closed_forms", _st_integrals),
    ("local_charges_sin_chain", _st_local_charges),
    ("spectral_flow_sin_chain", _st_flow),
    ("tuning_report", _st_tuning_report),
    ("config_roundtrip", _st_config_roundtrip),
]


def _run_selftest(scn):
    rows = []
    failed = []
    for name, fn in _SELFTESTS:
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - report, don't crash
            failed.append((name, exc))
            print(f"FAIL {name}: {exc}")
            rows.append((f"selftest:{name}", "", 0.0, 0, 0.0))
        else:
            print(f"ok {name}")
            rows.append((f"selftest:{name}", "", 1.0, 1, 0.0))
    summary = {"passed": len(_SELFTESTS) - len(failed), "failed": len(failed)}
    return _RunResult(exit_code=2 if failed else 0, summary=summary, rows=rows)


_HANDLERS = {
    "count": _run_count,
    "charges": _run_charges,
    "signature": _run_signature,
    "chern": _run_chern,
    "flow": _run_flow,
    "disorder": _run_disorder,
    "callias": _run_callias,
    "sweep": _run_sweep,
    "selftest": _run_selftest,
}


# ------------------------------------------------------------------ run/IO


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _prepend_stamp(path):
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
    with open(path, "r", encoding="utf-8") as fh:
        body = fh.read()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# generated {stamp}\n{body}")


def run_scenario(scn, out_dir=None):
    """Execute a scenario; write report files when output is set.

    Returns the process exit code (0 ok / 2 assertion-style failure);
    errors raise and are mapped to exit code 1 by main().
    """
    res = _HANDLERS[scn.command](scn)
    if scn.output:
        base = os.path.join(out_dir, scn.output) if out_dir else scn.output
        csv_path = base + ".csv"
        if res.write_csv is not None:
            res.write_csv(csv_path)
        else:
            invariant_report_csv(csv_path, res.rows or [])
        if scn.timestamp:
            _prepend_stamp(csv_path)
        payload = {
            "schema": scn.schema,
            "command": scn.command,
            "seed": scn.seed,
            "scenario": {
                name: getattr(scn, name)
                for name in _SECTION_KEYS
                if getattr(scn, name)
            },
            "summary": res.summary,
            "rows": [list(r) for r in (res.rows or [])],
        }
        if scn.timestamp:
            payload["generated"] = datetime.datetime.now(
                datetime.timezone.utc
            ).isoformat()
        with open(base + ".json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True,
                      default=_json_default)
            fh.write("\n")
    for key, value in res.summary.items():
        print(f"{key}={value}")
    return res.exit_code


# -------------------------------------------------------------------- argv


def _add_common(sub):
    sub.add_argument("--config", help="TOML scenario file (flags other than "
                     "--output/--no-timestamp are then forbidden)")
    sub.add_argument("--model", help="builtin model name")
    sub.add_argument("--model-file", help="TOML model file")
    for name in ("mu", "delta", "eta", "mu-hat", "scale"):
        sub.add_argument(f"--{name}", type=float)
    sub.add_argument("--kappa", type=float)
    sub.add_argument("--rho", type=float)
    sub.add_argument("--flavor", choices=("generic", "odd", "even"))
    sub.add_argument("--seed", type=int)
    sub.add_argument("--output", help="report base path; writes BASE.csv/.json")
    sub.add_argument("--no-timestamp", action="store_true",
                     help="omit the generated-at header for byte-stable output")


def _parser():
    p = argparse.ArgumentParser(
        prog="speclocal",
        description="spectral-localizer scenario runner",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("count", help="cluster count of low localizer modes")
    _add_common(sp)
    sp.add_argument("--k", type=int, help="eigenpairs to resolve")
    sp.add_argument("--window", type=float, help="count within (-w, w)")
    sp.add_argument("--method", choices=("auto", "dense", "folded", "shift_invert"))

    sp = sub.add_parser("charges", help="local charges at the Fermi points")
    _add_common(sp)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--faces-grid", type=int)

    sp = sub.add_parser("signature", help="half signature of a graded localizer")
    _add_common(sp)

    sp = sub.add_parser("chern", help="Brillouin-zone or continuum Chern numbers")
    _add_common(sp)
    sp.add_argument("--method", choices=("winding", "plaquette", "riemann", "jump"))
    sp.add_argument("--grid", type=int)
    sp.add_argument("--integral", choices=("weyl", "dirac"))
    sp.add_argument("--b", help="slope list, e.g. 1,1,-2")
    sp.add_argument("--d", type=int)
    sp.add_argument("--m", type=float)
    sp.add_argument("--quadrature", type=int)
    sp.add_argument("--mass", choices=("uniform", "cos", "sin"),
                    help="mass profile for --method jump")
    sp.add_argument("--axis", type=int)

    sp = sub.add_parser("flow", help="spectral flow under a mass term")
    _add_common(sp)
    sp.add_argument("--mass", choices=("uniform", "cos", "sin"))
    sp.add_argument("--axis", type=int)
    sp.add_argument("--m-start", type=float)
    sp.add_argument("--m-stop", type=float)
    sp.add_argument("--steps", type=int)

    sp = sub.add_parser("disorder", help="cluster stability under disorder")
    _add_common(sp)
    sp.add_argument("--lam", type=float)
    sp.add_argument("--k", type=int)

    sp = sub.add_parser("callias", help="continuum localizer kernel and index")
    _add_common(sp)
    sp.add_argument("--b", help="diagonal slope list")
    sp.add_argument("--points", type=int)
    sp.add_argument("--interior-fraction", type=float)
    sp.add_argument("--k", type=int)

    sp = sub.add_parser("sweep", help="parameter sweep with long-form CSV")
    _add_common(sp)
    sp.add_argument("--axis", choices=("kappa", "lambda", "m"))
    sp.add_argument("--values", help="comma-separated axis values")
    sp.add_argument("--seeds", type=int)
    sp.add_argument("--b", help="slope list for kappa sweeps")
    sp.add_argument("--mass", choices=("uniform", "cos", "sin"))

    sp = sub.add_parser("selftest", help="fast invariant checks across modules")
    _add_common(sp)

    return p


# flag destination -> (section, key, converter)
_FLAG_MAP = [
    ("model", "model", "builtin", str),
    ("model_file", "model", "file", str),
    ("mu", "model", "mu", float),
    ("delta", "model", "delta", float),
    ("eta", "model", "eta", float),
    ("mu_hat", "model", "mu_hat", float),
    ("scale", "model", "scale", float),
    ("kappa", "localizer", "kappa", float),
    ("rho", "localizer", "rho", float),
    ("flavor", "localizer", "flavor", str),
    ("k", "spectra", "k", int),
    ("window", "spectra", "window", float),
    ("eps", "topo", "eps", float),
    ("faces_grid", "topo", "faces_grid", int),
    ("grid", "topo", "grid", int),
    ("integral", "topo", "integral", str),
    ("d", "topo", "d", int),
    ("m", "topo", "m", float),
    ("quadrature", "topo", "quadrature", int),
    ("m_start", "flow", "m_start", float),
    ("m_stop", "flow", "m_stop", float),
    ("steps", "flow", "steps", int),
    ("lam", "disorder", "lam", float),
    ("points", "callias", "points", int),
    ("interior_fraction", "callias", "interior_fraction", float),
    ("seeds", "sweep", "seeds", int),
]

# flags whose section depends on the subcommand
_PER_COMMAND = {
    ("count", "method"): ("spectra", "method", str),
    ("chern", "method"): ("topo", "method", str),
    ("chern", "b"): ("topo", "b", _floats),
    ("callias", "b"): ("callias", "b", _floats),
    ("callias", "k"): ("callias", "k", int),
    ("sweep", "b"): ("sweep", "b", _floats),
    ("sweep", "axis"): ("sweep", "axis", str),
    ("sweep", "values"): ("sweep", "values", _floats),
    ("flow", "mass"): ("flow", "mass", str),
    ("flow", "axis"): ("flow", "axis", int),
    ("sweep", "mass"): ("flow", "mass", str),
    ("chern", "mass"): ("flow", "mass", str),
    ("chern", "axis"): ("flow", "axis", int),
}


def scenario_from_args(ns):
    """Build the Scenario a set of parsed flags describes."""
    if getattr(ns, "config", None):
        dests = [dest for dest, _, _, _ in _FLAG_MAP]
        dests += [dest for (cmd, dest) in _PER_COMMAND if cmd == ns.command]
        blocked = [d for d in dests if getattr(ns, d, None) is not None]
        if blocked:
            raise ConfigError(
                "--config cannot be combined with --"
                + blocked[0].replace("_", "-")
            )
        with open(ns.config, "r", encoding="utf-8") as fh:
            scn = parse_config(fh.read())
        if scn.command != ns.command:
            raise ConfigError(
                f"config file is for '{scn.command}', invoked as '{ns.command}'"
            )
        if getattr(ns, "output", None) is not None:
            scn.output = ns.output
        if getattr(ns, "no_timestamp", False):
            scn.timestamp = False
        return scn

    scn = Scenario(command=ns.command)
    if getattr(ns, "seed", None) is not None:
        scn.seed = ns.seed
    if getattr(ns, "output", None) is not None:
        scn.output = ns.output
    if getattr(ns, "no_timestamp", False):
        scn.timestamp = False
    handled = {dest for (cmd, dest) in _PER_COMMAND if cmd == ns.command}
    for cmd_dest, (section, key, conv) in _PER_COMMAND.items():
        cmd, dest = cmd_dest
        if cmd != ns.command:
            continue
        value = getattr(ns, dest, None)
        if value is not None:
            getattr(scn, section)[key] = conv(value)
    for dest, section, key, conv in _FLAG_MAP:
        if dest in handled:
            continue
        value = getattr(ns, dest, None)
        if value is not None:
            getattr(scn, section)[key] = conv(value)
    return scn


_USAGE_ERRORS = (
    ConfigError,
    ModelError,
    LocalizerError,
    GaplessSampleError,
    QuadratureError,
    ValueError,
    OSError,
    NotImplementedError,
)


def main(argv=None):
    ns = _parser().parse_args(argv)
    threads = _threads()
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(threads))
    try:
        scn = scenario_from_args(ns)
        return run_scenario(scn)
    except InvariantMismatchError as exc:
        print(f"invariant mismatch: {exc}", file=sys.stderr)
        return 2
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
