"""Command-line front end: config parsing, dispatch, CSV + manifest output.

Config files are flat ``key = value`` documents with dotted sections
(``base.kind``, ``roof.c0``, ``field.scale``); unknown keys and every
violated constraint are reported together.  Results are written as CSV
with 17 significant digits (bit-for-bit reproducible for a fixed config
and seed) plus a JSON manifest sidecar carrying provenance.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys as _sys
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import __version__
from .base import (
    CatMap,
    ConstantRoof,
    CosineBumpRoof,
    FullShift,
    SuspensionPoint,
    TorusPoint,
    heteroclinic_point_catmap,
    periodic_points_catmap,
    roof_integral,
)
from .engine import fundamental_solution, verify_cocycle_identity, gronwall_check
from .errors import ConfigError, SympcocycleError
from .fields import GeneratorField
from .holonomy import (
    DominationParams,
    domination_check,
    holonomy_axiom_check,
    stable_holonomy,
    unstable_holonomy,
)
from .perturbation import (
    PerturbationBudget,
    build_perturbation,
    compute_K,
    genericity_probe,
    verify_realization,
)
from .spectrum import spectrum_flow, spectrum_induced
from .symplectic import (
    algebra_defect,
    make_standard_form,
    random_generator,
    symplectic_defect,
)

__all__ = ["RunConfig", "ResultTable", "parse_config", "emit_config", "run", "main"]

COMMANDS = ("spectrum", "holonomy", "perturb", "probe", "verify")

# key -> (type, default, description)
_KEYS = {
    "ell": (int, 1, "fiber half-dimension"),
    "seed": (int, 0, "master RNG seed"),
    "h": (float, 1e-3, "integration step"),
    "n": (int, 100000, "return-map iterates"),
    "base.kind": (str, "catmap", "catmap | fullshift"),
    "base.symbols": (int, 2, "full-shift alphabet size"),
    "base.depth": (int, 64, "full-shift window half-width"),
    "roof.kind": (str, "constant", "constant | cosine"),
    "roof.c": (float, 2.0, "constant roof value"),
    "roof.c0": (float, 2.0, "cosine roof mean"),
    "roof.a": (float, 0.5, "cosine roof amplitude"),
    "field.kind": (str, "random", "zero | rotation | diag | random"),
    "field.scale": (float, 0.1, "field size"),
    "field.seed": (int, 0, "field sampling seed"),
    "spectrum.mode": (str, "induced", "induced | flow | both"),
    "spectrum.reorth": (int, 1, "factors per re-orthogonalization"),
    "spectrum.reorth_time": (float, 1.0, "flow segment length"),
    "spectrum.T": (float, 1000.0, "flow horizon"),
    "holonomy.tol": (float, 1e-9, "holonomy convergence tolerance"),
    "holonomy.n_max": (int, 60, "holonomy iteration cap"),
    "domination.N": (int, 1, "domination block length"),
    "domination.theta": (float, 0.25, "bunching rate"),
    "domination.tau": (float, math.log((3 + math.sqrt(5)) / 2), "base rate"),
    "domination.k_max": (int, 20, "domination horizon"),
    "perturb.epsilon": (float, 0.1, "perturbation budget"),
    "perturb.rho_box": (float, 0.1, "flowbox transverse radius"),
    "perturb.angle_frac": (float, 0.5, "target generator size as a fraction of delta"),
    "probe.trials": (int, 20, "trials per grid point"),
    "probe.grid": (str, "0.0,0.02,0.05,0.1", "comma-separated epsilon grid"),
    "probe.iters": (int, 2000, "iterates per trial"),
    "verify.n": (int, 500, "iterates for the verify suites"),
}


@dataclass(frozen=True)
class RunConfig:
    """A validated run configuration: command plus flat key table."""

    command: str
    values: tuple  # sorted (key, value) pairs

    def __getitem__(self, key):
        for k, v in self.values:
            if k == key:
                return v
        raise KeyError(key)


def _coerce(key, raw):
    typ = _KEYS[key][0]
    if typ is int:
        return int(raw)
    if typ is float:
        return float(raw)
    return str(raw)


def parse_config(text: str, command: str = "spectrum") -> RunConfig:
    """Parse and validate a flat key-value document.

    Every violated constraint is reported; unknown keys are errors that
    name the key.
    """
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; expected one of {COMMANDS}")
    values = {k: v[1] for k, v in _KEYS.items()}
    errors = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            errors.append(f"line {lineno}: expected 'key = value', got {stripped!r}")
            continue
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _KEYS:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        try:
            values[key] = _coerce(key, raw)
        except ValueError:
            errors.append(f"line {lineno}: cannot parse {raw!r} for key {key!r}")
    errors.extend(_constraint_violations(values))
    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
    return RunConfig(command=command, values=tuple(sorted(values.items())))


def _constraint_violations(v):
    errs = []
    if v["ell"] < 1:
        errs.append("ell must be >= 1")
    if v["h"] <= 0:
        errs.append("h must be positive")
    if v["n"] < 100:
        errs.append("n must be >= 100")
    if v["base.kind"] not in ("catmap", "fullshift"):
        errs.append(f"base.kind {v['base.kind']!r} is not catmap|fullshift")
    if v["roof.kind"] not in ("constant", "cosine"):
        errs.append(f"roof.kind {v['roof.kind']!r} is not constant|cosine")
    if v["roof.kind"] == "constant" and v["roof.c"] < 1.0:
        errs.append(f"roof.c = {v['roof.c']} violates the height bound roof >= 1")
    if v["roof.kind"] == "cosine" and v["roof.c0"] - abs(v["roof.a"]) < 1.0:
        errs.append("roof.c0 - |roof.a| violates the height bound roof >= 1")
    if v["field.kind"] not in ("zero", "rotation", "diag", "random"):
        errs.append(f"field.kind {v['field.kind']!r} is not zero|rotation|diag|random")
    if v["field.scale"] < 0:
        errs.append("field.scale must be nonnegative")
    if not 3.0 * v["domination.theta"] < v["domination.tau"]:
        errs.append(
            f"domination requires 3θ<τ, got theta={v['domination.theta']}, "
            f"tau={v['domination.tau']}"
        )
    if v["perturb.epsilon"] <= 0:
        errs.append("perturb.epsilon must be positive")
    if not 0 < v["perturb.rho_box"] <= 0.25:
        errs.append("perturb.rho_box must lie in (0, 0.25]")
    if v["probe.trials"] < 1:
        errs.append("probe.trials must be >= 1")
    try:
        grid = [float(x) for x in v["probe.grid"].split(",") if x.strip() != ""]
        if not grid:
            errs.append("probe.grid is empty")
    except ValueError:
        errs.append(f"probe.grid {v['probe.grid']!r} is not a comma-separated float list")
    if v["spectrum.mode"] not in ("induced", "flow", "both"):
        errs.append("spectrum.mode must be induced|flow|both")
    return errs


def emit_config(config: RunConfig) -> str:
    """Canonical text form; parse(emit(c)) == c."""
    return "\n".join(f"{k} = {v}" for k, v in config.values) + "\n"


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(
        (config.command + "\n" + emit_config(config)).encode()
    ).hexdigest()


@dataclass(eq=False)
class ResultTable:
    """Schema(ed) rows plus the run manifest."""

    schema: tuple
    rows: list
    manifest: dict = dc_field(default_factory=dict)

    def to_csv(self) -> str:
        out = [",".join(self.schema)]
        for row in self.rows:
            cells = []
            for x in row:
                if isinstance(x, float):
                    cells.append(format(x, ".17g"))
                else:
                    cells.append(str(x))
            out.append(",".join(cells))
        return "\n".join(out) + "\n"


def _build_system(cfg):
    if cfg["base.kind"] == "catmap":
        return CatMap()
    return FullShift(symbols=cfg["base.symbols"], depth=cfg["base.depth"])


def _build_roof(cfg):
    if cfg["roof.kind"] == "constant":
        return ConstantRoof(cfg["roof.c"])
    return CosineBumpRoof(cfg["roof.c0"], cfg["roof.a"])


def _build_field(cfg):
    ell = cfg["ell"]
    kind = cfg["field.kind"]
    if kind == "zero":
        return GeneratorField.zero(ell)
    if kind == "rotation":
        return GeneratorField.rotation(ell, cfg["field.scale"])
    if kind == "diag":
        return GeneratorField.diag_hyperbolic(ell, cfg["field.scale"])
    return GeneratorField.random(ell, seed=cfg["field.seed"], scale=cfg["field.scale"])


def _start_point(sys_, cfg):
    rng = np.random.default_rng(cfg["seed"])
    return sys_.random_point(rng)


def _run_spectrum(cfg):
    sys_ = _build_system(cfg)
    roof = _build_roof(cfg)
    f = _build_field(cfg)
    x0 = _start_point(sys_, cfg)
    rows = []
    if cfg["spectrum.mode"] in ("induced", "both"):
        r = spectrum_induced(f, sys_, roof, x0, cfg["n"],
                             reorth=cfg["spectrum.reorth"], h=cfg["h"])
        for i, (e, s) in enumerate(zip(r.exponents, r.stderr)):
            rows.append(("exponent_induced", i, float(e), float(s)))
        rows.append(("pairing_residual_induced", -1, r.pairing_residual, 0.0))
        rows.append(("sum_residual_induced", -1, r.sum_residual, 0.0))
    if cfg["spectrum.mode"] in ("flow", "both"):
        r = spectrum_flow(f, sys_, roof, SuspensionPoint(x0, 0.0),
                          cfg["spectrum.T"], cfg["spectrum.reorth_time"], h=cfg["h"])
        for i, (e, s) in enumerate(zip(r.exponents, r.stderr)):
            rows.append(("exponent_flow", i, float(e), float(s)))
        rows.append(("pairing_residual_flow", -1, r.pairing_residual, 0.0))
        rows.append(("sum_residual_flow", -1, r.sum_residual, 0.0))
    mean, err = roof_integral(roof, sys_, n_samples=10000, seed=cfg["seed"])
    rows.append(("roof_integral", -1, mean, err))
    return ResultTable(schema=("record", "index", "value", "stderr"), rows=rows), 0


def _run_holonomy(cfg):
    sys_ = _build_system(cfg)
    if not isinstance(sys_, CatMap):
        raise ConfigError("the holonomy command needs base.kind = catmap")
    roof = _build_roof(cfg)
    f = _build_field(cfg)
    p = periodic_points_catmap(1, roof=roof, sys=sys_)[0]
    z = heteroclinic_point_catmap(p, p)
    params = DominationParams(N=cfg["domination.N"], theta=cfg["domination.theta"],
                              tau=cfg["domination.tau"], k_max=cfg["domination.k_max"])
    ok, margins = domination_check(f, sys_, roof, p.point, params, h=cfg["h"])
    hs = stable_holonomy(f, sys_, roof, p, z, n_max=cfg["holonomy.n_max"],
                         tol=cfg["holonomy.tol"], h=cfg["h"], params=params)
    hu = unstable_holonomy(f, sys_, roof, p, z, n_max=cfg["holonomy.n_max"],
                           tol=cfg["holonomy.tol"], h=cfg["h"], params=params)
    y = sys_.apply(z, 1)  # another stable-leaf point: f(z) lies on the same leaf
    rows = [
        ("domination_ok", -1, float(bool(ok)), 0.0),
        ("domination_min_margin", -1, float(np.min(margins)), 0.0),
        ("stable_converged", -1, float(hs.converged), 0.0),
        ("stable_iters", -1, float(hs.n_iters), 0.0),
        ("stable_defect", -1, hs.map.defect, 0.0),
        ("unstable_converged", -1, float(hu.converged), 0.0),
        ("unstable_iters", -1, float(hu.n_iters), 0.0),
        ("unstable_defect", -1, hu.map.defect, 0.0),
    ]
    status = 0 if (hs.converged and hu.converged) else 2
    return ResultTable(schema=("record", "index", "value", "stderr"), rows=rows), status


def _run_perturb(cfg):
    from scipy.linalg import expm

    sys_ = _build_system(cfg)
    if not isinstance(sys_, CatMap):
        raise ConfigError("the perturb command needs base.kind = catmap")
    roof = _build_roof(cfg)
    f = _build_field(cfg)
    form = make_standard_form(cfg["ell"])
    rng = np.random.default_rng(cfg["seed"])
    x = SuspensionPoint(sys_.random_point(rng), 0.0)
    K = compute_K(f, sys_, roof, h=max(cfg["h"], 2e-3), seed=cfg["seed"])
    budget = PerturbationBudget(epsilon=cfg["perturb.epsilon"], K=K)
    theta = cfg["perturb.angle_frac"] * budget.delta / math.sqrt(2.0)
    S = expm(theta * form.J)
    pert = build_perturbation(f, sys_, roof, x, S, rho_box=cfg["perturb.rho_box"],
                              epsilon=cfg["perturb.epsilon"], h=cfg["h"], budget=budget)
    res = verify_realization(pert, sys_, roof, h=cfg["h"])
    res2 = verify_realization(pert, sys_, roof, h=cfg["h"] / 2.0)
    rows = [
        ("K", -1, K, 0.0),
        ("delta", -1, budget.delta, 0.0),
        ("generator_norm", -1, float(np.linalg.norm(pert.generator)), 0.0),
        ("measured_sup_P", -1, pert.measured_sup, 0.0),
        ("limit_3K3delta", -1, 3.0 * K**3 * budget.delta, 0.0),
        ("epsilon", -1, cfg["perturb.epsilon"], 0.0),
        ("support_violations", -1, float(pert.support_violations), 0.0),
        ("algebra_defect", -1, pert.measured_algebra_defect, 0.0),
        ("realization_residual", -1, res, 0.0),
        ("realization_residual_half_h", -1, res2, 0.0),
    ]
    ok = (pert.measured_sup <= 3.0 * K**3 * budget.delta < cfg["perturb.epsilon"]
          and pert.support_violations == 0)
    return ResultTable(schema=("record", "index", "value", "stderr"), rows=rows), (0 if ok else 2)


def _run_probe(cfg):
    sys_ = _build_system(cfg)
    roof = _build_roof(cfg)
    grid = tuple(float(x) for x in cfg["probe.grid"].split(",") if x.strip() != "")
    table = genericity_probe(cfg["ell"], sys_, roof, n_trials=cfg["probe.trials"],
                             epsilon_grid=grid, seed=cfg["seed"], h=cfg["h"],
                             n_iters=cfg["probe.iters"])
    rows = [(r["epsilon"], r["fraction_positive"], r["mean_top"]) for r in table]
    return ResultTable(schema=("epsilon", "fraction_positive", "mean_top"), rows=rows), 0


def _run_verify(cfg):
    sys_ = _build_system(cfg)
    roof = _build_roof(cfg)
    f = _build_field(cfg)
    ell = cfg["ell"]
    form = make_standard_form(ell)
    h = cfg["h"]
    rng = np.random.default_rng(cfg["seed"])
    x0 = sys_.random_point(rng)
    x = SuspensionPoint(x0, 0.0)
    checks = []

    J = form.J
    checks.append(("J_squared_plus_I", float(np.abs(J @ J + np.eye(2 * ell)).max()), 0.0))
    checks.append(("J_antisymmetry", float(np.abs(J.T + J).max()), 0.0))
    worst_alg = 0.0
    worst_tr = 0.0
    for k in range(50):
        Hk = random_generator(ell, (cfg["seed"], k), 1.0)
        worst_alg = max(worst_alg, algebra_defect(Hk.mat, form))
        worst_tr = max(worst_tr, abs(float(np.trace(Hk.mat))))
    checks.append(("random_generator_algebra_defect", worst_alg, 1e-13))
    checks.append(("random_generator_trace", worst_tr, 1e-12))

    sol = fundamental_solution(f, sys_, roof, x, 10.0, h)
    checks.append(("solution_symplectic_defect", sol.defect, 1e-10))
    t_res = verify_cocycle_identity(f, sys_, roof, x, 1.0 + h / 2, 2.6, h)
    checks.append(("cocycle_identity_residual", t_res, 1e-6))
    y = SuspensionPoint(x0, 0.0)
    fwd = fundamental_solution(f, sys_, roof, y, 5.0, h).value.mat
    from .base import suspend_flow
    from .symplectic import symplectic_inverse as _si

    bwd = fundamental_solution(f, sys_, roof, suspend_flow(sys_, roof, y, 5.0),
                               -5.0, h).value.mat
    checks.append(("inverse_relation", float(np.linalg.norm(fwd @ bwd - np.eye(2 * ell))), 1e-9))
    lhs, rhs = gronwall_check(f, sys_, roof, x, 5.0, h)
    checks.append(("gronwall_excess", max(0.0, lhs - rhs * (1 + 1e-6)), 0.0))
    r = spectrum_induced(f, sys_, roof, x0, cfg["verify.n"], h=max(h, 5e-3))
    checks.append(("spectrum_sum_residual", r.sum_residual,
                   max(2 * ell * r.stderr_scale, 1e-9)))
    checks.append(("spectrum_pairing_residual", r.pairing_residual,
                   max(3 * r.stderr_scale, 1e-9)))

    rows = []
    failed = 0
    for name, value, thresh in checks:
        ok = value <= thresh + 1e-300 if thresh > 0 else value <= 1e-12
        rows.append((name, -1, float(value), float(thresh)))
        if not ok:
            failed += 1
    return (
        ResultTable(schema=("record", "index", "value", "threshold"), rows=rows),
        0 if failed == 0 else 2,
    )


_DISPATCH = {
    "spectrum": _run_spectrum,
    "holonomy": _run_holonomy,
    "perturb": _run_perturb,
    "probe": _run_probe,
    "verify": _run_verify,
}


def run(config: RunConfig):
    """Execute a validated config; returns (ResultTable, exit status)."""
    t0 = time.monotonic()
    table, status = _DISPATCH[config.command](config)
    table.manifest = {
        "command": config.command,
        "config_hash": config_hash(config),
        "seed": config["seed"],
        "version": __version__,
        "wall_time_s": time.monotonic() - t0,
        "rows": len(table.rows),
        "workers": 1,
    }
    return table, status


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="sympcocycle",
        description="Numerical laboratory for symplectic cocycles over suspension flows",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=False, default=None,
                        help="path to a key = value config document")
    parser.add_argument("--seed", type=int, default=None, help="override the seed")
    parser.add_argument("--out", default=None, help="CSV output path (default stdout)")
    args = parser.parse_args(argv)
    try:
        text = ""
        if args.config:
            with open(args.config, "r", encoding="utf-8") as fh:
                text = fh.read()
        if args.seed is not None:
            text += f"\nseed = {args.seed}\n"
        config = parse_config(text, command=args.command)
        table, status = run(config)
    except (SympcocycleError, OSError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=_sys.stderr)
        return 1
    csv_text = table.to_csv()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
        with open(args.out + ".manifest.json", "w", encoding="utf-8") as fh:
            json.dump(table.manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        _sys.stdout.write(csv_text)
    return status


if __name__ == "__main__":
    raise SystemExit(main())
