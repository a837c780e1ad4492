"""Command line interface: list and verify catalog entries, certify holonomy, run the solvers.

Exit codes: 0 pass, 1 verification failure, 2 usage or parameter error,
3 inconclusive holonomy certificate, 4 solver abort.
"""
from __future__ import annotations

import json
import math
import sys
import time
from typing import Dict, List, Optional, Sequence

import click
import numpy as np

from . import catalog, pde
from .curvature import curvature_at, curvature_operator_rank

SCHEMA_VERSION = 1
EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_INCONCLUSIVE, EXIT_ABORT = 0, 1, 2, 3, 4


class CliExit(Exception):
    def __init__(self, code: int, message: str = ""):
        self.code = code
        self.message = message


def _parse_params(items: Sequence[str], params_json: Optional[str]) -> Dict[str, float]:
    out: Dict[str, float] = {}
    if params_json:
        try:
            loaded = json.loads(params_json)
        except json.JSONDecodeError as exc:
            raise CliExit(EXIT_USAGE, f"--params is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise CliExit(EXIT_USAGE, "--params must be a JSON object")
        out.update(loaded)
    for item in items:
        if "=" not in item:
            raise CliExit(EXIT_USAGE, f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise CliExit(EXIT_USAGE, f"--param {k}: {v!r} is not a number") from None
    return out


def _build(name: str, params: Dict[str, float]):
    try:
        return catalog.build(name, params)
    except catalog.CatalogError as exc:
        raise CliExit(EXIT_USAGE, str(exc)) from None
    except (catalog.ParameterError, catalog.PreconditionError) as exc:
        raise CliExit(EXIT_USAGE, f"parameter error: {exc}") from None


def _write_json(path: Optional[str], payload: Dict) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(json.dumps(payload, sort_keys=True, indent=2))
            fh.write("\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


# ---------------------------------------------------------------------------
# the verification suite


def printed_metric_residual(bundle, points) -> float:
    """max over points and coefficients of |g - printed| / max(1, |printed|)."""
    g = bundle.metric
    P = bundle.printed_metric.restricted(g.axes).matrix(points)
    G = g.matrix(points)
    return float(np.max(np.abs(G - P) / np.maximum(1.0, np.abs(P))))


def ricci_ratio(bundle, points) -> float:
    return float(np.max(curvature_at(bundle.metric, points).ricci_ratio()))


def verify_bundle(bundle, points, tol: float = 1e-8, ricci_points: int = 20, ricci_tol: float = 1e-6) -> Dict:
    """Residuals of every identity that applies to the entry; returns a dict of criteria."""
    st = bundle.structure
    crit: Dict[str, Dict] = {}

    def add(name, value, limit):
        if name.startswith("min_"):
            # nondegeneracy bounds: these must stay away from zero
            crit[name] = {"value": float(value), "limit": float(limit), "pass": bool(value > limit), "bound": "lower"}
        else:
            crit[name] = {"value": float(value), "limit": float(limit), "pass": bool(value < limit)}

    if bundle.kind == "spin7":
        add("d_Phi", st.closure_residual(points), tol)
        for k, v in st.invariant_residuals(points).items():
            add(k, v, tol)
    elif bundle.kind == "g2":
        for k, v in st.invariant_residuals(points).items():
            add(k, v, tol)
        for k, v in st.torsion_residuals(points).items():
            add(k, v, tol)
    elif bundle.kind == "su3":
        for k, v in st.invariant_residuals(points).items():
            add(k, v, tol)
        for k, v in st.closure_residuals(points).items():
            add(k, v, tol)
    elif bundle.kind == "su4":
        for k, v in st.closure_residuals(points).items():
            add(k, v, tol)
        add("type_1_1", st.type_residual(points), tol)
    add("ricci_ratio", ricci_ratio(bundle, points[:ricci_points]), ricci_tol)
    if bundle.printed_metric is not None:
        add("printed_metric", printed_metric_residual(bundle, points), tol)
    if bundle.reduction_I is not None:
        rep = pde.check_reduction_I(bundle.reduction_I, points)
        k, v = rep.worst()
        add(f"reduction_I:{k}", v, tol)
    if bundle.reduction_II is not None:
        rep = pde.check_reduction_II(bundle.reduction_II, points)
        k, v = rep.worst()
        add(f"reduction_II:{k}", v, tol)
    return crit


def _report_header(command: str, seed: Optional[int], **extra) -> Dict:
    out = {"schema_version": SCHEMA_VERSION, "command": command}
    if seed is not None:
        out["seed"] = seed
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# click commands


@click.group()
@click.option("--single-thread", is_flag=True, help="Reference execution path (every kernel here is single-threaded already).")
@click.pass_context
def main(ctx, single_thread):
    """Explicit special-holonomy structures: catalog, checks and solvers."""
    ctx.ensure_object(dict)
    ctx.obj["single_thread"] = single_thread


def _run(fn):
    try:
        code = fn()
    except CliExit as exc:
        if exc.message:
            click.echo(exc.message, err=True)
        sys.exit(exc.code)
    sys.exit(code or 0)


@main.command("list")
def cmd_list():
    """Catalog entries with their provenance tags."""
    for name, (_, kind, prov) in catalog.REGISTRY.items():
        click.echo(f"{name} {prov} {kind}")


@main.command("describe")
@click.argument("name")
@click.option("--param", "param", multiple=True, help="key=value, repeatable.")
@click.option("--params", "params_json", default=None, help="Parameters as a JSON object.")
def cmd_describe(name, param, params_json):
    """Print an entry's descriptor as JSON."""

    def go():
        b = _build(name, _parse_params(param, params_json))
        click.echo(b.to_json())
        return EXIT_PASS

    _run(go)


@main.command("verify")
@click.argument("name")
@click.option("--param", "param", multiple=True, help="key=value, repeatable.")
@click.option("--params", "params_json", default=None, help="Parameters as a JSON object.")
@click.option("--points", default=100, show_default=True, help="Number of random sample points.")
@click.option("--seed", default=0, show_default=True, help="Seed of the point sampler.")
@click.option("--tol", default=1e-8, show_default=True, help="Tolerance for every identity except Ricci.")
@click.option("--ricci-points", default=20, show_default=True)
@click.option("--ricci-tol", default=1e-6, show_default=True)
@click.option("--json", "json_path", default=None, help="Write the report here.")
@click.option("--timing", is_flag=True, help="Include wall time in the report (makes it non-reproducible).")
def cmd_verify(name, param, params_json, points, seed, tol, ricci_points, ricci_tol, json_path, timing):
    """Run the identity suite on a catalog entry; exit 0 iff everything passes."""

    def go():
        t0 = time.perf_counter()
        params = _parse_params(param, params_json)
        b = _build(name, params)
        rng = np.random.default_rng(seed)
        try:
            pts = b.sample_points(rng, points)
        except catalog.ParameterError as exc:
            raise CliExit(EXIT_USAGE, str(exc)) from None
        crit = verify_bundle(b, pts, tol=tol, ricci_points=ricci_points, ricci_tol=ricci_tol)
        failing = [k for k, v in crit.items() if not v["pass"]]
        report = _report_header(
            "verify",
            seed,
            entry=name,
            params={k: float(v) for k, v in b.params.items()},
            points=int(pts.shape[0]),
            criteria=crit,
            passed=not failing,
            metadata=_jsonable({k: v for k, v in b.metadata.items() if isinstance(v, (str, int, float, bool))}),
        )
        if timing:
            report["wall_time_s"] = time.perf_counter() - t0
        _write_json(json_path, report)
        click.echo(f"{name} ({b.provenance}) seed={seed} points={pts.shape[0]}")
        for k, v in crit.items():
            rel = ">" if v.get("bound") == "lower" else "<"
            click.echo(f"  {'ok  ' if v['pass'] else 'FAIL'} {k:<28} {v['value']:.3e}  ({rel} {v['limit']:g})")
        if b.metadata.get("clipped_to_s_star"):
            click.echo(f"  note: s range clipped to s > s* = {b.metadata['s_star']:.10f}")
        if failing:
            click.echo(f"FAIL: first failing criterion {failing[0]}")
            return EXIT_FAIL
        click.echo("PASS")
        return EXIT_PASS

    _run(go)


@main.command("holonomy")
@click.argument("name")
@click.option("--param", "param", multiple=True)
@click.option("--params", "params_json", default=None)
@click.option("--points", default=4, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--json", "json_path", default=None)
def cmd_holonomy(name, param, params_json, points, seed, json_path):
    """Rank certificate of the curvature operator."""

    def go():
        b = _build(name, _parse_params(param, params_json))
        pts = b.sample_points(np.random.default_rng(seed), points)
        cert = curvature_operator_rank(b.metric, pts)
        expected = b.expected_holonomy_rank
        report = _report_header("holonomy", seed, entry=name, expected=expected, certificate=_jsonable(cert.as_dict()))
        _write_json(json_path, report)
        click.echo(f"{name}: rank {cert.operator_rank} gap {cert.gap_ratio:.3e} status {cert.status} (expected {expected})")
        if cert.status != "certified":
            return EXIT_INCONCLUSIVE
        if isinstance(expected, int) and cert.operator_rank != expected:
            click.echo(f"FAIL: rank {cert.operator_rank} differs from the expected {expected}")
            return EXIT_FAIL
        if isinstance(expected, str) and expected.startswith("<=") and cert.operator_rank > int(expected[2:]):
            click.echo(f"FAIL: rank {cert.operator_rank} exceeds the bound {expected}")
            return EXIT_FAIL
        return EXIT_PASS

    _run(go)


@main.command("hitchin-check")
@click.argument("name")
@click.option("--param", "param", multiple=True)
@click.option("--params", "params_json", default=None)
@click.option("--points", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--normal-axis", default=None, help="Coordinate name or index of the foliation parameter.")
@click.option("--tol", default=1e-9, show_default=True)
@click.option("--json", "json_path", default=None)
def cmd_hitchin(name, param, params_json, points, seed, normal_axis, tol, json_path):
    """Hypersurface flow residuals along the level sets of the entry's normal coordinate."""

    def go():
        b = _build(name, _parse_params(param, params_json))
        pts = b.sample_points(np.random.default_rng(seed), points)
        axis = None
        if normal_axis is not None:
            axis = int(normal_axis) if normal_axis.lstrip("-").isdigit() else normal_axis
        try:
            rep = pde.hitchin_check(b, pts, normal_axis=axis, tol=tol)
        except (ValueError, KeyError) as exc:
            raise CliExit(EXIT_USAGE, str(exc)) from None
        _write_json(json_path, _report_header("hitchin-check", seed, entry=name, report=_jsonable(rep.as_dict())))
        for k, v in rep.residuals.items():
            click.echo(f"  {k:<24} {v:.3e}")
        if rep.passed:
            click.echo("PASS")
            return EXIT_PASS
        click.echo(f"FAIL: {rep.failing()[0]}")
        return EXIT_FAIL

    _run(go)


@main.group("solve")
def cmd_solve():
    """Algebraic solvers."""


@cmd_solve.command("ode1")
@click.option("--A", "A", type=float, required=True)
@click.option("--c", "c", type=float, required=True)
@click.option("--H", "H", type=float, multiple=True, help="Value of H, repeatable.")
@click.option("--h-range", nargs=3, type=(float, float, int), default=None, help="LO HI N: N evenly spaced H values.")
@click.option("--json", "json_path", default=None)
def cmd_ode1(A, c, H, h_range, json_path):
    """Solve A H = s^{1/3}(s + c) for s on the increasing branch."""

    def go():
        hs: List[float] = list(H)
        if h_range is not None:
            lo, hi, n = h_range
            if n < 1:
                raise CliExit(EXIT_USAGE, "--h-range needs N >= 1")
            hs.extend(np.linspace(lo, hi, n).tolist())
        if not hs:
            hs = np.linspace(0.1, 10.0, 5).tolist()
        rows = []
        for h in hs:
            try:
                s = pde.solve_s_of_H(A, c, h)
            except pde.RootError as exc:
                raise CliExit(EXIT_USAGE, f"H={h:g}: {exc}") from None
            r = abs(A * h - np.cbrt(s) * (s + c))
            rows.append({"H": h, "s": s, "residual": float(r)})
            click.echo(f"H={h:.6g} s={s:.15g} residual={r:.2e}")
        _write_json(json_path, _report_header("solve ode1", None, A=A, c=c, rows=rows))
        return EXIT_PASS

    _run(go)


_MA_KEYS = {"fixture", "params", "sizes", "s_range", "steps", "thin_grid"}
_DUDE_KEYS = {"fixture", "params", "sizes", "y_range", "steps"}


def _load_config(path: Optional[str], allowed) -> Dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliExit(EXIT_USAGE, f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise CliExit(EXIT_USAGE, "config must be a JSON object")
    bad = set(cfg) - allowed - {"schema_version"}
    if bad:
        raise CliExit(EXIT_USAGE, f"unknown config keys {sorted(bad)}; allowed: {sorted(allowed)}")
    if cfg.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise CliExit(EXIT_USAGE, f"unsupported schema_version {cfg['schema_version']}")
    return cfg


def _sizes(cfg_sizes, cli_sizes) -> List[int]:
    sizes = list(cli_sizes) or list(cfg_sizes or [8, 16])
    try:
        sizes = [int(n) for n in sizes]
    except (TypeError, ValueError):
        raise CliExit(EXIT_USAGE, "sizes must be integers") from None
    if any(n < 4 for n in sizes):
        raise CliExit(EXIT_USAGE, "grid sizes must be at least 4")
    return sizes


def _print_table(rows, cols):
    click.echo("  ".join(f"{c:>12}" for c in cols))
    for r in rows:
        click.echo("  ".join(f"{r[c]:>12.4e}" if isinstance(r.get(c), float) else f"{str(r.get(c, '-')):>12}" for c in cols))


@main.group("evolve")
def cmd_evolve():
    """Grid evolutions with convergence tables."""


@cmd_evolve.command("ma")
@click.option("--config", "config_path", default=None, help="JSON config (keys: fixture, params, sizes, s_range, steps, thin_grid).")
@click.option("--fixture", default=None, type=click.Choice(["constant_I", "perturbed_glps"]))
@click.option("--size", "sizes", multiple=True, type=int, help="Grid points per axis, repeatable.")
@click.option("--s-range", nargs=2, type=float, default=None)
@click.option("--thin-grid", is_flag=True, default=None, help="Use n x n x 4 x 4 grids (solutions depending on x1, x2 only).")
@click.option("--json", "json_path", default=None)
@click.option("--csv", "csv_path", default=None, help="Final potential of the finest run.")
def cmd_ma(config_path, fixture, sizes, s_range, thin_grid, json_path, csv_path):
    """Monge-Ampere evolution of a fixture against its closed form."""

    def go():
        cfg = _load_config(config_path, _MA_KEYS)
        name = fixture or cfg.get("fixture", "constant_I")
        params = cfg.get("params", {})
        if not isinstance(params, dict):
            raise CliExit(EXIT_USAGE, "params must be an object")
        sr = tuple(s_range) if s_range else tuple(cfg.get("s_range", (1.0, 1.2)))
        thin = bool(cfg.get("thin_grid", False)) if thin_grid is None else thin_grid
        steps = cfg.get("steps")
        rows = []
        last = None
        for n in _sizes(cfg.get("sizes"), sizes):
            try:
                fx = pde.ma_fixture(name, n, sr, params, shape=(n, n, 4, 4) if thin else None)
                rep, ep, ew = pde.run_ma_fixture(fx, steps)
            except pde.GridError as exc:
                raise CliExit(EXIT_USAGE, str(exc)) from None
            except pde.EvolutionAbort as exc:
                _write_json(json_path, _report_header("evolve ma", None, fixture=name, aborted=str(exc), step=exc.step, location=exc.location))
                raise CliExit(EXIT_ABORT, f"aborted: {exc}") from None
            rows.append({"n": n, "h": fx.F0.spacings[0], "steps": rep.steps, "err_phi": ep, "err_omega": ew,
                         "max_step_residual": max(rep.max_residual_per_step)})
            last = rep
        hs = [r["h"] for r in rows]
        for key in ("err_phi", "err_omega"):
            for r, t in zip(rows, pde.convergence_table([r[key] for r in rows], hs)):
                r["order_" + key[4:]] = t.get("order", "-")
                if r[key] == 0.0:
                    r["order_" + key[4:]] = "exact"
        _print_table(rows, ["n", "h", "steps", "err_phi", "order_phi", "err_omega", "order_omega", "max_step_residual"])
        if csv_path and last is not None:
            last.final.to_csv(csv_path)
        _write_json(json_path, _report_header("evolve ma", None, fixture=name, params=params, s_range=list(sr),
                                              table=_jsonable(rows), finest=_jsonable(last.as_dict())))
        return EXIT_PASS

    _run(go)


@cmd_evolve.command("dude4")
@click.option("--config", "config_path", default=None, help="JSON config (keys: fixture, params, sizes, y_range, steps).")
@click.option("--fixture", default=None, type=click.Choice(["affine", "airy"]))
@click.option("--size", "sizes", multiple=True, type=int)
@click.option("--y-range", nargs=2, type=float, default=None)
@click.option("--json", "json_path", default=None)
@click.option("--csv", "csv_path", default=None)
def cmd_dude4(config_path, fixture, sizes, y_range, json_path, csv_path):
    """Second-reduction evolution G u~'' = y Delta u~ against a closed form."""

    def go():
        cfg = _load_config(config_path, _DUDE_KEYS)
        name = fixture or cfg.get("fixture", "airy")
        params = cfg.get("params", {})
        yr = tuple(y_range) if y_range else tuple(cfg.get("y_range", (1.0, 1.5)))
        rows = []
        last = None
        for n in _sizes(cfg.get("sizes"), sizes):
            try:
                fx = pde.dude4_fixture(name, n, yr, params)
                rep, err = pde.run_dude4_fixture(fx, cfg.get("steps"))
            except pde.GridError as exc:
                raise CliExit(EXIT_USAGE, str(exc)) from None
            except pde.EvolutionAbort as exc:
                _write_json(json_path, _report_header("evolve dude4", None, fixture=name, aborted=str(exc), step=exc.step, location=exc.location))
                raise CliExit(EXIT_ABORT, f"aborted: {exc}") from None
            rows.append({"n": n, "h": fx.u0.spacings[0], "steps": rep.steps, "error": err,
                         "max_step_residual": max(rep.max_residual_per_step)})
            last = rep
        for r, t in zip(rows, pde.convergence_table([r["error"] for r in rows], [r["h"] for r in rows])):
            r["order"] = t.get("order", "-")
        _print_table(rows, ["n", "h", "steps", "error", "order", "max_step_residual"])
        if csv_path and last is not None:
            last.final.to_csv(csv_path)
        _write_json(json_path, _report_header("evolve dude4", None, fixture=name, params=params, y_range=list(yr),
                                              table=_jsonable(rows), finest=_jsonable(last.as_dict())))
        return EXIT_PASS

    _run(go)


if __name__ == "__main__":
    main()
