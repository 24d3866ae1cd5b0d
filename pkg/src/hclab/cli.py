"""Command-line entry point.

Exit codes: 0 success or passing verdict, 1 failing verdict, 2 usage or
input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .conditions import check_all, sample_params
from .errors import (
    HclabError,
    InvalidInputError,
    InvalidMeshError,
    NumericalError,
    PreconditionError,
)
from .geometry3d import (
    box_p23_max,
    converge_to_sink,
    eigen_margins,
    invariant_region_check,
    planes,
    restrict_triple,
)
from .integrator import IntegrationOptions, integrate, neighborhoods
from .io import SCHEMA, atomic_write, dumps, load_params, save_params, write_json
from .manifold import GammaMesh, build_gamma, classify_combinatorial, classify_topology, trace_fan
from .stability import contraction_experiment, extract_itinerary, stability_experiment

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


def _emit(obj):
    sys.stdout.write(dumps(obj))


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _jobs_default():
    try:
        return max(1, int(os.environ.get("HCLAB_JOBS", "1")))
    except ValueError:
        return 1


def _vector(text):
    """Inline comma/space separated numbers or a CSV file with one row."""
    path = Path(text)
    if path.is_file():
        rows = [r for r in path.read_text().splitlines() if r.strip()]
        rows = [r for r in rows if not r.lstrip().startswith("#")]
        if rows and not _is_numeric_row(rows[0]):
            rows = rows[1:]
        if len(rows) != 1:
            raise InvalidInputError(f"{text}: expected exactly one row of numbers")
        text = rows[0]
    try:
        return np.array([float(v) for v in text.replace(",", " ").split()])
    except ValueError:
        raise InvalidInputError(f"cannot parse a state vector from {text!r}") from None


def _is_numeric_row(row):
    try:
        [float(v) for v in row.replace(",", " ").split()]
        return True
    except ValueError:
        return False


def _check_out(path):
    if path is None:
        return None
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise InvalidInputError(f"output directory {parent} does not exist")
    return path


# ---------------------------------------------------------------- commands


def cmd_validate(a):
    rep = check_all(load_params(a.params))
    _emit({"schema": SCHEMA, **rep.to_dict()})
    return EXIT_OK if rep.all_ok else EXIT_FAIL


def cmd_sample(a):
    _check_out(a.out)
    params = sample_params(a.n, a.p, a.seed)
    rep = check_all(params)
    if a.out:
        save_params(a.out, params)
        _emit({"schema": SCHEMA, "out": a.out, "all_ok": rep.all_ok})
    else:
        _emit({"schema": SCHEMA, **params.to_dict()})
    return EXIT_OK if rep.all_ok else EXIT_FAIL


def _csv_text(times, states):
    n = states.shape[1]
    lines = ["t," + ",".join(f"x_{i}" for i in range(1, n + 1))]
    for t, x in zip(times, states):
        lines.append(",".join("%.17g" % v for v in (t, *x)))
    return "\n".join(lines) + "\n"


def cmd_simulate(a):
    params = load_params(a.params)
    x0 = _vector(a.x0)
    out = _check_out(a.out)
    nbs = () if a.no_events else neighborhoods(params, a.delta, a.epsilon)
    opts = IntegrationOptions(method=a.method, rtol=a.rtol, atol=a.atol, h=a.h, neighborhoods=nbs)
    traj = integrate(params, x0, a.t_end, opts)
    times, states = traj.times, traj.states
    if a.max_gap:
        times, states = traj.refined(a.max_gap)
    events = [e.to_dict() for e in traj.events]
    summary = {
        "schema": SCHEMA,
        "t_end": traj.t_end,
        "samples": int(times.size),
        "final": traj.final,
        "events": len(events),
    }
    if nbs:
        try:
            summary["itinerary"] = extract_itinerary(traj, params).to_dict()
        except HclabError as exc:
            summary["itinerary_error"] = str(exc)
    if out:
        side = Path(out).with_suffix(".events.json")
        atomic_write(out, _csv_text(times, states))
        write_json(side, {"schema": SCHEMA, "events": events})
        summary["out"], summary["events_file"] = str(out), str(side)
    _emit(summary)
    return EXIT_OK


def cmd_triple(a):
    params = load_params(a.params)
    if not 1 <= a.k <= params.p:
        raise InvalidInputError(f"k must be in 1..{params.p}")
    tri = restrict_triple(params, a.k)
    margins = eigen_margins(tri)
    rep = {
        "schema": SCHEMA,
        "k": a.k,
        "indices": list(tri.indices),
        "planes": {name: list(pl.intercepts) for name, pl in planes(tri).items()},
        "eigen_margins": margins,
        "box_p23_max": box_p23_max(tri, a.grid),
    }
    ok = all(v > 0 for v in margins.values())
    if a.check_region:
        try:
            v = invariant_region_check(tri, a.grid)
            rep["region"] = v.to_dict()
            ok = ok and v.holds
        except PreconditionError as exc:
            rep["region"] = {"holds": False, "error": str(exc)}
            ok = False
    if a.converge:
        if a.x0 is None:
            raise InvalidInputError("--converge needs --x0")
        s = converge_to_sink(tri, _vector(a.x0), tol=a.tol, t_max=a.t_max)
        rep["converge"] = {"converged": s.converged, "t_hit": s.t_hit,
                           "final_distance": s.final_distance}
        ok = ok and s.converged
    rep["ok"] = bool(ok)
    _emit(rep)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_trace(a):
    params = load_params(a.params)
    out = _check_out(a.out)
    fan = trace_fan(params, a.k, a.angles, spacing=a.spacing)
    rep = {
        "schema": SCHEMA,
        "k": fan.k,
        "triple": list(fan.triple),
        "angles": fan.angles,
        "arclengths": fan.arclengths,
        "D_xz": fan.D_xz,
        "D_xy": fan.D_xy,
        "D_yz": fan.D_yz,
        "b": fan.b,
    }
    if out:
        full = dict(rep)
        full["orbits"] = [o.tolist() for o in fan.orbits]
        write_json(out, full)
        rep["out"] = out
    _emit(rep)
    return EXIT_OK


def cmd_gamma(a):
    params = load_params(a.params)
    out, obj = _check_out(a.out), _check_out(a.obj)
    mesh = build_gamma(params, a.angles, a.arc, jobs=a.jobs)
    topo = classify_topology(mesh)
    if out:
        mesh.save_json(out)
    if obj:
        mesh.save_obj(obj)
    _emit({
        "schema": SCHEMA,
        "vertices": mesh.num_vertices,
        "triangles": mesh.num_triangles,
        "area": mesh.area(),
        "topology": topo.to_dict(),
        "out": out,
    })
    return EXIT_OK


def cmd_classify(a):
    if a.combinatorial:
        if a.p is None:
            raise InvalidInputError("--combinatorial needs --p")
        rep = classify_combinatorial(a.p)
    else:
        if a.mesh is None:
            raise InvalidInputError("give --mesh or --p with --combinatorial")
        rep = classify_topology(GammaMesh.load_json(a.mesh))
    sys.stdout.write(json.dumps(rep.to_dict(), separators=(",", ":")) + "\n")
    return EXIT_OK


def cmd_contraction(a):
    params = load_params(a.params)
    out = _check_out(a.out)
    fit = contraction_experiment(params, a.k, a.delta, a.eps_list, direction=a.direction)
    rep = {"schema": SCHEMA, **fit.to_dict(), "contracting": fit.s > 1}
    if out:
        write_json(out, rep)
    _emit(rep)
    return EXIT_OK if fit.s > 1 else EXIT_FAIL


def cmd_stability(a):
    params = load_params(a.params)
    mesh = GammaMesh.load_json(a.mesh)
    out = _check_out(a.out)
    rep = stability_experiment(params, mesh, a.eps, a.laps, a.trials, seed=a.seed,
                               floor=a.floor, jobs=a.jobs)
    d = {"schema": SCHEMA, **rep.to_dict()}
    if out:
        write_json(out, d)
    _emit({"schema": SCHEMA, "passed": d["passed"], "floor": d["floor"], **d["summary"],
           "out": out})
    return EXIT_OK if rep.passed else EXIT_FAIL


# ---------------------------------------------------------------- parser


def build_parser():
    ap = argparse.ArgumentParser(prog="hclab", description="Heteroclinic surface laboratory.")
    ap.add_argument("--version", action="version", version=f"hclab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check the inequality families")
    s.add_argument("params")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("sample", help="random parameters satisfying every condition")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--out")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("simulate", help="integrate one trajectory to CSV")
    s.add_argument("--params", required=True)
    s.add_argument("--x0", required=True, help="inline numbers or a one-row CSV file")
    s.add_argument("--t-end", type=_positive, required=True)
    s.add_argument("--out")
    s.add_argument("--method", choices=("rk45", "rk4"), default="rk45")
    s.add_argument("--rtol", type=_positive, default=1e-10)
    s.add_argument("--atol", type=_positive, default=1e-10)
    s.add_argument("--h", type=_positive, default=1e-3, help="step of the fixed-step scheme")
    s.add_argument("--delta", type=_positive)
    s.add_argument("--epsilon", type=_positive)
    s.add_argument("--max-gap", type=_positive, help="resample so states move at most this much")
    s.add_argument("--no-events", action="store_true")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("triple", help="three-species restriction at O_k")
    s.add_argument("--params", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--check-region", action="store_true")
    s.add_argument("--converge", action="store_true")
    s.add_argument("--x0")
    s.add_argument("--tol", type=_positive, default=1e-6)
    s.add_argument("--t-max", type=_positive, default=500.0)
    s.add_argument("--grid", type=int, default=200)
    s.set_defaults(func=cmd_triple)

    s = sub.add_parser("trace", help="orbit fan of W^u(O_k)")
    s.add_argument("--params", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--angles", type=int, default=33)
    s.add_argument("--spacing", choices=("adaptive", "uniform"), default="adaptive")
    s.add_argument("--out")
    s.set_defaults(func=cmd_trace)

    s = sub.add_parser("gamma", help="mesh of the heteroclinic surface")
    s.add_argument("--params", required=True)
    s.add_argument("--angles", type=int, default=33)
    s.add_argument("--arc", type=int, default=64)
    s.add_argument("--out")
    s.add_argument("--obj", help="also write a Wavefront OBJ file")
    s.add_argument("--jobs", type=int, default=_jobs_default())
    s.set_defaults(func=cmd_gamma)

    s = sub.add_parser("classify", help="topology of a mesh or of the abstract complex")
    s.add_argument("--mesh")
    s.add_argument("--p", type=int)
    s.add_argument("--combinatorial", action="store_true")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("contraction", help="fit the passage exponent at O_k")
    s.add_argument("--params", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--delta", type=_positive)
    s.add_argument("--eps-list", type=_positive, nargs="+", default=[1e-3, 1e-4, 1e-5, 1e-6])
    s.add_argument("--direction", type=float, nargs=2)
    s.add_argument("--out")
    s.set_defaults(func=cmd_contraction)

    s = sub.add_parser("stability", help="perturbation experiment around the mesh")
    s.add_argument("--params", required=True)
    s.add_argument("--mesh", required=True)
    s.add_argument("--eps", type=float, default=1e-3)
    s.add_argument("--laps", type=int, default=3)
    s.add_argument("--trials", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--floor", type=float, help="mesh floor; estimated by refinement if omitted")
    s.add_argument("--jobs", type=int, default=_jobs_default())
    s.add_argument("--out")
    s.set_defaults(func=cmd_stability)
    return ap


def main(argv=None):
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return a.func(a)
    except (InvalidInputError, InvalidMeshError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"hclab {a.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PreconditionError as exc:
        print(f"hclab {a.command}: precondition failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except NumericalError as exc:
        print(f"hclab {a.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
