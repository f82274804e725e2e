'''Command-line front end.

Subcommands
-----------
generate    write a dataset (and ground truth when one exists) as f64-binary
whiten      center/whiten a matrix, optionally PCA-reducing it first
fit         unmix one dataset with a chosen policy, writing W, Y, and a trace
benchmark   run (policy x seed) grids and aggregate gradient-norm percentiles
spectrum    materialize the curvature operators at a fitted optimum

Conventions shared by all subcommands:

* Matrices travel as f64-binary or csv (see the data module). Every output
  file gains a sidecar `<name>.prov.json` recording the exact command line
  and seed that produced it, except text formats with room for an embedded
  header (traces carry a header record; aggregate/spectrum csv start with a
  `#`-prefixed JSON line).
* Trace files are JSON lines: first a header object tagged
  "picardkit-trace-1" with the full solver config and data provenance, then
  one record per iteration with fields {iter, t_sec, loss, gnorm, alpha,
  backtracks}. Records are buffered and written after the solve finishes so
  logging never contaminates the timing column; on numerical failure the
  partial trace is still written. The loss is serialized at ~28 significant
  digits (from the solver's compensated accumulator), so the recorded
  sequence strictly decreases; parse it with a decimal type to see
  decreases below float64 resolution.
* Exit codes: 0 success, 1 numerical failure, 2 usage/input error.
* `PICARDKIT_THREADS` caps the threads used by the underlying BLAS
  (0 means serial). Unset leaves the library defaults alone.
'''

import argparse
import json
import os
import sys
from decimal import Decimal

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .data import (
    SourceSpec,
    dead_leaves_image,
    extract_patches,
    generate_dependent,
    generate_synthetic,
    load_matrix,
    load_pgm,
    save_matrix,
    save_pgm,
)
from .diagnostics import (
    MAX_MATERIALIZE_N,
    MAX_PRECONDITIONER_N,
    materialize_full_hessian,
    materialize_preconditioner_inverse,
    materialize_simple_hessian,
    preconditioned_spectrum,
)
from .errors import (
    ContractError,
    DegenerateDataError,
    DimensionError,
    FormatError,
    LineSearchFailure,
    NotSpdError,
    NumericalFailure,
    SingularityError,
    UndefinedRateError,
)
from .lbfgs import LbfgsMemory
from .likelihood import full_hessian, get_score, gradient_and_coeffs
from .linalg import pca_reduce, sup_norm, whiten
from .solver import SolverConfig, fit

TRACE_SCHEMA = "picardkit-trace-1"
AGGREGATE_SCHEMA = "picardkit-aggregate-1"
SPECTRUM_SCHEMA = "picardkit-spectrum-1"
PROVENANCE_SCHEMA = "picardkit-provenance-1"

# user-facing policy names -> solver policy identifiers
POLICY_BY_NAME = {
    "gradient": "identity",
    "fr-newton": "simple",
    "picard": "preconditioned-lbfgs",
}

TIME_GRID_POINTS = 200

NUMERICAL_ERRORS = (
    NumericalFailure,
    SingularityError,
    NotSpdError,
    LineSearchFailure,
    DegenerateDataError,
    UndefinedRateError,
)
USAGE_ERRORS = (
    FormatError,
    DimensionError,
    ContractError,
    FileNotFoundError,
    IsADirectoryError,
)


def _json_line(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _write_provenance(path, command, descriptor, seed=None):
    prov = {"schema": PROVENANCE_SCHEMA, "command": command, "descriptor": descriptor}
    if seed is not None:
        prov["seed"] = seed
    with open(str(path) + ".prov.json", "w", encoding="ascii") as f:
        f.write(_json_line(prov))
        f.write("\n")


def _save_with_prov(path, X, command, descriptor, seed=None, format="f64-binary"):
    save_matrix(path, format, X)
    _write_provenance(path, command, descriptor, seed)


def _out_path(args, name):
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _trace_header(config, cli_policy, provenance, command, N, T, seed=None):
    header = {
        "schema": TRACE_SCHEMA,
        "policy": cli_policy,
        "constrained": config.whiteness_constraint,
        "config": {
            "policy": config.policy,
            "whiteness_constraint": config.whiteness_constraint,
            "tol": config.tol,
            "max_iter": config.max_iter,
            "lambda_floor": config.lambda_floor,
            "memory_size": config.memory_size,
            "armijo_c1": config.armijo_c1,
            "backtrack_factor": config.backtrack_factor,
            "max_backtracks": config.max_backtracks,
        },
        "provenance": provenance,
        "command": command,
        "n": N,
        "t": T,
    }
    if seed is not None:
        header["seed"] = seed
    return header


def _write_trace(path, header, trace):
    with open(path, "w", encoding="ascii") as f:
        f.write(_json_line(header))
        f.write("\n")
        for r in trace:
            # the loss is written from the solver's compensated pair at ~28
            # significant digits: consecutive records then keep their strict
            # decrease even when a single step's decrease is smaller than
            # one float64 ulp of the loss value itself
            loss = Decimal(r.loss) + Decimal(r.loss_residual)
            f.write('{"alpha":%s,"backtracks":%d,"gnorm":%s,"iter":%d,'
                    '"loss":%s,"t_sec":%s}\n'
                    % (repr(r.step_size), r.backtracks_used,
                       repr(r.gradient_sup_norm), r.iteration,
                       loss, repr(r.elapsed_seconds)))


def _read_trace(path):
    '''Header dict and record list of a trace file written by _write_trace.'''
    with open(path, "r", encoding="ascii") as f:
        lines = [ln for ln in f.read().splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"empty trace file: {path}")
    header = json.loads(lines[0])
    if header.get("schema") != TRACE_SCHEMA:
        raise FormatError(
            f"unknown trace schema {header.get('schema')!r} in {path}")
    records = [json.loads(ln) for ln in lines[1:]]
    return header, records


def _build_config(args, policy, constrained):
    return SolverConfig(
        policy=policy,
        whiteness_constraint=constrained,
        tol=args.tol,
        max_iter=args.max_iter,
        lambda_floor=args.lambda_floor,
        memory_size=args.memory_size,
    )


def _prepare_signals(X, assume_white, pca=None):
    '''The whitening step shared by fit/benchmark/spectrum. Returns the
    solver-ready matrix.'''
    if pca is not None:
        X = pca_reduce(X, pca)
    if assume_white:
        return np.asarray(X, dtype=np.float64)
    Z, _ = whiten(X)
    return Z


# ---------------------------------------------------------------------------
# generate

def cmd_generate(args):
    command = args.command_line
    kind = args.kind
    if kind == "synthetic":
        if args.n is None or args.t is None:
            args.parser.error("--kind synthetic requires --n and --t")
        params = {}
        if args.mu is not None:
            params["mu"] = args.mu
        if args.sigma is not None:
            params["sigma"] = args.sigma
        spec = SourceSpec(distribution=args.distribution, params=params)
        ds = generate_synthetic(args.n, args.t, args.seed, spec)
    elif kind == "dependent":
        if args.n is None or args.t is None:
            args.parser.error("--kind dependent requires --n and --t")
        ds = generate_dependent(args.n, args.t, args.seed,
                                args.overcomplete_factor, args.noise_level)
    elif kind == "patches":
        if args.image is None:
            args.parser.error("--kind patches requires --image")
        image = load_pgm(args.image)
        ds = extract_patches(image, args.edge, args.count, args.seed)
    elif kind == "dead-leaves":
        img = dead_leaves_image(size=args.size, seed=args.seed,
                                disks=args.disks, noise=args.noise)
        descriptor = (f"dead-leaves(size={args.size}, seed={args.seed}, "
                      f"disks={args.disks}, noise={args.noise})")
        path = _out_path(args, "image.pgm")
        save_pgm(path, img)
        _write_provenance(path, command, descriptor, args.seed)
        print(descriptor)
        print(f"wrote {path}")
        return 0
    else:  # pragma: no cover - argparse restricts choices
        args.parser.error(f"unknown kind {kind!r}")

    x_path = _out_path(args, "X.bin")
    _save_with_prov(x_path, ds.X, command, ds.provenance, args.seed)
    written = [x_path]
    if ds.A is not None:
        a_path = _out_path(args, "A.bin")
        _save_with_prov(a_path, ds.A, command, ds.provenance, args.seed)
        written.append(a_path)
    if ds.S is not None:
        s_path = _out_path(args, "S.bin")
        _save_with_prov(s_path, ds.S, command, ds.provenance, args.seed)
        written.append(s_path)
    print(ds.provenance)
    print("wrote " + " ".join(written))
    return 0


# ---------------------------------------------------------------------------
# whiten

def cmd_whiten(args):
    X = load_matrix(args.input, args.input_format)
    if args.pca is not None:
        X = pca_reduce(X, args.pca)
    Z, res = whiten(X)
    descriptor = (f"whiten(input={args.input}"
                  + (f", pca={args.pca}" if args.pca is not None else "")
                  + ")")
    save_matrix(args.output, args.output_format, Z)
    _write_provenance(args.output, args.command_line, descriptor)
    lam = res.covariance_eigenvalues
    print(f"{Z.shape[0]} channels, {Z.shape[1]} samples; "
          f"covariance eigenvalues in [{lam[-1]:.6g}, {lam[0]:.6g}]")
    print(f"wrote {args.output}")
    return 0


# ---------------------------------------------------------------------------
# fit

def cmd_fit(args):
    command = args.command_line
    X = load_matrix(args.input, args.input_format)
    Xw = _prepare_signals(X, args.assume_white, args.pca)
    score = get_score(args.score)
    config = _build_config(args, POLICY_BY_NAME[args.policy], args.constrained)
    prov = f"fit(input={args.input}, policy={args.policy})"
    header = _trace_header(config, args.policy, prov, command,
                           Xw.shape[0], Xw.shape[1])
    trace_path = _out_path(args, args.trace_name)

    try:
        result = fit(Xw, score, config)
    except NumericalFailure as exc:
        if exc.trace is not None:
            _write_trace(trace_path, header, exc.trace)
            print(f"wrote partial trace {trace_path}", file=sys.stderr)
        raise

    _write_trace(trace_path, header, result.trace)
    w_path = _out_path(args, "W.bin")
    y_path = _out_path(args, "Y.bin")
    _save_with_prov(w_path, result.W, command, prov)
    _save_with_prov(y_path, result.Y, command, prov)

    final = result.trace[-1]
    ortho = sup_norm(result.W @ result.W.T - np.eye(result.W.shape[0]))
    summary = {
        "converged": result.converged,
        "iterations": final.iteration,
        "final_loss": final.loss,
        "final_gnorm": final.gradient_sup_norm,
        "orthogonality_error": ortho,
        "elapsed_seconds": final.elapsed_seconds,
        "policy": args.policy,
        "constrained": args.constrained,
    }
    with open(_out_path(args, "summary.json"), "w", encoding="ascii") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"converged={result.converged} iterations={final.iteration} "
          f"final_gnorm={final.gradient_sup_norm:.3e} "
          f"orthogonality_error={ortho:.3e}")
    print(f"wrote {trace_path} {w_path} {y_path}")
    return 0


# ---------------------------------------------------------------------------
# benchmark

def _benchmark_dataset(args, seed, image):
    if args.kind == "synthetic":
        ds = generate_synthetic(args.n, args.t, seed)
        return ds.X, ds.provenance
    ds = extract_patches(image, args.edge, args.count, seed)
    return ds.X, ds.provenance


def _percentile_rows(series, policy, mode):
    '''Aggregate a list of (t_sec array, gnorm array) runs into csv rows.

    Runs that stopped early hold their final gradient norm, so every
    percentile at index/time x summarizes all runs, not just the survivors.
    '''
    rows = []
    n_iters = max(len(g) for _, g in series)
    padded = np.stack([
        np.concatenate([g, np.full(n_iters - len(g), g[-1])]) for _, g in series])
    for i in range(n_iters):
        p10, p50, p90 = np.percentile(padded[:, i], [10.0, 50.0, 90.0])
        rows.append((policy, mode, "iteration", float(i), p10, p50, p90))

    t_end = max(t[-1] for t, _ in series)
    grid = np.linspace(0.0, t_end, TIME_GRID_POINTS)
    sampled = np.empty((len(series), TIME_GRID_POINTS))
    for k, (t, g) in enumerate(series):
        idx = np.clip(np.searchsorted(t, grid, side="right") - 1, 0, len(g) - 1)
        sampled[k] = g[idx]
    for j in range(TIME_GRID_POINTS):
        p10, p50, p90 = np.percentile(sampled[:, j], [10.0, 50.0, 90.0])
        rows.append((policy, mode, "time", grid[j], p10, p50, p90))
    return rows


def cmd_benchmark(args):
    command = args.command_line
    if args.kind == "synthetic":
        if args.n is None or args.t is None:
            args.parser.error("--kind synthetic requires --n and --t")
        image = None
    else:
        if args.image is None:
            args.parser.error("--kind patches requires --image")
        image = load_pgm(args.image)

    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    for p in policies:
        if p not in POLICY_BY_NAME:
            args.parser.error(
                f"unknown policy {p!r}, choose from {sorted(POLICY_BY_NAME)}")
    if not policies:
        args.parser.error("--policies must name at least one policy")

    mode = "constrained" if args.constrained else "unconstrained"
    seeds = list(range(args.first_seed, args.first_seed + args.n_runs))
    score = get_score(args.score)
    os.makedirs(args.out_dir, exist_ok=True)

    runs = []
    for seed in seeds:
        X, provenance = _benchmark_dataset(args, seed, image)
        if args.pca is not None:
            X = pca_reduce(X, args.pca)
        Xw, _ = whiten(X)
        for policy in policies:
            config = _build_config(args, POLICY_BY_NAME[policy],
                                   args.constrained)
            name = f"trace_{policy}_{mode}_seed{seed}.jsonl"
            path = os.path.join(args.out_dir, name)
            header = _trace_header(config, policy, provenance, command,
                                   Xw.shape[0], Xw.shape[1], seed=seed)
            entry = {"policy": policy, "mode": mode, "seed": seed, "file": name}
            try:
                result = fit(Xw, score, config)
            except NUMERICAL_ERRORS as exc:
                trace = getattr(exc, "trace", None)
                if trace:
                    _write_trace(path, header, trace)
                entry.update(failed=True, error=f"{type(exc).__name__}: {exc}")
                print(f"seed {seed} {policy}: FAILED ({type(exc).__name__})",
                      file=sys.stderr)
            else:
                _write_trace(path, header, result.trace)
                final = result.trace[-1]
                entry.update(failed=False, converged=result.converged,
                             iterations=final.iteration,
                             final_gnorm=final.gradient_sup_norm,
                             elapsed_seconds=final.elapsed_seconds)
                print(f"seed {seed} {policy}: iterations={final.iteration} "
                      f"final_gnorm={final.gradient_sup_norm:.3e}")
            runs.append(entry)

    with open(os.path.join(args.out_dir, "runs.json"), "w", encoding="ascii") as f:
        json.dump({"schema": "picardkit-runs-1", "command": command,
                   "runs": runs}, f, indent=2, sort_keys=True)
        f.write("\n")

    # aggregation pass: reads back only the traces this invocation wrote
    rows = []
    failed = [r["file"] for r in runs if r["failed"]]
    for policy in policies:
        series = []
        for r in runs:
            if r["policy"] != policy or r["failed"]:
                continue
            _, records = _read_trace(os.path.join(args.out_dir, r["file"]))
            t = np.array([rec["t_sec"] for rec in records])
            g = np.array([rec["gnorm"] for rec in records])
            series.append((t, g))
        if series:
            rows.extend(_percentile_rows(series, policy, mode))

    agg_header = {
        "schema": AGGREGATE_SCHEMA,
        "command": command,
        "kind": args.kind,
        "mode": mode,
        "policies": policies,
        "seeds": seeds,
        "tol": args.tol,
        "max_iter": args.max_iter,
        "failed_runs": failed,
    }
    agg_path = os.path.join(args.out_dir, "aggregate.csv")
    with open(agg_path, "w", encoding="ascii") as f:
        f.write("# " + _json_line(agg_header) + "\n")
        f.write("policy,mode,axis,x,p10,median,p90\n")
        for policy, m, axis, x, p10, p50, p90 in rows:
            f.write(f"{policy},{m},{axis},{x:.17g},{p10:.17g},{p50:.17g},"
                    f"{p90:.17g}\n")

    n_failed = len(failed)
    print(f"{len(runs)} runs ({n_failed} failed); wrote {agg_path}")
    return 0


# ---------------------------------------------------------------------------
# spectrum

def _spectrum_csv(path, report, label, header_extra):
    header = {"schema": SPECTRUM_SCHEMA, "approximation": label}
    header.update(header_extra)
    with open(path, "w", encoding="ascii") as f:
        f.write("# " + _json_line(header) + "\n")
        f.write("eigenvalue\n")
        for v in report.eigenvalues:
            f.write(f"{v:.17g}\n")


def cmd_spectrum(args):
    approximations = [a.strip() for a in args.approximations.split(",") if a.strip()]
    for a in approximations:
        if a not in ("simple", "picard"):
            args.parser.error(f"unknown approximation {a!r}, choose from "
                              "['picard', 'simple']")
    if not approximations:
        args.parser.error("--approximations must name at least one")

    X = load_matrix(args.input, args.input_format)
    Xw = _prepare_signals(X, args.assume_white, args.pca)
    N = Xw.shape[0]
    if N > MAX_MATERIALIZE_N:
        raise DimensionError(
            f"refusing to materialize the curvature operator for N = {N} "
            f"(limit {MAX_MATERIALIZE_N}); reduce the data first")
    if "picard" in approximations and N > MAX_PRECONDITIONER_N:
        raise DimensionError(
            f"refusing to materialize the memory preconditioner for N = {N} "
            f"(limit {MAX_PRECONDITIONER_N}); reduce the data or pass "
            "--approximations simple")

    score = get_score(args.score)
    config = _build_config(args, "preconditioned-lbfgs", constrained=False)
    result = fit(Xw, score, config)
    if not result.converged:
        print(f"warning: fit stopped at gradient norm "
              f"{result.trace[-1].gradient_sup_norm:.3e} without reaching "
              f"{args.tol:g}; spectra describe this point anyway",
              file=sys.stderr)

    _, coeffs = gradient_and_coeffs(result.Y, score)
    H = materialize_full_hessian(full_hessian(result.Y, score))
    os.makedirs(args.out_dir, exist_ok=True)

    extra = {"n": N, "converged": result.converged, "input": args.input}
    summary = {"schema": "picardkit-spectrum-summary-1", "n": N,
               "converged": result.converged, "approximations": {}}
    for label in approximations:
        if label == "simple":
            H_hat = materialize_simple_hessian(coeffs, args.lambda_floor)
        else:
            memory = result.memory
            if memory is None:
                memory = LbfgsMemory(capacity=args.memory_size)
            M = materialize_preconditioner_inverse(memory, coeffs,
                                                   args.lambda_floor)
            H_hat = np.linalg.inv(M)
            H_hat = 0.5 * (H_hat + H_hat.T)
        report = preconditioned_spectrum(H, H_hat)
        path = os.path.join(args.out_dir, f"spectrum_{label}.csv")
        _spectrum_csv(path, report, label, extra)
        summary["approximations"][label] = {
            "lambda_m": report.lambda_m,
            "lambda_M": report.lambda_M,
            "kappa": report.kappa,
        }
        print(f"{label}: lambda_m={report.lambda_m:.6g} "
              f"lambda_M={report.lambda_M:.6g} kappa={report.kappa:.6g}")

    with open(os.path.join(args.out_dir, "summary.json"), "w",
              encoding="ascii") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return 0


# ---------------------------------------------------------------------------
# parser plumbing

def _add_io_args(sp, output=False):
    sp.add_argument("--input", required=True, help="input matrix file")
    sp.add_argument("--input-format", default="f64-binary",
                    choices=["f64-binary", "csv"])
    if output:
        sp.add_argument("--output", required=True, help="output matrix file")
        sp.add_argument("--output-format", default="f64-binary",
                        choices=["f64-binary", "csv"])


def _add_solver_args(sp, tol_default):
    sp.add_argument("--score", default="logcosh",
                    choices=["logcosh", "cubic", "gaussian"])
    sp.add_argument("--tol", type=float, default=tol_default,
                    help="gradient sup-norm stopping threshold")
    sp.add_argument("--max-iter", type=int, default=500)
    sp.add_argument("--lambda-floor", type=float, default=1e-2)
    sp.add_argument("--memory-size", type=int, default=7)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="picardkit",
        description="Maximum-likelihood ICA with relative quasi-Newton updates.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    g = sub.add_parser("generate", help="write a dataset to disk")
    g.add_argument("--kind", required=True,
                   choices=["synthetic", "dependent", "patches", "dead-leaves"])
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out-dir", default=".")
    g.add_argument("--n", type=int, help="channels (synthetic/dependent)")
    g.add_argument("--t", type=int, help="samples (synthetic/dependent)")
    g.add_argument("--distribution", default="laplace",
                   choices=["laplace", "uniform", "gauss-mixture"])
    g.add_argument("--mu", type=float, help="gauss-mixture component offset")
    g.add_argument("--sigma", type=float, help="gauss-mixture component spread")
    g.add_argument("--overcomplete-factor", type=float, default=2.0)
    g.add_argument("--noise-level", type=float, default=0.1)
    g.add_argument("--image", help="PGM image to cut patches from")
    g.add_argument("--edge", type=int, default=8, help="patch edge length")
    g.add_argument("--count", type=int, default=20000, help="number of patches")
    g.add_argument("--size", type=int, default=512, help="dead-leaves image edge")
    g.add_argument("--disks", type=int, default=2000)
    g.add_argument("--noise", type=float, default=1.0)
    g.set_defaults(func=cmd_generate)

    w = sub.add_parser("whiten", help="center and whiten a matrix")
    _add_io_args(w, output=True)
    w.add_argument("--pca", type=int,
                   help="PCA-reduce to this many channels before whitening")
    w.set_defaults(func=cmd_whiten)

    f = sub.add_parser("fit", help="unmix one dataset")
    _add_io_args(f)
    f.add_argument("--policy", required=True, choices=sorted(POLICY_BY_NAME))
    f.add_argument("--constrained", action="store_true",
                   help="keep the unmixing matrix orthogonal")
    f.add_argument("--assume-white", action="store_true",
                   help="skip internal whitening (input must already be white)")
    f.add_argument("--pca", type=int,
                   help="PCA-reduce to this many channels before whitening")
    f.add_argument("--out-dir", default=".")
    f.add_argument("--trace-name", default="trace.jsonl")
    _add_solver_args(f, tol_default=1e-8)
    f.set_defaults(func=cmd_fit)

    b = sub.add_parser("benchmark", help="run a (policy x seed) grid")
    b.add_argument("--kind", required=True, choices=["synthetic", "patches"])
    b.add_argument("--n", type=int, help="channels (synthetic)")
    b.add_argument("--t", type=int, help="samples (synthetic)")
    b.add_argument("--image", help="PGM image to cut patches from")
    b.add_argument("--edge", type=int, default=8)
    b.add_argument("--count", type=int, default=20000)
    b.add_argument("--pca", type=int,
                   help="PCA-reduce to this many channels before whitening")
    b.add_argument("--policies", default="gradient,fr-newton,picard",
                   help="comma-separated subset of gradient,fr-newton,picard")
    b.add_argument("--constrained", action="store_true")
    b.add_argument("--n-runs", type=int, default=10)
    b.add_argument("--first-seed", type=int, default=0)
    b.add_argument("--out-dir", default=".")
    _add_solver_args(b, tol_default=1e-6)
    b.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("spectrum", help="curvature spectra at the optimum")
    _add_io_args(s)
    s.add_argument("--assume-white", action="store_true")
    s.add_argument("--pca", type=int,
                   help="PCA-reduce to this many channels before whitening")
    s.add_argument("--approximations", default="simple,picard")
    s.add_argument("--out-dir", default=".")
    _add_solver_args(s, tol_default=1e-8)
    s.set_defaults(func=cmd_spectrum)

    for name, sp in sub.choices.items():
        sp.set_defaults(parser=sp)
    return parser


def _thread_limit():
    '''The PICARDKIT_THREADS cap, or None to leave BLAS defaults alone.'''
    raw = os.environ.get("PICARDKIT_THREADS")
    if raw is None or raw.strip() == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        raise FormatError(
            f"PICARDKIT_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise FormatError(f"PICARDKIT_THREADS must be >= 0, got {n}")
    return max(1, n)  # 0 means serial, i.e. one thread


def main(argv=None):
    parser = build_parser()
    try:
        limit = _thread_limit()
        args = parser.parse_args(argv)
        args.command_line = ["picardkit"] + (
            list(argv) if argv is not None else sys.argv[1:])
        with threadpool_limits(limits=limit):
            return args.func(args)
    except NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
