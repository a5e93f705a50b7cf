"""Command line front end.

Every subcommand reads samples (from a CSV or the configured generator),
runs its pipeline stage, and writes plot-ready CSV files plus a manifest
JSON holding the fully resolved configuration, the seed, versions and
timings.  Exit codes: 0 success, 1 validation problem, 2 numerical
failure.
"""

import argparse
import contextlib
import json
import os
import sys
import time

import numpy as np
import scipy

from . import __version__
from .bench import DEFAULT_SIZES, DEFAULT_TREES, run_bench
from .config import load_config
from .density import (
    VariableBandwidthKDE,
    auto_tree_count,
    bandwidth_function,
)
from .dynamics import (
    EvolutionConfig,
    run_evolution,
    source_from_spec,
    velocity_from_spec,
)
from .exceptions import (
    KolspecError,
    ParameterError,
    StructuralError,
)
from .io import read_points_csv, write_columns_csv, write_points_csv
from .neighbors import build_tree_sequence
from .pipeline import KolmogorovModel
from .sampling import make_samples
from .tuning import tune_bandwidth

_VALIDATION_ERRORS = (ParameterError, StructuralError, OSError)


def _resolve_threads(value):
    if value is None:
        env = os.environ.get("KOLSPEC_THREADS")
        if env is None:
            return 1
        try:
            value = int(env)
        except ValueError:
            raise ParameterError(
                f"KOLSPEC_THREADS must be an integer, got {env!r}") from None
    if value < 1:
        raise ParameterError("thread count must be at least 1")
    return int(value)


class _Run:
    """Shared bookkeeping for one command invocation."""

    def __init__(self, args):
        self.args = args
        self.cfg = load_config(args.config)
        if args.seed is not None:
            self.cfg["seed"] = args.seed
        self.threads = _resolve_threads(args.threads)
        self.out = args.out
        os.makedirs(self.out, exist_ok=True)
        self.timings = {}
        self.inputs = {}
        self.outputs = []
        self.results = {}

    @contextlib.contextmanager
    def timed(self, name):
        start = time.perf_counter()
        yield
        self.timings[name] = time.perf_counter() - start

    def path(self, name):
        self.outputs.append(name)
        return os.path.join(self.out, name)

    def samples(self):
        if self.args.samples is not None:
            self.inputs["samples"] = os.path.abspath(self.args.samples)
            with self.timed("read_samples"):
                return read_points_csv(self.args.samples)
        data = self.cfg["data"]
        with self.timed("generate_samples"):
            return make_samples(data["generator"], data["n"],
                                self.cfg["seed"])

    def tree_count(self, n):
        t = self.cfg["data"]["tree_count"]
        return auto_tree_count(n) if t is None else int(t)

    def model(self):
        d, o = self.cfg["density"], self.cfg["operator"]
        sp, tu = self.cfg["spectra"], self.cfg["tuning"]
        return KolmogorovModel(
            c=o["c"],
            beta=o["beta"],
            n_modes="auto" if sp["n_modes"] is None else int(sp["n_modes"]),
            knn=d["knn"],
            eps_density="auto" if d["eps"] is None else d["eps"],
            eps_operator="auto" if o["eps"] is None else o["eps"],
            dim="auto" if d["dim"] is None else d["dim"],
            delta_tol=d["delta_tol"],
            operator_delta_tol=o["delta_tol"],
            tree_count="auto" if self.cfg["data"]["tree_count"] is None
            else int(self.cfg["data"]["tree_count"]),
            xi_range=(tu["xi_min"], tu["xi_max"]),
            tuning_delta=tu["delta"],
            eig_tol=sp["tol"],
            seed=self.cfg["seed"],
            workers=self.threads,
            max_tensor_entries=self.cfg["gradient"]["max_tensor_entries"],
        )

    def rhs(self, points):
        spec = self.cfg["solver"]["g"]
        kind = spec.get("kind")
        if kind == "coordinate":
            index = int(spec.get("index", 0))
            if not 0 <= index < points.shape[1]:
                raise ParameterError(
                    f"solver.g.index {index} out of range for "
                    f"{points.shape[1]} coordinates")
            return float(spec.get("scale", 1.0)) * points[:, index]
        if kind == "linear":
            r = np.asarray(spec["direction"], dtype=np.float64)
            if r.shape[0] != points.shape[1]:
                raise ParameterError("solver.g.direction has wrong length")
            return points @ r
        raise ParameterError(f"unknown solver.g kind {kind!r}")

    def manifest(self, command):
        doc = {
            "command": command,
            "package": "kolspec",
            "version": __version__,
            "versions": {
                "python": sys.version.split()[0],
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "seed": self.cfg["seed"],
            "threads": self.threads,
            "config": self.cfg,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "results": self.results,
            "timings": self.timings,
        }
        with open(os.path.join(self.out, "manifest.json"), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _coord_names(m):
    return [f"x{s + 1}" for s in range(m)]


def cmd_sample(args):
    run = _Run(args)
    data = run.cfg["data"]
    with run.timed("generate"):
        points = make_samples(data["generator"], data["n"], run.cfg["seed"])
    write_points_csv(run.path("samples.csv"), points)
    run.results["n"] = int(points.shape[0])
    run.manifest("sample")
    return 0


def cmd_tune(args):
    run = _Run(args)
    points = run.samples()
    n = points.shape[0]
    cfg = run.cfg
    with run.timed("tune"):
        seq = build_tree_sequence(points, run.tree_count(n))
        rho = bandwidth_function(points, seq, cfg["density"]["knn"])
        result = tune_bandwidth(
            points, seq, rho,
            xi_range=(cfg["tuning"]["xi_min"], cfg["tuning"]["xi_max"]),
            grid_size=cfg["tuning"]["grid_size"],
            delta=cfg["tuning"]["delta"],
            delta_tol=cfg["density"]["delta_tol"],
            workers=run.threads,
            dense_pair_cap=cfg["tuning"]["dense_pair_cap"])
    write_columns_csv(
        run.path("tune.csv"),
        ["xi", "eps", "chi", "chi_prime"],
        [result.grid_xi, 2.0 ** (0.5 * result.grid_xi), result.grid_chi,
         result.grid_chi_prime])
    run.results.update(xi_star=result.xi_star, eps_star=result.eps_star,
                       chi_prime_max=result.chi_prime_max,
                       dim_estimate=result.dim_estimate)
    run.manifest("tune")
    return 0


def cmd_density(args):
    run = _Run(args)
    points = run.samples()
    cfg = run.cfg
    kde = VariableBandwidthKDE(
        knn=cfg["density"]["knn"],
        eps="auto" if cfg["density"]["eps"] is None else cfg["density"]["eps"],
        dim="auto" if cfg["density"]["dim"] is None else cfg["density"]["dim"],
        delta_tol=cfg["density"]["delta_tol"],
        tree_count="auto" if cfg["data"]["tree_count"] is None
        else int(cfg["data"]["tree_count"]),
        xi_range=(cfg["tuning"]["xi_min"], cfg["tuning"]["xi_max"]),
        tuning_delta=cfg["tuning"]["delta"],
        workers=run.threads)
    with run.timed("fit"):
        kde.fit(points)
    n, m = points.shape
    write_columns_csv(
        run.path("density.csv"),
        ["index"] + _coord_names(m) + ["psi"],
        [np.arange(n)] + [points[:, s] for s in range(m)] + [kde.density_])
    run.results.update(eps=kde.eps_, dim=kde.dim_)
    run.manifest("density")
    return 0


def _fitted_model(run, points):
    model = run.model()
    with run.timed("fit"):
        model.fit(points)
    run.results.update(eps_density=model.eps_density_,
                       eps_operator=model.eps_operator_,
                       dim=model.dim_, ell=model.ell_)
    return model


def cmd_eigs(args):
    run = _Run(args)
    points = run.samples()
    model = _fitted_model(run, points)
    lam = model.eigenvalues_
    write_columns_csv(run.path("eigenvalues.csv"), ["j", "lambda"],
                      [np.arange(lam.shape[0]), lam])
    n = points.shape[0]
    phi = model.eigenfunctions_
    write_columns_csv(
        run.path("eigenfunctions.csv"),
        ["index"] + [f"phi{j}" for j in range(phi.shape[1])],
        [np.arange(n)] + [phi[:, j] for j in range(phi.shape[1])])
    run.manifest("eigs")
    return 0


def cmd_solve(args):
    run = _Run(args)
    points = run.samples()
    model = _fitted_model(run, points)
    g = run.rhs(points)
    with run.timed("solve"):
        sol = model.solve(g)
    n, m = points.shape
    write_columns_csv(
        run.path("solution.csv"),
        ["index"] + _coord_names(m) + ["g", "f"],
        [np.arange(n)] + [points[:, s] for s in range(m)] + [g, sol.values])
    ell = sol.coeffs.shape[0]
    write_columns_csv(
        run.path("coefficients.csv"),
        ["j", "lambda", "g_coeff", "f_coeff"],
        [np.arange(1, ell + 1), sol.eigenvalues, sol.g_coeffs, sol.coeffs])
    run.manifest("solve")
    return 0


def cmd_gradient(args):
    run = _Run(args)
    points = run.samples()
    model = _fitted_model(run, points)
    g = run.rhs(points)
    with run.timed("solve"):
        sol = model.solve(g)
    with run.timed("gradient"):
        grad = model.gradient_field(sol)
    n, m = points.shape
    write_columns_csv(
        run.path("gradient.csv"),
        ["index"] + _coord_names(m) + ["f"] + [f"df_dx{s + 1}" for s in range(m)],
        [np.arange(n)] + [points[:, s] for s in range(m)] + [sol.values]
        + [grad[:, s] for s in range(m)])
    run.manifest("gradient")
    return 0


def cmd_evolve(args):
    run = _Run(args)
    points = run.samples()
    cfg = run.cfg
    dyn = cfg["dynamics"]
    model_params = {
        "beta": cfg["operator"]["beta"],
        "knn": cfg["density"]["knn"],
        "delta_tol": cfg["density"]["delta_tol"],
        "operator_delta_tol": cfg["operator"]["delta_tol"],
        "tree_count": "auto" if cfg["data"]["tree_count"] is None
        else int(cfg["data"]["tree_count"]),
        "xi_range": (cfg["tuning"]["xi_min"], cfg["tuning"]["xi_max"]),
        "tuning_delta": cfg["tuning"]["delta"],
        "eig_tol": cfg["spectra"]["tol"],
        "n_modes": "auto" if cfg["spectra"]["n_modes"] is None
        else int(cfg["spectra"]["n_modes"]),
        "seed": cfg["seed"],
        "workers": run.threads,
    }
    evo = EvolutionConfig(
        dt=dyn["dt"], steps=dyn["steps"], seed=cfg["seed"],
        sigma=np.asarray(dyn["sigma"], dtype=np.float64)
        if isinstance(dyn["sigma"], list) else dyn["sigma"],
        velocity=velocity_from_spec(dyn["velocity"]),
        source=source_from_spec(dyn["source"]),
        retune_every=dyn["retune_every"],
        model_params=model_params)
    m = points.shape[1]
    names = (["time", "index"] + _coord_names(m) + ["f"]
             + [f"u{s + 1}" for s in range(m)] + ["M"])

    def writer(state, u_eff, solution, gbar):
        n = state.points.shape[0]
        f = np.zeros(n) if solution is None else solution.values
        cols = ([np.full(n, state.time), np.arange(n)]
                + [state.points[:, s] for s in range(m)] + [f]
                + [u_eff[:, s] for s in range(m)]
                + [np.full(n, state.mass)])
        write_columns_csv(run.path(f"snapshot_{state.step:04d}.csv"),
                          names, cols)

    with run.timed("evolve"):
        final = run_evolution(points, evo, callback=writer)
    run.results.update(final_time=final.time, final_mass=final.mass,
                       steps=final.step)
    run.manifest("evolve")
    return 0


def cmd_bench(args):
    run = _Run(args)
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes \
        else list(DEFAULT_SIZES)
    trees = args.trees.split(",") if args.trees else list(DEFAULT_TREES)
    with run.timed("bench"):
        rows = run_bench(sizes=sizes, trees=trees,
                         knn=run.cfg["density"]["knn"],
                         delta_tol=run.cfg["density"]["delta_tol"],
                         seed=run.cfg["seed"], workers=run.threads,
                         include_brute=not args.no_brute)
    write_columns_csv(
        run.path("bench.csv"),
        ["n", "t", "method", "seconds", "nnz"],
        [np.array([r["n"] for r in rows]),
         np.array([r["t"] for r in rows]),
         np.array([r["method"] for r in rows], dtype=object),
         np.array([r["seconds"] for r in rows]),
         np.array([r["nnz"] for r in rows])])
    run.manifest("bench")
    return 0


_COMMANDS = {
    "tune": cmd_tune,
    "density": cmd_density,
    "eigs": cmd_eigs,
    "solve": cmd_solve,
    "gradient": cmd_gradient,
    "evolve": cmd_evolve,
    "bench": cmd_bench,
    "sample": cmd_sample,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kolspec",
        description="Kolmogorov operator approximation from samples")
    parser.add_argument("--version", action="version",
                        version=f"kolspec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--samples", default=None,
                       help="input samples CSV; generated from the config "
                            "when omitted")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker thread cap (results never depend on it)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        if name == "bench":
            p.add_argument("--sizes", default=None,
                           help="comma separated cloud sizes")
            p.add_argument("--trees", default=None,
                           help="comma separated tree counts "
                                "(integers, 5logn, nover5)")
            p.add_argument("--no-brute", action="store_true",
                           help="skip the brute force reference timings")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _VALIDATION_ERRORS as exc:
        print(f"kolspec {args.command}: {exc}", file=sys.stderr)
        return 1
    except (KolspecError, np.linalg.LinAlgError) as exc:
        print(f"kolspec {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
