"""Acceptance suite: one test per headline claim, in fixed order.

The expensive fits (two 10k clouds, the size/seed family, the threaded
command line runs) are shared module fixtures, so the whole suite costs
a handful of large fits rather than one per test.  Every test prints the
numbers it checked; pytest shows them whenever a tolerance trips.
"""

import json
import os
import time

import numpy as np
import pytest
from scipy.linalg import subspace_angles

from kolspec import (
    KolmogorovModel,
    EvolutionConfig,
    EvolutionState,
    apply_l,
    apply_lhat,
    assemble_brute_force,
    assemble_tree_sweep,
    build_tree_sequence,
    carre_du_champ,
    effective_velocity,
    make_samples,
    run_evolution,
    s_inner,
)
from kolspec.bench import fit_loglog_slope, run_bench
from kolspec.cli import main
from kolspec.dynamics import source_from_spec
from kolspec.gradient import gradient_inner
from kolspec.spectra import project, reconstruct, s_norm

SIZES = (2500, 5000, 10000)
SEEDS = (0, 1, 2)


# ----------------------------------------------------------------- helpers

def s_unit(S, v):
    return v / s_norm(S, v)


def degree2_frame(model):
    """Orthonormal span of the two degree-2 harmonics on the cloud."""
    x = model.points_
    S = model.basis_.S
    h1 = s_unit(S, x[:, 0] * x[:, 1])
    h2 = x[:, 0] ** 2 - x[:, 1] ** 2
    h2 = h2 - s_inner(S, h1, h2) * h1
    return h1, s_unit(S, h2)


def rotation_error(model):
    """Residual of the best rotated harmonic against the computed mode.

    Among the three modes following the coordinate pair, the two with
    the most energy on the degree-2 span are the sought pair; the error
    is minimized over all rotations (including reflections, via the full
    circle) of the analytic pair against the first member.
    """
    h1, h2 = degree2_frame(model)
    basis = model.basis_
    energy = {j: s_inner(basis.S, basis.vectors[:, j], h1) ** 2
              + s_inner(basis.S, basis.vectors[:, j], h2) ** 2
              for j in (3, 4, 5)}
    keep = sorted(sorted(energy, key=energy.get, reverse=True)[:2])
    phi = basis.vectors[:, keep[0]]
    n = phi.shape[0]
    theta = np.linspace(0.0, 2.0 * np.pi, 200001)
    c, s = np.cos(theta), np.sin(theta)
    e2 = (phi @ phi - 2.0 * c * (phi @ h1) + 2.0 * s * (phi @ h2)
          + c * c * (h1 @ h1) + s * s * (h2 @ h2)
          - 2.0 * c * s * (h1 @ h2)) / n
    return float(e2.min())


def solve_error_2d(model):
    """Relative squared error of the solve against the closed form."""
    x = model.points_
    sol = model.solve(x[:, 0])
    ref = -x[:, 0]
    diff = sol.values - ref
    return float((diff @ diff) / (ref @ ref))


def run_cli_pair(tmp_factory, tag, argv):
    """Run one command twice, with 1 and 3 worker threads."""
    outs = []
    for threads in (1, 3):
        out = str(tmp_factory.mktemp(f"{tag}_t{threads}"))
        code = main(argv + ["--out", out, "--threads", str(threads)])
        assert code == 0
        outs.append(out)
    return tuple(outs)


def assert_outputs_identical(out_a, out_b):
    names_a = sorted(os.listdir(out_a))
    names_b = sorted(os.listdir(out_b))
    assert names_a == names_b
    for name in names_a:
        if name == "manifest.json":
            continue
        with open(os.path.join(out_a, name), "rb") as fh:
            blob_a = fh.read()
        with open(os.path.join(out_b, name), "rb") as fh:
            blob_b = fh.read()
        assert blob_a == blob_b, f"{name} differs between thread counts"
    docs = []
    for out in (out_a, out_b):
        with open(os.path.join(out, "manifest.json")) as fh:
            doc = json.load(fh)
        doc.pop("threads")
        doc.pop("timings")
        docs.append(doc)
    assert docs[0] == docs[1]


# ----------------------------------------------------------------- fixtures

@pytest.fixture(scope="module")
def gauss2d_cloud():
    return make_samples({"kind": "gaussian"}, 10000, 0)


@pytest.fixture(scope="module")
def fit2d(gauss2d_cloud):
    return KolmogorovModel(n_modes=100, seed=0).fit(gauss2d_cloud)


@pytest.fixture(scope="module")
def fit2d_c05(gauss2d_cloud, fit2d):
    return KolmogorovModel(c=0.5, n_modes=100, seed=0,
                           eps_density=fit2d.eps_density_,
                           eps_operator=fit2d.eps_operator_,
                           dim=fit2d.dim_).fit(gauss2d_cloud)


@pytest.fixture(scope="module")
def fit4d():
    spec = {"kind": "gaussian", "mean": [0.0] * 4,
            "cov_diag": [np.sqrt(2.0), np.sqrt(2.0),
                         np.sqrt(3.0), np.sqrt(3.0)]}
    cloud = make_samples(spec, 10000, 0)
    return KolmogorovModel(n_modes=100, seed=0).fit(cloud)


@pytest.fixture(scope="module")
def family():
    """Default fits over three sizes and three sample seeds."""
    e2 = np.empty((len(SEEDS), len(SIZES)))
    te2 = np.empty_like(e2)
    for i, seed in enumerate(SEEDS):
        for j, n in enumerate(SIZES):
            model = KolmogorovModel().fit(
                make_samples({"kind": "gaussian"}, n, seed))
            e2[i, j] = rotation_error(model)
            te2[i, j] = solve_error_2d(model)
    return {"e2": e2, "te2": te2}


@pytest.fixture(scope="module")
def cli_density_sphere(tmp_path_factory):
    cfg = tmp_path_factory.mktemp("cfg_sphere") / "cfg.json"
    cfg.write_text(json.dumps({"data": {
        "n": 10000, "generator": {"kind": "sphere_uniform"}}}))
    return run_cli_pair(tmp_path_factory, "sphere",
                        ["density", "--config", str(cfg)])


@pytest.fixture(scope="module")
def cli_solve(tmp_path_factory):
    cfg = tmp_path_factory.mktemp("cfg_solve") / "cfg.json"
    cfg.write_text(json.dumps({"data": {"n": 2500}}))
    return run_cli_pair(tmp_path_factory, "solve",
                        ["solve", "--config", str(cfg)])


@pytest.fixture(scope="module")
def cli_evolve(tmp_path_factory):
    cfg = tmp_path_factory.mktemp("cfg_evolve") / "cfg.json"
    cfg.write_text(json.dumps({
        "data": {"n": 10000},
        "dynamics": {"steps": 10, "dt": 0.01,
                     "source": {"kind": "zero"}}}))
    return run_cli_pair(tmp_path_factory, "evolve",
                        ["evolve", "--config", str(cfg)])


# -------------------------------------------------------------------- tests

def test_01_assembly_routes_agree_exactly():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    for _ in range(20):
        n = int(rng.integers(100, 2001))
        m = int(rng.choice([2, 3, 4]))
        cloud = rng.standard_normal((n, m))
        rho = rng.uniform(0.5, 1.5, size=n)
        eps = float(rng.uniform(0.3, 1.2))
        delta_tol = float(rng.choice([1e-2, 1e-4]))
        brute = assemble_brute_force(cloud, rho, eps, delta_tol)
        for t in (1, 10, int(np.ceil(5.0 * np.log(n)))):
            seq = build_tree_sequence(cloud, t)
            tree = assemble_tree_sweep(cloud, seq, rho, eps, delta_tol)
            np.testing.assert_array_equal(tree.indptr, brute.indptr)
            np.testing.assert_array_equal(tree.indices, brute.indices)
            np.testing.assert_array_equal(tree.data, brute.data)
    elapsed = time.perf_counter() - start
    print(f"20 clouds x 3 tree counts, exact agreement, {elapsed:.1f} s")
    assert elapsed < 60.0


def test_02_assembly_cost_scales_like_the_routes():
    rows = run_bench(sizes=(1000, 4000, 16000, 64000), trees=("100",))
    tree = [r for r in rows if r["method"] == "tree"]
    brute = [r for r in rows if r["method"] == "brute"]
    slope_tree = fit_loglog_slope([r["n"] for r in tree],
                                  [r["seconds"] for r in tree])
    slope_brute = fit_loglog_slope([r["n"] for r in brute],
                                   [r["seconds"] for r in brute])
    print(f"log-log slopes: tree {slope_tree:.2f}, brute {slope_brute:.2f}")
    assert 0.9 <= slope_tree <= 1.4
    assert 1.7 <= slope_brute <= 2.2


def test_03_kernel_sums_estimate_the_dimension(fit2d, fit4d):
    d_density = fit2d.tuning_density_.dim_estimate
    d_operator = fit2d.tuning_operator_.dim_estimate
    d4_density = fit4d.tuning_density_.dim_estimate
    d4_operator = fit4d.tuning_operator_.dim_estimate
    print(f"2-D estimates: density {d_density:.2f}, operator "
          f"{d_operator:.2f}; 4-D: density {d4_density:.2f}, operator "
          f"{d4_operator:.2f}")
    assert 1.5 <= d_density <= 2.5
    assert 1.5 <= d_operator <= 2.5
    assert 3.4 <= d4_density <= 4.4


def test_04_sphere_density_matches_the_uniform_value(cli_density_sphere):
    table = np.loadtxt(os.path.join(cli_density_sphere[0], "density.csv"),
                       delimiter=",", skiprows=1)
    psi = table[:, 4]
    target = 1.0 / (4.0 * np.pi)
    rel = abs(psi.mean() - target) / target
    print(f"mean density {psi.mean():.5f} vs 1/(4 pi) = {target:.5f}, "
          f"relative error {rel:.3f}")
    assert rel < 0.15


def test_05_gaussian_spectra_and_eigenspaces(fit2d, fit4d):
    lam2 = fit2d.eigenvalues_
    print(f"2-D leading eigenvalues: {lam2[:6]}")
    assert abs(lam2[1] + 1.0) <= 0.15
    assert abs(lam2[2] + 1.0) <= 0.15
    hat2 = fit2d.basis_.hat_vectors
    weighted_x = fit2d.points_ * fit2d.basis_.S[:, None]
    ang2 = np.degrees(subspace_angles(hat2[:, 1:3], weighted_x).max())
    print(f"2-D coordinate subspace angle: {ang2:.2f} deg")
    assert ang2 < 15.0

    lam4 = fit4d.eigenvalues_
    hat4 = fit4d.basis_.hat_vectors
    x4 = fit4d.points_ * fit4d.basis_.S[:, None]
    slow, fast = -1.0 / np.sqrt(3.0), -1.0 / np.sqrt(2.0)
    print(f"4-D leading eigenvalues: {lam4[:7]} vs {slow:.4f}, {fast:.4f}")
    # Each doubly degenerate level is matched by the two computed
    # eigenvalues closest to it, and the span of that pair of modes must
    # line up with the coordinate plane generating the level.
    for label, target, cols in (("wide", slow, [2, 3]),
                                ("narrow", fast, [0, 1])):
        pair = np.sort(np.argsort(np.abs(lam4 - target), kind="stable")[:2])
        gap = float(np.abs(lam4[pair] - target).max() / abs(target))
        ang = np.degrees(subspace_angles(hat4[:, pair], x4[:, cols]).max())
        print(f"4-D {label} pair {pair.tolist()}: eigenvalues "
              f"{lam4[pair]}, relative gap {gap:.3f}, span angle "
              f"{ang:.1f} deg")
        assert gap <= 0.20
        assert ang < 15.0


def test_06_degree_two_modes_converge_with_n(family):
    avg = family["e2"].mean(axis=0)
    print(f"rotation error by size {SIZES}: {avg}")
    assert avg[0] > avg[1] > avg[2]


def test_07_solution_error_is_small_and_decaying(family):
    te2 = family["te2"]
    avg = te2.mean(axis=0)
    slope = float(np.polyfit(np.log(SIZES), np.log(avg), 1)[0])
    print(f"solution error by size {SIZES}: {avg}, slope {slope:.2f},\n"
          f"per-seed at n=10000: {te2[:, -1]}")
    assert np.all(te2[:, -1] < 0.05)
    assert avg[0] > avg[1] > avg[2]
    assert slope <= -0.3


def test_08_anisotropic_solve_tracks_the_closed_form(fit4d):
    x = fit4d.points_
    sol = fit4d.solve(x[:, 0] + x[:, 2])
    ref = -np.sqrt(2.0) * x[:, 0] - np.sqrt(3.0) * x[:, 2]
    corr = float(np.corrcoef(sol.values, ref)[0, 1])
    top4 = set(np.argsort(-np.abs(sol.coeffs), kind="stable")[:4].tolist())
    lam = sol.eigenvalues
    near4 = set()
    for target in (-1.0 / np.sqrt(2.0), -1.0 / np.sqrt(3.0)):
        near4 |= set(np.argsort(np.abs(lam - target), kind="stable")[:2]
                     .tolist())
    print(f"correlation {corr:.4f}; dominant modes {sorted(top4)} "
          f"(eigenvalues {lam[sorted(top4)]}) vs nearest-to-target modes "
          f"{sorted(near4)} (eigenvalues {lam[sorted(near4)]})")
    assert corr > 0.95
    assert top4 == near4


def test_09_gradient_recovers_a_prescribed_uniform_field(fit2d, fit2d_c05):
    for c, model in ((1.0, fit2d), (0.5, fit2d_c05)):
        x = model.points_
        grads = model.gradient_field(c * x[:, 0])
        psi = model.density_.values
        bulk = psi >= np.median(psi)
        mean = grads[bulk].mean(axis=0)
        err = float(np.linalg.norm(mean - [c, 0.0]))
        print(f"c={c}: bulk mean gradient {mean}, error {err:.4f} "
              f"(bound {0.1 * c:.3f})")
        assert err <= 0.10 * c


def test_10_gradient_routes_agree_on_small_clouds():
    cloud = make_samples({"kind": "gaussian"}, 200, 3)
    model = KolmogorovModel(n_modes=20, dim=2, tree_count=4).fit(cloud)
    op = model.operator_
    psi = model.density_.values
    n = cloud.shape[0]

    # Dense recomputation of the whole chain, from raw formulas.
    rho = 2.0 * psi ** -0.25
    d2 = ((cloud[:, None, :] - cloud[None, :, :]) ** 2).sum(axis=-1)
    K = np.exp(-d2 / (op.eps ** 2 * np.outer(rho, rho)))
    K[K <= 1e-2] = 0.0
    np.fill_diagonal(K, 1.0)
    q = psi ** 0.5 * K.sum(axis=1)
    K /= np.outer(q ** op.alpha, q ** op.alpha)
    P = psi ** -0.25
    D = K.sum(axis=1)
    L = ((K / D[:, None]) - np.eye(n)) / (P * P)[:, None] / op.eps ** 2

    rng = np.random.default_rng(0)
    u = rng.standard_normal(n)
    v = rng.standard_normal(n)
    direct = carre_du_champ(op, u, v)
    ref = 0.5 * (L @ (u * v) - u * (L @ v) - v * (L @ u))
    gap = np.abs(direct - ref).max() / np.abs(ref).max()
    print(f"sparse vs dense product rule: relative gap {gap:.2e}")
    assert gap <= 1e-8

    tensor = model.triple_tensor()
    basis = model.basis_
    bulk = psi >= np.median(psi)
    pooled = []
    span_defect = 0.0
    for j, k in ((1, 1), (2, 2), (1, 2)):
        spectral = gradient_inner(basis, tensor, j, k)
        target = carre_du_champ(op, basis.vectors[:, j], basis.vectors[:, k])
        rel = np.abs(spectral[bulk] - target[bulk]) / np.abs(target[bulk])
        pooled.append(rel)
        in_span = reconstruct(basis, project(basis, target))
        defect = np.abs(spectral - in_span).max() / np.abs(in_span).max()
        span_defect = max(span_defect, defect)
        print(f"pair ({j},{k}): median relative gap {np.median(rel):.3f}, "
              f"agreement with the span-projected direct field {defect:.1e}")
    print(f"identity on the resolved span holds to {span_defect:.1e}; "
          "the pointwise gap below is the truncated remainder")
    med = float(np.median(np.concatenate(pooled)))
    print(f"spectral vs direct gradient inner products, "
          f"median relative error: {med:.3f}")
    assert med <= 0.10


def test_11_operator_identities_hold_at_scale(fit2d):
    op = fit2d.operator_
    n = op.n
    lones = apply_l(op, np.ones(n))
    scale = np.abs((1.0 / op.D - 1.0) / (op.P * op.P)).max() / op.eps ** 2
    print(f"max |L 1| = {np.abs(lones).max():.2e} against scale {scale:.2e}")
    assert np.abs(lones).max() <= 1e-8 * scale

    rng = np.random.default_rng(17)
    x = rng.standard_normal(n)
    y = rng.standard_normal(n)
    left = x @ apply_lhat(op, y)
    right = y @ apply_lhat(op, x)
    print(f"symmetry defect {abs(left - right):.2e} on pairing {left:.4f}")
    assert abs(left - right) <= 1e-10 * max(abs(left), abs(right))

    basis = fit2d.basis_
    gram = basis.hat_vectors.T @ basis.hat_vectors / n
    ortho = np.abs(gram - np.eye(basis.ell + 1)).max()
    print(f"basis orthonormality defect {ortho:.2e}")
    assert ortho <= 1e-8

    f = rng.standard_normal(n)
    a = apply_l(op, f)
    b = apply_lhat(op, op.S * f) / op.S
    sim = np.abs(a - b).max() / np.abs(a).max()
    print(f"conjugation defect {sim:.2e}")
    assert sim <= 1e-12


def test_12_transport_follows_the_source(fit2d, cli_evolve):
    # Linear source: the induced velocity is the source direction.
    x = fit2d.points_
    state = EvolutionState(points=x, step=1,
                           eps_density=fit2d.eps_density_,
                           eps_operator=fit2d.eps_operator_,
                           dim=fit2d.dim_)
    cfg = EvolutionConfig(retune_every=2,
                          source=lambda p, t: p[:, 0] - p[:, 0].mean(),
                          model_params={"n_modes": 100, "seed": 0})
    u_eff, solution, gbar, model = effective_velocity(state, cfg)
    psi = model.density_.values
    bulk = psi >= np.median(psi)
    mean_u = u_eff[bulk].mean(axis=0)
    err = float(np.linalg.norm(mean_u - [1.0, 0.0]))
    print(f"bulk mean velocity {mean_u}, error {err:.4f}")
    assert err <= 0.15

    # Diffusion only: covariance grows at the identity rate.
    s0 = np.loadtxt(os.path.join(cli_evolve[0], "snapshot_0000.csv"),
                    delimiter=",", skiprows=1)
    s10 = np.loadtxt(os.path.join(cli_evolve[0], "snapshot_0010.csv"),
                     delimiter=",", skiprows=1)
    rate = (np.cov(s10[:, 2:4].T) - np.cov(s0[:, 2:4].T)) / 0.1
    print(f"covariance growth rate per unit time:\n{rate}")
    assert abs(rate[0, 0] - 1.0) <= 0.10
    assert abs(rate[1, 1] - 1.0) <= 0.10
    assert abs(rate[0, 1]) <= 0.10

    # Oscillating well: transport reverses with the source sign.
    captured = {}

    def grab(state, u_eff, solution, gbar):
        if state.step in (3, 7):
            captured[state.step] = (state.points.copy(), u_eff.copy())

    cloud = make_samples({"kind": "gaussian"}, 2500, 0)
    well_cfg = EvolutionConfig(dt=0.1, steps=8, seed=0, sigma=1.0,
                               source=source_from_spec({"kind": "well"}),
                               model_params={"seed": 0})
    run_evolution(cloud, well_cfg, callback=grab)
    center = np.array([1.0, 0.0])
    signs = {}
    for step, (pts, u) in captured.items():
        near = np.linalg.norm(pts - center, axis=1) <= 1.5
        toward = ((center - pts[near]) * u[near]).sum(axis=1)
        signs[step] = float(toward.mean())
    print(f"mean velocity toward the well: t=0.3 {signs[3]:.3f}, "
          f"t=0.7 {signs[7]:.3f}")
    assert signs[3] > 0.0
    assert signs[7] < 0.0


def test_13_outputs_do_not_depend_on_thread_count(cli_density_sphere,
                                                  cli_solve, cli_evolve):
    for pair in (cli_density_sphere, cli_solve, cli_evolve):
        assert_outputs_identical(*pair)
    print("density, solve and evolve runs byte-identical across threads")
