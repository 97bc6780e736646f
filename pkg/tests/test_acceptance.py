"""Acceptance criteria, one test each.

Every test prints a single ``criterion N: PASS|FAIL ...`` line (shown even
under output capture) before asserting. Runtime limits are measured with
warm compiled kernels; the ``warm_kernels`` fixture triggers compilation.
"""
import filecmp
import math
import time

import numpy as np
import pytest

from qvilab.cli import main
from qvilab.elliptic import EllipticOperator, Nonlinearity, solve_obstacle
from qvilab.engine import ImpulseProblem, ParabolicProblem, ScalarProblem, solve_maximal, solve_minimal
from qvilab.harness import COMMANDS
from qvilab.lattice import TOP, Domain1D, GridFunction, Tolerances
from qvilab.parabolic import HeatSource, SpaceTimeGrid
from qvilab.properties import run_suite, suite_for
from qvilab.sensitivity import (alternating_perturbations, directional_derivative, hadamard_check,
                                psi_directional_derivative, solve_linearized_smallest)


@pytest.fixture(scope="module", autouse=True)
def warm_kernels():
    inst = ImpulseProblem(n=8)
    solve_maximal(inst, 8.0)
    directional_derivative(inst, 8.0, 1.0)
    p = ParabolicProblem(SpaceTimeGrid(4, 1.0, 4, 1.0), g=HeatSource(0.5))
    solve_maximal(p, 0.3)


@pytest.fixture
def report(capsys):
    def _report(n, title, passed, detail=""):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if passed else 'FAIL'} {title}" + (f" ({detail})" if detail else ""))
        assert passed, detail
    return _report


def test_1_scalar_exactness(report):
    t0 = time.perf_counter()
    worst = 0.0
    for u in (0, 0.3, 0.7, 1, 1.5, 2, 5):
        for variant, m, M in (("A", 0.0, min(u, 1)), ("B", min(u, 1), min(u, 2))):
            inst = ScalarProblem(variant)
            worst = max(worst, abs(float(solve_minimal(inst, u).value) - m),
                        abs(float(solve_maximal(inst, u).value) - M))
    dt = time.perf_counter() - t0
    report(1, "scalar extremal solutions", worst <= 1e-10 and dt < 1.0,
           f"max error {worst:.1e} <= 1e-10, {dt:.2f} s < 1 s")


def test_2_scalar_derivatives(report):
    inst = ScalarProblem("A")
    table = {(0.5, 1): 1.0, (0.5, -1): -1.0, (1, 1): 0.0, (1, -1): -1.0, (2, 1): 0.0, (2, -1): 0.0}
    err, mono = 0.0, 0.0
    for (u, h), expected in table.items():
        est = directional_derivative(inst, u, h)
        err = max(err, abs(float(est.derivative) - expected))
        mono = max(mono, est.monotonicity_residual)
    report(2, "scalar A directional derivatives", err <= 1e-8 and mono <= 1e-12,
           f"max error {err:.1e} <= 1e-8, monotonicity residual {mono:.1e} <= 1e-12")


def test_3_degeneracy_refusal(report, tmp_path, capsys):
    cfg = tmp_path / "a.ini"
    cfg.write_text("problem = scalar\nvariant = A\n[parameter]\nu = 2\nh = 1\n")
    status = main(["linearized", "--config", str(cfg), "--out", str(tmp_path / "o")])
    refused = status != 0 and "FAIL assumption" in (tmp_path / "o" / "summary.txt").read_text()
    inst = ScalarProblem("A")
    worst = 0.0
    for zeta in (-1.0, 0.0, 2.0):
        for method in ("closed", "fd"):
            got = float(psi_directional_derivative(inst, 1.0, 2.0, zeta, 0.0, method=method))
            worst = max(worst, abs(got - zeta))
    report(3, "degenerate linearization refused", refused and worst <= 1e-10,
           f"exit {status}, max |Psi'(zeta) - zeta| = {worst:.1e} <= 1e-10")


def test_4_cross_oracle_variant_C(report):
    inst = ScalarProblem("C")
    t0 = time.perf_counter()
    agree, analytic = 0.0, 0.0
    for h in (1.0, -1.0):
        for u, expected in zip((0.5, 1.5, 3.0), (h, h, 0.0)):
            d = float(directional_derivative(inst, u, h).derivative)
            z = float(solve_linearized_smallest(inst, u, h))
            agree = max(agree, abs(d - z))
            analytic = max(analytic, abs(d - expected), abs(z - expected))
    dt = time.perf_counter() - t0
    report(4, "derivative equals smallest linearized solution (C)",
           agree <= 1e-8 and analytic <= 1e-8 and dt < 1.0,
           f"agreement {agree:.1e}, analytic error {analytic:.1e}, {dt:.2f} s < 1 s")


def _free_boundary_error(n):
    d = Domain1D(n)
    tol = Tolerances(tol_fixed_point=1e-10, tol_inner=1e-10)
    y = solve_obstacle(EllipticOperator(d), GridFunction.constant(d, 0.75), GridFunction.constant(d, 8.0), tol)
    a = math.sqrt(0.75) / 2
    w = np.minimum(d.nodes, 1 - d.nodes)
    exact = np.where(w < a, -4 * w**2 + 8 * a * w, 0.75)
    return float(np.max(np.abs(y.values - exact)))


def test_5_elliptic_exactness(report):
    t0 = time.perf_counter()
    d = Domain1D(64)
    tight = Tolerances(tol_fixed_point=1e-12, tol_inner=1e-12)
    y = solve_obstacle(EllipticOperator(d), TOP, GridFunction.constant(d, 8.0), tight)
    poisson = float(np.max(np.abs(y.values - 4 * d.nodes * (1 - d.nodes))))
    e256, e1024 = _free_boundary_error(256), _free_boundary_error(1024)
    dt = time.perf_counter() - t0
    report(5, "elliptic obstacle solver", poisson <= 1e-10 and e256 <= 5e-3 and e1024 <= 1e-3 and dt < 5,
           f"Poisson {poisson:.1e} <= 1e-10, free boundary {e256:.1e} <= 5e-3 (n=256), "
           f"{e1024:.1e} <= 1e-3 (n=1024), {dt:.2f} s < 5 s")


def _suite(inst, samples, seed):
    results = run_suite(inst, np.random.default_rng(seed), samples)
    failed = [c.line() for checks in results.values() for c in checks if not c.passed]
    return results, failed


def test_6_impulse_property_suite(report):
    t0 = time.perf_counter()
    failed, names = [], set()
    for k, f in enumerate((Nonlinearity.zero(), Nonlinearity.relu(1.0))):
        inst = ImpulseProblem(n=64, kappa=1.0, f=f)
        assert inst.tol.tol_inner == 1e-10 and inst.characterization_factor == 20
        results, bad = _suite(inst, 50, seed=100 + k)
        names |= set(results)
        failed += bad
    dt = time.perf_counter() - t0
    expected = {"comparison", "concavity", "lipschitz", "quotient monotonicity", "uniqueness", "characterization"}
    report(6, "impulse property suite (f = 0 and relu, 50 samples)",
           not failed and names == expected and dt < 60,
           f"{len(failed)} failures, {dt:.1f} s < 60 s" + (f"; first: {failed[0]}" if failed else ""))


def test_7_parabolic_property_suite(report):
    inst = ParabolicProblem(SpaceTimeGrid(32, 1.0, 64, 1.0), psi=0.1, g=HeatSource(0.5))
    assert inst.characterization_factor == 50 and len(suite_for(inst)) == 7
    t0 = time.perf_counter()
    results, failed = _suite(inst, 20, seed=200)
    dt = time.perf_counter() - t0
    report(7, "parabolic property suite (eps = 0.5, 20 samples)",
           not failed and len(results) == 7 and dt < 120,
           f"{len(failed)} failures, {dt:.1f} s < 120 s" + (f"; first: {failed[0]}" if failed else ""))


def test_8_hadamard_robustness(report):
    inst = ImpulseProblem(n=64, kappa=1.0)
    t0 = time.perf_counter()
    u, h = inst.parameter(20.0), inst.direction(1.0)
    rep = hadamard_check(inst, u, h, alternating_perturbations(inst, h, 8))
    dt = time.perf_counter() - t0
    errs = ", ".join(f"{e:.2e}" for e in rep.errors)
    report(8, "Hadamard errors decrease over n = 1..8", rep.decreasing and dt < 30,
           f"errors [{errs}], noise floor {rep.noise_floor:.0e}, {dt:.1f} s < 30 s")


CONFIGS = {
    "scalar_A": "problem = scalar\nvariant = A\n[parameter]\nu = 2\nh = 1\n",
    "scalar_C": "problem = scalar\nvariant = C\n[parameter]\nu = 1.5\nh = -1\nq = 1, inf\n",
    "impulse": "problem = impulse\nn = 32\nkappa = 1\nf_gamma = 1\n[parameter]\nu = 10\nh = 1\n"
               "q = 1, 2, inf\n[checks]\nsamples = 2\n",
    "parabolic": "problem = parabolic\nn = 16\nn_steps = 16\nT = 1\neps = 0.5\n[parameter]\nu = 0.3\nh = 1\n"
                 "[checks]\nsamples = 2\n[sweep]\nu_values = 0.1, 0.2, 0.3\n",
}


def test_9_determinism(report, tmp_path, capsys):
    differing = []
    for name, text in CONFIGS.items():
        cfg = tmp_path / f"{name}.ini"
        cfg.write_text(text)
        for command in COMMANDS:
            dirs = [tmp_path / f"{name}_{command}_{k}" for k in (0, 1)]
            codes = [main([command, "--config", str(cfg), "--out", str(d)]) for d in dirs]
            files = sorted(p.name for p in dirs[0].iterdir())
            _, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], files, shallow=False)
            if codes[0] != codes[1] or mismatch or errors or codes[0] not in (0, 1):
                differing.append(f"{name}/{command}")
    capsys.readouterr()
    report(9, "byte-identical artifacts on repeated runs", not differing,
           f"{len(CONFIGS) * len(COMMANDS)} command runs" + (f"; differing: {differing}" if differing else ""))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
