"""Exit criteria. Each test records one PASS/FAIL line (see conftest)."""
import json
from math import sqrt

import numpy as np
import pytest

from cheshire.beamline import Path, path_projector, postselected_state, preselected_state, spin_path_observable
from cheshire.cli import main
from cheshire.experiment import (
    ESTIMATE_KEYS,
    SCENARIO_LABELS,
    extract_population,
    extract_spin,
    h_port_rate,
    make_scenario,
    o_port_rate,
    reference_dwell,
    run_cheshire_experiment,
)
from cheshire.hilbert import ID2, SIGMA_Z, random_state, tensor
from cheshire.weakvalue import weak_value

from .conftest import ACCEPTANCE_LINES

FLUX = 45.0
T = 0.79
ALPHA = np.deg2rad(20.0)


def record(key, ok, detail):
    ACCEPTANCE_LINES[key] = f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}"
    print(ACCEPTANCE_LINES[key])
    assert ok, detail


def test_criterion_1_theory_reproduction():
    pre, post = preselected_state(), postselected_state(0.0)
    expected = {
        "Pi_I": (path_projector(Path.I), 0.0),
        "Pi_II": (path_projector(Path.II), 1.0),
        "sz_Pi_I": (spin_path_observable(Path.I), 1.0),
        "sz_Pi_II": (spin_path_observable(Path.II), 0.0),
    }
    errs = {k: abs(weak_value(pre, post, op).value - v) for k, (op, v) in expected.items()}
    worst = max(errs.values())
    record("1", worst <= 1e-12, f"weak values (0, 1, 1, 0), max |error| = {worst:.1e} (tol 1e-12)")


def test_criterion_2_table1_arithmetic():
    a = np.deg2rad(20.0)
    est = [
        extract_population((11.25, 0.05), (10.90, 0.09), (0.79, 0.01), Path.I),
        extract_population((11.25, 0.05), (8.83, 0.08), (0.79, 0.01), Path.II),
        extract_spin((11.25, 0.05), (11.59, 0.06), a, Path.I),
        extract_spin((11.25, 0.05), (10.97, 0.06), a, Path.II),
    ]
    # independent hand arithmetic
    M = 1 - sqrt(0.79)
    k = a * a / 4
    hand = [
        (1 - 10.90 / 11.25) / (2 * M),
        (1 - 8.83 / 11.25) / (2 * M),
        (11.59 / 11.25 - 1) / k,
        (10.97 / 11.25 - 1 + k) / k,
    ]
    quoted = [0.140, 0.967, 0.992, 0.183]
    reported = [(0.139, 0.041), (0.960, 0.058), (0.999, 0.252), (0.172, 0.223)]
    ok = all(abs(e.value - h) <= 0.01 for e, h in zip(est, hand))
    ok &= all(abs(e.value - q) <= 0.01 for e, q in zip(est, quoted))
    ok &= all(abs(e.value - rv) <= rs for e, (rv, rs) in zip(est, reported))
    vals = ", ".join(f"{e.value:.3f}" for e in est)
    record("2", ok, f"published intensities -> ({vals}) vs reported 0.139/0.960/0.999/0.172 within errors")


def test_criterion_3_closed_form_fringes():
    rng = np.random.default_rng(3)
    chis = rng.uniform(-np.pi, np.pi, 100)
    s = np.sin(ALPHA / 2)
    ref_o = FLUX / 4
    worst = 0.0
    for chi in chis:
        checks = [
            (o_port_rate(make_scenario("REF"), chi, FLUX), FLUX / 4),
            (h_port_rate(make_scenario("REF"), chi, FLUX), FLUX / 2),
            (o_port_rate(make_scenario("ABS_I", T), chi, FLUX) / ref_o, 1.0),
            (o_port_rate(make_scenario("ABS_II", T), chi, FLUX) / ref_o, T),
            (o_port_rate(make_scenario("MAG_I", alpha=ALPHA), chi, FLUX) / ref_o, 1 + s * s + 2 * s * np.sin(chi)),
            (o_port_rate(make_scenario("MAG_II", alpha=ALPHA), chi, FLUX) / ref_o, np.cos(ALPHA / 2) ** 2),
            (h_port_rate(make_scenario("MAG_II", alpha=ALPHA), chi, FLUX), FLUX / 2 * (1 + s * np.sin(chi))),
        ]
        worst = max(worst, max(abs(got - want) / max(1.0, abs(want)) for got, want in checks))
    # MAG_I fringe: max/min over a fine grid gives contrast; chi=0 gives 1 + s^2
    grid = np.linspace(-np.pi, np.pi, 4001)
    mag_i = np.array([o_port_rate(make_scenario("MAG_I", alpha=ALPHA), c, FLUX) for c in grid])
    contrast = (mag_i.max() - mag_i.min()) / (mag_i.max() + mag_i.min())
    mag_ii_h = np.array([h_port_rate(make_scenario("MAG_II", alpha=ALPHA), c, FLUX) for c in grid])
    h_contrast = (mag_ii_h.max() - mag_ii_h.min()) / (mag_ii_h.max() + mag_ii_h.min())
    ok = worst <= 1e-12
    ok &= abs(contrast - 2 * s / (1 + s * s)) <= 1e-6  # grid resolution
    ok &= abs(o_port_rate(make_scenario("MAG_I", alpha=ALPHA), 0.0, FLUX) / ref_o - (1 + s * s)) <= 1e-12
    ok &= abs(h_contrast - s) <= 1e-6
    record("3", ok, f"O/H closed forms at 100 random chi, max rel error {worst:.1e}; "
                    f"MAG_I contrast {contrast:.5f}, MAG_II H contrast {h_contrast:.5f}")


def _ratio_exact(label, **kw):
    return o_port_rate(make_scenario(label, **kw), 0.0) / o_port_rate(make_scenario("REF"), 0.0)


def test_criterion_4_perturbative_bounds():
    # stated form: |exact/linearized - 1| <= M^2 (A) and <= alpha^3 (B), 20-point sweeps
    failures = []
    worst_a = worst_diff = 0.0
    for T_ in np.linspace(0.6, 0.99, 20):
        M = 1 - sqrt(T_)
        for label, wv in (("ABS_I", 0.0), ("ABS_II", 1.0)):
            exact, lin = _ratio_exact(label, T=T_), 1 - 2 * M * wv
            dev = abs(exact / lin - 1)
            # diagnostic only: the difference form is attained exactly at M^2 by ABS_II
            worst_diff = max(worst_diff, abs(exact - lin) / M**2)
            worst_a = max(worst_a, dev / M**2)
            if dev > M**2:
                failures.append(f"{label} T={T_:.3f}: {dev:.2e} > M^2={M**2:.2e}")
    worst_b = 0.0
    for a in np.linspace(0.6 / 20, 0.6, 20):
        k = a * a / 4
        for label, lin in (("MAG_I", 1 + k), ("MAG_II", 1 - k)):
            dev = abs(_ratio_exact(label, alpha=a) / lin - 1)
            worst_b = max(worst_b, dev / a**3)
            if dev > a**3:
                failures.append(f"{label} alpha={a:.3f}: {dev:.2e} > alpha^3")
    detail = (f"Methods A worst dev/M^2 = {worst_a:.3f} (|exact - linearized|/M^2 = {worst_diff:.3f}), Methods B worst dev/alpha^3 = {worst_b:.4f}; "
              f"{len(failures)} violations" + (f" (first: {failures[0]})" if failures else ""))
    record("4", not failures, detail)


def test_criterion_5_sum_rules():
    rng = np.random.default_rng(5)
    p1, p2 = path_projector(Path.I), path_projector(Path.II)
    s1, s2 = spin_path_observable(Path.I), spin_path_observable(Path.II)
    sz = tensor(SIGMA_Z, ID2)
    n, worst = 0, 0.0
    while n < 1000:
        pre, post = random_state(rng), random_state(rng)
        if abs(np.vdot(post.amp, pre.amp)) <= 1e-3:
            continue
        n += 1
        w = lambda op: weak_value(pre, post, op).value
        worst = max(worst, abs(w(p1) + w(p2) - 1), abs(w(s1) + w(s2) - w(sz)))
    record("5", worst <= 1e-9, f"{n} random pairs, max sum-rule violation {worst:.1e} (tol 1e-9)")


def test_criterion_6_stochastic_calibration():
    R = 200
    dwell = reference_dwell(0.05 / 11.25, FLUX)
    analytic = run_cheshire_experiment(T=T, alpha=ALPHA, flux=FLUX, dwell=dwell)
    assert analytic.fits["REF"].sigma_intensity_at_zero / 11.25 == pytest.approx(0.05 / 11.25, rel=1e-9)
    vals = {k: [] for k in ESTIMATE_KEYS}
    sigs = {k: [] for k in ESTIMATE_KEYS}
    for r in range(R):
        res = run_cheshire_experiment(
            T=T, alpha=ALPHA, flux=FLUX, dwell=dwell, mode="stochastic", seed=20141, repetition=r
        )
        for k in ESTIMATE_KEYS:
            vals[k].append(res.estimates[k].value)
            sigs[k].append(res.estimates[k].sigma)
    ok, parts = True, []
    for k in ESTIMATE_KEYS:
        v = np.array(vals[k])
        sigma = float(np.mean(sigs[k]))
        pull = (v.mean() - analytic.estimates[k].value) / (sigma / sqrt(R))
        spread = v.std(ddof=1) / sigma
        ok &= abs(pull) <= 3 and abs(spread - 1) <= 0.25
        parts.append(f"{k}: pull {pull:+.2f}, spread/sigma {spread:.3f}")
    record("6", ok, f"{R} seeded repetitions; " + "; ".join(parts))


def test_criterion_7_reported_values_rest_on_arithmetic():
    # the simulator is ideal: it returns 0 where the apparatus gave 0.139
    sim = run_cheshire_experiment(T=T, alpha=ALPHA, dwell=555.6).estimates["Pi_I"].value
    arith = extract_population(11.25, 10.90, 0.79, Path.I).value
    ok = abs(sim) <= 1e-12 and abs(arith - 0.139) <= 0.041
    record("7", ok, f"ideal simulation Pi_I = {sim:.3f}; published intensities give {arith:.3f} "
                    "(apparatus imperfections not modeled; covered by criterion 2)")


def test_criterion_8_determinism(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"mode": "stochastic", "repetitions": 2, "dwell": 100.0}))
    runs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert main(["table1", "--config", str(cfg), "--seed", "123", "--out", str(out)]) == 0
        for lab in SCENARIO_LABELS:
            assert main(["scan", "--config", str(cfg), "--scenario", lab, "--seed", "123", "--out", str(out)]) == 0
        runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    ok = runs[0] == runs[1] and len(runs[0]) == 11
    record("8", ok, f"{len(runs[0])} output files byte-identical across two runs")
