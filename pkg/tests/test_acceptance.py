"""Acceptance suite: criteria 1-9 at their stated tolerances.

Each criterion records a pass/fail line (see the summary at the end of the
pytest run).  Suite results are computed once per session and reused by the
determinism check, which reruns every suite and compares JSON bytes.
"""

import time

import pytest

from roughwave import io, suites

SEED = 0


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    rep = fn(*args, **kw)
    return rep, time.perf_counter() - t0


def _failed(rep):
    return [k for k, c in rep["checks"].items() if not c["passed"]]


def _summary(rep, keys=None, fmt=".3g"):
    keys = keys or rep["checks"].keys()
    return ", ".join(f"{k}={rep['checks'][k]['value']:{fmt}}" for k in keys)


# the calls below are repeated verbatim by the determinism criterion
CALLS = {
    "flat_exactness": (suites.flat_exactness, (), {}),
    "eikonal": (suites.eikonal_identities, (0.05,), {"seed": SEED}),
    "curves_flat": (suites.connecting_curves, (0.0,), {"n_pairs": 100, "seed": SEED}),
    "curves_perturbed": (suites.connecting_curves, (0.05,), {"n_pairs": 100, "seed": SEED}),
    "key_lemma": (suites.key_lemma, (), {"eps": 0.05, "seed": SEED}),
    "kernel_oracle": (suites.kernel_oracle, (), {"n_pairs": 50, "j": 3, "seed": SEED}),
    "dispersive_flat_j4": (suites.dispersive, (0.0, 4, 1.6), {}),
    "dispersive_eps_j3": (suites.dispersive, (0.05, 3, 0.8), {}),
    "strichartz": (suites.strichartz_scaling, (4, 4, (3, 4, 5, 6, 7)), {}),
    "rescaling": (suites.rescaling, (), {"j": 2, "n_probes": 10, "seed": SEED}),
}

_CACHE = {}


def run(name):
    if name not in _CACHE:
        fn, args, kw = CALLS[name]
        _CACHE[name] = _timed(fn, *args, **kw)
    return _CACHE[name]


def test_criterion_1_flat_exactness(criterion):
    rep, dt = run("flat_exactness")
    ok = not _failed(rep) and dt < 10.0 and rep["grid"] == [17, 17, 17, 9]
    criterion(1, "flat", ok, f"max error {max(c['value'] for c in rep['checks'].values()):.2e}, {dt:.1f}s")
    assert not _failed(rep), _failed(rep)
    assert dt < 10.0


def test_criterion_2_eikonal_identities(criterion):
    rep, dt = run("eikonal")
    ok = not _failed(rep) and dt < 300.0 and rep["n_geodesics"] == 42
    c = rep["regularity_constants"]["0.05"]
    criterion(2, "eikonal", ok,
              f"{_summary(rep, ['eikonal_residual_fd', 'L_u_constancy', 'L_domega_u_constancy', 'g_N_domega_N'])}; "
              f"C(eps=0.05)={{{', '.join(f'{k}: {v:.3f}' for k, v in c.items())}}}, "
              f"spread={max(rep['constant_spread'].values()):.3f}, {dt:.1f}s")
    assert not _failed(rep), _failed(rep)
    assert dt < 300.0


@pytest.mark.parametrize("which", ["flat", "perturbed"])
def test_criterion_3_connecting_curves(criterion, which):
    rep, dt = run(f"curves_{which}")
    ok = not _failed(rep)
    criterion(3, which, ok, f"{rep['n_interior']} mu + {rep['n_exterior']} eta curves, "
              f"{_summary(rep, ['mu_endpoint', 'eta_endpoint', 'eta_affine_domega_u'])}, {dt:.1f}s")
    assert not _failed(rep), _failed(rep)


def test_criterion_4_key_lemma(criterion):
    rep, dt = run("key_lemma")
    ok = not _failed(rep)
    criterion(4, "lemma", ok, f"c4={rep['c4_flat']:.4f}, perturbed min ratio={rep['c4_perturbed']:.4f}, "
              f"samples={rep['checks']['flat_n_samples']['value']:.0f}+{rep['checks']['perturbed_n_samples']['value']:.0f}, "
              f"closed form err={rep['checks']['flat_OnS_closed_form']['value']:.1e}, {dt:.1f}s")
    assert not _failed(rep), _failed(rep)


def test_criterion_5_kernel_oracle(criterion):
    rep, dt = run("kernel_oracle")
    ok = not _failed(rep)
    criterion(5, "oracle", ok, f"{_summary(rep, ['oracle_rel_error', 'j_independence', 'hermitian'])}, {dt:.1f}s")
    assert not _failed(rep), _failed(rep)


def _slopes(rep):
    return ", ".join(f"{k} {v:+.3f}" for k, v in rep["slopes"].items())


def test_criterion_6_dispersive_flat_j4(criterion):
    rep, dt = run("dispersive_flat_j4")
    ok = not _failed(rep)
    criterion(6, "flat j=4", ok, f"slopes {_slopes(rep)}, max |K||t-s| {rep['max_ratio']:.2f}, {dt:.1f}s")
    assert not _failed(rep), _failed(rep)


def test_criterion_6_dispersive_perturbed_j3(criterion):
    rep, dt = run("dispersive_eps_j3")
    _, dt_flat = run("dispersive_flat_j4")
    ok = not _failed(rep) and dt + dt_flat < 900.0
    criterion(6, "eps=0.05 j=3", ok, f"slopes {_slopes(rep)} over |t-s| in [0.8, 8], {dt:.1f}s")
    assert not _failed(rep), f"slopes outside -1 +- 0.15: {_slopes(rep)}"


@pytest.mark.slow
def test_criterion_6_diagnostics(criterion):
    """Not a criterion: separates the level from the perturbation for the j = 3 result."""
    flat3, _ = _timed(suites.dispersive, 0.0, 3, 0.8)
    eps4, dt = _timed(suites.dispersive, 0.05, 4, 1.6)
    criterion(6, "diagnostic flat j=3", None, f"slopes {_slopes(flat3)}")
    criterion(6, "diagnostic eps=0.05 j=4", None, f"slopes {_slopes(eps4)}, {dt:.1f}s")
    assert not _failed(eps4)


def test_criterion_7_strichartz_slopes(criterion):
    rep, dt = run("strichartz")
    keys = ["slope_value", "slope_gradient", "slope_hessian"]
    ok = all(rep["checks"][k]["passed"] for k in keys) and dt < 1800.0
    criterion(7, "slopes", ok, f"{_summary(rep, keys)} (targets 0.5/1.5/2.5 + 0.1), {dt:.1f}s")
    for k in keys:
        assert rep["checks"][k]["passed"], k


def test_criterion_7_single_constant(criterion):
    rep, _ = run("strichartz")
    keys = ["single_constant_value", "single_constant_gradient", "single_constant_hessian"]
    ok = all(rep["checks"][k]["passed"] for k in keys)
    criterion(7, "single constant", ok, f"max norm_j / (C 2^(j r) data_j): {_summary(rep, keys, '.5f')} (need <= 1)")
    for k in keys:
        assert rep["checks"][k]["passed"], f"{k}: {rep['checks'][k]['value']}"


def test_criterion_8_rescaling(criterion):
    rep, dt = run("rescaling")
    ok = not _failed(rep)
    criterion(8, "TT*", ok, f"two-path relative error {rep['rel_error']:.2e} at {len(rep['lhs'])} probes, {dt:.1f}s")
    assert not _failed(rep), _failed(rep)


def test_criterion_9_determinism(criterion):
    mismatched = []
    for name, (fn, args, kw) in CALLS.items():
        first, _ = run(name)
        again = fn(*args, **kw)
        strip = lambda r: {k: v for k, v in r.items() if not k.startswith("_")}
        if io.dumps(strip(first)).encode() != io.dumps(strip(again)).encode():
            mismatched.append(name)
    criterion(9, "bytes", not mismatched, f"{len(CALLS) - len(mismatched)}/{len(CALLS)} suites byte-identical")
    assert not mismatched, mismatched
