from __future__ import annotations

import itertools
import json

import numpy as np
import pytest

from helpers import rand_ext
from secure_msr.audit import (
    AuditReport,
    EavesdropperSpec,
    audit_sweep,
    canonical_R,
    eavesdropper_placements,
    entropy_budget,
    is_secure,
    observation_matrix,
    observe,
    recover_pad,
)
from secure_msr.errors import BudgetTooLarge, ParamError
from secure_msr.field_tower import base_matmul, base_rank, ext_matvec, solve_linear
from secure_msr.scheme import scheme_params, secure_encode


@pytest.fixture(scope="module")
def s4201(t16):
    return scheme_params(4, 2, 0, 1, t16)


@pytest.fixture(scope="module")
def s4210(t16):
    return scheme_params(4, 2, 1, 0, t16)


@pytest.fixture(scope="module")
def s5311(t48):
    return scheme_params(5, 3, 1, 1, t48)


@pytest.fixture(scope="module")
def tampered(t16):
    return scheme_params(4, 2, 0, 1, t16, secret_size=5)


def _eval(scheme, obs, pad, secret):
    return ext_matvec(scheme.tower, obs.pad_part, pad) ^ ext_matvec(scheme.tower, obs.secret_part,
                                                                     secret)


def test_placements():
    specs = list(eavesdropper_placements(5, 1, 1))
    assert len(specs) == 20
    assert all(not (s.E1 & s.E2) for s in specs)
    with pytest.raises(ParamError):
        EavesdropperSpec({1}, {1}).validate(4)


def test_row_counts(s4201, s4210):
    assert observation_matrix(EavesdropperSpec({1}, ()), s4210).rows == 8
    obs = observation_matrix(EavesdropperSpec((), {3}), s4201)
    assert obs.rows == 12
    assert obs.pad_part.shape == (12, 12, 16) and obs.secret_part.shape == (12, 4, 16)


@pytest.mark.parametrize("which,spec", [("s4201", EavesdropperSpec((), {4})),
                                        ("s5311", EavesdropperSpec({2}, {5}))])
def test_observations_are_linear_in_pad_and_secret(which, spec, request, rng):
    s = request.getfixturevalue(which)
    obs = observation_matrix(spec, s)
    pad, secret = rand_ext(s.tower, (s.pad_size,), rng), rand_ext(s.tower, (s.Ms,), rng)
    word = secure_encode(s, secret, pad=pad)
    assert np.array_equal(observe(spec, s, word), _eval(s, obs, pad, secret))
    zero = secure_encode(s, s.tower.zeros(s.Ms), pad=s.tower.zeros(s.pad_size))
    assert not observe(spec, s, zero).any()


def test_specific_verdicts(s4201, s4210):
    v = is_secure(EavesdropperSpec((), {3}), s4201)
    assert v.secure and v.rank_A == v.rank_AB == 12 and v.witness is None
    for i in range(1, 5):
        assert is_secure(EavesdropperSpec({i}, ()), s4210).secure


def test_coset_shift_soundness(s4201, rng):
    """Secure verdict => pads can be shifted to make two secrets' observations coincide."""
    s, t = s4201, s4201.tower
    spec = EavesdropperSpec((), {2})
    assert is_secure(spec, s).secure
    obs = observation_matrix(spec, s)
    s1, s2 = rand_ext(t, (s.Ms,), rng), rand_ext(t, (s.Ms,), rng)
    delta = solve_linear(t, obs.pad_part, ext_matvec(t, obs.secret_part, s1 ^ s2))
    base_pad = rand_ext(t, (s.pad_size,), rng)
    seen1, seen2, unshifted = set(), set(), set()
    for b1, b2 in itertools.product(range(8), repeat=2):
        pad = base_pad.copy()
        pad[3], pad[7] = t.embed(b1), t.embed(b2)
        e1 = observe(spec, s, secure_encode(s, s1, pad=pad))
        e2 = observe(spec, s, secure_encode(s, s2, pad=pad ^ delta))
        assert np.array_equal(e1, e2)
        seen1.add(e1.tobytes())
        seen2.add(e2.tobytes())
        unshifted.add(observe(spec, s, secure_encode(s, s2, pad=pad)).tobytes())
    assert seen1 == seen2 and len(seen1) == 64
    assert not (seen1 & unshifted)


def test_tampered_scheme_leaks_with_valid_witness(tampered, rng):
    s, t = tampered, tampered.tower
    report = audit_sweep(0, 1, s)
    assert not report.secure and report.insecure
    v = report.insecure[0]
    assert v.rank_AB == v.rank_A + 1
    u = v.witness["functional"]
    col = v.witness["secret_column"]
    s1 = rand_ext(t, (s.Ms,), rng)
    s2 = s1.copy()
    s2[col] ^= t.one()
    values = set()
    for seed in range(3):
        pad = rand_ext(t, (s.pad_size,), np.random.default_rng(seed))
        e1 = observe(v.spec, s, secure_encode(s, s1, pad=pad))
        e2 = observe(v.spec, s, secure_encode(s, s2, pad=pad))
        f1 = ext_matvec(t, u[None], e1)[0]
        f2 = ext_matvec(t, u[None], e2)[0]
        assert not np.array_equal(f1, f2)
        values.add(f1.tobytes())
    assert len(values) == 1        # the leaked functional does not depend on the pad


def _random_invertible(tower, size, rng):
    while True:
        T = rng.integers(0, tower.base_order, (size, size), dtype=np.uint8)
        if base_rank(tower, T) == size:
            return T


@pytest.mark.parametrize("which", ["s4201", "s4210", "tampered"])
def test_verdicts_do_not_depend_on_generator(which, request, rng):
    s = request.getfixturevalue(which)
    Gt = s.code.generator_transpose
    Gt2 = base_matmul(s.tower, Gt, _random_invertible(s.tower, Gt.shape[1], rng))
    assert not np.array_equal(Gt2[:Gt.shape[1]], np.eye(Gt.shape[1], dtype=np.uint8))
    for spec in eavesdropper_placements(s.n, s.ell1, s.ell2):
        a, b = is_secure(spec, s), is_secure(spec, s, generator_transpose=Gt2)
        assert (a.secure, a.rank_A, a.rank_AB) == (b.secure, b.rank_A, b.rank_AB)


def test_entropy_budget_examples(s4201, s5311, s4210):
    b = entropy_budget(EavesdropperSpec((), {3}), s4201)
    assert (b.stored_symbols, b.budget, b.target, b.R) == (8, 12, 12, (1,))
    assert b.download_sizes == {1: 4}
    b = entropy_budget(EavesdropperSpec({1}, {2}), s5311)
    assert (b.stored_symbols, b.budget, b.target) == (32, 40, 40)
    b = entropy_budget(EavesdropperSpec({4}, ()), s4210)
    assert b.budget == 8 == b.stored_symbols and b.equal
    assert canonical_R(EavesdropperSpec({1}, {3}), s5311) == (2,)


def test_sweep_small(s4201, s4210):
    for s in (s4201, s4210):
        rep = audit_sweep(s.ell1, s.ell2, s)
        assert rep.secure and len(rep.verdicts) == 4
        assert all(v.entropy_budget.equal for v in rep.verdicts)
        doc = json.loads(json.dumps(rep.to_dict()))
        assert doc["pairs"] == 4 and doc["secure"] is True and doc["budget_equal_all"]


def test_sweep_rejects_large_budget(s4201):
    with pytest.raises(BudgetTooLarge):
        audit_sweep(1, 1, s4201)


def test_report_fails_closed():
    assert not AuditReport(n=4, k=2, ell1=0, ell2=1, Ms=4, M=16).secure


def test_threaded_sweep_matches(s4201):
    a, b = audit_sweep(0, 1, s4201), audit_sweep(0, 1, s4201, workers=3)
    assert [v.to_dict()["rank_A"] for v in a.verdicts] == [v.to_dict()["rank_A"] for v in b.verdicts]


@pytest.mark.parametrize("which,spec", [("s4201", EavesdropperSpec((), {1})),
                                        ("s4201", EavesdropperSpec((), {4})),
                                        ("s5311", EavesdropperSpec({2}, {5})),
                                        ("s5311", EavesdropperSpec({5}, {1}))])
def test_pad_is_recoverable_from_view_and_secret(which, spec, request, rng):
    s = request.getfixturevalue(which)
    pad, secret = rand_ext(s.tower, (s.pad_size,), rng), rand_ext(s.tower, (s.Ms,), rng)
    word = secure_encode(s, secret, pad=pad)
    assert np.array_equal(recover_pad(spec, s, word, secret), pad)
