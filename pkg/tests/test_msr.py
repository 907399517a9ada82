from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import rand_ext
from oracles import bmat_power, brute_repair_set, dense_A, dense_H, gf_mul
from secure_msr.errors import (
    DegenerateCode,
    DigitOutOfRange,
    FieldTooSmall,
    InconsistentInput,
    MissingHelper,
    ParamError,
    PlanMismatch,
    TooFewNodes,
)
from secure_msr.field_tower import base_matmul, build_field_tower
from secure_msr.msr import (
    apply_block_power,
    apply_parity,
    code_params,
    decode_erasures,
    encode_systematic,
    helper_symbols,
    lambda_coeff,
    mds_verify,
    parity_check_matrix,
    repair,
    repair_by_solve,
    repair_indices,
    repair_plan,
)

W, MOD = 3, 0b1011


def oracle_lambda(i, u):
    if u:
        return 1
    x = 1
    for _ in range(i):
        x = gf_mul(x, 2, W, MOD)
    return x


@pytest.fixture(scope="module")
def c42(t16):
    return code_params(4, 2, t16)


@pytest.fixture(scope="module")
def c53(t48):
    return code_params(5, 3, t48)


@pytest.fixture(scope="module")
def small_codes(t4):
    return {nk: code_params(*nk, t4) for nk in [(3, 1), (4, 2), (5, 2), (5, 3), (6, 4)]}


# -- parameters ----------------------------------------------------------------

def test_sizes(c42, c53):
    assert (c42.alpha, c42.beta, c42.d) == (8, 4, 3)
    assert (c53.alpha, c53.beta, c53.d) == (16, 8, 4)
    assert c42.repair_bandwidth == 12 and c53.repair_bandwidth == 32


def test_param_errors(t16):
    with pytest.raises(DegenerateCode):
        code_params(4, 3, t16)
    with pytest.raises(ParamError):
        code_params(4, 4, t16)
    with pytest.raises(FieldTooSmall):
        code_params(4, 2, build_field_tower(2, 16))     # |B| = 4 < 5


def test_digits(c42):
    assert c42.index_digits(5) == (1, 0, 1)
    assert int(c42.substitute(5, 2, 1)) == 7
    for a in range(c42.alpha):
        assert c42.digits_to_index(c42.index_digits(a)) == a
    with pytest.raises(DigitOutOfRange):
        c42.index_digits(8)
    with pytest.raises(DigitOutOfRange):
        c42.digits_to_index((2, 0, 0))


def test_lambda(c53):
    assert lambda_coeff(c53, 1, 0) == c53.tower.gamma
    assert lambda_coeff(c53, 3, 1) == 1
    zeros = {lambda_coeff(c53, i, 0) for i in range(1, c53.n)}
    assert len(zeros) == c53.n - 1
    for i in range(1, c53.n):
        for u in range(c53.r):
            assert lambda_coeff(c53, i, u) == oracle_lambda(i, u)


# -- block powers and parity -----------------------------------------------------

def test_block_power_small_example(small_codes, rng):
    c = small_codes[3, 1]
    v = rand_ext(c.tower, (c.alpha,), rng)
    assert np.array_equal(apply_block_power(c, 1, 0, v), v)
    out = apply_block_power(c, 1, 1, v)
    assert np.array_equal(out[0], c.tower.scale(c.tower.gamma, v[1]))


@pytest.mark.parametrize("nk", [(3, 1), (4, 2), (5, 2), (5, 3)])
def test_block_power_matches_dense_matrix_power(nk, small_codes, rng):
    c = small_codes[nk]
    tower = c.tower
    v = rand_ext(tower, (c.alpha,), rng)
    for j in range(1, c.n):
        A = dense_A(c.n, c.k, j, oracle_lambda, W, MOD)
        for t in range(c.r):
            P = np.array(bmat_power(A, t, W, MOD), dtype=np.uint8)
            assert np.array_equal(apply_block_power(c, j, t, v), base_matmul(tower, P, v))
        if c.r >= 3:
            once = apply_block_power(c, j, 1, apply_block_power(c, j, 1, v))
            assert np.array_equal(once, apply_block_power(c, j, 2, v))


@pytest.mark.parametrize("nk", [(4, 2), (5, 2), (5, 3)])
def test_dense_H_matches_oracle_and_apply_parity(nk, small_codes, rng):
    c = small_codes[nk]
    H = parity_check_matrix(c)
    assert H.tolist() == dense_H(c.n, c.k, oracle_lambda, W, MOD)
    word = rand_ext(c.tower, (c.n, c.alpha), rng)
    syn = base_matmul(c.tower, H, word.reshape(c.n * c.alpha, -1))
    assert np.array_equal(apply_parity(c, word).reshape(syn.shape), syn)


def test_h_has_no_zero_column_and_flip_detected(c42, rng):
    H = parity_check_matrix(c42)
    assert (H.any(axis=0)).all()
    word = encode_systematic(c42, rand_ext(c42.tower, (2, 8), rng))
    for node in range(4):
        for a in (0, 3, 7):
            bad = word.copy()
            bad[node, a, 5] ^= 1
            assert apply_parity(c42, bad).any()


# -- encode / decode ------------------------------------------------------------

@pytest.mark.parametrize("which", ["c42", "c53"])
def test_encode_gives_codeword_and_decodes_from_every_subset(which, request, rng):
    c = request.getfixturevalue(which)
    msg = rand_ext(c.tower, (3, c.k, c.alpha), rng)
    word = encode_systematic(c, msg)
    assert np.array_equal(word[:, :c.k], msg)
    assert not apply_parity(c, word).any()
    for known in itertools.combinations(range(1, c.n + 1), c.k):
        got = decode_erasures(c, {i: word[:, i - 1] for i in known})
        assert np.array_equal(got, word)


def test_encode_zero(c42):
    assert not encode_systematic(c42, c42.tower.zeros((2, 8))).any()


def test_decode_specific_cases(c53, rng):
    word = encode_systematic(c53, rand_ext(c53.tower, (3, 16), rng))
    got = decode_erasures(c53, {i: word[i - 1] for i in (2, 3, 4)})
    assert np.array_equal(got, word)
    assert np.array_equal(decode_erasures(c53, {i: word[i - 1] for i in range(1, 6)}), word)


def test_decode_errors(c42, rng):
    word = encode_systematic(c42, rand_ext(c42.tower, (2, 8), rng))
    with pytest.raises(TooFewNodes):
        decode_erasures(c42, {1: word[0]})
    bad = {i: word[i - 1].copy() for i in (1, 2, 3)}
    bad[3][0, 0] ^= 1
    with pytest.raises(InconsistentInput):
        decode_erasures(c42, bad)


@pytest.mark.parametrize("nk", [(4, 2), (5, 2), (6, 4)])
def test_small_tower_all_subsets(nk, small_codes, rng):
    c = small_codes[nk]
    word = encode_systematic(c, rand_ext(c.tower, (c.k, c.alpha), rng))
    for known in itertools.combinations(range(1, c.n + 1), c.k):
        assert np.array_equal(decode_erasures(c, {i: word[i - 1] for i in known}), word)


# -- repair ---------------------------------------------------------------------

def test_repair_plan_examples(c42):
    assert repair_indices(c42, 1).tolist() == [0, 2, 4, 6]
    assert repair_indices(c42, 4).tolist() == [0, 3, 5, 6]


@pytest.mark.parametrize("nk", [(4, 2), (5, 2), (5, 3), (6, 4)])
def test_repair_sets_match_enumeration(nk, small_codes):
    c = small_codes[nk]
    for i in range(1, c.n + 1):
        plan = repair_plan(c, i)
        assert repair_indices(c, i).tolist() == sorted(brute_repair_set(c.n, c.k, i))
        assert set(plan.symbols_per_helper.values()) == {c.beta}
        assert plan.total_symbols == (c.n - 1) * c.beta
        assert sorted(plan.positions.tolist()) == list(range(c.alpha))


@pytest.mark.parametrize("which,total", [("c42", 12), ("c53", 32)])
def test_repair_every_node(which, total, request, rng):
    c = request.getfixturevalue(which)
    word = encode_systematic(c, rand_ext(c.tower, (4, c.k, c.alpha), rng))
    for i in range(1, c.n + 1):
        sent = helper_symbols(c, word, i)
        assert sum(s.shape[-2] for s in sent.values()) == total
        assert all(s.shape[-2] == c.beta for s in sent.values())
        assert np.array_equal(repair(c, i, sent), word[:, i - 1])
        assert np.array_equal(repair_by_solve(c, i, sent), word[:, i - 1])


@pytest.mark.parametrize("nk", [(5, 2), (6, 4)])
def test_repair_small_tower(nk, small_codes, rng):
    c = small_codes[nk]
    word = encode_systematic(c, rand_ext(c.tower, (2, c.k, c.alpha), rng))
    for i in range(1, c.n + 1):
        sent = helper_symbols(c, word, i)
        assert np.array_equal(repair(c, i, sent), word[:, i - 1])


def test_repair_zero_and_errors(c42):
    zero = c42.tower.zeros((4, 8))
    sent = helper_symbols(c42, zero, 2)
    assert not repair(c42, 2, sent).any()
    partial = dict(sent)
    partial.pop(3)
    with pytest.raises(MissingHelper):
        repair(c42, 2, partial)
    wrong = dict(sent)
    wrong[3] = wrong[3][:2]
    with pytest.raises(PlanMismatch):
        repair(c42, 2, wrong)
    extra = dict(sent)
    extra[2] = sent[1]
    with pytest.raises(PlanMismatch):
        repair(c42, 2, extra)


@given(st.integers(0, 2 ** 32), st.integers(1, 4))
def test_repair_property(seed, failed):
    t = build_field_tower(3, 16)
    c = code_params(4, 2, t)
    word = encode_systematic(c, rand_ext(t, (2, 8), np.random.default_rng(seed)))
    assert np.array_equal(repair(c, failed, helper_symbols(c, word, failed)), word[failed - 1])


# -- MDS audit ------------------------------------------------------------------

def test_mds_verify(c42, c53):
    r42, r53 = mds_verify(c42), mds_verify(c53)
    assert r42.ok and len(r42.subsets) == 6
    assert r53.ok and len(r53.subsets) == 10


def test_mds_negative_control(t16):
    good = code_params(4, 2, t16)
    lam = np.array(good.lambdas)
    lam[1:, 0] = 1
    bad = code_params(4, 2, t16, lambdas=lam)
    report = mds_verify(bad)
    assert not report.ok and report.failures
