import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpextend.errors import BadParameters, NotPrivateOnH, UnknownDataset
from dpextend.extension import ExtensionResult, extend, extend_row, normalizer_ratio_check
from dpextend.mechanism import PartialMechanism, measured_epsilon
from dpextend.spaces import HypothesisSet, explicit_space

from conftest import random_instance, random_private_mechanism


def exact_extension(m, ratio: Fraction):
    """Rows and normalizers in exact rationals, for e^eps = ratio and integer distances."""
    members = m.hypothesis.members
    table = [[Fraction(float(x)) for x in row] for row in m.table]
    rows, zs = [], []
    for d in range(len(m.space)):
        dist = [int(m.space.distance(d, h)) for h in members]
        weights = [min(ratio ** dist[i] * table[i][w] for i in range(len(members))) for w in range(len(m.outputs))]
        z = sum(weights)  # sum of g * mu, with the mu factors cancelling
        rows.append([w / z for w in weights])
        zs.append(z)
    return rows, zs


def integer_space(rng, n):
    w = rng.integers(1, 4, size=(n, n))
    w = np.minimum(w, w.T)
    np.fill_diagonal(w, 0)
    for k in range(n):
        w = np.minimum(w, w[:, k : k + 1] + w[k : k + 1, :])
    return explicit_space([f"d{i}" for i in range(n)], w)


class TestWorkedExample:
    def test_values(self, worked_instance):
        m, eps = worked_instance
        r = extend(m, eps)
        assert r.mechanism.row("2").tolist() == pytest.approx([0.52, 0.48], abs=1e-12)
        assert r.normalizers.tolist() == pytest.approx([1.0, 1.0, 1.2], abs=1e-12)
        assert r.base_index == 0
        assert r.operations == 12

    def test_exact_oracle(self, worked_instance):
        m, eps = worked_instance
        rows, zs = exact_extension(m, Fraction(6, 5))
        assert zs[2] == Fraction(6, 5)
        assert [float(x) for x in rows[2]] == pytest.approx([0.52, 0.48], abs=1e-15)
        r = extend(m, eps)
        for d in range(3):
            assert r.normalizers[d] == pytest.approx(float(zs[d]), abs=1e-12)
            assert r.mechanism.table[d].tolist() == pytest.approx([float(x) for x in rows[d]], abs=1e-12)

    def test_extend_row(self, worked_instance):
        m, eps = worked_instance
        row, z = extend_row(m, eps, 2)
        full = extend(m, eps)
        assert np.array_equal(row, full.mechanism.table[2])
        assert z == full.normalizers[2]


class TestExactOracle:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([Fraction(6, 5), Fraction(3, 2), Fraction(2), Fraction(5)]))
    def test_random_integer_metrics(self, seed, ratio):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 8))
        space = integer_space(rng, n)
        eps = math.log(ratio)
        m = random_private_mechanism(rng, space, int(rng.integers(1, n + 1)), int(rng.integers(1, 6)), eps)
        rows, zs = exact_extension(m, ratio)
        r = extend(m, eps)
        for d in range(n):
            assert r.log_normalizers[d] == pytest.approx(math.log(zs[d]), abs=1e-12)
            assert np.allclose(r.mechanism.table[d], [float(x) for x in rows[d]], atol=1e-12, rtol=0)


class TestGuarantees:
    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_properties(self, seed):
        rng = np.random.default_rng(seed)
        m, eps = random_instance(rng)
        r = extend(m, eps)
        members = list(m.hypothesis.members)
        assert np.max(np.abs(r.mechanism.table[members] - m.table)) <= 1e-12
        assert np.all(np.abs(r.normalizers[members] - 1) <= 1e-9)
        dist_h = m.space.dist_to_set(members)
        assert np.all(r.log_normalizers <= eps * dist_h + 1e-9)
        assert np.all(r.normalizers > 0)
        assert measured_epsilon(r.mechanism).epsilon <= 2 * eps * (1 + 1e-9)
        assert normalizer_ratio_check(r).ok
        assert np.allclose(r.mechanism.table.sum(axis=1), 1.0, atol=1e-9, rtol=0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_base_point_invariance(self, seed):
        rng = np.random.default_rng(seed)
        m, eps = random_instance(rng)
        first = extend(m, eps)
        for b in m.hypothesis.members[1:]:
            other = extend(m, eps, base=b)
            assert other.base_index == b
            assert np.max(np.abs(other.mechanism.table - first.mechanism.table)) <= 1e-10

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_row_by_row(self, seed):
        rng = np.random.default_rng(seed)
        m, eps = random_instance(rng)
        full = extend(m, eps)
        for d in range(len(m.space)):
            row, z = extend_row(m, eps, d)
            assert np.array_equal(row, full.mechanism.table[d])
            assert z == full.normalizers[d]

    def test_full_hypothesis_is_identity(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(2, 8))
            space = integer_space(rng, n)
            m = random_private_mechanism(rng, space, n, 4, 0.8)
            r = extend(m, measured_epsilon(m).epsilon)
            assert np.max(np.abs(r.mechanism.table - m.table)) <= 1e-12

    def test_zero_eps_constant(self):
        space = explicit_space("abc", [[0, 1, 2], [1, 0, 1], [2, 1, 0]])
        m = PartialMechanism(space, ["u", "v"], HypothesisSet.of(space, [0, 2]), [[0.3, 0.7], [0.3, 0.7]])
        r = extend(m, 0.0)
        assert np.allclose(r.mechanism.table, [[0.3, 0.7]] * 3, atol=1e-15, rtol=0)

    def test_far_datasets_do_not_overflow(self):
        space = explicit_space("ab", [[0, 5000], [5000, 0]])
        m = PartialMechanism(space, ["u", "v"], HypothesisSet.of(space, [0]), [[0.25, 0.75]])
        r = extend(m, 1.0)
        assert np.all(np.isfinite(r.mechanism.table))
        assert r.mechanism.table[1].tolist() == pytest.approx([0.25, 0.75], abs=1e-15)
        assert r.log_normalizers[1] == pytest.approx(5000.0, rel=1e-15)
        assert r.normalizers[1] == math.inf

    def test_ratio_check_catches_corruption(self, worked_instance):
        m, eps = worked_instance
        r = extend(m, eps)
        bad_log_z = r.log_normalizers.copy()
        bad_log_z[0] = 5.0
        forged = ExtensionResult(r.mechanism, np.exp(bad_log_z), bad_log_z, eps, 0, r.hypothesis, r.operations)
        result = normalizer_ratio_check(forged)
        assert not result.ok
        assert result.kind == "NormalizerRatioViolation"
        assert result.witness == (0, 1)


class TestErrors:
    def test_not_private(self, worked_instance):
        m, _ = worked_instance
        with pytest.raises(NotPrivateOnH) as exc:
            extend(m, 0.1)
        assert exc.value.report.witness is not None

    def test_non_private_input(self):
        space = explicit_space("ab", [[0, 1], [1, 0]])
        m = PartialMechanism(space, ["u", "v"], HypothesisSet.of(space, [0, 1]), [[1.0, 0.0], [0.5, 0.5]])
        with pytest.raises(NotPrivateOnH):
            extend(m, 10.0)

    def test_bad_query(self, worked_instance):
        m, eps = worked_instance
        with pytest.raises(UnknownDataset):
            extend_row(m, eps, 3)

    def test_bad_eps(self, worked_instance):
        m, _ = worked_instance
        with pytest.raises(BadParameters):
            extend(m, math.inf)
        with pytest.raises(BadParameters):
            extend(m, -1.0)

    def test_base_outside_h(self, worked_instance):
        m, eps = worked_instance
        with pytest.raises(UnknownDataset):
            extend(m, eps, base=2)
