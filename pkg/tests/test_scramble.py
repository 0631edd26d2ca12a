from __future__ import annotations

import itertools

import numpy as np
import pytest
from scipy import stats

from hosnet.badic import DigitPoint, to_digits
from hosnet.netgen import builtin_matrices, generate_net, t_value, verify_net
from hosnet.scramble import (
    IdentitySource,
    PermutationSource,
    ScrambleKey,
    _linear_parts,
    _perm_table,
    linear_scramble,
    linear_scramble_digits,
    linear_scramble_net,
    order_d_scramble,
    owen_scramble,
    scramble_net,
)


def cell_counts(values, cells):
    return np.bincount(np.floor(np.asarray(values) * cells).astype(int), minlength=cells)


def uniform_ok(counts, alpha=1e-4):
    return stats.chisquare(counts).pvalue > alpha


class TestKey:
    def test_reproducible(self):
        a = PermutationSource(ScrambleKey(7, 3, 3))
        b = PermutationSource(ScrambleKey(7, 3, 3))
        for prefix in [(), (0,), (2, 1), (1, 1, 0)]:
            assert a.lookup(2, prefix) == b.lookup(2, prefix)

    def test_permutations_valid_and_varied(self):
        seen = set()
        for seed in range(400):
            p = PermutationSource(ScrambleKey(seed, 0, 3)).lookup(0, (1,))
            assert sorted(p) == [0, 1, 2]
            seen.add(p)
        assert len(seen) == 6

    def test_perm_equiprobable(self):
        ph = np.arange(60_000, dtype=np.uint64) * np.uint64(0x9E3779B97F4A7C15)
        perms = _perm_table(ph, 3)
        codes = perms[:, 0] * 9 + perms[:, 1] * 3 + perms[:, 2]
        _, counts = np.unique(codes, return_counts=True)
        assert len(counts) == 6 and uniform_ok(counts)

    def test_bad_key(self):
        with pytest.raises(ValueError):
            ScrambleKey(1, -1)
        with pytest.raises(ValueError):
            ScrambleKey(1, 0, 6)


class TestOwen:
    def test_identity_source(self):
        x = to_digits(0.3, 2, 8)
        assert owen_scramble(x, 0, IdentitySource(2)) == x

    @pytest.mark.parametrize("b,W", [(2, 6), (3, 4)])
    def test_matches_stored_tree(self, b, W):
        src = PermutationSource(ScrambleKey(11, 2, b))
        # explicit permutation tree for coordinate 1, every prefix up to depth W-1
        tree = {p: src.lookup(1, p) for k in range(W) for p in itertools.product(range(b), repeat=k)}
        for xd in itertools.islice(itertools.product(range(b), repeat=W), 200):
            expected = tuple(tree[xd[:k]][xd[k]] for k in range(W))
            assert owen_scramble(DigitPoint(b, xd), 1, src).digits == expected

    def test_b2_is_xor(self):
        src = PermutationSource(ScrambleKey(5, 0, 2))
        x = to_digits(0.6, 2, 6)
        y = owen_scramble(x, 0, src)
        flips = [src.lookup(0, x.digits[:k])[0] for k in range(6)]
        assert y.digits == tuple(xi ^ c for xi, c in zip(x.digits, flips))

    def test_uniform_zero(self):
        x = DigitPoint.zero(2, 10)
        vals = [float(owen_scramble(x, 0, PermutationSource(ScrambleKey(s, 0, 2)))) for s in range(10_000)]
        counts = cell_counts(vals, 8)
        assert np.all(np.abs(counts - 1250) <= 4 * np.sqrt(10_000 * (1 / 8) * (7 / 8)))

    def test_depth_scrambles_tail(self):
        key = ScrambleKey(3, 0, 2, depth=20)
        y = owen_scramble(DigitPoint.zero(2, 4), 0, PermutationSource(key))
        assert y.precision == 20 and any(y.digits[4:])

    def test_base_mismatch(self):
        with pytest.raises(ValueError):
            owen_scramble(DigitPoint.zero(3, 2), 0, PermutationSource(ScrambleKey(1, 0, 2)))


class TestScrambleNet:
    def test_identity(self):
        net = generate_net(builtin_matrices("sobol", 2, 2, 4))
        np.testing.assert_array_equal(scramble_net(net, IdentitySource(2)).digits, net.digits)

    def test_vdc_keeps_net(self):
        net = generate_net(builtin_matrices("vdc", 2, 1, 3))
        for seed in range(20):
            out = scramble_net(net, PermutationSource(ScrambleKey(seed, 0, 2, depth=12)))
            assert verify_net(out, 0)[0]

    def test_shared_tree(self):
        net = generate_net(builtin_matrices("sobol", 2, 2, 3))
        src = PermutationSource(ScrambleKey(9, 0, 2))
        out = scramble_net(net, src)
        for n in range(8):
            for i in range(2):
                assert out.point(n)[i] == owen_scramble(net.point(n)[i], i, src)

    def test_replications_differ(self):
        net = generate_net(builtin_matrices("sobol", 2, 2, 6))
        a = scramble_net(net, PermutationSource(ScrambleKey(1, 0, 2, depth=20)))
        b = scramble_net(net, PermutationSource(ScrambleKey(1, 1, 2, depth=20)))
        assert not np.array_equal(a.digits, b.digits)

    @pytest.mark.parametrize("name,b,s,m", [("sobol", 2, 4, 8), ("faure", 3, 3, 5)])
    def test_keeps_t(self, name, b, s, m):
        G = builtin_matrices(name, b, s, m)
        t = t_value(G)
        net = generate_net(G)
        for seed in range(5):
            assert verify_net(scramble_net(net, PermutationSource(ScrambleKey(seed, 0, b, depth=m + 3))), t)[0]
            assert verify_net(linear_scramble_net(net, ScrambleKey(seed, 0, b, depth=m + 3)), t)[0]


class TestOrderD:
    def test_d1_is_owen(self):
        src = PermutationSource(ScrambleKey(4, 0, 3))
        ys = [to_digits(0.2, 3, 6), to_digits(0.7, 3, 6)]
        assert order_d_scramble(ys, 1, src) == [owen_scramble(y, i, src) for i, y in enumerate(ys)]

    def test_identity(self):
        ys = [to_digits(0.45, 2, 8)]
        assert order_d_scramble(ys, 2, IdentitySource(2)) == ys

    def test_uniform_d2(self):
        y = [to_digits(0.3, 2, 8)]
        vals = [float(order_d_scramble(y, 2, PermutationSource(ScrambleKey(s, 0, 2)))[0]) for s in range(10_000)]
        assert uniform_ok(cell_counts(vals, 4))


class TestLinear:
    def test_identity_parts(self):
        dg = np.array([[1, 0, 1, 1]])
        L, e = np.eye(4, dtype=int), np.zeros(4, dtype=int)
        assert ((dg @ L.T + e) % 2).tolist() == dg.tolist()

    def test_structure(self):
        L, e = _linear_parts(ScrambleKey(2, 1, 3), 0, 6)
        assert np.all(np.triu(L, 1) == 0) and np.all(np.diag(L) != 0)
        assert e.shape == (6,)

    def test_reproducible(self):
        x = to_digits(0.3, 3, 8)
        k = ScrambleKey(5, 2, 3)
        assert linear_scramble(x, 1, k) == linear_scramble(x, 1, k)

    def test_uniform(self):
        x = to_digits(0.3, 3, 6)
        vals = [float(linear_scramble(x, 0, ScrambleKey(s, 0, 3))) for s in range(4000)]
        assert uniform_ok(cell_counts(vals, 9))

    def test_vectorized_matches_point(self):
        k = ScrambleKey(8, 0, 2)
        dg = np.random.default_rng(0).integers(0, 2, size=(4, 10))
        out = linear_scramble_digits(dg, 3, k)
        for row, o in zip(dg, out):
            assert linear_scramble(DigitPoint(2, tuple(row)), 3, k).digits == tuple(o)
