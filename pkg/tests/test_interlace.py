from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest

from hosnet.badic import DigitPoint, to_digits, walsh
from hosnet.interlace import (
    InterlaceSpec,
    deinterlace_digits,
    deinterlace_index,
    deinterlace_point,
    image_membership,
    interlace_digits,
    interlace_index,
    interlace_point,
    interlaced_box_measure,
)


def grid(b, W):
    return [DigitPoint(b, d) for d in itertools.product(range(b), repeat=W)]


class TestPoints:
    def test_examples(self):
        x = to_digits(0.3, 2, 5)
        assert interlace_point([x]) == x
        y = interlace_point([to_digits(0.5, 2, 2), to_digits(0.25, 2, 2)])
        assert y.digits == (1, 0, 0, 1) and float(y) == 0.5625
        assert float(interlace_point([DigitPoint.zero(2, 3)] * 2)) == 0.0

    def test_precision_mismatch(self):
        with pytest.raises(ValueError):
            interlace_point([DigitPoint.zero(2, 3), DigitPoint.zero(2, 4)])
        with pytest.raises(ValueError):
            deinterlace_point(DigitPoint.zero(2, 5), 2)

    def test_deinterlace_trivial(self):
        x = to_digits(0.7, 3, 4)
        assert deinterlace_point(x, 1) == [x]
        assert deinterlace_point(DigitPoint.zero(2, 6), 3) == [DigitPoint.zero(2, 2)] * 3

    def test_round_trip_b2_d2_w4(self):
        for a, c in itertools.product(grid(2, 4), repeat=2):
            assert deinterlace_point(interlace_point([a, c]), 2) == [a, c]

    @pytest.mark.parametrize("b,d,W", [(2, 3, 3), (3, 2, 3), (3, 3, 2), (2, 2, 4)])
    def test_injective(self, b, d, W):
        seen = set()
        for xs in itertools.product(grid(b, W), repeat=d):
            y = interlace_point(list(xs))
            assert y not in seen
            seen.add(y)
        assert len(seen) == b ** (d * W)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(0)
        dg = rng.integers(0, 3, size=(5, 6, 4))
        woven = interlace_digits(dg, 3)
        for n in range(5):
            for i in range(2):
                xs = [DigitPoint(3, tuple(dg[n, 3 * i + r])) for r in range(3)]
                assert tuple(woven[n, i]) == interlace_point(xs).digits
        np.testing.assert_array_equal(deinterlace_digits(woven, 3), dg)

    def test_image_membership(self):
        assert image_membership(to_digits(0.9, 2, 6), 2)
        assert image_membership(to_digits(0.9, 2, 6), 1)


class TestIndex:
    def test_examples(self):
        assert interlace_index([0, 0], 2) == 0
        assert interlace_index([1, 2], 2) == 9
        assert interlace_index([1, 0], 2) == 1

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            interlace_index([-1, 0], 2)

    @pytest.mark.parametrize("b,d", [(2, 2), (3, 3), (5, 2)])
    def test_round_trip(self, b, d):
        for k in range(b**4):
            assert interlace_index(deinterlace_index(k, d, b), b) == k

    def test_wal9_identity(self):
        for x1, x2 in itertools.product(grid(2, 2), repeat=2):
            lhs = walsh(9, interlace_point([x1, x2]))
            assert lhs == (walsh(1, x1) + walsh(2, x2)) % 2

    @pytest.mark.parametrize("b,d", [(2, 2), (2, 3), (3, 2), (3, 3)])
    def test_walsh_compatibility_exhaustive(self, b, d):
        pts = grid(b, 2)
        for ks in itertools.product(range(b**2), repeat=d):
            k = interlace_index(list(ks), b)
            for xs in itertools.product(pts, repeat=d):
                lhs = walsh(k, interlace_point(list(xs)))
                assert lhs == sum(walsh(kr, xr) for kr, xr in zip(ks, xs)) % b


class TestSpec:
    def test_defaults(self):
        assert [InterlaceSpec(d).w_in for d in (1, 2, 3)] == [52, 26, 17]
        assert InterlaceSpec(2, w_in=10).w_out == 20

    def test_budget(self):
        with pytest.raises(ValueError):
            InterlaceSpec(2, w_in=27)


class TestMeasure:
    def test_bad_method(self):
        with pytest.raises(ValueError):
            interlaced_box_measure([(0, 1)], 2, "guess")

    def test_examples(self):
        assert interlaced_box_measure([(1, 1), (0, 0)], 2) == Fraction(1, 2)
        assert interlaced_box_measure([(0, 0), (0, 0)], 3) == 1

    @pytest.mark.parametrize("b,d", [(2, 2), (2, 3), (3, 2)])
    def test_preserved(self, b, d):
        budget = 6 if b == 2 else 4
        for nus in itertools.product(range(budget + 1), repeat=d):
            if sum(nus) > budget:
                continue
            cells = itertools.product(*[range(b**nu) for nu in nus])
            for a in itertools.islice(cells, 5):
                box = list(zip(a, nus))
                expected = Fraction(1, b ** sum(nus))
                assert interlaced_box_measure(box, b, "enumerate") == expected
                assert interlaced_box_measure(box, b) == expected
