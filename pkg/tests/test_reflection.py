import itertools

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from riscap.channel import (ArrayGeometry, NotRowSparseError, PathDescriptor, VirtualChannel,
                            build_virtual_channel, dft_matrix)
from riscap.direct import LinkBudget
from riscap.reflection import (BeamPair, NoReflectableBeamError, ReflectionError, RISEncoding,
                               SubarrayVanishedError, best_rank1_reflection, cyclic_shift_matrix,
                               pair_beams, quantize_phases, shared_beams, shift_phase_param,
                               subarray_element_counts, synthesize_phase_vector,
                               verify_reflection_gain)

from conftest import random_row_sparse

TWO_PI = 2 * np.pi


def _single(shape, i, k, value):
    m = np.zeros(shape, dtype=complex)
    m[i, k] = value
    return VirtualChannel(m)


def _exhaustive_best_gain(h1, h2):
    best = 0.0
    col_energy = np.sum(np.abs(h2) ** 2, axis=0)
    for i, k, k2 in itertools.product(range(h1.shape[0]), range(h1.shape[1]), range(h2.shape[1])):
        best = max(best, abs(h1[i, k]) ** 2 * col_energy[k2])
    return best


def _permutation_channel(rng, n_rows, n_cols, n_paths):
    """On-grid channel with distinct AOAs and AODs (one entry per row and column)."""
    rows = rng.choice(n_rows, n_paths, replace=False)
    cols = rng.choice(n_cols, n_paths, replace=False)
    m = np.zeros((n_rows, n_cols), dtype=complex)
    m[rows, cols] = rng.uniform(0.3, 2, n_paths) * np.exp(1j * rng.uniform(0, TWO_PI, n_paths))
    return m


class TestShiftEncoding:
    @pytest.mark.parametrize("n_s,n_c", [(4, 0), (4, 1), (8, 3), (16, 15), (64, 9), (64, -5),
                                         (12, 30)])
    def test_dft_diagonalizes_cyclic_shift(self, n_s, n_c):
        f = dft_matrix(n_s)
        d = f @ cyclic_shift_matrix(n_s, n_c) @ f.conj().T
        phi = -TWO_PI * n_c / n_s
        assert np.allclose(d, np.diag(np.exp(1j * phi * np.arange(n_s))), atol=1e-12)

    def test_shift_moves_beam_index(self):
        x = np.zeros(8)
        x[2] = 1
        assert np.argmax(cyclic_shift_matrix(8, 3) @ x) == 5
        assert np.argmax(cyclic_shift_matrix(8, -3) @ x) == 7

    @pytest.mark.parametrize("shift,n", [(1, 4), (-1, 4), (9, 8), (0, 5)])
    def test_phase_param_reduces_mod_n(self, shift, n):
        assert shift_phase_param(shift, n) == pytest.approx(-TWO_PI * (shift % n) / n)


class TestPhaseSynthesis:
    def test_mirror(self):
        assert np.allclose(synthesize_phase_vector(RISEncoding([1.0], [0.0], 4)), 1)

    def test_dft_column(self):
        v = synthesize_phase_vector(RISEncoding([1.0], [-TWO_PI / 4], 4))
        assert np.allclose(v, np.exp(-1j * np.array([0, np.pi / 2, np.pi, 3 * np.pi / 2])))

    def test_two_subarrays_compose(self):
        phis = [0.3, -1.1]
        v = synthesize_phase_vector(RISEncoding([0.5, 0.5], phis, 8))
        parts = [synthesize_phase_vector(RISEncoding([1.0], [p], 4)) for p in phis]
        assert np.allclose(v, np.concatenate(parts))

    @given(st.lists(st.floats(0.05, 1.0), min_size=1, max_size=5),
           st.integers(16, 128), st.integers(0, 2 ** 31))
    def test_unit_modulus_and_subarray_starts(self, raw, n_s, seed):
        sizes = np.array(raw) / np.sum(raw)
        assume(np.all(np.floor(sizes * n_s + 1e-9) >= 1))
        rng = np.random.default_rng(seed)
        phis = rng.uniform(-np.pi, np.pi, sizes.size)
        enc = RISEncoding(sizes, phis, n_s)
        v = synthesize_phase_vector(enc)
        assert v.size == n_s
        assert np.allclose(np.abs(v), 1)
        starts = np.cumsum([0] + list(enc.counts[:-1]))
        assert np.allclose(v[starts], 1)

    def test_counts_floor_and_remainder(self):
        assert subarray_element_counts([0.5, 0.3, 0.2], 10) == [5, 3, 2]
        assert subarray_element_counts([0.34, 0.33, 0.33], 10) == [3, 3, 4]
        assert subarray_element_counts([0.6, 0.4, 0.0], 7) == [4, 3, 0]

    def test_vanished_subarray_rejected(self):
        with pytest.raises(SubarrayVanishedError):
            RISEncoding([0.05, 0.95], [0, 0], 10)
        # The last active subarray absorbs the remainder instead of vanishing.
        assert RISEncoding([0.95, 0.05], [0, 0], 10).counts == (9, 1)

    @pytest.mark.parametrize("sizes", [[0.5, 0.6], [1.2, -0.2]])
    def test_encoding_validates_simplex(self, sizes):
        with pytest.raises(ReflectionError):
            RISEncoding(sizes, [0, 0], 8)


class TestQuantize:
    def test_one_bit(self):
        assert np.allclose(quantize_phases([np.exp(0.1j)], 1), [1])

    @given(st.lists(st.floats(-np.pi, np.pi), min_size=1, max_size=20))
    def test_fine_quantizer(self, angles):
        z = np.exp(1j * np.array(angles))
        out = quantize_phases(z, 30)
        assert np.all(np.abs(np.angle(out * z.conj())) < 1e-8)

    @given(st.lists(st.floats(-np.pi, np.pi), min_size=1, max_size=20), st.integers(1, 6))
    def test_against_argmin(self, angles, bits):
        z = np.exp(1j * np.array(angles))
        out = quantize_phases(z, bits)
        points = np.exp(1j * TWO_PI * np.arange(2 ** bits) / 2 ** bits)
        for zi, oi in zip(z, out):
            dist = np.abs(np.angle(points * np.conj(zi)))
            # Nearest point up to exact ties.
            assert abs(np.angle(oi * np.conj(zi))) <= dist.min() + 1e-12
            assert abs(abs(oi) - 1) < 1e-12
            assert np.abs(points - oi).min() < 1e-9
            assert abs(np.angle(oi * np.conj(zi))) <= np.pi / 2 ** bits + 1e-12

    def test_two_bits_land_on_axes(self, rng):
        out = quantize_phases(np.exp(1j * rng.uniform(-np.pi, np.pi, 50)), 2)
        axes = np.array([1, 1j, -1, -1j])
        assert all(np.abs(axes - o).min() < 1e-12 for o in out)

    def test_rejects_zero_bits(self):
        with pytest.raises(ValueError):
            quantize_phases([1.0], 0)


class TestBeamSelection:
    def test_unique_candidates(self):
        h1 = _single((8, 4), 3, 1, 2.0)
        m2 = np.zeros((6, 8))
        m2[0, 4], m2[1, 4] = np.sqrt(5.0), 2.0
        pair = best_rank1_reflection(h1, VirtualChannel(m2))
        assert (pair.incident_row, pair.tx_col, pair.outgoing_col) == (3, 1, 4)
        assert pair.gain == pytest.approx(36.0)
        assert pair.shift == 1

    def test_identity_tie_break(self):
        pair = best_rank1_reflection(VirtualChannel(np.eye(4)), VirtualChannel(np.eye(4)))
        assert (pair.incident_row, pair.tx_col, pair.outgoing_col) == (0, 0, 0)
        assert pair.gain == pytest.approx(1.0) and pair.shift == 0

    @pytest.mark.parametrize("which", [0, 1])
    def test_all_zero_leg(self, which):
        legs = [VirtualChannel(np.eye(4)), VirtualChannel(np.eye(4))]
        legs[which] = VirtualChannel(np.zeros((4, 4)))
        with pytest.raises(NoReflectableBeamError):
            best_rank1_reflection(*legs)

    @given(st.integers(0, 2 ** 31), st.integers(2, 6), st.integers(2, 6), st.integers(2, 6))
    def test_best_gain_is_exhaustive_max(self, seed, n_t, n_s, n_r):
        rng = np.random.default_rng(seed)
        m1, m2 = random_row_sparse(rng, n_s, n_t), random_row_sparse(rng, n_r, n_s)
        assume(np.abs(m1).max() > 0 and np.abs(m2).max() > 0)
        pair = best_rank1_reflection(VirtualChannel(m1), VirtualChannel(m2))
        assert pair.gain == pytest.approx(_exhaustive_best_gain(m1, m2), rel=1e-12)

    def test_snr_normalization(self):
        budget = LinkBudget(noise_power=0.5, total_power=2.0)
        pair = best_rank1_reflection(VirtualChannel(2 * np.eye(3)), VirtualChannel(np.eye(3)),
                                     budget)
        assert pair.snr_normalized == pytest.approx(pair.gain * 4.0)


class TestPairBeams:
    def test_sort_and_zip(self):
        m1 = np.zeros((6, 3))
        m1[0, 0], m1[1, 1] = 2.0, 1.0
        m2 = np.zeros((4, 6))
        m2[0, 5], m2[1, 2] = 3.0, 1.0
        pairs = pair_beams(VirtualChannel(m1), VirtualChannel(m2))
        assert [(p.incident_row, p.tx_col, p.outgoing_col) for p in pairs] == [(0, 0, 5), (1, 1, 2)]
        assert [p.gain for p in pairs] == pytest.approx([36.0, 1.0])

    def test_equal_magnitudes_break_by_row(self):
        m1 = np.zeros((4, 4))
        m1[3, 0], m1[1, 2], m1[2, 1] = 1.0, 1.0, 1.0
        pairs = pair_beams(VirtualChannel(m1), VirtualChannel(np.eye(4)))
        assert [p.incident_row for p in pairs] == [1, 2, 3]
        assert [p.outgoing_col for p in pairs] == [0, 1, 2]

    def test_length_is_min_of_counts(self):
        m1 = np.diag([3.0, 2.0, 1.0, 0.0])
        m2 = np.zeros((4, 4))
        m2[0, 1] = 1.0
        assert len(pair_beams(VirtualChannel(m1), VirtualChannel(m2))) == 1

    def test_dimension_mismatch(self):
        with pytest.raises(ReflectionError):
            pair_beams(VirtualChannel(np.eye(4)), VirtualChannel(np.eye(5)))

    def test_requires_row_sparse(self):
        with pytest.raises(NotRowSparseError):
            pair_beams(VirtualChannel(np.ones((3, 3))), VirtualChannel(np.eye(3)))

    @given(st.integers(0, 2 ** 31))
    def test_random_matches_sort_and_zip_oracle(self, seed):
        rng = np.random.default_rng(seed)
        m1, m2 = random_row_sparse(rng, 6, 6), random_row_sparse(rng, 6, 6)
        pairs = pair_beams(VirtualChannel(m1), VirtualChannel(m2))
        a = sorted(np.abs(m1[np.abs(m1) > 0]), reverse=True)
        b = sorted(np.linalg.norm(m2, axis=0)[np.linalg.norm(m2, axis=0) > 0], reverse=True)
        expected = [x * x * y * y for x, y in zip(a, b)]
        assert len(pairs) == len(expected)
        assert np.allclose([p.gain for p in pairs], expected, rtol=1e-12)
        gains = [p.gain for p in pairs]
        assert all(g1 >= g2 for g1, g2 in zip(gains, gains[1:]))
        for p in pairs:
            assert p.gain == pytest.approx(
                np.linalg.norm(m2[:, p.outgoing_col]) ** 2 * abs(m1[p.incident_row, p.tx_col]) ** 2)

    @given(st.integers(0, 2 ** 31), st.floats(0.01, 100.0), st.booleans())
    def test_pairing_invariant_under_scaling(self, seed, c, scale_first):
        rng = np.random.default_rng(seed)
        m1, m2 = random_row_sparse(rng, 7, 5), random_row_sparse(rng, 6, 7)
        base = pair_beams(VirtualChannel(m1), VirtualChannel(m2))
        if scale_first:
            scaled = pair_beams(VirtualChannel(c * m1), VirtualChannel(m2))
        else:
            scaled = pair_beams(VirtualChannel(m1), VirtualChannel(c * m2))
        key = lambda ps: [(p.incident_row, p.tx_col, p.outgoing_col, p.shift) for p in ps]
        assert key(base) == key(scaled)
        assert np.allclose([p.gain for p in scaled], [c * c * p.gain for p in base], rtol=1e-12)


class TestVerifyGain:
    def _on_grid(self, n_t=8, n_s=32, n_r=8, tx=2, i1=5, k2=19, rx=3, b1=1.5, b2=0.8j):
        h1 = build_virtual_channel([PathDescriptor.on_grid(b1, tx, n_t, i1, n_s)],
                                   ArrayGeometry(n_t), ArrayGeometry(n_s))
        h2 = build_virtual_channel([PathDescriptor.on_grid(b2, k2, n_s, rx, n_r)],
                                   ArrayGeometry(n_s), ArrayGeometry(n_r))
        return h1, h2

    def test_aligned_matches_analytic(self):
        h1, h2 = self._on_grid()
        pair = best_rank1_reflection(h1, h2)
        assert pair.shift == 14
        measured = verify_reflection_gain(h1, h2, pair, 32)
        assert measured == pytest.approx(pair.gain, rel=1e-9)
        assert pair.gain == pytest.approx(1.5 ** 2 * 0.8 ** 2)

    def test_negative_shift(self):
        h1, h2 = self._on_grid(i1=20, k2=3)
        pair = best_rank1_reflection(h1, h2)
        assert pair.shift == -17
        assert verify_reflection_gain(h1, h2, pair, 32) == pytest.approx(pair.gain, rel=1e-9)

    def test_misaligned_shift_misses(self):
        h1, h2 = self._on_grid()
        pair = best_rank1_reflection(h1, h2)
        assert verify_reflection_gain(h1, h2, pair, 32, shift=pair.shift + 1) < 1e-9 * pair.gain

    def test_dimension_mismatch(self):
        h1, h2 = self._on_grid()
        with pytest.raises(ReflectionError):
            verify_reflection_gain(h1, h2, best_rank1_reflection(h1, h2), 16)

    @given(st.integers(0, 2 ** 31), st.integers(1, 5))
    def test_random_on_grid_pairs(self, seed, n_paths):
        rng = np.random.default_rng(seed)
        n_t, n_s, n_r = 8, 16, 8
        m1 = _permutation_channel(rng, n_s, n_t, n_paths)
        m2 = random_row_sparse(rng, n_r, n_s, density=0.9)
        h1, h2 = VirtualChannel(m1), VirtualChannel(m2)
        assume(np.abs(m2).max() > 0)
        for pair in pair_beams(h1, h2):
            # The full product delivers every incident beam of the TX column;
            # with one entry per column that is exactly the paired beam.
            assert verify_reflection_gain(h1, h2, pair, n_s) == pytest.approx(pair.gain, rel=1e-9)


class TestComposite:
    def test_reflected_and_direct_tx_directions_orthogonal(self):
        n_t, n_s, n_r = 8, 16, 8
        g = ArrayGeometry
        h1 = build_virtual_channel([PathDescriptor.on_grid(1.0, 1, n_t, 4, n_s),
                                    PathDescriptor.on_grid(0.5, 2, n_t, 9, n_s)], g(n_t), g(n_s))
        h2 = build_virtual_channel([PathDescriptor.on_grid(1.0, 3, n_s, 0, n_r),
                                    PathDescriptor.on_grid(0.7, 11, n_s, 1, n_r)], g(n_s), g(n_r))
        hd = build_virtual_channel([PathDescriptor.on_grid(2.0, 0, n_t, 5, n_r),
                                    PathDescriptor.on_grid(1.0, 6, n_t, 7, n_r)], g(n_t), g(n_r))
        assert shared_beams(h1, h2, hd) == ([], [])
        f = dft_matrix(n_t)
        direct_cols = np.flatnonzero(hd.column_norms() > hd.threshold)
        for pair in pair_beams(h1, h2):
            for k in direct_cols:
                assert abs(np.vdot(f[:, pair.tx_col], f[:, k])) < 1e-12

    def test_shared_beams_detected(self):
        h = VirtualChannel(np.eye(4))
        assert shared_beams(h, h, h) == ([0, 1, 2, 3], [0, 1, 2, 3])
