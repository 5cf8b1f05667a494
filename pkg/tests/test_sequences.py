import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import qmc

from mlqmc import sequences as seq
from mlqmc.sequences import DigitalNetGen, LatticeGen, LdDataError, Shift

KINDS = ("lattice", "net")


def test_radical_inverse_examples():
    assert seq.radical_inverse(0) == 0.0
    assert seq.radical_inverse(1) == 0.5
    assert seq.radical_inverse(6) == 0.375
    np.testing.assert_array_equal(seq.radical_inverse(np.arange(4)), [0, 0.5, 0.25, 0.75])


def test_radical_inverse_integer_form():
    assert seq.radical_inverse(1, bits=52) == np.uint64(1) << np.uint64(51)
    with pytest.raises(ValueError):
        seq.radical_inverse(8, bits=3)
    with pytest.raises(ValueError):
        seq.radical_inverse(-1)


@given(st.integers(0, 2 ** 40))
def test_radical_inverse_is_bit_reversal(i):
    m = max(1, i.bit_length())
    rev = int(format(i, f"0{m}b")[::-1], 2)
    assert seq.radical_inverse(i) == rev / 2 ** m


def test_lattice_examples():
    gen = LatticeGen([1, 3])
    np.testing.assert_array_equal(seq.lattice_points(gen, None, 0, 2), [[0, 0], [0.5, 0.5]])
    sh = Shift.from_floats([0.2, 0.2], 52)
    x = seq.lattice_points(gen, sh, 1, 2)[0]
    np.testing.assert_allclose(x, [0.7, 0.7], atol=1e-15)


def test_lattice_shift_dimension_mismatch():
    with pytest.raises(ValueError):
        seq.lattice_points(LatticeGen([1, 3]), Shift.zeros(3, 52), 0, 2)


def test_net_identity_matrices_give_van_der_corput():
    t = 10
    gen = DigitalNetGen([[2 ** (t - 1 - p) for p in range(t)]], t)
    np.testing.assert_array_equal(seq.digital_net_points(gen, None, 0, 4)[:, 0], [0, 0.5, 0.25, 0.75])


def test_net_limits():
    gen = seq.default_net(2)
    with pytest.raises(ValueError):
        seq.digital_net_points(gen, None, 0, 2 ** gen.p_max + 1)


def test_net_matches_scipy_sobol():
    gen = seq.default_net(8)
    ours = seq.digital_net_points(gen, None, 0, 256)
    ref = qmc.Sobol(8, scramble=False).random(256)
    # scipy emits Gray-code order; the point sets agree
    assert sorted(map(tuple, ours)) == sorted(map(tuple, ref))


@given(st.integers(0, 2 ** 12 - 1))
def test_net_shift_by_own_digits_gives_zero(i):
    gen = seq.default_net(5)
    z = seq.digital_net_ints(gen, None, i, i + 1)[0]
    x = seq.digital_net_ints(gen, Shift(z, gen.t), i, i + 1)[0]
    assert not x.any()


def test_net_direct_definition():
    gen = seq.default_net(4)
    idx = [0, 1, 2, 7, 100, 1023]
    z = seq.digital_net_ints(gen, None, 0, 1024)
    for i in idx:
        acc = np.zeros(4, dtype=np.uint64)
        for p in range(gen.p_max):
            if i >> p & 1:
                acc ^= gen.columns[:, p]
        np.testing.assert_array_equal(z[i], acc)


@given(kind=st.sampled_from(KINDS), m=st.integers(0, 9), d=st.integers(1, 6), seed=st.integers(0, 2 ** 32))
def test_extensibility(kind, m, d, seed):
    gen = seq.default_generator(kind, d)
    sh = Shift.random(d, gen.t, np.random.default_rng(seed))
    n = 2 ** m
    small = seq.points_ints(gen, sh, 0, n)
    big = seq.points_ints(gen, sh, 0, 2 * n)
    np.testing.assert_array_equal(big[:n], small)
    np.testing.assert_array_equal(seq.points_ints(gen, sh, n, 2 * n), big[n:])


@given(kind=st.sampled_from(KINDS), d=st.integers(1, 6), seed=st.integers(0, 2 ** 32))
def test_shift_cancellation(kind, d, seed):
    from mlqmc.kernels import difference
    gen = seq.default_generator(kind, d)
    sh = Shift.random(d, gen.t, np.random.default_rng(seed))
    x = seq.points_ints(gen, sh, 0, 64)
    z = seq.points_ints(gen, None, 0, 64)
    np.testing.assert_array_equal(difference(x, x[:1], kind, gen.t), z)


@pytest.mark.parametrize("m", range(0, 11))
def test_net_stratification(m):
    gen = seq.default_net(32)
    x = seq.digital_net_points(gen, None, 0, 2 ** m)
    cells = np.floor(x * 2 ** m).astype(int)
    for j in range(32):
        assert np.array_equal(np.sort(cells[:, j]), np.arange(2 ** m))


@given(seed=st.integers(0, 2 ** 32), m=st.integers(1, 10))
def test_lms_preserves_stratification(seed, m):
    gen = seq.lms_scramble(seq.default_net(6), np.random.default_rng(seed))
    assert gen.t == 52
    x = seq.digital_net_points(gen, None, 0, 2 ** m)
    cells = np.floor(x * 2 ** m).astype(int)
    for j in range(6):
        assert np.array_equal(np.sort(cells[:, j]), np.arange(2 ** m))


def test_lms_identity_and_determinism():
    gen = seq.default_net(3)
    eye = np.array([[1 << (gen.t - 1 - k) for k in range(gen.t)]] * 3, dtype=np.uint64)
    same = seq.apply_lms(gen, eye)
    np.testing.assert_array_equal(same.columns, gen.columns)
    a = seq.lms_scramble(gen, np.random.default_rng(5))
    b = seq.lms_scramble(gen, np.random.default_rng(5))
    np.testing.assert_array_equal(a.columns, b.columns)
    with pytest.raises(ValueError):
        seq.lms_matrices(3, 32, 16, np.random.default_rng(0))


def test_lms_matrices_are_unit_lower_triangular():
    rows = seq.lms_matrices(4, 8, 12, np.random.default_rng(1))
    for j in range(4):
        for k in range(12):
            r = int(rows[j, k])
            if k < 8:
                assert r >> (7 - k) & 1 == 1
                assert r & ((1 << (7 - k)) - 1) == 0
            assert r < 2 ** 8


def test_shift_smoke_mean():
    gen = seq.default_lattice(3)
    rng = np.random.default_rng(3)
    est = [np.mean(np.prod(seq.lattice_points(gen, Shift.random(3, 52, rng), 0, 64), axis=1))
           for _ in range(200)]
    assert abs(np.mean(est) - 1 / 8) < 3 * np.std(est) / np.sqrt(200) + 1e-12


def test_embedded_generators():
    lat = seq.default_lattice()
    net = seq.default_net()
    assert isinstance(lat, LatticeGen) and lat.d >= 32
    assert isinstance(net, DigitalNetGen) and net.p_max >= 21 and net.d >= 32
    with pytest.raises(LdDataError):
        seq.default_net(net.d + 1)


def test_parse_roundtrip_and_errors(tmp_path):
    f = tmp_path / "lat.txt"
    f.write_text("# a comment\nlattice 2 10\n1\n3  # trailing\n")
    gen = seq.parse_ld_data(f)
    np.testing.assert_array_equal(gen.g, [1, 3])
    assert gen.m_max == 10
    f.write_text("net 1 3 3\n4 2 1\n")
    net = seq.parse_ld_data(f)
    np.testing.assert_array_equal(seq.digital_net_points(net, None, 0, 4)[:, 0], [0, 0.5, 0.25, 0.75])
    bad = {
        "truncated": "lattice 3 10\n1\n3\n",
        "header": "sobol 2\n1\n1\n",
        "row length": "net 1 3 3\n4 2\n",
        "too wide": "net 1 1 3\n8\n",
        "not a number": "lattice 1 4\nabc\n",
        "empty": "# nothing\n",
    }
    for text in bad.values():
        f.write_text(text)
        with pytest.raises(LdDataError):
            seq.parse_ld_data(f)
    f.write_text("lattice 2 10\n1\n3\n")
    with pytest.raises(LdDataError):
        seq.parse_ld_data(f, d=3)


def test_type_invariants():
    with pytest.raises(ValueError):
        LatticeGen([0, 1])
    with pytest.raises(ValueError):
        DigitalNetGen([[8]], 3)
    with pytest.raises(ValueError):
        DigitalNetGen([[1]], 65)
    with pytest.raises(ValueError):
        Shift([8], 3)
    with pytest.raises(ValueError):
        Shift.from_floats([1.0], 10)
