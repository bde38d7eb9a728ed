import tracemalloc
from collections.abc import Mapping
from fractions import Fraction

import ml_dtypes
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from safetensors.numpy import load_file, save_file

from ocrtoolkit.exceptions import ConfigError, DataError, MergeError
from ocrtoolkit.merge import (MergeSpec, TensorArchive, alpha_sweep, load_archive, save_archive, soup,
                              task_arithmetic)

BF16 = np.dtype(ml_dtypes.bfloat16)
FLOATS = [np.float16, BF16, np.float32, np.float64]


def arc(**tensors):
    return TensorArchive({k: np.asarray(v) for k, v in tensors.items()})


def mat(a):
    return {k: np.asarray(v) for k, v in a.materialize().items()}


def exact_mean(values):
    return float(sum(Fraction(float(v)) for v in values) / len(values))


def ulps(got, want, dtype):
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    spacing = np.spacing(np.abs(want).astype(dtype)).astype(np.float64)
    spacing = np.maximum(spacing, np.finfo(dtype).smallest_subnormal if dtype is not BF16 else 2.0 ** -133)
    return np.abs(got - want) / spacing


class TestSoup:
    def test_singleton_exact(self):
        a = arc(w=np.array([0.1, -3.5], np.float32), n=np.array([1, 2], np.int64))
        out = mat(soup([a]))
        assert out["w"].tobytes() == a["w"].tobytes() and out["n"].tolist() == [1, 2]

    def test_example(self):
        out = mat(soup([arc(w=np.array([1.0, 2.0], np.float32)), arc(w=np.array([3.0, 6.0], np.float32))]))
        assert out["w"].tolist() == [2.0, 4.0] and out["w"].dtype == np.float32

    @pytest.mark.parametrize("dtype", FLOATS)
    def test_identical_inputs(self, dtype):
        x = np.random.default_rng(0).normal(size=257).astype(dtype)
        out = mat(soup([arc(w=x)] * 3))["w"]
        assert out.dtype == x.dtype and ulps(out, x, dtype).max() <= 1

    @pytest.mark.parametrize("dtype", FLOATS)
    def test_against_exact_mean(self, dtype):
        rng = np.random.default_rng(1)
        xs = [rng.normal(size=64).astype(dtype) for _ in range(5)]
        out = mat(soup([arc(w=x) for x in xs]))["w"]
        want = [exact_mean(col) for col in zip(*xs)]
        assert ulps(out, want, dtype).max() <= 1

    @given(st.permutations(range(5)))
    def test_permutation_bit_exact(self, perm):
        rng = np.random.default_rng(2)
        archives = [arc(a=rng.normal(size=33).astype(np.float32), b=rng.normal(size=7).astype(np.float16))
                    for _ in range(5)]
        ref = mat(soup(archives))
        out = mat(soup([archives[i] for i in perm]))
        assert all(out[k].tobytes() == ref[k].tobytes() for k in ref)

    def test_weighted(self):
        out = mat(soup([arc(w=np.array([0.0])), arc(w=np.array([4.0]))], weights=[3, 1]))
        assert out["w"].tolist() == [1.0]

    def test_weights_validated(self):
        with pytest.raises(ConfigError):
            soup([arc(w=np.zeros(1))], weights=[1, 2])
        with pytest.raises(ConfigError):
            soup([arc(w=np.zeros(1))], weights=[-1])
        with pytest.raises(ConfigError):
            soup([])

    def test_structure_errors_name_first_tensor(self):
        a = arc(a=np.zeros(2, np.float32), b=np.zeros(2, np.float32), c=np.zeros(2, np.float32))
        b = arc(a=np.zeros(2, np.float32), b=np.zeros(3, np.float32), c=np.zeros(2, np.float16))
        with pytest.raises(MergeError) as exc:
            soup([a, b])
        assert exc.value.tensor == "b"
        with pytest.raises(MergeError) as exc:
            soup([a, arc(a=np.zeros(2, np.float32))])
        assert exc.value.tensor == "b"

    def test_integer_passthrough(self):
        a = arc(i=np.array([1, 2], np.int32))
        assert mat(soup([a, a]))["i"].tolist() == [1, 2]
        with pytest.raises(MergeError):
            mat(soup([a, arc(i=np.array([1, 3], np.int32))]))

    def test_structure_preserved(self):
        a = arc(x=np.zeros((2, 3), np.float16), y=np.zeros((), BF16), z=np.zeros(4, np.bool_))
        out = soup([a, a])
        assert {k: out.spec(k) for k in out} == {k: a.spec(k) for k in a}


class TestTaskArithmetic:
    def test_example(self):
        base, other = arc(w=np.array([1.0, 2.0])), arc(w=np.array([3.0, 6.0]))
        out = mat(task_arithmetic(MergeSpec(base, other, 0.4)))["w"]
        assert out == pytest.approx([1.8, 3.6], abs=1e-15)

    @pytest.mark.parametrize("dtype", FLOATS)
    def test_boundaries(self, dtype):
        rng = np.random.default_rng(3)
        b, o = rng.normal(size=50).astype(dtype), rng.normal(size=50).astype(dtype)
        zero = mat(task_arithmetic(MergeSpec(arc(w=b), arc(w=o), 0.0)))["w"]
        one = mat(task_arithmetic(MergeSpec(arc(w=b), arc(w=o), 1.0)))["w"]
        assert zero.tobytes() == b.tobytes()
        assert ulps(one, o, dtype).max() <= 1

    @pytest.mark.parametrize("alpha", [-0.1, 1.5, float("nan")])
    def test_alpha_range(self, alpha):
        with pytest.raises(ConfigError):
            MergeSpec(arc(), arc(), alpha)

    @pytest.mark.parametrize("dtype", FLOATS)
    @given(alpha=st.floats(0, 1))
    def test_linearity(self, dtype, alpha):
        rng = np.random.default_rng(4)
        b, o = rng.uniform(-4, 4, 40).astype(dtype), rng.uniform(-4, 4, 40).astype(dtype)
        x = mat(task_arithmetic(MergeSpec(arc(w=b), arc(w=o), alpha)))["w"]
        y = mat(task_arithmetic(MergeSpec(arc(w=b), arc(w=o), 1 - alpha)))["w"]
        unit = np.maximum(np.spacing(np.abs(x)), np.spacing(np.abs(y))).astype(np.float64)
        # 1 - alpha is itself rounded; compare against the exact value for the pair actually used
        slack = Fraction(alpha) + Fraction(1 - alpha) - 1
        for xi, yi, bi, oi, u in zip(x, y, b, o, unit):
            bi, oi = Fraction(float(bi)), Fraction(float(oi))
            err = abs(Fraction(float(xi)) + Fraction(float(yi)) - (bi + oi + slack * (oi - bi)))
            assert err <= 2 * Fraction(float(u))

    @given(st.floats(0, 1), st.sampled_from(FLOATS))
    def test_equal_inputs_fixed(self, alpha, dtype):
        a = np.array([0.0, -0.0, 1.5, np.inf, -np.inf, 65504.0], dtype)
        out = mat(task_arithmetic(MergeSpec(arc(w=a), arc(w=a), alpha)))["w"]
        assert out.tobytes() == a.tobytes()

    def test_metadata_and_name(self):
        out = task_arithmetic(MergeSpec(arc(w=np.zeros(1)), arc(w=np.ones(1)), 0.4))
        assert out.name == "alpha_0.4" and out.metadata["alpha"] == "0.4"


class TestSweep:
    def test_endpoints(self):
        base, other = arc(w=np.array([1.0, 2.0])), arc(w=np.array([3.0, 6.0]))
        outs = [mat(a)["w"].tolist() for a in alpha_sweep(base, other, [0, 1])]
        assert outs == [[1.0, 2.0], [3.0, 6.0]]

    def test_scalars(self):
        outs = alpha_sweep(arc(w=np.array([0.0])), arc(w=np.array([4.0])), [0.25, 0.5, 0.75])
        assert [mat(a)["w"].tolist() for a in outs] == [[1.0], [2.0], [3.0]]
        assert [a.name for a in outs] == ["alpha_0.25", "alpha_0.5", "alpha_0.75"]

    def test_empty(self):
        assert alpha_sweep(arc(), arc(), []) == []

    def test_validates_all_before_work(self):
        with pytest.raises(ConfigError):
            alpha_sweep(arc(w=np.zeros(1)), arc(w=np.zeros(1)), [0.1, 2.0])


class TestArchiveFormat:
    def sample(self):
        rng = np.random.default_rng(5)
        return {
            "emb": rng.normal(size=(4, 3)).astype(np.float32),
            "half": rng.normal(size=5).astype(np.float16),
            "bf": rng.normal(size=(2, 2)).astype(BF16),
            "idx": np.arange(6, dtype=np.int64),
            "mask": np.array([True, False]),
            "scalar": np.asarray(np.float64(2.5)),
            "empty": np.zeros((0, 3), np.float32),
        }

    def test_bytes_match_reference_writer(self, tmp_path):
        t = self.sample()
        save_file({k: v for k, v in t.items() if v.dtype != BF16}, str(tmp_path / "ref.safetensors"))
        save_archive(TensorArchive({k: v for k, v in t.items() if v.dtype != BF16}), tmp_path / "ours.safetensors")
        assert (tmp_path / "ref.safetensors").read_bytes() == (tmp_path / "ours.safetensors").read_bytes()

    def test_reference_reader_loads_ours(self, tmp_path):
        t = self.sample()
        save_archive(TensorArchive(t), tmp_path / "a.safetensors", metadata={"k": "v"})
        loaded = load_file(str(tmp_path / "a.safetensors"))
        for k, v in t.items():
            assert loaded[k].tobytes() == v.tobytes() and loaded[k].shape == v.shape

    def test_round_trip(self, tmp_path):
        t = self.sample()
        save_archive(TensorArchive(t, {"b": 2, "a": 1}), tmp_path / "a.safetensors")
        back = load_archive(tmp_path / "a.safetensors")
        assert back.metadata == {"a": "1", "b": "2"}
        for k, v in t.items():
            assert back[k].dtype == v.dtype and back[k].tobytes() == v.tobytes()

    def test_header_alignment(self, tmp_path):
        save_archive(TensorArchive({"x": np.zeros(1, np.float32)}), tmp_path / "a.safetensors")
        n = int.from_bytes((tmp_path / "a.safetensors").read_bytes()[:8], "little")
        assert n % 8 == 0

    @pytest.mark.parametrize("blob", [b"", b"\x05\x00", (10**9).to_bytes(8, "little") + b"{}",
                                      (2).to_bytes(8, "little") + b"[]",
                                      (48).to_bytes(8, "little") + b'{"x":{"dtype":"F32","shape":[2],"data_offsets":[0,4]}}'])
    def test_corrupt(self, tmp_path, blob):
        p = tmp_path / "bad.safetensors"
        p.write_bytes(blob)
        with pytest.raises(DataError):
            load_archive(p)

    def test_workers_do_not_change_bytes(self, tmp_path):
        rng = np.random.default_rng(6)
        archives = [TensorArchive({f"t{i:03d}": rng.normal(size=50).astype(np.float32) for i in range(40)})
                    for _ in range(3)]
        save_archive(soup(archives), tmp_path / "w1.safetensors", workers=1)
        save_archive(soup(archives), tmp_path / "w4.safetensors", workers=4)
        assert (tmp_path / "w1.safetensors").read_bytes() == (tmp_path / "w4.safetensors").read_bytes()


class _Generated(Mapping):
    """Tensors synthesized on access, so inputs never sit in memory."""

    def __init__(self, n, size, seed):
        self.n, self.size, self.seed = n, size, seed

    def spec(self, key):
        return "F32", (self.size,)

    def __getitem__(self, key):
        i = int(key[1:])
        return np.full(self.size, self.seed + i, np.float32)

    def __iter__(self):
        return (f"t{i:03d}" for i in range(self.n))

    def __len__(self):
        return self.n


def test_soup_streams_tensor_by_tensor(tmp_path):
    n, size = 60, 100_000  # 400 KB per tensor, 24 MB per input
    inputs = [TensorArchive(_Generated(n, size, s)) for s in range(3)]
    tracemalloc.start()
    try:
        save_archive(soup(inputs), tmp_path / "s.safetensors")
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    # one tensor per input plus wide temporaries, far below the 72 MB of inputs
    assert peak < 6 * len(inputs) * size * 8
    out = load_archive(tmp_path / "s.safetensors")
    assert out["t007"][0] == 8.0
