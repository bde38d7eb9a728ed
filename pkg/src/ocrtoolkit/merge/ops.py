"""Checkpoint souping and task-arithmetic merging.

Outputs are lazy: each tensor is computed when it is read, so writing a merged
archive holds only one tensor per input in memory at a time.
"""
from __future__ import annotations

import hashlib
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .._validation import check_fraction
from ..exceptions import ConfigError, MergeError
from .archive import DTYPES, FLOAT_CODES, TensorArchive, load_archive

# 32-bit minimum, 64-bit for 32-bit inputs; 64-bit inputs add double-double terms
_WIDE = {"F16": np.float32, "BF16": np.float32, "F32": np.float64, "F64": np.float64}


class _LazyTensors(Mapping):
    def __init__(self, specs, compute):
        self._specs = specs
        self._compute = compute

    def spec(self, key):
        return self._specs[key]

    def __getitem__(self, key):
        if key not in self._specs:
            raise KeyError(key)
        return self._compute(key)

    def __iter__(self):
        return iter(self._specs)

    def __len__(self):
        return len(self._specs)


def _resolve(ref):
    if isinstance(ref, TensorArchive):
        return ref
    if isinstance(ref, (str, Path)):
        return load_archive(ref)
    if isinstance(ref, Mapping):
        return TensorArchive(dict(ref))
    raise TypeError(f"expected a TensorArchive or a path, got {type(ref).__name__}")


def _check_structure(archives):
    """Return ``{name: (code, shape)}`` or raise naming the first mismatching tensor."""
    names = sorted(set().union(*(set(a) for a in archives)))
    specs = {}
    for name in names:
        seen = []
        for i, a in enumerate(archives):
            if name not in a:
                raise MergeError(f"tensor {name!r} missing from input {i}", tensor=name)
            seen.append(a.spec(name))
        if any(s != seen[0] for s in seen[1:]):
            detail = ", ".join(f"{c}{list(sh)}" for c, sh in seen)
            raise MergeError(f"tensor {name!r} has mismatched dtype/shape across inputs: {detail}", tensor=name)
        specs[name] = seen[0]
    return specs


# -- double-double helpers: float64 inputs have no wider native type ----------

_SPLIT = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _two_prod(a, b):
    p = a * b
    ca = _SPLIT * a
    ah = ca - (ca - a)
    al = a - ah
    cb = _SPLIT * b
    bh = cb - (cb - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dd_add(x, y):
    s, e = _two_sum(x[0], y[0])
    e = e + (x[1] + y[1])
    return _two_sum(s, e)


def _dd_div(x, d):
    q = x[0] / d
    p, pe = _two_prod(q, d)
    return q + (((x[0] - p) - pe) + x[1]) / d


def _finite_or(exact, plain):
    # the error-free transforms produce nan on overflow; keep the plain result there
    return np.where(np.isfinite(exact), exact, plain)


def _digest(arr):
    return hashlib.blake2b(np.ascontiguousarray(arr).tobytes(), digest_size=16).digest()


def _pairwise_sum(terms, add=None):
    add = add or (lambda a, b: a + b)
    while len(terms) > 1:
        nxt = [add(terms[i], terms[i + 1]) for i in range(0, len(terms) - 1, 2)]
        if len(terms) % 2:
            nxt.append(terms[-1])
        terms = nxt
    return terms[0]


def _passthrough(name, arrays):
    first = arrays[0]
    for arr in arrays[1:]:
        if not np.array_equal(first, arr):
            raise MergeError(f"non-float tensor {name!r} differs across inputs", tensor=name)
    return np.array(first)


def soup(archives, weights=None) -> TensorArchive:
    """Elementwise (weighted) mean of structurally identical archives.

    Inputs are reduced pairwise in an order fixed by the content hash of each
    input tensor, so permuting ``archives`` yields bit-identical output.
    """
    archives = [_resolve(a) for a in archives]
    if not archives:
        raise ConfigError("soup needs at least one archive")
    if weights is None:
        w = [1.0] * len(archives)
    else:
        w = [float(x) for x in weights]
        if len(w) != len(archives):
            raise ConfigError(f"got {len(w)} weights for {len(archives)} archives")
        if any(not np.isfinite(x) or x < 0 for x in w) or sum(w) <= 0:
            raise ConfigError("soup weights must be finite, non-negative and not all zero")
    specs = _check_structure(archives)

    def compute(name):
        code, _ = specs[name]
        arrays = [np.asarray(a[name]) for a in archives]
        if code not in FLOAT_CODES:
            return _passthrough(name, arrays)
        if len(arrays) == 1:
            return np.array(arrays[0])
        wide = _WIDE[code]
        order = sorted(range(len(arrays)), key=lambda i: (_digest(arrays[i]), w[i]))
        with np.errstate(invalid="ignore", over="ignore"):
            if weights is None:
                total = _pairwise_sum([arrays[i].astype(wide) for i in order])
                denom = wide(len(arrays))
            else:
                total = _pairwise_sum([arrays[i].astype(wide) * wide(w[i]) for i in order])
                denom = _pairwise_sum([wide(w[i]) for i in order])
            mean = total / denom
            if code == "F64":
                if weights is None:
                    terms = [(arrays[i], np.zeros_like(arrays[i])) for i in order]
                else:
                    terms = [_two_prod(arrays[i], np.float64(w[i])) for i in order]
                mean = _finite_or(_dd_div(_pairwise_sum(terms, _dd_add), denom), mean)
        return mean.astype(DTYPES[code])

    meta = {"merge": "soup", "inputs": str(len(archives))}
    return TensorArchive(_LazyTensors(specs, compute), meta, name="soup")


@dataclass(frozen=True)
class MergeSpec:
    """``base + alpha * (other - base)``; ``base``/``other`` are archives or paths."""

    base: object
    other: object
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_fraction(self.alpha, "alpha"))


def _interpolate(base, other, alpha, name=None):
    specs = _check_structure([base, other])

    def compute(key):
        code, _ = specs[key]
        b = np.asarray(base[key])
        o = np.asarray(other[key])
        if code not in FLOAT_CODES:
            return _passthrough(key, [b, o])
        if alpha == 0.0:
            return np.array(b)
        wide = _WIDE[code]
        bw, ow = b.astype(wide), o.astype(wide)
        with np.errstate(invalid="ignore", over="ignore"):
            merged = bw + wide(alpha) * (ow - bw)
            if code == "F64":
                dh, dl = _two_sum(ow, -bw)
                ph, pl = _two_prod(dh, wide(alpha))
                sh, se = _two_sum(bw, ph)
                merged = _finite_or(sh + (se + (pl + wide(alpha) * dl)), merged)
        # keeps base exactly where both inputs agree, including infinities
        merged = np.where(bw == ow, bw, merged)
        return merged.astype(DTYPES[code])

    meta = dict(base.metadata)
    meta.update({"merge": "task_arithmetic", "alpha": repr(alpha)})
    return TensorArchive(_LazyTensors(specs, compute), meta, name=name)


def task_arithmetic(spec: MergeSpec) -> TensorArchive:
    return _interpolate(_resolve(spec.base), _resolve(spec.other), spec.alpha, name=f"alpha_{spec.alpha:g}")


def alpha_sweep(base, other, alphas):
    """One merged archive per alpha, named ``alpha_<value>``."""
    alphas = [check_fraction(a, "alpha") for a in alphas]
    if not alphas:
        return []
    base, other = _resolve(base), _resolve(other)
    _check_structure([base, other])
    return [_interpolate(base, other, a, name=f"alpha_{a:g}") for a in alphas]
