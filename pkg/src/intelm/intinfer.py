"""Integer-only classification path.

Raw integer signals are projected through ternary weights (additions and
subtractions only), passed through integer ReLU, and accumulated against
integer output weights; the argmax is taken on exact integer scores.
Overflow is excluded up front by a headroom check on the model, never
detected (or missed) at inference time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from intelm.linalg import DimensionError
from intelm.quantize import IntegerBeta

INT32_MAX = 2**31 - 1
INT64_MAX = 2**63 - 1


class HeadroomError(ValueError):
    """Declared input range could overflow the fixed accumulator widths."""


class InputError(ValueError):
    """Sample violates the model's input contract."""


@dataclass
class OpCounter:
    """Instruction counter for the audited reference path."""

    int_adds: int = 0
    int_muls: int = 0
    float_ops: int = 0


@dataclass
class QuantizedModel:
    """Ternary input weights plus integer output weights.

    input_range is the declared (lo, hi) of raw sample values; the
    headroom check below proves the 32-bit hidden accumulator and the
    64-bit output accumulator cannot overflow for in-range inputs.
    """

    ternary_weights: np.ndarray  # (n, L) int8 in {-1, 0, 1}
    int_beta: IntegerBeta  # values (L, m)
    input_range: tuple[int, int] = (0, 255)
    seed: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        W = self.ternary_weights
        if not np.issubdtype(W.dtype, np.integer):
            raise ValueError(f"ternary weights must be integers, got {W.dtype}")
        if not np.all(np.isin(np.unique(W), [-1, 0, 1])):
            raise ValueError("ternary weights must lie in {-1, 0, 1}")
        if self.int_beta.values.shape[0] != W.shape[1]:
            raise DimensionError(
                f"int beta has {self.int_beta.values.shape[0]} rows, "
                f"weights have {W.shape[1]} columns"
            )
        self.validate_headroom()

    @property
    def n(self) -> int:
        return self.ternary_weights.shape[0]

    @property
    def L(self) -> int:
        return self.ternary_weights.shape[1]

    @property
    def m(self) -> int:
        return self.int_beta.values.shape[1]

    def validate_headroom(self) -> None:
        lo, hi = self.input_range
        max_in = max(abs(int(lo)), abs(int(hi)))
        hidden_bound = self.n * max_in
        if hidden_bound > INT32_MAX:
            raise HeadroomError(
                f"hidden accumulator can reach {hidden_bound} > {INT32_MAX} "
                f"(n={self.n}, input range {self.input_range})"
            )
        max_beta = self.int_beta.max_abs
        output_bound = self.L * hidden_bound * max_beta
        if output_bound > INT64_MAX:
            raise HeadroomError(
                f"output accumulator can reach {output_bound} > {INT64_MAX} "
                f"(L={self.L}, max |beta| = {max_beta})"
            )


def _check_sample(model: QuantizedModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if not np.issubdtype(x.dtype, np.integer):
        raise InputError(f"integer path requires integer samples, got dtype {x.dtype}")
    if x.shape[-1] != model.n:
        raise DimensionError(f"sample has {x.shape[-1]} values, model expects {model.n}")
    lo, hi = model.input_range
    if x.size and (x.min() < lo or x.max() > hi):
        raise InputError(
            f"sample values in [{x.min()}, {x.max()}] violate declared range [{lo}, {hi}]"
        )
    return x.astype(np.int64, copy=False)


def ternary_project(W, x) -> np.ndarray:
    """Project an integer sample through ternary weights, exactly.

    Contractually this is per-column add/subtract/skip selection with no
    general multiply; the audited reference is ternary_project_counted and
    this vectorized form is integer-exact and produces identical results.
    """
    W = np.asarray(W, dtype=np.int64)
    x = np.asarray(x, dtype=np.int64)
    if x.shape[0] != W.shape[0]:
        raise DimensionError(f"sample has {x.shape[0]} values, weights expect {W.shape[0]}")
    return x @ W


def relu_int(v) -> np.ndarray:
    """Entrywise max(0, .) on integers."""
    v = np.asarray(v)
    if not np.issubdtype(v.dtype, np.integer):
        raise InputError(f"relu_int requires integers, got dtype {v.dtype}")
    return np.maximum(v, 0)


def classify_int(model: QuantizedModel, x) -> int:
    """Predicted class of a raw integer sample; ties break to the lowest index.

    The all-zero sample is rejected: scale invariance of the raw path is
    only guaranteed for nonzero inputs.
    """
    x = _check_sample(model, x)
    if not np.any(x):
        raise InputError("cannot classify the all-zero sample")
    h = relu_int(ternary_project(model.ternary_weights, x))
    scores = model.int_beta.values.T @ h
    return int(np.argmax(scores))


def classify_int_batch(model: QuantizedModel, X) -> np.ndarray:
    """Classify each row of an integer sample matrix."""
    X = _check_sample(model, np.atleast_2d(np.asarray(X)))
    if X.size and not np.all(np.any(X, axis=1)):
        bad = int(np.flatnonzero(~np.any(X, axis=1))[0])
        raise InputError(f"cannot classify the all-zero sample at row {bad}")
    H = np.maximum(X @ model.ternary_weights.astype(np.int64), 0)
    return np.argmax(H @ model.int_beta.values, axis=1)


def int_scores(model: QuantizedModel, x) -> np.ndarray:
    """Exact integer class scores, for diagnostics and --scores output."""
    x = _check_sample(model, x)
    h = relu_int(ternary_project(model.ternary_weights, x))
    return model.int_beta.values.T @ h


# --- audited reference path ------------------------------------------------
#
# Pure-Python integer implementations that thread an OpCounter through
# every arithmetic step. Tests assert float_ops == 0 everywhere and
# int_muls == 0 in the input projection, and that results match the
# vectorized path exactly.


def ternary_project_counted(W, x, counter: OpCounter) -> list[int]:
    W = np.asarray(W)
    n, L = W.shape
    xs = [int(v) for v in x]
    out = []
    for i in range(L):
        acc = 0
        col = W[:, i]
        for j in range(n):
            w = int(col[j])
            if w == 1:
                acc += xs[j]
                counter.int_adds += 1
            elif w == -1:
                acc -= xs[j]
                counter.int_adds += 1
        out.append(acc)
    return out


def classify_int_counted(model: QuantizedModel, x, counter: OpCounter) -> int:
    x = _check_sample(model, x)
    if not np.any(x):
        raise InputError("cannot classify the all-zero sample")
    h = ternary_project_counted(model.ternary_weights, x, counter)
    h = [v if v > 0 else 0 for v in h]
    beta = model.int_beta.values
    best_class, best_score = 0, None
    for k in range(model.m):
        acc = 0
        for i in range(model.L):
            acc += int(beta[i, k]) * h[i]
            counter.int_muls += 1
            counter.int_adds += 1
        if best_score is None or acc > best_score:
            best_class, best_score = k, acc
    return best_class
