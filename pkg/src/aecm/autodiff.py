"""Minimal tape-based reverse-mode differentiation over 2-D float64 arrays.

Every value on the tape is a 2-D numpy array; scalars are 1x1. Ops record a
vector-Jacobian closure at forward time, so one backward sweep over the node
list yields exact gradients for every parameter leaf.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tape",
    "Var",
    "backward",
    "add",
    "sub",
    "mul_elem",
    "matmul",
    "transpose",
    "add_row_broadcast",
    "scale",
    "square",
    "sum",
    "mean",
    "log",
    "abs",
    "leaky_relu",
    "row_softmax",
    "clamp_min",
    "finite_diff_check",
]


class Var:
    """Handle to one tape node; gradient is available after backward."""

    __slots__ = ("tape", "idx")

    def __init__(self, tape: "Tape", idx: int):
        self.tape = tape
        self.idx = idx

    @property
    def value(self) -> np.ndarray:
        return self.tape.values[self.idx]

    @property
    def shape(self) -> tuple[int, int]:
        return self.tape.values[self.idx].shape

    @property
    def grad(self) -> np.ndarray:
        g = self.tape.grads
        if g is None:
            raise RuntimeError("backward has not been run on this tape")
        got = g[self.idx]
        if got is None:
            return np.zeros_like(self.value)
        return got


class Tape:
    """Append-only record of operations; parents always precede children."""

    def __init__(self):
        self.values: list[np.ndarray] = []
        self.parents: list[tuple[int, ...]] = []
        self.vjps: list = []
        self.needs: list[bool] = []
        self.grads: list | None = None

    def _record(self, value, parents=(), vjp=None, needs=None) -> Var:
        if self.grads is not None:
            raise RuntimeError("tape already ran backward; record on a fresh tape")
        if needs is None:
            needs = any(self.needs[p] for p in parents)
        self.values.append(value)
        self.parents.append(parents)
        self.vjps.append(vjp)
        self.needs.append(needs)
        return Var(self, len(self.values) - 1)

    def param(self, value: np.ndarray) -> Var:
        """Leaf whose gradient will be accumulated."""
        v = np.ascontiguousarray(value, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("tape values must be 2-D")
        return self._record(v, needs=True)

    def constant(self, value) -> Var:
        """Leaf excluded from gradient propagation."""
        v = np.ascontiguousarray(value, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("tape values must be 2-D")
        return self._record(v, needs=False)


def _same_tape(*vs: Var) -> Tape:
    t = vs[0].tape
    for v in vs[1:]:
        if v.tape is not t:
            raise ValueError("vars belong to different tapes")
    return t


def _check_same_shape(a: Var, b: Var, op: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op} shape mismatch: {a.shape} vs {b.shape}")


def add(a: Var, b: Var) -> Var:
    t = _same_tape(a, b)
    _check_same_shape(a, b, "add")
    return t._record(a.value + b.value, (a.idx, b.idx), lambda g: (g, g))


def sub(a: Var, b: Var) -> Var:
    t = _same_tape(a, b)
    _check_same_shape(a, b, "sub")
    return t._record(a.value - b.value, (a.idx, b.idx), lambda g: (g, -g))


def mul_elem(a: Var, b: Var) -> Var:
    t = _same_tape(a, b)
    _check_same_shape(a, b, "mul_elem")
    av, bv = a.value, b.value
    return t._record(av * bv, (a.idx, b.idx), lambda g: (g * bv, g * av))


def matmul(a: Var, b: Var) -> Var:
    t = _same_tape(a, b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    av, bv = a.value, b.value
    return t._record(av @ bv, (a.idx, b.idx), lambda g: (g @ bv.T, av.T @ g))


def transpose(a: Var) -> Var:
    return a.tape._record(a.value.T.copy(), (a.idx,), lambda g: (g.T,))


def add_row_broadcast(m: Var, row: Var) -> Var:
    """Add a 1 x c row vector to every row of an n x c matrix."""
    t = _same_tape(m, row)
    if row.shape != (1, m.shape[1]):
        raise ValueError(f"row must be 1 x {m.shape[1]}, got {row.shape}")
    return t._record(
        m.value + row.value,
        (m.idx, row.idx),
        lambda g: (g, g.sum(axis=0, keepdims=True)),
    )


def scale(a: Var, c: float) -> Var:
    c = float(c)
    return a.tape._record(c * a.value, (a.idx,), lambda g: (c * g,))


def square(a: Var) -> Var:
    av = a.value
    return a.tape._record(av * av, (a.idx,), lambda g: (2.0 * av * g,))


def sum(a: Var) -> Var:
    shp = a.shape
    return a.tape._record(
        np.array([[a.value.sum()]]),
        (a.idx,),
        lambda g: (np.full(shp, g[0, 0]),),
    )


def mean(a: Var) -> Var:
    shp = a.shape
    n = a.value.size
    return a.tape._record(
        np.array([[a.value.mean()]]),
        (a.idx,),
        lambda g: (np.full(shp, g[0, 0] / n),),
    )


def log(a: Var) -> Var:
    av = a.value
    if np.any(av <= 0.0):
        raise FloatingPointError("log of non-positive value; clamp inputs first")
    return a.tape._record(np.log(av), (a.idx,), lambda g: (g / av,))


def abs(a: Var) -> Var:
    av = a.value
    # subgradient at the kink: sign(0) = 0
    return a.tape._record(np.abs(av), (a.idx,), lambda g: (g * np.sign(av),))


def leaky_relu(a: Var, slope: float = 0.2) -> Var:
    av = a.value
    factor = np.where(av > 0.0, 1.0, slope)
    return a.tape._record(av * factor, (a.idx,), lambda g: (g * factor,))


def row_softmax(a: Var) -> Var:
    av = a.value
    s = np.exp(av - av.max(axis=1, keepdims=True))
    s /= s.sum(axis=1, keepdims=True)
    return a.tape._record(
        s,
        (a.idx,),
        lambda g: (s * (g - (g * s).sum(axis=1, keepdims=True)),),
    )


def clamp_min(a: Var, floor: float) -> Var:
    """max(a, floor) elementwise; gradient is zero at and below the floor."""
    av = a.value
    mask = av > floor
    return a.tape._record(
        np.maximum(av, floor), (a.idx,), lambda g: (g * mask,)
    )


def backward(loss: Var) -> None:
    """Accumulate d(loss)/d(node) for every node feeding into a scalar loss."""
    tape = loss.tape
    if tape.grads is not None:
        raise RuntimeError("backward already ran on this tape")
    if loss.shape != (1, 1):
        raise ValueError(f"loss must be a 1x1 scalar, got shape {loss.shape}")
    grads: list = [None] * len(tape.values)
    grads[loss.idx] = np.ones((1, 1))
    for idx in range(loss.idx, -1, -1):
        g = grads[idx]
        if g is None or not tape.needs[idx]:
            continue
        vjp = tape.vjps[idx]
        if vjp is None:
            continue
        for parent, pg in zip(tape.parents[idx], vjp(g)):
            if not tape.needs[parent]:
                continue
            if grads[parent] is None:
                grads[parent] = pg
            else:
                # never accumulate in place: vjps may hand back shared arrays
                grads[parent] = grads[parent] + pg
    tape.grads = grads


def finite_diff_check(f, params: dict[str, np.ndarray], h: float = 1e-5) -> dict[str, float]:
    """Compare tape gradients of ``f`` against central finite differences.

    ``f(tape, vars)`` builds a scalar loss Var from a dict of parameter Vars
    and must be deterministic. Returns, per parameter, the max absolute
    gradient deviation normalized by the largest finite-difference entry.
    """

    def evaluate(current: dict[str, np.ndarray]) -> float:
        t = Tape()
        vs = {k: t.param(v) for k, v in current.items()}
        return float(f(t, vs).value[0, 0])

    tape = Tape()
    pvars = {k: tape.param(v) for k, v in params.items()}
    loss = f(tape, pvars)
    backward(loss)
    ad_grads = {k: pvars[k].grad.copy() for k in params}

    report: dict[str, float] = {}
    work = {k: v.astype(np.float64).copy() for k, v in params.items()}
    for name, v in work.items():
        fd = np.zeros_like(v)
        flat = v.reshape(-1)
        fd_flat = fd.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = evaluate(work)
            flat[i] = orig - h
            down = evaluate(work)
            flat[i] = orig
            fd_flat[i] = (up - down) / (2.0 * h)
        denom = max(np.max(np.abs(fd)), 1e-12)
        report[name] = float(np.max(np.abs(ad_grads[name] - fd)) / denom)
    return report
