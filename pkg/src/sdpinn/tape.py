"""Minimal reverse-mode differentiation over numpy arrays.

Loss expressions are built from :class:`Var` nodes (sums of squares, Hadamard
products with coefficient matrices, ReLU penalties, factor products).  Calling
:func:`backward` on the scalar root fills ``.grad`` on every node, in
particular on the leaves: network outputs, their input derivatives, and the
low-rank factor matrices.

Only differentiable operations are provided; composing anything else raises a
``TypeError`` at graph construction time.  Gradients of ``relu`` use the usual
subgradient 0 at the kink.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (adjoint of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Var:
    """Array-valued node in a scalar-rooted differentiation graph."""

    __slots__ = ("value", "grad", "_parents", "_vjp")

    # make numpy defer mixed ndarray <op> Var expressions to our reflected
    # dunders instead of building object arrays elementwise
    __array_ufunc__ = None

    def __init__(self, value, _parents=(), _vjp=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = _parents
        self._vjp = _vjp

    @property
    def shape(self):
        return self.value.shape

    @property
    def T(self) -> "Var":
        return Var(self.value.T, (self,), lambda g: (g.T,))

    def __repr__(self):
        return f"Var(shape={self.value.shape})"

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Var):
            a, b = self, other
            return Var(
                a.value + b.value,
                (a, b),
                lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
            )
        c = np.asarray(other, dtype=np.float64)
        return Var(self.value + c, (self,), lambda g: (_unbroadcast(g, self.shape),))

    __radd__ = __add__

    def __neg__(self):
        return Var(-self.value, (self,), lambda g: (-g,))

    def __sub__(self, other):
        if isinstance(other, Var):
            a, b = self, other
            return Var(
                a.value - b.value,
                (a, b),
                lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
            )
        c = np.asarray(other, dtype=np.float64)
        return Var(self.value - c, (self,), lambda g: (_unbroadcast(g, self.shape),))

    def __rsub__(self, other):
        c = np.asarray(other, dtype=np.float64)
        return Var(c - self.value, (self,), lambda g: (_unbroadcast(-g, self.shape),))

    def __mul__(self, other):
        if isinstance(other, Var):
            a, b = self, other
            return Var(
                a.value * b.value,
                (a, b),
                lambda g: (
                    _unbroadcast(g * b.value, a.shape),
                    _unbroadcast(g * a.value, b.shape),
                ),
            )
        c = np.asarray(other, dtype=np.float64)
        return Var(
            self.value * c, (self,), lambda g: (_unbroadcast(g * c, self.shape),)
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            raise TypeError("division by a Var is not a supported differentiable op")
        return self * (1.0 / float(other))

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only scalar exponents are differentiable here")
        e = float(exponent)
        return Var(
            self.value**e,
            (self,),
            lambda g: (g * e * self.value ** (e - 1.0),),
        )

    def __matmul__(self, other):
        if not isinstance(other, Var):
            other = Var(np.asarray(other, dtype=np.float64))
        a, b = self, other
        if a.value.ndim != 2 or b.value.ndim != 2:
            raise TypeError("matmul on the tape is restricted to 2-D operands")
        return Var(
            a.value @ b.value,
            (a, b),
            lambda g: (g @ b.value.T, a.value.T @ g),
        )

    # -- shape / selection ---------------------------------------------------

    def reshape(self, *shape) -> "Var":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        orig = self.value.shape
        return Var(
            self.value.reshape(shape), (self,), lambda g: (g.reshape(orig),)
        )

    def __getitem__(self, idx):
        def vjp(g):
            full = np.zeros_like(self.value)
            np.add.at(full, idx, g)
            return (full,)

        return Var(self.value[idx], (self,), vjp)

    # -- reductions / nonlinearities ------------------------------------------

    def sum(self, axis=None) -> "Var":
        if axis is None:
            return Var(
                self.value.sum(),
                (self,),
                lambda g: (np.broadcast_to(g, self.value.shape).copy(),),
            )
        val = self.value.sum(axis=axis)

        def vjp(g):
            ge = np.expand_dims(g, axis)
            return (np.broadcast_to(ge, self.value.shape).copy(),)

        return Var(val, (self,), vjp)

    def relu(self) -> "Var":
        mask = self.value > 0.0
        return Var(np.where(mask, self.value, 0.0), (self,), lambda g: (g * mask,))


def relu(x):
    """ReLU working on both Vars and plain arrays."""
    if isinstance(x, Var):
        return x.relu()
    return np.maximum(x, 0.0)


def backward(root: Var) -> None:
    """Fill ``.grad`` on every node reachable from the scalar ``root``."""
    if root.value.size != 1:
        raise ValueError("backward requires a scalar root")

    topo: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))

    root.grad = np.ones_like(root.value)
    for node in reversed(topo):
        if node._vjp is None or node.grad is None:
            continue
        for parent, g in zip(node._parents, node._vjp(node.grad)):
            parent.grad = g if parent.grad is None else parent.grad + g


def grad_or_zeros(v: Var) -> np.ndarray:
    """Gradient of a leaf after backward(); zeros if it never fed the root."""
    return np.zeros_like(v.value) if v.grad is None else v.grad
