"""Time-dependent affine coupling layer and its Fourier-feature network."""

from __future__ import annotations

import math
from typing import Any

import numpy as np

from tkrnet._diff import ParameterStore, ops
from tkrnet._flow.base import FlowLayer, LayerTime, Params, join_active, split_active

__all__ = ["AffineCouplingLayer", "CouplingNet"]


class CouplingNet:
    """Random Fourier features followed by a SiLU multilayer perceptron.

    ``h0 = [x1, time]``, ``h1 = [sin(u), cos(u), h0]`` with
    ``u = exp(-sigma) * (h0 @ F.T) + b0``, then ``depth - 1`` hidden layers of
    width ``hidden`` and an affine output of size ``2 * out_dim`` split into
    ``(s, t)``.  ``F ~ N(0, 1)`` and ``b0 ~ U(0, 2 pi)`` are frozen buffers.
    """

    def __init__(
        self, prefix: str, in_dim: int, out_dim: int, hidden: int, depth: int
    ) -> None:
        self.prefix = prefix
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.hidden = hidden
        self.depth = depth

    def key(self, name: str) -> str:
        return f"{self.prefix}.{name}"

    def init_params(self, store: ParameterStore, rng: np.random.Generator) -> None:
        half = self.hidden // 2
        store.add_buffer(self.key("F"), rng.standard_normal((half, self.in_dim)))
        store.add_buffer(self.key("b0"), rng.uniform(0.0, 2.0 * math.pi, half))
        store.add(self.key("sigma"), 0.0)
        widths = [self.hidden + self.in_dim]
        widths += [self.hidden] * (self.depth - 1) + [2 * self.out_dim]
        for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:]), start=1):
            # Kaiming uniform for ReLU-family gain
            bound = math.sqrt(6.0 / fan_in)
            store.add(self.key(f"W{i}"), rng.uniform(-bound, bound, (fan_in, fan_out)))
            store.add(self.key(f"b{i}"), np.zeros(fan_out))

    def __call__(self, p: Params, h0: Any) -> tuple[Any, Any]:
        pre = (h0 @ p[self.key("F")].T) * ops.exp(-p[self.key("sigma")])
        pre = pre + p[self.key("b0")]
        h = ops.concat([ops.sin(pre), ops.cos(pre), h0], axis=-1)
        for i in range(1, self.depth):
            h = ops.silu(h @ p[self.key(f"W{i}")] + p[self.key(f"b{i}")])
        out = h @ p[self.key(f"W{self.depth}")] + p[self.key(f"b{self.depth}")]
        return out[..., : self.out_dim], out[..., self.out_dim :]


class AffineCouplingLayer(FlowLayer):
    """Update one half of the active coordinates conditioned on the other half.

    ``y2 = x2 + r * (alpha * x2 * tanh(s) + exp(beta) * tanh(t))`` where
    ``r = tau / horizon`` and ``(s, t) = net([x1, time])``.  With ``k`` the
    floor of half the active size, the conditioning part is the first ``k``
    coordinates, or the last ``k`` when ``swap`` is set.
    """

    def __init__(
        self,
        prefix: str,
        active: int,
        dim: int,
        *,
        swap: bool,
        alpha: float,
        hidden: int,
        depth: int,
        time_features: int,
    ) -> None:
        super().__init__(prefix, active, dim)
        self.swap = swap
        self.alpha = alpha
        self.k = active // 2
        self.net = CouplingNet(
            f"{prefix}.net",
            in_dim=self.k + time_features,
            out_dim=active - self.k,
            hidden=hidden,
            depth=depth,
        )

    def init_params(self, store: ParameterStore, rng: np.random.Generator) -> None:
        self.net.init_params(store, rng)
        store.add(self.key("beta"), np.zeros(self.active - self.k))

    def _split(self, xa: Any) -> tuple[Any | None, Any]:
        n, k = self.active, self.k
        if k == 0:
            return None, xa
        if self.swap:
            return xa[..., n - k :], xa[..., : n - k]
        return xa[..., :k], xa[..., k:]

    def _join(self, cond: Any | None, trans: Any) -> Any:
        if cond is None:
            return trans
        return ops.concat([trans, cond] if self.swap else [cond, trans], axis=-1)

    def _coefficients(
        self, p: Params, cond: Any | None, time: LayerTime
    ) -> tuple[Any, Any]:
        h0 = time.features if cond is None else ops.concat([cond, time.features])
        s, t = self.net(p, h0)
        scale = (self.alpha * time.ratio) * ops.tanh(s)
        shift = time.ratio * (ops.exp(p[self.key("beta")]) * ops.tanh(t))
        return scale, shift

    def forward(self, p: Params, x: Any, time: LayerTime) -> tuple[Any, Any]:
        xa, rest = split_active(x, self.active, self.dim)
        cond, trans = self._split(xa)
        scale, shift = self._coefficients(p, cond, time)
        y = trans + trans * scale + shift
        logdet = ops.log(1.0 + scale).sum(axis=-1)
        return join_active(self._join(cond, y), rest), logdet

    def inverse(self, p: Params, y: Any, time: LayerTime) -> Any:
        ya, rest = split_active(y, self.active, self.dim)
        cond, trans = self._split(ya)
        scale, shift = self._coefficients(p, cond, time)
        x = (trans - shift) / (1.0 + scale)
        return join_active(self._join(cond, x), rest)
