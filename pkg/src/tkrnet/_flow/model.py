"""The composed time-dependent KRnet and its density."""

from __future__ import annotations

import logging
from typing import Any, Protocol, runtime_checkable

import numpy as np

from tkrnet._diff import ParameterStore, TangentBundle, Var, ops
from tkrnet._errors import DomainError
from tkrnet._flow.base import FlowLayer, LayerTime, Params
from tkrnet._flow.config import ArchitectureConfig
from tkrnet._flow.coupling import AffineCouplingLayer
from tkrnet._flow.nonlinear import NonlinearLayer
from tkrnet._flow.scale_bias import ScaleBiasLayer

__all__ = [
    "DensityModel",
    "FixedTimePrior",
    "Prior",
    "TKRnetModel",
    "build_model",
]

logger = logging.getLogger(__name__)

_TIME_TOL = 1e-12


@runtime_checkable
class Prior(Protocol):
    """Reference density ``p_Z`` of a flow."""

    @property
    def dim(self) -> int: ...

    def log_prob(self, x: Any) -> Any: ...

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray: ...


@runtime_checkable
class DensityModel(Protocol):
    """Anything that provides a normalized time-dependent density and sampler."""

    @property
    def dim(self) -> int: ...

    def log_density(self, x: Any, t: Any, params: Params | None = None) -> Any: ...

    def sample(self, t: float, n: int, rng: np.random.Generator) -> np.ndarray: ...


def _batch_size(x: Any) -> int:
    shape = ops.primal(x).shape
    return 1 if len(shape) < 2 else int(shape[0])


class TKRnetModel:
    """Time-dependent Knothe-Rosenblatt flow ``z = T(x, t)``.

    The forward map composes, for each block, ``pairs_per_block`` pairs of a
    scale-bias layer followed by an affine coupling layer acting on the still
    active coordinates.  Block ``i`` acts on the first ``sum(partitions[:K-i])``
    coordinates, so the last active partition is frozen after every block but
    the last.  An optional nonlinear layer then acts on all coordinates.

    Parameters
    ----------
    arch : ArchitectureConfig
        Layer structure.
    dim : int
        State dimension ``d``.
    prior : Prior
        Reference density ``p_Z``; ``p(x, t) = p_Z(T(x, t)) |det grad_x T|``.
    t_origin : float
        Time at which every layer is the identity.
    horizon : float
        Length of the valid time window ``[t_origin, t_origin + horizon]``; also
        the denominator of the coupling prefactor.
    time_feature : bool
        Append ``t_origin`` as an extra constant input to the coupling networks.
    """

    def __init__(
        self,
        arch: ArchitectureConfig,
        dim: int,
        prior: Prior,
        *,
        t_origin: float = 0.0,
        horizon: float,
        time_feature: bool = False,
        store: ParameterStore | None = None,
    ) -> None:
        if prior.dim != dim:
            raise DomainError(f"prior has dimension {prior.dim}, model has {dim}")
        if horizon <= 0:
            raise DomainError(f"horizon must be positive, got {horizon}")
        self.arch = arch
        self.dim = dim
        self.prior = prior
        self.t_origin = float(t_origin)
        self.horizon = float(horizon)
        self.time_feature = time_feature
        self.partitions = arch.resolve_partitions(dim)
        self.layers = self._build_layers()
        self.store = store if store is not None else ParameterStore()

    def __repr__(self) -> str:
        return (
            f"TKRnetModel(dim={self.dim}, partitions={self.partitions}, "
            f"t=[{self.t_origin}, {self.t_end}], parameters={self.store.size})"
        )

    @property
    def t_end(self) -> float:
        return self.t_origin + self.horizon

    def _build_layers(self) -> list[FlowLayer]:
        arch, d = self.arch, self.dim
        n_time = 2 if self.time_feature else 1
        layers: list[FlowLayer] = []
        active = d
        for i in range(arch.num_blocks):
            for j in range(arch.pairs_per_block):
                prefix = f"block{i}.pair{j}"
                layers.append(ScaleBiasLayer(f"{prefix}.scale_bias", active, d))
                layers.append(
                    AffineCouplingLayer(
                        f"{prefix}.coupling",
                        active,
                        d,
                        swap=bool(j % 2),
                        alpha=arch.alpha,
                        hidden=arch.hidden_width,
                        depth=arch.depth,
                        time_features=n_time,
                    )
                )
            if i < arch.num_blocks - 1:
                active -= self.partitions[arch.num_blocks - 1 - i]
        if arch.nonlinear:
            layers.append(
                NonlinearLayer(
                    "nonlinear", d, mesh_size=arch.mesh_size, bound=arch.bound
                )
            )
        return layers

    def init_params(self, rng: np.random.Generator) -> None:
        """Register and initialize every layer's parameters in a fresh store."""
        self.store = ParameterStore()
        for layer in self.layers:
            layer.init_params(self.store, rng)
        logger.debug("initialized %r", self)

    # evaluation --------------------------------------------------------------

    def params(self, bound: Params | None = None) -> dict[str, Any]:
        """Parameter tensors merged with the frozen buffers."""
        p: dict[str, Any] = dict(self.store.view() if bound is None else bound)
        p.update(self.store.buffers)
        return p

    def layer_time(self, t: Any, batch: int) -> LayerTime:
        """Validate ``t`` and build the per-layer time inputs for ``batch`` rows."""
        if isinstance(t, TangentBundle | Var):
            tau = t - self.t_origin
        else:
            ta = np.asarray(t, dtype=np.float64).reshape(-1, 1)
            tau = np.broadcast_to(ta, (batch, 1)) - self.t_origin
        tau0 = ops.primal(tau)
        if np.any(tau0 < -_TIME_TOL) or np.any(tau0 > self.horizon + _TIME_TOL):
            raise DomainError(
                f"time outside [{self.t_origin}, {self.t_end}]: "
                f"[{tau0.min() + self.t_origin}, {tau0.max() + self.t_origin}]"
            )
        ratio = tau * (1.0 / self.horizon)
        if self.time_feature:
            origin = np.full((batch, 1), self.t_origin)
            features = ops.concat([tau, origin], axis=-1)
        else:
            features = tau
        return LayerTime(tau, ratio, features)

    def _prepare(self, x: Any) -> tuple[Any, bool]:
        if isinstance(x, TangentBundle | Var):
            return x, False
        xa = np.asarray(x, dtype=np.float64)
        single = xa.ndim == 1
        xa = np.atleast_2d(xa)
        if xa.shape[-1] != self.dim:
            raise DomainError(f"expected {self.dim} coordinates, got {xa.shape[-1]}")
        return xa, single

    def forward(
        self, x: Any, t: Any, params: Params | None = None
    ) -> tuple[Any, Any]:
        """Return ``(z, log|det grad_x T|)`` for each row of ``x``."""
        x, single = self._prepare(x)
        p = self.params(params)
        time = self.layer_time(t, _batch_size(x))
        logdet: Any = 0.0
        for layer in self.layers:
            x, ld = layer.forward(p, x, time)
            logdet = ld + logdet
        if single:
            return x[0], logdet[0]
        return x, logdet

    def inverse(self, z: Any, t: Any, params: Params | None = None) -> Any:
        """Invert :meth:`forward` at time ``t``."""
        z, single = self._prepare(z)
        p = self.params(params)
        time = self.layer_time(t, _batch_size(z))
        for layer in reversed(self.layers):
            z = layer.inverse(p, z, time)
        return z[0] if single else z

    def log_density(self, x: Any, t: Any, params: Params | None = None) -> Any:
        """``log p_Z(T(x, t)) + log|det grad_x T(x, t)|``."""
        z, logdet = self.forward(x, t, params)
        return self.prior.log_prob(z) + logdet

    def sample(self, t: float, n: int, rng: np.random.Generator) -> np.ndarray:
        """Exact draws from the model density at time ``t``."""
        if n == 0:
            return np.zeros((0, self.dim))
        z = self.prior.sample(n, rng)
        return np.asarray(self.inverse(z, t))

    def copy(self) -> TKRnetModel:
        """A model with the same structure and an independent parameter copy."""
        return TKRnetModel(
            self.arch,
            self.dim,
            self.prior,
            t_origin=self.t_origin,
            horizon=self.horizon,
            time_feature=self.time_feature,
            store=self.store.copy(),
        )


class FixedTimePrior:
    """The density of a trained model frozen at time ``t``, used as a prior."""

    def __init__(self, model: DensityModel, t: float) -> None:
        self.model = model
        self.t = float(t)

    def __repr__(self) -> str:
        return f"FixedTimePrior({self.model!r}, t={self.t})"

    @property
    def dim(self) -> int:
        return self.model.dim

    def log_prob(self, x: Any) -> Any:
        return self.model.log_density(x, self.t)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.model.sample(self.t, n, rng)


def build_model(
    arch: ArchitectureConfig,
    dim: int,
    prior: Prior,
    t_start: float,
    t_end: float,
    rng: np.random.Generator,
    *,
    time_feature: bool = False,
) -> TKRnetModel:
    """Construct and initialize a model valid on ``[t_start, t_end]``."""
    model = TKRnetModel(
        arch,
        dim,
        prior,
        t_origin=t_start,
        horizon=t_end - t_start,
        time_feature=time_feature,
    )
    model.init_params(rng)
    return model
