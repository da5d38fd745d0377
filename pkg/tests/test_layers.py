"""Exact values and round trips of the individual flow layers."""

from __future__ import annotations

import math
from typing import Any

import numpy as np
import pytest

from tkrnet._diff import ParameterStore
from tkrnet._flow import AffineCouplingLayer, NonlinearLayer, ScaleBiasLayer
from tkrnet._flow.base import FlowLayer, LayerTime

N = 1024


def _time(tau: Any, horizon: float = 1.0) -> LayerTime:
    tau = np.asarray(tau, dtype=np.float64).reshape(-1, 1)
    return LayerTime(tau, tau / horizon, tau)


def _random_params(layer: FlowLayer, rng: np.random.Generator) -> dict[str, Any]:
    store = ParameterStore()
    layer.init_params(store, rng)
    store.load_vector(rng.standard_normal(store.size))
    p: dict[str, Any] = dict(store.view())
    p.update(store.buffers)
    return p


def _coupling(active: int, dim: int, swap: bool) -> AffineCouplingLayer:
    return AffineCouplingLayer(
        "c", active, dim, swap=swap, alpha=0.6, hidden=8, depth=2, time_features=1
    )


def test_coupling_with_fixed_network_output() -> None:
    """tanh(s) = 0.5, zero shift and alpha = 0.6 scale the updated half by 1.3."""
    layer = _coupling(2, 2, swap=False)
    s = math.atanh(0.5)

    def net(p: Any, h0: Any) -> tuple[np.ndarray, np.ndarray]:
        rows = np.shape(h0)[0]
        return np.full((rows, 1), s), np.zeros((rows, 1))

    layer.net = net  # type: ignore[assignment]
    p = {"c.beta": np.zeros(1)}
    x = np.array([[0.3, 2.0], [-1.0, -0.5]])
    y, logdet = layer.forward(p, x, _time([1.0, 1.0]))
    np.testing.assert_allclose(y[:, 0], x[:, 0], rtol=0, atol=0)
    np.testing.assert_allclose(y[:, 1], 1.3 * x[:, 1], rtol=1e-14)
    np.testing.assert_allclose(logdet, math.log(1.3), rtol=1e-14)
    assert math.log(1.3) == pytest.approx(0.262364, abs=1e-6)
    np.testing.assert_allclose(layer.inverse(p, y, _time([1.0, 1.0])), x)


@pytest.mark.parametrize("swap", [False, True], ids=["plain", "swapped"])
def test_coupling_round_trip(swap: bool, rng: np.random.Generator) -> None:
    layer = _coupling(5, 5, swap)
    p = _random_params(layer, rng)
    x = 2.0 * rng.standard_normal((N, 5))
    time = _time(rng.random(N))
    y, _ = layer.forward(p, x, time)
    assert np.max(np.abs(layer.inverse(p, y, time) - x)) <= 1e-10


def test_coupling_identity_at_time_origin(rng: np.random.Generator) -> None:
    layer = _coupling(3, 3, swap=True)
    p = _random_params(layer, rng)
    x = rng.standard_normal((16, 3))
    y, logdet = layer.forward(p, x, _time(np.zeros(16)))
    np.testing.assert_array_equal(y, x)
    np.testing.assert_array_equal(logdet, 0.0)


def test_coupling_logdet_matches_jacobian(rng: np.random.Generator) -> None:
    """The triangular log-determinant agrees with a dense central difference."""
    layer = _coupling(3, 4, swap=False)
    p = _random_params(layer, rng)
    h = 1e-6
    for _ in range(5):
        x = rng.standard_normal((1, 4))
        time = _time([rng.random()])
        cols = []
        for j in range(4):
            e = np.zeros((1, 4))
            e[0, j] = h
            yp, _ = layer.forward(p, x + e, time)
            ym, _ = layer.forward(p, x - e, time)
            cols.append(((yp - ym) / (2 * h))[0])
        _, ref = np.linalg.slogdet(np.stack(cols, axis=1))
        _, logdet = layer.forward(p, x, time)
        assert logdet[0] == pytest.approx(ref, rel=1e-6, abs=1e-8)


def test_coupling_leaves_frozen_coordinates() -> None:
    layer = _coupling(2, 3, swap=False)
    p = _random_params(layer, np.random.default_rng(0))
    x = np.array([[0.1, 0.2, 0.3]])
    y, _ = layer.forward(p, x, _time([0.5]))
    assert y[0, 2] == 0.3


def test_scale_bias_hand_values() -> None:
    """A gate of 0.5 with a = ln 2 and b = 1 gives sqrt(2) x + 0.5."""
    layer = ScaleBiasLayer("sb", 1, 1)
    p = {
        "sb.a": np.array([math.log(2.0)]),
        "sb.b": np.array([1.0]),
        "sb.rho": np.zeros(1),
    }
    x = np.array([[-1.0], [0.0], [3.0]])
    time = _time(np.full(3, math.atanh(0.5)))
    y, logdet = layer.forward(p, x, time)
    np.testing.assert_allclose(y, math.sqrt(2.0) * x + 0.5, rtol=1e-14)
    np.testing.assert_allclose(logdet, 0.5 * math.log(2.0), rtol=1e-14)
    assert 0.5 * math.log(2.0) == pytest.approx(0.346574, abs=1e-6)
    # the gate vanishes at the origin whatever the parameters
    y0, logdet0 = layer.forward(p, x, _time(np.zeros(3)))
    np.testing.assert_array_equal(y0, x)
    np.testing.assert_array_equal(logdet0, 0.0)


def test_scale_bias_round_trip(rng: np.random.Generator) -> None:
    layer = ScaleBiasLayer("sb", 4, 6)
    p = _random_params(layer, rng)
    x = 2.0 * rng.standard_normal((N, 6))
    time = _time(rng.random(N))
    y, _ = layer.forward(p, x, time)
    np.testing.assert_array_equal(y[:, 4:], x[:, 4:])
    assert np.max(np.abs(layer.inverse(p, y, time) - x)) <= 1e-10


def test_nonlinear_hand_values() -> None:
    """One interior node with weights (1, 3, 1) normalizes to (0.5, 1.5, 0.5)."""
    layer = NonlinearLayer("nl", 1, mesh_size=1, bound=1.0)
    p = {
        "nl.psi": np.array([0.0, 2.0 * math.log(3.0), 0.0]),
        "nl.rho": np.zeros(3),
    }
    time = _time(np.full(4, math.atanh(0.5)))
    w, f_nodes = layer.weights(p, time)
    np.testing.assert_allclose(w[0], [0.5, 1.5, 0.5], rtol=1e-14)
    np.testing.assert_allclose(f_nodes[0], [0.0, 0.5, 1.0], rtol=1e-14)
    # x = 2 u - 1 maps the unit interval onto [-a, a] = [-1, 1]
    x = np.array([[-0.5], [0.0], [1.0], [-1.0]])
    y, logdet = layer.forward(p, x, time)
    np.testing.assert_allclose(y[:, 0], [-0.625, 0.0, 1.0, -1.0], atol=1e-14)
    # F' at u = 0.25 is the linear weight 0.5 + 2 * 0.25 = 1
    assert logdet[0] == pytest.approx(0.0, abs=1e-14)
    assert logdet[1] == pytest.approx(math.log(1.5), rel=1e-14)


def test_nonlinear_identity_without_weights(rng: np.random.Generator) -> None:
    layer = NonlinearLayer("nl", 3, mesh_size=5, bound=2.0)
    p = {"nl.psi": np.zeros(7), "nl.rho": rng.standard_normal(7)}
    x = rng.uniform(-3.0, 3.0, (64, 3))
    y, logdet = layer.forward(p, x, _time(rng.random(64)))
    np.testing.assert_allclose(y, x, atol=1e-13)
    np.testing.assert_allclose(logdet, 0.0, atol=1e-13)


def test_nonlinear_round_trip_and_monotone(rng: np.random.Generator) -> None:
    layer = NonlinearLayer("nl", 2, mesh_size=16, bound=3.0)
    p = _random_params(layer, rng)
    x = rng.uniform(-3.0, 3.0, (N, 2))
    time = _time(rng.random(N))
    y, _ = layer.forward(p, x, time)
    assert np.max(np.abs(layer.inverse(p, y, time) - x)) <= 1e-10

    grid = np.linspace(-3.0, 3.0, 10_000).reshape(-1, 1)
    single = NonlinearLayer("nl", 1, mesh_size=16, bound=3.0)
    g, _ = single.forward(p, grid, _time(np.full(grid.shape[0], 0.7)))
    assert np.all(np.diff(g[:, 0]) > 0)
