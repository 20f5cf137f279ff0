"""Baseline misfits on receiver-axis signals: L2 and trace-normalized quadratic Wasserstein.

Signals are sampled on n uniform nodes of the unit interval. Gradients are partial
derivatives with respect to the samples, packed as d/dRe + i d/dIm for complex inputs.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from hvfwi.utils.errors import ZeroMass


@dataclass
class NormalizedDensity:
    pdf: np.ndarray  # density values at the nodes
    masses: np.ndarray  # atom masses, sum to one
    cdf: np.ndarray  # cumulative masses, last entry is one
    shift_beta: float
    total: float  # integral of the shifted signal before normalization


@dataclass
class W2Eval:
    value: float
    gradient: np.ndarray


def node_weights(n: int) -> np.ndarray:
    """Trapezoid quadrature weights (including dx) on n nodes of [0, 1]."""
    weights = np.full(n, 1.0 / (n - 1))
    weights[0] *= 0.5
    weights[-1] *= 0.5
    return weights


def shared_beta(f0: np.ndarray, f1: np.ndarray, beta_margin: float) -> float:
    """Shift that makes both signals of a pair strictly positive."""
    amplitude = max(np.max(np.abs(f0)), np.max(np.abs(f1)))
    if amplitude == 0:
        amplitude = 1.0
    return max(0.0, -min(np.min(f0), np.min(f1))) + beta_margin * amplitude


def normalize_linear(f: np.ndarray, beta_margin: float = 0.1, beta: Optional[float] = None) -> NormalizedDensity:
    f = np.asarray(f, dtype=np.float64)
    if beta_margin < 0:
        raise ValueError("beta_margin must be nonnegative")
    beta = shared_beta(f, f, beta_margin) if beta is None else beta
    shifted = f + beta
    weights = node_weights(len(f))
    total = float(np.dot(shifted, weights))
    if not total > 0 or np.min(shifted) < 0:
        raise ZeroMass("Shifted signal has no positive mass")
    masses = shifted * weights / total
    cdf = np.cumsum(masses)
    cdf[-1] = 1.0
    return NormalizedDensity(pdf=shifted / total, masses=masses, cdf=cdf, shift_beta=beta, total=total)


def _quantile_pairs(cdf_p: np.ndarray, cdf_q: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Merges the cumulative-mass breakpoints of two discrete measures on the same nodes."""
    breaks = np.union1d(cdf_p, cdf_q)
    breaks = breaks[breaks > 0]
    lengths = np.diff(np.concatenate([[0.0], breaks]))
    # On (s_k - length, s_k] both quantile functions are constant.
    i = np.minimum(np.searchsorted(cdf_p, breaks, side="left"), len(cdf_p) - 1)
    j = np.minimum(np.searchsorted(cdf_q, breaks, side="left"), len(cdf_q) - 1)
    return lengths, i, j


def w2_distance_1d(p: NormalizedDensity, q: NormalizedDensity, return_map: bool = False):
    """Squared quadratic Wasserstein distance int_0^1 |F^-1(s) - G^-1(s)|^2 ds.

    Computed exactly on the union of both quantile breakpoints. With return_map the
    monotone transport map T = G^-1(F(x)) at the nodes is returned as well.
    """
    if len(p.cdf) != len(q.cdf):
        raise ValueError("Densities must share a grid")
    x = np.linspace(0.0, 1.0, len(p.cdf))
    lengths, i, j = _quantile_pairs(p.cdf, q.cdf)
    value = float(np.sum(lengths * (x[i] - x[j]) ** 2))
    if not return_map:
        return value
    transport = x[np.minimum(np.searchsorted(q.cdf, p.cdf, side="left"), len(x) - 1)]
    return value, transport


def _mass_gradient(p: NormalizedDensity, q: NormalizedDensity) -> np.ndarray:
    """Derivative of the squared distance with respect to the atom masses of p.

    Moving breakpoint k of p shifts the boundary between atoms k and k + 1; one-sided
    derivatives are averaged where it coincides with a breakpoint of q.
    """
    x = np.linspace(0.0, 1.0, len(p.cdf))
    last = len(x) - 1
    breaks = p.cdf[:-1]
    y_left = x[np.minimum(np.searchsorted(q.cdf, breaks, side="left"), last)]
    y_right = x[np.minimum(np.searchsorted(q.cdf, breaks, side="right"), last)]
    left, right = x[:-1], x[1:]
    slope = 0.5 * ((left - y_left) ** 2 - (right - y_left) ** 2)
    slope += 0.5 * ((left - y_right) ** 2 - (right - y_right) ** 2)
    # Atom i moves every breakpoint k >= i.
    grad = np.zeros(len(x))
    grad[:-1] = np.cumsum(slope[::-1])[::-1]
    return grad


def _pull_back(grad_masses: np.ndarray, density: NormalizedDensity) -> Tuple[np.ndarray, float]:
    """Chain rule through masses = (f + beta) * weights / total. Returns (d/df, d/dbeta)."""
    weights = node_weights(len(grad_masses))
    centered = grad_masses - np.dot(grad_masses, density.masses)
    d_f = weights * centered / density.total
    d_beta = float(np.dot(weights, centered)) / density.total
    return d_f, d_beta


def _beta_gradient(f0: np.ndarray, f1: np.ndarray, beta_margin: float) -> np.ndarray:
    """Derivative of shared_beta with respect to f0 (one-hot at the active extremum)."""
    grad = np.zeros(len(f0))
    if -min(np.min(f0), np.min(f1)) > 0 and np.min(f0) <= np.min(f1):
        grad[np.argmin(f0)] -= 1.0
    abs0, abs1 = np.abs(f0), np.abs(f1)
    if np.max(abs0) > 0 and np.max(abs0) >= np.max(abs1):
        k = np.argmax(abs0)
        grad[k] += beta_margin * np.sign(f0[k])
    return grad


def w2_misfit_real(f0: np.ndarray, f1: np.ndarray, beta_margin: float = 0.1) -> W2Eval:
    f0 = np.asarray(f0, dtype=np.float64)
    f1 = np.asarray(f1, dtype=np.float64)
    if f0.shape != f1.shape:
        raise ValueError("Signals must have the same length")
    beta = shared_beta(f0, f1, beta_margin)
    p = normalize_linear(f0, beta_margin, beta=beta)
    q = normalize_linear(f1, beta_margin, beta=beta)
    value = w2_distance_1d(p, q)
    d_f0, d_beta_p = _pull_back(_mass_gradient(p, q), p)
    _, d_beta_q = _pull_back(_mass_gradient(q, p), q)
    gradient = d_f0 + (d_beta_p + d_beta_q) * _beta_gradient(f0, f1, beta_margin)
    return W2Eval(value=value, gradient=gradient)


def w2_misfit_complex(f0: np.ndarray, f1: np.ndarray, beta_margin: float = 0.1) -> W2Eval:
    """Sum of the real-part and imaginary-part misfits, each pair with its own shared shift."""
    f0 = np.asarray(f0, dtype=np.complex128)
    f1 = np.asarray(f1, dtype=np.complex128)
    re = w2_misfit_real(f0.real, f1.real, beta_margin)
    im = w2_misfit_real(f0.imag, f1.imag, beta_margin)
    return W2Eval(value=re.value + im.value, gradient=re.gradient + 1j * im.gradient)


def l2_misfit_complex(f0: np.ndarray, f1: np.ndarray, dx: Optional[float] = None) -> Tuple[float, np.ndarray]:
    f0 = np.asarray(f0, dtype=np.complex128)
    f1 = np.asarray(f1, dtype=np.complex128)
    if f0.shape != f1.shape:
        raise ValueError("Signals must have the same length")
    # Trapezoid weights on the unit interval, rescaled when a spacing is given.
    weights = node_weights(len(f0))
    if dx is not None:
        weights = weights * dx * (len(f0) - 1)
    residual = f0 - f1
    return 0.5 * float(np.sum(weights * np.abs(residual) ** 2)), weights * residual
