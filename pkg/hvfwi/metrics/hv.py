"""HV metric between 1D signals.

Two signals f0, f1 on the unit interval are connected by a path f(x, t) that
obeys the transport equation with a source,

    f_t = -f_x v + z,    v = 0 at x = 0, 1,

and the cost of the path is the action

    A = 1/2 * int_0^1 sqrt( int_0^1 kappa v^2 + lam v_x^2 + epsilon v_xx^2 + z^2 dx ) dt.

The distance is sqrt(A) at the path minimizing the quadratic energy
E = int int (kappa v^2 + lam v_x^2 + epsilon v_xx^2 + z^2) dx dt, which is found by
alternating exact minimization over (f, z) for fixed v and over v for fixed f.

Discretization: f lives on the n_t + 1 time nodes, v and z on the n_t half levels
between them. Space uses trapezoid weights on n_x + 1 uniform nodes.
"""
import functools
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from hvfwi.utils.errors import DegenerateFlow, MonotonicityLoss, NoConvergence, SingularSystem

# Slack allowed on energy increases caused by round-off.
ENERGY_SLACK = 1e-10


@dataclass(frozen=True)
class GridSignal:
    """Real samples on uniform nodes. start/step describe the physical axis."""

    values: np.ndarray
    start: float = 0.0
    step: float = 1.0

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("GridSignal values must be one dimensional, got shape " + str(values.shape))
        if len(values) < 5:
            raise ValueError("GridSignal needs at least 5 samples, got " + str(len(values)))
        if not np.all(np.isfinite(values)):
            raise ValueError("GridSignal values must be finite")
        if not self.step > 0:
            raise ValueError("GridSignal step must be positive")
        object.__setattr__(self, "values", values)

    @property
    def n_x(self) -> int:
        return len(self.values) - 1

    @property
    def axis(self) -> np.ndarray:
        return self.start + self.step * np.arange(len(self.values))

    def same_grid(self, other: "GridSignal") -> bool:
        return len(self.values) == len(other.values) and self.start == other.start and self.step == other.step


@dataclass(frozen=True)
class ComplexGridSignal:
    re: GridSignal
    im: GridSignal

    def __post_init__(self):
        if not self.re.same_grid(self.im):
            raise ValueError("Real and imaginary parts must share the same grid")

    @classmethod
    def from_array(cls, values: np.ndarray, start: float = 0.0, step: float = 1.0) -> "ComplexGridSignal":
        values = np.asarray(values, dtype=np.complex128)
        return cls(GridSignal(values.real, start, step), GridSignal(values.imag, start, step))

    @property
    def values(self) -> np.ndarray:
        return self.re.values + 1j * self.im.values


@dataclass
class HVParams:
    kappa: float = 1e-10
    lam: float = 1e-10
    epsilon: float = 1e-7
    n_x: Optional[int] = None  # inferred from the signal length when None
    n_t: int = 16
    max_iters: int = 100
    tol: float = 1e-8
    n_substeps: int = 2
    refine: bool = True  # finish with the exact discrete (f, z) block
    strict: bool = False  # raise NoConvergence instead of flagging

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.lam >= 0:
            raise ValueError("lam must be nonnegative")
        if self.n_x is not None and self.n_x < 4:
            raise ValueError("n_x must be at least 4")
        if self.n_t < 2:
            raise ValueError("n_t must be at least 2")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.n_substeps < 1:
            raise ValueError("n_substeps must be positive")

    def resolve_n_x(self, signal: GridSignal) -> int:
        if self.n_x is not None and self.n_x != signal.n_x:
            raise ValueError(
                "HVParams.n_x = {} does not match the signal ({} intervals)".format(self.n_x, signal.n_x)
            )
        return signal.n_x


@dataclass
class HVPath:
    f: np.ndarray  # (n_t + 1, n_x + 1) on time nodes
    v: np.ndarray  # (n_t, n_x + 1) on half levels
    z: np.ndarray  # (n_t, n_x + 1) on half levels

    @property
    def n_t(self) -> int:
        return self.v.shape[0]

    @property
    def n_x(self) -> int:
        return self.v.shape[1] - 1

    @classmethod
    def from_fields(cls, f: np.ndarray, v: np.ndarray) -> "HVPath":
        return cls(f=f, v=v, z=transport_residual(f, v))


@dataclass
class FlowMap:
    phi: np.ndarray  # (n_x + 1, n_t + 1)
    jac: np.ndarray
    eta: np.ndarray


@dataclass
class HVResult:
    distance: float
    action: float
    quad_energy: float
    iterations: int
    path: HVPath
    converged: bool = True
    energy_history: List[float] = field(default_factory=list)


@functools.lru_cache(maxsize=32)
def trapezoid_weights(n_x: int) -> np.ndarray:
    weights = np.ones(n_x + 1)
    weights[0] = weights[-1] = 0.5
    weights.setflags(write=False)
    return weights


@functools.lru_cache(maxsize=32)
def central_difference(n_x: int) -> scipy.sparse.csr_matrix:
    """d/dx on n_x + 1 unit-interval nodes: central inside, second order one-sided at the ends."""
    n = n_x + 1
    scale = n_x / 2.0  # 1 / (2 dx)
    interior = np.arange(1, n - 1)
    rows = np.concatenate([interior, interior, [0, 0, 0, n - 1, n - 1, n - 1]])
    cols = np.concatenate([interior + 1, interior - 1, [0, 1, 2, n - 1, n - 2, n - 3]])
    vals = np.concatenate([np.ones(n - 2), -np.ones(n - 2), [-3.0, 4.0, -1.0, 3.0, -4.0, 1.0]])
    return scipy.sparse.csr_matrix((scale * vals, (rows, cols)), shape=(n, n))


def _half_level_terms(f: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Returns (tau, w): forward time difference and x-derivative of the level average."""
    n_t = f.shape[0] - 1
    tau = np.diff(f, axis=0) * n_t
    f_mid = 0.5 * (f[1:] + f[:-1])
    w = (central_difference(f.shape[1] - 1) @ f_mid.T).T
    return tau, w


def transport_residual(f: np.ndarray, v: np.ndarray) -> np.ndarray:
    tau, w = _half_level_terms(f)
    return tau + v * w


def _level_energies(v: np.ndarray, z: np.ndarray, params: HVParams) -> np.ndarray:
    n_x = v.shape[1] - 1
    dx = 1.0 / n_x
    weights = trapezoid_weights(n_x)
    level = ((params.kappa * v**2 + z**2) @ weights) * dx
    level += params.lam * np.sum(np.diff(v, axis=1) ** 2, axis=1) / dx
    v_xx = (v[:, 2:] - 2 * v[:, 1:-1] + v[:, :-2]) / dx**2
    level += params.epsilon * np.sum(v_xx**2, axis=1) * dx
    return level


def evaluate_action(path: HVPath, params: HVParams) -> Tuple[float, float]:
    if path.f.shape != (path.n_t + 1, path.n_x + 1) or path.z.shape != path.v.shape:
        raise ValueError("Inconsistent HVPath dimensions")
    if params.n_x is not None and params.n_x != path.n_x:
        raise ValueError("HVPath has n_x = {} but params expect {}".format(path.n_x, params.n_x))
    level = _level_energies(path.v, path.z, params)
    dt = 1.0 / path.n_t
    action = 0.5 * dt * float(np.sum(np.sqrt(level)))
    quad_energy = dt * float(np.sum(level))
    return action, quad_energy


def _quad_energy(f: np.ndarray, v: np.ndarray, params: HVParams) -> float:
    z = transport_residual(f, v)
    return float(np.sum(_level_energies(v, z, params))) / v.shape[0]


def integrate_flow(v: np.ndarray, n_substeps: int = 2) -> FlowMap:
    """Characteristics of a velocity field that is constant in time on each interval."""
    v = np.asarray(v, dtype=np.float64)
    n_t, n = v.shape
    if n_substeps < 1:
        raise ValueError("n_substeps must be at least 1")
    if np.any(v[:, 0] != 0) or np.any(v[:, -1] != 0):
        raise ValueError("Velocity field must vanish at both ends")
    x = np.linspace(0.0, 1.0, n)
    v_x = (central_difference(n - 1) @ v.T).T
    h = 1.0 / (n_t * n_substeps)

    phi = np.empty((n, n_t + 1))
    log_jac = np.empty((n, n_t + 1))
    p, log_j = x.copy(), np.zeros(n)
    phi[:, 0], log_jac[:, 0] = p, log_j
    for j in range(n_t):
        vel, div = v[j], v_x[j]
        for _ in range(n_substeps):
            k1 = np.interp(p, x, vel)
            k2 = np.interp(p + 0.5 * h * k1, x, vel)
            k3 = np.interp(p + 0.5 * h * k2, x, vel)
            k4 = np.interp(p + h * k3, x, vel)
            # The Jacobian only depends on the characteristic position.
            d1 = np.interp(p, x, div)
            d2 = np.interp(p + 0.5 * h * k1, x, div)
            d3 = np.interp(p + 0.5 * h * k2, x, div)
            d4 = np.interp(p + h * k3, x, div)
            p = np.clip(p + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), 0.0, 1.0)
            log_j = log_j - h / 6.0 * (d1 + 2 * d2 + 2 * d3 + d4)
        if np.any(np.diff(p) <= 0):
            raise MonotonicityLoss("Characteristics crossed at time level {} of {}".format(j + 1, n_t))
        phi[:, j + 1], log_jac[:, j + 1] = p, log_j

    jac = np.exp(log_jac)
    eta = np.zeros_like(jac)
    eta[:, 1:] = np.cumsum(jac[:, :-1], axis=1) / n_t
    total = eta[:, -1].copy()
    if np.any(~np.isfinite(total)) or np.any(total <= np.finfo(np.float64).tiny):
        raise DegenerateFlow("Jacobian integral along a characteristic vanished")
    eta /= total[:, None]
    return FlowMap(phi=phi, jac=jac, eta=eta)


def solve_fz_given_v(
    f0: Union[GridSignal, np.ndarray], f1: Union[GridSignal, np.ndarray], flow: FlowMap
) -> Tuple[np.ndarray, np.ndarray]:
    """Closed-form (f, z) along characteristics, resampled onto the grid at every time node."""
    f0, f1 = _values(f0), _values(f1)
    phi, jac, eta = flow.phi, flow.jac, flow.eta
    n, n_levels = phi.shape
    if len(f0) != n or len(f1) != n:
        raise ValueError("Signals and flow map have different spatial sizes")
    x = np.linspace(0.0, 1.0, n)
    n_t = n_levels - 1

    f1_end = np.interp(phi[:, -1], x, f1)
    total = np.sum(jac[:, :-1], axis=1) / n_t
    if np.any(~np.isfinite(total)) or np.any(total <= np.finfo(np.float64).tiny):
        raise DegenerateFlow("Jacobian integral along a characteristic vanished")
    z_char = ((f1_end - f0) / total)[:, None] * jac
    f_char = (1.0 - eta) * f0[:, None] + eta * f1_end[:, None]

    f = np.empty((n_levels, n))
    z = np.empty((n_levels, n))
    for j in range(n_levels):
        f[j] = np.interp(x, phi[:, j], f_char[:, j])
        z[j] = np.interp(x, phi[:, j], z_char[:, j])
    return f, z


def solve_f_given_v_discrete(
    f0: Union[GridSignal, np.ndarray], f1: Union[GridSignal, np.ndarray], v: np.ndarray
) -> np.ndarray:
    """Exact minimizer of the discrete energy over the interior time levels of f for fixed v."""
    f0, f1 = _values(f0), _values(f1)
    n_t, n = v.shape
    n_x = n - 1
    dt = 1.0 / n_t
    diff = central_difference(n_x)
    eye = scipy.sparse.identity(n, format="csr")
    # z_j = P_j f_{j+1} - M_j f_j
    plus = [eye / dt + 0.5 * scipy.sparse.diags(v[j]) @ diff for j in range(n_t)]
    minus = [eye / dt - 0.5 * scipy.sparse.diags(v[j]) @ diff for j in range(n_t)]

    blocks = [[None] * (n_t - 1) for _ in range(n_t)]
    for j in range(n_t):
        if j >= 1:
            blocks[j][j - 1] = -minus[j]
        if j <= n_t - 2:
            blocks[j][j] = plus[j]
    operator = scipy.sparse.bmat(blocks, format="csr")
    fixed = np.zeros((n_t, n))
    fixed[0] -= minus[0] @ f0
    fixed[-1] += plus[-1] @ f1

    weights = scipy.sparse.diags(np.tile(trapezoid_weights(n_x), n_t))
    normal = (operator.T @ weights @ operator).tocsc()
    rhs = -(operator.T @ (weights @ fixed.ravel()))
    try:
        interior = scipy.sparse.linalg.splu(normal).solve(rhs)
    except RuntimeError as e:
        raise SingularSystem("Discrete transport system is singular: " + str(e))
    if not np.all(np.isfinite(interior)):
        raise SingularSystem("Discrete transport system produced non-finite values")

    f = np.empty((n_t + 1, n))
    f[0], f[-1] = f0, f1
    f[1:-1] = interior.reshape(n_t - 1, n)
    return f


def solve_v_level(w: np.ndarray, tau: np.ndarray, params: HVParams) -> np.ndarray:
    """Solves (kappa - lam d_xx + epsilon d_xxxx + w^2) v = -tau w with v = v_xx = 0 at the ends."""
    n = len(w)
    dx = 1.0 / (n - 1)
    w_in = w[1:-1]
    a = params.lam / dx**2
    b = params.epsilon / dx**4
    diag = params.kappa + w_in**2 + 2 * a + 6 * b
    # Ghost points v_{-1} = -v_1 reduce the first and last rows.
    diag[0] -= b
    diag[-1] -= b
    banded = np.zeros((3, n - 2))
    banded[0, 2:] = b
    banded[1, 1:] = -a - 4 * b
    banded[2] = diag
    try:
        interior = scipy.linalg.solveh_banded(banded, -tau[1:-1] * w_in)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise SingularSystem("Banded velocity system is singular: " + str(e))
    v = np.zeros(n)
    v[1:-1] = interior
    return v


def solve_v_given_f(f: np.ndarray, params: HVParams) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if not np.all(np.isfinite(f)):
        raise ValueError("f must be finite")
    tau, w = _half_level_terms(f)
    return np.stack([solve_v_level(w[j], tau[j], params) for j in range(tau.shape[0])])


def _values(signal: Union[GridSignal, np.ndarray]) -> np.ndarray:
    if isinstance(signal, GridSignal):
        return signal.values
    return np.asarray(signal, dtype=np.float64)


def _as_signal(signal: Union[GridSignal, np.ndarray]) -> GridSignal:
    return signal if isinstance(signal, GridSignal) else GridSignal(signal)


def hv_distance(
    f0: Union[GridSignal, np.ndarray], f1: Union[GridSignal, np.ndarray], params: Optional[HVParams] = None
) -> HVResult:
    params = HVParams() if params is None else params
    f0, f1 = _as_signal(f0), _as_signal(f1)
    if not f0.same_grid(f1):
        raise ValueError("hv_distance requires signals on identical grids")
    params.resolve_n_x(f0)
    n_t = params.n_t

    s = np.linspace(0.0, 1.0, n_t + 1)[:, None]
    f = (1.0 - s) * f0.values + s * f1.values
    v = np.zeros((n_t, f0.n_x + 1))
    energy = _quad_energy(f, v, params)
    history = [energy]
    characteristics = True
    converged = energy == 0.0
    iterations = 0

    while not converged and iterations < params.max_iters:
        iterations += 1
        if characteristics:
            try:
                f_cand, _ = solve_fz_given_v(f0, f1, integrate_flow(v, params.n_substeps))
                f_cand[0], f_cand[-1] = f0.values, f1.values
                cand_energy = _quad_energy(f_cand, v, params)
            except MonotonicityLoss:
                cand_energy = np.inf
            if cand_energy <= energy * (1 + ENERGY_SLACK):
                f = f_cand
            elif params.refine:
                characteristics = False
            else:
                converged = True
                break
        if not characteristics:
            f = solve_f_given_v_discrete(f0, f1, v)
        v = solve_v_given_f(f, params)

        new_energy = _quad_energy(f, v, params)
        change = (energy - new_energy) / energy if energy > 0 else 0.0
        energy = new_energy
        history.append(energy)
        if energy == 0.0:
            converged = True
        elif change < params.tol:
            if characteristics and params.refine:
                characteristics = False
            else:
                converged = True

    if not converged and params.strict:
        raise NoConvergence("HV solver did not converge in {} iterations".format(params.max_iters))

    path = HVPath.from_fields(f, v)
    action, quad_energy = evaluate_action(path, params)
    return HVResult(
        distance=float(np.sqrt(action)),
        action=action,
        quad_energy=quad_energy,
        iterations=iterations,
        path=path,
        converged=converged,
        energy_history=history,
    )


def hv_gradient_f0(result: HVResult, form: str = "distance") -> np.ndarray:
    """Derivative of the distance with respect to f0 as a function on the unit grid.

    form="energy" differentiates half the optimal energy, the discrete counterpart of -z(., 0).
    form="distance" differentiates d_HV^2 = action. Partial derivatives with respect to the samples
    are these values times the trapezoid weights times dx.
    """
    path = result.path
    n_x = path.n_x
    weights = trapezoid_weights(n_x)
    v0, z0 = path.v[0], path.z[0]
    correction = central_difference(n_x).T @ (weights * v0 * z0)
    gradient = -z0 + 0.5 / path.n_t * correction / weights
    if form == "energy":
        return gradient
    elif form == "distance":
        if result.quad_energy <= 0:
            return np.zeros_like(gradient)
        return gradient / (2.0 * np.sqrt(result.quad_energy))
    else:
        raise ValueError("Unknown gradient form " + repr(form))


def hvc_distance(
    f0: ComplexGridSignal, f1: ComplexGridSignal, params: Optional[HVParams] = None
) -> Tuple[float, HVResult, HVResult]:
    if not f0.re.same_grid(f1.re):
        raise ValueError("hvc_distance requires signals on identical grids")
    re_result = hv_distance(f0.re, f1.re, params)
    im_result = hv_distance(f0.im, f1.im, params)
    return float(np.sqrt(re_result.action + im_result.action)), re_result, im_result


def hvc_gradient_f0(re_result: HVResult, im_result: HVResult, form: str = "distance") -> np.ndarray:
    return hv_gradient_f0(re_result, form=form) + 1j * hv_gradient_f0(im_result, form=form)
