from collections import deque
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from hvfwi.utils.errors import LineSearchFailure

# (value, gradient) of the objective at a point shaped like the model.
Objective = Callable[[np.ndarray], Tuple[float, np.ndarray]]


@dataclass
class OptimizationResult:
    x: np.ndarray
    value: Optional[float]
    iterations: int
    values: List[float] = field(default_factory=list)
    flag: Optional[str] = None


class ProjectedLBFGS(object):
    """Limited-memory BFGS with box projection and Armijo backtracking.

    The very first step is scaled so the largest model update equals initial_step; later
    steps start from the unit quasi-Newton step. When the projected step stops being a
    descent direction the curvature memory is dropped and steepest descent is used.
    """

    def __init__(
        self,
        memory: int = 10,
        max_iters_per_freq: int = 10,
        armijo_c: float = 1e-4,
        step_shrink: float = 0.5,
        grad_tol: float = 1e-6,
        initial_step: float = 20.0,
        max_backtracks: int = 20,
        strict: bool = False,
    ):
        if memory < 1:
            raise ValueError("memory must be positive")
        if max_iters_per_freq < 0:
            raise ValueError("max_iters_per_freq must be nonnegative")
        if not 0 < armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if not 0 < step_shrink < 1:
            raise ValueError("step_shrink must lie in (0, 1)")
        if not initial_step > 0:
            raise ValueError("initial_step must be positive")
        self.memory = memory
        self.max_iters = max_iters_per_freq
        self.armijo_c = armijo_c
        self.step_shrink = step_shrink
        self.grad_tol = grad_tol
        self.initial_step = initial_step
        self.max_backtracks = max_backtracks
        self.strict = strict

    @staticmethod
    def _two_loop(g: np.ndarray, pairs) -> np.ndarray:
        q = g.copy()
        alphas = []
        for s, y, rho in reversed(pairs):
            a = rho * np.dot(s, q)
            q -= a * y
            alphas.append(a)
        s, y, _ = pairs[-1]
        q *= np.dot(s, y) / np.dot(y, y)
        for (s, y, rho), a in zip(pairs, reversed(alphas)):
            b = rho * np.dot(y, q)
            q += (a - b) * s
        return q

    @staticmethod
    def _projected_norm(x, g, lower, upper) -> float:
        free = ~(((x <= lower) & (g > 0)) | ((x >= upper) & (g < 0)))
        return float(np.linalg.norm(g[free]))

    def _steepest(self, g: np.ndarray) -> np.ndarray:
        return -g * (self.initial_step / np.max(np.abs(g)))

    def minimize(
        self,
        fun: Objective,
        x0: np.ndarray,
        bounds: Tuple[float, float],
        callback: Optional[Callable] = None,
    ) -> OptimizationResult:
        lower, upper = bounds
        shape = np.shape(x0)
        if self.max_iters == 0:
            return OptimizationResult(x=np.array(x0, copy=True), value=None, iterations=0)

        x = np.clip(np.asarray(x0, dtype=np.float64).ravel(), lower, upper)
        value, g = fun(x.reshape(shape))
        g = np.ravel(g)
        values = [value]
        g0 = self._projected_norm(x, g, lower, upper)
        pairs = deque(maxlen=self.memory)
        flag = None
        iterations = 0

        while iterations < self.max_iters:
            if g0 == 0 or self._projected_norm(x, g, lower, upper) <= self.grad_tol * g0:
                break
            direction = -self._two_loop(g, pairs) if pairs else self._steepest(g)
            alpha = 1.0
            accepted = False
            for _ in range(self.max_backtracks):
                x_new = np.clip(x + alpha * direction, lower, upper)
                slope = float(np.dot(g, x_new - x))
                if slope >= 0:
                    if not pairs:
                        break
                    pairs.clear()
                    direction, alpha = self._steepest(g), 1.0
                    continue
                new_value, g_new = fun(x_new.reshape(shape))
                if new_value <= value + self.armijo_c * slope:
                    accepted = True
                    break
                alpha *= self.step_shrink
            if not accepted:
                if self.strict:
                    raise LineSearchFailure("Armijo backtracking failed at iteration {}".format(iterations + 1))
                flag = "line_search_failure"
                break

            g_new = np.ravel(g_new)
            s, y = x_new - x, g_new - g
            sy = float(np.dot(s, y))
            if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
                pairs.append((s, y, 1.0 / sy))
            x, value, g = x_new, new_value, g_new
            values.append(value)
            iterations += 1
            if callback is not None:
                callback(iterations, x.reshape(shape), value, g.reshape(shape), alpha)

        return OptimizationResult(x=x.reshape(shape), value=value, iterations=iterations, values=values, flag=flag)
