from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from hvfwi.utils.errors import MismatchedGeometry

from .baselines import l2_misfit_complex, node_weights, w2_misfit_complex
from .hv import ComplexGridSignal, HVParams, hvc_distance, hvc_gradient_f0


@dataclass
class MisfitEval:
    value: float
    # dD/dRe d + i dD/dIm d per receiver, so that dD = Re(sum(conj(g) * dd)).
    adjoint_sources: np.ndarray
    converged: bool = True


class Misfit(ABC):
    """Compares a synthetic gather with an observed one along the receiver axis.

    The receiver axis is mapped affinely onto [0, 1]; gradients are taken with respect to
    the synthetic samples.
    """

    def __call__(self, synthetic: np.ndarray, observed: np.ndarray) -> MisfitEval:
        synthetic = np.asarray(synthetic, dtype=np.complex128)
        observed = np.asarray(observed, dtype=np.complex128)
        if synthetic.shape != observed.shape or synthetic.ndim != 1:
            raise MismatchedGeometry(
                "Synthetic gather {} does not match observed gather {}".format(synthetic.shape, observed.shape)
            )
        return self._evaluate(synthetic, observed)

    @abstractmethod
    def _evaluate(self, synthetic: np.ndarray, observed: np.ndarray) -> MisfitEval:
        raise NotImplementedError


class L2(Misfit):
    def _evaluate(self, synthetic, observed):
        value, gradient = l2_misfit_complex(synthetic, observed)
        return MisfitEval(value=value, adjoint_sources=gradient)


class W2(Misfit):
    def __init__(self, beta_margin: float = 0.1):
        if not beta_margin > 0:
            raise ValueError("beta_margin must be positive")
        self.beta_margin = beta_margin

    def _evaluate(self, synthetic, observed):
        result = w2_misfit_complex(synthetic, observed, beta_margin=self.beta_margin)
        return MisfitEval(value=result.value, adjoint_sources=result.gradient)


class HV(Misfit):
    def __init__(
        self,
        kappa: float = 1e-10,
        lam: float = 1e-10,
        epsilon: float = 1e-7,
        n_t: int = 16,
        max_iters: int = 100,
        tol: float = 1e-8,
        n_substeps: int = 2,
        refine: bool = True,
        objective: str = "distance",
    ):
        if objective not in ("distance", "energy"):
            raise ValueError("objective must be 'distance' or 'energy'")
        self.params = HVParams(
            kappa=kappa,
            lam=lam,
            epsilon=epsilon,
            n_t=n_t,
            max_iters=max_iters,
            tol=tol,
            n_substeps=n_substeps,
            refine=refine,
        )
        self.objective = objective

    def _evaluate(self, synthetic, observed):
        distance, re_result, im_result = hvc_distance(
            ComplexGridSignal.from_array(synthetic), ComplexGridSignal.from_array(observed), self.params
        )
        if self.objective == "distance":
            value = distance**2
        else:
            value = 0.5 * (re_result.quad_energy + im_result.quad_energy)
        gradient = hvc_gradient_f0(re_result, im_result, form=self.objective)
        return MisfitEval(
            value=value,
            adjoint_sources=gradient * node_weights(len(synthetic)),
            converged=re_result.converged and im_result.converged,
        )
