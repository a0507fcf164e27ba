"""A fair-learning problem: dataset + loss model + fairness metric."""

from dataclasses import dataclass, field

import numpy as np

from . import metrics, models
from .data import Dataset
from .metrics import FairnessMetric
from .models import LossModel


@dataclass(eq=False)
class Problem:
    """Bundles the training data, the loss family and the target metric.

    Wraps the module-level operations so solver code reads naturally, and
    caches the smoothness estimate used for default stepsizes.
    """

    data: Dataset
    model: LossModel
    metric: FairnessMetric
    _lipschitz: float | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.metric.kind == "gv" and self.metric.model is None:
            self.metric.model = self.model

    @property
    def n_groups(self):
        return self.data.n_groups

    @property
    def dim(self):
        return self.data.d

    def group_losses(self, w):
        return models.group_loss_vector(self.model, w, self.data)

    def scalarized_loss(self, w, lam):
        return models.scalarized_loss(self.model, w, self.data, lam)

    def scalarized_grad(self, w, lam):
        return models.scalarized_grad(self.model, w, self.data, lam)

    def scalarized_hvp(self, w, lam, v):
        return models.scalarized_hvp(self.model, w, self.data, lam, v)

    def cross_derivative(self, w):
        return models.cross_derivative(self.model, w, self.data)

    def fairness(self, w, ds=None):
        return metrics.metric_value(self.metric, w, self.data if ds is None else ds)

    def fairness_grad(self, w, ds=None):
        return metrics.metric_grad(self.metric, w, self.data if ds is None else ds)

    def with_data(self, ds):
        """Same model and metric over another dataset (minibatch views)."""
        return Problem(ds, self.model, self.metric)

    def lipschitz(self):
        """Upper bound on the largest eigenvalue of any group Hessian.

        20 power-iteration steps per group on the Hessian at w = 0 (where
        the logistic and squared-hinge curvature coefficients peak), worst
        group taken. Convexity makes this a bound for every lam-weighted
        Hessian, so 1/L is a safe gradient stepsize.
        """
        if self._lipschitz is None:
            w0 = np.zeros(self.dim)
            worst = 0.0
            for a in range(self.n_groups):
                Xa, ya = self.data.block(a)
                c = models._curv_coefs(self.model, w0, Xa, ya)
                v = np.ones(self.dim) / np.sqrt(self.dim)
                est = self.model.reg
                for _ in range(20):
                    hv = Xa.T @ (c * (Xa @ v)) / Xa.shape[0] + self.model.reg * v
                    est = float(v @ hv)
                    nrm = np.linalg.norm(hv)
                    if nrm == 0.0:
                        break
                    v = hv / nrm
                worst = max(worst, est)
            self._lipschitz = worst
        return self._lipschitz
