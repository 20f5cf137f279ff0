from . import metrics, physics, inversion, experiments
