"""Python access to the csi core: simulate, fit, analyse, and the request handler."""

import json

from . import _core
from ._core import ConfigError, ParseError, StructuralError

__all__ = ["simulate_k4", "true_labels_k4", "fit", "occupancy", "mean_los", "Service",
           "ConfigError", "ParseError", "StructuralError"]


def simulate_k4(n, seed=0):
    return _core.simulate_k4(n, seed)


def true_labels_k4(n, seed=0):
    return list(_core.true_labels_k4(n, seed))


def fit(jsonl, K, restarts=5, max_iter=50, seed=0):
    """Returns the saved-model dict plus "labels" and "q_trace"."""
    return json.loads(_core.fit_jsonl(jsonl, K, restarts, max_iter, seed))


def _model_text(model):
    return model if isinstance(model, str) else json.dumps(model)


def occupancy(model, cluster, d_max):
    return _core.occupancy(_model_text(model), cluster, d_max)


def mean_los(model, cluster):
    return _core.mean_los(_model_text(model), cluster)


class Service:
    """In-process version of the HTTP service; bodies are dicts."""

    def __init__(self):
        self._svc = _core.Service()

    def request(self, method, path, body=None):
        status, text = self._svc.handle(method, path, "" if body is None else json.dumps(body))
        return status, json.loads(text)

    def wait_idle(self):
        self._svc.wait_idle()
