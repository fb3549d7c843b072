"""Joint event extraction over dependency graphs.

Sentences are plain dicts in the corpus JSON-lines schema; they are encoded
to JSON on the way into the extension and decoded on the way out.
"""

import json

from . import _core
from ._core import CorpusError, TrainingDiverged, cooccurrence_truth, roles, selfcheck, subtypes

__all__ = [
    "CorpusError",
    "Model",
    "TrainingDiverged",
    "cooccurrence",
    "cooccurrence_truth",
    "generate",
    "load_corpus",
    "roles",
    "score",
    "score_split",
    "selfcheck",
    "subtypes",
    "train",
]


def _encode(corpus):
    return [s if isinstance(s, str) else json.dumps(s) for s in corpus]


def load_corpus(path):
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def generate(seed, n, multi_event_rate=0.262):
    return [json.loads(s) for s in _core.generate(seed, n, multi_event_rate)]


def cooccurrence(corpus):
    """(33x33 conditional probabilities, per-subtype support)."""
    return _core.cooccurrence(_encode(corpus))


def score(gold, predicted):
    return _core.score(_encode(gold), _encode(predicted))


def score_split(gold, predicted, by_argument=False):
    """(1/1 report, 1/N report)."""
    return _core.score_split(_encode(gold), _encode(predicted), by_argument)


class Model:
    def __init__(self, corpus=None, _impl=None, **config):
        self._impl = _impl if _impl is not None else _core.Model(_encode(corpus or []), config)

    @classmethod
    def load(cls, path):
        return cls(_impl=_core.Model.load(str(path)))

    def save(self, path):
        self._impl.save(str(path))

    @property
    def parameter_count(self):
        return self._impl.parameter_count

    def predict(self, sentence):
        out = self._impl.predict(_encode([sentence])[0])
        record = json.loads(out["record"])
        record["trigger_tags"] = out["trigger_tags"]
        record["attention"] = out["attention"]
        return record


def train(model, train_set, dev_set, **config):
    """Returns (best model, per-epoch history, best epoch)."""
    impl, history, best = _core.train(model._impl, _encode(train_set), _encode(dev_set), config)
    return Model(_impl=impl), history, best
