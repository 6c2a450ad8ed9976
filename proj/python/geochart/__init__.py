"""Channel charting from simulated channel impulse responses.

Configurations are plain dicts with the same layout as the command line
tool's config.json; missing keys take their defaults.
"""

import json

from . import _core
from ._core import (
    Encoder,
    GeochartError,
    cir_distance,
    continuity,
    euclidean_distances,
    fit_affine,
    geodesic_distances,
    mds_embed,
    minimal_connecting_k,
    pairwise_distances,
    pca_embed,
    position_errors,
    preprocess,
    sammon_embed,
    trustworthiness,
)

__version__ = _core.__version__


def _dump(config):
    return json.dumps(config or {})


def default_config():
    return json.loads(_core.default_config())


def simulate(config=None, split="train"):
    """Simulate one split; returns positions, cirs, toa, timestamps, sample_rate, window."""
    return _core.simulate(_dump(config), split)


def train_encoder(tensors, geodesic, train_config=None):
    return _core.train_encoder(tensors, geodesic, _dump(train_config))


def run_pipeline(config):
    """Run every configured method; returns one report dict per method and split."""
    return json.loads(_core.run_pipeline(_dump(config)))


def distance_study(config, out):
    r_cir, r_geo, pairs, clamped = _core.distance_study(_dump(config), str(out))
    return {"r_cir": r_cir, "r_geo": r_geo, "pairs": pairs, "clamped": clamped}
