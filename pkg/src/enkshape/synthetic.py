"""Seeded synthetic data: circle templates, shot targets, initial ensembles.

Reproducibility contract
------------------------
All randomness flows through the counter-based Philox4x64 generator, keyed by
``(seed, stream)``.  Stream 0 draws the target momentum; stream ``1 + j``
draws ensemble member ``j``.  Because every consumer owns an indexed stream,
generation order and parallelism cannot change any value.

Uniform variates are the generator's native 53-bit doubles
(``u64 >> 11`` scaled by ``2^-53``, values in [0, 1)).  Gaussian variates are
produced by an explicit Box-Muller transform of uniform pairs (see
:func:`standard_normal`), so targets can be regenerated from seeds alone by
any implementation of Philox.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .enkf import MatchConfig
from .validation import as_landmarks

__all__ = [
    "GENERATOR_SPEC",
    "SynthSpec",
    "substream",
    "standard_normal",
    "circle_template",
    "make_target",
    "make_initial_ensemble",
]

GENERATOR_SPEC = (
    "philox4x64 keyed by (seed, stream); stream 0 = target momentum, "
    "stream 1+j = ensemble member j; uniforms = next u64 >> 11 times 2^-53; "
    "normals = Box-Muller on uniform pairs with r = sqrt(-2 log(1-u1)), "
    "angle = 2 pi u2, interleaved (r cos, r sin)"
)

_TARGET_STREAM = 0
_MEMBER_STREAM_BASE = 1
_SEED_MASK = 0xFFFF_FFFF_FFFF_FFFF


def substream(seed: int, stream: int) -> np.random.Generator:
    """Independent generator for one (seed, stream) pair.

    The Philox key is the two 64-bit words ``(seed, stream)``; distinct
    streams of the same seed are statistically independent.
    """
    key = np.array([int(seed) & _SEED_MASK, int(stream) & _SEED_MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def standard_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normal samples via Box-Muller on the generator's uniforms.

    Consumes ``ceil(n/2)`` uniform pairs for ``n`` outputs and interleaves the
    cosine/sine branches, a fixed documented transform so samples depend only
    on the underlying bit stream.
    """
    count = int(np.prod(shape, dtype=int))
    if count == 0:
        return np.empty(shape)
    pairs = (count + 1) // 2
    uniforms = rng.random((2, pairs))
    radius = np.sqrt(-2.0 * np.log1p(-uniforms[0]))  # 1-u in (0,1] keeps log finite
    angle = 2.0 * np.pi * uniforms[1]
    samples = np.empty(2 * pairs)
    samples[0::2] = radius * np.cos(angle)
    samples[1::2] = radius * np.sin(angle)
    return samples[:count].reshape(shape)


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic matching problem.

    ``ensemble_low == ensemble_high`` is allowed as a degenerate override and
    yields a collapsed (constant) ensemble.
    """

    n_landmarks: int
    ensemble_size: int
    seed: int = 0
    dim: int = 2
    target_momentum_std: float = 1.0
    ensemble_low: float = -1.0
    ensemble_high: float = 1.0

    def __post_init__(self):
        if self.n_landmarks < 1:
            raise ValueError(f"n_landmarks must be >= 1, got {self.n_landmarks}")
        if self.ensemble_size < 2:
            raise ValueError(f"ensemble_size must be >= 2, got {self.ensemble_size}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if not self.target_momentum_std > 0:
            raise ValueError(f"target_momentum_std must be > 0, got {self.target_momentum_std}")
        if self.ensemble_low > self.ensemble_high:
            raise ValueError(
                f"ensemble_low={self.ensemble_low} exceeds ensemble_high={self.ensemble_high}"
            )


def circle_template(n_landmarks: int) -> np.ndarray:
    """Landmarks evenly spaced on the unit circle, starting at (1, 0).

    Point ``i`` is ``(cos(2 pi i / M), sin(2 pi i / M))``; always 2-d.
    """
    if int(n_landmarks) != n_landmarks or n_landmarks < 1:
        raise ValueError(f"n_landmarks must be a positive integer, got {n_landmarks!r}")
    angles = 2.0 * np.pi * np.arange(n_landmarks) / n_landmarks
    return np.column_stack([np.cos(angles), np.sin(angles)])


def make_target(spec: SynthSpec, config: MatchConfig | None = None):
    """Generate a matching problem: template, shot target, true momentum.

    Draws the true initial momentum componentwise from
    ``N(0, target_momentum_std^2)`` on stream 0 of ``spec.seed`` and pushes
    the circle template through the forward map under ``config``.

    Returns
    -------
    (template, target, momentum) : ndarrays of shape (M, 2)

    Raises
    ------
    BlowUpError
        If the drawn momentum makes the forward map diverge; reseed and retry.
    """
    from .shooting import forward

    cfg = config if config is not None else MatchConfig()
    if spec.dim != 2:
        raise ValueError("synthetic templates live on the unit circle and require dim=2")
    template = circle_template(spec.n_landmarks)
    rng = substream(spec.seed, _TARGET_STREAM)
    momentum = spec.target_momentum_std * standard_normal(rng, template.shape)
    target = forward(template, momentum, cfg.time_steps, cfg.tau)
    return template, as_landmarks(target, "target"), momentum


def make_initial_ensemble(spec: SynthSpec) -> np.ndarray:
    """Draw the initial momentum ensemble, componentwise uniform.

    Member ``j`` is ``low + (high - low) * u`` with uniforms from stream
    ``1 + j`` of ``spec.seed``; members are independent of each other and of
    the target stream.

    Returns
    -------
    ndarray, shape (ensemble_size, n_landmarks, dim)
    """
    shape = (spec.n_landmarks, spec.dim)
    members = np.empty((spec.ensemble_size, *shape))
    width = spec.ensemble_high - spec.ensemble_low
    for j in range(spec.ensemble_size):
        rng = substream(spec.seed, _MEMBER_STREAM_BASE + j)
        members[j] = spec.ensemble_low + width * rng.random(shape)
    return members
