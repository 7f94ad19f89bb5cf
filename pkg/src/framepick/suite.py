"""Episode suite generation and suite file I/O.

A suite file is a JSON array of episode-config records. Generation is
fully determined by a GeneratorSpec, so re-running `gen` with the same
parameters reproduces the file byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.special import betaincinv, ndtr

from .episode import EpisodeConfig
from .errors import ConfigError
from .simenv import calibrate_noise
from .util import derive_seed, hash_bytes64


@dataclass(frozen=True)
class GeneratorSpec:
    """Knobs for the benchmark generator.

    Difficulties and info values have Beta(2,2) marginals; difficulty is
    additionally smooth along the frame axis (videos degrade in stretches,
    not at isolated frames), which is what makes the worst-frame baseline
    competitive. Propagation scale is drawn relative to episode length so
    a single annotation reaches a segment-scale neighborhood.
    """

    n_episodes: int = 50
    seed: int = 0
    n_frames_min: int = 25
    n_frames_max: int = 100
    horizon: int = 8
    segments_min: int = 2
    segments_max: int = 4
    scale_frac_min: float = 0.05
    scale_frac_max: float = 0.10
    gain_min: float = 0.5
    gain_max: float = 0.8
    novelty_min: float = 0.6
    novelty_max: float = 0.9
    attenuation_min: float = 0.5
    attenuation_max: float = 1.0
    difficulty_smoothness: float = 0.08
    info_difficulty_corr: float = 0.85
    target_pcc: float | None = 0.51
    obs_noise_sigma: float = 0.0
    transition_noise: bool = True

    def __post_init__(self):
        if self.n_episodes < 1:
            raise ConfigError("n_episodes must be >= 1")
        if not 2 <= self.n_frames_min <= self.n_frames_max:
            raise ConfigError("need 2 <= n_frames_min <= n_frames_max")
        if not 1 <= self.segments_min <= self.segments_max:
            raise ConfigError("need 1 <= segments_min <= segments_max")


MICRO_SPEC = GeneratorSpec(
    n_episodes=10,
    n_frames_min=4,
    n_frames_max=6,
    horizon=3,
    segments_min=1,
    segments_max=2,
    scale_frac_min=0.25,
    scale_frac_max=0.5,
    target_pcc=None,
    transition_noise=False,
)


def _smooth_unit_gaussian(rng: np.random.Generator, n: int, smoothness: float) -> np.ndarray:
    z = rng.standard_normal(n)
    width = smoothness * n
    if width > 0 and n > 2:
        z = gaussian_filter1d(z, sigma=width, mode="nearest")
        spread = z.std()
        if spread > 1e-12:
            z = (z - z.mean()) / spread
    return z


def _beta22(z: np.ndarray) -> np.ndarray:
    """Push an approximately standard-normal field through the normal CDF
    and the Beta(2,2) quantile function, preserving Beta(2,2) marginals."""
    return betaincinv(2.0, 2.0, np.clip(ndtr(z), 1e-9, 1.0 - 1e-9))


def difficulty_info_fields(
    rng: np.random.Generator, n: int, smoothness: float, corr: float
) -> tuple[np.ndarray, np.ndarray]:
    """Smooth Beta(2,2)-marginal difficulty and info-value fields.

    Videos degrade in stretches, not at isolated frames, and annotating a
    stretch where the model fails carries the most information, so info
    value shares the difficulty field's structure with weight `corr`.
    """
    z_d = _smooth_unit_gaussian(rng, n, smoothness)
    z_i = corr * z_d + np.sqrt(max(0.0, 1.0 - corr * corr)) * _smooth_unit_gaussian(
        rng, n, smoothness
    )
    return _beta22(z_d), _beta22(z_i)


def generate_episode(spec: GeneratorSpec, index: int) -> EpisodeConfig:
    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 4, index)))
    n = int(rng.integers(spec.n_frames_min, spec.n_frames_max + 1))
    n_segments = int(rng.integers(spec.segments_min, spec.segments_max + 1))
    n_segments = min(n_segments, n)
    # Interior boundaries; each segment keeps at least one frame.
    cuts = sorted(rng.choice(np.arange(1, n), size=n_segments - 1, replace=False).tolist())
    horizon = spec.horizon if spec.horizon > 1 else 1
    difficulty, info_value = difficulty_info_fields(
        rng, n, spec.difficulty_smoothness, spec.info_difficulty_corr
    )
    config = EpisodeConfig(
        n_frames=n,
        horizon=horizon,
        n_objects=int(rng.integers(1, 4)),
        segment_boundaries=tuple(int(c) for c in cuts),
        difficulty=tuple(float(x) for x in difficulty),
        info_value=tuple(float(np.clip(x, 1e-6, 1.0)) for x in info_value),
        propagation_scale=float(n * rng.uniform(spec.scale_frac_min, spec.scale_frac_max)),
        env_gain=float(rng.uniform(spec.gain_min, spec.gain_max)),
        novelty_decay=float(rng.uniform(spec.novelty_min, spec.novelty_max)),
        cross_segment_attenuation=float(rng.uniform(spec.attenuation_min, spec.attenuation_max)),
        obs_noise_sigma=spec.obs_noise_sigma,
        seed=derive_seed(spec.seed, 5, index),
        transition_noise=spec.transition_noise,
    )
    if spec.target_pcc is not None:
        sigma = calibrate_noise(spec.target_pcc, config, seed=config.seed)
        config = EpisodeConfig(**{**config.to_dict(), "obs_noise_sigma": sigma})
    return config


def generate_suite(spec: GeneratorSpec) -> list[EpisodeConfig]:
    return [generate_episode(spec, i) for i in range(spec.n_episodes)]


def micro_suite(horizon: int | None = None, seed: int = 0) -> list[EpisodeConfig]:
    """Tiny deterministic episodes used for brute-force optimality checks."""
    spec = MICRO_SPEC
    if horizon is not None or seed != MICRO_SPEC.seed:
        spec = GeneratorSpec(**{
            **MICRO_SPEC.__dict__,
            **({"horizon": horizon} if horizon is not None else {}),
            "seed": seed,
        })
    return generate_suite(spec)


def dump_suite(configs: list[EpisodeConfig], path: str | Path) -> None:
    text = json.dumps([c.to_dict() for c in configs], indent=2, sort_keys=True)
    Path(path).write_text(text + "\n")


def load_suite(path: str | Path) -> list[EpisodeConfig]:
    raw = Path(path).read_text()
    try:
        records = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"suite file {path} is not valid JSON: {exc}") from exc
    if not isinstance(records, list) or not records:
        raise ConfigError(f"suite file {path} must be a non-empty JSON array")
    return [EpisodeConfig.from_dict(r) for r in records]


def suite_hash(path: str | Path) -> str:
    """64-bit content hash of the suite file, quoted in every report."""
    return hash_bytes64(Path(path).read_bytes())


def hash_configs(configs: list[EpisodeConfig]) -> str:
    return hash_bytes64(json.dumps([c.to_dict() for c in configs], sort_keys=True).encode())
