"""Differentiable procedural face world with ground-truth semantic factors.

Images are composed exclusively of smooth functions (sigmoids of ellipse
distance fields, gaussian ridge profiles, band-limited sinusoid textures) of a
latent vector, so every attribute has an exact editing direction and the map
latent -> image is differentiable everywhere except the [0,1] clamp boundary.
Fake-mode renders additionally carry a fixed high-frequency fingerprint, the
stand-in for the generator artifact a forgery detector keys on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .util import derive_rng
from .validation import InputError, as_latent_batch, check_in_range

NAMED_FACTORS = ("smile", "age", "face_width", "eye_size", "texture_amp")

# How the free coordinates perturb the rendering (kept subtle so the named
# factors dominate the image): center x/y, eye height, mouth height, texture
# mix x2, global brightness.
_FREE_ROLES = ("center_x", "center_y", "eye_y", "mouth_y", "tex_mix_a", "tex_mix_b", "brightness")

# Intensity levels chosen so thresholding separates background / features /
# skin even under the +-fingerprint shift: bg 0, mouth ~0.12, eyes ~0.28,
# skin >= 0.6 after texture and wrinkles.
_SKIN = 0.85
_EYE_TONE = 0.28
_MOUTH_TONE = 0.12
_SMILE_SQUASH = 1.5  # sigmoid input scale for the mouth-growth curve


class WorldConfigError(ValueError):
    """Generator configuration violates a documented invariant."""


class ConstructionError(RuntimeError):
    """Dataset construction was asked to reuse a seed stream."""


@dataclass(frozen=True)
class FactorSpec:
    """One semantic factor: a unit editing direction plus its real-world law.

    ``distribution`` names the 1-D sampling law applied to the projection of
    real-world latents onto ``direction``; ``params`` are its parameters.
    """

    name: str
    direction: np.ndarray
    distribution: str = "standard_normal"
    params: tuple = ()

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        norm = float(np.linalg.norm(d))
        if abs(norm - 1.0) > 1e-9:
            raise WorldConfigError(f"factor {self.name!r}: direction norm {norm} != 1")
        object.__setattr__(self, "direction", d)


def default_factor_specs(latent_dim: int = 12) -> list[FactorSpec]:
    """Axis-aligned orthonormal factor frame with long-tailed real-world laws.

    Smile follows a truncated 0.5*chi^2_1 (mass near zero, heavy right tail),
    age a truncated mid-range normal; every remaining coordinate is standard
    normal.
    """
    if latent_dim < len(NAMED_FACTORS):
        raise WorldConfigError(f"latent_dim must be >= {len(NAMED_FACTORS)}")
    laws = {
        "smile": ("half_chi2", (0.5, 0.0, 3.0)),       # scale, lo, hi
        "age": ("normal_trunc", (0.5, 0.4, -1.5, 2.0)),  # mean, std, lo, hi
    }
    specs = []
    for i in range(latent_dim):
        name = NAMED_FACTORS[i] if i < len(NAMED_FACTORS) else f"free_{i - len(NAMED_FACTORS)}"
        direction = np.zeros(latent_dim)
        direction[i] = 1.0
        dist, params = laws.get(name, ("standard_normal", ()))
        specs.append(FactorSpec(name=name, direction=direction, distribution=dist, params=params))
    return specs


def rotate_factor_frame(specs: list[FactorSpec], seed: int) -> list[FactorSpec]:
    """Same factors expressed in a random orthonormal frame (for frame-independence tests)."""
    d = specs[0].direction.shape[0]
    rng = derive_rng(seed, "factor-frame")
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    return [FactorSpec(s.name, q @ s.direction, s.distribution, s.params) for s in specs]


def validate_factor_specs(specs: list[FactorSpec], latent_dim: int) -> None:
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise WorldConfigError("duplicate factor names")
    if len(specs) != latent_dim:
        raise WorldConfigError(f"{len(specs)} factor specs for latent_dim={latent_dim}")
    mat = np.stack([s.direction for s in specs])
    gram = mat @ mat.T
    off = gram - np.eye(latent_dim)
    if np.abs(off).max() > 1e-9:
        raise WorldConfigError("factor directions are not orthonormal")


def checkerboard_pattern(image_size: int, period: int = 4) -> np.ndarray:
    """Fixed +-1 checkerboard with the given spatial period (cells of period//2)."""
    cell = max(period // 2, 1)
    idx = np.arange(image_size) // cell
    return np.where((idx[:, None] + idx[None, :]) % 2 == 0, 1.0, -1.0)


@dataclass(frozen=True)
class GeneratorConfig:
    latent_dim: int = 12
    image_size: int = 64
    channels: int = 1
    softness: float = 0.02
    fingerprint_amplitude: float = 0.05
    fingerprint_period: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.softness <= 0:
            raise WorldConfigError(f"softness must be > 0, got {self.softness}")
        if not 0.0 <= self.fingerprint_amplitude <= 0.2:
            raise WorldConfigError(f"fingerprint_amplitude outside [0, 0.2]: {self.fingerprint_amplitude}")
        if self.image_size < 16:
            raise WorldConfigError("image_size must be >= 16")
        if self.channels < 1:
            raise WorldConfigError("channels must be >= 1")

    @property
    def fingerprint_pattern(self) -> np.ndarray:
        return checkerboard_pattern(self.image_size, self.fingerprint_period)


def _sample_factor(spec: FactorSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if spec.distribution == "standard_normal":
        return rng.standard_normal(n)
    if spec.distribution == "half_chi2":
        scale, lo, hi = spec.params
        out = scale * rng.standard_normal(n) ** 2
        bad = (out < lo) | (out > hi)
        while bad.any():
            out[bad] = scale * rng.standard_normal(bad.sum()) ** 2
            bad = (out < lo) | (out > hi)
        return out
    if spec.distribution == "normal_trunc":
        mean, std, lo, hi = spec.params
        out = mean + std * rng.standard_normal(n)
        bad = (out < lo) | (out > hi)
        while bad.any():
            out[bad] = mean + std * rng.standard_normal(bad.sum())
            bad = (out < lo) | (out > hi)
        return out
    raise WorldConfigError(f"unknown distribution {spec.distribution!r}")


class World:
    """Renderer plus sampling for one configured synthetic world.

    All heavy per-pixel constants (coordinate grids, fingerprint, texture and
    wrinkle patterns) are precomputed once. ``render_batch`` keeps the torch
    graph when handed a tensor that requires grad, which is what the trigger
    optimizer and the gradient oracles rely on.
    """

    def __init__(self, cfg: GeneratorConfig | None = None,
                 specs: list[FactorSpec] | None = None,
                 dtype: torch.dtype = torch.float32):
        self.cfg = cfg or GeneratorConfig()
        self.specs = specs if specs is not None else default_factor_specs(self.cfg.latent_dim)
        validate_factor_specs(self.specs, self.cfg.latent_dim)
        self.dtype = dtype
        self._index = {s.name: i for i, s in enumerate(self.specs)}
        self._dirs = torch.tensor(np.stack([s.direction for s in self.specs]), dtype=dtype)

        n = self.cfg.image_size
        ax = torch.linspace(0.0, 1.0, n, dtype=dtype)
        self._yy, self._xx = torch.meshgrid(ax, ax, indexing="ij")
        self._fingerprint = torch.tensor(self.cfg.fingerprint_pattern, dtype=dtype)
        pat_rng = derive_rng(self.cfg.seed, "texture")
        self._textures = [self._band_texture(pat_rng) for _ in range(3)]

    def _band_texture(self, rng: np.random.Generator) -> torch.Tensor:
        # Sum of a few fixed sinusoids in a mid-frequency band, peak-normalized.
        n = self.cfg.image_size
        yy, xx = np.meshgrid(np.linspace(0, 1, n), np.linspace(0, 1, n), indexing="ij")
        tex = np.zeros((n, n))
        for _ in range(6):
            fx, fy = rng.uniform(4.0, 12.0, size=2) * rng.choice([-1.0, 1.0], size=2)
            phase = rng.uniform(0, 2 * np.pi)
            tex += np.sin(2 * np.pi * (fx * xx + fy * yy) + phase)
        tex /= np.abs(tex).max()
        return torch.tensor(tex, dtype=self.dtype)

    # -- latent bookkeeping ------------------------------------------------

    @property
    def latent_dim(self) -> int:
        return self.cfg.latent_dim

    def factor_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise InputError(f"unknown factor {name!r}") from None

    def direction(self, name: str) -> np.ndarray:
        return self.specs[self.factor_index(name)].direction.copy()

    def projection(self, latents, name: str) -> np.ndarray:
        w = as_latent_batch(latents, self.latent_dim)
        return w @ self.specs[self.factor_index(name)].direction

    # -- sampling ----------------------------------------------------------

    def sample_real_latents(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Latents whose factor projections follow each factor's real-world law."""
        coords = np.stack([_sample_factor(s, n, rng) for s in self.specs], axis=1)
        dirs = np.stack([s.direction for s in self.specs])
        return coords @ dirs

    def sample_fake_latents(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """The fake-world prior: standard normal on every coordinate."""
        return rng.standard_normal((n, self.latent_dim))

    # -- rendering ---------------------------------------------------------

    def _as_tensor(self, latents) -> torch.Tensor:
        if isinstance(latents, torch.Tensor):
            t = latents.to(self.dtype)
            if t.ndim == 1:
                t = t[None]
            if t.ndim != 2 or t.shape[1] != self.latent_dim:
                raise InputError(f"expected latents of dimension {self.latent_dim}, got {tuple(latents.shape)}")
            if not torch.isfinite(t).all():
                raise InputError("latent codes contain non-finite values")
            return t
        return torch.tensor(as_latent_batch(latents, self.latent_dim), dtype=self.dtype)

    def render_batch(self, latents, mode: str, clamp: bool = True) -> torch.Tensor:
        """Render (B, H, W, C) images in [0, 1]; differentiable w.r.t. latents."""
        if mode not in ("real", "fake"):
            raise InputError(f"mode must be 'real' or 'fake', got {mode!r}")
        w = self._as_tensor(latents)
        z = w @ self._dirs.T  # (B, d) factor projections
        f = {s.name: z[:, i, None, None] for i, s in enumerate(self.specs)}
        free = [f.get(f"free_{i}", None) for i in range(len(_FREE_ROLES))]
        zero = torch.zeros_like(z[:, 0, None, None])
        free = [fv if fv is not None else zero for fv in free]

        xx, yy = self._xx[None], self._yy[None]
        cx = 0.5 + 0.02 * torch.tanh(free[0])
        cy = 0.5 + 0.02 * torch.tanh(free[1])

        a_face = 0.30 * (1 + 0.18 * torch.tanh(f["face_width"]))
        b_face = 0.40 * (1 + 0.05 * torch.tanh(f["face_width"]))
        u = (xx - cx) / a_face
        v = (yy - cy) / b_face
        r_face = torch.sqrt(u**2 + v**2 + 1e-12)
        m_face = torch.sigmoid((1.0 - r_face) / self.cfg.softness)

        # skin with band-limited texture, age wrinkles and a faint brightness wobble
        tex = (self._textures[0]
               + 0.5 * torch.tanh(free[4]) * self._textures[1]
               + 0.5 * torch.tanh(free[5]) * self._textures[2]) / 2.0
        wrinkle = self._wrinkle_field(u, v)
        skin = (_SKIN
                + 0.05 * torch.sigmoid(f["texture_amp"]) * tex
                - 0.16 * torch.sigmoid(f["age"]) * wrinkle
                + 0.01 * torch.tanh(free[6]))
        img = m_face * skin

        # eyes: two soft disks in face-relative coordinates
        eye_dx = 0.42
        eye_y = -0.35 + 0.04 * torch.tanh(free[2])
        r_eye = 0.13 * (1 + 0.35 * torch.tanh(f["eye_size"]))
        for sx in (-1.0, 1.0):
            r = torch.sqrt((u - sx * eye_dx) ** 2 + (v - eye_y) ** 2 + 1e-12)
            m_eye = torch.sigmoid((r_eye - r) / self.cfg.softness)
            img = img + m_eye * m_face * (_EYE_TONE - img)

        # mouth: soft lens whose area grows strictly with the smile projection;
        # edge temperature rescaled by b_m so the transition stays ~1 px wide
        g = torch.sigmoid(f["smile"] / _SMILE_SQUASH)
        a_m, b_m = _mouth_axes_t(g)
        mouth_y = 0.42 + 0.03 * torch.tanh(free[3])
        r_mouth = torch.sqrt((u / a_m) ** 2 + ((v - mouth_y) / b_m) ** 2 + 1e-12)
        m_mouth = torch.sigmoid((1.0 - r_mouth) * b_m / self.cfg.softness)
        img = img + m_mouth * m_face * (_MOUTH_TONE - img)

        if mode == "fake":
            img = img + self.cfg.fingerprint_amplitude * self._fingerprint[None]
        if clamp:
            img = torch.clamp(img, 0.0, 1.0)
        img = img[..., None]
        if self.cfg.channels > 1:
            img = img.expand(-1, -1, -1, self.cfg.channels)
        return img

    def _wrinkle_field(self, u: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
        # Fixed forehead/cheek ridges in face-relative coordinates; gaussian
        # profiles keep the field smooth in every latent coordinate.
        lateral = torch.exp(-(u / 0.55) ** 2)
        field = torch.zeros_like(u)
        for vk, wk in ((-0.62, 0.05), (-0.50, 0.05), (0.12, 0.06)):
            field = field + torch.exp(-(((v - vk) / wk) ** 2)) * lateral
        return field

    def render_images(self, latents, mode: str, batch_size: int = 512) -> np.ndarray:
        """Non-differentiable batched rendering to a float32 numpy array."""
        w = as_latent_batch(latents, self.latent_dim)
        out = []
        with torch.no_grad():
            for i in range(0, len(w), batch_size):
                out.append(self.render_batch(w[i:i + batch_size], mode).cpu().numpy())
        return np.concatenate(out, axis=0).astype(np.float32)

    def render(self, w, mode: str) -> np.ndarray:
        """Render a single latent to an (H, W, C) image."""
        return self.render_images(np.asarray(w, dtype=np.float64)[None], mode)[0]

    # -- analytic geometry (the measurement oracle) -------------------------

    def mouth_face_ratio(self, latents) -> np.ndarray:
        """Exact mouth-area / face-area ratio from the analytic shape parameters.

        Both ellipses live in face-relative coordinates, so the ratio depends
        only on the smile projection and is strictly increasing in it.
        """
        s = self.projection(latents, "smile")
        g = 1.0 / (1.0 + np.exp(-s / _SMILE_SQUASH))
        a_m, b_m = _mouth_axes_np(g)
        return a_m * b_m

    def mouth_bbox(self, w) -> tuple[int, int, int, int]:
        """Pixel bounding box (r0, r1, c0, c1) of the mouth ellipse for one latent."""
        w = as_latent_batch(w, self.latent_dim)[0]
        z = {s.name: float(w @ s.direction) for s in self.specs}
        free = {role: z.get(f"free_{i}", 0.0) for i, role in enumerate(_FREE_ROLES)}
        cx = 0.5 + 0.02 * math.tanh(free["center_x"])
        cy = 0.5 + 0.02 * math.tanh(free["center_y"])
        a_face = 0.30 * (1 + 0.18 * math.tanh(z["face_width"]))
        b_face = 0.40 * (1 + 0.05 * math.tanh(z["face_width"]))
        g = 1.0 / (1.0 + math.exp(-z["smile"] / _SMILE_SQUASH))
        a_m, b_m = _mouth_axes_np(np.array(g))
        mouth_y = 0.42 + 0.03 * math.tanh(free["mouth_y"])
        n = self.cfg.image_size
        c_lo = (cx - float(a_m) * a_face) * n
        c_hi = (cx + float(a_m) * a_face) * n
        r_lo = (cy + (mouth_y - float(b_m)) * b_face) * n
        r_hi = (cy + (mouth_y + float(b_m)) * b_face) * n
        return (max(int(r_lo) - 1, 0), min(int(r_hi) + 2, n),
                max(int(c_lo) - 1, 0), min(int(c_hi) + 2, n))


def _mouth_axes_t(g: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    # Semi-axes relative to the face semi-axes; both strictly increasing in g.
    return 0.30 + 0.14 * g, 0.030 + 0.150 * g


def _mouth_axes_np(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return 0.30 + 0.14 * g, 0.030 + 0.150 * g


# -- spec-level convenience wrappers ----------------------------------------

def render(w, mode: str, cfg: GeneratorConfig, specs: list[FactorSpec] | None = None) -> np.ndarray:
    """One-shot render for a single latent code (builds a World per call)."""
    return World(cfg, specs).render(w, mode)


def sample_real_latent(specs: list[FactorSpec], rng: np.random.Generator) -> np.ndarray:
    coords = np.array([_sample_factor(s, 1, rng)[0] for s in specs])
    dirs = np.stack([s.direction for s in specs])
    return coords @ dirs
