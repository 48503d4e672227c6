"""CIE Lab <-> sRGB conversion and network-range encodings.

All conversions assume 8-bit sRGB with the D65 white point and the
standard CIE two-part transfer functions. Images exchange internally as
:class:`LabImage`; RGB arrays are plain ``uint8`` numpy arrays of shape
``(H, W, 3)``.

Network encodings: luminance maps ``[0, 100] -> [0, 1]`` and chrominance
maps ``[-128, 127] -> [-1, 1]`` (affine, exactly invertible).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FormatError

# sRGB (linear) -> XYZ, D65, 2-degree observer
_RGB2XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ],
    dtype=np.float64,
)
_XYZ2RGB = np.linalg.inv(_RGB2XYZ)

_WHITE = np.array([0.95047, 1.0, 1.08883], dtype=np.float64)

# CIE constants (exact rational forms)
_EPS = 216.0 / 24389.0
_KAPPA = 24389.0 / 27.0


@dataclass
class LabImage:
    """An image as a luminance plane plus two chrominance planes.

    ``L`` lies in ``[0, 100]``; ``a`` and ``b`` lie in ``[-128, 127]``.
    All three planes share the same ``(H, W)`` shape.
    """

    L: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if not (self.L.shape == self.a.shape == self.b.shape):
            raise FormatError(
                f"plane shapes differ: L{self.L.shape} a{self.a.shape} b{self.b.shape}"
            )
        if self.L.ndim != 2:
            raise FormatError(f"planes must be 2-D, got {self.L.ndim}-D")

    @property
    def height(self) -> int:
        return self.L.shape[0]

    @property
    def width(self) -> int:
        return self.L.shape[1]

    def ab(self) -> np.ndarray:
        """Chrominance stacked to shape ``(H, W, 2)``."""
        return np.stack([self.a, self.b], axis=-1)


def _srgb_to_linear(c):
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(c):
    c = np.clip(c, 0.0, 1.0)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1.0 / 2.4) - 0.055)


def _f(t):
    t = np.maximum(t, 0.0)
    return np.where(t > _EPS, np.cbrt(t), (_KAPPA * t + 16.0) / 116.0)


def _f_inv(t):
    # t > 6/29 is equivalent to t**3 > _EPS
    return np.where(t > 6.0 / 29.0, t**3, (116.0 * t - 16.0) / _KAPPA)


def rgb_to_lab(img: np.ndarray) -> LabImage:
    """Convert an 8-bit sRGB image ``(H, W, 3)`` to :class:`LabImage`."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise FormatError(f"expected (H, W, 3) RGB image, got shape {img.shape}")
    rgb = img.astype(np.float64) / 255.0
    xyz = _srgb_to_linear(rgb) @ _RGB2XYZ.T
    fxyz = _f(xyz / _WHITE)
    L = 116.0 * fxyz[..., 1] - 16.0
    a = 500.0 * (fxyz[..., 0] - fxyz[..., 1])
    b = 200.0 * (fxyz[..., 1] - fxyz[..., 2])
    return LabImage(
        L=np.clip(L, 0.0, 100.0),
        a=np.clip(a, -128.0, 127.0),
        b=np.clip(b, -128.0, 127.0),
    )


def lab_to_rgb(img: LabImage) -> np.ndarray:
    """Convert a :class:`LabImage` back to 8-bit sRGB.

    Out-of-gamut values are hard-clamped per channel; output is always
    finite ``uint8``.
    """
    fy = (img.L + 16.0) / 116.0
    fx = fy + img.a / 500.0
    fz = fy - img.b / 200.0
    xyz = np.stack([_f_inv(fx), _f_inv(fy), _f_inv(fz)], axis=-1) * _WHITE
    srgb = _linear_to_srgb(xyz @ _XYZ2RGB.T)
    return np.clip(np.round(srgb * 255.0), 0, 255).astype(np.uint8)


def triplicate_luminance(plane: np.ndarray) -> np.ndarray:
    """Stack one plane into three identical channels, shape ``(H, W, 3)``.

    Used to feed a single luminance plane to the teacher classifier, which
    expects three-channel input; pass the plane already in the encoding the
    teacher consumes (see :func:`encode_luminance`).
    """
    plane = np.asarray(plane)
    if plane.ndim != 2:
        raise FormatError(f"expected a 2-D plane, got {plane.ndim}-D")
    return np.stack([plane, plane, plane], axis=-1)


def encode_luminance(L):
    """Map luminance ``[0, 100] -> [0, 1]`` for network input."""
    return np.asarray(L, dtype=np.float64) / 100.0


def decode_luminance(t):
    """Inverse of :func:`encode_luminance`."""
    return np.asarray(t, dtype=np.float64) * 100.0


def encode_chroma(ab):
    """Affine map of chrominance ``[-128, 127] -> [-1, 1]``."""
    return (np.asarray(ab, dtype=np.float64) + 128.0) * (2.0 / 255.0) - 1.0


def decode_chroma(t):
    """Inverse of :func:`encode_chroma`."""
    return (np.asarray(t, dtype=np.float64) + 1.0) * (255.0 / 2.0) - 128.0
