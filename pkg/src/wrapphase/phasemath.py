"""Wrapped-phase arithmetic.

Two primitives live here: ``phi``, which turns a (real, imaginary) pair into
an angle in the principal interval (-pi, pi], and ``anti_wrap``, which maps a
phase residual to its circular distance in [0, pi].

Both have a NumPy implementation (float64, used for features, metrics and
tests) and a torch implementation (used by the network and the losses).
"""
import math

import numpy as np
import torch

PI = math.pi
TWO_PI = 2.0 * math.pi


def sgn_star(x):
    """Sign function with ``sgn_star(0) == +1``.

    Works on scalars and arrays; returns ``int`` for scalar input.
    """
    out = np.where(np.asarray(x) >= 0, 1, -1)
    return int(out) if out.ndim == 0 else out


def phi(real, imag):
    """Phase of the complex number ``real + 1j * imag`` in (-pi, pi].

    Evaluated branch by branch::

        arctan(I / R) - pi/2 * sgn_star(I) * (sgn_star(R) - 1)

    with ``phi(0, 0) = 0`` and the ``R == 0`` column taken as the limit
    ``sign(I) * pi/2``.

    Parameters
    ----------
    real, imag : array_like
        Broadcastable arrays of finite reals.

    Returns
    -------
    ndarray or float
        Angles in radians.
    """
    r = np.asarray(real, dtype=np.float64)
    i = np.asarray(imag, dtype=np.float64)
    r, i = np.broadcast_arrays(r, i)
    on_axis = r == 0.0
    safe_r = np.where(on_axis, 1.0, r)
    with np.errstate(over="ignore"):  # |I/R| -> inf gives arctan = +-pi/2, as intended
        base = np.arctan(i / safe_r)
    out = base - (PI / 2.0) * sgn_star(i) * (sgn_star(r) - 1)
    out = np.where(on_axis, np.sign(i) * (PI / 2.0), out)
    # arctan(I/R) - pi rounds to exactly -pi when I/R < ~1e-16; the true
    # angle is just above -pi, whose nearest representable wrapped value is pi.
    out = np.where(out <= -PI, PI, out) + 0.0
    return float(out) if out.ndim == 0 else out


def _round_half_away(y):
    return np.sign(y) * np.floor(np.abs(y) + 0.5)


def anti_wrap(x):
    """Circular distance ``|x - 2*pi*round(x / (2*pi))|`` in [0, pi].

    Rounding is half away from zero. At the tie ``x = +-pi`` both
    conventions give ``pi``.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.abs(x - TWO_PI * _round_half_away(x / TWO_PI))
    return float(out) if out.ndim == 0 else out


def true_phase_error(p_hat, p):
    """Shorter of the direct and wrapping paths between two wrapped angles."""
    d = np.abs(np.asarray(p_hat, dtype=np.float64) - np.asarray(p, dtype=np.float64))
    out = np.minimum(d, TWO_PI - d)
    return float(out) if out.ndim == 0 else out


def wrap(x):
    """Reduce angles into (-pi, pi]."""
    x = np.asarray(x, dtype=np.float64)
    out = x - TWO_PI * _round_half_away(x / TWO_PI)
    out = np.where(out <= -PI, out + TWO_PI, out)
    out = np.where(out > PI, PI, out)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# torch versions


def phi_torch(real, imag):
    """Differentiable ``phi`` for tensors.

    Uses ``atan2`` and folds an exact ``-pi`` onto ``+pi``. The gradient at
    the origin is set to zero instead of the 0/0 that ``atan2`` produces.
    """
    origin = (real == 0) & (imag == 0)
    # Keep atan2 away from (0, 0) so its backward pass stays finite.
    safe_real = torch.where(origin, torch.ones_like(real), real)
    out = torch.atan2(imag, safe_real)
    out = torch.where(origin, torch.zeros_like(out), out)
    return torch.where(out <= -PI, torch.full_like(out, PI), out)


class _AntiWrap(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x):
        y = x / TWO_PI
        k = torch.sign(y) * torch.floor(torch.abs(y) + 0.5)
        r = x - TWO_PI * k
        ctx.save_for_backward(r)
        return torch.abs(r)

    @staticmethod
    def backward(ctx, grad_out):
        (r,) = ctx.saved_tensors
        slope = torch.sign(r)
        # |r| == pi sits on the wrapping discontinuity: one-sided slopes
        # disagree, so no direction is preferred.
        slope = torch.where(torch.abs(r) >= PI, torch.zeros_like(slope), slope)
        return grad_out * slope


def anti_wrap_torch(x):
    """``anti_wrap`` for tensors, sub-gradient ``sign(residual)`` and 0 at ties."""
    return _AntiWrap.apply(x)
