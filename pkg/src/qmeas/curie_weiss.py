"""Curie-Weiss measurement model: closed-form truncation dynamics.

A tested spin-1/2 couples to an Ising magnet of N spins through
H_SM = -g s_z (x) sum_n g_n/g sigma_z^(n), and during the truncation window
the magnet stays paramagnetic while the tested spin's off-diagonal sector is
multiplied by the real factor F(t) = prod_n cos(2 g_n t).  Everything here is
closed-form; the dense oracle in qmeas.oracle cross-checks it for small N.

Units: hbar = 1, couplings are energies, times are inverse energies.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import GuardError, ValidationError
from .qstate import SIGMA_X, SIGMA_Y, DensityOperator, Observable, bloch_state, qexpect

# largest N for the analytic (product-form) path; beyond this the per-call
# cost and coupling storage stop being interactive
ANALYTIC_N_MAX = 10**7

# largest N for dense 2^N materializations
DENSE_N_MAX = 12


@dataclass(frozen=True)
class CurieWeissModel:
    """Frozen model: coupling table plus the tested spin's initial state."""

    N: int
    g: float
    couplings: np.ndarray
    delta_g_rms: float
    seed: int | None
    r0: DensityOperator

    def __post_init__(self):
        c = np.asarray(self.couplings, dtype=np.float64)
        if c.shape != (self.N,):
            raise ValidationError("couplings must have shape (N,)")
        if np.any(c <= 0.0):
            raise ValidationError("all couplings must be positive")
        dg = c - self.g
        if abs(float(dg.mean())) > 1e-12 * self.g:
            raise ValidationError("coupling deviations must have zero mean")
        rms = float(np.sqrt(np.mean(dg**2)))
        ref = max(abs(self.delta_g_rms), abs(rms))
        if ref > 0.0 and abs(rms - self.delta_g_rms) > 1e-12 * ref:
            raise ValidationError("delta_g_rms does not match the stored couplings")
        if self.r0.matrix.shape != (2, 2):
            raise ValidationError("r0 must be a 2x2 density operator")
        c.setflags(write=False)
        object.__setattr__(self, "couplings", c)


@dataclass(frozen=True)
class TruncationResult:
    """Transverse expectation series over a time grid."""

    times: np.ndarray
    sx: np.ndarray
    sy: np.ndarray
    tau: float
    sx0: float = field(repr=False, default=0.0)

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValidationError("tau must be positive")
        t = np.asarray(self.times, dtype=np.float64)
        at_zero = np.flatnonzero(t == 0.0)
        if at_zero.size and abs(abs(self.sx[at_zero[0]]) - abs(self.sx0)) > 1e-12:
            raise ValidationError("sx(0) does not match the initial state")
        for name in ("times", "sx", "sy"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class RecurrencePeak:
    """One recurrence: time, measured |F|, and the Gaussian damping estimate."""

    nu: int
    time: float
    measured: float
    predicted: float


def build_model(N, g, delta_g_rel=0.0, seed=0, r0=None) -> CurieWeissModel:
    """Draw couplings g_n = g + dg_n with exact zero mean and exact RMS.

    The deviations are Gaussian, recentred and rescaled so the sample mean is
    exactly 0 and the sample RMS exactly delta_g_rel*g; fixed seed gives
    bit-identical couplings.  Draws pushing any g_n below zero are rejected.
    """
    N = int(N)
    if N < 1 or N > ANALYTIC_N_MAX:
        raise ValidationError(f"N must be in [1, {ANALYTIC_N_MAX}]")
    g = float(g)
    if g <= 0.0:
        raise ValidationError("g must be positive")
    delta_g_rel = float(delta_g_rel)
    if not 0.0 <= delta_g_rel < 1.0:
        raise ValidationError("delta_g_rel must be in [0, 1)")
    if r0 is None:
        r0 = bloch_state((1.0, 0.0, 0.0))
    if delta_g_rel == 0.0:
        dg = np.zeros(N)
    else:
        if N == 1:
            raise ValidationError("delta_g_rel > 0 requires N >= 2 (recentring kills a single deviation)")
        draw = np.random.default_rng(seed).standard_normal(N)
        draw -= draw.mean()
        norm = float(np.sqrt(np.mean(draw**2)))
        if norm == 0.0:
            raise ValidationError("degenerate coupling draw; use another seed")
        dg = draw * (delta_g_rel * g / norm)
        if np.any(g + dg <= 0.0):
            raise ValidationError("coupling draw produced g_n <= 0; lower delta_g_rel or change seed")
    return CurieWeissModel(
        N=N, g=g, couplings=g + dg, delta_g_rms=delta_g_rel * g, seed=seed, r0=r0
    )


def truncation_time(model: CurieWeissModel) -> float:
    """Dephasing time tau = 1/(g sqrt(2N))."""
    return 1.0 / (model.g * np.sqrt(2.0 * model.N))


def offdiag_factor(model: CurieWeissModel, times):
    """F(t) = prod_n cos(2 g_n t), evaluated in the log-magnitude + sign domain.

    Scalar in, float out; array in, array out.  The value is exactly real.
    """
    scalar = np.ndim(times) == 0
    out = kernels.trig_product(2.0 * model.couplings, times)
    return float(out[0]) if scalar else out


def transverse_expectations(model: CurieWeissModel, times) -> TruncationResult:
    """Tested-spin transverse series sx(t) = sx(0) F(t), sy(t) = sy(0) F(t)."""
    t = np.atleast_1d(np.asarray(times, dtype=np.float64))
    if not np.all(np.isfinite(t)):
        raise ValidationError("times must be finite")
    f = offdiag_factor(model, t)
    sx0 = qexpect(model.r0, Observable(SIGMA_X))
    sy0 = qexpect(model.r0, Observable(SIGMA_Y))
    return TruncationResult(
        times=t, sx=sx0 * f, sy=sy0 * f, tau=truncation_time(model), sx0=sx0
    )


def recurrence_profile(model: CurieWeissModel, nu_max: int) -> list[RecurrencePeak]:
    """Recurrence peaks t_nu = nu*pi/(2g): measured |F| vs exp(-K nu^2).

    K = N (pi * delta_g_rms / g)^2 / 2 is the Gaussian estimate of the damping
    produced by the coupling spread; with zero spread every peak returns to 1.
    """
    nu_max = int(nu_max)
    if nu_max < 1:
        raise ValidationError("nu_max must be >= 1")
    K = 0.5 * model.N * (np.pi * model.delta_g_rms / model.g) ** 2
    t_peaks = np.arange(1, nu_max + 1) * (np.pi / (2.0 * model.g))
    measured = np.abs(offdiag_factor(model, t_peaks))
    out = []
    for nu in range(1, nu_max + 1):
        out.append(
            RecurrencePeak(
                nu=nu,
                time=float(t_peaks[nu - 1]),
                measured=float(measured[nu - 1]),
                predicted=float(np.exp(-K * nu * nu)),
            )
        )
    return out


def _cascade_coefficients(r0: DensityOperator, k: int) -> tuple[float, float]:
    # 2 Re[i^k r_ud(0)] cycles through (sx0, sy0, -sx0, -sy0) with k mod 4
    r_ud = complex(r0.matrix[0, 1])
    seq = (2.0 * r_ud.real, -2.0 * r_ud.imag, -2.0 * r_ud.real, 2.0 * r_ud.imag)
    return seq[k % 4], seq[(k + 1) % 4]


def cascade_correlation(model: CurieWeissModel, k: int, subset, times):
    """Correlators of s_x and s_y with a product of k magnet sigma_z's.

    Both equal a common envelope prod_{n in K} sin(2 g_n t) * prod_{n not in K}
    cos(2 g_n t) times initial-state coefficients that cycle with k mod 4
    (phase convention fixed against the dense oracle).  Returns (with_sx,
    with_sy); scalars for scalar t.
    """
    k = int(k)
    if not 1 <= k <= model.N:
        raise ValidationError("k must be in [1, N]")
    idx = np.asarray(list(subset), dtype=np.int64)
    if idx.size != k:
        raise ValidationError("subset must contain exactly k indices")
    if np.unique(idx).size != k:
        raise ValidationError("subset indices must be distinct")
    if idx.size and (idx.min() < 0 or idx.max() >= model.N):
        raise ValidationError("subset index out of range")
    mask = np.zeros(model.N, dtype=bool)
    mask[idx] = True
    scalar = np.ndim(times) == 0
    env = kernels.trig_product(2.0 * model.couplings, times, sin_mask=mask)
    cx, cy = _cascade_coefficients(model.r0, k)
    corr_x, corr_y = cx * env, cy * env
    if scalar:
        return float(corr_x[0]), float(corr_y[0])
    return corr_x, corr_y


def weighted_magnetization_diag(couplings) -> np.ndarray:
    """Eigenvalues of sum_n g_n sigma_z^(n) over the 2^N computational basis.

    Bit n of the basis index is 0 where sigma_z^(n) = +1.
    """
    c = np.asarray(couplings, dtype=np.float64)
    N = c.size
    if N > DENSE_N_MAX:
        raise GuardError(f"dense path limited to N <= {DENSE_N_MAX}")
    a = np.arange(2**N)
    m = np.zeros(2**N)
    for n in range(N):
        m += c[n] * (1 - 2 * ((a >> n) & 1))
    return m


def joint_offdiag_block(model: CurieWeissModel, t: float) -> np.ndarray:
    """Dense up-down magnet block R(t): diagonal phases exp(+2i m_a t)/2^N.

    m_a are the weighted-magnetization eigenvalues; tr R(t) = F(t) and
    R R-dagger = I/2^(2N) at every t.  Guarded to N <= 12.
    """
    if model.N > DENSE_N_MAX:
        raise GuardError(f"joint_offdiag_block limited to N <= {DENSE_N_MAX}")
    m = weighted_magnetization_diag(model.couplings)
    return np.diag(np.exp(2.0j * float(t) * m) / 2.0**model.N)


def default_time_grid(model: CurieWeissModel, nu_max: int = 0, points: int = 400,
                      window_points: int = 121) -> np.ndarray:
    """[0, 4 tau] densely, plus windows t_nu +/- 3 tau when nu_max >= 1."""
    if points < 2 or window_points < 2:
        raise ValidationError("grids need at least two points")
    tau = truncation_time(model)
    pieces = [np.linspace(0.0, 4.0 * tau, points)]
    for nu in range(1, int(nu_max) + 1):
        t_nu = nu * np.pi / (2.0 * model.g)
        lo = max(0.0, t_nu - 3.0 * tau)
        pieces.append(np.linspace(lo, t_nu + 3.0 * tau, window_points))
    return np.unique(np.concatenate(pieces))
