"""Thermodynamic registration: max-entropy states, Gibbs pointer states with
symmetry-breaking sources, Curie-Weiss mean-field magnetization, and assembly
of the measured joint state.

The magnet Hamiltonian is the long-range Ising form H_M = -(J/2N) M_z^2 (a
model choice; the symmetry arguments need nothing more).  Registration is
treated as endpoint thermodynamics: no rate equations, only the equilibrium
states the dynamics relaxes to.  Temperatures are energies (k_B = 1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln, xlogy

from .curie_weiss import DENSE_N_MAX
from .errors import ConvergenceError, GuardError, InfeasibleError, ValidationError
from .qstate import DensityOperator, Observable, qexpect

_GRAM_RTOL = 1e-10
_MULTIPLIER_CAP = 1e8
_LOGZ_CAP = 700.0


@dataclass(frozen=True)
class ConstraintSet:
    """Expectation constraints defining a max-entropy problem.

    temperature (with hamiltonian) switches on fixed-beta mode: the exponent
    carries H/T plus one multiplier per listed observable.  dim is only
    needed when neither observables nor hamiltonian pin the space.
    """

    observables: tuple[Observable, ...] = ()
    targets: tuple[float, ...] = ()
    temperature: float | None = None
    hamiltonian: Observable | None = None
    dim: int | None = None

    def __post_init__(self):
        obs = tuple(self.observables)
        tgt = tuple(float(t) for t in self.targets)
        object.__setattr__(self, "observables", obs)
        object.__setattr__(self, "targets", tgt)
        if len(obs) != len(tgt):
            raise ValidationError("observables and targets must have equal length")
        if self.temperature is not None:
            if self.temperature <= 0:
                raise ValidationError("temperature must be positive")
            if self.hamiltonian is None:
                raise ValidationError("fixed-beta mode needs a hamiltonian")
        dims = {o.matrix.shape[0] for o in obs}
        if self.hamiltonian is not None:
            dims.add(self.hamiltonian.matrix.shape[0])
        if self.dim is not None:
            dims.add(int(self.dim))
        if len(dims) > 1:
            raise ValidationError("constraint operators disagree on dimension")
        if not dims:
            raise ValidationError("cannot infer dimension; supply dim")
        object.__setattr__(self, "dim", dims.pop())
        if obs:
            k = len(obs)
            gram = np.empty((k, k))
            for a in range(k):
                for b in range(a, k):
                    g = np.real(np.vdot(obs[a].matrix, obs[b].matrix))
                    gram[a, b] = gram[b, a] = g
            eigs = np.linalg.eigvalsh(gram)
            if eigs[0] < _GRAM_RTOL * max(eigs[-1], 1e-300):
                raise ValidationError("constraint observables are linearly dependent")


@dataclass(frozen=True)
class MaxEntSolution:
    """Solved generalized-canonical state exp(-(gamma + beta H + sum lambda x))."""

    state: DensityOperator
    gamma: float
    beta: float | None
    multipliers: np.ndarray
    residuals: np.ndarray
    iterations: int


def _gibbs_of_exponent(a: np.ndarray):
    """Probabilities and log-partition for exponent eigenvalues a."""
    amin = float(a.min())
    p = np.exp(-(a - amin))
    s = float(p.sum())
    logz = np.log(s) - amin
    return p / s, logz


def _kubo_weights(p: np.ndarray, a: np.ndarray) -> np.ndarray:
    # w_mn = (p_m - p_n)/(a_n - a_m), continued by p_m on the diagonal/degenerate pairs
    da = a[None, :] - a[:, None]
    dp = p[:, None] - p[None, :]
    scale = 1e-12 * max(1.0, float(np.max(np.abs(a))))
    near = np.abs(da) < scale
    w = np.where(near, 0.5 * (p[:, None] + p[None, :]), dp / np.where(near, 1.0, da))
    return w


def maxent_state(constraints: ConstraintSet, tol: float = 1e-10,
                 max_iter: int = 100) -> MaxEntSolution:
    """Maximize von Neumann entropy subject to expectation constraints.

    Solves the smooth convex dual psi(lambda) = ln Z + lambda.c by damped
    Newton with the exact quantum covariance (Kubo) Hessian and Armijo
    backtracking.  Infeasible targets surface as multiplier blowup.
    """
    dim = constraints.dim
    if constraints.temperature is not None:
        m_fixed = np.asarray(constraints.hamiltonian.matrix, dtype=np.complex128) / constraints.temperature
        beta = 1.0 / constraints.temperature
    else:
        m_fixed = np.zeros((dim, dim), dtype=np.complex128)
        beta = None
    xs = np.stack([o.matrix for o in constraints.observables]) if constraints.observables \
        else np.zeros((0, dim, dim), dtype=np.complex128)
    c = np.asarray(constraints.targets, dtype=np.float64)
    k = xs.shape[0]
    lam = np.zeros(k)

    def decompose(l):
        m = m_fixed + np.tensordot(l, xs, axes=1) if k else m_fixed
        a, v = np.linalg.eigh(m)
        p, logz = _gibbs_of_exponent(a)
        return a, v, p, logz

    def expectations(a, v, p):
        if not k:
            return np.zeros(0)
        xt = np.einsum("im,aij,jn->amn", v.conj(), xs, v, optimize=True)
        ex = np.einsum("amm,m->a", xt, p).real
        return ex, xt

    a, v, p, logz = decompose(lam)
    psi = logz + float(lam @ c)
    it = 0
    if k:
        ex, xt = expectations(a, v, p)
        grad = c - ex
        while float(np.max(np.abs(grad))) > tol:
            if it >= max_iter:
                raise ConvergenceError(f"maxent solver: no convergence in {max_iter} iterations")
            if float(np.max(np.abs(lam))) > _MULTIPLIER_CAP:
                raise InfeasibleError("maxent targets infeasible: multipliers diverge")
            w = _kubo_weights(p, a)
            dxt = xt.copy()
            idx = np.arange(dim)
            dxt[:, idx, idx] -= ex[:, None]
            hess = np.einsum("amn,bmn,mn->ab", dxt, dxt.conj(), w, optimize=True).real
            hess = 0.5 * (hess + hess.T)
            hess[np.diag_indices(k)] += 1e-14 * max(1.0, float(np.trace(hess)) / k)
            step = np.linalg.solve(hess, -grad)
            alpha = 1.0
            slope = float(grad @ step)
            while True:
                trial = lam + alpha * step
                a_t, v_t, p_t, logz_t = decompose(trial)
                psi_t = logz_t + float(trial @ c)
                if psi_t <= psi + 1e-4 * alpha * slope or alpha < 1e-12:
                    break
                alpha *= 0.5
            if alpha < 1e-12:
                raise ConvergenceError("maxent solver: line search stalled")
            lam, a, v, p, logz, psi = trial, a_t, v_t, p_t, logz_t, psi_t
            ex, xt = expectations(a, v, p)
            grad = c - ex
            it += 1
        residuals = np.abs(grad)
    else:
        residuals = np.zeros(0)
    dmat = (v * p) @ v.conj().T
    dmat = 0.5 * (dmat + dmat.conj().T)
    return MaxEntSolution(
        state=DensityOperator(dmat),
        gamma=logz,
        beta=beta,
        multipliers=lam,
        residuals=residuals,
        iterations=it,
    )


def gibbs_with_source(h_m: Observable, source: Observable | None, temperature: float
                      ) -> tuple[DensityOperator, float]:
    """Gibbs state of H_M + source at temperature T, with its partition sum."""
    if temperature <= 0:
        raise ValidationError("temperature must be positive")
    total = np.asarray(h_m.matrix, dtype=np.complex128)
    if source is not None:
        if source.matrix.shape != total.shape:
            raise ValidationError("source dimension mismatch")
        total = total + source.matrix
    a_op = total / temperature
    off = a_op - np.diag(np.diag(a_op))
    if not np.any(off):
        a = np.diag(a_op).real
        p, logz = _gibbs_of_exponent(a)
        if abs(logz) > _LOGZ_CAP:
            raise GuardError("partition function overflows double precision; rescale energies")
        state = DensityOperator(np.diag(p.astype(np.complex128)))
        return state, float(np.exp(logz))
    a, v = np.linalg.eigh(a_op)
    p, logz = _gibbs_of_exponent(a)
    if abs(logz) > _LOGZ_CAP:
        raise GuardError("partition function overflows double precision; rescale energies")
    dmat = (v * p) @ v.conj().T
    return DensityOperator(0.5 * (dmat + dmat.conj().T)), float(np.exp(logz))


def _mf_residual(m: float, j: float, t: float, field: float) -> float:
    return m - np.tanh((j * m + field) / t)


def meanfield_magnetization(j: float, t: float, field: float = 0.0):
    """Stable root of m = tanh((J m + field)/T).

    field = 0 below T_C = J returns the symmetric pair (-m_F, +m_F); any
    other case returns the single stable branch whose sign matches the field.
    """
    if j <= 0 or t <= 0:
        raise ValidationError("J and T must be positive")
    if field == 0.0:
        if t >= j:
            return 0.0
        lo = 1e-8
        if _mf_residual(lo, j, t, 0.0) >= 0.0:
            return (0.0, 0.0)
        m = brentq(_mf_residual, lo, 1.0, args=(j, t, 0.0), xtol=1e-15, rtol=8.9e-16)
        if abs(_mf_residual(m, j, t, 0.0)) > 1e-12:
            raise ConvergenceError("mean-field fixed point not satisfied to 1e-12")
        return (-m, m)
    sign = 1.0 if field > 0 else -1.0
    m = brentq(_mf_residual, 0.0, 1.0, args=(j, t, abs(field)), xtol=1e-15, rtol=8.9e-16)
    if abs(_mf_residual(m, j, t, abs(field))) > 1e-12:
        raise ConvergenceError("mean-field fixed point not satisfied to 1e-12")
    return sign * m


def free_energy_profile(j: float, t: float, field: float, m_grid) -> np.ndarray:
    """Per-spin free energy F(m) = -J m^2/2 - field m - T s(m), s the binary
    mixing entropy; defined on the closed interval [-1, 1]."""
    if j <= 0 or t <= 0:
        raise ValidationError("J and T must be positive")
    m = np.asarray(m_grid, dtype=np.float64)
    if np.any(np.abs(m) > 1.0):
        raise ValidationError("magnetization grid must lie in [-1, 1]")
    p, q = (1.0 + m) / 2.0, (1.0 - m) / 2.0
    entropy = -(xlogy(p, p) + xlogy(q, q))
    return -0.5 * j * m**2 - field * m - t * entropy


def _free_energy_minima_count(j: float, t: float, field: float) -> int:
    # sign(F') = sign(m - tanh((J m + field)/T)); the tanh form is finite at
    # m = +-1, so minima hugging the boundary (low T) are still seen
    m = np.linspace(-1.0, 1.0, 40001)
    r = m - np.tanh((j * m + field) / t)
    s = np.where(r >= 0.0, 1, -1)
    return int(np.count_nonzero((s[:-1] < 0) & (s[1:] > 0)))


def g_threshold(j: float, t: float, tol: float = 1e-6) -> float:
    """Minimal source field that leaves no metastable wrong-sign minimum in
    the free-energy profile; 0 above T_C.  Bisection to tol."""
    if j <= 0 or t <= 0:
        raise ValidationError("J and T must be positive")
    if t >= j:
        return 0.0
    lo, hi = 0.0, j
    if _free_energy_minima_count(j, t, hi) != 1:
        raise ConvergenceError("free-energy scan: no barrier-free field below J")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _free_energy_minima_count(j, t, mid) >= 2:
            lo = mid
        else:
            hi = mid
    return hi


@dataclass(frozen=True)
class PointerLimitResult:
    """Source-strength sweep: tr(R^h A) per scale plus the extrapolated limit."""

    scales: np.ndarray
    values: np.ndarray
    extrapolated: float
    state: DensityOperator
    converged: bool
    message: str


def pointer_limit(h_m: Observable, source: Observable, temperature: float,
                  h_scale_sequence, pointer_obs: Observable) -> PointerLimitResult:
    """Follow tr(R^h A) as the source is scaled down; extrapolate the limit.

    The sequence must be positive; equal scales mean a single evaluation,
    otherwise strictly decreasing toward the weak-source pointer limit.
    Oscillation or runaway growth of the increments is an error.  Increments
    that keep growing moderately are the finite-size failure of the limit:
    the result is flagged converged=False and the last value is reported.
    """
    scales = np.asarray(h_scale_sequence, dtype=np.float64)
    if scales.size == 0 or np.any(scales <= 0):
        raise ValidationError("scales must be positive")
    if scales.size > 1 and np.ptp(scales) > 0 and not np.all(np.diff(scales) < 0):
        raise ValidationError("scales must be strictly decreasing (or all equal)")
    values = []
    state = None
    for s in scales:
        scaled = Observable(s * np.asarray(source.matrix))
        state, _ = gibbs_with_source(h_m, scaled, temperature)
        values.append(qexpect(state, pointer_obs))
    values = np.asarray(values)
    if scales.size == 1 or np.ptp(scales) == 0:
        return PointerLimitResult(scales, values, float(values[-1]), state, True,
                                  "single scale, no extrapolation")
    d = np.diff(values)
    noise = 1e-12 * (1.0 + float(np.max(np.abs(values))))
    sig = np.abs(d) > noise
    if not np.any(sig):
        return PointerLimitResult(scales, values, float(values[-1]), state, True,
                                  "sequence already flat")
    ds = d[sig]
    if not np.all(np.isfinite(values)):
        raise ConvergenceError("pointer limit: non-finite tr(R^h A) sequence")
    if np.any(ds[:-1] * ds[1:] < 0):
        raise ConvergenceError("pointer limit: oscillatory tr(R^h A) sequence")
    if ds.size < 2:
        return PointerLimitResult(scales, values, float(values[-1]), state, True,
                                  "two usable scales; reporting the last value")
    r = ds[-1] / ds[-2]
    if r >= 10.0:
        raise ConvergenceError("pointer limit: diverging tr(R^h A) sequence")
    if r < 1.0:
        extrap = float(values[-1] + ds[-1] * r / (1.0 - r))
        return PointerLimitResult(scales, values, extrap, state, True,
                                  "geometric extrapolation, ratio %.3g" % r)
    return PointerLimitResult(
        scales, values, float(values[-1]), state, False,
        "increments still growing at the smallest scale (ratio %.3g); "
        "finite-size failure of the weak-source limit, reporting the last value" % r)


def magnet_count_diag(n_spins: int) -> np.ndarray:
    """Eigenvalues of M_z = sum_n sigma_z^(n) over the 2^N basis."""
    if n_spins > DENSE_N_MAX:
        raise GuardError(f"dense magnet operators limited to N <= {DENSE_N_MAX}")
    a = np.arange(2**n_spins)
    m = np.zeros(2**n_spins)
    for n in range(n_spins):
        m += 1 - 2 * ((a >> n) & 1)
    return m


def magnet_operators(n_spins: int, j: float) -> tuple[Observable, Observable]:
    """Dense H_M = -(J/2N) M_z^2 and M_z on the full 2^N magnet space."""
    m = magnet_count_diag(n_spins)
    h = -(j / (2.0 * n_spins)) * m**2
    return Observable(np.diag(h.astype(np.complex128))), Observable(np.diag(m.astype(np.complex128)))


def reduced_magnet_operators(n_spins: int, j: float, temperature: float
                             ) -> tuple[Observable, Observable]:
    """(N+1)-dim magnetization-sector representation.

    Folds the sector degeneracy C(N, k) into the energy as -T ln C, so Gibbs
    states of the reduced Hamiltonian at this temperature reproduce the M_z
    marginal of the full 2^N magnet exactly.
    """
    if n_spins < 1:
        raise ValidationError("need at least one spin")
    if temperature <= 0:
        raise ValidationError("temperature must be positive")
    ks = np.arange(n_spins + 1)
    m = (n_spins - 2 * ks).astype(np.float64)
    log_deg = gammaln(n_spins + 1) - gammaln(ks + 1) - gammaln(n_spins - ks + 1)
    h = -(j / (2.0 * n_spins)) * m**2 - temperature * log_deg
    return Observable(np.diag(h.astype(np.complex128))), Observable(np.diag(m.astype(np.complex128)))


@dataclass(frozen=True)
class PointerModel:
    """Registered magnet: outcomes A_i with window projectors and the
    associated equilibrium states, windowed (R_i) and sourced (R_i^h)."""

    pointer_obs: Observable
    outcomes: tuple[float, ...]
    window: float
    window_projectors: tuple[np.ndarray, ...]
    pointer_states: tuple[DensityOperator, ...]
    sourced_states: tuple[DensityOperator, ...]
    partition_consts: tuple[float, ...]

    def __post_init__(self):
        n = len(self.outcomes)
        if not (len(self.window_projectors) == len(self.pointer_states) == n):
            raise ValidationError("outcomes, projectors, and states must align")
        if self.window <= 0:
            raise ValidationError("window half-width must be positive")
        projs = tuple(np.asarray(p) for p in self.window_projectors)
        for i in range(n):
            for jdx in range(n):
                prod = projs[i] @ projs[jdx]
                ref = projs[i] if i == jdx else 0.0
                if np.max(np.abs(prod - ref)) > 1e-12:
                    raise ValidationError("window projectors must be orthogonal")
        for i in range(n):
            for jdx in range(n):
                pinched = projs[i] @ self.pointer_states[jdx].matrix @ projs[i]
                ref = self.pointer_states[i].matrix if i == jdx else np.zeros_like(pinched)
                if np.max(np.abs(pinched - ref)) > 1e-8:
                    raise ValidationError("pointer state leaks outside its window")
        gaps = [abs(self.outcomes[i] - self.outcomes[jdx])
                for i in range(n) for jdx in range(i + 1, n)]
        if gaps and self.window > min(gaps) / 3.0 + 1e-12:
            raise ValidationError("window too wide for the outcome spacing")
        for i, (a_i, r_i) in enumerate(zip(self.outcomes, self.pointer_states)):
            mean = qexpect(r_i, self.pointer_obs)
            if abs(mean - a_i) > self.window:
                raise ValidationError(f"pointer mean for outcome {i} drifts past the window")
            second = qexpect(r_i, Observable(self.pointer_obs.matrix @ self.pointer_obs.matrix))
            sdev = float(np.sqrt(max(0.0, second - mean**2)))
            if sdev > self.window / 3.0 + 1e-9:
                raise ValidationError(f"pointer fluctuation too large for outcome {i}")
        object.__setattr__(self, "window_projectors", projs)


def build_curie_weiss_pointer(n_spins: int, j: float, temperature: float,
                              source_strength: float | None = None,
                              delta: float | None = None,
                              reduced: bool = False,
                              max_iter: int = 16) -> PointerModel:
    """Pointer model for the Curie-Weiss magnet below T_C.

    Pointer states are Gibbs states restricted to magnetization windows
    [A_i - delta, A_i + delta] (the strict weak-source limit is ill-defined
    at small N); by default delta is the fixed point of delta = 3 * q-stddev.
    reduced=True works in the (N+1)-dim magnetization representation.
    """
    if temperature >= j:
        raise ValidationError("no ferromagnetic pointer above the Curie temperature")
    if not reduced and n_spins > 10:
        raise GuardError("full-representation pointer limited to N <= 10; use reduced=True")
    if reduced:
        h_m, m_obs = reduced_magnet_operators(n_spins, j, temperature)
    else:
        h_m, m_obs = magnet_operators(n_spins, j)
    mz = np.diag(m_obs.matrix).real
    energies = np.diag(h_m.matrix).real
    weights = np.exp(-(energies - energies.min()) / temperature)
    m_f = meanfield_magnetization(j, temperature)[1]
    outcomes = (n_spins * m_f, -n_spins * m_f)
    gap = 2.0 * n_spins * m_f

    def window_stats(center: float, half: float):
        mask = np.abs(mz - center) <= half
        w = weights * mask
        total = w.sum()
        if total <= 0:
            raise ValidationError("empty magnetization window; increase delta")
        mean = float((w @ mz) / total)
        var = float((w @ mz**2) / total - mean**2)
        return mask, w / total, mean, np.sqrt(max(var, 0.0))

    if delta is None:
        half = gap / 3.0
        for _ in range(max_iter):
            sdevs = [window_stats(a, half)[3] for a in outcomes]
            new_half = 3.0 * max(max(sdevs), 1e-12)
            if abs(new_half - half) <= 1e-9 * max(1.0, half):
                half = new_half
                break
            half = new_half
    else:
        half = float(delta)
    projs, states = [], []
    for a in outcomes:
        mask, probs, _, _ = window_stats(a, half)
        projs.append(np.diag(mask.astype(np.complex128)))
        states.append(DensityOperator(np.diag(probs.astype(np.complex128))))
    if source_strength is None:
        source_strength = 1.5 * g_threshold(j, temperature)
    sourced, zs = [], []
    for sign in (1.0, -1.0):
        src = Observable(-sign * source_strength * np.asarray(m_obs.matrix))
        st, z = gibbs_with_source(h_m, src, temperature)
        sourced.append(st)
        zs.append(z)
    return PointerModel(
        pointer_obs=m_obs,
        outcomes=outcomes,
        window=half,
        window_projectors=tuple(projs),
        pointer_states=tuple(states),
        sourced_states=tuple(sourced),
        partition_consts=tuple(zs),
    )


def final_joint_state(r0: DensityOperator, tested, pointer: PointerModel) -> DensityOperator:
    """Registered endpoint sum_i p_i r_i (x) R_i; zero-weight outcomes omitted."""
    projs = tested.projectors
    if len(projs) != len(pointer.pointer_states):
        raise ValidationError("tested outcomes and pointer states must align")
    dim_s = r0.matrix.shape[0]
    dim_m = pointer.pointer_states[0].matrix.shape[0]
    out = np.zeros((dim_s * dim_m, dim_s * dim_m), dtype=np.complex128)
    for proj, r_m in zip(projs, pointer.pointer_states):
        pinched = proj @ r0.matrix @ proj
        p = float(np.trace(pinched).real)
        if p <= 0.0:
            continue
        out += np.kron(pinched, r_m.matrix)
    return DensityOperator(out, subsystem_dims=(dim_s, dim_m))
