"""Closed-form constants and thresholds for the localization analysis.

Pure evaluators only: nothing here touches matrices or randomness. The
hand-off points are documented per function so the Monte-Carlo probes
and the acceptance pipeline can compose them without manual constants.

Two conventions worth stating once:
  * Holder constants: `DistributionSpec.C_tau` bounds the mass of a
    one-sided window [u, u+t]. The fractional-moment machinery needs the
    two-sided window [E-t, E+t], which costs a factor 2^tau; that factor
    is applied inside `strong_disorder_threshold`, not stored in the
    spec.
  * `combes_thomas_salpha` uses exact spectral norms of the hopping
    blocks. `salpha_overbound` reproduces the cruder n*max-row-sum bound
    (diagonal blocks kept exact) collapsed onto a single exponential at
    the maximal hopping distance; its inversion `alpha_for_gap` is what
    fixes alpha from a target gap without hand input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .bloch import BandStructure
from .disorder import DistributionSpec
from .model import HoppingModel, hopping_norm_sum

__all__ = [
    "GapGeometry",
    "ThresholdReport",
    "KReport",
    "BandEdgeDeltas",
    "MsaLengthThresholds",
    "combes_thomas_salpha",
    "salpha_overbound",
    "alpha_for_gap",
    "combes_thomas_rate",
    "strong_disorder_threshold",
    "d_s1_bound",
    "d_s1_uniform_bracket",
    "c_s_alpha",
    "weak_disorder_upper",
    "lambda_zero",
    "a_zero",
    "wegner_bound",
    "msa_delta",
    "band_edge_delta",
    "msa_length_thresholds",
    "log_power_constant",
]


@dataclass(frozen=True)
class GapGeometry:
    """Clean band intervals plus the disorder support [-a, b]."""

    bands: BandStructure
    a: float
    b: float

    def __post_init__(self) -> None:
        if self.a < 0 or self.b < 0 or self.a + self.b <= 0:
            raise ValueError("support [-a, b] needs a, b >= 0 and a+b > 0")

    def gap_size(self, i: int) -> float:
        return self.bands.gap_sizes[i]

    def gap_interval(self, i: int, lam: float = 0.0) -> tuple[float, float] | None:
        """Gap i of the disordered operator, or None once it has closed."""
        lo, hi = self.bands.gaps[i]
        lo, hi = lo + self.b * lam, hi - self.a * lam
        return (lo, hi) if lo < hi else None

    def gap_nonempty(self, i: int, lam: float) -> bool:
        return lam < self.gap_size(i) / (self.a + self.b)

    def locate_gap(self, E: float) -> int:
        """Index of the open internal gap holding E at lam=0."""
        for i, (lo, hi) in enumerate(self.bands.gaps):
            if self.bands.gap_open[i] and lo < E < hi:
                return i
        raise ValueError(f"E={E} is not inside an open internal gap")

    def dist_to_spectrum(self, E: float) -> float:
        d = min(abs(E - edge) for lo, hi in self.bands.bands for edge in (lo, hi))
        for lo, hi in self.bands.bands:
            if lo <= E <= hi:
                return 0.0
        return d


@dataclass(frozen=True)
class ThresholdReport:
    value: float
    s_opt: float
    mu_opt: float
    grid: tuple[int, int]


@dataclass(frozen=True)
class KReport:
    value: float
    p: float
    C_pq: float


@dataclass(frozen=True)
class BandEdgeDeltas:
    external: float
    internal: float
    gap_closed: bool


@dataclass(frozen=True)
class MsaLengthThresholds:
    q_l1: float
    q_l2: float
    q_l3: float
    q_l4: float
    q_l5: float
    q_l6: float
    q_l7: float

    def as_dict(self) -> dict[str, float]:
        return {f"q_l{k}": getattr(self, f"q_l{k}") for k in range(1, 8)}

    def largest(self) -> float:
        return max(self.as_dict().values())


def combes_thomas_salpha(model: HoppingModel, alpha: float) -> float:
    """sup_gamma sum over xi of ||H0(gamma,xi)|| (e^{alpha|gamma-xi|} - 1)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return hopping_norm_sum(model, weight=lambda d: math.exp(alpha * d) - 1.0)


def _overbound_coefficient(model: HoppingModel) -> tuple[float, float]:
    # n*||.||_inf per block, except diagonal blocks where the spectral
    # norm equals the inf-norm; all distances rounded up to the largest
    c0, dmax = 0.0, 0.0
    for delta, mat in model.hoppings.items():
        if delta == (0, 0):
            continue
        inf_norm = float(np.max(np.sum(np.abs(mat), axis=1)))
        diagonal = not np.any(np.abs(mat - np.diag(np.diagonal(mat))) > 0)
        c0 += inf_norm if diagonal else model.n * inf_norm
        dmax = max(dmax, float(np.hypot(*delta)))
    return c0, dmax


def salpha_overbound(model: HoppingModel, alpha: float) -> float:
    """Single-exponential over-bound c0*(e^{alpha*dmax} - 1) of S_alpha."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    c0, dmax = _overbound_coefficient(model)
    return c0 * (math.exp(alpha * dmax) - 1.0)


def alpha_for_gap(model: HoppingModel, gap_size: float) -> float:
    """Rate alpha making the over-bounded 2*S_alpha equal half the gap."""
    if gap_size <= 0:
        raise ValueError("gap must be positive")
    c0, dmax = _overbound_coefficient(model)
    if c0 == 0:
        raise ValueError("model has no hopping")
    return math.log(1.0 + gap_size / (4.0 * c0)) / dmax


def combes_thomas_rate(S_alpha: float, alpha: float, delta: float) -> tuple[float, float]:
    """(prefactor, decay rate) of the resolvent bound at distance delta."""
    if delta <= 0:
        raise ValueError("distance to the spectrum must be positive")
    rate = alpha if delta >= 2.0 * S_alpha else alpha * delta / (2.0 * S_alpha)
    return 2.0 / delta, rate


def _row_moment_sums(model: HoppingModel, s: float, mu: float) -> float:
    # sup over the orbital index of sum |entry|^s e^{mu |delta|}, the
    # (0,0) diagonal entry excluded; translation covariance collapses
    # the sup over gamma
    totals = np.zeros(model.n)
    for delta, mat in model.hoppings.items():
        w = math.exp(mu * float(np.hypot(*delta)))
        power = np.where(np.abs(mat) > 0, np.abs(mat) ** s, 0.0)
        if delta == (0, 0):
            np.fill_diagonal(power, 0.0)
        totals += w * np.sum(power, axis=1)
    return float(np.max(totals))


def strong_disorder_threshold(model: HoppingModel, spec: DistributionSpec,
                              s_grid: np.ndarray | None = None,
                              mu_grid: np.ndarray | None = None) -> ThresholdReport:
    """Grid infimum of [C_{s,tau} * sup-row-sum(s, mu)]^{1/s}.

    C_{s,tau} = tau (2^tau C_tau)^{s/tau} / (tau - s), the 2^tau being
    the one-sided-to-two-sided window conversion. mu=0 is an admissible
    grid point for finite-range models and is always the mu-optimum
    there; the grid keeps nonzero mu anyway for reporting. The best s
    cell gets one golden-section refinement.
    """
    tau, C2 = spec.tau, 2.0 ** spec.tau * spec.C_tau
    if s_grid is None:
        s_grid = np.geomspace(0.01 * tau, 0.99 * tau, 64)
    if mu_grid is None:
        mu_grid = np.linspace(0.0, 2.0, 32)
    s_grid = np.asarray(s_grid, dtype=float)
    mu_grid = np.asarray(mu_grid, dtype=float)
    if len(s_grid) == 0 or len(mu_grid) == 0:
        raise ValueError("empty search grid")
    if np.any(s_grid <= 0) or np.any(s_grid >= tau):
        raise ValueError("s grid must lie inside (0, tau)")

    def objective(s: float, mu: float) -> float:
        row = _row_moment_sums(model, s, mu)
        if row == 0.0:
            return 0.0
        c = tau * C2 ** (s / tau) / (tau - s)
        return (c * row) ** (1.0 / s)

    values = np.array([[objective(s, mu) for mu in mu_grid] for s in s_grid])
    k, m = np.unravel_index(int(np.argmin(values)), values.shape)
    best_s, best_mu, best = float(s_grid[k]), float(mu_grid[m]), float(values[k, m])
    if best > 0 and 0 < k < len(s_grid) - 1:
        lo, hi = float(s_grid[k - 1]), float(s_grid[k + 1])
        try:
            res = minimize_scalar(lambda s: objective(s, best_mu),
                                  bracket=(lo, best_s, hi), method="golden",
                                  options={"xtol": 1e-10})
            if res.fun < best:
                best, best_s = float(res.fun), float(res.x)
        except ValueError:
            pass  # flat bracket, grid point already optimal
    return ThresholdReport(value=best, s_opt=best_s, mu_opt=best_mu,
                           grid=(len(s_grid), len(mu_grid)))


def d_s1_bound(B_mom: float, C_mom: float, s: float, t: float, q: float) -> KReport:
    """Uniform fractional-moment constant K from the two moment bounds.

    K = max{5 (2B)^{s/t}, 2^{2s+1} B^{s/t} (1 + B^{s/t} C_{p,q})} with
    p = s/(1 - 2s/t) and C_{p,q} = 1 + p (2^q C)^{1/(1+q)} / (q/(1+q) - p).
    """
    if not (0 < t <= 1) or q <= 0:
        raise ValueError("need t in (0,1] and q > 0")
    s_max = 1.0 / (1.0 + 2.0 / t + 1.0 / q)
    if not (0 < s < s_max):
        raise ValueError(f"s must lie in (0, {s_max:.6g})")
    p = s / (1.0 - 2.0 * s / t)
    C_pq = 1.0 + p * (2.0 ** q * C_mom) ** (1.0 / (1.0 + q)) / (q / (1.0 + q) - p)
    K = max(5.0 * (2.0 * B_mom) ** (s / t),
            2.0 ** (2.0 * s + 1.0) * B_mom ** (s / t) * (1.0 + B_mom ** (s / t) * C_pq))
    return KReport(value=K, p=p, C_pq=C_pq)


def d_s1_uniform_bracket(a: float, s: float) -> tuple[float, float]:
    """Two-sided bracket a^s (1-s) <= D_{s,1} <= a^s for the uniform law."""
    if a <= 0 or not (0 < s < 1):
        raise ValueError("need a > 0 and s in (0,1)")
    return a ** s * (1.0 - s), a ** s


def c_s_alpha(n: int, gap_size: float, s: float, alpha: float) -> float:
    """(n |G|^2 / 2) (1 + 32/(s^2 alpha^2))."""
    return (n * gap_size ** 2 / 2.0) * (1.0 + 32.0 / (s * s * alpha * alpha))


def weak_disorder_upper(E: float, gaps: GapGeometry, s: float, alpha: float,
                        S_alpha: float, D_s1: float, n: int) -> float:
    """Disorder-strength ceiling Delta(E)^{1+2/s} / (C_{s,alpha} D_s1)^{1/s}."""
    i = gaps.locate_gap(E)
    g = gaps.gap_size(i)
    if 2.0 * S_alpha > g / 2.0:
        raise ValueError("2 S_alpha exceeds half the gap; decrease alpha")
    delta = gaps.dist_to_spectrum(E)
    C = c_s_alpha(n, g, s, alpha)
    return delta ** (1.0 + 2.0 / s) / (C * D_s1) ** (1.0 / s)


def lambda_zero(E: float, gaps: GapGeometry) -> float:
    """Largest lambda keeping E inside its (shrinking) internal gap."""
    i = gaps.locate_gap(E)
    lo, hi = gaps.bands.gaps[i]
    if gaps.b == 0:
        return (hi - E) / gaps.a
    if gaps.a == 0:
        return (E - lo) / gaps.b
    return min((E - lo) / gaps.b, (hi - E) / gaps.a)


def a_zero(gap_size: float, s: float, C_salpha: float, K: float) -> float:
    """(4 K C_{s,alpha} / |G|^2)^{1/s}."""
    if min(gap_size, s, C_salpha, K) <= 0:
        raise ValueError("all inputs must be positive")
    return (4.0 * K * C_salpha / gap_size ** 2) ** (1.0 / s)


def wegner_bound(n: int, C_tau: float, tau: float, L: int, eps: float,
                 lam: float) -> float:
    """min{1, 4 pi n C_tau L^2 eps^tau / lam^tau}."""
    if lam <= 0:
        raise ValueError("bound diverges at lam = 0")
    if eps <= 0:
        raise ValueError("eps must be positive")
    return min(1.0, 4.0 * math.pi * n * C_tau * L * L * eps ** tau / lam ** tau)


def msa_delta(alpha: float, S_alpha: float, theta: float, lam: float, qL: int) -> float:
    """Relative resolvent-distance scale (2 sqrt2 S_alpha (3 theta+5)/(alpha lam)) 8 log(qL)/qL."""
    if qL < 2:
        raise ValueError("length scale must be at least 2")
    if lam <= 0:
        raise ValueError("lam must be positive")
    return (2.0 * math.sqrt(2.0) * S_alpha * (3.0 * theta + 5.0) / (alpha * lam)) \
        * 8.0 * math.log(qL) / qL


def band_edge_delta(lam: float, gap_size: float, a: float, b: float, beta: float,
                    eps: float, C_eps: float = 1.0) -> BandEdgeDeltas:
    """Localization-window widths at external and internal band edges.

    beta = inf collapses the tail exponent beta/((beta-2)(1-eps)) to
    1/(1-eps). Once lam reaches gap/(a+b) the internal gap is gone and
    the internal width is reported as 0 with the flag set.
    """
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0,1)")
    if not math.isinf(beta) and beta <= 2:
        raise ValueError("tail exponent must exceed 2 (or be inf)")
    expo = 1.0 / (1.0 - eps) if math.isinf(beta) else beta / ((beta - 2.0) * (1.0 - eps))
    external = C_eps * min(1.0, lam ** expo)
    closing = gap_size / (a + b) - lam
    if closing <= 0:
        return BandEdgeDeltas(external=external, internal=0.0, gap_closed=True)
    internal = C_eps * min(1.0, lam ** expo, closing ** (1.0 / (1.0 - eps)))
    return BandEdgeDeltas(external=external, internal=internal, gap_closed=False)


def log_power_constant(eps: float, beta: float = math.inf) -> float:
    """Tight c with log x <= c x^kappa for all x > 0, kappa = eps (beta-2)/beta."""
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0,1)")
    kappa = eps if math.isinf(beta) else eps * (beta - 2.0) / beta
    if kappa <= 0:
        raise ValueError("tail exponent must exceed 2 (or be inf)")
    return 1.0 / (math.e * kappa)


def msa_length_thresholds(S_alpha: float, alpha: float, theta: float, eps: float,
                          lam: float, gap_size: float, a: float, b: float,
                          q: int, r: int, beta: float, C_mom: float, n: int,
                          C_tau: float, tau: float, norm_H0: float,
                          p0: float = 0.5) -> MsaLengthThresholds:
    """The seven admissible-length-scale floors of the initial MSA step.

    Plug-in evaluation only; callers take the max. The second floor is
    infinite once lam closes the internal gap, and the sixth collapses
    to its heavy-tail limit under the beta = inf sentinel.
    """
    if not (0 < p0 < 1):
        raise ValueError("p0 must lie in (0,1)")
    if theta * tau <= 2:
        raise ValueError("need theta > 2/tau")
    ce = log_power_constant(eps)
    ceb = log_power_constant(eps, beta)
    om = 1.0 / (1.0 - eps)
    ab = a + b
    base = math.sqrt(2.0) * S_alpha * (3.0 * theta + 5.0)

    q_l1 = (32.0 * base * ce / (alpha * ab)) ** om * lam ** (-om)
    closing = gap_size / ab - lam
    q_l2 = math.inf if closing <= 0 else \
        (8.0 * base * ce / (alpha * ab)) ** om * closing ** (-om)
    q_l3 = (4.0 * math.sqrt(2.0) * (3.0 * theta + 5.0) * ce / alpha) ** om
    q_l4 = 3.0 ** (1.0 / (4.0 * (3.0 * theta + 5.0)))
    q_l5 = max(math.e, 16.0 * q * r,
               (2.0 * math.sqrt(2.0) * alpha * (1.0 + 8.0 * norm_H0)
                / (S_alpha * (3.0 * theta + 5.0))) ** (1.0 / theta))
    if math.isinf(beta):
        q_l6 = (16.0 * base * ceb / alpha) ** om * lam ** (-om)
    else:
        pw = 1.0 / ((beta - 2.0) * (1.0 - eps))
        q_l6 = (2.0 * C_mom * n * p0 * (16.0 * base * ceb / alpha) ** beta) ** pw \
            * lam ** (-beta * pw)
    q_l7 = (8.0 * math.pi * n * C_tau * p0) ** (1.0 / (tau * theta - 2.0)) \
        * lam ** (-tau / (tau * theta - 2.0))
    return MsaLengthThresholds(q_l1=q_l1, q_l2=q_l2, q_l3=q_l3, q_l4=q_l4,
                               q_l5=q_l5, q_l6=q_l6, q_l7=q_l7)
