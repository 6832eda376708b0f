"""Parameter sets, derived exponents and assumption gates."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field


class AssumptionViolation(ValueError):
    """Raised when a parameter set fails one of the admissibility gates."""

    def __init__(self, gate: str, message: str):
        super().__init__(f"{gate}: {message}")
        self.gate = gate


def conjugate(r: float) -> float:
    """Hölder conjugate r/(r-1)."""
    if r <= 1:
        raise ValueError(f"conjugate exponent needs r > 1, got {r}")
    return r / (r - 1.0)


def sobolev_upper(r: float, sobolev_order: float, n: int) -> float:
    """Upper Sobolev exponent n r / (n - sigma r), defined for sigma r < n."""
    if sobolev_order * r >= n:
        raise ValueError("upper Sobolev exponent needs sobolev_order * r < n")
    return n * r / (n - sobolev_order * r)


def sobolev_lower(r: float, sobolev_order: float, n: int) -> float:
    """Lower Sobolev exponent n r' / (n + sigma r'); conjugate of the upper one."""
    rp = conjugate(r)
    return n * rp / (n + sobolev_order * rp)


@dataclass(frozen=True)
class ParameterSet:
    n: int
    p: float
    q: float
    s: float
    t: float
    eps: float
    M_coeff: float = 1.0
    delta0: float = 0.1
    delta_f: float | None = None
    enforce_a3: bool = True

    def __post_init__(self):
        if self.delta_f is None:
            object.__setattr__(self, "delta_f", self.delta0 / 2.0)

    @property
    def low_dimension_warning(self) -> bool:
        return self.n < 2

    def replace(self, **changes) -> ParameterSet:
        values = asdict(self)
        values.update(changes)
        return ParameterSet(**values)

    def to_dict(self) -> dict:
        return asdict(self)


CANONICAL = ParameterSet(n=2, p=2.0, q=2.0, s=0.6, t=0.5, eps=0.1, delta0=0.1, delta_f=0.05)


@dataclass(frozen=True)
class GateResult:
    name: str
    passed: bool
    slack: float


@dataclass(frozen=True)
class AssumptionReport:
    gates: tuple[GateResult, ...]
    warnings: tuple[str, ...] = field(default=())

    @property
    def passed(self) -> bool:
        return all(g.passed for g in self.gates)

    def first_failure(self) -> GateResult | None:
        for g in self.gates:
            if not g.passed:
                return g
        return None

    def gate(self, name: str) -> GateResult:
        for g in self.gates:
            if g.name == name:
                return g
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "gates": [asdict(g) for g in self.gates],
            "warnings": list(self.warnings),
        }


def check_assumptions(params: ParameterSet) -> AssumptionReport:
    """Evaluate every admissibility inequality and report its slack.

    A gate of the form ``a < b`` has slack ``b - a``; strict gates pass when
    the slack is positive, non-strict ones when it is non-negative.
    """
    n, p, q, s, t, eps = params.n, params.p, params.q, params.s, params.t, params.eps
    gates: list[GateResult] = []

    def add(name: str, slack: float, strict: bool = True):
        ok = slack > 0 if strict else slack >= 0
        gates.append(GateResult(name, bool(ok), float(slack)))

    add("A2.p_gt_1", p - 1.0)
    add("A2.p_le_q", q - p, strict=False)
    add("A2.t_pos", t)
    add("A2.t_le_s", s - t, strict=False)
    add("A2.s_lt_1", 1.0 - s)
    p_prime = p / (p - 1.0) if p > 1 else math.inf
    ratio = t * q / (s * p) if s > 0 else math.inf
    add("A2.ratio_window", min(ratio - 1.0 / p_prime, 1.0 - ratio), strict=False)
    if params.enforce_a3:
        add("A3.sp_lt_n", n - s * p)
    add("A4.eps_pos", eps)
    add("A4.eps_lt_s_over_p", s / p - eps)
    add("A4.eps_lt_ratio_gap", s * (ratio - 1.0 / p_prime) - eps)
    add("A4.eps_lt_1_minus_s", 1.0 - s - eps)
    add("data.delta_f_pos", params.delta_f)
    add("data.delta_f_lt_delta0", params.delta0 - params.delta_f)

    warnings = []
    if params.low_dimension_warning:
        warnings.append("n < 2: outside the analysed regime, smoke-test use only")
    return AssumptionReport(tuple(gates), tuple(warnings))


@dataclass(frozen=True)
class DerivedExponents:
    p_prime: float
    eta: float
    gamma: float
    theta: float
    tau: float
    p_star_s: float
    p_lower_s: float
    vartheta: float
    vartheta_f: float
    vartheta_f_tilde: float
    alpha_k_rate: float
    alpha_k_rate_single_phase: float

    def to_dict(self) -> dict:
        return asdict(self)


IDENTITY_TOL = 1e-12


def derive_exponents(params: ParameterSet, checked: bool = True) -> DerivedExponents:
    if checked:
        failure = check_assumptions(params).first_failure()
        if failure is not None:
            raise AssumptionViolation(failure.name, f"slack {failure.slack:.6g}")
    n, p, q, s, t, eps = params.n, params.p, params.q, params.s, params.t, params.eps
    p_prime = conjugate(p)
    eta = (n * p + eps * p * p) / (n + s * p + eps * p)
    gamma = eta / (p - 1.0)
    gamma_closed = p_prime * (n + eps * p) / (n + s * p + eps * p)
    if abs(gamma - gamma_closed) > IDENTITY_TOL * max(1.0, abs(gamma)):
        raise ArithmeticError("closed forms of gamma disagree")
    theta = (s - eps * (p - 1.0)) / (n + eps * p)
    tau = s + eps - eps * p / eta
    p_star_s = n * p / (n - s * p) if s * p < n else math.inf
    p_lower_s = sobolev_lower(p, s, n)
    vartheta = 3.0 * (p_prime - gamma) / gamma
    ratio = p_lower_s * theta
    vartheta_f = (p_lower_s + params.delta_f) * ratio / (1.0 - ratio)
    vartheta_f_tilde = p_lower_s * (1.0 + theta * params.delta_f) / (1.0 - ratio)
    return DerivedExponents(
        p_prime=p_prime,
        eta=eta,
        gamma=gamma,
        theta=theta,
        tau=tau,
        p_star_s=p_star_s,
        p_lower_s=p_lower_s,
        vartheta=vartheta,
        vartheta_f=vartheta_f,
        vartheta_f_tilde=vartheta_f_tilde,
        alpha_k_rate=t * q / (p - 1.0) - s - eps,
        alpha_k_rate_single_phase=s / (p - 1.0) - eps,
    )


def geometric_series_bound(k: int, r: float) -> tuple[float, float]:
    """Both sides of 2^{kr} sum_{j >= k-1} 2^{-jr} <= 4^r / (r ln 2).

    The left side telescopes to 2^r / (1 - 2^{-r}) for every k.
    """
    if k < 1 or r <= 0:
        raise ValueError("geometric_series_bound needs k >= 1 and r > 0")
    lhs = 2.0**r / (1.0 - 2.0 ** (-r))
    rhs = 4.0**r / (r * math.log(2.0))
    return lhs, rhs
