"""Reduction parameters, their instantiation from (m, c, eps, Delta) or k, and threshold tests.

Logarithms are base 2 except the natural logs inside r and h.
"""
from __future__ import annotations

import decimal
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Union

from ._bits import as_fraction

Number = Union[int, float, Fraction]


@dataclass(frozen=True)
class ReductionParams:
    alpha: Number
    gamma: Number
    mu: Number
    zeta: Number
    ell: int
    r: int
    h: int
    k: int
    eps: Number | None = None
    Delta: int | None = None
    c: Number | None = None
    mode: str = "custom"
    intermediates: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.ell < 2:
            raise ValueError("ell must be at least 2")
        if self.r < 1 or self.h < 1 or self.k < 1:
            raise ValueError("r, h and k must be positive")

    @property
    def zeta_prime(self) -> Fraction:
        return as_fraction(self.mu) + 2 * as_fraction(self.zeta) / as_fraction(self.gamma)

    def exact(self) -> dict[str, Fraction]:
        return {name: as_fraction(getattr(self, name)) for name in ("alpha", "gamma", "mu", "zeta")}

    def to_json(self) -> dict:
        def enc(x):
            return None if x is None else str(as_fraction(x)) if isinstance(x, Fraction) else x
        return {
            "format": "reduction-params", "version": 1, "mode": self.mode,
            "alpha": enc(self.alpha), "gamma": enc(self.gamma), "mu": enc(self.mu),
            "zeta": enc(self.zeta), "ell": self.ell, "r": self.r, "h": self.h, "k": self.k,
            "eps": enc(self.eps), "Delta": self.Delta, "c": enc(self.c),
            "zeta_prime": str(self.zeta_prime),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ReductionParams":
        def dec(x):
            return Fraction(x) if isinstance(x, str) else x
        return cls(alpha=dec(data["alpha"]), gamma=dec(data["gamma"]), mu=dec(data["mu"]),
                   zeta=dec(data["zeta"]), ell=data["ell"], r=data["r"], h=data["h"], k=data["k"],
                   eps=dec(data.get("eps")), Delta=data.get("Delta"), c=dec(data.get("c")),
                   mode=data.get("mode", "custom"))


_CONTEXT = decimal.Context(prec=60)


def _log2(x) -> Decimal:
    # exact for powers of two so that floor and ceil of derived values are not thrown off
    with decimal.localcontext(_CONTEXT):
        x = Decimal(x)
        if x == x.to_integral_value():
            n = int(x)
            if n > 0 and n & (n - 1) == 0:
                return Decimal(n.bit_length() - 1)
        return x.ln() / Decimal(2).ln()


def _floor(x: Decimal) -> int:
    return int(x.to_integral_value(rounding=decimal.ROUND_FLOOR))


def _ceil(x: Decimal) -> int:
    return int(x.to_integral_value(rounding=decimal.ROUND_CEILING))


def _derived(alpha: Decimal, eps: float, Delta: int, ell: int) -> dict[str, Decimal]:
    with decimal.localcontext(_CONTEXT):
        eps = Decimal(eps)
        gamma = alpha / 2
        mu = eps**2 * gamma**2 / (288 * Delta**3)
        zeta = eps**2 * gamma**3 / (432 * Delta**3)
        r_real = (2 / zeta).ln() / alpha**ell
        h_real = 8 * (2 / mu).ln() / alpha
    return {"gamma": gamma, "mu": mu, "zeta": zeta, "r_real": r_real, "h_real": h_real}


def _build(mode: str, alpha: Decimal, ell: int, k: int, eps, Delta, c, extra: dict) -> ReductionParams:
    d = _derived(alpha, eps, Delta, ell)
    as_float = {name: float(value) for name, value in {**extra, "alpha": alpha, **d}.items()}
    return ReductionParams(
        alpha=as_float["alpha"], gamma=as_float["gamma"], mu=as_float["mu"], zeta=as_float["zeta"],
        ell=ell, r=_ceil(d["r_real"]), h=_ceil(d["h_real"]), k=k,
        eps=eps, Delta=Delta, c=c, mode=mode, intermediates=as_float,
    )


def instantiate_params_eth(m: int, c: float, eps: float, Delta: int) -> ReductionParams:
    """Parameters used when starting from a PCP-compressed 3-SAT instance with m clauses."""
    if m < 2:
        raise ValueError("m must be at least 2")
    with decimal.localcontext(_CONTEXT):
        log_m = _log2(m)
        alpha = 1 / log_m ** (Decimal(c) + 1)
        ell_real = log_m ** Decimal("0.25")
    ell = max(2, _floor(ell_real))
    return _build("eth", alpha, ell, 2 ** (ell * ell), eps, Delta, c,
                  {"log_m": log_m, "ell_real": ell_real})


def instantiate_params_gap_eth(k: int, eps: float, Delta: int) -> ReductionParams:
    """Parameters used when the number of CSP vertices k is chosen directly."""
    if k < 2:
        raise ValueError("k must be at least 2")
    with decimal.localcontext(_CONTEXT):
        log_k = _log2(k)
        loglog = _log2(log_k)
        ell_real = log_k.sqrt()
    ell = _floor(ell_real)
    if ell < 2:
        raise ValueError(f"k = {k} is too small: ell = {ell} < 2")
    if loglog <= 1:
        raise ValueError(f"k = {k} is too small: alpha = 1/log log k is not below 1")
    with decimal.localcontext(_CONTEXT):
        alpha = 1 / loglog
    return _build("gap-eth", alpha, ell, k, eps, Delta, None,
                  {"log_k": log_k, "ell_real": ell_real})


def root_at_most(x: Fraction, k: int, ell: int) -> bool:
    """Exact test of k**(1/ell) <= x for rational x."""
    return x >= 0 and x**ell >= k


def agreement_threshold(k: int, r: int, ell: int) -> float:
    return (10 + 64 * (r * ell) ** 2 * k ** (1 / ell)) / k


def meets_agreement_threshold(delta: Fraction, k: int, r: int, ell: int) -> bool:
    """delta >= (10 + 64 (r ell)^2 k^(1/ell)) / k, decided exactly."""
    slack = (as_fraction(delta) * k - 10) / (64 * (r * ell) ** 2)
    return root_at_most(slack, k, ell)


def soundness_threshold(k: int, r: int, ell: int, h: int, mu) -> float:
    return (10 + 64 * (r * ell) ** 2 * k ** (1 / ell) + 65536 * h * ell**2 / float(mu)) / k


def meets_soundness_threshold(delta: Fraction, k: int, r: int, ell: int, h: int, mu) -> bool:
    """delta >= (10 + 64 (r ell)^2 k^(1/ell) + 65536 h ell^2 / mu) / k, decided exactly."""
    slack = as_fraction(delta) * k - 10 - Fraction(65536 * h * ell**2) / as_fraction(mu)
    return root_at_most(slack / (64 * (r * ell) ** 2), k, ell)
