"""
Series Algebra Module
Exact Poisson-series arithmetic in the angles (M, omega) with coefficients
rational in (e, eta, s, c) and explicit powers of a, n, R/a and J2
"""

import math
import re
from collections import namedtuple
from fractions import Fraction

import numpy as np
import sympy
from sympy import QQ
from sympy.polys.orderings import grlex
from sympy.polys.rings import ring

from . import config
from .exceptions import (FixtureError, NonPeriodicIntegrand, SingularEvaluation,
                         UnsupportedDenominator)

# ============================================================================
# COEFFICIENT RING
# ============================================================================

RING, E, ETA, S, C = ring('e,eta,s,c', QQ, grlex)
ETA2 = 1 - E**2
VARIABLE_NAMES = ('e', 'eta', 's', 'c')

COS = 'cos'
SIN = 'sin'

_ETA2_POWERS = [RING.one]


def _eta2_power(k):
    while len(_ETA2_POWERS) <= k:
        _ETA2_POWERS.append(_ETA2_POWERS[-1] * ETA2)
    return _ETA2_POWERS[k]


def to_rational(value):
    """Exact rational in the coefficient domain"""
    if isinstance(value, Fraction):
        return QQ(value.numerator, value.denominator)
    return QQ.convert(value)


def _reduce(num):
    """Reduce modulo eta^2 = 1 - e^2 and c^2 = 1 - s^2"""
    if all(m[1] < 2 and m[3] < 2 for m in num.itermonoms()):
        return num
    terms = {}
    for (i, j, k, l), coeff in num.items():
        if j < 2 and l < 2:
            terms[(i, j, k, l)] = terms.get((i, j, k, l), 0) + coeff
            continue
        te, je = divmod(j, 2)
        tc, lc = divmod(l, 2)
        for u in range(te + 1):
            cu = coeff * (math.comb(te, u) * (-1) ** u)
            for v in range(tc + 1):
                mono = (i + 2 * u, je, k + 2 * v, lc)
                terms[mono] = terms.get(mono, 0) + cu * (math.comb(tc, v) * (-1) ** v)
    return RING.from_dict({m: c for m, c in terms.items() if c})


def _divisible_by_eta2(num):
    # 1 - e^2 divides num iff num vanishes at e = 1 and e = -1
    plus, minus = {}, {}
    for (i, j, k, l), coeff in num.items():
        rest = (j, k, l)
        plus[rest] = plus.get(rest, 0) + coeff
        minus[rest] = minus.get(rest, 0) + (coeff if i % 2 == 0 else -coeff)
    return not any(plus.values()) and not any(minus.values())


def _normalize(num, e_power, eta2_power):
    num = _reduce(num)
    if not num:
        return RING.zero, 0, 0
    if e_power:
        shift = min(e_power, min(m[0] for m in num.itermonoms()))
        if shift:
            num = RING.from_dict({(m[0] - shift,) + m[1:]: c for m, c in num.items()})
            e_power -= shift
    while eta2_power and _divisible_by_eta2(num):
        num = num.exquo(ETA2)
        eta2_power -= 1
    return num, e_power, eta2_power


class Coefficient:
    """
    Rational function num / (e^p * eta^(2k)) in canonical form.

    The numerator has eta-degree <= 1 and c-degree <= 1 and the pair (p, k)
    is minimal. Odd powers of eta and powers of (1 + eta) in a denominator
    are rewritten on construction through build().
    """

    __slots__ = ('num', 'e_power', 'eta2_power', '_float_terms')

    def __init__(self, num, e_power=0, eta2_power=0):
        if e_power < 0 or eta2_power < 0:
            raise UnsupportedDenominator(f"negative denominator exponent e^{e_power} eta^{2 * eta2_power}")
        self.num, self.e_power, self.eta2_power = _normalize(num, e_power, eta2_power)
        self._float_terms = None

    @classmethod
    def _trusted(cls, num, e_power, eta2_power):
        coeff = cls.__new__(cls)
        coeff.num = num
        coeff.e_power = e_power
        coeff.eta2_power = eta2_power
        coeff._float_terms = None
        return coeff

    @classmethod
    def build(cls, num, e_power=0, eta_power=0, one_plus_eta_power=0):
        """Canonical coefficient from num / (e^p * eta^q * (1 + eta)^r)"""
        if min(e_power, eta_power, one_plus_eta_power) < 0:
            raise UnsupportedDenominator("denominator exponents must be nonnegative")
        num = RING(num)
        if eta_power % 2:
            num = num * ETA
            eta_power += 1
        if one_plus_eta_power:
            # 1/(1 + eta) = (1 - eta)/e^2
            num = num * (1 - ETA) ** one_plus_eta_power
            e_power += 2 * one_plus_eta_power
        return cls(num, e_power, eta_power // 2)

    @classmethod
    def from_rational(cls, value):
        return cls(RING(to_rational(value)))

    @classmethod
    def combine(cls, parts):
        """Sum of raw parts (scalar, num, p, k) brought to a common denominator once"""
        parts = list(parts)
        if not parts:
            return ZERO_COEFFICIENT
        top_e = max(part[2] for part in parts)
        top_k = max(part[3] for part in parts)
        total = RING.zero
        for scalar, num, p, k in parts:
            term = num if scalar == 1 else num * scalar
            if top_e - p:
                term = term * E ** (top_e - p)
            if top_k - k:
                term = term * _eta2_power(top_k - k)
            total = total + term
        return cls(total, top_e, top_k)

    @property
    def is_zero(self):
        return not self.num

    def raw(self):
        return self.num, self.e_power, self.eta2_power

    def __add__(self, other):
        return Coefficient.combine([(1,) + self.raw(), (1,) + other.raw()])

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return Coefficient._trusted(-self.num, self.e_power, self.eta2_power)

    def __mul__(self, other):
        if isinstance(other, Coefficient):
            return Coefficient(self.num * other.num, self.e_power + other.e_power,
                               self.eta2_power + other.eta2_power)
        return self.scale(other)

    __rmul__ = __mul__

    def scale(self, value):
        value = to_rational(value)
        if not value:
            return ZERO_COEFFICIENT
        return Coefficient._trusted(self.num * value, self.e_power, self.eta2_power)

    def derivative(self, var):
        """Partial derivative with respect to e or I"""
        num, p, k = self.raw()
        if var == 'e':
            # d eta/de = -e/eta, folded over one extra eta^2 in the denominator
            new = (E * ETA2 * num.diff(E) - E**2 * ETA * num.diff(ETA)
                   + (2 * k) * E**2 * num - p * ETA2 * num)
            return Coefficient(new, p + 1, k + 1)
        if var == 'I':
            return Coefficient(num.diff(S) * C - num.diff(C) * S, p, k)
        raise ValueError(f"coefficients only depend on e and I, not {var}")

    def float_terms(self):
        if self._float_terms is None:
            self._float_terms = [
                (int(coeff.numerator) / int(coeff.denominator), monom)
                for monom, coeff in self.num.terms()
            ]
        return self._float_terms

    def evaluate(self, e, eta, s, c):
        total = 0.0
        for value, (i, j, k, l) in self.float_terms():
            total += value * e**i * eta**j * s**k * c**l
        if self.e_power or self.eta2_power:
            total /= e**self.e_power * eta**(2 * self.eta2_power)
        return total

    def numerator_text(self):
        if not self.num:
            return '0'
        text = ''
        for index, (monom, coeff) in enumerate(self.num.terms()):
            value = Fraction(int(coeff.numerator), int(coeff.denominator))
            factors = ''.join(
                f'*{name}' if exp == 1 else f'*{name}^{exp}'
                for name, exp in zip(VARIABLE_NAMES, monom) if exp
            )
            body = f'{abs(value)}{factors}'
            if index == 0:
                text = f'-{body}' if value < 0 else body
            else:
                text += f" {'-' if value < 0 else '+'} {body}"
        return text

    def denominator_text(self):
        factors = []
        if self.e_power:
            factors.append(f'e^{self.e_power}')
        if self.eta2_power:
            factors.append(f'eta^{2 * self.eta2_power}')
        return '*'.join(factors) or '1'

    @classmethod
    def from_text(cls, numerator, denominator):
        terms = {}
        for match in _MONOMIAL_PATTERN.finditer(numerator.replace(' ', '')):
            sign, top, bottom, factors = match.groups()
            if top is None:
                continue
            value = QQ(int(top), int(bottom or 1))
            if sign == '-':
                value = -value
            exps = dict.fromkeys(VARIABLE_NAMES, 0)
            for name, exp in _FACTOR_PATTERN.findall(factors):
                exps[name] += int(exp or 1)
            mono = tuple(exps[name] for name in VARIABLE_NAMES)
            terms[mono] = terms.get(mono, 0) + value
        powers = {'e': 0, 'eta': 0}
        for name, exp in _FACTOR_PATTERN.findall('*' + denominator.replace(' ', '')):
            powers[name] += int(exp or 1)
        num = RING.from_dict({m: c for m, c in terms.items() if c})
        return cls.build(num, powers['e'], powers['eta'])

    def __eq__(self, other):
        if not isinstance(other, Coefficient):
            return NotImplemented
        return (self.e_power == other.e_power and self.eta2_power == other.eta2_power
                and self.num == other.num)

    def __hash__(self):
        return hash((frozenset(self.num.items()), self.e_power, self.eta2_power))

    def __repr__(self):
        return f"Coefficient(({self.numerator_text()}) / ({self.denominator_text()}))"


_MONOMIAL_PATTERN = re.compile(r'([+-]?)(\d+)(?:/(\d+))?((?:\*(?:eta|e|s|c)(?:\^\d+)?)*)')
_FACTOR_PATTERN = re.compile(r'\*(eta|e|s|c)(?:\^(\d+))?')

ZERO_COEFFICIENT = Coefficient._trusted(RING.zero, 0, 0)
ONE_COEFFICIENT = Coefficient._trusted(RING.one, 0, 0)

# ============================================================================
# TRIGONOMETRIC TERMS
# ============================================================================

TermKey = namedtuple('TermKey', 'eps_order a_power n_power roa_power kind m_mult w_mult')


def canonical_key(eps_order, a_power, n_power, roa_power, kind, m_mult, w_mult):
    """Normalized key and the sign absorbed by the phase flip, or (None, 0) for sin(0)"""
    if n_power < 0:
        raise UnsupportedDenominator("negative power of the mean motion")
    sign = 1
    if m_mult < 0 or (m_mult == 0 and w_mult < 0):
        m_mult, w_mult = -m_mult, -w_mult
        if kind == SIN:
            sign = -1
    if kind == SIN and m_mult == 0 and w_mult == 0:
        return None, 0
    return TermKey(eps_order, a_power, n_power, roa_power, kind, m_mult, w_mult), sign


def describe_key(key):
    powers = []
    for label, value in (('eps', key.eps_order), ('a', key.a_power), ('n', key.n_power),
                         ('roa', key.roa_power)):
        if value:
            powers.append(f'{label}^{value}')
    angle = f'{key.m_mult}M{key.w_mult:+d}w'
    return ' '.join(powers + [f'{key.kind}({angle})'])


class _Bucket:
    """Raw parts per key, combined once into a canonical series"""

    def __init__(self):
        self.parts = {}

    def add(self, fields, scalar, num, e_power, eta2_power):
        key, sign = canonical_key(*fields)
        if key is None:
            return
        if sign < 0:
            scalar = -scalar
        self.parts.setdefault(key, []).append((scalar, num, e_power, eta2_power))

    def to_series(self):
        terms = {}
        for key, parts in self.parts.items():
            coeff = Coefficient.combine(parts)
            if not coeff.is_zero:
                terms[key] = coeff
        return PoissonSeries._trusted(terms)


_HALF = QQ(1, 2)

# ============================================================================
# POISSON SERIES
# ============================================================================


class PoissonSeries:
    """
    Finite sum of coefficient * a^p n^q (R/a)^r eps^o * cos|sin(m M + w omega).

    Values are immutable; every operation returns a new canonical series.
    """

    __slots__ = ('_terms',)

    def __init__(self, terms=None):
        bucket = _Bucket()
        for fields, coeff in (terms or {}).items():
            bucket.add(tuple(fields), 1, *coeff.raw())
        self._terms = bucket.to_series()._terms

    @classmethod
    def _trusted(cls, terms):
        series = cls.__new__(cls)
        series._terms = terms
        return series

    @classmethod
    def zero(cls):
        return cls._trusted({})

    @classmethod
    def term(cls, coeff, kind=COS, m_mult=0, w_mult=0, eps_order=0, a_power=0, n_power=0, roa_power=0):
        """Single-term series; coeff is a Coefficient, ring element or rational"""
        if not isinstance(coeff, Coefficient):
            coeff = Coefficient(RING(to_rational(coeff)) if not hasattr(coeff, 'ring') else coeff)
        bucket = _Bucket()
        bucket.add((eps_order, a_power, n_power, roa_power, kind, m_mult, w_mult), 1, *coeff.raw())
        return bucket.to_series()

    @classmethod
    def total(cls, series_list):
        """Sum of many series with one canonicalization per key"""
        bucket = _Bucket()
        for series in series_list:
            for key, coeff in series._terms.items():
                bucket.parts.setdefault(key, []).append((1,) + coeff.raw())
        return bucket.to_series()

    # ------------------------------------------------------------------
    # container protocol
    # ------------------------------------------------------------------

    def items(self):
        return [(key, self._terms[key]) for key in sorted(self._terms)]

    def keys(self):
        return sorted(self._terms)

    def coefficient(self, key):
        return self._terms.get(key, ZERO_COEFFICIENT)

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self.items())

    def __bool__(self):
        return bool(self._terms)

    @property
    def is_zero(self):
        return not self._terms

    def __eq__(self, other):
        if not isinstance(other, PoissonSeries):
            return NotImplemented
        return self._terms == other._terms

    __hash__ = None

    def differing_keys(self, other):
        """Sorted keys whose coefficients differ between the two series"""
        keys = set(self._terms) | set(other._terms)
        return sorted(k for k in keys if self.coefficient(k) != other.coefficient(k))

    @property
    def has_denominators(self):
        return any(c.e_power or c.eta2_power for c in self._terms.values())

    @property
    def max_eps_order(self):
        return max((key.eps_order for key in self._terms), default=0)

    # ------------------------------------------------------------------
    # arithmetic
    # ------------------------------------------------------------------

    def __add__(self, other):
        terms = dict(self._terms)
        for key, coeff in other._terms.items():
            if key in terms:
                combined = terms[key] + coeff
                if combined.is_zero:
                    del terms[key]
                else:
                    terms[key] = combined
            else:
                terms[key] = coeff
        return PoissonSeries._trusted(terms)

    def __neg__(self):
        return PoissonSeries._trusted({key: -coeff for key, coeff in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, value):
        value = to_rational(value)
        if not value:
            return PoissonSeries.zero()
        return PoissonSeries._trusted({key: coeff.scale(value) for key, coeff in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, PoissonSeries):
            return self.multiply(other)
        return self.scale(other)

    __rmul__ = __mul__

    def multiply(self, other, max_eps=None):
        """Product with trig products linearized; terms above max_eps are dropped"""
        bucket = _Bucket()
        for k1, c1 in self._terms.items():
            for k2, c2 in other._terms.items():
                eps = k1.eps_order + k2.eps_order
                if max_eps is not None and eps > max_eps:
                    continue
                powers = (eps, k1.a_power + k2.a_power, k1.n_power + k2.n_power,
                          k1.roa_power + k2.roa_power)
                num = c1.num * c2.num
                e_power = c1.e_power + c2.e_power
                eta2_power = c1.eta2_power + c2.eta2_power
                for kind, m_mult, w_mult, scalar in _linearize(k1, k2):
                    bucket.add(powers + (kind, m_mult, w_mult), scalar, num, e_power, eta2_power)
        return bucket.to_series()

    def times(self, coeff):
        """Multiply every term by a Coefficient"""
        if coeff.is_zero:
            return PoissonSeries.zero()
        bucket = _Bucket()
        for key, own in self._terms.items():
            bucket.add(tuple(key), 1, own.num * coeff.num, own.e_power + coeff.e_power,
                       own.eta2_power + coeff.eta2_power)
        return bucket.to_series()

    def shift(self, eps=0, a=0, n=0, roa=0):
        """Re-index the bookkeeping powers of eps, a, n and R/a"""
        terms = {}
        for key, coeff in self._terms.items():
            new_n = key.n_power + n
            if new_n < 0:
                raise UnsupportedDenominator("division by n of a term free of n")
            terms[key._replace(eps_order=key.eps_order + eps, a_power=key.a_power + a,
                               n_power=new_n, roa_power=key.roa_power + roa)] = coeff
        return PoissonSeries._trusted(terms)

    def truncate(self, max_eps):
        return PoissonSeries._trusted({k: c for k, c in self._terms.items() if k.eps_order <= max_eps})

    def eps_slice(self, order):
        return PoissonSeries._trusted({k: c for k, c in self._terms.items() if k.eps_order == order})

    # ------------------------------------------------------------------
    # calculus
    # ------------------------------------------------------------------

    def partial(self, var):
        """Partial derivative with respect to one of a, e, I, Omega, omega, M"""
        if isinstance(var, int):
            var = config.ELEMENT_NAMES[var]
        terms = {}
        if var == 'Omega':
            return PoissonSeries.zero()
        if var == 'a':
            for key, coeff in self._terms.items():
                # a^p n^q (R/a)^r -> (p - 3q/2 - r) a^(p-1) n^q (R/a)^r
                factor = QQ(2 * key.a_power - 3 * key.n_power - 2 * key.roa_power, 2)
                if factor:
                    terms[key._replace(a_power=key.a_power - 1)] = coeff.scale(factor)
        elif var in ('e', 'I'):
            for key, coeff in self._terms.items():
                derived = coeff.derivative(var)
                if not derived.is_zero:
                    terms[key] = derived
        elif var in ('omega', 'M'):
            for key, coeff in self._terms.items():
                mult = key.w_mult if var == 'omega' else key.m_mult
                if not mult:
                    continue
                if key.kind == COS:
                    terms[key._replace(kind=SIN)] = coeff.scale(-mult)
                else:
                    terms[key._replace(kind=COS)] = coeff.scale(mult)
        else:
            raise ValueError(f"unknown element variable {var}")
        return PoissonSeries._trusted(terms)

    def average_M(self):
        return PoissonSeries._trusted({k: c for k, c in self._terms.items() if k.m_mult == 0})

    def periodic_M(self):
        return PoissonSeries._trusted({k: c for k, c in self._terms.items() if k.m_mult != 0})

    def integrate_M(self):
        terms = {}
        for key, coeff in self._terms.items():
            if key.m_mult == 0:
                raise NonPeriodicIntegrand(f"term {describe_key(key)} does not depend on M")
            if key.kind == COS:
                terms[key._replace(kind=SIN)] = coeff.scale(QQ(1, key.m_mult))
            else:
                terms[key._replace(kind=COS)] = coeff.scale(QQ(-1, key.m_mult))
        return PoissonSeries._trusted(terms)

    # ------------------------------------------------------------------
    # numerical evaluation
    # ------------------------------------------------------------------

    def evaluate(self, elems, consts, eps=1.0):
        """Floating value at the given elements, summed in canonical term order"""
        a, e = elems.a, elems.e
        eta = math.sqrt(1.0 - e * e)
        if self.has_denominators:
            _check_denominators(e, eta)
        n = math.sqrt(consts.mu / a**3)
        roa = consts.R_earth / a
        s, c = math.sin(elems.I), math.cos(elems.I)
        total = 0.0
        for key, coeff in self.items():
            angle = key.m_mult * elems.M + key.w_mult * elems.omega
            trig = math.cos(angle) if key.kind == COS else math.sin(angle)
            total += (coeff.evaluate(e, eta, s, c) * a**key.a_power * n**key.n_power
                      * roa**key.roa_power * eps**key.eps_order * trig)
        return total

    # ------------------------------------------------------------------
    # text and expression forms
    # ------------------------------------------------------------------

    def to_text(self):
        lines = []
        for key, coeff in self.items():
            lines.append(' | '.join([
                str(key.eps_order), str(key.a_power), str(key.n_power), str(key.roa_power),
                key.kind, str(key.m_mult), str(key.w_mult),
                coeff.numerator_text(), coeff.denominator_text()
            ]))
        return '\n'.join(lines) + ('\n' if lines else '')

    @classmethod
    def from_text(cls, text):
        terms = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            fields = [field.strip() for field in line.split('|')]
            if len(fields) != 9:
                raise FixtureError(f"malformed series line: {line}")
            eps, a_pow, n_pow, roa_pow = (int(f) for f in fields[:4])
            key = TermKey(eps, a_pow, n_pow, roa_pow, fields[4], int(fields[5]), int(fields[6]))
            terms[key] = Coefficient.from_text(fields[7], fields[8])
        return cls(terms)

    def to_expression(self):
        """sympy expression in the symbols a, n, roa, e, eta, s, c, M, w, eps"""
        sym = EXPRESSION_SYMBOLS
        pieces = []
        for key, coeff in self.items():
            trig = sympy.cos if key.kind == COS else sympy.sin
            angle = key.m_mult * sym['M'] + key.w_mult * sym['w']
            pieces.append(
                coeff.num.as_expr() / (sym['e']**coeff.e_power * sym['eta']**(2 * coeff.eta2_power))
                * sym['a']**key.a_power * sym['n']**key.n_power * sym['roa']**key.roa_power
                * sym['eps']**key.eps_order * trig(angle)
            )
        return sympy.Add(*pieces)

    @classmethod
    def from_expression(cls, text):
        """Ingest a printed expression (linear in sin/cos of integer combinations of M and w)"""
        try:
            expr = sympy.parse_expr(text, local_dict=dict(EXPRESSION_SYMBOLS, sin=sympy.sin, cos=sympy.cos))
        except (SyntaxError, TypeError, sympy.SympifyError) as exc:
            raise FixtureError(f"cannot parse expression: {exc}") from exc
        return cls.from_sympy(expr)

    @classmethod
    def from_sympy(cls, expr):
        bucket = _Bucket()
        for term in sympy.Add.make_args(sympy.expand(expr)):
            if term == 0:
                continue
            fields, scalar, num, e_power, eta_power, r_power = _parse_product(term)
            coeff = Coefficient.build(num, e_power, eta_power, r_power)
            bucket.add(fields, scalar, *coeff.raw())
        return bucket.to_series()

    def __repr__(self):
        return f"PoissonSeries({len(self._terms)} terms)"


def _linearize(k1, k2):
    """Product-to-sum: (kind, m, w, scalar) pairs for trig(k1) * trig(k2)"""
    if k1.kind == COS and k1.m_mult == 0 and k1.w_mult == 0:
        return [(k2.kind, k2.m_mult, k2.w_mult, 1)]
    if k2.kind == COS and k2.m_mult == 0 and k2.w_mult == 0:
        return [(k1.kind, k1.m_mult, k1.w_mult, 1)]
    diff = (k1.m_mult - k2.m_mult, k1.w_mult - k2.w_mult)
    plus = (k1.m_mult + k2.m_mult, k1.w_mult + k2.w_mult)
    half = _HALF
    if k1.kind == COS and k2.kind == COS:
        return [(COS,) + diff + (half,), (COS,) + plus + (half,)]
    if k1.kind == SIN and k2.kind == SIN:
        return [(COS,) + diff + (half,), (COS,) + plus + (-half,)]
    if k1.kind == SIN:
        return [(SIN,) + plus + (half,), (SIN,) + diff + (half,)]
    return [(SIN,) + plus + (half,), (SIN,) + diff + (-half,)]


def _check_denominators(e, eta):
    floor = config.SINGULAR_DENOMINATOR
    if np.min(e) < floor or np.min(eta) < floor or np.min(1.0 + eta) < floor:
        raise SingularEvaluation(f"singular denominator at e={np.min(e)!r}")


# ============================================================================
# EXPRESSION INGESTION
# ============================================================================

EXPRESSION_SYMBOLS = {name: sympy.Symbol(name) for name in
                      ('a', 'n', 'roa', 'e', 'eta', 's', 'c', 'M', 'w', 'eps')}
_POLY_SYMBOLS = {EXPRESSION_SYMBOLS[name]: index for index, name in enumerate(VARIABLE_NAMES)}
_POWER_SYMBOLS = {EXPRESSION_SYMBOLS[name]: name for name in ('a', 'n', 'roa', 'eps')}
_ONE_PLUS_ETA = 1 + EXPRESSION_SYMBOLS['eta']


def _product_factors(term):
    """
    Rational coefficient and (base, integer exponent) pairs of one product.

    expand() may fold numbers and monomials into a (1 + eta) denominator,
    e.g. 1/(32*eta + 32) or 1/(e*eta + e); such sums are split back into
    their irreducible factors.
    """
    coeff, factors = term.as_coeff_mul()
    pairs = []
    for factor in factors:
        base, exp = factor.as_base_exp()
        if not exp.is_Integer:
            raise FixtureError(f"non-integer power in {term}")
        exp = int(exp)
        if isinstance(base, sympy.Add):
            try:
                content, parts = sympy.factor_list(base)
            except sympy.PolynomialError as exc:
                raise FixtureError(f"unsupported factor {factor} in {term}") from exc
            coeff *= sympy.Rational(content) ** exp
            pairs.extend((part, mult * exp) for part, mult in parts)
        else:
            pairs.append((base, exp))
    return coeff, pairs


def _parse_product(term):
    coeff, pairs = _product_factors(term)
    if not coeff.is_Rational:
        raise FixtureError(f"non-rational coefficient in {term}")
    exps = [0, 0, 0, 0]
    powers = {'a': 0, 'n': 0, 'roa': 0, 'eps': 0}
    one_plus_eta = 0
    trig = None
    for base, exp in pairs:
        if base in _POLY_SYMBOLS:
            exps[_POLY_SYMBOLS[base]] += exp
        elif base in _POWER_SYMBOLS:
            powers[_POWER_SYMBOLS[base]] += exp
        elif base == _ONE_PLUS_ETA:
            one_plus_eta += exp
        elif isinstance(base, (sympy.sin, sympy.cos)) and exp == 1 and trig is None:
            trig = base
        else:
            raise FixtureError(f"unsupported factor {base ** exp} in {term}")
    kind, m_mult, w_mult = COS, 0, 0
    if trig is not None:
        arg = trig.args[0]
        m_mult = arg.coeff(EXPRESSION_SYMBOLS['M'])
        w_mult = arg.coeff(EXPRESSION_SYMBOLS['w'])
        rest = sympy.expand(arg - m_mult * EXPRESSION_SYMBOLS['M'] - w_mult * EXPRESSION_SYMBOLS['w'])
        if rest != 0 or not (m_mult.is_Integer and w_mult.is_Integer):
            raise FixtureError(f"angle {arg} is not an integer combination of M and w")
        kind = COS if isinstance(trig, sympy.cos) else SIN
        m_mult, w_mult = int(m_mult), int(w_mult)
    if exps[2] < 0 or exps[3] < 0:
        raise FixtureError(f"negative power of s or c in {term}")
    num_exps = tuple(max(x, 0) for x in exps)
    num = RING.from_dict({num_exps: QQ(int(coeff.p), int(coeff.q))})
    if one_plus_eta > 0:
        num = num * (1 + ETA) ** one_plus_eta
    if powers['n'] < 0 or powers['roa'] < 0 or powers['eps'] < 0:
        raise FixtureError(f"negative power of n, R/a or eps in {term}")
    fields = (powers['eps'], powers['a'], powers['n'], powers['roa'], kind, m_mult, w_mult)
    return (fields, 1, num, max(-exps[0], 0), max(-exps[1], 0), max(-one_plus_eta, 0))


# ============================================================================
# COMPILED EVALUATION
# ============================================================================

_ARGUMENT_ORDER = tuple(EXPRESSION_SYMBOLS[name] for name in
                        ('a', 'n', 'roa', 'e', 'eta', 's', 'c', 'M', 'w', 'eps'))


class CompiledSeries:
    """
    Fast numerical evaluator for a fixed list of series.

    Each series becomes one sympy expression compiled by lambdify, once for
    scalar calls (math module) and once for grids (numpy).
    """

    def __init__(self, series_list):
        self.series_list = list(series_list)
        expressions = [series.to_expression() for series in self.series_list]
        self.singular = any(series.has_denominators for series in self.series_list)
        self._scalar = sympy.lambdify(_ARGUMENT_ORDER, expressions, modules='math', cse=True)
        self._vector = sympy.lambdify(_ARGUMENT_ORDER, expressions, modules='numpy', cse=True)

    def __len__(self):
        return len(self.series_list)

    def at(self, a, e, inc, omega, M, mu, r_earth, eps):
        """List of floats at one element set"""
        eta = math.sqrt(1.0 - e * e)
        if self.singular:
            _check_denominators(e, eta)
        n = math.sqrt(mu / a**3)
        return self._scalar(a, n, r_earth / a, e, eta, math.sin(inc), math.cos(inc), M, omega, eps)

    def on_grid(self, a, e, inc, omega, M, mu, r_earth, eps):
        """Array of shape (len(series), len(grid)) over element arrays"""
        a, e, inc, omega, M = (np.asarray(x, dtype=float) for x in (a, e, inc, omega, M))
        eta = np.sqrt(1.0 - e * e)
        if self.singular and e.size:
            _check_denominators(e, eta)
        n = np.sqrt(mu / a**3)
        values = self._vector(a, n, r_earth / a, e, eta, np.sin(inc), np.cos(inc), M, omega, eps)
        return np.array([np.broadcast_to(np.asarray(v, dtype=float), a.shape) for v in values])


# ============================================================================
# VALUE-LEVEL OPERATIONS
# ============================================================================

def add(x, y):
    return x + y


def negate(x):
    return -x


def mul(x, y, max_eps=None):
    return x.multiply(y, max_eps)


def partial(x, var):
    return x.partial(var)


def average_M(x):
    return x.average_M()


def integrate_M(x):
    return x.integrate_M()


def evaluate(x, elems, consts, eps=1.0):
    return x.evaluate(elems, consts, eps)


def equals(x, y):
    return x == y


def series(text):
    """Shorthand for PoissonSeries.from_expression"""
    return PoissonSeries.from_expression(text)
