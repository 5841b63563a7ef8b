"""
Lie Engine Module
Order-by-order Lie transforms for vectorial flows: Deprit triangles,
homological equation, direct and inverse transformations, identity checks
and the on-disk theory cache
"""

import math
import os
import tempfile
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from itertools import combinations_with_replacement

import yaml

from . import config
from .exceptions import CacheError, FrameMismatch, VerificationError
from .series_algebra import PoissonSeries
from .toy_model import MEAN, OSCULATING, build_toy_flow

SEMIMAJOR = 0
NODE = 3
ANOMALY = 5
ELEMENTS = range(6)

ONE = PoissonSeries.term(1)
MEAN_MOTION = PoissonSeries.term(1, n_power=1)
KEPLERIAN = tuple([PoissonSeries.zero()] * 5 + [MEAN_MOTION])
ZERO_VECTOR = tuple([PoissonSeries.zero()] * 6)


class Theory(IntEnum):
    """Choice of the integration constants C_{j,m}"""

    PURE_PERIODIC_TRANSFORMATION = 1
    PURE_PERIODIC_GENERATOR = 2

    @property
    def label(self):
        return config.THEORY_LABELS[int(self)]


# ============================================================================
# GENERATORS AND TRIANGLES
# ============================================================================

class GeneratorSet:
    """Taylor coefficients W_{j,m} of a vectorial generator, m >= 1"""

    def __init__(self, orders=None):
        self._orders = {}
        self._partials = {}
        for m, vector in (orders or {}).items():
            self.set(m, vector)

    @property
    def order(self):
        m = 0
        while m + 1 in self._orders:
            m += 1
        return m

    def set(self, m, vector):
        self._orders[m] = tuple(vector)
        for key in [k for k in self._partials if k[1] == m]:
            del self._partials[key]

    def slice(self, m):
        return self._orders.get(m, ZERO_VECTOR)

    def component(self, j, m):
        return self.slice(m)[j]

    def partial(self, j, m, k):
        key = (j, m, k)
        if key not in self._partials:
            self._partials[key] = self.component(j, m).partial(k)
        return self._partials[key]

    def truncated(self, max_order):
        return GeneratorSet({m: v for m, v in self._orders.items() if m <= max_order})

    def items(self):
        return sorted(self._orders.items())


class DepritTriangle:
    """
    Memoized Deprit triangle F_{j,i,q} over the six element channels.

    F_{j,i,q+1} = F_{j,i+1,q} + sum_l C(i,l) L_{l+1}(F_{.,i-l,q}) with the
    scalar operator (vectorial=False) or the vectorial one (vectorial=True).
    With identity_seed the channel j starts from the element x_j itself:
    F_{j,0,0} is stored as zero and its gradient is the unit vector e_j.

    Entries of level m = i + q may be computed while W_m is still unknown.
    Every such entry with q >= 1 lacks exactly one term L_m(F_{.,0,0});
    absorb() adds it once W_m is solved. No level above m may be requested
    before W_m is set.
    """

    def __init__(self, seed, generators, vectorial, identity_seed=False):
        self.seed = seed
        self.generators = generators
        self.vectorial = vectorial
        self.identity_seed = identity_seed
        self._entries = {}
        self._partials = {}

    def entry(self, j, i, q):
        key = (j, i, q)
        cached = self._entries.get(key)
        if cached is not None:
            return cached
        if q == 0:
            value = self.seed(j, i)
        else:
            parts = [self.entry(j, i + 1, q - 1)]
            for l in range(i + 1):
                term = self._operator(j, l + 1, i - l, q - 1)
                if term:
                    parts.append(term.scale(math.comb(i, l)))
            value = PoissonSeries.total(parts)
        self._entries[key] = value
        return value

    def column(self, i, q):
        return tuple(self.entry(j, i, q) for j in ELEMENTS)

    def partial(self, j, i, q, k):
        if self.identity_seed and i == 0 and q == 0:
            return ONE if j == k else PoissonSeries.zero()
        key = (j, i, q, k)
        if key not in self._partials:
            self._partials[key] = self.entry(j, i, q).partial(k)
        return self._partials[key]

    def _operator(self, j, level, i, q):
        W = self.generators.slice(level)
        parts = []
        for k in ELEMENTS:
            if W[k]:
                gradient = self.partial(j, i, q, k)
                if gradient:
                    parts.append(gradient.multiply(W[k]))
        if self.vectorial:
            for k in ELEMENTS:
                target = self.entry(k, i, q)
                if target:
                    dW = self.generators.partial(j, level, k)
                    if dW:
                        parts.append(-dW.multiply(target))
        return PoissonSeries.total(parts)

    def absorb(self, m, deltas):
        """Add the W_m contribution L_m(F_{.,0,0}) to cached level-m entries"""
        for key in [k for k in self._entries if k[1] + k[2] == m and k[2] >= 1]:
            self._entries[key] = self._entries[key] + deltas[key[0]]
            for k in ELEMENTS:
                self._partials.pop(key + (k,), None)


def _zero_seed(j, i):
    return PoissonSeries.zero()


def lie_operator_vector(target, W_slice):
    """L*_j(Phi) = sum_k (dPhi_j/dx_k W_k - dW_j/dx_k Phi_k) over the six elements"""
    result = []
    for j in ELEMENTS:
        parts = []
        for k in ELEMENTS:
            if W_slice[k] and target[j]:
                parts.append(target[j].partial(k).multiply(W_slice[k]))
            if target[k] and W_slice[j]:
                parts.append(-W_slice[j].partial(k).multiply(target[k]))
        result.append(PoissonSeries.total(parts))
    return tuple(result)


def scalar_triangle(seed, generators, order, identity_seed=False):
    """F_{j,0,m} for m = 0..order from the seed family F_{j,m,0} = seed(j, m)"""
    triangle = DepritTriangle(seed, generators, vectorial=False, identity_seed=identity_seed)
    return {m: triangle.column(0, m) for m in range(order + 1)}


def vector_triangle(seed, generators, order):
    """Phi_{j,0,m} for m = 0..order with every W_m known in advance"""
    triangle = DepritTriangle(seed, generators, vectorial=True)
    return {m: triangle.column(0, m) for m in range(order + 1)}


# ============================================================================
# HOMOLOGICAL EQUATION
# ============================================================================

def pure_periodic_constants(direct_triangle, m):
    """
    C_{j,m} cancelling the M-average of x_{j,0,m}; W_m must still be absent.

    Through m = 2 only the semimajor axis constant is nonzero.
    """
    return tuple(-direct_triangle.entry(j, 0, m).average_M() for j in ELEMENTS)


def require_pure_periodic_a(generators, m):
    """C_{1,m} that makes the mean-to-osculating semimajor axis correction pure periodic"""
    triangle = DepritTriangle(_zero_seed, generators.truncated(m - 1), vectorial=False, identity_seed=True)
    return pure_periodic_constants(triangle, m)[SEMIMAJOR]


def _integrate(series):
    """(1/n) times the M-antiderivative; secular terms left in series raise NonPeriodicIntegrand"""
    return series.integrate_M().shift(n=-1)


def solve_homological(tilde, theory, m, direct_triangle):
    """
    Mean variations, generator and integration constants of order m.

    tilde holds the known parts of Phi_{j,0,m}; direct_triangle carries the
    mean-to-osculating transformation through order m - 1.
    """
    if Theory(theory) is Theory.PURE_PERIODIC_TRANSFORMATION:
        constants = pure_periodic_constants(direct_triangle, m)
    else:
        constants = ZERO_VECTOR
    phi = [None] * 6
    W = [None] * 6
    for j in ELEMENTS:
        if j == ANOMALY:
            continue
        phi[j] = tilde[j].average_M()
        W[j] = _integrate(tilde[j] - phi[j]) + constants[j]
    # dn/da W_{1,m} feeds the mean anomaly channel
    driven = tilde[ANOMALY] + MEAN_MOTION.partial('a').multiply(W[SEMIMAJOR])
    phi[ANOMALY] = driven.average_M()
    W[ANOMALY] = _integrate(driven - phi[ANOMALY]) + constants[ANOMALY]
    return tuple(phi), tuple(W), tuple(constants)


# ============================================================================
# TRANSFORMATIONS
# ============================================================================

def build_direct_transform(generators, order):
    """Corrections x_{j,0,m}, m = 1..order, of the mean-to-osculating transformation"""
    columns = scalar_triangle(_zero_seed, generators, order, identity_seed=True)
    return {m: columns[m] for m in range(1, order + 1)}


def build_inverse_generator(generators, order):
    """V_{j,i+1} = -B_{j,0,i} with the generator itself re-expanded by the flow recursion"""
    def seed(j, i):
        return generators.component(j, i + 1)

    triangle = DepritTriangle(seed, generators, vectorial=True)
    return GeneratorSet({i + 1: tuple(-b for b in triangle.column(0, i)) for i in range(order)})


def build_inverse_transform(generators, order):
    """Corrections x'_{j,0,m} of the osculating-to-mean transformation and its generator V"""
    inverse_generator = build_inverse_generator(generators, order)
    return build_direct_transform(inverse_generator, order), inverse_generator


def closed_form_second_inverse(first, second):
    """x'_{j,0,2} = 2 sum_k x_{k,0,1} dx_{j,0,1}/dx_k - x_{j,0,2}"""
    result = []
    for j in ELEMENTS:
        parts = [-second[j]]
        for k in ELEMENTS:
            if first[k]:
                gradient = first[j].partial(k)
                if gradient:
                    parts.append(gradient.multiply(first[k]).scale(2))
        result.append(PoissonSeries.total(parts))
    return tuple(result)


def _taylor_shift(functions, shifts, order, function_min_eps):
    """
    f(x + d) through eps^order for every f, by multivariate Taylor expansion.

    Each shift d_k starts at eps^1 and the node does not appear in any
    series, so its derivatives are skipped.
    """
    variables = [k for k in ELEMENTS if k != NODE and shifts[k]]
    results = [[f.truncate(order)] for f in functions]
    products = {(): ONE}
    derivatives = {(index, ()): f for index, f in enumerate(functions)}
    for degree in range(1, order - function_min_eps + 1):
        for combo in combinations_with_replacement(variables, degree):
            base = products.get(combo[:-1])
            if not base:
                continue
            product = base.multiply(shifts[combo[-1]], max_eps=order - function_min_eps)
            products[combo] = product
            if not product:
                continue
            weight = Fraction(1, math.prod(math.factorial(combo.count(k)) for k in set(combo)))
            for index in range(len(functions)):
                parent = derivatives.get((index, combo[:-1]))
                if not parent:
                    continue
                derived = parent.partial(combo[-1])
                derivatives[(index, combo)] = derived
                if derived:
                    results[index].append(derived.multiply(product, max_eps=order).scale(weight))
    return [PoissonSeries.total(parts) for parts in results]


def compose_transforms(direct, inverse, order):
    """
    Residual of osculating -> mean -> osculating through eps^order.

    direct and inverse are eps-tagged correction vectors D and I; the
    residual I(x) + D(x + I(x)) must be empty.
    """
    shifted = _taylor_shift(direct, inverse, order, function_min_eps=1)
    return tuple(inverse[j].truncate(order) + shifted[j] for j in ELEMENTS)


def verify_mean_by_substitution(theory, flow, order):
    """
    Residual of X(y + D(y)) - (I + dD/dy) Y(y) through eps^order.

    X is the osculating flow, D the mean-to-osculating corrections and Y the
    derived mean flow; this is the chain rule for dx/dt written at the mean
    elements, so an empty residual means the mean variations match the
    transformed flow term for term.
    """
    direct = [theory.eps_series('direct', j, order) for j in ELEMENTS]
    mean_flow = [KEPLERIAN[j] + theory.eps_series('phi', j, order) for j in ELEMENTS]
    osculating = [flow.term(j, 0) + flow.term(j, 1).shift(eps=1) for j in ELEMENTS]
    transported = _taylor_shift(osculating, direct, order, function_min_eps=0)
    residual = []
    for j in ELEMENTS:
        parts = [transported[j], -mean_flow[j].truncate(order)]
        for k in ELEMENTS:
            if k == NODE or not direct[j]:
                continue
            gradient = direct[j].partial(k)
            if gradient and mean_flow[k]:
                parts.append(-gradient.multiply(mean_flow[k], max_eps=order))
        residual.append(PoissonSeries.total(parts))
    return tuple(residual)


# ============================================================================
# THEORY ARTIFACTS
# ============================================================================

FAMILIES = ('phi', 'W', 'direct', 'inverse', 'C', 'V')


@dataclass
class TheoryArtifacts:
    """
    Derived series of one theory.

    Every family maps an order m to six bare Taylor coefficients (a, e, I,
    Omega, omega, M). extra_rates holds isolated mean variations computed
    beyond the full derivation order, keyed by (j, m).
    """

    theory: Theory
    order: int
    phi: dict = field(default_factory=dict)
    W: dict = field(default_factory=dict)
    direct: dict = field(default_factory=dict)
    inverse: dict = field(default_factory=dict)
    C: dict = field(default_factory=dict)
    V: dict = field(default_factory=dict)
    extra_rates: dict = field(default_factory=dict)

    def family(self, kind):
        if kind not in FAMILIES:
            raise ValueError(f"unknown series family {kind}")
        return getattr(self, kind)

    def series(self, kind, j, m):
        if kind == 'phi' and (j, m) in self.extra_rates:
            return self.extra_rates[(j, m)]
        family = self.family(kind)
        if m not in family:
            raise CacheError(f"theory {int(self.theory)} lacks {kind} of order {m}")
        return family[m][j]

    def has(self, kind, j, m):
        if kind == 'phi' and (j, m) in self.extra_rates:
            return True
        return m in self.family(kind)

    @property
    def generators(self):
        return GeneratorSet(self.W)

    def eps_series(self, kind, j, upto):
        """sum_{m=1..upto} eps^m/m! times the order-m coefficient of channel j"""
        return PoissonSeries.total(
            self.series(kind, j, m).scale(Fraction(1, math.factorial(m))).shift(eps=m)
            for m in range(1, upto + 1)
        )

    def corrections(self, kind, elems, consts, orders):
        """Numerical correction vector; orders[j] is the truncation per element"""
        expected = MEAN if kind == 'direct' else OSCULATING
        if elems.frame != expected:
            raise FrameMismatch(f"{kind} corrections take {expected} elements, got {elems.frame}")
        return [self.eps_series(kind, j, orders[j]).evaluate(elems, consts, consts.J2) for j in ELEMENTS]

    def term_counts(self, kind, m):
        return [len(self.series(kind, j, m)) for j in ELEMENTS]


# ============================================================================
# DERIVATION ORCHESTRATOR
# ============================================================================

class LieEngine:
    """
    Derives a theory order by order.

    Keeps one vectorial triangle for the flow and one scalar triangle for the
    mean-to-osculating transformation; both share the growing generator.
    """

    def __init__(self, theory, flow=None, verbose=None):
        self.theory = Theory(theory)
        self.flow = flow or build_toy_flow()
        self.verbose = config.VERBOSE_MODE if verbose is None else verbose
        self.generators = GeneratorSet()
        self.flow_triangle = DepritTriangle(self._flow_seed, self.generators, vectorial=True)
        self.direct_triangle = DepritTriangle(_zero_seed, self.generators, vectorial=False,
                                              identity_seed=True)
        self.phi = {}
        self.constants = {}
        self.extra_rates = {}

    def _flow_seed(self, j, i):
        return self.flow.term(j, i)

    def _log(self, message):
        if self.verbose:
            print(message)

    @property
    def order(self):
        return self.generators.order

    def step(self):
        """Solve the homological equation of the next order"""
        m = self.order + 1
        tilde = self.flow_triangle.column(0, m)
        phi, W, constants = solve_homological(tilde, self.theory, m, self.direct_triangle)
        self.generators.set(m, W)
        self.flow_triangle.absorb(m, lie_operator_vector(KEPLERIAN, W))
        self.direct_triangle.absorb(m, W)
        self.phi[m] = phi
        self.constants[m] = constants
        for key in [k for k in self.extra_rates if k[1] == m]:
            del self.extra_rates[key]
        self._log(f"  ✓ Order {m}: mean variation terms {[len(s) for s in phi]}, "
                  f"generator terms {[len(s) for s in W]}")
        return phi, W, constants

    def mean_variation_component(self, j, m):
        """Phi_{j,0,m} for a, e, I, Omega or omega from a theory complete to order m - 1"""
        if j == ANOMALY:
            raise ValueError("the mean anomaly rate needs the full order-m generator")
        if m != self.order + 1:
            raise ValueError(f"order {m} component needs a theory complete to order {m - 1}")
        rate = self.flow_triangle.entry(j, 0, m).average_M()
        self.extra_rates[(j, m)] = rate
        self._log(f"  ✓ Order {m} {config.ELEMENT_NAMES[j]} mean variation: {len(rate)} terms")
        return rate

    def derive(self, order, extra_rates=()):
        """
        Full derivation through `order`, then the requested isolated rates.

        extra_rates lists (j, m) pairs with m = order + 1.
        """
        print("\n" + "=" * 70)
        print(f"DERIVING THEORY {int(self.theory)} ({self.theory.label}) TO ORDER {order}")
        print("=" * 70)
        while self.order < order:
            self.step()
        for j, m in extra_rates:
            self.mean_variation_component(j, m)
        self._log("  Building mean-to-osculating transformation...")
        direct = {m: self.direct_triangle.column(0, m) for m in range(1, order + 1)}
        self._log("  Building osculating-to-mean transformation...")
        inverse, inverse_generator = build_inverse_transform(self.generators, order)
        artifacts = TheoryArtifacts(
            theory=self.theory, order=order,
            phi={m: self.phi[m] for m in range(1, order + 1)},
            W={m: self.generators.slice(m) for m in range(1, order + 1)},
            direct=direct, inverse=inverse,
            C={m: self.constants[m] for m in range(1, order + 1)},
            V=dict(inverse_generator.items()),
            extra_rates=dict(self.extra_rates)
        )
        print(f"✓ Theory {int(self.theory)} derived to order {order}")
        return artifacts


def derive_theory(theory, order, extra_rates=(), verbose=None):
    if not 1 <= order <= config.MAX_ORDER:
        raise ValueError(f"derivation order must lie in 1..{config.MAX_ORDER}")
    return LieEngine(theory, verbose=verbose).derive(order, extra_rates)


def check_identities(artifacts, order, flow=None):
    """Composition and substitution residuals; raises VerificationError on a non-empty one"""
    flow = flow or build_toy_flow()
    direct = [artifacts.eps_series('direct', j, order) for j in ELEMENTS]
    inverse = [artifacts.eps_series('inverse', j, order) for j in ELEMENTS]
    for label, residual in (('composition', compose_transforms(direct, inverse, order)),
                            ('substitution', verify_mean_by_substitution(artifacts, flow, order))):
        for j, series in enumerate(residual):
            if series:
                raise VerificationError(
                    f"{label} residual of {config.ELEMENT_NAMES[j]} holds {len(series)} terms")


# ============================================================================
# THEORY CACHE
# ============================================================================

class TheoryCache:
    """theory{t}/order{m}/{family}_{element}.series files plus a manifest per theory"""

    def __init__(self, root=None):
        self.root = config.resolve_cache_dir(root)

    def theory_dir(self, theory):
        return os.path.join(self.root, f'theory{int(theory)}')

    def series_path(self, theory, m, kind, j):
        return os.path.join(self.theory_dir(theory), f'order{m}',
                            f'{kind}_{config.ELEMENT_NAMES[j]}{config.SERIES_SUFFIX}')

    def manifest_path(self, theory):
        return os.path.join(self.theory_dir(theory), config.CACHE_MANIFEST)

    @staticmethod
    def _write(path, text):
        os.makedirs(os.path.dirname(path), exist_ok=True)
        handle, tmp_path = tempfile.mkstemp(dir=os.path.dirname(path), suffix='.tmp')
        with os.fdopen(handle, 'w', encoding='utf-8', newline='\n') as stream:
            stream.write(text)
        os.replace(tmp_path, path)

    def save(self, artifacts):
        theory = artifacts.theory
        written = 0
        for kind in FAMILIES:
            for m, vector in sorted(artifacts.family(kind).items()):
                for j in ELEMENTS:
                    self._write(self.series_path(theory, m, kind, j), vector[j].to_text())
                    written += 1
        for (j, m), rate in sorted(artifacts.extra_rates.items()):
            self._write(self.series_path(theory, m, 'phi', j), rate.to_text())
            written += 1
        manifest = {
            'theory': int(theory),
            'order': artifacts.order,
            'extra_rates': [{'element': config.ELEMENT_NAMES[j], 'order': m}
                            for j, m in sorted(artifacts.extra_rates)],
        }
        self._write(self.manifest_path(theory), yaml.safe_dump(manifest, sort_keys=True))
        return written

    def manifest(self, theory):
        path = self.manifest_path(theory)
        if not os.path.exists(path):
            return None
        with open(path, 'r', encoding='utf-8') as stream:
            return yaml.safe_load(stream)

    def covers(self, theory, order, extra_rates=()):
        manifest = self.manifest(theory)
        if not manifest or manifest.get('order', 0) < order:
            return False
        available = {(config.ELEMENT_NAMES.index(item['element']), item['order'])
                     for item in manifest.get('extra_rates', [])}
        return all(m <= manifest['order'] or (j, m) in available for j, m in extra_rates)

    def load(self, theory, order=None):
        theory = Theory(theory)
        manifest = self.manifest(theory)
        if not manifest:
            raise CacheError(f"no cached theory {int(theory)} under {self.root}")
        stored = manifest['order']
        order = stored if order is None else order
        if order > stored:
            raise CacheError(f"cached theory {int(theory)} stops at order {stored}, {order} requested")
        artifacts = TheoryArtifacts(theory=theory, order=order)
        for kind in FAMILIES:
            family = artifacts.family(kind)
            for m in range(1, order + 1):
                family[m] = tuple(self._read(self.series_path(theory, m, kind, j)) for j in ELEMENTS)
        for item in manifest.get('extra_rates', []):
            j = config.ELEMENT_NAMES.index(item['element'])
            artifacts.extra_rates[(j, item['order'])] = self._read(
                self.series_path(theory, item['order'], 'phi', j))
        return artifacts

    @staticmethod
    def _read(path):
        if not os.path.exists(path):
            raise CacheError(f"missing cache file {path}")
        with open(path, 'r', encoding='utf-8') as stream:
            return PoissonSeries.from_text(stream.read())
