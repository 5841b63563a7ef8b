"""
Data Loader Module
Handles loading and validation of the scenario and printed-series fixture files
"""

import os
from dataclasses import dataclass

import sympy
import yaml

from . import config
from .exceptions import FixtureError, InvalidConfiguration, ScenarioError
from .lie_engine import Theory
from .propagator import IntegratorConfig, TheoryConfig
from .series_algebra import EXPRESSION_SYMBOLS, PoissonSeries
from .toy_model import OrbitalElements, PhysicalConstants

FIXTURE_FAMILIES = ('flow', 'W', 'phi', 'C', 'direct', 'inverse')
TABLE_SYMBOLS = {name: sympy.Symbol(name) for name in ('i', 'j', 'k')}
SECONDS_PER_DAY = 86400.0


def _read_yaml(path):
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, 'r', encoding='utf-8') as stream:
        content = yaml.safe_load(stream)
    if not isinstance(content, dict):
        raise InvalidConfiguration(f"{path} does not hold a mapping")
    return content


# ============================================================================
# FIXTURES
# ============================================================================

@dataclass(frozen=True)
class Fixture:
    """One printed series and the derived family member it must equal"""

    name: str
    family: str
    element: int
    order: int
    theories: tuple
    series: PoissonSeries

    @property
    def element_name(self):
        return config.ELEMENT_NAMES[self.element]

    def applies_to(self, theory):
        return int(theory) in self.theories


def _parse(text, name, extra_symbols=None):
    local = dict(EXPRESSION_SYMBOLS, sin=sympy.sin, cos=sympy.cos, **(extra_symbols or {}))
    try:
        return sympy.parse_expr(str(text), local_dict=local)
    except (SyntaxError, TypeError, sympy.SympifyError) as exc:
        raise FixtureError(f"{name}: cannot parse {text!r}: {exc}") from exc


def expand_table(table, name):
    """
    Sum of prefactor * P_ijk * template(i, j, k) over the listed entries.

    Entry keys are "i,j,k"; the template is written in the symbols i, j, k
    besides the usual expression symbols.
    """
    for key in ('prefactor', 'template', 'entries'):
        if key not in table:
            raise FixtureError(f"table {name} lacks '{key}'")
    prefactor = _parse(table['prefactor'], name)
    template = _parse(table['template'], name, TABLE_SYMBOLS)
    terms = []
    for index, polynomial in table['entries'].items():
        try:
            i, j, k = (int(part) for part in str(index).split(','))
        except ValueError as exc:
            raise FixtureError(f"table {name}: bad entry index {index!r}") from exc
        substituted = template.subs({TABLE_SYMBOLS['i']: i, TABLE_SYMBOLS['j']: j, TABLE_SYMBOLS['k']: k})
        terms.append(_parse(polynomial, name) * substituted)
    return PoissonSeries.from_sympy(prefactor * sympy.Add(*terms))


class FixtureLoader:
    """
    Loads the hand-transcribed printed series into PoissonSeries fixtures
    """

    def __init__(self, path=None):
        self.path = path or config.FIXTURES_FILE
        self.fixtures = {}
        self.tables = {}

    def load(self):
        print("=" * 70)
        print("LOADING PRINTED SERIES")
        print("=" * 70)
        print(f"\nReading {self.path}...")
        content = _read_yaml(self.path)

        raw_tables = content.get('tables') or {}
        for name, table in raw_tables.items():
            self.tables[name] = expand_table(table, name)
        print(f"   ✓ Expanded {len(self.tables)} inclination-polynomial tables")

        for name, entry in (content.get('fixtures') or {}).items():
            self.fixtures[name] = self._build(name, entry)
        print(f"   ✓ Loaded {len(self.fixtures)} fixtures")
        return self.fixtures

    def _build(self, name, entry):
        family = entry.get('family')
        if family not in FIXTURE_FAMILIES:
            raise FixtureError(f"{name}: unknown family {family!r}")
        element = entry.get('element')
        if element not in config.ELEMENT_NAMES:
            raise FixtureError(f"{name}: unknown element {element!r}")
        order = entry.get('order')
        if not isinstance(order, int) or order < 1:
            raise FixtureError(f"{name}: order must be a positive integer")
        theories = tuple(int(t) for t in entry.get('theories', (1, 2)))
        for theory in theories:
            if theory not in (1, 2):
                raise FixtureError(f"{name}: unknown theory {theory}")

        parts = []
        if 'expression' in entry:
            parts.append(PoissonSeries.from_sympy(_parse(entry['expression'], name)))
        for table_name in entry.get('tables', []):
            if table_name not in self.tables:
                raise FixtureError(f"{name}: unknown table {table_name!r}")
            parts.append(self.tables[table_name])
        if not parts:
            raise FixtureError(f"{name}: neither an expression nor tables")

        return Fixture(name=name, family=family, element=config.ELEMENT_NAMES.index(element),
                       order=order, theories=theories, series=PoissonSeries.total(parts))

    def for_theory(self, theory, max_order=None):
        """Fixtures applying to a theory, optionally limited to orders <= max_order"""
        return [f for f in self.fixtures.values()
                if f.applies_to(theory) and (max_order is None or f.order <= max_order)]

    def print_summary(self):
        print("\n" + "=" * 70)
        print("FIXTURE SUMMARY")
        print("=" * 70)
        for family in FIXTURE_FAMILIES:
            count = sum(1 for f in self.fixtures.values() if f.family == family)
            if count:
                print(f"{family}: {count}")
        print("=" * 70)


# ============================================================================
# SCENARIOS
# ============================================================================

def resolve_scenario(reference):
    """A scenario file path, or the name of a bundled scenario such as 'fig5'"""
    if os.path.exists(reference):
        return reference
    name = reference if reference.endswith('.yaml') else f"{reference}.yaml"
    bundled = os.path.join(config.SCENARIO_DIR, name)
    if os.path.dirname(reference) == '' and os.path.exists(bundled):
        return bundled
    raise FileNotFoundError(reference)


@dataclass(frozen=True)
class Scenario:
    """One propagation run: initial osculating elements, theory and timing"""

    name: str
    init_elements: OrbitalElements
    constants: PhysicalConstants
    theory_config: TheoryConfig
    duration: float
    sample_dt: float
    integrator: IntegratorConfig

    def __post_init__(self):
        if not self.duration > 0:
            raise ScenarioError(f"{self.name}: duration must be positive, got {self.duration}")
        if not self.sample_dt > 0:
            raise ScenarioError(f"{self.name}: sample_dt must be positive, got {self.sample_dt}")


class ScenarioLoader:
    """
    Reads a scenario file; a `theories` list expands it into one run per theory
    """

    def __init__(self, path, force_patched=False):
        self.path = path
        self.force_patched = force_patched
        self.scenarios = []

    def load(self):
        print("=" * 70)
        print("LOADING SCENARIO")
        print("=" * 70)
        self.path = resolve_scenario(self.path)
        print(f"\nReading {self.path}...")
        content = _read_yaml(self.path)

        name = content.get('name') or os.path.splitext(os.path.basename(self.path))[0]
        elements = self._elements(content.get('elements') or {})
        constants = self._constants(content.get('constants') or {})
        integrator = self._integrator(content.get('integrator') or {})
        duration, sample_dt = self._timing(content)

        theory_block = content.get('theory') or {}
        theories = theory_block.get('theories')
        order = int(theory_block.get('order', 1))
        patched = bool(theory_block.get('patched', False)) or self.force_patched

        if theories is None:
            runs = [(name, theory_block.get('theory', 1))]
        else:
            runs = [(f"{name}_theory{int(t)}", t) for t in theories]

        for run_name, theory in runs:
            try:
                theory = Theory(int(theory))
            except ValueError as exc:
                raise ScenarioError(f"{run_name}: unknown theory {theory}") from exc
            self.scenarios.append(Scenario(
                name=run_name,
                init_elements=elements,
                constants=constants,
                theory_config=TheoryConfig(theory, order, patched),
                duration=duration,
                sample_dt=sample_dt,
                integrator=integrator
            ))
            print(f"   ✓ Run {run_name}: theory {int(theory)}, order {order}"
                  f"{' (patched)' if patched else ''}")
        return self.scenarios

    @staticmethod
    def _elements(block):
        missing = [key for key in ('a_km', 'e', 'i_deg') if key not in block]
        if missing:
            raise ScenarioError(f"elements block lacks {', '.join(missing)}")
        return OrbitalElements.from_degrees(
            float(block['a_km']), float(block['e']), float(block['i_deg']),
            float(block.get('raan_deg', 0.0)), float(block.get('argp_deg', 0.0)),
            float(block.get('M_deg', 0.0))
        )

    @staticmethod
    def _constants(block):
        return PhysicalConstants(
            mu=float(block.get('mu', config.MU_EARTH)),
            R_earth=float(block.get('R_earth', config.R_EARTH)),
            J2=float(block.get('J2', config.J2))
        )

    @staticmethod
    def _integrator(block):
        return IntegratorConfig(
            rel_tol=float(block.get('rel_tol', config.REFERENCE_REL_TOL)),
            abs_tol=float(block.get('abs_tol', config.REFERENCE_ABS_TOL)),
            max_step=float(block.get('max_step', config.REFERENCE_MAX_STEP)),
            method=str(block.get('method', config.INTEGRATOR_METHOD))
        )

    @staticmethod
    def _timing(content):
        if 'duration_days' in content:
            duration = float(content['duration_days']) * SECONDS_PER_DAY
        elif 'duration_s' in content:
            duration = float(content['duration_s'])
        else:
            raise ScenarioError("scenario needs duration_days or duration_s")
        sample_dt = float(content.get('sample_dt_s', config.DEFAULT_SAMPLE_DT))
        return duration, sample_dt

    def print_summary(self):
        print("\n" + "=" * 70)
        print("SCENARIO SUMMARY")
        print("=" * 70)
        for sc in self.scenarios:
            print(f"{sc.name}: {sc.duration / SECONDS_PER_DAY:g} days every {sc.sample_dt:g} s, "
                  f"theory {int(sc.theory_config.theory)} order {sc.theory_config.order}")
        print("=" * 70)
