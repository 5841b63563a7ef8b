"""
Comparator Module
Compares derived series with the printed fixtures, runs the structural
relations between families and theories, and generates verification reports
"""

import os
from fractions import Fraction

import pandas as pd

from . import config
from .exceptions import FixtureMismatch, VerificationError
from .lie_engine import (ANOMALY, ELEMENTS, SEMIMAJOR, Theory, closed_form_second_inverse,
                         compose_transforms, verify_mean_by_substitution)
from .series_algebra import PoissonSeries, describe_key
from .toy_model import build_toy_flow

PASS = 'PASS'
FAIL = 'FAIL'
SKIP = 'SKIP'

RESULT_COLUMNS = ['Check', 'Kind', 'Element', 'Order', 'Status', 'Derived_Terms', 'Expected_Terms',
                  'First_Mismatch']


def first_mismatch(derived, expected):
    """Description of the first differing term, or None when the series agree"""
    keys = derived.differing_keys(expected)
    if not keys:
        return None
    key = keys[0]
    return (f"{describe_key(key)}: derived {derived.coefficient(key)!r}, "
            f"expected {expected.coefficient(key)!r}")


class FixtureComparator:
    """
    Verification suite of one derived theory.

    companion is the other theory's artifacts, derived to at least order 2,
    and enables the cross-theory relations.
    """

    def __init__(self, artifacts, fixtures, companion=None, flow=None):
        self.artifacts = artifacts
        self.fixtures = list(fixtures)
        self.companion = companion
        self.flow = flow or build_toy_flow()
        self.rows = []
        self.results_df = None
        self.failures_df = None

    @property
    def theory(self):
        return self.artifacts.theory

    @property
    def order(self):
        return self.artifacts.order

    def _record(self, check, kind, element, order, derived, expected):
        mismatch = first_mismatch(derived, expected)
        self.rows.append({
            'Check': check,
            'Kind': kind,
            'Element': config.ELEMENT_NAMES[element] if element is not None else '-',
            'Order': order,
            'Status': PASS if mismatch is None else FAIL,
            'Derived_Terms': len(derived),
            'Expected_Terms': len(expected),
            'First_Mismatch': mismatch or ''
        })
        return mismatch is None

    def _skip(self, check, kind, element, order, reason):
        self.rows.append({
            'Check': check, 'Kind': kind,
            'Element': config.ELEMENT_NAMES[element] if element is not None else '-',
            'Order': order, 'Status': SKIP, 'Derived_Terms': 0, 'Expected_Terms': 0,
            'First_Mismatch': reason
        })

    def compare(self):
        """Run every check; returns the full results and the failing rows"""
        print("\n" + "=" * 70)
        print(f"VERIFYING THEORY {int(self.theory)} ({self.theory.label}) AT ORDER {self.order}")
        print("=" * 70)
        self.rows = []

        print(f"\n1. Comparing {len(self.fixtures)} printed series...")
        self._compare_fixtures()
        print("\n2. Checking structural relations...")
        self._check_relations()
        if self.companion is not None:
            print("\n3. Checking relations between theories...")
            self._check_cross_theory()
        print("\n4. Checking transformation identities...")
        self._check_identities()

        self.results_df = pd.DataFrame(self.rows, columns=RESULT_COLUMNS)
        self.failures_df = self.results_df[self.results_df['Status'] == FAIL]
        self._print_summary()
        return self.results_df, self.failures_df

    # ------------------------------------------------------------------
    # fixture comparisons
    # ------------------------------------------------------------------

    def _derived_for(self, fixture):
        if fixture.family == 'flow':
            return self.flow.term(fixture.element, fixture.order)
        if not self.artifacts.has(fixture.family, fixture.element, fixture.order):
            return None
        return self.artifacts.series(fixture.family, fixture.element, fixture.order)

    def _compare_fixtures(self):
        for fixture in self.fixtures:
            if not fixture.applies_to(self.theory):
                continue
            derived = self._derived_for(fixture)
            if derived is None:
                self._skip(fixture.name, 'fixture', fixture.element, fixture.order,
                           f"{fixture.family} of order {fixture.order} not derived")
                continue
            if self._record(fixture.name, 'fixture', fixture.element, fixture.order,
                            derived, fixture.series):
                print(f"   ✓ {fixture.name}")
            else:
                print(f"   ❌ {fixture.name}")

    # ------------------------------------------------------------------
    # relations inside one theory
    # ------------------------------------------------------------------

    def _check_relations(self):
        art = self.artifacts
        if art.order >= 2:
            first = art.direct[1]
            expected = closed_form_second_inverse(first, art.direct[2])
            for j in ELEMENTS:
                self._record('closed-form second-order inverse', 'relation', j, 2,
                             art.inverse[2][j], expected[j])

        if self.theory is Theory.PURE_PERIODIC_TRANSFORMATION:
            for m in range(1, art.order + 1):
                for j in ELEMENTS:
                    self._record('pure periodic mean-to-osculating transformation', 'relation', j, m,
                                 art.direct[m][j].average_M(), PoissonSeries.zero())
            if art.order >= 2:
                self._record('inverse long-period semimajor axis = -2 C', 'relation', SEMIMAJOR, 2,
                             art.inverse[2][SEMIMAJOR].average_M(), art.C[2][SEMIMAJOR].scale(-2))
        else:
            for m in range(1, art.order + 1):
                self._record('vanishing mean semimajor axis rate', 'relation', SEMIMAJOR, m,
                             art.series('phi', SEMIMAJOR, m), PoissonSeries.zero())
                for j in ELEMENTS:
                    self._record('vanishing integration constants', 'relation', j, m,
                                 art.C[m][j], PoissonSeries.zero())
            if art.order >= 2:
                for j in ELEMENTS:
                    self._record('equal long-period split of the transformations', 'relation', j, 2,
                                 art.inverse[2][j].average_M(), art.direct[2][j].average_M())
        n_relations = sum(1 for row in self.rows if row['Kind'] == 'relation')
        print(f"   ✓ {n_relations} relation checks evaluated")

    # ------------------------------------------------------------------
    # relations between the two theories
    # ------------------------------------------------------------------

    def _check_cross_theory(self):
        if self.theory is Theory.PURE_PERIODIC_TRANSFORMATION:
            first, second = self.artifacts, self.companion
        else:
            first, second = self.companion, self.artifacts
        if min(first.order, second.order) < 2:
            self._skip('relations between theories', 'cross-theory', None, 2,
                       'both theories must reach order 2')
            return

        for j in range(ANOMALY):
            self._record('shared second-order mean rates', 'cross-theory', j, 2,
                         second.phi[2][j], first.phi[2][j])

        # Phi^1_{M,0,2} = Phi^2_{M,0,2} - (3n/2a) C^1_{a,2}
        correction = first.C[2][SEMIMAJOR].shift(a=-1, n=1).scale(Fraction(3, 2))
        self._record('anomaly rate shift by the semimajor axis constant', 'cross-theory', ANOMALY, 2,
                     first.phi[2][ANOMALY], second.phi[2][ANOMALY] - correction)

        for j in ELEMENTS:
            self._record('half long-period split of the direct transformation', 'cross-theory', j, 2,
                         second.direct[2][j].average_M(),
                         first.inverse[2][j].average_M().scale(Fraction(1, 2)))
        print("   ✓ Cross-theory relations evaluated")

    # ------------------------------------------------------------------
    # identities
    # ------------------------------------------------------------------

    def _check_identities(self):
        art = self.artifacts
        for m in range(1, art.order + 1):
            direct = [art.eps_series('direct', j, m) for j in ELEMENTS]
            inverse = [art.eps_series('inverse', j, m) for j in ELEMENTS]
            residual = compose_transforms(direct, inverse, m)
            for j in ELEMENTS:
                self._record('composition identity', 'identity', j, m, residual[j], PoissonSeries.zero())
            residual = verify_mean_by_substitution(art, self.flow, m)
            for j in ELEMENTS:
                self._record('mean flow substitution', 'identity', j, m, residual[j], PoissonSeries.zero())
            print(f"   ✓ Order {m} identities evaluated")

    # ------------------------------------------------------------------
    # reporting
    # ------------------------------------------------------------------

    def _print_summary(self):
        total = len(self.results_df)
        failed = len(self.failures_df)
        skipped = int((self.results_df['Status'] == SKIP).sum())
        passed = total - failed - skipped

        print(f"\nChecks evaluated: {total}")
        print(f"Passed: {passed}")
        print(f"Failed: {failed}")
        print(f"Skipped: {skipped}")

        if failed > 0:
            print("\n" + "=" * 70)
            print("🚨 VERIFICATION FAILURES DETECTED")
            print("=" * 70)
            for _, row in self.failures_df.head(config.MAX_SAMPLE_DISPLAY).iterrows():
                print(f"  {row['Check']} [{row['Element']}, order {row['Order']}]: {row['First_Mismatch']}")
        else:
            print("\n✅ ALL CHECKS PASS! Derived series match the printed ones.")

    def raise_on_failure(self):
        """FixtureMismatch for the first failing fixture, VerificationError for any other failure"""
        if self.failures_df is None or self.failures_df.empty:
            return
        row = self.failures_df.iloc[0]
        if row['Kind'] == 'fixture':
            raise FixtureMismatch(row['Check'], row['First_Mismatch'])
        raise VerificationError(f"{row['Check']} [{row['Element']}, order {row['Order']}]: "
                                f"{row['First_Mismatch']}")

    def export_results(self, out_dir=None):
        """Export the pass/fail matrix to Excel and a text summary"""
        out_dir = out_dir or config.RESULTS_DIR
        os.makedirs(out_dir, exist_ok=True)
        print("\n" + "=" * 70)
        print("EXPORTING VERIFICATION RESULTS")
        print("=" * 70)

        names = {'theory': int(self.theory), 'order': self.order}
        matrix_file = os.path.join(out_dir, config.OUTPUT_FILES['verification_matrix'].format(**names))
        with pd.ExcelWriter(matrix_file, engine='openpyxl') as writer:
            self.results_df.to_excel(writer, sheet_name='Checks', index=False)
            pivot = self.results_df.pivot_table(index='Kind', columns='Status', values='Check',
                                                aggfunc='count', fill_value=0)
            pivot.to_excel(writer, sheet_name='Summary')
        print(f"\n✓ Verification matrix exported to: {matrix_file}")

        report_file = os.path.join(out_dir, config.OUTPUT_FILES['verification_report'].format(**names))
        self._export_summary_report(report_file)
        return matrix_file, report_file

    def _export_summary_report(self, report_file):
        with open(report_file, 'w', encoding='utf-8') as f:
            f.write("=" * 70 + "\n")
            f.write(f"VERIFICATION REPORT: THEORY {int(self.theory)}, ORDER {self.order}\n")
            f.write("=" * 70 + "\n\n")
            for status in (PASS, FAIL, SKIP):
                count = int((self.results_df['Status'] == status).sum())
                f.write(f"{status}: {count}\n")
            f.write("\nBy kind:\n")
            for kind, group in self.results_df.groupby('Kind', sort=True):
                failed = int((group['Status'] == FAIL).sum())
                f.write(f"  {kind}: {len(group)} checks, {failed} failed\n")
            if not self.failures_df.empty:
                f.write("\nFailures:\n")
                for _, row in self.failures_df.iterrows():
                    f.write(f"  {row['Check']} [{row['Element']}, order {row['Order']}]: "
                            f"{row['First_Mismatch']}\n")
        print(f"✓ Summary report exported to: {report_file}")

    def print_sample_results(self, num_samples=None):
        if num_samples is None:
            num_samples = config.MAX_SAMPLE_DISPLAY
        print("\n" + "=" * 70)
        print(f"SAMPLE VERIFICATION RESULTS (First {num_samples} fixtures)")
        print("=" * 70)
        fixtures = self.results_df[self.results_df['Kind'] == 'fixture']
        for _, row in fixtures.head(num_samples).iterrows():
            print(f"\n{row['Check']}")
            print(f"  Element: {row['Element']}, order {row['Order']}")
            print(f"  Terms: derived {row['Derived_Terms']}, printed {row['Expected_Terms']}")
            print(f"  Status: {row['Status']}")
