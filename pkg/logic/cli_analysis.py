"""
Command Line Module
The meanelem command line: derive and cache theories, verify them against
the printed series, and run propagation campaigns
"""

import argparse
import glob
import os
import sys
import traceback

import yaml

from . import config
from .comparator import FixtureComparator
from .data_loader import FixtureLoader, ScenarioLoader
from .exceptions import InputError, NumericalError, VerificationError
from .lie_engine import SEMIMAJOR, Theory, TheoryCache, derive_theory
from .propagator import PropagationCampaign

DEFAULT_DERIVE_ORDER = 2
DEFAULT_VERIFY_ORDER = 2


class CommandParser(argparse.ArgumentParser):
    """Usage errors raise InputError so they leave with the bad-input status"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(f"{self.prog}: {message}")


def build_parser():
    parser = CommandParser(
        prog='meanelem',
        description="Mean-element theories of the J2 toy model by Lie transforms of vectorial flows"
    )
    parser.add_argument('--cache', help=f"theory cache directory (default: ${config.CACHE_ENV_VAR} "
                                        f"or {config.DEFAULT_CACHE_DIR})")
    subparsers = parser.add_subparsers(dest='command', required=True)

    derive = subparsers.add_parser('derive', help="derive theories and write them to the cache")
    derive.add_argument('--theory', type=int, choices=(1, 2), help="theory to derive (default: both)")
    derive.add_argument('--order', type=int, default=DEFAULT_DERIVE_ORDER,
                        help=f"derivation order, 1..{config.MAX_ORDER}")
    derive.add_argument('--patched', action='store_true',
                        help="also derive the next-order mean semimajor axis rate of Theory 1")

    verify = subparsers.add_parser('verify', help="compare derived series with the printed ones")
    verify.add_argument('--theory', type=int, choices=(1, 2), help="theory to verify (default: both)")
    verify.add_argument('--order', type=int, default=DEFAULT_VERIFY_ORDER,
                        help=f"verification order, 1..{config.MAX_ORDER}")
    verify.add_argument('--fixtures', help="printed-series file (default: bundled fixtures)")
    verify.add_argument('--out', help="directory for the verification workbook and report")

    propagate = subparsers.add_parser('propagate', help="run semi-analytic propagation scenarios")
    propagate.add_argument('--scenario', action='append',
                           help="scenario file or bundled name such as fig5; repeatable "
                                "(default: every bundled scenario)")
    propagate.add_argument('--patched', action='store_true', help="patch every run")
    propagate.add_argument('--out', help="directory for the CSV outputs")

    for sub in (derive, verify, propagate):
        sub.add_argument('--cache', help=argparse.SUPPRESS, default=argparse.SUPPRESS)
    return parser


def _theories(selected):
    return [Theory(selected)] if selected else list(Theory)


def _check_order(order):
    if not 1 <= order <= config.MAX_ORDER:
        raise InputError(f"order must lie in 1..{config.MAX_ORDER}, got {order}")


def _artifacts(cache, theory, order, extra_rates=()):
    """Cached artifacts when the cache covers the request, else an in-memory derivation"""
    if cache.covers(theory, order, extra_rates):
        print(f"✓ Theory {int(theory)} loaded from {cache.root}")
        return cache.load(theory)
    print(f"⚠️  Theory {int(theory)} to order {order} is not cached under {cache.root}; "
          f"deriving in memory")
    return derive_theory(theory, order, extra_rates)


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_derive(args):
    _check_order(args.order)
    cache = TheoryCache(args.cache)
    for theory in _theories(args.theory):
        extra_rates = ()
        if args.patched and theory is Theory.PURE_PERIODIC_TRANSFORMATION:
            if args.order >= config.MAX_ORDER:
                raise InputError(f"a patched derivation stops at order {config.MAX_ORDER - 1}")
            extra_rates = ((SEMIMAJOR, args.order + 1),)
        artifacts = derive_theory(theory, args.order, extra_rates)
        written = cache.save(artifacts)
        print(f"\n✓ {written} series files written under {cache.theory_dir(theory)}")
        print("\nTerm counts (a, e, I, Omega, omega, M):")
        for m in range(1, args.order + 1):
            print(f"  order {m}: mean variations {artifacts.term_counts('phi', m)}")
            print(f"           direct {artifacts.term_counts('direct', m)}, "
                  f"inverse {artifacts.term_counts('inverse', m)}")
        for (j, m), rate in sorted(artifacts.extra_rates.items()):
            print(f"  order {m}: {config.ELEMENT_NAMES[j]} mean variation {len(rate)} terms")
    return config.EXIT_OK


def cmd_verify(args):
    _check_order(args.order)
    cache = TheoryCache(args.cache)
    loader = FixtureLoader(args.fixtures)
    loader.load()
    loader.print_summary()

    derived = {theory: _artifacts(cache, theory, args.order) for theory in _theories(args.theory)}
    comparators = []
    for theory, artifacts in derived.items():
        other = Theory(3 - int(theory))
        companion = derived.get(other)
        if companion is None and args.order >= 2:
            companion = _artifacts(cache, other, 2)
        comparator = FixtureComparator(artifacts, loader.for_theory(theory), companion)
        comparator.compare()
        comparator.print_sample_results()
        comparator.export_results(args.out)
        comparators.append(comparator)

    for comparator in comparators:
        comparator.raise_on_failure()
    print("\n✅ Verification passed")
    return config.EXIT_OK


def cmd_propagate(args):
    cache = TheoryCache(args.cache)
    paths = args.scenario or sorted(glob.glob(os.path.join(config.SCENARIO_DIR, '*.yaml')))
    if not paths:
        raise InputError(f"no scenario files found under {config.SCENARIO_DIR}")

    scenarios = []
    for path in paths:
        loader = ScenarioLoader(path, force_patched=args.patched)
        scenarios.extend(loader.load())

    theories = {}
    for scenario in scenarios:
        tc = scenario.theory_config
        key = (tc.theory, tc.derivation_order, tc.extra_rates)
        if key not in theories:
            theories[key] = _artifacts(cache, *key)
        PropagationCampaign(scenario, theories[key], args.out).run()
    print(f"\n✓ {len(scenarios)} propagation runs completed")
    return config.EXIT_OK


COMMANDS = {
    'derive': cmd_derive,
    'verify': cmd_verify,
    'propagate': cmd_propagate,
}


def main(argv=None):
    """Parse arguments, run the command and map failures to exit codes"""
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)

    except VerificationError as e:
        print(f"\n❌ ERROR: Verification failed - {e}")
        return config.EXIT_MISMATCH

    except NumericalError as e:
        print(f"\n❌ ERROR: Numerical failure - {e}")
        print(f"Error type: {type(e).__name__}")
        return config.EXIT_NUMERICAL

    except (InputError, FileNotFoundError) as e:
        print(f"\n❌ ERROR: Bad input - {e}")
        return config.EXIT_BAD_INPUT

    except yaml.YAMLError as e:
        print(f"\n❌ ERROR: Malformed YAML - {e}")
        return config.EXIT_BAD_INPUT

    except Exception as e:
        print(f"\n❌ UNEXPECTED ERROR: {e}")
        print(f"Error type: {type(e).__name__}")
        traceback.print_exc()
        return config.EXIT_NUMERICAL
