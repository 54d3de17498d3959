"""JSON documents for targets, gauges, risks, plans and reports.

Every number is a Hypernum token (``repr`` of a float, or ``{pt}p{mantissa}``
above the float range) so documents round-trip exactly. Keys are written in a
fixed order; the same plan always serializes to the same bytes.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path

from construct import HeavyFamily, replay_plan
from errors import ConfigError
from hypernum import Hypernum
from risk import RiskFunction, Segment, Term
from targets import GaugeFamily, GrowthFunction, TargetDistribution, TargetFamily
from verify import VerificationReport

log = logging.getLogger(__name__)

PLAN_SCHEMA = 'heavymin/plan'
FAMILY_SCHEMA = 'heavymin/family'
RISK_SCHEMA = 'heavymin/risk'
REPORT_SCHEMA = 'heavymin/report'
VERSION = 1


def _tok(h) -> str:
    return Hypernum.of(h).to_token()


def _num(token) -> Hypernum:
    return Hypernum.from_token(token)


# ---- families -------------------------------------------------------------

def dump_target(F: TargetDistribution) -> dict:
    if F.family is TargetFamily.TABULATED:
        return {'family': F.family.value, 'grid_x': list(F.grid_x), 'grid_risk': list(F.grid_risk)}
    return {'family': F.family.value, 'alpha': F.alpha}


def load_target(doc: dict) -> TargetDistribution:
    family = TargetFamily(doc['family'])
    if family is TargetFamily.TABULATED:
        return TargetDistribution.tabulated(doc['grid_x'], doc['grid_risk'])
    return TargetDistribution(family, float(doc['alpha']))


def dump_gauge(g: GrowthFunction | None) -> dict | None:
    if g is None:
        return None
    if g.family is GaugeFamily.TABULATED:
        return {'family': g.family.value, 'grid_x': list(g.grid_x), 'grid_g': list(g.grid_g)}
    if g.family is GaugeFamily.IDENTITY_PLUS:
        return {'family': g.family.value}
    return {'family': g.family.value, 'beta': g.beta}


def load_gauge(doc: dict | None) -> GrowthFunction | None:
    if doc is None:
        return None
    family = GaugeFamily(doc['family'])
    if family is GaugeFamily.TABULATED:
        return GrowthFunction.tabulated(doc['grid_x'], doc['grid_g'])
    return GrowthFunction(family, doc.get('beta'))


# ---- risks ----------------------------------------------------------------

def dump_risk(R: RiskFunction) -> dict:
    return {
        'schema': RISK_SCHEMA,
        'horizon': None if R.horizon is None else _tok(R.horizon),
        'segments': [
            {
                'start': _tok(s.start),
                'offset': _tok(s.offset),
                'terms': [{'target': dump_target(t.target), 'slope': t.slope} for t in s.terms],
                'bases': [_tok(b) for b in s.bases],
            }
            for s in R.segments
        ],
    }


def load_risk(doc: dict) -> RiskFunction:
    segments = tuple(
        Segment(
            _num(s['start']), _num(s['offset']),
            tuple(Term(load_target(t['target']), float(t['slope'])) for t in s['terms']),
            tuple(_num(b) for b in s['bases']),
        )
        for s in doc['segments']
    )
    horizon = doc.get('horizon')
    return RiskFunction(segments, None if horizon is None else _num(horizon))


# ---- plans and families ---------------------------------------------------

def dump_family(fam: HeavyFamily) -> dict:
    """Plan document for planned families, component-risk document otherwise."""
    plan = fam.plan
    if plan is None:
        return {
            'schema': FAMILY_SCHEMA,
            'version': VERSION,
            'target': dump_target(fam.target),
            'gauge': dump_gauge(fam.gauge),
            'n': fam.n,
            'k': fam.k,
            'risks': [dump_risk(R) for R in fam.risks],
            'note': fam.note,
        }
    return {
        'schema': PLAN_SCHEMA,
        'version': VERSION,
        'target': dump_target(fam.target),
        'gauge': dump_gauge(fam.gauge),
        'policy': plan.policy.value,
        'n': plan.n,
        'k': plan.k,
        'subsets': [list(s) for s in plan.subsets],
        'breakpoints': [{'value': _tok(a), 'log': _tok(a.log())} for a in plan.breakpoints],
        'frozen_sets': [list(s) for s in plan.frozen_sets],
        'certificates': [_tok(c) for c in plan.certificates],
        'overflow': plan.overflow,
    }


def load_family(doc: dict) -> HeavyFamily:
    try:
        schema = doc['schema']
        target = load_target(doc['target'])
        gauge = load_gauge(doc.get('gauge'))
        if schema == FAMILY_SCHEMA:
            risks = tuple(load_risk(r) for r in doc['risks'])
            return HeavyFamily(int(doc['n']), int(doc['k']), risks, target, gauge, None, doc.get('note', ''))
        if schema != PLAN_SCHEMA:
            raise ConfigError(f'unknown document schema {schema!r}')
        subsets = [tuple(s) for s in doc['subsets']]
        fam = replay_plan(
            target, gauge, doc['policy'], int(doc['n']), int(doc['k']),
            [_num(b['value']) for b in doc['breakpoints']],
            doc['frozen_sets'],
            [_num(c) for c in doc['certificates']],
            bool(doc.get('overflow', False)),
        )
    except (KeyError, TypeError) as e:
        raise ConfigError(f'malformed family document: {e!r}') from e
    if subsets != list(fam.plan.subsets):
        log.warning('stored subset order differs from the lexicographic order; using lexicographic')
    return fam


# ---- reports --------------------------------------------------------------

def dump_report(report: VerificationReport) -> dict:
    return {
        'schema': REPORT_SCHEMA,
        'version': VERSION,
        'n': report.n,
        'k': report.k,
        'passed': report.passed,
        'failures': report.failures(),
        'tolerance': report.tolerance,
        'exactness_sup_error': report.exactness_sup_error,
        'dominance_min_slack': report.dominance_min_slack,
        'component_bound_max': report.component_bound_max,
        'gaps_min': None if report.gaps_min is None else _tok(report.gaps_min),
        'certificates': [_tok(c) for c in report.certificates],
        'recomputed_certificates': [_tok(c) for c in report.recomputed],
        'gauge_certified': report.gauge_certified,
        'certificate_min': {label: _tok(c) for label, c in report.certificate_min.items()},
        'divergence': {
            label: {'residue': d.residue, 'intervals': d.intervals, 'count': d.count, 'bound': _tok(d.bound)}
            for label, d in report.divergence.items()
        },
        'hazard_bounds': {
            label: {'residue': h.residue, 'rounds': h.rounds, 'worst': h.worst, 'passed': h.passed}
            for label, h in report.hazard_bounds.items()
        },
        'ks': {
            label: {'statistic': r.statistic, 'n': r.n, 'critical': r.critical,
                    'significance': r.significance, 'two_sided': r.two_sided, 'passed': r.passed}
            for label, r in report.ks.items()
        },
        'hazard_trace': {
            comp: [{'x': _tok(p.x), 'log_ratio': _tok(p.log_ratio), 'ratio': p.ratio} for p in trace]
            for comp, trace in report.hazard_trace.items()
        },
    }


# ---- files ----------------------------------------------------------------

def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=True) + '\n'


def write_json(path, doc: dict) -> Path:
    path = Path(path)
    path.write_text(dumps(doc), encoding='utf-8')
    return path


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding='utf-8'))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f'cannot read {path}: {e}') from e


__all__ = [
    'dump_target', 'load_target', 'dump_gauge', 'load_gauge', 'dump_risk', 'load_risk',
    'dump_family', 'load_family', 'dump_report', 'dumps', 'write_json', 'read_json',
]
