"""Command-line front end.

    python cli.py construct --target exponential:1 --gauge identity_plus --mode pair --horizon 32
    python cli.py verify plan.json --samples 100000
    python cli.py sample plan.json --samples 10 --seed 7
    python cli.py figures --example exponential --alpha 2 --beta 1 --count 8
    python cli.py validate-seq --target exponential:2 --gauge exp:1 --sequence seq.txt

Exit codes: 0 ok, 2 configuration error, 3 hypothesis violated, 4 check
failed, 5 horizon too short.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

from config import build_config, parse_policy, read_sequence
from construct import (Example, construct_family, example_exponent_sums, example_setting,
                       minimal_sequence, sqrt_split, sqrt_split_shortcut, validate_explicit_sequence)
from errors import CheckFailure, ConfigError, HorizonError, HypothesisViolation
from schema import dump_family, dump_report, load_family, read_json, write_json
from verify import sample_family, verify_family

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_CHECK = 4
EXIT_HORIZON = 5


def _announce_seed(cfg):
    if cfg.seed_defaulted:
        print(f'Using default seed {cfg.seed}')


def cmd_construct(cfg) -> int:
    F, g = cfg.target_distribution, cfg.growth
    if cfg.mode == 'sqrt-split':
        fam = sqrt_split(F, g)
        if sqrt_split_shortcut(F, g):
            print(f'Exponential shortcut: beta={g.beta!r} > alpha/2={F.alpha / 2!r}, '
                  f'the EXPONENTIAL({F.alpha / 2!r}) components are already g-heavy')
        print(fam.note)
    else:
        policy, sequence = parse_policy(cfg.policy)
        n, k = (2, 2) if cfg.mode == 'pair' else (cfg.n, cfg.k)
        fam = construct_family(F, g, n, k, policy, cfg.horizon_spec, sequence, cfg.max_level)
        plan = fam.plan
        print(f'{plan.intervals} intervals, {len(plan.breakpoints)} breakpoints, M={plan.M}, '
              f'min certificate {plan.min_certificate}, policy {plan.policy.value}')
        if plan.overflow:
            print('Plan stopped early: breakpoints left the representable range')
    out = write_json(cfg.output or 'plan.json', dump_family(fam))
    print(f'Wrote: {out}')
    return EXIT_OK


def cmd_verify(cfg) -> int:
    fam = load_family(read_json(cfg.plan))
    if cfg.samples:
        _announce_seed(cfg)
    report = verify_family(fam, samples=cfg.samples, seed=cfg.seed, significance=cfg.significance,
                           grid_points=cfg.grid_points, workers=cfg.workers)
    out = write_json(cfg.output or Path(cfg.plan).with_suffix('.report.json'), dump_report(report))
    print(f'Wrote: {out}')
    failures = report.failures()
    if failures:
        for f in failures:
            print(f'FAIL {f}')
        raise CheckFailure(failures)
    print('All checks passed')
    return EXIT_OK


def cmd_sample(cfg) -> int:
    fam = load_family(read_json(cfg.plan))
    _announce_seed(cfg)
    x = sample_family(fam, cfg.samples, cfg.seed, cfg.workers)
    out = Path(cfg.output or 'samples.csv')
    with open(out, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow([f'x{i}' for i in range(1, fam.n + 1)] + ['min'])
        for row in x.T:
            writer.writerow([repr(float(v)) for v in row] + [repr(float(row.min()))])
    print(f'Wrote: {out}')
    return EXIT_OK


def figure_base(example) -> tuple[float, str]:
    """(log base, column prefix): base 2 where the closed form is a power of 2, e otherwise."""
    if Example(example) is Example.WEIBULL:
        return math.e, 'log'
    return 2.0, 'log2'


def figure_columns(example) -> list[str]:
    _, p = figure_base(example)
    return ['k', f'{p}_a_star', f'{p}_a', f'{p}{p}_a_star', f'{p}{p}_a']


def figure_rows(example, alpha: float, beta: float, count: int):
    """(k, log a*_k, log a_k, loglog a*_k, loglog a_k) rows in the example's base, and whether they were truncated."""
    example = Example(example)
    F, g = example_setting(example, alpha, beta)
    base, _ = figure_base(example)

    def in_base(h):
        if base == math.e or h.is_zero() or not h.is_finite():
            return h
        return h / math.log(base)

    minimal = minimal_sequence(F, g, count + 1)[1:]
    sums = example_exponent_sums(alpha, beta, count)
    if example is Example.WEIBULL:
        # a_k = exp(exp(s_k)): the log-log column is s_k itself
        logs, loglogs = [s.exp() for s in sums], sums
    else:
        # a_k = 2^{s_k}: the log2 column is s_k itself
        logs = sums
        loglogs = [in_base(s.log()) for s in sums]
    rows = []
    for k, (a_star, la, lla) in enumerate(zip(minimal, logs, loglogs), start=1):
        la_star = in_base(a_star.log())
        values = [float(la_star), float(la), float(in_base(la_star.log())), float(lla)]
        if values[2] == math.inf or values[3] == math.inf:
            log.warning('figure rows truncated at k=%d: values beyond the log-log range', k)
            return rows, True
        rows.append([k] + values)
    return rows, False


def cmd_figures(cfg) -> int:
    alpha, beta = float(cfg.alpha), float(cfg.beta)
    rows, truncated = figure_rows(cfg.example, alpha, beta, cfg.count)
    out = Path(cfg.output or f'figures_{cfg.example}.csv')
    with open(out, 'w', newline='', encoding='utf-8') as f:
        base = 'base-2' if figure_base(cfg.example)[0] == 2.0 else 'natural'
        f.write(f'# example={cfg.example} alpha={alpha!r} beta={beta!r} K={cfg.count} '
                f'{base} logs; a_star = minimal recursion, a = closed form\n')
        writer = csv.writer(f)
        writer.writerow(figure_columns(cfg.example))
        for row in rows:
            writer.writerow([row[0]] + [repr(v) for v in row[1:]])
    if truncated:
        print(f'Truncated after k={len(rows)}: later values leave the log-log range')
    print(f'Wrote: {out}')
    return EXIT_OK


def cmd_validate_seq(cfg) -> int:
    report = validate_explicit_sequence(cfg.target_distribution, cfg.growth,
                                        read_sequence(cfg.sequence), cfg.n, cfg.k)
    for r in report.rows:
        status = 'ok' if r.covers and r.certified else 'FAIL'
        print(f'{r.interval:4d}  gap={r.gap}  certificate={r.certificate}  {status}')
    if cfg.output:
        doc = {'n': report.n, 'k': report.k, 'passed': report.passed,
               'intervals': [{'interval': r.interval, 'gap': r.gap.to_token(),
                              'certificate': r.certificate.to_token(),
                              'covers': r.covers, 'certified': r.certified} for r in report.rows]}
        print(f'Wrote: {write_json(cfg.output, doc)}')
    if not report.passed:
        raise CheckFailure(report.failures())
    print('Sequence validates')
    return EXIT_OK


COMMANDS = {
    'construct': cmd_construct,
    'verify': cmd_verify,
    'sample': cmd_sample,
    'figures': cmd_figures,
    'validate-seq': cmd_validate_seq,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON config file; flags override it')
    common.add_argument('--log-level', dest='log_level')
    common.add_argument('--workers', type=int)
    common.add_argument('--output', '-o')

    family = argparse.ArgumentParser(add_help=False)
    family.add_argument('--target', help='exponential:A | polynomial:A | weibull:A | tabulated:<csv>')
    family.add_argument('--gauge', help='power:B | exp:B | exp_power:B | identity_plus | tabulated:<csv>')
    family.add_argument('--n', type=int)
    family.add_argument('--k', type=int)

    parser = argparse.ArgumentParser(prog='heavymin', description='Heavy-tailed families whose minimum has a given law.')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('construct', parents=[common, family], help='build a plan and write it as JSON')
    p.add_argument('--mode', choices=['pair', 'family', 'sqrt-split'])
    p.add_argument('--policy', help='paper-minimal | exact-minimal | hazard | explicit:<file>')
    p.add_argument('--horizon', type=int, help='number of intervals')
    p.add_argument('--x-bound', dest='x_bound', type=float, help='build until a breakpoint reaches this x')

    for name, text in (('verify', 'check a stored plan'), ('sample', 'sample a stored plan')):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument('plan')
        p.add_argument('--samples', '-n', type=int)
        p.add_argument('--seed', type=int)
        if name == 'verify':
            p.add_argument('--significance', type=float)
            p.add_argument('--grid-points', dest='grid_points', type=int)

    p = sub.add_parser('figures', parents=[common], help='minimal and closed-form breakpoints as CSV')
    p.add_argument('--example', choices=[e.value for e in Example])
    p.add_argument('--alpha', type=float)
    p.add_argument('--beta', type=float)
    p.add_argument('--count', '-K', type=int)

    p = sub.add_parser('validate-seq', parents=[common, family], help='check an explicit breakpoint sequence')
    p.add_argument('--sequence', help='file with one breakpoint per line, starting at 0')
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ('command', 'config')}
    try:
        cfg = build_config(flags, args.config)
        logging.basicConfig(level=cfg.log_level.upper(), format='%(levelname)s %(name)s: %(message)s')
        cfg.validate(args.command)
        return COMMANDS[args.command](cfg)
    except HypothesisViolation as e:
        print(f'error: {e}', file=sys.stderr)
        return EXIT_HYPOTHESIS
    except CheckFailure as e:
        print(f'check failed: {e}', file=sys.stderr)
        return EXIT_CHECK
    except HorizonError as e:
        print(f'error: {e}', file=sys.stderr)
        return EXIT_HORIZON
    except (ConfigError, ValueError) as e:
        print(f'error: {e}', file=sys.stderr)
        return EXIT_CONFIG


if __name__ == '__main__':
    raise SystemExit(main())
