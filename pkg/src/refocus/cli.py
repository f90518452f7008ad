"""
Command-line front end: ``refocus {params,scan,noise,search,replay}``.

Every command writes CSV or JSON, to stdout or to ``--output``. Each file
written is accompanied by ``<file>.manifest.json``, which records the
command line, resolved configuration, library versions, seeds and
timestamps; ``refocus replay <manifest>`` re-runs it.

Exit codes: 0 success, 1 other error, 2 bad input (including shape
parse errors), 3 branch-cut failure, 4 propagation not converged,
5 search not converged, 6 scan slope outside the claimed band.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import platform
import re
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .errors import (BranchCutAmbiguity, InvalidArgument, InvalidModel,
                     InvalidShape, NotConverged, NotInCatalog, ParseError,
                     RefocusError)
from .model import PAULI, model_from_dict
from .pulse import (DELTA, G001, G010, compute_params,
                    shape_from_dict)

OUTPUT_DIR_ENV = 'REFOCUS_OUTPUT_DIR'
SLOPE_BAND = 0.3

EXIT_OK, EXIT_ERROR, EXIT_INPUT, EXIT_BRANCH, EXIT_NOISE, EXIT_SEARCH, \
    EXIT_SLOPE = 0, 1, 2, 3, 4, 5, 6

UNITS = ('Units: times are in units of the reference pulse length '
         '(tau_p = 1) unless --time-unit names another unit; every frequency '
         '(g, delta, cutoff, amplitude) is an angular frequency in the '
         'inverse time unit.')

DEFAULT_MODEL = {'type': 'cavity', 'n_fock': 8, 'g': 0.05, 'delta': 0.2}


class _Fail(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


# -- argument helpers ------------------------------------------------------

def _floats(text):
    try:
        return [float(v) for v in str(text).replace(' ', '').split(',') if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated numbers, '
                                         f'got {text!r}') from None


def _load_json(text, what):
    """Inline JSON (starting with '{') or a path to a JSON file."""
    try:
        if str(text).lstrip().startswith('{'):
            return json.loads(text)
        with open(text) as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise _Fail(EXIT_INPUT, f'cannot read {what}: {e}') from None


def _add_shape_args(p, default='delta'):
    g = p.add_argument_group('pulse shape')
    g.add_argument('--shape', metavar='JSON',
                   help='shape as inline JSON or a JSON file; overrides --kind')
    g.add_argument('--kind', choices=('delta', 'gaussian', 'hermite', 'sampled'),
                   default=default, help=f'pulse kind (default {default})')
    g.add_argument('--width-fraction', type=float,
                   help='gaussian/hermite width as a fraction of tau_p')
    g.add_argument('--coefficients', type=_floats,
                   help='hermite coefficients, comma separated')
    g.add_argument('--duration', type=float, default=1.0,
                   help='pulse length tau_p in time units (default 1)')


def _shape(args):
    try:
        if args.shape:
            spec = _load_json(args.shape, 'shape')
            if isinstance(spec, dict) and 'kind' not in spec and 'shape' in spec:
                spec = spec['shape']    # a saved search result
            return shape_from_dict(spec)
        spec = {'kind': args.kind, 'duration': args.duration,
                'width_fraction': args.width_fraction,
                'coefficients': args.coefficients}
        if args.kind == 'sampled':
            raise InvalidShape('sampled shapes must be given with --shape')
        return shape_from_dict(spec)
    except (InvalidShape, InvalidArgument, TypeError, ValueError) as e:
        raise _Fail(EXIT_INPUT, f'bad pulse shape: {e}') from None


def _model(args):
    spec = DEFAULT_MODEL if args.model is None else _load_json(args.model,
                                                               'model')
    try:
        return model_from_dict(spec)
    except InvalidModel as e:
        raise _Fail(EXIT_INPUT, f'bad model: {e}') from None


_REF_TERM = re.compile(r'([+-]?)(A0|s([xyz])A([xyz]))')


def parse_reference(text, couplings):
    """``"A0+sxAx"``-style sums of ``A0`` and ``s<mu>A<nu>`` terms."""
    compact = str(text).replace(' ', '')
    mats = dict(zip('0xyz', couplings.matrices))
    total = np.zeros((2 * couplings.dim,) * 2, dtype=complex)
    pos = 0
    while pos < len(compact):
        m = _REF_TERM.match(compact, pos)
        if m is None:
            raise ParseError(f'cannot parse reference at {compact[pos:]!r}')
        sign = -1 if m.group(1) == '-' else 1
        if m.group(2) == 'A0':
            term = np.kron(PAULI['I'], mats['0'])
        else:
            term = np.kron(PAULI[m.group(3).upper()], mats[m.group(4)])
        total += sign * term
        pos = m.end()
    if pos == 0:
        raise ParseError('empty reference')
    return total


# -- output and manifests --------------------------------------------------

def _output_path(args, name):
    if name is None:
        return None
    if os.path.isabs(name):
        return name
    base = args.out_dir or os.environ.get(OUTPUT_DIR_ENV) or '.'
    return os.path.join(base, name)


def _versions():
    import scipy
    return {'refocus': __version__, 'numpy': np.__version__,
            'scipy': scipy.__version__, 'python': platform.python_version()}


def _emit(args, text, seeds=None, extra_outputs=()):
    """Write ``text`` to ``--output`` (plus a manifest) or to stdout."""
    path = _output_path(args, getattr(args, 'output', None))
    if path is None:
        sys.stdout.write(text)
        return
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', newline='') as f:
        f.write(text)
    config = {k: v for k, v in vars(args).items()
              if k not in ('func', 'argv', 'started')}
    manifest = {
        'command': args.command,
        'argv': args.argv,
        'config': config,
        'versions': _versions(),
        'seeds': seeds,
        'timestamps': {'started': args.started,
                       'finished': datetime.now(timezone.utc).isoformat()},
        'outputs': [os.path.abspath(path), *extra_outputs],
        'out_dir': os.path.dirname(os.path.abspath(path)),
    }
    with open(path + '.manifest.json', 'w') as f:
        json.dump(manifest, f, indent=2, default=str)
        f.write('\n')


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator='\n')
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating))
                    else v for v in row])
    return buf.getvalue()


def _say(msg):
    print(msg, file=sys.stderr)


# -- commands --------------------------------------------------------------

def cmd_params(args):
    if args.table1:
        rows = [('delta', DELTA), ('G001', G001), ('G010', G010)]
    else:
        rows = [(args.kind if not args.shape else 'shape', _shape(args))]
    out = []
    for name, shape in rows:
        p = compute_params(shape, args.nodes) if args.nodes else \
            compute_params(shape)
        out.append((name, p.s, p.half_alpha, p.zeta))
    _emit(args, _csv(('shape', 's', 'alpha_half', 'zeta'), out))
    return EXIT_OK


def cmd_scan(args):
    from .sequence import order_scan, parse_sequence, predicted_heff
    couplings = _model(args)
    shape = _shape(args)
    try:
        seq = parse_sequence(args.seq, shape)
    except ParseError as e:
        raise _Fail(EXIT_INPUT, f'bad sequence: {e}') from None
    params = compute_params(shape, args.nodes) if args.nodes else \
        compute_params(shape)
    claimed = args.order
    try:
        pred = predicted_heff(seq, params, couplings)
        claimed = claimed or pred.claimed_order
        order0 = pred.order0
    except NotInCatalog:
        order0 = None
    if args.ref is None:
        if order0 is None:
            raise _Fail(EXIT_INPUT, f'{args.seq} is not in the catalog; '
                        'give --ref')
        ref = order0
    else:
        try:
            ref = parse_reference(args.ref, couplings)
        except ParseError as e:
            raise _Fail(EXIT_INPUT, str(e)) from None
    taus = np.asarray(args.taus, dtype=float)
    try:
        res = order_scan(seq, couplings, ref, taus, steps=args.steps)
    except BranchCutAmbiguity as e:
        raise _Fail(EXIT_BRANCH, f'branch cut at tau_p = {e.tau_p}: {e}') \
            from None
    except InvalidArgument as e:
        raise _Fail(EXIT_INPUT, str(e)) from None
    _emit(args, _csv(('tau_p', 'deviation', 'fitted_slope_running'),
                     res.rows()))
    ok = claimed is None or res.slope >= claimed - SLOPE_BAND
    band = 'none' if claimed is None else f'>= {claimed - SLOPE_BAND:g}'
    _say(f'{seq}: fitted slope {res.slope:.4f}, claimed order {claimed}, '
         f'band {band}: {"PASS" if ok else "FAIL"}')
    return EXIT_OK if ok else EXIT_SLOPE


def _noise_config(args):
    from .noise import NoiseConfig
    seed = args.seed if args.seed is not None else 0
    return NoiseConfig(cutoff=args.cutoff, amplitude=args.amplitude,
                       channel=args.channel, realizations=args.realizations,
                       seed=seed, time_step=args.time_step)


def _run_noise(text, shape, couplings, config, args):
    from .noise import run_ensemble
    from .sequence import parse_sequence
    period = 2 * np.pi / (args.omega_ratio * config.cutoff)
    if text.lower() == 'free':
        return run_ensemble(None, couplings, config, args.periods, args.bloch,
                            period=period, workers=args.workers)
    try:
        seq = parse_sequence(text, shape)
    except ParseError as e:
        raise _Fail(EXIT_INPUT, f'bad sequence: {e}') from None
    seq = seq.with_tau(period / len(seq.pulses))
    return run_ensemble(seq, couplings, config, args.periods, args.bloch,
                        workers=args.workers)


def cmd_noise(args):
    couplings = _model(args)
    shape = _shape(args)
    try:
        config = _noise_config(args)
        res = _run_noise(args.seq, shape, couplings, config, args)
        other = None
        if args.compare:
            other = _run_noise(args.compare, shape, couplings, config, args)
    except NotConverged as e:
        raise _Fail(EXIT_NOISE, f'propagation did not converge: {e}') from None
    except InvalidArgument as e:
        raise _Fail(EXIT_INPUT, str(e)) from None
    _emit(args, res.to_csv(), seeds={'master': config.seed,
                                     'realizations': res.seeds})
    _say(f'{args.seq}: final infidelity {res.final_infidelity:.6e} '
         f'+- {res.stderr[-1]:.1e}')
    if other is not None:
        a, b = res.final_infidelity, other.final_infidelity
        ratio = b / a if a > 0 else float('inf')
        _say(f'{args.compare}: final infidelity {b:.6e} +- '
             f'{other.stderr[-1]:.1e}')
        _say(f'infidelity ratio {args.compare} / {args.seq} = {ratio:.4g}'
             f' ({"favors " + args.seq if ratio > 1 else "favors " + args.compare})')
    return EXIT_OK


def cmd_search(args):
    from .search import DEFAULT_SEEDS, default_problem, solve
    targets = tuple(t.strip() for t in args.targets.split(',') if t.strip())
    key = tuple(sorted(set(targets)))
    if key not in DEFAULT_SEEDS:
        raise _Fail(EXIT_INPUT, 'targets must be s or s,alpha')
    seed = list(args.coefficients or DEFAULT_SEEDS[key]['coefficients'])
    m = args.basis_size or len(seed)
    seed = (seed + [0.0] * m)[:m]
    overrides = dict(n_coefficients=m)
    if args.width_fraction is not None:
        overrides['width_fraction'] = args.width_fraction
    if args.max_evaluations:
        overrides['max_evaluations'] = args.max_evaluations
    try:
        problem, _ = default_problem(targets, args.tolerance, **overrides)
    except InvalidArgument as e:
        raise _Fail(EXIT_INPUT, str(e)) from None
    rng_seed = args.seed if args.seed is not None else 0
    result = solve(problem, seed, rng_seed)
    data = result.to_dict()
    data['seed'] = rng_seed
    _emit(args, json.dumps(data, indent=2) + '\n', seeds={'rng': rng_seed})
    _say(f'residuals s={result.residuals[0]:.2e} alpha={result.residuals[1]:.2e}'
         f', zeta={result.zeta:.6f}, '
         f'{"converged" if result.converged else "NOT converged"}')
    return EXIT_OK if result.converged else EXIT_SEARCH


def cmd_replay(args):
    manifest = _load_json(args.manifest, 'manifest')
    try:
        argv = manifest['argv']
    except KeyError:
        raise _Fail(EXIT_INPUT, 'manifest has no argv') from None
    out_dir = manifest.get('out_dir')
    if out_dir and '--out-dir' not in argv:
        argv = [argv[0], '--out-dir', out_dir, *argv[1:]]
    return main(argv)


# -- parser ----------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group('global options')
    g.add_argument('--seed', type=int, help='master random seed')
    g.add_argument('--steps', type=int, default=512,
                   help='integrator steps per shaped pulse (default 512)')
    g.add_argument('--nodes', type=int,
                   help='starting quadrature nodes for pulse parameters')
    g.add_argument('--out-dir', help=f'directory for relative --output paths '
                   f'(default ${OUTPUT_DIR_ENV} or the working directory)')
    g.add_argument('--time-unit', default='tau_p',
                   help='name of the time unit, recorded in manifests')

    parser = argparse.ArgumentParser(
        prog='refocus', description='Refocusing pulses and sequences for a '
        'qubit coupled to an oscillator. ' + UNITS)
    parser.add_argument('--version', action='version', version=__version__)
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('params', parents=[common], help='pulse parameters',
                       description='Print s, alpha/2 and zeta of a pulse '
                       'shape as CSV. ' + UNITS)
    p.add_argument('--table1', action='store_true',
                   help='rows for the delta pulse and the G001/G010 Gaussians')
    _add_shape_args(p)
    p.add_argument('-o', '--output', help='CSV file (default stdout)')
    p.set_defaults(func=cmd_params)

    p = sub.add_parser('scan', parents=[common], help='order scan',
                       description='Deviation of the effective Hamiltonian '
                       'of a sequence from a reference versus tau_p. CSV '
                       'columns tau_p, deviation, fitted_slope_running; '
                       'the fitted slope goes to stderr. ' + UNITS)
    p.add_argument('--seq', required=True,
                   help='operator-product string, rightmost pulse first, '
                   'trailing - for a negative pulse (e.g. "XY-XY")')
    p.add_argument('--model', help='model JSON (inline or file); default: '
                   'cavity n_fock=8, g=0.05, delta=0.2 (angular frequencies)')
    p.add_argument('--ref', help='reference Hamiltonian such as "A0" or '
                   '"A0+sxAx" (default: the catalog zeroth order)')
    p.add_argument('--taus', type=_floats, default=[0.2, 0.1, 0.05, 0.025],
                   help='strictly decreasing pulse lengths (time units)')
    p.add_argument('--order', type=int,
                   help='claimed order K, overriding the catalog')
    _add_shape_args(p)
    p.add_argument('-o', '--output', help='CSV file (default stdout)')
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser('noise', parents=[common], help='noise ensemble',
                       description='Mean qubit fidelity under an '
                       'Ornstein-Uhlenbeck field. CSV columns time, '
                       'mean_fidelity, stderr. ' + UNITS)
    p.add_argument('--seq', required=True,
                   help='sequence string, or "free" for no pulses')
    p.add_argument('--compare', help='second sequence run with the same '
                   'seeds; the infidelity ratio goes to stderr')
    p.add_argument('--model', help='model JSON (inline or file); default: '
                   'cavity n_fock=8, g=0.05, delta=0.2')
    p.add_argument('--cutoff', type=float, default=1.0,
                   help='field cutoff omega_c (angular frequency)')
    p.add_argument('--amplitude', type=float, default=0.1,
                   help='rms field amplitude (angular frequency)')
    p.add_argument('--channel', default='sz',
                   choices=('sz', 'sx', 'sy', 'number', 'identity'),
                   help='operator the field multiplies')
    p.add_argument('--omega-ratio', type=float, default=10.0,
                   help='Omega/omega_c with Omega = 2 pi / period; sets '
                   'tau_p = period / (number of pulses)')
    p.add_argument('--periods', type=int, default=10,
                   help='number of periods to record')
    p.add_argument('--realizations', type=int, default=100)
    p.add_argument('--time-step', type=float,
                   help='largest integrator step (time units)')
    p.add_argument('--bloch', type=_floats, default=[1.0, 0.0, 0.0],
                   help='initial qubit Bloch vector (default 1,0,0)')
    p.add_argument('--workers', type=int, default=1,
                   help='threads over realizations (results do not change)')
    _add_shape_args(p)
    p.add_argument('-o', '--output', help='CSV file (default stdout)')
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser('search', parents=[common], help='pulse search',
                       description='Design a symmetric Hermite-series pulse '
                       'with vanishing s (and alpha). Writes a JSON result '
                       'whose "shape" loads with --shape. ' + UNITS)
    p.add_argument('--targets', default='s', help='"s" or "s,alpha"')
    p.add_argument('--basis-size', type=int,
                   help='number of even Hermite functions')
    p.add_argument('--width-fraction', type=float,
                   help='Hermite width as a fraction of tau_p')
    p.add_argument('--coefficients', type=_floats,
                   help='starting coefficients (first one stays fixed)')
    p.add_argument('--tolerance', type=float, help='residual tolerance')
    p.add_argument('--max-evaluations', type=int)
    p.add_argument('-o', '--output', help='JSON file (default stdout)')
    p.set_defaults(func=cmd_search)

    p = sub.add_parser('replay', help='re-run a manifest',
                       description='Re-run the command recorded in a '
                       'manifest, reproducing its outputs.')
    p.add_argument('manifest', help='path to a .manifest.json file')
    p.set_defaults(func=cmd_replay, out_dir=None)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    args.started = datetime.now(timezone.utc).isoformat()
    try:
        return args.func(args)
    except _Fail as e:
        _say(f'error: {e}')
        return e.code
    except NotConverged as e:
        _say(f'error: {e}')
        return EXIT_NOISE
    except RefocusError as e:
        _say(f'error: {e}')
        return EXIT_ERROR


def run():
    sys.exit(main())


if __name__ == '__main__':
    run()
