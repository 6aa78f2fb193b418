# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import abc
import argparse
import enum
import logging
import pathlib
import sys
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

from . import __version__, artifacts, constructions, geometry, solver
from ._abc import Scenario
from ._flat_slab import FlatSlab
from .config import ExperimentConfig
from .errors import (ConfigError, ConvergenceError, HardyError,
                     ThresholdError, VerificationError)
from .weights import WeightTriple, attainment_integral, normalize_p


_logger = logging.getLogger('numlab.hardy.cli')


class ExitStatus(enum.IntEnum):
    OK = 0
    ERROR = 1
    CONFIG = 2
    NONCONVERGENCE = 3
    VIOLATION = 4


class _CommandMeta(abc.ABCMeta):

    _commands: Dict[str, type] = {}

    def __new__(mcls, name, bases, dct, *, command: Optional[str] = None):
        cls = super().__new__(mcls, name, bases, dct)
        cls._command = command  # type: ignore
        if command is None:
            return cls

        if command in mcls._commands:
            raise RuntimeError(
                f'cannot register a command {command!r}: another command '
                f'with this name has already been registered')

        mcls._commands[command] = cls
        return cls

    @classmethod
    def get(cls, command: str) -> Optional[type]:
        return cls._commands.get(command)

    @property
    def command(cls) -> Optional[str]:
        return cls._command  # type: ignore


def get_command_registry() -> Mapping[str, type]:
    return dict(_CommandMeta._commands)


class Command(metaclass=_CommandMeta):
    """A subcommand writing its artifacts into the run's output directory."""

    help = ''

    def __init__(self, config: ExperimentConfig,
                 index: artifacts.ArtifactIndex) -> None:
        self.config = config
        self.index = index

    @property
    def scenario(self) -> Scenario:
        return self.config.scenario

    @property
    def weights(self) -> WeightTriple:
        return self.config.weights

    def write_json(self, key: str, name: str,
                   payload: Mapping[str, Any]) -> pathlib.Path:
        return self.index.add(
            key, artifacts.write_json(self.index.path(name), payload))

    def write_csv(self, key: str, name: str, columns: Sequence[str],
                  rows: Sequence[Mapping[str, Any]]) -> pathlib.Path:
        return self.index.add(
            key, artifacts.write_csv(self.index.path(name), columns, rows))

    def problem(self, n: int) -> solver.DiscreteProblem:
        run = self.config.run
        return solver.DiscreteProblem.build(self.scenario, self.weights, n,
                                            run.gamma, order=run.gauss_order)

    @abc.abstractmethod
    def execute(self) -> ExitStatus:
        pass


class SolveCommand(Command, command='solve'):
    help = 'smallest discrete quotient at the first lambda of the grid'

    def execute(self) -> ExitStatus:
        run = self.config.run
        problem = self.problem(run.grid_sizes[-1])
        result = problem.solve(float(run.lambdas[0]), run.tol, run.max_iter)
        self.write_json('solve', 'solve.json', {
            'result': result.to_json(),
            'grid': problem.grid.to_json(),
            'plateau': problem.plateau})
        if not result.converged:
            return ExitStatus.NONCONVERGENCE
        return ExitStatus.OK


def _write_curve(command: Command, curve: solver.MuCurve,
                 quantity: str, plateau: float, stem: str) -> None:
    columns = ['lambda', quantity, 'residual', 'iterations']
    data = command.write_csv(f'{stem}_csv', f'{stem}.csv', columns,
                             curve.to_rows())
    command.index.add(f'{stem}_plot', artifacts.write_plot_script(
        command.index.path(f'{stem}.gp'), data.name, plateau=plateau,
        quantity=quantity))


class CurveCommand(Command, command='curve'):
    help = 'mu over the lambda grid with monotonicity and concavity audits'

    def execute(self) -> ExitStatus:
        run = self.config.run
        problem = self.problem(run.grid_sizes[-1])
        curve = solver.mu_curve(problem, run.lambdas, tol=run.tol,
                                max_iter=run.max_iter,
                                warm_start=run.warm_start)
        _write_curve(self, curve, problem.quantity, problem.plateau, 'curve')
        monotone = curve.monotonicity_violations()
        concave = curve.concavity_violations()
        path = self.write_json('curve', 'curve.json', {
            'lambdas': run.lambda_spec,
            'quantity': problem.quantity,
            'plateau': problem.plateau,
            'grid': problem.grid.to_json(),
            'converged': curve.converged,
            'monotonicity_violations': monotone,
            'concavity_violations': concave})
        if not curve.converged:
            return ExitStatus.NONCONVERGENCE
        if monotone:
            raise VerificationError(
                f'mu curve increases at indices {monotone}',
                report_path=str(path))
        return ExitStatus.OK


class ThresholdCommand(Command, command='threshold'):
    help = 'bracket lambda* by bisection against the plateau'

    def execute(self) -> ExitStatus:
        run = self.config.run
        sizes = run.grid_sizes
        if len(sizes) < 2:
            raise ConfigError('threshold needs two grid sizes',
                              field='run.grid_sizes')
        problems = (self.problem(sizes[-2]), self.problem(sizes[-1]))
        try:
            result = solver.find_threshold(problems, run.width_tol,
                                           tol=run.tol, max_iter=run.max_iter)
        except ConvergenceError as exc:
            partial = exc.result.to_json() if exc.result is not None else None
            self.write_json('threshold', 'threshold.json',
                            {'error': str(exc), 'partial': partial})
            raise
        self.write_json('threshold', 'threshold.json', result.to_json())
        return ExitStatus.OK


def _ladder_rungs(s: Scenario) -> List[float]:
    return [s.beta * f for f in (0.8, 0.4, 0.2, 0.1)]


class VerifyGeometryCommand(Command, command='verify-geometry'):
    help = 'collar distance expansions and Fermi metric residuals'

    def execute(self) -> ExitStatus:
        s = self.scenario
        rungs = _ladder_rungs(s)
        report = geometry.check_distance_expansions(
            s, geometry.ladder_samples(s, rungs))
        rows = [row._asdict() for row in report.rows]
        self.write_csv('expansions_csv', 'expansions.csv',
                       list(report.columns), rows)

        chart = s.chart()
        metrics = []
        for rung in rungs:
            radius = min(rung, 0.5 * chart.radius)
            y = np.zeros(s.N)
            y[0] = radius
            m = geometry.metric_components(chart, y)
            metrics.append({'y_tilde': radius,
                            'g11_residual': m.g11_residual,
                            'g1b_residual': m.g1b_residual,
                            'tangential_residual': m.tangential_residual})

        r2 = report.column('r2')
        r2_max = float(np.max(r2)) if r2.size else 0.0
        path = self.write_json('geometry', 'geometry.json', {
            'rungs': rungs,
            'samples': len(report),
            'excluded': [{'point': list(p), 'reason': r}
                         for p, r in report.excluded],
            'r2_max': r2_max,
            'constant_ratios': {name: report.constant_ratio(name, rungs)
                                for name in ('r1', 'r3', 'r4')},
            'metric': metrics})
        if r2_max > 1e-6:
            raise VerificationError(
                f'r2 residual {r2_max!r} exceeds 1e-6', report_path=str(path))
        return ExitStatus.OK


class VerifyConstructionsCommand(Command, command='verify-constructions'):
    help = 'sign sweeps of the sub- and supersolutions and the W envelope'

    def _sign(self, report: constructions.SignReport,
              stem: str) -> pathlib.Path:
        self.write_csv(f'{stem}_margin', f'{stem}_margin.csv',
                       ['delta_tilde', 'margin'],
                       [{'delta_tilde': dt, 'margin': m}
                        for dt, m in report.margin_curve()])
        return self.write_json(stem, f'{stem}.json', report.to_json())

    def execute(self) -> ExitStatus:
        s, w, run = self.scenario, self.weights, self.config.run
        beta = s.certified_beta if run.beta is None else run.beta
        lam = float(run.lambdas[0])
        failures = []

        for eps in run.epsilons:
            report = constructions.check_subsolution(
                s, w, lam, eps, beta, run.samples, seed=run.seed)
            path = self._sign(report, f'subsolution_eps{eps:g}')
            if not report.passed:
                failures.append((path, report))
        report = constructions.check_supersolution(
            s, w, lam, beta, run.samples, seed=run.seed)
        path = self._sign(report, 'supersolution')
        if not report.passed:
            failures.append((path, report))

        summary: Dict[str, Any] = {'beta': beta, 'lambda': lam}
        constants = constructions.collar_constants(s, w, beta=beta)
        summary['constants'] = constants._asdict()
        q_ref = normalize_p(w).q_over_p
        envelope = constructions.delta_w_envelope(
            s, constructions.GroundStateSpec(a=0.0, M=constants.M0,
                                             q_ref=q_ref, scenario=s),
            _ladder_rungs(s))
        summary['delta_w_envelope'] = envelope.to_json()
        summary['log_supersolution'] = constructions.check_log_supersolution(
            s, w, beta, seed=run.seed).to_json()
        if isinstance(s, FlatSlab):
            point = np.zeros(s.N)
            point[0] = point[1] = 0.05
            summary['flat_ground_state_residual'] = \
                constructions.flat_ground_state_residual(s.N, s.k, point)
        self.write_json('constructions', 'constructions.json', summary)

        if failures:
            path, report = failures[0]
            raise VerificationError(
                f'{report.construction} sweep found {report.violations} '
                f'violations ({report.positivity_violations} positivity)',
                report_path=str(path))
        return ExitStatus.OK


class LocalHardyCommand(Command, command='local-hardy'):
    help = 'discrete constant of the log-improved local Hardy inequality'

    def execute(self) -> ExitStatus:
        s, run = self.scenario, self.config.run
        result = solver.local_hardy_check(
            s, self.weights, run.beta, run.grid_sizes[-1], run.gamma,
            order=run.gauss_order, tol=run.tol, max_iter=run.max_iter)
        path = self.write_json('local_hardy', 'local_hardy.json',
                               result.to_json())
        if not result.converged:
            return ExitStatus.NONCONVERGENCE
        if result.c <= 0.0:
            raise VerificationError(f'local Hardy constant {result.c!r} is '
                                    f'not positive', report_path=str(path))
        return ExitStatus.OK


class AttainmentCommand(Command, command='ik'):
    help = 'boundary integral deciding attainment of the critical quotient'

    def execute(self) -> ExitStatus:
        result = attainment_integral(self.weights, self.scenario)
        self.write_json('ik', 'ik.json', result.to_json())
        return ExitStatus.OK


class CertifyBetaCommand(Command, command='certify-beta'):
    help = 'halve the collar radius until the sign sweeps pass'

    def execute(self) -> ExitStatus:
        run = self.config.run
        result = constructions.certify_beta(
            self.scenario, self.weights, float(run.lambdas[0]),
            epsilons=[e for e in run.epsilons if e > 0.0] or (0.5,),
            n=run.samples, seed=run.seed)
        path = self.write_json('certify', 'certify.json', {
            'beta': result.beta,
            'history': [{'beta': b, 'subsolution_violations': sub,
                         'supersolution_violations': sup}
                        for b, sub, sup in result.history]})
        if not result.certified:
            raise VerificationError('no collar radius passed the sweeps',
                                    report_path=str(path))
        return ExitStatus.OK


class ReportCommand(Command, command='report'):
    help = 'run every verification and computation, with an index'

    bundle = ('verify-geometry', 'verify-constructions', 'ik', 'curve',
              'threshold', 'local-hardy')

    def execute(self) -> ExitStatus:
        statuses: Dict[str, int] = {}
        for name in self.bundle:
            command_cls = _CommandMeta.get(name)
            statuses[name] = int(_run_guarded(command_cls(  # type: ignore
                self.config, self.index)))
        worst = max(statuses.values())
        self.write_json('report', 'report.json', {
            'config': self.config.to_json(),
            'version': __version__,
            'statuses': statuses,
            'artifacts': self.index.entries()})
        return ExitStatus(worst)


def _run_guarded(command: Command) -> ExitStatus:
    try:
        return command.execute()
    except ConfigError as exc:
        _logger.error('%s', exc)
        return ExitStatus.CONFIG
    except (ConvergenceError, ThresholdError) as exc:
        _logger.error('%s', exc)
        return ExitStatus.NONCONVERGENCE
    except VerificationError as exc:
        _logger.error('%s', exc)
        if exc.report_path:
            print(f'report: {exc.report_path}', file=sys.stderr)
        return ExitStatus.VIOLATION
    except HardyError as exc:
        _logger.error('%s', exc)
        return ExitStatus.ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='hardy',
        description='Numerical laboratory for weighted Hardy quotients '
                    'with boundary singularities.')
    parser.add_argument('--version', action='version',
                        version=f'%(prog)s {__version__}')
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    for name, command_cls in sorted(get_command_registry().items()):
        sub = subparsers.add_parser(name, help=command_cls.help)
        sub.add_argument('--config', required=True,
                         help='experiment configuration (JSON)')
        sub.add_argument('--lambdas', help='lambda grid lo:hi:count')
        sub.add_argument('--n', type=int, nargs='+', dest='grid_sizes',
                         help='grid sizes (cells per axis)')
        sub.add_argument('--gamma', type=float, help='grading exponent')
        sub.add_argument('--beta', type=float, help='collar radius')
        sub.add_argument('--out', dest='output_dir',
                         help='output directory')
        sub.add_argument('--seed', type=int, help='sampling seed')
        sub.add_argument('-v', '--verbose', action='count', default=0)
    return parser


# options whose values may start with '-', as in --lambdas -10:10:21
_SIGNED_OPTIONS = ('--lambdas',)


def _join_signed_values(argv: Sequence[str]) -> List[str]:
    """Rewrite ``--lambdas <value>`` as ``--lambdas=<value>``."""
    joined: List[str] = []
    items = iter(argv)
    for item in items:
        if item in _SIGNED_OPTIONS:
            value = next(items, None)
            if value is not None:
                item = f'{item}={value}'
        joined.append(item)
    return joined


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    args = parser.parse_args(_join_signed_values(argv))
    if args.command is None:
        parser.print_help(sys.stderr)
        return int(ExitStatus.CONFIG)

    level = (logging.WARNING, logging.INFO,
             logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, stream=sys.stderr,
                        format='%(levelname)s %(name)s: %(message)s')

    try:
        config = ExperimentConfig.load(args.config).with_overrides(
            lambdas=args.lambdas, grid_sizes=args.grid_sizes,
            gamma=args.gamma, beta=args.beta, output_dir=args.output_dir,
            seed=args.seed)
    except ConfigError as exc:
        print(f'hardy: {args.config}: {exc}', file=sys.stderr)
        return int(ExitStatus.CONFIG)

    index = artifacts.ArtifactIndex(config.run.output_dir)
    command_cls = _CommandMeta.get(args.command)
    status = _run_guarded(command_cls(config, index))  # type: ignore
    _logger.info('%s finished with status %d; artifacts: %s',
                 args.command, int(status), ', '.join(index.names()))
    return int(status)
