#  * Copyright (c) 2020-2021. Authors: see NOTICE file.
#  *
#  * Licensed under the Apache License, Version 2.0 (the "License");
#  * you may not use this file except in compliance with the License.
#  * You may obtain a copy of the License at
#  *
#  *      http://www.apache.org/licenses/LICENSE-2.0
#  *
#  * Unless required by applicable law or agreed to in writing, software
#  * distributed under the License is distributed on an "AS IS" BASIS,
#  * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  * See the License for the specific language governing permissions and
#  * limitations under the License.
"""
Command line entry point: `memqkd <subcommand> [options]`.

Configuration precedence is flags > config file > bundled reference defaults.
The config file is `--config`, or `MEMQKD_DEFAULT_CONFIG` when omitted.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from contextlib import contextmanager
from typing import List, Optional, Sequence

from memqkd import analysis, montecarlo, rates
from memqkd.__version__ import __version__
from memqkd.bounds import channel_transmittance, plob_bound, single_node_bound
from memqkd.combinatorics import pair_count_distribution
from memqkd.config import get_settings
from memqkd.model import (
    DATA_DIR, INFINITE_MODULES, SystemConfig, load_config, load_config_file, paper_defaults
)
from memqkd.utils.output import format_cell, format_float, format_modules, write_csv
from memqkd.utils.units import km_to_m_exact

logger = logging.getLogger("memqkd.cli")

EXIT_FAILURE = 2
DEFAULT_REGION_MODULES = "1,10,100,400,1000"


def parse_modules(text: str):
    """A positive integer module count, or `inf`."""
    token = text.strip().lower()
    if token in ('inf', 'infinity'):
        return INFINITE_MODULES
    try:
        value = float(token)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid module count: {text!r}")
    if not math.isfinite(value) or value != int(value) or value < 1:
        raise argparse.ArgumentTypeError(f"module count must be a positive integer or inf: {text!r}")
    return int(value)


def parse_module_list(text: str):
    return [parse_modules(token) for token in text.split(',') if token.strip()]


def parse_float_list(text: str) -> List[float]:
    try:
        return [float(token) for token in text.split(',') if token.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid list of numbers: {text!r}")


def parse_count(text: str) -> int:
    """Positive integer, scientific notation allowed (`1e6`)."""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid count: {text!r}")
    if not math.isfinite(value) or value != int(value) or value < 1:
        raise argparse.ArgumentTypeError(f"count must be a positive integer: {text!r}")
    return int(value)


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help="System configuration file (key=value lines)")
    common.add_argument('--set', dest='assignments', action='append', default=[],
                        metavar='KEY=VALUE', help="Override one configuration key")
    common.add_argument('--distance-km', type=float)
    common.add_argument('--t2', type=float, help="Memory dephasing time T2 in seconds")
    common.add_argument('--eta-total', type=float)
    common.add_argument('--att-length-km', type=float)
    common.add_argument('--output', help="Write the result to this file instead of stdout")
    common.add_argument('--log-level')
    common.add_argument('--workers', type=int)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog='memqkd', description=(
        "Secret key rates of multiplexed memory-assisted MDI-QKD."))
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest='cmd', required=True)

    s = sub.add_parser('rate', parents=[common], help="Key rate and intermediates at one point.")
    s.add_argument('--m', type=parse_modules)
    s.add_argument('--emit-intermediates', action='store_true')
    s.set_defaults(handler=cmd_rate)

    s = sub.add_parser('sweep', parents=[common], help="Key rate versus distance.")
    s.add_argument('--m', type=parse_module_list, default=[1])
    s.add_argument('--l-min-km', type=float, default=1.0)
    s.add_argument('--l-max-km', type=float, default=600.0)
    s.add_argument('--points', type=int, default=500)
    s.add_argument('--spacing', choices=('log', 'linear'), default='log')
    s.add_argument('--emit-intermediates', action='store_true')
    s.set_defaults(handler=cmd_sweep)

    s = sub.add_parser('region', parents=[common],
                       help="Minimal listed m beating PLOB over an (eta_total, T2) grid.")
    s.add_argument('--eta-grid', type=parse_float_list, required=True)
    s.add_argument('--t2-grid', type=parse_float_list, required=True)
    s.add_argument('--m-list', type=parse_module_list,
                   default=parse_module_list(DEFAULT_REGION_MODULES))
    s.set_defaults(handler=cmd_region)

    s = sub.add_parser('min-m', parents=[common], help="Minimal m beating the PLOB bound.")
    s.add_argument('--m-cap', type=parse_count)
    s.set_defaults(handler=cmd_min_m)

    s = sub.add_parser('wavelength', parents=[common],
                       help="Minimal m beating PLOB along a fiber attenuation profile.")
    s.add_argument('--profile', help="Fiber profile CSV (bundled example when omitted)")
    s.add_argument('--wavelengths', type=parse_float_list)
    s.add_argument('--m-cap', type=parse_count)
    s.set_defaults(handler=cmd_wavelength)

    s = sub.add_parser('simulate', parents=[common], help="Monte-Carlo estimates.")
    s.add_argument('--trials', type=parse_count, required=True)
    s.add_argument('--seed', type=int, required=True)
    s.add_argument('--m', type=parse_count)
    s.set_defaults(handler=cmd_simulate)

    s = sub.add_parser('dist', parents=[common], help="Pair-count distributions.")
    s.add_argument('--m', type=parse_count)
    s.add_argument('--p-click', type=float, help="Click probability (from the config when omitted)")
    s.set_defaults(handler=cmd_dist)

    return parser


def resolve_config(args) -> SystemConfig:
    path = args.config or get_settings().default_config
    cfg = load_config_file(path) if path else paper_defaults()
    if args.assignments:
        cfg = load_config("\n".join(args.assignments), base=cfg)
    if args.distance_km is not None:
        cfg = cfg.with_distance(km_to_m_exact(args.distance_km))
    if args.att_length_km is not None:
        cfg = cfg.with_att_length(km_to_m_exact(args.att_length_km))
    if args.t2 is not None:
        cfg = cfg.with_t2(args.t2)
    if args.eta_total is not None:
        cfg = cfg.with_eta_total(args.eta_total)
    return cfg


@contextmanager
def _open_output(path: Optional[str]):
    if path is None:
        yield sys.stdout
        return
    with open(path, 'w', encoding='utf-8', newline='') as stream:
        yield stream


def _workers(args) -> int:
    return args.workers if args.workers is not None else get_settings().workers


def _km(meters: float) -> float:
    return meters / 1e3


def cmd_rate(args, cfg: SystemConfig) -> int:
    breakdown = rates.secret_key_rate(cfg, m=args.m)
    values = breakdown.as_dict()
    values['m'] = format_modules(values['m'])
    if args.emit_intermediates:
        eta_ch = channel_transmittance(breakdown.distance, cfg.channel.att_length)
        values['raw_key_ceiling'] = rates.raw_key_ceiling(cfg, m=args.m)
        if breakdown.p_s > 0:
            values['expected_max_rounds'] = rates.expected_max_rounds(breakdown.p_s)
        values['plob'] = plob_bound(eta_ch)
        values['single_node'] = single_node_bound(eta_ch)

    for key, value in values.items():
        print(f"{key}={format_cell(value)}")
    if args.output:
        with _open_output(args.output) as stream:
            write_csv(stream, list(values), [list(values.values())])
    return 0


def cmd_sweep(args, cfg: SystemConfig) -> int:
    spec = analysis.SweepSpec(
        l_min=km_to_m_exact(args.l_min_km), l_max=km_to_m_exact(args.l_max_km),
        points=args.points, spacing=args.spacing, modules=tuple(args.m),
    )
    header = ['L_km', 'm', 'R', 'plob', 'single_node']
    if args.emit_intermediates:
        header += ['R_raw', *analysis.INTERMEDIATES]

    def rows():
        for point in analysis.rate_curve(cfg, spec):
            row = [format_float(_km(point.distance)), format_modules(point.m),
                   point.rate, point.plob, point.single_node]
            if args.emit_intermediates:
                row += [point.rate_raw, *(point.intermediates[n] for n in analysis.INTERMEDIATES)]
            yield row

    with _open_output(args.output) as stream:
        write_csv(stream, header, rows())
    return 0


def cmd_region(args, cfg: SystemConfig) -> int:
    result = analysis.region_grid(args.eta_grid, args.t2_grid, args.m_list, cfg,
                                  workers=_workers(args))
    rows = ((eta, t2, 'infeasible' if m is None else format_modules(m))
            for eta, t2, m in result.rows())
    with _open_output(args.output) as stream:
        write_csv(stream, ['eta_total', 'T2_s', 'min_m'], rows)
    return 0


def cmd_min_m(args, cfg: SystemConfig) -> int:
    result = analysis.min_m_to_beat(cfg, args.m_cap)
    lines = [f"status={result.status.value}", f"min_m={result.label()}",
             f"m_cap={result.m_cap}"]
    for start, end in result.crossover:
        lines.append(f"crossover_km={format_float(_km(start))},{format_float(_km(end))}")
    with _open_output(args.output) as stream:
        stream.write("\n".join(lines) + "\n")
    return 0


def cmd_wavelength(args, cfg: SystemConfig) -> int:
    path = args.profile or DATA_DIR / "example_fiber.csv"
    with open(path, encoding='utf-8') as f:
        profile = analysis.load_fiber_profile(f.read())
    points = analysis.wavelength_sweep(
        profile, cfg, args.m_cap, wavelengths=args.wavelengths,
        t2=analysis.REFERENCE_T2 if args.t2 is None else args.t2,
        eta_total=analysis.REFERENCE_ETA_TOTAL if args.eta_total is None else args.eta_total,
        workers=_workers(args),
    )
    rows = ((p.wavelength, _km(p.att_length), p.result.label()) for p in points)
    with _open_output(args.output) as stream:
        write_csv(stream, ['lambda_nm', 'L_att_km', 'min_m'], rows)
    return 0


def cmd_simulate(args, cfg: SystemConfig) -> int:
    if args.m is not None:
        cfg = cfg.with_modules(args.m)
    estimates = montecarlo.estimate(cfg, args.trials, args.seed, workers=_workers(args))
    rows = ((name, e.mean, e.std_error, e.n_trials, args.seed) for name, e in estimates.items())
    with _open_output(args.output) as stream:
        write_csv(stream, ['name', 'mean', 'std_error', 'n_trials', 'seed'], rows)
    return 0


def cmd_dist(args, cfg: SystemConfig) -> int:
    m = cfg.num_modules if args.m is None else args.m
    p_click = args.p_click
    if p_click is None:
        p_click = rates.click_prob(rates.detect_prob(cfg), cfg.detector.dark_count)
    dist = pair_count_distribution(m, p_click, cfg.bsm.p_success)
    rows = ((k, float(dist.min_dist[k]), float(dist.pairs_dist[k])) for k in range(m + 1))
    with _open_output(args.output) as stream:
        write_csv(stream, ['k', 'min_dist', 'pairs_dist'], rows)
    logger.info(f"Expected pairs per attempt: {dist.expected_pairs}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        logging.basicConfig(
            level=(args.log_level or get_settings().log_level).upper(),
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )
        cfg = resolve_config(args)
        return args.handler(args, cfg)
    except (FileNotFoundError, ValueError) as e:
        print(f"memqkd: error: {e}", file=sys.stderr)
    return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
