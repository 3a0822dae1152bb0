"""Command line front end: ``fdxsim <subcommand> --config <path>``.

Exit codes: 0 on success, 2 for configuration problems, 3 when a
pipeline stage fails (the message names the module).
"""

from __future__ import annotations

import argparse
import logging
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import plotting, reports
from .beamforming import (PhaseQuantizer, codebook_isolation_map, dft_codebook,
                          refine_codebook, to_hybrid, worst_pair_coupling)
from .cancellation import (AnalogSicConfig, DigitalSicConfig, tx_bfc_zero_forcing)
from .channel import si_channel, user_channel, write_channel_csv
from .errors import FdxError, ScenarioError
from .geometry import array_factor, linear_array
from .link import (LinkScenario, beam_levels, db_chain_levels, evaluate_link, hd_beams,
                   rate_region_sweep, simulated_levels)
from .scenario import (Scenario, arrays, cluster_params, load_scenario, resolve_seed,
                       rx_pose, substream_seed)
from .selection import CandidateSet, select_rx_user

log = logging.getLogger("fdxsim")

EXIT_OK, EXIT_CONFIG, EXIT_PIPELINE = 0, 2, 3
SUBCOMMANDS = ("channel", "af", "bfc-sweep", "levels", "select", "codebook-iso")


class PipelineError(FdxError):
    def __init__(self, message, module):
        super().__init__(message)
        self.module = module


@contextmanager
def stage(module: str):
    """Tag stray numerical failures with the module they came from."""
    try:
        yield
    except FdxError:
        raise
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        raise PipelineError(str(exc), module) from exc


class Run:
    """Pipeline objects for one scenario and seed, built lazily."""

    def __init__(self, scn: Scenario, seed: int, out: Path):
        self.scn = scn
        self.seed = seed
        self.out = out
        self._link = None

    def figure(self, fn, *args, **kwargs):
        if self.scn.output.figures:
            with stage("scenario-cli"):
                fn(*args, **kwargs)

    @property
    def geometry(self):
        with stage("array-geometry"):
            tx, rx = arrays(self.scn)
            return tx, rx, rx_pose(self.scn, tx, rx)

    def si(self):
        tx, rx, pose = self.geometry
        c = self.scn.channel
        with stage("si-channel"):
            return si_channel(tx, rx, c.kappa, c.isolation_db,
                              cluster_params(self.scn, self.seed, "si_far_field"), pose)

    def quantizer(self):
        return PhaseQuantizer(self.scn.beamforming.phase_bits)

    def link(self) -> LinkScenario:
        if self._link is not None:
            return self._link
        s = self.scn
        tx, rx, _ = self.geometry
        h = self.si()
        with stage("si-channel"):
            dl = user_channel(tx, linear_array(s.users.downlink_elements, s.array.spacing),
                              cluster_params(s, self.seed, "downlink"), "downlink", "downlink")
            ul = user_channel(rx, linear_array(s.users.uplink_elements, s.array.spacing),
                              cluster_params(s, self.seed, "uplink"), "uplink", "uplink")
        c = s.cancellation
        with stage("link-eval"):
            self._link = LinkScenario(
                h.matrix, dl.matrix, ul.matrix, s.budget_obj(),
                n_streams=s.beamforming.n_streams,
                analog_sic=None if c.analog_sigma is None else AnalogSicConfig(c.analog_sigma),
                digital_sic=DigitalSicConfig(c.digital_db),
                perfect_sic=c.perfect_sic,
                n_rf=s.beamforming.n_rf,
                quantizer=self.quantizer(),
                design=c.design,
                rx_mode=c.rx_mode,
                seed=substream_seed(self.seed, "analog_sic"),
            )
        return self._link

    def zero_forcing_beams(self, scn: LinkScenario):
        c = self.scn.cancellation
        with stage("cancellation"):
            f_hd, w_hd = hd_beams(scn)
            f = tx_bfc_zero_forcing(f_hd, scn.h_si, c.rank, c.energy_fraction)
        with stage("beamforming"):
            if scn.n_rf is not None:
                f = to_hybrid(f, scn.n_rf, scn.quantizer, "precoder")
                w_hd = to_hybrid(w_hd, scn.n_rf, scn.quantizer, "combiner")
        return f, w_hd


def cmd_channel(run: Run) -> list[Path]:
    h = run.si()
    path = run.out / "h_si.csv"
    write_channel_csv(path, h.matrix)
    run.figure(plotting.plot_matrix_db, run.out / "h_si.png", h.matrix, "|H_SI| (dB)",
               "tx element", "rx element", power=False)
    return [path]


def cmd_af(run: Run) -> list[Path]:
    a = run.scn.array
    tx, _, _ = run.geometry
    angles = np.linspace(-np.pi / 2, np.pi / 2, a.af_points)
    weights = np.ones(tx.n_elements, dtype=complex)
    cols, header = [], ["angle_rad"]
    with stage("array-geometry"):
        for r in a.af_ranges:
            cols.append(array_factor(tx, weights, r, angles, a.af_normalize))
            header.append(f"af_r{reports.fmt(r)}")
    path = reports.write_rows(run.out / "af.csv", header,
                              ([ang, *vals] for ang, vals in zip(angles, np.column_stack(cols))))
    run.figure(plotting.plot_array_factor, run.out / "af.png", angles,
               {f"r = {r:.4g}": c for r, c in zip(a.af_ranges, cols)})
    return [path]


def cmd_bfc_sweep(run: Run) -> list[Path]:
    scn = run.link()
    with stage("link-eval"):
        points = rate_region_sweep(scn, run.scn.cancellation.mu_grid)
    path = reports.write_rate_region_csv(run.out / "rate_region.csv", points)
    run.figure(plotting.plot_rate_region, run.out / "rate_region.png", points)
    return [path]


def cmd_levels(run: Run) -> list[Path]:
    s = run.scn
    c = s.cancellation
    budget = s.budget_obj()
    digital = DigitalSicConfig(c.digital_db)
    if s.budget.adc_coupling_db is not None:
        analog_db = 0.0
        if c.analog_sigma is not None:
            analog_db = AnalogSicConfig(c.analog_sigma).expected_suppression_db
        with stage("link-eval"):
            report = db_chain_levels(budget, s.budget.adc_coupling_db, analog_db, digital,
                                     s.budget.lna_coupling_db)
        log.info("levels from the dB chain (adc_coupling_db = %s)", s.budget.adc_coupling_db)
    else:
        scn = run.link()
        if c.strategy == "zero_forcing":
            f, w = run.zero_forcing_beams(scn)
            with stage("link-eval"):
                report = beam_levels(scn, f, w)
        else:
            with stage("link-eval"):
                report = simulated_levels(scn, c.mu)
    path = reports.write_levels_csv(run.out / "levels.csv", report)
    run.figure(plotting.plot_levels, run.out / "levels.png", report, budget)
    return [path]


def cmd_select(run: Run) -> list[Path]:
    s = run.scn
    c = s.cancellation
    scn = run.link()
    if c.strategy == "zero_forcing":
        f, _ = run.zero_forcing_beams(scn)
    else:
        with stage("link-eval"):
            f = evaluate_link(scn, c.mu).precoder
    f_full = getattr(f, "matrix", f)
    leakage = scn.h_si @ f_full
    _, rx, _ = run.geometry
    with stage("si-channel"):
        users = [user_channel(rx, linear_array(n, s.array.spacing),
                              cluster_params(s, run.seed, f"user:{uid}"), uid, "uplink")
                 for uid, n in s.users.candidates]
    with stage("user-select"):
        cands = CandidateSet(users, s.users.policy)
        chosen, scores = select_rx_user(cands, leakage, c.rx_mode, c.mu, scn.analog_sic,
                                        scn.digital_sic, scn.budget, scn.seed,
                                        s.beamforming.n_streams)
    log.info("selected user %s", chosen)
    ids = cands.user_ids
    path = reports.write_selection_csv(run.out / "selection.csv", ids, scores, chosen)
    label = "uplink SE (bits/s/Hz)" if s.users.policy == "max_rate" else "normalized coupling"
    run.figure(plotting.plot_selection, run.out / "selection.png", ids, scores, chosen, label)
    return [path]


def cmd_codebook_iso(run: Run) -> list[Path]:
    s = run.scn
    h = run.si()
    tx, rx, _ = run.geometry
    with stage("beamforming"):
        tx_cb = dft_codebook(tx.n_elements, s.beamforming.codebook_oversampling)
        rx_cb = dft_codebook(rx.n_elements, s.beamforming.codebook_oversampling)
        iso = codebook_isolation_map(tx_cb, rx_cb, h)
    paths = [reports.write_isolation_csv(run.out / "isolation.csv", iso)]
    run.figure(plotting.plot_matrix_db, run.out / "isolation.png", iso, "Beam-pair coupling (dB)",
               "tx beam", "rx beam")
    budget_db = s.beamforming.refine_budget_db
    if budget_db > 0:
        with stage("beamforming"):
            refined = refine_codebook(tx_cb, h, budget_db, rx_codebook=rx_cb)
            iso_r = codebook_isolation_map(refined, rx_cb, h)
        log.info("worst-pair coupling %.6g -> %.6g after refinement",
                 worst_pair_coupling(tx_cb, rx_cb, h), worst_pair_coupling(refined, rx_cb, h))
        paths.append(reports.write_isolation_csv(run.out / "isolation_refined.csv", iso_r))
        run.figure(plotting.plot_matrix_db, run.out / "isolation_refined.png", iso_r,
                   "Beam-pair coupling after refinement (dB)", "tx beam", "rx beam")
    return paths


COMMANDS = {
    "channel": cmd_channel,
    "af": cmd_af,
    "bfc-sweep": cmd_bfc_sweep,
    "levels": cmd_levels,
    "select": cmd_select,
    "codebook-iso": cmd_codebook_iso,
}


def _u64(text: str) -> int:
    try:
        v = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fdxsim",
                                description="Full-duplex mmWave link-level simulator.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="scenario file")
    p.add_argument("--out", default=None, help="output directory (overrides [output] directory)")
    p.add_argument("--seed", type=_u64, default=None, help="master seed override")
    p.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    return p


def _setup_logging(quiet: bool) -> logging.Handler:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("fdxsim")
    root.handlers[:] = [handler]
    root.setLevel(logging.WARNING if quiet else logging.INFO)
    root.propagate = False
    return handler


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.quiet)
    try:
        scn = load_scenario(args.config)
        seed = resolve_seed(args.seed, scn)
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_CONFIG
    except ScenarioError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    out = Path(args.out if args.out is not None else scn.output.directory)
    try:
        paths = COMMANDS[args.subcommand](Run(scn, seed, out))
    except ScenarioError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except FdxError as exc:
        log.error("pipeline error in module %s: %s", exc.module, exc)
        return EXIT_PIPELINE
    except OSError as exc:
        log.error("pipeline error in module scenario-cli: cannot write report: %s", exc)
        return EXIT_PIPELINE
    for p in paths:
        log.info("wrote %s", p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
