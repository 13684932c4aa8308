"""Command-line front end: one experiment per invocation, CSV artifacts out."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import ssh
from .analytics import KZParams, kz_beta_squared, lz_probability
from .bloch import band_sweep
from .config import (EXPERIMENTS, ConfigError, RunConfig, build_config, parse_overrides, read_config_file,
                     resolve_threads)
from .quench import (QuenchSchedule, dissipative_spectrum, evolve_quench, integrated_excitation, kc_curve,
                     net_excitation_spectrum, sweep_spectra)

log = logging.getLogger("quenchlab")


@dataclass(frozen=True)
class CsvArtifact:
    filename: str
    header: tuple
    rows: list

    def sorted(self) -> "CsvArtifact":
        return dataclasses.replace(self, rows=sorted(self.rows, key=lambda r: r[0]))

    def render(self) -> str:
        lines = [",".join(self.header)]
        lines += [",".join(_cell(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"


def _cell(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _ordered_map(fn: Callable, tasks: Sequence, workers: int) -> list:
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


# --- experiments ---------------------------------------------------------------------

def _bandstructure(cfg: RunConfig):
    table = band_sweep(cfg.params, cfg.g_list, cfg.n_k)
    yield CsvArtifact("bands.csv", ("k", "g", "omega_A", "omega_B", "gap"), list(table.rows()))


def _quench_trace(cfg: RunConfig):
    tr = evolve_quench(cfg.k, cfg.params, cfg.schedule, cfg.n_samples)
    rows = list(zip(tr.times, tr.n_a_t, tr.n_b_t))
    yield CsvArtifact("trace.csv", ("t", "n_A", "n_B"), rows)


_SPECTRUM_HEADER = ("k", "N_i_A", "N_i_B", "N_f_A", "N_f_B", "N_Q_A", "N_Q_B")


def _quench_spectrum(cfg: RunConfig):
    sp = net_excitation_spectrum(cfg.params, cfg.schedule, cfg.n_k)
    yield CsvArtifact("spectrum.csv", _SPECTRUM_HEADER, list(sp.rows()))


def _kc_sweep(cfg: RunConfig):
    curve = kc_curve(cfg.params, cfg.tau_list, cfg.epsilon, cfg.observable, cfg.n_k, cfg.threads)
    yield CsvArtifact("kc.csv", ("tau_q", "k_c"), list(zip(curve.tau, curve.k_c)))
    f = curve.fit
    yield CsvArtifact("kc_fit.csv", ("amplitude", "exponent", "rms_residual", "lz_amplitude_prediction"),
                      [(f.amplitude, f.exponent, f.rms_residual, curve.lz_amplitude)])


def _dissipation_task(args):
    cfg, kappa = args
    d = dataclasses.replace(cfg.dissipation, kappa=kappa)
    sp = dissipative_spectrum(cfg.params, cfg.schedule, d, cfg.n_k)
    return [(k, kappa, fa / ia, fb / ib) for k, ia, ib, fa, fb in zip(sp.k, sp.n_i_a, sp.n_i_b, sp.n_f_a, sp.n_f_b)]


def _dissipation(cfg: RunConfig):
    chunks = _ordered_map(_dissipation_task, [(cfg, float(kp)) for kp in cfg.kappa_list], cfg.threads)
    rows = [r for chunk in chunks for r in chunk]
    yield CsvArtifact("dissipation.csv", ("k", "kappa", "N_f_A_norm", "N_f_B_norm"), rows)


def _integrated(cfg: RunConfig):
    spectra = sweep_spectra(cfg.params, cfg.tau_list, cfg.n_k, cfg.threads)
    rows = [(tau, *integrated_excitation(sp)) for tau, sp in zip(cfg.tau_list, spectra)]
    yield CsvArtifact("integrated.csv", ("tau_q", "sum_signed", "sum_abs"), rows)


def _ssh_spectrum(cfg: RunConfig):
    scan = ssh.spectrum_scan(cfg.ssh_initial.n_cells, cfg.lambda_list, cfg.ssh_initial.k_intra)
    rows = [(lam, i, e) for lam, vals in scan for i, e in enumerate(vals)]
    yield CsvArtifact("ssh_spectrum.csv", ("lambda", "eigen_index", "energy"), rows)


def _ssh_quench(cfg: RunConfig):
    res = ssh.quench_edge_state(cfg.ssh_initial, cfg.ssh_target, cfg.t_max, cfg.n_samples)
    n_sites = res.site_occupation.shape[0]
    rows = [(t, site + 1, res.site_occupation[site, it])
            for it, t in enumerate(res.times) for site in range(n_sites)]
    yield CsvArtifact("ssh_map.csv", ("t", "site", "occupation"), rows)
    yield CsvArtifact("ssh_pr.csv", ("t", "rightmost_occupation", "survival_overlap"),
                      list(zip(res.times, res.rightmost, res.survival)))


def _lz_kz_compare(cfg: RunConfig):
    s = cfg.schedule
    sp = net_excitation_spectrum(cfg.params, s, cfg.n_k)
    p_lz = lz_probability(sp.k, cfg.params, s)
    beta = [kz_beta_squared(KZParams.from_ramp(k, cfg.params, s)) for k in sp.k]
    yield CsvArtifact("compare.csv", ("k", "sim_excitation_prob", "p_lz", "beta_sq_kz"),
                      list(zip(sp.k, sp.transfer, p_lz, beta)))


_RUNNERS = {
    "bandstructure": _bandstructure,
    "quench-trace": _quench_trace,
    "quench-spectrum": _quench_spectrum,
    "kc-sweep": _kc_sweep,
    "dissipation": _dissipation,
    "integrated": _integrated,
    "ssh-spectrum": _ssh_spectrum,
    "ssh-quench": _ssh_quench,
    "lz-kz-compare": _lz_kz_compare,
}


def run(cfg: RunConfig) -> list:
    """Compute every artifact of ``cfg.experiment``; rows sorted by their first column."""
    try:
        return [a.sorted() for a in _RUNNERS[cfg.experiment](cfg)]
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        raise RuntimeError(f"{cfg.experiment}: {exc}") from exc


def write_artifacts(artifacts: Sequence[CsvArtifact], out_dir: Path) -> list:
    """Write all artifacts or none: on any failure the files already written are removed."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        for art in artifacts:
            path = out_dir / art.filename
            tmp = path.with_name(path.name + ".part")
            written.append(tmp)
            with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(art.render())
        final = []
        for tmp in written:
            target = tmp.with_name(tmp.name[: -len(".part")])
            tmp.replace(target)
            final.append(target)
        return final
    except BaseException:
        for tmp in written:
            for p in (tmp, tmp.with_name(tmp.name[: -len(".part")])):
                p.unlink(missing_ok=True)
        raise


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quenchlab", description="Quench dynamics of 1D optomechanical arrays.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", type=Path, help="flat 'section.key = value' file")
    ap.add_argument("--out", type=Path, help="output directory (default: current directory)")
    ap.add_argument("--threads", type=int, help="worker processes, 0 = all cores")
    ap.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                    help="override any config key, repeatable")
    ap.add_argument("--tau-q", type=str, help="shorthand for quench.tau_q")
    ap.add_argument("--n-k", type=str, help="shorthand for grid.n_k")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def load_config(args: argparse.Namespace) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    overrides = parse_overrides(args.param)
    if args.tau_q is not None:
        overrides.update(parse_overrides([f"quench.tau_q={args.tau_q}"]))
    if args.n_k is not None:
        overrides.update(parse_overrides([f"grid.n_k={args.n_k}"]))
    if args.out is not None:
        overrides["run.out"] = str(args.out)
    values.update(overrides)
    threads = resolve_threads(args.threads, values.get("run.threads"))
    return build_config(args.experiment, values, threads)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args)
        log.info("running %s with %d worker(s)", cfg.experiment, cfg.threads)
        paths = write_artifacts(run(cfg), cfg.output_dir)
    except (ConfigError, RuntimeError, OSError) as exc:
        print(f"quenchlab: error: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        log.info("wrote %s", p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
