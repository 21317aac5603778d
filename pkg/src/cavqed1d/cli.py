"""Configuration-driven runs: parsing, dispatch, convergence protocol, output.

Config files are plain ``key = value`` text with ``#`` comments.  Every
dimensionful quantity carries an explicit unit (bohr, hartree, au); unknown
keys, missing units and inconsistent blocks are rejected with the offending
line.  Subcommands:

    run       one calculation, emits summary/densities/spectrum/log
    scan      config lists (scan.*) produce one result row per point
    converge  sweep one numerical parameter and tabulate the deltas

Identical config + seed reproduces identical numbers; outputs carry the
config hash and library versions.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .dressed import dress_grid, electronic_1rdm, mode_occupation, photon_energy
from .exact import (exact_grid_ground_state, exact_lattice_ground_state,
                    exact_two_electron_energy, grid_observables,
                    lattice_observables)
from .hf import SCFConfig, hf_scf
from .model import (CavityMode, Grid1D, LatticeModel, SoftInteraction,
                    SoftPotential, h2_model)
from .problems import (DressedGridProblem, ElectronicGridProblem,
                       LatticePolaritonProblem)
from .polariton_hf import (PenaltyConfig, augmented_lagrangian_outer,
                           lattice_hartree_fock)
from .rdmft import RDMFTConfig, rdmft_driver

METHODS = ("exact", "hf", "dhf", "rdmft", "drdmft", "phf")

# key -> (type, required unit or None)
_SCHEMA = {
    "method": (str, None),
    "electrons": (int, None),
    "grid.length": (float, "bohr"),
    "grid.spacing": (float, "bohr"),
    "photon_grid.length": (float, "bohr"),
    "photon_grid.spacing": (float, "bohr"),
    "potential.kind": (str, None),          # atom | molecule | zero
    "potential.charge": (float, None),
    "potential.softening": (float, "bohr"),
    "potential.separation": (float, "bohr"),
    "interaction.softening": (float, "bohr"),
    "interaction.enabled": (bool, None),
    "mode.omega": (float, "hartree"),
    "mode.coupling": (float, "au"),
    "mode.ratio": (float, None),            # g / omega
    "lattice.sites": (int, None),
    "lattice.hopping": (float, "hartree"),
    "lattice.onsite": (list, "hartree"),
    "lattice.photon_states": (int, None),
    "basis.extra_states": (int, None),
    "scf.energy_tol": (float, None),
    "scf.density_tol": (float, None),
    "scf.optimizer": (str, None),           # piris | cg
    "scf.max_outer": (int, None),
    "phf.total_tol": (float, None),
    "phf.protect_lowest": (bool, None),
    "scan.d": (list, "bohr"),
    "scan.ratio": (list, None),
    "scan.omega": (list, "hartree"),
    "scan.softening": (list, "bohr"),
    "convergence.energy_window": (float, None),
    "convergence.density_window": (float, None),
    "convergence.energy_tol": (float, None),
    "output.precision": (int, None),
}

_SCAN_TARGET = {
    "scan.d": "potential.separation",
    "scan.ratio": "mode.ratio",
    "scan.omega": "mode.omega",
    "scan.softening": "potential.softening",
}


class ConfigError(ValueError):
    """Carries a list of (line, key, reason) triples."""

    def __init__(self, errors):
        self.errors = list(errors)
        text = "; ".join(f"line {ln}: {key}: {why}" for ln, key, why in self.errors)
        super().__init__(text)


@dataclass(frozen=True)
class RunConfig:
    method: str
    values: dict            # validated key -> python value
    source: str = ""
    seed: int = 0

    def get(self, key, default=None):
        return self.values.get(key, default)

    def with_value(self, key, value):
        vals = dict(self.values)
        vals[key] = value
        return replace(self, values=vals)

    @property
    def digest(self) -> str:
        payload = json.dumps({"method": self.method, "values": self.values,
                              "seed": self.seed}, sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _parse_scalar(raw, kind, unit, errors, ln, key):
    parts = raw.split()
    if unit is not None:
        if len(parts) < 2 or parts[-1] != unit:
            errors.append((ln, key, f"missing or wrong unit (expected '{unit}')"))
            return None
        raw = " ".join(parts[:-1])
    elif len(parts) > 1 and not kind == list:
        errors.append((ln, key, "dimensionless key must not carry a unit"))
        return None
    try:
        if kind is bool:
            if raw.lower() in ("true", "yes", "on", "1"):
                return True
            if raw.lower() in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if kind is list:
            return _parse_series(raw)
        return kind(raw)
    except ValueError:
        errors.append((ln, key, f"cannot parse {raw!r} as {kind.__name__}"))
        return None


def _parse_series(raw: str):
    """Comma list '1,2,3' or range 'start:stop:step' (inclusive endpoints)."""
    raw = raw.strip()
    if ":" in raw:
        lo, hi, step = (float(p) for p in raw.split(":"))
        n = int(round((hi - lo) / step))
        return [lo + i * step for i in range(n + 1)]
    return [float(p) for p in raw.split(",") if p.strip()]


def parse_config(text: str, seed: int = 0) -> RunConfig:
    """Parse and validate key-value config text.

    Raises ConfigError with one (line, key, reason) entry per problem.
    """
    errors = []
    values = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            errors.append((ln, body.split()[0], "expected 'key = value'"))
            continue
        key, raw = (p.strip() for p in body.split("=", 1))
        if key not in _SCHEMA:
            errors.append((ln, key, "unknown key"))
            continue
        if key in values:
            errors.append((ln, key, "duplicate key"))
            continue
        kind, unit = _SCHEMA[key]
        val = _parse_scalar(raw, kind, unit, errors, ln, key)
        if val is not None:
            values[key] = val

    if "method" not in values:
        errors.append((0, "method", "missing method"))
    elif values["method"] not in METHODS:
        errors.append((0, "method", f"must be one of {METHODS}"))

    has_grid = any(k.startswith("grid.") for k in values)
    has_lattice = any(k.startswith("lattice.") for k in values)
    if has_grid and has_lattice:
        errors.append((0, "grid/lattice", "lattice and grid blocks are exclusive"))
    if has_lattice:
        onsite = values.get("lattice.onsite")
        sites = values.get("lattice.sites")
        if onsite is not None and sites is not None and len(onsite) != sites:
            errors.append((0, "lattice.onsite",
                           f"needs {sites} entries, got {len(onsite)}"))
    if values.get("potential.kind") == "molecule" and \
            "potential.separation" not in values and "scan.d" not in values:
        errors.append((0, "potential.separation", "molecule needs a separation"))
    if errors:
        raise ConfigError(sorted(errors))
    return RunConfig(method=values["method"], values=values, source=text, seed=seed)


@dataclass
class RunResult:
    method: str
    energy: float
    components: dict = field(default_factory=dict)
    density_x: np.ndarray | None = None
    axis_x: np.ndarray | None = None
    density_q: np.ndarray | None = None
    axis_q: np.ndarray | None = None
    gamma_e_spectrum: np.ndarray | None = None
    photon_number: float | None = None
    converged: bool = True
    trace: list = field(default_factory=list)
    wall_time: float = 0.0
    config_digest: str = ""

    def check_invariants(self, n_electrons, weight):
        report = {}
        if self.density_x is not None:
            report["density_nonnegative"] = bool(np.all(self.density_x >= -1e-12))
            report["density_sum"] = float(np.sum(self.density_x) * weight)
        if self.gamma_e_spectrum is not None:
            report["occupation_sum"] = float(np.sum(self.gamma_e_spectrum))
        report["energy_finite"] = bool(np.isfinite(self.energy))
        return report


def _build_potential(config: RunConfig):
    kind = config.get("potential.kind", "zero")
    eps = config.get("potential.softening", 1.0)
    if kind == "atom":
        return SoftPotential(((config.get("potential.charge", 1.0), 0.0),), eps)
    if kind == "molecule":
        return h2_model(config.get("potential.separation"), eps)
    if kind == "zero":
        return None
    raise ConfigError([(0, "potential.kind", f"unknown kind {kind!r}")])


def _build_grid_problem(config: RunConfig):
    grid = Grid1D.from_length(config.get("grid.length"), config.get("grid.spacing"))
    pot = _build_potential(config)
    inter = None
    if config.get("interaction.enabled", True):
        inter = SoftInteraction(config.get("interaction.softening", 1.0))
    n_el = config.get("electrons", 2)
    shift = pot.nuclear_repulsion() if pot is not None else 0.0
    return ElectronicGridProblem(grid, pot, inter, n_el, energy_shift=shift)


def _build_mode(config: RunConfig) -> CavityMode:
    omega = config.get("mode.omega")
    if omega is None:
        raise ConfigError([(0, "mode.omega", "dressed method needs a mode")])
    if "mode.ratio" in config.values:
        return CavityMode.from_ratio(omega, config.get("mode.ratio"))
    return CavityMode(omega, config.get("mode.coupling", 0.0))


def _build_dressed_problem(config: RunConfig) -> DressedGridProblem:
    base = _build_grid_problem(config)
    gq = Grid1D.from_length(config.get("photon_grid.length", 14.0),
                            config.get("photon_grid.spacing", 0.2))
    problem = dress_grid(base.grid, gq, base.potential, base.interaction,
                         _build_mode(config), base.n_electrons)
    problem.energy_shift += base.energy_shift
    return problem


def _build_lattice(config: RunConfig) -> LatticeModel:
    sites = config.get("lattice.sites")
    onsite = tuple(config.get("lattice.onsite", [0.0] * sites))
    return LatticeModel(sites, config.get("lattice.hopping", 0.5), onsite,
                        _build_mode(config),
                        config.get("lattice.photon_states", 5),
                        config.get("electrons", 2))


def _scf_config(config: RunConfig) -> SCFConfig:
    return SCFConfig(energy_tol=config.get("scf.energy_tol", 1e-9),
                     density_tol=config.get("scf.density_tol", 1e-8),
                     max_outer=config.get("scf.max_outer", 200))


def _rdmft_config(config: RunConfig) -> RDMFTConfig:
    return RDMFTConfig(energy_tol=config.get("scf.energy_tol", 1e-9),
                       max_outer=config.get("scf.max_outer", 60))


def run(config: RunConfig) -> RunResult:
    """Dispatch one calculation and collect the standard observables."""
    t0 = time.time()
    method = config.method
    is_lattice = "lattice.sites" in config.values
    if method == "exact":
        result = _run_exact(config, is_lattice)
    elif method in ("hf", "rdmft"):
        result = _run_electronic(config, method)
    elif method in ("dhf", "drdmft"):
        if is_lattice:
            result = _run_lattice_hf(config, constrained=False)
        else:
            result = _run_dressed_grid(config, method)
    elif method == "phf":
        result = _run_lattice_hf(config, constrained=True)
    else:
        raise ConfigError([(0, "method", f"unhandled method {method}")])
    result.wall_time = time.time() - t0
    result.config_digest = config.digest
    return result


def _run_exact(config, is_lattice):
    if is_lattice:
        model = _build_lattice(config)
        state = exact_lattice_ground_state(model)
        obs = lattice_observables(state)
        return RunResult(
            method="exact", energy=state.energy,
            components={"photon": obs["photon_number"] * model.mode.omega},
            gamma_e_spectrum=obs["electronic_occupations"],
            photon_number=obs["photon_number"],
        )
    n_el = config.get("electrons", 2)
    if n_el != 2:
        raise ConfigError([(0, "electrons", "grid oracle supports 2 electrons")])
    if "mode.omega" in config.values:
        problem = _build_dressed_problem(config)
        state = exact_grid_ground_state(problem)
        obs = grid_observables(state)
        return RunResult(
            method="exact", energy=state.energy,
            components={"photon": obs["photon_energy"]},
            density_x=obs["density_x"], axis_x=problem.grid_x.points,
            density_q=obs["density_q"], axis_q=problem.grid_q.points,
            gamma_e_spectrum=obs["electronic_occupations"],
            photon_number=obs["mode_occupation"],
        )
    base = _build_grid_problem(config)
    energy = exact_two_electron_energy(base.grid, base.potential,
                                       base.interaction) + base.energy_shift
    return RunResult(method="exact", energy=energy)


def _mean_field_components(problem, occupations, orbitals):
    w = problem.weight
    kin = pot = 0.0
    t_op = getattr(problem, "tx", None)
    for ni, phi in zip(occupations, orbitals.T):
        if ni == 0.0:
            continue
        if isinstance(problem, DressedGridProblem):
            f = phi.reshape(problem.shape)
            tphi = (problem.tx @ f + f @ problem.tq.T).reshape(-1)
            vloc = (problem.vxq.reshape(-1)) * phi
        else:
            tphi = -0.5 * _lap_apply(problem, phi)
            vloc = (problem.h @ phi) - tphi
            vloc = vloc
        kin += ni * w * float(phi @ tphi)
        pot += ni * w * float(phi @ vloc)
    den = np.einsum("i,zi->z", occupations, orbitals**2)
    hartree = 0.5 * w * float(den @ problem.w_apply_pair(den))
    return kin, pot, hartree


def _lap_apply(problem, phi):
    # the electronic grid problem stores h = -lap/2 + v, so recover -lap phi
    x = problem.grid.points
    v = problem.potential(x) if problem.potential is not None else 0.0
    return -2.0 * (problem.h @ phi - v * phi)


def _run_electronic(config, method):
    problem = _build_grid_problem(config)
    if method == "hf":
        out = hf_scf(problem, _scf_config(config))
        occ = np.full(out.orbitals.shape[1], 2.0)
        orbs = out.orbitals
        energy, converged = out.energy, out.converged
        spectrum = occ.copy()
        trace = [(i, e, np.nan) for i, e in enumerate(out.history)]
    else:
        es = config.get("basis.extra_states", 20)
        n_orb = config.get("electrons", 2) // 2 + es
        opt = config.get("scf.optimizer", "piris")
        out = rdmft_driver(problem, n_orb, optimizer=opt,
                           config=_rdmft_config(config))
        occ, orbs = out.occupations, out.natural_orbitals
        energy, converged = out.energy, out.converged
        spectrum = occ.copy()
        trace = [(i, h[0], h[2]) for i, h in enumerate(out.history)]
    kin, pot, hartree = _mean_field_components(problem, occ, orbs)
    xc = (energy - problem.energy_shift) - kin - pot - hartree
    den = np.einsum("i,zi->z", occ, orbs**2)
    return RunResult(
        method=method, energy=energy,
        components={"kinetic": kin, "external": pot, "hartree": hartree,
                    "exchange_correlation": xc,
                    "nuclear": problem.energy_shift},
        density_x=den, axis_x=problem.grid.points,
        gamma_e_spectrum=spectrum, converged=converged, trace=trace,
    )


def _run_dressed_grid(config, method):
    problem = _build_dressed_problem(config)
    n_el = problem.n_electrons
    if method == "dhf":
        out = hf_scf(problem, _scf_config(config))
        occ = np.full(out.orbitals.shape[1], 2.0)
        orbs = out.orbitals
        energy, converged = out.energy, out.converged
        trace = [(i, e, np.nan) for i, e in enumerate(out.history)]
    else:
        es = config.get("basis.extra_states", 20)
        out = rdmft_driver(problem, n_el // 2 + es,
                           optimizer=config.get("scf.optimizer", "piris"),
                           config=_rdmft_config(config))
        occ, orbs = out.occupations, out.natural_orbitals
        energy, converged = out.energy, out.converged
        trace = [(i, h[0], h[2]) for i, h in enumerate(out.history)]
    kin, pot, hartree = _mean_field_components(problem, occ, orbs)
    e_ph_aux = problem.photon_mode_energy(occ, orbs)
    mode = problem.mode
    n_ph = mode_occupation(e_ph_aux, mode.omega, n_el)
    gamma = (orbs * occ) @ orbs.T
    erdm = electronic_1rdm(gamma, problem)
    xc = (energy - problem.energy_shift) - kin - pot - hartree
    return RunResult(
        method=method, energy=energy,
        components={"kinetic": kin, "external": pot, "hartree": hartree,
                    "exchange_correlation": xc,
                    "photon": photon_energy(e_ph_aux, n_el, mode)},
        density_x=problem.electronic_density(occ, orbs),
        axis_x=problem.grid_x.points,
        density_q=problem.photonic_density(occ, orbs),
        axis_q=problem.grid_q.points,
        gamma_e_spectrum=erdm.occupations,
        photon_number=n_ph, converged=converged, trace=trace,
    )


def _run_lattice_hf(config, constrained):
    model = _build_lattice(config)
    problem = LatticePolaritonProblem(model)
    pcfg = PenaltyConfig(total_tol=config.get("phf.total_tol", 1e-4),
                         protect_lowest=config.get("phf.protect_lowest", False))
    if constrained:
        out = augmented_lagrangian_outer(problem, pcfg)
        trace = [(h["outer"], h["energy"], h["residue"]) for h in out.history]
    else:
        out = lattice_hartree_fock(problem, pcfg)
        trace = []
    return RunResult(
        method="phf" if constrained else "dhf",
        energy=out.energy,
        components={"photon": out.photon_number * model.mode.omega},
        gamma_e_spectrum=out.electronic_occupations,
        photon_number=out.photon_number,
        converged=out.converged, trace=trace,
    )


# ---------------------------------------------------------------------------
# scans and the convergence protocol
# ---------------------------------------------------------------------------

def scan_points(config: RunConfig):
    """Cartesian product of all scan.* lists as per-point configs."""
    axes = [(k, config.values[k]) for k in sorted(config.values)
            if k.startswith("scan.")]
    if not axes:
        raise ConfigError([(0, "scan", "no scan.* axis present")])
    keys = [k for k, _ in axes]
    for combo in itertools.product(*(v for _, v in axes)):
        point = config
        for key, val in zip(keys, combo):
            vals = dict(point.values)
            del vals[key]
            vals[_SCAN_TARGET[key]] = val
            point = replace(point, values=vals)
        yield dict(zip(keys, combo)), point


def _scan_worker(args):
    labels, point = args
    res = run(point)
    return labels, res.energy, res.photon_number, res.converged


def scan(config: RunConfig, threads: int = 1):
    """Run every scan point; returns a list of (labels, energy, n_ph, ok)."""
    points = list(scan_points(config))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_scan_worker, points))
    else:
        rows = [_scan_worker(p) for p in points]
    return rows


_CONVERGE_AXES = {
    "L_x": ("grid.length", float),
    "D_x": ("grid.spacing", float),
    "L_q": ("photon_grid.length", float),
    "D_q": ("photon_grid.spacing", float),
    "ES": ("basis.extra_states", int),
    "B_ph": ("lattice.photon_states", int),
}


def converge(config: RunConfig, axis: str, series,
             energy_tol: float | None = None):
    """Convergence protocol: run the series, tabulate deltas, judge.

    For each consecutive pair the energy difference and the maximum density
    deviation (interpolated onto the coarser axis) are reported; the first
    series value whose deltas fall below the thresholds is declared
    converged.  For ES under an RDMFT method the optimal region (all
    pairwise deviations below the windows) is detected as well.
    """
    if axis not in _CONVERGE_AXES:
        raise ConfigError([(0, "axis", f"must be one of {sorted(_CONVERGE_AXES)}")])
    if len(series) < 3:
        raise ConfigError([(0, "series", "need at least 3 points")])
    key, cast = _CONVERGE_AXES[axis]
    if energy_tol is None:
        energy_tol = config.get("convergence.energy_tol", 1e-8)
    results = []
    for value in series:
        res = run(config.with_value(key, cast(value)))
        results.append((value, res))
    rows = []
    declared = None
    for i in range(1, len(results)):
        v0, r0 = results[i - 1]
        v1, r1 = results[i]
        de = r1.energy - r0.energy
        drho = _density_delta(r0, r1)
        rows.append({"value": v1, "energy": r1.energy, "dE": de, "drho": drho})
        if declared is None and abs(de) < energy_tol:
            declared = v1
    report = {"axis": axis, "series": list(series), "rows": rows,
              "declared": declared,
              "energies": {v: r.energy for v, r in results}}
    if axis == "ES" and config.method in ("rdmft", "drdmft"):
        report["optimal_region"] = _optimal_region(
            results,
            config.get("convergence.energy_window", 5e-6),
            config.get("convergence.density_window", 5e-5))
    return report


def _density_delta(r0: RunResult, r1: RunResult):
    if r0.density_x is None or r1.density_x is None:
        return np.nan
    if r0.axis_x is None or len(r0.density_x) == len(r1.density_x):
        return float(np.max(np.abs(r1.density_x - r0.density_x)))
    # interpolate the finer onto the coarser axis
    if len(r0.axis_x) < len(r1.axis_x):
        coarse, fine = r0, r1
    else:
        coarse, fine = r1, r0
    interp = np.interp(coarse.axis_x, fine.axis_x, fine.density_x)
    return float(np.max(np.abs(interp - coarse.density_x)))


def _optimal_region(results, e_window, rho_window):
    """Largest contiguous window with all pairwise deviations inside."""
    vals = [v for v, _ in results]
    best = None
    n = len(results)
    for i in range(n):
        for j in range(i + 1, n):
            ok = True
            for a in range(i, j + 1):
                for b in range(a + 1, j + 1):
                    ra, rb = results[a][1], results[b][1]
                    if abs(ra.energy - rb.energy) >= e_window:
                        ok = False
                        break
                    dr = _density_delta(ra, rb)
                    if np.isfinite(dr) and dr >= rho_window:
                        ok = False
                        break
                if not ok:
                    break
            if ok and (best is None or j - i > best[1] - best[0]):
                best = (i, j)
    if best is None:
        return None
    return {"lower": vals[best[0]], "upper": vals[best[1]]}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def emit(result: RunResult, out_dir, config: RunConfig, precision: int = 12):
    """Write summary, density files, spectrum and the convergence log."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    fmt = f"{{:.{precision}g}}"

    lines = [
        "# cavqed1d run summary",
        f"version = {__version__}",
        f"numpy = {np.__version__}",
        f"config_hash = {result.config_digest}",
        f"seed = {config.seed}",
        f"method = {result.method}",
        f"converged = {result.converged}",
        "total_energy = " + fmt.format(result.energy) + " hartree",
    ]
    for name, value in sorted(result.components.items()):
        lines.append(f"{name}_energy = " + fmt.format(value) + " hartree")
    if result.photon_number is not None:
        lines.append("mode_occupation = " + fmt.format(result.photon_number)
                     + " dimensionless")
    lines.append(f"wall_time_s = {result.wall_time:.3f}")
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")

    def two_column(name, axis, values, axis_label, value_label):
        with open(os.path.join(out_dir, name), "w") as fh:
            fh.write(f"# {axis_label}    {value_label}\n")
            for x, v in zip(axis, values):
                fh.write(fmt.format(x) + " " + fmt.format(v) + "\n")

    if result.density_x is not None and result.axis_x is not None:
        two_column("density_x.dat", result.axis_x, result.density_x,
                   "x [bohr]", "density [1/bohr]")
    if result.density_q is not None and result.axis_q is not None:
        two_column("density_q.dat", result.axis_q, result.density_q,
                   "q [sqrt(hartree)*bohr]", "density")
    if result.gamma_e_spectrum is not None:
        spec = np.sort(result.gamma_e_spectrum)[::-1]
        two_column("gamma_e_spectrum.dat", np.arange(1, len(spec) + 1), spec,
                   "index", "occupation [dimensionless]")
    with open(os.path.join(out_dir, "convergence.log"), "a") as fh:
        for it, value, residual in result.trace:
            fh.write(f"{it} " + fmt.format(value) + " "
                     + (fmt.format(residual) if np.isfinite(residual) else "nan")
                     + "\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cavqed1d",
        description="Ground states of 1D model matter coupled to cavity modes")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "scan", "converge"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default="out")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        if name == "converge":
            p.add_argument("--axis", required=True,
                           choices=sorted(_CONVERGE_AXES))
            p.add_argument("--series", required=True,
                           help="comma list or start:stop:step")
    args = parser.parse_args(argv)

    with open(args.config) as fh:
        text = fh.read()
    try:
        config = parse_config(text, seed=args.seed)
    except ConfigError as err:
        for ln, key, why in err.errors:
            print(f"config error: line {ln}: {key}: {why}", file=sys.stderr)
        return 2

    import os
    os.makedirs(args.out, exist_ok=True)
    precision = config.get("output.precision", 12)
    fmt = f"{{:.{precision}g}}"

    if args.command == "run":
        result = run(config)
        emit(result, args.out, config, precision)
        print("total_energy = " + fmt.format(result.energy) + " hartree")
        return 0

    if args.command == "scan":
        rows = scan(config, threads=args.threads)
        path = os.path.join(args.out, "scan.dat")
        with open(path, "w") as fh:
            labels = sorted(rows[0][0]) if rows else []
            fh.write("# " + "  ".join(labels)
                     + "  energy [hartree]  mode_occupation  converged\n")
            for lab, energy, n_ph, ok in rows:
                cells = [fmt.format(lab[k]) for k in labels]
                cells.append(fmt.format(energy))
                cells.append(fmt.format(n_ph) if n_ph is not None else "nan")
                cells.append(str(int(ok)))
                fh.write(" ".join(cells) + "\n")
        print(f"wrote {path} ({len(rows)} points)")
        return 0

    series = _parse_series(args.series)
    report = converge(config, args.axis, series)
    path = os.path.join(args.out, f"converge_{args.axis}.dat")
    with open(path, "w") as fh:
        fh.write(f"# {args.axis}  energy [hartree]  dE [hartree]  max|drho|\n")
        for row in report["rows"]:
            fh.write(" ".join(fmt.format(row[c]) if np.isfinite(row[c]) else "nan"
                              for c in ("value", "energy", "dE", "drho")) + "\n")
    print(f"declared converged at {args.axis} = {report['declared']}")
    if report.get("optimal_region"):
        reg = report["optimal_region"]
        print(f"optimal region: {reg['lower']} .. {reg['upper']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
