"""Experiment orchestration: configuration, manifests, and the studies.

A run is described by a TOML file (unknown keys are errors -- silent typos
in stochastic experiments are unrecoverable), executed into an output
directory with a fixed layout (manifest.json, metrics.csv, rates.json,
fields/, particles/), and recorded in a manifest from which the run can be
reproduced bit-exactly.

The headline study is :func:`converge`: for each ensemble size N, R replicas
of the particle system share one common-noise path while resampling initial
positions, intensities, and individual noise; a single SPDE reference run on
the same common path provides the comparison field, and the fitted slope of
the time-supremum replica-mean squared H^{-s} distance against N is the
reported convergence rate.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

from threadpoolctl import threadpool_limits

from . import __version__
from .errors import ConfigError, ValidationError
from .fields import SpectralField, grid_points, save_field, transform
from .kernels import KernelSpec, biot_savart, green, wrap
from .mckean import FieldTrajectory, McKeanConfig, run_copies_from
from .metrics import (
    GriddedDensity,
    MetricReport,
    ReplicaMetrics,
    conditional_average,
    density_from_field,
    empirical_fourier,
    field_mode_square,
    fisher_information,
    h_minus_s_distance,
    kde_density,
    rate_fit,
    relative_entropy,
    smooth_density,
    tv_distance,
)
from .noise import (
    DiscreteLaw,
    NoisePaths,
    SeedTree,
    UniformLaw,
    derive_coarse,
    make_paths,
    sample_initial,
    sample_intensities,
)
from .particles import (
    ParticleConfig,
    ParticleEnsemble,
    run_particles,
    save_ensemble,
    trajectory_to_csv,
)
from .sigma import SigmaField, StreamMode
from .spde import SpdeConfig, run as spde_run

TWO_PI = 2.0 * np.pi

_DEFAULTS = {
    "master_seed": 0,
    "grid": {
        "n": 64,
        "dt": 1e-3,
        "t_final": 0.5,
        "output_times": [0.1, 0.2, 0.3, 0.4, 0.5],
    },
    "sweep": {
        "n_particles": [64, 128, 256, 512, 1024],
        "replicas": 64,
        "particle_dt": 2e-3,
    },
    "kernel": {"M": 16, "epsilon": 0.0},  # 0 -> 2 pi / (4 n)
    "noise": {"sigma": [{"constant": [0.7, -0.3]}]},
    "intensity": {"law": "uniform", "low": 0.5, "high": 1.5},
    "density": {
        "offset": 1.0,
        "terms": [
            {"kind": "cos", "amplitude": 0.2, "k": [1, 0]},
            {"kind": "sin", "amplitude": 0.1, "k": [0, 1]},
        ],
    },
    "metrics": {"s": 2.75, "cutoff": 16, "bandwidth": 0.0},  # 0 -> 4 pi / sqrt(N)
    "spde": {"nu": 1.0, "strat_mode": "auto", "nonlinearity": True, "noise": True},
    "mckean": {
        "copies": [1000, 4000, 16000],
        "t_check": 0.25,
        "bandwidth": 0.25,
        "snapshot_every": 5,
        "kde_grid": 64,
    },
}

_LIST_ITEM_KEYS = {
    ("noise", "sigma"): {"constant", "modes"},
    ("density", "terms"): {"kind", "amplitude", "k"},
}
_SIGMA_MODE_KEYS = {"amplitude", "k", "phase"}


def _check_keys(data: dict, allowed, where: str) -> None:
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown configuration key {where}{key!r}")


@dataclass
class RunConfig:
    """Validated experiment configuration with its source text."""

    raw: dict
    text: str = ""

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config is not valid TOML: {exc}") from exc
        merged = _merge(data)
        cfg = cls(merged, text)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r") as f:
            return cls.from_text(f.read())

    @classmethod
    def default(cls) -> "RunConfig":
        cfg = cls(_merge({}), "")
        cfg.validate()
        return cfg

    # -- typed accessors ------------------------------------------------
    @property
    def master_seed(self) -> int:
        return int(self.raw["master_seed"])

    @master_seed.setter
    def master_seed(self, value: int) -> None:
        self.raw["master_seed"] = int(value)

    @property
    def n(self) -> int:
        return int(self.raw["grid"]["n"])

    @property
    def dt(self) -> float:
        return float(self.raw["grid"]["dt"])

    @property
    def t_final(self) -> float:
        return float(self.raw["grid"]["t_final"])

    @property
    def output_times(self) -> list:
        return [float(t) for t in self.raw["grid"]["output_times"]]

    @property
    def n_list(self) -> list:
        return [int(n) for n in self.raw["sweep"]["n_particles"]]

    @property
    def replicas(self) -> int:
        return int(self.raw["sweep"]["replicas"])

    @property
    def particle_dt(self) -> float:
        return float(self.raw["sweep"]["particle_dt"])

    @property
    def cutoff(self) -> int:
        return int(self.raw["kernel"]["M"])

    @property
    def epsilon(self) -> float:
        eps = float(self.raw["kernel"]["epsilon"])
        return eps if eps > 0 else TWO_PI / (4 * self.n)

    @property
    def s(self) -> float:
        return float(self.raw["metrics"]["s"])

    @property
    def metric_cutoff(self) -> int:
        return int(self.raw["metrics"]["cutoff"])

    def bandwidth(self, n_particles: int) -> float:
        h = float(self.raw["metrics"]["bandwidth"])
        return h if h > 0 else 2.0 * TWO_PI / np.sqrt(n_particles)

    # -- derived objects ------------------------------------------------
    def sigma_basis(self) -> list:
        basis = []
        for entry in self.raw["noise"]["sigma"]:
            const = tuple(float(c) for c in entry.get("constant", (0.0, 0.0)))
            modes = tuple(
                StreamMode(float(m["amplitude"]), tuple(int(k) for k in m["k"]), float(m.get("phase", 0.0)))
                for m in entry.get("modes", ())
            )
            basis.append(SigmaField(const, modes))
        return basis

    def intensity_law(self):
        spec = self.raw["intensity"]
        if spec["law"] == "uniform":
            return UniformLaw(float(spec["low"]), float(spec["high"]))
        if spec["law"] == "discrete":
            return DiscreteLaw(tuple(spec["atoms"]), tuple(spec["probs"]))
        raise ConfigError(f"unknown intensity law {spec['law']!r}")

    def density_values(self, n: int | None = None) -> np.ndarray:
        """Initial position density rho_0 on the grid; integrates to 1."""
        n = n or self.n
        X1, X2 = grid_points(n)
        vals = np.full((n, n), float(self.raw["density"]["offset"]))
        for term in self.raw["density"]["terms"]:
            k1, k2 = (int(k) for k in term["k"])
            fn = np.cos if term["kind"] == "cos" else np.sin
            vals = vals + float(term["amplitude"]) * fn(k1 * X1 + k2 * X2)
        return vals / TWO_PI**2

    def initial_field(self, n: int | None = None) -> SpectralField:
        """v_0 = E[xi] rho_0, so the field's mass matches the empirical measure's."""
        n = n or self.n
        mean_xi = self.intensity_law().mean()
        return transform(mean_xi * self.density_values(n))

    def spde_config(self, dt: float | None = None, n: int | None = None) -> SpdeConfig:
        spec = self.raw["spde"]
        return SpdeConfig(
            n=n or self.n,
            dt=dt if dt is not None else self.dt,
            nu=float(spec["nu"]),
            nonlinearity=bool(spec["nonlinearity"]),
            noise=bool(spec["noise"]),
            strat_mode=str(spec["strat_mode"]),
        )

    def particle_config(self) -> ParticleConfig:
        return ParticleConfig(epsilon=self.epsilon, dt=self.particle_dt, M=self.cutoff)

    def time_grid(self, t_final: float | None = None) -> np.ndarray:
        T = t_final if t_final is not None else self.t_final
        steps = int(round(T / self.dt))
        if abs(steps * self.dt - T) > 1e-9:
            raise ConfigError(f"t_final {T} is not a multiple of dt {self.dt}")
        return np.arange(steps + 1) * self.dt

    def coarsen_factor(self) -> int:
        factor = self.particle_dt / self.dt
        if abs(factor - round(factor)) > 1e-9 or round(factor) < 1:
            raise ConfigError(
                f"particle_dt {self.particle_dt} is not an integer multiple of dt {self.dt}"
            )
        return int(round(factor))

    # -- validation -----------------------------------------------------
    def validate(self) -> None:
        raw = self.raw
        _check_keys(raw, set(_DEFAULTS), "")
        for section, defaults in _DEFAULTS.items():
            if section == "master_seed":
                continue
            _check_keys(raw[section], set(defaults), f"{section}.")
        for entry in raw["noise"]["sigma"]:
            _check_keys(entry, _LIST_ITEM_KEYS[("noise", "sigma")], "noise.sigma.")
            for m in entry.get("modes", ()):
                _check_keys(m, _SIGMA_MODE_KEYS, "noise.sigma.modes.")
        for term in raw["density"]["terms"]:
            _check_keys(term, _LIST_ITEM_KEYS[("density", "terms")], "density.terms.")
            if term["kind"] not in ("cos", "sin"):
                raise ConfigError(f"density term kind must be cos or sin, got {term['kind']!r}")

        n = self.n
        if n < 4 or n & (n - 1) != 0:
            raise ConfigError(f"grid size must be a power of two >= 4, got {n}")
        if self.dt <= 0 or self.t_final <= 0:
            raise ConfigError("dt and t_final must be positive")
        grid = self.time_grid()
        for t in self.output_times:
            k = int(round(t / self.dt))
            if not (0 < k <= len(grid) - 1) or abs(k * self.dt - t) > 1e-9:
                raise ConfigError(f"output time {t} not a grid instant in (0, {self.t_final}]")
            kp = t / self.particle_dt
            if abs(kp - round(kp)) > 1e-9:
                raise ConfigError(f"output time {t} not on the particle grid (dt {self.particle_dt})")
        if (len(grid) - 1) % self.coarsen_factor() != 0:
            raise ConfigError("particle_dt must divide t_final evenly")
        if self.replicas < 1:
            raise ConfigError("replica count must be >= 1")
        if any(N < 2 for N in self.n_list):
            raise ConfigError("ensemble sizes must be >= 2")
        law = self.intensity_law()
        if law.mean() <= 0:
            raise ConfigError("intensity law must have positive mean")
        vals = self.density_values()
        if np.min(vals) <= 0:
            raise ValidationError("initial density is not strictly positive on the grid")
        total = vals.sum() * (TWO_PI / self.n) ** 2
        if abs(total - 1.0) > 1e-10:
            raise ValidationError(f"initial density integrates to {total!r}, expected 1")
        if self.s <= 1.0:
            raise ConfigError("negative Sobolev order s must exceed 1 for summability")
        mk = raw["mckean"]
        if float(mk["t_check"]) <= 0 or float(mk["bandwidth"]) <= 0:
            raise ConfigError("mckean t_check and bandwidth must be positive")

    def sha256(self) -> str:
        blob = self.text if self.text else json.dumps(self.raw, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()


def _merge(data: dict) -> dict:
    out = {"master_seed": data.get("master_seed", _DEFAULTS["master_seed"])}
    for section, defaults in _DEFAULTS.items():
        if section == "master_seed":
            continue
        given = data.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"section {section!r} must be a table")
        merged = dict(defaults)
        merged.update(given)
        out[section] = merged
    extra = set(data) - set(_DEFAULTS)
    if extra:
        raise ConfigError(f"unknown configuration key(s) {sorted(extra)!r}")
    return out


@dataclass
class RunManifest:
    """Everything needed to reproduce a run and find its outputs."""

    command: str
    config_text: str
    config_sha256: str
    master_seed: int
    version: str = __version__
    artifacts: dict = dc_field(default_factory=dict)
    fingerprints: dict = dc_field(default_factory=dict)
    step_counts: dict = dc_field(default_factory=dict)
    wall_clock: float = 0.0

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(vars(self), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "RunManifest":
        with open(path) as f:
            return cls(**json.load(f))


def _prepare_out_dir(out_dir) -> str:
    os.makedirs(out_dir, exist_ok=True)
    for sub in ("fields", "particles"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    return out_dir


def _new_manifest(command: str, cfg: RunConfig) -> RunManifest:
    return RunManifest(
        command=command,
        config_text=cfg.text,
        config_sha256=cfg.sha256(),
        master_seed=cfg.master_seed,
    )


# ---------------------------------------------------------------------------
# converge: the mean-field convergence study
# ---------------------------------------------------------------------------


def _replica_task(payload):
    """Run one (N, replica) particle simulation and compute its metrics.

    Pure function of the payload; executed in worker processes with BLAS
    pinned to one thread so results do not depend on the worker count.
    """
    (
        seed,
        n_particles,
        replica,
        coarse_grid,
        coarse_common,
        basis,
        law,
        density,
        pcfg,
        output_times,
        s,
        metric_cutoff,
        bandwidth,
        field_modes,
        field_densities,
        kde_grid,
        fingerprint,
    ) = payload
    with threadpool_limits(limits=1):
        tree = SeedTree(seed)
        x0 = wrap(sample_initial(tree, density, n_particles, replica))
        xi = sample_intensities(tree, law, n_particles, replica)
        mk = make_paths(tree, coarse_grid, 0, n_particles, replica)
        paths = NoisePaths(coarse_grid, coarse_common, mk.individual, seed)
        e0 = ParticleEnsemble(x0, xi)
        snapshots, _ = run_particles(e0, paths, pcfg, basis, output_times)
        rows = []
        for snap, fm, fd in zip(snapshots, field_modes, field_densities):
            mu = empirical_fourier(snap.positions, snap.intensities, metric_cutoff)
            h = h_minus_s_distance(mu, fm, s)
            p = kde_density(snap.positions, snap.intensities, bandwidth, kde_grid)
            q = GriddedDensity.from_torus_grid(fd)
            tv = tv_distance(p, q)
            ent = relative_entropy(p, q)
            fi = fisher_information(p)
            rows.append(ReplicaMetrics(snap.t, h, tv, ent, fi, fingerprint))
    return (n_particles, replica, rows)


def converge(cfg: RunConfig, out_dir, threads: int = 1) -> dict:
    """Particle-vs-SPDE convergence sweep over ensemble sizes."""
    if len(cfg.n_list) < 1:
        raise ConfigError("sweep needs at least one ensemble size")
    t_start = time.perf_counter()
    _prepare_out_dir(out_dir)
    manifest = _new_manifest("converge", cfg)
    tree = SeedTree(cfg.master_seed)
    grid = cfg.time_grid()
    basis = cfg.sigma_basis()
    d = len(basis) if cfg.raw["spde"]["noise"] else 0
    fine = make_paths(tree, grid, d, 0)
    factor = cfg.coarsen_factor()
    coarse = derive_coarse(fine, factor)
    # both solvers consume the same environmental path: the SPDE reads it on
    # the fine grid, the particles through exact block sums of the same bytes
    manifest.fingerprints = {
        "spde_common": fine.common_fingerprint(),
        "particle_common_source": fine.common_fingerprint(),
        "particle_common": coarse.common_fingerprint(),
        "coarsen_factor": factor,
    }

    output_times = [round(t / cfg.dt) * cfg.dt for t in cfg.output_times]
    v0 = cfg.initial_field()
    snapshots, log = spde_run(v0, fine, cfg.spde_config(), basis, output_times, diag_every=50)
    log.to_csv(os.path.join(out_dir, "spde_diagnostics.csv"))
    manifest.artifacts["spde_diagnostics"] = "spde_diagnostics.csv"
    for i, f in enumerate(snapshots):
        rel = f"fields/reference_{i:03d}.bin"
        save_field(f, os.path.join(out_dir, rel))
        manifest.artifacts[f"field_{i:03d}"] = rel
    manifest.step_counts["spde_steps"] = fine.n_steps
    manifest.step_counts["particle_steps"] = coarse.n_steps

    field_modes = [field_mode_square(f, cfg.metric_cutoff) for f in snapshots]
    kde_grid = cfg.n
    law = cfg.intensity_law()
    density = cfg.density_values()
    pcfg = cfg.particle_config()
    fingerprint = coarse.common_fingerprint()

    reports: list[MetricReport] = []
    errors = {}
    failure = None
    try:
        for n_particles in cfg.n_list:
            bandwidth = cfg.bandwidth(n_particles)
            field_densities = [
                smooth_density(density_from_field(f), bandwidth).values for f in snapshots
            ]
            payloads = [
                (
                    cfg.master_seed,
                    n_particles,
                    r,
                    coarse.time_grid,
                    coarse.common,
                    basis,
                    law,
                    density,
                    pcfg,
                    output_times,
                    cfg.s,
                    cfg.metric_cutoff,
                    bandwidth,
                    field_modes,
                    field_densities,
                    kde_grid,
                    fingerprint,
                )
                for r in range(cfg.replicas)
            ]
            if threads > 1:
                with ProcessPoolExecutor(max_workers=threads) as pool:
                    results = list(pool.map(_replica_task, payloads))
            else:
                results = [_replica_task(p) for p in payloads]
            # fixed aggregation order regardless of completion order
            results.sort(key=lambda item: item[1])
            by_time = {}
            sq_by_time = {}
            for _, _, rows in results:
                for row in rows:
                    by_time.setdefault(row.t, []).append(row)
                    sq_by_time.setdefault(row.t, []).append(row.h_minus_s**2)
            for t in sorted(by_time):
                reports.append(conditional_average(by_time[t], n_particles))
            errors[n_particles] = max(float(np.mean(v)) for v in sq_by_time.values())
    except Exception as exc:  # preserve partial results, then re-raise
        failure = exc
    _write_metrics_csv(reports, os.path.join(out_dir, "metrics.csv"))
    manifest.artifacts["metrics"] = "metrics.csv"

    rates = {"metric": "time-sup of replica-mean squared H^-s distance", "errors": {str(k): v for k, v in errors.items()}}
    if failure is None and len(errors) >= 3:
        slope, intercept, r2 = rate_fit(list(errors.items()))
        rates.update({"slope": slope, "intercept": intercept, "r_squared": r2})
    with open(os.path.join(out_dir, "rates.json"), "w") as f:
        json.dump(rates, f, indent=2, sort_keys=True)
        f.write("\n")
    manifest.artifacts["rates"] = "rates.json"
    manifest.wall_clock = time.perf_counter() - t_start
    manifest.save(os.path.join(out_dir, "manifest.json"))
    if failure is not None:
        raise failure
    return rates


def _write_metrics_csv(reports, path) -> None:
    with open(path, "w") as f:
        f.write(MetricReport.CSV_HEADER + "\n")
        for rep in sorted(reports, key=lambda r: (r.n_particles, r.t)):
            f.write(rep.csv_row() + "\n")


# ---------------------------------------------------------------------------
# mv-check: conditional McKean-Vlasov consistency
# ---------------------------------------------------------------------------


def mv_check(cfg: RunConfig, out_dir, threads: int = 1) -> dict:
    """Copy-count scaling of the smoothed TV gap to the normalized field."""
    t_start = time.perf_counter()
    _prepare_out_dir(out_dir)
    manifest = _new_manifest("mv-check", cfg)
    mk = cfg.raw["mckean"]
    t_check = round(float(mk["t_check"]) / cfg.dt) * cfg.dt
    bandwidth = float(mk["bandwidth"])
    kde_grid = int(mk["kde_grid"])
    every = int(mk["snapshot_every"])

    tree = SeedTree(cfg.master_seed)
    grid = cfg.time_grid(t_check)
    basis = cfg.sigma_basis()
    d = len(basis) if cfg.raw["spde"]["noise"] else 0
    fine = make_paths(tree, grid, d, 0)
    snap_times = [grid[j] for j in range(0, len(grid), every)]
    if abs(snap_times[-1] - grid[-1]) > 1e-12:
        snap_times.append(grid[-1])
    v0 = cfg.initial_field()
    snapshots, _ = spde_run(v0, fine, cfg.spde_config(), basis, snap_times, diag_every=10**9)
    if kde_grid != cfg.n:
        raise ConfigError("mckean kde_grid must equal grid.n")
    factor = cfg.coarsen_factor()
    coarse = derive_coarse(fine, factor)
    # the copies consume the coarsened view of the very path that drove the field
    traj = FieldTrajectory.from_snapshots(snapshots, coarse.common_fingerprint())
    manifest.fingerprints["spde_common"] = fine.common_fingerprint()
    manifest.fingerprints["copies_common"] = coarse.common_fingerprint()
    target = smooth_density(density_from_field(snapshots[-1]), bandwidth)
    density = cfg.density_values()

    rows = []
    prev_tv = None
    for idx, copies in enumerate(int(c) for c in mk["copies"]):
        x0 = wrap(sample_initial(tree, density, copies, replica=idx))
        paths_mk = make_paths(tree, coarse.time_grid, 0, copies, replica=idx)
        paths_mk = NoisePaths(coarse.time_grid, coarse.common, paths_mk.individual, cfg.master_seed)
        out = run_copies_from(traj, x0, paths_mk, basis, McKeanConfig(), [coarse.time_grid[-1]])
        positions = out[-1][1]
        p = kde_density(positions, np.ones(copies), bandwidth, kde_grid)
        tv = tv_distance(p, target)
        ratio = tv / prev_tv if prev_tv is not None else float("nan")
        prev_tv = tv
        rows.append((copies, tv, ratio))

    table_path = os.path.join(out_dir, "mv_table.csv")
    with open(table_path, "w") as f:
        f.write("copies,tv,ratio\n")
        for copies, tv, ratio in rows:
            f.write(f"{copies},{tv:.17g},{ratio:.17g}\n")
    manifest.artifacts["mv_table"] = "mv_table.csv"
    manifest.step_counts["spde_steps"] = fine.n_steps
    manifest.wall_clock = time.perf_counter() - t_start
    manifest.save(os.path.join(out_dir, "manifest.json"))
    return {"rows": rows, "t_check": t_check, "bandwidth": bandwidth}


# ---------------------------------------------------------------------------
# single-system runs and the kernel table
# ---------------------------------------------------------------------------


def solve_spde(cfg: RunConfig, out_dir, threads: int = 1) -> dict:
    t_start = time.perf_counter()
    _prepare_out_dir(out_dir)
    manifest = _new_manifest("solve-spde", cfg)
    tree = SeedTree(cfg.master_seed)
    basis = cfg.sigma_basis()
    d = len(basis) if cfg.raw["spde"]["noise"] else 0
    paths = make_paths(tree, cfg.time_grid(), d, 0)
    manifest.fingerprints["spde_common"] = paths.common_fingerprint()
    output_times = [round(t / cfg.dt) * cfg.dt for t in cfg.output_times]
    snapshots, log = spde_run(cfg.initial_field(), paths, cfg.spde_config(), basis, output_times)
    for i, f in enumerate(snapshots):
        rel = f"fields/snapshot_{i:03d}.bin"
        save_field(f, os.path.join(out_dir, rel))
        manifest.artifacts[f"field_{i:03d}"] = rel
    log.to_csv(os.path.join(out_dir, "diagnostics.csv"))
    manifest.artifacts["diagnostics"] = "diagnostics.csv"
    manifest.step_counts["spde_steps"] = paths.n_steps
    manifest.wall_clock = time.perf_counter() - t_start
    manifest.save(os.path.join(out_dir, "manifest.json"))
    return {"snapshots": len(snapshots)}


def simulate_particles(cfg: RunConfig, out_dir, threads: int = 1) -> dict:
    t_start = time.perf_counter()
    _prepare_out_dir(out_dir)
    manifest = _new_manifest("simulate-particles", cfg)
    tree = SeedTree(cfg.master_seed)
    basis = cfg.sigma_basis()
    d = len(basis) if cfg.raw["spde"]["noise"] else 0
    n_particles = cfg.n_list[0]
    grid = cfg.time_grid()[:: cfg.coarsen_factor()]
    paths = make_paths(tree, grid, d, n_particles)
    manifest.fingerprints["particle_common"] = paths.common_fingerprint()
    x0 = wrap(sample_initial(tree, cfg.density_values(), n_particles))
    xi = sample_intensities(tree, cfg.intensity_law(), n_particles)
    output_times = [round(t / cfg.dt) * cfg.dt for t in cfg.output_times]
    snapshots, diag = run_particles(
        ParticleEnsemble(x0, xi), paths, cfg.particle_config(), basis, output_times, diagnostics=True
    )
    for i, e in enumerate(snapshots):
        rel = f"particles/snapshot_{i:03d}.bin"
        save_ensemble(e, os.path.join(out_dir, rel))
        manifest.artifacts[f"particles_{i:03d}"] = rel
    trajectory_to_csv(snapshots, os.path.join(out_dir, "trajectory.csv"))
    diag.to_csv(os.path.join(out_dir, "diagnostics.csv"))
    paths.save(os.path.join(out_dir, "paths.bin"))
    manifest.artifacts.update(
        {"trajectory": "trajectory.csv", "diagnostics": "diagnostics.csv", "paths": "paths.bin"}
    )
    manifest.step_counts["particle_steps"] = paths.n_steps
    manifest.wall_clock = time.perf_counter() - t_start
    manifest.save(os.path.join(out_dir, "manifest.json"))
    return {"snapshots": len(snapshots), "n_particles": n_particles}


def kernel_table(cfg: RunConfig, out_dir, threads: int = 1, n_table: int = 32) -> dict:
    """CSV table of (x1, x2, G, K1, K2) on an origin-avoiding grid."""
    t_start = time.perf_counter()
    _prepare_out_dir(out_dir)
    manifest = _new_manifest("kernel-table", cfg)
    spec = KernelSpec(cfg.cutoff)
    x = -np.pi + (np.arange(n_table) + 0.5) * TWO_PI / n_table
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    pts = np.stack([X1.ravel(), X2.ravel()], axis=1)
    g = green(pts, spec)
    k = biot_savart(pts, spec)
    path = os.path.join(out_dir, "kernel_table.csv")
    with open(path, "w") as f:
        f.write("x1,x2,G,K1,K2\n")
        for i in range(len(pts)):
            f.write(
                f"{pts[i, 0]:.17g},{pts[i, 1]:.17g},{g[i]:.17g},{k[i, 0]:.17g},{k[i, 1]:.17g}\n"
            )
    manifest.artifacts["kernel_table"] = "kernel_table.csv"
    manifest.wall_clock = time.perf_counter() - t_start
    manifest.save(os.path.join(out_dir, "manifest.json"))
    return {"rows": len(pts)}


_COMMANDS = {
    "converge": converge,
    "mv-check": mv_check,
    "solve-spde": solve_spde,
    "simulate-particles": simulate_particles,
    "kernel-table": kernel_table,
}


def rerun_from_manifest(manifest_path, out_dir, threads: int = 1) -> dict:
    """Re-execute a recorded run; outputs must be bit-identical."""
    manifest = RunManifest.load(manifest_path)
    if manifest.command not in _COMMANDS:
        raise ConfigError(f"manifest names unknown command {manifest.command!r}")
    cfg = RunConfig.from_text(manifest.config_text) if manifest.config_text else RunConfig.default()
    cfg.master_seed = manifest.master_seed
    return _COMMANDS[manifest.command](cfg, out_dir, threads=threads)
