"""HTTP service exposing every simulation command as a POST endpoint.

The CLI is a thin client of this app (in-process by default, over the wire
with --server); anything the CLI can do, a plain HTTP client can do too.
Domain failures map to 400 with a stable machine-readable code in the body:

    {"error": {"code": "saturation", "message": "..."}}

Responses are uniform tables (columns + rows + metadata) so clients can
render CSV without knowing each command's schema.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from typing import Any

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import device as dev_mod
from .. import dynamics_full, protocols, readout
from .._version import __version__
from ..config import resolve_evolve_levels
from ..dynamics_moments import (
    MomentState,
    evolve_moments,
    exchange_time,
    nbar_a_analytic,
    nbar_b_analytic,
)
from ..errors import ConfigError, DomainError
from ..hilbert import tensor, thermal_state
from ..readout import PhononDistribution, SidebandDrive, estimate_nbar, simulate_shots
from .schemas import (
    CoolRequest,
    EvolveRequest,
    ExchangeRequest,
    ForceRequest,
    HealthResponse,
    ParamsRequest,
    ReadoutRequest,
    SweepRequest,
    TableResponse,
)

__all__ = ["app", "create_app"]


def _finite(value: Any) -> Any:
    """JSON responses cannot carry inf/nan; spell them out instead."""
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def _meta(**sections: Any) -> dict[str, Any]:
    """Flatten dataclasses/dicts into dotted keys; scalars pass through."""
    out: dict[str, Any] = {"version": __version__}
    for name, obj in sections.items():
        if hasattr(obj, "__dataclass_fields__"):
            obj = asdict(obj)
        if isinstance(obj, dict):
            for key, value in obj.items():
                out[f"{name}.{key}"] = _finite(value)
        else:
            out[name] = _finite(obj)
    return out


def _error_body(code: str, message: str) -> dict[str, Any]:
    return {"error": {"code": code, "message": message}}


def create_app() -> FastAPI:
    app = FastAPI(title="ionqems", version=__version__)

    @app.exception_handler(DomainError)
    async def _domain_error(_: Request, exc: DomainError) -> JSONResponse:
        return JSONResponse(status_code=400, content=_error_body(exc.code, str(exc)))

    @app.exception_handler(ConfigError)
    async def _config_error(_: Request, exc: ConfigError) -> JSONResponse:
        return JSONResponse(status_code=400, content=_error_body("config", str(exc)))

    @app.exception_handler(ValueError)
    async def _value_error(_: Request, exc: ValueError) -> JSONResponse:
        return JSONResponse(status_code=400, content=_error_body("config", str(exc)))

    @app.get("/health", response_model=HealthResponse)
    async def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/params", response_model=TableResponse)
    async def params_table(req: ParamsRequest) -> TableResponse:
        p = req.params.to_core()
        dev = req.device.to_core()
        ld = dev_mod.lamb_dicke(dev, req.nbar_b0)
        rows: list[list[Any]] = [["version", __version__], ["seed", req.seed]]
        for key, value in asdict(p).items():
            rows.append([f"model.{key}", _finite(float(value))])
        rows.append(["model.nbar_b0", float(req.nbar_b0)])
        for key, value in asdict(dev).items():
            rows.append([f"device.{key}", _finite(float(value))])
        derived: list[tuple[str, Any]] = [
            ("kappa_from_bias_rad_s", dev_mod.coupling_kappa(dev)),
            ("chi_N_m", dev_mod.chi(dev)),
            ("bias_product_C", dev.c0 * dev.v0),
            ("gamma_a_1_s", dev_mod.gamma_a(dev.omega, dev.q_factor)),
            ("nbar_thermal_at_t_bath", dev_mod.thermal_occupation(dev.t_bath, dev.omega)),
            ("eta", ld.eta),
            ("eta_occupancy_scaled", ld.scaled),
            ("eta_within_limit", ld.within_limit),
            ("x_zp_cantilever_m", dev_mod.zero_point_length(dev.cantilever_mass, dev.omega)),
            ("x_zp_ion_m", dev_mod.zero_point_length(dev.ion_mass, dev.nu)),
            (
                "anharmonic_linewidth_rad_s",
                dev_mod.anharmonic_linewidth(dev.nu, p.nbar_a0, dev.ion_mass,
                                             dev.trap_dimension_beta),
            ),
            ("x_sql_m", dev_mod.sql_displacement(dev.cantilever_mass, dev.omega)),
        ]
        if p.kappa > 0:
            try:
                derived.append(("tau_star_s", exchange_time(p.kappa, p.gamma_a)))
            except DomainError as exc:
                derived.append(("tau_star_s", f"n/a ({exc.code})"))
            derived.append(
                ("single_ion_quanta_bound",
                 protocols.single_ion_quanta_bound(p.nbar_a0, p.gamma_a, p.kappa))
            )
        try:
            derived.append(("f_min_N", protocols.force_sensitivity(dev).f_min))
        except DomainError as exc:
            derived.append(("f_min_N", f"n/a ({exc.code})"))
        for key, value in derived:
            rows.append([f"derived.{key}", value])
        return TableResponse(
            columns=["key", "value"],
            rows=rows,
            meta=_meta(params=p, device=dev, seed=req.seed),
        )

    @app.post("/exchange", response_model=TableResponse)
    async def exchange(req: ExchangeRequest) -> TableResponse:
        p = req.params.to_core()
        grid = np.linspace(0.0, req.t_max, req.n_points)
        traj = evolve_moments(
            MomentState(n_a=p.nbar_a0, n_b=req.nbar_b0), p, grid
        )
        columns = ["t_s", "nbar_a", "nbar_b", "re_c", "im_c"]
        series = [traj.times, traj.nbar_a, traj.nbar_b, traj.re_c, traj.im_c]
        if req.with_undamped:
            columns.append("nbar_b_undamped")
            series.append(
                np.asarray(nbar_b_analytic(grid, p.nbar_a0, req.nbar_b0, p.kappa, 0.0))
            )
        rows = [[float(col[i]) for col in series] for i in range(grid.size)]
        return TableResponse(
            columns=columns,
            rows=rows,
            meta=_meta(params=p, nbar_b0=req.nbar_b0, t_max=req.t_max,
                       n_points=req.n_points),
        )

    @app.post("/evolve", response_model=TableResponse)
    async def evolve_full(req: EvolveRequest) -> TableResponse:
        p = req.params.to_core()
        n_levels, cost_note = resolve_evolve_levels(
            p.nbar_a0, req.nbar_b0, req.n_levels, req.allow_large
        )
        rho0 = tensor(thermal_state(n_levels, p.nbar_a0),
                      thermal_state(n_levels, req.nbar_b0))
        grid = np.linspace(0.0, req.t_max, req.n_points)
        traj = dynamics_full.evolve(
            rho0, p, req.t_max, output_grid=grid,
            n_a_levels=n_levels, n_b_levels=n_levels,
        )
        rows = [
            [float(traj.times[i]), float(traj.nbar_a[i]), float(traj.nbar_b[i]),
             float(traj.re_c[i]), float(traj.im_c[i])]
            for i in range(grid.size)
        ]
        extra: dict[str, Any] = {
            "n_levels": n_levels,
            "max_trace_error": float(np.max(traj.trace_error)),
            "max_hermiticity_error": float(traj.max_hermiticity_error),
            "min_eigenvalue": float(traj.min_eigenvalue),
        }
        if cost_note:
            extra["cost_note"] = cost_note
        return TableResponse(
            columns=["t_s", "nbar_a", "nbar_b", "re_c", "im_c"],
            rows=rows,
            meta=_meta(params=p, nbar_b0=req.nbar_b0, **extra),
        )

    @app.post("/readout", response_model=TableResponse)
    async def readout_endpoint(req: ReadoutRequest) -> TableResponse:
        p = req.params.to_core()
        dev = req.device.to_core()
        if req.nbar is not None:
            dist = PhononDistribution.thermal(req.nbar)
            p_red = readout.sideband_excitation_probability(
                dist, SidebandDrive(req.drive_g, req.drive_duration, "red"))
            p_blue = readout.sideband_excitation_probability(
                dist, SidebandDrive(req.drive_g, req.drive_duration, "blue"))
            ratio = readout.ratio_Re(dist, req.drive_g, req.drive_duration)
            record = simulate_shots(p_red, p_blue, req.shots, req.seed)
            est = estimate_nbar(record)
            return TableResponse(
                columns=["nbar", "p_red", "p_blue", "ratio_Re", "nbar_hat",
                         "ci_low", "ci_high", "reliable"],
                rows=[[float(req.nbar), p_red, p_blue, ratio, est.nbar,
                       est.ci_low, est.ci_high, est.reliable]],
                meta=_meta(params=p, shots=req.shots, seed=req.seed,
                           drive_g=req.drive_g, drive_duration=req.drive_duration),
            )

        tau = req.tau
        if tau is None:
            if p.kappa <= 0 or p.nbar_a0 <= 0:
                raise DomainError(
                    "cannot choose a default coupling time without kappa > 0 "
                    "and nbar_a0 > 0; pass tau explicitly"
                )
            tau = 1.0 / (p.kappa * math.sqrt(p.nbar_a0))
        result = protocols.run_measurement_protocol(
            dev, tau, SidebandDrive(req.drive_g, req.drive_duration, "red"),
            req.shots, req.seed, nbar_a0=p.nbar_a0,
        )
        est = result.estimate
        assert est is not None and result.inferred_ci is not None
        return TableResponse(
            columns=["tau_s", "nbar_b_tau", "p_red", "p_blue", "nbar_b_hat",
                     "ci_low", "ci_high", "nbar_b_reliable",
                     "inferred_nbar_a0", "inferred_ci_low", "inferred_ci_high"],
            rows=[[tau, result.final_nbar_b, result.p_red, result.p_blue,
                   est.nbar, est.ci_low, est.ci_high, bool(result.nbar_b_reliable),
                   result.inferred_nbar_a0, result.inferred_ci[0],
                   result.inferred_ci[1]]],
            meta=_meta(params=p, device=dev, shots=req.shots, seed=req.seed,
                       tau=tau, drive_g=req.drive_g,
                       drive_duration=req.drive_duration,
                       notes="; ".join(result.notes)),
        )

    @app.post("/cool", response_model=TableResponse)
    async def cool(req: CoolRequest) -> TableResponse:
        dev = req.device.to_core()
        result = protocols.run_cooling(
            dev, req.scheme, cycles=req.cycles, recool_time=req.recool_time,
            ion_damping=req.ion_damping, nbar_a0=req.nbar_a0,
        )
        meta = _meta(device=dev, scheme=req.scheme, nbar_a0_override=req.nbar_a0,
                     notes="; ".join(result.notes))
        if req.scheme == "continuous":
            return TableResponse(
                columns=["scheme", "ion_damping_1_s", "steady_nbar_a"],
                rows=[[req.scheme, float(req.ion_damping), result.final_nbar_a]],
                meta=meta,
            )
        if req.scheme == "iterative":
            assert result.cycle_nbars is not None
            rows = [[req.scheme, i, float(n)] for i, n in enumerate(result.cycle_nbars)]
            meta["fixed_point"] = result.fixed_point
            meta["recool_time"] = req.recool_time
            return TableResponse(
                columns=["scheme", "cycle", "nbar_a"], rows=rows, meta=meta
            )
        tau_star = result.timeline[0][1]
        return TableResponse(
            columns=["scheme", "tau_star_s", "final_nbar_a", "final_nbar_b"],
            rows=[[req.scheme, tau_star, result.final_nbar_a, result.final_nbar_b]],
            meta=meta,
        )

    @app.post("/force", response_model=TableResponse)
    async def force(req: ForceRequest) -> TableResponse:
        dev = req.device.to_core()
        result = protocols.force_sensitivity(dev, req.force)
        return TableResponse(
            columns=["force_N", "delta_nbar", "f_min_N", "x_sql_m"],
            rows=[[result.force, result.delta_nbar, result.f_min, result.x_sql]],
            meta=_meta(device=dev,
                       gamma_a=dev_mod.gamma_a(dev.omega, dev.q_factor),
                       x_zp=dev_mod.zero_point_length(dev.cantilever_mass, dev.omega)),
        )

    @app.post("/sweep", response_model=TableResponse)
    async def sweep(req: SweepRequest) -> TableResponse:
        if req.vary != "kappa":
            raise ConfigError(f"unsupported sweep parameter {req.vary!r} (only kappa)")
        if req.points == 1:
            kappas = np.array([req.start])
        else:
            kappas = np.linspace(req.start, req.stop, req.points)

        def point(kappa: float) -> list[float]:
            tau_star = exchange_time(kappa, req.gamma_a)
            nbar_a = float(nbar_a_analytic(
                tau_star, req.nbar_a0, req.nbar_b0, kappa, req.gamma_a))
            return [float(kappa), float(tau_star), nbar_a]

        # rows stay ordered by sweep index regardless of completion order
        with ThreadPoolExecutor(max_workers=req.jobs) as pool:
            rows = list(pool.map(point, kappas.tolist()))
        return TableResponse(
            columns=["kappa_rad_s", "tau_star_s", "nbar_a_at_tau_star"],
            rows=rows,
            meta=_meta(gamma_a=req.gamma_a, nbar_a0=req.nbar_a0,
                       nbar_b0=req.nbar_b0, points=req.points, jobs=req.jobs),
        )

    return app


app = create_app()
