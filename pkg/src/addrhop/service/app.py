"""FastAPI service wrapping the address-hopping toolkit.

Compute endpoints are stateless wrappers over the core package. The handshake
endpoints play the central-node role (authenticate peers, hand out tracking
parameters) and exist only when the app is created with a CentralNode.
"""
from __future__ import annotations

import scipy.stats
from fastapi import FastAPI, HTTPException

from .. import __version__, analysis, chaos, sim, timesync, tracking
from . import schemas


def _bad_request(exc: ValueError) -> HTTPException:
    return HTTPException(status_code=422, detail=str(exc))


def _hash_params(req: schemas.HashParamsMixin) -> chaos.HashParams:
    return chaos.HashParams(
        l=req.l,
        n=req.n,
        s0=chaos.BinaryFraction.from_hex(req.s0_hex),
        t0=chaos.BinaryFraction.from_hex(req.t0_hex),
    )


def _sim_config(req: schemas.SimBaseRequest, zeta: float, lam: float, seed: int) -> sim.SimConfig:
    return sim.SimConfig(
        zeta=zeta,
        lam=lam,
        gamma=req.gamma,
        duration=req.cycles * zeta,
        delay=req.delay.to_model(),
        subnet=tracking.SubnetSpec.parse(req.subnet),
        delta=req.delta,
        eta=req.eta,
        static_count=req.static_count,
        addr_change_lag=req.addr_change_lag,
        seed=seed,
    )


def create_app(central: sim.CentralNode | None = None) -> FastAPI:
    app = FastAPI(title="addrhop", version=__version__)
    app.state.central = central

    @app.get("/health")
    def health() -> dict:
        return {"version": __version__, "central_node": central is not None}

    @app.post("/hash", response_model=schemas.HashResponse)
    def hash_endpoint(req: schemas.HashRequest) -> schemas.HashResponse:
        try:
            params = _hash_params(req)
            if (req.timestamp is None) == (req.message_hex is None):
                raise ValueError("provide exactly one of timestamp or message_hex")
            if req.timestamp is not None:
                message = chaos.encode_timestamp(req.timestamp)
            else:
                message = bytes.fromhex(req.message_hex)
            d = chaos.digest(message, params)
        except ValueError as exc:
            raise _bad_request(exc)
        return schemas.HashResponse(
            digest_hex=f"{d.value:0{(d.width + 3) // 4}x}",
            digest_decimal=str(d.value),
            width_bits=d.width,
        )

    @app.post("/tf", response_model=schemas.TrackingResponse)
    def tf_endpoint(req: schemas.TrackingRequest) -> schemas.TrackingResponse:
        try:
            params = tracking.TFParams(
                epoch=req.epoch,
                zeta=req.zeta,
                hash=_hash_params(req),
                subnet=tracking.SubnetSpec.parse(req.subnet),
            )
            if req.count < 0:
                raise ValueError("count must be non-negative")
            x = params.host_bits
            rows = []
            if req.count:
                hids = tracking.host_id_sequence(params, req.start_timestamp, req.count)
                for i, hid in enumerate(int(v) for v in hids):
                    rows.append(
                        schemas.TrackingRow(
                            timestamp=req.start_timestamp + i,
                            host_id_binary=f"{hid:0{max(x, 1)}b}",
                            host_id=hid,
                            address=str(tracking.assemble(params.subnet, hid)),
                        )
                    )
        except ValueError as exc:
            raise _bad_request(exc)
        return schemas.TrackingResponse(host_bits=x, rows=rows)

    @app.post("/collision", response_model=schemas.CollisionResponse)
    def collision_endpoint(req: schemas.CollisionRequest) -> schemas.CollisionResponse:
        if not req.m or not req.k or not req.h:
            raise _bad_request(ValueError("m, k and h grids must be non-empty"))
        rows = []
        for m in req.m:
            for k in req.k:
                for h in req.h:
                    try:
                        sc = analysis.CollisionScenario(m=m, k=k, h=h)
                        if h + k > m:
                            rows.append(
                                schemas.CollisionRow(
                                    m=m, k=k, h=h, trials=req.trials, seed=req.seed,
                                    note="h+k exceeds m; collision certain, formula undefined",
                                )
                            )
                            continue
                        rows.append(
                            schemas.CollisionRow(
                                m=m,
                                k=k,
                                h=h,
                                p_analytic=analysis.collision_prob(sc),
                                p_mc=analysis.collision_mc(sc, req.trials, req.seed),
                                trials=req.trials,
                                seed=req.seed,
                            )
                        )
                    except ValueError as exc:
                        raise _bad_request(exc)
        return schemas.CollisionResponse(rows=rows)

    @app.post("/loss/sweep", response_model=schemas.SweepResponse)
    def sweep_endpoint(req: schemas.SweepRequest) -> schemas.SweepResponse:
        try:
            if (req.lambdas is None) == (req.couple_lambda is None):
                raise ValueError("provide exactly one of lambdas or couple_lambda")
            if not req.zetas:
                raise ValueError("zeta grid must be non-empty")
            base = _sim_config(req, zeta=min(req.zetas), lam=0.0, seed=req.seed)
            if req.couple_lambda is not None:
                scan = sim.threshold_scan(
                    base,
                    req.zetas,
                    couple=req.couple_lambda,
                    floor=req.loss_floor,
                    replications=req.replications,
                )
                return schemas.SweepResponse(
                    cells=[_cell_schema(c, req.replications) for c in scan.cells],
                    knee_zeta=scan.knee_zeta,
                )
            cells = sim.sweep(base, req.zetas, req.lambdas, req.replications)
        except ValueError as exc:
            raise _bad_request(exc)
        return schemas.SweepResponse(
            cells=[_cell_schema(c, req.replications) for c in cells], knee_zeta=None
        )

    @app.post("/loss/analytic", response_model=schemas.AnalyticLossResponse)
    def analytic_loss_endpoint(req: schemas.AnalyticLossRequest) -> schemas.AnalyticLossResponse:
        if not req.zetas or not req.lambdas:
            raise _bad_request(ValueError("zeta and lambda grids must be non-empty"))
        rows = []
        for zeta in req.zetas:
            for lam in req.lambdas:
                try:
                    loss = analysis.expected_loss(analysis.LossModel(d=req.d_model, lam=lam, zeta=zeta))
                    rows.append(
                        schemas.AnalyticLossRow(zeta=zeta, lam=lam, d_model=req.d_model, loss_analytic=loss)
                    )
                except ValueError as exc:
                    rows.append(
                        schemas.AnalyticLossRow(zeta=zeta, lam=lam, d_model=req.d_model, note=str(exc))
                    )
        return schemas.AnalyticLossResponse(rows=rows)

    @app.post("/loss/run", response_model=schemas.RunResponse)
    def run_endpoint(req: schemas.RunRequest) -> schemas.RunResponse:
        try:
            cfg = _sim_config(req, zeta=req.zeta, lam=req.lam, seed=req.seed)
            trace: list | None = [] if req.trace else None
            mets = sim.run(cfg, cn_has_bundle=req.authorized, trace_sink=trace)
        except ValueError as exc:
            raise _bad_request(exc)
        return schemas.RunResponse(
            sent=mets.sent,
            delivered=mets.delivered,
            lost_stale_address=mets.lost_stale_address,
            collision_periods=mets.collision_periods,
            loss_fraction=mets.loss_fraction,
            trace=trace,
        )

    @app.post("/autocorr", response_model=schemas.AutocorrResponse)
    def autocorr_endpoint(req: schemas.AutocorrRequest) -> schemas.AutocorrResponse:
        try:
            report = chaos.whiteness_report(
                _hash_params(req), req.x, req.count, req.max_lag, req.start_timestamp
            )
        except ValueError as exc:
            raise _bad_request(exc)
        pvalue = float(scipy.stats.chi2.sf(report.chi2_stat, report.chi2_dof))
        return schemas.AutocorrResponse(
            count=report.count,
            band=report.band,
            max_abs_autocorr=report.max_abs_autocorr,
            autocorr_pass=report.autocorr_within_band,
            autocorr=[float(v) for v in report.autocorr],
            bins=report.bins,
            chi2_stat=report.chi2_stat,
            chi2_dof=report.chi2_dof,
            chi2_pvalue=pvalue,
            chi2_pass=pvalue > 1e-3,
        )

    @app.post("/sync-check", response_model=schemas.SyncCheckResponse)
    def sync_check_endpoint(req: schemas.SyncCheckRequest) -> schemas.SyncCheckResponse:
        try:
            bound = timesync.max_eta(req.delta)
            skew = timesync.worst_skew(req.delta, req.eta)
            drifts = req.drifts if req.drifts is not None else [req.delta, -req.delta]
            clocks = [timesync.DriftClock(d) for d in drifts]
            policy = timesync.SyncPolicy.for_zeta(req.zeta, req.eta)
            agreed = timesync.agreement_check(
                clocks, policy, req.zeta, req.horizon, residual=req.residual
            )
        except ValueError as exc:
            raise _bad_request(exc)
        return schemas.SyncCheckResponse(
            eta_bound=bound, skew=skew, within_bound=skew < 1.0, agreed=agreed
        )

    @app.post("/handshake/challenge", response_model=schemas.ChallengeResponse)
    def challenge_endpoint() -> schemas.ChallengeResponse:
        node = _central(app)
        return schemas.ChallengeResponse(nonce_hex=node.challenge().hex(), server_time=node.now())

    @app.post("/handshake/redeem", response_model=schemas.BundleResponse)
    def redeem_endpoint(req: schemas.RedeemRequest) -> schemas.BundleResponse:
        node = _central(app)
        try:
            nonce = bytes.fromhex(req.nonce_hex)
            response = int(req.response_hex, 16)
        except ValueError as exc:
            raise _bad_request(exc)
        try:
            bundle = node.redeem(nonce, response)
        except sim.HandshakeError as exc:
            raise HTTPException(status_code=403, detail=str(exc))
        return schemas.BundleResponse(bundle_text=bundle.to_text(), server_time=node.now())

    return app


def _central(app: FastAPI) -> sim.CentralNode:
    node = app.state.central
    if node is None:
        raise HTTPException(status_code=503, detail="no central node configured on this service")
    return node


def _cell_schema(cell: sim.SweepCell, replications: int) -> schemas.SweepCellSchema:
    return schemas.SweepCellSchema(
        zeta=cell.zeta,
        lam=cell.lam,
        replications=replications,
        mean=cell.stats.mean,
        ci_low=cell.stats.ci_low,
        ci_high=cell.stats.ci_high,
        min=cell.stats.min,
        max=cell.stats.max,
    )
