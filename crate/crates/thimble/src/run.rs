//! Subcommand orchestration: builds the numerical parameters from the
//! configuration, runs independent cells on the rayon pool, and hands rows
//! to the emitter in a fixed order.

use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::{json, Value};
use thimble_core::flow1d::{
    flow_step, quadrature_1d, relevance_1d, Contour1D, FlowParams, RelevanceParams,
};
use thimble_core::flow2d::{
    flow_mesh, init_domain, quadrature_2d, spreading_factor, DipoleParams, TriMesh,
};
use thimble_core::necklace::{relevance_2d, NecklaceParams, RealDomain};
use thimble_core::phase::{AtiAction, Damped, HhgAction, Poly};
use thimble_core::saddle::{ati_search, find_saddles, hhg_search, SaddlePoint};
use thimble_core::saddle::{NewtonParams, TrackParams};
use thimble_core::scans::{
    caustic_cell, cusp_locator, follow_branches, ionisation_bursts, relevance_cells,
    spectrum_point, stokes_candidates, trajectory, CausticSetup, CuspParams, Leg, Method,
    SpectrumParams, SpectrumPoint, StokesParams, SwitchoverSetup,
};
use thimble_core::C64;

use crate::config::{Family, MethodChoice, Process, Resolved, RunConfig};
use crate::output::{num, Emitter};
use crate::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    Saddles,
    Flow1d,
    Flow2d,
    Necklace,
    Spectrum,
    Caustics,
    Switchover,
    Stokes,
    Cusp,
    Trajectory,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Saddles => "saddles",
            Subcommand::Flow1d => "flow1d",
            Subcommand::Flow2d => "flow2d",
            Subcommand::Necklace => "necklace",
            Subcommand::Spectrum => "spectrum",
            Subcommand::Caustics => "caustics",
            Subcommand::Switchover => "switchover",
            Subcommand::Stokes => "stokes",
            Subcommand::Cusp => "cusp",
            Subcommand::Trajectory => "trajectory",
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    r: Resolved,
    out: Emitter,
    failures: Vec<String>,
}

/// Runs one subcommand; numerical failures still write whatever was
/// computed before reporting.
pub fn run(sub: Subcommand, cfg: RunConfig, out_dir: Option<PathBuf>) -> Result<(), RunError> {
    let r = cfg.validate()?;
    let dir = out_dir.unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    let out = Emitter::new(&dir, &cfg.output.formats)?;
    let mut ctx = Ctx {
        cfg,
        r,
        out,
        failures: Vec::new(),
    };
    match sub {
        Subcommand::Saddles => saddles(&mut ctx)?,
        Subcommand::Flow1d => flow1d(&mut ctx)?,
        Subcommand::Flow2d => flow2d(&mut ctx)?,
        Subcommand::Necklace => necklace(&mut ctx)?,
        Subcommand::Spectrum => spectrum(&mut ctx)?,
        Subcommand::Caustics => caustics(&mut ctx)?,
        Subcommand::Switchover => switchover(&mut ctx)?,
        Subcommand::Stokes => stokes(&mut ctx)?,
        Subcommand::Cusp => cusp(&mut ctx)?,
        Subcommand::Trajectory => trajectories(&mut ctx)?,
    }
    let tol = tolerances(&ctx);
    ctx.out
        .manifest(sub.name(), &ctx.cfg, &ctx.r, tol, &ctx.failures)?;
    if ctx.failures.is_empty() {
        Ok(())
    } else {
        Err(RunError::Numerical(format!(
            "{} failure(s); first: {}",
            ctx.failures.len(),
            ctx.failures[0]
        )))
    }
}

fn flow_params(ctx: &Ctx, base: FlowParams) -> FlowParams {
    let f = &ctx.cfg.flow;
    FlowParams {
        delta_flow: f.delta_flow.unwrap_or(base.delta_flow),
        l_thresh: f.l_thresh.unwrap_or(base.l_thresh),
        h_thresh: f.h_thresh.unwrap_or(base.h_thresh),
        max_iter: f.max_iter.unwrap_or(base.max_iter),
        ..base
    }
}

fn dipole_params(ctx: &Ctx) -> DipoleParams {
    let w = ctx.r.omega;
    let base = match ctx.cfg.flow.l_thresh {
        Some(l) => DipoleParams::with_l_thresh(w, l),
        None => DipoleParams::for_omega(w),
    };
    DipoleParams {
        flow: flow_params(ctx, base.flow),
        diag_eps: ctx.cfg.flow.diag_eps.unwrap_or(base.diag_eps),
        ..base
    }
}

fn necklace_params(ctx: &Ctx) -> NecklaceParams {
    let base = NecklaceParams::for_omega(ctx.r.omega);
    NecklaceParams {
        epsilon: ctx.cfg.flow.epsilon_necklace.unwrap_or(base.epsilon),
        n_beads: ctx.cfg.flow.n_beads.unwrap_or(base.n_beads),
        ..base
    }
}

fn spectrum_params(ctx: &Ctx) -> SpectrumParams {
    SpectrumParams {
        necklace: necklace_params(ctx),
        dipole: dipole_params(ctx),
        ..SpectrumParams::for_omega(ctx.r.omega)
    }
}

fn tolerances(ctx: &Ctx) -> Value {
    let d = dipole_params(ctx);
    let n = necklace_params(ctx);
    json!({
        "delta_flow": d.flow.delta_flow,
        "l_thresh_2d": d.flow.l_thresh,
        "max_iter_2d": d.flow.max_iter,
        "diag_eps": d.diag_eps,
        "epsilon_necklace": n.epsilon,
        "n_beads": n.n_beads,
        "newton_tol": NewtonParams::default().tol,
    })
}

fn hhg(ctx: &Ctx, q: f64) -> HhgAction {
    HhgAction::new(ctx.r.waveform(&ctx.cfg), ctx.r.ip, q)
}

fn domain(ctx: &Ctx) -> RealDomain {
    let t = ctx.r.period();
    RealDomain::HhgStrip {
        period: t,
        max_travel: t,
    }
}

fn opt_i(n: Option<i32>) -> String {
    n.map(|v| v.to_string()).unwrap_or_default()
}

fn saddle_cols<const N: usize>(s: &SaddlePoint<N>) -> Vec<String> {
    let mut v = Vec::new();
    for z in &s.coords {
        v.push(num(z.re));
        v.push(num(z.im));
    }
    v.push(num(s.h));
    v.push(num(s.big_h));
    v
}

fn coord_header(n: usize) -> Vec<&'static str> {
    if n == 1 {
        vec!["re_t", "im_t"]
    } else {
        vec!["re_ti", "im_ti", "re_tr", "im_tr"]
    }
}

fn saddles(ctx: &mut Ctx) -> Result<(), RunError> {
    let w = ctx.r.omega;
    match ctx.cfg.target.process {
        Process::Hhg => {
            let q = ctx.cfg.scan.single_q()?;
            let phase = hhg(ctx, q);
            let s = find_saddles(&phase, &hhg_search(w));
            let np = necklace_params(ctx);
            let dom = domain(ctx);
            let rel: Vec<_> = s
                .par_iter()
                .map(|sp| relevance_2d(&phase, sp, &s, &dom, &np))
                .collect();
            let mut rows = Vec::new();
            for (k, (sp, r)) in s.iter().zip(rel).enumerate() {
                let mut row = vec![k.to_string()];
                row.extend(saddle_cols(sp));
                row.extend(sp.eigen.values.iter().map(|&x| num(x)));
                let n = match r {
                    Ok(r) => r.n_sigma,
                    Err(e) => {
                        ctx.failures.push(format!("saddle {k}: {e}"));
                        None
                    }
                };
                row.push(opt_i(n));
                rows.push(row);
            }
            let mut h = vec!["id"];
            h.extend(coord_header(2));
            h.extend(["h", "H", "xi0", "xi1", "xi2", "xi3", "n_sigma"]);
            ctx.out.csv("saddles.csv", &h, &rows)?;
        }
        Process::Ati => {
            let phase = ati(ctx);
            let s = find_saddles(&phase, &ati_search(w, 1.0));
            let rp = RelevanceParams::for_omega(w);
            let mut rows = Vec::new();
            for (k, sp) in s.iter().enumerate() {
                let mut row = vec![k.to_string()];
                row.extend(saddle_cols(sp));
                row.extend(sp.eigen.values.iter().map(|&x| num(x)));
                let n = match relevance_1d(&phase, sp, &s, &rp) {
                    Ok(n) => Some(n),
                    Err(e) => {
                        ctx.failures.push(format!("saddle {k}: {e}"));
                        None
                    }
                };
                row.push(opt_i(n));
                rows.push(row);
            }
            let mut h = vec!["id"];
            h.extend(coord_header(1));
            h.extend(["h", "H", "xi0", "xi1", "n_sigma"]);
            ctx.out.csv("saddles.csv", &h, &rows)?;
        }
    }
    Ok(())
}

fn ati(ctx: &Ctx) -> AtiAction {
    AtiAction {
        wave: ctx.r.waveform(&ctx.cfg),
        ip: ctx.r.ip,
        p: ctx.cfg.target.momentum,
    }
}

fn write_contour(
    ctx: &mut Ctx,
    c: &Contour1D,
    value: C64,
    iterations: usize,
) -> Result<(), RunError> {
    let rows: Vec<Vec<String>> = c
        .nodes
        .iter()
        .zip(&c.active)
        .enumerate()
        .map(|(k, (z, a))| vec![k.to_string(), num(z.re), num(z.im), (*a as u8).to_string()])
        .collect();
    ctx.out
        .csv("contour.csv", &["node", "re", "im", "active"], &rows)?;
    ctx.out.json(
        "flow1d.json",
        &json!({ "value": [value.re, value.im], "iterations": iterations, "nodes": c.nodes.len(), "active": c.active_count() }),
    )
}

fn flow1d(ctx: &mut Ctx) -> Result<(), RunError> {
    if let Some(toy) = ctx.cfg.toy.clone() {
        let phase = Poly::real(&toy.coeffs);
        let p = flow_params(
            ctx,
            FlowParams {
                max_iter: toy.iterations,
                ..toy_flow()
            },
        );
        let mut c = Contour1D::segment(toy.range[0], toy.range[1], toy.nodes);
        let mut done = 0;
        for _ in 0..p.max_iter {
            if let Err(e) = flow_step(&phase, &mut c, &p) {
                ctx.failures.push(format!("{e}"));
                break;
            }
            done += 1;
        }
        let v = quadrature_1d(&phase, &c, |_| C64::new(1.0, 0.0));
        return write_contour(ctx, &c, v, done);
    }
    let w = ctx.r.omega;
    let t = ctx.r.period();
    let half = ctx.cfg.scan.window_cycles.unwrap_or(2.2) * t;
    // the Gaussian window reaches e^{-30} at 1/1.1 of the half-width
    let eps = 30.0 / (half / 1.1).powi(2);
    let phase = Damped {
        inner: ati(ctx),
        eps,
        centre: 0.0,
    };
    let p = flow_params(
        ctx,
        FlowParams {
            l_thresh: 0.02 / w,
            max_iter: 300,
            ..FlowParams::for_omega(w)
        },
    );
    let mut c = Contour1D::segment(-half, half, 2000);
    let mut done = 0;
    for _ in 0..p.max_iter {
        if let Err(e) = flow_step(&phase, &mut c, &p) {
            ctx.failures.push(format!("{e}"));
            break;
        }
        done += 1;
    }
    let v = quadrature_1d(&phase, &c, |_| C64::new(1.0, 0.0));
    write_contour(ctx, &c, v, done)
}

/// Flow parameters for dimensionless toy phases.
pub fn toy_flow() -> FlowParams {
    FlowParams {
        delta_flow: 1e-2,
        l_thresh: 0.02,
        h_thresh: -30.0,
        max_iter: 300,
        max_step: 0.05,
        bound: 1e4,
        converge_tol: 1e-12,
    }
}

fn mesh_rows(m: &TriMesh) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let v = m
        .vertices
        .iter()
        .zip(&m.active)
        .enumerate()
        .map(|(k, (z, a))| {
            vec![
                k.to_string(),
                num(z[0].re),
                num(z[0].im),
                num(z[1].re),
                num(z[1].im),
                (*a as u8).to_string(),
            ]
        })
        .collect();
    let t = m
        .triangles
        .iter()
        .map(|t| t.iter().map(|x| x.to_string()).collect())
        .collect();
    (v, t)
}

fn flow2d(ctx: &mut Ctx) -> Result<(), RunError> {
    let q = ctx.cfg.scan.single_q()?;
    let phase = hhg(ctx, q);
    let d = dipole_params(ctx);
    let mesh = init_domain(ctx.r.omega, d.resolution, d.max_travel_cycles, d.diag_eps);
    match flow_mesh(&phase, mesh, &d.flow) {
        Ok(m) => {
            let res = quadrature_2d(
                &phase,
                &m,
                |z| spreading_factor(z, d.diag_eps),
                q * ctx.r.omega,
            );
            let (v, t) = mesh_rows(&m);
            ctx.out.csv(
                "mesh_vertices.csv",
                &["vertex", "re_ti", "im_ti", "re_tr", "im_tr", "active"],
                &v,
            )?;
            ctx.out.csv("mesh_triangles.csv", &["a", "b", "c"], &t)?;
            let comps: Vec<Value> = res
                .per_component
                .iter()
                .map(|c| {
                    json!({ "id": c.id, "value": [c.value.re, c.value.im],
                            "peak": [c.peak[0].re, c.peak[0].im, c.peak[1].re, c.peak[1].im] })
                })
                .collect();
            ctx.out.json(
                "flow2d.json",
                &json!({ "q": q, "value": [res.value.re, res.value.im], "intensity": res.intensity,
                         "iterations": m.iteration, "components": comps }),
            )?;
        }
        Err(e) => ctx.failures.push(format!("flow: {e}")),
    }
    Ok(())
}

fn necklace(ctx: &mut Ctx) -> Result<(), RunError> {
    let q = ctx.cfg.scan.single_q()?;
    let phase = hhg(ctx, q);
    let s = find_saddles(&phase, &hhg_search(ctx.r.omega));
    let np = necklace_params(ctx);
    let dom = domain(ctx);
    let rel: Vec<_> = s
        .par_iter()
        .map(|sp| relevance_2d(&phase, sp, &s, &dom, &np))
        .collect();
    let mut beads = Vec::new();
    let mut rows = Vec::new();
    for (k, (sp, r)) in s.iter().zip(rel).enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(saddle_cols(sp));
        match r {
            Ok(r) => {
                if let Some(n) = &r.necklace {
                    for (b, z) in n.beads.iter().enumerate() {
                        beads.push(vec![
                            k.to_string(),
                            b.to_string(),
                            num(z[0].re),
                            num(z[0].im),
                            num(z[1].re),
                            num(z[1].im),
                            (n.converged[b] as u8).to_string(),
                        ]);
                    }
                }
                row.push(opt_i(r.n_sigma));
                row.push((r.shortcut as u8).to_string());
                row.push(format!("{:?}", r.flags));
            }
            Err(e) => {
                ctx.failures.push(format!("saddle {k}: {e}"));
                row.extend([String::new(), String::new(), format!("{e}")]);
            }
        }
        rows.push(row);
    }
    let mut h = vec!["id"];
    h.extend(coord_header(2));
    h.extend(["h", "H", "n_sigma", "shortcut", "flags"]);
    ctx.out.csv("relevance.csv", &h, &rows)?;
    ctx.out.csv(
        "necklace_beads.csv",
        &[
            "saddle",
            "bead",
            "re_ti",
            "im_ti",
            "re_tr",
            "im_tr",
            "converged",
        ],
        &beads,
    )
}

fn method(ctx: &Ctx) -> Method {
    match ctx.cfg.scan.method {
        MethodChoice::Spm => Method::Spm,
        MethodChoice::Plf => Method::Plf,
        MethodChoice::Both => Method::Both,
    }
}

fn opt_f(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn spectrum(ctx: &mut Ctx) -> Result<(), RunError> {
    let qs = ctx.cfg.scan.q_values()?;
    let wave = ctx.r.waveform(&ctx.cfg);
    let ip = ctx.r.ip;
    let m = method(ctx);
    let sp = spectrum_params(ctx);
    let points: Vec<SpectrumPoint> = qs
        .par_iter()
        .map(|&q| spectrum_point(&wave, ip, q, m, &sp))
        .collect();
    let branches = follow_branches(&points);
    let mut rows = Vec::new();
    let mut long_rows = Vec::new();
    for (p, br) in points.iter().zip(&branches) {
        for e in &p.errors {
            ctx.failures.push(format!("q={}: {e}", p.q));
        }
        let mut row = vec![
            num(p.q),
            opt_f(p.intensity_spm()),
            opt_f(p.intensity_plf()),
            opt_f(p.half_intensity_spm()),
            opt_f(p.half_intensity_plf()),
        ];
        for b in br {
            match b.map(|k| &p.saddles[k]) {
                Some(t) => {
                    let c = t.contribution.unwrap_or(C64::new(f64::NAN, f64::NAN));
                    row.extend([num(c.re), num(c.im), opt_i(t.n_sigma)]);
                }
                None => row.extend([String::new(), String::new(), String::new()]),
            }
        }
        rows.push(row);
        for (k, t) in p.saddles.iter().enumerate() {
            let branch = if br[0] == Some(k) {
                "short"
            } else if br[1] == Some(k) {
                "long"
            } else {
                ""
            };
            let c = t.contribution.unwrap_or(C64::new(f64::NAN, f64::NAN));
            long_rows.push(vec![
                num(p.q),
                k.to_string(),
                num(t.coords[0].re),
                num(t.coords[0].im),
                num(t.coords[1].re),
                num(t.coords[1].im),
                num(t.h),
                num(t.big_h),
                num(c.re),
                num(c.im),
                opt_i(t.n_sigma),
                t.window_label.clone().unwrap_or_default(),
                (t.first_half as u8).to_string(),
                branch.to_string(),
            ]);
        }
    }
    ctx.out.csv(
        "spectrum.csv",
        &[
            "q",
            "intensity_spm",
            "intensity_plf",
            "half_intensity_spm",
            "half_intensity_plf",
            "short_re",
            "short_im",
            "short_n_sigma",
            "long_re",
            "long_im",
            "long_n_sigma",
        ],
        &rows,
    )?;
    ctx.out.csv(
        "spectrum_saddles.csv",
        &[
            "q",
            "saddle_id",
            "re_ti",
            "im_ti",
            "re_tr",
            "im_tr",
            "h",
            "H",
            "re_contribution",
            "im_contribution",
            "n_sigma",
            "window",
            "first_half",
            "branch",
        ],
        &long_rows,
    )
}

fn caustics(ctx: &mut Ctx) -> Result<(), RunError> {
    if ctx.cfg.field.family != Family::TwoColour {
        return Err(RunError::Config(
            "caustics needs the two_colour field".into(),
        ));
    }
    let qs = ctx.cfg.scan.q_values()?;
    let phases = ctx.cfg.scan.phase_values()?;
    let setup = CausticSetup {
        e1: ctx.r.e0,
        ratio: ctx.r.ratio,
        omega: ctx.r.omega,
        ip: ctx.r.ip,
    };
    let d = dipole_params(ctx);
    let jobs: Vec<(f64, f64)> = qs
        .iter()
        .flat_map(|&q| phases.iter().map(move |&p| (q, p)))
        .collect();
    let cells: Vec<_> = jobs
        .par_iter()
        .map(|&(q, p)| caustic_cell(&setup, q, p, &d))
        .collect();
    let grid = thimble_core::scans::ScanGrid {
        xs: qs,
        ys: phases,
        cells,
    };
    let mut rows = Vec::new();
    for c in &grid.cells {
        match &c.intensity {
            Ok(v) => rows.push(vec![num(c.x), num(c.y), num(*v), String::new()]),
            Err(e) => {
                ctx.failures.push(format!("q={} phase2={}: {e}", c.x, c.y));
                rows.push(vec![num(c.x), num(c.y), String::new(), e.clone()]);
            }
        }
    }
    ctx.out.csv(
        "caustics.csv",
        &["q", "phase2", "intensity", "error"],
        &rows,
    )?;
    let peak = grid
        .peak()
        .map(|c| json!({ "q": c.x, "phase2": c.y, "intensity": c.intensity.as_ref().ok() }));
    let median = grid.median();
    let enhancement = match (
        grid.peak().and_then(|c| c.intensity.as_ref().ok().copied()),
        median,
    ) {
        (Some(p), Some(m)) if m > 0.0 => Some(p / m),
        _ => None,
    };
    ctx.out.json(
        "caustics.json",
        &json!({ "peak": peak, "median": median, "enhancement": enhancement }),
    )
}

fn switchover(ctx: &mut Ctx) -> Result<(), RunError> {
    if ctx.cfg.field.family != Family::Switchover {
        return Err(RunError::Config(
            "switchover needs the switchover field".into(),
        ));
    }
    let thetas = ctx.cfg.scan.theta_values()?;
    let qs = ctx.cfg.scan.q_values()?;
    let sp = spectrum_params(ctx);
    let ip = ctx.r.ip;
    let jobs: Vec<(f64, f64)> = thetas
        .iter()
        .flat_map(|&t| qs.iter().map(move |&q| (t, q)))
        .collect();
    let waves: Vec<_> = jobs
        .iter()
        .map(|&(t, _)| ctx.r.waveform_at(&ctx.cfg, t, ctx.cfg.field.phase2))
        .collect();
    let points: Vec<SpectrumPoint> = jobs
        .par_iter()
        .zip(&waves)
        .map(|(&(_, q), w)| spectrum_point(w, ip, q, Method::Spm, &sp))
        .collect();
    let gap = ctx.cfg.scan.burst_gap.unwrap_or(0.5);
    let mut map = Vec::new();
    let mut spec = Vec::new();
    let mut bursts = Vec::new();
    for (ti, &theta) in thetas.iter().enumerate() {
        let slice = &points[ti * qs.len()..(ti + 1) * qs.len()];
        for p in slice {
            for e in &p.errors {
                ctx.failures.push(format!("theta={theta} q={}: {e}", p.q));
            }
            spec.push(vec![num(theta), num(p.q), opt_f(p.intensity_spm())]);
            for c in relevance_cells(theta, p) {
                map.push(vec![
                    num(c.theta_deg),
                    num(c.q),
                    c.saddle_id.to_string(),
                    opt_i(c.n_sigma),
                    num(c.coords[0].re),
                    num(c.coords[0].im),
                    num(c.coords[1].re),
                    num(c.coords[1].im),
                ]);
            }
        }
        let b: Vec<Value> = ionisation_bursts(slice, gap)
            .iter()
            .map(|b| json!({ "centre": b.centre, "first": b.spread.0, "last": b.spread.1, "count": b.count }))
            .collect();
        bursts.push(json!({ "theta_deg": theta, "bursts": b }));
    }
    ctx.out.csv(
        "relevance_map.csv",
        &[
            "theta",
            "q",
            "saddle_id",
            "n_sigma",
            "re_ti",
            "im_ti",
            "re_tr",
            "im_tr",
        ],
        &map,
    )?;
    ctx.out.csv(
        "switchover_spectra.csv",
        &["theta", "q", "intensity_spm"],
        &spec,
    )?;
    ctx.out
        .json("bursts.json", &json!({ "gap": gap, "angles": bursts }))
}

fn stokes(ctx: &mut Ctx) -> Result<(), RunError> {
    let qs = ctx.cfg.scan.q_values()?;
    let wave = ctx.r.waveform(&ctx.cfg);
    let ip = ctx.r.ip;
    let mut sp = spectrum_params(ctx);
    // branch identification only needs positions, not relevance
    sp.necklace.h_tol = f64::NEG_INFINITY;
    let first = spectrum_point(&wave, ip, qs[0], Method::Spm, &sp);
    let br = follow_branches(std::slice::from_ref(&first))[0];
    let (Some(a), Some(b)) = (br[0], br[1]) else {
        ctx.failures
            .push(format!("no short/long pair at q={}", qs[0]));
        return Ok(());
    };
    let family = |q: f64| HhgAction::new(wave, ip, q);
    let phase0 = family(qs[0]);
    let starts: Vec<SaddlePoint<2>> = [a, b]
        .iter()
        .filter_map(|&k| SaddlePoint::at(&phase0, first.saddles[k].coords).ok())
        .collect();
    let params = stokes_params(ctx.r.omega);
    let mut rows = Vec::new();
    match stokes_candidates(family, &starts, &qs, &params) {
        Ok(scan) => {
            for c in &scan.candidates {
                rows.push(vec![
                    num(c.param),
                    "short".into(),
                    "long".into(),
                    num(c.residual),
                    num(c.coords[0][0].re),
                    num(c.coords[0][0].im),
                    num(c.coords[1][0].re),
                    num(c.coords[1][0].im),
                ]);
            }
            ctx.out.json(
                "stokes.json",
                &json!({ "roots": scan.candidates.iter().map(|c| c.param).collect::<Vec<_>>(),
                                                  "degenerate_pairs": scan.degenerate.len() }),
            )?;
        }
        Err(e) => ctx.failures.push(format!("{e}")),
    }
    ctx.out.csv(
        "stokes.csv",
        &[
            "q", "saddle_a", "saddle_b", "residual", "re_ti_a", "im_ti_a", "re_ti_b", "im_ti_b",
        ],
        &rows,
    )
}

/// Tracking and bisection settings for harmonic-order scans.
pub fn stokes_params(omega: f64) -> StokesParams {
    StokesParams {
        track: TrackParams {
            newton: NewtonParams::default(),
            jump_tol: 0.3 / omega,
            max_bisect: 12,
        },
        root_tol: 1e-9,
        param_tol: 1e-9,
        max_bisect: 80,
    }
}

fn cusp(ctx: &mut Ctx) -> Result<(), RunError> {
    if ctx.cfg.field.family != Family::Switchover {
        return Err(RunError::Config("cusp needs the switchover field".into()));
    }
    let th = ctx
        .cfg
        .scan
        .seed_theta_deg
        .ok_or_else(|| RunError::Config("cusp needs `scan.seed_theta_deg`".into()))?;
    let q = ctx
        .cfg
        .scan
        .seed_q
        .ok_or_else(|| RunError::Config("cusp needs `scan.seed_q`".into()))?;
    let setup = SwitchoverSetup {
        e0: ctx.r.e0,
        omega: ctx.r.omega,
        ip: ctx.r.ip,
        phase2: ctx.cfg.field.phase2,
    };
    let (seed, diameter) = tightest_triple(&setup, th, q);
    let Some(seed) = seed else {
        ctx.failures
            .push("fewer than three saddles on the real slice".into());
        return Ok(());
    };
    let cp = CuspParams::for_scale(1.0 / ctx.r.omega);
    let th0 = C64::new(th.to_radians(), 0.0);
    match cusp_locator(
        |t, qq| setup.action(t, qq),
        seed,
        [th0, C64::new(q, 0.0)],
        &cp,
    ) {
        Ok(c) => {
            let deg = c.params[0] * (180.0 / core::f64::consts::PI);
            ctx.out.json(
                "cusp.json",
                &json!({
                    "seed": { "theta_deg": th, "q": q, "triple_diameter": diameter },
                    "theta_deg": [deg.re, deg.im],
                    "q": [c.params[1].re, c.params[1].im],
                    "ti": [c.z[0].re, c.z[0].im],
                    "tr": [c.z[1].re, c.z[1].im],
                    "residuals": { "gradient": c.residuals[0], "det_hessian": c.residuals[1], "third_derivative": c.residuals[2] },
                    "iterations": c.iterations,
                }),
            )?;
        }
        Err(e) => ctx.failures.push(format!("{e}")),
    }
    Ok(())
}

/// Centroid and diameter of the three mutually closest saddles at a real
/// `(θ, q)`.
pub fn tightest_triple(setup: &SwitchoverSetup, theta_deg: f64, q: f64) -> (Option<[C64; 2]>, f64) {
    let a = setup.action(C64::new(theta_deg.to_radians(), 0.0), C64::new(q, 0.0));
    let s = find_saddles(&a, &hhg_search(setup.omega));
    let n = s.len();
    let mut best: Option<(f64, [usize; 3])> = None;
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let d = s[i]
                    .distance(&s[j].coords)
                    .max(s[i].distance(&s[k].coords))
                    .max(s[j].distance(&s[k].coords));
                if best.is_none_or(|b| d < b.0) {
                    best = Some((d, [i, j, k]));
                }
            }
        }
    }
    match best {
        Some((d, idx)) => {
            let c: [C64; 2] =
                core::array::from_fn(|m| idx.iter().map(|&i| s[i].coords[m]).sum::<C64>() / 3.0);
            (Some(c), d)
        }
        None => (None, f64::INFINITY),
    }
}

fn trajectories(ctx: &mut Ctx) -> Result<(), RunError> {
    let q = ctx.cfg.scan.single_q()?;
    let phase = hhg(ctx, q);
    let s = find_saddles(&phase, &hhg_search(ctx.r.omega));
    let np = necklace_params(ctx);
    let dom = domain(ctx);
    let n_samples = ctx.cfg.scan.trajectory_samples.unwrap_or(200);
    let rel: Vec<_> = s
        .par_iter()
        .map(|sp| relevance_2d(&phase, sp, &s, &dom, &np).map(|r| r.n_sigma))
        .collect();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (k, (sp, r)) in s.iter().zip(rel).enumerate() {
        if sp.h > 0.0 {
            continue;
        }
        let n = r.unwrap_or(None);
        match trajectory(&phase, sp.coords, n_samples) {
            Ok(t) => {
                for x in &t.samples {
                    let leg = match x.leg {
                        Leg::Descent => "descent",
                        Leg::Real => "real",
                        Leg::Return => "return",
                    };
                    let (er, ei) = x.energy.map(|e| (num(e.re), num(e.im))).unwrap_or_default();
                    rows.push(vec![
                        k.to_string(),
                        opt_i(n),
                        leg.into(),
                        num(x.t.re),
                        num(x.t.im),
                        num(x.x.re),
                        num(x.x.im),
                        er,
                        ei,
                    ]);
                }
                summary.push(json!({ "saddle": k, "n_sigma": n, "closure": t.closure,
                                     "momentum": [t.momentum.re, t.momentum.im] }));
            }
            Err(e) => ctx.failures.push(format!("saddle {k}: {e}")),
        }
    }
    ctx.out.csv(
        "trajectory.csv",
        &[
            "saddle",
            "n_sigma",
            "leg",
            "re_t",
            "im_t",
            "re_x",
            "im_x",
            "re_energy",
            "im_energy",
        ],
        &rows,
    )?;
    ctx.out
        .json("trajectory.json", &json!({ "q": q, "orbits": summary }))
}
