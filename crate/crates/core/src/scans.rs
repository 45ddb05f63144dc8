//! Parameter sweeps: harmonic spectra by saddle sums and by flowed
//! quadrature, two-colour intensity grids, Stokes roots along saddle tracks,
//! colour-switchover relevance maps, quantum-orbit trajectories and the
//! cusp locator.
//!
//! Everything here is sequential; callers that want parallelism run the
//! per-point functions on their own worker pool.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::field::{switchover_waveform, LaserField, Waveform};
use crate::flow2d::{hhg_dipole, spreading_factor, DipoleParams};
use crate::necklace::{relevance_2d, NecklaceFlag, NecklaceParams, RealDomain};
use crate::phase::{HhgAction, Phase, PhaseError};
use crate::saddle::{
    find_saddles, hhg_search, label_windows, spm_contribution, track_saddle, SaddleError,
    SaddlePoint, SearchSpec, TrackParams,
};
#[allow(unused_imports)]
use num_traits::Float;

use crate::{wrap, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Spm,
    Plf,
    Both,
}

impl Method {
    fn spm(self) -> bool {
        matches!(self, Method::Spm | Method::Both)
    }
    fn plf(self) -> bool {
        matches!(self, Method::Plf | Method::Both)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumParams {
    pub search: SearchSpec<2>,
    pub necklace: NecklaceParams,
    pub dipole: DipoleParams,
    pub domain: RealDomain,
    /// Start of the half-cycle window `[origin, origin + T/2)` in `Re ti`.
    pub half_origin: f64,
    /// Gap in `Re ti` that separates window labels.
    pub label_gap: f64,
}

impl SpectrumParams {
    pub fn for_omega(omega: f64) -> Self {
        let t = 2.0 * PI / omega;
        SpectrumParams {
            search: hhg_search(omega),
            necklace: NecklaceParams::for_omega(omega),
            dipole: DipoleParams::for_omega(omega),
            domain: RealDomain::HhgStrip {
                period: t,
                max_travel: t,
            },
            half_origin: 0.0,
            label_gap: 0.6 / omega,
        }
    }

    fn period_from_domain(&self) -> f64 {
        match self.domain {
            RealDomain::HhgStrip { period, .. } => period,
            RealDomain::Plane => f64::INFINITY,
        }
    }
}

/// One saddle's share of the spectrum at a single order.
#[derive(Clone, Debug, PartialEq)]
pub struct SaddleTerm {
    pub coords: [C64; 2],
    pub h: f64,
    pub big_h: f64,
    /// Gaussian contribution; `None` at a degenerate saddle.
    pub contribution: Option<C64>,
    /// `None` when the necklace was inconclusive.
    pub n_sigma: Option<i32>,
    pub flags: Vec<NecklaceFlag>,
    pub window_label: Option<String>,
    /// `Re ti` lies in the first half-cycle window.
    pub first_half: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumPoint {
    pub q: f64,
    pub omega: f64,
    /// Sum of the contributions of saddles with `nσ = 1`.
    pub spm: Option<C64>,
    /// Same, restricted to the first half-cycle.
    pub spm_half: Option<C64>,
    pub plf: Option<C64>,
    pub plf_half: Option<C64>,
    pub saddles: Vec<SaddleTerm>,
    pub errors: Vec<String>,
}

impl SpectrumPoint {
    fn weight(&self) -> f64 {
        let w = self.q * self.omega;
        w * w
    }
    pub fn intensity_spm(&self) -> Option<f64> {
        self.spm.map(|v| self.weight() * v.norm_sqr())
    }
    pub fn intensity_plf(&self) -> Option<f64> {
        self.plf.map(|v| self.weight() * v.norm_sqr())
    }
    pub fn half_intensity_spm(&self) -> Option<f64> {
        self.spm_half.map(|v| self.weight() * v.norm_sqr())
    }
    pub fn half_intensity_plf(&self) -> Option<f64> {
        self.plf_half.map(|v| self.weight() * v.norm_sqr())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub points: Vec<SpectrumPoint>,
}

fn in_first_half(ti: C64, origin: f64, period: f64) -> bool {
    if !period.is_finite() {
        return true;
    }
    wrap(ti.re - origin, period) < 0.5 * period
}

/// Saddles of `phase`, their relevance and Gaussian contributions.
pub fn saddle_terms(phase: &HhgAction, params: &SpectrumParams) -> (Vec<SaddleTerm>, Vec<String>) {
    let mut saddles = find_saddles(phase, &params.search);
    let period = params.period_from_domain();
    if period.is_finite() {
        label_windows(&mut saddles, period, params.label_gap);
    }
    let mut errors = Vec::new();
    let diag = params.dipole.diag_eps;
    let terms = saddles
        .iter()
        .map(|sp| {
            let contribution = match spm_contribution(phase, sp, |z| spreading_factor(z, diag)) {
                Ok(c) => Some(c),
                Err(e) => {
                    errors.push(format!("saddle {:?}: {e}", sp.coords));
                    None
                }
            };
            let (n_sigma, flags) =
                match relevance_2d(phase, sp, &saddles, &params.domain, &params.necklace) {
                    Ok(r) => (r.n_sigma, r.flags),
                    Err(e) => {
                        errors.push(format!("saddle {:?}: {e}", sp.coords));
                        (None, Vec::new())
                    }
                };
            SaddleTerm {
                coords: sp.coords,
                h: sp.h,
                big_h: sp.big_h,
                contribution,
                n_sigma,
                flags,
                window_label: sp.window_label.clone(),
                first_half: in_first_half(sp.coords[0], params.half_origin, period),
            }
        })
        .collect();
    (terms, errors)
}

/// Spectrum at a single order.
pub fn spectrum_point(
    wave: &Waveform,
    ip: f64,
    q: f64,
    method: Method,
    params: &SpectrumParams,
) -> SpectrumPoint {
    let phase = HhgAction::new(*wave, ip, q);
    let mut out = SpectrumPoint {
        q,
        omega: wave.omega,
        spm: None,
        spm_half: None,
        plf: None,
        plf_half: None,
        saddles: Vec::new(),
        errors: Vec::new(),
    };
    if method.spm() {
        let (terms, errors) = saddle_terms(&phase, params);
        let mut total = ZERO;
        let mut half = ZERO;
        for t in &terms {
            if let (Some(1), Some(c)) = (t.n_sigma, t.contribution) {
                total += c;
                if t.first_half {
                    half += c;
                }
            }
        }
        out.spm = Some(total);
        out.spm_half = Some(half);
        out.saddles = terms;
        out.errors.extend(errors);
    }
    if method.plf() {
        match hhg_dipole(&phase, &params.dipole) {
            Ok(d) => {
                let period = params.period_from_domain();
                let half = d
                    .per_component
                    .iter()
                    .filter(|c| in_first_half(c.peak[0], params.half_origin, period))
                    .map(|c| c.value)
                    .sum();
                out.plf = Some(d.value);
                out.plf_half = Some(half);
            }
            Err(e) => out.errors.push(format!("flow: {e}")),
        }
    }
    out
}

pub fn spectrum(
    wave: &Waveform,
    ip: f64,
    qs: &[f64],
    method: Method,
    params: &SpectrumParams,
) -> Spectrum {
    Spectrum {
        points: qs
            .iter()
            .map(|&q| spectrum_point(wave, ip, q, method, params))
            .collect(),
    }
}

/// Short and long orbit of the first half-cycle at every point of a scan
/// sorted by `q`: identified by travel time at the first point, then
/// followed by nearest position so that branch identity survives the
/// cutoff, where the travel-time order swaps.
pub fn follow_branches(points: &[SpectrumPoint]) -> Vec<[Option<usize>; 2]> {
    let candidates = |p: &SpectrumPoint| -> Vec<usize> {
        (0..p.saddles.len())
            .filter(|&k| p.saddles[k].first_half && p.saddles[k].h <= 0.0)
            .collect()
    };
    let mut out = Vec::with_capacity(points.len());
    let mut prev: [Option<[C64; 2]>; 2] = [None, None];
    for p in points {
        let cand = candidates(p);
        let mut pick = [None, None];
        if prev[0].is_none() && prev[1].is_none() {
            let mut by_tau: Vec<usize> = cand.clone();
            let tau = |k: usize| (p.saddles[k].coords[1] - p.saddles[k].coords[0]).re;
            by_tau.sort_by(|&a, &b| tau(a).total_cmp(&tau(b)));
            pick = [by_tau.first().copied(), by_tau.get(1).copied()];
        } else {
            for b in 0..2 {
                let Some(z) = prev[b] else { continue };
                pick[b] = cand
                    .iter()
                    .copied()
                    .filter(|&k| Some(k) != pick[0])
                    .min_by(|&x, &y| {
                        dist2(&p.saddles[x].coords, &z).total_cmp(&dist2(&p.saddles[y].coords, &z))
                    });
            }
        }
        for b in 0..2 {
            if let Some(k) = pick[b] {
                prev[b] = Some(p.saddles[k].coords);
            }
        }
        out.push(pick);
    }
    out
}

fn dist2(a: &[C64; 2], b: &[C64; 2]) -> f64 {
    (a[0] - b[0]).norm_sqr() + (a[1] - b[1]).norm_sqr()
}

/// `n` evenly spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridCell {
    pub x: f64,
    pub y: f64,
    pub intensity: Result<f64, String>,
}

/// Intensities on a rectangular grid, `x` outer and `y` inner.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub cells: Vec<GridCell>,
}

impl ScanGrid {
    pub fn peak(&self) -> Option<&GridCell> {
        self.cells
            .iter()
            .filter(|c| c.intensity.is_ok())
            .max_by(|a, b| {
                a.intensity
                    .as_ref()
                    .unwrap()
                    .total_cmp(b.intensity.as_ref().unwrap())
            })
    }

    pub fn median(&self) -> Option<f64> {
        let mut v: Vec<f64> = self
            .cells
            .iter()
            .filter_map(|c| c.intensity.as_ref().ok().copied())
            .collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Some(if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        })
    }
}

/// Two-colour field `E1 cos ωt + ratio·E1 cos(2ωt + φ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CausticSetup {
    pub e1: f64,
    pub ratio: f64,
    pub omega: f64,
    pub ip: f64,
}

/// Flowed-quadrature intensity at one `(q, φ)`.
pub fn caustic_cell(setup: &CausticSetup, q: f64, phase2: f64, dipole: &DipoleParams) -> GridCell {
    let wave = LaserField::two_colour_cos(setup.e1, setup.ratio * setup.e1, setup.omega, phase2)
        .waveform();
    let phase = HhgAction::new(wave, setup.ip, q);
    let intensity = hhg_dipole(&phase, dipole)
        .map(|d| d.intensity)
        .map_err(|e| format!("{e}"));
    GridCell {
        x: q,
        y: phase2,
        intensity,
    }
}

pub fn caustic_grid(
    setup: &CausticSetup,
    qs: &[f64],
    phases: &[f64],
    dipole: &DipoleParams,
) -> ScanGrid {
    let mut cells = Vec::with_capacity(qs.len() * phases.len());
    for &q in qs {
        for &p in phases {
            cells.push(caustic_cell(setup, q, p, dipole));
        }
    }
    ScanGrid {
        xs: qs.to_vec(),
        ys: phases.to_vec(),
        cells,
    }
}

/// Root of `H(σ1) − H(σ2)` along a parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StokesCandidate {
    pub param: f64,
    /// Indices of the two tracked saddles.
    pub pair: (usize, usize),
    pub residual: f64,
    /// Saddle positions at the root.
    pub coords: [[C64; 2]; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct StokesScan {
    pub candidates: Vec<StokesCandidate>,
    /// Pairs whose `H` agree along the whole path.
    pub degenerate: Vec<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StokesParams {
    pub track: TrackParams,
    /// Requested `|ΔH|` at a reported root.
    pub root_tol: f64,
    /// Bisection stops once the bracket is this narrow.
    pub param_tol: f64,
    pub max_bisect: usize,
}

/// Tracks every start saddle along `path` and bisects each sign change of
/// the pairwise `ΔH`.
pub fn stokes_candidates<P: Phase<2>>(
    family: impl Fn(f64) -> P,
    starts: &[SaddlePoint<2>],
    path: &[f64],
    params: &StokesParams,
) -> Result<StokesScan, SaddleError> {
    let tracks = starts
        .iter()
        .map(|s| track_saddle(&family, s, path, &params.track))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = StokesScan {
        candidates: Vec::new(),
        degenerate: Vec::new(),
    };
    for i in 0..tracks.len() {
        for j in (i + 1)..tracks.len() {
            let dh: Vec<f64> = tracks[i]
                .points
                .iter()
                .zip(&tracks[j].points)
                .map(|(a, b)| a.big_h - b.big_h)
                .collect();
            if dh.iter().all(|d| d.abs() < params.root_tol) {
                out.degenerate.push((i, j));
                continue;
            }
            for k in 0..dh.len().saturating_sub(1) {
                if dh[k] == 0.0 || dh[k].signum() != dh[k + 1].signum() {
                    let seeds = [&tracks[i].points[k], &tracks[j].points[k]];
                    let c = bisect_pair(&family, seeds, (path[k], path[k + 1]), dh[k], params)?;
                    out.candidates.push(StokesCandidate { pair: (i, j), ..c });
                }
            }
        }
    }
    out.candidates.sort_by(|a, b| a.param.total_cmp(&b.param));
    Ok(out)
}

fn bisect_pair<P: Phase<2>>(
    family: &impl Fn(f64) -> P,
    seeds: [&SaddlePoint<2>; 2],
    bracket: (f64, f64),
    dh_lo: f64,
    params: &StokesParams,
) -> Result<StokesCandidate, SaddleError> {
    let (mut lo, mut hi) = bracket;
    let at = |p: f64| -> Result<[SaddlePoint<2>; 2], SaddleError> {
        let a = track_saddle(family, seeds[0], &[bracket.0, p], &params.track)?;
        let b = track_saddle(family, seeds[1], &[bracket.0, p], &params.track)?;
        Ok([
            a.points[a.points.len() - 1].clone(),
            b.points[b.points.len() - 1].clone(),
        ])
    };
    let mut mid = 0.5 * (lo + hi);
    let mut pts = at(mid)?;
    for _ in 0..params.max_bisect {
        let d = pts[0].big_h - pts[1].big_h;
        if d.abs() < params.root_tol && hi - lo < params.param_tol {
            break;
        }
        if d.signum() == dh_lo.signum() && d != 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
        pts = at(mid)?;
    }
    Ok(StokesCandidate {
        param: mid,
        pair: (0, 1),
        residual: (pts[0].big_h - pts[1].big_h).abs(),
        coords: [pts[0].coords, pts[1].coords],
    })
}

/// Switchover driver: `E0 cos θ sin ωt + 2 E0 sin θ sin(2ωt + φ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwitchoverSetup {
    pub e0: f64,
    pub omega: f64,
    pub ip: f64,
    pub phase2: f64,
}

impl SwitchoverSetup {
    pub fn waveform(&self, theta_deg: f64) -> Waveform {
        switchover_waveform(
            C64::new(theta_deg.to_radians(), 0.0),
            self.e0,
            self.omega,
            self.phase2,
        )
    }

    /// Action with complex mixing angle (radians) and complex order.
    pub fn action(&self, theta: C64, q: C64) -> HhgAction {
        let mut a = HhgAction::new(
            switchover_waveform(theta, self.e0, self.omega, self.phase2),
            self.ip,
            0.0,
        );
        a.q = q;
        a
    }
}

/// One row of a relevance map.
#[derive(Clone, Debug, PartialEq)]
pub struct RelevanceCell {
    pub theta_deg: f64,
    pub q: f64,
    /// Position of the saddle in the per-cell list (sorted by `Re ti`).
    pub saddle_id: usize,
    pub coords: [C64; 2],
    pub n_sigma: Option<i32>,
    pub contribution: Option<C64>,
}

/// Saddles and relevance at every `(θ, q)`, with the SPM spectrum of each
/// mixing angle.
pub fn switchover_scan(
    setup: &SwitchoverSetup,
    thetas_deg: &[f64],
    qs: &[f64],
    params: &SpectrumParams,
) -> (Vec<RelevanceCell>, Vec<Spectrum>) {
    let mut cells = Vec::new();
    let mut spectra = Vec::new();
    for &th in thetas_deg {
        let wave = setup.waveform(th);
        let s = spectrum(&wave, setup.ip, qs, Method::Spm, params);
        for p in &s.points {
            cells.extend(relevance_cells(th, p));
        }
        spectra.push(s);
    }
    (cells, spectra)
}

pub fn relevance_cells(theta_deg: f64, point: &SpectrumPoint) -> Vec<RelevanceCell> {
    point
        .saddles
        .iter()
        .enumerate()
        .map(|(id, t)| RelevanceCell {
            theta_deg,
            q: point.q,
            saddle_id: id,
            coords: t.coords,
            n_sigma: t.n_sigma,
            contribution: t.contribution,
        })
        .collect()
}

/// Cluster of ionisation phases `ω Re ti` of relevant saddles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Burst {
    /// Circular mean in `[0, 2π)`.
    pub centre: f64,
    pub spread: (f64, f64),
    pub count: usize,
}

/// Groups the ionisation phases of all relevant saddles in `points` into
/// bursts separated by at least `gap` radians.
pub fn ionisation_bursts(points: &[SpectrumPoint], gap: f64) -> Vec<Burst> {
    let mut phases: Vec<f64> = points
        .iter()
        .flat_map(|p| {
            p.saddles
                .iter()
                .filter(|t| t.n_sigma == Some(1))
                .map(move |t| wrap(t.coords[0].re * p.omega, 2.0 * PI))
        })
        .collect();
    if phases.is_empty() {
        return Vec::new();
    }
    phases.sort_by(f64::total_cmp);
    // start the sweep after the widest gap so that no cluster straddles 2π
    let n = phases.len();
    let (mut best, mut start) = (-1.0, 0);
    for k in 0..n {
        let next = if k + 1 < n {
            phases[k + 1]
        } else {
            phases[0] + 2.0 * PI
        };
        if next - phases[k] > best {
            best = next - phases[k];
            start = (k + 1) % n;
        }
    }
    let unrolled: Vec<f64> = (0..n)
        .map(|k| phases[(start + k) % n] + if start + k >= n { 2.0 * PI } else { 0.0 })
        .collect();
    let mut out = Vec::new();
    let mut first = 0;
    for k in 1..=n {
        if k == n || unrolled[k] - unrolled[k - 1] > gap {
            let slice = &unrolled[first..k];
            let mean = slice.iter().sum::<f64>() / slice.len() as f64;
            out.push(Burst {
                centre: wrap(mean, 2.0 * PI),
                spread: (
                    wrap(slice[0], 2.0 * PI),
                    wrap(slice[slice.len() - 1], 2.0 * PI),
                ),
                count: slice.len(),
            });
            first = k;
        }
    }
    out.sort_by(|a, b| a.centre.total_cmp(&b.centre));
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Leg {
    /// `ti → Re ti`
    Descent,
    /// `Re ti → Re tr`
    Real,
    /// `Re tr → tr`
    Return,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: C64,
    pub x: C64,
    pub leg: Leg,
    /// `(p + A)²/2`, recorded on the real leg only.
    pub energy: Option<C64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub saddle: [C64; 2],
    pub momentum: C64,
    pub samples: Vec<TrajectorySample>,
    /// `|x(tr)|`.
    pub closure: f64,
}

/// Displacement `x(t) = ∫_{ti}^{t} (p + A)` along the three-leg contour,
/// `samples` points per leg. The antiderivative of `A` is exact, so the
/// closure error is pure rounding.
pub fn trajectory(
    phase: &HhgAction,
    coords: [C64; 2],
    samples: usize,
) -> Result<Trajectory, PhaseError> {
    let [ti, tr] = coords;
    let p = phase.stationary_momentum(ti, tr)?;
    let wave = &phase.wave;
    let b0 = wave.point(ti).b;
    let x_at = |t: C64| p * (t - ti) + wave.point(t).b - b0;
    let n = samples.max(2);
    let mut out = Vec::with_capacity(3 * n);
    let legs = [
        (Leg::Descent, ti, C64::new(ti.re, 0.0)),
        (Leg::Real, C64::new(ti.re, 0.0), C64::new(tr.re, 0.0)),
        (Leg::Return, C64::new(tr.re, 0.0), tr),
    ];
    for (leg, a, b) in legs {
        for k in 0..n {
            let t = a + (b - a) * (k as f64 / (n - 1) as f64);
            let energy = (leg == Leg::Real).then(|| {
                let v = p + wave.a(t);
                v * v * 0.5
            });
            out.push(TrajectorySample {
                t,
                x: x_at(t),
                leg,
                energy,
            });
        }
    }
    Ok(Trajectory {
        saddle: coords,
        momentum: p,
        samples: out,
        closure: x_at(tr).norm(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CuspParams {
    /// Newton stops once every residual is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative step of the central-difference Jacobian.
    pub fd_step: f64,
    /// Radius (in coordinate units) of the circle used for the third
    /// derivative along the kernel.
    pub cauchy_radius: f64,
    pub cauchy_points: usize,
    /// `|kernel| / |Hessian|` below which the kernel condition is vacuous.
    pub stratum_tol: f64,
}

impl CuspParams {
    pub fn for_scale(scale: f64) -> Self {
        CuspParams {
            tol: 1e-11,
            max_iter: 60,
            fd_step: 1e-6,
            cauchy_radius: 0.02 * scale,
            cauchy_points: 16,
            stratum_tol: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CuspError {
    NoConvergence {
        residual: f64,
    },
    /// The Hessian vanishes identically, so the kernel condition carries
    /// no information.
    WrongStratum,
    Phase(PhaseError),
}

impl fmt::Display for CuspError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CuspError::NoConvergence { residual } => {
                write!(f, "cusp Newton did not converge (residual {residual:.3e})")
            }
            CuspError::WrongStratum => write!(f, "Hessian vanishes; not a cusp"),
            CuspError::Phase(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for CuspError {}

impl From<PhaseError> for CuspError {
    fn from(e: PhaseError) -> Self {
        CuspError::Phase(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CuspPoint<const N: usize> {
    pub z: [C64; N],
    pub params: [C64; 2],
    /// `|∂f|` per coordinate, `|det H|`, `|D³f[k,k,k]|`.
    pub residuals: [f64; 4],
    pub iterations: usize,
}

fn det_dyn(mut a: Vec<Vec<C64>>) -> C64 {
    let n = a.len();
    let mut d = C64::new(1.0, 0.0);
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| a[i][c].norm().total_cmp(&a[j][c].norm()))
            .unwrap_or(c);
        if a[piv][c].norm() == 0.0 {
            return ZERO;
        }
        if piv != c {
            a.swap(piv, c);
            d = -d;
        }
        d *= a[c][c];
        for r in (c + 1)..n {
            let m = a[r][c] / a[c][c];
            for k in c..n {
                let v = a[c][k];
                a[r][k] -= m * v;
            }
        }
    }
    d
}

/// Column of the adjugate with the largest norm: a holomorphic kernel
/// vector wherever the Hessian has rank `N − 1`.
fn kernel_vector<const N: usize>(h: &[[C64; N]; N]) -> [C64; N] {
    if N == 1 {
        return [C64::new(1.0, 0.0); N];
    }
    let cof = |r: usize, c: usize| -> C64 {
        let minor: Vec<Vec<C64>> = (0..N)
            .filter(|&i| i != r)
            .map(|i| (0..N).filter(|&j| j != c).map(|j| h[i][j]).collect())
            .collect();
        let s = if (r + c).is_multiple_of(2) { 1.0 } else { -1.0 };
        det_dyn(minor) * s
    };
    let mut best = [ZERO; N];
    let mut best_n = -1.0;
    for col in 0..N {
        // adj(H)[i][col] = cof(col, i)
        let v: [C64; N] = core::array::from_fn(|i| cof(col, i));
        let n: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        if n > best_n {
            best_n = n;
            best = v;
        }
    }
    best
}

/// Unknowns `(z, a, b)` flattened; equations `∂f`, `det H`, `D³f[k,k,k]`.
fn cusp_system<const N: usize, P: Phase<N>>(
    family: &impl Fn(C64, C64) -> P,
    x: &[C64],
    cp: &CuspParams,
) -> Result<(Vec<C64>, f64), CuspError> {
    let z: [C64; N] = core::array::from_fn(|k| x[k]);
    let phase = family(x[N], x[N + 1]);
    let j = phase.jet(&z)?;
    let mut eqs: Vec<C64> = j.grad.to_vec();
    let hdet = if N == 1 {
        j.hess[0][0]
    } else {
        crate::linalg::det(&j.hess)
    };
    eqs.push(hdet);
    let k = kernel_vector(&j.hess);
    let knorm = k.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let hnorm = j
        .hess
        .iter()
        .flatten()
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let ratio = if N == 1 {
        1.0
    } else {
        knorm / hnorm.powi(N as i32 - 1).max(1e-300)
    };
    let r = cp.cauchy_radius / knorm.max(1e-300);
    let m = cp.cauchy_points;
    let mut acc = ZERO;
    for s in 0..m {
        let w = C64::from_polar(1.0, 2.0 * PI * s as f64 / m as f64);
        let zs: [C64; N] = core::array::from_fn(|i| z[i] + k[i] * (w * r));
        let hs = phase.jet(&zs)?.hess;
        let mut g = ZERO;
        for a in 0..N {
            for b in 0..N {
                g += k[a] * hs[a][b] * k[b];
            }
        }
        acc += g / w;
    }
    eqs.push(acc / (m as f64 * r));
    Ok((eqs, ratio))
}

/// Newton solve for a cusp of the family `f(z; a, b)`: a critical point
/// with a one-dimensional Hessian kernel along which the third derivative
/// also vanishes.
pub fn cusp_locator<const N: usize, P: Phase<N>>(
    family: impl Fn(C64, C64) -> P,
    z0: [C64; N],
    params0: [C64; 2],
    cp: &CuspParams,
) -> Result<CuspPoint<N>, CuspError> {
    let dim = N + 2;
    let mut x: Vec<C64> = z0.iter().copied().chain(params0).collect();
    let res_of = |e: &[C64]| -> [f64; 4] {
        let g = e[..N].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        [g, e[N].norm(), e[N + 1].norm(), 0.0]
    };
    let (mut eqs, mut ratio) = cusp_system(&family, &x, cp)?;
    for it in 0..=cp.max_iter {
        let r = res_of(&eqs);
        if r[0] < cp.tol && r[1] < cp.tol && r[2] < cp.tol {
            if ratio < cp.stratum_tol {
                return Err(CuspError::WrongStratum);
            }
            let z = core::array::from_fn(|k| x[k]);
            return Ok(CuspPoint {
                z,
                params: [x[N], x[N + 1]],
                residuals: [r[0], r[1], r[2], 0.0],
                iterations: it,
            });
        }
        if it == cp.max_iter {
            break;
        }
        let mut jac = vec![vec![ZERO; dim]; dim];
        for c in 0..dim {
            let h = cp.fd_step * x[c].norm().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let (ep, _) = cusp_system(&family, &xp, cp)?;
            let (em, _) = cusp_system(&family, &xm, cp)?;
            for r in 0..dim {
                jac[r][c] = (ep[r] - em[r]) / (2.0 * h);
            }
        }
        let step = solve_dyn(jac, eqs.clone()).ok_or(CuspError::NoConvergence {
            residual: r.iter().sum(),
        })?;
        let norm0: f64 = eqs.iter().map(|v| v.norm_sqr()).sum();
        let mut lambda = 1.0;
        loop {
            let trial: Vec<C64> = x.iter().zip(&step).map(|(a, s)| a - s * lambda).collect();
            if let Ok((e, rt)) = cusp_system(&family, &trial, cp) {
                let n: f64 = e.iter().map(|v| v.norm_sqr()).sum();
                if n < norm0 || lambda < 1e-3 {
                    x = trial;
                    eqs = e;
                    ratio = rt;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-4 {
                return Err(CuspError::NoConvergence {
                    residual: norm0.sqrt(),
                });
            }
        }
    }
    let r = res_of(&eqs);
    Err(CuspError::NoConvergence {
        residual: r[0] + r[1] + r[2],
    })
}

fn solve_dyn(mut a: Vec<Vec<C64>>, mut b: Vec<C64>) -> Option<Vec<C64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].norm().total_cmp(&a[j][c].norm()))?;
        if a[piv][c].norm() == 0.0 {
            return None;
        }
        a.swap(piv, c);
        b.swap(piv, c);
        for r in (c + 1)..n {
            let m = a[r][c] / a[c][c];
            for k in c..n {
                let v = a[c][k];
                a[r][k] -= m * v;
            }
            let v = b[c];
            b[r] -= m * v;
        }
    }
    let mut x = vec![ZERO; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for k in (r + 1)..n {
            s -= a[r][k] * x[k];
        }
        x[r] = s / a[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::Poly;

    /// `z⁴ + a z² + b z` as a one-dimensional phase.
    fn quartic(a: C64, b: C64) -> Poly {
        Poly::new(&[ZERO, b, a, ZERO, C64::new(1.0, 0.0)])
    }

    #[test]
    fn cusp_of_quartic_germ() {
        let cp = CuspParams::for_scale(0.1);
        let c = C64::new;
        let r = cusp_locator(
            quartic,
            [c(0.2, 0.1)],
            [c(0.15, -0.05), c(-0.05, 0.02)],
            &cp,
        )
        .unwrap();
        assert!(r.z[0].norm() < 1e-8, "{:?}", r);
        assert!(
            r.params[0].norm() < 1e-8 && r.params[1].norm() < 1e-8,
            "{:?}",
            r
        );
        assert!(r.residuals.iter().all(|&x| x < 1e-9));
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(1.0, 2.0, 3), [1.0, 1.5, 2.0]);
        assert_eq!(linspace(1.0, 2.0, 1), [1.0]);
    }

    fn phase_at(q: f64, t: f64) -> SpectrumPoint {
        let terms = [t]
            .iter()
            .map(|&x| SaddleTerm {
                coords: [C64::new(x / 0.05, 0.0), C64::new(x / 0.05 + 10.0, 0.0)],
                h: -1.0,
                big_h: 0.0,
                contribution: None,
                n_sigma: Some(1),
                flags: Vec::new(),
                window_label: None,
                first_half: true,
            })
            .collect();
        SpectrumPoint {
            q,
            omega: 0.05,
            spm: None,
            spm_half: None,
            plf: None,
            plf_half: None,
            saddles: terms,
            errors: Vec::new(),
        }
    }

    #[test]
    fn bursts_wrap_around_two_pi() {
        let pts: Vec<SpectrumPoint> = [6.2, 0.05, 0.1, 3.0, 3.1]
            .iter()
            .map(|&t| phase_at(20.0, t))
            .collect();
        let b = ionisation_bursts(&pts, 0.5);
        assert_eq!(b.len(), 2);
        assert_eq!(b.iter().map(|x| x.count).sum::<usize>(), 5);
        let wrap = b.iter().find(|x| x.count == 3).unwrap();
        assert!(wrap.centre < 0.1 || wrap.centre > 6.2, "{wrap:?}");
    }

    #[test]
    fn field_free_trajectory_stays_at_origin() {
        let wave = LaserField::monochromatic(0.0, 0.05).waveform();
        let a = HhgAction::new(wave, 0.5, 11.0);
        let t = trajectory(&a, [C64::new(3.0, 5.0), C64::new(40.0, -2.0)], 20).unwrap();
        assert_eq!(t.momentum, ZERO);
        assert!(t.samples.iter().all(|s| s.x.norm() == 0.0));
    }
}
