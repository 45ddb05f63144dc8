//! Downward flow of a one-dimensional contour and steepest-ascent
//! relevance of 1D saddles.

use alloc::vec::Vec;
use core::fmt;

use crate::phase::Phase;
use crate::saddle::SaddlePoint;
#[allow(unused_imports)]
use num_traits::Float;

use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowParams {
    /// Euler step factor multiplying the gradient of `h`.
    pub delta_flow: f64,
    /// Maximal distance between neighbouring active nodes.
    pub l_thresh: f64,
    /// Nodes with `h` below this level are frozen and dropped from the
    /// quadrature.
    pub h_thresh: f64,
    pub max_iter: usize,
    /// Largest displacement of a node in one step; steeper gradients are
    /// rescaled to this length.
    pub max_step: f64,
    /// `|z|` beyond which the flow is reported as running away.
    pub bound: f64,
    /// Stop once the largest relative node displacement in a step falls
    /// below this value.
    pub converge_tol: f64,
}

impl FlowParams {
    /// Defaults for a laser problem with fundamental frequency `omega`.
    pub fn for_omega(omega: f64) -> Self {
        FlowParams {
            delta_flow: 1e-3 / (omega * omega),
            l_thresh: 0.05 / omega,
            h_thresh: -30.0,
            max_iter: 1000,
            max_step: 0.05 / omega,
            bound: 1e4 / omega,
            converge_tol: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FlowError {
    /// A node left the disc `|z| < bound`.
    BlowUp { node: usize },
}

impl fmt::Display for FlowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowError::BlowUp { node } => {
                write!(f, "node {node} ran away from the integration region")
            }
        }
    }
}

impl core::error::Error for FlowError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Original,
    Inserted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Contour1D {
    pub nodes: Vec<C64>,
    pub active: Vec<bool>,
    pub provenance: Vec<Provenance>,
    pub iteration: usize,
}

impl Contour1D {
    /// Uniform discretisation of the real segment `[a, b]`.
    pub fn segment(a: f64, b: f64, n: usize) -> Self {
        let nodes: Vec<C64> = (0..=n)
            .map(|k| C64::new(a + (b - a) * k as f64 / n as f64, 0.0))
            .collect();
        let m = nodes.len();
        Contour1D {
            nodes,
            active: alloc::vec![true; m],
            provenance: alloc::vec![Provenance::Original; m],
            iteration: 0,
        }
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

/// Bookkeeping of one flow iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    /// Largest increase of `h` over moved nodes (never positive).
    pub max_h_rise: f64,
    /// Largest change of `H` over moved nodes.
    pub max_big_h_change: f64,
    pub max_rel_disp: f64,
    pub moved: usize,
    pub inserted: usize,
}

/// One gradient step of `h` in direction `sign` (−1 down, +1 up), capped
/// and halved until `h` moves the right way. Returns the new point and its
/// exponent, or `None` if no admissible step exists.
pub(crate) fn gradient_step<const N: usize, P: Phase<N>>(
    phase: &P,
    z: &[C64; N],
    f: C64,
    grad: &[C64; N],
    sign: f64,
    delta: f64,
    max_step: f64,
) -> Option<([C64; N], C64)> {
    let gn = grad.iter().map(|g| g.norm_sqr()).sum::<f64>().sqrt();
    if !(gn > 0.0) {
        return None;
    }
    let mut scale = delta;
    if delta * gn > max_step {
        scale = max_step / gn;
    }
    for _ in 0..30 {
        let trial: [C64; N] = core::array::from_fn(|k| z[k] + grad[k].conj() * (sign * scale));
        if let Ok(ft) = phase.exponent(&trial) {
            if (ft.re - f.re) * sign > 0.0 && ft.re.is_finite() {
                return Some((trial, ft));
            }
        }
        scale *= 0.5;
    }
    None
}

/// Inserts evenly spaced nodes into active segments longer than
/// `l_thresh`.
pub fn refine(contour: &mut Contour1D, l_thresh: f64) -> usize {
    let n = contour.nodes.len();
    let mut nodes = Vec::with_capacity(n);
    let mut active = Vec::with_capacity(n);
    let mut prov = Vec::with_capacity(n);
    let mut inserted = 0;
    for i in 0..n {
        nodes.push(contour.nodes[i]);
        active.push(contour.active[i]);
        prov.push(contour.provenance[i]);
        if i + 1 < n && contour.active[i] && contour.active[i + 1] {
            let (a, b) = (contour.nodes[i], contour.nodes[i + 1]);
            let d = (b - a).norm();
            if d > l_thresh {
                let k = (d / l_thresh) as usize;
                for j in 1..=k {
                    nodes.push(a + (b - a) * (j as f64 / (k + 1) as f64));
                    active.push(true);
                    prov.push(Provenance::Inserted);
                }
                inserted += k;
            }
        }
    }
    contour.nodes = nodes;
    contour.active = active;
    contour.provenance = prov;
    inserted
}

/// One Euler iteration of the downward flow followed by refinement.
pub fn flow_step<P: Phase<1>>(
    phase: &P,
    contour: &mut Contour1D,
    params: &FlowParams,
) -> Result<StepReport, FlowError> {
    let mut rep = StepReport {
        max_h_rise: f64::NEG_INFINITY,
        ..Default::default()
    };
    for i in 0..contour.nodes.len() {
        if !contour.active[i] {
            continue;
        }
        let z = [contour.nodes[i]];
        let Ok((f, g)) = phase.exponent_grad(&z) else {
            contour.active[i] = false;
            continue;
        };
        if f.re < params.h_thresh {
            contour.active[i] = false;
            continue;
        }
        if let Some((zn, fnew)) =
            gradient_step(phase, &z, f, &g, -1.0, params.delta_flow, params.max_step)
        {
            let disp = (zn[0] - z[0]).norm();
            rep.max_rel_disp = rep
                .max_rel_disp
                .max(disp / z[0].norm().max(params.l_thresh));
            rep.max_h_rise = rep.max_h_rise.max(fnew.re - f.re);
            rep.max_big_h_change = rep.max_big_h_change.max((fnew.im - f.im).abs());
            rep.moved += 1;
            contour.nodes[i] = zn[0];
            if zn[0].norm() > params.bound {
                return Err(FlowError::BlowUp { node: i });
            }
            if fnew.re < params.h_thresh {
                contour.active[i] = false;
            }
        }
    }
    rep.inserted = refine(contour, params.l_thresh);
    contour.iteration += 1;
    Ok(rep)
}

/// Runs the downward flow for up to `max_iter` iterations, stopping early
/// once nodes no longer move.
pub fn flow_contour<P: Phase<1>>(
    phase: &P,
    mut contour: Contour1D,
    params: &FlowParams,
) -> Result<Contour1D, FlowError> {
    for _ in 0..params.max_iter {
        let rep = flow_step(phase, &mut contour, params)?;
        if rep.inserted == 0 && rep.max_rel_disp < params.converge_tol {
            break;
        }
    }
    Ok(contour)
}

/// Trapezoid rule along the polyline; segments touching an inactive node
/// contribute nothing.
pub fn quadrature_1d<P: Phase<1>>(
    phase: &P,
    contour: &Contour1D,
    prefactor: impl Fn(C64) -> C64,
) -> C64 {
    let vals: Vec<Option<C64>> = contour
        .nodes
        .iter()
        .zip(&contour.active)
        .map(|(&z, &a)| {
            if a {
                phase.exponent(&[z]).ok().map(|f| prefactor(z) * f.exp())
            } else {
                None
            }
        })
        .collect();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..contour.nodes.len().saturating_sub(1) {
        if let (Some(a), Some(b)) = (vals[i], vals[i + 1]) {
            acc += (contour.nodes[i + 1] - contour.nodes[i]) * (a + b) * 0.5;
        }
    }
    acc
}

/// Smallest distance between `z` and the active part of the polyline.
pub fn distance_to_contour(contour: &Contour1D, z: C64) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..contour.nodes.len().saturating_sub(1) {
        if !(contour.active[i] && contour.active[i + 1]) {
            continue;
        }
        let (a, b) = (contour.nodes[i], contour.nodes[i + 1]);
        let ab = b - a;
        let t = if ab.norm_sqr() > 0.0 {
            ((z - a) * ab.conj()).re / ab.norm_sqr()
        } else {
            0.0
        };
        let p = a + ab * t.clamp(0.0, 1.0);
        best = best.min((z - p).norm());
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelevanceParams {
    /// Initial offset from the saddle along the ascent direction.
    pub epsilon: f64,
    pub delta_flow: f64,
    pub max_step: f64,
    pub max_steps: usize,
    /// Saddles with `h` above this value are irrelevant without flowing.
    pub h_tol: f64,
    /// Rays stop once `h` exceeds this level.
    pub h_stop: f64,
    pub bound: f64,
    /// Real window the crossing must fall into.
    pub window: (f64, f64),
    pub stokes_tol: f64,
    pub slip_tol: f64,
}

impl RelevanceParams {
    pub fn for_omega(omega: f64) -> Self {
        RelevanceParams {
            epsilon: 1e-3 / omega,
            delta_flow: 1e-3 / (omega * omega),
            max_step: 0.01 / omega,
            max_steps: 200_000,
            h_tol: 1e-6,
            h_stop: 1.0,
            bound: 1e4 / omega,
            window: (f64::NEG_INFINITY, f64::INFINITY),
            stokes_tol: 1e-3,
            slip_tol: 0.05 / omega,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RelevanceError {
    /// An ascent ray came close to another saddle with nearly equal `H`.
    Inconclusive { other: usize },
}

impl fmt::Display for RelevanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelevanceError::Inconclusive { other } => {
                write!(
                    f,
                    "ascent ray passes saddle {other} at nearly equal phase (near a Stokes line)"
                )
            }
        }
    }
}

impl core::error::Error for RelevanceError {}

/// Traces one steepest-ascent ray; returns where it crosses the real
/// axis, if it does.
fn ascent_ray<P: Phase<1>>(
    phase: &P,
    start: C64,
    big_h: f64,
    others: &[SaddlePoint<1>],
    params: &RelevanceParams,
) -> Result<Option<C64>, RelevanceError> {
    let mut z = [start];
    let Ok(mut f) = phase.exponent(&z) else {
        return Ok(None);
    };
    for _ in 0..params.max_steps {
        let Ok((_, g)) = phase.exponent_grad(&z) else {
            return Ok(None);
        };
        let Some((zn, fnew)) =
            gradient_step(phase, &z, f, &g, 1.0, params.delta_flow, params.max_step)
        else {
            return Ok(None);
        };
        if (zn[0].im > 0.0) != (z[0].im > 0.0) || zn[0].im == 0.0 {
            let t = z[0].im / (z[0].im - zn[0].im);
            return Ok(Some(z[0] + (zn[0] - z[0]) * t));
        }
        for (k, o) in others.iter().enumerate() {
            if (o.big_h - big_h).abs() < params.stokes_tol
                && (o.coords[0] - zn[0]).norm() < params.slip_tol
            {
                return Err(RelevanceError::Inconclusive { other: k });
            }
        }
        z = zn;
        f = fnew;
        if f.re > params.h_stop || z[0].norm() > params.bound {
            return Ok(None);
        }
    }
    Ok(None)
}

/// Intersection number of the steepest-ascent curve of `saddle` with the
/// real window: 1 if either ray lands on it, else 0.
///
/// `others` are the remaining saddles of the same phase, used to detect
/// near-Stokes geometry.
pub fn relevance_1d<P: Phase<1>>(
    phase: &P,
    saddle: &SaddlePoint<1>,
    others: &[SaddlePoint<1>],
    params: &RelevanceParams,
) -> Result<i32, RelevanceError> {
    if saddle.h > params.h_tol {
        return Ok(0);
    }
    let v = saddle.eigen.ascent[0][0];
    let others: Vec<SaddlePoint<1>> = others
        .iter()
        .filter(|o| (o.coords[0] - saddle.coords[0]).norm() > params.slip_tol)
        .cloned()
        .collect();
    for sign in [1.0, -1.0] {
        let start = saddle.coords[0] + v * (sign * params.epsilon);
        if let Some(x) = ascent_ray(phase, start, saddle.big_h, &others, params)? {
            if x.re >= params.window.0 && x.re <= params.window.1 {
                return Ok(1);
            }
        }
    }
    Ok(0)
}
