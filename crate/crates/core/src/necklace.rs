//! Intersection numbers of two-dimensional saddles: a small loop around
//! the saddle in its ascent plane is flowed upward to a fixed positive
//! level of `h`, and the winding of its imaginary-part projection around
//! the origin counts the intersections of the ascent manifold with the
//! real domain.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::flow1d::gradient_step;
use crate::phase::Phase;
use crate::saddle::SaddlePoint;
#[allow(unused_imports)]
use num_traits::Float;

use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NecklaceParams {
    /// Radius of the initial loop.
    pub epsilon: f64,
    pub n_beads: usize,
    pub delta_flow: f64,
    pub max_step: f64,
    /// Cap on the number of loop iterations.
    pub max_steps: usize,
    /// Level of `h` at which beads stop; any positive value gives the same
    /// winding.
    pub h_stop: f64,
    /// Saddles with `h` above this value are irrelevant without flowing.
    pub h_tol: f64,
    /// Largest distance between neighbouring beads.
    pub l_thresh: f64,
    pub max_beads: usize,
    pub bound: f64,
    pub stokes_tol: f64,
    pub slip_tol: f64,
    /// Loops whose projection comes closer than this to the origin are
    /// ambiguous.
    pub proj_tol: f64,
    /// Re-project every bead onto the saddle's `H` after each step.
    pub hold_phase: bool,
}

impl NecklaceParams {
    pub fn for_omega(omega: f64) -> Self {
        NecklaceParams {
            epsilon: 1e-3 / omega,
            n_beads: 64,
            delta_flow: 1e-3 / (omega * omega),
            max_step: 0.005 / omega,
            max_steps: 20_000,
            h_stop: 1.0,
            h_tol: 1e-6,
            l_thresh: 0.1 / omega,
            max_beads: 20_000,
            bound: 1e3 / omega,
            stokes_tol: 1e-3,
            slip_tol: 0.05 / omega,
            proj_tol: 1e-3 / omega,
            hold_phase: true,
        }
    }
}

/// The real integration domain the loop has to land on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RealDomain {
    Plane,
    /// `ti` periodic with `period`, travel time `tr − ti ∈ (0, max_travel]`.
    HhgStrip {
        period: f64,
        max_travel: f64,
    },
}

impl RealDomain {
    fn contains(&self, x: [f64; 2]) -> bool {
        match *self {
            RealDomain::Plane => true,
            RealDomain::HhgStrip { max_travel, .. } => {
                let tau = x[1] - x[0];
                tau > 0.0 && tau <= max_travel
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NecklaceFlag {
    /// A bead came close to another saddle with nearly equal `H`.
    Slipped { near: [C64; 2] },
    /// A bead left the bounded region before reaching the stop level.
    Runaway { bead: usize },
    /// The projected loop passes too close to the origin.
    Ambiguous,
    /// `|nσ| > 1`.
    LargeWinding,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NecklaceError {
    DegenerateHessian,
}

impl fmt::Display for NecklaceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NecklaceError::DegenerateHessian => {
                write!(f, "saddle is degenerate; the necklace is undefined")
            }
        }
    }
}

impl core::error::Error for NecklaceError {}

#[derive(Clone, Debug, PartialEq)]
pub struct Necklace {
    pub beads: Vec<[C64; 2]>,
    /// Bead reached the stop level.
    pub converged: Vec<bool>,
    pub source: [C64; 2],
    pub source_big_h: f64,
    pub epsilon: f64,
    pub flags: Vec<NecklaceFlag>,
    /// Euler steps taken over all beads.
    pub steps: usize,
    /// Largest `|H(bead) − H(saddle)|`.
    pub max_h_drift: f64,
}

/// Loop `zσ + ε(cos γ v1 + sin γ v3)` in the plane of the two ascent
/// eigenvectors.
pub fn init_necklace(
    saddle: &SaddlePoint<2>,
    epsilon: f64,
    n_beads: usize,
) -> Result<Necklace, NecklaceError> {
    let v = &saddle.eigen.values;
    if saddle.degenerate || v[1].abs() < 1e-12 * v[0].abs().max(1e-300) {
        return Err(NecklaceError::DegenerateHessian);
    }
    let (v1, v3) = (saddle.eigen.ascent[0], saddle.eigen.ascent[1]);
    let beads = (0..n_beads)
        .map(|k| {
            let g = 2.0 * PI * k as f64 / n_beads as f64;
            let (s, c) = g.sin_cos();
            [
                saddle.coords[0] + (v1[0] * c + v3[0] * s) * epsilon,
                saddle.coords[1] + (v1[1] * c + v3[1] * s) * epsilon,
            ]
        })
        .collect();
    Ok(Necklace {
        beads,
        converged: alloc::vec![false; n_beads],
        source: saddle.coords,
        source_big_h: saddle.big_h,
        epsilon,
        flags: Vec::new(),
        steps: 0,
        max_h_drift: 0.0,
    })
}

fn dist4(a: &[C64; 2], b: &[C64; 2]) -> f64 {
    ((a[0] - b[0]).norm_sqr() + (a[1] - b[1]).norm_sqr()).sqrt()
}

fn midpoint(a: &[C64; 2], b: &[C64; 2]) -> [C64; 2] {
    [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5]
}

/// One Newton step along `i·∇h`, which moves `H` back to `big_h` while
/// leaving `h` unchanged to first order.
fn restore_phase<P: Phase<2>>(phase: &P, z: &[C64; 2], big_h: f64) -> Option<([C64; 2], C64)> {
    let (f, g) = phase.exponent_grad(z).ok()?;
    let gn = g[0].norm_sqr() + g[1].norm_sqr();
    if !(gn > 0.0) {
        return None;
    }
    let t = C64::new(0.0, -(f.im - big_h) / gn);
    let zc = [z[0] + g[0].conj() * t, z[1] + g[1].conj() * t];
    let fc = phase.exponent(&zc).ok()?;
    ((fc.im - big_h).abs() < (f.im - big_h).abs()).then_some((zc, fc))
}

/// One upward step of bead `i`; marks it converged at the stop level.
fn step_bead<P: Phase<2>>(
    phase: &P,
    neck: &mut Necklace,
    i: usize,
    others: &[SaddlePoint<2>],
    params: &NecklaceParams,
) {
    let z = neck.beads[i];
    let Ok((f, g)) = phase.exponent_grad(&z) else {
        neck.converged[i] = true;
        return;
    };
    if f.re >= params.h_stop {
        neck.converged[i] = true;
        return;
    }
    let Some((mut z, mut f)) =
        gradient_step(phase, &z, f, &g, 1.0, params.delta_flow, params.max_step)
    else {
        neck.converged[i] = true;
        return;
    };
    neck.steps += 1;
    if params.hold_phase {
        for _ in 0..3 {
            if (f.im - neck.source_big_h).abs() < 1e-13 * neck.source_big_h.abs().max(1.0) {
                break;
            }
            match restore_phase(phase, &z, neck.source_big_h) {
                Some((zc, fc)) => (z, f) = (zc, fc),
                None => break,
            }
        }
    }
    neck.max_h_drift = neck.max_h_drift.max((f.im - neck.source_big_h).abs());
    neck.beads[i] = z;
    if f.re >= params.h_stop {
        neck.converged[i] = true;
    }
    if z[0].norm().max(z[1].norm()) > params.bound {
        neck.flags.push(NecklaceFlag::Runaway { bead: i });
        neck.converged[i] = true;
    }
    for o in others {
        if (o.big_h - neck.source_big_h).abs() < params.stokes_tol
            && dist4(&o.coords, &z) < params.slip_tol
        {
            let flag = NecklaceFlag::Slipped { near: o.coords };
            if !neck.flags.contains(&flag) {
                neck.flags.push(flag);
            }
        }
    }
}

fn projected(z: &[C64; 2]) -> (f64, f64) {
    (z[0].im, z[1].im)
}

fn angle_step(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 * b.1 - a.1 * b.0).atan2(a.0 * b.0 + a.1 * b.1)
}

/// Inserts a midpoint bead wherever neighbours are farther apart than
/// `l_thresh` or sweep a large angle around the projected origin.
fn refine_loop(neck: &mut Necklace, params: &NecklaceParams) -> usize {
    let n = neck.beads.len();
    let mut beads = Vec::with_capacity(n);
    let mut conv = Vec::with_capacity(n);
    let mut inserted = 0;
    for i in 0..n {
        let j = (i + 1) % n;
        beads.push(neck.beads[i]);
        conv.push(neck.converged[i]);
        let (a, b) = (neck.beads[i], neck.beads[j]);
        let d = dist4(&a, &b);
        let long = d > params.l_thresh;
        let sweep = angle_step(projected(&a), projected(&b)).abs() > PI / 6.0;
        if (long || sweep) && d > 1e-9 * params.l_thresh && n + inserted < params.max_beads {
            beads.push(midpoint(&a, &b));
            conv.push(false);
            inserted += 1;
        }
    }
    neck.beads = beads;
    neck.converged = conv;
    inserted
}

/// Steps all beads upward together, refining the loop after every step,
/// until each bead has reached the stop level.
pub fn flow_necklace_up<P: Phase<2>>(
    phase: &P,
    mut neck: Necklace,
    others: &[SaddlePoint<2>],
    params: &NecklaceParams,
) -> Necklace {
    let others: Vec<SaddlePoint<2>> = others
        .iter()
        .filter(|o| dist4(&o.coords, &neck.source) > params.slip_tol)
        .cloned()
        .collect();
    for _ in 0..params.max_steps {
        for i in 0..neck.beads.len() {
            if !neck.converged[i] {
                step_bead(phase, &mut neck, i, &others, params);
            }
        }
        if neck
            .flags
            .iter()
            .any(|f| matches!(f, NecklaceFlag::Runaway { .. }))
        {
            break;
        }
        let inserted = refine_loop(&mut neck, params);
        if inserted == 0 && neck.converged.iter().all(|&c| c) {
            break;
        }
    }
    neck
}

/// Winding number of the `(Im ti, Im tr)` projection around the origin;
/// `None` if the loop passes within `proj_tol` of it.
pub fn winding_number(beads: &[[C64; 2]], proj_tol: f64) -> Option<i32> {
    let n = beads.len();
    let mut total = 0.0;
    for i in 0..n {
        let a = projected(&beads[i]);
        let b = projected(&beads[(i + 1) % n]);
        if (a.0 * a.0 + a.1 * a.1).sqrt() < proj_tol {
            return None;
        }
        // distance from the origin to the segment
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let l2 = dx * dx + dy * dy;
        let t = if l2 > 0.0 {
            (-(a.0 * dx + a.1 * dy) / l2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (px, py) = (a.0 + t * dx, a.1 + t * dy);
        if (px * px + py * py).sqrt() < proj_tol {
            return None;
        }
        total += angle_step(a, b);
    }
    Some((total / (2.0 * PI)).round() as i32)
}

/// Intersection number of the loop with `domain`: its winding, provided
/// the real parts where it circles the origin fall inside the domain.
pub fn intersection_number(neck: &Necklace, domain: &RealDomain, proj_tol: f64) -> Option<i32> {
    let w = winding_number(&neck.beads, proj_tol)?;
    if w == 0 {
        return Some(0);
    }
    let near = neck
        .beads
        .iter()
        .min_by(|a, b| {
            let (pa, pb) = (projected(a), projected(b));
            (pa.0.hypot(pa.1)).total_cmp(&pb.0.hypot(pb.1))
        })
        .map(|z| [z[0].re, z[1].re])?;
    Some(if domain.contains(near) { w } else { 0 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Relevance2D {
    /// `None` when the result is inconclusive (slip or ambiguity).
    pub n_sigma: Option<i32>,
    pub flags: Vec<NecklaceFlag>,
    /// Whether the `h > h_tol` shortcut was taken.
    pub shortcut: bool,
    pub necklace: Option<Necklace>,
}

/// Full necklace pipeline for one saddle.
pub fn relevance_2d<P: Phase<2>>(
    phase: &P,
    saddle: &SaddlePoint<2>,
    others: &[SaddlePoint<2>],
    domain: &RealDomain,
    params: &NecklaceParams,
) -> Result<Relevance2D, NecklaceError> {
    if saddle.h > params.h_tol {
        return Ok(Relevance2D {
            n_sigma: Some(0),
            flags: Vec::new(),
            shortcut: true,
            necklace: None,
        });
    }
    let neck = init_necklace(saddle, params.epsilon, params.n_beads)?;
    let neck = flow_necklace_up(phase, neck, others, params);
    let mut flags = neck.flags.clone();
    let runaway = flags
        .iter()
        .any(|f| matches!(f, NecklaceFlag::Runaway { .. }));
    let slipped = flags
        .iter()
        .any(|f| matches!(f, NecklaceFlag::Slipped { .. }));
    let n = if runaway {
        // the loop escapes to infinity without closing over the domain
        Some(0)
    } else {
        match intersection_number(&neck, domain, params.proj_tol) {
            Some(w) => Some(w),
            None => {
                flags.push(NecklaceFlag::Ambiguous);
                None
            }
        }
    };
    if n.is_some_and(|w| w.abs() > 1) {
        flags.push(NecklaceFlag::LargeWinding);
    }
    // the orientation of the ascent basis is arbitrary, so only |w| is meaningful
    let n_sigma = if slipped { None } else { n.map(i32::abs) };
    Ok(Relevance2D {
        n_sigma,
        flags,
        shortcut: false,
        necklace: Some(neck),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{Poly, Separable};
    use crate::saddle::SaddlePoint;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn circle(centre: (f64, f64), r: f64, n: usize) -> Vec<[C64; 2]> {
        (0..n)
            .map(|k| {
                let g = 2.0 * PI * k as f64 / n as f64;
                [
                    c(0.3, centre.0 + r * g.cos()),
                    c(1.0, centre.1 + r * g.sin()),
                ]
            })
            .collect()
    }

    #[test]
    fn circle_around_origin_winds_once() {
        assert_eq!(winding_number(&circle((0.0, 0.0), 0.1, 64), 1e-3), Some(1));
        let mut rev = circle((0.0, 0.0), 0.1, 64);
        rev.reverse();
        assert_eq!(winding_number(&rev, 1e-3), Some(-1));
    }

    #[test]
    fn loop_in_half_plane_does_not_wind() {
        assert_eq!(winding_number(&circle((0.5, 0.0), 0.2, 64), 1e-3), Some(0));
        assert_eq!(winding_number(&circle((0.1, 0.0), 0.1, 64), 1e-3), None);
    }

    #[test]
    fn bead_spacing_of_initial_loop() {
        let s = Separable {
            a: Poly::real(&[0.0, 0.0, 1.0]),
            b: Poly::real(&[0.0, 0.0, 1.0]),
        };
        let sp = SaddlePoint::at(&s, [c(0.0, 0.0); 2]).unwrap();
        let eps = 1e-2;
        let n = init_necklace(&sp, eps, 64).unwrap();
        for i in 0..64 {
            let d = dist4(&n.beads[i], &n.beads[(i + 1) % 64]);
            assert!(d < 2.0 * PI * eps / 63.0);
        }
        for b in &n.beads {
            let f = s.exponent(b).unwrap();
            assert!(f.re > 0.0);
            assert!((f.re - eps * eps).abs() < 1e-12, "{}", f.re);
        }
    }

    fn toy_params() -> NecklaceParams {
        NecklaceParams {
            epsilon: 1e-3,
            n_beads: 64,
            delta_flow: 1e-3,
            max_step: 0.01,
            max_steps: 20_000,
            h_stop: 1.0,
            h_tol: 1e-6,
            l_thresh: 0.1,
            max_beads: 20_000,
            bound: 1e3,
            stokes_tol: 1e-3,
            slip_tol: 0.05,
            proj_tol: 1e-6,
            hold_phase: true,
        }
    }

    /// `z³/3 + b z`: saddles at `±i√b`, only the upper one relevant.
    fn airy(b: f64) -> Poly {
        Poly::real(&[0.0, b, 0.0, 1.0 / 3.0])
    }

    fn one_d(b: f64, upper: bool) -> i32 {
        use crate::flow1d::{relevance_1d, RelevanceParams};
        let p = airy(b);
        let z = c(0.0, if upper { b.sqrt() } else { -b.sqrt() });
        let sp = SaddlePoint::at(&p, [z]).unwrap();
        let rp = RelevanceParams {
            epsilon: 1e-3,
            delta_flow: 1e-3,
            max_step: 0.01,
            max_steps: 200_000,
            h_tol: 1e-6,
            h_stop: 1.0,
            bound: 1e3,
            window: (f64::NEG_INFINITY, f64::INFINITY),
            stokes_tol: 1e-3,
            slip_tol: 0.05,
        };
        relevance_1d(&p, &sp, &[], &rp).unwrap()
    }

    #[test]
    fn separable_product_rule() {
        for (ua, ub) in [(true, true), (true, false), (false, true), (false, false)] {
            let (ba, bb) = (1.0, 2.0);
            let s = Separable {
                a: airy(ba),
                b: airy(bb),
            };
            let z = [
                c(0.0, if ua { 1.0 } else { -1.0 } * ba.sqrt()),
                c(0.0, if ub { 1.0 } else { -1.0 } * bb.sqrt()),
            ];
            let sp = SaddlePoint::at(&s, z).unwrap();
            let r = relevance_2d(&s, &sp, &[], &RealDomain::Plane, &toy_params()).unwrap();
            let expect = one_d(ba, ua) * one_d(bb, ub);
            assert_eq!(
                r.n_sigma.map(|n| n.abs()),
                Some(expect),
                "{ua} {ub} h={}",
                sp.h
            );
        }
    }

    #[test]
    fn forced_flow_agrees_with_shortcut() {
        let s = Separable {
            a: airy(1.0),
            b: airy(2.0),
        };
        let sp = SaddlePoint::at(&s, [c(0.0, -1.0), c(0.0, -(2.0f64.sqrt()))]).unwrap();
        assert!(sp.h > 0.0);
        let p = NecklaceParams {
            h_tol: f64::INFINITY,
            h_stop: sp.h + 1.0,
            ..toy_params()
        };
        let r = relevance_2d(&s, &sp, &[], &RealDomain::Plane, &p).unwrap();
        assert!(!r.shortcut);
        assert_eq!(r.n_sigma, Some(0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]
        #[test]
        fn winding_stable_in_epsilon(e in -4.0f64..-2.0) {
            let s = Separable { a: airy(1.0), b: airy(2.0) };
            let sp = SaddlePoint::at(&s, [c(0.0, 1.0), c(0.0, 2.0f64.sqrt())]).unwrap();
            let p = NecklaceParams { epsilon: 10f64.powf(e), ..toy_params() };
            let r = relevance_2d(&s, &sp, &[], &RealDomain::Plane, &p).unwrap();
            prop_assert_eq!(r.n_sigma.map(|n| n.abs()), Some(1));
            let neck = r.necklace.unwrap();
            prop_assert!(neck.max_h_drift < 10.0 * p.delta_flow * neck.steps as f64 + 1e-6);
        }
    }
}
