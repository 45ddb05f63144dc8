//! Ionisation amplitude checks: saddle relevance, contour geometry and the
//! flowed quadrature against a damped real-axis reference.

use core::f64::consts::PI;

use thimble_core::field::LaserField;
use thimble_core::flow1d::{
    distance_to_contour, flow_step, quadrature_1d, relevance_1d, Contour1D, FlowParams,
    RelevanceParams,
};
use thimble_core::phase::{AtiAction, Damped, Phase};
use thimble_core::saddle::{
    ati_search, find_saddles, spm_contribution, SaddlePoint, SearchSpec, Window,
};
use thimble_core::C64;

const IP: f64 = 15.8 / 27.2114;
const W: f64 = 0.044;
const ONE: C64 = C64::new(1.0, 0.0);

fn two_colour() -> AtiAction {
    AtiAction {
        wave: LaserField::two_colour_cos(0.05, 0.0075, W, 0.5).waveform(),
        ip: IP,
        p: 1.2,
    }
}

fn mono() -> AtiAction {
    AtiAction {
        wave: LaserField::monochromatic(0.05, W).waveform(),
        ip: IP,
        p: 0.0,
    }
}

fn period() -> f64 {
    2.0 * PI / W
}

/// Real-axis trapezoid of the damped integrand; the Gaussian factor makes
/// the rule spectrally accurate.
fn brute_force<P: Phase<1>>(phase: &P, a: f64, b: f64, n: usize) -> C64 {
    let h = (b - a) / n as f64;
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..=n {
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        acc += phase
            .exponent(&[C64::new(a + h * k as f64, 0.0)])
            .unwrap()
            .exp()
            * w;
    }
    acc * h
}

/// e^{−ε t²} reaches e^{−30} two periods from the centre.
fn damped(a: AtiAction) -> Damped<AtiAction> {
    let eps = 30.0 / (2.0 * period()).powi(2);
    Damped {
        inner: a,
        eps,
        centre: 0.0,
    }
}

fn ati_flow_params() -> FlowParams {
    let mut p = FlowParams::for_omega(W);
    p.l_thresh = 0.02 / W;
    p
}

fn half_width() -> f64 {
    2.2 * period()
}

/// Flows the truncated real segment and returns the quadrature at each
/// requested iteration count together with the final contour.
fn flowed(phase: &Damped<AtiAction>, checkpoints: &[usize]) -> (Vec<C64>, Contour1D) {
    let p = ati_flow_params();
    let l = half_width();
    let mut c = Contour1D::segment(-l, l, 2000);
    let mut out = Vec::new();
    let last = *checkpoints.last().unwrap();
    for it in 1..=last {
        flow_step(phase, &mut c, &p).unwrap();
        if checkpoints.contains(&it) {
            out.push(quadrature_1d(phase, &c, |_| ONE));
        }
    }
    (out, c)
}

fn upper(saddles: &[SaddlePoint<1>]) -> Vec<&SaddlePoint<1>> {
    saddles.iter().filter(|x| x.coords[0].im > 0.0).collect()
}

#[test]
fn two_colour_relevance_picks_outer_saddles() {
    let a = two_colour();
    let s = find_saddles(&a, &ati_search(W, 1.0));
    let rp = RelevanceParams::for_omega(W);
    let up = upper(&s);
    assert_eq!(up.len(), 4);
    let mut by_h: Vec<_> = up
        .iter()
        .map(|sp| (sp.h, relevance_1d(&a, sp, &s, &rp).unwrap()))
        .collect();
    by_h.sort_by(|x, y| x.0.total_cmp(&y.0));
    // the two saddles closest to the real axis (most negative h) carry the
    // amplitude, the two far ones do not
    let n: Vec<i32> = by_h.iter().map(|x| x.1).collect();
    assert_eq!(n, [1, 1, 0, 0]);
}

#[test]
fn two_colour_flowed_contour_passes_relevant_saddles_only() {
    let d = damped(two_colour());
    let (_, c) = flowed(&d, &[300]);
    let s = find_saddles(&two_colour(), &ati_search(W, 1.0));
    let rp = RelevanceParams::for_omega(W);
    for sp in upper(&s) {
        let n = relevance_1d(&two_colour(), sp, &s, &rp).unwrap();
        let dist = distance_to_contour(&c, sp.coords[0]) * W;
        if n == 1 {
            assert!(
                dist < 0.05,
                "relevant saddle {} left at {dist}",
                sp.coords[0] * W
            );
        } else {
            assert!(
                dist > 0.3,
                "irrelevant saddle {} touched at {dist}",
                sp.coords[0] * W
            );
        }
    }
}

#[test]
fn damped_flow_matches_brute_force() {
    for a in [mono(), two_colour()] {
        let d = damped(a);
        let l = half_width();
        let exact = brute_force(&d, -l, l, 200_000);
        let (v, _) = flowed(&d, &[200]);
        assert!(
            (v[0] - exact).norm() < 1e-2 * exact.norm(),
            "{} vs {exact}",
            v[0]
        );
    }
}

#[test]
fn quadrature_invariant_under_flow_time() {
    for a in [mono(), two_colour()] {
        let d = damped(a);
        let (v, _) = flowed(&d, &[100, 200, 400]);
        for i in 0..3 {
            for j in (i + 1)..3 {
                let rel = (v[i] - v[j]).norm() / v[j].norm();
                assert!(rel < 1e-3, "iterations {i},{j}: {rel}");
            }
        }
    }
}

/// Saddles of the damped phase over the whole truncated window.
fn damped_saddles(d: &Damped<AtiAction>) -> Vec<SaddlePoint<1>> {
    let l = half_width();
    let spec = SearchSpec {
        windows: [Window {
            re: (-l, l),
            im: (-3.0 / W, 3.0 / W),
        }],
        grid: (24 * 5, 12),
        ..ati_search(W, 1.0)
    };
    find_saddles(d, &spec)
}

#[test]
fn saddle_sum_matches_flow() {
    let d = damped(mono());
    let s = damped_saddles(&d);
    let mut rp = RelevanceParams::for_omega(W);
    rp.window = (-half_width(), half_width());
    let mut spm = C64::new(0.0, 0.0);
    let mut relevant = 0;
    for sp in &s {
        if relevance_1d(&d, sp, &s, &rp).unwrap() == 1 {
            spm += spm_contribution(&d, sp, |_| ONE).unwrap();
            relevant += 1;
        }
    }
    assert!(relevant >= 8, "{relevant}");
    let (v, _) = flowed(&d, &[200]);
    assert!(
        (spm - v[0]).norm() < 0.05 * v[0].norm(),
        "{spm} vs {}",
        v[0]
    );
}
