//! Harmonic dipole checks: parity of the spectrum, necklace phase
//! conservation, orbit reconstruction, Stokes detection and the caustic
//! scan.

use thimble_core::field::LaserField;
use thimble_core::flow2d::DipoleParams;
use thimble_core::necklace::{relevance_2d, NecklaceParams, RealDomain};
use thimble_core::phase::{HhgAction, Poly, Separable};
use thimble_core::saddle::{find_saddles, hhg_search, NewtonParams, SaddlePoint, TrackParams};
use thimble_core::scans::{
    caustic_cell, follow_branches, spectrum_point, stokes_candidates, trajectory, CausticSetup,
    Leg, Method, SpectrumParams, StokesParams,
};
use thimble_core::C64;

const IP: f64 = 15.8 / 27.2114;
const W: f64 = 0.044;

fn mono(q: f64) -> HhgAction {
    HhgAction::new(LaserField::monochromatic(0.05, W).waveform(), IP, q)
}

fn period() -> f64 {
    2.0 * core::f64::consts::PI / W
}

#[test]
fn alternate_orders_are_suppressed() {
    let wave = LaserField::monochromatic(0.05, W).waveform();
    let p = SpectrumParams::for_omega(W);
    let pts: Vec<_> = [24.0, 25.0, 26.0]
        .iter()
        .map(|&q| spectrum_point(&wave, IP, q, Method::Both, &p))
        .collect();
    for m in [
        |x: &thimble_core::scans::SpectrumPoint| x.intensity_spm(),
        |x: &thimble_core::scans::SpectrumPoint| x.intensity_plf(),
    ] {
        let i: Vec<f64> = pts.iter().map(|x| m(x).unwrap()).collect();
        let db = 10.0 * (i[0].min(i[2]) / i[1]).log10();
        assert!(db >= 20.0, "{i:?}");
    }
}

#[test]
fn necklace_beads_keep_the_saddle_phase() {
    let a = mono(25.0);
    let s = find_saddles(&a, &hhg_search(W));
    let np = NecklaceParams::for_omega(W);
    let dom = RealDomain::HhgStrip {
        period: period(),
        max_travel: period(),
    };
    let mut flowed = 0;
    for sp in &s {
        let r = relevance_2d(&a, sp, &s, &dom, &np).unwrap();
        if let Some(n) = r.necklace {
            assert!(n.max_h_drift < 1e-8, "{}", n.max_h_drift);
            flowed += 1;
        }
    }
    assert!(flowed >= 4);
}

/// `ẍ = −E(t)` by RK4 from `(x0, v0)`; returns the path at `n + 1` points.
fn classical(
    wave: &thimble_core::field::Waveform,
    t0: f64,
    t1: f64,
    x0: f64,
    v0: f64,
    n: usize,
) -> Vec<f64> {
    let acc = |t: f64| -wave.e(C64::new(t, 0.0)).re;
    let h = (t1 - t0) / n as f64;
    let (mut x, mut v) = (x0, v0);
    let mut out = vec![x];
    for k in 0..n {
        let t = t0 + h * k as f64;
        let (k1x, k1v) = (v, acc(t));
        let (k2x, k2v) = (v + 0.5 * h * k1v, acc(t + 0.5 * h));
        let (k3x, k3v) = (v + 0.5 * h * k2v, acc(t + 0.5 * h));
        let (k4x, k4v) = (v + h * k3v, acc(t + h));
        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        out.push(x);
    }
    out
}

#[test]
fn short_orbit_excursion_matches_classical_shooting() {
    let a = mono(25.0);
    let wave = LaserField::monochromatic(0.05, W).waveform();
    let s = find_saddles(&a, &hhg_search(W));
    let short = s
        .iter()
        .filter(|x| x.h <= 0.0 && x.coords[0].re < 0.5 * period())
        .min_by(|x, y| {
            (x.coords[1] - x.coords[0])
                .re
                .total_cmp(&(y.coords[1] - y.coords[0]).re)
        })
        .unwrap();
    let tr = trajectory(&a, short.coords, 400).unwrap();
    assert!(tr.closure < 1e-8);
    let real: Vec<_> = tr.samples.iter().filter(|x| x.leg == Leg::Real).collect();
    let (t0, t1) = (real[0].t.re, real[real.len() - 1].t.re);
    let (x0, x1) = (real[0].x.re, real[real.len() - 1].x.re);
    // linear in the launch velocity: two shots fix it
    let n = 20_000;
    let end = |v0: f64| *classical(&wave, t0, t1, x0, v0, n).last().unwrap();
    let (e0, e1) = (end(0.0), end(1.0));
    let v0 = (x1 - e0) / (e1 - e0);
    let path = classical(&wave, t0, t1, x0, v0, n);
    let oracle = path.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let ours = real.iter().fold(0.0f64, |m, s| m.max(s.x.re.abs()));
    assert!(oracle > 5.0);
    assert!((ours - oracle).abs() < 1e-2 * oracle, "{ours} vs {oracle}");
}

fn cubic_pair(s: f64) -> Separable {
    Separable {
        a: Poly::real(&[0.0, -1.0, 0.0, 1.0 / 3.0]),
        b: Poly::real(&[0.0, -s * s, 0.0, 1.0 / 3.0]),
    }
}

fn toy_stokes() -> StokesParams {
    StokesParams {
        track: TrackParams {
            newton: NewtonParams::default(),
            jump_tol: 0.2,
            max_bisect: 8,
        },
        root_tol: 1e-10,
        param_tol: 1e-10,
        max_bisect: 80,
    }
}

#[test]
fn stokes_root_of_a_separable_cubic() {
    // H at (1, −s) and (−1, s) is −2/3 + 2s³/3 and its negative
    let path: Vec<f64> = (0..=20).map(|k| 0.5 + 0.05 * k as f64).collect();
    let starts: Vec<_> = [(1.0, -0.5), (-1.0, 0.5)]
        .iter()
        .map(|&(x, y)| {
            SaddlePoint::at(&cubic_pair(0.5), [C64::new(x, 0.0), C64::new(y, 0.0)]).unwrap()
        })
        .collect();
    let scan = stokes_candidates(cubic_pair, &starts, &path, &toy_stokes()).unwrap();
    assert_eq!(scan.candidates.len(), 1);
    assert!((scan.candidates[0].param - 1.0).abs() < 1e-8);
    assert!(scan.degenerate.is_empty());
}

#[test]
fn identical_phases_are_flagged_degenerate() {
    // i(z³/3 + s z) has saddles on the imaginary axis with real exponent
    let fam = |s: f64| Separable {
        a: Poly::real(&[0.0, s, 0.0, 1.0 / 3.0]),
        b: Poly::real(&[0.0, 0.0, 1.0]),
    };
    let path: Vec<f64> = (0..=10).map(|k| 1.0 + 0.1 * k as f64).collect();
    let z = C64::new(0.0, 0.0);
    let starts: Vec<_> = [1.0, -1.0]
        .iter()
        .map(|&y| SaddlePoint::at(&fam(1.0), [C64::new(0.0, y), z]).unwrap())
        .collect();
    let scan = stokes_candidates(fam, &starts, &path, &toy_stokes()).unwrap();
    assert!(scan.candidates.is_empty());
    assert_eq!(scan.degenerate, vec![(0, 1)]);
}

#[test]
fn single_colour_caustic_grid_ignores_the_phase() {
    let setup = CausticSetup {
        e1: 0.05,
        ratio: 0.0,
        omega: W,
        ip: IP,
    };
    let d = DipoleParams::for_omega(W);
    let a = caustic_cell(&setup, 26.0, 0.3, &d).intensity.unwrap();
    let b = caustic_cell(&setup, 26.0, 0.9, &d).intensity.unwrap();
    assert!(a > 0.0);
    assert!((a - b).abs() < 1e-12 * a);
}

#[test]
fn branches_keep_identity_across_the_cutoff() {
    let wave = LaserField::monochromatic(0.05, W).waveform();
    let p = SpectrumParams::for_omega(W);
    let pts: Vec<_> = (30..=50)
        .step_by(4)
        .map(|q| spectrum_point(&wave, IP, q as f64, Method::Spm, &p))
        .collect();
    let br = follow_branches(&pts);
    for (p, b) in pts.iter().zip(&br) {
        let [Some(s), Some(l)] = *b else {
            panic!("missing branch at q={}", p.q)
        };
        assert_ne!(s, l);
    }
    // below the cutoff the short orbit has the shorter excursion
    let tau = |k: usize| (pts[0].saddles[k].coords[1] - pts[0].saddles[k].coords[0]).re;
    assert!(tau(br[0][0].unwrap()) < tau(br[0][1].unwrap()));
    // beyond it only the long orbit carries the amplitude
    let last = pts.last().unwrap();
    assert_eq!(last.saddles[br[br.len() - 1][0].unwrap()].n_sigma, Some(0));
    assert_eq!(last.saddles[br[br.len() - 1][1].unwrap()].n_sigma, Some(1));
}
