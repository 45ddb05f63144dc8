//! Critical points of an exponent, their real Hessian eigen-structure and
//! Gaussian contributions.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{det, solve, sym_eigen};
use crate::phase::{Phase, PhaseError};
#[allow(unused_imports)]
use num_traits::Float;

use crate::C64;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Debug, PartialEq)]
pub enum SaddleError {
    DegenerateHessian,
    /// Newton could not follow the branch past this parameter value.
    LostTrack {
        param: f64,
    },
    Phase(PhaseError),
}

impl fmt::Display for SaddleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SaddleError::DegenerateHessian => write!(f, "complex Hessian is (nearly) singular"),
            SaddleError::LostTrack { param } => write!(f, "lost saddle track at parameter {param}"),
            SaddleError::Phase(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for SaddleError {}

impl From<PhaseError> for SaddleError {
    fn from(e: PhaseError) -> Self {
        SaddleError::Phase(e)
    }
}

/// Eigen-structure of the real Hessian of `h` in the coordinates
/// `(Re z1, Im z1, Re z2, Im z2, ...)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenBasis<const N: usize> {
    /// All `2N` eigenvalues, descending.
    pub values: Vec<f64>,
    /// Unit eigenvectors of the `N` positive eigenvalues, in the order of
    /// `values`.
    pub ascent: Vec<[C64; N]>,
    /// Unit eigenvectors of the `N` negative eigenvalues; `descent[j]`
    /// belongs to `values[2N − 1 − j]`, the partner of `values[j]`.
    pub descent: Vec<[C64; N]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaddlePoint<const N: usize> {
    pub coords: [C64; N],
    /// Exponent `f` of the integrand `e^f` at the saddle.
    pub exponent: C64,
    pub action: C64,
    pub h: f64,
    pub big_h: f64,
    /// Complex Hessian of `f`.
    pub hessian: [[C64; N]; N],
    pub eigen: EigenBasis<N>,
    pub degenerate: bool,
    pub n_sigma: Option<i32>,
    pub window_label: Option<String>,
}

pub const DEGENERATE_DET: f64 = 1e-12;

impl<const N: usize> SaddlePoint<N> {
    pub fn at<P: Phase<N>>(phase: &P, coords: [C64; N]) -> Result<Self, PhaseError> {
        let j = phase.jet(&coords)?;
        let eigen = eigen_basis(&j.hess);
        Ok(SaddlePoint {
            coords,
            exponent: j.f,
            action: phase.action(j.f),
            h: j.f.re,
            big_h: j.f.im,
            hessian: j.hess,
            eigen,
            degenerate: det(&j.hess).norm() < DEGENERATE_DET,
            n_sigma: None,
            window_label: None,
        })
    }

    /// Max-norm distance between coordinates.
    pub fn distance(&self, other: &[C64; N]) -> f64 {
        dist(&self.coords, other)
    }
}

pub(crate) fn dist<const N: usize>(a: &[C64; N], b: &[C64; N]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Real Hessian of `h = Re f` from the complex Hessian `F` of `f`.
pub fn real_hessian_from<const N: usize>(hess: &[[C64; N]; N]) -> Vec<f64> {
    let n = 2 * N;
    let mut r = vec![0.0; n * n];
    for j in 0..N {
        for k in 0..N {
            let f = hess[j][k];
            r[(2 * j) * n + 2 * k] = f.re;
            r[(2 * j) * n + 2 * k + 1] = -f.im;
            r[(2 * j + 1) * n + 2 * k] = -f.im;
            r[(2 * j + 1) * n + 2 * k + 1] = -f.re;
        }
    }
    r
}

pub fn real_hessian<const N: usize, P: Phase<N>>(
    phase: &P,
    z: &[C64; N],
) -> Result<Vec<f64>, PhaseError> {
    Ok(real_hessian_from(&phase.jet(z)?.hess))
}

fn to_complex<const N: usize>(v: &[f64]) -> [C64; N] {
    core::array::from_fn(|j| C64::new(v[2 * j], v[2 * j + 1]))
}

pub fn eigen_basis<const N: usize>(hess: &[[C64; N]; N]) -> EigenBasis<N> {
    let (values, vecs) = sym_eigen(&real_hessian_from(hess), 2 * N);
    let ascent = vecs[..N].iter().map(|v| to_complex(v)).collect();
    let descent = vecs[N..].iter().rev().map(|v| to_complex(v)).collect();
    EigenBasis {
        values,
        ascent,
        descent,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonParams {
    /// Convergence threshold on `|∇f|`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonParams {
    fn default() -> Self {
        NewtonParams {
            tol: 1e-10,
            max_iter: 80,
        }
    }
}

fn grad_norm<const N: usize>(g: &[C64; N]) -> f64 {
    g.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Damped Newton iteration on `∇f = 0`.
pub fn newton<const N: usize, P: Phase<N>>(
    phase: &P,
    start: [C64; N],
    params: &NewtonParams,
) -> Option<[C64; N]> {
    let mut z = start;
    let mut j = phase.jet(&z).ok()?;
    let mut gn = grad_norm(&j.grad);
    for _ in 0..params.max_iter {
        if gn < params.tol {
            return Some(z);
        }
        let step = solve(&j.hess, &j.grad)?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial: [C64; N] = core::array::from_fn(|k| z[k] - step[k] * lambda);
            if let Ok(jt) = phase.jet(&trial) {
                let gt = grad_norm(&jt.grad);
                if gt.is_finite() && (gt < gn || lambda < 1e-3) {
                    z = trial;
                    j = jt;
                    gn = gt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    (gn < params.tol).then_some(z)
}

/// Rectangle in one complex coordinate; real range half-open.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl Window {
    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re.0 && z.re < self.re.1 && z.im >= self.im.0 && z.im <= self.im.1
    }
}

/// Coordinates in which search windows are expressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chart {
    Direct,
    /// Second window applies to the travel time `z2 − z1`.
    Travel,
}

impl Chart {
    fn to_search<const N: usize>(self, z: &[C64; N]) -> [C64; N] {
        match self {
            Chart::Direct => *z,
            Chart::Travel => core::array::from_fn(|k| if k == 1 { z[1] - z[0] } else { z[k] }),
        }
    }

    fn from_search<const N: usize>(self, s: &[C64; N]) -> [C64; N] {
        match self {
            Chart::Direct => *s,
            Chart::Travel => core::array::from_fn(|k| if k == 1 { s[1] + s[0] } else { s[k] }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpec<const N: usize> {
    pub windows: [Window; N],
    pub chart: Chart,
    /// Starting points per window along (Re, Im).
    pub grid: (usize, usize),
    pub newton: NewtonParams,
    pub dedup_tol: f64,
}

impl<const N: usize> SearchSpec<N> {
    pub fn contains(&self, z: &[C64; N]) -> bool {
        let s = self.chart.to_search(z);
        self.windows.iter().zip(&s).all(|(w, x)| w.contains(*x))
    }
}

/// Default HHG search over one cycle of ionisation times and up to one
/// cycle of travel time, `|Im ωt| ≤ 2`.
pub fn hhg_search(omega: f64) -> SearchSpec<2> {
    let t = 2.0 * core::f64::consts::PI / omega;
    let im = (-2.0 / omega, 2.0 / omega);
    SearchSpec {
        windows: [Window { re: (0.0, t), im }, Window { re: (0.0, t), im }],
        chart: Chart::Travel,
        grid: (16, 6),
        newton: NewtonParams::default(),
        dedup_tol: 1e-6 / omega,
    }
}

/// Default ATI search: `cycles` periods starting at zero, `|Im ωt| ≤ 3`.
pub fn ati_search(omega: f64, cycles: f64) -> SearchSpec<1> {
    let t = 2.0 * core::f64::consts::PI / omega;
    SearchSpec {
        windows: [Window {
            re: (0.0, cycles * t),
            im: (-3.0 / omega, 3.0 / omega),
        }],
        chart: Chart::Direct,
        grid: ((24.0 * cycles) as usize, 12),
        newton: NewtonParams::default(),
        dedup_tol: 1e-6 / omega,
    }
}

fn grid_points(w: &Window, n: (usize, usize)) -> Vec<C64> {
    let mut out = Vec::with_capacity(n.0 * n.1);
    for a in 0..n.0 {
        for b in 0..n.1 {
            let x = w.re.0 + (w.re.1 - w.re.0) * (a as f64 + 0.5) / n.0 as f64;
            let y = w.im.0 + (w.im.1 - w.im.0) * (b as f64 + 0.5) / n.1 as f64;
            out.push(C64::new(x, y));
        }
    }
    out
}

/// All multi-start initial guesses for a search.
pub fn initial_guesses<const N: usize>(spec: &SearchSpec<N>) -> Vec<[C64; N]> {
    let axes: Vec<Vec<C64>> = spec
        .windows
        .iter()
        .map(|w| grid_points(w, spec.grid))
        .collect();
    let total: usize = axes.iter().map(|a| a.len()).product();
    (0..total)
        .map(|mut idx| {
            let s: [C64; N] = core::array::from_fn(|k| {
                let a = &axes[k];
                let v = a[idx % a.len()];
                idx /= a.len();
                v
            });
            spec.chart.from_search(&s)
        })
        .collect()
}

/// Sorts by the real part of the first coordinate and merges points closer
/// than `tol`.
pub fn dedup_roots<const N: usize>(mut roots: Vec<[C64; N]>, tol: f64) -> Vec<[C64; N]> {
    roots.sort_by(|a, b| {
        for k in 0..N {
            let o = a[k]
                .re
                .total_cmp(&b[k].re)
                .then(a[k].im.total_cmp(&b[k].im));
            if o != core::cmp::Ordering::Equal {
                return o;
            }
        }
        core::cmp::Ordering::Equal
    });
    let mut out: Vec<[C64; N]> = Vec::new();
    for r in roots {
        if !out.iter().any(|o| dist(o, &r) < tol) {
            out.push(r);
        }
    }
    out
}

/// Multi-start Newton search for critical points inside the windows.
pub fn find_saddles<const N: usize, P: Phase<N>>(
    phase: &P,
    spec: &SearchSpec<N>,
) -> Vec<SaddlePoint<N>> {
    let roots: Vec<[C64; N]> = initial_guesses(spec)
        .into_iter()
        .filter_map(|z0| newton(phase, z0, &spec.newton))
        .collect();
    saddles_from_roots(phase, spec, roots)
}

/// Window filtering, dedup and construction of saddle records from raw
/// Newton roots (the parallel driver calls Newton itself).
pub fn saddles_from_roots<const N: usize, P: Phase<N>>(
    phase: &P,
    spec: &SearchSpec<N>,
    roots: Vec<[C64; N]>,
) -> Vec<SaddlePoint<N>> {
    let inside: Vec<[C64; N]> = roots.into_iter().filter(|z| spec.contains(z)).collect();
    dedup_roots(inside, spec.dedup_tol)
        .into_iter()
        .filter_map(|z| SaddlePoint::at(phase, z).ok())
        .collect()
}

/// Gaussian approximation of `∫ P e^f` around one saddle.
///
/// The thimble is parameterised by the descent eigenvectors `W`; its
/// orientation is taken from the real domain, i.e. from the sign of
/// `det Re W`.
pub fn spm_contribution<const N: usize, P: Phase<N>>(
    phase: &P,
    saddle: &SaddlePoint<N>,
    prefactor: impl Fn(&[C64; N]) -> C64,
) -> Result<C64, SaddleError> {
    let j = phase.jet(&saddle.coords)?;
    if det(&j.hess).norm() < DEGENERATE_DET {
        return Err(SaddleError::DegenerateHessian);
    }
    let eig = eigen_basis(&j.hess);
    let w: [[C64; N]; N] = core::array::from_fn(|r| core::array::from_fn(|c| eig.descent[c][r]));
    let mut m = [[C64::new(0.0, 0.0); N]; N];
    for a in 0..N {
        for b in 0..N {
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..N {
                for c in 0..N {
                    acc += w[r][a] * j.hess[r][c] * w[c][b];
                }
            }
            m[a][b] = -acc;
        }
    }
    let re_w: [[C64; N]; N] =
        core::array::from_fn(|r| core::array::from_fn(|c| C64::new(w[r][c].re, 0.0)));
    let orient = det(&re_w).re.signum();
    let det_m = det(&m);
    let gauss = (2.0 * core::f64::consts::PI).powi(N as i32).sqrt() / det_m.sqrt();
    Ok(det(&w) * orient * gauss * j.f.exp() * prefactor(&saddle.coords))
}

/// One followed branch of a saddle along a parameter path.
#[derive(Clone, Debug, PartialEq)]
pub struct Track<const N: usize> {
    pub params: Vec<f64>,
    pub points: Vec<SaddlePoint<N>>,
    /// Indices into `params` where Newton landed farther than the jump
    /// tolerance from the extrapolated position.
    pub jumps: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackParams {
    pub newton: NewtonParams,
    pub jump_tol: f64,
    pub max_bisect: usize,
}

/// Follows `start` through `path` by extrapolated Newton continuation.
pub fn track_saddle<const N: usize, P: Phase<N>>(
    family: impl Fn(f64) -> P,
    start: &SaddlePoint<N>,
    path: &[f64],
    params: &TrackParams,
) -> Result<Track<N>, SaddleError> {
    let mut out = Track {
        params: Vec::new(),
        points: Vec::new(),
        jumps: Vec::new(),
    };
    if path.is_empty() {
        return Ok(out);
    }
    let mut prev: Option<(f64, [C64; N])> = None;
    let mut cur = (path[0], start.coords);
    {
        let ph = family(path[0]);
        let z = newton(&ph, start.coords, &params.newton)
            .ok_or(SaddleError::LostTrack { param: path[0] })?;
        cur.1 = z;
        out.params.push(path[0]);
        out.points.push(SaddlePoint::at(&ph, z)?);
    }
    for (idx, &target) in path.iter().enumerate().skip(1) {
        let mut jumped = false;
        while cur.0 != target {
            let mut step = target - cur.0;
            let mut depth = 0;
            loop {
                let p = cur.0 + step;
                let guess: [C64; N] = match prev {
                    Some((pp, zp)) if pp != cur.0 => {
                        let r = (p - cur.0) / (cur.0 - pp);
                        core::array::from_fn(|k| cur.1[k] + (cur.1[k] - zp[k]) * r)
                    }
                    _ => cur.1,
                };
                let ph = family(p);
                match newton(&ph, guess, &params.newton) {
                    Some(z)
                        if dist(&z, &guess) <= params.jump_tol || depth >= params.max_bisect =>
                    {
                        if dist(&z, &guess) > params.jump_tol {
                            jumped = true;
                        }
                        prev = Some(cur);
                        cur = (p, z);
                        break;
                    }
                    None if depth >= params.max_bisect => {
                        return Err(SaddleError::LostTrack { param: p })
                    }
                    _ => {
                        step *= 0.5;
                        depth += 1;
                    }
                }
            }
        }
        let ph = family(target);
        out.params.push(target);
        out.points.push(SaddlePoint::at(&ph, cur.1)?);
        if jumped {
            out.jumps.push(idx);
        }
    }
    Ok(out)
}

/// Tags saddles by clusters of `Re z1` modulo `period`: consecutive
/// saddles closer than `gap` share a letter.
///
/// This is a presentation heuristic only.
pub fn label_windows<const N: usize>(saddles: &mut [SaddlePoint<N>], period: f64, gap: f64) {
    let mut order: Vec<(f64, usize)> = saddles
        .iter()
        .enumerate()
        .map(|(i, s)| (crate::wrap(s.coords[0].re, period), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut label = 0u8;
    let mut last: Option<f64> = None;
    for (x, i) in order {
        if let Some(l) = last {
            if x - l > gap {
                label += 1;
            }
        }
        last = Some(x);
        let ch = (b'A' + label.min(25)) as char;
        saddles[i].window_label = Some(String::from(ch));
    }
}

/// Gradient norm of the physical action at a point.
pub fn action_gradient_norm<const N: usize, P: Phase<N>>(
    phase: &P,
    z: &[C64; N],
) -> Result<f64, PhaseError> {
    // |∂f| = |∂φ| because f and φ differ by a unit factor
    Ok(grad_norm(&phase.jet(z)?.grad))
}

/// `−i v`, the partner of an ascent vector under the eigenvalue pairing.
pub fn pair_vector<const N: usize>(v: &[C64; N]) -> [C64; N] {
    core::array::from_fn(|k| -I * v[k])
}
