//! Co-polarised one- and two-colour driving fields.
//!
//! Every family is stored internally as a sum of two harmonics,
//! `E(t) = Σ_k e_k cos(k ω t + ψ_k)` for `k = 1, 2`, which makes the
//! antiderivatives of `A` and `A²` available in closed form and keeps all
//! quantities entire in complex time.

use core::f64::consts::FRAC_PI_2;

#[allow(unused_imports)]
use num_traits::Float;

use crate::C64;

/// Field shape. The amplitudes and phase live in [`LaserField`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldFamily {
    /// `E1 sin(ωt)`; `E2` and `phase2` are ignored.
    Monochromatic,
    /// `E1 cos(ωt) + E2 cos(2ωt + φ)`.
    TwoColourCos,
    /// `E1 sin(ωt) + E2 sin(2ωt + φ)`.
    SwitchoverSin,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaserField {
    pub e1: f64,
    pub e2: f64,
    pub omega: f64,
    pub phase2: f64,
    pub family: FieldFamily,
}

impl LaserField {
    pub fn monochromatic(e0: f64, omega: f64) -> Self {
        LaserField {
            e1: e0,
            e2: 0.0,
            omega,
            phase2: 0.0,
            family: FieldFamily::Monochromatic,
        }
    }

    pub fn two_colour_cos(e1: f64, e2: f64, omega: f64, phase2: f64) -> Self {
        LaserField {
            e1,
            e2,
            omega,
            phase2,
            family: FieldFamily::TwoColourCos,
        }
    }

    pub fn switchover_sin(e1: f64, e2: f64, omega: f64, phase2: f64) -> Self {
        LaserField {
            e1,
            e2,
            omega,
            phase2,
            family: FieldFamily::SwitchoverSin,
        }
    }

    pub fn period(&self) -> f64 {
        2.0 * core::f64::consts::PI / self.omega
    }

    pub fn waveform(&self) -> Waveform {
        let (e2, psi1, psi2) = match self.family {
            FieldFamily::Monochromatic => (0.0, -FRAC_PI_2, 0.0),
            FieldFamily::TwoColourCos => (self.e2, 0.0, self.phase2),
            FieldFamily::SwitchoverSin => (self.e2, -FRAC_PI_2, self.phase2 - FRAC_PI_2),
        };
        Waveform {
            omega: self.omega,
            amp: [C64::new(self.e1, 0.0), C64::new(e2, 0.0)],
            psi: [psi1, psi2],
        }
    }

    /// Electric field and vector potential at complex time `t`.
    pub fn eval(&self, t: C64) -> (C64, C64) {
        let w = self.waveform();
        (w.e(t), w.a(t))
    }
}

/// Two-harmonic waveform with possibly complex amplitudes.
///
/// Complex amplitudes only arise when a mixing angle is continued off the
/// real axis; everything else stays real on the real time axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Waveform {
    pub omega: f64,
    pub amp: [C64; 2],
    pub psi: [f64; 2],
}

/// Values of the field and its first antiderivatives at one time.
#[derive(Clone, Copy, Debug)]
pub struct FieldPoint {
    pub e: C64,
    pub a: C64,
    /// `∫ A dt`
    pub b: C64,
    /// `∫ A² dt`
    pub c: C64,
}

impl Waveform {
    fn theta(&self, k: usize, t: C64) -> C64 {
        t * ((k + 1) as f64 * self.omega) + self.psi[k]
    }

    /// `a_k` in `A = Σ a_k sin θ_k`.
    fn a_coef(&self, k: usize) -> C64 {
        -self.amp[k] / ((k + 1) as f64 * self.omega)
    }

    pub fn e(&self, t: C64) -> C64 {
        self.amp[0] * self.theta(0, t).cos() + self.amp[1] * self.theta(1, t).cos()
    }

    pub fn a(&self, t: C64) -> C64 {
        self.a_coef(0) * self.theta(0, t).sin() + self.a_coef(1) * self.theta(1, t).sin()
    }

    pub fn point(&self, t: C64) -> FieldPoint {
        let w = self.omega;
        let th = [self.theta(0, t), self.theta(1, t)];
        let (s0, c0) = (th[0].sin(), th[0].cos());
        let (s1, c1) = (th[1].sin(), th[1].cos());
        let a0 = self.a_coef(0);
        let a1 = self.a_coef(1);

        let e = self.amp[0] * c0 + self.amp[1] * c1;
        let a = a0 * s0 + a1 * s1;
        // ∫ a_k sin θ_k = −a_k cos θ_k / (kω)
        let b = -(a0 * c0 / w) - a1 * c1 / (2.0 * w);
        // ∫ a² sin²θ = a² (t/2 − sin 2θ / (4kω))
        let sq0 = a0 * a0 * (t * 0.5 - (th[0] * 2.0).sin() / (4.0 * w));
        let sq1 = a1 * a1 * (t * 0.5 - (th[1] * 2.0).sin() / (8.0 * w));
        // 2 a0 a1 sinθ0 sinθ1 = a0 a1 [cos(θ0 − θ1) − cos(θ0 + θ1)]
        let cross = a0 * a1 * (-(th[0] - th[1]).sin() / w - (th[0] + th[1]).sin() / (3.0 * w));
        FieldPoint {
            e,
            a,
            b,
            c: sq0 + sq1 + cross,
        }
    }

    /// Cycle-averaged quiver energy `(A1² + A2²)/4`.
    pub fn ponderomotive(&self) -> C64 {
        let a0 = self.a_coef(0);
        let a1 = self.a_coef(1);
        (a0 * a0 + a1 * a1) / 4.0
    }
}

/// Mixing-angle parameterisation that keeps `Up` fixed while moving the
/// field from `ω` to `2ω`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwitchoverConfig {
    pub theta: f64,
    pub e0: f64,
    pub omega: f64,
}

impl SwitchoverConfig {
    pub fn field(&self) -> LaserField {
        switchover_field(self)
    }

    /// Vector-potential amplitudes `(A1, A2)`.
    pub fn potentials(&self) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (c * self.e0 / self.omega, s * self.e0 / self.omega)
    }
}

pub fn switchover_field(cfg: &SwitchoverConfig) -> LaserField {
    let (s, c) = cfg.theta.sin_cos();
    LaserField::switchover_sin(cfg.e0 * c, 2.0 * cfg.e0 * s, cfg.omega, 0.0)
}

/// Switchover waveform for a complex mixing angle.
pub fn switchover_waveform(theta: C64, e0: f64, omega: f64, phase2: f64) -> Waveform {
    Waveform {
        omega,
        amp: [theta.cos() * e0, theta.sin() * (2.0 * e0)],
        psi: [-FRAC_PI_2, phase2 - FRAC_PI_2],
    }
}

/// Ponderomotive energy and classical cutoff order `(Ip + 3.17 Up)/ω`.
pub fn ponderomotive_and_cutoff(cfg: &SwitchoverConfig, ip: f64) -> (f64, f64) {
    let (a1, a2) = cfg.potentials();
    let up = (a1 * a1 + a2 * a2) / 4.0;
    (up, (ip + 3.17 * up) / cfg.omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn single_cosine_at_origin() {
        let f = LaserField::two_colour_cos(1.0, 0.0, 1.0, 0.0);
        let (e, a) = f.eval(c(0.0, 0.0));
        assert!((e - 1.0).norm() < 1e-15);
        assert!(a.norm() < 1e-15);
    }

    #[test]
    fn second_colour_out_of_phase() {
        let f = LaserField::two_colour_cos(1.0, 0.5, 1.0, PI);
        let (e, _) = f.eval(c(0.0, 0.0));
        assert!((e - 0.5).norm() < 1e-15);
    }

    #[test]
    fn sine_peak() {
        let f = LaserField::monochromatic(0.05, 0.044);
        let (e, _) = f.eval(c(PI / (2.0 * 0.044), 0.0));
        assert!((e - 0.05).norm() < 1e-15);
    }

    #[test]
    fn antiderivatives_by_quadrature() {
        let f = LaserField::two_colour_cos(0.05, 0.02, 0.044, 0.7).waveform();
        let t0 = c(3.0, 1.5);
        let t1 = c(41.0, -0.5);
        // composite Simpson along the straight segment
        let n = 2000;
        let dt = (t1 - t0) / n as f64;
        let (mut ia, mut ia2) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for k in 0..=n {
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let a = f.a(t0 + dt * k as f64);
            ia += a * w;
            ia2 += a * a * w;
        }
        ia *= dt / 3.0;
        ia2 *= dt / 3.0;
        let (p0, p1) = (f.point(t0), f.point(t1));
        assert!((p1.b - p0.b - ia).norm() < 1e-10 * ia.norm().max(1.0));
        assert!((p1.c - p0.c - ia2).norm() < 1e-10 * ia2.norm().max(1.0));
    }

    #[test]
    fn vector_potential_has_zero_mean() {
        let f = LaserField::two_colour_cos(0.05, 0.03, 0.044, 1.1).waveform();
        let t = f.omega;
        let period = 2.0 * PI / t;
        let db = f.point(c(period + 0.3, 0.0)).b - f.point(c(0.3, 0.0)).b;
        assert!(db.norm() < 1e-12);
    }

    #[test]
    fn switchover_limits() {
        let f0 = SwitchoverConfig {
            theta: 0.0,
            e0: 0.05,
            omega: 0.044,
        }
        .field();
        assert_eq!((f0.e1, f0.e2), (0.05, 0.0));
        let f1 = SwitchoverConfig {
            theta: PI / 2.0,
            e0: 0.05,
            omega: 0.044,
        }
        .field();
        assert!(f1.e1.abs() < 1e-17 && (f1.e2 - 0.1).abs() < 1e-17);
        let f21 = SwitchoverConfig {
            theta: 21f64.to_radians(),
            e0: 0.05,
            omega: 0.044,
        }
        .field();
        assert!((f21.e2 / f21.e1 - 0.78).abs() < 0.02);
    }

    #[test]
    fn ponderomotive_numbers() {
        let w = Waveform {
            omega: 1.0,
            amp: [c(2.0, 0.0), c(0.0, 0.0)],
            psi: [0.0, 0.0],
        };
        assert!((w.ponderomotive() - 1.0).norm() < 1e-15);
        let cfg = SwitchoverConfig {
            theta: 0.0,
            e0: 0.05,
            omega: 0.044,
        };
        let (up, qc) = ponderomotive_and_cutoff(&cfg, 15.8 / 27.2114);
        assert!((up - 0.322831).abs() < 1e-5);
        assert!((qc - 36.45).abs() < 0.05);
    }

    #[test]
    fn switchover_potentials_match_field() {
        for deg in [0.0, 13.0, 45.0, 88.0] {
            let cfg = SwitchoverConfig {
                theta: f64::to_radians(deg),
                e0: 0.05,
                omega: 0.044,
            };
            let w = cfg.field().waveform();
            let (a1, a2) = cfg.potentials();
            assert!((w.a_coef(0).norm() - a1).abs() < 1e-14);
            assert!((w.a_coef(1).norm() - a2).abs() < 1e-14);
        }
    }
}
