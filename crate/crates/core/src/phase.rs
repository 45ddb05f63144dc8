//! Analytic exponents `f = iφ/ħ` of the oscillatory integrands.
//!
//! All flows, saddle searches and quadratures work on `f` directly:
//! `h = Re f` sets the integrand magnitude and `H = Im f` its phase.

use alloc::vec::Vec;
use core::fmt;

use crate::field::Waveform;
#[allow(unused_imports)]
use num_traits::Float;

use crate::C64;

const I: C64 = C64::new(0.0, 1.0);

/// Exponent value, gradient and Hessian at one point.
#[derive(Clone, Copy, Debug)]
pub struct Jet<const N: usize> {
    pub f: C64,
    pub grad: [C64; N],
    pub hess: [[C64; N]; N],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhaseError {
    /// Ionisation and recombination times closer than the configured
    /// minimum; the stationary momentum is singular there.
    CoincidentTimes,
}

impl fmt::Display for PhaseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseError::CoincidentTimes => write!(f, "ionisation and recombination times coincide"),
        }
    }
}

impl core::error::Error for PhaseError {}

pub trait Phase<const N: usize> {
    fn jet(&self, z: &[C64; N]) -> Result<Jet<N>, PhaseError>;

    fn exponent(&self, z: &[C64; N]) -> Result<C64, PhaseError> {
        self.jet(z).map(|j| j.f)
    }

    fn exponent_grad(&self, z: &[C64; N]) -> Result<(C64, [C64; N]), PhaseError> {
        self.jet(z).map(|j| (j.f, j.grad))
    }

    /// The physical action belonging to an exponent value. Defaults to
    /// `φ` in `f = iφ`.
    fn action(&self, f: C64) -> C64 {
        -I * f
    }

    /// Natural time unit of the problem; tolerances are expressed in it.
    fn scale(&self) -> f64 {
        1.0
    }
}

impl<const N: usize, P: Phase<N> + ?Sized> Phase<N> for &P {
    fn jet(&self, z: &[C64; N]) -> Result<Jet<N>, PhaseError> {
        (**self).jet(z)
    }
    fn exponent(&self, z: &[C64; N]) -> Result<C64, PhaseError> {
        (**self).exponent(z)
    }
    fn exponent_grad(&self, z: &[C64; N]) -> Result<(C64, [C64; N]), PhaseError> {
        (**self).exponent_grad(z)
    }
    fn action(&self, f: C64) -> C64 {
        (**self).action(f)
    }
    fn scale(&self) -> f64 {
        (**self).scale()
    }
}

/// `φ(z) = Σ c_k z^k`, integrand `e^{iφ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    pub coeffs: Vec<C64>,
}

impl Poly {
    pub fn new(coeffs: &[C64]) -> Self {
        Poly {
            coeffs: coeffs.to_vec(),
        }
    }

    pub fn real(coeffs: &[f64]) -> Self {
        Poly {
            coeffs: coeffs.iter().map(|&c| C64::new(c, 0.0)).collect(),
        }
    }

    /// `(φ, φ', φ'')`
    pub fn derivs(&self, z: C64) -> (C64, C64, C64) {
        let zero = C64::new(0.0, 0.0);
        let (mut p, mut d1, mut d2) = (zero, zero, zero);
        for &c in self.coeffs.iter().rev() {
            d2 = d2 * z + d1 * 2.0;
            d1 = d1 * z + p;
            p = p * z + c;
        }
        (p, d1, d2)
    }
}

impl Phase<1> for Poly {
    fn jet(&self, z: &[C64; 1]) -> Result<Jet<1>, PhaseError> {
        let (p, d1, d2) = self.derivs(z[0]);
        Ok(Jet {
            f: I * p,
            grad: [I * d1],
            hess: [[I * d2]],
        })
    }
}

/// `φ(z1, z2) = φ_a(z1) + φ_b(z2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Separable {
    pub a: Poly,
    pub b: Poly,
}

impl Phase<2> for Separable {
    fn jet(&self, z: &[C64; 2]) -> Result<Jet<2>, PhaseError> {
        let (pa, a1, a2) = self.a.derivs(z[0]);
        let (pb, b1, b2) = self.b.derivs(z[1]);
        let zero = C64::new(0.0, 0.0);
        Ok(Jet {
            f: I * (pa + pb),
            grad: [I * a1, I * b1],
            hess: [[I * a2, zero], [zero, I * b2]],
        })
    }
}

/// Adds a Gaussian convergence factor `−ε (z − z0)²` to a 1D exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct Damped<P> {
    pub inner: P,
    pub eps: f64,
    pub centre: f64,
}

impl<P: Phase<1>> Phase<1> for Damped<P> {
    fn jet(&self, z: &[C64; 1]) -> Result<Jet<1>, PhaseError> {
        let mut j = self.inner.jet(z)?;
        let d = z[0] - self.centre;
        j.f -= d * d * self.eps;
        j.grad[0] -= d * (2.0 * self.eps);
        j.hess[0][0] -= 2.0 * self.eps;
        Ok(j)
    }
    fn action(&self, f: C64) -> C64 {
        self.inner.action(f)
    }
    fn scale(&self) -> f64 {
        self.inner.scale()
    }
}

/// Photoelectron action `S(t) = ∫_0^t [Ip + (p + A)²/2] dt'`.
///
/// The amplitude integrand is `e^{iS}`, so ionisation times in the upper
/// half plane are exponentially suppressed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtiAction {
    pub wave: Waveform,
    pub ip: f64,
    pub p: f64,
}

impl AtiAction {
    pub fn action(&self, t: C64) -> C64 {
        let p0 = self.wave.point(C64::new(0.0, 0.0));
        let pt = self.wave.point(t);
        t * (self.ip + 0.5 * self.p * self.p) + (pt.b - p0.b) * self.p + (pt.c - p0.c) * 0.5
    }

    pub fn action_derivative(&self, t: C64) -> C64 {
        let u = self.wave.a(t) + self.p;
        u * u * 0.5 + self.ip
    }
}

impl Phase<1> for AtiAction {
    fn jet(&self, z: &[C64; 1]) -> Result<Jet<1>, PhaseError> {
        let t = z[0];
        let pt = self.wave.point(t);
        let u = pt.a + self.p;
        let s = AtiAction::action(self, t);
        let ds = u * u * 0.5 + self.ip;
        let d2s = -(u * pt.e);
        Ok(Jet {
            f: I * s,
            grad: [I * ds],
            hess: [[I * d2s]],
        })
    }
    fn action(&self, f: C64) -> C64 {
        -I * f
    }
    fn scale(&self) -> f64 {
        1.0 / self.wave.omega
    }
}

/// Lewenstein-type recombination action with the stationary momentum
/// substituted, `S = ½ΔC − ΔB²/(2τ) + τ Ip − qω tr`, integrand `e^{−iS}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HhgAction {
    pub wave: Waveform,
    pub ip: f64,
    pub q: C64,
    /// Smallest admissible `|tr − ti|`.
    pub min_travel: f64,
}

/// Action with its first and second derivatives in `(ti, tr)`.
#[derive(Clone, Copy, Debug)]
pub struct HhgValue {
    pub s: C64,
    pub p: C64,
    pub grad: [C64; 2],
    pub hess: [[C64; 2]; 2],
}

impl HhgAction {
    pub fn new(wave: Waveform, ip: f64, q: f64) -> Self {
        HhgAction {
            wave,
            ip,
            q: C64::new(q, 0.0),
            min_travel: 1e-9 / wave.omega,
        }
    }

    pub fn omega(&self) -> f64 {
        self.wave.omega
    }

    pub fn stationary_momentum(&self, ti: C64, tr: C64) -> Result<C64, PhaseError> {
        let tau = tr - ti;
        if tau.norm() < self.min_travel {
            return Err(PhaseError::CoincidentTimes);
        }
        Ok(-(self.wave.point(tr).b - self.wave.point(ti).b) / tau)
    }

    pub fn eval(&self, ti: C64, tr: C64) -> Result<HhgValue, PhaseError> {
        let tau = tr - ti;
        if tau.norm() < self.min_travel {
            return Err(PhaseError::CoincidentTimes);
        }
        let pi = self.wave.point(ti);
        let pr = self.wave.point(tr);
        let db = pr.b - pi.b;
        let dc = pr.c - pi.c;
        let p = -db / tau;
        let s = dc * 0.5 - db * db / (tau * 2.0) + tau * self.ip - self.q * self.wave.omega * tr;
        let ur = p + pr.a;
        let ui = p + pi.a;
        let grad = [
            -(ui * ui) * 0.5 - self.ip,
            ur * ur * 0.5 + self.ip - self.q * self.wave.omega,
        ];
        let s_rr = -(ur * ur) / tau - ur * pr.e;
        let s_ri = ur * ui / tau;
        let s_ii = -ui * (ui / tau - pi.e);
        Ok(HhgValue {
            s,
            p,
            grad,
            hess: [[s_ii, s_ri], [s_ri, s_rr]],
        })
    }

    pub fn action_value(&self, ti: C64, tr: C64) -> Result<C64, PhaseError> {
        self.eval(ti, tr).map(|v| v.s)
    }
}

impl Phase<2> for HhgAction {
    fn jet(&self, z: &[C64; 2]) -> Result<Jet<2>, PhaseError> {
        let v = self.eval(z[0], z[1])?;
        let m = -I;
        Ok(Jet {
            f: m * v.s,
            grad: [m * v.grad[0], m * v.grad[1]],
            hess: [
                [m * v.hess[0][0], m * v.hess[0][1]],
                [m * v.hess[1][0], m * v.hess[1][1]],
            ],
        })
    }
    fn action(&self, f: C64) -> C64 {
        I * f
    }
    fn scale(&self) -> f64 {
        1.0 / self.wave.omega
    }
}
