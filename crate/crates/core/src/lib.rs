//! Picard-Lefschetz evaluation of oscillatory exponential integrals and
//! relevance tests for their saddle points, specialised to strong-field
//! ionisation and high-harmonic generation.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod field;
pub mod flow1d;
pub mod flow2d;
pub mod linalg;
pub mod necklace;
pub mod phase;
pub mod saddle;
pub mod scans;

pub use num_complex::Complex64 as C64;

/// `x mod p` in `[0, p)`.
pub(crate) fn wrap(x: f64, p: f64) -> f64 {
    let r = x % p;
    if r < 0.0 {
        r + p
    } else {
        r
    }
}
