//! Ohmic spectral densities and the common-bath cross-spectrum.
//!
//! The bath enters the model only through `J(ω) = χ·ω·coth(ω)`, with the
//! frequency measured in units of the qubit level spacing. At `ω = 0` the
//! analytic limit `J(0) = χ` is used.

use crate::error::{Error, Result};

/// Below this frequency `ω·coth(ω)` is evaluated from its series.
const SERIES_CUTOFF: f64 = 1e-6;

/// Ohmic spectral density `J(ω) = χ·ω·coth(ω)` of one qubit's bath channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralDensity {
    chi: f64,
}

impl SpectralDensity {
    pub fn new(chi: f64) -> Result<Self> {
        if !chi.is_finite() || chi < 0.0 {
            return Err(Error::Domain(format!(
                "dissipation coefficient must be finite and >= 0, got {chi}"
            )));
        }
        Ok(Self { chi })
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    /// `J(ω)` for `ω >= 0`. Negative frequencies are rejected; the one-sided
    /// rate convention lives in [`cross_spectrum`].
    pub fn evaluate(&self, omega: f64) -> Result<f64> {
        if omega.is_nan() || omega < 0.0 {
            return Err(Error::Domain(format!(
                "spectral density needs omega >= 0, got {omega}"
            )));
        }
        Ok(self.chi * omega_coth(omega))
    }
}

/// `ω·coth(ω)` for `ω >= 0`, continuous at zero.
fn omega_coth(omega: f64) -> f64 {
    if omega < SERIES_CUTOFF {
        1.0 + omega * omega / 3.0
    } else {
        omega / omega.tanh()
    }
}

/// One-sided cross-spectrum `√(J_a(ω)·J_b(ω))` for `ω >= 0`, zero for `ω < 0`.
///
/// For `a == b` this is `J_a(ω)` itself.
pub fn cross_spectrum(a: &SpectralDensity, b: &SpectralDensity, omega: f64) -> f64 {
    if omega.is_nan() || omega < 0.0 {
        return 0.0;
    }
    let shape = omega_coth(omega);
    (a.chi * b.chi).sqrt() * shape
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sd(chi: f64) -> SpectralDensity {
        SpectralDensity::new(chi).unwrap()
    }

    #[test]
    fn zero_frequency_limit() {
        assert_eq!(sd(0.04).evaluate(0.0).unwrap(), 0.04);
    }

    #[test]
    fn direct_value() {
        // 0.04 * 0.2 * cosh(0.2) / sinh(0.2), evaluated independently.
        let expected = 0.04 * 0.2 * 0.2f64.cosh() / 0.2f64.sinh();
        let got = sd(0.04).evaluate(0.2).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got / 0.0405320 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn zero_coefficient() {
        assert_eq!(sd(0.0).evaluate(1.7).unwrap(), 0.0);
    }

    #[test]
    fn negative_frequency_is_a_domain_error() {
        assert!(matches!(sd(0.1).evaluate(-0.1), Err(Error::Domain(_))));
        assert!(SpectralDensity::new(-1e-3).is_err());
        assert!(SpectralDensity::new(f64::NAN).is_err());
    }

    #[test]
    fn cross_spectrum_cases() {
        let a = sd(0.05);
        assert_eq!(cross_spectrum(&a, &a, 0.3), a.evaluate(0.3).unwrap());
        assert_eq!(cross_spectrum(&sd(0.3), &sd(0.7), -0.1), 0.0);
        let ja = sd(0.04).evaluate(0.2).unwrap();
        let jb = sd(0.01).evaluate(0.2).unwrap();
        let got = cross_spectrum(&sd(0.04), &sd(0.01), 0.2);
        assert!((got - (ja * jb).sqrt()).abs() < 1e-15);
        assert!((got / 0.0202660 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn continuity_near_zero() {
        let s = sd(0.07);
        for &eps in &[1e-9, 1e-7, 1e-6, 2e-6, 1e-5, 1e-4, 1e-3] {
            let dev = (s.evaluate(eps).unwrap() - s.chi()).abs();
            assert!(dev <= s.chi() * eps * eps / 3.0 + 1e-12, "eps={eps}");
        }
    }
}
