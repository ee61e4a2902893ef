//! Gaussian-level classicality indicators for a single mode.
//!
//! Both the uncertainty function `U` and the x–p correlation coefficient are
//! necessary-only indicators: a Wigner function peaked on a phase-space line
//! still needs an environment to decohere before the mode behaves
//! classically, and no decoherence dynamics is modelled here.

use num_complex::Complex64;
use thiserror::Error;

use crate::qvlasov::{FrequencyProfile, ModeState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassicalityError {
    #[error("not a Bogoliubov pair: |alpha|^2 - |beta|^2 = {0}")]
    NotBogoliubovPair(f64),
    #[error("invalid thermal parameter theta0 = {0} (must be > 0)")]
    InvalidThermal(f64),
}

pub type Result<T> = std::result::Result<T, ClassicalityError>;

/// Initial thermal weighting `theta0 = hbar omega / T0` of a mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThermalSpec {
    /// Zero temperature: the coth factor is exactly 1.
    Vacuum,
    Thermal(f64),
}

impl ThermalSpec {
    pub fn thermal(theta0: f64) -> Result<Self> {
        if theta0 > 0.0 && theta0.is_finite() {
            Ok(Self::Thermal(theta0))
        } else if theta0 == f64::INFINITY {
            Ok(Self::Vacuum)
        } else {
            Err(ClassicalityError::InvalidThermal(theta0))
        }
    }

    /// `coth(theta0 / 2)`, i.e. `1 + 2 n_Bose`.
    pub fn coth_factor(&self) -> f64 {
        match *self {
            Self::Vacuum => 1.0,
            Self::Thermal(t) => 1.0 / (0.5 * t).tanh(),
        }
    }

    /// Bose occupancy `1/(e^theta0 - 1)`.
    pub fn occupancy(&self) -> f64 {
        match *self {
            Self::Vacuum => 0.0,
            Self::Thermal(t) => 1.0 / t.exp_m1(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianCovariance {
    pub var_x: f64,
    pub var_p: f64,
    /// Symmetrized `<{x, p}>/2`.
    pub cov_xp: f64,
}

impl GaussianCovariance {
    /// `var_x var_p - cov^2`, invariant under linear symplectic evolution.
    pub fn determinant(&self) -> f64 {
        self.var_x * self.var_p - self.cov_xp * self.cov_xp
    }
}

/// Thermally weighted variances of a mode with amplitude `f` (volume
/// prefactor normalized to one).
pub fn mode_variances(mode: &ModeState, thermal: ThermalSpec) -> GaussianCovariance {
    amplitude_variances(mode.f, mode.f_dot, thermal)
}

pub fn amplitude_variances(
    f: Complex64,
    f_dot: Complex64,
    thermal: ThermalSpec,
) -> GaussianCovariance {
    let k = thermal.coth_factor();
    GaussianCovariance {
        var_x: f.norm_sqr() * k,
        var_p: f_dot.norm_sqr() * k,
        cov_xp: (f * f_dot.conj()).re * k,
    }
}

/// `U = sqrt(<x^2><p^2>) / (hbar/2)`.
pub fn uncertainty_function(cov: &GaussianCovariance) -> f64 {
    2.0 * (cov.var_x * cov.var_p).sqrt()
}

/// `cov_xp / sqrt(var_x var_p)`, clamped to `[-1, 1]` against roundoff.
pub fn correlation_coefficient(cov: &GaussianCovariance) -> f64 {
    let denom = (cov.var_x * cov.var_p).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    (cov.cov_xp / denom).clamp(-1.0, 1.0)
}

/// Squeeze magnitude and phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Squeeze {
    pub r: f64,
    pub phase: f64,
}

/// `|beta| = sinh r` and `alpha conj(beta) e^{-2i theta} = -sinh r cosh r e^{i phase}`.
/// The phase is reported as 0 when `r = 0`.
pub fn squeeze_parameters(alpha: Complex64, beta: Complex64, theta: f64) -> Result<Squeeze> {
    let norm = alpha.norm_sqr() - beta.norm_sqr();
    if !((norm - 1.0).abs() <= 1e-8) {
        return Err(ClassicalityError::NotBogoliubovPair(norm));
    }
    let r = beta.norm().asinh();
    let z = -alpha * beta.conj() * Complex64::from_polar(1.0, -2.0 * theta);
    let phase = if z.norm() == 0.0 { 0.0 } else { z.arg() };
    Ok(Squeeze { r, phase })
}

/// Constant `omega^2 = -kappa^2`; the adiabatic basis does not exist here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvertedOscillator {
    pub kappa: f64,
}

impl FrequencyProfile for InvertedOscillator {
    fn omega_sq(&self, _: f64) -> f64 {
        -self.kappa * self.kappa
    }
    fn omega_sq_dot(&self, _: f64) -> f64 {
        0.0
    }
}

/// Inverted oscillator `x'' = kappa^2 x` from the ground state of frequency
/// `kappa`: exact `(f, f')` at time `t`.
pub fn inverted_oscillator_amplitude(kappa: f64, t: f64) -> (Complex64, Complex64) {
    let f0 = (0.5 / kappa).sqrt();
    let (c, s) = ((kappa * t).cosh(), (kappa * t).sinh());
    (
        f0 * Complex64::new(c, -s),
        f0 * kappa * Complex64::new(s, -c),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ground_state_variances() {
        let w = 1.7;
        let mode = ModeState::adiabatic(0.0, 0.0, w, 0.9, 0.0);
        let cov = mode_variances(&mode, ThermalSpec::Vacuum);
        assert_abs_diff_eq!(cov.var_x, 0.5 / w, epsilon = 1e-15);
        assert_abs_diff_eq!(cov.var_p, 0.5 * w, epsilon = 1e-15);
        assert_abs_diff_eq!(cov.cov_xp, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(uncertainty_function(&cov), 1.0, epsilon = 1e-15);
        assert_eq!(correlation_coefficient(&cov), 0.0);
    }

    #[test]
    fn thermal_doubles() {
        let th = ThermalSpec::thermal(3f64.ln()).unwrap();
        assert_abs_diff_eq!(th.coth_factor(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(th.occupancy(), 0.5, epsilon = 1e-15);
        let mode = ModeState::adiabatic(0.0, 0.0, 1.0, 0.0, 0.0);
        let cov = mode_variances(&mode, th);
        assert_abs_diff_eq!(cov.var_x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(uncertainty_function(&cov), 2.0, epsilon = 1e-15);
        assert!(ThermalSpec::thermal(0.0).is_err());
        assert_eq!(
            ThermalSpec::thermal(f64::INFINITY).unwrap(),
            ThermalSpec::Vacuum
        );
    }

    #[test]
    fn squeeze_examples() {
        let s =
            squeeze_parameters(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), 0.3).unwrap();
        assert_eq!(s, Squeeze { r: 0.0, phase: 0.0 });

        let b = 0.125f64.sqrt();
        let s = squeeze_parameters(
            Complex64::new(1.125f64.sqrt(), 0.0),
            Complex64::new(0.0, b),
            0.0,
        )
        .unwrap();
        assert_abs_diff_eq!(s.r, 0.346_573_590_279_972_6, epsilon = 1e-12);

        let err = squeeze_parameters(
            Complex64::new(0.9f64.sqrt(), 0.0),
            Complex64::new(0.0, 0.0),
            0.0,
        )
        .unwrap_err();
        assert!(matches!(err, ClassicalityError::NotBogoliubovPair(_)));
    }

    #[test]
    fn squeeze_phase_convention() {
        // alpha conj(beta) e^{-2i theta} = -sinh r cosh r e^{i phase}
        let r: f64 = 0.7;
        let (phase, theta) = (0.4, 1.3);
        let alpha = Complex64::new(r.cosh(), 0.0);
        let beta = (-Complex64::from_polar(r.sinh(), phase)
            * Complex64::from_polar(1.0, 2.0 * theta))
        .conj();
        let s = squeeze_parameters(alpha, beta, theta).unwrap();
        assert_abs_diff_eq!(s.r, r, epsilon = 1e-14);
        assert_abs_diff_eq!(s.phase, phase, epsilon = 1e-14);
    }

    #[test]
    fn inverted_oscillator_correlates() {
        let kappa = 1.0;
        let (f, fd) = inverted_oscillator_amplitude(kappa, 0.0);
        let cov0 = amplitude_variances(f, fd, ThermalSpec::Vacuum);
        assert_abs_diff_eq!(uncertainty_function(&cov0), 1.0, epsilon = 1e-15);
        let (f, fd) = inverted_oscillator_amplitude(kappa, 3.0);
        let cov = amplitude_variances(f, fd, ThermalSpec::Vacuum);
        assert_abs_diff_eq!(
            correlation_coefficient(&cov),
            (6.0f64).tanh(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(cov.determinant(), 0.25, epsilon = 1e-9);
    }
}
