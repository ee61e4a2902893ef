//! Pair creation of a charged scalar in a homogeneous electric field.
//!
//! Each momentum mode obeys `f'' + omega^2(t) f = 0` with
//! `omega^2 = (k_z - e A)^2 + k_perp^2 + m^2` (units `hbar = 1`). Particle
//! content is read off by projecting onto the zeroth-order adiabatic mode
//! `sqrt(1/(2 omega)) exp(-i Theta)`, `Theta' = omega`. The same adiabatic
//! number can be obtained three ways: from the mode function, from the
//! coupled number/correlation equations, and from the nonlocal quantum
//! Vlasov equation; all three are implemented here. With backreaction the
//! vector potential follows `A'' = j`.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::numerics::{quadrature_weights, DormandPrince, NumericsError, ToleranceSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VlasovError {
    #[error("invalid mode state: Wronskian {0} differs from i")]
    InvalidModeState(Complex64),
    #[error("no modes")]
    NoModes,
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter {
        field: &'static str,
        reason: &'static str,
    },
    #[error("frequency squared {0} is not positive")]
    NonPositiveFrequency(f64),
    #[error("history has no sample at or before t = {0}")]
    HistoryOutOfRange(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, VlasovError>;

/// Allowed deviation of the Wronskian from `i` before a mode is rejected.
pub const WRONSKIAN_CHECK: f64 = 1e-6;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Homogeneous vector potential `A z`; the field is `E = -A'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundField {
    pub a: f64,
    pub a_dot: f64,
    pub e: f64,
    pub m: f64,
}

impl BackgroundField {
    pub fn new(a: f64, a_dot: f64, e: f64, m: f64) -> Result<Self> {
        if !(e > 0.0 && e.is_finite()) {
            return Err(VlasovError::InvalidParameter {
                field: "e",
                reason: "must be a finite number > 0",
            });
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(VlasovError::InvalidParameter {
                field: "m",
                reason: "must be a finite number > 0",
            });
        }
        Ok(Self { a, a_dot, e, m })
    }

    pub fn electric(&self) -> f64 {
        -self.a_dot
    }

    pub fn kinetic_momentum(&self, k_z: f64) -> f64 {
        k_z - self.e * self.a
    }

    pub fn omega_sq(&self, k_z: f64, k_perp: f64) -> f64 {
        let p = self.kinetic_momentum(k_z);
        p * p + k_perp * k_perp + self.m * self.m
    }
}

/// One mode of the charged field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeState {
    pub k_z: f64,
    pub k_perp: f64,
    pub f: Complex64,
    pub f_dot: Complex64,
    /// Accumulated adiabatic phase.
    pub theta: f64,
    /// Initial occupancy, equal for both charges.
    pub n_init: f64,
}

impl ModeState {
    /// Mode sitting exactly on the adiabatic solution at frequency `omega`
    /// with phase `theta`.
    pub fn adiabatic(k_z: f64, k_perp: f64, omega: f64, theta: f64, n_init: f64) -> Self {
        let f = adiabatic_mode(omega, theta);
        Self {
            k_z,
            k_perp,
            f,
            f_dot: -I * omega * f,
            theta,
            n_init,
        }
    }

    /// `f conj(f') - conj(f) f'`, equal to `i` for a physical mode.
    pub fn wronskian(&self) -> Complex64 {
        self.f * self.f_dot.conj() - self.f.conj() * self.f_dot
    }

    pub fn omega(&self, field: &BackgroundField) -> f64 {
        field.omega_sq(self.k_z, self.k_perp).sqrt()
    }

    fn pack(&self) -> [f64; 5] {
        [
            self.f.re,
            self.f.im,
            self.f_dot.re,
            self.f_dot.im,
            self.theta,
        ]
    }

    fn unpack(&self, y: &[f64]) -> Self {
        Self {
            f: Complex64::new(y[0], y[1]),
            f_dot: Complex64::new(y[2], y[3]),
            theta: y[4],
            ..*self
        }
    }
}

/// `sqrt(1/(2 omega)) exp(-i theta)`.
pub fn adiabatic_mode(omega: f64, theta: f64) -> Complex64 {
    (0.5 / omega).sqrt() * Complex64::from_polar(1.0, -theta)
}

/// Frequency history seen by a single mode.
pub trait FrequencyProfile {
    fn omega_sq(&self, t: f64) -> f64;
    /// Time derivative of `omega^2`.
    fn omega_sq_dot(&self, t: f64) -> f64;

    fn omega(&self, t: f64) -> f64 {
        self.omega_sq(t).max(0.0).sqrt()
    }

    fn omega_dot(&self, t: f64) -> f64 {
        self.omega_sq_dot(t) / (2.0 * self.omega(t))
    }
}

impl<P: FrequencyProfile + ?Sized> FrequencyProfile for &P {
    fn omega_sq(&self, t: f64) -> f64 {
        (**self).omega_sq(t)
    }
    fn omega_sq_dot(&self, t: f64) -> f64 {
        (**self).omega_sq_dot(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantFrequency(pub f64);

impl FrequencyProfile for ConstantFrequency {
    fn omega_sq(&self, _: f64) -> f64 {
        self.0 * self.0
    }
    fn omega_sq_dot(&self, _: f64) -> f64 {
        0.0
    }
}

/// `omega(t) = omega0 (1 + amplitude sech^2(t / tau))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SechPulse {
    pub omega0: f64,
    pub amplitude: f64,
    pub tau: f64,
}

impl FrequencyProfile for SechPulse {
    fn omega(&self, t: f64) -> f64 {
        let s = 1.0 / (t / self.tau).cosh();
        self.omega0 * (1.0 + self.amplitude * s * s)
    }
    fn omega_dot(&self, t: f64) -> f64 {
        let x = t / self.tau;
        let s = 1.0 / x.cosh();
        -2.0 * self.omega0 * self.amplitude * s * s * x.tanh() / self.tau
    }
    fn omega_sq(&self, t: f64) -> f64 {
        self.omega(t).powi(2)
    }
    fn omega_sq_dot(&self, t: f64) -> f64 {
        2.0 * self.omega(t) * self.omega_dot(t)
    }
}

/// `omega^2` ramping from `omega1^2` to `omega2^2` as `(1 + tanh(t/tau))/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TanhRamp {
    pub omega1: f64,
    pub omega2: f64,
    pub tau: f64,
}

impl FrequencyProfile for TanhRamp {
    fn omega_sq(&self, t: f64) -> f64 {
        let (a, b) = (self.omega1 * self.omega1, self.omega2 * self.omega2);
        a + (b - a) * 0.5 * (1.0 + (t / self.tau).tanh())
    }
    fn omega_sq_dot(&self, t: f64) -> f64 {
        let (a, b) = (self.omega1 * self.omega1, self.omega2 * self.omega2);
        let s = 1.0 / (t / self.tau).cosh();
        (b - a) * 0.5 * s * s / self.tau
    }
}

/// `omega(t) = omega_bar (1 + sum_i a_i sin(nu_i t + phi_i))`, positive
/// whenever `sum |a_i| < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSine {
    pub omega_bar: f64,
    /// `(a_i, nu_i, phi_i)`.
    pub terms: Vec<(f64, f64, f64)>,
}

impl MultiSine {
    pub fn new(omega_bar: f64, terms: Vec<(f64, f64, f64)>) -> Result<Self> {
        if !(omega_bar > 0.0 && omega_bar.is_finite()) {
            return Err(VlasovError::InvalidParameter {
                field: "omega_bar",
                reason: "must be a finite number > 0",
            });
        }
        if !(terms.iter().map(|t| t.0.abs()).sum::<f64>() < 1.0) {
            return Err(VlasovError::InvalidParameter {
                field: "terms",
                reason: "amplitudes must sum to less than 1 in magnitude",
            });
        }
        Ok(Self { omega_bar, terms })
    }
}

impl FrequencyProfile for MultiSine {
    fn omega(&self, t: f64) -> f64 {
        let s: f64 = self
            .terms
            .iter()
            .map(|&(a, nu, phi)| a * (nu * t + phi).sin())
            .sum();
        self.omega_bar * (1.0 + s)
    }
    fn omega_dot(&self, t: f64) -> f64 {
        let s: f64 = self
            .terms
            .iter()
            .map(|&(a, nu, phi)| a * nu * (nu * t + phi).cos())
            .sum();
        self.omega_bar * s
    }
    fn omega_sq(&self, t: f64) -> f64 {
        self.omega(t).powi(2)
    }
    fn omega_sq_dot(&self, t: f64) -> f64 {
        2.0 * self.omega(t) * self.omega_dot(t)
    }
}

/// Mode `(k_z, k_perp)` in a prescribed vector potential `A(t)`.
pub struct FieldDriven<F> {
    pub k_z: f64,
    pub k_perp: f64,
    pub e: f64,
    pub m: f64,
    /// Returns `(A(t), A'(t))`.
    pub potential: F,
}

impl<F: Fn(f64) -> (f64, f64)> FrequencyProfile for FieldDriven<F> {
    fn omega_sq(&self, t: f64) -> f64 {
        let (a, _) = (self.potential)(t);
        let p = self.k_z - self.e * a;
        p * p + self.k_perp * self.k_perp + self.m * self.m
    }
    fn omega_sq_dot(&self, t: f64) -> f64 {
        let (a, a_dot) = (self.potential)(t);
        -2.0 * self.e * (self.k_z - self.e * a) * a_dot
    }
}

/// Constant field `E0` switched on at `t = 0`: `A(t) = -E0 t`.
pub fn constant_field_mode(
    k_z: f64,
    k_perp: f64,
    e: f64,
    m: f64,
    e0: f64,
) -> FieldDriven<impl Fn(f64) -> (f64, f64)> {
    FieldDriven {
        k_z,
        k_perp,
        e,
        m,
        potential: move |t: f64| (-e0 * t, -e0),
    }
}

/// Integrate `f'' + omega^2 f = 0` and `Theta' = omega` from `t0` to `t1`.
pub fn evolve_mode<P: FrequencyProfile>(
    mode: &ModeState,
    profile: &P,
    t0: f64,
    t1: f64,
    tol: ToleranceSpec,
) -> Result<ModeState> {
    let mut out = sample_mode(mode, profile, t0, &[t1], tol)?;
    Ok(out.pop().expect("one sample requested"))
}

fn mode_rhs<P: FrequencyProfile>(profile: &P) -> impl FnMut(f64, &[f64], &mut [f64]) + '_ {
    move |t, y, dy| {
        let w2 = profile.omega_sq(t);
        dy[0] = y[2];
        dy[1] = y[3];
        dy[2] = -w2 * y[0];
        dy[3] = -w2 * y[1];
        dy[4] = w2.max(0.0).sqrt();
    }
}

/// Mode states at each of `times` (monotone, starting after `t0`).
pub fn sample_mode<P: FrequencyProfile>(
    mode: &ModeState,
    profile: &P,
    t0: f64,
    times: &[f64],
    tol: ToleranceSpec,
) -> Result<Vec<ModeState>> {
    let mut rhs = mode_rhs(profile);
    let mut stepper = DormandPrince::new(t0, &mode.pack(), tol)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        stepper.advance(&mut rhs, t)?;
        out.push(mode.unpack(stepper.state()));
    }
    Ok(out)
}

/// Bogoliubov coefficients of `(f, f')` relative to the zeroth-order
/// adiabatic mode at frequency `omega` and phase `theta`.
pub fn bogoliubov_coefficients(
    f: Complex64,
    f_dot: Complex64,
    theta: f64,
    omega: f64,
) -> Result<(Complex64, Complex64)> {
    let w = f * f_dot.conj() - f.conj() * f_dot;
    if !((w - I).norm() <= WRONSKIAN_CHECK) {
        return Err(VlasovError::InvalidModeState(w));
    }
    if !(omega > 0.0) {
        return Err(VlasovError::NonPositiveFrequency(omega * omega));
    }
    let ft = adiabatic_mode(omega, theta);
    let ft_dot = -I * omega * ft;
    let alpha = I * (ft.conj() * f_dot - ft_dot.conj() * f);
    let beta = -I * (ft * f_dot - ft_dot * f);
    Ok((alpha, beta))
}

pub fn bogoliubov_of_mode(
    mode: &ModeState,
    field: &BackgroundField,
) -> Result<(Complex64, Complex64)> {
    bogoliubov_coefficients(mode.f, mode.f_dot, mode.theta, mode.omega(field))
}

/// Slow/fast decomposition of one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticRecord {
    pub n_tilde: f64,
    pub corr: Complex64,
    pub alpha: Complex64,
    pub beta: Complex64,
    pub squeeze_r: f64,
    pub n_init: f64,
}

impl KineticRecord {
    pub fn from_bogoliubov(alpha: Complex64, beta: Complex64, n_init: f64) -> Self {
        let mut rec = Self {
            n_tilde: 0.0,
            corr: Complex64::new(0.0, 0.0),
            alpha,
            beta,
            squeeze_r: beta.norm().asinh(),
            n_init,
        };
        rec.n_tilde = adiabatic_number(&rec);
        rec.corr = pair_correlation(&rec);
        rec
    }

    pub fn vacuum(n_init: f64) -> Self {
        Self::from_bogoliubov(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), n_init)
    }

    pub fn of_mode(mode: &ModeState, field: &BackgroundField) -> Result<Self> {
        let (a, b) = bogoliubov_of_mode(mode, field)?;
        Ok(Self::from_bogoliubov(a, b, mode.n_init))
    }
}

/// `N~ = N + (1 + 2N) |beta|^2`.
pub fn adiabatic_number(rec: &KineticRecord) -> f64 {
    rec.n_init + (1.0 + 2.0 * rec.n_init) * rec.beta.norm_sqr()
}

/// `C = (1 + 2N) alpha conj(beta)`.
pub fn pair_correlation(rec: &KineticRecord) -> Complex64 {
    (1.0 + 2.0 * rec.n_init) * rec.alpha * rec.beta.conj()
}

/// Integrate the coupled number/correlation equations
///
/// ```text
/// N~' = (omega'/omega) Re{C e^{-2i Theta}}
/// C'  = (omega'/(2 omega)) (1 + 2 N~) e^{2i Theta}
/// ```
///
/// from `(rec, theta0)` at `t0` to `t1`. Returns the record at `t1`
/// (with `alpha` chosen real) and the phase `Theta(t1)`.
pub fn evolve_number_correlation<P: FrequencyProfile>(
    rec: &KineticRecord,
    theta0: f64,
    profile: &P,
    t0: f64,
    t1: f64,
    tol: ToleranceSpec,
) -> Result<(KineticRecord, f64)> {
    let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let w = profile.omega(t);
        let rate = profile.omega_dot(t) / w;
        let phase = Complex64::from_polar(1.0, 2.0 * y[3]);
        let c = Complex64::new(y[1], y[2]);
        dy[0] = rate * (c * phase.conj()).re;
        let dc = 0.5 * rate * (1.0 + 2.0 * y[0]) * phase;
        dy[1] = dc.re;
        dy[2] = dc.im;
        dy[3] = w;
    };
    let y0 = [rec.n_tilde, rec.corr.re, rec.corr.im, theta0];
    let mut stepper = DormandPrince::new(t0, &y0, tol)?;
    stepper.advance(&mut rhs, t1)?;
    let y = stepper.state();
    let n_tilde = y[0];
    let corr = Complex64::new(y[1], y[2]);
    let enh = 1.0 + 2.0 * rec.n_init;
    let beta_sq = ((n_tilde - rec.n_init) / enh).max(0.0);
    let alpha = Complex64::new((1.0 + beta_sq).sqrt(), 0.0);
    let beta = (corr / (enh * alpha)).conj();
    Ok((
        KineticRecord {
            n_tilde,
            corr,
            alpha,
            beta,
            squeeze_r: beta_sq.sqrt().asinh(),
            n_init: rec.n_init,
        },
        y[3],
    ))
}

/// One stored point of the nonlocal-equation history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QveSample {
    pub t: f64,
    pub omega: f64,
    pub omega_dot: f64,
    pub theta: f64,
    pub n_tilde: f64,
}

/// Uniform-cadence history for the memory integral.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QveHistory {
    pub samples: Vec<QveSample>,
}

impl QveHistory {
    fn interpolate(&self, t: f64) -> Result<(usize, QveSample)> {
        let s = &self.samples;
        let first = s.first().ok_or(VlasovError::HistoryOutOfRange(t))?;
        if t < first.t {
            return Err(VlasovError::HistoryOutOfRange(t));
        }
        let idx = s.partition_point(|x| x.t <= t) - 1;
        let a = s[idx];
        if a.t == t || idx + 1 == s.len() {
            return Ok((idx, a));
        }
        let b = s[idx + 1];
        let w = (t - a.t) / (b.t - a.t);
        let lerp = |x: f64, y: f64| x + w * (y - x);
        Ok((
            idx,
            QveSample {
                t,
                omega: lerp(a.omega, b.omega),
                omega_dot: lerp(a.omega_dot, b.omega_dot),
                theta: lerp(a.theta, b.theta),
                n_tilde: lerp(a.n_tilde, b.n_tilde),
            },
        ))
    }
}

fn kernel(s: &QveSample, theta_now: f64) -> f64 {
    s.omega_dot / s.omega * (1.0 + 2.0 * s.n_tilde) * (2.0 * (theta_now - s.theta)).cos()
}

/// Rate `dN~/dt` from the nonlocal quantum Vlasov equation
///
/// ```text
/// (omega'/(2 omega))(t) int_{t0}^{t} (omega'/omega)(t') (1 + 2N~(t')) cos[2Theta(t) - 2Theta(t')] dt'
/// ```
///
/// evaluated by trapezoid quadrature over the stored history (linear
/// interpolation inside the last interval). Assumes `C(t0) = 0`.
pub fn qve_nonlocal_rate(history: &QveHistory, t: f64) -> Result<f64> {
    let (idx, now) = history.interpolate(t)?;
    let s = &history.samples;
    let mut integral = 0.0;
    for j in 0..idx {
        let dt = s[j + 1].t - s[j].t;
        integral += 0.5 * dt * (kernel(&s[j], now.theta) + kernel(&s[j + 1], now.theta));
    }
    if now.t > s[idx].t {
        integral +=
            0.5 * (now.t - s[idx].t) * (kernel(&s[idx], now.theta) + kernel(&now, now.theta));
    }
    Ok(0.5 * now.omega_dot / now.omega * integral)
}

/// Solve the nonlocal equation on a uniform grid of step `dt` from `t0`
/// (where `N~ = n_init`, `C = 0`) to `t1`, returning the full history.
///
/// The phase is integrated alongside with the adaptive stepper; `N~` uses
/// the trapezoid rule in both time and memory, which is linear in the new
/// value and therefore solved exactly at each step.
pub fn integrate_qve<P: FrequencyProfile>(
    profile: &P,
    n_init: f64,
    t0: f64,
    t1: f64,
    dt: f64,
    tol: ToleranceSpec,
) -> Result<QveHistory> {
    if !(dt > 0.0 && t1 > t0) {
        return Err(VlasovError::InvalidParameter {
            field: "dt",
            reason: "need dt > 0 and t1 > t0",
        });
    }
    let steps = ((t1 - t0) / dt).round().max(1.0) as usize;
    let h = (t1 - t0) / steps as f64;
    let mut phase = DormandPrince::new(t0, &[0.0], tol)?;
    let mut phase_rhs = |t: f64, _: &[f64], dy: &mut [f64]| dy[0] = profile.omega(t);

    let sample = |t: f64, theta: f64, n_tilde: f64| QveSample {
        t,
        omega: profile.omega(t),
        omega_dot: profile.omega_dot(t),
        theta,
        n_tilde,
    };
    let mut history = QveHistory {
        samples: Vec::with_capacity(steps + 1),
    };
    history.samples.push(sample(t0, 0.0, n_init));
    let mut rate_prev = 0.0;
    for i in 1..=steps {
        let t = t0 + i as f64 * h;
        phase.advance(&mut phase_rhs, t)?;
        let theta = phase.state()[0];
        let mut next = sample(t, theta, 0.0);
        let s = &history.samples;
        // memory sum over stored samples with trapezoid weights on [t0, t]
        let mut memory = 0.5 * h * kernel(&s[0], theta);
        for x in &s[1..] {
            memory += h * kernel(x, theta);
        }
        let a = 0.5 * next.omega_dot / next.omega;
        let b = next.omega_dot / next.omega;
        // rate(t) = a (memory + h/2 b (1 + 2 N))
        let p = a * (memory + 0.5 * h * b);
        let q = a * h * b;
        let n_prev = s[s.len() - 1].n_tilde;
        let n_new = (n_prev + 0.5 * h * (rate_prev + p)) / (1.0 - 0.5 * h * q);
        rate_prev = p + q * n_new;
        next.n_tilde = n_new;
        history.samples.push(next);
    }
    Ok(history)
}

/// Uniform momentum grid in `(k_z, k_perp)` with a hard frequency cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGrid {
    pub kz_values: Vec<f64>,
    pub kperp_values: Vec<f64>,
    /// Modes with `omega(0) > cutoff` are dropped.
    pub cutoff: f64,
}

impl MomentumGrid {
    pub fn new(
        kz_min: f64,
        kz_max: f64,
        kz_count: usize,
        kperp_max: f64,
        kperp_count: usize,
        cutoff: f64,
    ) -> Result<Self> {
        let bad = |field, reason| Err(VlasovError::InvalidParameter { field, reason });
        if !(kz_max > kz_min) {
            return bad("kz_max", "must exceed kz_min");
        }
        if kz_count < 2 {
            return bad("kz_count", "must be at least 2");
        }
        if !(kperp_max > 0.0) {
            return bad("kperp_max", "must be > 0");
        }
        if kperp_count < 2 {
            return bad("kperp_count", "must be at least 2");
        }
        if !(cutoff > 0.0) {
            return bad("cutoff", "must be > 0");
        }
        let lin = |a: f64, b: f64, n: usize| {
            (0..n)
                .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                .collect::<Vec<_>>()
        };
        Ok(Self {
            kz_values: lin(kz_min, kz_max, kz_count),
            kperp_values: lin(0.0, kperp_max, kperp_count),
            cutoff,
        })
    }

    pub fn kz_spacing(&self) -> f64 {
        self.kz_values[1] - self.kz_values[0]
    }

    pub fn kperp_spacing(&self) -> f64 {
        self.kperp_values[1] - self.kperp_values[0]
    }
}

/// Modes plus their `d^3k/(2 pi)^3` quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeEnsemble {
    pub modes: Vec<ModeState>,
    pub weights: Vec<f64>,
}

impl ModeEnsemble {
    /// Adiabatic-vacuum (or uniformly occupied) modes on `grid` for `field`.
    pub fn on_grid(grid: &MomentumGrid, field: &BackgroundField, n_init: f64) -> Result<Self> {
        // Averaged with its mirror image so a symmetric k_z grid has
        // symmetric weights (the 3/8 tail otherwise sits on one end).
        let wz = quadrature_weights(grid.kz_values.len(), grid.kz_spacing())?;
        let wz: Vec<f64> = wz
            .iter()
            .zip(wz.iter().rev())
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let wp = quadrature_weights(grid.kperp_values.len(), grid.kperp_spacing())?;
        let norm = (2.0 * std::f64::consts::PI).powi(3);
        let mut modes = Vec::new();
        let mut weights = Vec::new();
        for (kz, wz) in grid.kz_values.iter().zip(&wz) {
            for (kp, wp) in grid.kperp_values.iter().zip(&wp) {
                let omega = field.omega_sq(*kz, *kp).sqrt();
                if omega > grid.cutoff {
                    continue;
                }
                let w = wz * wp * 2.0 * std::f64::consts::PI * kp / norm;
                modes.push(ModeState::adiabatic(*kz, *kp, omega, 0.0, n_init));
                weights.push(w);
            }
        }
        Ok(Self { modes, weights })
    }

    pub fn empty() -> Self {
        Self {
            modes: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

/// `j = 2e sum_k w_k (k_z - eA) |f_k|^2 (1 + 2 N_k)`.
pub fn mean_current(ensemble: &ModeEnsemble, field: &BackgroundField) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(VlasovError::NoModes);
    }
    Ok(current_sum(
        ensemble.modes.iter().zip(&ensemble.weights),
        field,
    ))
}

fn current_sum<'a>(
    modes: impl Iterator<Item = (&'a ModeState, &'a f64)>,
    field: &BackgroundField,
) -> f64 {
    2.0 * field.e
        * modes
            .map(|(m, w)| {
                w * field.kinetic_momentum(m.k_z) * m.f.norm_sqr() * (1.0 + 2.0 * m.n_init)
            })
            .sum::<f64>()
}

/// `(1+Ñ) ln(1+Ñ) - Ñ ln Ñ`, zero at `Ñ = 0`.
pub fn mode_entropy(n_tilde: f64) -> f64 {
    if n_tilde <= 0.0 {
        return 0.0;
    }
    (1.0 + n_tilde) * n_tilde.ln_1p() - n_tilde * n_tilde.ln()
}

/// Pair-number probabilities `rho_{2l} = Ñ^l / (1+Ñ)^{l+1}` for
/// `l = 0..=l_max`, with the untruncated tail mass `(Ñ/(1+Ñ))^{l_max+1}`.
pub fn density_matrix_diag(n_tilde: f64, l_max: usize) -> (Vec<f64>, f64) {
    let ratio = n_tilde / (1.0 + n_tilde);
    let mut p = 1.0 / (1.0 + n_tilde);
    let mut rho = Vec::with_capacity(l_max + 1);
    for _ in 0..=l_max {
        rho.push(p);
        p *= ratio;
    }
    let tail = ratio.powi(l_max as i32 + 1);
    (rho, tail)
}

/// Per-step diagnostics of a backreaction run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub a: f64,
    pub e_field: f64,
    pub current: f64,
    pub entropy: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeRecord {
    pub t: f64,
    pub k_z: f64,
    pub k_perp: f64,
    pub n_tilde: f64,
    pub abs_corr: f64,
}

/// Self-consistent field plus mode ensemble.
#[derive(Debug, Clone)]
pub struct SchwingerSystem {
    pub field: BackgroundField,
    pub ensemble: ModeEnsemble,
    pub t: f64,
}

impl SchwingerSystem {
    pub fn new(field: BackgroundField, ensemble: ModeEnsemble) -> Self {
        Self {
            field,
            ensemble,
            t: 0.0,
        }
    }

    fn pack(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 + 5 * self.ensemble.len());
        y.push(self.field.a);
        y.push(self.field.a_dot);
        for m in &self.ensemble.modes {
            y.extend_from_slice(&m.pack());
        }
        y
    }

    fn unpack(&mut self, y: &[f64]) {
        self.field.a = y[0];
        self.field.a_dot = y[1];
        for (m, chunk) in self.ensemble.modes.iter_mut().zip(y[2..].chunks_exact(5)) {
            *m = m.unpack(chunk);
        }
    }

    fn rhs(&self) -> impl FnMut(f64, &[f64], &mut [f64]) + '_ {
        let e = self.field.e;
        let m2 = self.field.m * self.field.m;
        let modes = &self.ensemble.modes;
        let weights = &self.ensemble.weights;
        move |_, y, dy| {
            let a = y[0];
            let mut j = 0.0;
            for (k, (mode, w)) in modes.iter().zip(weights).enumerate() {
                let s = &y[2 + 5 * k..7 + 5 * k];
                let d = &mut dy[2 + 5 * k..7 + 5 * k];
                let p = mode.k_z - e * a;
                let w2 = p * p + mode.k_perp * mode.k_perp + m2;
                d[0] = s[2];
                d[1] = s[3];
                d[2] = -w2 * s[0];
                d[3] = -w2 * s[1];
                d[4] = w2.sqrt();
                j += w * p * (s[0] * s[0] + s[1] * s[1]) * (1.0 + 2.0 * mode.n_init);
            }
            dy[0] = y[1];
            dy[1] = 2.0 * e * j;
        }
    }

    /// Advance the coupled Maxwell + mode system by `dt`.
    pub fn step(&mut self, dt: f64, tol: ToleranceSpec) -> Result<()> {
        let mut stepper = DormandPrince::new(self.t, &self.pack(), tol)?;
        let target = self.t + dt;
        {
            let mut rhs = self.rhs();
            stepper.advance(&mut rhs, target)?;
        }
        self.unpack(stepper.state());
        self.t = target;
        Ok(())
    }

    pub fn current(&self) -> f64 {
        current_sum(
            self.ensemble.modes.iter().zip(&self.ensemble.weights),
            &self.field,
        )
    }

    pub fn kinetic_records(&self) -> Result<Vec<KineticRecord>> {
        let field = self.field;
        self.ensemble
            .modes
            .par_iter()
            .map(|m| KineticRecord::of_mode(m, &field))
            .collect()
    }

    /// `E^2/2 + sum_k w_k (1 + 2N_k)(|f'|^2 + omega^2 |f|^2)`, which equals
    /// `E^2/2 + sum_k w_k 2 omega (Ñ + 1/2)` (particles and antiparticles).
    pub fn total_energy(&self) -> f64 {
        let field = &self.field;
        let modes: f64 = self
            .ensemble
            .modes
            .iter()
            .zip(&self.ensemble.weights)
            .map(|(m, w)| {
                let w2 = field.omega_sq(m.k_z, m.k_perp);
                w * (1.0 + 2.0 * m.n_init) * (m.f_dot.norm_sqr() + w2 * m.f.norm_sqr())
            })
            .sum();
        0.5 * field.electric().powi(2) + modes
    }

    /// Weighted entropy density `sum_k w_k s(Ñ_k)`.
    pub fn total_entropy(&self) -> Result<f64> {
        let recs = self.kinetic_records()?;
        Ok(recs
            .iter()
            .zip(&self.ensemble.weights)
            .map(|(r, w)| w * mode_entropy(r.n_tilde))
            .sum())
    }

    pub fn record(&self) -> Result<StepRecord> {
        Ok(StepRecord {
            t: self.t,
            a: self.field.a,
            e_field: self.field.electric(),
            current: if self.ensemble.is_empty() {
                0.0
            } else {
                self.current()
            },
            entropy: self.total_entropy()?,
            energy: self.total_energy(),
        })
    }

    pub fn mode_records(&self) -> Result<Vec<ModeRecord>> {
        Ok(self
            .kinetic_records()?
            .into_iter()
            .zip(&self.ensemble.modes)
            .map(|(r, m)| ModeRecord {
                t: self.t,
                k_z: m.k_z,
                k_perp: m.k_perp,
                n_tilde: r.n_tilde,
                abs_corr: r.corr.norm(),
            })
            .collect())
    }

    /// Run to `t_end`, recording every `dt_out`. A single stepper carries
    /// across output times so step-size history is kept.
    pub fn run(
        &mut self,
        t_end: f64,
        dt_out: f64,
        tol: ToleranceSpec,
        with_modes: bool,
    ) -> Result<SchwingerRun> {
        if !(dt_out > 0.0 && t_end > self.t) {
            return Err(VlasovError::InvalidParameter {
                field: "dt_out",
                reason: "need dt_out > 0 and t_end beyond the start time",
            });
        }
        let n_out = ((t_end - self.t) / dt_out).round().max(1.0) as usize;
        let t0 = self.t;
        let mut steps = vec![self.record()?];
        let mut modes = Vec::new();
        if with_modes {
            modes.extend(self.mode_records()?);
        }
        let mut stepper = DormandPrince::new(t0, &self.pack(), tol)?;
        for i in 1..=n_out {
            let target = if i == n_out {
                t_end
            } else {
                t0 + i as f64 * dt_out
            };
            {
                let mut rhs = self.rhs();
                stepper.advance(&mut rhs, target)?;
            }
            self.unpack(stepper.state());
            self.t = target;
            steps.push(self.record()?);
            if with_modes {
                modes.extend(self.mode_records()?);
            }
        }
        Ok(SchwingerRun { steps, modes })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchwingerRun {
    pub steps: Vec<StepRecord>,
    pub modes: Vec<ModeRecord>,
}

impl SchwingerRun {
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.steps[0].energy;
        self.steps
            .iter()
            .map(|s| (s.energy - e0).abs() / e0.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    /// Time-averaged entropy production `(S_end - S_0) / (t_end - t_0)`.
    pub fn mean_entropy_rate(&self) -> f64 {
        let (a, b) = (self.steps[0], self.steps[self.steps.len() - 1]);
        (b.entropy - a.entropy) / (b.t - a.t)
    }
}
