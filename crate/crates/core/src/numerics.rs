//! Shared numerical kernels: adaptive Dormand–Prince integration, bracketed
//! root finding, complex tridiagonal solves and uniform-grid quadrature.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("integration budget exceeded after {0} steps")]
    BudgetExceeded(usize),
    #[error("divergent dynamics at t = {0}")]
    DivergentDynamics(f64),
    #[error("bracket invalid: f({lo}) and f({hi}) have the same sign")]
    BracketInvalid { lo: f64, hi: f64 },
    #[error("singular tridiagonal system (zero pivot at row {0})")]
    SingularTridiagonal(usize),
    #[error("insufficient samples: need at least 2, got {0}")]
    InsufficientSamples(usize),
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(&'static str),
    #[error("invalid interval: t1 must differ from t0")]
    InvalidInterval,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Error-control settings shared by the integrator and root finder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_steps: 10_000_000,
        }
    }
}

impl ToleranceSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_steps: usize) -> Result<Self> {
        let tol = Self {
            abs_tol,
            rel_tol,
            max_steps,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(NumericsError::InvalidTolerance("abs_tol must be > 0"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(NumericsError::InvalidTolerance("rel_tol must be > 0"));
        }
        if self.max_steps == 0 {
            return Err(NumericsError::InvalidTolerance("max_steps must be >= 1"));
        }
        Ok(())
    }

    /// Same budget with both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            max_steps: self.max_steps,
        }
    }
}

/// Accepted integrator output: `states[i]` is the state at `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Adaptive Dormand–Prince 5(4) stepper that owns its state and can be
/// advanced piecewise to successive target times (in either direction).
///
/// The step size carries over between calls to [`DormandPrince::advance`],
/// so driving it through a sequence of output times costs only the extra
/// step truncations at each target.
#[derive(Debug, Clone)]
pub struct DormandPrince {
    t: f64,
    y: Vec<f64>,
    h: Option<f64>,
    tol: ToleranceSpec,
    steps: usize,
    k: [Vec<f64>; 7],
    scratch: Vec<f64>,
    y_new: Vec<f64>,
    fsal_valid: bool,
}

impl DormandPrince {
    pub fn new(t0: f64, y0: &[f64], tol: ToleranceSpec) -> Result<Self> {
        tol.validate()?;
        let n = y0.len();
        Ok(Self {
            t: t0,
            y: y0.to_vec(),
            h: None,
            tol,
            steps: 0,
            k: std::array::from_fn(|_| vec![0.0; n]),
            scratch: vec![0.0; n],
            y_new: vec![0.0; n],
            fsal_valid: false,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64] {
        &self.y
    }

    /// Total accepted plus rejected steps so far.
    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// Overwrite the state (e.g. after an external projection); invalidates
    /// the cached first stage.
    pub fn set_state(&mut self, y: &[f64]) {
        self.y.copy_from_slice(y);
        self.fsal_valid = false;
    }

    /// Integrate to `t_target`, calling `on_step(t, y)` after every accepted
    /// step (including the final one landing on `t_target`).
    pub fn advance_with<F, O>(&mut self, rhs: &mut F, t_target: f64, mut on_step: O) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
        O: FnMut(f64, &[f64]),
    {
        if t_target == self.t {
            return Ok(());
        }
        let dir = (t_target - self.t).signum();
        let span = (t_target - self.t).abs();
        if !self.fsal_valid {
            rhs(self.t, &self.y, &mut self.k[0]);
            if self.k[0].iter().any(|v| !v.is_finite()) {
                return Err(NumericsError::DivergentDynamics(self.t));
            }
            self.fsal_valid = true;
        }
        let mut h = match self.h {
            Some(h) => h.abs().min(span),
            None => self.initial_step(rhs, dir, span),
        };

        loop {
            let remaining = (t_target - self.t).abs();
            if remaining <= 0.0 {
                return Ok(());
            }
            let last = h >= remaining * (1.0 - 1e-12);
            let h_try = if last { remaining } else { h };
            if self.steps >= self.tol.max_steps {
                return Err(NumericsError::BudgetExceeded(self.steps));
            }
            self.steps += 1;

            let err = self.trial_step(rhs, dir * h_try)?;
            if err <= 1.0 {
                self.t = if last { t_target } else { self.t + dir * h_try };
                std::mem::swap(&mut self.y, &mut self.y_new);
                // FSAL: the seventh stage is the first stage of the next step.
                self.k.swap(0, 6);
                on_step(self.t, &self.y);
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                // Do not let a truncated final step shrink the carried step size.
                h = if last { h.max(h_try) } else { h_try * factor };
                self.h = Some(h);
            } else {
                let factor = (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
                h = h_try * factor;
                if h <= 16.0 * f64::EPSILON * self.t.abs().max(span) {
                    return Err(NumericsError::DivergentDynamics(self.t));
                }
            }
        }
    }

    pub fn advance<F>(&mut self, rhs: &mut F, t_target: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        self.advance_with(rhs, t_target, |_, _| {})
    }

    fn initial_step<F>(&mut self, rhs: &mut F, dir: f64, span: f64) -> f64
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        // Hairer–Wanner starting-step heuristic.
        let sc = |y: f64| self.tol.abs_tol + self.tol.rel_tol * y.abs();
        let n = self.y.len().max(1) as f64;
        let d0 = (self.y.iter().map(|&y| (y / sc(y)).powi(2)).sum::<f64>() / n).sqrt();
        let d1 = (self
            .y
            .iter()
            .zip(&self.k[0])
            .map(|(&y, &f)| (f / sc(y)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        }
        .min(span);
        for (s, (&y, &f)) in self.scratch.iter_mut().zip(self.y.iter().zip(&self.k[0])) {
            *s = y + dir * h0 * f;
        }
        rhs(self.t + dir * h0, &self.scratch, &mut self.k[1]);
        let d2 = (self.k[1]
            .iter()
            .zip(&self.k[0])
            .zip(&self.y)
            .map(|((&f1, &f0), &y)| ((f1 - f0) / sc(y)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span).max(f64::EPSILON * span)
    }

    /// Attempt one step of signed size `h`; fills `y_new` and `k[6]` and
    /// returns the scaled error norm.
    fn trial_step<F>(&mut self, rhs: &mut F, h: f64) -> Result<f64>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = self.y.len();
        let t = self.t;
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let y = &self.y;
        let s = &mut self.scratch;

        for i in 0..n {
            s[i] = y[i] + h * A21 * k1[i];
        }
        rhs(t + C2 * h, s, k2);
        for i in 0..n {
            s[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * h, s, k3);
        for i in 0..n {
            s[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * h, s, k4);
        for i in 0..n {
            s[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * h, s, k5);
        for i in 0..n {
            s[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(t + h, s, k6);
        let y_new = &mut self.y_new;
        for i in 0..n {
            y_new[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(t + h, y_new, k7);

        let mut err: f64 = 0.0;
        for i in 0..n {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.tol.abs_tol + self.tol.rel_tol * y[i].abs().max(y_new[i].abs());
            err = err.max(e.abs() / sc);
        }
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            // A non-finite trial is treated as a rejected step; the caller
            // shrinks h and eventually reports divergence.
            if k1.iter().any(|v| !v.is_finite()) {
                return Err(NumericsError::DivergentDynamics(t));
            }
            return Ok(f64::INFINITY);
        }
        Ok(err)
    }
}

/// Integrate `rhs` from `t0` to `t1 > t0`, recording every accepted step.
pub fn integrate_ode<F>(
    mut rhs: F,
    state0: &[f64],
    t0: f64,
    t1: f64,
    tol: ToleranceSpec,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if !(t1 > t0) {
        return Err(NumericsError::InvalidInterval);
    }
    let mut stepper = DormandPrince::new(t0, state0, tol)?;
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![state0.to_vec()],
    };
    stepper.advance_with(&mut rhs, t1, |t, y| {
        traj.times.push(t);
        traj.states.push(y.to_vec());
    })?;
    Ok(traj)
}

/// Hybrid bisection/secant (Brent) root finder that never leaves `[lo, hi]`.
pub fn find_root<F>(mut f: F, lo: f64, hi: f64, tol: ToleranceSpec) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    tol.validate()?;
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(NumericsError::BracketInvalid { lo, hi });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..tol.max_steps {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let width_tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.rel_tol * b.abs();
        let half = 0.5 * (c - b);
        if fb.abs() <= tol.abs_tol || half.abs() <= width_tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= width_tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * half * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * half * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * half * q - (width_tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = half;
                e = d;
            }
        } else {
            d = half;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > width_tol {
            d
        } else {
            width_tol.copysign(half)
        };
        fb = f(b);
        if !fb.is_finite() {
            return Err(NumericsError::DivergentDynamics(b));
        }
    }
    Err(NumericsError::BudgetExceeded(tol.max_steps))
}

/// Thomas algorithm for a complex tridiagonal system. `lower[i]` couples row
/// `i + 1` to column `i`; `upper[i]` couples row `i` to column `i + 1`.
///
/// No pivoting is done; diagonal dominance is the caller's responsibility.
pub fn solve_tridiagonal(
    lower: &[Complex64],
    diag: &[Complex64],
    upper: &[Complex64],
    rhs: &[Complex64],
) -> Result<Vec<Complex64>> {
    let n = diag.len();
    if rhs.len() != n {
        return Err(NumericsError::DimensionMismatch(
            "rhs length must equal diag length",
        ));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if lower.len() != n - 1 || upper.len() != n - 1 {
        return Err(NumericsError::DimensionMismatch(
            "off-diagonals must have length n - 1",
        ));
    }
    let mut c_prime = vec![Complex64::new(0.0, 0.0); n];
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let mut pivot = diag[0];
    if pivot.norm() < f64::MIN_POSITIVE {
        return Err(NumericsError::SingularTridiagonal(0));
    }
    if n > 1 {
        c_prime[0] = upper[0] / pivot;
    }
    x[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i - 1] * c_prime[i - 1];
        if pivot.norm() < f64::MIN_POSITIVE || !pivot.is_finite() {
            return Err(NumericsError::SingularTridiagonal(i));
        }
        if i < n - 1 {
            c_prime[i] = upper[i] / pivot;
        }
        x[i] = (rhs[i] - lower[i - 1] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c_prime[i] * next;
    }
    Ok(x)
}

/// Composite quadrature weights for `n` uniformly spaced samples.
///
/// Odd sample counts use Simpson's rule throughout. Even counts use Simpson
/// on the leading samples and the 3/8 rule on the final three intervals, so
/// cubics stay exact; two samples fall back to the trapezoid.
pub fn quadrature_weights(n: usize, spacing: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(NumericsError::InsufficientSamples(n));
    }
    let mut w = vec![0.0; n];
    if n == 2 {
        w[0] = 0.5 * spacing;
        w[1] = 0.5 * spacing;
        return Ok(w);
    }
    let simpson_end = if n % 2 == 1 { n - 1 } else { n - 4 };
    if simpson_end >= 2 {
        for pair in (0..simpson_end).step_by(2) {
            w[pair] += spacing / 3.0;
            w[pair + 1] += 4.0 * spacing / 3.0;
            w[pair + 2] += spacing / 3.0;
        }
    }
    if n.is_multiple_of(2) {
        let s = simpson_end;
        w[s] += 3.0 * spacing / 8.0;
        w[s + 1] += 9.0 * spacing / 8.0;
        w[s + 2] += 9.0 * spacing / 8.0;
        w[s + 3] += 3.0 * spacing / 8.0;
    }
    Ok(w)
}

/// Integral of uniformly spaced samples (see [`quadrature_weights`]).
pub fn quadrature(samples: &[f64], spacing: f64) -> Result<f64> {
    let w = quadrature_weights(samples.len(), spacing)?;
    Ok(samples.iter().zip(&w).map(|(s, w)| s * w).sum())
}
