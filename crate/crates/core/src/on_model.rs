//! Exact radial dynamics of the O(N) quantum-mechanical model.
//!
//! The N-component wavefunction is reduced to its radial part
//! `psi(r) = r^{(1-N)/2} phi(r)`. In rescaled variables `r^2 = N y^2` the
//! reduced amplitude obeys
//!
//! ```text
//! i d(phi)/d(t~) = [ -1/(2N^2) d^2/dy^2 + u(y, N) ] phi,   t~ = N t,
//! u(y, N) = (N-1)(N-3) / (8 N^2 y^2) + (g/8) (y^2 - y0^2)^2
//! ```
//!
//! which is stepped with Crank–Nicolson on a uniform grid with hard walls at
//! `y = 0` and `y = y_max`.

use num_complex::Complex64;
use thiserror::Error;

use crate::numerics::{quadrature, solve_tridiagonal, NumericsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RollError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter {
        field: &'static str,
        reason: &'static str,
    },
    #[error("under-resolved initial state: {0} grid points carry 99% of the norm (need 8)")]
    UnderResolved(usize),
    #[error("invalid step: dt must be > 0")]
    InvalidStep,
    #[error("unitarity lost: norm drift {drift:e} at t = {time:e}")]
    UnitarityLost { drift: f64, time: f64 },
    #[error("potential length {0} does not match the grid")]
    PotentialMismatch(usize),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, RollError>;

/// Norm drift above which an evolution is reported as non-unitary.
pub const UNITARITY_LIMIT: f64 = 1e-6;

/// Component count, self-coupling and rescaled potential minimum.
///
/// `n` is real so that thresholds can be located on a continuum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeNParams {
    pub n: f64,
    pub g: f64,
    pub y0: f64,
}

impl LargeNParams {
    pub fn new(n: f64, g: f64, y0: f64) -> Result<Self> {
        let p = Self { n, g, y0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n >= 1.0 && self.n.is_finite()) {
            return Err(RollError::InvalidParameter {
                field: "N",
                reason: "must be a finite number >= 1",
            });
        }
        if !(self.g > 0.0 && self.g.is_finite()) {
            return Err(RollError::InvalidParameter {
                field: "g",
                reason: "must be a finite number > 0",
            });
        }
        if !(self.y0 >= 0.0 && self.y0.is_finite()) {
            return Err(RollError::InvalidParameter {
                field: "y0",
                reason: "must be a finite number >= 0",
            });
        }
        Ok(())
    }

    pub fn with_n(self, n: f64) -> Self {
        Self { n, ..self }
    }

    /// Unscaled minimum `r0 = sqrt(N) y0`.
    pub fn r0(&self) -> f64 {
        self.n.sqrt() * self.y0
    }
}

/// Uniform grid on `[0, y_max]` including both walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    pub y_max: f64,
    pub points: usize,
}

impl RadialGrid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(y_max: f64, points: usize) -> Result<Self> {
        if !(y_max > 0.0 && y_max.is_finite()) {
            return Err(RollError::InvalidParameter {
                field: "y_max",
                reason: "must be a finite number > 0",
            });
        }
        if points < Self::MIN_POINTS {
            return Err(RollError::InvalidParameter {
                field: "points",
                reason: "must be at least 16",
            });
        }
        Ok(Self { y_max, points })
    }

    pub fn spacing(&self) -> f64 {
        self.y_max / (self.points - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    pub fn coords(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(move |i| self.coord(i))
    }

    /// Same interval with the spacing halved.
    pub fn refined(&self) -> Self {
        Self {
            y_max: self.y_max,
            points: 2 * self.points - 1,
        }
    }
}

/// Samples of `phi(y, t)`; both wall nodes are held at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialWavefunction {
    pub grid: RadialGrid,
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl RadialWavefunction {
    /// Wrap `amplitudes`, pinning the wall nodes and normalizing.
    pub fn from_amplitudes(grid: RadialGrid, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.points {
            return Err(RollError::PotentialMismatch(amplitudes.len()));
        }
        amplitudes[0] = Complex64::new(0.0, 0.0);
        let last = amplitudes.len() - 1;
        amplitudes[last] = Complex64::new(0.0, 0.0);
        let mut state = Self {
            grid,
            amplitudes,
            time: 0.0,
        };
        let norm = state.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(RollError::UnderResolved(0));
        }
        let scale = 1.0 / norm.sqrt();
        state.amplitudes.iter_mut().for_each(|a| *a *= scale);
        Ok(state)
    }

    /// Discrete norm `h * sum |phi_j|^2`, the quantity Crank–Nicolson preserves.
    pub fn norm(&self) -> f64 {
        self.grid.spacing() * self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>()
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Samples of `u(y, N)`. The `y = 0` node holds `f64::INFINITY` as a wall
/// sentinel; the amplitude there is pinned so it never multiplies anything.
pub fn effective_radial_potential(params: &LargeNParams, grid: &RadialGrid) -> Vec<f64> {
    grid.coords()
        .map(|y| {
            if y == 0.0 {
                f64::INFINITY
            } else {
                rescaled_potential(params, y)
            }
        })
        .collect()
}

/// `u(y, N)` at a single `y > 0`.
pub fn rescaled_potential(params: &LargeNParams, y: f64) -> f64 {
    let n = params.n;
    let centrifugal = (n - 1.0) * (n - 3.0) / (8.0 * n * n * y * y);
    let w = y * y - params.y0 * params.y0;
    centrifugal + params.g / 8.0 * w * w
}

/// Unscaled `U(r) = (N-1)(N-3)/(8 r^2) + g/(8N) (r^2 - r0^2)^2`.
pub fn unscaled_potential(params: &LargeNParams, r: f64) -> f64 {
    let n = params.n;
    let r0 = params.r0();
    let w = r * r - r0 * r0;
    (n - 1.0) * (n - 3.0) / (8.0 * r * r) + params.g / (8.0 * n) * w * w
}

/// Radial packet `y^{(N-1)/2} exp(-N y^2 / (4 w^2))`, normalized.
pub fn quantum_roll_initial_state(
    params: &LargeNParams,
    grid: &RadialGrid,
    width: f64,
) -> Result<RadialWavefunction> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(RollError::InvalidParameter {
            field: "width",
            reason: "must be a finite number > 0",
        });
    }
    let n = params.n;
    let power = 0.5 * (n - 1.0);
    let amps: Vec<Complex64> = grid
        .coords()
        .map(|y| {
            // log-space keeps large-N prefactors finite
            let log_amp = if y > 0.0 {
                power * y.ln() - n * y * y / (4.0 * width * width)
            } else if power == 0.0 {
                0.0
            } else {
                f64::NEG_INFINITY
            };
            Complex64::new(log_amp.exp(), 0.0)
        })
        .collect();
    let peak_log = grid
        .coords()
        .filter(|&y| y > 0.0)
        .map(|y| power * y.ln() - n * y * y / (4.0 * width * width))
        .fold(f64::NEG_INFINITY, f64::max);
    let amps: Vec<Complex64> = if peak_log.is_finite() {
        let shift = (-peak_log).exp();
        amps.into_iter().map(|a| a * shift).collect()
    } else {
        amps
    };
    let state = RadialWavefunction::from_amplitudes(*grid, amps)
        .map_err(|_| RollError::UnderResolved(0))?;
    let carried = points_carrying(&state.density(), 0.99);
    if carried < 8 {
        return Err(RollError::UnderResolved(carried));
    }
    Ok(state)
}

/// Fewest samples whose summed weight reaches `fraction` of the total.
fn points_carrying(density: &[f64], fraction: f64) -> usize {
    let total: f64 = density.iter().sum();
    if !(total > 0.0) {
        return 0;
    }
    let mut sorted = density.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    for (i, d) in sorted.iter().enumerate() {
        acc += d;
        if acc >= fraction * total {
            return i + 1;
        }
    }
    sorted.len()
}

/// `<y^2> = int y^2 |phi|^2 / int |phi|^2`, by composite quadrature.
pub fn moment_y2(state: &RadialWavefunction) -> f64 {
    let h = state.grid.spacing();
    let dens = state.density();
    let weighted: Vec<f64> = state
        .grid
        .coords()
        .zip(&dens)
        .map(|(y, d)| y * y * d)
        .collect();
    let num = quadrature(&weighted, h).expect("grid has >= 16 points");
    let den = quadrature(&dens, h).expect("grid has >= 16 points");
    num / den
}

/// A radial Schrödinger problem `i dphi/dtau = [-kinetic d^2/dx^2 + V] phi`.
///
/// The rescaled form uses `kinetic = 1/(2N^2)` and `V = u(y, N)`; the unscaled
/// form uses `kinetic = 1/2` and `V = U(r)`. Tests may install any potential.
#[derive(Debug, Clone)]
pub struct RadialHamiltonian {
    pub kinetic: f64,
    pub spacing: f64,
    /// Potential on every grid node; the two wall entries are ignored.
    pub potential: Vec<f64>,
}

impl RadialHamiltonian {
    pub fn rescaled(params: &LargeNParams, grid: &RadialGrid) -> Self {
        Self {
            kinetic: 1.0 / (2.0 * params.n * params.n),
            spacing: grid.spacing(),
            potential: effective_radial_potential(params, grid),
        }
    }

    /// Unscaled problem on the grid `r_j = sqrt(N) y_j` matched to `grid`.
    pub fn unscaled(params: &LargeNParams, grid: &RadialGrid) -> Self {
        let scale = params.n.sqrt();
        let potential = grid
            .coords()
            .map(|y| {
                if y == 0.0 {
                    f64::INFINITY
                } else {
                    unscaled_potential(params, scale * y)
                }
            })
            .collect();
        Self {
            kinetic: 0.5,
            spacing: scale * grid.spacing(),
            potential,
        }
    }

    /// Override the potential with `v(x)` (e.g. free or harmonic test cases).
    pub fn with_potential<F: Fn(f64) -> f64>(mut self, v: F) -> Self {
        let h = self.spacing;
        self.potential = (0..self.potential.len()).map(|i| v(i as f64 * h)).collect();
        self
    }

    fn interior_diag(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.potential.len();
        let k = 2.0 * self.kinetic / (self.spacing * self.spacing);
        self.potential[1..n - 1].iter().map(move |v| k + v)
    }

    fn off_diag(&self) -> f64 {
        -self.kinetic / (self.spacing * self.spacing)
    }

    /// `H phi` on the interior nodes; wall entries are returned as zero.
    pub fn apply(&self, phi: &[Complex64]) -> Vec<Complex64> {
        let n = phi.len();
        let off = self.off_diag();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (j, d) in (1..n - 1).zip(self.interior_diag()) {
            out[j] = phi[j] * d + (phi[j - 1] + phi[j + 1]) * off;
        }
        out
    }

    /// Discrete energy `h phi^dagger H phi / (h phi^dagger phi)`.
    pub fn energy(&self, phi: &[Complex64]) -> f64 {
        let h_phi = self.apply(phi);
        let num: f64 = phi.iter().zip(&h_phi).map(|(a, b)| (a.conj() * b).re).sum();
        let den: f64 = phi.iter().map(|a| a.norm_sqr()).sum();
        num / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollSample {
    pub t: f64,
    pub y2: f64,
    pub norm: f64,
    pub energy: f64,
}

/// Observable series from a Crank–Nicolson run.
#[derive(Debug, Clone)]
pub struct RollSeries {
    pub samples: Vec<RollSample>,
    pub final_state: RadialWavefunction,
    /// Largest `|phi|^2` seen on the node next to the outer wall.
    pub boundary_max: f64,
}

impl RollSeries {
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.samples[0].norm;
        self.samples
            .iter()
            .map(|s| (s.norm - n0).abs())
            .fold(0.0, f64::max)
    }

    pub fn energy_drift(&self) -> f64 {
        let e0 = self.samples[0].energy;
        self.samples
            .iter()
            .map(|s| (s.energy - e0).abs() / e0.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    /// Whether the hard wall stayed out of reach (`|phi(y_max)|^2 < 1e-12`).
    pub fn wall_clear(&self) -> bool {
        self.boundary_max < 1e-12
    }
}

/// Crank–Nicolson propagator `(1 + i dt H / 2) phi' = (1 - i dt H / 2) phi`.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    hamiltonian: RadialHamiltonian,
    dt: f64,
    lower: Vec<Complex64>,
    diag: Vec<Complex64>,
    upper: Vec<Complex64>,
}

impl CrankNicolson {
    pub fn new(hamiltonian: RadialHamiltonian, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(RollError::InvalidStep);
        }
        let m = hamiltonian.potential.len() - 2;
        let half = Complex64::new(0.0, 0.5 * dt);
        let off = half * hamiltonian.off_diag();
        let diag = hamiltonian
            .interior_diag()
            .map(|d| Complex64::new(1.0, 0.0) + half * d)
            .collect();
        Ok(Self {
            dt,
            lower: vec![off; m - 1],
            upper: vec![off; m - 1],
            diag,
            hamiltonian,
        })
    }

    pub fn hamiltonian(&self) -> &RadialHamiltonian {
        &self.hamiltonian
    }

    /// Advance `phi` (full grid including walls) by one step.
    pub fn step(&self, phi: &mut [Complex64]) -> Result<()> {
        let n = phi.len();
        let h_phi = self.hamiltonian.apply(phi);
        let half = Complex64::new(0.0, 0.5 * self.dt);
        let rhs: Vec<Complex64> = (1..n - 1).map(|j| phi[j] - half * h_phi[j]).collect();
        let interior = solve_tridiagonal(&self.lower, &self.diag, &self.upper, &rhs)?;
        phi[1..n - 1].copy_from_slice(&interior);
        Ok(())
    }
}

/// Evolve under the rescaled quantum-roll Hamiltonian for `steps` steps of
/// size `dt` (in `t~ = N t`), sampling observables after every step.
pub fn evolve_quantum_roll(
    state: &RadialWavefunction,
    params: &LargeNParams,
    dt: f64,
    steps: usize,
) -> Result<RollSeries> {
    let ham = RadialHamiltonian::rescaled(params, &state.grid);
    evolve_with(state, ham, dt, steps)
}

/// Crank–Nicolson evolution under an arbitrary radial Hamiltonian.
pub fn evolve_with(
    state: &RadialWavefunction,
    hamiltonian: RadialHamiltonian,
    dt: f64,
    steps: usize,
) -> Result<RollSeries> {
    if hamiltonian.potential.len() != state.grid.points {
        return Err(RollError::PotentialMismatch(hamiltonian.potential.len()));
    }
    let cn = CrankNicolson::new(hamiltonian, dt)?;
    let mut phi = state.amplitudes.clone();
    let n = phi.len();
    let mut current = state.clone();
    let observe = |phi: &[Complex64], t: f64, current: &mut RadialWavefunction| {
        current.amplitudes.copy_from_slice(phi);
        current.time = t;
        RollSample {
            t,
            y2: moment_y2(current),
            norm: current.norm(),
            energy: cn.hamiltonian().energy(phi),
        }
    };
    let first = observe(&phi, state.time, &mut current);
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(first);
    let mut boundary_max = phi[n - 2].norm_sqr();
    for i in 1..=steps {
        let t = state.time + i as f64 * dt;
        match cn.step(&mut phi) {
            Err(RollError::Numerics(NumericsError::SingularTridiagonal(_))) => {
                return Err(RollError::UnitarityLost {
                    drift: f64::INFINITY,
                    time: t,
                });
            }
            other => other?,
        }
        let sample = observe(&phi, t, &mut current);
        let drift = (sample.norm - first.norm).abs();
        if !(drift <= UNITARITY_LIMIT) {
            return Err(RollError::UnitarityLost { drift, time: t });
        }
        boundary_max = boundary_max.max(phi[n - 2].norm_sqr());
        samples.push(sample);
    }
    Ok(RollSeries {
        samples,
        final_state: current,
        boundary_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn potential_hand_values() {
        let grid = RadialGrid::new(2.0, 21).unwrap();
        let at_one = |p: LargeNParams| effective_radial_potential(&p, &grid)[10];
        assert_abs_diff_eq!(
            at_one(LargeNParams::new(3.0, 8.0, 1.0).unwrap()),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            at_one(LargeNParams::new(1.0, 8.0, 0.0).unwrap()),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            at_one(LargeNParams::new(5.0, 8.0, 0.0).unwrap()),
            1.04,
            epsilon = 1e-14
        );
        assert!(
            effective_radial_potential(&LargeNParams::new(5.0, 8.0, 0.0).unwrap(), &grid)[0]
                .is_infinite()
        );
    }

    #[test]
    fn unscaled_is_n_times_rescaled() {
        let p = LargeNParams::new(7.0, 2.0, 0.8).unwrap();
        for y in [0.3, 1.0, 2.2] {
            let r = p.n.sqrt() * y;
            assert_abs_diff_eq!(
                unscaled_potential(&p, r),
                p.n * rescaled_potential(&p, y),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(LargeNParams::new(0.5, 1.0, 1.0).is_err());
        assert!(LargeNParams::new(2.0, -1.0, 1.0).is_err());
        assert!(LargeNParams::new(2.0, 1.0, -0.1).is_err());
        assert!(RadialGrid::new(5.0, 15).is_err());
    }

    #[test]
    fn n1_packet_peaks_at_origin() {
        let p = LargeNParams::new(1.0, 1.0, 1.0).unwrap();
        let grid = RadialGrid::new(8.0, 801).unwrap();
        let s = quantum_roll_initial_state(&p, &grid, 1.0).unwrap();
        // node 0 is pinned; the next node holds the maximum
        let d = s.density();
        let imax = (0..d.len()).max_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
        assert_eq!(imax, 1);
        assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn n9_packet_peak() {
        let p = LargeNParams::new(9.0, 1.0, 1.0).unwrap();
        let grid = RadialGrid::new(4.0, 4001).unwrap();
        let s = quantum_roll_initial_state(&p, &grid, 1.0).unwrap();
        let d = s.density();
        let imax = (0..d.len()).max_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
        assert_abs_diff_eq!(
            grid.coord(imax),
            (8.0f64 / 9.0).sqrt(),
            epsilon = grid.spacing()
        );
    }

    #[test]
    fn narrow_packet_under_resolved() {
        let p = LargeNParams::new(3.0, 1.0, 1.0).unwrap();
        let grid = RadialGrid::new(6.0, 601).unwrap();
        let err = quantum_roll_initial_state(&p, &grid, 1e-6).unwrap_err();
        assert!(matches!(err, RollError::UnderResolved(_)));
    }

    #[test]
    fn half_gaussian_moment() {
        // |phi|^2 ∝ exp(-y^2) on y > 0 has <y^2> = 1/2.
        let grid = RadialGrid::new(12.0, 2401).unwrap();
        let amps = grid
            .coords()
            .map(|y| Complex64::new((-0.5 * y * y).exp(), 0.0))
            .collect();
        let s = RadialWavefunction::from_amplitudes(grid, amps).unwrap();
        // the pinned y=0 node removes an O(h) sliver, so the match is to O(h)
        assert_abs_diff_eq!(moment_y2(&s), 0.5, epsilon = 2e-3);
        let scaled = RadialWavefunction {
            amplitudes: s
                .amplitudes
                .iter()
                .map(|a| a * Complex64::new(-3.0, 2.0))
                .collect(),
            ..s.clone()
        };
        assert_abs_diff_eq!(moment_y2(&scaled), moment_y2(&s), epsilon = 1e-14);
    }

    #[test]
    fn point_mass_limit() {
        let grid = RadialGrid::new(4.0, 8001).unwrap();
        let mut last = f64::INFINITY;
        for w in [0.2, 0.05, 0.01] {
            let amps = grid
                .coords()
                .map(|y| Complex64::new((-(y - 2.0f64).powi(2) / (4.0 * w * w)).exp(), 0.0))
                .collect();
            let s = RadialWavefunction::from_amplitudes(grid, amps).unwrap();
            let dev = (moment_y2(&s) - 4.0).abs();
            assert!(dev < last);
            last = dev;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn nonpositive_step_rejected() {
        let p = LargeNParams::new(2.0, 8.0, 1.0).unwrap();
        let grid = RadialGrid::new(4.0, 401).unwrap();
        let s = quantum_roll_initial_state(&p, &grid, 0.5).unwrap();
        assert_eq!(
            evolve_quantum_roll(&s, &p, 0.0, 10).unwrap_err(),
            RollError::InvalidStep
        );
        assert_eq!(
            evolve_quantum_roll(&s, &p, -1.0, 10).unwrap_err(),
            RollError::InvalidStep
        );
    }
}
