//! Static large-N effective potential of the O(N) model.
//!
//! In rescaled variables the NLO potential per component is
//!
//! ```text
//! V/N = (chi/2)(y^2 - y0^2) - chi^2/(2g) + sqrt(chi)/2 + (m+ + m- - 3 sqrt(chi)) / (2N)
//! m±^2 = b ± sqrt(b^2 - c)
//! b = 5 chi / 2 + (g/2)(y^2 + 1/(2 sqrt(chi)))
//! c = 4 chi^2 + g (4 y^2 chi + sqrt(chi)/2)
//! ```
//!
//! with `chi` fixed by stationarity (the gap equation). Where the gap
//! equation has no positive root the NLO potential does not exist; the
//! smallest `y` where it does is `y_min(N)`, and `N_c` is the smallest `N`
//! with `y_min = 0`.

use rayon::prelude::*;
use thiserror::Error;

use crate::numerics::{find_root, NumericsError, ToleranceSpec};
use crate::on_model::LargeNParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EffpotError {
    #[error("chi out of domain: {0} (must be > 0)")]
    ChiOutOfDomain(f64),
    #[error("complex auxiliary masses at y = {y}, chi = {chi}")]
    ComplexMasses { y: f64, chi: f64 },
    #[error("gap solve failed: {0}")]
    GapSolveFailed(NumericsError),
    #[error("domain empty up to y_hi = {0}")]
    DomainEmpty(f64),
    #[error("no threshold in range [{lo}, {hi}]")]
    NoThreshold { lo: f64, hi: f64 },
    #[error("invalid scan setting `{field}`: {reason}")]
    InvalidScan {
        field: &'static str,
        reason: &'static str,
    },
}

pub type Result<T> = std::result::Result<T, EffpotError>;

/// Leading-order parametric point `(V/N, y^2)` at a given `chi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoPoint {
    pub v_per_n: f64,
    pub y_squared: f64,
}

impl LoPoint {
    /// `y^2 < 0` has no real `y` behind it.
    pub fn is_physical(&self) -> bool {
        self.y_squared >= 0.0
    }
}

/// `V/N = chi^2/(2g) + sqrt(chi)/4`, `y^2 = y0^2 + 2 chi/g - 1/(2 sqrt(chi))`.
pub fn v_eff_lo(chi: f64, params: &LargeNParams) -> Result<LoPoint> {
    if !(chi > 0.0) {
        return Err(EffpotError::ChiOutOfDomain(chi));
    }
    let g = params.g;
    let s = chi.sqrt();
    Ok(LoPoint {
        v_per_n: chi * chi / (2.0 * g) + s / 4.0,
        y_squared: params.y0 * params.y0 + 2.0 * chi / g - 1.0 / (2.0 * s),
    })
}

/// Leading-order `chi(y)`: the unique root of the LO parametric relation.
pub fn chi_lo(y: f64, params: &LargeNParams) -> Result<f64> {
    if !(params.g > 0.0) {
        return Err(EffpotError::ChiOutOfDomain(0.0));
    }
    let target = y * y;
    let f =
        |chi: f64| params.y0 * params.y0 + 2.0 * chi / params.g - 1.0 / (2.0 * chi.sqrt()) - target;
    // y^2(chi) increases monotonically from -inf to +inf.
    let mut hi = 1.0;
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = hi;
    while f(lo) > 0.0 {
        lo *= 0.5;
    }
    let tol = ToleranceSpec::new(1e-15, 1e-15, 10_000).expect("static tolerance");
    find_root(f, lo, hi, tol).map_err(EffpotError::GapSolveFailed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxiliaryMasses {
    pub m_plus: f64,
    pub m_minus: f64,
    pub b: f64,
    pub c: f64,
}

fn b_c(y: f64, chi: f64, g: f64) -> (f64, f64) {
    let s = chi.sqrt();
    let b = 2.5 * chi + 0.5 * g * (y * y + 0.5 / s);
    let c = 4.0 * chi * chi + g * (4.0 * y * y * chi + 0.5 * s);
    (b, c)
}

/// `m± = sqrt(b ± sqrt(b^2 - c))`.
///
/// For real `y` and `chi > 0` the discriminant equals
/// `(3chi/2 - g y^2/2 + g/(4 sqrt chi))^2 + g^2 y^2/(2 sqrt chi) >= 0`,
/// so complex masses only arise through `m-^2 < 0`, which needs `c < 0`
/// (i.e. `g < 0`).
pub fn auxiliary_masses(y: f64, chi: f64, g: f64) -> Result<AuxiliaryMasses> {
    if !(chi > 0.0) {
        return Err(EffpotError::ChiOutOfDomain(chi));
    }
    let (b, c) = b_c(y, chi, g);
    let disc = b * b - c;
    if disc < 0.0 {
        return Err(EffpotError::ComplexMasses { y, chi });
    }
    let root = disc.sqrt();
    let plus_sq = b + root;
    // c / (b + root) avoids cancellation in b - root.
    let minus_sq = if plus_sq > 0.0 { c / plus_sq } else { b - root };
    if plus_sq < 0.0 || minus_sq < 0.0 {
        return Err(EffpotError::ComplexMasses { y, chi });
    }
    Ok(AuxiliaryMasses {
        m_plus: plus_sq.sqrt(),
        m_minus: minus_sq.sqrt(),
        b,
        c,
    })
}

/// Closed-form `d(m+ + m-)/d(chi)`.
fn mass_sum_derivative(y: f64, chi: f64, g: f64) -> Result<f64> {
    let m = auxiliary_masses(y, chi, g)?;
    let s = chi.sqrt();
    let db = 2.5 - g / (8.0 * chi * s);
    let dc = 8.0 * chi + g * (4.0 * y * y + 0.25 / s);
    let root = (m.b * m.b - m.c).sqrt();
    let d_root = if root > 0.0 {
        (2.0 * m.b * db - dc) / (2.0 * root)
    } else {
        0.0
    };
    let dp = (db + d_root) / (2.0 * m.m_plus);
    let dm = (db - d_root) / (2.0 * m.m_minus);
    Ok(dp + dm)
}

/// Gap-equation residual `chi - RHS(chi)`; zero at a stationary point of
/// the NLO potential in `chi`.
pub fn gap_residual(chi: f64, y: f64, params: &LargeNParams) -> Result<f64> {
    if !(chi > 0.0) {
        return Err(EffpotError::ChiOutOfDomain(chi));
    }
    let LargeNParams { n, g, y0 } = *params;
    let rhs = 0.5 * g * (y * y - y0 * y0)
        + g * (n - 3.0) / (4.0 * n * chi.sqrt())
        + g / (2.0 * n) * mass_sum_derivative(y, chi, g)?;
    Ok(chi - rhs)
}

/// Knobs for the positive-root search of the gap equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapScan {
    pub chi_max: f64,
    /// Log-spaced scan points on `(chi_max * 1e-12, chi_max]`.
    pub chi_points: usize,
}

impl Default for GapScan {
    fn default() -> Self {
        Self {
            chi_max: 100.0,
            chi_points: 400,
        }
    }
}

impl GapScan {
    pub fn validate(&self) -> Result<()> {
        if !(self.chi_max > 0.0 && self.chi_max.is_finite()) {
            return Err(EffpotError::InvalidScan {
                field: "chi_max",
                reason: "must be a finite number > 0",
            });
        }
        if self.chi_points < 2 {
            return Err(EffpotError::InvalidScan {
                field: "chi_points",
                reason: "chi scan grid needs at least 2 points",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapSolution {
    pub y: f64,
    pub chi: f64,
    pub v_eff_per_n: f64,
    pub defined: bool,
    pub branch_info: String,
}

impl GapSolution {
    fn undefined(y: f64, why: &str) -> Self {
        Self {
            y,
            chi: f64::NAN,
            v_eff_per_n: f64::NAN,
            defined: false,
            branch_info: why.to_string(),
        }
    }
}

pub const NO_ROOT: &str = "no real chi root";
pub const CHI_NONPOSITIVE: &str = "chi <= 0";
pub const COMPLEX_MASSES: &str = "b^2 - c < 0";

/// Golden-section minimum of `f` on `[a, b]`.
fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
        if (b - a).abs() <= 1e-14 * b.abs() {
            break;
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// All positive roots of the gap equation found by a log-grid scan plus
/// refinement of near-miss local minima.
pub fn gap_roots(
    y: f64,
    params: &LargeNParams,
    scan: &GapScan,
    tol: ToleranceSpec,
) -> Result<Vec<f64>> {
    scan.validate()?;
    let anchor = chi_lo(y, params).unwrap_or(1.0);
    let chi_max = scan.chi_max.max(4.0 * anchor + 1.0);
    let chi_min = chi_max * 1e-12;
    let ratio = (chi_max / chi_min).powf(1.0 / (scan.chi_points - 1) as f64);
    let mut grid: Vec<f64> = (0..scan.chi_points)
        .map(|i| chi_min * ratio.powi(i as i32))
        .collect();
    // keep the LO anchor on the grid so the LO-connected root is bracketed
    grid.push(anchor);
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let f = |chi: f64| gap_residual(chi, y, params).unwrap_or(f64::NAN);
    let vals: Vec<f64> = grid.iter().map(|&c| f(c)).collect();

    let mut brackets = Vec::new();
    for i in 0..grid.len() - 1 {
        let (a, b) = (vals[i], vals[i + 1]);
        if a.is_finite() && b.is_finite() && a.signum() != b.signum() {
            brackets.push((grid[i], grid[i + 1]));
        }
        // A dip between grid points can hide a pair of roots.
        if i > 0 {
            let (l, m, r) = (vals[i - 1], vals[i], vals[i + 1]);
            if m <= l && m <= r && m > 0.0 && m.is_finite() {
                let (xm, fm) = golden_min(f, grid[i - 1], grid[i + 1], 200);
                if fm < 0.0 {
                    brackets.push((grid[i - 1], xm));
                    brackets.push((xm, grid[i + 1]));
                }
            }
        }
    }
    brackets
        .into_iter()
        .map(|(lo, hi)| find_root(f, lo, hi, tol).map_err(EffpotError::GapSolveFailed))
        .collect::<Result<Vec<_>>>()
        .map(|mut roots| {
            roots.sort_by(f64::total_cmp);
            roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
            roots
        })
}

/// NLO potential per component at `(y, chi)`.
pub fn v_nlo_at(y: f64, chi: f64, params: &LargeNParams) -> Result<f64> {
    let m = auxiliary_masses(y, chi, params.g)?;
    let LargeNParams { n, g, y0 } = *params;
    let s = chi.sqrt();
    Ok(0.5 * chi * (y * y - y0 * y0) - chi * chi / (2.0 * g)
        + 0.5 * s
        + (m.m_plus + m.m_minus - 3.0 * s) / (2.0 * n))
}

/// Solve the gap equation at `y`, selecting the root closest to the LO
/// `chi`. Absence of a positive root is reported as `defined = false`.
pub fn solve_gap(
    y: f64,
    params: &LargeNParams,
    scan: &GapScan,
    tol: ToleranceSpec,
) -> Result<GapSolution> {
    if !(params.g > 0.0) {
        // g = 0: the gap equation collapses to chi = 0
        return Ok(GapSolution::undefined(y, CHI_NONPOSITIVE));
    }
    let anchor = chi_lo(y, params)?;
    let roots = gap_roots(y, params, scan, tol)?;
    let Some(&chi) = roots
        .iter()
        .min_by(|a, b| (*a - anchor).abs().total_cmp(&(*b - anchor).abs()))
    else {
        return Ok(GapSolution::undefined(y, NO_ROOT));
    };
    match v_nlo_at(y, chi, params) {
        Ok(v) => Ok(GapSolution {
            y,
            chi,
            v_eff_per_n: v,
            defined: true,
            branch_info: format!(
                "{} positive root(s); LO anchor chi = {anchor:.6e}",
                roots.len()
            ),
        }),
        Err(EffpotError::ComplexMasses { .. }) => Ok(GapSolution::undefined(y, COMPLEX_MASSES)),
        Err(e) => Err(e),
    }
}

pub fn v_eff_nlo(
    y: f64,
    params: &LargeNParams,
    scan: &GapScan,
    tol: ToleranceSpec,
) -> Result<GapSolution> {
    solve_gap(y, params, scan, tol)
}

/// Settings for locating `y_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YMinSearch {
    pub y_hi: f64,
    /// Coarse scan points on `[0, y_hi]` before bisection.
    pub coarse_points: usize,
}

impl Default for YMinSearch {
    fn default() -> Self {
        Self {
            y_hi: 5.0,
            coarse_points: 51,
        }
    }
}

fn is_defined(y: f64, params: &LargeNParams, scan: &GapScan, tol: ToleranceSpec) -> Result<bool> {
    Ok(solve_gap(y, params, scan, tol)?.defined)
}

/// Smallest `y` at which the NLO potential exists; `0` when it exists at
/// the origin.
pub fn find_y_min(
    params: &LargeNParams,
    search: &YMinSearch,
    scan: &GapScan,
    tol: ToleranceSpec,
) -> Result<f64> {
    if is_defined(0.0, params, scan, tol)? {
        return Ok(0.0);
    }
    if !is_defined(search.y_hi, params, scan, tol)? {
        return Err(EffpotError::DomainEmpty(search.y_hi));
    }
    let pts = search.coarse_points.max(2);
    let step = search.y_hi / (pts - 1) as f64;
    let mut lo = 0.0;
    let mut hi = search.y_hi;
    for i in 1..pts {
        let y = i as f64 * step;
        if is_defined(y, params, scan, tol)? {
            hi = y;
            break;
        }
        lo = y;
    }
    while hi - lo > tol.abs_tol.max(tol.rel_tol * hi) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if is_defined(mid, params, scan, tol)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Smallest `N` in `[n_lo, n_hi]` for which the NLO potential is defined at
/// the origin (`y_min = 0`).
pub fn scan_nc(
    template: &LargeNParams,
    n_lo: f64,
    n_hi: f64,
    scan: &GapScan,
    tol: ToleranceSpec,
) -> Result<f64> {
    let at = |n: f64| is_defined(0.0, &template.with_n(n), scan, tol);
    if !(n_hi > n_lo) || at(n_lo)? || !at(n_hi)? {
        return Err(EffpotError::NoThreshold { lo: n_lo, hi: n_hi });
    }
    let (mut lo, mut hi) = (n_lo, n_hi);
    while hi - lo > tol.abs_tol.max(tol.rel_tol * hi) {
        // geometric midpoint keeps wide brackets (up to 1e9) efficient
        let mid = if hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `y_min` over a list of `N` values, evaluated in parallel.
pub fn y_min_scan(
    template: &LargeNParams,
    ns: &[f64],
    search: &YMinSearch,
    scan: &GapScan,
    tol: ToleranceSpec,
) -> Result<Vec<(f64, f64)>> {
    ns.par_iter()
        .map(|&n| find_y_min(&template.with_n(n), search, scan, tol).map(|y| (n, y)))
        .collect()
}

/// NLO potential on a `y` grid, evaluated in parallel.
pub fn potential_profile(
    params: &LargeNParams,
    ys: &[f64],
    scan: &GapScan,
    tol: ToleranceSpec,
) -> Result<Vec<GapSolution>> {
    ys.par_iter()
        .map(|&y| solve_gap(y, params, scan, tol))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(n: f64, g: f64, y0: f64) -> LargeNParams {
        LargeNParams { n, g, y0 }
    }

    #[test]
    fn lo_hand_values() {
        let pt = v_eff_lo(1.0, &p(10.0, 4.0, 0.7)).unwrap();
        assert_abs_diff_eq!(pt.v_per_n, 0.375, epsilon = 1e-12);
        assert_abs_diff_eq!(pt.y_squared, 0.49, epsilon = 1e-12);

        let pt = v_eff_lo(4.0, &p(10.0, 2.0, 1.5)).unwrap();
        assert_abs_diff_eq!(pt.v_per_n, 4.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pt.y_squared, 2.25 + 4.0 - 0.25, epsilon = 1e-12);

        let pt = v_eff_lo(1e-12, &p(10.0, 1.0, 1.0)).unwrap();
        assert!(!pt.is_physical());
        assert!(pt.y_squared < -1e5);

        assert_eq!(
            v_eff_lo(0.0, &p(10.0, 1.0, 1.0)).unwrap_err(),
            EffpotError::ChiOutOfDomain(0.0)
        );
    }

    #[test]
    fn free_theory_masses() {
        for y in [0.0, 0.5, 3.0] {
            let m = auxiliary_masses(y, 1.0, 0.0).unwrap();
            assert_abs_diff_eq!(m.b, 2.5, epsilon = 1e-15);
            assert_abs_diff_eq!(m.c, 4.0, epsilon = 1e-15);
            assert_abs_diff_eq!(m.m_plus, 2.0, epsilon = 1e-15);
            assert_abs_diff_eq!(m.m_minus, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(m.m_plus + m.m_minus - 3.0, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn complex_masses_fixture() {
        // Regression fixture: g < 0 drives c < 0 and hence m-^2 < 0.
        let err = auxiliary_masses(1.0, 1.0, -4.0).unwrap_err();
        assert_eq!(err, EffpotError::ComplexMasses { y: 1.0, chi: 1.0 });
    }

    #[test]
    fn free_theory_gap_is_undefined() {
        let sol = solve_gap(
            1.0,
            &p(10.0, 0.0, 1.0),
            &GapScan::default(),
            ToleranceSpec::default(),
        )
        .unwrap();
        assert!(!sol.defined);
        assert_eq!(sol.branch_info, CHI_NONPOSITIVE);
    }

    #[test]
    fn chi_lo_inverts_parametric_relation() {
        let params = p(1e9, 1.3, 0.8);
        for y in [0.0, 0.4, 1.0, 2.5] {
            let chi = chi_lo(y, &params).unwrap();
            let pt = v_eff_lo(chi, &params).unwrap();
            assert_abs_diff_eq!(pt.y_squared, y * y, epsilon = 1e-12);
        }
    }

    #[test]
    fn scan_setting_validation() {
        let bad = GapScan {
            chi_max: 10.0,
            chi_points: 0,
        };
        assert!(matches!(
            bad.validate(),
            Err(EffpotError::InvalidScan { .. })
        ));
        let bad = GapScan {
            chi_max: -1.0,
            chi_points: 100,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn threshold_bracket_must_straddle() {
        let t = p(10.0, 1.0, 1.0);
        let err = scan_nc(
            &t,
            100.0,
            200.0,
            &GapScan::default(),
            ToleranceSpec::default(),
        )
        .unwrap_err();
        assert!(matches!(err, EffpotError::NoThreshold { .. }));
    }
}
