//! Scenario drivers. Each one validates its whole config, computes, and only
//! then hands back the files to write.

use std::fmt::Write as _;

use anyhow::{anyhow, Error};
use largen_core::classicality::{
    amplitude_variances, correlation_coefficient, inverted_oscillator_amplitude,
    squeeze_parameters, uncertainty_function, InvertedOscillator, ThermalSpec,
};
use largen_core::effpot::{
    potential_profile, scan_nc, y_min_scan, EffpotError, GapScan, YMinSearch,
};
use largen_core::on_model::{
    evolve_quantum_roll, quantum_roll_initial_state, LargeNParams, RadialGrid, RollError,
};
use largen_core::qvlasov::{
    bogoliubov_coefficients, constant_field_mode, sample_mode, BackgroundField, ConstantFrequency,
    FrequencyProfile, ModeEnsemble, ModeState, MomentumGrid, SchwingerSystem, VlasovError,
};
use largen_core::ToleranceSpec;
use rayon::prelude::*;

use crate::config::{
    finite, positive, ClassicalityConfig, EffpotScanConfig, Preset, QuantumRollConfig,
    SchwingerConfig,
};

/// Failure class, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    Io(Error),
    Validation(Error),
    Numerical(Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Io(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    pub fn error(&self) -> &Error {
        match self {
            Failure::Io(e) | Failure::Validation(e) | Failure::Numerical(e) => e,
        }
    }
}

fn invalid(e: impl Into<Error>) -> Failure {
    Failure::Validation(e.into())
}

fn numerical(e: impl Into<Error>) -> Failure {
    Failure::Numerical(e.into())
}

/// Everything a finished run produces.
#[derive(Debug, Default)]
pub struct Output {
    pub files: Vec<(&'static str, String)>,
    pub stdout: Vec<String>,
    pub warnings: Vec<String>,
}

/// Fixed 17-significant-digit formatting; non-finite values are spelled out.
pub fn num(v: f64) -> String {
    let v = v + 0.0;
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

fn row(out: &mut String, cols: &[f64]) {
    let line: Vec<String> = cols.iter().map(|&v| num(v)).collect();
    out.push_str(&line.join(","));
    out.push('\n');
}

/// `0, dt, 2 dt, ..., t_end`, with the last point landing on `t_end`.
fn output_times(t_end: f64, dt_out: f64) -> Vec<f64> {
    let n = ((t_end / dt_out).round() as usize).max(1);
    (0..=n)
        .map(|i| if i == n { t_end } else { i as f64 * dt_out })
        .collect()
}

fn roll_validation(e: RollError) -> Failure {
    invalid(anyhow!(e))
}

pub fn quantum_roll(cfg: &QuantumRollConfig) -> Result<Output, Failure> {
    let params = LargeNParams::new(cfg.n, cfg.g, cfg.y0).map_err(roll_validation)?;
    let grid = RadialGrid::new(cfg.y_max, cfg.points).map_err(roll_validation)?;
    positive("dt", cfg.dt).map_err(invalid)?;
    positive("t_end", cfg.t_end).map_err(invalid)?;
    if cfg.sample_every == 0 {
        return Err(invalid(anyhow!("`sample_every` must be >= 1")));
    }
    let steps = (cfg.t_end / cfg.dt).ceil().max(1.0);
    if steps > 1e9 {
        return Err(invalid(anyhow!(
            "`t_end / dt` gives {steps:e} steps; at most 1e9 allowed"
        )));
    }
    let state = quantum_roll_initial_state(&params, &grid, cfg.width).map_err(roll_validation)?;

    let series = evolve_quantum_roll(&state, &params, cfg.dt, steps as usize).map_err(numerical)?;

    let mut csv = String::from("t,y2,norm,energy\n");
    let last = series.samples.len() - 1;
    for (i, s) in series.samples.iter().enumerate() {
        if i % cfg.sample_every == 0 || i == last {
            row(&mut csv, &[s.t, s.y2, s.norm, s.energy]);
        }
    }
    let mut out = Output {
        files: vec![("quantum_roll.csv", csv)],
        ..Default::default()
    };
    if !series.wall_clear() {
        out.warnings.push(format!(
            "wavefunction reached the outer wall (max |phi|^2 = {:e}); increase y_max",
            series.boundary_max
        ));
    }
    Ok(out)
}

fn effpot_validation(e: EffpotError) -> Failure {
    invalid(anyhow!(e))
}

pub fn effpot_scan(cfg: &EffpotScanConfig, tol: ToleranceSpec) -> Result<Output, Failure> {
    let template = LargeNParams::new(cfg.n_lo, cfg.g, cfg.y0).map_err(roll_validation)?;
    if !(cfg.n_hi > cfg.n_lo && cfg.n_hi.is_finite()) {
        return Err(invalid(anyhow!("`N_hi` must be finite and exceed `N_lo`")));
    }
    if cfg.n_points < 2 {
        return Err(invalid(anyhow!("`N_points` must be at least 2")));
    }
    let scan = GapScan {
        chi_max: cfg.chi_max,
        chi_points: cfg.chi_points,
    };
    scan.validate().map_err(effpot_validation)?;
    let search = YMinSearch {
        y_hi: cfg.y_hi,
        coarse_points: cfg.y_coarse_points,
    };
    positive("y_hi", search.y_hi).map_err(invalid)?;
    if search.coarse_points < 2 {
        return Err(invalid(anyhow!("`y_coarse_points` must be at least 2")));
    }
    let profile = match &cfg.profile {
        Some(p) => {
            let params = template.with_n(p.n);
            params.validate().map_err(roll_validation)?;
            finite("profile.y_lo", p.y_lo).map_err(invalid)?;
            if !(p.y_lo >= 0.0 && p.y_hi > p.y_lo && p.y_hi.is_finite()) {
                return Err(invalid(anyhow!("`profile` needs 0 <= y_lo < y_hi")));
            }
            if p.points < 2 {
                return Err(invalid(anyhow!("`profile.points` must be at least 2")));
            }
            let ys: Vec<f64> = (0..p.points)
                .map(|i| p.y_lo + (p.y_hi - p.y_lo) * i as f64 / (p.points - 1) as f64)
                .collect();
            Some((params, ys))
        }
        None => None,
    };

    let ns: Vec<f64> = (0..cfg.n_points)
        .map(|i| {
            let n = cfg.n_lo + (cfg.n_hi - cfg.n_lo) * i as f64 / (cfg.n_points - 1) as f64;
            if i == cfg.n_points - 1 {
                cfg.n_hi
            } else {
                n
            }
        })
        .collect();
    let y_mins = y_min_scan(&template, &ns, &search, &scan, tol).map_err(numerical)?;
    let summary = if y_mins[0].1 == 0.0 {
        "N_c=<=N_lo".to_string()
    } else if y_mins[y_mins.len() - 1].1 > 0.0 {
        "N_c=>N_hi".to_string()
    } else {
        let nc = scan_nc(&template, cfg.n_lo, cfg.n_hi, &scan, tol).map_err(numerical)?;
        format!("N_c={}", num(nc))
    };

    let mut csv = String::from("N,y_min\n");
    for (n, y) in &y_mins {
        row(&mut csv, &[*n, *y]);
    }
    let mut files = vec![("y_min.csv", csv)];
    if let Some((params, ys)) = profile {
        let sols = potential_profile(&params, &ys, &scan, tol).map_err(numerical)?;
        let mut csv = String::from("y,chi,V_per_N,defined\n");
        for s in &sols {
            let (chi, v) = if s.defined {
                (s.chi, s.v_eff_per_n)
            } else {
                (f64::NAN, f64::NAN)
            };
            let _ = writeln!(csv, "{},{},{},{}", num(s.y), num(chi), num(v), s.defined);
        }
        files.push(("profile.csv", csv));
    }
    files.push(("summary.txt", format!("{summary}\n")));
    Ok(Output {
        files,
        stdout: vec![summary],
        warnings: Vec::new(),
    })
}

fn vlasov_validation(e: VlasovError) -> Failure {
    invalid(anyhow!(e))
}

pub fn schwinger(cfg: &SchwingerConfig, tol: ToleranceSpec) -> Result<Output, Failure> {
    let field = BackgroundField::new(0.0, -cfg.e0, cfg.e, cfg.m).map_err(vlasov_validation)?;
    finite("E0", cfg.e0).map_err(invalid)?;
    let g = cfg.grid;
    finite("grid.kz_min", g.kz_min).map_err(invalid)?;
    finite("grid.kz_max", g.kz_max).map_err(invalid)?;
    let grid = MomentumGrid::new(
        g.kz_min,
        g.kz_max,
        g.kz_count,
        g.kperp_max,
        g.kperp_count,
        cfg.cutoff,
    )
    .map_err(vlasov_validation)?;
    if (g.kz_min + g.kz_max).abs() > 1e-12 * g.kz_max.abs().max(g.kz_min.abs()) {
        return Err(invalid(anyhow!(
            "`grid.kz_min` must equal -`grid.kz_max` (symmetric k_z range)"
        )));
    }
    positive("t_end", cfg.t_end).map_err(invalid)?;
    positive("dt_out", cfg.dt_out).map_err(invalid)?;
    if !(cfg.n_init >= 0.0 && cfg.n_init.is_finite()) {
        return Err(invalid(anyhow!("`n_init` must be a finite number >= 0")));
    }
    let ensemble = ModeEnsemble::on_grid(&grid, &field, cfg.n_init).map_err(vlasov_validation)?;

    let mut system = SchwingerSystem::new(field, ensemble);
    let run = system
        .run(cfg.t_end, cfg.dt_out, tol, cfg.modes)
        .map_err(numerical)?;
    let yield_final: f64 = system
        .kinetic_records()
        .map_err(numerical)?
        .iter()
        .zip(&system.ensemble.weights)
        .map(|(r, w)| w * r.n_tilde)
        .sum();

    let mut steps = String::from("t,A,E,j,S_total,energy_total\n");
    for s in &run.steps {
        row(
            &mut steps,
            &[s.t, s.a, s.e_field, s.current, s.entropy, s.energy],
        );
    }
    let mut files = vec![("steps.csv", steps)];
    if cfg.modes {
        let mut modes = String::from("t,kz,kperp,n_tilde,abs_corr\n");
        for m in &run.modes {
            row(&mut modes, &[m.t, m.k_z, m.k_perp, m.n_tilde, m.abs_corr]);
        }
        files.push(("modes.csv", modes));
    }
    let (first, last) = (run.steps[0], run.steps[run.steps.len() - 1]);
    let summary = format!(
        "{{\n  \"S_initial\": {},\n  \"S_final\": {},\n  \"energy_drift\": {},\n  \"particle_yield\": {}\n}}\n",
        json_num(first.entropy),
        json_num(last.entropy),
        json_num(run.energy_drift()),
        json_num(yield_final)
    );
    files.push(("summary.json", summary));
    let mut out = Output {
        files,
        ..Default::default()
    };
    if system.ensemble.is_empty() {
        out.warnings
            .push("no modes below the cutoff; the field stays constant".into());
    }
    Ok(out)
}

/// JSON has no NaN, so non-finite values become `null`.
fn json_num(v: f64) -> String {
    if v.is_finite() {
        num(v)
    } else {
        "null".into()
    }
}

/// One tracked oscillator: its start state, driving profile and, when the
/// adiabatic basis exists, the frequency at each time.
struct Track {
    start: ModeState,
    profile: Box<dyn FrequencyProfile + Sync>,
    omega_at: Option<Box<dyn Fn(f64) -> f64 + Sync>>,
}

fn required(field: &str, v: Option<f64>) -> Result<f64, Failure> {
    v.ok_or_else(|| invalid(anyhow!("`{field}` is required for this preset")))
}

pub fn classicality(cfg: &ClassicalityConfig, tol: ToleranceSpec) -> Result<Output, Failure> {
    positive("t_end", cfg.t_end).map_err(invalid)?;
    positive("dt_out", cfg.dt_out).map_err(invalid)?;
    let times = output_times(cfg.t_end, cfg.dt_out);
    if times.len() > 10_000_001 {
        return Err(invalid(anyhow!(
            "`t_end / dt_out` exceeds 1e7 output times"
        )));
    }
    let thermal_of = |theta0: Option<f64>| -> Result<ThermalSpec, Failure> {
        match theta0 {
            Some(t) => ThermalSpec::thermal(t).map_err(|e| invalid(anyhow!(e).context("`theta0`"))),
            None => Ok(ThermalSpec::Vacuum),
        }
    };

    let (thermal, tracks): (ThermalSpec, Vec<Track>) = match cfg.preset {
        Preset::GroundState | Preset::Thermal => {
            positive("omega", cfg.omega).map_err(invalid)?;
            let thermal = if cfg.preset == Preset::Thermal {
                thermal_of(Some(required("theta0", cfg.theta0)?))?
            } else {
                ThermalSpec::Vacuum
            };
            let w = cfg.omega;
            let track = Track {
                start: ModeState::adiabatic(0.0, 0.0, w, 0.0, thermal.occupancy()),
                profile: Box::new(ConstantFrequency(w)),
                omega_at: Some(Box::new(move |_| w)),
            };
            (thermal, vec![track])
        }
        Preset::InvertedOscillator => {
            let kappa = required("kappa", cfg.kappa)?;
            positive("kappa", kappa).map_err(invalid)?;
            let thermal = thermal_of(cfg.theta0)?;
            let (f, f_dot) = inverted_oscillator_amplitude(kappa, 0.0);
            let track = Track {
                start: ModeState {
                    k_z: 0.0,
                    k_perp: 0.0,
                    f,
                    f_dot,
                    theta: 0.0,
                    n_init: thermal.occupancy(),
                },
                profile: Box::new(InvertedOscillator { kappa }),
                omega_at: None,
            };
            (thermal, vec![track])
        }
        Preset::Qvlasov => {
            let e = required("e", cfg.e)?;
            let m = required("m", cfg.m)?;
            let e0 = required("E0", cfg.e0)?;
            BackgroundField::new(0.0, -e0, e, m).map_err(vlasov_validation)?;
            finite("E0", e0).map_err(invalid)?;
            let kz = cfg
                .kz
                .clone()
                .ok_or_else(|| invalid(anyhow!("`kz` is required for this preset")))?;
            let kp = cfg
                .kperp
                .clone()
                .ok_or_else(|| invalid(anyhow!("`kperp` is required for this preset")))?;
            if kz.is_empty() || kp.is_empty() {
                return Err(invalid(anyhow!("`kz` and `kperp` must be non-empty")));
            }
            for &k in kz.iter().chain(&kp) {
                finite("kz/kperp", k).map_err(invalid)?;
            }
            if kp.iter().any(|&k| k < 0.0) {
                return Err(invalid(anyhow!("`kperp` entries must be >= 0")));
            }
            let thermal = thermal_of(cfg.theta0)?;
            let mut tracks = Vec::new();
            for &k_z in &kz {
                for &k_perp in &kp {
                    let field0 = BackgroundField::new(0.0, -e0, e, m).map_err(vlasov_validation)?;
                    let w0 = field0.omega_sq(k_z, k_perp).sqrt();
                    tracks.push(Track {
                        start: ModeState::adiabatic(k_z, k_perp, w0, 0.0, thermal.occupancy()),
                        profile: Box::new(constant_field_mode(k_z, k_perp, e, m, e0)),
                        omega_at: Some(Box::new(move |t| {
                            let p = k_z + e * e0 * t;
                            (p * p + k_perp * k_perp + m * m).sqrt()
                        })),
                    });
                }
            }
            (thermal, tracks)
        }
    };

    let per_track: Vec<Vec<[f64; 3]>> = tracks
        .par_iter()
        .map(|tr| -> Result<Vec<[f64; 3]>, Error> {
            let mut states = vec![tr.start];
            states.extend(sample_mode(
                &tr.start,
                &&*tr.profile,
                0.0,
                &times[1..],
                tol,
            )?);
            states
                .iter()
                .zip(&times)
                .map(|(s, &t)| {
                    let cov = amplitude_variances(s.f, s.f_dot, thermal);
                    let r = match &tr.omega_at {
                        Some(w) => {
                            let (a, b) = bogoliubov_coefficients(s.f, s.f_dot, s.theta, w(t))?;
                            squeeze_parameters(a, b, s.theta)?.r
                        }
                        None => f64::NAN,
                    };
                    Ok([uncertainty_function(&cov), correlation_coefficient(&cov), r])
                })
                .collect()
        })
        .collect::<Result<_, _>>()
        .map_err(numerical)?;

    let mut csv = String::from("t,kz,kperp,U,rho_xp,squeeze_r\n");
    for (i, &t) in times.iter().enumerate() {
        for (tr, rows) in tracks.iter().zip(&per_track) {
            let [u, rho, r] = rows[i];
            row(&mut csv, &[t, tr.start.k_z, tr.start.k_perp, u, rho, r]);
        }
    }
    Ok(Output {
        files: vec![("classicality.csv", csv)],
        ..Default::default()
    })
}

pub fn check_tolerance(tol: ToleranceSpec) -> Result<ToleranceSpec, Failure> {
    tol.validate().map_err(|e| invalid(anyhow!(e)))?;
    Ok(tol)
}
