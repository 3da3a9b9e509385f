//! Experiment drivers: the epsilon sweep comparing the twin solvers, the
//! log-log order fit, and the structure certification battery.

use std::io::{self, Write};

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closure::well_prepared_state;
use crate::entropy::{
    collision_source, dissipation_matrix, dissipation_null_basis, entropy_gradient,
    entropy_hessian, flux_symmetry_defect, sample_state, symbol_null_space, symmetric_rank,
};
use crate::error::{MixtureError, Result};
use crate::grid::{FieldU1D, InitialProfile};
use crate::mixture::{diffusion_matrix, MixtureSpec, PressureLaw};
use crate::{limit, relaxation};

/// Pinned tolerances of the certification battery.
pub mod tol {
    /// Relative asymmetry allowed for the entropy-symmetrized flux Jacobian
    /// (finite-difference limited).
    pub const FLUX_SYMMETRY: f64 = 1e-5;
    /// `|Q + L grad eta|`, exact algebra up to rounding.
    pub const SOURCE_FACTORIZATION: f64 = 1e-12;
    /// Asymmetry / negative spectrum allowed for `L`.
    pub const DISSIPATION_PSD: f64 = 1e-12;
    /// Null-basis annihilation residual.
    pub const NULL_SPACE: f64 = 1e-12;
    /// Positive part of `grad eta . Q`.
    pub const DISSIPATION_SIGN: f64 = 1e-12;
    /// Relative asymmetry of the diffusion matrix.
    pub const DIFFUSION_SYMMETRY: f64 = 1e-12;
    /// Leakage of the symbol null space out of the canonical subspace.
    pub const ISOTROPY: f64 = 1e-10;
    /// Finite-difference step for the flux Jacobian.
    pub const FLUX_JACOBIAN_STEP: f64 = 1e-6;
}

/// Random mixture: alternating isothermal/power-law species, collision
/// coefficients uniform in `[0.5, 2]`.
pub fn sample_spec(rng: &mut impl Rng, n: usize, dim: usize) -> MixtureSpec {
    let laws: Vec<PressureLaw> = (0..n)
        .map(|i| {
            if i % 2 == 0 {
                PressureLaw::IsothermalIdeal {
                    c: rng.gen_range(0.5..2.0),
                }
            } else {
                PressureLaw::PowerLaw {
                    kappa: rng.gen_range(0.5..2.0),
                    gamma: rng.gen_range(1.0..2.0),
                }
            }
        })
        .collect();
    let ref_densities: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let mut sigma = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let s = rng.gen_range(0.5..2.0);
            sigma[(i, j)] = s;
            sigma[(j, i)] = s;
        }
    }
    MixtureSpec::new(laws, ref_densities, sigma, 0.01, dim).unwrap()
}

/// The three-species benchmark mixture used throughout: linear pressure
/// coefficients `(1.0, 1.2, 0.8)`, reference densities `(1.0, 0.8, 1.2)`,
/// unit collision coefficients.
pub fn standard_mixture() -> MixtureSpec {
    let sigma = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
    MixtureSpec::new(
        vec![
            PressureLaw::IsothermalIdeal { c: 1.0 },
            PressureLaw::IsothermalIdeal { c: 1.2 },
            PressureLaw::IsothermalIdeal { c: 0.8 },
        ],
        vec![1.0, 0.8, 1.2],
        sigma,
        0.01,
        1,
    )
    .unwrap()
}

/// Smooth positive benchmark profile: staggered sine perturbations on the
/// densities, a gentle velocity wave.
pub fn standard_profile() -> InitialProfile {
    InitialProfile::SineMixture {
        amplitudes: vec![0.1, -0.05, 0.08],
        phases: vec![0.0, 2.0 * std::f64::consts::PI / 3.0, 4.0 * std::f64::consts::PI / 3.0],
        velocity_amplitude: 0.1,
    }
}

pub const STANDARD_EPS: [f64; 4] = [0.02, 0.01, 0.005, 0.0025];
pub const STANDARD_M: usize = 1024;
pub const STANDARD_T_END: f64 = 0.05;
pub const STANDARD_CFL: f64 = 0.45;
pub const STANDARD_LENGTH: f64 = 1.0;
/// Accepted band for the fitted convergence order of the standard sweep.
pub const ORDER_BAND: (f64, f64) = (1.6, 2.4);
/// Number of common sampling times per sweep run.
pub const SWEEP_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub error: f64,
}

/// Runs the relaxation and limit solvers side by side for each epsilon and
/// records the worst sampled conserved-mode discrepancy.
///
/// Both solvers take identical time steps (the minimum of their stability
/// bounds), so the shared part of the discretization error cancels in the
/// difference and the epsilon-driven gap is what remains. Runs for distinct
/// epsilon values execute in parallel; the table order follows `eps_list`.
pub fn epsilon_sweep(
    spec: &MixtureSpec,
    initial: &InitialProfile,
    eps_list: &[f64],
    m_cells: usize,
    length: f64,
    t_end: f64,
    cfl: f64,
) -> Result<Vec<SweepRow>> {
    if eps_list.len() < 3 {
        return Err(MixtureError::InvalidSpec(format!(
            "sweep needs at least 3 epsilon values, got {}",
            eps_list.len()
        )));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(MixtureError::InvalidSpec(
            "sweep epsilon values must be strictly decreasing".into(),
        ));
    }
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(MixtureError::CflViolation(cfl));
    }
    eps_list
        .par_iter()
        .map(|&eps| {
            let error = sweep_error(spec, initial, eps, m_cells, length, t_end, cfl)?;
            Ok(SweepRow {
                epsilon: eps,
                error,
            })
        })
        .collect()
}

fn sweep_error(
    spec: &MixtureSpec,
    initial: &InitialProfile,
    eps: f64,
    m_cells: usize,
    length: f64,
    t_end: f64,
    cfl: f64,
) -> Result<f64> {
    let spec = spec.with_epsilon(eps)?;
    let u0 = FieldU1D::from_profile(&spec, initial, m_cells, length)?;
    let mut relax_field = well_prepared_state(&spec, &u0)?;
    let mut limit_field = u0;

    let mut worst: f64 = 0.0;
    for k in 1..=SWEEP_SAMPLES {
        let target = t_end * k as f64 / SWEEP_SAMPLES as f64;
        // lockstep: both solvers advance with the same dt
        while relax_field.time() < target - 1e-14 * target.max(1.0) {
            let dt_r = relaxation::max_stable_dt(&spec, &relax_field)?;
            let dt_l = limit::max_stable_dt(&spec, &limit_field)?;
            let dt = (cfl * dt_r.min(dt_l)).min(target - relax_field.time());
            relaxation::step_with_dt(&spec, &mut relax_field, dt)?;
            limit::step_with_dt(&spec, &mut limit_field, dt)?;
        }
        worst = worst.max(conserved_mode_l2(&relax_field, &limit_field));
    }
    Ok(worst)
}

/// Discrete L2 norm of the conserved-mode difference
/// `(rho, rho V, rho_1 .. rho_{N-1})`, all components summed.
pub fn conserved_mode_l2(relax_field: &crate::grid::Field1D, limit_field: &FieldU1D) -> f64 {
    let n = relax_field.n_species();
    let dx = relax_field.dx();
    let mut acc = 0.0;
    for cell in 0..relax_field.n_cells() {
        let w = relax_field.cell_slice(cell);
        let u = limit_field.cell_slice(cell);
        for k in 0..n + 1 {
            let d = w[k] - u[k];
            acc += d * d * dx;
        }
    }
    acc.sqrt()
}

fn log_log_slope(rows: &[SweepRow]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.epsilon.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.error.ln()).collect();
    let xm = xs.iter().sum::<f64>() / xs.len() as f64;
    let ym = ys.iter().sum::<f64>() / ys.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        num += (x - xm) * (y - ym);
        den += (x - xm) * (x - xm);
    }
    if den == 0.0 {
        None
    } else {
        Some(num / den)
    }
}

/// Least-squares slope of `log error` against `log epsilon`.
pub fn fit_order(rows: &[SweepRow]) -> Result<f64> {
    if rows.len() < 3 {
        return Err(MixtureError::DegenerateFit(format!(
            "need at least 3 rows, got {}",
            rows.len()
        )));
    }
    for r in rows {
        if !(r.error > 0.0) || !r.error.is_finite() {
            return Err(MixtureError::DegenerateFit(format!(
                "non-positive error {} at epsilon {}",
                r.error, r.epsilon
            )));
        }
    }
    log_log_slope(rows).ok_or_else(|| {
        MixtureError::DegenerateFit("epsilon values do not separate".into())
    })
}

/// `sweep.csv`: `epsilon,error,fitted_order_running`, running fit over the
/// rows seen so far ("nan" until two rows exist).
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: &mut W) -> io::Result<()> {
    writeln!(out, "epsilon,error,fitted_order_running")?;
    for k in 0..rows.len() {
        let running = log_log_slope(&rows[..=k])
            .map(|s| format!("{s:.16e}"))
            .unwrap_or_else(|| "nan".into());
        writeln!(
            out,
            "{:.16e},{:.16e},{running}",
            rows[k].epsilon, rows[k].error
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub condition: String,
    pub samples: usize,
    pub max_violation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureReport {
    pub n_species: usize,
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl StructureReport {
    pub fn check(&self, condition: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.condition == condition)
    }
}

/// Runs every structural check on `samples` random states of the given
/// mixture and aggregates maxima into a report.
pub fn certify_structure(spec: &MixtureSpec, samples: usize, seed: u64) -> Result<StructureReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n_species();
    let d = spec.dim();

    let mut hessian_violation: f64 = 0.0;
    let mut hessian_pass = true;
    let mut symmetry_violation: f64 = 0.0;
    let mut source_violation: f64 = 0.0;
    let mut psd_violation: f64 = 0.0;
    let mut null_violation: f64 = 0.0;
    let mut null_pass = true;
    let mut sign_violation: f64 = 0.0;
    let mut diffusion_violation: f64 = 0.0;
    let mut diffusion_pass = true;
    let mut isotropy_violation: f64 = 0.0;
    let mut isotropy_pass = true;

    let null_basis = dissipation_null_basis(n, d);
    let mut previous_null: Option<crate::entropy::SubspaceDescriptor> = None;

    for _ in 0..samples {
        let state = sample_state(spec, &mut rng);

        // strict convexity
        let hess = entropy_hessian(spec, &state)?;
        if hess.clone().cholesky().is_none() {
            hessian_pass = false;
        }
        let eigs = hess.symmetric_eigen().eigenvalues;
        let max_eig = eigs.iter().fold(0.0_f64, |a, &e| a.max(e.abs()));
        let min_eig = eigs.iter().fold(f64::INFINITY, |a, &e| a.min(e));
        hessian_violation = hessian_violation.max((-min_eig).max(0.0) / max_eig);

        // entropy-symmetrized flux Jacobian
        for axis in 0..d {
            let defect = flux_symmetry_defect(spec, &state, axis, tol::FLUX_JACOBIAN_STEP)?;
            symmetry_violation = symmetry_violation.max(defect);
        }

        // source factorization and dissipation sign
        let q = collision_source(spec, &state)?;
        let l = dissipation_matrix(spec, &state)?;
        let g = entropy_gradient(spec, &state)?;
        source_violation = source_violation.max((&q + &l * &g).amax());
        sign_violation = sign_violation.max(g.dot(&q).max(0.0));

        // L symmetric positive semi-definite with the fixed null space
        let asym = (&l - l.transpose()).amax();
        let l_min = l
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &e| a.min(e));
        psd_violation = psd_violation.max(asym).max((-l_min).max(0.0));
        null_violation = null_violation.max((&l * &null_basis).amax());
        if symmetric_rank(&l) != d * (n - 1) {
            null_pass = false;
        }

        // diffusion matrix SPD
        let u = state.conserved();
        let diff = diffusion_matrix(spec, &u.densities())?;
        diffusion_violation =
            diffusion_violation.max((&diff - diff.transpose()).amax() / diff.amax());
        if diff.clone().cholesky().is_none() {
            diffusion_pass = false;
        }

        // isotropy of the second-order symbol
        let xi: Vec<f64> = (0..d)
            .map(|_| {
                let v: f64 = rng.gen_range(-2.0..2.0);
                if v >= 0.0 {
                    v + 0.1
                } else {
                    v - 0.1
                }
            })
            .collect();
        let ns = symbol_null_space(spec, &u, &xi)?;
        if ns.dim() != d + 1 || !ns.is_canonical_prefix(d + 1, tol::ISOTROPY) {
            isotropy_pass = false;
        }
        let mut leak: f64 = 0.0;
        for r in d + 1..ns.basis().nrows() {
            for c in 0..ns.basis().ncols() {
                leak = leak.max(ns.basis()[(r, c)].abs());
            }
        }
        if let Some(prev) = &previous_null {
            leak = leak.max(ns.distance(prev));
        }
        isotropy_violation = isotropy_violation.max(leak);
        previous_null = Some(ns);
    }

    let checks = vec![
        CheckResult {
            condition: "entropy_hessian_positive_definite".into(),
            samples,
            max_violation: hessian_violation,
            pass: hessian_pass,
        },
        CheckResult {
            condition: "flux_symmetry".into(),
            samples,
            max_violation: symmetry_violation,
            pass: symmetry_violation <= tol::FLUX_SYMMETRY,
        },
        CheckResult {
            condition: "source_factorization".into(),
            samples,
            max_violation: source_violation,
            pass: source_violation <= tol::SOURCE_FACTORIZATION,
        },
        CheckResult {
            condition: "dissipation_psd".into(),
            samples,
            max_violation: psd_violation,
            pass: psd_violation <= tol::DISSIPATION_PSD,
        },
        CheckResult {
            condition: "dissipation_null_space".into(),
            samples,
            max_violation: null_violation,
            pass: null_pass && null_violation <= tol::NULL_SPACE,
        },
        CheckResult {
            condition: "entropy_dissipation_sign".into(),
            samples,
            max_violation: sign_violation,
            pass: sign_violation <= tol::DISSIPATION_SIGN,
        },
        CheckResult {
            condition: "diffusion_spd".into(),
            samples,
            max_violation: diffusion_violation,
            pass: diffusion_pass && diffusion_violation <= tol::DIFFUSION_SYMMETRY,
        },
        CheckResult {
            condition: "isotropy".into(),
            samples,
            max_violation: isotropy_violation,
            pass: isotropy_pass && isotropy_violation <= tol::ISOTROPY,
        },
    ];
    let pass = checks.iter().all(|c| c.pass);
    Ok(StructureReport {
        n_species: n,
        dim: d,
        samples,
        seed,
        checks,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fit_recovers_exact_power_laws() {
        let rows: Vec<SweepRow> = [0.02, 0.01, 0.005, 0.0025]
            .iter()
            .map(|&e| SweepRow {
                epsilon: e,
                error: 3.7 * e * e,
            })
            .collect();
        assert_relative_eq!(fit_order(&rows).unwrap(), 2.0, epsilon = 1e-12);

        let rows: Vec<SweepRow> = [0.02, 0.01, 0.005]
            .iter()
            .map(|&e| SweepRow {
                epsilon: e,
                error: 0.4 * e,
            })
            .collect();
        assert_relative_eq!(fit_order(&rows).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_matches_hand_log_log_slope() {
        let rows = vec![
            SweepRow {
                epsilon: 0.02,
                error: 4e-4,
            },
            SweepRow {
                epsilon: 0.01,
                error: 1e-4,
            },
            SweepRow {
                epsilon: 0.005,
                error: 2.5e-5,
            },
        ];
        assert_relative_eq!(fit_order(&rows).unwrap(), 2.0, epsilon = 1e-10);
    }

    #[test]
    fn fit_rejects_degenerate_tables() {
        let rows = vec![
            SweepRow {
                epsilon: 0.02,
                error: 1e-4,
            },
            SweepRow {
                epsilon: 0.01,
                error: 0.0,
            },
            SweepRow {
                epsilon: 0.005,
                error: 1e-5,
            },
        ];
        assert!(matches!(
            fit_order(&rows),
            Err(MixtureError::DegenerateFit(_))
        ));
        assert!(fit_order(&rows[..2]).is_err());
    }

    #[test]
    fn sweep_csv_layout() {
        let rows = vec![
            SweepRow {
                epsilon: 0.02,
                error: 4e-4,
            },
            SweepRow {
                epsilon: 0.01,
                error: 1e-4,
            },
        ];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "epsilon,error,fitted_order_running");
        assert!(lines[1].ends_with(",nan"));
        let running: f64 = lines[2].split(',').nth(2).unwrap().parse().unwrap();
        assert_relative_eq!(running, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn certification_passes_on_the_standard_mixture() {
        let report = certify_structure(&standard_mixture(), 50, 7).unwrap();
        assert!(report.pass, "{report:?}");
        for name in [
            "entropy_hessian_positive_definite",
            "flux_symmetry",
            "source_factorization",
            "dissipation_psd",
            "dissipation_null_space",
            "entropy_dissipation_sign",
            "diffusion_spd",
            "isotropy",
        ] {
            assert!(report.check(name).is_some(), "missing {name}");
        }
    }

    #[test]
    fn certification_is_seed_deterministic() {
        let spec = standard_mixture();
        let a = certify_structure(&spec, 25, 99).unwrap();
        let b = certify_structure(&spec, 25, 99).unwrap();
        for (x, y) in a.checks.iter().zip(b.checks.iter()) {
            assert_eq!(x.max_violation.to_bits(), y.max_violation.to_bits());
        }
    }

    #[test]
    fn quick_sweep_errors_decrease_with_epsilon() {
        // miniature version of the standard experiment; the full-resolution
        // run lives in the acceptance suite
        let spec = standard_mixture();
        let rows = epsilon_sweep(
            &spec,
            &standard_profile(),
            &[0.02, 0.01, 0.005],
            64,
            STANDARD_LENGTH,
            0.02,
            STANDARD_CFL,
        )
        .unwrap();
        assert!(rows[0].error > rows[1].error);
        assert!(rows[1].error > rows[2].error);
    }

    #[test]
    fn sweep_is_deterministic_across_runs() {
        let spec = standard_mixture();
        let run = || {
            epsilon_sweep(
                &spec,
                &standard_profile(),
                &[0.02, 0.01, 0.005],
                32,
                STANDARD_LENGTH,
                0.01,
                STANDARD_CFL,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.error.to_bits(), y.error.to_bits());
        }
    }

    #[test]
    fn sweep_validates_inputs() {
        let spec = standard_mixture();
        let profile = standard_profile();
        assert!(epsilon_sweep(&spec, &profile, &[0.02, 0.01], 32, 1.0, 0.01, 0.45).is_err());
        assert!(
            epsilon_sweep(&spec, &profile, &[0.01, 0.02, 0.04], 32, 1.0, 0.01, 0.45).is_err()
        );
        assert!(
            epsilon_sweep(&spec, &profile, &[0.02, 0.01, 0.005], 32, 1.0, 0.01, 1.5).is_err()
        );
    }
}
