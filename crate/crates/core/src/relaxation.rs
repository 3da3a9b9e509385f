//! First-order finite-volume solver for the stiff relaxation system on a
//! periodic 1-D grid.
//!
//! The field carries `W = (rho, rho V, rho_1.., J_1..)`, but the hyperbolic
//! substep advances the equivalent per-species conservative variables
//! `(rho_i, rho_i V_i)` with a local Lax-Friedrichs (Rusanov) flux: every
//! convective term then sits inside a telescoping flux difference and masses
//! and momentum are conserved to round-off. States convert exactly between
//! the two forms at substep boundaries.
//!
//! The collision source `-(1/eps) K Phi J` acts cell-locally on the fluxes
//! and is integrated by backward Euler (unconditionally stable in
//! `dt / eps`, equilibria are exact fixed points), wrapped in a Strang
//! splitting: half source, full hyperbolic step, half source.

use crate::entropy::{entropy, StateU};
use crate::error::{MixtureError, Result};
use crate::grid::Field1D;
use crate::mixture::{reduced_collision_matrix, MixtureSpec, PressureLaw};

/// Local Lax-Friedrichs interface flux for one species' 1-D Euler block
/// `(rho, m) -> (m, m^2/rho + p)`.
#[inline]
pub(crate) fn species_interface_flux(
    law: &PressureLaw,
    rho_l: f64,
    m_l: f64,
    rho_r: f64,
    m_r: f64,
) -> (f64, f64) {
    let v_l = m_l / rho_l;
    let v_r = m_r / rho_r;
    let p_l = law.pressure_pos(rho_l);
    let p_r = law.pressure_pos(rho_r);
    let a_l = v_l.abs() + law.derivative_pos(rho_l).sqrt();
    let a_r = v_r.abs() + law.derivative_pos(rho_r).sqrt();
    let a = a_l.max(a_r);
    let f_rho = 0.5 * (m_l + m_r) - 0.5 * a * (rho_r - rho_l);
    let f_mom = 0.5 * (m_l * v_l + p_l + m_r * v_r + p_r) - 0.5 * a * (m_r - m_l);
    (f_rho, f_mom)
}

/// Per-cell conservative states `[rho_i, m_i]` (stride `2 N`), converted
/// exactly from the `W` layout. Fails if any species density is lost.
pub(crate) fn w_to_u(spec: &MixtureSpec, field: &Field1D) -> Result<Vec<f64>> {
    let n = spec.n_species();
    let m_cells = field.n_cells();
    let mut u = vec![0.0; m_cells * 2 * n];
    for cell in 0..m_cells {
        let c = field.cell_slice(cell);
        let rho = c[0];
        let velocity = c[1] / rho;
        let mut rho_acc = 0.0;
        let mut flux_acc = 0.0;
        let out = &mut u[cell * 2 * n..(cell + 1) * 2 * n];
        for i in 0..n - 1 {
            let rho_i = c[2 + i];
            let j_i = c[1 + n + i];
            check_cell_density(cell, i, rho_i)?;
            out[2 * i] = rho_i;
            out[2 * i + 1] = rho_i * velocity + j_i;
            rho_acc += rho_i;
            flux_acc += j_i;
        }
        let rho_last = rho - rho_acc;
        check_cell_density(cell, n - 1, rho_last)?;
        out[2 * (n - 1)] = rho_last;
        out[2 * (n - 1) + 1] = rho_last * velocity - flux_acc;
    }
    Ok(u)
}

/// Writes per-species conservative states back into the `W` layout.
pub(crate) fn u_to_w(spec: &MixtureSpec, u: &[f64], field: &mut Field1D) -> Result<()> {
    let n = spec.n_species();
    for cell in 0..field.n_cells() {
        let blk = &u[cell * 2 * n..(cell + 1) * 2 * n];
        let mut rho = 0.0;
        let mut momentum = 0.0;
        for i in 0..n {
            check_cell_density(cell, i, blk[2 * i])?;
            rho += blk[2 * i];
            momentum += blk[2 * i + 1];
        }
        let velocity = momentum / rho;
        let c = field.cell_slice_mut(cell);
        c[0] = rho;
        c[1] = momentum;
        for i in 0..n - 1 {
            c[2 + i] = blk[2 * i];
            c[1 + n + i] = blk[2 * i + 1] - blk[2 * i] * velocity;
        }
    }
    Ok(())
}

#[inline]
fn check_cell_density(cell: usize, species: usize, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(MixtureError::PositivityLoss {
            cell,
            species,
            value,
        })
    }
}

/// Largest frozen characteristic speed `max_i |V_i| + sqrt(p_i')` over the
/// field; the non-equilibrium speeds bound the equilibrium ones.
pub fn max_wave_speed(spec: &MixtureSpec, field: &Field1D) -> Result<f64> {
    let u = w_to_u(spec, field)?;
    let n = spec.n_species();
    let mut lambda: f64 = 0.0;
    for cell in 0..field.n_cells() {
        let blk = &u[cell * 2 * n..(cell + 1) * 2 * n];
        for i in 0..n {
            let rho = blk[2 * i];
            let speed = (blk[2 * i + 1] / rho).abs() + spec.law(i).derivative_pos(rho).sqrt();
            lambda = lambda.max(speed);
        }
    }
    Ok(lambda)
}

/// Largest stable hyperbolic step `dx / lambda_max`.
pub fn max_stable_dt(spec: &MixtureSpec, field: &Field1D) -> Result<f64> {
    Ok(field.dx() / max_wave_speed(spec, field)?)
}

/// Flux-difference tendency of the per-species conservative variables,
/// stride `2 N` per cell (masses first within each species block).
pub fn hyperbolic_rhs(spec: &MixtureSpec, field: &Field1D) -> Result<Vec<f64>> {
    let u = w_to_u(spec, field)?;
    Ok(hyperbolic_rhs_from_u(spec, &u, field.n_cells(), field.dx()))
}

pub(crate) fn hyperbolic_rhs_from_u(
    spec: &MixtureSpec,
    u: &[f64],
    m_cells: usize,
    dx: f64,
) -> Vec<f64> {
    let n = spec.n_species();
    let stride = 2 * n;
    // interface i sits between cells i and i+1 (periodic)
    let mut fluxes = vec![0.0; m_cells * stride];
    for cell in 0..m_cells {
        let right = (cell + 1) % m_cells;
        let l = &u[cell * stride..(cell + 1) * stride];
        let r = &u[right * stride..(right + 1) * stride];
        let out = &mut fluxes[cell * stride..(cell + 1) * stride];
        for i in 0..n {
            let (f_rho, f_mom) =
                species_interface_flux(spec.law(i), l[2 * i], l[2 * i + 1], r[2 * i], r[2 * i + 1]);
            out[2 * i] = f_rho;
            out[2 * i + 1] = f_mom;
        }
    }
    let mut rhs = vec![0.0; m_cells * stride];
    for cell in 0..m_cells {
        let left = (cell + m_cells - 1) % m_cells;
        for k in 0..stride {
            rhs[cell * stride + k] =
                -(fluxes[cell * stride + k] - fluxes[left * stride + k]) / dx;
        }
    }
    rhs
}

/// Backward-Euler relaxation of the fluxes over `dt`:
/// `(I + (dt/eps) K Phi) J_new = J_old` per cell, densities frozen.
///
/// Densities and total momentum are untouched. `K Phi` has its spectrum in
/// the open right half-plane for every admissible state, so the linear
/// system cannot be singular.
pub fn stiff_source_step(spec: &MixtureSpec, field: &mut Field1D, dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(MixtureError::InvalidSpec(format!(
            "source step needs positive dt, got {dt}"
        )));
    }
    let n = spec.n_species();
    let k_red = reduced_collision_matrix(spec);
    // sigma_iN = -K_iN equals the reduced row sum; precompute once
    let row_sums: Vec<f64> = (0..n - 1)
        .map(|i| (0..n - 1).map(|j| k_red[(i, j)]).sum())
        .collect();
    let ratio = dt / spec.epsilon();
    let mut a = vec![0.0; (n - 1) * (n - 1)];
    let mut rhs = vec![0.0; n - 1];
    for cell in 0..field.n_cells() {
        let densities = field.densities(cell)?;
        let rho_last = densities[n - 1];
        // A = I + (dt/eps) * (K_jl / rho_l + row_sum_j / rho_N)
        for j in 0..n - 1 {
            for l in 0..n - 1 {
                let kphi = k_red[(j, l)] / densities[l] + row_sums[j] / rho_last;
                a[j * (n - 1) + l] = ratio * kphi + if j == l { 1.0 } else { 0.0 };
            }
        }
        let c = field.cell_slice_mut(cell);
        rhs.copy_from_slice(&c[1 + n..2 * n]);
        solve_small(&mut a, &mut rhs)
            .ok_or(MixtureError::SingularMatrix("relaxing fluxes (backward Euler)"))?;
        c[1 + n..2 * n].copy_from_slice(&rhs);
    }
    Ok(())
}

/// In-place Gaussian elimination with partial pivoting for the small
/// per-cell systems; returns `None` on a zero pivot.
fn solve_small(a: &mut [f64], b: &mut [f64]) -> Option<()> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col] == 0.0 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let inv = 1.0 / a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] * inv;
            if factor != 0.0 {
                for k in col..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col * n + k] * b[k];
        }
        b[col] = acc / a[col * n + col];
    }
    Some(())
}

/// One Strang-split step with an explicitly supplied `dt`: half source,
/// forward-Euler hyperbolic update, half source.
pub fn step_with_dt(spec: &MixtureSpec, field: &mut Field1D, dt: f64) -> Result<()> {
    stiff_source_step(spec, field, 0.5 * dt)?;
    let mut u = w_to_u(spec, field)?;
    let rhs = hyperbolic_rhs_from_u(spec, &u, field.n_cells(), field.dx());
    for (uk, rk) in u.iter_mut().zip(rhs.iter()) {
        *uk += dt * rk;
    }
    u_to_w(spec, &u, field)?;
    stiff_source_step(spec, field, 0.5 * dt)?;
    field.advance_time(dt);
    Ok(())
}

/// Advances one step at the CFL-limited `dt = cfl * dx / lambda_max` and
/// returns the step taken.
pub fn step(spec: &MixtureSpec, field: &mut Field1D, cfl: f64) -> Result<f64> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(MixtureError::CflViolation(cfl));
    }
    let dt = cfl * max_stable_dt(spec, field)?;
    step_with_dt(spec, field, dt)?;
    Ok(dt)
}

/// Advances the field to exactly `t_target` (clipping the final steps).
pub fn advance_to(spec: &MixtureSpec, field: &mut Field1D, t_target: f64, cfl: f64) -> Result<()> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(MixtureError::CflViolation(cfl));
    }
    while field.time() < t_target - 1e-14 * t_target.max(1.0) {
        let dt = (cfl * max_stable_dt(spec, field)?).min(t_target - field.time());
        step_with_dt(spec, field, dt)?;
    }
    Ok(())
}

/// Reconstructs the per-species state of one cell (`V_i = V + J_i / rho_i`).
pub fn reconstruct_state(spec: &MixtureSpec, field: &Field1D, cell: usize) -> Result<StateU> {
    let n = spec.n_species();
    let c = field.cell_slice(cell);
    let rho = c[0];
    let velocity = c[1] / rho;
    let mut densities = Vec::with_capacity(n);
    let mut momentum = Vec::with_capacity(n);
    let mut rho_acc = 0.0;
    let mut flux_acc = 0.0;
    for i in 0..n - 1 {
        let rho_i = c[2 + i];
        check_cell_density(cell, i, rho_i)?;
        densities.push(rho_i);
        momentum.push(rho_i * velocity + c[1 + n + i]);
        rho_acc += rho_i;
        flux_acc += c[1 + n + i];
    }
    let rho_last = rho - rho_acc;
    check_cell_density(cell, n - 1, rho_last)?;
    densities.push(rho_last);
    momentum.push(rho_last * velocity - flux_acc);
    StateU::new(1, densities, momentum)
}

/// Discrete total entropy `sum_cells eta(U(cell)) dx`.
pub fn total_entropy(spec: &MixtureSpec, field: &Field1D) -> Result<f64> {
    let mut acc = 0.0;
    for cell in 0..field.n_cells() {
        let state = reconstruct_state(spec, field, cell)?;
        acc += entropy(spec, &state)? * field.dx();
    }
    Ok(acc)
}
