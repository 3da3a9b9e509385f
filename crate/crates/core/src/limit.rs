//! Explicit solver for the limiting second-order system: Euler transport of
//! `(rho, rho V, rho_1..)` plus epsilon-scaled cross-diffusion of the
//! partial densities.
//!
//! The convective flux reuses the per-species Lax-Friedrichs routine of the
//! relaxation solver, evaluated on the equilibrium (zero-flux) split of the
//! conserved state: total mass and momentum fluxes are the species sums,
//! partial-density fluxes are the species mass fluxes. Sharing the routine
//! makes the leading discretization error common to both solvers, so it
//! largely cancels in relaxation-vs-limit comparisons.
//!
//! The diffusion term is a centered flux difference: face value of `D` from
//! arithmetically averaged states, centered force gradients, everything in
//! flux form so conservation is exact.

use crate::entropy::equilibrium_entropy;
use crate::error::{MixtureError, Result};
use crate::grid::FieldU1D;
use crate::mixture::{reduced_collision_inverse, MixtureSpec};
use crate::relaxation::species_interface_flux;

/// Largest equilibrium characteristic speed `max_i |V| + sqrt(p_i')`.
pub fn max_wave_speed(spec: &MixtureSpec, field: &FieldU1D) -> Result<f64> {
    let n = spec.n_species();
    let mut lambda: f64 = 0.0;
    for cell in 0..field.n_cells() {
        let c = field.cell_slice(cell);
        let velocity = (c[1] / c[0]).abs();
        let densities = field.densities(cell)?;
        for i in 0..n {
            lambda = lambda.max(velocity + spec.law(i).derivative_pos(densities[i]).sqrt());
        }
    }
    Ok(lambda)
}

/// Bound on the diffusion coefficient scale:
/// `max_cells ||D(u)||_inf * max_i (p_i'/rho_i + p_N'/rho_N)`.
pub fn diffusion_speed_bound(spec: &MixtureSpec, field: &FieldU1D) -> Result<f64> {
    let n = spec.n_species();
    let kinv = kinv_flat(spec)?;
    let mut scratch = DiffScratch::new(n);
    let mut bound: f64 = 0.0;
    for cell in 0..field.n_cells() {
        let densities = field.densities(cell)?;
        diffusion_matrix_flat(&kinv, &densities, &mut scratch);
        let mut row_norm: f64 = 0.0;
        for j in 0..n - 1 {
            let sum: f64 = (0..n - 1).map(|l| scratch.d[j * (n - 1) + l].abs()).sum();
            row_norm = row_norm.max(sum);
        }
        let p_last = spec.law(n - 1).derivative_pos(densities[n - 1]) / densities[n - 1];
        let mut coeff: f64 = 0.0;
        for i in 0..n - 1 {
            let c = spec.law(i).derivative_pos(densities[i]) / densities[i] + p_last;
            coeff = coeff.max(c);
        }
        bound = bound.max(row_norm * coeff);
    }
    Ok(bound)
}

/// Largest stable explicit step
/// `min(dx / lambda_max, dx^2 / (2 eps lambda_D))`.
pub fn max_stable_dt(spec: &MixtureSpec, field: &FieldU1D) -> Result<f64> {
    let dx = field.dx();
    let hyperbolic = dx / max_wave_speed(spec, field)?;
    let lambda_d = diffusion_speed_bound(spec, field)?;
    let parabolic = if lambda_d > 0.0 {
        dx * dx / (2.0 * spec.epsilon() * lambda_d)
    } else {
        f64::INFINITY
    };
    Ok(hyperbolic.min(parabolic))
}

pub(crate) fn kinv_flat(spec: &MixtureSpec) -> Result<Vec<f64>> {
    let kinv = reduced_collision_inverse(spec)?;
    let n1 = spec.n_species() - 1;
    let mut flat = vec![0.0; n1 * n1];
    for i in 0..n1 {
        for j in 0..n1 {
            flat[i * n1 + j] = kinv[(i, j)];
        }
    }
    Ok(flat)
}

pub(crate) struct DiffScratch {
    pub c: Vec<f64>,
    pub tmp: Vec<f64>,
    pub d: Vec<f64>,
}

impl DiffScratch {
    pub fn new(n: usize) -> Self {
        let n1 = n - 1;
        Self {
            c: vec![0.0; n1 * n1],
            tmp: vec![0.0; n1 * n1],
            d: vec![0.0; n1 * n1],
        }
    }
}

struct FaceScratch {
    avg: Vec<f64>,
    grad: Vec<f64>,
    force: Vec<f64>,
}

impl FaceScratch {
    fn new(n: usize) -> Self {
        Self {
            avg: vec![0.0; n],
            grad: vec![0.0; n],
            force: vec![0.0; n - 1],
        }
    }
}

/// `D = C * Kinv * C` on flat buffers, symmetrized like the matrix path.
pub(crate) fn diffusion_matrix_flat(kinv: &[f64], densities: &[f64], s: &mut DiffScratch) {
    let n = densities.len();
    let n1 = n - 1;
    let rho: f64 = densities.iter().sum();
    for i in 0..n1 {
        for j in 0..n1 {
            let mut v = if i == j { densities[j] } else { 0.0 };
            v -= densities[i] * densities[j] / rho;
            s.c[i * n1 + j] = v;
        }
    }
    // tmp = Kinv * C
    for i in 0..n1 {
        for j in 0..n1 {
            let mut acc = 0.0;
            for k in 0..n1 {
                acc += kinv[i * n1 + k] * s.c[k * n1 + j];
            }
            s.tmp[i * n1 + j] = acc;
        }
    }
    // d = C * tmp, then symmetrize
    for i in 0..n1 {
        for j in 0..n1 {
            let mut acc = 0.0;
            for k in 0..n1 {
                acc += s.c[i * n1 + k] * s.tmp[k * n1 + j];
            }
            s.d[i * n1 + j] = acc;
        }
    }
    for i in 0..n1 {
        for j in (i + 1)..n1 {
            let v = 0.5 * (s.d[i * n1 + j] + s.d[j * n1 + i]);
            s.d[i * n1 + j] = v;
            s.d[j * n1 + i] = v;
        }
    }
}

/// Diffusive species flux at the face between `left` and `right` cell
/// density vectors: `-eps * D(avg) * force(avg, centered gradient)`,
/// written into `out` (length `N - 1`).
fn face_diffusion_flux(
    spec: &MixtureSpec,
    kinv: &[f64],
    left: &[f64],
    right: &[f64],
    dx: f64,
    mats: &mut DiffScratch,
    face: &mut FaceScratch,
    out: &mut [f64],
) {
    let n = left.len();
    let n1 = n - 1;
    for i in 0..n {
        face.avg[i] = 0.5 * (left[i] + right[i]);
        face.grad[i] = (right[i] - left[i]) / dx;
    }
    let p_last =
        spec.law(n - 1).derivative_pos(face.avg[n - 1]) / face.avg[n - 1] * face.grad[n - 1];
    for i in 0..n1 {
        face.force[i] =
            spec.law(i).derivative_pos(face.avg[i]) / face.avg[i] * face.grad[i] - p_last;
    }
    diffusion_matrix_flat(kinv, &face.avg, mats);
    let eps = spec.epsilon();
    for j in 0..n1 {
        let mut acc = 0.0;
        for l in 0..n1 {
            acc += mats.d[j * n1 + l] * face.force[l];
        }
        out[j] = -eps * acc;
    }
}

/// Action of the discrete diffusion operator alone: per cell, the flux
/// difference of the face diffusion fluxes for `rho_1 .. rho_{N-1}`
/// (stride `N - 1`). Exposed so the assembled operator can be checked
/// against a direct divergence of the closure's fluxes.
pub fn diffusion_tendency(spec: &MixtureSpec, field: &FieldU1D) -> Result<Vec<f64>> {
    let n = spec.n_species();
    let n1 = n - 1;
    let m_cells = field.n_cells();
    let dx = field.dx();
    let kinv = kinv_flat(spec)?;
    let mut mats = DiffScratch::new(n);
    let mut face = FaceScratch::new(n);

    let mut face_flux = vec![0.0; m_cells * n1];
    let mut densities = Vec::with_capacity(m_cells);
    for cell in 0..m_cells {
        densities.push(field.densities(cell)?);
    }
    for cell in 0..m_cells {
        let right = (cell + 1) % m_cells;
        let out = &mut face_flux[cell * n1..(cell + 1) * n1];
        face_diffusion_flux(
            spec,
            &kinv,
            &densities[cell],
            &densities[right],
            dx,
            &mut mats,
            &mut face,
            out,
        );
    }
    let mut tendency = vec![0.0; m_cells * n1];
    for cell in 0..m_cells {
        let left = (cell + m_cells - 1) % m_cells;
        for j in 0..n1 {
            tendency[cell * n1 + j] =
                -(face_flux[cell * n1 + j] - face_flux[left * n1 + j]) / dx;
        }
    }
    Ok(tendency)
}

/// One forward-Euler step with an explicitly supplied `dt`.
pub fn step_with_dt(spec: &MixtureSpec, field: &mut FieldU1D, dt: f64) -> Result<()> {
    let n = spec.n_species();
    let n1 = n - 1;
    let m_cells = field.n_cells();
    let dx = field.dx();
    let stride = field.stride();
    let kinv = kinv_flat(spec)?;
    let mut scratch = DiffScratch::new(n);

    let mut densities = Vec::with_capacity(m_cells);
    let mut velocities = Vec::with_capacity(m_cells);
    for cell in 0..m_cells {
        densities.push(field.densities(cell)?);
        let c = field.cell_slice(cell);
        velocities.push(c[1] / c[0]);
    }

    // total flux per face: [mass, momentum, species 1..N-1]
    let mut face_flux = vec![0.0; m_cells * stride];
    let mut diff = vec![0.0; n1];
    for cell in 0..m_cells {
        let right = (cell + 1) % m_cells;
        let out = &mut face_flux[cell * stride..(cell + 1) * stride];
        for i in 0..n {
            let rho_l = densities[cell][i];
            let rho_r = densities[right][i];
            let (f_rho, f_mom) = species_interface_flux(
                spec.law(i),
                rho_l,
                rho_l * velocities[cell],
                rho_r,
                rho_r * velocities[right],
            );
            out[0] += f_rho;
            out[1] += f_mom;
            if i < n1 {
                out[2 + i] = f_rho;
            }
        }
        face_diffusion_flux(
            spec,
            &kinv,
            &densities[cell],
            &densities[right],
            dx,
            &mut scratch,
            &mut diff,
        );
        for j in 0..n1 {
            out[2 + j] += diff[j];
        }
    }

    for cell in 0..m_cells {
        let left = (cell + m_cells - 1) % m_cells;
        for k in 0..stride {
            let df = face_flux[cell * stride + k] - face_flux[left * stride + k];
            field.cell_slice_mut(cell)[k] -= dt / dx * df;
        }
    }
    // positivity check; report the first offending cell
    for cell in 0..m_cells {
        field.densities(cell)?;
    }
    field.advance_time(dt);
    Ok(())
}

/// Advances one step at `dt = cfl * min(dx/lambda, dx^2/(2 eps lambda_D))`
/// and returns the step taken.
pub fn step(spec: &MixtureSpec, field: &mut FieldU1D, cfl: f64) -> Result<f64> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(MixtureError::CflViolation(cfl));
    }
    let dt = cfl * max_stable_dt(spec, field)?;
    step_with_dt(spec, field, dt)?;
    Ok(dt)
}

/// Advances the field to exactly `t_target` (clipping the final steps).
pub fn advance_to(spec: &MixtureSpec, field: &mut FieldU1D, t_target: f64, cfl: f64) -> Result<()> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(MixtureError::CflViolation(cfl));
    }
    while field.time() < t_target - 1e-14 * t_target.max(1.0) {
        let dt = (cfl * max_stable_dt(spec, field)?).min(t_target - field.time());
        step_with_dt(spec, field, dt)?;
    }
    Ok(())
}

/// Discrete total equilibrium entropy `sum_cells eta_eq(u) dx`.
pub fn total_entropy(spec: &MixtureSpec, field: &FieldU1D) -> Result<f64> {
    let mut acc = 0.0;
    for cell in 0..field.n_cells() {
        acc += equilibrium_entropy(spec, &field.cell(cell))? * field.dx();
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{entropic_force, ConservedU};
    use crate::grid::InitialProfile;
    use crate::harness::sample_spec;
    use crate::mixture::{diffusion_matrix, PressureLaw};
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sine_field(spec: &MixtureSpec, m: usize) -> FieldU1D {
        let profile = InitialProfile::SineMixture {
            amplitudes: (0..spec.n_species())
                .map(|i| 0.1 * spec.ref_density(i) * if i % 2 == 0 { 1.0 } else { -0.5 })
                .collect(),
            phases: (0..spec.n_species()).map(|i| 0.9 * i as f64).collect(),
            velocity_amplitude: 0.1,
        };
        FieldU1D::from_profile(spec, &profile, m, 1.0).unwrap()
    }

    #[test]
    fn uniform_state_is_a_bitwise_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let spec = sample_spec(&mut rng, 3, 1);
        let mut field = FieldU1D::from_profile(&spec, &InitialProfile::Uniform, 16, 1.0).unwrap();
        let before = field.clone();
        for _ in 0..10 {
            step(&spec, &mut field, 0.5).unwrap();
        }
        for cell in 0..16 {
            assert_eq!(field.cell_slice(cell), before.cell_slice(cell));
        }
    }

    #[test]
    fn conservation_of_masses_and_momentum() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let spec = sample_spec(&mut rng, 3, 1).with_epsilon(0.02).unwrap();
        let mut field = sine_field(&spec, 64);
        let masses0 = field.species_masses();
        let mom0 = field.total_momentum();
        for _ in 0..200 {
            step(&spec, &mut field, 0.45).unwrap();
        }
        let masses1 = field.species_masses();
        for i in 0..3 {
            assert!((masses1[i] - masses0[i]).abs() <= 1e-12 * masses0[i]);
        }
        assert!((field.total_momentum() - mom0).abs() <= 1e-12 * (1.0 + mom0.abs()));
    }

    #[test]
    fn vanishing_diffusion_reduces_to_passive_advection() {
        // constant total density and uniform velocity: species profiles
        // translate at speed V
        let c = 1.0;
        let sigma = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let spec = MixtureSpec::new(
            vec![
                PressureLaw::IsothermalIdeal { c },
                PressureLaw::IsothermalIdeal { c },
            ],
            vec![0.5, 0.5],
            sigma,
            1e-30,
            1,
        )
        .unwrap();
        let m = 1024;
        let v = 0.5;
        let mut field = FieldU1D::zeros(2, m, 1.0);
        let rho1 = |x: f64| 0.5 + 0.1 * (2.0 * std::f64::consts::PI * x).sin();
        for cell in 0..m {
            let x = field.x(cell);
            let u = ConservedU::new(1, 1.0, vec![v], vec![rho1(x)]).unwrap();
            field.set_cell(cell, &u);
        }
        let t_end = 0.2;
        advance_to(&spec, &mut field, t_end, 0.4).unwrap();

        let mut err_sq = 0.0;
        for cell in 0..m {
            let x = field.x(cell);
            let exact = rho1(x - v * t_end);
            err_sq += (field.cell(cell).partial()[0] - exact).powi(2) * field.dx();
        }
        let err = err_sq.sqrt();
        assert!(err < 2e-2, "advection error {err}");
        // velocity must remain uniform
        for cell in 0..m {
            let u = field.cell(cell);
            assert!((u.momentum()[0] / u.rho() - v).abs() < 1e-12);
        }
    }

    #[test]
    fn assembled_diffusion_operator_matches_direct_divergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let spec = sample_spec(&mut rng, 3, 1).with_epsilon(0.05).unwrap();
        let field = sine_field(&spec, 64);
        let tendency = diffusion_tendency(&spec, &field).unwrap();

        // independent path through the public matrix API
        let m = 64;
        let n = 3;
        let dx = field.dx();
        let mut face = vec![[0.0_f64; 2]; m];
        for cell in 0..m {
            let right = (cell + 1) % m;
            let dl = field.densities(cell).unwrap();
            let dr = field.densities(right).unwrap();
            let avg: Vec<f64> = (0..n).map(|i| 0.5 * (dl[i] + dr[i])).collect();
            let grads = DMatrix::from_fn(n, 1, |i, _| (dr[i] - dl[i]) / dx);
            let force = entropic_force(&spec, &avg, &grads).unwrap();
            let d = diffusion_matrix(&spec, &avg).unwrap();
            let j = -spec.epsilon() * d * force;
            face[cell] = [j[(0, 0)], j[(1, 0)]];
        }
        for cell in 0..m {
            let left = (cell + m - 1) % m;
            for comp in 0..2 {
                let direct = -(face[cell][comp] - face[left][comp]) / dx;
                let got = tendency[cell * 2 + comp];
                assert!(
                    (got - direct).abs() <= 1e-12 * (1.0 + direct.abs()),
                    "cell {cell} comp {comp}: {got} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn entropy_is_nonincreasing_on_smooth_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let spec = sample_spec(&mut rng, 3, 1).with_epsilon(0.01).unwrap();
        let mut field = sine_field(&spec, 64);
        let mut eta = total_entropy(&spec, &field).unwrap();
        for _ in 0..100 {
            step(&spec, &mut field, 0.45).unwrap();
            let next = total_entropy(&spec, &field).unwrap();
            assert!(next <= eta + 1e-8 * eta.abs().max(1e-12));
            eta = next;
        }
    }

    #[test]
    fn uniform_entropy_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(74);
        let spec = sample_spec(&mut rng, 3, 1);
        let mut field = FieldU1D::from_profile(&spec, &InitialProfile::Uniform, 16, 1.0).unwrap();
        let eta0 = total_entropy(&spec, &field).unwrap();
        for _ in 0..5 {
            step(&spec, &mut field, 0.5).unwrap();
        }
        assert_eq!(total_entropy(&spec, &field).unwrap(), eta0);
    }

    #[test]
    fn parabolic_bound_engages_for_large_epsilon() {
        let mut rng = ChaCha8Rng::seed_from_u64(75);
        let spec = sample_spec(&mut rng, 3, 1).with_epsilon(5.0).unwrap();
        let field = sine_field(&spec, 64);
        let dt = max_stable_dt(&spec, &field).unwrap();
        let hyp = field.dx() / max_wave_speed(&spec, &field).unwrap();
        assert!(dt < hyp, "parabolic bound should bind: {dt} vs {hyp}");
    }
}
