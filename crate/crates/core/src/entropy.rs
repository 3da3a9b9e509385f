//! Entropy, fluxes, collision source and the dissipation structure of the
//! governing first-order system.
//!
//! States live in `O_U = { rho_i > 0 }`. The mixture entropy is
//!
//! ```text
//! eta(U) = sum_i [ rho_i * int_{ref_i}^{rho_i} p_i(z)/z^2 dz + |m_i|^2 / (2 rho_i) ]
//! ```
//!
//! and the collision source factors as `Q = -L * deta/dU` with `L` symmetric
//! positive semi-definite and a state-independent null space. Each of those
//! statements has a numerical check in this module; the harness aggregates
//! them into a certification report.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{MixtureError, Result};
use crate::mixture::{check_densities, collision_matrix, diffusion_matrix, MixtureSpec};
use crate::numdiff;

/// Per-species conservative state `(rho_i, rho_i V_i)`, `i = 1..N`.
///
/// Flat layout: one block of `1 + d` entries per species, density first.
#[derive(Debug, Clone, PartialEq)]
pub struct StateU {
    dim: usize,
    rho: Vec<f64>,
    /// Momentum densities, row-major `N x d`.
    momentum: Vec<f64>,
}

impl StateU {
    pub fn new(dim: usize, rho: Vec<f64>, momentum: Vec<f64>) -> Result<Self> {
        if momentum.len() != rho.len() * dim {
            return Err(MixtureError::InvalidSpec(format!(
                "momentum length {} does not match {} species in dimension {dim}",
                momentum.len(),
                rho.len()
            )));
        }
        check_densities(&rho)?;
        Ok(Self { dim, rho, momentum })
    }

    pub fn n_species(&self) -> usize {
        self.rho.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rho(&self, i: usize) -> f64 {
        self.rho[i]
    }

    pub fn momentum(&self, i: usize) -> &[f64] {
        &self.momentum[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocity(&self, i: usize) -> Vec<f64> {
        self.momentum(i).iter().map(|m| m / self.rho[i]).collect()
    }

    fn speed_squared(&self, i: usize) -> f64 {
        let rho = self.rho[i];
        self.momentum(i).iter().map(|m| (m / rho) * (m / rho)).sum()
    }

    /// Flat vector with per-species blocks `[rho_i, m_i]`.
    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.n_species();
        let mut v = DVector::zeros(n * (self.dim + 1));
        for i in 0..n {
            let o = i * (self.dim + 1);
            v[o] = self.rho[i];
            for a in 0..self.dim {
                v[o + 1 + a] = self.momentum[i * self.dim + a];
            }
        }
        v
    }

    pub fn from_vector(dim: usize, n_species: usize, v: &DVector<f64>) -> Result<Self> {
        if v.len() != n_species * (dim + 1) {
            return Err(MixtureError::InvalidSpec(format!(
                "state vector length {} does not match {n_species} species in dimension {dim}",
                v.len()
            )));
        }
        let mut rho = Vec::with_capacity(n_species);
        let mut momentum = Vec::with_capacity(n_species * dim);
        for i in 0..n_species {
            let o = i * (dim + 1);
            rho.push(v[o]);
            for a in 0..dim {
                momentum.push(v[o + 1 + a]);
            }
        }
        Self::new(dim, rho, momentum)
    }

    /// Conserved mode `(rho, rho V, rho_1 .. rho_{N-1})`.
    pub fn conserved(&self) -> ConservedU {
        let n = self.n_species();
        let rho: f64 = self.rho.iter().sum();
        let mut momentum = vec![0.0; self.dim];
        for i in 0..n {
            for a in 0..self.dim {
                momentum[a] += self.momentum[i * self.dim + a];
            }
        }
        ConservedU {
            dim: self.dim,
            rho,
            momentum,
            partial: self.rho[..n - 1].to_vec(),
        }
    }
}

/// Equilibrium/conserved mode `u = (rho, rho V, rho_1 .. rho_{N-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservedU {
    dim: usize,
    rho: f64,
    momentum: Vec<f64>,
    partial: Vec<f64>,
}

impl ConservedU {
    pub fn new(dim: usize, rho: f64, momentum: Vec<f64>, partial: Vec<f64>) -> Result<Self> {
        if momentum.len() != dim {
            return Err(MixtureError::InvalidConserved(format!(
                "momentum length {} does not match dimension {dim}",
                momentum.len()
            )));
        }
        let u = Self {
            dim,
            rho,
            momentum,
            partial,
        };
        u.validate()?;
        Ok(u)
    }

    fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(MixtureError::InvalidConserved(format!(
                "total density must be positive, got {}",
                self.rho
            )));
        }
        for (i, &r) in self.partial.iter().enumerate() {
            if !(r > 0.0) || !r.is_finite() {
                return Err(MixtureError::InvalidConserved(format!(
                    "partial density {i} must be positive, got {r}"
                )));
            }
        }
        let last = self.last_density();
        if !(last > 0.0) {
            return Err(MixtureError::InvalidConserved(format!(
                "implied last species density is {last}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_species(&self) -> usize {
        self.partial.len() + 1
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn momentum(&self) -> &[f64] {
        &self.momentum
    }

    pub fn velocity(&self) -> Vec<f64> {
        self.momentum.iter().map(|m| m / self.rho).collect()
    }

    pub fn partial(&self) -> &[f64] {
        &self.partial
    }

    /// `rho_N = rho - sum_{i<N} rho_i`.
    pub fn last_density(&self) -> f64 {
        self.rho - self.partial.iter().sum::<f64>()
    }

    /// All `N` species densities.
    pub fn densities(&self) -> Vec<f64> {
        let mut d = self.partial.clone();
        d.push(self.last_density());
        d
    }

    /// The state with every species moving at the mixture velocity (all
    /// diffusion fluxes zero).
    pub fn equilibrium_state(&self) -> StateU {
        let n = self.n_species();
        let densities = self.densities();
        let v = self.velocity();
        let mut momentum = Vec::with_capacity(n * self.dim);
        for rho_i in &densities {
            for va in &v {
                momentum.push(rho_i * va);
            }
        }
        StateU {
            dim: self.dim,
            rho: densities,
            momentum,
        }
    }

    /// Flat layout `[rho, m_1..m_d, rho_1..rho_{N-1}]`.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(1 + self.dim + self.partial.len());
        v[0] = self.rho;
        for a in 0..self.dim {
            v[1 + a] = self.momentum[a];
        }
        for (i, &r) in self.partial.iter().enumerate() {
            v[1 + self.dim + i] = r;
        }
        v
    }

    pub fn from_vector(dim: usize, n_species: usize, v: &DVector<f64>) -> Result<Self> {
        if v.len() != dim + n_species {
            return Err(MixtureError::InvalidConserved(format!(
                "conserved vector length {} does not match {n_species} species in dimension {dim}",
                v.len()
            )));
        }
        Self::new(
            dim,
            v[0],
            (0..dim).map(|a| v[1 + a]).collect(),
            (0..n_species - 1).map(|i| v[1 + dim + i]).collect(),
        )
    }
}

fn check_state(spec: &MixtureSpec, state: &StateU) -> Result<()> {
    if state.n_species() != spec.n_species() || state.dim() != spec.dim() {
        return Err(MixtureError::InvalidSpec(format!(
            "state has {} species in dimension {}, spec expects {} in dimension {}",
            state.n_species(),
            state.dim(),
            spec.n_species(),
            spec.dim()
        )));
    }
    Ok(())
}

/// Mixture entropy `eta(U)`.
pub fn entropy(spec: &MixtureSpec, state: &StateU) -> Result<f64> {
    check_state(spec, state)?;
    let mut eta = 0.0;
    for i in 0..spec.n_species() {
        let rho = state.rho(i);
        let internal = rho * spec.law(i).entropy_integral(rho, spec.ref_density(i));
        let kinetic: f64 = state.momentum(i).iter().map(|m| m * m).sum::<f64>() / (2.0 * rho);
        eta += internal + kinetic;
    }
    Ok(eta)
}

/// Gradient of the entropy, per-species blocks
/// `(d eta_i / d rho_i, V_i)` with
/// `d eta_i / d rho_i = int p/z^2 + p_i/rho_i - |V_i|^2 / 2`.
pub fn entropy_gradient(spec: &MixtureSpec, state: &StateU) -> Result<DVector<f64>> {
    check_state(spec, state)?;
    let d = spec.dim();
    let mut g = DVector::zeros(spec.n_species() * (d + 1));
    for i in 0..spec.n_species() {
        let rho = state.rho(i);
        let law = spec.law(i);
        let o = i * (d + 1);
        g[o] = law.entropy_integral(rho, spec.ref_density(i)) + law.pressure_pos(rho) / rho
            - 0.5 * state.speed_squared(i);
        for (a, m) in state.momentum(i).iter().enumerate() {
            g[o + 1 + a] = m / rho;
        }
    }
    Ok(g)
}

/// Block-diagonal entropy Hessian; species block
/// `(1/rho_i) [[p_i' + |V_i|^2, -V_i^T], [-V_i, I_d]]`.
pub fn entropy_hessian(spec: &MixtureSpec, state: &StateU) -> Result<DMatrix<f64>> {
    check_state(spec, state)?;
    let d = spec.dim();
    let n = spec.n_species();
    let mut h = DMatrix::zeros(n * (d + 1), n * (d + 1));
    for i in 0..n {
        let rho = state.rho(i);
        let v = state.velocity(i);
        let dp = spec.law(i).derivative_pos(rho);
        let o = i * (d + 1);
        h[(o, o)] = (dp + state.speed_squared(i)) / rho;
        for a in 0..d {
            h[(o, o + 1 + a)] = -v[a] / rho;
            h[(o + 1 + a, o)] = -v[a] / rho;
            h[(o + 1 + a, o + 1 + a)] = 1.0 / rho;
        }
    }
    Ok(h)
}

/// Convective flux along `axis` (0-based), per-species blocks
/// `(rho_i V_{i,axis}, rho_i V_i V_{i,axis} + p_i e_axis)`.
pub fn flux(spec: &MixtureSpec, state: &StateU, axis: usize) -> Result<DVector<f64>> {
    check_state(spec, state)?;
    let d = spec.dim();
    if axis >= d {
        return Err(MixtureError::InvalidSpec(format!(
            "axis {axis} out of range for dimension {d}"
        )));
    }
    let mut f = DVector::zeros(spec.n_species() * (d + 1));
    for i in 0..spec.n_species() {
        let rho = state.rho(i);
        let m = state.momentum(i);
        let vj = m[axis] / rho;
        let p = spec.law(i).pressure_pos(rho);
        let o = i * (d + 1);
        f[o] = rho * vj;
        for a in 0..d {
            f[o + 1 + a] = m[a] * vj;
        }
        f[o + 1 + axis] += p;
    }
    Ok(f)
}

/// Collision source `Q(U)`: zero density slots, momentum slots
/// `-sum_k K_ik V_k`. The `1/epsilon` scaling is applied by the solver.
pub fn collision_source(spec: &MixtureSpec, state: &StateU) -> Result<DVector<f64>> {
    check_state(spec, state)?;
    let d = spec.dim();
    let n = spec.n_species();
    let k = collision_matrix(spec);
    let mut q = DVector::zeros(n * (d + 1));
    for i in 0..n {
        let o = i * (d + 1);
        for a in 0..d {
            let mut acc = 0.0;
            for l in 0..n {
                acc += k[(i, l)] * state.momentum(l)[a] / state.rho(l);
            }
            q[o + 1 + a] = -acc;
        }
    }
    Ok(q)
}

/// The symmetric positive semi-definite factor `L(U)` with
/// `Q(U) = -L(U) * deta/dU`; blocks `L_ik = diag(0, K_ik I_d)`.
pub fn dissipation_matrix(spec: &MixtureSpec, state: &StateU) -> Result<DMatrix<f64>> {
    check_state(spec, state)?;
    let d = spec.dim();
    let n = spec.n_species();
    let k = collision_matrix(spec);
    let mut l = DMatrix::zeros(n * (d + 1), n * (d + 1));
    for i in 0..n {
        for j in 0..n {
            for a in 0..d {
                l[(i * (d + 1) + 1 + a, j * (d + 1) + 1 + a)] = k[(i, j)];
            }
        }
    }
    Ok(l)
}

/// Relative asymmetry of `A = (d2 eta/dU2) * (dF_axis/dU)` with the flux
/// Jacobian taken by central differences of step `h * (1 + |U_k|)`.
///
/// Returns `max|A - A^T| / max|A|`.
pub fn flux_symmetry_defect(
    spec: &MixtureSpec,
    state: &StateU,
    axis: usize,
    h: f64,
) -> Result<f64> {
    check_state(spec, state)?;
    let hess = entropy_hessian(spec, state)?;
    let dim = spec.dim();
    let n = spec.n_species();
    let x = state.to_vector();
    let jac = numdiff::jacobian(
        |v| {
            let s = StateU::from_vector(dim, n, v)
                .expect("finite-difference perturbation left the state space");
            flux(spec, &s, axis).expect("flux evaluation failed inside finite differencing")
        },
        &x,
        h,
    );
    let a = hess * jac;
    Ok((&a - a.transpose()).amax() / a.amax())
}

/// Random state well inside `O_U`: densities uniform in `[0.2, 2]`,
/// velocity components uniform in `[-1, 1]`.
pub fn sample_state(spec: &MixtureSpec, rng: &mut impl Rng) -> StateU {
    let n = spec.n_species();
    let d = spec.dim();
    let rho: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
    let mut momentum = Vec::with_capacity(n * d);
    for &r in &rho {
        for _ in 0..d {
            momentum.push(r * rng.gen_range(-1.0..1.0));
        }
    }
    StateU {
        dim: d,
        rho,
        momentum,
    }
}

/// Rank of a symmetric matrix, counting eigenvalues above
/// `1e-10 * max |eigenvalue|`.
pub fn symmetric_rank(m: &DMatrix<f64>) -> usize {
    let eigs = m.clone().symmetric_eigen().eigenvalues;
    let max = eigs.iter().fold(0.0_f64, |acc, e| acc.max(e.abs()));
    if max == 0.0 {
        return 0;
    }
    eigs.iter().filter(|e| e.abs() > 1e-10 * max).count()
}

/// Basis of the fixed subspace that `L(U)` must annihilate: every density
/// direction, plus each "all species share one velocity direction" vector.
pub fn dissipation_null_basis(n_species: usize, dim: usize) -> DMatrix<f64> {
    let rows = n_species * (dim + 1);
    let mut basis = DMatrix::zeros(rows, n_species + dim);
    for i in 0..n_species {
        basis[(i * (dim + 1), i)] = 1.0;
    }
    for a in 0..dim {
        for i in 0..n_species {
            basis[(i * (dim + 1) + 1 + a, n_species + a)] = 1.0;
        }
    }
    basis
}

/// Verifies on random states that the null space of `L(U)` is exactly the
/// fixed subspace above: the basis is annihilated to `1e-12` and
/// `rank L = d (N - 1)`.
pub fn null_space_check(spec: &MixtureSpec, samples: usize, rng: &mut impl Rng) -> Result<bool> {
    let n = spec.n_species();
    let d = spec.dim();
    let basis = dissipation_null_basis(n, d);
    for _ in 0..samples.max(1) {
        let state = sample_state(spec, rng);
        let l = dissipation_matrix(spec, &state)?;
        if (&l * &basis).amax() > 1e-12 {
            return Ok(false);
        }
        if symmetric_rank(&l) != d * (n - 1) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Equilibrium entropy `eta^eq(u) = eta(U)|_{J=0}`.
pub fn equilibrium_entropy(spec: &MixtureSpec, u: &ConservedU) -> Result<f64> {
    if u.n_species() != spec.n_species() || u.dim() != spec.dim() {
        return Err(MixtureError::InvalidConserved(format!(
            "conserved state has {} species in dimension {}, spec expects {} in dimension {}",
            u.n_species(),
            u.dim(),
            spec.n_species(),
            spec.dim()
        )));
    }
    u.validate()?;
    let densities = u.densities();
    let mut eta = 0.0;
    for (i, &rho) in densities.iter().enumerate() {
        eta += rho * spec.law(i).entropy_integral(rho, spec.ref_density(i));
    }
    let kinetic: f64 = u.momentum.iter().map(|m| m * m).sum::<f64>() / (2.0 * u.rho);
    Ok(eta + kinetic)
}

/// Hessian of the equilibrium entropy in the conserved variables, taken by
/// central finite differences (strict convexity is then certified by a
/// Cholesky factorization of the result).
pub fn equilibrium_entropy_hessian(spec: &MixtureSpec, u: &ConservedU) -> Result<DMatrix<f64>> {
    equilibrium_entropy(spec, u)?; // validates
    let dim = u.dim();
    let n = u.n_species();
    let x = u.to_vector();
    Ok(numdiff::hessian(
        |v| {
            let w = ConservedU::from_vector(dim, n, v)
                .expect("finite-difference perturbation left the conserved state space");
            equilibrium_entropy(spec, &w)
                .expect("equilibrium entropy failed inside finite differencing")
        },
        &x,
        numdiff::HESSIAN_STEP,
    ))
}

/// Entropic variables `e_i = d eta^eq / d rho_i`, `i = 1..N-1`.
pub fn entropic_variables(spec: &MixtureSpec, densities: &[f64]) -> Result<Vec<f64>> {
    check_densities(densities)?;
    let n = densities.len();
    let mu = |i: usize| {
        let rho = densities[i];
        let law = spec.law(i);
        law.entropy_integral(rho, spec.ref_density(i)) + law.pressure_pos(rho) / rho
    };
    let mu_last = mu(n - 1);
    Ok((0..n - 1).map(|i| mu(i) - mu_last).collect())
}

/// Thermodynamic forces `grad p_i / rho_i - grad p_N / rho_N` for
/// `i = 1..N-1`, given all `N` densities and their spatial gradients
/// (`gradients` is `N x d`, one row per species).
pub fn entropic_force(
    spec: &MixtureSpec,
    densities: &[f64],
    gradients: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_densities(densities)?;
    let n = densities.len();
    let d = gradients.ncols();
    if gradients.nrows() != n {
        return Err(MixtureError::InvalidSpec(format!(
            "expected {n} gradient rows, got {}",
            gradients.nrows()
        )));
    }
    let coeff: Vec<f64> = (0..n)
        .map(|i| spec.law(i).derivative_pos(densities[i]) / densities[i])
        .collect();
    let mut forces = DMatrix::zeros(n - 1, d);
    for i in 0..n - 1 {
        for a in 0..d {
            forces[(i, a)] = coeff[i] * gradients[(i, a)] - coeff[n - 1] * gradients[(n - 1, a)];
        }
    }
    Ok(forces)
}

/// Orthonormal basis of a null space, with helpers for comparing subspaces.
#[derive(Debug, Clone)]
pub struct SubspaceDescriptor {
    basis: DMatrix<f64>,
}

impl SubspaceDescriptor {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Orthogonal projector onto the subspace.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// True when the subspace is exactly the span of the first `k`
    /// coordinate directions.
    pub fn is_canonical_prefix(&self, k: usize, tol: f64) -> bool {
        if self.dim() != k {
            return false;
        }
        let rows = self.basis.nrows();
        let mut leak = 0.0_f64;
        for r in k..rows {
            for c in 0..k {
                leak = leak.max(self.basis[(r, c)].abs());
            }
        }
        leak <= tol
    }

    /// Maximum entry difference of the two orthogonal projectors.
    pub fn distance(&self, other: &Self) -> f64 {
        (self.projector() - other.projector()).amax()
    }
}

/// Null space of the second-order symbol `diag(0_{d+1}, D(u)) |xi|^2`.
///
/// For every admissible `u` and nonzero `xi` this is the span of the first
/// `d + 1` coordinate directions, because `D(u)` is positive definite.
pub fn symbol_null_space(
    spec: &MixtureSpec,
    u: &ConservedU,
    xi: &[f64],
) -> Result<SubspaceDescriptor> {
    if xi.len() != spec.dim() {
        return Err(MixtureError::InvalidSpec(format!(
            "frequency vector has {} components, expected {}",
            xi.len(),
            spec.dim()
        )));
    }
    let xi_sq: f64 = xi.iter().map(|x| x * x).sum();
    if xi_sq == 0.0 {
        return Err(MixtureError::ZeroFrequency);
    }
    let d = spec.dim();
    let n = spec.n_species();
    let diff = diffusion_matrix(spec, &u.densities())?;
    let size = d + n; // (d + 1) zero block + (N - 1) diffusion block
    let mut b = DMatrix::zeros(size, size);
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            b[(d + 1 + i, d + 1 + j)] = diff[(i, j)] * xi_sq;
        }
    }
    let eig = b.symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0_f64, |acc, e| acc.max(e.abs()));
    let tol = if max == 0.0 { 0.0 } else { 1e-10 * max };
    let cols: Vec<usize> = (0..size)
        .filter(|&i| eig.eigenvalues[i].abs() <= tol)
        .collect();
    let mut basis = DMatrix::zeros(size, cols.len());
    for (c, &i) in cols.iter().enumerate() {
        basis.set_column(c, &eig.eigenvectors.column(i));
    }
    Ok(SubspaceDescriptor { basis })
}
