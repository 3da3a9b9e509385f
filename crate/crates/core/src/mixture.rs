//! Species, mixtures and the collision/composition matrix algebra.
//!
//! A mixture of `N` isothermal, inviscid gases is described by one barotropic
//! pressure law per species, a symmetric matrix of binary collision
//! coefficients `sigma[i][j]` and a relaxation ratio `epsilon`. Everything
//! downstream (entropy structure, diffusion matrices, solvers) is built from
//! the matrices assembled here:
//!
//! * `K`   — collision matrix, `K[i][j] = delta_ij * sum_k sigma[i][k] - sigma[i][j]`
//! * `Kinv` — inverse of the leading `(N-1) x (N-1)` block of `K`
//! * `Phi` — `Phi[i][j] = delta_ij / rho_j + 1 / rho_N`
//! * `C`   — `C[i][j] = rho_j * delta_ij - rho_i * rho_j / rho`, the inverse of `Phi`
//! * `D`   — `C * Kinv * C`, the multicomponent diffusion matrix (symmetric
//!   positive-definite)

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MixtureError, Result};

/// Barotropic pressure law of a single species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum PressureLaw {
    /// `p(rho) = c * rho` with `c > 0`.
    IsothermalIdeal { c: f64 },
    /// `p(rho) = kappa * rho^gamma` with `kappa > 0`, `gamma >= 1`.
    PowerLaw { kappa: f64, gamma: f64 },
}

impl PressureLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PressureLaw::IsothermalIdeal { c } => {
                if !(c > 0.0) || !c.is_finite() {
                    return Err(MixtureError::InvalidSpec(format!(
                        "isothermal coefficient must be positive, got {c}"
                    )));
                }
            }
            PressureLaw::PowerLaw { kappa, gamma } => {
                if !(kappa > 0.0) || !kappa.is_finite() {
                    return Err(MixtureError::InvalidSpec(format!(
                        "power-law kappa must be positive, got {kappa}"
                    )));
                }
                if !(gamma >= 1.0) || !gamma.is_finite() {
                    return Err(MixtureError::InvalidSpec(format!(
                        "power-law gamma must be >= 1, got {gamma}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Pressure `p(rho)`. Fails on `rho <= 0`.
    pub fn pressure(&self, rho: f64, species: usize) -> Result<f64> {
        check_density(rho, species)?;
        Ok(self.pressure_pos(rho))
    }

    /// Derivative `p'(rho) > 0`. Fails on `rho <= 0`.
    pub fn pressure_derivative(&self, rho: f64, species: usize) -> Result<f64> {
        check_density(rho, species)?;
        Ok(self.derivative_pos(rho))
    }

    /// `p(rho)` assuming `rho > 0` was already established by the caller.
    #[inline]
    pub(crate) fn pressure_pos(&self, rho: f64) -> f64 {
        match *self {
            PressureLaw::IsothermalIdeal { c } => c * rho,
            PressureLaw::PowerLaw { kappa, gamma } => kappa * rho.powf(gamma),
        }
    }

    /// `p'(rho)` assuming `rho > 0`.
    #[inline]
    pub(crate) fn derivative_pos(&self, rho: f64) -> f64 {
        match *self {
            PressureLaw::IsothermalIdeal { c } => c,
            PressureLaw::PowerLaw { kappa, gamma } => kappa * gamma * rho.powf(gamma - 1.0),
        }
    }

    /// Closed form of `int_{rho_ref}^{rho} p(z)/z^2 dz`.
    ///
    /// Logarithmic for linear laws, a power for `gamma > 1`; no quadrature is
    /// involved so derivative checks see only rounding error.
    #[inline]
    pub(crate) fn entropy_integral(&self, rho: f64, rho_ref: f64) -> f64 {
        match *self {
            PressureLaw::IsothermalIdeal { c } => c * (rho / rho_ref).ln(),
            PressureLaw::PowerLaw { kappa, gamma } => {
                if gamma == 1.0 {
                    kappa * (rho / rho_ref).ln()
                } else {
                    kappa * (rho.powf(gamma - 1.0) - rho_ref.powf(gamma - 1.0)) / (gamma - 1.0)
                }
            }
        }
    }
}

#[inline]
pub(crate) fn check_density(rho: f64, species: usize) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(MixtureError::NonPositiveDensity {
            species,
            value: rho,
        })
    }
}

pub(crate) fn check_densities(densities: &[f64]) -> Result<()> {
    for (i, &rho) in densities.iter().enumerate() {
        check_density(rho, i)?;
    }
    Ok(())
}

/// A mixture of `N >= 2` gases.
///
/// The binary collision coefficients are stored directly as `sigma[i][j]`;
/// when molecular masses and collision frequencies are the natural inputs use
/// [`MixtureSpec::from_collision_rates`], which folds them into
/// `sigma[i][j] = m_i m_j / (m_i + m_j) * nu[i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    laws: Vec<PressureLaw>,
    ref_densities: Vec<f64>,
    sigma: DMatrix<f64>,
    epsilon: f64,
    dim: usize,
}

impl MixtureSpec {
    pub fn new(
        laws: Vec<PressureLaw>,
        ref_densities: Vec<f64>,
        sigma: DMatrix<f64>,
        epsilon: f64,
        dim: usize,
    ) -> Result<Self> {
        let n = laws.len();
        if n < 2 {
            return Err(MixtureError::InvalidSpec(format!(
                "need at least 2 species, got {n}"
            )));
        }
        if ref_densities.len() != n {
            return Err(MixtureError::InvalidSpec(format!(
                "expected {n} reference densities, got {}",
                ref_densities.len()
            )));
        }
        for law in &laws {
            law.validate()?;
        }
        for (i, &r) in ref_densities.iter().enumerate() {
            if !(r > 0.0) || !r.is_finite() {
                return Err(MixtureError::InvalidSpec(format!(
                    "reference density {i} must be positive, got {r}"
                )));
            }
        }
        if sigma.nrows() != n || sigma.ncols() != n {
            return Err(MixtureError::InvalidSpec(format!(
                "sigma must be {n}x{n}, got {}x{}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue; // diagonal is ignored
                }
                let s = sigma[(i, j)];
                if !(s > 0.0) || !s.is_finite() {
                    return Err(MixtureError::InvalidSpec(format!(
                        "sigma[{i}][{j}] must be positive, got {s}"
                    )));
                }
                if s != sigma[(j, i)] {
                    return Err(MixtureError::InvalidSpec(format!(
                        "sigma must be symmetric: sigma[{i}][{j}] = {s} vs sigma[{j}][{i}] = {}",
                        sigma[(j, i)]
                    )));
                }
            }
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(MixtureError::InvalidSpec(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(1..=3).contains(&dim) {
            return Err(MixtureError::InvalidSpec(format!(
                "spatial dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        let mut sigma = sigma;
        for i in 0..n {
            sigma[(i, i)] = 0.0;
        }
        Ok(Self {
            laws,
            ref_densities,
            sigma,
            epsilon,
            dim,
        })
    }

    /// Builds `sigma[i][j]` from molecular masses and pairwise collision
    /// frequencies: reduced mass times frequency.
    pub fn from_collision_rates(
        laws: Vec<PressureLaw>,
        ref_densities: Vec<f64>,
        masses: &[f64],
        frequencies: &DMatrix<f64>,
        epsilon: f64,
        dim: usize,
    ) -> Result<Self> {
        let n = laws.len();
        if masses.len() != n {
            return Err(MixtureError::InvalidSpec(format!(
                "expected {n} masses, got {}",
                masses.len()
            )));
        }
        for (i, &m) in masses.iter().enumerate() {
            if !(m > 0.0) {
                return Err(MixtureError::InvalidSpec(format!(
                    "mass {i} must be positive, got {m}"
                )));
            }
        }
        let mut sigma = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let reduced = masses[i] * masses[j] / (masses[i] + masses[j]);
                    sigma[(i, j)] = reduced * frequencies[(i, j)];
                }
            }
        }
        Self::new(laws, ref_densities, sigma, epsilon, dim)
    }

    pub fn n_species(&self) -> usize {
        self.laws.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Same mixture with a different relaxation ratio.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(
            self.laws.clone(),
            self.ref_densities.clone(),
            self.sigma.clone(),
            epsilon,
            self.dim,
        )
    }

    /// Same mixture posed in a different spatial dimension.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        Self::new(
            self.laws.clone(),
            self.ref_densities.clone(),
            self.sigma.clone(),
            self.epsilon,
            dim,
        )
    }

    pub fn law(&self, i: usize) -> &PressureLaw {
        &self.laws[i]
    }

    pub fn laws(&self) -> &[PressureLaw] {
        &self.laws
    }

    pub fn ref_density(&self, i: usize) -> f64 {
        self.ref_densities[i]
    }

    pub fn ref_densities(&self) -> &[f64] {
        &self.ref_densities
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }
}

/// Collision matrix `K[i][j] = delta_ij * sum_k sigma[i][k] - sigma[i][j]`.
///
/// Symmetric, zero row sums, negative off-diagonal entries; its null space is
/// spanned by the constant vector.
pub fn collision_matrix(spec: &MixtureSpec) -> DMatrix<f64> {
    collision_matrix_from_sigma(spec.sigma())
}

/// Collision matrix for an explicitly supplied `sigma`, the hook for
/// density-dependent collision coefficients.
pub fn collision_matrix_from_sigma(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let n = sigma.nrows();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                row_sum += sigma[(i, j)];
                k[(i, j)] = -sigma[(i, j)];
            }
        }
        k[(i, i)] = row_sum;
    }
    k
}

/// Leading `(N-1) x (N-1)` block of the collision matrix.
pub fn reduced_collision_matrix(spec: &MixtureSpec) -> DMatrix<f64> {
    let k = collision_matrix(spec);
    let n = spec.n_species();
    k.view((0, 0), (n - 1, n - 1)).into_owned()
}

/// Inverse of the reduced collision matrix (symmetric positive-definite).
///
/// The reduced block is strictly diagonally dominant for any valid `sigma`,
/// so a failed LU factorization signals an internal bug.
pub fn reduced_collision_inverse(spec: &MixtureSpec) -> Result<DMatrix<f64>> {
    invert_spd(reduced_collision_matrix(spec), "inverting reduced collision matrix")
}

fn invert_spd(m: DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    m.lu()
        .try_inverse()
        .ok_or(MixtureError::SingularMatrix(context))
}

/// `Phi[i][j] = delta_ij / rho_j + 1 / rho_N` for `i, j < N`.
pub fn phi_matrix(densities: &[f64]) -> Result<DMatrix<f64>> {
    check_densities(densities)?;
    let n = densities.len();
    let inv_last = 1.0 / densities[n - 1];
    let mut phi = DMatrix::from_element(n - 1, n - 1, inv_last);
    for j in 0..n - 1 {
        phi[(j, j)] += 1.0 / densities[j];
    }
    Ok(phi)
}

/// `C[i][j] = rho_j * delta_ij - rho_i * rho_j / rho` for `i, j < N`.
///
/// This is the exact inverse of [`phi_matrix`].
pub fn c_matrix(densities: &[f64]) -> Result<DMatrix<f64>> {
    check_densities(densities)?;
    let n = densities.len();
    let rho: f64 = densities.iter().sum();
    let mut c = DMatrix::zeros(n - 1, n - 1);
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            c[(i, j)] = if i == j { densities[j] } else { 0.0 };
            c[(i, j)] -= densities[i] * densities[j] / rho;
        }
    }
    Ok(c)
}

/// Multicomponent diffusion matrix `D = C * Kinv * C`, evaluated at the
/// equilibrium (fluxes zero, densities from the conserved state).
///
/// Symmetric and positive-definite: `C` is symmetric invertible and `Kinv`
/// is symmetric positive-definite.
pub fn diffusion_matrix(spec: &MixtureSpec, densities: &[f64]) -> Result<DMatrix<f64>> {
    let kinv = reduced_collision_inverse(spec)?;
    diffusion_matrix_with_kinv(&kinv, densities)
}

/// Diffusion matrix for a precomputed reduced collision inverse.
///
/// Separating the inverse lets solvers factor the constant-`sigma` case out
/// of per-cell loops, and doubles as the hook for density-dependent `sigma`
/// (evaluate `K` at the equilibrium state, invert, pass it here).
pub fn diffusion_matrix_with_kinv(kinv: &DMatrix<f64>, densities: &[f64]) -> Result<DMatrix<f64>> {
    let c = c_matrix(densities)?;
    let mut d = &c * kinv * &c;
    // The product is symmetric up to rounding; symmetrize so downstream
    // Cholesky factorizations see an exactly symmetric matrix.
    let dt = d.transpose();
    d += dt;
    d *= 0.5;
    Ok(d)
}
