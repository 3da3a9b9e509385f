//! Periodic 1-D fields of cell averages, initial profiles and CSV output.
//!
//! Two cell layouts are used. The relaxation solver carries the transformed
//! state `W = (rho, rho V, rho_1 .. rho_{N-1}, J_1 .. J_{N-1})`; the limit
//! solver carries only the conserved part. Both are stored flat, one stride
//! per cell, so solver loops index without chasing pointers.

use std::io::{self, Write};

use crate::entropy::ConservedU;
use crate::error::{MixtureError, Result};
use crate::mixture::MixtureSpec;

pub const MIN_CELLS: usize = 16;

/// One cell of the relaxation field.
#[derive(Debug, Clone, PartialEq)]
pub struct StateW {
    pub rho: f64,
    pub momentum: f64,
    /// `rho_1 .. rho_{N-1}`
    pub partial: Vec<f64>,
    /// `J_1 .. J_{N-1}`
    pub flux: Vec<f64>,
}

/// Periodic field of `StateW` cell averages.
#[derive(Debug, Clone, PartialEq)]
pub struct Field1D {
    n_species: usize,
    length: f64,
    dx: f64,
    time: f64,
    /// `n_cells x (2 n_species)`, per cell `[rho, mom, partial.., flux..]`.
    data: Vec<f64>,
}

impl Field1D {
    pub fn zeros(n_species: usize, n_cells: usize, length: f64) -> Self {
        assert!(n_cells >= MIN_CELLS, "need at least {MIN_CELLS} cells");
        assert!(length > 0.0);
        Self {
            n_species,
            length,
            dx: length / n_cells as f64,
            time: 0.0,
            data: vec![0.0; n_cells * 2 * n_species],
        }
    }

    pub fn n_cells(&self) -> usize {
        self.data.len() / (2 * self.n_species)
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub(crate) fn advance_time(&mut self, dt: f64) {
        self.time += dt;
    }

    #[inline]
    pub(crate) fn stride(&self) -> usize {
        2 * self.n_species
    }

    #[inline]
    pub(crate) fn cell_slice(&self, cell: usize) -> &[f64] {
        let s = self.stride();
        &self.data[cell * s..(cell + 1) * s]
    }

    #[inline]
    pub(crate) fn cell_slice_mut(&mut self, cell: usize) -> &mut [f64] {
        let s = self.stride();
        &mut self.data[cell * s..(cell + 1) * s]
    }

    pub fn cell(&self, cell: usize) -> StateW {
        let n = self.n_species;
        let c = self.cell_slice(cell);
        StateW {
            rho: c[0],
            momentum: c[1],
            partial: c[2..1 + n].to_vec(),
            flux: c[1 + n..2 * n].to_vec(),
        }
    }

    pub fn set_cell(&mut self, cell: usize, w: &StateW) {
        let n = self.n_species;
        assert_eq!(w.partial.len(), n - 1);
        assert_eq!(w.flux.len(), n - 1);
        let c = self.cell_slice_mut(cell);
        c[0] = w.rho;
        c[1] = w.momentum;
        c[2..1 + n].copy_from_slice(&w.partial);
        c[1 + n..2 * n].copy_from_slice(&w.flux);
    }

    /// Cell-center coordinate.
    pub fn x(&self, cell: usize) -> f64 {
        (cell as f64 + 0.5) * self.dx
    }

    /// All `N` species densities of one cell; fails on non-positive values.
    pub fn densities(&self, cell: usize) -> Result<Vec<f64>> {
        let n = self.n_species;
        let c = self.cell_slice(cell);
        let mut densities = Vec::with_capacity(n);
        let mut acc = 0.0;
        for i in 0..n - 1 {
            let r = c[2 + i];
            positivity(cell, i, r)?;
            densities.push(r);
            acc += r;
        }
        let last = c[0] - acc;
        positivity(cell, n - 1, last)?;
        densities.push(last);
        Ok(densities)
    }

    /// Masses `sum_cells rho_i dx` of all `N` species, fixed summation order.
    pub fn species_masses(&self) -> Vec<f64> {
        let n = self.n_species;
        let mut masses = vec![0.0; n];
        for cell in 0..self.n_cells() {
            let c = self.cell_slice(cell);
            let mut acc = 0.0;
            for i in 0..n - 1 {
                masses[i] += c[2 + i] * self.dx;
                acc += c[2 + i];
            }
            masses[n - 1] += (c[0] - acc) * self.dx;
        }
        masses
    }

    /// `sum_cells rho V dx`.
    pub fn total_momentum(&self) -> f64 {
        (0..self.n_cells())
            .map(|cell| self.cell_slice(cell)[1] * self.dx)
            .sum()
    }
}

/// Periodic field of conserved states for the limit solver.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldU1D {
    n_species: usize,
    length: f64,
    dx: f64,
    time: f64,
    /// `n_cells x (n_species + 1)`, per cell `[rho, mom, partial..]`.
    data: Vec<f64>,
}

impl FieldU1D {
    pub fn zeros(n_species: usize, n_cells: usize, length: f64) -> Self {
        assert!(n_cells >= MIN_CELLS, "need at least {MIN_CELLS} cells");
        assert!(length > 0.0);
        Self {
            n_species,
            length,
            dx: length / n_cells as f64,
            time: 0.0,
            data: vec![0.0; n_cells * (n_species + 1)],
        }
    }

    /// Builds the field for an initial profile; densities are validated to
    /// stay positive in every cell.
    pub fn from_profile(
        spec: &MixtureSpec,
        profile: &InitialProfile,
        n_cells: usize,
        length: f64,
    ) -> Result<Self> {
        if spec.dim() != 1 {
            return Err(MixtureError::InvalidSpec(format!(
                "solvers are one-dimensional, spec has dimension {}",
                spec.dim()
            )));
        }
        if n_cells < MIN_CELLS {
            return Err(MixtureError::Config(format!(
                "need at least {MIN_CELLS} cells, got {n_cells}"
            )));
        }
        if !(length > 0.0) {
            return Err(MixtureError::Config(format!(
                "domain length must be positive, got {length}"
            )));
        }
        profile.validate(spec)?;
        let n = spec.n_species();
        let mut field = Self::zeros(n, n_cells, length);
        for cell in 0..n_cells {
            let x = field.x(cell);
            let (densities, velocity) = profile.evaluate(spec, x, length);
            for (i, &r) in densities.iter().enumerate() {
                positivity(cell, i, r)?;
            }
            let rho: f64 = densities.iter().sum();
            let s = field.stride();
            let c = &mut field.data[cell * s..(cell + 1) * s];
            c[0] = rho;
            c[1] = rho * velocity;
            c[2..1 + n].copy_from_slice(&densities[..n - 1]);
        }
        Ok(field)
    }

    pub fn n_cells(&self) -> usize {
        self.data.len() / (self.n_species + 1)
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub(crate) fn advance_time(&mut self, dt: f64) {
        self.time += dt;
    }

    #[inline]
    pub(crate) fn stride(&self) -> usize {
        self.n_species + 1
    }

    #[inline]
    pub(crate) fn cell_slice(&self, cell: usize) -> &[f64] {
        let s = self.stride();
        &self.data[cell * s..(cell + 1) * s]
    }

    #[inline]
    pub(crate) fn cell_slice_mut(&mut self, cell: usize) -> &mut [f64] {
        let s = self.stride();
        &mut self.data[cell * s..(cell + 1) * s]
    }

    pub fn x(&self, cell: usize) -> f64 {
        (cell as f64 + 0.5) * self.dx
    }

    pub fn cell(&self, cell: usize) -> ConservedU {
        let n = self.n_species;
        let c = self.cell_slice(cell);
        ConservedU::new(1, c[0], vec![c[1]], c[2..1 + n].to_vec())
            .expect("field cell left the admissible conserved set")
    }

    pub fn set_cell(&mut self, cell: usize, u: &ConservedU) {
        let n = self.n_species;
        let c = self.cell_slice_mut(cell);
        c[0] = u.rho();
        c[1] = u.momentum()[0];
        c[2..1 + n].copy_from_slice(u.partial());
    }

    /// All `N` species densities of one cell; fails on non-positive values.
    pub fn densities(&self, cell: usize) -> Result<Vec<f64>> {
        let n = self.n_species;
        let c = self.cell_slice(cell);
        let mut densities = Vec::with_capacity(n);
        let mut acc = 0.0;
        for i in 0..n - 1 {
            let r = c[2 + i];
            positivity(cell, i, r)?;
            densities.push(r);
            acc += r;
        }
        let last = c[0] - acc;
        positivity(cell, n - 1, last)?;
        densities.push(last);
        Ok(densities)
    }

    pub fn species_masses(&self) -> Vec<f64> {
        let n = self.n_species;
        let mut masses = vec![0.0; n];
        for cell in 0..self.n_cells() {
            let c = self.cell_slice(cell);
            let mut acc = 0.0;
            for i in 0..n - 1 {
                masses[i] += c[2 + i] * self.dx;
                acc += c[2 + i];
            }
            masses[n - 1] += (c[0] - acc) * self.dx;
        }
        masses
    }

    pub fn total_momentum(&self) -> f64 {
        (0..self.n_cells())
            .map(|cell| self.cell_slice(cell)[1] * self.dx)
            .sum()
    }
}

#[inline]
fn positivity(cell: usize, species: usize, value: f64) -> Result<()> {
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

/// Initial condition shapes. Mean densities come from the mixture's
/// reference densities.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    /// `rho_i(x) = ref_i + amplitudes[i] * sin(2 pi x / L + phases[i])`,
    /// `V(x) = velocity_amplitude * sin(2 pi x / L)`.
    SineMixture {
        amplitudes: Vec<f64>,
        phases: Vec<f64>,
        velocity_amplitude: f64,
    },
    /// `rho_i(x) = ref_i * (1 + amplitudes[i] * exp(-((x - centers[i]) / width)^2))`,
    /// fluid at rest.
    GaussianBump {
        amplitudes: Vec<f64>,
        centers: Vec<f64>,
        width: f64,
    },
    /// `rho_i = ref_i`, fluid at rest.
    Uniform,
}

impl InitialProfile {
    pub fn validate(&self, spec: &MixtureSpec) -> Result<()> {
        let n = spec.n_species();
        match self {
            InitialProfile::SineMixture {
                amplitudes, phases, ..
            } => {
                if amplitudes.len() != n || phases.len() != n {
                    return Err(MixtureError::Config(format!(
                        "sine-mixture profile needs {n} amplitudes and phases, got {} and {}",
                        amplitudes.len(),
                        phases.len()
                    )));
                }
                for (i, &a) in amplitudes.iter().enumerate() {
                    if a.abs() >= spec.ref_density(i) {
                        return Err(MixtureError::Config(format!(
                            "sine amplitude {i} exceeds the reference density"
                        )));
                    }
                }
            }
            InitialProfile::GaussianBump {
                amplitudes,
                centers,
                width,
            } => {
                if amplitudes.len() != n || centers.len() != n {
                    return Err(MixtureError::Config(format!(
                        "gaussian-bump profile needs {n} amplitudes and centers, got {} and {}",
                        amplitudes.len(),
                        centers.len()
                    )));
                }
                if !(width > &0.0) {
                    return Err(MixtureError::Config(format!(
                        "gaussian-bump width must be positive, got {width}"
                    )));
                }
                for &a in amplitudes {
                    if a <= -1.0 {
                        return Err(MixtureError::Config(
                            "gaussian-bump amplitude must stay above -1".into(),
                        ));
                    }
                }
            }
            InitialProfile::Uniform => {}
        }
        Ok(())
    }

    fn evaluate(&self, spec: &MixtureSpec, x: f64, length: f64) -> (Vec<f64>, f64) {
        let n = spec.n_species();
        match self {
            InitialProfile::SineMixture {
                amplitudes,
                phases,
                velocity_amplitude,
            } => {
                let k = 2.0 * std::f64::consts::PI / length;
                let densities = (0..n)
                    .map(|i| spec.ref_density(i) + amplitudes[i] * (k * x + phases[i]).sin())
                    .collect();
                (densities, velocity_amplitude * (k * x).sin())
            }
            InitialProfile::GaussianBump {
                amplitudes,
                centers,
                width,
            } => {
                let densities = (0..n)
                    .map(|i| {
                        let z = (x - centers[i]) / width;
                        spec.ref_density(i) * (1.0 + amplitudes[i] * (-z * z).exp())
                    })
                    .collect();
                (densities, 0.0)
            }
            InitialProfile::Uniform => ((0..n).map(|i| spec.ref_density(i)).collect(), 0.0),
        }
    }
}

/// Fourth-order central difference on a periodic profile.
pub fn periodic_gradient4(values: &[f64], dx: f64) -> Vec<f64> {
    let m = values.len();
    let mut grad = vec![0.0; m];
    for i in 0..m {
        let p1 = values[(i + 1) % m];
        let p2 = values[(i + 2) % m];
        let m1 = values[(i + m - 1) % m];
        let m2 = values[(i + m - 2) % m];
        grad[i] = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * dx);
    }
    grad
}

/// Second-order central difference on a periodic profile.
pub fn periodic_gradient2(values: &[f64], dx: f64) -> Vec<f64> {
    let m = values.len();
    let mut grad = vec![0.0; m];
    for i in 0..m {
        grad[i] = (values[(i + 1) % m] - values[(i + m - 1) % m]) / (2.0 * dx);
    }
    grad
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV snapshot `x,rho,momentum,rho_1..rho_{N-1},J_1..J_{N-1}`.
pub fn write_relaxation_snapshot<W: Write>(field: &Field1D, out: &mut W) -> io::Result<()> {
    let n = field.n_species();
    let mut header = String::from("x,rho,momentum");
    for i in 1..n {
        header.push_str(&format!(",rho_{i}"));
    }
    for i in 1..n {
        header.push_str(&format!(",J_{i}"));
    }
    writeln!(out, "{header}")?;
    for cell in 0..field.n_cells() {
        let w = field.cell(cell);
        let mut row = vec![fmt(field.x(cell)), fmt(w.rho), fmt(w.momentum)];
        row.extend(w.partial.iter().map(|v| fmt(*v)));
        row.extend(w.flux.iter().map(|v| fmt(*v)));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// CSV snapshot `x,rho,momentum,rho_1..rho_{N-1}`.
pub fn write_limit_snapshot<W: Write>(field: &FieldU1D, out: &mut W) -> io::Result<()> {
    let n = field.n_species();
    let mut header = String::from("x,rho,momentum");
    for i in 1..n {
        header.push_str(&format!(",rho_{i}"));
    }
    writeln!(out, "{header}")?;
    for cell in 0..field.n_cells() {
        let c = field.cell_slice(cell);
        let mut row = vec![fmt(field.x(cell)), fmt(c[0]), fmt(c[1])];
        row.extend((0..n - 1).map(|i| fmt(c[2 + i])));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
