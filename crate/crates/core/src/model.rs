//! Grids, cell fields, states and system parameters on the unit interval.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Uniform cell-centred grid on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    n_cells: usize,
}

impl GridSpec {
    pub const MIN_CELLS: usize = 4;

    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < Self::MIN_CELLS {
            return Err(Error::Validation(format!(
                "grid needs at least {} cells, got {n_cells}",
                Self::MIN_CELLS
            )));
        }
        Ok(Self { n_cells })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Cell width.
    pub fn h(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h()
    }

    /// Left edge of cell `i`.
    pub fn left_edge(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_cells).map(|i| self.center(i))
    }

    /// Same domain with twice the resolution.
    pub fn refined(&self) -> Self {
        Self {
            n_cells: 2 * self.n_cells,
        }
    }
}

/// Cell averages of a scalar field. All entries are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellField(Vec<f64>);

impl CellField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        ensure_finite(&values, "field")?;
        Ok(Self(values))
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        Self(vec![0.0; grid.n_cells()])
    }

    pub fn constant(grid: &GridSpec, value: f64) -> Self {
        Self(vec![value; grid.n_cells()])
    }

    /// Samples `f` at the cell centres.
    pub fn from_centers(grid: &GridSpec, f: impl Fn(f64) -> f64) -> Self {
        Self(grid.centers().map(f).collect())
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if self.0.len() != grid.n_cells() {
            return Err(Error::Validation(format!(
                "field has {} entries but the grid has {} cells",
                self.0.len(),
                grid.n_cells()
            )));
        }
        Ok(())
    }

    /// `h * sum(values)` with compensated summation.
    pub fn integral(&self, grid: &GridSpec) -> f64 {
        grid.h() * compensated_sum(self.0.iter().copied())
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl Deref for CellField {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Neumaier summation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Density `u` and chemoattractant `v` at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub u: CellField,
    pub v: CellField,
}

impl State {
    pub fn new(t: f64, u: CellField, v: CellField) -> Self {
        Self { t, u, v }
    }

    pub fn mass(&self, grid: &GridSpec) -> f64 {
        self.u.integral(grid)
    }

    pub fn v_mean(&self, grid: &GridSpec) -> f64 {
        self.v.integral(grid)
    }

    /// Checks lengths, finiteness and `u >= 0`.
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        self.u.check_grid(grid)?;
        self.v.check_grid(grid)?;
        ensure_finite(&self.u, "u")?;
        ensure_finite(&self.v, "v")?;
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(Error::InputDomain {
                what: "time",
                value: self.t,
                expected: "finite and >= 0",
            });
        }
        if let Some(i) = self.u.iter().position(|&x| x < 0.0) {
            return Err(Error::Validation(format!(
                "density is negative ({}) at cell {i}",
                self.u[i]
            )));
        }
        Ok(())
    }
}

/// Coefficients of the system
///
/// ```text
/// u_t = (a(u) u_x - chi u v_x)_x
/// eps v_t = D v_xx + u - M + gamma v
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub chi: f64,
    pub eps: f64,
    pub d: f64,
    pub gamma: f64,
    pub mass: f64,
}

impl Params {
    pub fn new(chi: f64, eps: f64, d: f64, gamma: f64, mass: f64) -> Result<Self> {
        let params = Self {
            chi,
            eps,
            d,
            gamma,
            mass,
        };
        params.validate()?;
        Ok(params)
    }

    /// `D = 1`, `gamma = 0`.
    pub fn standard(chi: f64, eps: f64, mass: f64) -> Result<Self> {
        Self::new(chi, eps, 1.0, 0.0, mass)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |what, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(Error::InputDomain {
                    what,
                    value,
                    expected: "finite and > 0",
                })
            }
        };
        // chi = 0 decouples u from v (pure nonlinear diffusion).
        if !(self.chi.is_finite() && self.chi >= 0.0) {
            return Err(Error::InputDomain {
                what: "chi",
                value: self.chi,
                expected: "finite and >= 0",
            });
        }
        positive("eps", self.eps)?;
        positive("D", self.d)?;
        positive("mass", self.mass)?;
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InputDomain {
                what: "gamma",
                value: self.gamma,
                expected: "finite and >= 0",
            });
        }
        Ok(())
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }
}
