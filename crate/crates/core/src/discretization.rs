//! Finite-volume semi-discretization on a uniform cell-centred grid.
//!
//! Face `k` (for `k = 0..n-1`) sits between cells `k` and `k+1`; the two
//! boundary faces carry zero flux. With `F = a(u) u_x - chi u v_x` the cell
//! rate is `(F_{i+1/2} - F_{i-1/2}) / h`, so `h * sum(rates)` telescopes to 0.

use crate::diffusion::DiffusionModel;
use crate::error::{ensure_finite, Error, Result};
use crate::model::{compensated_sum, CellField, GridSpec, Params, State};

/// Running sums `F_i = h * sum_{j <= i} f_j`, i.e. values at right cell edges.
pub fn cumulative_integral(f: &CellField, grid: &GridSpec) -> Result<CellField> {
    f.check_grid(grid)?;
    let h = grid.h();
    // Compensated running sum so that the last entry equals `f.integral(grid)`.
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    let out = f
        .iter()
        .map(|&x| {
            let t = sum + x;
            if sum.abs() >= x.abs() {
                carry += (sum - t) + x;
            } else {
                carry += (x - t) + sum;
            }
            sum = t;
            h * (sum + carry)
        })
        .collect();
    Ok(CellField::from_vec_unchecked(out))
}

/// Three-point Laplacian with reflected ghost cells.
pub fn laplacian_neumann(f: &CellField, grid: &GridSpec) -> Result<CellField> {
    f.check_grid(grid)?;
    let n = f.len();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut out = vec![0.0; n];
    for k in 0..n - 1 {
        let d = f[k + 1] - f[k];
        out[k] += d * inv_h2;
        out[k + 1] -= d * inv_h2;
    }
    Ok(CellField::from_vec_unchecked(out))
}

/// `a` evaluated at the arithmetic mean of the two cells adjacent to each
/// interior face.
pub fn face_diffusivity(u: &[f64], model: &DiffusionModel) -> Vec<f64> {
    u.windows(2).map(|w| model.a(0.5 * (w[0] + w[1]))).collect()
}

/// Upwinded chemotactic flux `chi u_upw (v_{k+1} - v_k) / h` at interior
/// faces, i.e. the transport part of `-F`.
pub fn advective_flux(u: &[f64], v: &[f64], chi: f64, h: f64) -> Vec<f64> {
    (0..u.len() - 1)
        .map(|k| {
            let w = chi * (v[k + 1] - v[k]) / h;
            let upwind = if w >= 0.0 { u[k] } else { u[k + 1] };
            w * upwind
        })
        .collect()
}

/// Largest discrete chemotactic speed `max |chi (v_{k+1} - v_k) / h|`.
pub fn max_advective_speed(v: &[f64], chi: f64, h: f64) -> f64 {
    v.windows(2)
        .map(|w| (chi * (w[1] - w[0]) / h).abs())
        .fold(0.0, f64::max)
}

/// Interior face fluxes `F = a(u_face) du/h - chi u_upw dv/h`.
pub fn face_fluxes(state: &State, params: &Params, model: &DiffusionModel, grid: &GridSpec) -> Result<Vec<f64>> {
    state.u.check_grid(grid)?;
    state.v.check_grid(grid)?;
    ensure_finite(&state.u, "u")?;
    ensure_finite(&state.v, "v")?;
    let h = grid.h();
    let (u, v) = (&state.u[..], &state.v[..]);
    let coeff = face_diffusivity(u, model);
    let adv = advective_flux(u, v, params.chi, h);
    Ok((0..u.len() - 1)
        .map(|k| coeff[k] * (u[k + 1] - u[k]) / h - adv[k])
        .collect())
}

fn divergence(faces: &[f64], h: f64) -> Vec<f64> {
    let n = faces.len() + 1;
    let mut out = vec![0.0; n];
    for (k, &f) in faces.iter().enumerate() {
        out[k] += f / h;
        out[k + 1] -= f / h;
    }
    out
}

/// Cell rates `du/dt`.
pub fn assemble_u_rhs(state: &State, params: &Params, model: &DiffusionModel, grid: &GridSpec) -> Result<CellField> {
    let faces = face_fluxes(state, params, model, grid)?;
    Ok(CellField::from_vec_unchecked(divergence(&faces, grid.h())))
}

/// Cell rates `dv/dt = (D lap v + u - M + gamma v) / eps`, with `M = params.mass`.
pub fn assemble_v_rhs(state: &State, params: &Params, grid: &GridSpec) -> Result<CellField> {
    ensure_finite(&state.u, "u")?;
    ensure_finite(&state.v, "v")?;
    state.u.check_grid(grid)?;
    let lap = laplacian_neumann(&state.v, grid)?;
    let out = lap
        .iter()
        .zip(state.u.iter().zip(state.v.iter()))
        .map(|(&l, (&u, &v))| (params.d * l + u - params.mass + params.gamma * v) / params.eps)
        .collect();
    Ok(CellField::from_vec_unchecked(out))
}

/// `L_c x`: Neumann flux-form diffusion with face coefficients `c`.
pub fn apply_diffusion(x: &[f64], coeff_faces: &[f64], h: f64) -> Vec<f64> {
    let faces: Vec<f64> = (0..x.len() - 1)
        .map(|k| coeff_faces[k] * (x[k + 1] - x[k]) / h)
        .collect();
    divergence(&faces, h)
}

/// Tridiagonal system with sub-diagonal `lower[i]` (row `i+1`), diagonal and
/// super-diagonal `upper[i]` (row `i`).
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    /// `I - dt L_c` on a grid of spacing `h`.
    pub fn implicit_diffusion(coeff_faces: &[f64], dt: f64, h: f64) -> Self {
        let n = coeff_faces.len() + 1;
        let r = dt / (h * h);
        let off: Vec<f64> = coeff_faces.iter().map(|&c| -r * c).collect();
        let mut diag = vec![1.0; n];
        for (k, &c) in coeff_faces.iter().enumerate() {
            diag[k] += r * c;
            diag[k + 1] += r * c;
        }
        Self {
            lower: off.clone(),
            diag,
            upper: off,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.upper[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Thomas algorithm; fails on a non-positive pivot (which cannot happen for
    /// the diagonally dominant systems built here).
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.diag.len();
        if rhs.len() != n || self.lower.len() + 1 != n || self.upper.len() + 1 != n {
            return Err(Error::Validation(format!(
                "tridiagonal system of size {n} (bands {} and {}) with right-hand side of length {}",
                self.lower.len(),
                self.upper.len(),
                rhs.len()
            )));
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        if !(pivot > 0.0) {
            return Err(Error::Solver { row: 0, pivot });
        }
        if n > 1 {
            c[0] = self.upper[0] / pivot;
        }
        d[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.lower[i - 1] * c[i - 1];
            if !(pivot > 0.0) {
                return Err(Error::Solver { row: i, pivot });
            }
            if i + 1 < n {
                c[i] = self.upper[i] / pivot;
            }
            d[i] = (rhs[i] - self.lower[i - 1] * d[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }
}

/// Solves `(I - dt L_c) x = f`.
pub fn implicit_diffusion_solve(f: &CellField, coeff_faces: &[f64], dt: f64, grid: &GridSpec) -> Result<CellField> {
    f.check_grid(grid)?;
    if coeff_faces.len() + 1 != grid.n_cells() {
        return Err(Error::Validation(format!(
            "expected {} face coefficients, got {}",
            grid.n_cells() - 1,
            coeff_faces.len()
        )));
    }
    if let Some(&c) = coeff_faces.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(Error::InputDomain {
            what: "face coefficient",
            value: c,
            expected: "finite and >= 0",
        });
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InputDomain {
            what: "dt",
            value: dt,
            expected: "finite and > 0",
        });
    }
    let system = Tridiagonal::implicit_diffusion(coeff_faces, dt, grid.h());
    let x = system.solve(f)?;
    ensure_finite(&x, "implicit solve")?;
    Ok(CellField::from_vec_unchecked(x))
}

/// `||(I - dt L_c) x - f||_inf / (1 + ||f||_inf)`.
pub fn relative_residual(system: &Tridiagonal, x: &[f64], f: &[f64]) -> f64 {
    let ax = system.apply(x);
    let num = ax.iter().zip(f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
    num / (1.0 + scale)
}

/// `h * sum(rates)`, which should vanish for any flux-form operator.
pub fn net_rate(rates: &CellField, grid: &GridSpec) -> f64 {
    grid.h() * compensated_sum(rates.iter().copied())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n).unwrap()
    }

    fn lin() -> DiffusionModel {
        DiffusionModel::power_law(0.0).unwrap()
    }

    #[test]
    fn cumulative_of_constant() {
        let g = grid(4);
        let f = CellField::constant(&g, 2.0);
        assert_eq!(cumulative_integral(&f, &g).unwrap().values(), &[0.5, 1.0, 1.5, 2.0]);
        let z = cumulative_integral(&CellField::zeros(&g), &g).unwrap();
        assert!(z.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn hand_stencil_u_rates() {
        let g = grid(4);
        let s = State::new(
            0.0,
            CellField::new(vec![0.0, 0.0, 4.0, 4.0]).unwrap(),
            CellField::zeros(&g),
        );
        let p = Params::standard(1.0, 1.0, 2.0).unwrap();
        let faces = face_fluxes(&s, &p, &lin(), &g).unwrap();
        assert_eq!(faces, vec![0.0, 16.0, 0.0]);
        let r = assemble_u_rhs(&s, &p, &lin(), &g).unwrap();
        assert_eq!(r.values(), &[0.0, 64.0, -64.0, 0.0]);
    }

    #[test]
    fn stationary_point_has_zero_rates() {
        let g = grid(16);
        let p = Params::standard(1.0, 1.0, 3.0).unwrap();
        let s = State::new(0.0, CellField::constant(&g, 3.0), CellField::zeros(&g));
        let m = DiffusionModel::power_law(0.5).unwrap();
        assert!(assemble_u_rhs(&s, &p, &m, &g).unwrap().iter().all(|&r| r == 0.0));
        assert!(assemble_v_rhs(&s, &p, &g).unwrap().iter().all(|&r| r == 0.0));
        let s = State::new(0.0, CellField::constant(&g, 3.0), CellField::constant(&g, 1.7));
        assert!(assemble_v_rhs(&s, &p, &g).unwrap().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn laplacian_of_linear_profile() {
        let g = grid(8);
        let f = CellField::from_centers(&g, |x| x);
        let l = laplacian_neumann(&f, &g).unwrap();
        assert!((l[0] - 8.0).abs() < 1e-12);
        assert!((l[7] + 8.0).abs() < 1e-12);
        assert!(l[1..7].iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn non_finite_state_is_reported() {
        let g = grid(4);
        let s = State::new(
            0.0,
            CellField::from_vec_unchecked(vec![1.0, 1.0, f64::NAN, 1.0]),
            CellField::zeros(&g),
        );
        let p = Params::standard(1.0, 1.0, 1.0).unwrap();
        let e = assemble_u_rhs(&s, &p, &lin(), &g).unwrap_err();
        assert_eq!(e, Error::NumericState { field: "u", index: 2 });
    }

    fn cosine_error(n: usize) -> (f64, f64) {
        let g = grid(n);
        let p = Params::new(0.0, 2.0, 1.0, 0.0, 1.0).unwrap();
        let u = CellField::from_centers(&g, |x| (PI * x).cos());
        let s = State::new(0.0, u.clone(), CellField::zeros(&g));
        let ru = assemble_u_rhs(&s, &p, &lin(), &g).unwrap();
        let eu = g
            .centers()
            .zip(ru.iter())
            .map(|(x, r)| (r + PI * PI * (PI * x).cos()).abs())
            .fold(0.0, f64::max);
        let s = State::new(0.0, CellField::from_centers(&g, |x| 1.0 + (PI * x).cos()), CellField::zeros(&g));
        let rv = assemble_v_rhs(&s, &p, &g).unwrap();
        let ev = g
            .centers()
            .zip(rv.iter())
            .map(|(x, r)| (r - 0.5 * (PI * x).cos()).abs())
            .fold(0.0, f64::max);
        (eu, ev)
    }

    #[test]
    fn second_order_consistency() {
        let (a, av) = cosine_error(32);
        let (b, bv) = cosine_error(64);
        assert!((a / b).log2() >= 1.9, "{a} {b}");
        assert!(av < 1e-14 && bv < 1e-14);
    }

    #[test]
    fn implicit_solve_trivial_cases() {
        let g = grid(8);
        let f = CellField::from_centers(&g, |x| x * x);
        let x = implicit_diffusion_solve(&f, &[0.0; 7], 3.0, &g).unwrap();
        assert_eq!(x, f);
        let c = CellField::constant(&g, 2.5);
        let x = implicit_diffusion_solve(&c, &[1.3; 7], 0.7, &g).unwrap();
        assert!(x.iter().all(|v| (v - 2.5).abs() < 1e-14));
        assert!(implicit_diffusion_solve(&c, &[-1.0; 7], 0.7, &g).is_err());
    }

    #[test]
    fn solver_reports_bad_pivot() {
        let t = Tridiagonal {
            lower: vec![1.0],
            diag: vec![0.0, 1.0],
            upper: vec![1.0],
        };
        assert!(matches!(t.solve(&[1.0, 1.0]), Err(Error::Solver { row: 0, .. })));
    }
}
