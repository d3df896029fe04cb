//! The convex entropy `b` with `b''(s) = a(s)/s`, `b(1) = b'(1) = 0`.
//!
//! Writing `P(x) = int_1^x a(s)/s ds` and `Q(x) = int_1^x a(s) ds`, Taylor's
//! formula with integral remainder gives `b(x) = x P(x) - Q(x)` and
//! `b'(x) = P(x)`. For general `a` both integrals are tabulated on a
//! log-spaced grid and `b` is reconstructed by a monotone cubic Hermite
//! interpolant that uses the exact nodal slopes `P`.
//!
//! Outside the table, `a` is frozen at its boundary value, which yields the
//! closed-form continuation
//! `b(x) = b(x0) + P(x0)(x - x0) + a(x0) [x ln(x/x0) - (x - x0)]`.
//! Evaluations that need it are flagged.

use crate::diffusion::{hermite_eval, DiffusionModel};
use crate::error::{Error, Result};
use crate::quad;

/// Table layout: decades `[LOG10_LO, LOG10_HI]`, `PER_DECADE` nodes each.
pub const LOG10_LO: i32 = -6;
pub const LOG10_HI: i32 = 8;
pub const PER_DECADE: usize = 256;
/// Absolute quadrature tolerance per table interval.
pub const TABLE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
struct EntropyTable {
    x: Vec<f64>,
    b: Vec<f64>,
    slope: Vec<f64>,
    a_lo: f64,
    a_hi: f64,
}

impl EntropyTable {
    fn build(model: &DiffusionModel) -> Result<Self> {
        let decades = (LOG10_HI - LOG10_LO) as usize;
        let count = decades * PER_DECADE + 1;
        let unit = count - 1 - LOG10_HI as usize * PER_DECADE;
        let x: Vec<f64> = (0..count)
            .map(|k| {
                let e = LOG10_LO as f64 + k as f64 / PER_DECADE as f64;
                if k == unit {
                    1.0
                } else {
                    10f64.powf(e)
                }
            })
            .collect();

        let mut kinks: Vec<f64> = model
            .breakpoints()
            .into_iter()
            .filter(|&r| r > 0.0)
            .map(f64::ln)
            .collect();
        kinks.sort_by(f64::total_cmp);

        // In t = ln s: P' = a(e^t), Q' = a(e^t) e^t. Both are integrated piecewise
        // between table nodes (split at the kinks of a tabulated diffusion).
        let integrate_pq = |t0: f64, t1: f64| -> Result<(f64, f64)> {
            let mut cuts = vec![t0];
            cuts.extend(kinks.iter().copied().filter(|&k| k > t0.min(t1) && k < t0.max(t1)));
            if t1 < t0 {
                cuts[1..].sort_by(|a, b| b.total_cmp(a));
            }
            cuts.push(t1);
            let mut p = 0.0;
            let mut q = 0.0;
            for w in cuts.windows(2) {
                p += quad::integrate(|t| model.a(t.exp()), w[0], w[1], TABLE_TOLERANCE)?;
                q += quad::integrate(|t| model.a(t.exp()) * t.exp(), w[0], w[1], TABLE_TOLERANCE)?;
            }
            Ok((p, q))
        };

        let mut p = vec![0.0; count];
        let mut q = vec![0.0; count];
        for k in unit + 1..count {
            let (dp, dq) = integrate_pq(x[k - 1].ln(), x[k].ln())?;
            p[k] = p[k - 1] + dp;
            q[k] = q[k - 1] + dq;
        }
        for k in (0..unit).rev() {
            let (dp, dq) = integrate_pq(x[k + 1].ln(), x[k].ln())?;
            p[k] = p[k + 1] + dp;
            q[k] = q[k + 1] + dq;
        }
        let b = x.iter().zip(&p).zip(&q).map(|((&x, &p), &q)| x * p - q).collect();
        Ok(Self {
            a_lo: model.a(x[0]),
            a_hi: model.a(x[count - 1]),
            x,
            b,
            slope: p,
        })
    }

    fn lo(&self) -> f64 {
        self.x[0]
    }

    fn hi(&self) -> f64 {
        *self.x.last().expect("non-empty")
    }

    fn index(&self, x: f64) -> usize {
        let guess = ((x.log10() - LOG10_LO as f64) * PER_DECADE as f64).floor();
        let mut k = (guess.max(0.0) as usize).min(self.x.len() - 2);
        // log10/pow rounding can put the guess one cell off.
        while k > 0 && x < self.x[k] {
            k -= 1;
        }
        while k + 2 < self.x.len() && x >= self.x[k + 1] {
            k += 1;
        }
        k
    }

    fn interpolate(&self, x: f64) -> f64 {
        let k = self.index(x);
        let (x0, x1) = (self.x[k], self.x[k + 1]);
        let (y0, y1) = (self.b[k], self.b[k + 1]);
        let delta = (y1 - y0) / (x1 - x0);
        let (mut d0, mut d1) = (self.slope[k], self.slope[k + 1]);
        if delta == 0.0 {
            d0 = 0.0;
            d1 = 0.0;
        } else {
            let alpha = (d0 / delta).max(0.0);
            let beta = (d1 / delta).max(0.0);
            let norm = alpha.hypot(beta);
            let scale = if norm > 3.0 { 3.0 / norm } else { 1.0 };
            d0 = scale * alpha * delta;
            d1 = scale * beta * delta;
        }
        hermite_eval(x0, x1, y0, y1, d0, d1, x)
    }

    fn continuation(x: f64, x0: f64, b0: f64, p0: f64, a0: f64) -> f64 {
        let log_term = if x == 0.0 { 0.0 } else { x * (x / x0).ln() };
        b0 + p0 * (x - x0) + a0 * (log_term - (x - x0))
    }

    fn extended(&self, x: f64) -> (f64, bool) {
        if x < self.lo() {
            (Self::continuation(x, self.x[0], self.b[0], self.slope[0], self.a_lo), true)
        } else if x > self.hi() {
            let k = self.x.len() - 1;
            (Self::continuation(x, self.x[k], self.b[k], self.slope[k], self.a_hi), true)
        } else {
            (self.interpolate(x), false)
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    /// `a = 1`: `b = x ln x - x + 1`.
    Linear,
    /// `a = 1/(1+x)`: `b = x ln(2x/(1+x)) - ln((1+x)/2)`.
    Critical,
    Table(Box<EntropyTable>),
    /// `b = 0`, the degenerate companion of `a = 0` used by synthetic certificates.
    Vanishing,
}

/// Evaluator for `b`. Immutable once built.
#[derive(Debug, Clone)]
pub struct EntropyProfile {
    kind: Kind,
}

impl EntropyProfile {
    pub fn new(model: &DiffusionModel) -> Result<Self> {
        let kind = match model {
            DiffusionModel::PowerLaw { alpha } if *alpha == 0.0 => Kind::Linear,
            DiffusionModel::PowerLaw { alpha } if *alpha == 1.0 => Kind::Critical,
            _ => Kind::Table(Box::new(EntropyTable::build(model)?)),
        };
        Ok(Self { kind })
    }

    /// Forces the tabulated route even where a closed form exists.
    pub fn tabulated(model: &DiffusionModel) -> Result<Self> {
        Ok(Self {
            kind: Kind::Table(Box::new(EntropyTable::build(model)?)),
        })
    }

    pub fn vanishing() -> Self {
        Self { kind: Kind::Vanishing }
    }

    /// Range of validity of [`Self::b`], if bounded.
    pub fn range(&self) -> Option<(f64, f64)> {
        match &self.kind {
            Kind::Table(t) => Some((t.lo(), t.hi())),
            _ => None,
        }
    }

    /// `b(x)`, refusing arguments outside the tabulated range.
    pub fn b(&self, x: f64) -> Result<f64> {
        if !(x.is_finite() && x > 0.0) {
            return Err(Error::InputDomain {
                what: "entropy argument",
                value: x,
                expected: "finite and > 0",
            });
        }
        if let Kind::Table(t) = &self.kind {
            if x < t.lo() || x > t.hi() {
                return Err(Error::OutOfRange {
                    x,
                    lo: t.lo(),
                    hi: t.hi(),
                });
            }
        }
        Ok(self.b_extended(x).0)
    }

    /// `b(x)` for any `x >= 0`; the flag is set when the value comes from the
    /// continuation outside the table.
    pub fn b_extended(&self, x: f64) -> (f64, bool) {
        let x = x.max(0.0);
        match &self.kind {
            Kind::Linear => {
                if x == 0.0 {
                    (1.0, false)
                } else {
                    (x * x.ln() - x + 1.0, false)
                }
            }
            Kind::Critical => {
                if x == 0.0 {
                    (std::f64::consts::LN_2, false)
                } else {
                    let v = x * (2.0 * x / (1.0 + x)).ln() - ((1.0 + x) / 2.0).ln();
                    (v, false)
                }
            }
            Kind::Table(t) => t.extended(x),
            Kind::Vanishing => (0.0, false),
        }
    }

    /// `b'(x) = int_1^x a(s)/s ds`, at table nodes exactly and by linear
    /// interpolation in between. Only used for diagnostics.
    pub fn b_prime(&self, x: f64) -> Result<f64> {
        if !(x.is_finite() && x > 0.0) {
            return Err(Error::InputDomain {
                what: "entropy argument",
                value: x,
                expected: "finite and > 0",
            });
        }
        Ok(match &self.kind {
            Kind::Linear => x.ln(),
            Kind::Critical => (2.0 * x / (1.0 + x)).ln(),
            Kind::Vanishing => 0.0,
            Kind::Table(t) => {
                if x < t.lo() || x > t.hi() {
                    return Err(Error::OutOfRange {
                        x,
                        lo: t.lo(),
                        hi: t.hi(),
                    });
                }
                let k = t.index(x);
                let w = (x - t.x[k]) / (t.x[k + 1] - t.x[k]);
                (1.0 - w) * t.slope[k] + w * t.slope[k + 1]
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power(alpha: f64) -> DiffusionModel {
        DiffusionModel::power_law(alpha).unwrap()
    }

    #[test]
    fn closed_form_values() {
        let lin = EntropyProfile::new(&power(0.0)).unwrap();
        assert_eq!(lin.b(1.0).unwrap(), 0.0);
        assert!((lin.b(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        let crit = EntropyProfile::new(&power(1.0)).unwrap();
        let expected = 3.0 * 1.5f64.ln() - 2f64.ln();
        assert!((crit.b(3.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.523_248_1).abs() < 1e-7);
    }

    #[test]
    fn domain_and_range_errors() {
        let p = EntropyProfile::new(&power(2.0)).unwrap();
        assert!(matches!(p.b(0.0), Err(Error::InputDomain { .. })));
        assert!(matches!(p.b(-1.0), Err(Error::InputDomain { .. })));
        assert!(matches!(p.b(1e-7), Err(Error::OutOfRange { .. })));
        assert!(matches!(p.b(1e9), Err(Error::OutOfRange { .. })));
        let (_, flagged) = p.b_extended(0.0);
        assert!(flagged);
    }

    #[test]
    fn table_reproduces_closed_forms() {
        for alpha in [0.0, 1.0] {
            let exact = EntropyProfile::new(&power(alpha)).unwrap();
            let table = EntropyProfile::tabulated(&power(alpha)).unwrap();
            for &x in &[1e-5, 0.01, 0.3, 1.0, 1.7, 42.0, 3.3e3, 1e6] {
                let e = exact.b(x).unwrap();
                let t = table.b(x).unwrap();
                assert!((e - t).abs() <= 1e-10 * (1.0 + e.abs()), "alpha={alpha} x={x}: {e} vs {t}");
            }
        }
    }

    #[test]
    fn table_normalisation() {
        let p = EntropyProfile::new(&power(2.0)).unwrap();
        assert!(p.b(1.0).unwrap().abs() <= 1e-10);
        assert!(p.b_prime(1.0).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn continuation_is_continuous_at_the_floor() {
        let p = EntropyProfile::new(&power(2.0)).unwrap();
        let (lo, _) = p.range().unwrap();
        let inside = p.b(lo).unwrap();
        let (outside, flag) = p.b_extended(lo * (1.0 - 1e-12));
        assert!(flag);
        assert!((inside - outside).abs() < 1e-15);
        // b(0+) = int_0^1 a = 1/2 for alpha = 2.
        assert!((p.b_extended(0.0).0 - 0.5).abs() < 1e-11);
    }
}
