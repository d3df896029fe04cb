//! The diffusion nonlinearity `a(u)` and its tail mass `g(r) = r * int_r^inf a`.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampled diffusion with a monotone cubic interpolant between nodes and a
/// pure power tail `c * r^(-p)` beyond the last node. Below the first node the
/// first value is held constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedDiffusion {
    r: Vec<f64>,
    a: Vec<f64>,
    slopes: Vec<f64>,
    tail_exponent: f64,
    tail_coeff: f64,
    /// `int_0^{r_k} a` at every node.
    cumulative: Vec<f64>,
}

impl TabulatedDiffusion {
    pub fn new(r: Vec<f64>, a: Vec<f64>, tail_exponent: f64) -> Result<Self> {
        if r.len() != a.len() {
            return Err(Error::Table(format!(
                "{} abscissae but {} values",
                r.len(),
                a.len()
            )));
        }
        if r.len() < 2 {
            return Err(Error::Table("need at least two nodes".into()));
        }
        if !(r[0].is_finite() && r[0] >= 0.0) {
            return Err(Error::Table(format!("first node {} must be >= 0", r[0])));
        }
        if let Some(k) = r.windows(2).position(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::Table(format!(
                "nodes must be strictly increasing (row {})",
                k + 1
            )));
        }
        if let Some(k) = a.iter().position(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(Error::Table(format!("a must be positive (row {k})")));
        }
        if !(tail_exponent.is_finite() && tail_exponent >= 0.0) {
            return Err(Error::Table(format!(
                "tail exponent {tail_exponent} must be finite and >= 0"
            )));
        }
        let slopes = pchip_slopes(&r, &a);
        let last = r.len() - 1;
        let tail_coeff = a[last] * r[last].powf(tail_exponent);
        let mut cumulative = Vec::with_capacity(r.len());
        let mut acc = a[0] * r[0];
        cumulative.push(acc);
        for k in 0..last {
            acc += hermite_integral(r[k], r[k + 1], a[k], a[k + 1], slopes[k], slopes[k + 1], r[k + 1]);
            cumulative.push(acc);
        }
        Ok(Self {
            r,
            a,
            slopes,
            tail_exponent,
            tail_coeff,
            cumulative,
        })
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.r.iter().copied().zip(self.a.iter().copied())
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.r
    }

    pub fn tail_exponent(&self) -> f64 {
        self.tail_exponent
    }

    fn last_node(&self) -> f64 {
        *self.r.last().expect("non-empty")
    }

    fn segment(&self, x: f64) -> usize {
        // r[k] <= x < r[k+1]
        self.r.partition_point(|&node| node <= x).saturating_sub(1).min(self.r.len() - 2)
    }

    fn value(&self, x: f64) -> f64 {
        if x <= self.r[0] {
            return self.a[0];
        }
        if x >= self.last_node() {
            return self.tail_coeff * x.powf(-self.tail_exponent);
        }
        let k = self.segment(x);
        hermite_eval(
            self.r[k],
            self.r[k + 1],
            self.a[k],
            self.a[k + 1],
            self.slopes[k],
            self.slopes[k + 1],
            x,
        )
    }

    /// `int_0^x a`, finite for every finite `x`.
    fn antiderivative(&self, x: f64) -> f64 {
        if x <= self.r[0] {
            return self.a[0] * x;
        }
        let last = self.r.len() - 1;
        if x >= self.r[last] {
            let rl = self.r[last];
            let p = self.tail_exponent;
            let tail = if (p - 1.0).abs() < 1e-12 {
                self.tail_coeff * (x / rl).ln()
            } else {
                self.tail_coeff * (x.powf(1.0 - p) - rl.powf(1.0 - p)) / (1.0 - p)
            };
            return self.cumulative[last] + tail;
        }
        let k = self.segment(x);
        self.cumulative[k]
            + hermite_integral(
                self.r[k],
                self.r[k + 1],
                self.a[k],
                self.a[k + 1],
                self.slopes[k],
                self.slopes[k + 1],
                x,
            )
    }

    /// `int_x^inf a`; requires an integrable tail.
    fn tail_integral(&self, x: f64) -> f64 {
        let p = self.tail_exponent;
        let rl = self.last_node();
        if x >= rl {
            return self.tail_coeff * x.powf(1.0 - p) / (p - 1.0);
        }
        let beyond = self.tail_coeff * rl.powf(1.0 - p) / (p - 1.0);
        let last = self.r.len() - 1;
        (self.cumulative[last] - self.antiderivative(x)) + beyond
    }

    /// Reads the two-column `r,a` CSV with a trailing `# tail_exponent=<p>` line.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut tail = None;
        for line in text.lines() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((key, value)) = rest.split_once('=') {
                    if key.trim() == "tail_exponent" {
                        let p: f64 = value.trim().parse().map_err(|_| {
                            Error::Table(format!("cannot parse tail exponent `{}`", value.trim()))
                        })?;
                        tail = Some(p);
                    }
                }
            }
        }
        let tail = tail.ok_or_else(|| Error::Table("missing `# tail_exponent=<real>` line".into()))?;

        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Table(e.to_string()))?
            .clone();
        if headers.len() != 2 || &headers[0] != "r" || &headers[1] != "a" {
            return Err(Error::Table(format!("expected header `r,a`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut r = Vec::new();
        let mut a = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Table(e.to_string()))?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Table(format!("row {}: cannot parse `{s}`", row + 1)))
            };
            r.push(parse(&record[0])?);
            a.push(parse(&record[1])?);
        }
        Self::new(r, a, tail)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Table(format!("{}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("r,a\n");
        for (r, a) in self.nodes() {
            out.push_str(&format!("{r:e},{a:e}\n"));
        }
        out.push_str(&format!("# tail_exponent={}\n", self.tail_exponent));
        out
    }
}

/// The nonlinearity `a` of the density equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DiffusionModel {
    /// `a(u) = (1 + u)^(-alpha)`.
    PowerLaw { alpha: f64 },
    Tabulated(TabulatedDiffusion),
}

impl fmt::Display for DiffusionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PowerLaw { alpha } => write!(f, "power-law diffusion (1+u)^-{alpha}"),
            Self::Tabulated(t) => write!(
                f,
                "tabulated diffusion ({} nodes, tail exponent {})",
                t.r.len(),
                t.tail_exponent
            ),
        }
    }
}

impl DiffusionModel {
    pub fn power_law(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InputDomain {
                what: "alpha",
                value: alpha,
                expected: "finite and >= 0",
            });
        }
        Ok(Self::PowerLaw { alpha })
    }

    /// Exponent `p` of the large-`u` decay `a(u) ~ u^(-p)`.
    pub fn tail_exponent(&self) -> f64 {
        match self {
            Self::PowerLaw { alpha } => *alpha,
            Self::Tabulated(t) => t.tail_exponent,
        }
    }

    pub fn is_integrable(&self) -> bool {
        self.tail_exponent() > 1.0
    }

    /// `a(u)`, validated.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(u.is_finite() && u >= 0.0) {
            return Err(Error::InputDomain {
                what: "density argument of a(u)",
                value: u,
                expected: "finite and >= 0",
            });
        }
        Ok(self.a(u))
    }

    /// `a(u)` without validation; negative rounding noise is treated as 0.
    #[inline]
    pub fn a(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        match self {
            Self::PowerLaw { alpha } => {
                if *alpha == 0.0 {
                    1.0
                } else if *alpha == 1.0 {
                    1.0 / (1.0 + u)
                } else if *alpha == 2.0 {
                    let s = 1.0 + u;
                    1.0 / (s * s)
                } else {
                    (1.0 + u).powf(-alpha)
                }
            }
            Self::Tabulated(t) => t.value(u),
        }
    }

    /// `int_0^x a(s) ds`.
    pub fn antiderivative(&self, x: f64) -> f64 {
        match self {
            Self::PowerLaw { alpha } => {
                if (*alpha - 1.0).abs() < 1e-15 {
                    x.ln_1p()
                } else {
                    ((1.0 + x).powf(1.0 - alpha) - 1.0) / (1.0 - alpha)
                }
            }
            Self::Tabulated(t) => t.antiderivative(x),
        }
    }

    fn ensure_integrable(&self) -> Result<()> {
        if self.is_integrable() {
            Ok(())
        } else {
            Err(Error::DivergentTail {
                model: self.to_string(),
            })
        }
    }

    /// `int_r^inf a(s) ds`.
    pub fn tail_integral(&self, r: f64) -> Result<f64> {
        self.ensure_integrable()?;
        check_nonnegative("r", r)?;
        Ok(match self {
            Self::PowerLaw { alpha } => (1.0 + r).powf(1.0 - alpha) / (alpha - 1.0),
            Self::Tabulated(t) => t.tail_integral(r),
        })
    }

    /// `g(r) = r * int_r^inf a(s) ds`.
    pub fn tail_mass(&self, r: f64) -> Result<f64> {
        // Power law: r (1+r)^(1-alpha) / (alpha-1).
        Ok(r * self.tail_integral(r)?)
    }

    /// Points where `a` is only piecewise smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::PowerLaw { .. } => Vec::new(),
            Self::Tabulated(t) => t.r.clone(),
        }
    }
}

fn check_nonnegative(what: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::InputDomain {
            what,
            value: x,
            expected: "finite and >= 0",
        })
    }
}

/// Shape-preserving (Fritsch-Carlson / Fritsch-Butland) node slopes.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    d[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn edge_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() || m0 == 0.0 {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

#[inline]
pub(crate) fn hermite_eval(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Exact integral of the cubic Hermite piece from `x0` to `x`.
fn hermite_integral(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let i00 = t - t3 + 0.5 * t4;
    let i10 = 0.5 * t2 - 2.0 * t3 / 3.0 + 0.25 * t4;
    let i01 = t3 - 0.5 * t4;
    let i11 = -t3 / 3.0 + 0.25 * t4;
    h * (y0 * i00 + h * d0 * i10 + y1 * i01 + h * d1 * i11)
}
