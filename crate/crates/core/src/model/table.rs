//! Tabulated diabatic models with periodic cubic-spline interpolation.
//!
//! File layout: a `#` header line, then rows `phi v_a v_b v_ab mu` in atomic
//! units with `phi` strictly increasing from `-pi` to `pi`. The rows at both
//! ends must carry the same values.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{DiabaticModel, DiabaticPoint, Representation};
use crate::error::{Error, Result};

const ENDPOINT_TOL: f64 = 1e-10;
const ANGLE_TOL: f64 = 1e-8;

pub const TABLE_HEADER: &str = "# phi v_a v_b v_ab mu (a.u.)";

/// Periodic cubic spline through `(x_i, y_i)`, period `2pi`.
#[derive(Debug, Clone)]
struct PeriodicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl PeriodicSpline {
    /// `x` holds the distinct nodes on `[-pi, pi)`.
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let h: Vec<f64> = (0..n)
            .map(|i| if i + 1 < n { x[i + 1] - x[i] } else { x[0] + 2.0 * PI - x[n - 1] })
            .collect();
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let im = (i + n - 1) % n;
            let ip = (i + 1) % n;
            sub[i] = h[im];
            diag[i] = 2.0 * (h[im] + h[i]);
            sup[i] = h[i];
            rhs[i] = 6.0 * ((y[ip] - y[i]) / h[i] - (y[i] - y[im]) / h[im]);
        }
        let m = solve_cyclic(&sub, &diag, &sup, &rhs);
        Self { x, y, m }
    }

    fn eval(&self, phi: f64) -> f64 {
        let n = self.x.len();
        let i = self.x.partition_point(|&xi| xi <= phi).saturating_sub(1);
        let (x0, x1) = (self.x[i], if i + 1 < n { self.x[i + 1] } else { self.x[0] + 2.0 * PI });
        let (y0, y1) = (self.y[i], self.y[(i + 1) % n]);
        let (m0, m1) = (self.m[i], self.m[(i + 1) % n]);
        let h = x1 - x0;
        let a = x1 - phi;
        let b = phi - x0;
        m0 * a.powi(3) / (6.0 * h) + m1 * b.powi(3) / (6.0 * h) + (y0 / h - m0 * h / 6.0) * a + (y1 / h - m1 * h / 6.0) * b
    }
}

/// Cyclic tridiagonal solve (Sherman-Morrison around the Thomas algorithm).
/// Row `i` reads `sub[i] u[i-1] + diag[i] u[i] + sup[i] u[i+1] = rhs[i]`, indices mod n.
fn solve_cyclic(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let alpha = sup[n - 1]; // bottom-left corner
    let beta = sub[0]; // top-right corner
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= alpha * beta / gamma;

    let thomas = |d: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; n];
        let mut x = vec![0.0; n];
        c[0] = sup[0] / b[0];
        x[0] = d[0] / b[0];
        for i in 1..n {
            let den = b[i] - sub[i] * c[i - 1];
            c[i] = sup[i] / den;
            x[i] = (d[i] - sub[i] * x[i - 1]) / den;
        }
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] -= c[i] * next;
        }
        x
    };

    let x = thomas(rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(&u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

#[derive(Debug, Clone)]
pub struct DiabaticTable {
    v_a: PeriodicSpline,
    v_b: PeriodicSpline,
    v_ab: PeriodicSpline,
    mu: PeriodicSpline,
}

impl DiabaticTable {
    pub fn eval(&self, phi: f64) -> DiabaticPoint {
        DiabaticPoint { v_a: self.v_a.eval(phi), v_b: self.v_b.eval(phi), v_ab: self.v_ab.eval(phi), mu: self.mu.eval(phi) }
    }

    pub fn n_nodes(&self) -> usize {
        self.v_a.x.len()
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Format { path: path.to_path_buf(), line, msg };
        let mut rows: Vec<(usize, [f64; 5])> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(err(line_no, format!("expected 5 columns, found {}", fields.len())));
            }
            let mut vals = [0.0f64; 5];
            for (v, f) in vals.iter_mut().zip(&fields) {
                *v = f.parse().map_err(|_| err(line_no, format!("cannot parse `{f}` as a number")))?;
                if !v.is_finite() {
                    return Err(err(line_no, format!("non-finite value `{f}`")));
                }
            }
            if let Some((_, prev)) = rows.last() {
                if vals[0] <= prev[0] {
                    return Err(err(line_no, format!("phi column not strictly increasing ({} after {})", vals[0], prev[0])));
                }
            }
            rows.push((line_no, vals));
        }
        if rows.is_empty() {
            return Err(err(0, "empty table".into()));
        }
        if rows.len() < 4 {
            return Err(err(rows.last().unwrap().0, format!("need at least 4 rows, found {}", rows.len())));
        }
        let (first_line, first) = rows[0];
        let (last_line, last) = *rows.last().unwrap();
        if (first[0] + PI).abs() > ANGLE_TOL {
            return Err(err(first_line, format!("first phi must be -pi, found {}", first[0])));
        }
        if (last[0] - PI).abs() > ANGLE_TOL {
            return Err(err(last_line, format!("last phi must be pi, found {}", last[0])));
        }
        for c in 1..5 {
            if (first[c] - last[c]).abs() > ENDPOINT_TOL {
                return Err(err(
                    last_line,
                    format!("periodicity violated in column {c}: {} at -pi vs {} at pi", first[c], last[c]),
                ));
            }
        }
        // Drop the duplicated endpoint; the spline closes the period itself.
        let body = &rows[..rows.len() - 1];
        let x: Vec<f64> = body.iter().map(|(_, r)| r[0]).collect();
        let col = |c: usize| body.iter().map(|(_, r)| r[c]).collect::<Vec<f64>>();
        Ok(Self {
            v_a: PeriodicSpline::new(x.clone(), col(1)),
            v_b: PeriodicSpline::new(x.clone(), col(2)),
            v_ab: PeriodicSpline::new(x.clone(), col(3)),
            mu: PeriodicSpline::new(x, col(4)),
        })
    }
}

pub fn load_tabulated(path: impl AsRef<Path>, mass: f64) -> Result<DiabaticModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let table = DiabaticTable::parse(&text, path)?;
    DiabaticModel::new(Representation::Tabulated(table.into()), mass)
}

/// Samples a model on `n` uniformly spaced intervals over `[-pi, pi]` in table format.
pub fn write_table(model: &DiabaticModel, n: usize) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for j in 0..=n {
        let phi = if j == n { PI } else { -PI + 2.0 * PI * j as f64 / n as f64 };
        // evaluate the closing row at -pi so both ends agree bit for bit
        let p = model.eval(if j == n { -PI } else { phi });
        writeln!(out, "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e}", phi, p.v_a, p.v_b, p.v_ab, p.mu).unwrap();
    }
    out
}
