//! Grid geometry on `[-pi/2, pi/2]^2`, the truncated sine basis, Gaussian
//! mollification and coefficient-space error metrics.
//!
//! Nodes are cell centered, `x_i = -pi/2 + (i + 1/2) h` with `h = pi / n`, so the
//! sampled sine basis is exactly orthogonal and projection after evaluation is
//! the identity up to rounding.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform cell-centered grid with `n` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub const MIN_POINTS: usize = 8;

    pub fn new(n: usize) -> Result<Self> {
        if n < Self::MIN_POINTS {
            return Err(Error::invalid(format!(
                "grid needs at least {} points per axis, got {n}",
                Self::MIN_POINTS
            )));
        }
        Ok(Self { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node spacing `pi / n`.
    #[inline]
    pub fn h(&self) -> f64 {
        PI / self.n as f64
    }

    /// Coordinate of node `i` along either axis.
    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        -FRAC_PI_2 + (i as f64 + 0.5) * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Flat index of node `(a, b)`; `a` indexes x, `b` indexes y.
    #[inline]
    pub fn index(&self, a: usize, b: usize) -> usize {
        a * self.n + b
    }

    /// Default mollifier width, two grid cells.
    pub fn default_mollifier(&self) -> f64 {
        2.0 * self.h()
    }
}

/// Real field sampled at the grid nodes, stored with x as the outer index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    grid: Grid,
    values: Vec<f64>,
}

impl FieldGrid {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::shape(
                format!("{} values", grid.len()),
                format!("{} values", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let nodes = grid.nodes();
        let mut values = Vec::with_capacity(grid.len());
        for &x in &nodes {
            for &y in &nodes {
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.values[self.grid.index(a, b)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Riemann sum of the field over the domain.
    pub fn integral(&self) -> f64 {
        let h = self.grid.h();
        self.values.iter().sum::<f64>() * h * h
    }

    /// Discrete L2 norm including the cell area.
    pub fn l2_norm(&self) -> f64 {
        let h = self.grid.h();
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt() * h
    }

    /// Rotation by +90 degrees about the origin: `q'(x) = q(R^-1 x)`.
    pub fn rotate_quarter(&self) -> FieldGrid {
        let n = self.grid.n;
        let mut out = vec![0.0; self.values.len()];
        // R(x, y) = (-y, x) maps node (a, b) to (n-1-b, a).
        for a in 0..n {
            for b in 0..n {
                out[self.grid.index(n - 1 - b, a)] = self.values[self.grid.index(a, b)];
            }
        }
        FieldGrid {
            grid: self.grid,
            values: out,
        }
    }
}

/// Coefficients of `sum_{i,j=1..N} c(i,j) sin(i(x+pi/2)) sin(j(y+pi/2))`,
/// stored with `i` varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineCoeffs {
    order: usize,
    coeffs: Vec<f64>,
}

impl SineCoeffs {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            coeffs: vec![0.0; order * order],
        }
    }

    pub fn new(order: usize, coeffs: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("sine basis order must be at least 1"));
        }
        if coeffs.len() != order * order {
            return Err(Error::shape(
                format!("{} coefficients", order * order),
                format!("{}", coeffs.len()),
            ));
        }
        Ok(Self { order, coeffs })
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient for mode `(i, j)`, both 1-based.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.coeffs[(j - 1) * self.order + (i - 1)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.coeffs[(j - 1) * self.order + (i - 1)] = value;
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Keeps modes `1..=order` of a higher-order expansion.
    pub fn truncate(&self, order: usize) -> Result<SineCoeffs> {
        if order > self.order {
            return Err(Error::invalid(format!(
                "cannot truncate order {} coefficients to order {order}",
                self.order
            )));
        }
        let mut out = SineCoeffs::zeros(order);
        for j in 1..=order {
            for i in 1..=order {
                out.set(i, j, self.get(i, j));
            }
        }
        Ok(out)
    }
}

/// `table[(i-1) * n + a] = sin(i (x_a + pi/2))`.
fn sine_table(order: usize, grid: Grid) -> Vec<f64> {
    let n = grid.n();
    let h = grid.h();
    let mut table = Vec::with_capacity(order * n);
    for i in 1..=order {
        for a in 0..n {
            table.push((i as f64 * (a as f64 + 0.5) * h).sin());
        }
    }
    table
}

pub fn eval_sine_basis(c: &SineCoeffs, grid: Grid) -> FieldGrid {
    let n = grid.n();
    let order = c.order();
    let s = sine_table(order, grid);

    // partial[j][a] = sum_i c(i,j) s_i(x_a)
    let mut partial = vec![0.0; order * n];
    for j in 1..=order {
        let row = &mut partial[(j - 1) * n..j * n];
        for i in 1..=order {
            let cij = c.get(i, j);
            if cij == 0.0 {
                continue;
            }
            let si = &s[(i - 1) * n..i * n];
            for (p, &v) in row.iter_mut().zip(si) {
                *p += cij * v;
            }
        }
    }

    let mut values = vec![0.0; grid.len()];
    for a in 0..n {
        let out = &mut values[a * n..(a + 1) * n];
        for j in 0..order {
            let w = partial[j * n + a];
            if w == 0.0 {
                continue;
            }
            let sj = &s[j * n..(j + 1) * n];
            for (o, &v) in out.iter_mut().zip(sj) {
                *o += w * v;
            }
        }
    }
    FieldGrid { grid, values }
}

/// Discrete L2 projection onto the first `order` sine modes in each direction.
pub fn project_sine_basis(f: &FieldGrid, order: usize) -> Result<SineCoeffs> {
    let grid = f.grid();
    let n = grid.n();
    if order == 0 || order > n {
        return Err(Error::invalid(format!(
            "projection order {order} must lie in 1..={n} for an n={n} grid"
        )));
    }
    let s = sine_table(order, grid);
    let h = grid.h();
    let scale = 4.0 / (PI * PI) * h * h;

    // partial[a][j] = sum_b f(a,b) s_j(y_b)
    let mut partial = vec![0.0; n * order];
    for a in 0..n {
        let row = &f.values()[a * n..(a + 1) * n];
        for j in 0..order {
            let sj = &s[j * n..(j + 1) * n];
            partial[a * order + j] = row.iter().zip(sj).map(|(v, w)| v * w).sum();
        }
    }
    let mut coeffs = vec![0.0; order * order];
    for j in 0..order {
        for i in 0..order {
            let si = &s[i * n..(i + 1) * n];
            let acc: f64 = (0..n).map(|a| si[a] * partial[a * order + j]).sum();
            coeffs[j * order + i] = scale * acc;
        }
    }
    Ok(SineCoeffs { order, coeffs })
}

/// Project onto `Q_order` and evaluate back on the same grid.
pub fn restrict_to_basis(f: &FieldGrid, order: usize) -> Result<FieldGrid> {
    Ok(eval_sine_basis(&project_sine_basis(f, order)?, f.grid()))
}

/// Normalized 1-D Gaussian weights with standard deviation `eps_m`, truncated
/// at `4 eps_m`. The 2-D kernel is the outer product of this vector with itself.
pub fn mollifier_weights(grid: Grid, eps_m: f64) -> Vec<f64> {
    let h = grid.h();
    let radius = (4.0 * eps_m / h).floor() as usize;
    let mut w: Vec<f64> = (0..=2 * radius)
        .map(|t| {
            let d = (t as f64 - radius as f64) * h;
            (-d * d / (2.0 * eps_m * eps_m)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Convolution with a unit-mass Gaussian, zero padding outside the domain.
pub fn mollify(f: &FieldGrid, eps_m: f64) -> Result<FieldGrid> {
    if !(eps_m > 0.0) || !eps_m.is_finite() {
        return Err(Error::invalid(format!("mollifier width must be positive, got {eps_m}")));
    }
    let grid = f.grid();
    let n = grid.n();
    let w = mollifier_weights(grid, eps_m);
    let r = (w.len() / 2) as isize;

    let conv_axis = |src: &[f64], dst: &mut [f64], stride_outer: usize, stride_inner: usize| {
        for outer in 0..n {
            for i in 0..n {
                let mut acc = 0.0;
                let lo = (i as isize - r).max(0);
                let hi = (i as isize + r).min(n as isize - 1);
                for t in lo..=hi {
                    acc += w[(t - i as isize + r) as usize]
                        * src[outer * stride_outer + t as usize * stride_inner];
                }
                dst[outer * stride_outer + i * stride_inner] = acc;
            }
        }
    };

    let mut tmp = vec![0.0; grid.len()];
    let mut out = vec![0.0; grid.len()];
    // along y (inner index), then along x
    conv_axis(f.values(), &mut tmp, n, 1);
    conv_axis(&tmp, &mut out, 1, n);
    Ok(FieldGrid { grid, values: out })
}

/// `||pred - truth|| / ||truth||` in coefficient space.
pub fn relative_l2(pred: &SineCoeffs, truth: &SineCoeffs) -> Result<f64> {
    if pred.order() != truth.order() {
        return Err(Error::shape(
            format!("order {}", truth.order()),
            format!("order {}", pred.order()),
        ));
    }
    let denom = truth.norm();
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    let num = pred
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

/// Binary PGM (P5, 8-bit) with linear min-max scaling. Rows run from the
/// top (largest y) down; columns follow x. A constant field maps to 0.
pub fn to_pgm(f: &FieldGrid) -> Vec<u8> {
    let n = f.grid().n();
    let (lo, hi) = f.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| (a.0.min(v), a.1.max(v)));
    let span = hi - lo;
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    for r in 0..n {
        for c in 0..n {
            let v = f.at(c, n - 1 - r);
            let level = if span > 0.0 { ((v - lo) / span * 255.0).round() } else { 0.0 };
            out.push(level.clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// Raw values as CSV in the same orientation as [`to_pgm`].
pub fn to_csv(f: &FieldGrid) -> String {
    let n = f.grid().n();
    let mut s = String::new();
    for r in 0..n {
        let row: Vec<String> = (0..n).map(|c| format!("{:?}", f.at(c, n - 1 - r))).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}
