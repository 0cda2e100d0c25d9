//! Uniform cell-centred grids on [−R, R]^N and functions sampled on them.

use crate::error::{domain, Error, Result};
use crate::exec::{self, psum_by};
use serde::{Deserialize, Serialize};

/// Points x_i = −R + (i + ½)h, h = 2R/n, so the cells tile the box exactly.
/// Multi-indices are flattened with axis 0 fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_dim: usize,
    pub n: usize,
    pub radius: f64,
}

impl Grid {
    pub fn new(n_dim: usize, n: usize, radius: f64) -> Result<Self> {
        if !(n_dim == 1 || n_dim == 2) {
            return Err(domain("N", format!("N = {n_dim}; only 1 and 2 are supported")));
        }
        if n < 4 {
            return Err(domain("n_points", format!("n_points = {n} must be >= 4")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(domain("R", format!("box radius {radius} must be positive and finite")));
        }
        Ok(Grid { n_dim, n, radius })
    }

    pub fn d1(n: usize, radius: f64) -> Self {
        Grid::new(1, n, radius).expect("valid 1D grid")
    }

    pub fn h(&self) -> f64 {
        2.0 * self.radius / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.n_dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.n_dim as i32)
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.radius + (i as f64 + 0.5) * self.h()
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 2] {
        if self.n_dim == 1 {
            [idx, 0]
        } else {
            [idx % self.n, idx / self.n]
        }
    }

    #[inline]
    pub fn ravel(&self, m: [usize; 2]) -> usize {
        if self.n_dim == 1 {
            m[0]
        } else {
            m[0] + self.n * m[1]
        }
    }

    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let m = self.unravel(idx);
        if self.n_dim == 1 {
            [self.coord(m[0]), 0.0]
        } else {
            [self.coord(m[0]), self.coord(m[1])]
        }
    }

    /// Halve h on the same box.
    pub fn refined(&self) -> Grid {
        Grid { n: 2 * self.n, ..*self }
    }

    /// Whether |x|_∞ ≤ frac·R.
    pub fn inside(&self, idx: usize, frac: f64) -> bool {
        let p = self.point(idx);
        p[..self.n_dim].iter().all(|v| v.abs() <= frac * self.radius)
    }
}

/// How a grid function continues outside the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exterior {
    Zero,
    /// Constant continuation of the boundary value (nearest boundary point).
    Constant,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
    pub exterior: Exterior,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>, exterior: Exterior) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!("{} values for a grid of {}", values.len(), grid.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Precondition(format!("non-finite value at index {i}")));
        }
        Ok(GridFunction { grid, values, time: 0.0, exterior })
    }

    pub fn from_fn<F>(grid: Grid, exterior: Exterior, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let mut values = vec![0.0; grid.len()];
        let nd = grid.n_dim;
        exec::fill(&mut values, |i| f(&grid.point(i)[..nd]));
        GridFunction { grid, values, time: 0.0, exterior }
    }

    pub fn zeros(grid: Grid, exterior: Exterior) -> Self {
        GridFunction { grid, values: vec![0.0; grid.len()], time: 0.0, exterior }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        GridFunction { grid, values: vec![c; grid.len()], time: 0.0, exterior: Exterior::Constant }
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        GridFunction { grid: self.grid, values, time: self.time, exterior: self.exterior }
    }

    pub fn with_exterior(mut self, exterior: Exterior) -> Self {
        self.exterior = exterior;
        self
    }

    pub fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Shape(format!("grids differ: {:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }

    pub fn integral(&self) -> f64 {
        psum_by(self.values.len(), |i| self.values[i]) * self.grid.cell_volume()
    }

    pub fn l1(&self) -> f64 {
        psum_by(self.values.len(), |i| self.values[i].abs()) * self.grid.cell_volume()
    }

    pub fn l2(&self) -> f64 {
        (psum_by(self.values.len(), |i| self.values[i] * self.values[i]) * self.grid.cell_volume()).sqrt()
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn dot(&self, other: &GridFunction) -> Result<f64> {
        self.same_grid(other)?;
        Ok(psum_by(self.values.len(), |i| self.values[i] * other.values[i]) * self.grid.cell_volume())
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.with_values(self.values.iter().map(|v| c * v).collect())
    }

    /// Value at an arbitrary point: multilinear between cell centres,
    /// nearest-centre between the outermost centres and the box edge, and the
    /// exterior rule beyond the box.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = self.grid;
        let r = g.radius;
        if self.exterior == Exterior::Zero && x.iter().any(|v| v.abs() > r) {
            return 0.0;
        }
        let h = g.h();
        let n = g.n;
        let axis = |v: f64| -> (usize, f64) {
            let s = ((v + r) / h - 0.5).clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n - 2);
            (i, s - i as f64)
        };
        if g.n_dim == 1 {
            let (i, f) = axis(x[0]);
            (1.0 - f) * self.values[i] + f * self.values[i + 1]
        } else {
            let (i, fx) = axis(x[0]);
            let (j, fy) = axis(x[1]);
            let v = |a: usize, b: usize| self.values[g.ravel([a, b])];
            (1.0 - fy) * ((1.0 - fx) * v(i, j) + fx * v(i + 1, j)) + fy * ((1.0 - fx) * v(i, j + 1) + fx * v(i + 1, j + 1))
        }
    }

    /// New function on the same grid with values self(map(x)).
    pub fn resample<M>(&self, map: M) -> GridFunction
    where
        M: Fn(&[f64]) -> Vec<f64> + Sync + Send,
    {
        let g = self.grid;
        let nd = g.n_dim;
        let mut values = vec![0.0; g.len()];
        exec::fill(&mut values, |i| self.interpolate(&map(&g.point(i)[..nd])));
        self.with_values(values)
    }

    /// Centred first difference along `axis`; one-sided at the box edge
    /// according to the exterior rule.
    pub fn gradient(&self, axis: usize) -> Vec<f64> {
        let g = self.grid;
        let h = g.h();
        let n = g.n;
        let ext = self.exterior;
        let mut out = vec![0.0; g.len()];
        exec::fill(&mut out, |idx| {
            let m = g.unravel(idx);
            let at = |k: isize| -> f64 {
                if k < 0 || k >= n as isize {
                    match ext {
                        Exterior::Zero => 0.0,
                        Exterior::Constant => self.values[idx],
                    }
                } else {
                    let mut mm = m;
                    mm[axis] = k as usize;
                    self.values[g.ravel(mm)]
                }
            };
            let k = m[axis] as isize;
            (at(k + 1) - at(k - 1)) / (2.0 * h)
        });
        out
    }

    /// Columns x1..xN, value, and any extra named columns.
    pub fn write_csv(&self, path: &std::path::Path, extra: &[(&str, &[f64])]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut head: Vec<String> = (1..=self.grid.n_dim).map(|i| format!("x{i}")).collect();
        head.push("value".into());
        head.extend(extra.iter().map(|(n, _)| n.to_string()));
        w.write_record(&head)?;
        for i in 0..self.values.len() {
            let p = self.grid.point(i);
            let mut row: Vec<String> = p[..self.grid.n_dim].iter().map(|v| fmt(*v)).collect();
            row.push(fmt(self.values[i]));
            for (_, col) in extra {
                row.push(fmt(col[i]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip representation, so identical runs give identical bytes.
pub(crate) fn fmt(v: f64) -> String {
    format!("{v:e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_tile_the_box() {
        let g = Grid::d1(8, 2.0);
        assert_eq!(g.h(), 0.5);
        assert_eq!(g.coord(0), -1.75);
        assert_eq!(g.coord(7), 1.75);
        let g2 = Grid::new(2, 4, 1.0).unwrap();
        assert_eq!(g2.len(), 16);
        assert_eq!(g2.unravel(g2.ravel([3, 1])), [3, 1]);
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let f = GridFunction::from_fn(g, Exterior::Constant, |x| 1.0 + 2.0 * x[0] - 0.5 * x[1]);
        let v = f.interpolate(&[0.123, -0.456]);
        assert!((v - (1.0 + 0.246 + 0.228)).abs() < 1e-12);
        let z = GridFunction::from_fn(g, Exterior::Zero, |_| 1.0);
        assert_eq!(z.interpolate(&[1.5, 0.0]), 0.0);
        assert_eq!(f.interpolate(&[5.0, 0.0]), f.interpolate(&[0.999, 0.0]));
    }

    #[test]
    fn norms_of_constant() {
        let g = Grid::d1(100, 1.0);
        let f = GridFunction::constant(g, 3.0);
        assert!((f.l1() - 6.0).abs() < 1e-12);
        assert!((f.l2() - (18.0f64).sqrt()).abs() < 1e-12);
        assert_eq!(f.linf(), 3.0);
        assert!((f.integral() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_shapes() {
        let g = Grid::d1(8, 1.0);
        assert!(GridFunction::new(g, vec![0.0; 7], Exterior::Zero).is_err());
        assert!(GridFunction::new(g, vec![f64::NAN; 8], Exterior::Zero).is_err());
        assert!(Grid::new(3, 8, 1.0).is_err());
    }
}
