//! Uniform time grids, piecewise-constant functions on their cells and
//! node-valued arrays.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of `[t_start, t_end]` into `n_cells` cells.
///
/// Cell `j` (zero-based) covers `(t_j, t_{j+1}]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_cells: usize,
}

#[derive(Deserialize)]
struct RawGrid {
    t_start: f64,
    t_end: f64,
    n_cells: usize,
}

impl TryFrom<RawGrid> for TimeGrid {
    type Error = Error;
    fn try_from(r: RawGrid) -> Result<Self> {
        TimeGrid::new(r.t_start, r.t_end, r.n_cells)
    }
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_cells: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_start >= 0.0) {
            return Err(Error::param("t_start", t_start, "must be finite and >= 0"));
        }
        if !(t_end.is_finite() && t_end > t_start) {
            return Err(Error::param("t_end", t_end, "must be finite and > t_start"));
        }
        if n_cells == 0 {
            return Err(Error::param("n_cells", 0.0, "must be positive"));
        }
        Ok(Self {
            t_start,
            t_end,
            n_cells,
        })
    }

    /// Grid on `[0, t_end]`.
    pub fn unit_start(t_end: f64, n_cells: usize) -> Result<Self> {
        Self::new(0.0, t_end, n_cells)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn length(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn spacing(&self) -> f64 {
        self.length() / self.n_cells as f64
    }

    /// Node `t_i`, `i = 0..=n_cells`. The last node is exactly `t_end`.
    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.t_end
        } else {
            self.t_start + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.node(i)).collect()
    }

    /// `(left, right)` end points of cell `j`.
    pub fn cell(&self, j: usize) -> (f64, f64) {
        (self.node(j), self.node(j + 1))
    }

    /// Same interval, `factor` times as many cells.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        Self::new(self.t_start, self.t_end, self.n_cells * factor)
    }

    /// The first `n` cells as a grid on `[t_start, t_n]`.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_cells {
            return Err(Error::param("n", n as f64, "prefix length out of range"));
        }
        Self::new(self.t_start, self.node(n), n)
    }

    pub(crate) fn ensure_same(&self, other: &TimeGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Which end point a fractional operator integrates from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `I_{a+}`: integrates over `(a, t)`.
    Left,
    /// `I_{b-}`: integrates over `(t, b)`.
    Right,
}

impl Side {
    /// Node index associated with cell `j`: its right end for the left side,
    /// its left end for the right side.
    pub fn node_of_cell(self, j: usize) -> usize {
        match self {
            Side::Left => j + 1,
            Side::Right => j,
        }
    }
}

/// Piecewise-constant function: `values[j]` on cell `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_cells(),
                actual: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            values: vec![0.0; grid.n_cells()],
            grid,
        }
    }

    pub fn constant(grid: TimeGrid, c: f64) -> Self {
        Self {
            values: vec![c; grid.n_cells()],
            grid,
        }
    }

    /// `1_{(a, b]}` where `a` and `b` are snapped to cell boundaries
    /// `node(first)` and `node(last)`.
    pub fn indicator(grid: TimeGrid, first: usize, last: usize) -> Result<Self> {
        if first >= last || last > grid.n_cells() {
            return Err(Error::param(
                "last",
                last as f64,
                format!("indicator cells {first}..{last} out of range"),
            ));
        }
        let values = (0..grid.n_cells())
            .map(|j| if (first..last).contains(&j) { 1.0 } else { 0.0 })
            .collect();
        Ok(Self { grid, values })
    }

    /// Exact cell averages of `f`, computed by `cell_integral(a, b)`.
    pub fn from_cell_integrals(grid: TimeGrid, mut cell_integral: impl FnMut(f64, f64) -> f64) -> Self {
        let dt = grid.spacing();
        let values = (0..grid.n_cells())
            .map(|j| {
                let (a, b) = grid.cell(j);
                cell_integral(a, b) / dt
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.spacing() * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// `t ↦ f(a + b - t)`.
    pub fn reversed(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self {
            grid: self.grid,
            values,
        }
    }

    /// Coefficients `d_i` of the representation `f = Σ_i d_i 1_{(t_start, t_i]}`
    /// over nodes `i = 1..=n` (index `i - 1` in the returned vector).
    pub fn left_indicator_coefficients(&self) -> Vec<f64> {
        let n = self.values.len();
        (0..n)
            .map(|j| self.values[j] - if j + 1 < n { self.values[j + 1] } else { 0.0 })
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Associates node values with cells, the inverse of [`Side::node_of_cell`].
    pub fn from_nodes(nodes: &NodeValues) -> Self {
        Self {
            grid: nodes.grid,
            values: nodes.values.clone(),
        }
    }

    pub fn add(&self, other: &StepFunction) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

/// Values at the `n_cells` nodes that carry a one-sided fractional image:
/// `t_1..=t_n` for [`Side::Left`], `t_0..t_{n-1}` for [`Side::Right`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeValues {
    pub grid: TimeGrid,
    pub side: Side,
    pub values: Vec<f64>,
}

impl NodeValues {
    pub fn new(grid: TimeGrid, side: Side, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_cells(),
                actual: values.len(),
            });
        }
        Ok(Self { grid, side, values })
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.grid.n_cells())
            .map(|j| self.grid.node(self.side.node_of_cell(j)))
            .collect()
    }

    /// Node values of the function `f` sampled on the side's nodes.
    pub fn sample(grid: TimeGrid, side: Side, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n_cells())
            .map(|j| f(grid.node(side.node_of_cell(j))))
            .collect();
        Self { grid, side, values }
    }

    /// Discrete L² norm, attributing each node value to its cell.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.spacing() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_input() {
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        assert!(TimeGrid::new(1.0, 1.0, 4).is_err());
        assert!(TimeGrid::new(-0.5, 1.0, 4).is_err());
        assert!(TimeGrid::new(0.0, f64::NAN, 4).is_err());
    }

    #[test]
    fn nodes_strictly_increasing_and_end_exact() {
        let g = TimeGrid::new(0.3, 1.7, 7).unwrap();
        let nodes = g.nodes();
        assert_eq!(nodes.len(), 8);
        assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*nodes.last().unwrap(), 1.7);
        assert!((g.spacing() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn step_function_norm_and_coefficients() {
        let g = TimeGrid::unit_start(1.0, 4).unwrap();
        let f = StepFunction::new(g, vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        assert!((f.l2_norm_sq() - 0.25 * (1.0 + 4.0 + 0.25 + 9.0)).abs() < 1e-15);
        let d = f.left_indicator_coefficients();
        // Rebuild the values from the indicator representation.
        for j in 0..4 {
            let v: f64 = d[j..].iter().sum();
            assert!((v - f.values()[j]).abs() < 1e-15);
        }
        assert!(StepFunction::new(g, vec![1.0]).is_err());
    }

    #[test]
    fn node_association() {
        let g = TimeGrid::unit_start(1.0, 4).unwrap();
        let left = NodeValues::sample(g, Side::Left, |t| t);
        let right = NodeValues::sample(g, Side::Right, |t| t);
        assert_eq!(left.values, vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(right.values, vec![0.0, 0.25, 0.5, 0.75]);
    }
}
