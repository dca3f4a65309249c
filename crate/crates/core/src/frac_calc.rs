//! Riemann–Liouville fractional integrals and derivatives on uniform grids.
//!
//! A [`FracKernelMatrix`] maps cell values of a step function to the exact
//! node values of its left or right fractional integral. For a step function
//! `f` with value `f_j` on cell `j`,
//!
//! ```text
//! (I^α_{a+} f)(t_{i+1}) = Σ_{j≤i} w_{i-j} f_j,
//! (I^α_{b-} f)(t_i)     = Σ_{j≥i} w_{j-i} f_j,
//! w_k = Δ^α [(k+1)^α - k^α] / Γ(α+1),
//! ```
//!
//! so both kernels are Toeplitz and the right one is the reversal of the
//! left. The discrete fractional derivative is the triangular solve against
//! the same kernel, which makes `D^α ∘ I^α` the identity on step functions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{NodeValues, Side, StepFunction, TimeGrid};
use crate::numerics::gamma;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FracKernelMatrix {
    grid: TimeGrid,
    order: f64,
    side: Side,
    /// Toeplitz coefficients `w_0..w_{n-1}`.
    weights: Vec<f64>,
}

/// Builds the discretization of `I^α_{a+}` or `I^α_{b-}` on `grid`.
pub fn build_kernel(grid: TimeGrid, order: f64, side: Side) -> Result<FracKernelMatrix> {
    FracKernelMatrix::new(grid, order, side)
}

impl FracKernelMatrix {
    pub fn new(grid: TimeGrid, order: f64, side: Side) -> Result<Self> {
        if !(order > 0.0 && order < 1.0) {
            return Err(Error::param("alpha", order, "fractional order must lie in (0, 1)"));
        }
        let n = grid.n_cells();
        let scale = grid.spacing().powf(order) / gamma(order + 1.0);
        let weights = (0..n)
            .map(|k| {
                let k = k as f64;
                scale * ((k + 1.0).powf(order) - k.powf(order))
            })
            .collect();
        Ok(Self {
            grid,
            order,
            side,
            weights,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `K[i][j]`; zero outside the triangle.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self.side {
            Side::Left if j <= i => self.weights[i - j],
            Side::Right if j >= i => self.weights[j - i],
            _ => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.grid.n_cells();
        (0..n)
            .map(|i| (0..n).map(|j| self.entry(i, j)).collect())
            .collect()
    }

    /// Node values of the fractional integral of `f`.
    pub fn apply(&self, f: &StepFunction) -> Result<NodeValues> {
        self.grid.ensure_same(f.grid())?;
        let v = f.values();
        let n = v.len();
        let w = &self.weights;
        let values = match self.side {
            Side::Left => (0..n)
                .map(|i| (0..=i).map(|j| w[i - j] * v[j]).sum())
                .collect(),
            Side::Right => (0..n)
                .map(|i| (i..n).map(|j| w[j - i] * v[j]).sum())
                .collect(),
        };
        NodeValues::new(self.grid, self.side, values)
    }

    /// Step function `f` with `apply(f) == g`: the discrete `D^α = (I^α)^{-1}`.
    pub fn solve_derivative(&self, g: &NodeValues) -> Result<StepFunction> {
        self.grid.ensure_same(&g.grid)?;
        if g.side != self.side {
            return Err(Error::GridMismatch(format!(
                "node values on {:?} side, kernel on {:?} side",
                g.side, self.side
            )));
        }
        let pivot = self.weights[0];
        let threshold = 1e-14 * self.grid.spacing().powf(self.order);
        if !(pivot >= threshold) {
            return Err(Error::IllConditioned { pivot, threshold });
        }
        let n = g.values.len();
        let w = &self.weights;
        let mut f = vec![0.0; n];
        match self.side {
            Side::Left => {
                for i in 0..n {
                    let s: f64 = (0..i).map(|j| w[i - j] * f[j]).sum();
                    f[i] = (g.values[i] - s) / pivot;
                }
            }
            Side::Right => {
                for i in (0..n).rev() {
                    let s: f64 = (i + 1..n).map(|j| w[j - i] * f[j]).sum();
                    f[i] = (g.values[i] - s) / pivot;
                }
            }
        }
        StepFunction::new(self.grid, f)
    }
}

/// Discrete `H^α_{a+}` / `H^α_{b-}` norm of a step function.
///
/// * `α > 0`: `‖D^α f‖_{L²}`, reading the cell values of `f` as node values
///   on the chosen side.
/// * `α < 0`: `‖I^{|α|} f‖_{L²}` with the node values attributed to cells.
/// * `α = 0`: the L² norm.
pub fn h_norm(f: &StepFunction, alpha: f64, side: Side) -> Result<f64> {
    if !(alpha > -1.0 && alpha < 1.0) {
        return Err(Error::param("alpha", alpha, "order must lie in (-1, 1)"));
    }
    if alpha == 0.0 {
        return Ok(f.l2_norm());
    }
    if alpha > 0.0 {
        let k = FracKernelMatrix::new(*f.grid(), alpha, side)?;
        let g = NodeValues::new(*f.grid(), side, f.values().to_vec())?;
        Ok(k.solve_derivative(&g)?.l2_norm())
    } else {
        let k = FracKernelMatrix::new(*f.grid(), -alpha, side)?;
        Ok(k.apply(f)?.l2_norm())
    }
}

/// Exact cell averages of the kernel
/// `g_y(t) = (y - t)^{-α} 1_{(a, y)}(t) / Γ(1 - α)`, whose right fractional
/// integral of order `α` is `1_{(a, y)}`.
pub fn indicator_preimage(grid: TimeGrid, alpha: f64, y: f64) -> Result<StepFunction> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", alpha, "fractional order must lie in (0, 1)"));
    }
    let c = 1.0 / (gamma(1.0 - alpha) * (1.0 - alpha));
    Ok(StepFunction::from_cell_integrals(grid, |a, b| {
        if a >= y {
            0.0
        } else {
            let b = b.min(y);
            c * ((y - a).powf(1.0 - alpha) - (y - b).powf(1.0 - alpha))
        }
    }))
}

/// Discrete L² distance between `K_right g_y` and `1_{(a, y)}` at the right
/// nodes.
pub fn indicator_reconstruction_error(grid: TimeGrid, alpha: f64, y: f64) -> Result<f64> {
    let g = indicator_preimage(grid, alpha, y)?;
    let k = FracKernelMatrix::new(grid, alpha, Side::Right)?;
    let image = k.apply(&g)?;
    let target = NodeValues::sample(grid, Side::Right, |t| if t < y { 1.0 } else { 0.0 });
    let diff: Vec<f64> = image
        .values
        .iter()
        .zip(&target.values)
        .map(|(a, b)| a - b)
        .collect();
    Ok(NodeValues::new(grid, Side::Right, diff)?.l2_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::tanh_sinh;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::unit_start(1.0, n).unwrap()
    }

    #[test]
    fn rejects_bad_order() {
        for a in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(FracKernelMatrix::new(grid(4), a, Side::Left).is_err());
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let k = FracKernelMatrix::new(grid(16), 0.37, Side::Left).unwrap();
        let z = k.apply(&StepFunction::zeros(grid(16))).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
        let f = k.solve_derivative(&z).unwrap();
        assert!(f.is_zero());
    }

    #[test]
    fn half_order_of_one_at_t1() {
        // ∫_0^1 (1-s)^{-1/2} ds / Γ(1/2), by quadrature
        let q = tanh_sinh(0.0, 1.0, 1e-15, 1e-15, |_, _, v| v.powf(-0.5));
        let oracle = q.value / gamma(0.5);
        let k = FracKernelMatrix::new(grid(10), 0.5, Side::Left).unwrap();
        let img = k.apply(&StepFunction::constant(grid(10), 1.0)).unwrap();
        assert!((img.values[9] - oracle).abs() < 1e-13);
        assert!((oracle - 1.0 / gamma(1.5)).abs() < 1e-13);
        // power rule at every node
        for (v, t) in img.values.iter().zip(img.times()) {
            assert!((v - t.sqrt() / gamma(1.5)).abs() < 1e-13);
        }
    }

    #[test]
    fn basis_cell_gives_column() {
        let k = FracKernelMatrix::new(grid(8), 0.3, Side::Right).unwrap();
        let mut v = vec![0.0; 8];
        v[5] = 2.5;
        let img = k.apply(&StepFunction::new(grid(8), v).unwrap()).unwrap();
        for i in 0..8 {
            assert!((img.values[i] - 2.5 * k.entry(i, 5)).abs() < 1e-15);
        }
    }

    #[test]
    fn right_is_reflection_of_left() {
        let g = grid(12);
        let f = StepFunction::new(g, (0..12).map(|j| ((j * 7 % 5) as f64) - 1.3).collect()).unwrap();
        let kl = FracKernelMatrix::new(g, 0.42, Side::Left).unwrap();
        let kr = FracKernelMatrix::new(g, 0.42, Side::Right).unwrap();
        let right = kr.apply(&f).unwrap();
        let mut left = kl.apply(&f.reversed()).unwrap().values;
        left.reverse();
        for (a, b) in right.values.iter().zip(&left) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn solve_inverts_power_rule() {
        let g = grid(64);
        let alpha = 0.6;
        let k = FracKernelMatrix::new(g, alpha, Side::Left).unwrap();
        let nodes = NodeValues::sample(g, Side::Left, |t| t.powf(alpha) / gamma(alpha + 1.0));
        let f = k.solve_derivative(&nodes).unwrap();
        for v in f.values() {
            assert!((v - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn side_mismatch_is_an_error() {
        let g = grid(4);
        let k = FracKernelMatrix::new(g, 0.5, Side::Left).unwrap();
        let nodes = NodeValues::new(g, Side::Right, vec![1.0; 4]).unwrap();
        assert!(k.solve_derivative(&nodes).is_err());
        let other = StepFunction::zeros(grid(5));
        assert!(matches!(k.apply(&other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn h_norm_zero_order_is_l2() {
        let g = grid(8);
        let f = StepFunction::new(g, vec![1.0, -1.0, 2.0, 0.0, 0.5, 0.5, 3.0, -2.0]).unwrap();
        assert_eq!(h_norm(&f, 0.0, Side::Left).unwrap(), f.l2_norm());
        assert_eq!(h_norm(&StepFunction::zeros(g), 0.3, Side::Right).unwrap(), 0.0);
        assert!(h_norm(&f, 1.0, Side::Left).is_err());
    }

    #[test]
    fn indicator_preimage_reconstructs_away_from_jump() {
        let g = grid(512);
        let alpha = 0.25;
        let pre = indicator_preimage(g, alpha, 0.5).unwrap();
        let k = FracKernelMatrix::new(g, alpha, Side::Right).unwrap();
        let img = k.apply(&pre).unwrap();
        for (t, v) in img.times().iter().zip(&img.values) {
            if *t >= 0.5 {
                assert_eq!(*v, 0.0);
            } else if *t < 0.4 {
                assert!((v - 1.0).abs() < 1e-2, "t={t} v={v}");
            }
        }
    }
}
