use nalgebra::DVector;

use crate::manifold::{BundlePoint, ManifoldModel};

/// Sample points `(x, v)` on base nodes times a tensor grid in the fibre box
/// `[-half_width, half_width]^k`.
#[derive(Debug, Clone)]
pub struct TubeGrid {
    pub points: Vec<BundlePoint>,
}

/// Evenly spaced base nodes: `n` per period on closed curves, `n` including
/// both endpoints otherwise.
pub fn base_nodes(model: &ManifoldModel, n: usize) -> Vec<f64> {
    let (lo, hi) = model.param_range();
    if model.is_periodic() {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
    } else if n == 1 {
        vec![0.5 * (lo + hi)]
    } else {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }
}

impl TubeGrid {
    pub fn box_grid(model: &ManifoldModel, half_width: f64, n_base: usize, per_axis: usize) -> Self {
        let k = model.fibre_dim();
        let axis: Vec<f64> = if per_axis <= 1 {
            vec![0.0]
        } else {
            (0..per_axis)
                .map(|i| -half_width + 2.0 * half_width * i as f64 / (per_axis - 1) as f64)
                .collect()
        };
        let mut fibres: Vec<Vec<f64>> = vec![vec![]];
        for _ in 0..k {
            fibres = fibres
                .into_iter()
                .flat_map(|f| {
                    axis.iter().map(move |&a| {
                        let mut g = f.clone();
                        g.push(a);
                        g
                    })
                })
                .collect();
        }
        let mut points = Vec::with_capacity(n_base * fibres.len());
        for x in base_nodes(model, n_base) {
            for f in &fibres {
                points.push(BundlePoint::new(x, DVector::from_column_slice(f)));
            }
        }
        TubeGrid { points }
    }

    /// Box grid restricted to the closed ball of the given radius.
    pub fn ball_grid(model: &ManifoldModel, radius: f64, n_base: usize, per_axis: usize) -> Self {
        let mut g = Self::box_grid(model, radius, n_base, per_axis);
        g.points.retain(|p| p.fibre.norm() <= radius * (1.0 + 1e-12));
        g
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
