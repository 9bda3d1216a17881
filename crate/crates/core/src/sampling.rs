use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chart::Chart;

/// Where residuals are evaluated: a tensor grid inset from the boundary plus
/// seeded uniform points in the same inset box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SamplePlan {
    pub grid: usize,
    pub margin: f64,
    pub random: usize,
    pub seed: u64,
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan {
            grid: 5,
            margin: 0.1,
            random: 16,
            seed: 0,
        }
    }
}

impl SamplePlan {
    pub fn grid_only(grid: usize, margin: f64) -> SamplePlan {
        SamplePlan {
            grid,
            margin,
            random: 0,
            seed: 0,
        }
    }

    fn inset(&self, chart: &Chart) -> Vec<(f64, f64)> {
        let m = self.margin.clamp(0.0, 0.49);
        chart
            .domain()
            .iter()
            .map(|&(a, b)| (a + m * (b - a), b - m * (b - a)))
            .collect()
    }

    /// Grid nodes along each axis of the inset box.
    pub fn axes(&self, chart: &Chart) -> Vec<Vec<f64>> {
        self.inset(chart)
            .into_iter()
            .map(|(a, b)| match self.grid {
                0 => Vec::new(),
                1 => vec![0.5 * (a + b)],
                n => (0..n).map(|j| a + (b - a) * j as f64 / (n - 1) as f64).collect(),
            })
            .collect()
    }

    /// All sample points: grid nodes in lexicographic order, then random points.
    pub fn points(&self, chart: &Chart) -> Vec<Vec<f64>> {
        let mut out = tensor_grid(&self.axes(chart));
        let boxes = self.inset(chart);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..self.random {
            out.push(boxes.iter().map(|&(a, b)| rng.gen_range(a..=b)).collect());
        }
        out
    }
}

/// Cartesian product of axis node lists, last axis varying fastest.
pub fn tensor_grid(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if axes.iter().any(|a| a.is_empty()) {
        return Vec::new();
    }
    let mut out = vec![Vec::with_capacity(axes.len())];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&x| {
                    let mut q = prefix.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan_counts_and_bounds() {
        let chart = Chart::with_domain(vec![(0.0, 1.0), (2.0, 4.0)]).unwrap();
        let pts = SamplePlan::default().points(&chart);
        assert_eq!(pts.len(), 25 + 16);
        for p in &pts {
            assert!((0.1..=0.9).contains(&p[0]));
            assert!((2.2..=3.8).contains(&p[1]));
        }
        assert_eq!(pts[0], vec![0.1, 2.2]);
    }

    #[test]
    fn seeded_points_are_reproducible() {
        let chart = Chart::with_domain(vec![(0.0, 1.0)]).unwrap();
        let plan = SamplePlan {
            seed: 7,
            ..SamplePlan::default()
        };
        assert_eq!(plan.points(&chart), plan.points(&chart));
    }
}
