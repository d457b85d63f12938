//! PCA loss-landscape analysis of training trajectories.
//!
//! The per-epoch parameter vectors form a `T x d` matrix; its first two
//! principal components span a plane through parameter space, and scanning
//! the loss over that plane (with the projected trajectory overlaid)
//! visualizes how the optimizer moved.

use std::io::Write;

use serde::Serialize;

use crate::circuits::CircuitTemplate;
use crate::classifier::{EvalContext, Sample, Trajectory};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Mean, top-2 orthonormal components, and their explained-variance
/// ratios. Component signs are fixed so the largest-magnitude entry is
/// positive, making fits reproducible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcaModel<T> {
    pub mean: Vec<T>,
    pub components: [Vec<T>; 2],
    pub explained_variance_ratio: [T; 2],
}

/// Fits centered PCA to the trajectory: covariance with divisor `T - 1`,
/// exact symmetric eigendecomposition, top two eigenpairs.
pub fn fit_pca<T: Scalar>(trajectory: &Trajectory<T>) -> Result<PcaModel<T>> {
    let steps = trajectory.steps();
    let t = steps.len();
    if t < 3 {
        return Err(Error::Pca(format!("{t} steps, need at least 3")));
    }
    let d = trajectory.dim();
    if d < 2 {
        return Err(Error::Pca(format!("{d} parameters, need at least 2")));
    }
    if steps.iter().all(|s| s == &steps[0]) {
        return Err(Error::Pca("zero-variance trajectory".into()));
    }

    let inv_t = T::one() / T::of(t as f64);
    let mut mean = vec![T::zero(); d];
    for step in steps {
        for (m, &v) in mean.iter_mut().zip(step) {
            *m += v * inv_t;
        }
    }

    let denom = T::one() / T::of((t - 1) as f64);
    let mut covariance = vec![T::zero(); d * d];
    for step in steps {
        let centered: Vec<T> = step.iter().zip(&mean).map(|(&v, &m)| v - m).collect();
        for i in 0..d {
            for j in i..d {
                covariance[i * d + j] += centered[i] * centered[j] * denom;
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            covariance[i * d + j] = covariance[j * d + i];
        }
    }

    let eig = linalg::sym_eigen(&covariance, d);
    let total: T = eig.values.iter().map(|&v| v.max(T::zero())).sum();
    if total <= T::zero() {
        return Err(Error::Pca("zero-variance trajectory".into()));
    }
    let mut components = [eig.vectors[0].clone(), eig.vectors[1].clone()];
    for component in components.iter_mut() {
        fix_sign(component);
    }
    let ratio = |v: T| v.max(T::zero()) / total;
    Ok(PcaModel {
        mean,
        explained_variance_ratio: [ratio(eig.values[0]), ratio(eig.values[1])],
        components,
    })
}

/// Flips the component so its largest-magnitude entry (lowest index on
/// ties) is positive.
fn fix_sign<T: Scalar>(component: &mut [T]) {
    let mut best = 0usize;
    for (i, v) in component.iter().enumerate() {
        if v.abs() > component[best].abs() {
            best = i;
        }
    }
    if component[best] < T::zero() {
        for v in component.iter_mut() {
            *v = -*v;
        }
    }
}

impl<T: Scalar> PcaModel<T> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Coordinates of `theta` in the component plane:
    /// `c_i = e_i . (theta - mean)`.
    pub fn project(&self, theta: &[T]) -> Result<(T, T)> {
        if theta.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        let mut c = [T::zero(); 2];
        for (k, component) in self.components.iter().enumerate() {
            c[k] = component
                .iter()
                .zip(theta.iter().zip(&self.mean))
                .map(|(&e, (&t, &m))| e * (t - m))
                .sum();
        }
        Ok((c[0], c[1]))
    }

    /// The parameter vector at plane coordinates `(c0, c1)`.
    pub fn point_at(&self, c0: T, c1: T) -> Vec<T> {
        self.mean
            .iter()
            .zip(self.components[0].iter().zip(&self.components[1]))
            .map(|(&m, (&e0, &e1))| m + c0 * e0 + c1 * e1)
            .collect()
    }

    /// Entrywise `|e_0|`: each parameter's contribution to the first
    /// component.
    pub fn loadings(&self) -> Vec<T> {
        self.components[0].iter().map(|v| v.abs()).collect()
    }
}

/// Component-plane intervals to scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRanges<T> {
    pub c0: (T, T),
    pub c1: (T, T),
}

impl<T: Scalar> ScanRanges<T> {
    /// `[-half, half]` on both axes.
    pub fn symmetric(half: T) -> Self {
        Self {
            c0: (-half, half),
            c1: (-half, half),
        }
    }
}

/// Loss values over the component plane plus the projected trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrid<T> {
    pub c0_axis: Vec<T>,
    pub c1_axis: Vec<T>,
    /// Row-major: `values[i0 * c1_axis.len() + i1]`.
    pub values: Vec<T>,
    /// Trajectory steps projected into the plane, in step order.
    pub trajectory: Vec<(T, T)>,
}

impl<T: Scalar> LossGrid<T> {
    pub fn value_at(&self, i0: usize, i1: usize) -> T {
        self.values[i0 * self.c1_axis.len() + i1]
    }
}

/// Evaluates `loss_fn` at `mean + c0 e0 + c1 e1` over the grid and
/// projects the trajectory into the plane.
pub fn scan<T: Scalar>(
    model: &PcaModel<T>,
    trajectory: &Trajectory<T>,
    loss_fn: impl Fn(&[T]) -> Result<T>,
    ranges: &ScanRanges<T>,
    resolution: (usize, usize),
) -> Result<LossGrid<T>> {
    if resolution.0 < 2 || resolution.1 < 2 {
        return Err(Error::Config(format!(
            "scan resolution {}x{} must be at least 2 per axis",
            resolution.0, resolution.1
        )));
    }
    let axis = |range: (T, T), n: usize| -> Vec<T> {
        let step = (range.1 - range.0) / T::of((n - 1) as f64);
        (0..n).map(|i| range.0 + step * T::of(i as f64)).collect()
    };
    let c0_axis = axis(ranges.c0, resolution.0);
    let c1_axis = axis(ranges.c1, resolution.1);

    let mut values = Vec::with_capacity(resolution.0 * resolution.1);
    for &c0 in &c0_axis {
        for &c1 in &c1_axis {
            values.push(loss_fn(&model.point_at(c0, c1))?);
        }
    }
    let projected = trajectory
        .steps()
        .iter()
        .map(|step| model.project(step))
        .collect::<Result<Vec<_>>>()?;
    Ok(LossGrid {
        c0_axis,
        c1_axis,
        values,
        trajectory: projected,
    })
}

/// [`scan`] wired to the classifier's dataset loss.
pub fn scan_classifier<T: Scalar>(
    ctx: &EvalContext<T>,
    template: &CircuitTemplate<T>,
    data: &[Sample<T>],
    model: &PcaModel<T>,
    trajectory: &Trajectory<T>,
    ranges: &ScanRanges<T>,
    resolution: (usize, usize),
) -> Result<LossGrid<T>> {
    scan(
        model,
        trajectory,
        |theta| ctx.dataset_loss(template, theta, data),
        ranges,
        resolution,
    )
}

/// Maximum perpendicular deviation of the projected path from the straight
/// line joining its first and last points. Zero means the optimization
/// path is exactly linear in the plane.
pub fn path_linearity<T: Scalar>(projected: &[(T, T)]) -> T {
    if projected.len() < 2 {
        return T::zero();
    }
    let (x0, y0) = projected[0];
    let (x1, y1) = *projected.last().expect("non-empty");
    let dx = x1 - x0;
    let dy = y1 - y0;
    let norm = (dx * dx + dy * dy).sqrt();
    let mut worst = T::zero();
    for &(x, y) in projected {
        let deviation = if norm <= T::epsilon() {
            ((x - x0) * (x - x0) + (y - y0) * (y - y0)).sqrt()
        } else {
            (dx * (y - y0) - dy * (x - x0)).abs() / norm
        };
        if deviation > worst {
            worst = deviation;
        }
    }
    worst
}

/// Grid CSV: `c0,c1,loss` per cell.
pub fn write_grid_csv<T: Scalar, W: Write>(grid: &LossGrid<T>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "c0,c1,loss")?;
    for (i0, &c0) in grid.c0_axis.iter().enumerate() {
        for (i1, &c1) in grid.c1_axis.iter().enumerate() {
            writeln!(out, "{c0},{c1},{}", grid.value_at(i0, i1))?;
        }
    }
    Ok(())
}

/// Trajectory overlay CSV: `step,c0,c1,loss` per recorded epoch.
pub fn write_overlay_csv<T: Scalar, W: Write>(
    grid: &LossGrid<T>,
    trajectory: &Trajectory<T>,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "step,c0,c1,loss")?;
    for (step, (&(c0, c1), &loss)) in grid
        .trajectory
        .iter()
        .zip(trajectory.losses())
        .enumerate()
    {
        writeln!(out, "{step},{c0},{c1},{loss}")?;
    }
    Ok(())
}

/// Model JSON: mean, components, variance ratios, and loadings.
pub fn model_json<T: Scalar + Serialize>(model: &PcaModel<T>) -> Result<String> {
    #[derive(Serialize)]
    struct ModelDoc<'a, T> {
        mean: &'a [T],
        components: &'a [Vec<T>; 2],
        explained_variance_ratio: &'a [T; 2],
        loadings: Vec<T>,
    }
    Ok(serde_json::to_string_pretty(&ModelDoc {
        mean: &model.mean,
        components: &model.components,
        explained_variance_ratio: &model.explained_variance_ratio,
        loadings: model.loadings(),
    })?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_trajectory(direction: &[f64], steps: usize) -> Trajectory<f64> {
        let mut t = Trajectory::new();
        for k in 0..steps {
            let theta: Vec<f64> = direction.iter().map(|&u| u * k as f64).collect();
            t.push(theta, 0.0).unwrap();
        }
        t
    }

    #[test]
    fn one_dimensional_motion_is_fully_explained() {
        let u = [0.6f64, 0.0, -0.8, 0.0];
        let trajectory = line_trajectory(&u, 10);
        let model = fit_pca(&trajectory).unwrap();
        assert!((model.explained_variance_ratio[0] - 1.0).abs() < 1e-10);
        assert!(model.explained_variance_ratio[1].abs() < 1e-10);
        // Direction recovered up to sign; the convention fixes the sign by
        // making the largest-magnitude entry (|-0.8| here) positive.
        let dot: f64 = model.components[0].iter().zip(&u).map(|(a, b)| a * b).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-10, "dot {dot}");
        assert!(model.components[0][2] > 0.0);
        for (a, b) in model.components[0].iter().zip(&u) {
            assert!((a + b).abs() < 1e-10, "component {a} direction {b}");
        }
    }

    #[test]
    fn components_are_orthonormal_and_ratios_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let mut trajectory = Trajectory::new();
        for _ in 0..40 {
            trajectory
                .push((0..6).map(|_| rng.gen_range(-1.0..1.0)).collect(), 0.0)
                .unwrap();
        }
        let model = fit_pca(&trajectory).unwrap();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm(&model.components[0]) - 1.0).abs() < 1e-10);
        assert!((norm(&model.components[1]) - 1.0).abs() < 1e-10);
        let dot: f64 = model.components[0]
            .iter()
            .zip(&model.components[1])
            .map(|(a, b)| a * b)
            .sum();
        assert!(dot.abs() < 1e-10);
        assert!(model.explained_variance_ratio[0] >= model.explained_variance_ratio[1]);
        let sum = model.explained_variance_ratio[0] + model.explained_variance_ratio[1];
        assert!(sum <= 1.0 + 1e-10);

        // Deterministic refit.
        let again = fit_pca(&trajectory).unwrap();
        assert_eq!(model, again);
    }

    #[test]
    fn isotropic_cloud_splits_variance_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let mut trajectory = Trajectory::new();
        for _ in 0..1000 {
            trajectory
                .push(vec![rng.gen_range(-1.0f64..1.0), rng.gen_range(-1.0..1.0)], 0.0)
                .unwrap();
        }
        let model = fit_pca(&trajectory).unwrap();
        assert!((model.explained_variance_ratio[0] - 0.5).abs() < 0.05);
        assert!((model.explained_variance_ratio[1] - 0.5).abs() < 0.05);
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        let mut short = Trajectory::new();
        short.push(vec![0.0, 0.0], 0.0).unwrap();
        short.push(vec![1.0, 0.0], 0.0).unwrap();
        assert!(fit_pca(&short).is_err());

        let narrow = line_trajectory(&[1.0], 5);
        assert!(fit_pca(&narrow).is_err());

        let mut flat = Trajectory::new();
        for _ in 0..5 {
            flat.push(vec![0.3, 0.7], 0.0).unwrap();
        }
        assert!(fit_pca(&flat).is_err());
    }

    #[test]
    fn ratios_match_power_iteration_oracle() {
        // Independent route: power iteration with deflation on the sample
        // covariance.
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let d = 6usize;
        let steps: Vec<Vec<f64>> = (0..40)
            .map(|k| {
                (0..d)
                    .map(|j| (k as f64 * 0.1 * (j + 1) as f64).sin() + 0.1 * rng.gen::<f64>())
                    .collect()
            })
            .collect();
        let mut trajectory = Trajectory::new();
        for s in &steps {
            trajectory.push(s.clone(), 0.0).unwrap();
        }
        let model = fit_pca(&trajectory).unwrap();

        let t = steps.len() as f64;
        let mean: Vec<f64> = (0..d)
            .map(|j| steps.iter().map(|s| s[j]).sum::<f64>() / t)
            .collect();
        let mut cov = vec![0.0f64; d * d];
        for s in &steps {
            for i in 0..d {
                for j in 0..d {
                    cov[i * d + j] += (s[i] - mean[i]) * (s[j] - mean[j]) / (t - 1.0);
                }
            }
        }
        let total: f64 = (0..d).map(|i| cov[i * d + i]).sum();

        let mut deflated = cov.clone();
        let mut oracle = Vec::new();
        for _ in 0..2 {
            let mut v = vec![1.0f64; d];
            let mut lambda = 0.0;
            for _ in 0..2000 {
                let mut w = vec![0.0f64; d];
                for i in 0..d {
                    for j in 0..d {
                        w[i] += deflated[i * d + j] * v[j];
                    }
                }
                let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                v = w.iter().map(|x| x / norm).collect();
                lambda = norm;
            }
            oracle.push((lambda, v.clone()));
            for i in 0..d {
                for j in 0..d {
                    deflated[i * d + j] -= lambda * v[i] * v[j];
                }
            }
        }
        for k in 0..2 {
            let (lambda, v) = &oracle[k];
            assert!((model.explained_variance_ratio[k] - lambda / total).abs() < 1e-8);
            let dot: f64 = model.components[k].iter().zip(v).map(|(a, b)| a * b).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn projection_is_centered_linear_and_shape_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(89);
        let mut trajectory = Trajectory::new();
        for _ in 0..20 {
            trajectory
                .push((0..4).map(|_| rng.gen_range(-2.0..2.0)).collect(), 0.0)
                .unwrap();
        }
        let model = fit_pca(&trajectory).unwrap();

        let (c0, c1): (f64, f64) = model.project(&model.mean).unwrap();
        assert!(c0.abs() < 1e-12 && c1.abs() < 1e-12);

        let shifted: Vec<f64> = model
            .mean
            .iter()
            .zip(&model.components[0])
            .map(|(m, e)| m + e)
            .collect();
        let (c0, c1) = model.project(&shifted).unwrap();
        assert!((c0 - 1.0).abs() < 1e-12 && c1.abs() < 1e-12);

        // Linearity after centering.
        let v: Vec<f64> = (0..4).map(|i| 0.3 * (i as f64 + 1.0)).collect();
        let theta1: Vec<f64> = model.mean.iter().zip(&v).map(|(m, x)| m + x).collect();
        let theta2: Vec<f64> = model.mean.iter().zip(&v).map(|(m, x)| m + 2.0 * x).collect();
        let p1 = model.project(&theta1).unwrap();
        let p2 = model.project(&theta2).unwrap();
        assert!((p2.0 - 2.0 * p1.0).abs() < 1e-10);
        assert!((p2.1 - 2.0 * p1.1).abs() < 1e-10);

        assert!(model.project(&[0.0; 3]).is_err());
    }

    #[test]
    fn loadings_have_unit_norm_and_track_dominant_parameter() {
        // Coordinate 0 sweeps while the rest jitter at 1e-3.
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        let mut trajectory = Trajectory::new();
        for k in 0..30 {
            let mut theta = vec![k as f64 * 0.2, 0.0, 0.0, 0.0];
            for item in theta.iter_mut().skip(1) {
                *item = 1e-3 * rng.gen_range(-1.0..1.0);
            }
            trajectory.push(theta, 0.0).unwrap();
        }
        let model = fit_pca(&trajectory).unwrap();
        let loadings = model.loadings();
        let sumsq: f64 = loadings.iter().map(|x| x * x).sum();
        assert!((sumsq - 1.0).abs() < 1e-10);
        let max = loadings.iter().cloned().fold(0.0f64, f64::max);
        assert!(max >= 0.99);
        assert_eq!(loadings[0], max);
    }

    #[test]
    fn scan_evaluates_the_plane_and_matches_direct_loss() {
        // Trajectory confined to a 2-plane, so the final point lies in the
        // component span exactly.
        let e0 = [1.0f64, 0.0, 0.0, 0.0];
        let e1 = [0.0f64, 1.0, 0.0, 0.0];
        let mut trajectory = Trajectory::new();
        for k in 0..12 {
            let a = k as f64 * 0.3;
            let b = (k as f64 * 0.7).sin();
            let theta: Vec<f64> = (0..4).map(|i| a * e0[i] + b * e1[i]).collect();
            trajectory.push(theta, 0.0).unwrap();
        }
        let model = fit_pca(&trajectory).unwrap();
        let quadratic = |theta: &[f64]| Ok(theta.iter().map(|x| x * x).sum::<f64>());

        // Counting 2x2 scan.
        let count = std::cell::Cell::new(0usize);
        let counting = |theta: &[f64]| {
            count.set(count.get() + 1);
            quadratic(theta)
        };
        let ranges = ScanRanges::symmetric(1.0);
        let grid = scan(&model, &trajectory, counting, &ranges, (2, 2)).unwrap();
        assert_eq!(count.get(), 4);
        assert_eq!(grid.values.len(), 4);
        assert!(grid.values.iter().all(|&v| v >= 0.0));
        assert_eq!(grid.trajectory.len(), trajectory.len());

        // Grid node placed exactly at the projected final point.
        let last = trajectory.steps().last().unwrap();
        let (c0, c1) = model.project(last).unwrap();
        let ranges = ScanRanges {
            c0: (c0, c0 + 1.0),
            c1: (c1, c1 + 1.0),
        };
        let grid = scan(&model, &trajectory, quadratic, &ranges, (2, 2)).unwrap();
        let direct = last.iter().map(|x| x * x).sum::<f64>();
        assert!((grid.value_at(0, 0) - direct).abs() < 1e-10);

        assert!(scan(&model, &trajectory, quadratic, &ranges, (1, 2)).is_err());
    }

    #[test]
    fn scan_is_invariant_to_trajectory_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let steps: Vec<Vec<f64>> = (0..15)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut forward = Trajectory::new();
        let mut backward = Trajectory::new();
        for s in &steps {
            forward.push(s.clone(), 0.0).unwrap();
        }
        for s in steps.iter().rev() {
            backward.push(s.clone(), 0.0).unwrap();
        }
        let quadratic = |theta: &[f64]| Ok(theta.iter().map(|x| x * x).sum::<f64>());
        let ranges = ScanRanges::symmetric(1.0);
        let a = scan(&fit_pca(&forward).unwrap(), &forward, quadratic, &ranges, (5, 5)).unwrap();
        let b = scan(&fit_pca(&backward).unwrap(), &backward, quadratic, &ranges, (5, 5)).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn linearity_metric_is_zero_for_straight_paths() {
        let straight: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 2.0 * k as f64)).collect();
        assert!(path_linearity(&straight) < 1e-12);
        let bent = vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)];
        assert!(path_linearity(&bent) > 0.5);
    }

    #[test]
    fn emitters_produce_expected_headers() {
        let trajectory = {
            let mut t = Trajectory::new();
            for k in 0..5 {
                t.push(vec![k as f64, -(k as f64)], 0.1 * k as f64).unwrap();
            }
            t
        };
        let model = fit_pca(&trajectory).unwrap();
        let quadratic = |theta: &[f64]| Ok(theta.iter().map(|x| x * x).sum::<f64>());
        let grid = scan(&model, &trajectory, quadratic, &ScanRanges::symmetric(1.0), (3, 3)).unwrap();

        let mut buf = Vec::new();
        write_grid_csv(&grid, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("c0,c1,loss\n"));
        assert_eq!(text.lines().count(), 1 + 9);

        let mut buf = Vec::new();
        write_overlay_csv(&grid, &trajectory, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,c0,c1,loss\n"));
        assert_eq!(text.lines().count(), 1 + 5);

        let json = model_json(&model).unwrap();
        assert!(json.contains("explained_variance_ratio"));
        assert!(json.contains("loadings"));
    }
}
