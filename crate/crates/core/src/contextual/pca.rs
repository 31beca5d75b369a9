//! Principal component projection fitted on a subset of rows.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{CcError, Result};

/// Feature count above which the dense eigensolver gives way to power iteration.
pub const DENSE_EIGEN_LIMIT: usize = 2000;
const EIGEN_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenMethod {
    /// Dense solver up to [`DENSE_EIGEN_LIMIT`] features, power iteration beyond.
    #[default]
    Auto,
    Dense,
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `target_dim` rows of length `n`; rank-deficient tails are all zero.
    pub components: Vec<Vec<f64>>,
    /// Covariance eigenvalues matching `components`, descending.
    pub eigenvalues: Vec<f64>,
    /// Number of components backed by a non-negligible eigenvalue.
    pub rank: usize,
}

impl PcaModel {
    /// Fit on the rows of `x` (already restricted to the fitting subset).
    pub fn fit(x: ArrayView2<'_, f64>, target_dim: usize, method: EigenMethod) -> Result<Self> {
        let (m, n) = x.dim();
        if target_dim == 0 || target_dim > n {
            return Err(CcError::Argument(format!(
                "PCA target dimension {target_dim} outside [1, {n}]"
            )));
        }
        if m < 2 {
            return Err(CcError::Data(format!("PCA needs at least 2 fitting rows, got {m}")));
        }
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let centered = &x - &mean;
        let cov = centered.t().dot(&centered) / (m as f64 - 1.0);

        let use_dense = match method {
            EigenMethod::Auto => n <= DENSE_EIGEN_LIMIT,
            EigenMethod::Dense => true,
            EigenMethod::Power => false,
        };
        let mut pairs = if use_dense {
            dense_eigen(&cov)
        } else {
            power_eigen(cov, target_dim)
        };
        pairs.truncate(target_dim);

        let lead = pairs.first().map_or(0.0, |p| p.0.max(0.0));
        let mut components = Vec::with_capacity(target_dim);
        let mut eigenvalues = Vec::with_capacity(target_dim);
        let mut rank = 0;
        for (value, mut vector) in pairs {
            if value > EIGEN_TOL * lead.max(1.0) && lead > 0.0 {
                fix_sign(&mut vector);
                components.push(vector);
                eigenvalues.push(value);
                rank += 1;
            } else {
                break;
            }
        }
        if rank < target_dim {
            log::warn!(
                "PCA: numerical rank {rank} below target {target_dim}; padding with zero components"
            );
            while components.len() < target_dim {
                components.push(vec![0.0; n]);
                eigenvalues.push(0.0);
            }
        }
        Ok(PcaModel {
            mean: mean.to_vec(),
            components,
            eigenvalues,
            rank,
        })
    }

    pub fn target_dim(&self) -> usize {
        self.components.len()
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(CcError::Argument(format!(
                "PCA fitted on {} features, input has {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        let mean = Array1::from(self.mean.clone());
        let basis = Array2::from_shape_fn((self.mean.len(), self.target_dim()), |(i, j)| self.components[j][i]);
        Ok((&x - &mean).dot(&basis))
    }
}

/// Largest-magnitude coordinate made positive; first index wins ties.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn dense_eigen(cov: &Array2<f64>) -> Vec<(f64, Vec<f64>)> {
    let n = cov.nrows();
    let mat = DMatrix::from_fn(n, n, |i, j| cov[[i, j]]);
    let eig = SymmetricEigen::new(mat);
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|j| (eig.eigenvalues[j], eig.eigenvectors.column(j).iter().copied().collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

/// Leading `count` eigenpairs by power iteration with Hotelling deflation.
fn power_eigen(mut cov: Array2<f64>, count: usize) -> Vec<(f64, Vec<f64>)> {
    let n = cov.nrows();
    let mut out = Vec::with_capacity(count);
    for c in 0..count {
        // Deterministic, non-degenerate start.
        let mut v = Array1::from_shape_fn(n, |i| 1.0 + ((i * 7919 + c * 104_729) % 997) as f64 / 997.0);
        v /= v.dot(&v).sqrt();
        let mut value = 0.0;
        let mut converged = false;
        for _ in 0..POWER_MAX_ITERS {
            let w = cov.dot(&v);
            let norm = w.dot(&w).sqrt();
            if norm == 0.0 {
                value = 0.0;
                converged = true;
                break;
            }
            let next = &w / norm;
            let delta = (&next - &v).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
            value = next.dot(&cov.dot(&next));
            v = next;
            if delta < EIGEN_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            log::warn!("power iteration for component {c} stopped before reaching tolerance {EIGEN_TOL}");
        }
        let outer = v
            .view()
            .insert_axis(Axis(1))
            .dot(&v.view().insert_axis(Axis(0)));
        cov.scaled_add(-value, &outer);
        out.push((value, v.to_vec()));
    }
    out
}

/// Fit on `fit_rows` of `features`, project every row.
pub fn pca_reduce(features: ArrayView2<'_, f64>, fit_rows: &[usize], target_dim: usize) -> Result<(Array2<f64>, PcaModel)> {
    let train = features.select(Axis(0), fit_rows);
    let model = PcaModel::fit(train.view(), target_dim, EigenMethod::Auto)?;
    let reduced = model.transform(features)?;
    Ok((reduced, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(m: usize, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((m, n), |_| rng.random_range(-1.0..1.0))
    }

    /// Cyclic Jacobi rotations on a dense symmetric matrix; returns eigenvalues descending.
    fn jacobi_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
        let n = a.nrows();
        let mut a = a.clone();
        for _ in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[[i, j]].powi(2)).sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[[p, q]].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[[k, p]];
                        let akq = a[[k, q]];
                        a[[k, p]] = c * akp - s * akq;
                        a[[k, q]] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[[p, k]];
                        let aqk = a[[q, k]];
                        a[[p, k]] = c * apk - s * aqk;
                        a[[q, k]] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        ev
    }

    fn column_variances(z: &Array2<f64>) -> Vec<f64> {
        let m = z.nrows() as f64;
        let mean = z.mean_axis(Axis(0)).unwrap();
        (0..z.ncols())
            .map(|j| z.column(j).iter().map(|x| (x - mean[j]).powi(2)).sum::<f64>() / (m - 1.0))
            .collect()
    }

    #[test]
    fn variances_match_jacobi_oracle() {
        let x = random(30, 6, 1);
        let rows: Vec<usize> = (0..30).collect();
        let (z, model) = pca_reduce(x.view(), &rows, 6).unwrap();
        let centered = &x - &x.mean_axis(Axis(0)).unwrap();
        let cov = centered.t().dot(&centered) / 29.0;
        let oracle = jacobi_eigenvalues(&cov);
        for (j, (v, o)) in column_variances(&z).iter().zip(&oracle).enumerate() {
            assert!((v - o).abs() <= 1e-6 * o.abs(), "component {j}: {v} vs {o}");
            assert!((model.eigenvalues[j] - o).abs() <= 1e-6 * o.abs());
        }
    }

    #[test]
    fn exact_subspace_reconstructs() {
        let coeffs = random(40, 2, 2);
        let basis = random(2, 5, 3);
        let x = coeffs.dot(&basis) + 3.0;
        let rows: Vec<usize> = (0..40).collect();
        let (z, model) = pca_reduce(x.view(), &rows, 2).unwrap();
        let w = Array2::from_shape_fn((2, 5), |(i, j)| model.components[i][j]);
        let recon = z.dot(&w) + Array1::from(model.mean.clone());
        let err = (&recon - &x).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
        assert!(err < 1e-8, "reconstruction error {err}");
    }

    #[test]
    fn training_projections_are_uncorrelated() {
        let mut x = random(80, 8, 4);
        // Introduce correlation between columns.
        for i in 0..80 {
            x[[i, 1]] += 2.0 * x[[i, 0]];
            x[[i, 5]] -= x[[i, 3]];
        }
        let rows: Vec<usize> = (0..60).collect();
        let (z, _) = pca_reduce(x.view(), &rows, 5).unwrap();
        let zt = z.select(Axis(0), &rows);
        let c = &zt - &zt.mean_axis(Axis(0)).unwrap();
        let cov = c.t().dot(&c) / 59.0;
        let lead = cov[[0, 0]];
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert!(cov[[i, j]].abs() < 1e-6 * lead);
                }
            }
            if i > 0 {
                assert!(cov[[i, i]] <= cov[[i - 1, i - 1]] + 1e-12);
            }
        }
    }

    #[test]
    fn components_are_sign_fixed() {
        let x = random(25, 4, 5);
        let model = PcaModel::fit(x.view(), 4, EigenMethod::Dense).unwrap();
        for comp in &model.components {
            let big = comp.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn rank_deficiency_zero_pads() {
        let coeffs = random(10, 2, 6);
        let basis = random(2, 6, 7);
        let x = coeffs.dot(&basis);
        let model = PcaModel::fit(x.view(), 4, EigenMethod::Dense).unwrap();
        assert_eq!(model.rank, 2);
        assert!(model.components[2].iter().all(|&v| v == 0.0));
        let z = model.transform(x.view()).unwrap();
        assert!(z.column(3).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn power_iteration_agrees_with_dense() {
        let mut x = random(50, 7, 8);
        for (j, mut col) in x.columns_mut().into_iter().enumerate() {
            col *= 1.0 + j as f64;
        }
        let dense = PcaModel::fit(x.view(), 3, EigenMethod::Dense).unwrap();
        let power = PcaModel::fit(x.view(), 3, EigenMethod::Power).unwrap();
        for j in 0..3 {
            assert!((dense.eigenvalues[j] - power.eigenvalues[j]).abs() < 1e-8 * dense.eigenvalues[0]);
            for (a, b) in dense.components[j].iter().zip(&power.components[j]) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn bad_target_rejected() {
        let x = random(10, 3, 9);
        assert!(matches!(PcaModel::fit(x.view(), 4, EigenMethod::Auto), Err(CcError::Argument(_))));
        assert!(matches!(PcaModel::fit(x.view(), 0, EigenMethod::Auto), Err(CcError::Argument(_))));
    }
}
