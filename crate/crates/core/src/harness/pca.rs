use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Two-component projection of a set of vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    /// One `[pc1, pc2]` row per input vector, in input order.
    pub points: Vec<[f64; 2]>,
    /// Variance along each component (population, divided by N).
    pub explained_variance: [f64; 2],
    /// Unit eigenvectors in the input space.
    pub components: [Vec<f64>; 2],
    /// Set when the centered data has rank below two; missing components
    /// are zero.
    pub degenerate: bool,
}

/// Centers the columns, eigendecomposes the covariance and projects onto
/// the two leading eigenvectors. Each eigenvector is signed so that its
/// largest-magnitude entry is positive.
///
/// The covariance is `D x D` but has rank below `N`, so the work is done on
/// the `N x N` Gram matrix `X X^T` and mapped back with `v = X^T u / |X^T u|`.
pub fn pca_project(rows: &[Vec<f64>]) -> Result<PcaProjection> {
    let n = rows.len();
    if n < 3 {
        return Err(Error::Precondition(format!("PCA needs at least 3 vectors, got {n}")));
    }
    let d = rows[0].len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Shape("PCA rows must share a positive width".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("PCA input".into()));
    }
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
    let gram = &x * x.transpose();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let scale = eig.eigenvalues[order[0]].abs().max(f64::MIN_POSITIVE);
    let tol = scale * 1e-12 * n as f64;
    let mut components = [vec![0.0; d], vec![0.0; d]];
    let mut variance = [0.0; 2];
    let mut degenerate = false;
    for (k, &idx) in order.iter().take(2).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if !(lambda > tol) {
            degenerate = true;
            continue;
        }
        let u = eig.eigenvectors.column(idx);
        let mut v: Vec<f64> = (0..d).map(|j| (0..n).map(|i| x[(i, j)] * u[i]).sum()).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        fix_sign(&mut v);
        variance[k] = lambda / n as f64;
        components[k] = v;
    }
    let points = (0..n)
        .map(|i| {
            let p = |c: &[f64]| (0..d).map(|j| x[(i, j)] * c[j]).sum::<f64>();
            [p(&components[0]), p(&components[1])]
        })
        .collect();
    Ok(PcaProjection {
        points,
        explained_variance: variance,
        components,
        degenerate,
    })
}

/// Makes the largest-magnitude entry positive (first one on ties).
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, a) in v.iter().enumerate() {
        if a.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|a| *a = -*a);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Leading eigenvectors of the covariance by power iteration with
    /// deflation, computed directly in the input space.
    fn power_oracle(rows: &[Vec<f64>]) -> [Vec<f64>; 2] {
        let n = rows.len();
        let d = rows[0].len();
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
        let mut cov = vec![vec![0.0; d]; d];
        for r in rows {
            for a in 0..d {
                for b in 0..d {
                    cov[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]) / n as f64;
                }
            }
        }
        let mut out: [Vec<f64>; 2] = [vec![], vec![]];
        for slot in out.iter_mut() {
            let mut v: Vec<f64> = (0..d).map(|i| 1.0 + i as f64 * 0.01).collect();
            let mut lambda = 0.0;
            for _ in 0..20_000 {
                let w: Vec<f64> = (0..d).map(|a| (0..d).map(|b| cov[a][b] * v[b]).sum()).collect();
                let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
                let delta: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
                v = next;
                lambda = norm;
                if delta < 1e-15 {
                    break;
                }
            }
            fix_sign(&mut v);
            for a in 0..d {
                for b in 0..d {
                    cov[a][b] -= lambda * v[a] * v[b];
                }
            }
            *slot = v;
        }
        out
    }

    #[test]
    fn axis_aligned_points_project_to_themselves() {
        let rows = vec![vec![3.0, 0.5], vec![-3.0, 0.5], vec![1.0, -0.5], vec![-1.0, -0.5]];
        let p = pca_project(&rows).unwrap();
        assert!(!p.degenerate);
        assert!(p.explained_variance[0] >= p.explained_variance[1]);
        for (pt, r) in p.points.iter().zip(&rows) {
            assert!((pt[0].abs() - r[0].abs()).abs() < 1e-12);
            assert!((pt[1].abs() - r[1].abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_vectors_collapse_to_the_origin() {
        let p = pca_project(&vec![vec![1.5, -2.0, 7.0]; 4]).unwrap();
        assert!(p.degenerate);
        assert!(p.points.iter().all(|q| q == &[0.0, 0.0]));
    }

    #[test]
    fn collinear_vectors_fill_the_second_component_with_zeros() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 2.0 * i as f64, 0.0]).collect();
        let p = pca_project(&rows).unwrap();
        assert!(p.degenerate);
        assert!(p.points.iter().all(|q| q[1] == 0.0));
        assert!(p.explained_variance[0] > 0.0);
    }

    #[test]
    fn matches_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rows: Vec<Vec<f64>> = (0..5).map(|_| (0..20).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let p = pca_project(&rows).unwrap();
        let oracle = power_oracle(&rows);
        let mean: Vec<f64> = (0..20).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / 5.0).collect();
        for (i, r) in rows.iter().enumerate() {
            for k in 0..2 {
                let o: f64 = (0..20).map(|j| (r[j] - mean[j]) * oracle[k][j]).sum();
                assert!((p.points[i][k] - o).abs() < 1e-8, "row {i} pc {k}: {} vs {o}", p.points[i][k]);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(pca_project(&[vec![1.0], vec![2.0]]).is_err());
        assert!(pca_project(&[vec![1.0], vec![2.0, 3.0], vec![1.0]]).is_err());
        assert!(pca_project(&[vec![1.0], vec![f64::NAN], vec![1.0]]).is_err());
    }
}
