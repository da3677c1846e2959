use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{Matrix, RandomSource};

pub const KMEANS_MAX_ITER: usize = 100;
pub const KMEANS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binarization {
    /// Cluster per point, 0 or 1.
    pub assignment: Vec<usize>,
    pub centroids: [Vec<f64>; 2],
    /// Within-cluster sum of squares after each assignment step.
    pub inertia: Vec<f64>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn farthest_from(points: &Matrix, from: &[f64]) -> (usize, f64) {
    points.row_iter().enumerate().fold((0, -1.0), |(bi, bd), (i, p)| {
        let d = dist2(p, from);
        if d > bd {
            (i, d)
        } else {
            (bi, bd)
        }
    })
}

/// Two-means with Lloyd's iterations. Initial centroids: a seeded random
/// point picks the farthest point `a`, and `b` is the point farthest from
/// `a`. When `disagreement` is given, clusters are oriented so that cluster
/// 1 has the higher mean disagreement.
pub fn kmeans_binarize(points: &Matrix, disagreement: Option<&[f64]>, seed: u64) -> Result<Binarization> {
    let m = points.rows();
    if m < 2 {
        return Err(Error::invalid(format!(
            "kmeans_binarize needs at least 2 points, got {m}"
        )));
    }
    if !points.is_finite() {
        return Err(Error::NonFinite("kmeans points".into()));
    }
    if let Some(d) = disagreement {
        if d.len() != m {
            return Err(Error::shape("kmeans_binarize (disagreement)", m, d.len()));
        }
    }
    let start = RandomSource::new(seed).index(m);
    let (a, _) = farthest_from(points, points.row(start));
    let (b, spread) = farthest_from(points, points.row(a));
    if spread == 0.0 {
        return Ok(Binarization {
            assignment: vec![0; m],
            centroids: [points.row(0).to_vec(), points.row(0).to_vec()],
            inertia: vec![0.0],
        });
    }
    let mut centroids = [points.row(a).to_vec(), points.row(b).to_vec()];
    let mut assignment = vec![0; m];
    let mut inertia = Vec::new();
    for _ in 0..KMEANS_MAX_ITER {
        let mut wcss = 0.0;
        for (i, p) in points.row_iter().enumerate() {
            let (d0, d1) = (dist2(p, &centroids[0]), dist2(p, &centroids[1]));
            assignment[i] = usize::from(d1 < d0);
            wcss += d0.min(d1);
        }
        inertia.push(wcss);
        let mut moved: f64 = 0.0;
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&[f64]> = points
                .row_iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == c)
                .map(|(p, _)| p)
                .collect();
            if members.is_empty() {
                continue;
            }
            let n = members.len() as f64;
            let next: Vec<f64> = (0..points.cols())
                .map(|j| members.iter().map(|p| p[j]).sum::<f64>() / n)
                .collect();
            moved = moved.max(dist2(&next, centroid).sqrt());
            *centroid = next;
        }
        if moved <= KMEANS_TOL {
            break;
        }
    }
    if let Some(d) = disagreement {
        let mean = |c: usize| {
            let (s, n) = d
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == c)
                .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
            if n == 0 {
                f64::NEG_INFINITY
            } else {
                s / n as f64
            }
        };
        if mean(0) > mean(1) {
            assignment.iter_mut().for_each(|a| *a = 1 - *a);
            centroids.swap(0, 1);
        }
    }
    Ok(Binarization {
        assignment,
        centroids,
        inertia,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn separated_points() {
        let b = kmeans_binarize(&col(&[0.0, 0.1, 5.0, 5.1]), None, 3).unwrap();
        assert_eq!(b.assignment[0], b.assignment[1]);
        assert_eq!(b.assignment[2], b.assignment[3]);
        assert_ne!(b.assignment[0], b.assignment[2]);
    }

    #[test]
    fn identical_points_single_cluster() {
        let b = kmeans_binarize(&Matrix::filled(5, 3, 1.5), None, 0).unwrap();
        assert_eq!(b.assignment, vec![0; 5]);
    }

    #[test]
    fn orientation_follows_disagreement() {
        let pts = col(&[0.0, 0.1, 5.0, 5.1]);
        for seed in 0..4 {
            let b = kmeans_binarize(&pts, Some(&[0.0, 0.0, 1.0, 1.0]), seed).unwrap();
            assert_eq!(b.assignment, vec![0, 0, 1, 1]);
            let b = kmeans_binarize(&pts, Some(&[1.0, 1.0, 0.0, 0.0]), seed).unwrap();
            assert_eq!(b.assignment, vec![1, 1, 0, 0]);
        }
    }

    #[test]
    fn inertia_non_increasing() {
        let mut rng = RandomSource::new(5);
        let pts = Matrix::from_fn(200, 3, |_, _| rng.gaussian());
        let b = kmeans_binarize(&pts, None, 1).unwrap();
        assert!(b.inertia.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{:?}", b.inertia);
    }

    #[test]
    fn too_few_points() {
        assert!(kmeans_binarize(&col(&[1.0]), None, 0).is_err());
    }
}
