//! Scrambled Sobol points and RAASP (random axis-aligned subspace
//! perturbation) candidates.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng as ChaRng};
use crate::Matrix;

/// Standard deviation of the local perturbation.
pub const PERTURBATION_SD: f64 = 1e-3;
/// Expected number of perturbed coordinates in the subset half.
pub const SUBSET_TARGET_DIMS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    GlobalSobol,
    LocalAllDims,
    LocalSubset,
}

impl Origin {
    pub fn is_raasp(self) -> bool {
        !matches!(self, Origin::GlobalSobol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateBatch {
    pub points: Matrix,
    pub origin: Vec<Origin>,
}

impl CandidateBatch {
    pub fn len(&self) -> usize {
        self.origin.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origin.is_empty()
    }

    pub fn count(&self, tag: Origin) -> usize {
        self.origin.iter().filter(|o| **o == tag).count()
    }
}

/// `m` Owen-scrambled Sobol points in `[0,1)^d`.
///
/// Dimensions are generated in groups of four; each group draws from its own
/// scramble seed so arbitrarily many dimensions are available.
pub fn sobol(m: usize, d: usize, seed: u64) -> Matrix {
    assert!(m <= 1 << 16, "sobol sample index overflows the generator");
    let groups = d.div_ceil(4);
    let sets = sobol_burley::NUM_DIMENSION_SETS_4D;
    let group_seeds: Vec<u32> = (0..groups).map(|g| derive_seed(seed, &[g as u64]) as u32).collect();
    let mut out = Matrix::zeros(m, d);
    for i in 0..m {
        let row = out.row_mut(i);
        for (g, gs) in group_seeds.iter().enumerate() {
            let v = sobol_burley::sample_4d(i as u32, g as u32 % sets, *gs);
            for (k, vk) in v.iter().enumerate() {
                if let Some(slot) = row.get_mut(4 * g + k) {
                    *slot = *vk as f64;
                }
            }
        }
    }
    out
}

fn truncated_step<R: Rng + ?Sized>(base: f64, normal: &Normal<f64>, rng: &mut R) -> f64 {
    loop {
        let v = base + normal.sample(rng);
        if (0.0..=1.0).contains(&v) {
            return v;
        }
    }
}

/// Per-coordinate perturbation probability `min(1, 20/d)`.
pub fn subset_probability(d: usize) -> f64 {
    (SUBSET_TARGET_DIMS / d as f64).min(1.0)
}

/// `2m` local candidates around rows of `top_points`: `m` perturb every
/// coordinate, `m` perturb each coordinate with probability `min(1, 20/d)`
/// (at least one coordinate is always perturbed).
pub fn raasp_batch(top_points: &Matrix, m: usize, d: usize, seed: u64) -> Result<CandidateBatch> {
    if top_points.rows() == 0 {
        return Err(Error::Config("RAASP needs at least one incumbent to perturb".into()));
    }
    if top_points.cols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: top_points.cols() });
    }
    let mut rng = ChaRng::seed_from_u64(seed);
    let normal = Normal::new(0.0, PERTURBATION_SD).expect("valid sd");
    let p = subset_probability(d);
    let k = top_points.rows();
    let mut points = Matrix::zeros(2 * m, d);
    let mut origin = Vec::with_capacity(2 * m);
    for r in 0..2 * m {
        let base = top_points.row(rng.random_range(0..k));
        let row = points.row_mut(r);
        row.copy_from_slice(base);
        if r < m {
            for v in row.iter_mut() {
                *v = truncated_step(*v, &normal, &mut rng);
            }
            origin.push(Origin::LocalAllDims);
        } else {
            let mut any = false;
            for v in row.iter_mut() {
                if p >= 1.0 || rng.random::<f64>() < p {
                    *v = truncated_step(*v, &normal, &mut rng);
                    any = true;
                }
            }
            if !any {
                let j = rng.random_range(0..d);
                row[j] = truncated_step(row[j], &normal, &mut rng);
            }
            origin.push(Origin::LocalSubset);
        }
    }
    Ok(CandidateBatch { points, origin })
}

/// `2m` global Sobol rows, followed by `2m` RAASP rows when enabled.
pub fn assemble_candidates(
    top_points: &Matrix,
    m: usize,
    d: usize,
    raasp_enabled: bool,
    seed: u64,
) -> Result<CandidateBatch> {
    if m == 0 || d == 0 {
        return Err(Error::Config("candidate count and dimension must be at least 1".into()));
    }
    let mut points = sobol(2 * m, d, derive_seed(seed, &[0]));
    let mut origin = vec![Origin::GlobalSobol; 2 * m];
    if raasp_enabled {
        let local = raasp_batch(top_points, m, d, derive_seed(seed, &[1]))?;
        for row in local.points.iter_rows() {
            points.push_row(row);
        }
        origin.extend(local.origin);
    }
    Ok(CandidateBatch { points, origin })
}

/// Indices of the `max(1, ⌈fraction·n⌉)` smallest values, earliest index first
/// among ties.
pub fn best_indices(values: &[f64], fraction: f64) -> Vec<usize> {
    if values.is_empty() {
        return Vec::new();
    }
    let k = ((fraction * values.len() as f64).ceil() as usize).clamp(1, values.len());
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}
