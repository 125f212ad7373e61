//! Maximin Latin hypercube designs and accelerated-life-test transforms.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::{exp, ln, powf};
use crate::rng::Seed;

/// `n` runs in `[0, 1]^p`; column `c` places run `i` at level
/// `(2 perm[c][i] + 1) / (2n)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatinHypercube {
    pub n: usize,
    pub p: usize,
    /// Column-major level indices, each column a permutation of `0..n`.
    pub levels: Vec<Vec<usize>>,
}

impl LatinHypercube {
    pub fn from_levels(levels: Vec<Vec<usize>>) -> Result<Self> {
        let p = levels.len();
        let n = levels.first().map_or(0, Vec::len);
        let lh = Self { n, p, levels };
        if p == 0 || n == 0 {
            return Err(invalid("design needs at least one run and one factor"));
        }
        if !lh.is_latin() {
            return Err(invalid("every column must be a permutation of 0..n"));
        }
        Ok(lh)
    }

    pub fn is_latin(&self) -> bool {
        self.levels.len() == self.p
            && self.levels.iter().all(|col| {
                let mut seen = vec![false; self.n];
                col.len() == self.n && col.iter().all(|&l| l < self.n && !core::mem::replace(&mut seen[l], true))
            })
    }

    pub fn value(&self, run: usize, factor: usize) -> f64 {
        (2 * self.levels[factor][run] + 1) as f64 / (2 * self.n) as f64
    }

    /// Row-major points.
    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.p).map(|c| self.value(i, c)).collect()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiConfig {
    pub k: u32,
    pub m: f64,
}

impl Default for PhiConfig {
    fn default() -> Self {
        Self { k: 15, m: 2.0 }
    }
}

impl PhiConfig {
    fn validate(&self) -> Result<()> {
        if self.k < 1 || !(self.m >= 1.0) {
            return Err(invalid("phi criterion needs k >= 1 and m >= 1"));
        }
        Ok(())
    }
}

/// `m`-norm distance between two points.
pub fn distance(a: &[f64], b: &[f64], m: f64) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| powf((x - y).abs(), m)).sum();
    powf(s, 1.0 / m)
}

/// `(Σ_{i<j} d_ij^{-k})^{1/k}`, evaluated relative to the smallest distance
/// so large `k` does not overflow.
fn phi_from_distances(d: &[f64], k: u32) -> f64 {
    let dmin = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let kf = k as f64;
    let s: f64 = d.iter().map(|&x| powf(dmin / x, kf)).sum();
    powf(s, 1.0 / kf) / dmin
}

fn pair_distances(points: &[Vec<f64>], m: f64) -> Vec<f64> {
    let mut d = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d.push(distance(&points[i], &points[j], m));
        }
    }
    d
}

/// The φ criterion of an arbitrary point set (rows).
pub fn phi_of_points(points: &[Vec<f64>], config: PhiConfig) -> Result<f64> {
    config.validate()?;
    if points.len() < 2 {
        return Err(invalid("phi criterion needs at least two runs"));
    }
    let d = pair_distances(points, config.m);
    let mut idx = 0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if d[idx] == 0.0 {
                return Err(Error::DuplicateRows(i, j));
            }
            idx += 1;
        }
    }
    Ok(phi_from_distances(&d, config.k))
}

pub fn phi_criterion(design: &LatinHypercube, config: PhiConfig) -> Result<f64> {
    phi_of_points(&design.points(), config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmlhdResult {
    pub design: LatinHypercube,
    pub criterion: f64,
    /// Best-so-far criterion after each proposal (index 0 is the start).
    pub trace: Vec<f64>,
    pub seed: Seed,
    pub config: PhiConfig,
}

/// Fraction of early uphill moves the initial temperature should accept.
pub const INITIAL_ACCEPT: f64 = 0.4;
/// Final temperature as a fraction of the initial one.
pub const FINAL_TEMPERATURE_RATIO: f64 = 1e-3;

/// Simulated annealing over within-column swaps of a random Latin hypercube.
///
/// `budget` is the number of proposed swaps. The initial temperature is
/// set from 64 probe swaps so that a typical uphill move is accepted with
/// probability [`INITIAL_ACCEPT`]; cooling is geometric down to
/// [`FINAL_TEMPERATURE_RATIO`] of it at the end of the budget.
pub fn search_mmlhd(n: usize, p: usize, config: PhiConfig, seed: Seed, budget: usize) -> Result<MmlhdResult> {
    config.validate()?;
    if budget == 0 {
        return Err(Error::ZeroBudget);
    }
    if n < 2 || p < 1 {
        return Err(invalid("search needs n >= 2 and p >= 1"));
    }
    let mut rng = seed.rng();
    let mut levels: Vec<Vec<usize>> = (0..p)
        .map(|_| {
            let mut c: Vec<usize> = (0..n).collect();
            c.shuffle(&mut rng);
            c
        })
        .collect();
    let phi = |lv: &[Vec<usize>]| -> f64 {
        let pts: Vec<Vec<f64>> =
            (0..n).map(|i| lv.iter().map(|c| (2 * c[i] + 1) as f64 / (2 * n) as f64).collect()).collect();
        phi_from_distances(&pair_distances(&pts, config.m), config.k)
    };
    let mut current = phi(&levels);

    let propose = |rng: &mut rand_chacha::ChaCha20Rng| -> (usize, usize, usize) {
        let c = rng.random_range(0..p);
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        (c, i, j)
    };

    let mut uphill = Vec::new();
    for _ in 0..64 {
        let (c, i, j) = propose(&mut rng);
        levels[c].swap(i, j);
        let d = phi(&levels) - current;
        levels[c].swap(i, j);
        if d > 0.0 {
            uphill.push(d);
        }
    }
    let mean_up = if uphill.is_empty() { current * 1e-3 } else { uphill.iter().sum::<f64>() / uphill.len() as f64 };
    let mut temp = -mean_up / ln(INITIAL_ACCEPT);
    let cool = powf(FINAL_TEMPERATURE_RATIO, 1.0 / budget as f64);

    let mut best = levels.clone();
    let mut best_phi = current;
    let mut trace = Vec::with_capacity(budget + 1);
    trace.push(best_phi);
    for _ in 0..budget {
        let (c, i, j) = propose(&mut rng);
        levels[c].swap(i, j);
        let cand = phi(&levels);
        let delta = cand - current;
        let u: f64 = rng.random();
        if delta <= 0.0 || u < exp(-delta / temp) {
            current = cand;
            debug_assert!(LatinHypercube { n, p, levels: levels.clone() }.is_latin());
            if current < best_phi {
                best_phi = current;
                best.clone_from(&levels);
            }
        } else {
            levels[c].swap(i, j);
        }
        temp *= cool;
        trace.push(best_phi);
    }
    Ok(MmlhdResult { design: LatinHypercube { n, p, levels: best }, criterion: best_phi, trace, seed, config })
}

/// Boltzmann constant in eV/K.
pub const BOLTZMANN_EV: f64 = 8.617385e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AltSpec {
    /// Nominal and accelerated lifetimes.
    Lifetimes { l_nominal: f64, l_accelerated: f64 },
    /// Activation energy (eV) and temperatures (K).
    Arrhenius { ea: f64, t_use: f64, t_stress: f64 },
}

/// Ratio of nominal to accelerated time scales.
pub fn acceleration_factor(spec: AltSpec) -> Result<f64> {
    match spec {
        AltSpec::Lifetimes { l_nominal, l_accelerated } => {
            if !(l_nominal > 0.0 && l_accelerated > 0.0) || !(l_nominal / l_accelerated).is_finite() {
                return Err(invalid("lifetimes must be positive"));
            }
            Ok(l_nominal / l_accelerated)
        }
        AltSpec::Arrhenius { ea, t_use, t_stress } => {
            if !(ea > 0.0 && t_use > 0.0 && t_stress > 0.0) || !(ea.is_finite() && t_use.is_finite() && t_stress.is_finite()) {
                return Err(invalid("activation energy and temperatures must be positive"));
            }
            Ok(exp(ea / BOLTZMANN_EV * (1.0 / t_use - 1.0 / t_stress)))
        }
    }
}

/// Nominal-condition CDF `F_0(t) = F_s(t / A_F)` on an ascending grid.
pub fn transform_cdf<F: Fn(f64) -> f64>(stressed_cdf: F, af: f64, grid: &[f64]) -> Result<Vec<f64>> {
    if !(af > 0.0 && af.is_finite()) {
        return Err(invalid("acceleration factor must be positive"));
    }
    if grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(invalid("time grid must be ascending"));
    }
    Ok(grid.iter().map(|&t| stressed_cdf(t / af)).collect())
}
