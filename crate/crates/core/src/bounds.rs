//! Sawtooth upper bounds over the occupancy simplex.
//!
//! A bound set holds corner values (upper bounds at point masses) and a list
//! of visited occupancies with their upper bounds. The sawtooth projection
//! interpolates between them; it is a valid upper bound for any convex
//! function that the corners and points bound.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::occupancy::Occupancy;

pub const DEFAULT_POINT_CAP: usize = 500;
const PROBE_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundPoint {
    pub occupancy: Occupancy,
    pub value: f64,
    /// Corner interpolation `y0` at the point, cached.
    pub corner_value: f64,
}

impl BoundPoint {
    /// `y0(eta^l) - v^l`, nonnegative.
    pub fn gap(&self) -> f64 {
        self.corner_value - self.value
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundPointSet {
    corners: Vec<f64>,
    points: Vec<BoundPoint>,
    cap: usize,
    prunes: u64,
}

/// `min_{e : eta_l(e) > 0} eta(e) / eta_l(e)`.
pub fn xi(eta: &Occupancy, eta_l: &Occupancy) -> f64 {
    let mut ratio = f64::INFINITY;
    for &(s, q) in eta_l.entries() {
        ratio = ratio.min(eta.get(s) / q);
        if ratio == 0.0 {
            break;
        }
    }
    if ratio.is_finite() {
        ratio
    } else {
        0.0
    }
}

impl BoundPointSet {
    pub fn new(corners: Vec<f64>) -> Self {
        Self::with_cap(corners, DEFAULT_POINT_CAP)
    }

    pub fn with_cap(corners: Vec<f64>, cap: usize) -> Self {
        BoundPointSet {
            corners,
            points: Vec::new(),
            cap: cap.max(1),
            prunes: 0,
        }
    }

    pub fn corners(&self) -> &[f64] {
        &self.corners
    }

    pub fn points(&self) -> &[BoundPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Corner interpolation `y0(eta) = sum_e eta(e) corner(e)`.
    pub fn y0(&self, eta: &Occupancy) -> f64 {
        eta.dot(&self.corners)
    }

    /// Largest correction `max_l gap_l * xi(eta, eta^l)` on a dense occupancy.
    fn correction_dense(&self, dense: &[f64]) -> f64 {
        let mut best: f64 = 0.0;
        for point in &self.points {
            let gap = point.gap();
            if gap <= best {
                continue;
            }
            let mut ratio = f64::INFINITY;
            for &(s, q) in point.occupancy.entries() {
                ratio = ratio.min(dense[s] / q);
                if gap * ratio <= best {
                    break;
                }
            }
            if ratio.is_finite() {
                best = best.max(gap * ratio);
            }
        }
        best
    }

    /// Sawtooth projection `y0(eta) - max_l (y0(eta^l) - v^l) xi(eta, eta^l)`.
    pub fn sawtooth(&self, eta: &Occupancy) -> f64 {
        let y0 = self.y0(eta);
        let mut best: f64 = 0.0;
        for point in &self.points {
            best = best.max(point.gap() * xi(eta, &point.occupancy));
        }
        y0 - best
    }

    /// Sawtooth projection of a dense occupancy vector.
    pub fn sawtooth_dense(&self, dense: &[f64]) -> f64 {
        let y0: f64 = dense.iter().zip(&self.corners).map(|(p, c)| p * c).sum();
        y0 - self.correction_dense(dense)
    }

    /// Component `swt^l(eta) = y0(eta) + max_{e in supp eta^l} eta(e)/eta^l(e) (v^l - y0(eta^l))`.
    pub fn component(&self, eta: &Occupancy, l: usize) -> Result<f64> {
        let point = self.points.get(l).ok_or(Error::PointOutOfRange {
            index: l,
            len: self.points.len(),
        })?;
        let delta = point.value - point.corner_value;
        let term = point
            .occupancy
            .entries()
            .iter()
            .map(|&(s, q)| eta.get(s) / q * delta)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(self.y0(eta) + term)
    }

    /// Inserts a visited occupancy with an upper bound on its value. Values not
    /// below the corner interpolation carry no information and are skipped.
    /// A near-duplicate keeps the smaller value. Returns whether the set changed.
    pub fn insert(&mut self, eta: Occupancy, value: f64) -> bool {
        let corner_value = self.y0(&eta);
        if value >= corner_value {
            return false;
        }
        if let Some(existing) = self.points.iter_mut().find(|p| p.occupancy.is_close(&eta)) {
            if value < existing.value {
                existing.value = value;
                return true;
            }
            return false;
        }
        self.points.push(BoundPoint {
            occupancy: eta,
            value,
            corner_value,
        });
        if self.points.len() > self.cap {
            self.prune();
        }
        true
    }

    /// Drops points that never attain the sawtooth minimum on a probe sample
    /// of random mixtures, then the least useful points until under the cap.
    fn prune(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5a17_0000 + self.prunes);
        self.prunes += 1;
        let len = self.points.len();
        let mut wins = vec![0usize; len];
        let size = self.corners.len();
        let mut dense = vec![0.0; size];
        for _ in 0..PROBE_SAMPLES {
            dense.iter_mut().for_each(|x| *x = 0.0);
            let picks = rng.gen_range(1..=3.min(len));
            let chosen = sample(&mut rng, len, picks);
            let weights: Vec<f64> = (0..picks).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = weights.iter().sum();
            for (idx, w) in chosen.iter().zip(&weights) {
                for &(s, q) in self.points[idx].occupancy.entries() {
                    dense[s] += q * w / total;
                }
            }
            let mut best = 0.0;
            let mut arg = None;
            for (l, point) in self.points.iter().enumerate() {
                let ratio = point
                    .occupancy
                    .entries()
                    .iter()
                    .map(|&(s, q)| dense[s] / q)
                    .fold(f64::INFINITY, f64::min);
                let c = point.gap() * ratio;
                if c > best {
                    best = c;
                    arg = Some(l);
                }
            }
            if let Some(l) = arg {
                wins[l] += 1;
            }
        }
        // Rank by wins, newer points first on ties; keep at most cap - cap/10
        // so pruning is not triggered on every insertion.
        let keep_max = (self.cap - self.cap / 10).max(1);
        let mut order: Vec<usize> = (0..len).filter(|&l| wins[l] > 0).collect();
        order.sort_by(|&a, &b| wins[b].cmp(&wins[a]).then(b.cmp(&a)));
        order.truncate(keep_max);
        order.sort_unstable();
        let old = std::mem::take(&mut self.points);
        self.points = old
            .into_iter()
            .enumerate()
            .filter(|(l, _)| order.binary_search(l).is_ok())
            .map(|(_, p)| p)
            .collect();
    }
}
