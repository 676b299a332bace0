use std::fmt::Write as _;

use super::hungarian::min_cost_assignment;
use crate::error::{Result, RivalError};
use crate::io::Raster;
use crate::latent::SeededRng;
use crate::par;

pub const DEFAULT_PALETTE_SIZE: usize = 10;
pub const DEFAULT_PALETTE_ITERS: usize = 50;

/// RGB colors with components in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Palette {
    pub colors: Vec<[f64; 3]>,
}

impl Palette {
    pub fn new(colors: Vec<[f64; 3]>) -> Result<Self> {
        if colors.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(RivalError::invalid("palette components must lie in [0, 1]"));
        }
        Ok(Palette { colors })
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    /// One `r g b` line per color, six decimals.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for [r, g, b] in &self.colors {
            let _ = writeln!(s, "{r:.6} {g:.6} {b:.6}");
        }
        s
    }
}

fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum()
}

fn nearest(p: &[f64; 3], centers: &[[f64; 3]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn assign(points: &[[f64; 3]], centers: &[[f64; 3]]) -> Vec<(usize, f64)> {
    par::map_indexed(points.len(), |i| nearest(&points[i], centers))
}

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance from the nearest chosen center.
pub fn kmeans_pp_init(points: &[[f64; 3]], k: usize, rng: &mut SeededRng) -> Vec<[f64; 3]> {
    let mut centers = vec![points[rng.below(points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = d2.iter().rposition(|&d| d > 0.0).unwrap_or(0);
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && *d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.below(points.len())
        };
        let c = points[pick];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centers.push(c);
    }
    centers
}

fn to_points(image: &Raster) -> Vec<[f64; 3]> {
    image.pixels().map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0]).collect()
}

/// Lloyd's k-means over pixel colors scaled to `[0, 1]`.
///
/// Stops after `iters` updates or when no assignment changes. Empty clusters
/// are re-seeded from the point farthest from its centroid.
pub fn kmeans_palette(image: &Raster, k: usize, rng: &mut SeededRng, iters: usize) -> Result<Palette> {
    if image.data.is_empty() {
        return Err(RivalError::invalid("palette of an empty image"));
    }
    if k == 0 {
        return Err(RivalError::invalid("palette size must be positive"));
    }
    let points = to_points(image);
    let raw: Vec<[u8; 3]> = image.pixels().collect();
    let mut distinct: Vec<[u8; 3]> = image.pixels().collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < k {
        log::warn!("image has {} distinct colors, fewer than k = {k}; centroids will repeat", distinct.len());
    }

    let mut centers = kmeans_pp_init(&points, k, rng);
    let mut labels = assign(&points, &centers);
    for _ in 0..iters {
        let mut sums = vec![[0u64; 3]; k];
        let mut counts = vec![0usize; k];
        for (p, (l, _)) in raw.iter().zip(&labels) {
            for i in 0..3 {
                sums[*l][i] += p[i] as u64;
            }
            counts[*l] += 1;
        }
        let mut taken: Vec<usize> = Vec::new();
        for c in 0..k {
            if counts[c] > 0 {
                let n = counts[c] as f64 * 255.0;
                centers[c] = sums[c].map(|v| v as f64 / n);
            } else {
                let far = labels
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !taken.contains(i))
                    .fold((0, f64::NEG_INFINITY), |best, (i, (_, d))| if *d > best.1 { (i, *d) } else { best })
                    .0;
                taken.push(far);
                centers[c] = points[far];
            }
        }
        let next = assign(&points, &centers);
        let changed = next.iter().zip(&labels).any(|(a, b)| a.0 != b.0);
        labels = next;
        if !changed {
            break;
        }
    }
    Palette::new(centers.into_iter().map(|c| c.map(|v| v.clamp(0.0, 1.0))).collect())
}

/// Minimum total L1 distance over perfect matchings of the two color sets.
pub fn palette_distance(p: &Palette, q: &Palette) -> Result<f64> {
    if p.len() != q.len() {
        return Err(RivalError::invalid(format!("palette sizes differ: {} vs {}", p.len(), q.len())));
    }
    let l1 = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|i| (a[i] - b[i]).abs()).sum::<f64>();
    let cost: Vec<Vec<f64>> = p.colors.iter().map(|a| q.colors.iter().map(|b| l1(a, b)).collect()).collect();
    let matching = min_cost_assignment(&cost);
    Ok(matching.iter().enumerate().map(|(i, &j)| cost[i][j]).sum())
}
