//! Random periodic fiber packings.
//!
//! Radii are drawn first and rescaled by one common factor so the analytic
//! fiber area matches the target fraction. Fibers are then placed by random
//! sequential adsorption; any fiber that finds no free spot is dropped in at
//! random and a stirring phase pushes overlapping pairs apart (with small
//! random kicks when the packing stalls) until every pair clears the gap.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{min_image, volume_fraction, Microstructure, Origin};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fiber {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberRveConfig {
    pub vof_target: f64,
    /// Mean fiber radius (μm).
    pub r_mean: f64,
    /// Radius standard deviation as a fraction of `r_mean`.
    pub r_std_frac: f64,
    /// Cell size (μm).
    pub domain: [f64; 2],
    pub resolution: [usize; 2],
    pub seed: u64,
    /// Minimum surface-to-surface distance as a fraction of `r_mean`.
    pub gap_frac: f64,
    /// Placement attempts per fiber during the adsorption phase.
    pub rsa_attempts: usize,
    /// Stirring sweep budget.
    pub max_sweeps: usize,
    /// Accepted rasterized fraction error.
    pub vof_tolerance: f64,
}

impl Default for FiberRveConfig {
    fn default() -> Self {
        Self {
            vof_target: 0.5,
            r_mean: 3.5,
            r_std_frac: 0.01,
            domain: [50.0, 50.0],
            resolution: [512, 512],
            seed: 0,
            gap_frac: 0.1,
            rsa_attempts: 500,
            max_sweeps: 20_000,
            vof_tolerance: 0.005,
        }
    }
}

impl FiberRveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.vof_target > 0.0 && self.vof_target <= 0.65) {
            return Err(Error::Config(format!(
                "vof_target must lie in (0, 0.65], got {}",
                self.vof_target
            )));
        }
        if self.resolution.iter().any(|&t| t < 32) {
            return Err(Error::Config(format!(
                "resolution must be >= 32 per axis, got {:?}",
                self.resolution
            )));
        }
        if !(self.r_mean > 0.0) || !(self.r_std_frac >= 0.0) || !(self.gap_frac >= 0.0) {
            return Err(Error::Config(
                "fiber radius, spread and gap must be non-negative".into(),
            ));
        }
        if self.domain.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Config(format!(
                "domain must be positive, got {:?}",
                self.domain
            )));
        }
        let widest =
            2.0 * self.r_mean * (1.0 + 3.0 * self.r_std_frac) + self.gap_frac * self.r_mean;
        if widest > self.domain[0].min(self.domain[1]) {
            return Err(Error::Config(format!(
                "fibers of radius {} do not fit a {:?} cell",
                self.r_mean, self.domain
            )));
        }
        if !(self.vof_tolerance > 0.0) {
            return Err(Error::Config("vof_tolerance must be > 0".into()));
        }
        Ok(())
    }
}

/// Pixel is fiber iff its center lies inside some disc under the minimum-image metric.
pub fn rasterize_fibers(fibers: &[Fiber], shape: [usize; 2], domain: [f64; 2]) -> Vec<u8> {
    let [t1, t2] = shape;
    let [l1, l2] = domain;
    let (h1, h2) = (l1 / t1 as f64, l2 / t2 as f64);
    let mut grid = vec![0u8; t1 * t2];
    for f in fibers {
        let r2 = f.r * f.r;
        // index window around the center, wrapped periodically
        let reach1 = (f.r / h1).ceil() as i64 + 1;
        let reach2 = (f.r / h2).ceil() as i64 + 1;
        let c1 = (f.x / h1).floor() as i64;
        let c2 = (f.y / h2).floor() as i64;
        let span1 = (2 * reach1 + 1).min(t1 as i64);
        let span2 = (2 * reach2 + 1).min(t2 as i64);
        for a in 0..span1 {
            let p = (c1 - reach1.min((t1 as i64 - 1) / 2) + a).rem_euclid(t1 as i64) as usize;
            let dx = min_image((p as f64 + 0.5) * h1 - f.x, l1);
            for b in 0..span2 {
                let q = (c2 - reach2.min((t2 as i64 - 1) / 2) + b).rem_euclid(t2 as i64) as usize;
                let dy = min_image((q as f64 + 0.5) * h2 - f.y, l2);
                if dx * dx + dy * dy < r2 {
                    grid[p * t2 + q] = 1;
                }
            }
        }
    }
    grid
}

/// Largest shortfall `r_i + r_j + gap − d_ij` over all pairs (≤ 0 when the packing is valid).
pub fn min_gap_violation(fibers: &[Fiber], domain: [f64; 2], gap: f64) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..fibers.len() {
        for j in (i + 1)..fibers.len() {
            let (a, b) = (&fibers[i], &fibers[j]);
            let d = pair_distance(a, b, domain);
            worst = worst.max(a.r + b.r + gap - d);
        }
    }
    worst
}

fn pair_vector(a: &Fiber, b: &Fiber, domain: [f64; 2]) -> (f64, f64) {
    (
        min_image(b.x - a.x, domain[0]),
        min_image(b.y - a.y, domain[1]),
    )
}

fn pair_distance(a: &Fiber, b: &Fiber, domain: [f64; 2]) -> f64 {
    let (dx, dy) = pair_vector(a, b, domain);
    (dx * dx + dy * dy).sqrt()
}

fn wrap(v: f64, l: f64) -> f64 {
    let w = v.rem_euclid(l);
    if w >= l {
        0.0
    } else {
        w
    }
}

fn sample_radii(cfg: &FiberRveConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let area = cfg.domain[0] * cfg.domain[1];
    let mean_area = PI * cfg.r_mean * cfg.r_mean * (1.0 + cfg.r_std_frac * cfg.r_std_frac);
    let n = ((cfg.vof_target * area / mean_area).round() as usize).max(1);
    let mut radii: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            cfg.r_mean * (1.0 + cfg.r_std_frac * z.clamp(-3.0, 3.0))
        })
        .collect();
    radii.sort_by(|a, b| b.total_cmp(a));
    radii
}

struct Packer<'a> {
    cfg: &'a FiberRveConfig,
    gap: f64,
    rng: ChaCha8Rng,
}

impl Packer<'_> {
    fn clears(&self, fibers: &[Fiber], cand: &Fiber) -> bool {
        fibers
            .iter()
            .all(|f| pair_distance(f, cand, self.cfg.domain) >= f.r + cand.r + self.gap)
    }

    fn adsorb(&mut self, radii: &[f64]) -> Vec<Fiber> {
        let [l1, l2] = self.cfg.domain;
        let mut fibers: Vec<Fiber> = Vec::with_capacity(radii.len());
        for &r in radii {
            let mut placed = None;
            for _ in 0..self.cfg.rsa_attempts {
                let cand = Fiber {
                    x: self.rng.random_range(0.0..l1),
                    y: self.rng.random_range(0.0..l2),
                    r,
                };
                if self.clears(&fibers, &cand) {
                    placed = Some(cand);
                    break;
                }
            }
            let f = placed.unwrap_or_else(|| Fiber {
                x: self.rng.random_range(0.0..l1),
                y: self.rng.random_range(0.0..l2),
                r,
            });
            fibers.push(f);
        }
        fibers
    }

    /// Pushes overlapping pairs apart until the packing is valid.
    fn stir(&mut self, fibers: &mut [Fiber]) -> Result<()> {
        let [l1, l2] = self.cfg.domain;
        let margin = 1e-6 * self.cfg.r_mean;
        let mut best = f64::INFINITY;
        let mut stalled = 0usize;
        for _ in 0..self.cfg.max_sweeps {
            let mut total = 0.0;
            for i in 0..fibers.len() {
                for j in (i + 1)..fibers.len() {
                    let (dx, dy) = pair_vector(&fibers[i], &fibers[j], self.cfg.domain);
                    let d = (dx * dx + dy * dy).sqrt();
                    let need = fibers[i].r + fibers[j].r + self.gap;
                    if d >= need {
                        continue;
                    }
                    let overlap = need - d;
                    total += overlap;
                    let (ux, uy) = if d > 0.0 {
                        (dx / d, dy / d)
                    } else {
                        let a: f64 = self.rng.random_range(0.0..2.0 * PI);
                        (a.cos(), a.sin())
                    };
                    let s = 0.5 * overlap + margin;
                    fibers[i].x = wrap(fibers[i].x - s * ux, l1);
                    fibers[i].y = wrap(fibers[i].y - s * uy, l2);
                    fibers[j].x = wrap(fibers[j].x + s * ux, l1);
                    fibers[j].y = wrap(fibers[j].y + s * uy, l2);
                }
            }
            if total == 0.0 {
                return Ok(());
            }
            if total < 0.999 * best {
                best = total;
                stalled = 0;
            } else {
                stalled += 1;
            }
            if stalled >= 20 {
                // random kick on every fiber
                let kick = 0.05 * self.cfg.r_mean;
                for f in fibers.iter_mut() {
                    f.x = wrap(f.x + self.rng.random_range(-kick..kick), l1);
                    f.y = wrap(f.y + self.rng.random_range(-kick..kick), l2);
                }
                stalled = 0;
                best = f64::INFINITY;
            }
        }
        Err(Error::Packing(format!(
            "{} fibers still overlap after {} stirring sweeps",
            fibers.len(),
            self.cfg.max_sweeps
        )))
    }
}

/// Generates a periodic random fiber packing and rasterizes it.
pub fn generate_fiber_rve(cfg: &FiberRveConfig) -> Result<Microstructure> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let area = cfg.domain[0] * cfg.domain[1];
    let target_area = cfg.vof_target * area;
    let radii = sample_radii(cfg, &mut rng);
    let drawn_area: f64 = radii.iter().map(|r| PI * r * r).sum();
    let mut scale = (target_area / drawn_area).sqrt();

    let gap = cfg.gap_frac * cfg.r_mean;
    let mut packer = Packer { cfg, gap, rng };
    let scaled: Vec<f64> = radii.iter().map(|r| r * scale).collect();
    let mut fibers = packer.adsorb(&scaled);
    packer.stir(&mut fibers)?;

    let mut grid = rasterize_fibers(&fibers, cfg.resolution, cfg.domain);
    let mut vof = volume_fraction(&grid);
    // pixelation bias correction: nudge the common radius factor and re-stir
    for _ in 0..8 {
        if (vof - cfg.vof_target).abs() <= 0.25 * cfg.vof_tolerance {
            break;
        }
        let factor = (cfg.vof_target / vof).sqrt();
        scale *= factor;
        for f in fibers.iter_mut() {
            f.r *= factor;
        }
        packer.stir(&mut fibers)?;
        grid = rasterize_fibers(&fibers, cfg.resolution, cfg.domain);
        vof = volume_fraction(&grid);
    }
    if (vof - cfg.vof_target).abs() > cfg.vof_tolerance {
        return Err(Error::Packing(format!(
            "rasterized fraction {vof:.4} misses target {:.4}",
            cfg.vof_target
        )));
    }

    let mut m = Microstructure::from_grid(
        cfg.resolution,
        cfg.domain,
        grid,
        cfg.seed,
        Origin::Fibers {
            vof_target: cfg.vof_target,
            r_mean: cfg.r_mean,
            r_std_frac: cfg.r_std_frac,
            gap,
            radius_scale: scale,
        },
    )?;
    m.fibers = Some(fibers);
    Ok(m)
}
