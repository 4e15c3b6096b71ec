//! Access-block placement and coverage verification.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::blocks::BlockGrid;
use crate::error::{Error, Result};
use crate::geom::{center_block, footprint_intersects, pixel_to_sphere, viewport_footprint, Direction, ViewportSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessStrategy {
    Fixed,
    Content,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccessBlockSet {
    /// Ascending block indices.
    pub blocks: Vec<usize>,
    pub strategy: AccessStrategy,
    pub signaling_bits: usize,
}

impl AccessBlockSet {
    pub fn new(mut blocks: Vec<usize>, strategy: AccessStrategy, num_blocks: usize) -> Self {
        blocks.sort_unstable();
        blocks.dedup();
        let signaling_bits = match strategy {
            AccessStrategy::Fixed => 0,
            AccessStrategy::Content => content_signaling_bits(blocks.len(), num_blocks),
        };
        Self { blocks, strategy, signaling_bits }
    }

    pub fn contains(&self, b: usize) -> bool {
        self.blocks.binary_search(&b).is_ok()
    }

    pub fn mask(&self, num_blocks: usize) -> Vec<bool> {
        let mut m = vec![false; num_blocks];
        for &b in &self.blocks {
            m[b] = true;
        }
        m
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Position signalling for content-based sets: (1 + |A|) * ceil(log2 N).
pub fn content_signaling_bits(count: usize, num_blocks: usize) -> usize {
    let lg = (num_blocks.max(2) as f64).log2().ceil() as usize;
    (1 + count) * lg
}

/// Latitude/longitude steps of the placement sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sweep {
    pub d_lon: f64,
    pub d_lat: f64,
}

impl Sweep {
    /// A quarter of the field of view along each axis.
    pub fn for_template(t: &ViewportSpec) -> Self {
        if t.is_full_sphere() {
            return Self { d_lon: PI / 2.0, d_lat: PI / 2.0 };
        }
        Self { d_lon: t.fov_h / 4.0, d_lat: t.fov_v / 4.0 }
    }

    pub fn degrees(step: f64) -> Self {
        Self { d_lon: step.to_radians(), d_lat: step.to_radians() }
    }

    /// Directions in sweep order: latitude ascending from the south pole,
    /// longitude ascending from -pi.
    pub fn directions(&self) -> Vec<Direction> {
        let mut out = Vec::new();
        let nlat = ((PI / self.d_lat) + 1e-9).floor() as usize;
        let nlon = ((2.0 * PI / self.d_lon) - 1e-9).ceil() as usize;
        for i in 0..=nlat {
            let lat = (-FRAC_PI_2 + i as f64 * self.d_lat).min(FRAC_PI_2);
            for j in 0..nlon {
                let lon = -PI + j as f64 * self.d_lon;
                out.push(Direction { longitude: lon, latitude: lat });
            }
        }
        out
    }

    fn validate(&self, t: &ViewportSpec) -> Result<()> {
        if !(self.d_lon > 0.0 && self.d_lat > 0.0) {
            return Err(Error::StepTooCoarse("steps must be positive".into()));
        }
        if !t.is_full_sphere() {
            let limit = t.fov_h.min(t.fov_v) / 2.0;
            if self.d_lon > limit + 1e-12 || self.d_lat > limit + 1e-12 {
                return Err(Error::StepTooCoarse(format!(
                    "steps ({:.4}, {:.4}) exceed half the field of view ({limit:.4})",
                    self.d_lon, self.d_lat
                )));
            }
        }
        Ok(())
    }
}

/// Greedy sweep: whenever a viewport sees no access block, the block under
/// its centre becomes one.
pub fn place_fixed(grid: &BlockGrid, template: &ViewportSpec, sweep: Sweep) -> Result<AccessBlockSet> {
    sweep.validate(template)?;
    let (w, h, bs) = (grid.width(), grid.height(), grid.block_size);
    let mut mask = vec![false; grid.len()];
    for d in sweep.directions() {
        let spec = template.with_direction(d);
        if !footprint_intersects(&spec, w, h, bs, &mask) {
            mask[center_block(&spec, w, h, bs)] = true;
        }
    }
    let blocks = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
    Ok(AccessBlockSet::new(blocks, AccessStrategy::Fixed, grid.len()))
}

/// Direction of a block's centre.
pub fn block_direction(grid: &BlockGrid, b: usize) -> Direction {
    let (r, c) = grid.row_col(b);
    let half = grid.block_size as f64 / 2.0;
    pixel_to_sphere(
        (c * grid.block_size) as f64 + half,
        (r * grid.block_size) as f64 + half,
        grid.width(),
        grid.height(),
    )
}

/// As [`place_fixed`], but coverage is judged on the central region of the
/// view and an uncovered viewport adds the cheapest block of that region
/// (ties: closest to the viewport centre, then lowest index).
pub fn place_content(grid: &BlockGrid, template: &ViewportSpec, costs: &[f64], sweep: Sweep) -> Result<AccessBlockSet> {
    sweep.validate(template)?;
    if costs.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!("{} costs for {} blocks", costs.len(), grid.len())));
    }
    let (w, h, bs) = (grid.width(), grid.height(), grid.block_size);
    let mut mask = vec![false; grid.len()];
    for d in sweep.directions() {
        let spec = template.with_direction(d);
        // coverage and candidates use the central part of the view, so that
        // directions between lattice points still see the chosen block
        let inner = if spec.is_full_sphere() {
            spec
        } else {
            ViewportSpec {
                fov_h: spec.fov_h - 2.0 * sweep.d_lon.min(spec.fov_h / 4.0),
                fov_v: spec.fov_v - 2.0 * sweep.d_lat.min(spec.fov_v / 4.0),
                ..spec
            }
        };
        if footprint_intersects(&inner, w, h, bs, &mask) {
            continue;
        }
        let fp = viewport_footprint(&inner, w, h, bs)?;
        let pick = fp
            .iter()
            .copied()
            .min_by(|&a, &b| {
                costs[a]
                    .total_cmp(&costs[b])
                    .then(block_direction(grid, a).angle_to(&d).total_cmp(&block_direction(grid, b).angle_to(&d)))
                    .then(a.cmp(&b))
            })
            .expect("footprints are never empty");
        mask[pick] = true;
    }
    let blocks = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
    Ok(AccessBlockSet::new(blocks, AccessStrategy::Content, grid.len()))
}

/// Signalling plus the independent cost of every access block.
pub fn content_total_cost(set: &AccessBlockSet, costs: &[f64], num_blocks: usize) -> f64 {
    content_signaling_bits(set.len(), num_blocks) as f64 + set.blocks.iter().map(|&b| costs[b]).sum::<f64>()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintReport {
    pub satisfied: bool,
    pub checked: usize,
    pub uncovered: usize,
    pub first_violation: Option<Direction>,
}

/// Checks every direction of the sweep lattice for an access block in view.
pub fn check_constraint(
    set: &AccessBlockSet,
    grid: &BlockGrid,
    template: &ViewportSpec,
    sweep: Sweep,
) -> ConstraintReport {
    let (w, h, bs) = (grid.width(), grid.height(), grid.block_size);
    let mask = set.mask(grid.len());
    let mut report = ConstraintReport { satisfied: true, checked: 0, uncovered: 0, first_violation: None };
    for d in sweep.directions() {
        report.checked += 1;
        if !footprint_intersects(&template.with_direction(d), w, h, bs, &mask) {
            report.satisfied = false;
            report.uncovered += 1;
            report.first_violation.get_or_insert(d);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn template(res: usize) -> ViewportSpec {
        ViewportSpec { vp_width: res, vp_height: res, ..ViewportSpec::default_at(Direction::new(0.0, 0.0)) }
    }

    #[test]
    fn full_sphere_needs_one_block() {
        let g = BlockGrid::new(512, 256, 32).unwrap();
        let a = place_fixed(&g, &ViewportSpec::full_sphere(), Sweep::degrees(30.0)).unwrap();
        assert_eq!(a.len(), 1);
    }

    #[test]
    fn coarse_step_rejected() {
        let g = BlockGrid::new(512, 256, 32).unwrap();
        assert!(matches!(place_fixed(&g, &template(32), Sweep::degrees(60.0)), Err(Error::StepTooCoarse(_))));
    }

    /// Independent greedy sweep using full footprints only.
    fn oracle_fixed(g: &BlockGrid, t: &ViewportSpec, step_deg: f64) -> Vec<usize> {
        let mut a: Vec<usize> = Vec::new();
        let mut i = 0;
        let step = step_deg.to_radians();
        loop {
            let lat = -FRAC_PI_2 + i as f64 * step;
            if lat > FRAC_PI_2 + 1e-9 {
                break;
            }
            let mut j = 0;
            loop {
                let lon = -PI + j as f64 * step;
                if lon >= PI - 1e-9 {
                    break;
                }
                let spec = t.with_direction(Direction { longitude: lon, latitude: lat.min(FRAC_PI_2) });
                let fp = viewport_footprint(&spec, g.width(), g.height(), g.block_size).unwrap();
                if !fp.iter().any(|b| a.contains(b)) {
                    let (x, y) = crate::geom::sphere_to_pixel(spec.direction, g.width(), g.height());
                    a.push(crate::geom::block_of(x, y, g.width(), g.height(), g.block_size));
                }
                j += 1;
            }
            i += 1;
        }
        a.sort();
        a
    }

    #[test]
    fn fixed_matches_oracle_and_is_deterministic() {
        let g = BlockGrid::new(512, 256, 32).unwrap();
        let t = template(48);
        let a = place_fixed(&g, &t, Sweep::degrees(15.0)).unwrap();
        assert_eq!(a.blocks, oracle_fixed(&g, &t, 15.0));
        assert_eq!(a, place_fixed(&g, &t, Sweep::degrees(15.0)).unwrap());
        assert_eq!(a.signaling_bits, 0);
        let report = check_constraint(&a, &g, &t, Sweep::degrees(7.5));
        assert!(report.satisfied, "{report:?}");
    }

    #[test]
    fn trivial_constraint_cases() {
        let g = BlockGrid::new(512, 256, 32).unwrap();
        let t = template(32);
        let all = AccessBlockSet::new((0..g.len()).collect(), AccessStrategy::Fixed, g.len());
        assert!(check_constraint(&all, &g, &t, Sweep::degrees(20.0)).satisfied);
        let none = AccessBlockSet::new(vec![], AccessStrategy::Fixed, g.len());
        let r = check_constraint(&none, &g, &t, Sweep::degrees(20.0));
        assert!(!r.satisfied);
        assert!(r.first_violation.is_some());
    }

    #[test]
    fn content_prefers_cheap_blocks() {
        let g = BlockGrid::new(512, 256, 32).unwrap();
        let t = template(48);
        let sweep = Sweep::for_template(&t);
        let uniform = vec![100.0; g.len()];
        let a = place_content(&g, &t, &uniform, sweep).unwrap();
        assert!(check_constraint(&a, &g, &t, Sweep { d_lon: sweep.d_lon / 2.0, d_lat: sweep.d_lat / 2.0 }).satisfied);
        let mut costs = uniform.clone();
        costs[g.index(4, 3)] = 1.0;
        let b = place_content(&g, &t, &costs, sweep).unwrap();
        assert!(b.contains(g.index(4, 3)));
        assert_eq!(b.signaling_bits, (1 + b.len()) * 7);
        let f = place_fixed(&g, &t, sweep).unwrap();
        // flat costs: signalling makes the content set at least as expensive
        let fixed_cost: f64 = f.blocks.iter().map(|&k| uniform[k]).sum();
        assert!(content_total_cost(&a, &uniform, g.len()) >= fixed_cost);
    }

    #[test]
    fn sweep_directions_cover_range() {
        let d = Sweep::degrees(45.0).directions();
        assert_eq!(d.len(), 5 * 8);
        assert!((d[0].latitude + FRAC_PI_2).abs() < 1e-12);
        assert!((d[0].longitude + PI).abs() < 1e-12);
        assert!((d.last().unwrap().latitude - FRAC_PI_2).abs() < 1e-12);
    }
}
