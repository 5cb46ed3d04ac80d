//! Synthetic orientation fields from a zero-pole singularity model.
//!
//! Cores act as zeros and deltas as poles of a rational complex function;
//! the ridge angle at `z` is
//!
//! ```text
//! θ(z) = θ∞ + ½·(Σ arg(z − core) − Σ arg(z − delta))   (mod π)
//! ```
//!
//! Field coordinates put cell `(row, col)` at `(x, y) = (col, row)`, with
//! `y` growing downward to match image orientation conventions.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::orientation::{normalize_angle, OrientationField};
use crate::ClassLabel;

/// Minimum distance between any two singularities, in cells.
pub const MIN_SEPARATION: f64 = 2.0;
/// Minimum singularity spacing in sampled layouts, as a fraction of the
/// shorter grid side.
pub const SAMPLED_SPACING: f64 = 0.2;
/// Background angles are drawn from `±BACKGROUND_SPREAD` around horizontal.
pub const BACKGROUND_SPREAD: f64 = PI / 12.0;
const CENTRAL_FRACTION: f64 = 0.6;
const MAX_DRAWS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("layout violates {class} constraints: {reason}")]
    Constraint { class: ClassLabel, reason: String },
    #[error("grid {rows}x{cols} is too small to place singularities")]
    GridTooSmall { rows: usize, cols: usize },
    #[error("noise sigma must be finite and non-negative, got {0}")]
    Noise(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularityLayout {
    pub cores: Vec<(f64, f64)>,
    pub deltas: Vec<(f64, f64)>,
    pub background_angle: f64,
}

impl SingularityLayout {
    pub fn arch(background_angle: f64) -> Self {
        Self {
            cores: Vec::new(),
            deltas: Vec::new(),
            background_angle,
        }
    }

    /// Checks the per-class singularity constraints.
    pub fn validate(&self, class: ClassLabel) -> Result<(), SynthError> {
        let fail = |reason: String| Err(SynthError::Constraint { class, reason });
        let (nc, nd) = (self.cores.len(), self.deltas.len());
        let want = match class {
            ClassLabel::A => (0, 0),
            ClassLabel::L | ClassLabel::R => (1, 1),
            ClassLabel::W => (2, 2),
        };
        if (nc, nd) != want {
            return fail(format!(
                "expected {} cores and {} deltas, got {nc} and {nd}",
                want.0, want.1
            ));
        }
        if !self.background_angle.is_finite() {
            return fail("background angle is not finite".into());
        }
        let all: Vec<(f64, f64)> = self.cores.iter().chain(&self.deltas).copied().collect();
        if all.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return fail("non-finite singularity position".into());
        }
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                let d = (all[i].0 - all[j].0).hypot(all[i].1 - all[j].1);
                if d < MIN_SEPARATION {
                    return fail(format!("singularities {d:.3} cells apart"));
                }
            }
        }
        if matches!(class, ClassLabel::L | ClassLabel::R) {
            let (core, delta) = (self.cores[0], self.deltas[0]);
            if delta.1 <= core.1 {
                return fail("delta must lie strictly below the core".into());
            }
            let right = delta.0 > core.0;
            let left = delta.0 < core.0;
            if (class == ClassLabel::L && !right) || (class == ClassLabel::R && !left) {
                return fail(format!(
                    "delta must lie {} of the core",
                    if class == ClassLabel::L { "right" } else { "left" }
                ));
            }
        }
        Ok(())
    }

    /// Infers the class from the singularity counts and the core-to-delta
    /// displacement, then checks the full constraint set.
    pub fn class(&self) -> Result<ClassLabel, SynthError> {
        let class = match (self.cores.len(), self.deltas.len()) {
            (0, 0) => ClassLabel::A,
            (2, 2) => ClassLabel::W,
            (1, 1) if self.deltas[0].0 < self.cores[0].0 => ClassLabel::R,
            (1, 1) => ClassLabel::L,
            (nc, nd) => {
                return Err(SynthError::Constraint {
                    class: ClassLabel::A,
                    reason: format!("no class has {nc} cores and {nd} deltas"),
                })
            }
        };
        self.validate(class)?;
        Ok(class)
    }

    /// Left-right reflection across the vertical center line of a `cols`-wide grid.
    pub fn mirrored(&self, cols: usize) -> Self {
        let flip = |&(x, y): &(f64, f64)| ((cols as f64 - 1.0) - x, y);
        Self {
            cores: self.cores.iter().map(flip).collect(),
            deltas: self.deltas.iter().map(flip).collect(),
            background_angle: normalize_angle(PI - self.background_angle),
        }
    }

    /// Orientation at an arbitrary point.
    pub fn angle_at(&self, x: f64, y: f64) -> f64 {
        let arg = |&(sx, sy): &(f64, f64)| {
            let (mut dx, mut dy) = (x - sx, y - sy);
            if dx == 0.0 && dy == 0.0 {
                (dx, dy) = (0.5, 0.5);
            }
            dy.atan2(dx)
        };
        let zeros: f64 = self.cores.iter().map(arg).sum();
        let poles: f64 = self.deltas.iter().map(arg).sum();
        normalize_angle(self.background_angle + 0.5 * (zeros - poles))
    }
}

/// Evaluates the zero-pole model at every cell center; all cells are valid.
pub fn zero_pole_field(
    layout: &SingularityLayout,
    rows: usize,
    cols: usize,
) -> Result<OrientationField, SynthError> {
    layout.class()?;
    if rows == 0 || cols == 0 {
        return Err(SynthError::GridTooSmall { rows, cols });
    }
    let angles = (0..rows * cols)
        .map(|i| layout.angle_at((i % cols) as f64, (i / cols) as f64))
        .collect();
    Ok(OrientationField::all_valid(rows, cols, angles).expect("shape is rows*cols"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub rows: usize,
    pub cols: usize,
    /// Samples per class in `A, L, R, W` order.
    pub counts: [usize; 4],
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            rows: 25,
            cols: 25,
            counts: [0; 4],
            noise_sigma: 0.0,
            rng_seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

fn central_range(dim: usize) -> (f64, f64) {
    let margin = (1.0 - CENTRAL_FRACTION) / 2.0 * (dim as f64 - 1.0);
    (margin, dim as f64 - 1.0 - margin)
}

/// Draws a layout by rejection sampling positions from the central 60% of the grid.
///
/// Sampled singularities are at least [`sampled_spacing`] cells apart, so a
/// loop's delta never sits on top of its core. Whorls additionally place
/// both deltas below both cores, one on each side, which is the usual whorl
/// morphology.
pub fn random_layout(
    class: ClassLabel,
    rows: usize,
    cols: usize,
    rng: &mut impl Rng,
) -> Result<SingularityLayout, SynthError> {
    let background_angle = normalize_angle(rng.random_range(-BACKGROUND_SPREAD..=BACKGROUND_SPREAD));
    if class == ClassLabel::A {
        return Ok(SingularityLayout::arch(background_angle));
    }
    let (xlo, xhi) = central_range(cols);
    let (ylo, yhi) = central_range(rows);
    let spacing = sampled_spacing(rows, cols);
    if xhi - xlo < spacing || yhi - ylo < spacing {
        return Err(SynthError::GridTooSmall { rows, cols });
    }
    let (nc, nd) = if class == ClassLabel::W { (2, 2) } else { (1, 1) };
    for _ in 0..MAX_DRAWS {
        let mut draw = || (rng.random_range(xlo..=xhi), rng.random_range(ylo..=yhi));
        let cores: Vec<_> = (0..nc).map(|_| draw()).collect();
        let deltas: Vec<_> = (0..nd).map(|_| draw()).collect();
        let layout = SingularityLayout {
            cores,
            deltas,
            background_angle,
        };
        if layout.validate(class).is_err() || min_distance(&layout) < spacing {
            continue;
        }
        if class == ClassLabel::W && !whorl_shape(&layout) {
            continue;
        }
        return Ok(layout);
    }
    Err(SynthError::GridTooSmall { rows, cols })
}

/// Spacing enforced between sampled singularities on a `rows × cols` grid.
pub fn sampled_spacing(rows: usize, cols: usize) -> f64 {
    (SAMPLED_SPACING * rows.min(cols) as f64).max(MIN_SEPARATION)
}

fn min_distance(layout: &SingularityLayout) -> f64 {
    let all: Vec<_> = layout.cores.iter().chain(&layout.deltas).collect();
    let mut best = f64::INFINITY;
    for (i, a) in all.iter().enumerate() {
        for b in &all[i + 1..] {
            best = best.min((a.0 - b.0).hypot(a.1 - b.1));
        }
    }
    best
}

fn whorl_shape(layout: &SingularityLayout) -> bool {
    let core_bottom = layout.cores.iter().map(|c| c.1).fold(f64::MIN, f64::max);
    let core_left = layout.cores.iter().map(|c| c.0).fold(f64::MAX, f64::min);
    let core_right = layout.cores.iter().map(|c| c.0).fold(f64::MIN, f64::max);
    let (d0, d1) = (layout.deltas[0], layout.deltas[1]);
    let (left, right) = if d0.0 < d1.0 { (d0, d1) } else { (d1, d0) };
    d0.1 > core_bottom && d1.1 > core_bottom && left.0 < core_left && right.0 > core_right
}

/// Adds wrapped Gaussian noise to every angle.
fn perturb(field: &OrientationField, sigma: f64, rng: &mut impl Rng) -> OrientationField {
    if sigma == 0.0 {
        return field.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let angles = field
        .angles()
        .iter()
        .map(|&a| normalize_angle(a + normal.sample(rng)))
        .collect();
    OrientationField::new(field.rows(), field.cols(), angles, field.valid().to_vec())
        .expect("same shape")
}

/// Label of the `index`-th sample under a spec's class ordering.
pub fn label_for_index(spec: &SynthSpec, index: usize) -> Option<ClassLabel> {
    let mut acc = 0;
    for (class, &n) in ClassLabel::ALL.iter().zip(&spec.counts) {
        acc += n;
        if index < acc {
            return Some(*class);
        }
    }
    None
}

/// Generates one sample from its own seed (`rng_seed ^ index`), so samples
/// can be produced independently and in any order.
pub fn generate_sample(
    spec: &SynthSpec,
    index: usize,
) -> Result<(OrientationField, ClassLabel), SynthError> {
    let class = label_for_index(spec, index).expect("index within spec total");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed ^ index as u64);
    let layout = random_layout(class, spec.rows, spec.cols, &mut rng)?;
    let clean = zero_pole_field(&layout, spec.rows, spec.cols)?;
    Ok((perturb(&clean, spec.noise_sigma, &mut rng), class))
}

/// Generates all samples, classes in `A, L, R, W` order.
pub fn generate_dataset(spec: &SynthSpec) -> Result<Vec<(OrientationField, ClassLabel)>, SynthError> {
    if !spec.noise_sigma.is_finite() || spec.noise_sigma < 0.0 {
        return Err(SynthError::Noise(spec.noise_sigma));
    }
    (0..spec.total()).map(|i| generate_sample(spec, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orientation::angular_distance;
    use proptest::prelude::*;

    fn loop_layout() -> SingularityLayout {
        SingularityLayout {
            cores: vec![(10.3, 8.2)],
            deltas: vec![(14.7, 15.1)],
            background_angle: 0.1,
        }
    }

    #[test]
    fn empty_layout_is_uniform() {
        let f = zero_pole_field(&SingularityLayout::arch(0.0), 5, 7).unwrap();
        assert!(f.angles().iter().all(|&a| a == 0.0));
        assert_eq!(f.valid_count(), 35);
    }

    #[test]
    fn single_core_spot_values() {
        // Oracle: arg of a complex number computed independently.
        let arg = |re: f64, im: f64| im.atan2(re);
        let layout = SingularityLayout {
            cores: vec![(0.0, 0.0)],
            deltas: vec![],
            background_angle: 0.0,
        };
        assert!(angular_distance(layout.angle_at(1.0, 0.0), 0.5 * arg(1.0, 0.0)) < 1e-15);
        assert!(angular_distance(layout.angle_at(0.0, 1.0), PI / 4.0) < 1e-15);
        assert!(angular_distance(layout.angle_at(0.0, 1.0), 0.5 * arg(0.0, 1.0)) < 1e-15);
    }

    #[test]
    fn singular_cell_uses_offset_direction() {
        let layout = SingularityLayout {
            cores: vec![(2.0, 2.0)],
            deltas: vec![],
            background_angle: 0.0,
        };
        assert!(angular_distance(layout.angle_at(2.0, 2.0), PI / 8.0) < 1e-15);
    }

    #[test]
    fn far_field_tends_to_background() {
        let layout = loop_layout();
        let sep = (14.7f64 - 10.3).hypot(15.1 - 8.2);
        let r = 100.0 * sep;
        for k in 0..16 {
            let t = k as f64 * PI / 8.0;
            let a = layout.angle_at(10.3 + r * t.cos(), 8.2 + r * t.sin());
            assert!(angular_distance(a, 0.1) < 0.05);
        }
    }

    #[test]
    fn class_constraints() {
        let l = loop_layout();
        assert!(l.validate(ClassLabel::L).is_ok());
        assert!(l.validate(ClassLabel::R).is_err());
        assert!(l.validate(ClassLabel::W).is_err());
        assert!(l.mirrored(25).validate(ClassLabel::R).is_ok());
        let above = SingularityLayout {
            cores: vec![(10.0, 10.0)],
            deltas: vec![(14.0, 6.0)],
            background_angle: 0.0,
        };
        assert!(above.validate(ClassLabel::L).is_err());
        let crowded = SingularityLayout {
            cores: vec![(10.0, 10.0)],
            deltas: vec![(11.0, 11.0)],
            background_angle: 0.0,
        };
        assert!(crowded.validate(ClassLabel::L).is_err());
    }

    #[test]
    fn sampled_spacing_scales_with_grid() {
        assert_eq!(sampled_spacing(25, 25), 5.0);
        assert_eq!(sampled_spacing(40, 12), 0.2 * 12.0);
        assert_eq!(sampled_spacing(5, 5), MIN_SEPARATION);
    }

    #[test]
    fn class_is_inferred_from_layout() {
        assert_eq!(SingularityLayout::arch(0.2).class().unwrap(), ClassLabel::A);
        assert_eq!(loop_layout().class().unwrap(), ClassLabel::L);
        assert_eq!(loop_layout().mirrored(25).class().unwrap(), ClassLabel::R);
        let whorl = SingularityLayout {
            cores: vec![(10.0, 9.0), (14.0, 11.0)],
            deltas: vec![(6.0, 16.0), (18.0, 16.0)],
            background_angle: 0.0,
        };
        assert_eq!(whorl.class().unwrap(), ClassLabel::W);
        let odd = SingularityLayout {
            cores: vec![(10.0, 9.0)],
            deltas: vec![],
            background_angle: 0.0,
        };
        assert!(odd.class().is_err());
        assert!(zero_pole_field(&odd, 5, 5).is_err());
    }

    #[test]
    fn mirror_of_left_loop_is_reflected_right_loop() {
        let l = loop_layout();
        let left = zero_pole_field(&l, 25, 25).unwrap();
        let right = zero_pole_field(&l.mirrored(25), 25, 25).unwrap();
        for r in 0..25 {
            for c in 0..25 {
                let expect = normalize_angle(PI - left.angle(r, c));
                assert!(angular_distance(right.angle(r, 24 - c), expect) < 1e-9);
            }
        }
    }

    #[test]
    fn dataset_is_deterministic_and_balanced() {
        let spec = SynthSpec {
            counts: [1, 1, 1, 1],
            noise_sigma: 0.1,
            rng_seed: 7,
            ..SynthSpec::default()
        };
        let a = generate_dataset(&spec).unwrap();
        let b = generate_dataset(&spec).unwrap();
        assert_eq!(a, b);
        let labels: Vec<_> = a.iter().map(|s| s.1).collect();
        assert_eq!(labels, ClassLabel::ALL.to_vec());
    }

    #[test]
    fn large_spec_counts() {
        let spec = SynthSpec {
            counts: [500; 4],
            noise_sigma: 0.15,
            rng_seed: 3,
            ..SynthSpec::default()
        };
        let data = generate_dataset(&spec).unwrap();
        assert_eq!(data.len(), 2000);
        for class in ClassLabel::ALL {
            assert_eq!(data.iter().filter(|s| s.1 == class).count(), 500);
        }
    }

    #[test]
    fn noiseless_arch_is_pure_model() {
        let spec = SynthSpec {
            counts: [1, 0, 0, 0],
            rng_seed: 11,
            ..SynthSpec::default()
        };
        let (field, label) = generate_dataset(&spec).unwrap().remove(0);
        assert_eq!(label, ClassLabel::A);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let layout = random_layout(ClassLabel::A, 25, 25, &mut rng).unwrap();
        assert_eq!(field, zero_pole_field(&layout, 25, 25).unwrap());
    }

    #[test]
    fn rejects_negative_noise() {
        let spec = SynthSpec {
            counts: [1, 0, 0, 0],
            noise_sigma: -0.1,
            ..SynthSpec::default()
        };
        assert!(matches!(generate_dataset(&spec), Err(SynthError::Noise(_))));
    }

    proptest! {
        #[test]
        fn random_layouts_satisfy_constraints(seed in any::<u64>(), class_idx in 0usize..4) {
            let class = ClassLabel::from_index(class_idx).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let layout = random_layout(class, 25, 25, &mut rng).unwrap();
            prop_assert!(layout.validate(class).is_ok());
            prop_assert!(class == ClassLabel::A || min_distance(&layout) >= sampled_spacing(25, 25));
            let (lo, hi) = central_range(25);
            for &(x, y) in layout.cores.iter().chain(&layout.deltas) {
                prop_assert!(x >= lo && x <= hi && y >= lo && y <= hi);
            }
        }

        #[test]
        fn generated_angles_in_range(seed in any::<u64>(), sigma in 0.0f64..1.0) {
            let spec = SynthSpec {
                rows: 12,
                cols: 12,
                counts: [1, 1, 1, 1],
                noise_sigma: sigma,
                rng_seed: seed,
            };
            for (field, _) in generate_dataset(&spec).unwrap() {
                prop_assert!(field.angles().iter().all(|&a| (0.0..PI).contains(&a)));
            }
        }
    }
}
