//! Synthetic walking silhouettes.
//!
//! A walker is a union of analytic parts (head circle, torso ellipse, leg
//! and arm capsules) rasterized by point-in-part tests at pixel centers.
//! Limbs swing as opposite-phase pairs, so every clean frame is exactly
//! mirror symmetric about the body axis when the view is symmetric, and the
//! phase sequence `start + TAU * (t mod period) / period` repeats bit for
//! bit: frame t and frame t + period are byte-identical. Degradations
//! (boundary flips, background clutter) draw from an RNG keyed on the clean
//! mask bytes, so they inherit that exact periodicity instead of breaking
//! it with a per-frame counter.
//!
//! Per-subject geometry comes from seed streams derived with FNV-1a, so any
//! (subject, condition, view) cell regenerates identically without touching
//! the others.

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridKind};
use crate::io::{frame_file_name, save_grid};

/// FNV-1a over the parts with a separator byte, so ("ab", "c") and
/// ("a", "bc") hash differently.
fn fnv1a64(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in *part {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic child seed for a named stream.
pub fn seed_stream(base: u64, tags: &[&str]) -> u64 {
    let base_bytes = base.to_le_bytes();
    let mut parts: Vec<&[u8]> = vec![&base_bytes];
    parts.extend(tags.iter().map(|t| t.as_bytes()));
    fnv1a64(&parts)
}

#[derive(Debug, Clone)]
pub struct WalkerParams {
    pub subject: String,
    pub canvas_height: usize,
    pub canvas_width: usize,
    /// Head top to standing foot bottom, in pixels.
    pub body_height: f64,
    /// Torso semi-axis as a fraction of body height.
    pub torso_half_width: f64,
    pub head_radius: f64,
    pub leg_amplitude: f64,
    pub arm_amplitude: f64,
    pub arm_length: f64,
    pub leg_radius: f64,
    pub hip_offset: f64,
    pub period: usize,
    pub start_phase: f64,
    /// View: horizontal scale and a shear proportional to height above the
    /// body midline. Vertical extent is untouched.
    pub x_scale: f64,
    pub shear: f64,
    /// Carried-bag circle radius as a fraction of body height; 0 disables.
    pub bag_radius: f64,
}

impl WalkerParams {
    /// A mid-range walker; tests tweak fields from here.
    pub fn baseline(subject: &str) -> Self {
        WalkerParams {
            subject: subject.to_string(),
            canvas_height: 80,
            canvas_width: 60,
            body_height: 72.0,
            torso_half_width: 0.205,
            head_radius: 0.082,
            leg_amplitude: 0.34,
            arm_amplitude: 0.42,
            arm_length: 0.33,
            leg_radius: 0.048,
            hip_offset: 0.22,
            period: 28,
            start_phase: 0.0,
            x_scale: 1.0,
            shear: 0.0,
            bag_radius: 0.0,
        }
    }
}

#[inline]
fn dist2_to_segment(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let (vx, vy) = (bx - ax, by - ay);
    let (wx, wy) = (px - ax, py - ay);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 {
        ((wx * vx + wy * vy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (dx, dy) = (wx - t * vx, wy - t * vy);
    dx * dx + dy * dy
}

/// Rasterize one frame at the given phase (reduced mod TAU).
///
/// The clean body must keep a 2 px margin to every frame edge; a body that
/// does not fit is an error, not a silent crop.
pub fn render_frame(p: &WalkerParams, phase: f64) -> Result<Grid> {
    let ph = phase.rem_euclid(TAU);
    let bh = p.body_height;
    let tw = p.torso_half_width * bh;
    let hr = p.head_radius * bh;
    let lr = p.leg_radius * bh;
    let ar = 0.030 * bh;
    let hip_y = 0.48 * bh;
    let leg_len = bh - hip_y - lr;
    let hip_off = p.hip_offset * tw;
    let shoulder_y = 0.26 * bh;
    let shoulder_off = 0.80 * tw;
    let arm_len = p.arm_length * bh;

    // Opposite-phase limb pairs, built from one displacement each so the
    // part set is exactly symmetric under x -> -x.
    let leg_angle = p.leg_amplitude * ph.sin();
    let leg_dx = leg_len * leg_angle.sin();
    let leg_dy = leg_len * leg_angle.cos();
    let arm_angle = p.arm_amplitude * ph.sin();
    let arm_dx = arm_len * arm_angle.sin();
    let arm_dy = arm_len * arm_angle.cos();

    let torso_cy = 0.33 * bh;
    let torso_sy = 0.17 * bh;
    let bag_r = p.bag_radius * bh;
    let bag_cx = 0.80 * tw + 0.90 * bag_r;
    let bag_cy = 0.55 * bh;

    let y0 = (p.canvas_height as f64 - bh) / 2.0;
    let cx0 = (p.canvas_width as f64 - 1.0) / 2.0;

    let inside = |xb: f64, yb: f64| -> bool {
        // Head.
        let (dx, dy) = (xb, yb - hr);
        if dx * dx + dy * dy <= hr * hr {
            return true;
        }
        // Torso.
        let (ex, ey) = (xb / tw, (yb - torso_cy) / torso_sy);
        if ex * ex + ey * ey <= 1.0 {
            return true;
        }
        // Legs: one swings +leg_dx, the other -leg_dx.
        let r2 = lr * lr;
        if dist2_to_segment(xb, yb, -hip_off, hip_y, -hip_off + leg_dx, hip_y + leg_dy) <= r2
            || dist2_to_segment(xb, yb, hip_off, hip_y, hip_off - leg_dx, hip_y + leg_dy) <= r2
        {
            return true;
        }
        // Arms, opposite to the leg on their side.
        let a2 = ar * ar;
        if dist2_to_segment(
            xb,
            yb,
            -shoulder_off,
            shoulder_y,
            -shoulder_off - arm_dx,
            shoulder_y + arm_dy,
        ) <= a2
            || dist2_to_segment(
                xb,
                yb,
                shoulder_off,
                shoulder_y,
                shoulder_off + arm_dx,
                shoulder_y + arm_dy,
            ) <= a2
        {
            return true;
        }
        if bag_r > 0.0 {
            let (dx, dy) = (xb - bag_cx, yb - bag_cy);
            if dx * dx + dy * dy <= bag_r * bag_r {
                return true;
            }
        }
        false
    };

    let mut out = Grid::zeros(p.canvas_height, p.canvas_width, GridKind::Binary);
    for row in 0..p.canvas_height {
        let yb = row as f64 - y0;
        for col in 0..p.canvas_width {
            let x = col as f64 - cx0 - p.shear * (yb - bh / 2.0);
            let xb = x / p.x_scale;
            if inside(xb, yb) {
                out.set(row, col, 1.0);
            }
        }
    }

    let h = p.canvas_height;
    let w = p.canvas_width;
    let mut ok = out.count_foreground() > 0;
    if ok {
        'scan: for row in 0..h {
            for col in 0..w {
                if out.get(row, col) == 1.0
                    && (row < 2 || row >= h - 2 || col < 2 || col >= w - 2)
                {
                    ok = false;
                    break 'scan;
                }
            }
        }
    }
    if !ok {
        return Err(Error::BodyOutOfFrame {
            subject: p.subject.clone(),
        });
    }
    Ok(out)
}

/// One gait cycle spans `period` frames; frame t and t + period render
/// byte-identically.
pub fn generate_sequence(p: &WalkerParams, frames: usize) -> Result<Vec<Grid>> {
    if frames == 0 || p.period == 0 {
        return Err(Error::InvalidParameter {
            what: "sequence needs at least one frame and a positive period".into(),
        });
    }
    (0..frames)
        .map(|t| {
            let phase = p.start_phase + TAU * (t % p.period) as f64 / p.period as f64;
            render_frame(p, phase)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ViewSpec {
    pub label: String,
    #[serde(default = "one")]
    pub x_scale: f64,
    #[serde(default)]
    pub shear: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct NoiseSpec {
    /// Probability of flipping each mask boundary pixel.
    #[serde(default)]
    pub boundary_flip_prob: f64,
    /// Number of clutter blobs unioned into the frame.
    #[serde(default)]
    pub clutter_blobs: usize,
    #[serde(default)]
    pub clutter_radius: f64,
}

impl NoiseSpec {
    pub fn is_clean(&self) -> bool {
        self.boundary_flip_prob == 0.0 && self.clutter_blobs == 0
    }
}

/// Config for one generated dataset tree.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DomainSpec {
    pub name: String,
    pub seed: u64,
    pub subjects: usize,
    pub conditions: Vec<String>,
    pub views: Vec<ViewSpec>,
    #[serde(default = "default_canvas_height")]
    pub canvas_height: usize,
    #[serde(default = "default_canvas_width")]
    pub canvas_width: usize,
    /// Body height as a fraction of canvas height, drawn per subject.
    #[serde(default = "default_body_scale")]
    pub body_scale: [f64; 2],
    /// None renders exactly two gait cycles per sequence.
    #[serde(default)]
    pub frames_per_sequence: Option<usize>,
    #[serde(default)]
    pub noise: NoiseSpec,
}

fn default_body_scale() -> [f64; 2] {
    [0.84, 0.94]
}

fn default_canvas_height() -> usize {
    80
}

fn default_canvas_width() -> usize {
    60
}

fn default_conditions() -> Vec<String> {
    ["NM#01", "NM#02", "NM#03", "NM#04", "NM#05", "NM#06", "BG#01", "BG#02", "CL#01", "CL#02"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_views() -> Vec<ViewSpec> {
    vec![
        ViewSpec {
            label: "000".into(),
            x_scale: 1.0,
            shear: 0.0,
        },
        ViewSpec {
            label: "045".into(),
            x_scale: 1.08,
            shear: 0.14,
        },
    ]
}

impl DomainSpec {
    /// Noise-free domain.
    pub fn clean(name: &str, seed: u64, subjects: usize) -> Self {
        DomainSpec {
            name: name.to_string(),
            seed,
            subjects,
            conditions: default_conditions(),
            views: default_views(),
            canvas_height: default_canvas_height(),
            canvas_width: default_canvas_width(),
            body_scale: default_body_scale(),
            frames_per_sequence: None,
            noise: NoiseSpec::default(),
        }
    }

    /// Same walkers, degraded segmentation: boundary flips plus clutter.
    pub fn jittered(name: &str, seed: u64, subjects: usize) -> Self {
        let mut spec = Self::clean(name, seed, subjects);
        spec.noise = NoiseSpec {
            boundary_flip_prob: 0.25,
            clutter_blobs: 2,
            clutter_radius: 2.2,
        };
        spec
    }

    fn validate(&self) -> Result<()> {
        if self.subjects == 0 || self.conditions.is_empty() || self.views.is_empty() {
            return Err(Error::InvalidParameter {
                what: "domain needs at least one subject, condition, and view".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.noise.boundary_flip_prob) {
            return Err(Error::InvalidParameter {
                what: format!(
                    "boundary_flip_prob {} outside [0, 1]",
                    self.noise.boundary_flip_prob
                ),
            });
        }
        let [lo, hi] = self.body_scale;
        if !(lo > 0.0 && hi < 1.0 && lo < hi) {
            return Err(Error::InvalidParameter {
                what: format!("body_scale [{lo}, {hi}] must satisfy 0 < lo < hi < 1"),
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        for v in &self.views {
            if !(v.x_scale > 0.0) || !v.x_scale.is_finite() || !v.shear.is_finite() {
                return Err(Error::InvalidParameter {
                    what: format!("view {} has a bad transform", v.label),
                });
            }
            if !seen.insert(&v.label) {
                return Err(Error::InvalidParameter {
                    what: format!("duplicate view label {}", v.label),
                });
            }
        }
        Ok(())
    }
}

fn subject_label(i: usize) -> String {
    format!("s{:03}", i + 1)
}

/// Body geometry for one subject. The torso width is stratified across the
/// subject index so small corpora still separate well; the rest is drawn
/// from the subject's own stream.
fn subject_params(spec: &DomainSpec, index: usize) -> WalkerParams {
    let label = subject_label(index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed_stream(spec.seed, &["subject", &label]));
    let spread = if spec.subjects > 1 {
        index as f64 / (spec.subjects - 1) as f64
    } else {
        0.5
    };
    let mut p = WalkerParams::baseline(&label);
    p.canvas_height = spec.canvas_height;
    p.canvas_width = spec.canvas_width;
    p.body_height =
        spec.canvas_height as f64 * rng.random_range(spec.body_scale[0]..spec.body_scale[1]);
    p.torso_half_width = 0.180 + 0.050 * spread + rng.random_range(-0.004..0.004);
    p.head_radius = rng.random_range(0.070..0.092);
    p.leg_amplitude = rng.random_range(0.30..0.38);
    p.arm_amplitude = rng.random_range(0.36..0.50);
    p.arm_length = rng.random_range(0.30..0.36);
    p.leg_radius = rng.random_range(0.042..0.055);
    p.hip_offset = rng.random_range(0.15..0.30);
    p.period = rng.random_range(24..=32);
    p
}

/// Boundary flips then clutter, keyed on the clean mask content: equal
/// clean frames degrade equally, so periodicity survives.
fn apply_noise(clean: &Grid, spec: &NoiseSpec, domain_seed: u64) -> Grid {
    if spec.is_clean() {
        return clean.clone();
    }
    let mask_bytes: Vec<u8> = clean.values().iter().map(|&v| v as u8).collect();
    let seed_bytes = domain_seed.to_le_bytes();
    let seed = fnv1a64(&[&seed_bytes, b"noise", &mask_bytes]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (clean.height(), clean.width());
    let mut out = clean.clone();
    if spec.boundary_flip_prob > 0.0 {
        let is_boundary = |r: usize, c: usize| -> bool {
            let v = clean.get(r, c);
            let (ri, ci) = (r as isize, c as isize);
            [(ri - 1, ci), (ri + 1, ci), (ri, ci - 1), (ri, ci + 1)]
                .iter()
                .any(|&(nr, nc)| clean.get_padded(nr, nc) != v)
        };
        for r in 0..h {
            for c in 0..w {
                if is_boundary(r, c) && rng.random_bool(spec.boundary_flip_prob) {
                    out.set(r, c, 1.0 - clean.get(r, c));
                }
            }
        }
    }
    for _ in 0..spec.clutter_blobs {
        let cy = rng.random_range(0.0..h as f64);
        let cx = rng.random_range(0.0..w as f64);
        let radius = spec.clutter_radius * rng.random_range(0.6..1.4);
        let r2 = radius * radius;
        for r in 0..h {
            for c in 0..w {
                let (dy, dx) = (r as f64 - cy, c as f64 - cx);
                if dy * dy + dx * dx <= r2 {
                    out.set(r, c, 1.0);
                }
            }
        }
    }
    out
}

/// Largest body height whose silhouette is guaranteed to keep the 2 px frame
/// margin for every phase, given the part extents and view transform already
/// baked into `p`.
///
/// Per unit body height, the horizontal half-extent over the gait cycle is
/// the widest of torso, head, swung leg, swung arm, and bag; the shear
/// contribution is bounded by half the body height. Condition effects widen
/// the torso or add the bag, so the bound is taken after they are applied.
fn max_safe_body_height(p: &WalkerParams) -> f64 {
    let tw = p.torso_half_width;
    let leg = p.hip_offset * tw + (0.52 - p.leg_radius) * p.leg_amplitude.sin() + p.leg_radius;
    let arm = 0.80 * tw + p.arm_length * p.arm_amplitude.sin() + 0.030;
    let bag = 0.80 * tw + 1.90 * p.bag_radius;
    let extent = tw.max(p.head_radius).max(leg).max(arm).max(bag);
    let horizontal = (p.canvas_width as f64 / 2.0 - 1.6) / (p.x_scale * extent + 0.5 * p.shear.abs());
    horizontal.min(p.canvas_height as f64 - 4.2)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GenSummary {
    pub sequences: usize,
    pub frames: usize,
}

/// Write the full dataset tree: root/subject/condition/view/frame_NNNN.pgm.
pub fn generate_domain(spec: &DomainSpec, root: &Path) -> Result<GenSummary> {
    spec.validate()?;
    let mut sequences = 0;
    let mut frames_written = 0;
    for si in 0..spec.subjects {
        let base = subject_params(spec, si);
        let subject = subject_label(si);
        for cond in &spec.conditions {
            let mut p = base.clone();
            let cond_seed = seed_stream(spec.seed, &["condition", &subject, cond]);
            let mut cond_rng = ChaCha8Rng::seed_from_u64(cond_seed);
            let kind = crate::grid::Condition::new(cond.clone()).kind();
            match kind {
                crate::grid::ConditionKind::Bag => {
                    p.bag_radius = cond_rng.random_range(0.070..0.085);
                }
                crate::grid::ConditionKind::Clothing => {
                    p.torso_half_width *= cond_rng.random_range(1.25..1.50);
                }
                _ => {}
            }
            for view in &spec.views {
                let mut vp = p.clone();
                vp.x_scale = view.x_scale;
                vp.shear = view.shear;
                // A wide costume or a strong view transform shrinks the
                // subject instead of pushing limbs out of frame.
                vp.body_height = vp.body_height.min(max_safe_body_height(&vp));
                let sv_seed =
                    seed_stream(spec.seed, &["sequence", &subject, cond, &view.label]);
                let mut sv_rng = ChaCha8Rng::seed_from_u64(sv_seed);
                vp.start_phase = sv_rng.random_range(0.0..TAU);
                let n_frames = spec.frames_per_sequence.unwrap_or(2 * vp.period);
                let clean = generate_sequence(&vp, n_frames)?;
                let dir = root.join(&subject).join(cond).join(&view.label);
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                for (t, frame) in clean.iter().enumerate() {
                    let noisy = apply_noise(frame, &spec.noise, spec.seed);
                    save_grid(&noisy, &dir.join(frame_file_name(t)))?;
                }
                sequences += 1;
                frames_written += n_frames;
            }
        }
    }
    Ok(GenSummary {
        sequences,
        frames: frames_written,
    })
}
