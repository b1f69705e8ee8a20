//! Differentiable body alignment.
//!
//! `gait_align` crops the body out of a silhouette and resamples it into a
//! canonical frame: pad horizontally so a wide crop cannot run off the
//! sides, binarize to locate the body, fit an aspect-matched box around it,
//! then bilinearly resample the float input inside that box. The box is
//! computed from the binarized mask and treated as a constant by the
//! backward pass; gradients flow through the resampling only. That matches
//! the usual treatment of RoI crops, and it is what makes the operator
//! differentiable almost everywhere despite the hard threshold inside.
//!
//! Coordinate convention, used everywhere here: a box spans edge
//! coordinates, so a box covering a whole `h x w` frame is `(0, 0, h, w)`.
//! Output cell `(i, j)` samples the source at
//! `y = top + (i + 0.5) * box_h / H - 0.5`,
//! `x = left + (j + 0.5) * box_w / W - 0.5`,
//! one bilinear sample per cell, and out-of-range reads are 0. With the box
//! equal to the whole frame and the target equal to the source size, the
//! samples land exactly on pixel centers and the operator is the identity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{round_half_up, GradGrid, Grid, GridKind, TargetSize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentBox {
    pub top: f64,
    pub left: f64,
    pub bottom: f64,
    pub right: f64,
}

impl AlignmentBox {
    pub fn height(&self) -> f64 {
        self.bottom - self.top
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }
}

/// Everything the backward pass needs to invert the forward geometry.
#[derive(Debug, Clone)]
pub struct AlignContext {
    pub box_: AlignmentBox,
    pub target: TargetSize,
    /// Dimensions of the grid the resampler actually read (padded for
    /// `gait_align`, the raw input for a direct `roi_resample`).
    pub src_height: usize,
    pub src_width: usize,
    /// Columns of zero padding on the left, and the pre-pad width; both zero
    /// effect for a direct `roi_resample`.
    pub pad_left: usize,
    pub orig_width: usize,
}

/// Zero-pad `floor(w/2)` columns on each side, content centered.
pub fn pad_horizontal(sil: &Grid) -> Grid {
    let pad = sil.width() / 2;
    let mut out = Grid::zeros(sil.height(), sil.width() + 2 * pad, sil.kind());
    for r in 0..sil.height() {
        for c in 0..sil.width() {
            out.set(r, c + pad, sil.get(r, c));
        }
    }
    out
}

/// Aspect-matched crop box around the foreground of a binary mask.
///
/// The box height spans the body rows exactly; the width is
/// `height * W / H`, centered on the mean foreground column, so resampling
/// to `(H, W)` scales both axes by the same factor. That uniform scale is
/// what preserves the body's own height/width ratio `r`; `r` itself only
/// gets validated, the geometry never needs it.
pub fn compute_bbox(mask: &Grid, r: f64, size: TargetSize) -> Result<AlignmentBox> {
    if !mask.is_binary() {
        return Err(Error::NonBinaryInput {
            context: "compute_bbox".into(),
        });
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter {
            what: format!("aspect ratio {r} (must be positive and finite)"),
        });
    }
    let mut top = usize::MAX;
    let mut bottom = 0usize;
    let mut col_sum = 0.0f64;
    let mut count = 0usize;
    for row in 0..mask.height() {
        for col in 0..mask.width() {
            if mask.get(row, col) == 1.0 {
                top = top.min(row);
                bottom = bottom.max(row);
                col_sum += col as f64;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let top = top as f64;
    let bottom = (bottom + 1) as f64; // exclusive
    let center = col_sum / count as f64;
    let crop_h = bottom - top;
    let crop_w = crop_h * size.width as f64 / size.height as f64;
    Ok(AlignmentBox {
        top,
        left: center - crop_w / 2.0,
        bottom,
        right: center + crop_w / 2.0,
    })
}

#[inline]
fn bilinear(sil: &Grid, y: f64, x: f64) -> f64 {
    let y0 = y.floor();
    let x0 = x.floor();
    let fy = y - y0;
    let fx = x - x0;
    let (y0, x0) = (y0 as isize, x0 as isize);
    let v00 = sil.get_padded(y0, x0);
    let v01 = sil.get_padded(y0, x0 + 1);
    let v10 = sil.get_padded(y0 + 1, x0);
    let v11 = sil.get_padded(y0 + 1, x0 + 1);
    (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11)
}

fn validate_box(box_: &AlignmentBox) -> Result<()> {
    let fields = [box_.top, box_.left, box_.bottom, box_.right];
    if fields.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter {
            what: "alignment box with non-finite coordinates".into(),
        });
    }
    if !(box_.height() > 0.0) || !(box_.width() > 0.0) {
        return Err(Error::DegenerateBox);
    }
    Ok(())
}

/// Bilinear RoI resample of `sil` inside `box_` to the target size.
pub fn roi_resample(
    sil: &Grid,
    box_: &AlignmentBox,
    size: TargetSize,
) -> Result<(Grid, AlignContext)> {
    validate_box(box_)?;
    let sy = box_.height() / size.height as f64;
    let sx = box_.width() / size.width as f64;
    let mut values = Vec::with_capacity(size.height * size.width);
    for i in 0..size.height {
        let y = box_.top + (i as f64 + 0.5) * sy - 0.5;
        for j in 0..size.width {
            let x = box_.left + (j as f64 + 0.5) * sx - 0.5;
            values.push(bilinear(sil, y, x));
        }
    }
    // Bilinear interpolation of values in [0, 1] stays in [0, 1].
    let out = Grid::float(size.height, size.width, values)?;
    let ctx = AlignContext {
        box_: *box_,
        target: size,
        src_height: sil.height(),
        src_width: sil.width(),
        pad_left: 0,
        orig_width: sil.width(),
    };
    Ok((out, ctx))
}

/// Full alignment: pad, binarize, box, resample. `r` is the body
/// height/width ratio; when absent it is measured from the binarized input.
pub fn gait_align(sil: &Grid, r: Option<f64>, size: TargetSize) -> Result<(Grid, AlignContext)> {
    let padded = pad_horizontal(sil);
    let mask = padded.binarized();
    let ratio = match r {
        Some(v) => v,
        None => crate::grid::body_aspect_ratio(&mask).ok_or(Error::EmptyMask)?,
    };
    let box_ = compute_bbox(&mask, ratio, size)?;
    let (out, mut ctx) = roi_resample(&padded, &box_, size)?;
    ctx.pad_left = sil.width() / 2;
    ctx.orig_width = sil.width();
    Ok((out, ctx))
}

/// Scatter the output gradient back through the bilinear sampling. The box
/// is a constant of the forward pass, so this is exact for every pixel whose
/// perturbation leaves the binarized mask unchanged.
pub fn gait_align_backward(ctx: &AlignContext, grad_out: &GradGrid) -> Result<GradGrid> {
    if grad_out.height() != ctx.target.height || grad_out.width() != ctx.target.width {
        return Err(Error::DimensionMismatch {
            context: "gait_align_backward".into(),
            expected_h: ctx.target.height,
            expected_w: ctx.target.width,
            got_h: grad_out.height(),
            got_w: grad_out.width(),
        });
    }
    let mut grad_padded = GradGrid::zeros(ctx.src_height, ctx.src_width);
    let sy = ctx.box_.height() / ctx.target.height as f64;
    let sx = ctx.box_.width() / ctx.target.width as f64;
    for i in 0..ctx.target.height {
        let y = ctx.box_.top + (i as f64 + 0.5) * sy - 0.5;
        for j in 0..ctx.target.width {
            let x = ctx.box_.left + (j as f64 + 0.5) * sx - 0.5;
            let g = grad_out.get(i, j);
            if g == 0.0 {
                continue;
            }
            let y0 = y.floor();
            let x0 = x.floor();
            let fy = y - y0;
            let fx = x - x0;
            let (y0, x0) = (y0 as isize, x0 as isize);
            for (dy, dx, w) in [
                (0, 0, (1.0 - fy) * (1.0 - fx)),
                (0, 1, (1.0 - fy) * fx),
                (1, 0, fy * (1.0 - fx)),
                (1, 1, fy * fx),
            ] {
                let (ry, rx) = (y0 + dy, x0 + dx);
                if ry >= 0
                    && rx >= 0
                    && (ry as usize) < ctx.src_height
                    && (rx as usize) < ctx.src_width
                {
                    grad_padded.add(ry as usize, rx as usize, w * g);
                }
            }
        }
    }
    // Drop the gradient on the zero padding; those inputs are constants.
    let mut out = GradGrid::zeros(ctx.src_height, ctx.orig_width);
    for r in 0..ctx.src_height {
        for c in 0..ctx.orig_width {
            out.set(r, c, grad_padded.get(r, c + ctx.pad_left));
        }
    }
    Ok(out)
}

/// Offline size normalization for binary silhouettes, the non-differentiable
/// sibling of `gait_align`: crop to the body rows, scale to the target
/// height preserving aspect ratio, center on the mean foreground column, and
/// threshold back to binary. A body wider than the target is center-cropped
/// by the canvas bounds rather than rejected.
///
/// Written as its own direct sampling loop, deliberately not sharing the RoI
/// code path, so the two implementations can cross-validate each other.
pub fn size_normalize(sil: &Grid, size: TargetSize) -> Result<Grid> {
    if !sil.is_binary() {
        return Err(Error::NonBinaryInput {
            context: "size_normalize".into(),
        });
    }
    let mut top = usize::MAX;
    let mut bottom = 0usize;
    let mut col_sum = 0.0f64;
    let mut count = 0usize;
    for row in 0..sil.height() {
        for col in 0..sil.width() {
            if sil.get(row, col) == 1.0 {
                top = top.min(row);
                bottom = bottom.max(row);
                col_sum += col as f64;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let body_h = (bottom + 1 - top) as f64;
    let scale = body_h / size.height as f64;
    let mean_col = col_sum / count as f64;
    let mut out = Grid::zeros(size.height, size.width, GridKind::Binary);
    for i in 0..size.height {
        let y = top as f64 + (i as f64 + 0.5) * scale - 0.5;
        let yf = y.floor();
        let fy = y - yf;
        for j in 0..size.width {
            // Same mean-column arithmetic as the crop box: column j reads
            // scale px to the right of the box left edge's sample origin.
            let x = mean_col - size.width as f64 / 2.0 * scale + (j as f64 + 0.5) * scale - 0.5;
            let xf = x.floor();
            let fx = x - xf;
            let (y0, x0) = (yf as isize, xf as isize);
            let v = (1.0 - fy)
                * ((1.0 - fx) * sil.get_padded(y0, x0) + fx * sil.get_padded(y0, x0 + 1))
                + fy * ((1.0 - fx) * sil.get_padded(y0 + 1, x0)
                    + fx * sil.get_padded(y0 + 1, x0 + 1));
            if round_half_up(v) >= 1.0 {
                out.set(i, j, 1.0);
            }
        }
    }
    Ok(out)
}

/// Simulated detector jitter: with probability 1/2, translate by an integer
/// offset drawn uniformly from [-max_offset, max_offset] on each axis, zero
/// filling. Draw order is fixed: the coin first, then dx, then dy.
pub fn disturb(sil: &Grid, seed: u64, max_offset: usize) -> Grid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if !rng.random_bool(0.5) {
        return sil.clone();
    }
    let m = max_offset as i64;
    let dx = rng.random_range(-m..=m) as isize;
    let dy = rng.random_range(-m..=m) as isize;
    sil.translated(dx, dy)
}

/// Default disturbance amplitude: 10% of the larger frame dimension.
pub fn default_max_offset(height: usize, width: usize) -> usize {
    height.max(width) / 10
}
