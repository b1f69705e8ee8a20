//! Silhouette synthesis: composite = edge * prob + interior.
//!
//! The interior passes through untouched and the edge band is filled with
//! the probability map, so gradients reach the probability only where the
//! edge mask is set. The backward pass is the diagonal Jacobian of that
//! expression: d composite / d prob = edge, pointwise.

use crate::error::{Error, Result};
use crate::grid::{GradGrid, Grid};

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub composite: Grid,
    /// Edge mask captured at forward time; the backward pass needs it.
    pub saved_edge: Grid,
}

fn check_dims(a: &Grid, b: &Grid, context: &str) -> Result<()> {
    if !a.same_dims(b) {
        return Err(Error::DimensionMismatch {
            context: context.into(),
            expected_h: a.height(),
            expected_w: a.width(),
            got_h: b.height(),
            got_w: b.width(),
        });
    }
    Ok(())
}

/// Composite a probability map over an edge/interior decomposition.
///
/// `edge` and `interior` must be binary and disjoint; `prob` holds values in
/// `[0, 1]` (a binary mask is accepted where a probability map is expected).
pub fn synthesize(edge: &Grid, interior: &Grid, prob: &Grid) -> Result<SynthesisResult> {
    if !edge.is_binary() {
        return Err(Error::NonBinaryInput {
            context: "synthesize edge".into(),
        });
    }
    if !interior.is_binary() {
        return Err(Error::NonBinaryInput {
            context: "synthesize interior".into(),
        });
    }
    check_dims(edge, interior, "synthesize edge/interior")?;
    check_dims(edge, prob, "synthesize edge/prob")?;
    let (h, w) = (edge.height(), edge.width());
    let mut values = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let e = edge.get(r, c);
            let i = interior.get(r, c);
            if e == 1.0 && i == 1.0 {
                return Err(Error::OverlappingMasks { row: r, col: c });
            }
            values.push(e * prob.get(r, c) + i);
        }
    }
    // Disjointness bounds each value by max(prob, 1), so this cannot fail.
    let composite = Grid::float(h, w, values)?;
    Ok(SynthesisResult {
        composite,
        saved_edge: edge.clone(),
    })
}

/// Gradient of a scalar loss w.r.t. the probability map, given its gradient
/// w.r.t. the composite. Zero everywhere off the edge band.
pub fn synthesize_backward(result: &SynthesisResult, grad_composite: &GradGrid) -> Result<GradGrid> {
    let edge = &result.saved_edge;
    if grad_composite.height() != edge.height() || grad_composite.width() != edge.width() {
        return Err(Error::DimensionMismatch {
            context: "synthesize_backward".into(),
            expected_h: edge.height(),
            expected_w: edge.width(),
            got_h: grad_composite.height(),
            got_w: grad_composite.width(),
        });
    }
    let mut out = GradGrid::zeros(edge.height(), edge.width());
    for r in 0..edge.height() {
        for c in 0..edge.width() {
            out.set(r, c, edge.get(r, c) * grad_composite.get(r, c));
        }
    }
    Ok(out)
}

/// Numerical floor keeping log() finite; probabilities are clamped to
/// [EPS, 1 - EPS] before both the loss and its gradient.
pub const BCE_EPS: f64 = 1e-7;

/// Mean binary cross-entropy and its gradient w.r.t. the probabilities.
pub fn bce_loss(prob: &Grid, target: &Grid) -> Result<(f64, GradGrid)> {
    if !target.is_binary() {
        return Err(Error::NonBinaryInput {
            context: "bce target".into(),
        });
    }
    check_dims(prob, target, "bce prob/target")?;
    let n = (prob.height() * prob.width()) as f64;
    let mut loss = 0.0;
    let mut grad = GradGrid::zeros(prob.height(), prob.width());
    for r in 0..prob.height() {
        for c in 0..prob.width() {
            let p = prob.get(r, c).clamp(BCE_EPS, 1.0 - BCE_EPS);
            let t = target.get(r, c);
            loss -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
            grad.set(r, c, (p - t) / (p * (1.0 - p) * n));
        }
    }
    loss /= n;
    if !loss.is_finite() {
        return Err(Error::NonFiniteResult {
            context: "bce loss".into(),
        });
    }
    Ok((loss, grad))
}

/// Weighting between the segmentation and recognition terms.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub lambda_seg: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { lambda_seg: 10.0 }
    }
}

pub fn joint_loss(seg: f64, rec: f64, weights: &LossWeights) -> Result<f64> {
    if !seg.is_finite() || !rec.is_finite() || !weights.lambda_seg.is_finite() {
        return Err(Error::NonFiniteInput {
            context: "joint loss".into(),
        });
    }
    Ok(weights.lambda_seg * seg + rec)
}

/// Convenience: rebuild a mask from its own decomposition. Used by tests and
/// the self-check; with prob = mask this reproduces the mask exactly.
pub fn reconstruct(
    pair: &crate::morphology::EdgeInteriorPair,
    prob: &Grid,
) -> Result<SynthesisResult> {
    synthesize(&pair.edge, &pair.interior, prob)
}
