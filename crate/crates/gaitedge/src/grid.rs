//! Core raster types shared by every stage of the pipeline.
//!
//! A [`Grid`] is a dense row-major raster of `f64` values in `[0, 1]`. The
//! `kind` tag records whether the values are known to be exactly {0, 1}
//! (`Binary`) or merely bounded (`Float`); morphology insists on binary
//! inputs, everything downstream accepts either. Gradients do not live in
//! `[0, 1]`, so they get their own type, [`GradGrid`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Project-wide rounding rule: round half up. Applies to file quantization
/// and to binarization, so 0.5 always lands on 1.
pub fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridKind {
    Binary,
    Float,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    height: usize,
    width: usize,
    kind: GridKind,
    values: Vec<f64>,
}

impl Grid {
    /// Binary grid; every value must be exactly 0.0 or 1.0.
    pub fn binary(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        Self::validate_shape(height, width, values.len())?;
        for &v in &values {
            if v != 0.0 && v != 1.0 {
                return Err(Error::ValueOutOfRange {
                    context: "binary grid".into(),
                    value: v,
                });
            }
        }
        Ok(Grid {
            height,
            width,
            kind: GridKind::Binary,
            values,
        })
    }

    /// Float grid with values in `[0, 1]`; NaN and infinities are rejected.
    pub fn float(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        Self::validate_shape(height, width, values.len())?;
        for &v in &values {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::ValueOutOfRange {
                    context: "float grid".into(),
                    value: v,
                });
            }
        }
        Ok(Grid {
            height,
            width,
            kind: GridKind::Float,
            values,
        })
    }

    pub fn zeros(height: usize, width: usize, kind: GridKind) -> Self {
        // 1x1 is the smallest legal grid, so unwrap cannot fire here.
        assert!(height >= 1 && width >= 1, "grid dimensions must be >= 1");
        Grid {
            height,
            width,
            kind,
            values: vec![0.0; height * width],
        }
    }

    fn validate_shape(height: usize, width: usize, len: usize) -> Result<()> {
        if height < 1 || width < 1 {
            return Err(Error::InvalidParameter {
                what: format!("grid dimensions {height}x{width} (both must be >= 1)"),
            });
        }
        if len != height * width {
            return Err(Error::InvalidParameter {
                what: format!("value buffer of length {len} for a {height}x{width} grid"),
            });
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn is_binary(&self) -> bool {
        self.kind == GridKind::Binary
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width);
        self.values[row * self.width + col]
    }

    /// Read with zero padding outside the frame. Morphology and resampling
    /// both treat the world beyond the border as background.
    #[inline]
    pub fn get_padded(&self, row: isize, col: isize) -> f64 {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            0.0
        } else {
            self.values[row as usize * self.width + col as usize]
        }
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        debug_assert!(row < self.height && col < self.width);
        self.values[row * self.width + col] = v;
    }

    pub fn same_dims(&self, other: &Grid) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Threshold at 0.5 (round half up), yielding a binary grid.
    pub fn binarized(&self) -> Grid {
        let values = self
            .values
            .iter()
            .map(|&v| round_half_up(v).min(1.0))
            .collect();
        Grid {
            height: self.height,
            width: self.width,
            kind: GridKind::Binary,
            values,
        }
    }

    /// Same values, tagged Float. Lets a binary mask flow into slots that
    /// want probabilities.
    pub fn as_float(&self) -> Grid {
        Grid {
            height: self.height,
            width: self.width,
            kind: GridKind::Float,
            values: self.values.clone(),
        }
    }

    pub fn count_foreground(&self) -> usize {
        self.values.iter().filter(|&&v| v >= 0.5).count()
    }

    /// Integer translation with zero fill; content moves `dx` columns right
    /// and `dy` rows down. Kind is preserved (translation cannot introduce
    /// new values).
    pub fn translated(&self, dx: isize, dy: isize) -> Grid {
        let mut out = Grid::zeros(self.height, self.width, self.kind);
        for r in 0..self.height {
            for c in 0..self.width {
                let v = self.get_padded(r as isize - dy, c as isize - dx);
                out.set(r, c, v);
            }
        }
        out
    }
}

/// Unconstrained-signed raster used for gradients. Values must be finite but
/// may take any sign or magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct GradGrid {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl GradGrid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        Grid::validate_shape(height, width, values.len())?;
        for &v in &values {
            if !v.is_finite() {
                return Err(Error::NonFiniteInput {
                    context: "gradient grid".into(),
                });
            }
        }
        Ok(GradGrid {
            height,
            width,
            values,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        GradGrid {
            height,
            width,
            values: vec![0.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width);
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        debug_assert!(row < self.height && col < self.width);
        self.values[row * self.width + col] = v;
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        debug_assert!(row < self.height && col < self.width);
        self.values[row * self.width + col] += v;
    }
}

/// Flat square structuring element, identified by its odd side length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StructuringElement {
    size: usize,
}

impl StructuringElement {
    pub fn new(size: usize) -> Result<Self> {
        if size < 3 || size.is_multiple_of(2) {
            return Err(Error::InvalidParameter {
                what: format!("structuring element size {size} (must be odd and >= 3)"),
            });
        }
        Ok(StructuringElement { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Half-width of the window; a 3x3 element reaches 1 pixel out.
    pub fn radius(&self) -> isize {
        (self.size / 2) as isize
    }
}

/// Output raster size for alignment and embeddings, `(height, width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSize {
    pub height: usize,
    pub width: usize,
}

impl TargetSize {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::InvalidParameter {
                what: format!("target size {height}x{width} (both must be >= 2)"),
            });
        }
        Ok(TargetSize { height, width })
    }
}

impl Default for TargetSize {
    fn default() -> Self {
        TargetSize {
            height: 64,
            width: 44,
        }
    }
}

impl std::fmt::Display for TargetSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConditionKind {
    Normal,
    Bag,
    Clothing,
    Other,
}

/// A walking-condition label like `NM#01` or `BG#02`. The part before `#`
/// classifies the condition; the index distinguishes repeated captures.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Condition(String);

impl Condition {
    pub fn new(label: impl Into<String>) -> Self {
        Condition(label.into())
    }

    pub fn label(&self) -> &str {
        &self.0
    }

    pub fn kind(&self) -> ConditionKind {
        let prefix = self.0.split('#').next().unwrap_or("");
        match prefix {
            "NM" => ConditionKind::Normal,
            "BG" => ConditionKind::Bag,
            "CL" => ConditionKind::Clothing,
            _ => ConditionKind::Other,
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// An ordered run of frames from one (subject, condition, view) capture.
/// All frames share dimensions. `aspect_ratio` is the body's height/width
/// ratio, measured from the first non-empty frame unless overridden.
#[derive(Debug, Clone)]
pub struct GaitSequence {
    pub frames: Vec<Grid>,
    pub subject: String,
    pub condition: Condition,
    pub view: String,
    pub aspect_ratio: f64,
}

impl GaitSequence {
    pub fn new(
        frames: Vec<Grid>,
        subject: impl Into<String>,
        condition: Condition,
        view: impl Into<String>,
    ) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidParameter {
                what: "sequence with zero frames".into(),
            });
        }
        let (h, w) = (frames[0].height(), frames[0].width());
        for f in &frames[1..] {
            if f.height() != h || f.width() != w {
                return Err(Error::DimensionMismatch {
                    context: "sequence frames".into(),
                    expected_h: h,
                    expected_w: w,
                    got_h: f.height(),
                    got_w: f.width(),
                });
            }
        }
        let aspect_ratio = frames
            .iter()
            .find_map(|f| body_aspect_ratio(&f.binarized()))
            .unwrap_or(1.0);
        Ok(GaitSequence {
            frames,
            subject: subject.into(),
            condition,
            view: view.into(),
            aspect_ratio,
        })
    }

    pub fn frame_height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn frame_width(&self) -> usize {
        self.frames[0].width()
    }
}

/// Height/width ratio of the foreground bounding box, or None for an empty
/// mask.
pub fn body_aspect_ratio(mask: &Grid) -> Option<f64> {
    let mut min_r = usize::MAX;
    let mut max_r = 0usize;
    let mut min_c = usize::MAX;
    let mut max_c = 0usize;
    let mut any = false;
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            if mask.get(r, c) >= 0.5 {
                any = true;
                min_r = min_r.min(r);
                max_r = max_r.max(r);
                min_c = min_c.min(c);
                max_c = max_c.max(c);
            }
        }
    }
    if !any {
        return None;
    }
    let h = (max_r - min_r + 1) as f64;
    let w = (max_c - min_c + 1) as f64;
    Some(h / w)
}
