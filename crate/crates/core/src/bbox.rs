//! Center-form bounding boxes and overlap geometry.

use crate::math;

/// Axis-aligned box stored as center position plus size, in pixels.
///
/// The corner form is `[cx - w/2, cx + w/2] x [cy - h/2, cy + h/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    /// Both sizes must be strictly positive.
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        assert!(w > 0.0 && h > 0.0, "box sizes must be positive");
        BBox { cx, cy, w, h }
    }

    pub fn from_tlwh(left: f64, top: f64, w: f64, h: f64) -> Self {
        BBox::new(left + w / 2.0, top + h / 2.0, w, h)
    }

    /// `(left, top, w, h)` corner form used by the file formats.
    pub fn to_tlwh(&self) -> (f64, f64, f64, f64) {
        (self.cx - self.w / 2.0, self.cy - self.h / 2.0, self.w, self.h)
    }

    pub fn left(&self) -> f64 {
        self.cx - self.w / 2.0
    }
    pub fn right(&self) -> f64 {
        self.cx + self.w / 2.0
    }
    pub fn top(&self) -> f64 {
        self.cy - self.h / 2.0
    }
    pub fn bottom(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn diagonal(&self) -> f64 {
        math::sqrt(self.w * self.w + self.h * self.h)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        BBox { cx: self.cx + dx, cy: self.cy + dy, ..*self }
    }

    /// Grows the box by `margin` pixels on every side.
    pub fn inflated(&self, margin: f64) -> Self {
        BBox::new(self.cx, self.cy, self.w + 2.0 * margin, self.h + 2.0 * margin)
    }

    /// `[cx, cy, w, h]` as a flat vector, the motion-cue layout.
    pub fn as_vec4(&self) -> [f64; 4] {
        [self.cx, self.cy, self.w, self.h]
    }
}

/// Intersection area over union area; 0 when disjoint, 1 when identical.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = overlap(a.left(), a.right(), b.left(), b.right());
    let iy = overlap(a.top(), a.bottom(), b.top(), b.bottom());
    let inter = ix * iy;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter / union
}

#[inline]
fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}
