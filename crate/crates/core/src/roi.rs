//! Square-box adjustment and crop extraction.
//!
//! A detected bounding box is scaled up to include its surroundings, squared
//! on the longer side, shifted (never shrunk) back inside the frame when it
//! overruns an edge, and finally cropped and resampled to a fixed 224x224 RGB
//! patch.

use serde::Serialize;
use thiserror::Error;

/// Side length in pixels of every crop produced by [`crop_and_resize`].
pub const CROP_SIZE: usize = 224;

#[derive(Debug, Error, PartialEq)]
pub enum RoiError {
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("box too large: scaled square side {side} does not fit a {width}x{height} frame")]
    BoxTooLarge { side: f64, width: u32, height: u32 },
    #[error("box ({x1},{y1})-({x2},{y2}) lies outside a {width}x{height} frame")]
    BoxOutOfFrame {
        x1: u32,
        y1: u32,
        x2: u32,
        y2: u32,
        width: u32,
        height: u32,
    },
    #[error("pixel buffer holds {actual} bytes, expected {width}x{height}x3")]
    BadBufferLength { width: u32, height: u32, actual: usize },
    #[error("frame dimensions must be at least 1x1, got {0}x{1}")]
    BadDims(u32, u32),
    #[error("scale factor must be positive and finite, got {0}")]
    BadScale(f64),
}

/// Width and height of a camera frame in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FrameDims {
    pub width: u32,
    pub height: u32,
}

impl FrameDims {
    pub fn new(width: u32, height: u32) -> Result<Self, RoiError> {
        if width == 0 || height == 0 {
            return Err(RoiError::BadDims(width, height));
        }
        Ok(Self { width, height })
    }
}

/// Detector output box in continuous pixel coordinates, origin top-left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BoundingBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, RoiError> {
        for v in [x1, y1, x2, y2] {
            if !v.is_finite() {
                return Err(RoiError::InvalidBox(format!(
                    "non-finite coordinate in ({x1},{y1})-({x2},{y2})"
                )));
            }
        }
        if x2 <= x1 || y2 <= y1 {
            return Err(RoiError::InvalidBox(format!(
                "degenerate box ({x1},{y1})-({x2},{y2})"
            )));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    fn check_in_frame(&self, dims: FrameDims) -> Result<(), RoiError> {
        let (w, h) = (f64::from(dims.width), f64::from(dims.height));
        if self.x1 < 0.0 || self.y1 < 0.0 || self.x2 > w || self.y2 > h {
            return Err(RoiError::InvalidBox(format!(
                "box ({},{})-({},{}) outside frame {}x{}",
                self.x1, self.y1, self.x2, self.y2, dims.width, dims.height
            )));
        }
        Ok(())
    }
}

/// Integer-coordinate square crop region, floored from an exact square.
///
/// Width and height may differ by one pixel because the floor is applied to
/// each edge independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SquareBox {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
}

impl SquareBox {
    pub fn new(x1: u32, y1: u32, x2: u32, y2: u32) -> Result<Self, RoiError> {
        if x2 <= x1 || y2 <= y1 {
            return Err(RoiError::InvalidBox(format!(
                "degenerate square ({x1},{y1})-({x2},{y2})"
            )));
        }
        let b = Self { x1, y1, x2, y2 };
        if b.width().abs_diff(b.height()) > 1 {
            return Err(RoiError::InvalidBox(format!(
                "({x1},{y1})-({x2},{y2}) is not square within one pixel"
            )));
        }
        Ok(b)
    }

    pub fn width(&self) -> u32 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> u32 {
        self.y2 - self.y1
    }

    /// Pixel count of the region, the copy cost of extracting it.
    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }
}

/// Row-major 8-bit RGB frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelFrame {
    dims: FrameDims,
    pixels: Vec<u8>,
}

impl PixelFrame {
    pub fn new(dims: FrameDims, pixels: Vec<u8>) -> Result<Self, RoiError> {
        let expected = dims.width as usize * dims.height as usize * 3;
        if pixels.len() != expected {
            return Err(RoiError::BadBufferLength {
                width: dims.width,
                height: dims.height,
                actual: pixels.len(),
            });
        }
        Ok(Self { dims, pixels })
    }

    pub fn dims(&self) -> FrameDims {
        self.dims
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }
}

/// Fixed-size 224x224 RGB crop together with the region it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CroppedImage {
    pixels: Vec<u8>,
    source_box: SquareBox,
}

impl CroppedImage {
    pub fn new(pixels: Vec<u8>, source_box: SquareBox) -> Result<Self, RoiError> {
        if pixels.len() != CROP_SIZE * CROP_SIZE * 3 {
            return Err(RoiError::BadBufferLength {
                width: CROP_SIZE as u32,
                height: CROP_SIZE as u32,
                actual: pixels.len(),
            });
        }
        Ok(Self { pixels, source_box })
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn source_box(&self) -> SquareBox {
        self.source_box
    }
}

/// Grows `bbox` by `scale`, squares it on the longer side, and shifts it back
/// inside the frame.
///
/// The square has exact pre-floor side `L = scale * max(bb_w, bb_h)` centered
/// on the box center; each edge clamp shifts the square without resizing it,
/// and the four coordinates are floored only on return. Boxes whose scaled
/// side exceeds either frame dimension are rejected: the opposing clamps
/// would push the square back out of the frame.
pub fn adjust_to_square(
    bbox: &BoundingBox,
    dims: FrameDims,
    scale: f64,
) -> Result<SquareBox, RoiError> {
    if !scale.is_finite() || scale <= 0.0 {
        return Err(RoiError::BadScale(scale));
    }
    bbox.check_in_frame(dims)?;

    let (frame_w, frame_h) = (f64::from(dims.width), f64::from(dims.height));
    let bb_w = bbox.width();
    let bb_h = bbox.height();
    let side = (bb_w * scale).max(bb_h * scale);
    if side > frame_w || side > frame_h {
        return Err(RoiError::BoxTooLarge {
            side,
            width: dims.width,
            height: dims.height,
        });
    }
    if side < 1.0 {
        return Err(RoiError::InvalidBox(format!(
            "scaled side {side} is below one pixel"
        )));
    }

    let cx = bbox.x1 + bb_w / 2.0;
    let cy = bbox.y1 + bb_h / 2.0;
    let mut x1 = cx - side / 2.0;
    let mut x2 = cx + side / 2.0;
    let mut y1 = cy - side / 2.0;
    let mut y2 = cy + side / 2.0;

    if x1 < 0.0 {
        x2 -= x1;
        x1 = 0.0;
    }
    if y1 < 0.0 {
        y2 -= y1;
        y1 = 0.0;
    }
    if x2 > frame_w {
        let shift = x2 - frame_w;
        x1 -= shift;
        x2 = frame_w;
    }
    if y2 > frame_h {
        let shift = y2 - frame_h;
        y1 -= shift;
        y2 = frame_h;
    }
    // In real arithmetic the clamps leave both origins non-negative; guard
    // the few-ulp case where side == frame dimension and rounding leaks.
    x1 = x1.max(0.0);
    y1 = y1.max(0.0);

    SquareBox::new(
        x1.floor() as u32,
        y1.floor() as u32,
        x2.floor() as u32,
        y2.floor() as u32,
    )
}

/// Copies the boxed region out of the frame and resamples it to 224x224 with
/// corner-aligned bilinear interpolation.
///
/// Deterministic: identical inputs yield byte-identical crops. A region that
/// is already 224x224 is copied verbatim.
pub fn crop_and_resize(frame: &PixelFrame, region: &SquareBox) -> Result<CroppedImage, RoiError> {
    let dims = frame.dims();
    if region.x2 > dims.width || region.y2 > dims.height {
        return Err(RoiError::BoxOutOfFrame {
            x1: region.x1,
            y1: region.y1,
            x2: region.x2,
            y2: region.y2,
            width: dims.width,
            height: dims.height,
        });
    }

    let src_w = region.width() as usize;
    let src_h = region.height() as usize;
    let stride = dims.width as usize * 3;
    let mut src = Vec::with_capacity(src_w * src_h * 3);
    for row in region.y1 as usize..region.y2 as usize {
        let start = row * stride + region.x1 as usize * 3;
        src.extend_from_slice(&frame.pixels()[start..start + src_w * 3]);
    }

    let pixels = if src_w == CROP_SIZE && src_h == CROP_SIZE {
        src
    } else {
        resize_bilinear(&src, src_w, src_h)
    };
    CroppedImage::new(pixels, *region)
}

fn resize_bilinear(src: &[u8], src_w: usize, src_h: usize) -> Vec<u8> {
    // Corner-aligned sampling grid: output corners map exactly to source
    // corners, so an N->N resize is the identity.
    let step_x = if src_w > 1 {
        (src_w - 1) as f64 / (CROP_SIZE - 1) as f64
    } else {
        0.0
    };
    let step_y = if src_h > 1 {
        (src_h - 1) as f64 / (CROP_SIZE - 1) as f64
    } else {
        0.0
    };

    let mut out = Vec::with_capacity(CROP_SIZE * CROP_SIZE * 3);
    for oy in 0..CROP_SIZE {
        let sy = oy as f64 * step_y;
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(src_h - 1);
        let fy = sy - y0 as f64;
        for ox in 0..CROP_SIZE {
            let sx = ox as f64 * step_x;
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(src_w - 1);
            let fx = sx - x0 as f64;
            for c in 0..3 {
                let p00 = f64::from(src[(y0 * src_w + x0) * 3 + c]);
                let p10 = f64::from(src[(y0 * src_w + x1) * 3 + c]);
                let p01 = f64::from(src[(y1 * src_w + x0) * 3 + c]);
                let p11 = f64::from(src[(y1 * src_w + x1) * 3 + c]);
                let top = p00 + (p10 - p00) * fx;
                let bottom = p01 + (p11 - p01) * fx;
                let v = top + (bottom - top) * fy;
                out.push((v + 0.5).floor() as u8);
            }
        }
    }
    out
}

/// Operation-count estimate for cropping a frame's boxes: the copied pixels
/// per region plus one fixed-size resample per box. Constant factors dropped.
pub fn crop_cost_model(boxes: &[SquareBox]) -> u64 {
    let copy: u64 = boxes.iter().map(SquareBox::area).sum();
    copy + boxes.len() as u64 * (CROP_SIZE * CROP_SIZE) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dims(w: u32, h: u32) -> FrameDims {
        FrameDims::new(w, h).unwrap()
    }

    #[test]
    fn centered_box_is_not_clamped() {
        let bbox = BoundingBox::new(1000.0, 1000.0, 1100.0, 1100.0).unwrap();
        let sq = adjust_to_square(&bbox, dims(2048, 2048), 2.0).unwrap();
        assert_eq!(sq, SquareBox::new(950, 950, 1150, 1150).unwrap());
    }

    #[test]
    fn corner_box_is_shifted_inside() {
        let bbox = BoundingBox::new(10.0, 20.0, 30.0, 60.0).unwrap();
        let sq = adjust_to_square(&bbox, dims(2048, 2048), 2.5).unwrap();
        assert_eq!(sq, SquareBox::new(0, 0, 100, 100).unwrap());
    }

    #[test]
    fn square_box_with_unit_scale_is_a_fixed_point() {
        let bbox = BoundingBox::new(100.0, 100.0, 300.0, 300.0).unwrap();
        let sq = adjust_to_square(&bbox, dims(2048, 2048), 1.0).unwrap();
        assert_eq!(sq, SquareBox::new(100, 100, 300, 300).unwrap());
    }

    #[test]
    fn oversized_box_is_rejected() {
        let bbox = BoundingBox::new(0.0, 0.0, 100.0, 100.0).unwrap();
        let err = adjust_to_square(&bbox, dims(128, 128), 2.0).unwrap_err();
        assert!(matches!(err, RoiError::BoxTooLarge { .. }));
    }

    #[test]
    fn degenerate_box_is_rejected() {
        assert!(matches!(
            BoundingBox::new(10.0, 10.0, 10.0, 20.0),
            Err(RoiError::InvalidBox(_))
        ));
    }

    #[test]
    fn box_outside_frame_is_rejected() {
        let bbox = BoundingBox::new(-1.0, 0.0, 50.0, 50.0).unwrap();
        assert!(matches!(
            adjust_to_square(&bbox, dims(2048, 2048), 1.0),
            Err(RoiError::InvalidBox(_))
        ));
    }

    fn gradient_frame(w: u32, h: u32) -> PixelFrame {
        let mut pixels = Vec::with_capacity(w as usize * h as usize * 3);
        for y in 0..h {
            for x in 0..w {
                pixels.push((x % 251) as u8);
                pixels.push((y % 241) as u8);
                pixels.push(((x + y) % 253) as u8);
            }
        }
        PixelFrame::new(dims(w, h), pixels).unwrap()
    }

    #[test]
    fn crop_of_exact_size_is_identity() {
        let frame = gradient_frame(512, 512);
        let region = SquareBox::new(10, 20, 10 + 224, 20 + 224).unwrap();
        let crop = crop_and_resize(&frame, &region).unwrap();
        let stride = 512 * 3;
        for row in 0..CROP_SIZE {
            let start = (20 + row) * stride + 10 * 3;
            assert_eq!(
                &crop.pixels()[row * CROP_SIZE * 3..(row + 1) * CROP_SIZE * 3],
                &frame.pixels()[start..start + CROP_SIZE * 3]
            );
        }
    }

    #[test]
    fn constant_region_resamples_to_constant() {
        let fill = [13u8, 77, 201];
        let pixels: Vec<u8> = fill.iter().copied().cycle().take(512 * 512 * 3).collect();
        let frame = PixelFrame::new(dims(512, 512), pixels).unwrap();
        let region = SquareBox::new(0, 0, 448, 448).unwrap();
        let crop = crop_and_resize(&frame, &region).unwrap();
        for px in crop.pixels().chunks(3) {
            assert_eq!(px, fill);
        }
    }

    #[test]
    fn upscale_maps_corners_to_corners() {
        let frame = gradient_frame(512, 512);
        let region = SquareBox::new(50, 60, 150, 160).unwrap();
        let crop = crop_and_resize(&frame, &region).unwrap();
        let src_px = |x: usize, y: usize| {
            let start = y * 512 * 3 + x * 3;
            &frame.pixels()[start..start + 3]
        };
        let out_px = |x: usize, y: usize| {
            let start = y * CROP_SIZE * 3 + x * 3;
            &crop.pixels()[start..start + 3]
        };
        assert_eq!(out_px(0, 0), src_px(50, 60));
        assert_eq!(out_px(CROP_SIZE - 1, 0), src_px(149, 60));
        assert_eq!(out_px(0, CROP_SIZE - 1), src_px(50, 159));
        assert_eq!(out_px(CROP_SIZE - 1, CROP_SIZE - 1), src_px(149, 159));
    }

    #[test]
    fn crop_is_deterministic() {
        let frame = gradient_frame(300, 300);
        let region = SquareBox::new(5, 5, 105, 105).unwrap();
        let a = crop_and_resize(&frame, &region).unwrap();
        let b = crop_and_resize(&frame, &region).unwrap();
        assert_eq!(a.pixels(), b.pixels());
    }

    #[test]
    fn crop_outside_frame_is_rejected() {
        let frame = gradient_frame(100, 100);
        let region = SquareBox::new(50, 50, 150, 150).unwrap();
        assert!(matches!(
            crop_and_resize(&frame, &region),
            Err(RoiError::BoxOutOfFrame { .. })
        ));
    }

    #[test]
    fn cost_model_matches_hand_computed_values() {
        assert_eq!(crop_cost_model(&[]), 0);
        let b100 = SquareBox::new(0, 0, 100, 100).unwrap();
        assert_eq!(crop_cost_model(&[b100]), 100 * 100 + 224 * 224);
        let b50 = SquareBox::new(0, 0, 50, 50).unwrap();
        assert_eq!(
            crop_cost_model(&[b50, b100]),
            2500 + 10000 + 2 * (224 * 224)
        );
        assert_eq!(crop_cost_model(&[b50, b100]), 112852);
    }

    proptest! {
        #[test]
        fn adjusted_square_stays_in_frame(
            w in 64u32..2048,
            h in 64u32..2048,
            fx in 0.0f64..1.0,
            fy in 0.0f64..1.0,
            fw in 0.01f64..0.5,
            fh in 0.01f64..0.5,
            scale in 1.0f64..3.0,
        ) {
            let dims = FrameDims::new(w, h).unwrap();
            let bw = (fw * f64::from(w)).max(1.0);
            let bh = (fh * f64::from(h)).max(1.0);
            let x1 = fx * (f64::from(w) - bw);
            let y1 = fy * (f64::from(h) - bh);
            let bbox = BoundingBox::new(x1, y1, x1 + bw, y1 + bh).unwrap();
            match adjust_to_square(&bbox, dims, scale) {
                Ok(sq) => {
                    let side = scale * bw.max(bh);
                    prop_assert!(side <= f64::from(w.min(h)));
                    prop_assert!(sq.x2 <= w && sq.y2 <= h);
                    // Floored edges of an exact square differ by at most one.
                    prop_assert!(sq.width().abs_diff(sq.height()) <= 1);
                    prop_assert!(u64::from(sq.width()) >= side as u64);
                    // Unclamped squares keep the input center within rounding.
                    let frame_w = f64::from(w);
                    let frame_h = f64::from(h);
                    let cx = x1 + bw / 2.0;
                    let cy = y1 + bh / 2.0;
                    let unclamped = cx - side / 2.0 >= 0.0
                        && cx + side / 2.0 <= frame_w
                        && cy - side / 2.0 >= 0.0
                        && cy + side / 2.0 <= frame_h;
                    if unclamped {
                        let out_cx = (f64::from(sq.x1) + f64::from(sq.x2)) / 2.0;
                        let out_cy = (f64::from(sq.y1) + f64::from(sq.y2)) / 2.0;
                        prop_assert!((out_cx - cx).abs() <= 1.0);
                        prop_assert!((out_cy - cy).abs() <= 1.0);
                    }
                }
                Err(RoiError::BoxTooLarge { .. }) => {
                    let side = scale * bw.max(bh);
                    prop_assert!(side > f64::from(w.min(h)));
                }
                Err(e) => return Err(TestCaseError::fail(format!("unexpected error {e}"))),
            }
        }
    }
}
