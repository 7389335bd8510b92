//! Image op chains.
//!
//! [`ImageOpChain::apply`] runs a chain fused: geometric ops that only remap
//! coordinates (flip, crop, nearest resize) are folded into per-axis lookup
//! tables, per-pixel ops run at fetch time and the final float conversion is
//! written directly. Each bilinear resize opens a new pass, so a chain with
//! `k` bilinear resizes costs at most `k + 1` passes over the pixels.
//! [`ImageOpChain::apply_sequential`] is the op-at-a-time reference; both
//! produce bitwise identical results.

use std::fmt;

use crate::{ImageError, ImageRecord, PixelMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResizeMethod {
    Nearest,
    Bilinear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImageOp {
    Resize {
        width: usize,
        height: usize,
        method: ResizeMethod,
    },
    FlipHorizontal,
    Grayscale,
    CropCenter {
        width: usize,
        height: usize,
    },
    Normalize {
        scale: f32,
        offset: f32,
    },
    ToVector,
}

pub const DEFAULT_SCALE: f32 = 1.0 / 255.0;
pub const DEFAULT_OFFSET: f32 = 0.0;

impl fmt::Display for ImageOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageOp::Resize {
                width,
                height,
                method,
            } => {
                let m = match method {
                    ResizeMethod::Nearest => "nearest",
                    ResizeMethod::Bilinear => "bilinear",
                };
                write!(f, "resize:{width}:{height}:{m}")
            }
            ImageOp::FlipHorizontal => f.write_str("flipHorizontal"),
            ImageOp::Grayscale => f.write_str("grayscale"),
            ImageOp::CropCenter { width, height } => write!(f, "cropCenter:{width}:{height}"),
            ImageOp::Normalize { scale, offset } => write!(f, "normalize:{scale:?}:{offset:?}"),
            ImageOp::ToVector => f.write_str("toVector"),
        }
    }
}

impl ImageOp {
    /// Parses the textual form produced by `Display`, e.g. `resize:64:64:bilinear`.
    pub fn parse(spec: &str) -> Result<Self, ImageError> {
        let bad = || ImageError::InvalidChain(format!("cannot parse op {spec:?}"));
        let mut parts = spec.split(':');
        let name = parts.next().ok_or_else(bad)?;
        let args: Vec<&str> = parts.collect();
        let dim = |s: &str| -> Result<usize, ImageError> {
            match s.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(ImageError::InvalidChain(format!(
                    "dimension {s:?} in {spec:?} must be a positive integer"
                ))),
            }
        };
        let num = |s: &str| -> Result<f32, ImageError> {
            s.parse::<f32>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(bad)
        };
        let op = match (name, args.as_slice()) {
            ("resize", [w, h]) => ImageOp::Resize {
                width: dim(w)?,
                height: dim(h)?,
                method: ResizeMethod::Bilinear,
            },
            ("resize", [w, h, m]) => ImageOp::Resize {
                width: dim(w)?,
                height: dim(h)?,
                method: match *m {
                    "nearest" => ResizeMethod::Nearest,
                    "bilinear" => ResizeMethod::Bilinear,
                    _ => return Err(bad()),
                },
            },
            ("flipHorizontal", []) => ImageOp::FlipHorizontal,
            ("grayscale", []) => ImageOp::Grayscale,
            ("cropCenter", [w, h]) => ImageOp::CropCenter {
                width: dim(w)?,
                height: dim(h)?,
            },
            ("normalize", []) => ImageOp::Normalize {
                scale: DEFAULT_SCALE,
                offset: DEFAULT_OFFSET,
            },
            ("normalize", [s, o]) => ImageOp::Normalize {
                scale: num(s)?,
                offset: num(o)?,
            },
            ("toVector", []) => ImageOp::ToVector,
            _ => return Err(bad()),
        };
        Ok(op)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChainOutput {
    Image(ImageRecord),
    Vector(Vec<f32>),
}

impl ChainOutput {
    pub fn into_image(self) -> Option<ImageRecord> {
        match self {
            ChainOutput::Image(img) => Some(img),
            ChainOutput::Vector(_) => None,
        }
    }

    pub fn into_vector(self) -> Option<Vec<f32>> {
        match self {
            ChainOutput::Vector(v) => Some(v),
            ChainOutput::Image(_) => None,
        }
    }
}

/// A validated sequence of image ops.
///
/// `toVector` may only appear last and `normalize` must be immediately
/// followed by `toVector`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImageOpChain {
    ops: Vec<ImageOp>,
}

impl ImageOpChain {
    pub fn new(ops: Vec<ImageOp>) -> Result<Self, ImageError> {
        for (i, op) in ops.iter().enumerate() {
            let last = i + 1 == ops.len();
            match op {
                ImageOp::ToVector if !last => {
                    return Err(ImageError::InvalidChain(
                        "toVector must be the last op".into(),
                    ))
                }
                ImageOp::Normalize { .. } if ops.get(i + 1) != Some(&ImageOp::ToVector) => {
                    return Err(ImageError::InvalidChain(
                        "normalize must be followed by toVector".into(),
                    ))
                }
                ImageOp::Resize { width, height, .. } | ImageOp::CropCenter { width, height }
                    if *width == 0 || *height == 0 =>
                {
                    return Err(ImageError::InvalidChain(format!("zero-sized {op}")))
                }
                _ => {}
            }
        }
        Ok(ImageOpChain { ops })
    }

    pub fn parse<S: AsRef<str>>(specs: &[S]) -> Result<Self, ImageError> {
        let ops = specs
            .iter()
            .map(|s| ImageOp::parse(s.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        ImageOpChain::new(ops)
    }

    pub fn to_specs(&self) -> Vec<String> {
        self.ops.iter().map(|op| op.to_string()).collect()
    }

    pub fn ops(&self) -> &[ImageOp] {
        &self.ops
    }

    pub fn produces_vector(&self) -> bool {
        self.ops.last() == Some(&ImageOp::ToVector)
    }

    /// Statically computes the output `(width, height, channels)` for an input
    /// of the given geometry, or the error the chain would raise.
    pub fn output_geometry(
        &self,
        width: usize,
        height: usize,
        mode: PixelMode,
    ) -> Result<(usize, usize, PixelMode), ImageError> {
        let (mut w, mut h, mut m) = (width, height, mode);
        for op in &self.ops {
            match *op {
                ImageOp::Resize { width, height, .. } => (w, h) = (width, height),
                ImageOp::CropCenter { width, height } => {
                    check_crop(width, height, w, h)?;
                    (w, h) = (width, height);
                }
                ImageOp::Grayscale => m = PixelMode::Gray8,
                _ => {}
            }
        }
        Ok((w, h, m))
    }

    /// Fused execution.
    pub fn apply(&self, img: &ImageRecord) -> Result<ChainOutput, ImageError> {
        let mut current: Option<ImageRecord> = None;
        let mut start = 0;
        loop {
            let source = current.as_ref().unwrap_or(img);
            // A segment runs up to (not including) the next bilinear resize
            // after its first op.
            let end = self.ops[start..]
                .iter()
                .enumerate()
                .skip(1)
                .find(|(_, op)| {
                    matches!(
                        op,
                        ImageOp::Resize {
                            method: ResizeMethod::Bilinear,
                            ..
                        }
                    )
                })
                .map(|(i, _)| start + i)
                .unwrap_or(self.ops.len());
            let out = run_segment(source, &self.ops[start..end])?;
            if end == self.ops.len() {
                return Ok(out);
            }
            current = Some(out.into_image().expect("only the last segment vectorizes"));
            start = end;
        }
    }

    /// Reference execution, one op at a time.
    pub fn apply_sequential(&self, img: &ImageRecord) -> Result<ChainOutput, ImageError> {
        let mut cur = img.clone();
        let mut norm = (DEFAULT_SCALE, DEFAULT_OFFSET);
        for op in &self.ops {
            cur = match *op {
                ImageOp::Resize {
                    width,
                    height,
                    method: ResizeMethod::Nearest,
                } => resize_nearest(&cur, width, height),
                ImageOp::Resize {
                    width,
                    height,
                    method: ResizeMethod::Bilinear,
                } => resize_bilinear(&cur, width, height),
                ImageOp::FlipHorizontal => flip_horizontal(&cur),
                ImageOp::Grayscale => grayscale(&cur),
                ImageOp::CropCenter { width, height } => crop_center(&cur, width, height)?,
                ImageOp::Normalize { scale, offset } => {
                    norm = (scale, offset);
                    cur
                }
                ImageOp::ToVector => {
                    return Ok(ChainOutput::Vector(
                        cur.data()
                            .iter()
                            .map(|&b| normalize_sample(b, norm.0, norm.1))
                            .collect(),
                    ))
                }
            };
        }
        Ok(ChainOutput::Image(cur))
    }
}

#[inline]
fn normalize_sample(b: u8, scale: f32, offset: f32) -> f32 {
    b as f32 * scale + offset
}

fn check_crop(cw: usize, ch: usize, w: usize, h: usize) -> Result<(), ImageError> {
    if cw > w || ch > h {
        return Err(ImageError::CropOutOfBounds {
            crop_w: cw,
            crop_h: ch,
            width: w,
            height: h,
        });
    }
    Ok(())
}

/// Nearest-neighbour source index with half-pixel centers.
#[inline]
fn nearest_index(dst: usize, src_len: usize, dst_len: usize) -> usize {
    (((2 * dst + 1) * src_len) / (2 * dst_len)).min(src_len - 1)
}

/// Bilinear sampling taps for one axis: `(lo, hi, frac)`.
fn bilinear_taps(src_len: usize, dst_len: usize) -> Vec<(usize, usize, f64)> {
    let scale = src_len as f64 / dst_len as f64;
    (0..dst_len)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src_len - 1);
            (lo, hi, s - lo as f64)
        })
        .collect()
}

#[inline]
fn bilinear_sample(
    img: &ImageRecord,
    xt: (usize, usize, f64),
    yt: (usize, usize, f64),
    c: usize,
) -> u8 {
    let p = |x: usize, y: usize| img.sample(x, y, c) as f64;
    let top = (1.0 - xt.2) * p(xt.0, yt.0) + xt.2 * p(xt.1, yt.0);
    let bottom = (1.0 - xt.2) * p(xt.0, yt.1) + xt.2 * p(xt.1, yt.1);
    // f64::round rounds half away from zero.
    ((1.0 - yt.2) * top + yt.2 * bottom)
        .round()
        .clamp(0.0, 255.0) as u8
}

#[inline]
fn luma(r: u8, g: u8, b: u8) -> u8 {
    // 0.299 R + 0.587 G + 0.114 B, rounded half away from zero.
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

fn resize_nearest(img: &ImageRecord, w: usize, h: usize) -> ImageRecord {
    ImageRecord::from_fn(img.path(), w, h, img.mode(), |x, y, c| {
        img.sample(
            nearest_index(x, img.width(), w),
            nearest_index(y, img.height(), h),
            c,
        )
    })
    .expect("positive dimensions")
}

fn resize_bilinear(img: &ImageRecord, w: usize, h: usize) -> ImageRecord {
    let xs = bilinear_taps(img.width(), w);
    let ys = bilinear_taps(img.height(), h);
    ImageRecord::from_fn(img.path(), w, h, img.mode(), |x, y, c| {
        bilinear_sample(img, xs[x], ys[y], c)
    })
    .expect("positive dimensions")
}

fn flip_horizontal(img: &ImageRecord) -> ImageRecord {
    let w = img.width();
    ImageRecord::from_fn(img.path(), w, img.height(), img.mode(), |x, y, c| {
        img.sample(w - 1 - x, y, c)
    })
    .expect("same dimensions")
}

fn grayscale(img: &ImageRecord) -> ImageRecord {
    match img.mode() {
        PixelMode::Gray8 => img.clone(),
        PixelMode::Rgb8 => ImageRecord::from_fn(
            img.path(),
            img.width(),
            img.height(),
            PixelMode::Gray8,
            |x, y, _| {
                luma(
                    img.sample(x, y, 0),
                    img.sample(x, y, 1),
                    img.sample(x, y, 2),
                )
            },
        )
        .expect("same dimensions"),
    }
}

fn crop_center(img: &ImageRecord, w: usize, h: usize) -> Result<ImageRecord, ImageError> {
    check_crop(w, h, img.width(), img.height())?;
    let x0 = (img.width() - w) / 2;
    let y0 = (img.height() - h) / 2;
    Ok(
        ImageRecord::from_fn(img.path(), w, h, img.mode(), |x, y, c| {
            img.sample(x + x0, y + y0, c)
        })
        .expect("positive dimensions"),
    )
}

/// One fused pass. `ops` may start with a bilinear resize; no other bilinear
/// resize appears in it.
fn run_segment(src: &ImageRecord, ops: &[ImageOp]) -> Result<ChainOutput, ImageError> {
    let mut ops = ops;
    let mut taps = None;
    let (mut w, mut h) = (src.width(), src.height());
    if let Some(&ImageOp::Resize {
        width,
        height,
        method: ResizeMethod::Bilinear,
    }) = ops.first()
    {
        taps = Some((
            bilinear_taps(src.width(), width),
            bilinear_taps(src.height(), height),
        ));
        (w, h) = (width, height);
        ops = &ops[1..];
    }

    // xmap[x] / ymap[y]: coordinate in the post-bilinear (or source) grid.
    let mut xmap: Vec<usize> = (0..w).collect();
    let mut ymap: Vec<usize> = (0..h).collect();
    let mut to_gray = false;
    let mut vectorize = None;
    let mut norm = (DEFAULT_SCALE, DEFAULT_OFFSET);
    for op in ops {
        match *op {
            ImageOp::Resize {
                width,
                height,
                method: ResizeMethod::Nearest,
            } => {
                xmap = (0..width)
                    .map(|x| xmap[nearest_index(x, w, width)])
                    .collect();
                ymap = (0..height)
                    .map(|y| ymap[nearest_index(y, h, height)])
                    .collect();
                (w, h) = (width, height);
            }
            ImageOp::Resize { .. } => unreachable!("bilinear resize splits segments"),
            ImageOp::FlipHorizontal => xmap.reverse(),
            ImageOp::CropCenter { width, height } => {
                check_crop(width, height, w, h)?;
                let x0 = (w - width) / 2;
                let y0 = (h - height) / 2;
                xmap = xmap[x0..x0 + width].to_vec();
                ymap = ymap[y0..y0 + height].to_vec();
                (w, h) = (width, height);
            }
            ImageOp::Grayscale => to_gray = true,
            ImageOp::Normalize { scale, offset } => norm = (scale, offset),
            ImageOp::ToVector => vectorize = Some(norm),
        }
    }

    let in_channels = src.channels();
    let out_mode = if to_gray {
        PixelMode::Gray8
    } else {
        src.mode()
    };
    let out_channels = out_mode.channels();
    let mut pixel = [0u8; 3];
    let fetch = |x: usize, y: usize, px: &mut [u8; 3]| {
        let (sx, sy) = (xmap[x], ymap[y]);
        for (c, slot) in px.iter_mut().enumerate().take(in_channels) {
            *slot = match &taps {
                Some((xs, ys)) => bilinear_sample(src, xs[sx], ys[sy], c),
                None => src.sample(sx, sy, c),
            };
        }
        if to_gray && in_channels == 3 {
            px[0] = luma(px[0], px[1], px[2]);
        }
    };

    match vectorize {
        Some((scale, offset)) => {
            let mut out = Vec::with_capacity(w * h * out_channels);
            for y in 0..h {
                for x in 0..w {
                    fetch(x, y, &mut pixel);
                    out.extend(
                        pixel[..out_channels]
                            .iter()
                            .map(|&b| normalize_sample(b, scale, offset)),
                    );
                }
            }
            Ok(ChainOutput::Vector(out))
        }
        None => {
            let mut out = Vec::with_capacity(w * h * out_channels);
            for y in 0..h {
                for x in 0..w {
                    fetch(x, y, &mut pixel);
                    out.extend_from_slice(&pixel[..out_channels]);
                }
            }
            Ok(ChainOutput::Image(ImageRecord::new(
                src.path(),
                w,
                h,
                out_mode,
                out,
            )?))
        }
    }
}
