use crate::ImageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PixelMode {
    Gray8,
    Rgb8,
}

impl PixelMode {
    pub fn channels(self) -> usize {
        match self {
            PixelMode::Gray8 => 1,
            PixelMode::Rgb8 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PixelMode::Gray8 => "GRAY8",
            PixelMode::Rgb8 => "RGB8",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "GRAY8" => Some(PixelMode::Gray8),
            "RGB8" => Some(PixelMode::Rgb8),
            _ => None,
        }
    }
}

/// An 8-bit image with row-major, channel-interleaved pixels.
///
/// The buffer length always equals `width * height * channels`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ImageRecord {
    path: String,
    width: usize,
    height: usize,
    mode: PixelMode,
    data: Vec<u8>,
}

impl ImageRecord {
    pub fn new(
        path: impl Into<String>,
        width: usize,
        height: usize,
        mode: PixelMode,
        data: Vec<u8>,
    ) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidDimensions { width, height });
        }
        let channels = mode.channels();
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or(ImageError::InvalidDimensions { width, height })?;
        if data.len() != expected {
            return Err(ImageError::DataLength {
                width,
                height,
                channels,
                expected,
                actual: data.len(),
            });
        }
        Ok(ImageRecord {
            path: path.into(),
            width,
            height,
            mode,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y, channel)` for every sample.
    pub fn from_fn(
        path: impl Into<String>,
        width: usize,
        height: usize,
        mode: PixelMode,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Result<Self, ImageError> {
        let channels = mode.channels();
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        ImageRecord::new(path, width, height, mode, data)
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.mode.channels()
    }

    pub fn mode(&self) -> PixelMode {
        self.mode
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels() + c]
    }

    pub fn with_path(mut self, path: impl Into<String>) -> Self {
        self.path = path.into();
        self
    }
}

/// Capture metadata for camera-trap frames.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ImageMeta {
    camera_id: String,
    timestamp: i64,
}

impl ImageMeta {
    pub fn new(camera_id: impl Into<String>, timestamp: i64) -> Result<Self, ImageError> {
        let camera_id = camera_id.into();
        if camera_id.is_empty() {
            return Err(ImageError::EmptyCameraId);
        }
        Ok(ImageMeta {
            camera_id,
            timestamp,
        })
    }

    pub fn camera_id(&self) -> &str {
        &self.camera_id
    }

    /// UTC seconds.
    pub fn timestamp(&self) -> i64 {
        self.timestamp
    }
}
