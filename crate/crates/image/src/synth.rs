//! Seeded synthetic camera-trap corpus.
//!
//! Every camera produces a series of bursts; each burst is a run of frames a
//! few seconds apart that share one label. Positive bursts contain a
//! "leopard": an elliptical body carrying a spotted rosette texture that is
//! mirror-symmetric about the body's vertical axis, so a horizontal flip
//! yields another plausible positive frame. The body has no net contrast
//! against the local background; the class signal lives in the texture.
//! Negative and positive bursts alike may contain smooth distractor animals.
//! Backgrounds carry burst-level structure (rocks, lighting) that is shared
//! across frames of a burst, plus per-frame sensor noise and per-frame
//! visibility of the animal, so neighbouring frames are correlated but not
//! identical.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{encode, ImageFormat, ImageRecord, PixelMode};

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub cameras: usize,
    pub bursts_per_camera: usize,
    pub burst_len: usize,
    pub leopard_frac: f64,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            cameras: 20,
            bursts_per_camera: 3,
            burst_len: 4,
            leopard_frac: 0.1,
            seed: 0,
            width: 64,
            height: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusImage {
    pub camera_id: String,
    pub timestamp: i64,
    pub label: u8,
    pub burst: usize,
    /// Path relative to the corpus root: `<cameraId>/<utcSeconds>_<label>.pgm`.
    pub rel_path: String,
    pub image: ImageRecord,
}

pub fn camera_name(index: usize) -> String {
    format!("cam{index:04}")
}

/// Time of the first frame in every corpus.
const EPOCH: i64 = 1_500_000_000;

/// Generates the corpus in memory, ordered by camera then timestamp.
pub fn generate(cfg: &CorpusConfig) -> Vec<CorpusImage> {
    let total_bursts = cfg.cameras * cfg.bursts_per_camera;
    let positives = ((cfg.leopard_frac * total_bursts as f64).round() as usize).min(total_bursts);
    let mut order: Vec<usize> = (0..total_bursts).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let mut labels = vec![0u8; total_bursts];
    for &b in &order[..positives] {
        labels[b] = 1;
    }

    let mut out = Vec::with_capacity(total_bursts * cfg.burst_len);
    for cam in 0..cfg.cameras {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, cam as u64 + 1));
        let camera = CameraScene::new(&mut rng, cfg.width, cfg.height);
        let camera_id = camera_name(cam);
        let mut t = EPOCH + rng.gen_range(0..3_600);
        for b in 0..cfg.bursts_per_camera {
            let burst_index = cam * cfg.bursts_per_camera + b;
            let label = labels[burst_index];
            let burst = BurstScene::new(&mut rng, &camera, label == 1);
            for f in 0..cfg.burst_len {
                if f > 0 {
                    t += rng.gen_range(2..=10);
                }
                let image = burst.render(&mut rng, &camera);
                let rel_path = format!("{camera_id}/{t}_{label}.pgm");
                out.push(CorpusImage {
                    camera_id: camera_id.clone(),
                    timestamp: t,
                    label,
                    burst: burst_index,
                    image: image.with_path(rel_path.clone()),
                    rel_path,
                });
            }
            // Gaps between bursts are far beyond any sensible burst window.
            t += rng.gen_range(600..20_000);
        }
    }
    out
}

/// Writes the corpus as `<root>/<cameraId>/<utcSeconds>_<label>.pgm`.
pub fn write_corpus(root: &Path, images: &[CorpusImage]) -> io::Result<Vec<PathBuf>> {
    let mut written = Vec::with_capacity(images.len());
    for img in images {
        let path = root.join(&img.rel_path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let bytes = encode(&img.image, ImageFormat::Pgm)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        fs::write(&path, bytes)?;
        written.push(path);
    }
    Ok(written)
}

fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Bump {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    amp: f64,
}

impl Bump {
    fn at(&self, x: f64, y: f64) -> f64 {
        let dx = (x - self.cx) / self.rx;
        let dy = (y - self.cy) / self.ry;
        self.amp * (-(dx * dx + dy * dy)).exp()
    }
}

struct CameraScene {
    width: usize,
    height: usize,
    base: f64,
    grad_x: f64,
    grad_y: f64,
    terrain: Vec<Bump>,
}

impl CameraScene {
    fn new(rng: &mut ChaCha8Rng, width: usize, height: usize) -> Self {
        let terrain = (0..5)
            .map(|_| Bump {
                cx: rng.gen_range(0.0..width as f64),
                cy: rng.gen_range(0.0..height as f64),
                rx: rng.gen_range(4.0..14.0),
                ry: rng.gen_range(4.0..14.0),
                amp: rng.gen_range(-30.0..30.0),
            })
            .collect();
        CameraScene {
            width,
            height,
            base: rng.gen_range(80.0..160.0),
            grad_x: rng.gen_range(-0.6..0.6),
            grad_y: rng.gen_range(-0.6..0.6),
            terrain,
        }
    }

    fn background(&self, x: f64, y: f64) -> f64 {
        let cx = self.width as f64 / 2.0;
        let cy = self.height as f64 / 2.0;
        self.base
            + self.grad_x * (x - cx)
            + self.grad_y * (y - cy)
            + self.terrain.iter().map(|b| b.at(x, y)).sum::<f64>()
    }
}

struct Leopard {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    /// Spot centers relative to the body center; mirrored in x when drawn.
    spots: Vec<(f64, f64, f64)>,
    contrast: f64,
}

impl Leopard {
    fn new(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Self {
        let rx = rng.gen_range(8.0..12.0);
        let ry = rng.gen_range(5.0..8.0);
        let cx = rng.gen_range(rx + 2.0..w as f64 - rx - 2.0);
        let cy = rng.gen_range(ry + 2.0..h as f64 - ry - 2.0);
        let n = rng.gen_range(5..9);
        let spots = (0..n)
            .map(|_| {
                (
                    rng.gen_range(0.5..rx * 0.85),
                    rng.gen_range(-ry * 0.8..ry * 0.8),
                    rng.gen_range(1.2..2.2),
                )
            })
            .collect();
        Leopard {
            cx,
            cy,
            rx,
            ry,
            spots,
            contrast: rng.gen_range(80.0..110.0),
        }
    }

    /// Texture offset at (x, y) for a body centered at (cx, cy).
    fn texture(&self, x: f64, y: f64, cx: f64, cy: f64) -> f64 {
        let dx = x - cx;
        let dy = y - cy;
        let e = (dx / self.rx).powi(2) + (dy / self.ry).powi(2);
        if e > 1.0 {
            return 0.0;
        }
        let ax = dx.abs();
        let mut v: f64 = 0.0;
        for &(sx, sy, r) in &self.spots {
            let d = ((ax - sx).powi(2) + (dy - sy).powi(2)).sqrt();
            // Dark ring around a lighter core.
            if d < r {
                v += 0.5;
            } else if d < r + 1.2 {
                v -= 1.0;
            }
        }
        // Zero-mean-ish body: a light halo balances the dark rings.
        (v.clamp(-1.0, 1.0) + 0.25) * self.contrast
    }
}

struct BurstScene {
    clutter: Vec<Bump>,
    distractor: Option<Bump>,
    leopard: Option<Leopard>,
}

impl BurstScene {
    fn new(rng: &mut ChaCha8Rng, cam: &CameraScene, leopard: bool) -> Self {
        let (w, h) = (cam.width as f64, cam.height as f64);
        let clutter = (0..4)
            .map(|_| Bump {
                cx: rng.gen_range(0.0..w),
                cy: rng.gen_range(0.0..h),
                rx: rng.gen_range(2.0..6.0),
                ry: rng.gen_range(2.0..6.0),
                amp: rng.gen_range(-25.0..25.0),
            })
            .collect();
        let distractor = rng.gen_bool(0.5).then(|| Bump {
            cx: rng.gen_range(10.0..w - 10.0),
            cy: rng.gen_range(10.0..h - 10.0),
            rx: rng.gen_range(6.0..12.0),
            ry: rng.gen_range(4.0..8.0),
            amp: rng.gen_range(-45.0..45.0),
        });
        BurstScene {
            clutter,
            distractor,
            leopard: leopard.then(|| Leopard::new(rng, cam.width, cam.height)),
        }
    }

    fn render(&self, rng: &mut ChaCha8Rng, cam: &CameraScene) -> ImageRecord {
        let noise = Normal::new(0.0, 9.0).expect("valid sigma");
        let exposure: f64 = rng.gen_range(-12.0..12.0);
        let jitter = |rng: &mut ChaCha8Rng| rng.gen_range(-2.5..2.5);
        let (dx, dy) = (jitter(rng), jitter(rng));
        // Frames differ in how clearly the animal shows.
        let visibility: f64 = if rng.gen_bool(0.25) {
            rng.gen_range(0.1..0.4)
        } else {
            rng.gen_range(0.6..1.0)
        };
        let (ddx, ddy) = (jitter(rng), jitter(rng));
        let mut data = Vec::with_capacity(cam.width * cam.height);
        for y in 0..cam.height {
            for x in 0..cam.width {
                let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
                let mut v = cam.background(fx, fy) + exposure;
                v += self.clutter.iter().map(|b| b.at(fx, fy)).sum::<f64>();
                if let Some(d) = &self.distractor {
                    v += d.at(fx - ddx, fy - ddy);
                }
                if let Some(l) = &self.leopard {
                    v += visibility * l.texture(fx, fy, l.cx + dx, l.cy + dy);
                }
                v += noise.sample(rng);
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
        ImageRecord::new("", cam.width, cam.height, PixelMode::Gray8, data)
            .expect("buffer sized from dimensions")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CorpusConfig {
        CorpusConfig {
            cameras: 10,
            bursts_per_camera: 2,
            burst_len: 3,
            leopard_frac: 0.1,
            seed: 3,
            width: 32,
            height: 32,
        }
    }

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(generate(&small()), generate(&small()));
        let other = CorpusConfig { seed: 4, ..small() };
        assert_ne!(generate(&small()), generate(&other));
    }

    #[test]
    fn labels_constant_per_burst_and_fraction_exact() {
        let corpus = generate(&small());
        assert_eq!(corpus.len(), 60);
        let mut burst_labels = std::collections::BTreeMap::new();
        for img in &corpus {
            let prev = burst_labels.insert(img.burst, img.label);
            assert!(prev.is_none() || prev == Some(img.label));
        }
        let positive = burst_labels.values().filter(|&&l| l == 1).count();
        assert_eq!(positive, 2);
    }

    #[test]
    fn bursts_are_separated_in_time() {
        let corpus = generate(&small());
        for pair in corpus.windows(2) {
            if pair[0].camera_id != pair[1].camera_id {
                continue;
            }
            let gap = pair[1].timestamp - pair[0].timestamp;
            if pair[0].burst == pair[1].burst {
                assert!((2..=10).contains(&gap));
            } else {
                assert!(gap >= 600);
            }
        }
    }

    #[test]
    fn paths_follow_layout() {
        let corpus = generate(&small());
        let first = &corpus[0];
        assert_eq!(
            first.rel_path,
            format!(
                "{}/{}_{}.pgm",
                first.camera_id, first.timestamp, first.label
            )
        );
        let dir = tempfile::tempdir().unwrap();
        let paths = write_corpus(dir.path(), &corpus[..3]).unwrap();
        let bytes = fs::read(&paths[0]).unwrap();
        assert_eq!(
            crate::decode(&bytes, None).unwrap().data(),
            first.image.data()
        );
    }
}
