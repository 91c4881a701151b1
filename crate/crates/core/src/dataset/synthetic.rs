//! Procedural hazy outdoor scenes with labels tied to haze opacity.
//!
//! Each image is a sky gradient over a textured ground band with a few
//! building silhouettes, alpha-blended with uniform gray haze of opacity
//! `alpha ~ U(0, 1)`. Labels follow fixed monotone maps of `alpha`:
//! `pm25 = 250 alpha`, `pm10 = 400 alpha + U(0, 20)`, and the other five are
//! smooth functions of `(pm25, pm10)` plus small noise.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::manifest::{DatasetManifest, ManifestRecord, Source};
use super::pollutant::PollutantVector;
use crate::error::{Error, Result};

pub const HAZE_GRAY: f64 = 200.0;
pub const PM25_PER_ALPHA: f64 = 250.0;
pub const PM10_PER_ALPHA: f64 = 400.0;
pub const PM10_NOISE: f64 = 20.0;

#[derive(Clone, Debug)]
pub struct SyntheticSample {
    pub alpha: f64,
    pub image: RgbImage,
    pub label: PollutantVector,
}

#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    /// Paths are relative (`images/NNNNNN.png`) until [`SyntheticDataset::save`].
    pub manifest: DatasetManifest,
    pub samples: Vec<SyntheticSample>,
}

/// Scene layout drawn independently of the haze level.
#[derive(Clone, Debug)]
pub struct Scene {
    horizon: f64,
    sky_top: [f64; 3],
    sky_bottom: [f64; 3],
    ground: [f64; 3],
    brightness: f64,
    texture: Vec<f64>,
    texture_grid: usize,
    buildings: Vec<Building>,
    grain_seed: u64,
}

#[derive(Clone, Debug)]
struct Building {
    left: f64,
    right: f64,
    top: f64,
    shade: f64,
}

const GROUND_PALETTE: [[f64; 3]; 3] = [
    [70.0, 110.0, 50.0],
    [120.0, 95.0, 65.0],
    [105.0, 105.0, 110.0],
];

fn jitter<R: Rng>(rng: &mut R, base: [f64; 3], amount: f64) -> [f64; 3] {
    base.map(|v| v + rng.random_range(-amount..amount))
}

impl Scene {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let texture_grid = 8;
        let texture = (0..(texture_grid + 1) * (texture_grid + 1))
            .map(|_| rng.random_range(-25.0..25.0))
            .collect();
        let horizon = rng.random_range(0.35..0.6);
        let buildings = (0..rng.random_range(0..=5))
            .map(|_| {
                let left = rng.random_range(0.0..0.9);
                Building {
                    left,
                    right: left + rng.random_range(0.05..0.2),
                    top: horizon - rng.random_range(0.05..0.3),
                    shade: rng.random_range(50.0..90.0),
                }
            })
            .collect();
        let sky_top = jitter(rng, [60.0, 120.0, 215.0], 15.0);
        let sky_bottom = jitter(rng, [175.0, 205.0, 235.0], 15.0);
        let palette = GROUND_PALETTE[rng.random_range(0..GROUND_PALETTE.len())];
        Self {
            horizon,
            sky_top,
            sky_bottom,
            ground: jitter(rng, palette, 15.0),
            brightness: rng.random_range(0.85..1.1),
            texture,
            texture_grid,
            buildings,
            grain_seed: rng.random(),
        }
    }

    fn texture_at(&self, u: f64, v: f64) -> f64 {
        let g = self.texture_grid;
        let (x, y) = (u * g as f64, v * g as f64);
        let (x0, y0) = (
            (x.floor() as usize).min(g - 1),
            (y.floor() as usize).min(g - 1),
        );
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let at = |i: usize, j: usize| self.texture[j * (g + 1) + i];
        let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
        let bottom = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    fn clear_pixel(&self, u: f64, v: f64, grain: f64) -> [f64; 3] {
        let building = self
            .buildings
            .iter()
            .find(|b| u >= b.left && u < b.right && v >= b.top && v < self.horizon);
        let base = if let Some(b) = building {
            [b.shade, b.shade, b.shade * 1.05]
        } else if v < self.horizon {
            let t = v / self.horizon;
            std::array::from_fn(|c| self.sky_top[c] * (1.0 - t) + self.sky_bottom[c] * t)
        } else {
            let shade = self.texture_at(u, (v - self.horizon) / (1.0 - self.horizon));
            self.ground.map(|c| c + shade + grain)
        };
        base.map(|c| (c * self.brightness).clamp(0.0, 255.0))
    }

    /// Renders the scene under haze of opacity `alpha` in `[0, 1]`.
    pub fn render(&self, size: u32, alpha: f64) -> RgbImage {
        let mut grain_rng = ChaCha8Rng::seed_from_u64(self.grain_seed);
        let mut img = RgbImage::new(size, size);
        let scale = f64::from(size);
        for y in 0..size {
            for x in 0..size {
                let grain = grain_rng.random_range(-8.0..8.0);
                let (u, v) = ((f64::from(x) + 0.5) / scale, (f64::from(y) + 0.5) / scale);
                let clear = self.clear_pixel(u, v, grain);
                let px = clear.map(|c| ((1.0 - alpha) * c + alpha * HAZE_GRAY).round() as u8);
                img.put_pixel(x, y, Rgb(px));
            }
        }
        img
    }
}

/// Labels for haze opacity `alpha`, drawing the noise terms from `rng`.
pub fn labels_for_alpha<R: Rng>(alpha: f64, rng: &mut R) -> PollutantVector {
    let pm25 = PM25_PER_ALPHA * alpha;
    let pm10 = PM10_PER_ALPHA * alpha + rng.random_range(0.0..PM10_NOISE);
    PollutantVector {
        pm25,
        pm10,
        so2: 4.0 + 0.05 * pm25 + 0.01 * pm10 + rng.random_range(0.0..1.0),
        o3: 20.0 + 40.0 * (1.0 - (-pm10 / 150.0).exp()) + rng.random_range(0.0..2.0),
        no2: 12.0 + 0.18 * pm25 + 0.04 * pm10 + rng.random_range(0.0..2.0),
        co: 0.4 + 0.012 * pm25 + 0.001 * pm10 + rng.random_range(0.0..0.05),
        aqi: 500.0 * (1.0 - (-pm25 / 110.0).exp()) + rng.random_range(0.0..5.0),
    }
}

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Sample `index` of the stream for `seed`; independent of the total count.
pub fn synthetic_sample(seed: u64, index: usize, size: u32) -> SyntheticSample {
    let mut rng = sample_rng(seed, index);
    let alpha: f64 = rng.random();
    let scene = Scene::random(&mut rng);
    let label = labels_for_alpha(alpha, &mut rng);
    SyntheticSample {
        alpha,
        image: scene.render(size, alpha),
        label,
    }
}

pub fn generate_synthetic(count: usize, seed: u64, image_size: u32) -> Result<SyntheticDataset> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "synthetic count must be at least 1".into(),
        ));
    }
    if image_size < 8 {
        return Err(Error::InvalidArgument(format!(
            "synthetic image size must be at least 8, got {image_size}"
        )));
    }
    let samples: Vec<_> = (0..count)
        .map(|i| synthetic_sample(seed, i, image_size))
        .collect();
    let records = samples
        .iter()
        .enumerate()
        .map(|(i, s)| ManifestRecord {
            path: PathBuf::from(format!("images/{i:06}.png")),
            label: s.label,
        })
        .collect();
    Ok(SyntheticDataset {
        manifest: DatasetManifest::new(PathBuf::new(), records, Source::Synthetic),
        samples,
    })
}

impl SyntheticDataset {
    /// Writes `images/*.png` and `manifest.csv` under `dir`.
    pub fn save(&mut self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir.join("images"))?;
        for (record, sample) in self.manifest.records.iter().zip(&self.samples) {
            let path = dir.join(&record.path);
            sample.image.save(&path).map_err(|e| Error::Ingest {
                path: path.clone(),
                reason: e.to_string(),
            })?;
        }
        self.manifest.base_dir = dir.to_path_buf();
        let manifest_path = dir.join("manifest.csv");
        self.manifest.write(&manifest_path)?;
        Ok(manifest_path)
    }
}
