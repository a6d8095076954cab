//! Training and held-out image sets, synthetic or read from disk.
//!
//! Directory images are center-cropped to the target aspect ratio and then
//! bilinearly scaled, so a 256×900 frame loses its left and right edges
//! rather than being squashed. They are paired with a zero state vector.

use std::path::Path;

use anyhow::{ensure, Context, Result};
use image::imageops::{self, FilterType};
use image::{DynamicImage, RgbImage};
use log::warn;
use tscc_core::scene::generate_dataset_from;
use tscc_core::{ImageDims, ImageTensor, Sample, StateVector};

use crate::config::{DatasetConfig, DatasetKind};

#[derive(Debug, Clone)]
pub struct LoadedImages {
    pub images: Vec<ImageTensor>,
    /// Files that could not be decoded.
    pub skipped: usize,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

fn is_image_file(p: &Path) -> bool {
    let ext = p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase());
    matches!(ext.as_deref(), Some("png" | "ppm" | "pgm" | "pnm"))
}

/// Largest centered window of `w`×`h` with the aspect ratio `tw`:`th`.
fn center_crop_box(w: u32, h: u32, tw: usize, th: usize) -> (u32, u32, u32, u32) {
    // compare w/h against tw/th without floats
    let (w64, h64, tw, th) = (w as u64, h as u64, tw as u64, th as u64);
    if w64 * th > h64 * tw {
        let cw = ((h64 * tw) / th).max(1) as u32;
        ((w - cw) / 2, 0, cw, h)
    } else {
        let ch = ((w64 * th) / tw).max(1) as u32;
        (0, (h - ch) / 2, w, ch)
    }
}

/// Crops, scales and normalizes one decoded image to `dims` (1 or 3 channels).
pub fn to_tensor(img: &DynamicImage, dims: ImageDims) -> Result<ImageTensor> {
    ensure!(
        dims.channels == 1 || dims.channels == 3,
        "directory images load as 1 or 3 channels, not {}",
        dims.channels
    );
    let rgb: RgbImage = img.to_rgb8();
    let (x0, y0, cw, ch) = center_crop_box(rgb.width(), rgb.height(), dims.width, dims.height);
    let cropped = imageops::crop_imm(&rgb, x0, y0, cw, ch).to_image();
    let scaled = imageops::resize(&cropped, dims.width as u32, dims.height as u32, FilterType::Triangle);
    let (h, w) = (dims.height, dims.width);
    let mut data = vec![0.0; dims.len()];
    for (x, y, p) in scaled.enumerate_pixels() {
        let (x, y) = (x as usize, y as usize);
        if dims.channels == 3 {
            for c in 0..3 {
                data[(c * h + y) * w + x] = p[c] as f64 / 255.0;
            }
        } else {
            data[y * w + x] = (p[0] as f64 + p[1] as f64 + p[2] as f64) / (3.0 * 255.0);
        }
    }
    Ok(ImageTensor::new(dims.channels, h, w, data)?)
}

/// Every PNG/PPM file directly inside `path`, in filename order.
pub fn load_image_dir(path: impl AsRef<Path>, dims: ImageDims) -> Result<LoadedImages> {
    let path = path.as_ref();
    let mut files: Vec<_> = std::fs::read_dir(path)
        .with_context(|| format!("listing {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image_file(p))
        .collect();
    files.sort();
    let mut out = LoadedImages {
        images: Vec::with_capacity(files.len()),
        skipped: 0,
    };
    for f in &files {
        match image::open(f) {
            Ok(img) => out.images.push(to_tensor(&img, dims)?),
            Err(e) => {
                warn!("skipping {}: {e}", f.display());
                out.skipped += 1;
            }
        }
    }
    if files.is_empty() {
        warn!("no PNG/PPM images in {}", path.display());
    }
    if out.skipped > 0 {
        warn!("skipped {} unreadable file(s) in {}", out.skipped, path.display());
    }
    Ok(out)
}

/// Builds the training and held-out sets described by `cfg`.
pub fn build_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    build_dataset_sized(cfg, cfg.train_count)
}

/// Like [`build_dataset`] with only the first `train_count` training images.
///
/// Synthetic scenes draw the training set from indices `0..train_count` and
/// the held-out set from `test_offset..`. A directory is split in filename
/// order: the last `test_count` images are held out.
pub fn build_dataset_sized(cfg: &DatasetConfig, train_count: usize) -> Result<Dataset> {
    let train_count = train_count.min(cfg.train_count);
    match cfg.kind {
        DatasetKind::Synthetic => {
            let spec = cfg.scene_spec();
            ensure!(
                cfg.test_offset >= cfg.train_count as u64,
                "test_offset {} overlaps the training scenes",
                cfg.test_offset
            );
            let train = if train_count == 0 {
                Vec::new()
            } else {
                generate_dataset_from(&spec, 0, train_count)?
            };
            Ok(Dataset {
                train,
                test: generate_dataset_from(&spec, cfg.test_offset, cfg.test_count)?,
            })
        }
        DatasetKind::Directory => {
            let path = cfg.path.as_ref().context("directory dataset needs a path")?;
            let loaded = load_image_dir(path, cfg.dims())?;
            let n = loaded.images.len();
            ensure!(
                n > cfg.test_count,
                "{} has {n} usable images, need more than test_count = {}",
                path.display(),
                cfg.test_count
            );
            let mut samples: Vec<Sample> = loaded
                .images
                .into_iter()
                .map(|image| Sample {
                    image,
                    state: StateVector::zero(),
                })
                .collect();
            let test = samples.split_off(n - cfg.test_count);
            let train_len = samples.len().min(train_count);
            samples.truncate(train_len);
            Ok(Dataset { train: samples, test })
        }
    }
}

/// Writes `images` as PNG files `<prefix>_00000.png`, … into `dir`.
pub fn save_images(images: &[&ImageTensor], dir: &Path, prefix: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (i, x) in images.iter().enumerate() {
        let (h, w) = (x.height(), x.width());
        let img = RgbImage::from_fn(w as u32, h as u32, |px, py| {
            let px = px as usize;
            let py = py as usize;
            let v = |c: usize| (x.at(c.min(x.channels() - 1), py, px) * 255.0).round() as u8;
            image::Rgb([v(0), v(1), v(2)])
        });
        let p = dir.join(format!("{prefix}_{i:05}.png"));
        img.save(&p).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct StateRow {
    file: String,
    speed: f64,
    throttle: f64,
    brake: f64,
    steer: f64,
    goal_dx: f64,
    goal_dy: f64,
}

/// Writes `train/` and `test/` PNG folders plus a states CSV for each split.
pub fn export_dataset(data: &Dataset, dir: &Path) -> Result<()> {
    for (name, split) in [("train", &data.train), ("test", &data.test)] {
        let images: Vec<&ImageTensor> = split.iter().map(|s| &s.image).collect();
        save_images(&images, &dir.join(name), name)?;
        let rows: Vec<StateRow> = split
            .iter()
            .enumerate()
            .map(|(i, s)| StateRow {
                file: format!("{name}/{name}_{i:05}.png"),
                speed: s.state.speed,
                throttle: s.state.throttle,
                brake: s.state.brake,
                steer: s.state.steer,
                goal_dx: s.state.goal_dx,
                goal_dy: s.state.goal_dy,
            })
            .collect();
        let bytes = crate::records::to_csv_bytes(&rows, "file,speed,throttle,brake,steer,goal_dx,goal_dy")?;
        crate::records::write_bytes(&dir.join(format!("{name}_states.csv")), &bytes)?;
    }
    Ok(())
}
