//! Camera files, posed image sets and camera trajectories.
//!
//! A camera file is one JSON document: either an array of entries or an
//! object `{"frames": [...]}`. Each entry is
//! `{file?, c2w: [16 reals, row-major], convention?, fov_x, fov_y?, width, height}`.
//! The same schema describes render trajectories, where `file` is unused.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::camera::{CameraView, Convention};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::linalg::Mat4;
use crate::scalar::Real;

pub const CAMERAS_FILE: &str = "cameras.json";
/// Every `TEST_EVERY`-th image, starting at index 0, is held out.
pub const TEST_EVERY: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    pub c2w: [f64; 16],
    #[serde(default)]
    pub convention: Convention,
    pub fov_x: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fov_y: Option<f64>,
    pub width: usize,
    pub height: usize,
}

impl CameraEntry {
    pub fn from_view<T: Real>(view: &CameraView<T>, file: Option<String>) -> Self {
        let mut c2w = [0.0; 16];
        for (i, v) in view.c2w.iter().flatten().enumerate() {
            c2w[i] = v.to_f64_lossy();
        }
        Self {
            file,
            c2w,
            convention: view.convention,
            fov_x: view.fov_x.to_f64_lossy(),
            fov_y: Some(view.fov_y.to_f64_lossy()),
            width: view.width,
            height: view.height,
        }
    }

    pub fn matrix<T: Real>(&self) -> Mat4<T> {
        std::array::from_fn(|r| std::array::from_fn(|c| T::lit(self.c2w[r * 4 + c])))
    }

    pub fn to_view<T: Real>(&self) -> Result<CameraView<T>> {
        let v = CameraView::new(self.matrix(), self.convention, self.width, self.height, T::lit(self.fov_x))?;
        match self.fov_y {
            Some(fy) => v.with_fov_y(T::lit(fy)),
            None => Ok(v),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Document {
    List(Vec<serde_json::Value>),
    Frames { frames: Vec<serde_json::Value> },
}

/// Parses a camera document. Errors name the offending entry.
pub fn parse_cameras(text: &str) -> Result<Vec<CameraEntry>> {
    let doc: Document = serde_json::from_str(text)?;
    let values = match doc {
        Document::List(v) | Document::Frames { frames: v } => v,
    };
    values
        .into_iter()
        .enumerate()
        .map(|(index, v)| {
            let e: CameraEntry =
                serde_json::from_value(v).map_err(|e| Error::Entry { index, message: e.to_string() })?;
            e.to_view::<f64>().map_err(|e| Error::Entry { index, message: e.to_string() })?;
            Ok(e)
        })
        .collect()
}

pub fn load_cameras(path: impl AsRef<Path>) -> Result<Vec<CameraEntry>> {
    let path = path.as_ref();
    parse_cameras(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

pub fn save_cameras(path: impl AsRef<Path>, entries: &[CameraEntry]) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(entries)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One posed image.
#[derive(Clone, Debug)]
pub struct PosedImage<T> {
    pub name: String,
    pub view: CameraView<T>,
    pub image: Image<T>,
}

#[derive(Clone, Debug)]
pub struct Dataset<T> {
    pub train: Vec<PosedImage<T>>,
    pub test: Vec<PosedImage<T>>,
}

impl<T: Real> Dataset<T> {
    /// Splits posed images: index `i` goes to test when `i % 8 == 0`.
    /// A single image is used for training only.
    pub fn split(all: Vec<PosedImage<T>>) -> Result<Self> {
        if all.is_empty() {
            return Err(Error::Dataset("no images".into()));
        }
        if all.len() == 1 {
            return Ok(Self { train: all, test: Vec::new() });
        }
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (i, p) in all.into_iter().enumerate() {
            if i % TEST_EVERY == 0 {
                test.push(p);
            } else {
                train.push(p);
            }
        }
        Ok(Self { train, test })
    }

    /// Loads `dir/cameras.json` and the PNG images it names.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let cams = dir.join(CAMERAS_FILE);
        if !cams.is_file() {
            return Err(Error::Dataset(format!("{} not found", cams.display())));
        }
        let entries = load_cameras(&cams)?;
        let mut all = Vec::with_capacity(entries.len());
        for (index, e) in entries.iter().enumerate() {
            let file = e.file.as_ref().ok_or(Error::Entry { index, message: "missing `file`".into() })?;
            let image = Image::load_png(dir.join(file))?;
            if (image.width, image.height) != (e.width, e.height) {
                return Err(Error::Entry {
                    index,
                    message: format!("image is {}x{}, camera says {}x{}", image.width, image.height, e.width, e.height),
                });
            }
            all.push(PosedImage { name: file.clone(), view: e.to_view()?, image });
        }
        Self::split(all)
    }
}

/// Writes images as PNG plus a camera file into `dir`.
pub fn save_dataset<T: Real>(dir: impl AsRef<Path>, images: &[PosedImage<T>]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(images.len());
    for p in images {
        p.image.save_png(dir.join(&p.name))?;
        entries.push(CameraEntry::from_view(&p.view, Some(p.name.clone())));
    }
    save_cameras(dir.join(CAMERAS_FILE), &entries)
}

/// `n` OpenCV poses on a horizontal circle of `radius` around `center`,
/// raised by `height`, all looking at `center`. The world up axis is +y.
pub fn orbit<T: Real>(center: [T; 3], radius: T, height: T, n: usize, width: usize, hgt: usize, fov_x: T) -> Result<Vec<CameraView<T>>> {
    (0..n)
        .map(|i| {
            let a = T::lit(2.0) * T::PI() * T::from_usize_lossy(i) / T::from_usize_lossy(n.max(1));
            let eye = [center[0] + radius * a.cos(), center[1] + height, center[2] + radius * a.sin()];
            CameraView::look_at(eye, center, [T::zero(), T::one(), T::zero()], width, hgt, fov_x)
        })
        .collect()
}

/// Zero-padded frame file name.
pub fn frame_name(index: usize) -> String {
    format!("{index:05}.png")
}

pub fn frame_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(frame_name(index))
}
