//! Offline rendering of camera trajectories to numbered PNG frames.

use std::fs;
use std::path::{Path, PathBuf};

use crate::camera::CameraView;
use crate::dataset::{frame_path, load_cameras, CameraEntry};
use crate::error::{Error, Result};
use crate::forward::{render_image, RenderConfig};
use crate::image::encode_png_rgb8;
use crate::scalar::Real;
use crate::scene::Scene;

/// 8-bit RGB frame of `scene` from `view`. Both the trajectory renderer and
/// the render service produce their pixels through this function.
pub fn render_rgb8<T: Real>(scene: &Scene<T>, view: &CameraView<T>, cfg: &RenderConfig<T>) -> Result<Vec<u8>> {
    Ok(render_image(scene, view, cfg)?.to_rgb8())
}

pub fn load_trajectory<T: Real>(path: impl AsRef<Path>) -> Result<Vec<CameraView<T>>> {
    entries_to_views(&load_cameras(path)?)
}

pub fn entries_to_views<T: Real>(entries: &[CameraEntry]) -> Result<Vec<CameraView<T>>> {
    entries
        .iter()
        .enumerate()
        .map(|(index, e)| e.to_view().map_err(|err| Error::Entry { index, message: err.to_string() }))
        .collect()
}

/// Renders one PNG per view into `out_dir`, named by zero-padded index.
pub fn render_trajectory<T: Real>(
    scene: &Scene<T>,
    views: &[CameraView<T>],
    out_dir: impl AsRef<Path>,
    cfg: &RenderConfig<T>,
) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut paths = Vec::with_capacity(views.len());
    for (index, view) in views.iter().enumerate() {
        let rgb = render_rgb8(scene, view, cfg).map_err(|e| Error::Entry { index, message: e.to_string() })?;
        let path = frame_path(out_dir, index);
        fs::write(&path, encode_png_rgb8(view.width, view.height, &rgb)).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Largest mean absolute per-channel change between consecutive frames,
/// in `[0, 1]` units.
pub fn max_frame_jump(frames: &[Vec<u8>]) -> f64 {
    frames
        .windows(2)
        .map(|w| {
            let n = w[0].len().max(1) as f64;
            w[0].iter().zip(&w[1]).map(|(a, b)| (*a as f64 - *b as f64).abs()).sum::<f64>() / n / 255.0
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Convention;
    use crate::dataset::{orbit, save_cameras};
    use crate::image::Image;
    use crate::scene::SkewGaussian;

    fn blob_scene() -> Scene<f32> {
        let mut s = Scene::new(0).with_background([0.1, 0.1, 0.1]);
        s.push(SkewGaussian::isotropic([0.0, 0.0, 0.0], 0.4, [0.9, 0.3, 0.2], 0.8, 0));
        s.push(SkewGaussian::isotropic([0.6, 0.2, 0.1], 0.3, [0.2, 0.8, 0.3], 0.7, 0));
        s
    }

    #[test]
    fn single_entry_matches_direct_render() {
        let dir = tempfile::tempdir().unwrap();
        let scene = blob_scene();
        let views = orbit([0.0f32; 3], 3.0, 0.5, 1, 40, 30, 0.9).unwrap();
        let cfg = RenderConfig::default();
        let paths = render_trajectory(&scene, &views, dir.path(), &cfg).unwrap();
        assert_eq!(paths, vec![dir.path().join("00000.png")]);
        let back = Image::<f32>::load_png(&paths[0]).unwrap();
        assert_eq!(back.to_rgb8(), render_image(&scene, &views[0], &cfg).unwrap().to_rgb8());
    }

    #[test]
    fn opengl_entries_match_preconverted() {
        let views = orbit([0.0f32; 3], 3.0, 0.5, 4, 24, 24, 0.9).unwrap();
        let gl: Vec<CameraEntry> = views
            .iter()
            .map(|v| {
                let mut e = CameraEntry::from_view(&v.to_opencv(), None);
                // Express the same pose in the graphics convention.
                for r in 0..3 {
                    e.c2w[r * 4 + 1] = -e.c2w[r * 4 + 1];
                    e.c2w[r * 4 + 2] = -e.c2w[r * 4 + 2];
                }
                e.convention = Convention::OpenGl;
                e
            })
            .collect();
        let cv: Vec<CameraEntry> = views.iter().map(|v| CameraEntry::from_view(v, None)).collect();
        let scene = blob_scene();
        let cfg = RenderConfig::default();
        for (a, b) in entries_to_views::<f32>(&gl).unwrap().iter().zip(entries_to_views::<f32>(&cv).unwrap().iter()) {
            assert_eq!(render_rgb8(&scene, a, &cfg).unwrap(), render_rgb8(&scene, b, &cfg).unwrap());
        }
    }

    #[test]
    fn bad_entry_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        let mut e = CameraEntry::from_view(&orbit([0.0f64; 3], 3.0, 0.0, 1, 8, 8, 0.9).unwrap()[0], None);
        save_cameras(&path, &[e.clone()]).unwrap();
        assert_eq!(load_trajectory::<f64>(&path).unwrap().len(), 1);
        e.width = 0;
        save_cameras(&path, &[e.clone(), e.clone()]).unwrap();
        assert!(matches!(load_trajectory::<f64>(&path), Err(Error::Entry { index: 0, .. })));
    }

    #[test]
    fn frame_jump_of_constant_sequence_is_zero() {
        assert_eq!(max_frame_jump(&[vec![3, 4], vec![3, 4]]), 0.0);
        assert!((max_frame_jump(&[vec![0, 0], vec![255, 0]]) - 0.5).abs() < 1e-12);
    }
}
