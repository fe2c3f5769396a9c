use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayAlphaImage, GrayImage, RgbImage, RgbaImage};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::resample::{resample_u8, Filter};

const IMAGE_EXTENSIONS: [&str; 4] = ["jpg", "jpeg", "png", "bmp"];

/// Resizes `img` straight from its native resolution to `target`.
///
/// A target equal to the source size returns an identical pixel buffer.
pub fn resize_export(img: &DynamicImage, target: (u32, u32), method: Filter) -> Result<DynamicImage> {
    let (tw, th) = target;
    if tw == 0 || th == 0 {
        return Err(Error::Argument(format!("target size {tw}x{th} must be positive")));
    }
    if (img.width(), img.height()) == target {
        return Ok(img.clone());
    }
    let src = (img.width() as usize, img.height() as usize);
    let dst = (tw as usize, th as usize);
    let run = |raw: &[u8], channels| resample_u8(raw, src, channels, dst, method);
    let out = match img {
        DynamicImage::ImageLuma8(b) => DynamicImage::ImageLuma8(GrayImage::from_raw(tw, th, run(b.as_raw(), 1)).unwrap()),
        DynamicImage::ImageLumaA8(b) => {
            DynamicImage::ImageLumaA8(GrayAlphaImage::from_raw(tw, th, run(b.as_raw(), 2)).unwrap())
        }
        DynamicImage::ImageRgba8(b) => DynamicImage::ImageRgba8(RgbaImage::from_raw(tw, th, run(b.as_raw(), 4)).unwrap()),
        other if other.color().has_alpha() => {
            let b = other.to_rgba8();
            DynamicImage::ImageRgba8(RgbaImage::from_raw(tw, th, run(b.as_raw(), 4)).unwrap())
        }
        other => {
            let b = other.to_rgb8();
            DynamicImage::ImageRgb8(RgbImage::from_raw(tw, th, run(b.as_raw(), 3)).unwrap())
        }
    };
    Ok(out)
}

fn collect_images(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            collect_images(&path, out)?;
        } else if path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        {
            out.push(path);
        }
    }
    Ok(())
}

/// Resizes every image under `src_root` into the same relative path under
/// `dst_root`. Returns the number of images written.
pub fn resize_tree(src_root: &Path, dst_root: &Path, target: (u32, u32), method: Filter) -> Result<usize> {
    let mut files = Vec::new();
    collect_images(src_root, &mut files)?;
    files.sort();
    files.par_iter().try_for_each(|src| -> Result<()> {
        let rel = src.strip_prefix(src_root).expect("walked below root");
        let dst = dst_root.join(rel);
        if let Some(parent) = dst.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let img = image::open(src).map_err(|e| Error::Decode {
            path: src.clone(),
            message: e.to_string(),
        })?;
        let out = resize_export(&img, target, method)?;
        out.save(&dst).map_err(|e| Error::Decode {
            path: dst.clone(),
            message: e.to_string(),
        })
    })?;
    Ok(files.len())
}
