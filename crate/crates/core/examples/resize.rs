//! Exports an image at a lower resolution with the bicubic filter.

use dermaudit::cleaner::resize_export;
use dermaudit::resample::Filter;
use image::{DynamicImage, Rgb, RgbImage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let img = RgbImage::from_fn(450, 600, |x, y| Rgb([(x % 256) as u8, (y % 256) as u8, ((x + y) / 4 % 256) as u8]));
    let img = DynamicImage::ImageRgb8(img);
    for size in [224, 128, 64, 28] {
        let small = resize_export(&img, (size, size), Filter::Bicubic)?;
        println!("{}x{} -> {}x{}", img.width(), img.height(), small.width(), small.height());
    }
    let out = std::env::temp_dir().join("dermaudit_resize_28.png");
    resize_export(&img, (28, 28), Filter::Bicubic)?.save(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}
