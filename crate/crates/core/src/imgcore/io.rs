use std::io::ErrorKind;
use std::path::Path;

use image::{ColorType, DynamicImage, ExtendedColorType, ImageFormat, ImageReader};

use super::{Image, ImageError, Result};

/// Decodes a PNG or JPEG file.
///
/// JPEG always yields 3 channels. PNG yields 1 channel for gray (with or
/// without alpha) and 3 otherwise; alpha is dropped and 16-bit samples are
/// reduced to 8 bits.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let reader = ImageReader::open(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => ImageError::NotFound(shown.clone()),
        _ => ImageError::Corrupt {
            path: shown.clone(),
            reason: e.to_string(),
        },
    })?;
    let reader = reader
        .with_guessed_format()
        .map_err(|e| ImageError::Corrupt {
            path: shown.clone(),
            reason: e.to_string(),
        })?;
    let format = match reader.format() {
        Some(f @ (ImageFormat::Png | ImageFormat::Jpeg)) => f,
        Some(other) => return Err(ImageError::Unsupported(format!("{other:?} ({shown})"))),
        None => return Err(ImageError::Unsupported(format!("unrecognized ({shown})"))),
    };
    let decoded = reader.decode().map_err(|e| ImageError::Corrupt {
        path: shown.clone(),
        reason: e.to_string(),
    })?;
    from_dynamic(decoded, format)
}

fn from_dynamic(img: DynamicImage, format: ImageFormat) -> Result<Image> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = matches!(
        img.color(),
        ColorType::L8 | ColorType::La8 | ColorType::L16 | ColorType::La16
    );
    if gray && format == ImageFormat::Png {
        Image::from_u8(w, h, 1, img.to_luma8().as_raw())
    } else {
        Image::from_u8(w, h, 3, img.to_rgb8().as_raw())
    }
}

/// Writes a lossless 8-bit PNG. The parent directory must already exist.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let color = match img.channels() {
        1 => ExtendedColorType::L8,
        _ => ExtendedColorType::Rgb8,
    };
    image::save_buffer_with_format(
        path,
        &img.to_u8(),
        img.width() as u32,
        img.height() as u32,
        color,
        ImageFormat::Png,
    )
    .map_err(|e| ImageError::Write {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_fixture_written_by_reference_encoder() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("px.png");
        let raw = [10u8, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120];
        image::RgbImage::from_raw(2, 2, raw.to_vec())
            .unwrap()
            .save(&path)
            .unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (2, 2, 3));
        assert_eq!(img.to_u8(), raw);
    }

    #[test]
    fn white_pixel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.png");
        image::RgbImage::from_raw(1, 1, vec![255, 255, 255])
            .unwrap()
            .save(&path)
            .unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.channels(), 3);
        assert_eq!(img.to_u8(), vec![255, 255, 255]);
    }

    #[test]
    fn missing_file_is_not_found() {
        let err = load_image("/definitely/not/here.png").unwrap_err();
        assert!(matches!(err, ImageError::NotFound(_)), "{err}");
        assert!(err.to_string().starts_with("not found"));
    }

    #[test]
    fn unsupported_and_corrupt_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let bmp = dir.path().join("x.bmp");
        image::RgbImage::new(2, 2).save(&bmp).unwrap();
        assert!(matches!(load_image(&bmp), Err(ImageError::Unsupported(_))));

        let bad = dir.path().join("bad.png");
        let mut bytes = Vec::new();
        image::RgbImage::new(8, 8)
            .write_to(&mut std::io::Cursor::new(&mut bytes), ImageFormat::Png)
            .unwrap();
        bytes.truncate(bytes.len() / 2);
        std::fs::write(&bad, &bytes).unwrap();
        assert!(matches!(load_image(&bad), Err(ImageError::Corrupt { .. })));
    }

    #[test]
    fn gray_png_stays_single_channel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        let img = Image::from_u8(3, 2, 1, &[0, 1, 2, 253, 254, 255]).unwrap();
        save_image(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back.channels(), 1);
        assert_eq!(back, img);
    }

    #[test]
    fn jpeg_decodes_to_three_channels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.jpg");
        image::GrayImage::from_pixel(8, 8, image::Luma([128]))
            .save(&path)
            .unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.channels(), 3);
    }

    #[test]
    fn save_into_missing_directory_fails() {
        let img = Image::filled(1, 1, 1, 0.5).unwrap();
        let err = save_image(&img, "/nonexistent-dir/sub/x.png").unwrap_err();
        assert!(matches!(err, ImageError::Write { .. }));
    }
}
