//! 8-bit raster images and the binary netpbm formats (P6 PPM for color,
//! P5 PGM for grayscale) used for frames and saliency exports. Plain,
//! dependency-free, and byte-stable: writing the same image twice produces
//! identical files, which episode reproducibility tests rely on.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum ImageError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad image data: {0}")]
    Format(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB triples, `3 * width * height` bytes.
    pub data: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        RgbImage { width, height, data: vec![0; 3 * width * height] }
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let mut img = Self::new(width, height);
        for px in img.data.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        img
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn save_ppm(&self, path: &Path) -> Result<(), ImageError> {
        let mut w = BufWriter::new(File::create(path)?);
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.data)?;
        Ok(())
    }

    pub fn load_ppm(path: &Path) -> Result<Self, ImageError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let (magic, width, height, maxval, at) = parse_netpbm_header(&bytes)?;
        if magic != b"P6" {
            return Err(ImageError::Format(format!(
                "expected P6 magic, got {}",
                String::from_utf8_lossy(magic)
            )));
        }
        if maxval != 255 {
            return Err(ImageError::Format(format!("only maxval 255 supported, got {maxval}")));
        }
        let need = 3 * width * height;
        if bytes.len() < at + need {
            return Err(ImageError::Format("truncated pixel data".into()));
        }
        Ok(RgbImage { width, height, data: bytes[at..at + need].to_vec() })
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        GrayImage { width, height, data: vec![0; width * height] }
    }

    pub fn save_pgm(&self, path: &Path) -> Result<(), ImageError> {
        let mut w = BufWriter::new(File::create(path)?);
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.data)?;
        Ok(())
    }

    pub fn load_pgm(path: &Path) -> Result<Self, ImageError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let (magic, width, height, maxval, at) = parse_netpbm_header(&bytes)?;
        if magic != b"P5" {
            return Err(ImageError::Format(format!(
                "expected P5 magic, got {}",
                String::from_utf8_lossy(magic)
            )));
        }
        if maxval != 255 {
            return Err(ImageError::Format(format!("only maxval 255 supported, got {maxval}")));
        }
        let need = width * height;
        if bytes.len() < at + need {
            return Err(ImageError::Format("truncated pixel data".into()));
        }
        Ok(GrayImage { width, height, data: bytes[at..at + need].to_vec() })
    }
}

/// Parse `magic\n<w> <h>\n<maxval>\n` with arbitrary whitespace and `#`
/// comments, returning the offset of the first pixel byte.
fn parse_netpbm_header(bytes: &[u8]) -> Result<(&[u8], usize, usize, usize, usize), ImageError> {
    if bytes.len() < 2 {
        return Err(ImageError::Format("file too short for a netpbm header".into()));
    }
    let magic = &bytes[0..2];
    let mut at = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            while at < bytes.len() && bytes[at].is_ascii_whitespace() {
                at += 1;
            }
            if at < bytes.len() && bytes[at] == b'#' {
                while at < bytes.len() && bytes[at] != b'\n' {
                    at += 1;
                }
            } else {
                break;
            }
        }
        let start = at;
        while at < bytes.len() && bytes[at].is_ascii_digit() {
            at += 1;
        }
        if start == at {
            return Err(ImageError::Format("missing header field".into()));
        }
        let text = std::str::from_utf8(&bytes[start..at])
            .map_err(|_| ImageError::Format("non-ascii header".into()))?;
        *field = text.parse().map_err(|_| ImageError::Format("bad header number".into()))?;
    }
    // exactly one whitespace byte separates the header from the pixels
    if at >= bytes.len() || !bytes[at].is_ascii_whitespace() {
        return Err(ImageError::Format("missing pixel separator".into()));
    }
    at += 1;
    Ok((magic, fields[0], fields[1], fields[2], at))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip_is_byte_exact() {
        let dir = std::env::temp_dir().join(format!("lnav-img-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut img = RgbImage::new(7, 5);
        for y in 0..5 {
            for x in 0..7 {
                img.set(x, y, [(x * 36) as u8, (y * 50) as u8, ((x + y) * 20) as u8]);
            }
        }
        let path = dir.join("roundtrip.ppm");
        img.save_ppm(&path).unwrap();
        let back = RgbImage::load_ppm(&path).unwrap();
        assert_eq!(img, back);

        img.save_ppm(&dir.join("second.ppm")).unwrap();
        let a = std::fs::read(&path).unwrap();
        let b = std::fs::read(dir.join("second.ppm")).unwrap();
        assert_eq!(a, b, "same image must serialize to identical bytes");
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn pgm_round_trip_and_bad_magic() {
        let dir = std::env::temp_dir().join(format!("lnav-pgm-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut g = GrayImage::new(4, 3);
        g.data.iter_mut().enumerate().for_each(|(i, v)| *v = (i * 21) as u8);
        let path = dir.join("map.pgm");
        g.save_pgm(&path).unwrap();
        assert_eq!(GrayImage::load_pgm(&path).unwrap(), g);
        assert!(RgbImage::load_ppm(&path).is_err(), "P5 file must not parse as P6");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
