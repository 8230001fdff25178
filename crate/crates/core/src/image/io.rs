//! PNG (8-bit gray/RGB) and PFM (32-bit float) reading and writing.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::Image;
use crate::error::{CoreError, Result};

/// Upper bound on samples accepted from a file header.
const MAX_SAMPLES: usize = 1 << 30;

/// Loads a PNG or PFM, chosen by file extension (case-insensitive).
///
/// 8-bit PNG samples map linearly onto `[0, 1]`; PFM samples pass through.
/// An alpha channel, if present, is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("png") => load_png(path),
        Some("pfm") => load_pfm(path),
        _ => Err(CoreError::format(path, "unsupported image format (expected .png or .pfm)")),
    }
}

/// Saves as PNG or PFM by extension. PNG samples are clamped to `[0, 1]`
/// and quantized with round-half-up; PFM is written little-endian, lossless.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match extension(path).as_deref() {
        Some("png") => save_png(img, path),
        Some("pfm") => save_pfm(img, path),
        _ => Err(CoreError::format(path, "unsupported image format (expected .png or .pfm)")),
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

fn checked_samples(path: &Path, c: usize, h: usize, w: usize) -> Result<usize> {
    c.checked_mul(h)
        .and_then(|n| n.checked_mul(w))
        .filter(|&n| n <= MAX_SAMPLES && h > 0 && w > 0)
        .ok_or_else(|| CoreError::format(path, format!("unsupported dimensions {w}x{h}x{c}")))
}

/// `round(clamp(v) * 255)` with ties rounded up.
#[inline]
pub(crate) fn quantize_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

fn load_png(path: &Path) -> Result<Image> {
    let file = File::open(path).map_err(|e| CoreError::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| CoreError::format(path, format!("PNG decode: {e}")))?;
    let (color, depth) = reader.output_color_type();
    if depth != png::BitDepth::Eight {
        return Err(CoreError::format(
            path,
            format!("unsupported PNG bit depth {depth:?} (only 8-bit is supported)"),
        ));
    }
    let (src_channels, keep) = match color {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (2, 1),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (4, 3),
        other => {
            return Err(CoreError::format(path, format!("unsupported PNG color type {other:?}")))
        }
    };
    let info = reader.info();
    let (w, h) = (info.width as usize, info.height as usize);
    checked_samples(path, src_channels, h, w)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| CoreError::format(path, "PNG too large"))?;
    let mut buf = vec![0u8; size];
    let out = reader
        .next_frame(&mut buf)
        .map_err(|e| CoreError::format(path, format!("PNG decode: {e}")))?;
    let n = h * w;
    let mut data = vec![0f32; keep * n];
    for y in 0..h {
        let line = &buf[y * out.line_size..];
        for x in 0..w {
            for c in 0..keep {
                data[c * n + y * w + x] = line[x * src_channels + c] as f32 / 255.0;
            }
        }
    }
    Image::new(keep, h, w, data)
}

fn save_png(img: &Image, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| CoreError::io(path, e))?;
    let (c, h, w) = img.shape();
    let mut encoder = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    encoder.set_color(if c == 1 {
        png::ColorType::Grayscale
    } else {
        png::ColorType::Rgb
    });
    encoder.set_depth(png::BitDepth::Eight);
    let encode_err = |e: png::EncodingError| match e {
        png::EncodingError::IoError(io) => CoreError::io(path, io),
        other => CoreError::format(path, format!("PNG encode: {other}")),
    };
    let mut writer = encoder.write_header().map_err(encode_err)?;
    let n = h * w;
    let data = img.data();
    let mut bytes = Vec::with_capacity(c * n);
    for i in 0..n {
        for ch in 0..c {
            bytes.push(quantize_u8(data[ch * n + i]));
        }
    }
    writer.write_image_data(&bytes).map_err(encode_err)?;
    writer.finish().map_err(encode_err)
}

fn load_pfm(path: &Path) -> Result<Image> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CoreError::io(path, e))?;

    // Header: three whitespace-separated tokens after the magic, then a
    // single whitespace byte before the raster.
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(CoreError::format(path, "truncated PFM header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;

    let channels = match tokens[0].as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(CoreError::format(path, format!("bad PFM magic {other:?}"))),
    };
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| CoreError::format(path, format!("bad PFM dimension {s:?}")))
    };
    let w = parse_dim(&tokens[1])?;
    let h = parse_dim(&tokens[2])?;
    let scale: f32 = tokens[3]
        .parse()
        .map_err(|_| CoreError::format(path, format!("bad PFM scale {:?}", tokens[3])))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(CoreError::format(path, "PFM scale must be nonzero"));
    }
    let little_endian = scale < 0.0;
    let total = checked_samples(path, channels, h, w)?;
    let raster = bytes
        .get(pos..pos + 4 * total)
        .ok_or_else(|| CoreError::format(path, "truncated PFM raster"))?;

    let n = h * w;
    let mut data = vec![0f32; total];
    for (i, chunk) in raster.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let pixel = i / channels;
        let c = i % channels;
        // Rows are stored bottom-up.
        let (row, x) = (pixel / w, pixel % w);
        let y = h - 1 - row;
        data[c * n + y * w + x] = v;
    }
    Image::new(channels, h, w, data).map_err(|_| CoreError::format(path, "PFM contains non-finite samples"))
}

fn save_pfm(img: &Image, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| CoreError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let (c, h, w) = img.shape();
    let magic = if c == 1 { "Pf" } else { "PF" };
    let mut bytes = format!("{magic}\n{w} {h}\n-1.0\n").into_bytes();
    bytes.reserve(4 * c * h * w);
    for y in (0..h).rev() {
        for x in 0..w {
            for ch in 0..c {
                bytes.extend_from_slice(&img.get(ch, y, x).to_le_bytes());
            }
        }
    }
    out.write_all(&bytes)
        .and_then(|_| out.flush())
        .map_err(|e| CoreError::io(path, e))
}
