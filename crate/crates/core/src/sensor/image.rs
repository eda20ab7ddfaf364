use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Clean linear-RGB scene. Values are channel-interleaved `R,G,B` in row-major
/// order and lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "image must be non-empty, got {width}x{height}"
            )));
        }
        if width % 2 != 0 || height % 2 != 0 {
            return Err(Error::Dimension(format!(
                "RGGB tiling needs even dimensions, got {width}x{height}"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(Error::Dimension(format!(
                "expected {} values for {width}x{height}x3, got {}",
                width * height * 3,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::InvalidParameter(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self { width, height, data })
    }

    /// Uniform image with the given channel values.
    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Result<Self> {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f32 {
        self.data[(row * self.width + col) * 3 + channel]
    }

    /// Planar `3 x H x W` copy, the layout networks consume.
    pub fn to_planar(&self) -> Vec<f32> {
        let plane = self.width * self.height;
        let mut out = vec![0.0; plane * 3];
        for (i, px) in self.data.chunks_exact(3).enumerate() {
            out[i] = px[0];
            out[plane + i] = px[1];
            out[2 * plane + i] = px[2];
        }
        out
    }

    /// Read a binary P6 PPM with maxval 255. Values are divided by 255 and
    /// treated as linear.
    pub fn read_ppm(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let (width, height, maxval) =
            read_pnm_header(&mut reader, b"P6").map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if maxval != 255 {
            return Err(Error::Format(format!(
                "{}: only 8-bit PPM is supported (maxval {maxval})",
                path.display()
            )));
        }
        let mut bytes = vec![0u8; width * height * 3];
        reader.read_exact(&mut bytes).map_err(|e| Error::io(path, e))?;
        let data = bytes.iter().map(|&b| b as f32 / 255.0).collect();
        Self::new(width, height, data)
    }

    pub fn to_ppm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
        out
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_ppm_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Parse a PNM header (`magic`, width, height, maxval), skipping comments.
pub(crate) fn read_pnm_header<R: BufRead>(
    reader: &mut R,
    magic: &[u8; 2],
) -> std::result::Result<(usize, usize, usize), String> {
    let mut tokens: Vec<String> = Vec::with_capacity(4);
    let mut current = String::new();
    let mut in_comment = false;
    while tokens.len() < 4 {
        let mut byte = [0u8; 1];
        if reader.read_exact(&mut byte).is_err() {
            return Err("truncated header".into());
        }
        let c = byte[0] as char;
        if in_comment {
            if c == '\n' {
                in_comment = false;
            }
            continue;
        }
        if c == '#' {
            in_comment = true;
            continue;
        }
        if c.is_ascii_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else {
            current.push(c);
        }
    }
    if tokens[0].as_bytes() != magic {
        return Err(format!(
            "bad magic {:?}, expected {}",
            tokens[0],
            String::from_utf8_lossy(magic)
        ));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| format!("bad number {s:?}"));
    Ok((parse(&tokens[1])?, parse(&tokens[2])?, parse(&tokens[3])?))
}

/// Color selected by the RGGB filter at a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfaColor {
    Red,
    Green,
    Blue,
}

impl CfaColor {
    /// RGGB: `R G` on even rows, `G B` on odd rows.
    #[inline]
    pub fn at(row: usize, col: usize) -> Self {
        match (row & 1, col & 1) {
            (0, 0) => CfaColor::Red,
            (1, 1) => CfaColor::Blue,
            _ => CfaColor::Green,
        }
    }

    #[inline]
    pub fn channel(self) -> usize {
        match self {
            CfaColor::Red => 0,
            CfaColor::Green => 1,
            CfaColor::Blue => 2,
        }
    }
}

/// Single-channel RGGB mosaic of linear intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct BayerMosaic {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl BayerMosaic {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }
}

/// Sub-sample an RGB image with the RGGB color filter array.
pub fn apply_cfa(img: &RgbImage) -> Result<BayerMosaic> {
    if img.width % 2 != 0 || img.height % 2 != 0 {
        return Err(Error::Dimension(format!(
            "RGGB tiling needs even dimensions, got {}x{}",
            img.width, img.height
        )));
    }
    let mut data = Vec::with_capacity(img.width * img.height);
    for r in 0..img.height {
        for c in 0..img.width {
            data.push(img.get(r, c, CfaColor::at(r, c).channel()));
        }
    }
    Ok(BayerMosaic {
        width: img.width,
        height: img.height,
        data,
    })
}
