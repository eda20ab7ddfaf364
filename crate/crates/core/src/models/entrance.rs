use super::layers::Conv;
use crate::autodiff::{Graph, ParamStore, Var};
use crate::error::{Error, Result};
use crate::rng::Generator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntranceKind {
    /// conv(32, 3x3) -> ReLU -> conv(3, 3x3).
    Shallow,
    /// Four-level encoder-decoder with skip connections (16/32/64/128).
    Deep,
}

impl EntranceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntranceKind::Shallow => "shallow",
            EntranceKind::Deep => "deep",
        }
    }
}

impl std::str::FromStr for EntranceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "shallow" => Ok(EntranceKind::Shallow),
            "deep" => Ok(EntranceKind::Deep),
            o => Err(Error::InvalidParameter(format!("unknown entrance {o:?}"))),
        }
    }
}

impl std::fmt::Display for EntranceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the raw Bayer frame is presented to the entrance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum InputLayout {
    /// One channel at full resolution; the entrance learns demosaicking.
    #[default]
    Mosaic,
    /// Four channels (R, G1, G2, B) at half resolution.
    PackedRggb,
}

impl InputLayout {
    pub fn as_str(self) -> &'static str {
        match self {
            InputLayout::Mosaic => "mosaic",
            InputLayout::PackedRggb => "packed",
        }
    }

    pub fn channels(self) -> usize {
        match self {
            InputLayout::Mosaic => 1,
            InputLayout::PackedRggb => 4,
        }
    }
}

impl std::str::FromStr for InputLayout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mosaic" => Ok(InputLayout::Mosaic),
            "packed" | "packed-rggb" => Ok(InputLayout::PackedRggb),
            o => Err(Error::InvalidParameter(format!("unknown input layout {o:?}"))),
        }
    }
}

pub const DEEP_WIDTHS: [usize; 4] = [16, 32, 64, 128];

#[derive(Debug, Clone)]
enum Body {
    Shallow {
        conv1: Conv,
        conv2: Conv,
    },
    Deep {
        /// Two convs per encoder level, the last level is the bottleneck.
        enc: Vec<(Conv, Conv)>,
        /// Per decoder level: channel-reducing conv after upsampling, then two
        /// convs over the concatenated skip.
        dec: Vec<(Conv, Conv, Conv)>,
        head: Conv,
    },
}

/// Front of the student network: raw counts in, 3-channel image-sized
/// representation out.
#[derive(Debug, Clone)]
pub struct Entrance {
    pub kind: EntranceKind,
    pub layout: InputLayout,
    body: Body,
}

impl Entrance {
    pub fn new(kind: EntranceKind, layout: InputLayout, store: &mut ParamStore, rng: &mut Generator) -> Self {
        let cin = layout.channels();
        let body = match kind {
            EntranceKind::Shallow => Body::Shallow {
                conv1: Conv::new(store, "entrance.conv1", cin, 32, 3, rng),
                conv2: Conv::new(store, "entrance.conv2", 32, 3, 3, rng),
            },
            EntranceKind::Deep => {
                let mut enc = Vec::new();
                let mut prev = cin;
                for (lvl, &w) in DEEP_WIDTHS.iter().enumerate() {
                    let a = Conv::new(store, &format!("entrance.enc{lvl}.conv1"), prev, w, 3, rng);
                    let b = Conv::new(store, &format!("entrance.enc{lvl}.conv2"), w, w, 3, rng);
                    enc.push((a, b));
                    prev = w;
                }
                let mut dec = Vec::new();
                for lvl in (0..DEEP_WIDTHS.len() - 1).rev() {
                    let w = DEEP_WIDTHS[lvl];
                    let up = Conv::new(store, &format!("entrance.dec{lvl}.up"), prev, w, 3, rng);
                    let a = Conv::new(store, &format!("entrance.dec{lvl}.conv1"), 2 * w, w, 3, rng);
                    let b = Conv::new(store, &format!("entrance.dec{lvl}.conv2"), w, w, 3, rng);
                    dec.push((up, a, b));
                    prev = w;
                }
                let head = Conv::new(store, "entrance.head", prev, 3, 1, rng);
                Body::Deep { enc, dec, head }
            }
        };
        Self { kind, layout, body }
    }

    /// Number of convolution layers.
    pub fn depth(&self) -> usize {
        match &self.body {
            Body::Shallow { .. } => 2,
            Body::Deep { enc, dec, .. } => 2 * enc.len() + 3 * dec.len() + 1,
        }
    }

    /// `x`: `N x C x H' x W'` in the input layout. Output: `N x 3 x H x W` at
    /// full frame resolution.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let s = g.shape(x).to_vec();
        if s.len() != 4 || s[1] != self.layout.channels() {
            return Err(Error::Shape(format!(
                "entrance expects N x {} x H x W, got {s:?}",
                self.layout.channels()
            )));
        }
        // Packed input runs the first stage at half resolution and is
        // upsampled back to frame size.
        let packed = self.layout == InputLayout::PackedRggb;
        match &self.body {
            Body::Shallow { conv1, conv2 } => {
                let mut h = conv1.forward(g, store, x)?;
                h = g.relu(h);
                if packed {
                    h = g.upsample2x(h)?;
                }
                conv2.forward(g, store, h)
            }
            Body::Deep { enc, dec, head } => {
                let levels = enc.len();
                let need = 1usize << (levels - 1);
                if s[2] % need != 0 || s[3] % need != 0 {
                    return Err(Error::Shape(format!(
                        "deep entrance needs spatial dims divisible by {need}, got {}x{}",
                        s[2], s[3]
                    )));
                }
                let mut skips = Vec::with_capacity(levels);
                let mut h = x;
                for (lvl, (a, b)) in enc.iter().enumerate() {
                    if lvl > 0 {
                        h = g.maxpool2x2(h)?;
                    }
                    h = a.forward(g, store, h)?;
                    h = g.relu(h);
                    h = b.forward(g, store, h)?;
                    h = g.relu(h);
                    skips.push(h);
                }
                for (i, (up, a, b)) in dec.iter().enumerate() {
                    let skip = skips[levels - 2 - i];
                    h = g.upsample2x(h)?;
                    h = up.forward(g, store, h)?;
                    h = g.relu(h);
                    h = g.concat_channels(skip, h)?;
                    h = a.forward(g, store, h)?;
                    h = g.relu(h);
                    h = b.forward(g, store, h)?;
                    h = g.relu(h);
                }
                if packed {
                    h = g.upsample2x(h)?;
                }
                head.forward(g, store, h)
            }
        }
    }
}
