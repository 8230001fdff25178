//! Multi-level separable 2-D orthonormal DWT and phase-correlation
//! registration.
//!
//! Bands are non-expansive: a level-`l` band of an `H x W` input is
//! `ceil(H / 2^l) x ceil(W / 2^l)`. Odd lengths are extended by one mirrored
//! sample before filtering; filters wrap periodically, which keeps every
//! level an orthogonal map on the (extended) signal.

mod register;

pub use register::{apply_shift, estimate_shift, ShiftEstimate};

use serde::{Deserialize, Serialize};

use crate::band::Band;
use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Haar,
    /// Daubechies, two vanishing moments (4 taps).
    Db2,
}

impl Family {
    fn lowpass(self) -> &'static [f64] {
        match self {
            Family::Haar => &HAAR_LO,
            Family::Db2 => &DB2_LO,
        }
    }

    /// Quadrature mirror: `g[n] = (-1)^n h[L-1-n]`.
    fn highpass(self) -> Vec<f64> {
        let h = self.lowpass();
        let l = h.len();
        (0..l)
            .map(|n| if n % 2 == 0 { h[l - 1 - n] } else { -h[l - 1 - n] })
            .collect()
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "haar" => Ok(Family::Haar),
            "db2" => Ok(Family::Db2),
            other => Err(format!("unknown wavelet family {other:?} (expected haar or db2)")),
        }
    }
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const HAAR_LO: [f64; 2] = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
// (1+sqrt3, 3+sqrt3, 3-sqrt3, 1-sqrt3) / (4 sqrt2)
const DB2_LO: [f64; 4] = [
    0.48296291314453414,
    0.836_516_303_737_807_9,
    0.224_143_868_042_013_4,
    -0.12940952255126037,
];

/// Detail band orientation. The first letter is the filter applied along
/// the width (x), the second along the height (y): `LH` holds horizontal
/// edges, `HL` vertical edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    LH,
    HL,
    HH,
}

pub const ORIENTATIONS: [Orientation; 3] = [Orientation::LH, Orientation::HL, Orientation::HH];

#[derive(Debug, Clone, PartialEq)]
pub struct DetailBand {
    pub level: usize,
    pub orientation: Orientation,
    pub band: Band,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid {
    levels: usize,
    approx: Band,
    /// Level 1 (finest) first; LH, HL, HH within a level.
    details: Vec<DetailBand>,
    family: Family,
    source_dims: (usize, usize),
}

/// Band dimensions at `level` for a source of `dims`.
pub fn level_dims(dims: (usize, usize), level: usize) -> (usize, usize) {
    let f = 1usize << level;
    (dims.0.div_ceil(f), dims.1.div_ceil(f))
}

impl WaveletPyramid {
    /// Assembles a pyramid from parts, checking every structural invariant.
    pub fn from_parts(
        family: Family,
        source_dims: (usize, usize),
        approx: Band,
        details: Vec<DetailBand>,
    ) -> Result<Self> {
        ensure!(!details.is_empty() && details.len().is_multiple_of(3), "detail count must be 3 x levels");
        let levels = details.len() / 3;
        ensure!(
            approx.dims() == level_dims(source_dims, levels),
            "approx band is {:?}, expected {:?}",
            approx.dims(),
            level_dims(source_dims, levels)
        );
        for (i, d) in details.iter().enumerate() {
            let level = i / 3 + 1;
            ensure!(
                d.level == level && d.orientation == ORIENTATIONS[i % 3],
                "detail band {i} out of order"
            );
            ensure!(
                d.band.dims() == level_dims(source_dims, level),
                "level {level} {:?} band is {:?}, expected {:?}",
                d.orientation,
                d.band.dims(),
                level_dims(source_dims, level)
            );
        }
        Ok(WaveletPyramid {
            levels,
            approx,
            details,
            family,
            source_dims,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn source_dims(&self) -> (usize, usize) {
        self.source_dims
    }

    pub fn approx(&self) -> &Band {
        &self.approx
    }

    pub fn approx_mut(&mut self) -> &mut Band {
        &mut self.approx
    }

    pub fn details(&self) -> &[DetailBand] {
        &self.details
    }

    pub fn details_mut(&mut self) -> &mut [DetailBand] {
        &mut self.details
    }

    pub fn detail(&self, level: usize, orientation: Orientation) -> &Band {
        let idx = (level - 1) * 3 + ORIENTATIONS.iter().position(|&o| o == orientation).unwrap();
        &self.details[idx].band
    }

    /// All bands, approx first, then details in storage order.
    pub fn bands(&self) -> impl Iterator<Item = &Band> {
        std::iter::once(&self.approx).chain(self.details.iter().map(|d| &d.band))
    }

    pub fn bands_mut(&mut self) -> impl Iterator<Item = &mut Band> {
        std::iter::once(&mut self.approx).chain(self.details.iter_mut().map(|d| &mut d.band))
    }

    /// Resolution level of each entry yielded by [`bands`](Self::bands).
    pub fn band_levels(&self) -> Vec<usize> {
        std::iter::once(self.levels)
            .chain(self.details.iter().map(|d| d.level))
            .collect()
    }

    pub fn total_energy(&self) -> f64 {
        self.bands().map(Band::energy).sum()
    }

    /// Approximation band at `level` (0 = full reconstruction), synthesized
    /// from the coarser levels.
    pub fn approx_at(&self, level: usize) -> Result<Band> {
        ensure!(level <= self.levels, "level {level} exceeds pyramid depth {}", self.levels);
        let mut current = self.approx.clone();
        for l in (level + 1..=self.levels).rev() {
            let target = level_dims(self.source_dims, l - 1);
            current = synthesize_level(
                self.family,
                &current,
                [
                    self.detail(l, Orientation::LH),
                    self.detail(l, Orientation::HL),
                    self.detail(l, Orientation::HH),
                ],
                target,
            )?;
        }
        Ok(current)
    }
}

/// Forward transform of one channel.
pub fn dwt2_forward(band: &Band, levels: usize, family: Family) -> Result<WaveletPyramid> {
    ensure!(levels >= 1, "dwt needs at least one level");
    let (h, w) = band.dims();
    ensure!(
        levels < usize::BITS as usize && h.min(w) >= 1 << levels,
        "{h}x{w} is too small for {levels} levels (needs min side >= {})",
        1u64 << levels.min(63)
    );
    let mut details = Vec::with_capacity(3 * levels);
    let mut current = band.clone();
    for level in 1..=levels {
        let [ll, lh, hl, hh] = analyze_level(family, &current);
        for (orientation, b) in ORIENTATIONS.into_iter().zip([lh, hl, hh]) {
            details.push(DetailBand {
                level,
                orientation,
                band: b,
            });
        }
        current = ll;
    }
    WaveletPyramid::from_parts(family, (h, w), current, details)
}

/// Full inverse transform back to the source dimensions.
pub fn dwt2_inverse(pyr: &WaveletPyramid) -> Result<Band> {
    // Re-validate: fields may have been edited through the mutable accessors.
    let checked = WaveletPyramid::from_parts(
        pyr.family,
        pyr.source_dims,
        pyr.approx.clone(),
        pyr.details.clone(),
    )?;
    checked.approx_at(0)
}

fn analyze_level(family: Family, band: &Band) -> [Band; 4] {
    let (h, w) = band.dims();
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let lo = family.lowpass();
    let hi = family.highpass();

    // Rows: each row splits into low and high halves of length ow.
    let mut row_lo = vec![0.0; h * ow];
    let mut row_hi = vec![0.0; h * ow];
    for y in 0..h {
        analyze_1d(band.row(y), lo, &hi, &mut row_lo[y * ow..(y + 1) * ow], &mut row_hi[y * ow..(y + 1) * ow]);
    }

    let columns = |src: &[f64]| -> (Band, Band) {
        let mut low = Band::zeros(oh, ow);
        let mut high = Band::zeros(oh, ow);
        let mut col = vec![0.0; h];
        let mut out_lo = vec![0.0; oh];
        let mut out_hi = vec![0.0; oh];
        for x in 0..ow {
            for y in 0..h {
                col[y] = src[y * ow + x];
            }
            analyze_1d(&col, lo, &hi, &mut out_lo, &mut out_hi);
            for y in 0..oh {
                low.set(y, x, out_lo[y]);
                high.set(y, x, out_hi[y]);
            }
        }
        (low, high)
    };
    let (ll, lh) = columns(&row_lo);
    let (hl, hh) = columns(&row_hi);
    [ll, lh, hl, hh]
}

fn synthesize_level(
    family: Family,
    approx: &Band,
    [lh, hl, hh]: [&Band; 3],
    target: (usize, usize),
) -> Result<Band> {
    let (h, w) = target;
    let (ih, iw) = (h.div_ceil(2), w.div_ceil(2));
    ensure!(
        approx.dims() == (ih, iw) && lh.dims() == (ih, iw) && hl.dims() == (ih, iw) && hh.dims() == (ih, iw),
        "band dimensions inconsistent with reconstruction target {h}x{w}"
    );
    let lo = family.lowpass();
    let hi = family.highpass();

    // Columns first (undoing the forward order), producing row-filtered planes.
    let columns = |low: &Band, high: &Band| -> Vec<f64> {
        let mut out = vec![0.0; h * iw];
        let mut a = vec![0.0; ih];
        let mut d = vec![0.0; ih];
        let mut col = vec![0.0; h];
        for x in 0..iw {
            for y in 0..ih {
                a[y] = low.get(y, x);
                d[y] = high.get(y, x);
            }
            synthesize_1d(&a, &d, lo, &hi, &mut col);
            for y in 0..h {
                out[y * iw + x] = col[y];
            }
        }
        out
    };
    let row_lo = columns(approx, lh);
    let row_hi = columns(hl, hh);

    let mut out = Band::zeros(h, w);
    let mut row = vec![0.0; w];
    for y in 0..h {
        synthesize_1d(&row_lo[y * iw..(y + 1) * iw], &row_hi[y * iw..(y + 1) * iw], lo, &hi, &mut row);
        out.data_mut()[y * w..(y + 1) * w].copy_from_slice(&row);
    }
    Ok(out)
}

/// One periodized analysis step. Odd inputs are extended by repeating the
/// last sample (half-sample symmetric extension).
fn analyze_1d(x: &[f64], lo: &[f64], hi: &[f64], out_lo: &mut [f64], out_hi: &mut [f64]) {
    let n = x.len();
    let m = n.div_ceil(2);
    let ext = 2 * m;
    let sample = |i: usize| if i < n { x[i] } else { x[n - 1] };
    for k in 0..m {
        let (mut a, mut d) = (0.0, 0.0);
        for (t, (&hl, &hh)) in lo.iter().zip(hi).enumerate() {
            let v = sample((2 * k + t) % ext);
            a += hl * v;
            d += hh * v;
        }
        out_lo[k] = a;
        out_hi[k] = d;
    }
}

/// Transpose of [`analyze_1d`] on the extended signal, truncated to
/// `out.len()` samples.
fn synthesize_1d(a: &[f64], d: &[f64], lo: &[f64], hi: &[f64], out: &mut [f64]) {
    let m = a.len();
    let ext = 2 * m;
    let mut full = vec![0.0; ext];
    for k in 0..m {
        for (t, (&hl, &hh)) in lo.iter().zip(hi).enumerate() {
            full[(2 * k + t) % ext] += hl * a[k] + hh * d[k];
        }
    }
    out.copy_from_slice(&full[..out.len()]);
}
