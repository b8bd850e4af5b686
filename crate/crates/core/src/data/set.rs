use super::SphericalDirection;
use crate::error::{Error, Result};

/// Which ear a response belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ear {
    Left,
    Right,
}

impl Ear {
    pub const BOTH: [Ear; 2] = [Ear::Left, Ear::Right];

    pub fn index(self) -> usize {
        match self {
            Ear::Left => 0,
            Ear::Right => 1,
        }
    }
}

/// Time-domain head-related impulse responses for both ears over a grid.
///
/// Taps are stored as `f32`, the precision of the on-disk container, so a
/// save/load cycle reproduces every sample bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct HrirSet {
    sample_rate: u32,
    positions: Vec<SphericalDirection>,
    ir_length: usize,
    left: Vec<f32>,
    right: Vec<f32>,
}

impl HrirSet {
    /// `left` and `right` are `P × T` row-major matrices.
    pub fn new(
        sample_rate: u32,
        positions: Vec<SphericalDirection>,
        ir_length: usize,
        left: Vec<f32>,
        right: Vec<f32>,
    ) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidArgument("an HRIR set needs at least one position".into()));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if !ir_length.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "IR length must be a power of two, got {ir_length}"
            )));
        }
        let expected = positions.len() * ir_length;
        if left.len() != expected || right.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} taps per ear, got {} (left) and {} (right)",
                left.len(),
                right.len()
            )));
        }
        if left.iter().chain(&right).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("impulse responses".into()));
        }
        Ok(HrirSet {
            sample_rate,
            positions,
            ir_length,
            left,
            right,
        })
    }

    /// Builds a set from double-precision responses, rounding to `f32`.
    pub fn from_f64(
        sample_rate: u32,
        positions: Vec<SphericalDirection>,
        ir_length: usize,
        left: &[f64],
        right: &[f64],
    ) -> Result<Self> {
        let cast = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<_>>();
        Self::new(sample_rate, positions, ir_length, cast(left), cast(right))
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn positions(&self) -> &[SphericalDirection] {
        &self.positions
    }

    pub fn num_positions(&self) -> usize {
        self.positions.len()
    }

    pub fn ir_length(&self) -> usize {
        self.ir_length
    }

    pub fn ear_data(&self, ear: Ear) -> &[f32] {
        match ear {
            Ear::Left => &self.left,
            Ear::Right => &self.right,
        }
    }

    pub fn ir(&self, ear: Ear, position: usize) -> &[f32] {
        let t = self.ir_length;
        &self.ear_data(ear)[position * t..(position + 1) * t]
    }

    pub fn ir_f64(&self, ear: Ear, position: usize) -> Vec<f64> {
        self.ir(ear, position).iter().map(|&x| f64::from(x)).collect()
    }

    /// Keeps the given positions, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<HrirSet> {
        let t = self.ir_length;
        let mut left = Vec::with_capacity(indices.len() * t);
        let mut right = Vec::with_capacity(indices.len() * t);
        let mut positions = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.positions.len() {
                return Err(Error::InvalidArgument(format!("position index {i} out of range")));
            }
            positions.push(self.positions[i]);
            left.extend_from_slice(self.ir(Ear::Left, i));
            right.extend_from_slice(self.ir(Ear::Right, i));
        }
        HrirSet::new(self.sample_rate, positions, t, left, right)
    }

    /// Applies `f(ear, position, ir)` to every response.
    pub fn map_irs<F>(&self, mut f: F) -> Result<HrirSet>
    where
        F: FnMut(Ear, usize, &[f64]) -> Result<Vec<f64>>,
    {
        let t = self.ir_length;
        let mut out = [Vec::with_capacity(self.left.len()), Vec::with_capacity(self.right.len())];
        for p in 0..self.num_positions() {
            for ear in Ear::BOTH {
                let processed = f(ear, p, &self.ir_f64(ear, p))?;
                if processed.len() != t {
                    return Err(Error::Shape(format!(
                        "processed IR has {} taps, expected {t}",
                        processed.len()
                    )));
                }
                out[ear.index()].extend(processed.iter().map(|&x| x as f32));
            }
        }
        let [left, right] = out;
        HrirSet::new(self.sample_rate, self.positions.clone(), t, left, right)
    }
}

/// Magnitude and phase of one ear, `P × B` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EarSpectra {
    pub magnitude: Vec<f64>,
    pub phase: Vec<f64>,
}

/// Frequency-domain responses derived from an [`HrirSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct HrtfSet {
    sample_rate: u32,
    ir_length: usize,
    positions: Vec<SphericalDirection>,
    frequencies: Vec<f64>,
    spectra: [EarSpectra; 2],
}

impl HrtfSet {
    pub fn new(
        sample_rate: u32,
        ir_length: usize,
        positions: Vec<SphericalDirection>,
        left: EarSpectra,
        right: EarSpectra,
    ) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidArgument("an HRTF set needs at least one position".into()));
        }
        if !ir_length.is_power_of_two() || ir_length < 2 {
            return Err(Error::InvalidArgument(format!(
                "IR length must be a power of two, got {ir_length}"
            )));
        }
        let bins = ir_length / 2 + 1;
        let expected = positions.len() * bins;
        for ear in [&left, &right] {
            if ear.magnitude.len() != expected || ear.phase.len() != expected {
                return Err(Error::Shape(format!(
                    "expected {expected} spectral values per ear, got {} / {}",
                    ear.magnitude.len(),
                    ear.phase.len()
                )));
            }
            if ear.magnitude.iter().chain(&ear.phase).any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("HRTF spectra".into()));
            }
            if ear.magnitude.iter().any(|&m| m < 0.0) {
                return Err(Error::InvalidArgument("magnitudes must be non-negative".into()));
            }
        }
        let frequencies = bin_frequencies(sample_rate, ir_length);
        Ok(HrtfSet {
            sample_rate,
            ir_length,
            positions,
            frequencies,
            spectra: [left, right],
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn ir_length(&self) -> usize {
        self.ir_length
    }

    pub fn positions(&self) -> &[SphericalDirection] {
        &self.positions
    }

    pub fn num_positions(&self) -> usize {
        self.positions.len()
    }

    /// Bin centre frequencies in Hz; bin 0 is DC.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn num_bins(&self) -> usize {
        self.frequencies.len()
    }

    pub fn ear(&self, ear: Ear) -> &EarSpectra {
        &self.spectra[ear.index()]
    }

    pub fn magnitude(&self, ear: Ear, position: usize) -> &[f64] {
        let b = self.num_bins();
        &self.spectra[ear.index()].magnitude[position * b..(position + 1) * b]
    }

    pub fn phase(&self, ear: Ear, position: usize) -> &[f64] {
        let b = self.num_bins();
        &self.spectra[ear.index()].phase[position * b..(position + 1) * b]
    }

    /// Whether `other` shares this set's grid and frequency bins.
    pub fn same_layout(&self, other: &HrtfSet) -> bool {
        self.sample_rate == other.sample_rate
            && self.ir_length == other.ir_length
            && self.positions.len() == other.positions.len()
            && self
                .positions
                .iter()
                .zip(&other.positions)
                .all(|(a, b)| a.angle_to(b) < 1e-9)
    }

    pub fn select(&self, indices: &[usize]) -> Result<HrtfSet> {
        let b = self.num_bins();
        let mut positions = Vec::with_capacity(indices.len());
        let mut ears: [EarSpectra; 2] = Default::default();
        for &i in indices {
            if i >= self.positions.len() {
                return Err(Error::InvalidArgument(format!("position index {i} out of range")));
            }
            positions.push(self.positions[i]);
            for (dst, src) in ears.iter_mut().zip(&self.spectra) {
                dst.magnitude.extend_from_slice(&src.magnitude[i * b..(i + 1) * b]);
                dst.phase.extend_from_slice(&src.phase[i * b..(i + 1) * b]);
            }
        }
        let [left, right] = ears;
        HrtfSet::new(self.sample_rate, self.ir_length, positions, left, right)
    }

    /// Returns a copy whose magnitudes are replaced, keeping phase.
    pub fn with_magnitudes(&self, left: Vec<f64>, right: Vec<f64>) -> Result<HrtfSet> {
        HrtfSet::new(
            self.sample_rate,
            self.ir_length,
            self.positions.clone(),
            EarSpectra {
                magnitude: left,
                phase: self.spectra[0].phase.clone(),
            },
            EarSpectra {
                magnitude: right,
                phase: self.spectra[1].phase.clone(),
            },
        )
    }
}

impl Default for EarSpectra {
    fn default() -> Self {
        EarSpectra {
            magnitude: Vec::new(),
            phase: Vec::new(),
        }
    }
}

/// Centre frequencies of the `T/2 + 1` non-negative DFT bins.
pub fn bin_frequencies(sample_rate: u32, ir_length: usize) -> Vec<f64> {
    let df = f64::from(sample_rate) / ir_length as f64;
    (0..=ir_length / 2).map(|b| b as f64 * df).collect()
}
