//! Communication side of the link: symbol dictionaries, the matched-filter
//! receive model, symbol estimation and demapping, and BER Monte Carlo.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{pattern_at, ArrayGeometry, Beamformer};
use crate::error::{Error, Result};

/// Monte-Carlo trials handled by one random stream.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Am,
    Pm,
    Qam,
    Ask2,
    Bpsk,
    Qpsk,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Am => "am",
            Scheme::Pm => "pm",
            Scheme::Qam => "qam",
            Scheme::Ask2 => "ask2",
            Scheme::Bpsk => "bpsk",
            Scheme::Qpsk => "qpsk",
        }
    }

    fn decides_on_magnitude(self) -> bool {
        matches!(self, Scheme::Am | Scheme::Ask2)
    }

    fn decides_on_phase(self) -> bool {
        matches!(self, Scheme::Pm | Scheme::Bpsk | Scheme::Qpsk)
    }
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// `2^{N_b}` complex symbols `Δ_k e^{jφ_k}`; index `k` carries the bits of
/// `k` in natural binary order, most significant first.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolDictionary {
    scheme: Scheme,
    symbols: Vec<Complex64>,
    bits: usize,
}

impl SymbolDictionary {
    fn build(scheme: Scheme, symbols: Vec<Complex64>) -> Result<Self> {
        let n = symbols.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::domain(format!("dictionary size {n} is not a power of two >= 2")));
        }
        for (i, a) in symbols.iter().enumerate() {
            if !(a.norm() > 0.0) || !a.re.is_finite() || !a.im.is_finite() {
                return Err(Error::domain("dictionary levels must be positive and finite"));
            }
            if symbols[..i].iter().any(|b| (a - b).norm() < 1e-12) {
                return Err(Error::domain("dictionary entries must be distinct"));
            }
        }
        Ok(Self {
            scheme,
            bits: n.trailing_zeros() as usize,
            symbols,
        })
    }

    /// Sidelobe amplitude levels with zero phase.
    pub fn am(levels: &[f64]) -> Result<Self> {
        Self::build(Scheme::Am, levels.iter().map(|&d| Complex64::new(d, 0.0)).collect())
    }

    /// Phases at a common amplitude.
    pub fn pm(amplitude: f64, phases: &[f64]) -> Result<Self> {
        Self::build(
            Scheme::Pm,
            phases
                .iter()
                .map(|&p| Complex64::from_polar(amplitude, wrap_phase(p)))
                .collect(),
        )
    }

    /// Every (level, phase) pair, level-major.
    pub fn qam(levels: &[f64], phases: &[f64]) -> Result<Self> {
        let symbols = levels
            .iter()
            .flat_map(|&d| phases.iter().map(move |&p| Complex64::from_polar(d, wrap_phase(p))))
            .collect();
        Self::build(Scheme::Qam, symbols)
    }

    /// Bit 0 ↦ `low`, bit 1 ↦ `high`.
    pub fn ask2(high: f64, low: f64) -> Result<Self> {
        Self::build(Scheme::Ask2, vec![Complex64::new(low, 0.0), Complex64::new(high, 0.0)])
    }

    /// Phases `{0, π}`.
    pub fn bpsk(amplitude: f64) -> Result<Self> {
        let mut d = Self::pm(amplitude, &[0.0, PI])?;
        d.scheme = Scheme::Bpsk;
        Ok(d)
    }

    /// Phases `{−π/2, 0, π/2, π}`.
    pub fn qpsk(amplitude: f64) -> Result<Self> {
        let mut d = Self::pm(amplitude, &[-PI / 2.0, 0.0, PI / 2.0, PI])?;
        d.scheme = Scheme::Qpsk;
        Ok(d)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits
    }

    /// Natural binary label of symbol `k`.
    pub fn bits_of(&self, k: usize) -> Vec<bool> {
        (0..self.bits).rev().map(|b| (k >> b) & 1 == 1).collect()
    }

    /// Nearest dictionary index for a complex gain estimate, after the
    /// dictionary is scaled by `scale` (the per-waveform amplitude).
    pub fn nearest(&self, estimate: Complex64, scale: f64) -> usize {
        let dist = |s: &Complex64| -> f64 {
            if self.scheme.decides_on_magnitude() {
                (estimate.norm() - scale * s.norm()).abs()
            } else if self.scheme.decides_on_phase() {
                wrap_phase(estimate.arg() - s.arg()).abs()
            } else {
                (estimate - scale * s).norm()
            }
        };
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, s) in self.symbols.iter().enumerate() {
            let d = dist(s);
            if d < best_d {
                best = k;
                best_d = d;
            }
        }
        best
    }
}

/// Channel between the array and the communication receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub beta: Complex64,
    pub noise_power: f64,
    pub transmit_power: f64,
    /// Pulse repetition frequency, used only to report bit rates.
    pub prf: f64,
    /// Draw a unit-modulus `β_c` with uniform phase per pulse (known to the
    /// receiver) instead of using `beta`.
    pub random_phase: bool,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            beta: Complex64::new(1.0, 0.0),
            noise_power: 1.0,
            transmit_power: 1.0,
            prf: 1.0,
            random_phase: false,
        }
    }
}

impl ChannelModel {
    /// Noise power giving `10 log10(P_t/σ²) = snr_db`.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.noise_power = self.transmit_power / 10f64.powf(snr_db / 10.0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_power > 0.0) || !(self.transmit_power > 0.0) || !(self.prf > 0.0) {
            return Err(Error::domain("noise power, transmit power and PRF must be positive"));
        }
        if self.beta.norm() == 0.0 {
            return Err(Error::domain("channel coefficient must be nonzero"));
        }
        Ok(())
    }

    /// Bit rate for `bits_per_pulse` bits in every pulse.
    pub fn bit_rate(&self, bits_per_pulse: usize) -> f64 {
        self.prf * bits_per_pulse as f64
    }

    /// Amplitude of each of `waveforms` orthogonal waveforms sharing `P_t`.
    pub fn waveform_amplitude(&self, waveforms: usize) -> f64 {
        (self.transmit_power / waveforms.max(1) as f64).sqrt()
    }
}

/// `w^H a(θ_c)`.
pub fn transmit_gain(w: &Beamformer, geometry: &ArrayGeometry, theta_c: f64) -> Result<Complex64> {
    pattern_at(w.weights(), geometry, theta_c)
}

/// Circular complex Gaussian sample with `E|n|² = variance`.
pub fn complex_noise<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Matched-filter output for one of `waveforms` orthogonal waveforms:
/// `y = β √(P_t / waveforms) · gain + n`.
pub fn matched_filter_rx<R: Rng + ?Sized>(
    gain: Complex64,
    channel: &ChannelModel,
    waveforms: usize,
    rng: &mut R,
) -> Complex64 {
    channel.beta * channel.waveform_amplitude(waveforms) * gain + complex_noise(rng, channel.noise_power)
}

/// `(|y/β|, angle(y) − angle(β))` with the phase wrapped to `(−π, π]`.
pub fn estimate_symbol(y: Complex64, beta: Complex64) -> Result<(f64, f64)> {
    if beta.norm() == 0.0 {
        return Err(Error::domain("channel coefficient is zero"));
    }
    Ok(((y / beta).norm(), wrap_phase(y.arg() - beta.arg())))
}

/// Bits of the dictionary entry nearest to the estimate `(Ĝ, φ̂)`.
pub fn demap(estimate: (f64, f64), dictionary: &SymbolDictionary, scale: f64) -> Vec<bool> {
    let z = Complex64::from_polar(estimate.0, estimate.1);
    dictionary.bits_of(dictionary.nearest(z, scale))
}

/// Simulated bit error rates over a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BerCurve {
    /// `"snr_db"` or `"angle_deg"`.
    pub axis: &'static str,
    pub x: Vec<f64>,
    pub ber: Vec<f64>,
    pub trials: usize,
    pub scheme: Scheme,
    pub bits_per_pulse: usize,
    pub seed: u64,
}

impl BerCurve {
    /// SNR (or angle) where the curve crosses `level`, interpolating
    /// `log10(BER)` linearly between the first bracketing pair.
    pub fn crossing(&self, level: f64) -> Option<f64> {
        let lv = level.log10();
        self.x.windows(2).zip(self.ber.windows(2)).find_map(|(x, b)| {
            if b[0] >= level && b[1] <= level && b[0] > 0.0 && b[1] > 0.0 && b[0] != b[1] {
                let (l0, l1) = (b[0].log10(), b[1].log10());
                Some(x[0] + (lv - l0) / (l1 - l0) * (x[1] - x[0]))
            } else {
                None
            }
        })
    }
}

pub fn write_ber_csv<W: Write>(mut out: W, curve: &BerCurve) -> Result<()> {
    writeln!(out, "{},ber,trials,scheme,bits_per_pulse,seed", curve.axis)?;
    for (x, b) in curve.x.iter().zip(&curve.ber) {
        writeln!(
            out,
            "{x},{b:.8e},{},{},{},{}",
            curve.trials,
            curve.scheme.as_str(),
            curve.bits_per_pulse,
            curve.seed
        )?;
    }
    Ok(())
}

fn count_errors(
    gains: &[Complex64],
    dictionary: &SymbolDictionary,
    channel: &ChannelModel,
    waveforms: usize,
    trials: usize,
    seed: u64,
) -> u64 {
    let scale = channel.waveform_amplitude(waveforms);
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            // the stream depends only on the chunk, so every sweep point sees
            // the same bits and the same unit-variance noise draws
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(trials - c * CHUNK);
            let mut errors = 0u64;
            for _ in 0..n {
                for _ in 0..waveforms {
                    let k = rng.random_range(0..dictionary.len());
                    let beta = if channel.random_phase {
                        Complex64::from_polar(1.0, rng.random_range(-PI..PI))
                    } else {
                        channel.beta
                    };
                    let ch = ChannelModel { beta, ..*channel };
                    let y = matched_filter_rx(gains[k], &ch, waveforms, &mut rng);
                    let est = estimate_symbol(y, beta).expect("nonzero beta");
                    let got = dictionary.nearest(Complex64::from_polar(est.0, est.1), scale);
                    errors += (got ^ k).count_ones() as u64;
                }
            }
            errors
        })
        .sum()
}

fn check_inputs(
    gains: &[Complex64],
    dictionary: &SymbolDictionary,
    channel: &ChannelModel,
    waveforms: usize,
    trials: usize,
) -> Result<()> {
    if trials == 0 {
        return Err(Error::domain("BER simulation needs at least one trial"));
    }
    if waveforms == 0 {
        return Err(Error::domain("BER simulation needs at least one waveform"));
    }
    if gains.len() != dictionary.len() {
        return Err(Error::dim("symbol bank", dictionary.len(), gains.len()));
    }
    channel.validate()
}

/// BER versus SNR. `gains[k]` is the transmit gain the bank produces toward
/// the receiver for symbol `k`; each pulse carries `waveforms` independent
/// symbols on orthogonal waveforms sharing the transmit power.
pub fn ber_curve(
    gains: &[Complex64],
    dictionary: &SymbolDictionary,
    channel: &ChannelModel,
    snr_db: &[f64],
    waveforms: usize,
    trials: usize,
    seed: u64,
) -> Result<BerCurve> {
    check_inputs(gains, dictionary, channel, waveforms, trials)?;
    let bits = (trials * waveforms * dictionary.bits_per_symbol()) as f64;
    let ber = snr_db
        .iter()
        .map(|&s| count_errors(gains, dictionary, &channel.with_snr_db(s), waveforms, trials, seed) as f64 / bits)
        .collect();
    Ok(BerCurve {
        axis: "snr_db",
        x: snr_db.to_vec(),
        ber,
        trials,
        scheme: dictionary.scheme(),
        bits_per_pulse: waveforms * dictionary.bits_per_symbol(),
        seed,
    })
}

/// BER with the receiver moved across `angles` while the bank stays
/// designed for its original direction.
#[allow(clippy::too_many_arguments)]
pub fn ber_vs_angle(
    bank: &[Beamformer],
    geometry: &ArrayGeometry,
    dictionary: &SymbolDictionary,
    channel: &ChannelModel,
    angles: &[f64],
    snr_db: f64,
    waveforms: usize,
    trials: usize,
    seed: u64,
) -> Result<BerCurve> {
    let ch = channel.with_snr_db(snr_db);
    let bits = (trials * waveforms * dictionary.bits_per_symbol()) as f64;
    let mut ber = Vec::with_capacity(angles.len());
    for &t in angles {
        let gains = bank
            .iter()
            .map(|w| transmit_gain(w, geometry, t))
            .collect::<Result<Vec<_>>>()?;
        check_inputs(&gains, dictionary, &ch, waveforms, trials)?;
        ber.push(count_errors(&gains, dictionary, &ch, waveforms, trials, seed) as f64 / bits);
    }
    Ok(BerCurve {
        axis: "angle_deg",
        x: angles.to_vec(),
        ber,
        trials,
        scheme: dictionary.scheme(),
        bits_per_pulse: waveforms * dictionary.bits_per_symbol(),
        seed,
    })
}

/// Gaussian tail `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}
