//! Second-order IIR sections and the 4th-order Butterworth band-pass built
//! from a high-pass and a low-pass section.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Direct form II transposed biquad with normalized coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    z1: f64,
    z2: f64,
}

impl Biquad {
    fn from_raw(b: [f64; 3], a: [f64; 3]) -> Self {
        Biquad {
            b0: b[0] / a[0],
            b1: b[1] / a[0],
            b2: b[2] / a[0],
            a1: a[1] / a[0],
            a2: a[2] / a[0],
            z1: 0.0,
            z2: 0.0,
        }
    }

    pub fn lowpass(fc: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_raw(
            [(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    pub fn highpass(fc: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * fc / fs;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_raw(
            [(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.z1;
        self.z1 = self.b1 * x - self.a1 * y + self.z2;
        self.z2 = self.b2 * x - self.a2 * y;
        y
    }

    pub fn reset(&mut self) {
        self.z1 = 0.0;
        self.z2 = 0.0;
    }

    /// Magnitude response at frequency `f`.
    pub fn gain(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        let (s1, c1) = w.sin_cos();
        let (s2, c2) = (2.0 * w).sin_cos();
        let num_re = self.b0 + self.b1 * c1 + self.b2 * c2;
        let num_im = -(self.b1 * s1 + self.b2 * s2);
        let den_re = 1.0 + self.a1 * c1 + self.a2 * c2;
        let den_im = -(self.a1 * s1 + self.a2 * s2);
        (num_re.hypot(num_im)) / (den_re.hypot(den_im))
    }
}

/// Pass band after Nyquist capping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub low: f64,
    pub high: f64,
    /// Set when the requested upper edge was lowered to 0.95·Nyquist.
    pub capped: bool,
}

impl Band {
    pub fn resolve(low: f64, high: f64, fs: f64) -> Result<Band> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::Spec(format!(
                "sample rate must be positive, got {fs}"
            )));
        }
        let nyquist = fs / 2.0;
        let (high, capped) = if high >= nyquist {
            (0.95 * nyquist, true)
        } else {
            (high, false)
        };
        if !(low > 0.0 && low < high) {
            return Err(Error::Spec(format!(
                "band ({low}, {high}) Hz is empty at {fs} Hz sampling"
            )));
        }
        Ok(Band { low, high, capped })
    }
}

/// Butterworth band-pass: one 2nd-order high-pass and one 2nd-order low-pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPass {
    hp: Biquad,
    lp: Biquad,
    fs: f64,
}

impl BandPass {
    pub fn new(band: Band, fs: f64) -> Self {
        BandPass {
            hp: Biquad::highpass(band.low, fs, FRAC_1_SQRT_2),
            lp: Biquad::lowpass(band.high, fs, FRAC_1_SQRT_2),
            fs,
        }
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        self.lp.process(self.hp.process(x))
    }

    pub fn reset(&mut self) {
        self.hp.reset();
        self.lp.reset();
    }

    /// Causal filtering of a whole signal from zero state.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut f = self.clone();
        f.reset();
        x.iter().map(|&v| f.process(v)).collect()
    }

    /// Zero-phase (forward-backward) filtering.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.filter(x);
        y.reverse();
        let mut z = self.filter(&y);
        z.reverse();
        z
    }

    pub fn gain(&self, f: f64) -> f64 {
        self.hp.gain(f, self.fs) * self.lp.gain(f, self.fs)
    }

    /// Sum of the squared impulse response: the output variance for unit
    /// white-noise input.
    pub fn noise_gain(&self) -> f64 {
        let mut f = self.clone();
        f.reset();
        let mut e = f.process(1.0).powi(2);
        for _ in 0..8192 {
            e += f.process(0.0).powi(2);
        }
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn butterworth_corner_is_minus_3_db() {
        let lp = Biquad::lowpass(30.0, 200.0, FRAC_1_SQRT_2);
        assert_relative_eq!(lp.gain(30.0, 200.0), FRAC_1_SQRT_2, max_relative = 1e-9);
        assert_relative_eq!(lp.gain(0.0, 200.0), 1.0, max_relative = 1e-12);
        let hp = Biquad::highpass(20.0, 200.0, FRAC_1_SQRT_2);
        assert_relative_eq!(hp.gain(20.0, 200.0), FRAC_1_SQRT_2, max_relative = 1e-9);
        assert!(hp.gain(0.0, 200.0) < 1e-12);
    }

    #[test]
    fn band_is_capped_below_nyquist() {
        let b = Band::resolve(20.0, 500.0, 200.0).unwrap();
        assert!(b.capped);
        assert_relative_eq!(b.high, 95.0);
        let b = Band::resolve(20.0, 450.0, 1000.0).unwrap();
        assert!(!b.capped);
        assert!(Band::resolve(100.0, 500.0, 200.0).is_err());
    }

    #[test]
    fn dc_is_removed() {
        let bp = BandPass::new(Band::resolve(20.0, 95.0, 200.0).unwrap(), 200.0);
        let y = bp.filter(&vec![1.0; 2000]);
        assert!(y[1999].abs() < 1e-9);
    }

    #[test]
    fn filtfilt_has_squared_gain_and_no_lag() {
        let fs = 200.0;
        let bp = BandPass::new(Band::resolve(20.0, 95.0, fs).unwrap(), fs);
        let f0 = 50.0;
        let x: Vec<f64> = (0..4000)
            .map(|n| (2.0 * PI * f0 * n as f64 / fs).sin())
            .collect();
        let y = bp.filtfilt(&x);
        let g = bp.gain(f0).powi(2);
        for n in 1500..2500 {
            assert!((y[n] - g * x[n]).abs() < 1e-6, "{n}");
        }
    }
}
