//! Complex baseband sample buffer with timing metadata.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IqCapture {
    pub samples: Vec<C64>,
    pub sample_rate_hz: f64,
    /// Time of `samples[0]` on the receiver clock.
    pub t0_s: f64,
    pub antenna_id: u32,
}

impl IqCapture {
    /// Checked constructor: non-empty, finite samples, positive rate.
    pub fn new(samples: Vec<C64>, sample_rate_hz: f64, t0_s: f64, antenna_id: u32) -> Result<Self> {
        let c = IqCapture { samples, sample_rate_hz, t0_s, antenna_id };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::Capture("empty capture".into()));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::Capture(format!("bad sample rate {}", self.sample_rate_hz)));
        }
        if let Some(i) = self.samples.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Capture(format!("non-finite sample at index {i}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn scale(&mut self, a: C64) {
        for v in self.samples.iter_mut() {
            *v *= a;
        }
    }
}
