use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::RationalTF;

/// Shape of the process-sensitivity weight `W`; `1/W` is the template the
/// closed loop `G/(1+GC)` must stay under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityWeightSpec {
    /// Allowed low-frequency amplification in dB, relative to `reference_gain`.
    pub low_freq_bound_db: f64,
    /// Magnitude the bound is relative to (normally the nominal plant DC gain).
    pub reference_gain: f64,
    /// Template slope above `corner_hz`, dB/decade (negative).
    pub rolloff_slope_db: f64,
    pub corner_hz: f64,
    /// Where the template flattens out again, as a multiple of `corner_hz`.
    pub flatten_ratio: f64,
    /// rad/s, increasing.
    pub notch_freqs: Vec<f64>,
    /// Relaxation depth in dB at each notch centre.
    pub notch_depths_db: Vec<f64>,
    /// Denominator damping of each notch section.
    pub notch_widths: Vec<f64>,
}

impl SensitivityWeightSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.notch_freqs.len();
        if self.notch_depths_db.len() != n || self.notch_widths.len() != n {
            return Err(Error::LengthMismatch("notch frequencies, depths and widths".into()));
        }
        if self.notch_freqs.windows(2).any(|w| w[0] >= w[1]) || self.notch_freqs.iter().any(|&f| f <= 0.0) {
            return Err(Error::InvalidParameter("notch frequencies must be positive and increasing".into()));
        }
        if self.notch_depths_db.iter().any(|&d| d < 0.0 || !d.is_finite()) {
            return Err(Error::InvalidParameter("notch depths must be nonnegative".into()));
        }
        if self.notch_widths.iter().any(|&z| !(z > 0.0 && z < 1.0)) {
            return Err(Error::InvalidParameter("notch widths must lie in (0, 1)".into()));
        }
        if !(self.reference_gain > 0.0 && self.corner_hz > 0.0 && self.flatten_ratio > 1.0) {
            return Err(Error::InvalidParameter("weight gain, corner and flatten ratio must be positive".into()));
        }
        if !(self.rolloff_slope_db <= 0.0) || (self.rolloff_slope_db / 20.0).fract() != 0.0 {
            return Err(Error::InvalidParameter(
                "rolloff slope must be a nonpositive multiple of 20 dB/decade".into(),
            ));
        }
        Ok(())
    }

    /// High-pass order implied by the slope.
    pub fn order(&self) -> usize {
        (-self.rolloff_slope_db / 20.0).round() as usize
    }
}

/// `W(s) = (1/A)·((s/ω_h + 1)/(s/ω_p + 1))^p · Π notch_k(s)` with
/// `notch_k = (s² + 2ζ_k·10^(−depth_k/20)·ω_k s + ω_k²)/(s² + 2ζ_k ω_k s + ω_k²)`.
pub fn build_sensitivity_weight(spec: &SensitivityWeightSpec) -> Result<RationalTF> {
    spec.validate()?;
    let cap = spec.reference_gain * 10f64.powf(spec.low_freq_bound_db / 20.0);
    let wh = 2.0 * std::f64::consts::PI * spec.corner_hz;
    let wp = wh * spec.flatten_ratio;
    let lead = RationalTF::new(vec![1.0, 1.0 / wh], vec![1.0, 1.0 / wp])?;
    let mut w = RationalTF::constant(1.0 / cap);
    for _ in 0..spec.order() {
        w = w.series(&lead);
    }
    for ((&om, &depth), &zeta) in spec
        .notch_freqs
        .iter()
        .zip(&spec.notch_depths_db)
        .zip(&spec.notch_widths)
    {
        let zeta_num = zeta * 10f64.powf(-depth / 20.0);
        w = w.series(&RationalTF::new(
            vec![om * om, 2.0 * zeta_num * om, 1.0],
            vec![om * om, 2.0 * zeta * om, 1.0],
        )?);
    }
    Ok(w)
}
