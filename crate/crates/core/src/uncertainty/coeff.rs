use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{ModePair, RationalTF};

/// A positive polynomial coefficient `mean·(1 + radius·δ)`, `δ ∈ [-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertainCoefficient {
    pub mean: f64,
    pub radius: f64,
}

impl UncertainCoefficient {
    pub fn new(mean: f64, radius: f64) -> Result<Self> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(Error::InvalidParameter(format!("coefficient mean {mean} must be > 0")));
        }
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidParameter(format!("radius {radius} must be >= 0")));
        }
        if radius >= 1.0 {
            return Err(Error::OverWideVariation { radius });
        }
        Ok(Self { mean, radius })
    }

    pub fn exact(value: f64) -> Result<Self> {
        Self::new(value, 0.0)
    }

    pub fn at(&self, delta: f64) -> f64 {
        self.mean * (1.0 + self.radius * delta)
    }
}

/// Mean and half-range relative radius of a set of positive coefficient samples.
pub fn relative_radii(samples: &[f64]) -> Result<UncertainCoefficient> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no coefficient samples".into()));
    }
    if let Some(bad) = samples.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "coefficient sample {bad} must be positive"
        )));
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    UncertainCoefficient::new(mean, (max - min) / (2.0 * mean))
}

/// Which coefficient of a mode's `(n2 s² + n1 s + 1)/(d2 s² + d1 s + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefKind {
    D1,
    D2,
    N1,
    N2,
}

impl CoefKind {
    pub const ALL: [CoefKind; 4] = [CoefKind::D1, CoefKind::D2, CoefKind::N1, CoefKind::N2];

    pub fn is_numerator(self) -> bool {
        matches!(self, CoefKind::N1 | CoefKind::N2)
    }

    pub fn label(self) -> &'static str {
        match self {
            CoefKind::D1 => "d1",
            CoefKind::D2 => "d2",
            CoefKind::N1 => "n1",
            CoefKind::N2 => "n2",
        }
    }
}

/// Uncertain coefficients of one resonance / anti-resonance pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModePairStats {
    /// `(n2, n1)`; absent for a pure resonance.
    pub numerator: Option<(UncertainCoefficient, UncertainCoefficient)>,
    pub d2: UncertainCoefficient,
    pub d1: UncertainCoefficient,
}

/// Per-coefficient real perturbations for one mode.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModeDelta {
    pub n1: f64,
    pub n2: f64,
    pub d1: f64,
    pub d2: f64,
}

impl ModeDelta {
    pub fn get(&self, kind: CoefKind) -> f64 {
        match kind {
            CoefKind::D1 => self.d1,
            CoefKind::D2 => self.d2,
            CoefKind::N1 => self.n1,
            CoefKind::N2 => self.n2,
        }
    }

    pub fn set(&mut self, kind: CoefKind, v: f64) {
        match kind {
            CoefKind::D1 => self.d1 = v,
            CoefKind::D2 => self.d2 = v,
            CoefKind::N1 => self.n1 = v,
            CoefKind::N2 => self.n2 = v,
        }
    }

    pub fn check(&self) -> Result<()> {
        for k in CoefKind::ALL {
            let v = self.get(k);
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::PerturbationOutOfRange(format!(
                    "delta_{} = {v} outside [-1, 1]",
                    k.label()
                )));
            }
        }
        Ok(())
    }
}

impl ModePairStats {
    /// Exact coefficients of a single mode (all radii zero).
    pub fn exact(mode: &ModePair) -> Result<Self> {
        mode.validate()?;
        let den = mode.denominator();
        let numerator = match mode.numerator() {
            Some(q) => Some((
                UncertainCoefficient::exact(q.c2)?,
                UncertainCoefficient::exact(q.c1)?,
            )),
            None => None,
        };
        Ok(Self {
            numerator,
            d2: UncertainCoefficient::exact(den.c2)?,
            d1: UncertainCoefficient::exact(den.c1)?,
        })
    }

    pub fn coefficient(&self, kind: CoefKind) -> Option<&UncertainCoefficient> {
        match kind {
            CoefKind::D1 => Some(&self.d1),
            CoefKind::D2 => Some(&self.d2),
            CoefKind::N1 => self.numerator.as_ref().map(|(_, n1)| n1),
            CoefKind::N2 => self.numerator.as_ref().map(|(n2, _)| n2),
        }
    }

    pub fn has_antiresonance(&self) -> bool {
        self.numerator.is_some()
    }

    /// Mean-coefficient transfer function.
    pub fn nominal_tf(&self) -> RationalTF {
        perturbed_mode_tf(self, &ModeDelta::default()).expect("means are validated positive")
    }
}

/// Direct substitution of `mean·(1 + radius·δ)` into every coefficient.
pub fn perturbed_mode_tf(stats: &ModePairStats, delta: &ModeDelta) -> Result<RationalTF> {
    delta.check()?;
    let num = match &stats.numerator {
        Some((n2, n1)) => vec![1.0, n1.at(delta.n1), n2.at(delta.n2)],
        None => vec![1.0],
    };
    let den = vec![1.0, stats.d1.at(delta.d1), stats.d2.at(delta.d2)];
    RationalTF::new(num, den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn radii_examples() {
        let c = relative_radii(&[1.0e-6]).unwrap();
        assert_eq!((c.mean, c.radius), (1.0e-6, 0.0));
        let c = relative_radii(&[0.8e-6, 1.0e-6, 1.2e-6]).unwrap();
        assert!((c.mean - 1.0e-6).abs() < 1e-20);
        assert!((c.radius - 0.2).abs() < 1e-12);
        let c = relative_radii(&[3.0; 5]).unwrap();
        assert_eq!(c.radius, 0.0);
    }

    #[test]
    fn radii_errors() {
        assert!(matches!(relative_radii(&[]), Err(Error::EmptyInput(_))));
        assert!(relative_radii(&[1.0, -1.0]).is_err());
        assert!(relative_radii(&[1.0, 0.0]).is_err());
        // max-min = 2·mean·r → r >= 1 when the spread reaches twice the mean.
        assert!(matches!(
            relative_radii(&[0.01, 0.01, 0.01, 10.0]),
            Err(Error::OverWideVariation { .. })
        ));
    }

    fn sample_stats() -> ModePairStats {
        ModePairStats {
            numerator: Some((
                UncertainCoefficient::new(4.0e-7, 0.1).unwrap(),
                UncertainCoefficient::new(2.0e-5, 0.05).unwrap(),
            )),
            d2: UncertainCoefficient::new(3.2e-6, 0.1).unwrap(),
            d1: UncertainCoefficient::new(1e-4, 0.2).unwrap(),
        }
    }

    #[test]
    fn perturbed_examples() {
        let s = sample_stats();
        let nominal = perturbed_mode_tf(&s, &ModeDelta::default()).unwrap();
        assert_eq!(nominal.den(), &[1.0, 1e-4, 3.2e-6]);
        let d = ModeDelta {
            d2: 1.0,
            ..Default::default()
        };
        let p = perturbed_mode_tf(&s, &d).unwrap();
        assert!((p.den()[2] - 3.2e-6 * 1.1).abs() < 1e-20);
    }

    #[test]
    fn pole_frequency_shift_under_negative_d2() {
        let p = 2.0 * PI * 179.0;
        let s = ModePairStats {
            numerator: None,
            d2: UncertainCoefficient::new(1.0 / (p * p), 0.3166).unwrap(),
            d1: UncertainCoefficient::new(0.04 / p, 0.0).unwrap(),
        };
        let tf = perturbed_mode_tf(
            &s,
            &ModeDelta {
                d2: -1.0,
                ..Default::default()
            },
        )
        .unwrap();
        let shifted = 1.0 / tf.den()[2].sqrt();
        let ratio = shifted / p;
        assert!((ratio - 1.0 / (1.0f64 - 0.3166).sqrt()).abs() < 1e-12);
        assert!((ratio - 1.21).abs() < 5e-3);
    }

    #[test]
    fn out_of_range_delta_rejected() {
        let d = ModeDelta {
            n1: 1.5,
            ..Default::default()
        };
        assert!(matches!(
            perturbed_mode_tf(&sample_stats(), &d),
            Err(Error::PerturbationOutOfRange(_))
        ));
    }
}
