//! Synthetic payload-swept nanopositioner plants and FRF data handling.
//!
//! Modal frequencies follow the single-mass law `f(m) = f₀/√(1 + m/m_eff)`,
//! with `m_eff` fixed by each mode's unloaded and fully loaded frequencies.
//! Anti-resonances sit either a fixed fraction below the geometric mean of
//! the neighbouring resonances or a fixed fraction below their own
//! resonance. All damping, actuator and delay values are synthetic stand-ins.

mod frf;

pub use frf::{ingest_frf, write_frf, FrfData, FrfFormat, FrfMetadata};

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{tf_from_mode_pair, FrequencyGrid, ModePair, RationalTF};
use crate::uncertainty::{relative_radii, ModePairStats};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    /// Resonance at zero payload, Hz.
    pub unloaded_hz: f64,
    /// Resonance at the reference payload, Hz.
    pub loaded_hz: f64,
    pub damping: f64,
    /// `None` for a pure resonance.
    pub zero: Option<ZeroPlacement>,
}

/// Where a mode's anti-resonance sits relative to the resonances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroPlacement {
    /// `ratio·√(P_{j−1}·P_j)`.
    Interlaced(f64),
    /// `ratio·P_j`; gives a weakly amplified, nearly cancelled pair.
    BelowPole(f64),
}

impl ZeroPlacement {
    fn freq(self, lower_pole: Option<f64>, pole: f64) -> Result<f64> {
        match (self, lower_pole) {
            (ZeroPlacement::Interlaced(r), Some(lo)) => Ok(r * (lo * pole).sqrt()),
            (ZeroPlacement::BelowPole(r), _) => Ok(r * pole),
            (ZeroPlacement::Interlaced(_), None) => Err(Error::InvalidParameter(
                "the first mode has no lower neighbour for an anti-resonance".into(),
            )),
        }
    }

    fn ratio(self) -> f64 {
        match self {
            ZeroPlacement::Interlaced(r) | ZeroPlacement::BelowPole(r) => r,
        }
    }
}

impl ModeSpec {
    /// Effective modal mass in grams.
    pub fn effective_mass(&self, reference_mass: f64) -> f64 {
        reference_mass / ((self.unloaded_hz / self.loaded_hz).powi(2) - 1.0)
    }

    pub fn pole_hz(&self, payload: f64, reference_mass: f64) -> f64 {
        self.unloaded_hz / (1.0 + payload / self.effective_mass(reference_mass)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilySpec {
    pub modes: Vec<ModeSpec>,
    /// Payload (g) at which `loaded_hz` is reached.
    pub reference_mass: f64,
    pub actuator_hz: f64,
    pub actuator_damping: f64,
    /// Seconds.
    pub delay: f64,
}

impl Default for FamilySpec {
    fn default() -> Self {
        let mode = |unloaded_hz, loaded_hz, damping, zero| ModeSpec {
            unloaded_hz,
            loaded_hz,
            damping,
            zero,
        };
        Self {
            modes: vec![
                mode(179.0, 156.0, 0.02, None),
                mode(264.0, 256.0, 0.03, Some(ZeroPlacement::BelowPole(0.97))),
                mode(350.0, 326.0, 0.015, Some(ZeroPlacement::Interlaced(0.93))),
                mode(905.0, 840.0, 0.015, Some(ZeroPlacement::Interlaced(0.93))),
            ],
            reference_mass: 100.0,
            actuator_hz: 2000.0,
            actuator_damping: 0.7,
            delay: 90e-6,
        }
    }
}

impl FamilySpec {
    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::EmptyInput("family needs at least one mode".into()));
        }
        let pos = |x: f64| x.is_finite() && x > 0.0;
        for (j, m) in self.modes.iter().enumerate() {
            if !(pos(m.unloaded_hz) && pos(m.loaded_hz) && pos(m.damping)) {
                return Err(Error::InvalidParameter(format!("mode {} has non-positive data", j + 1)));
            }
            if m.loaded_hz >= m.unloaded_hz {
                return Err(Error::InvalidParameter(format!(
                    "mode {}: loaded frequency must be below the unloaded one",
                    j + 1
                )));
            }
            match m.zero {
                Some(ZeroPlacement::Interlaced(_)) if j == 0 => {
                    return Err(Error::InvalidParameter(
                        "the first mode has no lower neighbour for an anti-resonance".into(),
                    ));
                }
                Some(z) if !(z.ratio() > 0.0 && z.ratio() < 1.0) => {
                    return Err(Error::InvalidParameter(format!(
                        "mode {}: zero ratio must lie in (0, 1)",
                        j + 1
                    )));
                }
                _ => {}
            }
        }
        if !(pos(self.reference_mass) && pos(self.actuator_hz) && pos(self.actuator_damping)) {
            return Err(Error::InvalidParameter("actuator and reference mass must be positive".into()));
        }
        if !(self.delay.is_finite() && self.delay >= 0.0) {
            return Err(Error::InvalidParameter(format!("delay {} must be >= 0", self.delay)));
        }
        Ok(())
    }

    pub fn actuator(&self) -> Result<RationalTF> {
        tf_from_mode_pair(&ModePair::resonance(
            2.0 * PI * self.actuator_hz,
            self.actuator_damping,
        )?)
    }
}

/// Payloads 0, 10, …, 100 g.
pub fn default_payloads() -> Vec<f64> {
    (0..=10).map(|k| 10.0 * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSample {
    /// Grams.
    pub payload: f64,
    pub modes: Vec<ModePair>,
    pub actuator: RationalTF,
    /// Seconds.
    pub delay: f64,
    pub frf: Option<FrfData>,
}

impl PlantSample {
    /// Mode chain, actuator and delay as one transfer function.
    pub fn tf(&self) -> Result<RationalTF> {
        let mut g = self.actuator.clone();
        for m in &self.modes {
            g = g.series(&tf_from_mode_pair(m)?);
        }
        Ok(g.series(&RationalTF::delay_only(self.delay)?))
    }

    pub fn pole_hz(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.pole_freq / (2.0 * PI)).collect()
    }
}

pub fn nanopositioner_family(payloads: &[f64]) -> Result<Vec<PlantSample>> {
    nanopositioner_family_with(&FamilySpec::default(), payloads)
}

pub fn nanopositioner_family_with(spec: &FamilySpec, payloads: &[f64]) -> Result<Vec<PlantSample>> {
    spec.validate()?;
    if payloads.is_empty() {
        return Err(Error::EmptyInput("no payloads".into()));
    }
    if payloads.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::InvalidParameter("payloads must be nonnegative".into()));
    }
    if payloads.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("payloads must be increasing".into()));
    }
    let actuator = spec.actuator()?;
    payloads
        .iter()
        .map(|&m| {
            let poles: Vec<f64> = spec
                .modes
                .iter()
                .map(|ms| 2.0 * PI * ms.pole_hz(m, spec.reference_mass))
                .collect();
            let modes = spec
                .modes
                .iter()
                .enumerate()
                .map(|(j, ms)| match ms.zero {
                    Some(placement) => {
                        let lower = j.checked_sub(1).map(|i| poles[i]);
                        let z = placement.freq(lower, poles[j])?;
                        ModePair::pair(z, ms.damping, poles[j], ms.damping)
                    }
                    None => ModePair::resonance(poles[j], ms.damping),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PlantSample {
                payload: m,
                modes,
                actuator: actuator.clone(),
                delay: spec.delay,
                frf: None,
            })
        })
        .collect()
}

/// Exact response of `sample`, optionally with multiplicative complex
/// Gaussian noise whose 3σ modulus equals `10^(noise_db/20)`.
pub fn synthesize_frf(
    sample: &PlantSample,
    grid: &FrequencyGrid,
    noise_db: Option<f64>,
    seed: u64,
) -> Result<FrfData> {
    let mut response = sample.tf()?.freq_response(grid)?;
    if let Some(db) = noise_db {
        if !(db.is_finite() && db <= 0.0) {
            return Err(Error::InvalidParameter(format!("noise level {db} dB must be <= 0")));
        }
        let sigma = 10f64.powf(db / 20.0) / 3.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for g in response.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *g *= Complex64::new(1.0, 0.0)
                + Complex64::new(re, im) * (sigma / std::f64::consts::SQRT_2);
        }
    }
    FrfData::new(
        grid.clone(),
        response,
        FrfMetadata {
            payload: Some(sample.payload),
            source: "synthetic".into(),
        },
    )
}

/// Per-mode coefficient statistics across the family.
pub fn extract_mode_stats(family: &[PlantSample]) -> Result<Vec<ModePairStats>> {
    let first = family
        .first()
        .ok_or_else(|| Error::EmptyInput("empty plant family".into()))?;
    let n = first.modes.len();
    if let Some(bad) = family.iter().find(|s| s.modes.len() != n) {
        return Err(Error::LengthMismatch(format!(
            "sample at {} g has {} modes, expected {n}",
            bad.payload,
            bad.modes.len()
        )));
    }
    (0..n)
        .map(|j| {
            let collect = |f: &dyn Fn(&ModePair) -> Option<f64>| -> Result<Option<Vec<f64>>> {
                let vals: Vec<Option<f64>> = family.iter().map(|s| f(&s.modes[j])).collect();
                match (vals.iter().all(Option::is_some), vals.iter().all(Option::is_none)) {
                    (true, _) => Ok(Some(vals.into_iter().flatten().collect())),
                    (_, true) => Ok(None),
                    _ => Err(Error::InvalidParameter(format!(
                        "mode {} has an anti-resonance in only some samples",
                        j + 1
                    ))),
                }
            };
            let d2 = collect(&|m| Some(m.denominator().c2))?.expect("always present");
            let d1 = collect(&|m| Some(m.denominator().c1))?.expect("always present");
            let n2 = collect(&|m| m.numerator().map(|q| q.c2))?;
            let n1 = collect(&|m| m.numerator().map(|q| q.c1))?;
            let numerator = match (n2, n1) {
                (Some(n2), Some(n1)) => Some((relative_radii(&n2)?, relative_radii(&n1)?)),
                _ => None,
            };
            Ok(ModePairStats {
                numerator,
                d2: relative_radii(&d2)?,
                d1: relative_radii(&d1)?,
            })
        })
        .collect()
}

/// Resonance frequencies (Hz) of the mean-coefficient modes.
pub fn nominal_modal_hz(stats: &[ModePairStats]) -> Vec<f64> {
    stats
        .iter()
        .map(|s| 1.0 / (2.0 * PI * s.d2.mean.sqrt()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_frequencies() {
        let fam = nanopositioner_family(&[0.0, 100.0]).unwrap();
        let hz0 = fam[0].pole_hz();
        for (a, b) in hz0.iter().zip([179.0, 264.0, 350.0, 905.0]) {
            assert!((a - b).abs() < 1e-9);
        }
        let hz1 = fam[1].pole_hz();
        for (a, b) in hz1.iter().zip([156.0, 256.0, 326.0, 840.0]) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn effective_mass_of_first_mode() {
        let m = FamilySpec::default().modes[0].effective_mass(100.0);
        assert!((m - 100.0 / ((179.0f64 / 156.0).powi(2) - 1.0)).abs() < 1e-12);
        assert!((m - 315.9).abs() < 0.1);
    }

    #[test]
    fn monotone_and_interlaced() {
        let fam = nanopositioner_family(&default_payloads()).unwrap();
        assert_eq!(fam.len(), 11);
        for w in fam.windows(2) {
            for (a, b) in w[0].modes.iter().zip(&w[1].modes) {
                assert!(b.pole_freq <= a.pole_freq);
            }
        }
        for s in &fam {
            for j in 1..s.modes.len() {
                let z = s.modes[j].zero.unwrap().0;
                assert!(s.modes[j - 1].pole_freq < z && z < s.modes[j].pole_freq);
            }
        }
    }

    #[test]
    fn radii_reproduce_endpoint_ratios() {
        let fam = nanopositioner_family(&default_payloads()).unwrap();
        let stats = extract_mode_stats(&fam).unwrap();
        for (s, ms) in stats.iter().zip(&FamilySpec::default().modes) {
            let r = s.d2.radius;
            // d2 is affine in payload, so the mean is the midpoint value.
            let ratio = ((1.0 + r) / (1.0 - r)).sqrt();
            assert!((ratio - ms.unloaded_hz / ms.loaded_hz).abs() < 1e-12);
        }
        let r1 = stats[0].d2.radius;
        let expect = (179.0f64.powi(2) - 156.0f64.powi(2)) / (179.0f64.powi(2) + 156.0f64.powi(2));
        assert!((r1 - expect).abs() < 1e-12);
        assert!(stats[0].numerator.is_none());
    }

    #[test]
    fn single_sample_and_permutation() {
        let fam = nanopositioner_family(&[30.0]).unwrap();
        let stats = extract_mode_stats(&fam).unwrap();
        assert!(stats.iter().all(|s| s.d1.radius == 0.0 && s.d2.radius == 0.0));
        let mut fam = nanopositioner_family(&default_payloads()).unwrap();
        let a = extract_mode_stats(&fam).unwrap();
        fam.reverse();
        fam.swap(2, 7);
        let b = extract_mode_stats(&fam).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.d2.mean - y.d2.mean).abs() <= 1e-15 * x.d2.mean);
            assert!((x.d2.radius - y.d2.radius).abs() < 1e-14);
            assert!((x.d1.radius - y.d1.radius).abs() < 1e-14);
        }
        assert!(extract_mode_stats(&[]).is_err());
    }

    #[test]
    fn frf_noise() {
        let fam = nanopositioner_family(&[0.0]).unwrap();
        let grid = FrequencyGrid::log_hz(1.0, 5000.0, 400).unwrap();
        let exact = synthesize_frf(&fam[0], &grid, None, 1).unwrap();
        assert_eq!(exact.response, fam[0].tf().unwrap().freq_response(&grid).unwrap());
        let a = synthesize_frf(&fam[0], &grid, Some(-40.0), 9).unwrap();
        let b = synthesize_frf(&fam[0], &grid, Some(-40.0), 9).unwrap();
        assert_eq!(a, b);
        let within = a
            .response
            .iter()
            .zip(&exact.response)
            .filter(|(n, e)| ((*n - *e).norm() / e.norm()) <= 1e-2)
            .count();
        // P(|ε| > 3σ) = e^{-9} for a circular complex Gaussian.
        assert!(within >= 398, "{within}");
    }

    #[test]
    fn zero_placement_validation() {
        let mut spec = FamilySpec::default();
        spec.modes[0].zero = Some(ZeroPlacement::Interlaced(0.9));
        assert!(matches!(spec.validate(), Err(Error::InvalidParameter(_))));
        let mut spec = FamilySpec::default();
        spec.modes[2].zero = Some(ZeroPlacement::BelowPole(1.0));
        assert!(spec.validate().is_err());
        spec.modes[2].zero = Some(ZeroPlacement::Interlaced(0.0));
        assert!(spec.validate().is_err());
        spec.modes[0].zero = Some(ZeroPlacement::BelowPole(0.8));
        spec.modes[2].zero = Some(ZeroPlacement::Interlaced(0.95));
        assert!(spec.validate().is_ok());
    }
}
