//! The composed uncertain plant: mode chain, actuator, delay, structured
//! channels and the unstructured output weight.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::coeff::{perturbed_mode_tf, CoefKind, ModeDelta, ModePairStats};
use super::unstructured::{
    envelope_over_set, fit_unstructured_weight, relative_error, UnstructuredWeight, DEFAULT_MARGIN,
    DEFAULT_ORDER,
};
use super::weights::{structured_weights, ModeResponse, StructuredWeightSet};
use crate::error::{Error, Result};
use crate::lti::{FrequencyGrid, RationalTF};

/// One real parametric channel: a coefficient of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChannelId {
    pub mode: usize,
    pub kind: CoefKind,
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.kind.label(), self.mode + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Unstructured block only.
    M01,
    /// Resonance coefficients of the first mode.
    M11,
    /// Resonance coefficients of modes 1, 3, 4 and anti-resonance
    /// coefficients of modes 3, 4.
    M31,
    Custom(Vec<ChannelId>),
}

impl Variant {
    pub fn label(&self) -> String {
        match self {
            Variant::M01 => "m01".into(),
            Variant::M11 => "m11".into(),
            Variant::M31 => "m31".into(),
            Variant::Custom(_) => "custom".into(),
        }
    }

    /// Requested channels before dropping zero-radius ones.
    pub fn requested_channels(&self, n_modes: usize) -> Result<Vec<ChannelId>> {
        let res = |mode| {
            [CoefKind::D1, CoefKind::D2]
                .into_iter()
                .map(move |kind| ChannelId { mode, kind })
        };
        let anti = |mode| {
            [CoefKind::N1, CoefKind::N2]
                .into_iter()
                .map(move |kind| ChannelId { mode, kind })
        };
        let mut out: Vec<ChannelId> = match self {
            Variant::M01 => vec![],
            Variant::M11 => res(0).collect(),
            Variant::M31 => res(0)
                .chain(res(2))
                .chain(anti(2))
                .chain(res(3))
                .chain(anti(3))
                .collect(),
            Variant::Custom(list) => list.clone(),
        };
        if let Some(bad) = out.iter().find(|c| c.mode >= n_modes) {
            return Err(Error::VariantModeOutOfRange {
                variant: self.label(),
                mode: bad.mode,
                available: n_modes,
            });
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m01" => Ok(Variant::M01),
            "m11" => Ok(Variant::M11),
            "m31" => Ok(Variant::M31),
            other => Err(Error::InvalidParameter(format!("unknown variant '{other}'"))),
        }
    }
}

/// Real values for every active channel plus the complex unstructured value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSample {
    pub real: Vec<f64>,
    pub complex: Complex64,
}

impl DeltaSample {
    pub fn zero(n_real: usize) -> Self {
        Self {
            real: vec![0.0; n_real],
            complex: Complex64::new(0.0, 0.0),
        }
    }

    pub fn check(&self) -> Result<()> {
        if let Some(v) = self.real.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::PerturbationOutOfRange(format!("real delta {v}")));
        }
        if !(self.complex.norm() <= 1.0 + 1e-12) {
            return Err(Error::PerturbationOutOfRange(format!(
                "complex delta modulus {}",
                self.complex.norm()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UncertaintyOptions {
    pub fit_order: usize,
    pub margin: f64,
    /// Structured samples whose closest member defines the residual.
    pub residual_samples: usize,
    pub seed: u64,
}

impl Default for UncertaintyOptions {
    fn default() -> Self {
        Self {
            fit_order: DEFAULT_ORDER,
            margin: DEFAULT_MARGIN,
            residual_samples: 256,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertainPlant {
    pub modes: Vec<ModePairStats>,
    pub weights: Vec<StructuredWeightSet>,
    /// Active real channels in block order.
    pub channels: Vec<ChannelId>,
    pub actuator: RationalTF,
    /// Pure output delay, seconds.
    pub delay: f64,
    pub unstructured: UnstructuredWeight,
    pub variant: Variant,
    pub options: UncertaintyOptions,
}

/// Everything needed to evaluate the plant at one frequency.
#[derive(Debug, Clone)]
pub(crate) struct PlantPoint {
    pub modes: Vec<ModeResponse>,
    /// `(mode, position within that mode's channel list)` for each channel.
    pub channel_slots: Vec<(usize, usize)>,
    /// Actuator times delay.
    pub tail: Complex64,
    pub w_u: Complex64,
}

impl PlantPoint {
    pub fn structured(&self, real: &[f64], omega: f64) -> Result<Complex64> {
        let mut per_mode: Vec<Vec<f64>> = self
            .modes
            .iter()
            .map(|m| vec![0.0; m.channels.len()])
            .collect();
        for (&(mode, slot), &d) in self.channel_slots.iter().zip(real) {
            per_mode[mode][slot] = d;
        }
        let mut g = self.tail;
        for (m, d) in self.modes.iter().zip(&per_mode) {
            g *= m.perturbed(d, omega)?;
        }
        Ok(g)
    }
}

impl UncertainPlant {
    /// Build the plant with a caller-supplied unstructured weight.
    pub fn with_weight(
        modes: Vec<ModePairStats>,
        actuator: RationalTF,
        delay: f64,
        variant: Variant,
        unstructured: UnstructuredWeight,
    ) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::EmptyInput("uncertain plant needs at least one mode".into()));
        }
        if !(delay.is_finite() && delay >= 0.0) {
            return Err(Error::InvalidParameter(format!("delay {delay} must be >= 0")));
        }
        let requested = variant.requested_channels(modes.len())?;
        let weights: Vec<StructuredWeightSet> = modes.iter().map(structured_weights).collect();
        let channels = requested
            .into_iter()
            .filter(|c| weights[c.mode].weight(c.kind).is_some())
            .collect();
        Ok(Self {
            modes,
            weights,
            channels,
            actuator,
            delay,
            unstructured,
            variant,
            options: UncertaintyOptions::default(),
        })
    }

    pub fn n_real(&self) -> usize {
        self.channels.len()
    }

    fn active_kinds(&self, mode: usize) -> Vec<CoefKind> {
        self.channels
            .iter()
            .filter(|c| c.mode == mode)
            .map(|c| c.kind)
            .collect()
    }

    pub(crate) fn point(&self, omega: f64) -> Result<PlantPoint> {
        let mut modes = Vec::with_capacity(self.modes.len());
        for (j, (stats, w)) in self.modes.iter().zip(&self.weights).enumerate() {
            modes.push(ModeResponse::at(stats, w, &self.active_kinds(j), omega)?);
        }
        let channel_slots = self
            .channels
            .iter()
            .map(|c| {
                let slot = modes[c.mode]
                    .channels
                    .iter()
                    .position(|(k, _)| *k == c.kind)
                    .expect("channel listed in its mode");
                (c.mode, slot)
            })
            .collect();
        let tail = self.actuator.eval(omega)? * Complex64::from_polar(1.0, -omega * self.delay);
        Ok(PlantPoint {
            modes,
            channel_slots,
            tail,
            w_u: self.unstructured.eval(omega)?,
        })
    }

    /// Mean-coefficient chain of modes, actuator and delay.
    pub fn nominal_tf(&self) -> RationalTF {
        self.modes
            .iter()
            .fold(self.actuator.clone(), |acc, m| acc.series(&m.nominal_tf()))
            .series(&RationalTF::delay_only(self.delay).expect("validated delay"))
    }

    fn mode_deltas(&self, real: &[f64]) -> Result<Vec<ModeDelta>> {
        if real.len() != self.channels.len() {
            return Err(Error::Dimension(format!(
                "{} real deltas for {} active channels",
                real.len(),
                self.channels.len()
            )));
        }
        let mut deltas = vec![ModeDelta::default(); self.modes.len()];
        for (c, &d) in self.channels.iter().zip(real) {
            deltas[c.mode].set(c.kind, d);
        }
        Ok(deltas)
    }

    /// Direct-substitution transfer function for real structured values and
    /// a real unstructured value (real values keep the coefficients real).
    pub fn perturbed_tf(&self, real: &[f64], unstructured: f64) -> Result<RationalTF> {
        let deltas = self.mode_deltas(real)?;
        let mut g = self.actuator.clone();
        for (stats, d) in self.modes.iter().zip(&deltas) {
            g = g.series(&perturbed_mode_tf(stats, d)?);
        }
        if unstructured != 0.0 {
            if unstructured.abs() > 1.0 {
                return Err(Error::PerturbationOutOfRange(format!(
                    "unstructured delta {unstructured}"
                )));
            }
            let factor = RationalTF::one().parallel(&self.unstructured.weight.scaled(unstructured))?;
            g = g.series(&factor);
        }
        Ok(g.series(&RationalTF::delay_only(self.delay)?))
    }

    /// Structured part only (`Δ_u = 0`) on a grid.
    pub fn structured_response(&self, real: &[f64], grid: &FrequencyGrid) -> Result<Vec<Complex64>> {
        self.mode_deltas(real)?;
        grid.omega()
            .iter()
            .map(|&w| self.point(w)?.structured(real, w))
            .collect()
    }

    /// Frequency response of the full uncertain chain for one sample.
    pub fn sample(&self, delta: &DeltaSample, grid: &FrequencyGrid) -> Result<Vec<Complex64>> {
        delta.check()?;
        self.mode_deltas(&delta.real)?;
        grid.omega()
            .iter()
            .map(|&w| {
                let p = self.point(w)?;
                Ok(p.structured(&delta.real, w)? * (1.0 + p.w_u * delta.complex))
            })
            .collect()
    }

    /// Zero, a signed diagonal sweep, vertices when they fit, then seeded
    /// uniform draws, `count` in total (only the zero sample when no real
    /// channel is active).
    pub fn reference_samples(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let k = self.n_real();
        if k == 0 {
            return vec![vec![]];
        }
        let count = count.max(1);
        let mut out = vec![vec![0.0; k]];
        for i in 0..33 {
            let t = -1.0 + 2.0 * i as f64 / 32.0;
            if t != 0.0 {
                out.push(vec![t; k]);
            }
        }
        if k < usize::BITS as usize && (1usize << k) <= count / 2 {
            out.extend(vertices(k));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while out.len() < count {
            out.push((0..k).map(|_| rng.random_range(-1.0..=1.0)).collect());
        }
        out.truncate(count.max(34));
        out
    }

    /// Per-frequency minimum, over the reference samples, of each member's
    /// relative error; the pointwise maximum over members is returned.
    pub fn residual(&self, grid: &FrequencyGrid, measured: &[Vec<Complex64>]) -> Result<Vec<f64>> {
        if measured.is_empty() {
            return Err(Error::EmptyInput("no measured responses".into()));
        }
        let refs = self.reference_samples(self.options.residual_samples, self.options.seed);
        let responses: Vec<Vec<Complex64>> = refs
            .iter()
            .map(|r| self.structured_response(r, grid))
            .collect::<Result<_>>()?;
        let mut profiles = Vec::with_capacity(measured.len());
        for member in measured {
            let mut best = vec![f64::INFINITY; grid.len()];
            for resp in &responses {
                for (b, e) in best.iter_mut().zip(relative_error(member, resp)?) {
                    *b = b.min(e);
                }
            }
            profiles.push(best);
        }
        envelope_over_set(&profiles)
    }

    /// Per-frequency magnitude bounds (dB) over structured vertices, random
    /// interior draws and the reference samples, each widened by the exact
    /// extremes of the unstructured disk.
    pub fn envelope(
        &self,
        grid: &FrequencyGrid,
        n_random: usize,
        include_vertices: bool,
        seed: u64,
    ) -> Result<Envelope> {
        let k = self.n_real();
        let mut samples = self.reference_samples(self.options.residual_samples, self.options.seed);
        if include_vertices && k > 0 && k <= 12 {
            samples.extend(vertices(k));
        }
        if k > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..n_random {
                samples.push((0..k).map(|_| rng.random_range(-1.0..=1.0)).collect());
            }
        }
        let mut min_db = Vec::with_capacity(grid.len());
        let mut max_db = Vec::with_capacity(grid.len());
        for &w in grid.omega() {
            let p = self.point(w)?;
            let wu = p.w_u.norm();
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for s in &samples {
                let g = p.structured(s, w)?.norm();
                lo = lo.min(g * (1.0 - wu).max(1e-3));
                hi = hi.max(g * (1.0 + wu));
            }
            min_db.push(20.0 * lo.log10());
            max_db.push(20.0 * hi.log10());
        }
        Ok(Envelope {
            freq_hz: grid.hz().to_vec(),
            min_db,
            max_db,
        })
    }
}

fn vertices(k: usize) -> impl Iterator<Item = Vec<f64>> {
    (0..1usize << k).map(move |bits| {
        (0..k)
            .map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub freq_hz: Vec<f64>,
    pub min_db: Vec<f64>,
    pub max_db: Vec<f64>,
}

impl Envelope {
    pub fn mean_width_db(&self) -> f64 {
        self.min_db
            .iter()
            .zip(&self.max_db)
            .map(|(lo, hi)| hi - lo)
            .sum::<f64>()
            / self.min_db.len().max(1) as f64
    }

    /// Fraction of points where `response` lies inside the bounds.
    pub fn containment(&self, response: &[Complex64]) -> f64 {
        let inside = response
            .iter()
            .zip(self.min_db.iter().zip(&self.max_db))
            .filter(|(g, (lo, hi))| {
                let db = 20.0 * g.norm().log10();
                db >= *lo - 1e-9 && db <= *hi + 1e-9
            })
            .count();
        inside as f64 / response.len().max(1) as f64
    }
}

/// Compose the uncertain plant for a variant and fit its unstructured weight
/// to the residual left by the structured part against `measured`.
pub fn assemble_uncertain_plant(
    mode_stats: Vec<ModePairStats>,
    actuator: RationalTF,
    delay: f64,
    variant: Variant,
    grid: &FrequencyGrid,
    measured: &[Vec<Complex64>],
    options: UncertaintyOptions,
) -> Result<UncertainPlant> {
    if let Some(m) = measured.iter().find(|m| m.len() != grid.len()) {
        return Err(Error::LengthMismatch(format!(
            "measured response has {} points, grid {}",
            m.len(),
            grid.len()
        )));
    }
    let mut plant = UncertainPlant::with_weight(
        mode_stats,
        actuator,
        delay,
        variant,
        UnstructuredWeight::constant(0.0),
    )?;
    plant.options = options;
    let residual = plant.residual(grid, measured)?;
    plant.unstructured = fit_unstructured_weight(&residual, grid, options.fit_order, options.margin)?;
    Ok(plant)
}
