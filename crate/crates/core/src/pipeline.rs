//! End-to-end study: plant family, uncertainty models, weight, synthesis and
//! closed-loop evaluation, all driven by one [`RunConfig`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluation::{
    gain_reduction_at_mode, noise_sensitivity, phase_margins, process_sensitivity, to_db, unwrapped_phase,
    MarginReport,
};
use crate::family::{extract_mode_stats, nanopositioner_family_with, nominal_modal_hz, synthesize_frf, PlantSample};
use crate::lti::{FrequencyGrid, RationalTF};
use crate::mu::profile::STABILITY_PADE_ORDER;
use crate::mu::{robust_performance_profile, MuProfile};
use crate::synthesis::{build_sensitivity_weight, synthesize, ParamBounds, SensitivityWeightSpec, SynthesisResult};
use crate::uncertainty::{assemble_uncertain_plant, ModePairStats, UncertainPlant, Variant};

/// Log grid over the configured band plus dense points around each mode.
pub fn analysis_grid(cfg: &RunConfig, modal_hz: &[f64]) -> Result<FrequencyGrid> {
    let g = &cfg.grid;
    let base = FrequencyGrid::log_hz(g.lo_hz, g.hi_hz, g.points)?;
    if g.modal_points == 0 {
        return Ok(base);
    }
    let denom = (g.modal_points.max(2) - 1) as f64;
    let extra: Vec<f64> = modal_hz
        .iter()
        .flat_map(|&f| {
            (0..g.modal_points)
                .map(move |i| f * (1.0 - g.modal_spread + 2.0 * g.modal_spread * i as f64 / denom))
        })
        .filter(|&f| f >= g.lo_hz && f <= g.hi_hz)
        .collect();
    base.with_extra_hz(&extra)
}

#[derive(Debug, Clone)]
pub struct Study {
    pub config: RunConfig,
    pub samples: Vec<PlantSample>,
    pub stats: Vec<ModePairStats>,
    pub grid: FrequencyGrid,
    /// One response per sample, on `grid`.
    pub measured: Vec<Vec<Complex64>>,
}

impl Study {
    /// Synthetic family with FRFs generated on the analysis grid.
    pub fn synthetic(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let mut samples = nanopositioner_family_with(&config.family, &config.payloads)?;
        let stats = extract_mode_stats(&samples)?;
        let grid = analysis_grid(config, &nominal_modal_hz(&stats))?;
        for (k, s) in samples.iter_mut().enumerate() {
            let frf = synthesize_frf(s, &grid, config.frf.noise_db, config.seed.wrapping_add(k as u64))?;
            s.frf = Some(frf);
        }
        Self::from_samples(config, samples)
    }

    /// Study over samples that already carry their FRFs (all on one grid).
    pub fn from_samples(config: &RunConfig, samples: Vec<PlantSample>) -> Result<Self> {
        let stats = extract_mode_stats(&samples)?;
        let mut grid: Option<FrequencyGrid> = None;
        let mut measured = Vec::with_capacity(samples.len());
        for s in &samples {
            let frf = s
                .frf
                .as_ref()
                .ok_or_else(|| Error::EmptyInput(format!("sample at {} g has no FRF", s.payload)))?;
            match &grid {
                None => grid = Some(frf.grid.clone()),
                Some(g) if g.hz() != frf.grid.hz() => {
                    return Err(Error::LengthMismatch(format!(
                        "FRF of the {} g sample uses a different grid",
                        s.payload
                    )))
                }
                Some(_) => {}
            }
            measured.push(frf.response.clone());
        }
        Ok(Self {
            config: config.clone(),
            samples,
            stats,
            grid: grid.ok_or_else(|| Error::EmptyInput("no samples".into()))?,
            measured,
        })
    }

    pub fn modal_hz(&self) -> Vec<f64> {
        nominal_modal_hz(&self.stats)
    }

    pub fn plant(&self, variant: &Variant) -> Result<UncertainPlant> {
        assemble_uncertain_plant(
            self.stats.clone(),
            self.config.family.actuator()?,
            self.config.family.delay,
            variant.clone(),
            &self.grid,
            &self.measured,
            self.config.uncertainty,
        )
    }

    pub fn weight_spec(&self) -> Result<SensitivityWeightSpec> {
        let w = &self.config.weight;
        let notch_hz = match &w.notch_hz {
            Some(v) => v.clone(),
            None => {
                let modal = self.modal_hz();
                if modal.len() < 4 {
                    return Err(Error::Config(
                        "default notches need four modes; set weight.notch_hz".into(),
                    ));
                }
                vec![modal[2], modal[3]]
            }
        };
        let nominal = crate::uncertainty::UncertainPlant::with_weight(
            self.stats.clone(),
            self.config.family.actuator()?,
            self.config.family.delay,
            Variant::M01,
            crate::uncertainty::UnstructuredWeight::constant(0.0),
        )?
        .nominal_tf();
        Ok(SensitivityWeightSpec {
            low_freq_bound_db: w.low_freq_bound_db,
            reference_gain: nominal.dc_gain().abs(),
            rolloff_slope_db: w.rolloff_slope_db,
            corner_hz: w.corner_hz,
            flatten_ratio: w.flatten_ratio,
            notch_depths_db: vec![w.notch_depth_db; notch_hz.len()],
            notch_widths: vec![w.notch_width; notch_hz.len()],
            notch_freqs: notch_hz.iter().map(|f| 2.0 * PI * f).collect(),
        })
    }

    pub fn weight(&self) -> Result<RationalTF> {
        build_sensitivity_weight(&self.weight_spec()?)
    }

    /// Configured bounds, or bounds spanning the observed first-mode range.
    pub fn bounds(&self) -> Result<ParamBounds> {
        let s = &self.config.synthesis;
        if let Some(b) = s.bounds {
            return Ok(b);
        }
        let first: Vec<f64> = self
            .samples
            .iter()
            .map(|p| {
                p.modes
                    .first()
                    .map(|m| m.pole_freq)
                    .ok_or_else(|| Error::EmptyInput("sample without modes".into()))
            })
            .collect::<Result<_>>()?;
        let lo = first.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = first.iter().copied().fold(0.0, f64::max);
        ParamBounds::around_first_mode(lo, hi, s.order, s.center_gain)
    }

    pub fn synthesize(&self, plant: &UncertainPlant) -> Result<SynthesisResult> {
        synthesize(
            plant,
            &self.weight()?,
            &self.grid,
            &self.bounds()?,
            self.config.seed,
            &self.config.synthesis.options,
        )
    }

    pub fn mu_profile(&self, plant: &UncertainPlant, controller: &RationalTF) -> Result<MuProfile> {
        robust_performance_profile(plant, controller, &self.weight()?, &self.grid, &self.config.profile)
    }

    /// Closed-loop metrics of `controller` against every family member.
    pub fn evaluate(&self, controller: &RationalTF) -> Result<Vec<SampleMetrics>> {
        self.samples
            .iter()
            .map(|s| evaluate_sample(s, controller, &self.grid, self.config.damping_band))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub payload: f64,
    /// Hz.
    pub mode1_hz: f64,
    pub closed_loop_stable: bool,
    pub gain_reduction_db: f64,
    pub max_sxn_db: f64,
    pub margins: MarginReport,
    pub ps_db: Vec<f64>,
    pub sxn_db: Vec<f64>,
    pub loop_db: Vec<f64>,
    pub loop_phase_deg: Vec<f64>,
}

pub fn evaluate_sample(
    sample: &PlantSample,
    controller: &RationalTF,
    grid: &FrequencyGrid,
    band: f64,
) -> Result<SampleMetrics> {
    let g = sample.tf()?;
    let ps = process_sensitivity(&g, controller, grid)?;
    let sxn = noise_sensitivity(&g, controller, grid)?;
    let open: Vec<f64> = g.freq_response(grid)?.iter().map(|z| z.norm()).collect();
    let loop_tf = g.series(controller);
    let loop_resp = loop_tf.freq_response(grid)?;
    let mode1 = sample
        .modes
        .first()
        .ok_or_else(|| Error::EmptyInput("sample without modes".into()))?
        .pole_freq;
    let closed_loop_stable = g
        .rationalized(STABILITY_PADE_ORDER)?
        .feedback(controller)?
        .is_stable()?;
    let sxn_db: Vec<f64> = sxn.iter().map(|&v| to_db(v)).collect();
    Ok(SampleMetrics {
        payload: sample.payload,
        mode1_hz: mode1 / (2.0 * PI),
        closed_loop_stable,
        gain_reduction_db: gain_reduction_at_mode(&open, &ps, grid, mode1, band)?,
        max_sxn_db: sxn_db.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        margins: phase_margins(&loop_tf, grid)?,
        ps_db: ps.iter().map(|&v| to_db(v)).collect(),
        sxn_db,
        loop_db: loop_resp.iter().map(|z| to_db(z.norm())).collect(),
        loop_phase_deg: unwrapped_phase(&loop_resp).iter().map(|p| p.to_degrees()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> RunConfig {
        let mut cfg = RunConfig {
            payloads: vec![0.0, 50.0, 100.0],
            ..RunConfig::default()
        };
        cfg.grid.points = 200;
        cfg.grid.modal_points = 10;
        cfg
    }

    #[test]
    fn grid_contains_modal_refinement() {
        let cfg = RunConfig::default();
        let g = analysis_grid(&cfg, &[170.0]).unwrap();
        assert_eq!(g.len(), 640);
        assert!(g.hz().iter().any(|&f| (f - 153.0).abs() < 1e-9));
        assert!(g.hz().iter().any(|&f| (f - 187.0).abs() < 1e-9));
    }

    #[test]
    fn synthetic_study_shapes() {
        let study = Study::synthetic(&small_config()).unwrap();
        assert_eq!(study.samples.len(), 3);
        assert_eq!(study.measured.len(), 3);
        assert!(study.measured.iter().all(|m| m.len() == study.grid.len()));
        let w = study.weight().unwrap();
        let spec = study.weight_spec().unwrap();
        assert_eq!(spec.notch_freqs.len(), 2);
        assert!((to_db(1.0 / w.eval(2.0 * PI).unwrap().norm()) - 18.0).abs() < 0.5);
        let b = study.bounds().unwrap();
        assert!(b.omega_c.0 < 2.0 * PI * 156.0 && b.omega_c.1 > 2.0 * PI * 179.0);
    }

    #[test]
    fn zero_controller_metrics() {
        let study = Study::synthetic(&small_config()).unwrap();
        let m = study.evaluate(&RationalTF::constant(0.0)).unwrap();
        for (s, metrics) in study.samples.iter().zip(&m) {
            let open = s.tf().unwrap().freq_response(&study.grid).unwrap();
            for (db, z) in metrics.ps_db.iter().zip(&open) {
                assert!((db - to_db(z.norm())).abs() < 1e-12);
            }
            assert_eq!(metrics.gain_reduction_db, 0.0);
            assert!(metrics.margins.crossings.is_empty());
            assert!(metrics.closed_loop_stable);
        }
    }
}
