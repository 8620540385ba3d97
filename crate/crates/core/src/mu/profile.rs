//! Robust-performance μ over a frequency grid.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::blocks::BlockStructure;
use super::interconnect::{assemble_at, has_unstructured, robust_performance_structure};
use super::lower::mu_lower_sampling;
use super::upper::{CMatrix, UpperSolver, UpperStage};
use crate::error::{Error, Result};
use crate::lti::{FrequencyGrid, RationalTF};
use crate::uncertainty::plant::PlantPoint;
use crate::uncertainty::UncertainPlant;

pub const GRID_POINTS: usize = 600;
pub const GRID_LO_HZ: f64 = 1.0;
pub const GRID_HI_HZ: f64 = 5000.0;
pub const MODAL_POINTS: usize = 40;
pub const MODAL_SPREAD: f64 = 0.10;
/// Padé order used to rationalize the delay for closed-loop pole checks.
pub const STABILITY_PADE_ORDER: usize = 2;

/// Log grid over 1 Hz–5 kHz refined around each modal frequency.
pub fn default_grid(modal_hz: &[f64]) -> Result<FrequencyGrid> {
    let base = FrequencyGrid::log_hz(GRID_LO_HZ, GRID_HI_HZ, GRID_POINTS)?;
    let extra: Vec<f64> = modal_hz
        .iter()
        .flat_map(|&f| {
            (0..MODAL_POINTS).map(move |i| {
                f * (1.0 - MODAL_SPREAD + 2.0 * MODAL_SPREAD * i as f64 / (MODAL_POINTS - 1) as f64)
            })
        })
        .collect();
    base.with_extra_hz(&extra)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileOptions {
    /// Random directions per frequency for the lower bound.
    pub lower_samples: usize,
    pub seed: u64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            lower_samples: 48,
            seed: 17,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuProfile {
    pub grid: FrequencyGrid,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub peak_upper: f64,
    /// rad/s.
    pub peak_freq: f64,
    /// Frequencies where the D,G search fell back to the complex bound.
    pub fallback_points: usize,
}

/// Largest real part of the nominal closed-loop poles (delay rationalized).
pub fn nominal_closed_loop_max_real(plant: &UncertainPlant, controller: &RationalTF) -> Result<f64> {
    let g = plant.nominal_tf().rationalized(STABILITY_PADE_ORDER)?;
    Ok(g.feedback(controller)?.stability()?.max_real_part())
}

fn nominal_stability_check(plant: &UncertainPlant, controller: &RationalTF) -> Result<()> {
    let g = plant.nominal_tf().rationalized(STABILITY_PADE_ORDER)?;
    let report = g.feedback(controller)?.stability()?;
    if !report.stable {
        return Err(Error::NominalInstability {
            max_real_part: report.max_real_part(),
        });
    }
    Ok(())
}

/// Plant-side data cached over a grid so that many controllers can be
/// evaluated cheaply.
#[derive(Debug, Clone)]
pub struct RobustPerformanceEvaluator {
    grid: FrequencyGrid,
    points: Vec<PlantPoint>,
    weight: Vec<Complex64>,
    with_unstructured: bool,
    structure: BlockStructure,
}

/// Per-frequency D,G scalings carried between peak evaluations of nearby
/// controllers.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    scalings: Vec<Option<(Vec<f64>, Vec<f64>)>>,
}

#[derive(PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .total_cmp(&other.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl RobustPerformanceEvaluator {
    pub fn new(plant: &UncertainPlant, perf_weight: &RationalTF, grid: &FrequencyGrid) -> Result<Self> {
        let points = grid
            .omega()
            .iter()
            .map(|&w| plant.point(w))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: grid.clone(),
            points,
            weight: perf_weight.freq_response(grid)?,
            with_unstructured: has_unstructured(plant),
            structure: robust_performance_structure(plant),
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    pub fn matrices(&self, controller: &RationalTF) -> Result<Vec<CMatrix>> {
        let c = controller.freq_response(&self.grid)?;
        self.points
            .iter()
            .zip(&self.weight)
            .zip(&c)
            .zip(self.grid.omega())
            .map(|(((p, &w), &c), &om)| assemble_at(p, self.with_unstructured, c, w, om))
            .collect()
    }

    /// Peak of the fully refined upper-bound profile and its grid index.
    /// Frequencies are refined best-first: a point is only optimized further
    /// while its current (valid) bound could still be the maximum.
    pub fn peak(&self, controller: &RationalTF) -> Result<(f64, usize)> {
        self.peak_inner(controller, None)
    }

    /// [`peak`](Self::peak) seeded with the scalings left in `warm` by an
    /// earlier call; `warm` is updated with the scalings found this time.
    pub fn peak_warm(&self, controller: &RationalTF, warm: &mut WarmStart) -> Result<(f64, usize)> {
        self.peak_inner(controller, Some(warm))
    }

    fn peak_inner(&self, controller: &RationalTF, mut warm: Option<&mut WarmStart>) -> Result<(f64, usize)> {
        let mats = self.matrices(controller)?;
        if let Some(w) = warm.as_deref_mut() {
            w.scalings.resize(mats.len(), None);
        }
        let mut solvers = Vec::with_capacity(mats.len());
        let mut heap = BinaryHeap::with_capacity(mats.len());
        for (i, m) in mats.iter().enumerate() {
            let start = warm.as_deref().and_then(|w| w.scalings[i].as_ref());
            let s = match start {
                Some((x, g)) => UpperSolver::new_warm(m, &self.structure, x, g)?,
                None => UpperSolver::new(m, &self.structure)?,
            };
            heap.push(Candidate(s.value(), i));
            solvers.push(s);
        }
        let mut result = None;
        while let Some(Candidate(value, i)) = heap.pop() {
            if solvers[i].is_final() {
                result = Some((value, i));
                break;
            }
            solvers[i].advance();
            heap.push(Candidate(solvers[i].value(), i));
        }
        if let Some(w) = warm {
            for (slot, s) in w.scalings.iter_mut().zip(&solvers) {
                if s.stage() > UpperStage::Balanced && !s.fallback() {
                    let (x, g) = s.scalings();
                    *slot = Some((x.to_vec(), g.to_vec()));
                }
            }
        }
        result.ok_or_else(|| Error::EmptyInput("empty frequency grid".into()))
    }

    pub fn profile(&self, controller: &RationalTF, opts: &ProfileOptions) -> Result<MuProfile> {
        let mats = self.matrices(controller)?;
        let mut upper = Vec::with_capacity(mats.len());
        let mut lower = Vec::with_capacity(mats.len());
        let mut fallback_points = 0;
        for (k, m) in mats.iter().enumerate() {
            let mut s = UpperSolver::new(m, &self.structure)?;
            s.run_to(UpperStage::Mixed);
            fallback_points += usize::from(s.fallback());
            let ub = s.value();
            let lb = mu_lower_sampling(m, &self.structure, opts.lower_samples, opts.seed.wrapping_add(k as u64))?;
            upper.push(ub);
            lower.push(lb.min(ub));
        }
        let (k, &peak_upper) = upper
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .ok_or_else(|| Error::EmptyInput("empty frequency grid".into()))?;
        Ok(MuProfile {
            peak_freq: self.grid.omega()[k],
            grid: self.grid.clone(),
            upper,
            lower,
            peak_upper,
            fallback_points,
        })
    }
}

/// μ upper/lower profile of the robust-performance problem; fails fast when
/// the nominal loop is unstable.
pub fn robust_performance_profile(
    plant: &UncertainPlant,
    controller: &RationalTF,
    perf_weight: &RationalTF,
    grid: &FrequencyGrid,
    opts: &ProfileOptions,
) -> Result<MuProfile> {
    nominal_stability_check(plant, controller)?;
    RobustPerformanceEvaluator::new(plant, perf_weight, grid)?.profile(controller, opts)
}

/// Peak upper bound only, via best-first refinement.
pub fn peak_upper(
    plant: &UncertainPlant,
    controller: &RationalTF,
    perf_weight: &RationalTF,
    grid: &FrequencyGrid,
) -> Result<(f64, f64)> {
    nominal_stability_check(plant, controller)?;
    let ev = RobustPerformanceEvaluator::new(plant, perf_weight, grid)?;
    let (v, k) = ev.peak(controller)?;
    Ok((v, grid.omega()[k]))
}
