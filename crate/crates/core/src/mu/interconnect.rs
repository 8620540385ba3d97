//! Per-frequency closed-loop interconnection `M(jω)` seen by the stacked
//! perturbation `diag(δ_1, …, δ_K, Δ_u, Δ_perf)`.

use num_complex::Complex64;

use super::blocks::{Block, BlockStructure};
use super::upper::CMatrix;
use crate::error::{Error, Result};
use crate::lti::RationalTF;
use crate::uncertainty::plant::PlantPoint;
use crate::uncertainty::UncertainPlant;

/// Whether the unstructured block takes part (an identically zero weight
/// removes it from the structure).
pub(crate) fn has_unstructured(plant: &UncertainPlant) -> bool {
    !plant.unstructured.weight.is_zero()
}

/// Real channels, then the unstructured block, then the performance block.
pub fn robust_performance_structure(plant: &UncertainPlant) -> BlockStructure {
    let mut blocks: Vec<Block> = plant
        .channels
        .iter()
        .map(|c| Block::real(c.to_string()))
        .collect();
    if has_unstructured(plant) {
        blocks.push(Block::complex("unstructured"));
    }
    blocks.push(Block::complex("performance"));
    BlockStructure::new(blocks).expect("scalar blocks are always valid")
}

/// A signal expressed as a linear combination of the loop sources
/// `[x0, v_1, …, v_K, v_u]`, where `x0` is the plant input.
type Combo = Vec<Complex64>;

fn scale(a: &Combo, k: Complex64) -> Combo {
    a.iter().map(|v| v * k).collect()
}

/// Closed-loop interconnection from plant-side data at one frequency.
pub(crate) fn assemble_at(
    point: &PlantPoint,
    with_unstructured: bool,
    controller: Complex64,
    weight: Complex64,
    omega: f64,
) -> Result<CMatrix> {
    let k: usize = point.modes.iter().map(|m| m.channels.len()).sum();
    let n_src = 1 + k + usize::from(with_unstructured);
    let unit = |i: usize| {
        let mut v = vec![Complex64::new(0.0, 0.0); n_src];
        v[i] = Complex64::new(1.0, 0.0);
        v
    };

    let mut z: Vec<Combo> = Vec::with_capacity(k + 2);
    let mut sig = unit(0);
    let mut next = 1;
    for mode in &point.modes {
        sig = scale(&sig, mode.nominal);
        let inv: Vec<(usize, Complex64)> = mode
            .channels
            .iter()
            .filter(|(kind, _)| !kind.is_numerator())
            .map(|&(_, w)| w)
            .enumerate()
            .map(|(i, w)| (next + i, w))
            .collect();
        next += inv.len();
        for &(src, _) in &inv {
            sig[src] += Complex64::new(1.0, 0.0);
        }
        for &(_, w) in &inv {
            z.push(scale(&sig, w));
        }
        let mult: Vec<(usize, Complex64)> = mode
            .channels
            .iter()
            .filter(|(kind, _)| kind.is_numerator())
            .map(|&(_, w)| w)
            .enumerate()
            .map(|(i, w)| (next + i, w))
            .collect();
        next += mult.len();
        for &(_, w) in &mult {
            z.push(scale(&sig, w));
        }
        for &(src, _) in &mult {
            sig[src] += Complex64::new(1.0, 0.0);
        }
    }
    sig = scale(&sig, point.tail);
    if with_unstructured {
        z.push(sig.clone());
        sig[n_src - 1] += point.w_u;
    }
    z.push(scale(&sig, weight));

    // Close x0 = d − C·y, y = sig.
    let loop_gain = controller * sig[0];
    let denom = Complex64::new(1.0, 0.0) + loop_gain;
    if denom.norm() <= 1e-12 * loop_gain.norm().max(1.0) {
        return Err(Error::ClosedLoopPoleOnAxis { omega });
    }
    let rows = z.len();
    let cols = n_src;
    let mut m = CMatrix::zeros(rows, cols);
    for (r, zr) in z.iter().enumerate() {
        let through_x0 = zr[0] / denom;
        for c in 1..n_src {
            m[(r, c - 1)] = zr[c] - through_x0 * controller * sig[c];
        }
        m[(r, cols - 1)] = through_x0;
    }
    Ok(m)
}

/// `M(jω)` for the plant closed with `controller`; the performance output
/// is `W·y` and the performance input is the plant-input disturbance.
pub fn interconnection_at(
    plant: &UncertainPlant,
    controller: &RationalTF,
    perf_weight: &RationalTF,
    omega: f64,
) -> Result<CMatrix> {
    let point = plant.point(omega)?;
    assemble_at(
        &point,
        has_unstructured(plant),
        controller.eval(omega)?,
        perf_weight.eval(omega)?,
        omega,
    )
}
