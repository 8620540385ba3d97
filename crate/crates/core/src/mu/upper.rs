//! D- and D,G-scaled upper bounds on the structured singular value.
//!
//! For scalings `D = diag(e^x)` (one value per block) and a real diagonal `g`
//! on the real-scalar positions, with `B = D^{1/2} M D^{-1/2}`,
//!
//! ```text
//! H(x, g) = BᴴB + j(gB − Bᴴg),     μ(M) ≤ sqrt(max(0, λ_max(H))).
//! ```
//!
//! With `g = 0` this is the classical `σ̄(D^{1/2} M D^{-1/2})` bound. Every
//! `(x, g)` gives a valid bound, so the search keeps the smallest `λ_max`
//! seen while minimizing a log-sum-exp smoothing of the spectrum.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::blocks::{BlockKind, BlockStructure};
use crate::error::{Error, Result};
use crate::optim::bfgs;

pub type CMatrix = DMatrix<Complex64>;

const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };
/// Relative smoothing sharpness levels of the continuation.
const SHARPNESS: [f64; 5] = [30.0, 300.0, 3e3, 3e4, 3e5];
const BFGS_ITER: usize = 80;
const OSBORNE_SWEEPS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UpperStage {
    /// Osborne-balanced scaling only.
    Balanced,
    /// Optimized D scaling.
    Complex,
    /// Optimized D and G scalings; final.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    pub value: f64,
    /// The D,G search produced no usable certificate; `value` is the
    /// complex (D only) bound.
    pub fallback: bool,
}

/// Incrementally refined upper bound for one matrix.
#[derive(Debug, Clone)]
pub struct UpperSolver {
    m: CMatrix,
    scale: f64,
    block_of: Vec<usize>,
    /// Position in `g` for each matrix index on a real block.
    real_slot: Vec<Option<usize>>,
    n_blocks: usize,
    n_real: usize,
    x: Vec<f64>,
    g: Vec<f64>,
    best_lambda: f64,
    stage: UpperStage,
    fallback: bool,
    mixed_enabled: bool,
}

struct Spectrum {
    lambda_max: f64,
    smooth: f64,
}

impl UpperSolver {
    pub fn new(m: &CMatrix, blocks: &BlockStructure) -> Result<Self> {
        blocks.check_matrix(m.nrows(), m.ncols())?;
        if m.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::NonFinite);
        }
        let scale = m.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let n = m.nrows();
        let mut block_of = vec![0; n];
        let mut real_slot = vec![None; n];
        let mut n_real = 0;
        for (b, (blk, range)) in blocks.blocks().iter().zip(blocks.ranges()).enumerate() {
            for i in range {
                block_of[i] = b;
                if blk.kind == BlockKind::RealScalar {
                    real_slot[i] = Some(n_real);
                    n_real += 1;
                }
            }
        }
        let mut s = Self {
            m: if scale > 0.0 {
                m.map(|c| c / scale)
            } else {
                m.clone()
            },
            scale,
            block_of,
            real_slot,
            n_blocks: blocks.len(),
            n_real,
            x: vec![0.0; blocks.len()],
            g: vec![0.0; n_real],
            best_lambda: f64::INFINITY,
            stage: UpperStage::Balanced,
            fallback: false,
            mixed_enabled: n_real > 0,
        };
        if scale == 0.0 {
            s.best_lambda = 0.0;
            s.stage = UpperStage::Mixed;
            return Ok(s);
        }
        s.osborne();
        let x = s.x.clone();
        let g = s.g.clone();
        s.best_lambda = s.spectrum(&x, &g, None, None).lambda_max;
        Ok(s)
    }

    /// Like [`UpperSolver::new`], but starts from the scalings `(x, g)` of a
    /// nearby problem when they give a smaller bound than balancing does.
    pub fn new_warm(m: &CMatrix, blocks: &BlockStructure, x: &[f64], g: &[f64]) -> Result<Self> {
        let mut s = Self::new(m, blocks)?;
        if s.scale == 0.0 || x.len() != s.n_blocks || g.len() != s.n_real {
            return Ok(s);
        }
        let lambda = s.spectrum(x, g, None, None).lambda_max;
        if lambda.is_finite() && lambda < s.best_lambda {
            s.x.copy_from_slice(x);
            s.g.copy_from_slice(g);
            s.best_lambda = lambda;
        }
        Ok(s)
    }

    /// Current scalings `(x, g)`; valid input for [`UpperSolver::new_warm`].
    pub fn scalings(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.g)
    }

    pub fn stage(&self) -> UpperStage {
        self.stage
    }

    pub fn is_final(&self) -> bool {
        self.stage == UpperStage::Mixed
    }

    pub fn fallback(&self) -> bool {
        self.fallback
    }

    /// Current certified bound.
    pub fn value(&self) -> f64 {
        self.scale * self.best_lambda.max(0.0).sqrt()
    }

    /// Run the next refinement stage.
    pub fn advance(&mut self) {
        match self.stage {
            UpperStage::Balanced => {
                self.optimize(false);
                self.stage = UpperStage::Complex;
            }
            UpperStage::Complex => {
                if self.mixed_enabled && self.best_lambda > 0.0 {
                    let before = self.best_lambda;
                    self.optimize(true);
                    if !self.best_lambda.is_finite() {
                        self.best_lambda = before;
                        self.fallback = true;
                    }
                }
                self.stage = UpperStage::Mixed;
            }
            UpperStage::Mixed => {}
        }
    }

    /// Refine through every stage up to and including `stage`.
    pub fn run_to(&mut self, stage: UpperStage) {
        while self.stage < stage {
            self.advance();
        }
    }

    fn expand_x(&self, x: &[f64]) -> Vec<f64> {
        self.block_of.iter().map(|&b| (0.5 * x[b]).exp()).collect()
    }

    fn scaled(&self, x: &[f64]) -> CMatrix {
        let e = self.expand_x(x);
        let n = self.m.nrows();
        CMatrix::from_fn(n, n, |i, j| self.m[(i, j)] * (e[i] / e[j]))
    }

    fn hermitian(&self, b: &CMatrix, g: &[f64]) -> CMatrix {
        let n = b.nrows();
        let mut h = b.adjoint() * b;
        if self.n_real > 0 {
            for i in 0..n {
                for j in 0..n {
                    let gi = self.real_slot[i].map_or(0.0, |s| g[s]);
                    let gj = self.real_slot[j].map_or(0.0, |s| g[s]);
                    if gi != 0.0 || gj != 0.0 {
                        h[(i, j)] += J * (b[(i, j)] * gi - b[(j, i)].conj() * gj);
                    }
                }
            }
        }
        // Enforce exact Hermitian symmetry before the eigensolver.
        let ht = h.adjoint();
        (h + ht) * Complex64::new(0.5, 0.0)
    }

    /// Spectrum of `H(x, g)`; optionally the smoothed value at sharpness `t`
    /// and its gradient (`grad_x` per block, `grad_g` per real position).
    fn spectrum(
        &self,
        x: &[f64],
        g: &[f64],
        t: Option<f64>,
        grad: Option<(&mut [f64], &mut [f64])>,
    ) -> Spectrum {
        let b = self.scaled(x);
        let h = self.hermitian(&b, g);
        let want_vectors = grad.is_some();
        let eig = SymmetricEigen::try_new(h, 1e-14, 0);
        let Some(eig) = eig else {
            return Spectrum {
                lambda_max: f64::NAN,
                smooth: f64::NAN,
            };
        };
        let lambdas = &eig.eigenvalues;
        let lambda_max = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let Some(t) = t else {
            return Spectrum {
                lambda_max,
                smooth: lambda_max,
            };
        };
        let weights: Vec<f64> = lambdas.iter().map(|l| (t * (l - lambda_max)).exp()).collect();
        let total: f64 = weights.iter().sum();
        let smooth = lambda_max + total.ln() / t;
        if let (true, Some((gx, gg))) = (want_vectors, grad) {
            gx.iter_mut().for_each(|v| *v = 0.0);
            gg.iter_mut().for_each(|v| *v = 0.0);
            let n = b.nrows();
            let bh = b.adjoint();
            for (k, w) in weights.iter().enumerate() {
                let w = w / total;
                if w < 1e-12 {
                    continue;
                }
                let u = eig.eigenvectors.column(k);
                let bu = &b * u;
                let c = &bh * &bu;
                let p = nalgebra::DVector::from_fn(n, |i, _| {
                    u[i] * self.real_slot[i].map_or(0.0, |s| g[s])
                });
                let q = &bh * &p;
                for i in 0..n {
                    let gi = self.real_slot[i].map_or(0.0, |s| g[s]);
                    let dx = bu[i].norm_sqr()
                        - (c[i].conj() * u[i]).re
                        - (gi * u[i].conj() * bu[i] - q[i].conj() * u[i]).im;
                    gx[self.block_of[i]] += w * dx;
                    if let Some(s) = self.real_slot[i] {
                        gg[s] += w * (-2.0 * (u[i].conj() * bu[i]).im);
                    }
                }
            }
        }
        Spectrum { lambda_max, smooth }
    }

    fn osborne(&mut self) {
        let n = self.m.nrows();
        let nb = self.n_blocks;
        if nb < 2 {
            return;
        }
        let abs2 = self.m.map(|c| c.norm_sqr());
        for _ in 0..OSBORNE_SWEEPS {
            let mut moved = 0.0f64;
            for blk in 0..nb {
                let e: Vec<f64> = self.block_of.iter().map(|&b| self.x[b].exp()).collect();
                let (mut r, mut c) = (0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        let (bi, bj) = (self.block_of[i], self.block_of[j]);
                        if bi == bj {
                            continue;
                        }
                        let v = abs2[(i, j)] * e[i] / e[j];
                        if bi == blk {
                            r += v;
                        }
                        if bj == blk {
                            c += v;
                        }
                    }
                }
                if r > 0.0 && c > 0.0 {
                    let step = (0.5 * (c / r).ln()).clamp(-10.0, 10.0);
                    self.x[blk] += step;
                    moved = moved.max(step.abs());
                }
            }
            if moved < 1e-6 {
                break;
            }
        }
        let shift = self.x[nb - 1];
        self.x.iter_mut().for_each(|v| *v -= shift);
    }

    /// Minimize the smoothed spectrum. The last block's scaling is pinned
    /// since only ratios matter.
    fn optimize(&mut self, with_g: bool) {
        let nx = self.n_blocks - 1;
        let ng = if with_g { self.n_real } else { 0 };
        if nx + ng == 0 {
            return;
        }
        let pinned = self.x[self.n_blocks - 1];
        let mut params: Vec<f64> = self.x[..nx].to_vec();
        params.extend_from_slice(&self.g[..ng]);
        let fixed_g = self.g.clone();

        let mut best_lambda = self.best_lambda;
        let mut best_params = params.clone();
        let mut gx = vec![0.0; self.n_blocks];
        let mut gg = vec![0.0; self.n_real];
        let mut solved_to_zero = false;

        for &tau in &SHARPNESS {
            let level = best_lambda.abs().max(1e-12);
            let t = tau / level;
            let start = best_params.clone();
            let r = bfgs(
                |p, grad| {
                    let mut x = p[..nx].to_vec();
                    x.push(pinned);
                    let g: Vec<f64> = if with_g { p[nx..].to_vec() } else { fixed_g.clone() };
                    let s = self.spectrum(&x, &g, Some(t), Some((&mut gx, &mut gg)));
                    if !s.smooth.is_finite() {
                        return Some(f64::INFINITY);
                    }
                    if s.lambda_max < best_lambda {
                        best_lambda = s.lambda_max;
                        best_params = p.to_vec();
                    }
                    if s.lambda_max <= 0.0 {
                        solved_to_zero = true;
                        return None;
                    }
                    grad[..nx].copy_from_slice(&gx[..nx]);
                    if with_g {
                        grad[nx..].copy_from_slice(&gg);
                    }
                    Some(s.smooth)
                },
                &start,
                BFGS_ITER,
                1e-10 * level,
            );
            let _ = r;
            if solved_to_zero {
                break;
            }
        }
        self.best_lambda = best_lambda;
        self.x[..nx].copy_from_slice(&best_params[..nx]);
        if with_g {
            self.g.copy_from_slice(&best_params[nx..]);
        }
        // Certificate: the stored scalings must reproduce the stored bound.
        let (x, g) = (self.x.clone(), self.g.clone());
        let check = self.spectrum(&x, &g, None, None).lambda_max;
        if !check.is_finite() {
            self.best_lambda = f64::NAN;
        } else if check > self.best_lambda {
            self.best_lambda = check;
        }
    }

    #[cfg(test)]
    fn smoothed_with_grad(&self, x: &[f64], g: &[f64], t: f64) -> (f64, Vec<f64>, Vec<f64>) {
        let mut gx = vec![0.0; self.n_blocks];
        let mut gg = vec![0.0; self.n_real];
        let s = self.spectrum(x, g, Some(t), Some((&mut gx, &mut gg)));
        (s.smooth, gx, gg)
    }
}

/// D-scaling bound with every block treated as complex.
pub fn mu_upper_complex(m: &CMatrix, blocks: &BlockStructure) -> Result<f64> {
    let mut s = UpperSolver::new(m, &blocks.complexified())?;
    s.run_to(UpperStage::Complex);
    Ok(s.value())
}

/// D,G-scaling bound for a mixed real/complex structure. Never exceeds
/// [`mu_upper_complex`] of the complexified structure.
pub fn mu_upper_mixed(m: &CMatrix, blocks: &BlockStructure) -> Result<UpperBound> {
    let mut s = UpperSolver::new(m, blocks)?;
    s.run_to(UpperStage::Mixed);
    Ok(UpperBound {
        value: s.value(),
        fallback: s.fallback(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mu::blocks::Block;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn scalars(kinds: &[BlockKind]) -> BlockStructure {
        BlockStructure::new(
            kinds
                .iter()
                .enumerate()
                .map(|(i, k)| match k {
                    BlockKind::RealScalar => Block::real(format!("r{i}")),
                    _ => Block::complex(format!("c{i}")),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn scalar_examples() {
        let m = CMatrix::from_element(1, 1, c(3.0, 4.0));
        let complex = scalars(&[BlockKind::ComplexScalar]);
        assert!((mu_upper_complex(&m, &complex).unwrap() - 5.0).abs() < 1e-12);
        let real = scalars(&[BlockKind::RealScalar]);
        let m = CMatrix::from_element(1, 1, c(-2.0, 0.0));
        assert!((mu_upper_mixed(&m, &real).unwrap().value - 2.0).abs() < 1e-10);
        let m = CMatrix::from_element(1, 1, c(0.0, 2.0));
        assert_eq!(mu_upper_mixed(&m, &real).unwrap().value, 0.0);
        let zero = CMatrix::zeros(2, 2);
        assert_eq!(mu_upper_complex(&zero, &scalars(&[BlockKind::ComplexScalar; 2])).unwrap(), 0.0);
    }

    #[test]
    fn two_block_example() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(2.0, 0.0), c(0.5, 0.0), c(0.0, 0.0)]);
        let s = scalars(&[BlockKind::ComplexScalar; 2]);
        assert!((mu_upper_complex(&m, &s).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let s = scalars(&[BlockKind::ComplexScalar; 2]);
        assert!(mu_upper_complex(&CMatrix::zeros(3, 3), &s).is_err());
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(mu_upper_complex(&m, &s), Err(Error::NonFinite)));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let kinds = [
            BlockKind::RealScalar,
            BlockKind::ComplexScalar,
            BlockKind::RealScalar,
            BlockKind::ComplexScalar,
        ];
        let s = scalars(&kinds);
        let m = random_matrix(&mut rng, 4);
        let solver = UpperSolver::new(&m, &s).unwrap();
        let x = vec![0.3, -0.2, 0.1, 0.0];
        let g = vec![0.4, -0.7];
        let t = 5.0;
        let (_, gx, gg) = solver.smoothed_with_grad(&x, &g, t);
        let h = 1e-6;
        for i in 0..4 {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (solver.smoothed_with_grad(&xp, &g, t).0 - solver.smoothed_with_grad(&xm, &g, t).0)
                / (2.0 * h);
            assert!((fd - gx[i]).abs() < 1e-6 * (1.0 + fd.abs()), "x{i}: {fd} vs {}", gx[i]);
        }
        for i in 0..2 {
            let mut gp = g.clone();
            gp[i] += h;
            let mut gm = g.clone();
            gm[i] -= h;
            let fd = (solver.smoothed_with_grad(&x, &gp, t).0 - solver.smoothed_with_grad(&x, &gm, t).0)
                / (2.0 * h);
            assert!((fd - gg[i]).abs() < 1e-6 * (1.0 + fd.abs()), "g{i}: {fd} vs {}", gg[i]);
        }
    }

    #[test]
    fn complex_bound_is_similarity_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let n = rng.random_range(2..6);
            let m = random_matrix(&mut rng, n);
            let s = scalars(&vec![BlockKind::ComplexScalar; n]);
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0f64..2.0).exp()).collect();
            let dm = CMatrix::from_fn(n, n, |i, j| m[(i, j)] * (d[i] / d[j]));
            let a = mu_upper_complex(&m, &s).unwrap();
            let b = mu_upper_complex(&dm, &s).unwrap();
            assert!((a - b).abs() <= 1e-6 * a, "{a} vs {b}");
        }
    }

    #[test]
    fn mixed_never_exceeds_complex_and_scales_linearly() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let n = rng.random_range(2..6);
            let kinds: Vec<BlockKind> = (0..n)
                .map(|_| {
                    if rng.random_bool(0.5) {
                        BlockKind::RealScalar
                    } else {
                        BlockKind::ComplexScalar
                    }
                })
                .collect();
            let s = scalars(&kinds);
            let m = random_matrix(&mut rng, n);
            let mixed = mu_upper_mixed(&m, &s).unwrap().value;
            let complex = mu_upper_complex(&m, &s).unwrap();
            assert!(mixed <= complex + 1e-9);
            let k = c(-2.5, 0.0);
            let mixed_k = mu_upper_mixed(&m.map(|v| v * k), &s).unwrap().value;
            assert!((mixed_k - k.norm() * mixed).abs() <= 1e-6 * mixed_k.max(1e-12));
        }
    }

    #[test]
    fn full_blocks_supported() {
        // A single full block: the bound is the largest singular value.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_matrix(&mut rng, 3);
        let s = BlockStructure::new(vec![Block::full(3, "f")]).unwrap();
        let sv = m.clone().singular_values()[0];
        assert!((mu_upper_complex(&m, &s).unwrap() - sv).abs() < 1e-10);
    }
}
