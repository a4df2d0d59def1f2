//! Impulsive two-particle measurement: does the pointer register a value?
//!
//! After an impulse of strength `gΔt` the pointer position is
//! `X₂_f = I ⊗ X₂ + gΔt X₁ ⊗ I`. Its spread² splits into the pointer's own
//! spread², the particle's spread² scaled by `(gΔt)²` and a covariance term.
//! The pointer registers a classical value when that total stays below
//! `(1 + (gΔt)²)·ε₂` on every joint sample.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QrnError, Result};
use crate::linalg::{
    partial_trace, tensor, tensor_states, trace_inner, DensityMatrix, Grid, HermitianOperator, Subsystem, C64,
};
use crate::region::{is_approx_classical, variance_from_moments, StateRegion};
use crate::states::{gaussian_state, gaussian_wavefunction, rng_for};
use crate::tol;

#[derive(Debug, Clone)]
pub struct PointerModel {
    pub grid1: Grid,
    pub grid2: Grid,
    pub x1: HermitianOperator,
    pub x2: HermitianOperator,
    pub p2: HermitianOperator,
    pub g: f64,
    pub dt: f64,
}

impl PointerModel {
    pub fn new(grid1: Grid, grid2: Grid, g: f64, dt: f64) -> Result<Self> {
        let g_dt = g * dt;
        if !(g_dt.is_finite() && g_dt >= 0.0) {
            return Err(QrnError::InvalidArgument(format!("g·dt must be finite and non-negative, got {g_dt}")));
        }
        let joint = grid1.n * grid2.n;
        if joint > tol::MAX_DIM {
            return Err(QrnError::DimensionTooLarge { dim: joint, cap: tol::MAX_DIM });
        }
        let x1 = grid1.position_operator().with_label("X1");
        let x2 = grid2.position_operator().with_label("X2");
        let p2 = grid2.momentum_operator().with_label("P2");
        Ok(Self { grid1, grid2, x1, x2, p2, g, dt })
    }

    pub fn g_dt(&self) -> f64 {
        self.g * self.dt
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.grid1.n, self.grid2.n)
    }

    /// `X₁ ⊗ I` and `I ⊗ X₂` on the joint space.
    fn lifted(&self) -> Result<(HermitianOperator, HermitianOperator)> {
        let (d1, d2) = self.dims();
        Ok((tensor(&self.x1, &HermitianOperator::identity(d2))?, tensor(&HermitianOperator::identity(d1), &self.x2)?))
    }
}

/// `I ⊗ X₂ + gΔt X₁ ⊗ I`.
pub fn pointer_final_operator(model: &PointerModel) -> Result<HermitianOperator> {
    let (x1, x2) = model.lifted()?;
    Ok(x2.lin_comb(1.0, &x1, model.g_dt())?.with_label("X2f"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JointMode {
    /// `s₁ ⊗ s₂` for paired factor samples.
    Product,
    /// `(|a⟩|b⟩ + |c⟩|d⟩)/√2` from the leading eigenvectors of two sample
    /// pairs. No bound is attached to these samples.
    Entangled,
}

#[derive(Debug, Clone)]
pub struct TwoParticleRegion {
    pub w1: StateRegion,
    pub w2: StateRegion,
    pub joint: Vec<DensityMatrix>,
    pub mode: JointMode,
}

/// Joint samples over `W₁ × W₂`: the product of the centres first, then
/// `n − 1` seeded pairs of samples.
pub fn build_superset(w1: &StateRegion, w2: &StateRegion, n: usize, seed: u64) -> Result<TwoParticleRegion> {
    build_superset_with(w1, w2, n, seed, JointMode::Product)
}

pub fn build_superset_with(
    w1: &StateRegion,
    w2: &StateRegion,
    n: usize,
    seed: u64,
    mode: JointMode,
) -> Result<TwoParticleRegion> {
    let dims = (w1.dim(), w2.dim());
    if dims.0 * dims.1 > tol::MAX_DIM {
        return Err(QrnError::DimensionTooLarge { dim: dims.0 * dims.1, cap: tol::MAX_DIM });
    }
    let mut rng = rng_for(seed, 0x90);
    let mut pairs = vec![(0usize, 0usize)];
    if w1.len() * w2.len() > 1 {
        pairs.extend((1..n).map(|_| (rng.random_range(0..w1.len()), rng.random_range(0..w2.len()))));
    }
    let joint = match mode {
        JointMode::Product => pairs
            .par_iter()
            .map(|&(i, j)| tensor_states(&w1.samples()[i], &w2.samples()[j]))
            .collect::<Result<Vec<_>>>()?,
        JointMode::Entangled => {
            let partners: Vec<(usize, usize)> =
                pairs.iter().map(|_| (rng.random_range(0..w1.len()), rng.random_range(0..w2.len()))).collect();
            pairs
                .par_iter()
                .zip(partners.par_iter())
                .map(|(&(i, j), &(k, l))| {
                    entangled_superposition(&w1.samples()[i], &w2.samples()[j], &w1.samples()[k], &w2.samples()[l])
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let region = TwoParticleRegion { w1: w1.clone(), w2: w2.clone(), joint, mode };
    if mode == JointMode::Product {
        verify_partial_traces(&region)?;
    }
    Ok(region)
}

fn verify_partial_traces(region: &TwoParticleRegion) -> Result<()> {
    let dims = (region.w1.dim(), region.w2.dim());
    for (k, rho) in region.joint.iter().enumerate() {
        for (keep, w) in [(Subsystem::First, &region.w1), (Subsystem::Second, &region.w2)] {
            let reduced = partial_trace(rho, keep, dims)?;
            let d = reduced.trace_distance(w.center())?;
            if d > w.radius() + 1e-9 {
                return Err(QrnError::HypothesisNotMet {
                    check: "superset".into(),
                    detail: format!("joint sample {k} reduces to a state at distance {d} from the factor centre"),
                });
            }
        }
    }
    Ok(())
}

fn leading_vector(rho: &DensityMatrix) -> Result<Vec<C64>> {
    let e = crate::linalg::eigh(&rho.as_mat().to_owned())?;
    Ok(e.vectors.col_as_slice(rho.dim() - 1).to_vec())
}

/// `(|a⟩⊗|b⟩ + |c⟩⊗|d⟩)` normalized, from the leading eigenvectors.
pub fn entangled_superposition(
    a: &DensityMatrix,
    b: &DensityMatrix,
    c: &DensityMatrix,
    d: &DensityMatrix,
) -> Result<DensityMatrix> {
    let (va, vb, vc, vd) = (leading_vector(a)?, leading_vector(b)?, leading_vector(c)?, leading_vector(d)?);
    let mut psi = Vec::with_capacity(va.len() * vb.len());
    for i in 0..va.len() {
        for j in 0..vb.len() {
            psi.push(va[i] * vb[j] + vc[i] * vd[j]);
        }
    }
    if psi.iter().map(|z| z.norm_sqr()).sum::<f64>() < tol::NULL_WEIGHT {
        return tensor_states(a, b);
    }
    DensityMatrix::pure(&psi)
}

/// Per-sample split of the pointer's final spread².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadDecomposition {
    /// Spread² of `I ⊗ X₂`.
    pub pointer: f64,
    /// `(gΔt)²` times the spread² of `X₁ ⊗ I`.
    pub particle: f64,
    /// `2gΔt(⟨X₁⊗X₂⟩ − ⟨X₁⟩⟨X₂⟩)`.
    pub cross: f64,
    pub total: f64,
    /// Spread² of the final operator computed directly.
    pub direct: f64,
}

impl SpreadDecomposition {
    pub fn identity_defect(&self) -> f64 {
        (self.total - self.direct).abs()
    }
}

pub fn pointer_spread(model: &PointerModel, region: &TwoParticleRegion) -> Result<Vec<SpreadDecomposition>> {
    let (x1, x2) = model.lifted()?;
    let (x1_sq, x2_sq) = (x1.square(), x2.square());
    let x12 = HermitianOperator::from_mat_unchecked("X1X2", x1.matmul(&x2)?);
    let xf = pointer_final_operator(model)?;
    let xf_sq = xf.square();
    let k = model.g_dt();
    region
        .joint
        .par_iter()
        .map(|rho| {
            let (m1, m2) = (trace_inner(rho, &x1)?, trace_inner(rho, &x2)?);
            let v1 = trace_inner(rho, &x1_sq)? - m1 * m1;
            let v2 = trace_inner(rho, &x2_sq)? - m2 * m2;
            let cov = trace_inner(rho, &x12)? - m1 * m2;
            let (pointer, particle, cross) = (v2, k * k * v1, 2.0 * k * cov);
            let direct = variance_from_moments(trace_inner(rho, &xf)?, trace_inner(rho, &xf_sq)?);
            Ok(SpreadDecomposition { pointer, particle, cross, total: pointer + particle + cross, direct })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Registration {
    Registered,
    NotRegistered,
}

#[derive(Debug, Clone)]
pub struct RegistrationReport {
    pub registration: Registration,
    pub threshold: f64,
    pub terms: Vec<SpreadDecomposition>,
}

impl RegistrationReport {
    pub fn worst_total(&self) -> f64 {
        self.terms.iter().map(|t| t.total).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_particle_term(&self) -> f64 {
        self.terms.iter().map(|t| t.particle).fold(f64::INFINITY, f64::min)
    }

    pub fn max_identity_defect(&self) -> f64 {
        self.terms.iter().map(|t| t.identity_defect()).fold(0.0, f64::max)
    }
}

/// `(1 + (gΔt)²)·ε₂`.
pub fn registration_threshold(g_dt: f64, eps2: f64) -> f64 {
    (1.0 + g_dt * g_dt) * eps2
}

/// Registered iff every joint sample of `O × W₂` has final spread² below
/// `(1 + (gΔt)²)·ε₂`. `W₂` must itself be approximately classical.
pub fn classify_registration(
    model: &PointerModel,
    o: &StateRegion,
    w2: &StateRegion,
    eps2: f64,
    n: usize,
    seed: u64,
) -> Result<RegistrationReport> {
    if !is_approx_classical(&model.x2, w2, eps2)? {
        return Err(QrnError::HypothesisNotMet {
            check: "pointer".into(),
            detail: format!("pointer region is not approximately classical at eps2 = {eps2}"),
        });
    }
    let region = build_superset(o, w2, n, seed)?;
    let terms = pointer_spread(model, &region)?;
    let threshold = registration_threshold(model.g_dt(), eps2);
    let registration =
        if terms.iter().all(|t| t.total < threshold) { Registration::Registered } else { Registration::NotRegistered };
    Ok(RegistrationReport { registration, threshold, terms })
}

/// Narrow packets near the midpoint of a slit: the centre packet of width
/// `0.2·w` followed by `n − 1` jittered ones.
pub fn slit_region(grid: &Grid, lo: f64, hi: f64, n: usize, seed: u64) -> Result<StateRegion> {
    let (mid, w) = ((lo + hi) / 2.0, hi - lo);
    if !(w > 0.0) {
        return Err(QrnError::InvalidArgument(format!("empty slit ]{lo}, {hi}[")));
    }
    let mut rng = rng_for(seed, 0x91);
    let center = gaussian_state(grid, mid, 0.2 * w)?;
    let mut members = vec![center.clone()];
    for _ in 1..n {
        let x = mid + 0.05 * w * (2.0 * rng.random::<f64>() - 1.0);
        members.push(gaussian_state(grid, x, (0.1 + 0.1 * rng.random::<f64>()) * w)?);
    }
    StateRegion::enclosing(center, members, seed)
}

/// Mixtures over two slits with weights in `[0.45, 0.55]`, centred on the
/// 50/50 mixture.
pub fn union_region(grid: &Grid, slit_u: (f64, f64), slit_v: (f64, f64), n: usize, seed: u64) -> Result<StateRegion> {
    let u = slit_region(grid, slit_u.0, slit_u.1, n, seed)?;
    let v = slit_region(grid, slit_v.0, slit_v.1, n, seed.wrapping_add(1))?;
    let mut rng = rng_for(seed, 0x92);
    let center = DensityMatrix::mixture(&[(0.5, u.center()), (0.5, v.center())])?;
    let mut members = vec![center.clone()];
    for k in 1..n {
        let w = 0.45 + 0.1 * rng.random::<f64>();
        members.push(DensityMatrix::mixture(&[(w, &u.samples()[k % u.len()]), (1.0 - w, &v.samples()[k % v.len()])])?);
    }
    StateRegion::enclosing(center, members, seed)
}

/// A pointer wavefunction of width `sigma` at `x`, for entangled demos.
pub fn pointer_packet(grid: &Grid, x: f64, sigma: f64) -> Result<Vec<C64>> {
    gaussian_wavefunction(grid, x, sigma, 0.0)
}
