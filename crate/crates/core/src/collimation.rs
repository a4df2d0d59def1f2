//! One-slit collimation: sharp-state preparation and the collimation bounds.
//!
//! Each `check_*` verifier first confirms its hypothesis on the region and
//! returns [`QrnError::HypothesisNotMet`] otherwise, then reports per-sample
//! margins `bound − achieved`. The generators at the bottom of the module
//! produce regions that satisfy those hypotheses: jittered Gaussian packets,
//! mixtures of position eigenstates, small random perturbations and the
//! three-point states that saturate Chebyshev's inequality.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{QrnError, Result};
use crate::linalg::{
    operator_norm, spectral_projector, trace_inner, DensityMatrix, Grid, HermitianOperator, Projector,
};
use crate::region::{
    is_eps_sharp, moments, restrict_to_slit, sample_region, slit_leakage, spread_over, strict_sharpness, SlitSpec,
    StateRegion,
};
use crate::report::TheoremReport;
use crate::states::{gaussian_state, nearest_index, point_mixture, rng_for};

fn hypothesis(check: &str, detail: impl Into<String>) -> QrnError {
    QrnError::HypothesisNotMet { check: check.into(), detail: detail.into() }
}

fn require_sharp(check: &str, z: &HermitianOperator, region: &StateRegion, slit: SlitSpec, eps: f64) -> Result<()> {
    let sharp = is_eps_sharp(z, region, slit, eps)?;
    if !sharp.all {
        let bad = sharp.per_sample.iter().filter(|b| !**b).count();
        return Err(hypothesis(check, format!("{bad} samples are not {eps}-sharp for ]{}, {}[", slit.lo, slit.hi)));
    }
    Ok(())
}

/// Packet width used by [`prepare_sharp_state`]: `0.4·w·√ε`.
pub fn sharp_packet_width(slit: SlitSpec, eps: f64) -> f64 {
    0.4 * slit.width() * eps.sqrt()
}

/// Gaussian packet at the slit midpoint with width `0.4·w·√ε`, leaving a
/// band margin of `0.1·w` on either side.
pub fn prepare_sharp_state(slit: SlitSpec, eps: f64, grid: &Grid) -> Result<DensityMatrix> {
    let (lo, hi) = (-grid.half_width, grid.half_width);
    if slit.lo < lo || slit.hi > hi {
        return Err(QrnError::InvalidArgument(format!("slit ]{}, {}[ leaves the grid [{lo}, {hi})", slit.lo, slit.hi)));
    }
    let rho = gaussian_state(grid, slit.midpoint(), sharp_packet_width(slit, eps))?;
    let z = grid.position_operator();
    if !is_eps_sharp(&z, &StateRegion::singleton(rho.clone()), slit, eps)?.all {
        return Err(QrnError::PreparationFailed(format!(
            "packet for ]{}, {}[ at eps = {eps} is not sharp on a grid of step {}",
            slit.lo,
            slit.hi,
            grid.step()
        )));
    }
    Ok(rho)
}

/// Margins `ε − 4s²/w²`.
pub fn check_theorem1(z: &HermitianOperator, region: &StateRegion, slit: SlitSpec, eps: f64) -> Result<TheoremReport> {
    require_sharp("theorem 1", z, region, slit, eps)?;
    let w = slit.width();
    let s = spread_over(z, region)?;
    let margins = s.per_sample.iter().map(|s| eps - 4.0 * s * s / (w * w)).collect();
    Ok(TheoremReport::from_margins("theorem1", margins))
}

/// Narrowest slit for which every sample of the region is ε-sharp:
/// `]min(Z_Q − s/√ε), max(Z_Q + s/√ε)[`.
pub fn tightest_slit(z: &HermitianOperator, region: &StateRegion, eps: f64) -> Result<SlitSpec> {
    let z_sq = z.square();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for rho in region.samples() {
        let m = moments(z, &z_sq, rho)?;
        let band = m.spread / eps.sqrt();
        lo = lo.min(m.mean - band);
        hi = hi.max(m.mean + band);
    }
    SlitSpec::new(lo, hi)
}

/// `2ħ/ε`.
pub fn theorem2_bound(eps: f64, hbar: f64) -> f64 {
    2.0 * hbar / eps
}

/// Width product against `2ħ/ε`, exact up to the shared additive slack.
pub fn check_theorem2(
    z: &HermitianOperator,
    p: &HermitianOperator,
    region: &StateRegion,
    zslit: SlitSpec,
    pslit: SlitSpec,
    eps: f64,
    hbar: f64,
) -> Result<TheoremReport> {
    check_theorem2_with(z, p, region, zslit, pslit, eps, hbar, 0.0)
}

/// As [`check_theorem2`], comparing against `(2ħ/ε)(1 − rel_tol)` to absorb
/// the truncation error of a finite grid.
#[allow(clippy::too_many_arguments)]
pub fn check_theorem2_with(
    z: &HermitianOperator,
    p: &HermitianOperator,
    region: &StateRegion,
    zslit: SlitSpec,
    pslit: SlitSpec,
    eps: f64,
    hbar: f64,
    rel_tol: f64,
) -> Result<TheoremReport> {
    require_sharp("theorem 2 (position)", z, region, zslit, eps)?;
    require_sharp("theorem 2 (momentum)", p, region, pslit, eps)?;
    let product = zslit.width() * pslit.width();
    Ok(TheoremReport::from_margins("theorem2", vec![product - theorem2_bound(eps, hbar) * (1.0 - rel_tol)]))
}

/// Margins `Tr(Pρ) − (1 − ε)`.
pub fn check_theorem3(z: &HermitianOperator, region: &StateRegion, slit: SlitSpec, eps: f64) -> Result<TheoremReport> {
    require_sharp("theorem 3", z, region, slit, eps)?;
    let p = spectral_projector(z, slit)?;
    let margins = region
        .samples()
        .par_iter()
        .map(|rho| Ok(trace_inner(rho, p.operator())? - (1.0 - eps)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TheoremReport::from_margins("theorem3", margins))
}

/// `ε(2 − ε)/(1 − ε)`.
pub fn corollary1_bound(eps: f64) -> f64 {
    eps * (2.0 - eps) / (1.0 - eps)
}

/// Margin `ε(2−ε)/(1−ε) − Tr|ρ − ρ₁|` where `ρ₁ = PρP / Tr(PρP)`.
pub fn check_corollary1(rho: &DensityMatrix, p: &Projector, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(QrnError::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")));
    }
    let leak = slit_leakage(rho, p)?;
    if !(leak < eps) {
        return Err(hypothesis("corollary 1", format!("Tr|ρ − PρP| = {leak} is not below {eps}")));
    }
    let restricted = restrict_to_slit(rho, p)?;
    Ok(corollary1_bound(eps) - rho.trace_distance(&restricted)?)
}

fn require_strict(
    check: &str,
    z: &HermitianOperator,
    region: &StateRegion,
    slit: SlitSpec,
    eps: f64,
) -> Result<Projector> {
    let strict = strict_sharpness(z, region, slit, eps)?;
    if !strict.all {
        let bad = strict.per_sample.iter().filter(|b| !**b).count();
        return Err(hypothesis(check, format!("{bad} samples are not strictly {eps}-sharp")));
    }
    spectral_projector(z, slit)
}

/// Bounded case: margins `3‖M‖ε − |Tr(ρM) − Tr(ρPMP)|`.
pub fn check_theorem4(
    z: &HermitianOperator,
    m: &HermitianOperator,
    region: &StateRegion,
    slit: SlitSpec,
    eps: f64,
) -> Result<TheoremReport> {
    let mut reports = check_theorem4_family(z, std::slice::from_ref(m), region, slit, eps)?;
    Ok(reports.remove(0))
}

/// [`check_theorem4`] for several observables, validating the region once.
pub fn check_theorem4_family(
    z: &HermitianOperator,
    ms: &[HermitianOperator],
    region: &StateRegion,
    slit: SlitSpec,
    eps: f64,
) -> Result<Vec<TheoremReport>> {
    let p = require_strict("theorem 4", z, region, slit, eps)?;
    ms.par_iter()
        .map(|m| {
            let pmp = m.sandwich(p.operator())?;
            let bound = 3.0 * operator_norm(m)? * eps;
            let margins = region
                .samples()
                .iter()
                .map(|rho| Ok(bound - (trace_inner(rho, m)? - trace_inner(rho, &pmp)?).abs()))
                .collect::<Result<Vec<_>>>()?;
            Ok(TheoremReport::from_margins("theorem4", margins))
        })
        .collect()
}

/// Keeps the samples that are strictly ε-sharp for `slit`; the centre must be.
pub fn strict_subregion(z: &HermitianOperator, region: &StateRegion, slit: SlitSpec, eps: f64) -> Result<StateRegion> {
    let strict = strict_sharpness(z, region, slit, eps)?;
    if !strict.per_sample.first().copied().unwrap_or(false) {
        return Err(hypothesis("strict sharpness", "the region centre is not strictly sharp"));
    }
    let keep: Vec<usize> = strict.per_sample.iter().enumerate().filter_map(|(k, &ok)| ok.then_some(k)).collect();
    Ok(region.restrict(&keep))
}

/// `2|z₂ − z₁| ≤ ε·m` with `m = 2·min(|z₁|, |z₂|)`.
pub fn unbounded_precondition(slit: SlitSpec, eps: f64) -> bool {
    2.0 * slit.width() <= eps * position_constant(slit)
}

fn position_constant(slit: SlitSpec) -> f64 {
    2.0 * slit.lo.abs().min(slit.hi.abs())
}

/// Unbounded branch for `M = Z` itself: margins `ε·m − |Z_Q − (PZP)_Q|`.
pub fn check_theorem4_position(
    z: &HermitianOperator,
    region: &StateRegion,
    slit: SlitSpec,
    eps: f64,
) -> Result<TheoremReport> {
    if !unbounded_precondition(slit, eps) {
        return Err(QrnError::UnboundedPreconditionViolated { z1: slit.lo, z2: slit.hi, eps });
    }
    let p = require_strict("theorem 4 (position)", z, region, slit, eps)?;
    let pzp = z.sandwich(p.operator())?;
    let bound = eps * position_constant(slit);
    let margins = region
        .samples()
        .par_iter()
        .map(|rho| Ok(bound - (trace_inner(rho, z)? - trace_inner(rho, &pzp)?).abs()))
        .collect::<Result<Vec<_>>>()?;
    Ok(TheoremReport::from_margins("theorem4-position", margins))
}

/// Knobs for [`sharp_region`].
#[derive(Debug, Clone, Copy)]
pub struct SharpRegionConfig {
    pub gaussians: usize,
    pub point_mixtures: usize,
    pub perturbations: usize,
    /// Trace-norm radius of the random perturbations.
    pub perturbation_radius: f64,
}

impl Default for SharpRegionConfig {
    fn default() -> Self {
        Self { gaussians: 4, point_mixtures: 2, perturbations: 1, perturbation_radius: 1e-5 }
    }
}

/// Region around the prepared sharp packet whose members all satisfy the
/// ε-sharp hypothesis for `slit`. Candidates that fail it are discarded.
pub fn sharp_region(grid: &Grid, slit: SlitSpec, eps: f64, cfg: SharpRegionConfig, seed: u64) -> Result<StateRegion> {
    let center = prepare_sharp_state(slit, eps, grid)?;
    let mut rng = rng_for(seed, 1);
    let w = slit.width();
    let mid = slit.midpoint();
    let mut members = Vec::new();
    for _ in 0..cfg.gaussians {
        let mean = mid + w * rng.random_range(-0.05..0.05);
        let sigma = w * eps.sqrt() * rng.random_range(0.25..0.45);
        members.push(gaussian_state(grid, mean, sigma)?);
    }
    let reach = (0.15 * w * eps.sqrt()).max(grid.step());
    for _ in 0..cfg.point_mixtures {
        let pts: Vec<(f64, f64)> =
            (0..3).map(|_| (mid + rng.random_range(-reach..reach), rng.random_range(0.1..1.0))).collect();
        members.push(point_mixture(grid, &pts)?);
    }
    if cfg.perturbations > 0 {
        let noisy = sample_region(&center, cfg.perturbation_radius, cfg.perturbations + 1, seed)?;
        members.extend(noisy.samples()[1..].iter().cloned());
    }
    let z = grid.position_operator();
    let z_sq = z.square();
    let mut kept = Vec::with_capacity(members.len());
    for m in members {
        if crate::region::sharp_at(moments(&z, &z_sq, &m)?, slit, eps) {
            kept.push(m);
        }
    }
    StateRegion::enclosing(center, kept, seed)
}

/// Three-point state saturating Chebyshev's inequality: weight `1 − ε` at the
/// grid point nearest `x` and `ε/2` at the points `steps` grid cells either
/// side. The returned slit has those outer points as its endpoints, so the
/// band `Z_Q ± s/√ε` coincides with the slit and exactly `ε` of the weight
/// sits on the (excluded) boundary.
pub fn chebyshev_saturating_state(grid: &Grid, x: f64, steps: usize, eps: f64) -> Result<(DensityMatrix, SlitSpec)> {
    if steps == 0 {
        return Err(QrnError::InvalidArgument("need at least one grid step".into()));
    }
    let m = nearest_index(grid, x)?;
    if m < steps || m + steps >= grid.n {
        return Err(QrnError::InvalidArgument(format!("outer points of a {steps}-step state at {x} leave the grid")));
    }
    let xs = grid.positions();
    let mut w = vec![0.0; grid.n];
    w[m - steps] = eps / 2.0;
    w[m] = 1.0 - eps;
    w[m + steps] = eps / 2.0;
    Ok((DensityMatrix::diagonal(&w)?, SlitSpec::new(xs[m - steps], xs[m + steps])?))
}

/// State with `Tr|ρ − PρP| = u·ε` exactly: `(1−t)σ + tτ` with `σ` random
/// inside the range of `P`, `τ` random on the whole space and `t` chosen from
/// the leakage of `τ`.
pub fn strictly_sharp_state(p: &Projector, eps: f64, u: f64, rng: &mut impl Rng) -> Result<DensityMatrix> {
    let d = p.dim();
    let inside_basis = projector_basis(p)?;
    let sigma = crate::states::random_density_in(&inside_basis, inside_basis.len().min(3), rng)?;
    let tau = crate::states::random_density(d, 2, rng);
    let tau_leak = slit_leakage(&tau, p)?;
    let t = (u * eps / tau_leak).min(1.0);
    DensityMatrix::mixture(&[(1.0 - t, &sigma), (t, &tau)])
}

fn projector_basis(p: &Projector) -> Result<Vec<Vec<crate::linalg::C64>>> {
    let e = crate::linalg::eigh(&p.operator().as_mat().to_owned())?;
    let basis: Vec<_> =
        (0..p.dim()).filter(|&k| e.values[k] > 0.5).map(|k| e.vectors.col_as_slice(k).to_vec()).collect();
    if basis.is_empty() {
        return Err(QrnError::InvalidArgument("projector has empty range".into()));
    }
    Ok(basis)
}
