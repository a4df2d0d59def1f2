//! Quantum real numbers over state regions.
//!
//! An open set of states is modelled as a trace-norm ball around a centre
//! state together with a finite, seeded sample of members. Every "for all ρ
//! in U" statement is evaluated pointwise over those samples. A quantum real
//! number `M_Q(U)` is then the list of values `Tr(ρᵢM)` with its enclosing
//! interval.
//!
//! Sampling law for [`sample_region`]: draw a Gaussian-entry Hermitian
//! matrix, remove its trace, rescale it to trace norm `radius·u` with `u`
//! uniform in `[0.05, 1)`, add it to the centre and repair positivity. A draw
//! that leaves the ball after repair is retried at half the scale.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QrnError, Result};
use crate::linalg::{trace_inner, trace_norm, DensityMatrix, HermitianOperator, MatrixRecord, OpenInterval, Projector};
use crate::states::{random_traceless_hermitian, rng_for};
use crate::tol;

pub type SlitSpec = OpenInterval;

/// Default number of member states drawn for a region.
pub const DEFAULT_SAMPLES: usize = 32;

#[derive(Debug, Clone)]
pub struct StateRegion {
    center: DensityMatrix,
    radius: f64,
    samples: Vec<DensityMatrix>,
    seed: u64,
}

impl StateRegion {
    /// Region with explicit members; the radius is validated against them.
    pub fn with_members(center: DensityMatrix, radius: f64, members: Vec<DensityMatrix>, seed: u64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(QrnError::InvalidArgument(format!("radius must be non-negative, got {radius}")));
        }
        let mut samples = Vec::with_capacity(members.len() + 1);
        samples.push(center.clone());
        samples.extend(members);
        let region = Self { center, radius, samples, seed };
        region.validate()?;
        Ok(region)
    }

    /// Region whose radius is the smallest ball (plus slack) holding `members`.
    pub fn enclosing(center: DensityMatrix, members: Vec<DensityMatrix>, seed: u64) -> Result<Self> {
        let far = members
            .iter()
            .map(|m| m.trace_distance(&center))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0f64, f64::max);
        let radius = far * (1.0 + 1e-9) + tol::BALL_SLACK;
        let mut samples = Vec::with_capacity(members.len() + 1);
        samples.push(center.clone());
        samples.extend(members);
        Ok(Self { center, radius, samples, seed })
    }

    pub fn singleton(center: DensityMatrix) -> Self {
        Self { samples: vec![center.clone()], center, radius: 0.0, seed: 0 }
    }

    /// Checks `Tr|s − centre| < radius` (with slack) for every sample.
    pub fn validate(&self) -> Result<()> {
        for (k, s) in self.samples.iter().enumerate().skip(1) {
            if s.dim() != self.center.dim() {
                return Err(QrnError::DimensionMismatch { expected: self.center.dim(), found: s.dim() });
            }
            let d = s.trace_distance(&self.center)?;
            if !(d < self.radius + tol::BALL_SLACK) {
                return Err(QrnError::InvalidArgument(format!(
                    "sample {k} at trace distance {d} lies outside radius {}",
                    self.radius
                )));
            }
        }
        Ok(())
    }

    pub fn center(&self) -> &DensityMatrix {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn samples(&self) -> &[DensityMatrix] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// Sub-region keeping the centre and the listed sample indices.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        let mut samples = vec![self.center.clone()];
        samples.extend(indices.iter().filter(|&&k| k != 0).map(|&k| self.samples[k].clone()));
        Self { center: self.center.clone(), radius: self.radius, samples, seed: self.seed }
    }

    /// Keeps the samples satisfying `keep`; the centre is always retained.
    pub fn filter(&self, mut keep: impl FnMut(&DensityMatrix) -> bool) -> Self {
        let idx: Vec<usize> = (1..self.len()).filter(|&k| keep(&self.samples[k])).collect();
        self.restrict(&idx)
    }

    pub fn spec(&self) -> RegionSpec {
        RegionSpec { center: self.center.to_record(), radius: self.radius, n_samples: self.len(), seed: self.seed }
    }
}

/// Serialized form of a sampled region: enough to regenerate it exactly.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RegionSpec {
    pub center: MatrixRecord,
    pub radius: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl RegionSpec {
    pub fn regenerate(&self) -> Result<StateRegion> {
        sample_region(&DensityMatrix::from_record(&self.center)?, self.radius, self.n_samples, self.seed)
    }
}

/// Draws a seeded region of `n_samples` states (the centre included) inside
/// the open trace-norm ball of the given radius.
pub fn sample_region(center: &DensityMatrix, radius: f64, n_samples: usize, seed: u64) -> Result<StateRegion> {
    if n_samples == 0 {
        return Err(QrnError::InvalidArgument("a region needs at least one sample".into()));
    }
    if !(radius >= 0.0) {
        return Err(QrnError::InvalidArgument(format!("radius must be non-negative, got {radius}")));
    }
    if radius == 0.0 {
        return Ok(StateRegion { seed, ..StateRegion::singleton(center.clone()) });
    }
    let mut rng = rng_for(seed, 0);
    let mut samples = vec![center.clone()];
    while samples.len() < n_samples {
        samples.push(perturbed_member(center, radius, &mut rng)?);
    }
    Ok(StateRegion { center: center.clone(), radius, samples, seed })
}

fn perturbed_member(center: &DensityMatrix, radius: f64, rng: &mut impl Rng) -> Result<DensityMatrix> {
    let n = center.dim();
    let h = random_traceless_hermitian(n, rng);
    let size = trace_norm(&h)?;
    let u: f64 = rng.random_range(0.05..1.0);
    let mut scale = radius * u / size;
    for _ in 0..64 {
        let shifted = center.as_operator().lin_comb(1.0, &h, scale)?;
        let candidate = DensityMatrix::repaired(shifted.as_mat().to_owned())?;
        if candidate.trace_distance(center)? < radius {
            return Ok(candidate);
        }
        scale *= 0.5;
    }
    Ok(center.clone())
}

/// The value `M_Q(U)`: per-sample expectations and their enclosing interval.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumRealNumber {
    pub operator_label: String,
    pub per_sample: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
}

impl QuantumRealNumber {
    pub fn from_values(label: impl Into<String>, per_sample: Vec<f64>) -> Self {
        let lo = per_sample.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = per_sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { operator_label: label.into(), per_sample, lo, hi }
    }

    pub fn center_value(&self) -> f64 {
        self.per_sample[0]
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// `sample_index,value` rows under a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample_index,value\n");
        for (k, v) in self.per_sample.iter().enumerate() {
            let _ = writeln!(out, "{k},{v:.12e}");
        }
        out
    }
}

pub fn evaluate_qrn(m: &HermitianOperator, region: &StateRegion) -> Result<QuantumRealNumber> {
    let values = region.samples().par_iter().map(|rho| trace_inner(rho, m)).collect::<Result<Vec<_>>>()?;
    Ok(QuantumRealNumber::from_values(m.label(), values))
}

/// Per-sample spreads `s(M)(ρᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadValue {
    pub per_sample: Vec<f64>,
}

impl SpreadValue {
    pub fn max(&self) -> f64 {
        self.per_sample.iter().copied().fold(0.0, f64::max)
    }
}

/// `√(Tr(ρM²) − Tr(ρM)²)` given `M²` precomputed.
pub fn spread_with_square(m: &HermitianOperator, m_sq: &HermitianOperator, rho: &DensityMatrix) -> Result<f64> {
    let mean = trace_inner(rho, m)?;
    Ok(variance_from_moments(mean, trace_inner(rho, m_sq)?).sqrt())
}

pub(crate) fn variance_from_moments(mean: f64, second: f64) -> f64 {
    let var = second - mean * mean;
    if var < -tol::VARIANCE_CLIP {
        // Radicands this negative only come from inconsistent inputs.
        debug_assert!(var >= -1e-6 * (1.0 + second.abs()), "variance {var}");
    }
    var.max(0.0)
}

pub fn spread(m: &HermitianOperator, rho: &DensityMatrix) -> Result<f64> {
    spread_with_square(m, &m.square(), rho)
}

pub fn spread_over(m: &HermitianOperator, region: &StateRegion) -> Result<SpreadValue> {
    let m_sq = m.square();
    let per_sample =
        region.samples().par_iter().map(|rho| spread_with_square(m, &m_sq, rho)).collect::<Result<Vec<_>>>()?;
    Ok(SpreadValue { per_sample })
}

/// Outcome of a pointwise sharpness test.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessReport {
    pub per_sample: Vec<bool>,
    pub all: bool,
}

impl SharpnessReport {
    fn from_flags(per_sample: Vec<bool>) -> Self {
        let all = per_sample.iter().all(|&b| b);
        Self { per_sample, all }
    }
}

/// Mean `Z_Q` and spread `s(Z)` at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub spread: f64,
}

pub fn moments(z: &HermitianOperator, z_sq: &HermitianOperator, rho: &DensityMatrix) -> Result<Moments> {
    let mean = trace_inner(rho, z)?;
    let spread = variance_from_moments(mean, trace_inner(rho, z_sq)?).sqrt();
    Ok(Moments { mean, spread })
}

/// Pointwise test of `Z_Q ∈ ]z₁, z₂[` and `z₁ ≤ Z_Q − s/√ε < Z_Q + s/√ε ≤ z₂`.
pub fn sharp_at(mo: Moments, slit: SlitSpec, eps: f64) -> bool {
    let band = mo.spread / eps.sqrt();
    slit.lo < mo.mean
        && mo.mean < slit.hi
        && slit.lo <= mo.mean - band + tol::BOUND_SLACK
        && mo.mean + band <= slit.hi + tol::BOUND_SLACK
}

/// Definition of ε-sharp collimation through `slit`, per sample.
pub fn is_eps_sharp(z: &HermitianOperator, region: &StateRegion, slit: SlitSpec, eps: f64) -> Result<SharpnessReport> {
    if !(eps > 0.0) {
        return Err(QrnError::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let z_sq = z.square();
    let flags = region
        .samples()
        .par_iter()
        .map(|rho| Ok(sharp_at(moments(z, &z_sq, rho)?, slit, eps)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SharpnessReport::from_flags(flags))
}

/// `Tr|ρ − PρP|`.
pub fn slit_leakage(rho: &DensityMatrix, p: &Projector) -> Result<f64> {
    let inside = rho.sandwich(p.operator())?;
    trace_norm(&rho.as_operator().sub(&inside)?)
}

/// Strict sharpness: ε-sharp and `Tr|ρ − PρP| < ε` with `P = E_Z(slit)`.
pub fn is_strictly_eps_sharp(z: &HermitianOperator, region: &StateRegion, slit: SlitSpec, eps: f64) -> Result<bool> {
    Ok(strict_sharpness(z, region, slit, eps)?.all)
}

pub fn strict_sharpness(
    z: &HermitianOperator,
    region: &StateRegion,
    slit: SlitSpec,
    eps: f64,
) -> Result<SharpnessReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(QrnError::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")));
    }
    let sharp = is_eps_sharp(z, region, slit, eps)?;
    let p = crate::linalg::spectral_projector(z, slit)?;
    let flags = region
        .samples()
        .par_iter()
        .zip(sharp.per_sample.par_iter())
        .map(|(rho, &ok)| Ok(ok && slit_leakage(rho, &p)? < eps))
        .collect::<Result<Vec<_>>>()?;
    Ok(SharpnessReport::from_flags(flags))
}

/// `PρP / Tr(PρP)`.
pub fn restrict_to_slit(rho: &DensityMatrix, p: &Projector) -> Result<DensityMatrix> {
    let inside = rho.sandwich(p.operator())?;
    let weight = inside.trace();
    if !(weight > tol::NULL_WEIGHT) {
        return Err(QrnError::NullRestriction { weight });
    }
    Ok(DensityMatrix::from_mat_trusted(inside.scale(1.0 / weight).as_mat().to_owned()))
}

/// `|(M_Q)² − (M²)_Q| < ε₂` at every sample.
pub fn is_approx_classical(m: &HermitianOperator, region: &StateRegion, eps2: f64) -> Result<bool> {
    let m_sq = m.square();
    let ok = region
        .samples()
        .par_iter()
        .map(|rho| {
            let mean = trace_inner(rho, m)?;
            Ok((mean * mean - trace_inner(rho, &m_sq)?).abs() < eps2)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(ok.into_iter().all(|b| b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{spectral_projector, Grid, C64};
    use crate::states::gaussian_state;

    fn diag(w: &[f64]) -> DensityMatrix {
        DensityMatrix::diagonal(w).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let m = HermitianOperator::diagonal("M", &[5.0, 9.0]);
        let q = evaluate_qrn(&m, &StateRegion::singleton(diag(&[1.0, 0.0]))).unwrap();
        assert_eq!((q.lo, q.hi), (5.0, 5.0));

        let m = HermitianOperator::diagonal("M", &[0.0, 1.0]);
        let u = StateRegion::enclosing(diag(&[1.0, 0.0]), vec![diag(&[0.0, 1.0])], 0).unwrap();
        let q = evaluate_qrn(&m, &u).unwrap();
        assert_eq!((q.lo, q.hi), (0.0, 1.0));
        assert_eq!(q.center_value(), 0.0);
    }

    #[test]
    fn ball_interval_obeys_duality_bound() {
        let u = sample_region(&DensityMatrix::maximally_mixed(2), 0.1, 16, 11).unwrap();
        let m = HermitianOperator::from_real_rows("X", &[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let q = evaluate_qrn(&m, &u).unwrap();
        assert!(q.width() <= 0.2, "{}", q.width());
    }

    #[test]
    fn spread_examples() {
        let m = HermitianOperator::diagonal("M", &[0.0, 1.0]);
        assert_eq!(spread(&m, &diag(&[0.0, 1.0])).unwrap(), 0.0);
        assert!((spread(&m, &diag(&[0.5, 0.5])).unwrap() - 0.5).abs() < 1e-15);
        let g = Grid::new(512, 10.0, 1.0).unwrap();
        let s = spread(&g.position_operator(), &gaussian_state(&g, 1.0, 0.8).unwrap()).unwrap();
        assert!((s - 0.8).abs() < 0.008, "{s}");
    }

    #[test]
    fn sample_region_examples() {
        let c = DensityMatrix::maximally_mixed(3);
        let zero = sample_region(&c, 0.0, 10, 1).unwrap();
        assert_eq!(zero.len(), 1);
        let u = sample_region(&c, 0.2, 12, 5).unwrap();
        assert_eq!(u.len(), 12);
        for s in u.samples() {
            assert!(s.trace_distance(&c).unwrap() < 0.2);
        }
        let again = sample_region(&c, 0.2, 12, 5).unwrap();
        assert_eq!(u.samples(), again.samples());
        assert!(sample_region(&c, 0.2, 0, 5).is_err());
    }

    #[test]
    fn region_spec_regenerates_identically() {
        let u = sample_region(&DensityMatrix::maximally_mixed(2), 0.3, 5, 9).unwrap();
        let json = serde_json::to_string(&u.spec()).unwrap();
        let back: RegionSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.regenerate().unwrap().samples(), u.samples());
    }

    #[test]
    fn sharpness_examples() {
        let z = HermitianOperator::diagonal("Z", &[-1.0, 0.0, 1.0]);
        let slit = SlitSpec::new(-0.5, 0.5).unwrap();
        let eig = StateRegion::singleton(diag(&[0.0, 1.0, 0.0]));
        assert!(is_eps_sharp(&z, &eig, slit, 1e-6).unwrap().all);
        assert!(is_strictly_eps_sharp(&z, &eig, slit, 1e-6).unwrap());
        let outside = StateRegion::singleton(diag(&[0.0, 0.0, 1.0]));
        assert!(!is_eps_sharp(&z, &outside, slit, 0.5).unwrap().all);
    }

    #[test]
    fn gaussian_at_forty_percent_is_sharp() {
        let g = Grid::new(256, 10.0, 1.0).unwrap();
        let (w, eps) = (2.0, 0.04f64);
        let rho = gaussian_state(&g, 0.0, 0.4 * w * eps.sqrt()).unwrap();
        let slit = SlitSpec::new(-1.0, 1.0).unwrap();
        assert!(is_eps_sharp(&g.position_operator(), &StateRegion::singleton(rho), slit, eps).unwrap().all);
    }

    #[test]
    fn coherent_tail_is_sharp_but_not_strict() {
        // Pure state √(1−t)|0⟩ + √t|1.1⟩ with t = ε/4: the outside weight is
        // below ε, but the coherences push Tr|ρ − PρP| = √(t² + 4t(1−t)) ≈ √ε.
        let eps: f64 = 0.02;
        let t = eps / 4.0;
        let z = HermitianOperator::diagonal("Z", &[0.0, 1.1]);
        let rho = DensityMatrix::pure(&[C64::new((1.0 - t).sqrt(), 0.0), C64::new(t.sqrt(), 0.0)]).unwrap();
        let slit = SlitSpec::new(-1.0, 1.05).unwrap();
        let u = StateRegion::singleton(rho.clone());
        assert!(is_eps_sharp(&z, &u, slit, eps).unwrap().all);
        let p = spectral_projector(&z, slit).unwrap();
        let expected = (t * t + 4.0 * t * (1.0 - t)).sqrt();
        assert!((slit_leakage(&rho, &p).unwrap() - expected).abs() < 1e-12);
        assert!(!is_strictly_eps_sharp(&z, &u, slit, eps).unwrap());

        // An incoherent mixture with 2ε outside fails both tests.
        let heavy = StateRegion::singleton(diag(&[1.0 - 2.0 * eps, 2.0 * eps]));
        assert!(!is_strictly_eps_sharp(&z, &heavy, slit, eps).unwrap());
    }

    #[test]
    fn restriction_examples() {
        let p = Projector::basis(2, 0);
        let r = restrict_to_slit(&DensityMatrix::maximally_mixed(2), &p).unwrap();
        assert_eq!(r, DensityMatrix::basis(2, 0));
        let inside = DensityMatrix::basis(2, 0);
        assert_eq!(restrict_to_slit(&inside, &p).unwrap(), inside);
        assert!(matches!(restrict_to_slit(&DensityMatrix::basis(2, 1), &p), Err(QrnError::NullRestriction { .. })));
    }

    #[test]
    fn approx_classical_examples() {
        let m = HermitianOperator::diagonal("M", &[-1.0, 1.0]);
        assert!(is_approx_classical(&m, &StateRegion::singleton(diag(&[1.0, 0.0])), 1e-9).unwrap());
        // 50/50 over a separation of 2: |…| = d²/4 = 1.
        let mix = StateRegion::singleton(diag(&[0.5, 0.5]));
        assert!(!is_approx_classical(&m, &mix, 0.99).unwrap());
        assert!(is_approx_classical(&m, &mix, 1.01).unwrap());
    }

    #[test]
    fn csv_rows() {
        let q = QuantumRealNumber::from_values("M", vec![1.0, 2.5]);
        assert_eq!(q.to_csv(), "sample_index,value\n0,1.000000000000e0\n1,2.500000000000e0\n");
    }
}
