//! Persistence regions and the Lüders update.
//!
//! A persistence region for the projector `P = E_A(I)` is the set of states
//! with `Tr((I−P)ρ) < ε`. The propositions check that values measured on the
//! preparation region persist, that the post-measurement region is close to
//! the Lüders-transformed centre, and that products of commuting observables
//! decompose over the branches of the first measurement.

use faer::Mat;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{QrnError, Result};
use crate::linalg::{
    apply_function, commutator_norm, operator_norm, spectral_decompose, spectral_projector, trace_inner, DensityMatrix,
    HermitianOperator, OpenInterval, Projector, C64,
};
use crate::region::{slit_leakage, StateRegion};
use crate::report::TheoremReport;
use crate::states::random_hermitian;
use crate::tol;

/// Commutator norm below which two observables count as strongly commuting.
pub const COMMUTE_TOL: f64 = 1e-10;

/// `PρP / Tr(Pρ)`.
pub fn luders_transform(rho0: &DensityMatrix, p: &Projector) -> Result<DensityMatrix> {
    let inside = rho0.sandwich(p.operator())?;
    let weight = inside.trace();
    if !(weight > tol::NULL_WEIGHT) {
        return Err(QrnError::ZeroBranch { weight });
    }
    Ok(DensityMatrix::from_mat_trusted(inside.scale(1.0 / weight).as_mat().to_owned()))
}

#[derive(Debug, Clone)]
pub struct PersistenceRegionSpec {
    pub a: HermitianOperator,
    pub interval: OpenInterval,
    pub eps: f64,
    projector: Projector,
    complement: Projector,
}

impl PersistenceRegionSpec {
    pub fn new(a: HermitianOperator, interval: OpenInterval, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(QrnError::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")));
        }
        let projector = spectral_projector(&a, interval)?;
        let complement = projector.complement();
        Ok(Self { a, interval, eps, projector, complement })
    }

    /// Persistence region of an explicit projector.
    pub fn from_projector(p: Projector, eps: f64) -> Result<Self> {
        let interval = OpenInterval::new(0.5, 1.5)?;
        let mut spec = Self::new(p.operator().clone(), interval, eps)?;
        spec.complement = p.complement();
        spec.projector = p;
        Ok(spec)
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    /// `Tr((I−P)ρ)`.
    pub fn outside_mass(&self, rho: &DensityMatrix) -> Result<f64> {
        trace_inner(rho, self.complement.operator())
    }

    pub fn contains(&self, rho: &DensityMatrix) -> Result<bool> {
        Ok(self.outside_mass(rho)? < self.eps)
    }
}

pub fn persistence_region_membership(spec: &PersistenceRegionSpec, rho: &DensityMatrix) -> Result<bool> {
    spec.contains(rho)
}

fn hypothesis(check: &str, detail: impl Into<String>) -> QrnError {
    QrnError::HypothesisNotMet { check: check.into(), detail: detail.into() }
}

/// Margins `Tr(ρP) − (1−ε)`; every sample must lie in the persistence region.
pub fn check_proposition1(spec: &PersistenceRegionSpec, region: &StateRegion) -> Result<TheoremReport> {
    let outside: Vec<f64> = region.samples().par_iter().map(|rho| spec.outside_mass(rho)).collect::<Result<_>>()?;
    if let Some(bad) = outside.iter().position(|&m| !(m < spec.eps)) {
        return Err(hypothesis(
            "proposition 1",
            format!("sample {bad} has outside mass {} >= {}", outside[bad], spec.eps),
        ));
    }
    let margins = outside.iter().map(|m| (1.0 - m) - (1.0 - spec.eps)).collect();
    Ok(TheoremReport::from_margins("proposition1", margins))
}

/// `δ + ε(2−ε)/(1−ε)`.
pub fn proposition2_bound(delta: f64, eps: f64) -> f64 {
    delta + eps * (2.0 - eps) / (1.0 - eps)
}

/// Margins `‖B‖(δ + ε(2−ε)/(1−ε)) − |Tr(ρB) − Tr(ρ₀′B)|` over the samples of
/// `region` that lie within `δ` of `ρ₀` and in the persistence region.
///
/// The centre itself must satisfy `Tr|ρ₀ − Pρ₀P| < ε`: the bound goes through
/// `Tr|ρ − ρ₀′| ≤ Tr|ρ − ρ₀| + Tr|ρ₀ − ρ₀′|` and the second term is only
/// controlled for centres that are strictly sharp themselves.
pub fn check_proposition2(
    rho0: &DensityMatrix,
    spec: &PersistenceRegionSpec,
    delta: f64,
    b: &HermitianOperator,
    region: &StateRegion,
) -> Result<TheoremReport> {
    let p = spec.projector();
    let leak = slit_leakage(rho0, p)?;
    if !(leak < spec.eps) {
        return Err(hypothesis("proposition 2", format!("centre leakage {leak} >= {}", spec.eps)));
    }
    let updated = luders_transform(rho0, p)?;
    let target = trace_inner(&updated, b)?;
    let allowed = operator_norm(b)? * proposition2_bound(delta, spec.eps);
    let margins: Vec<Option<f64>> = region
        .samples()
        .par_iter()
        .map(|rho| {
            if !(rho.trace_distance(rho0)? < delta + tol::BALL_SLACK) || !spec.contains(rho)? {
                return Ok(None);
            }
            Ok(Some(allowed - (trace_inner(rho, b)? - target).abs()))
        })
        .collect::<Result<_>>()?;
    let margins: Vec<f64> = margins.into_iter().flatten().collect();
    if margins.is_empty() {
        return Err(QrnError::EmptyIntersection);
    }
    Ok(TheoremReport::from_margins("proposition2", margins))
}

/// `‖AB − BA‖`.
pub fn commute_check(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    commutator_norm(a, b)
}

/// One branch of a spectral measurement of `A`.
#[derive(Debug, Clone)]
pub struct Branch {
    pub value: f64,
    pub weight: f64,
    /// `Tr(ρ₀′(i) B)` for the Lüders-updated centre.
    pub updated_value: f64,
}

/// Branches of `A` at `ρ₀` with weight above `1e-12`.
pub fn branches(rho0: &DensityMatrix, a: &HermitianOperator, b: &HermitianOperator) -> Result<Vec<Branch>> {
    let dec = spectral_decompose(a)?;
    (0..dec.len())
        .into_par_iter()
        .map(|k| {
            let p = dec.projector(k);
            let weight = trace_inner(rho0, p.operator())?;
            if !(weight > tol::NULL_WEIGHT) {
                return Ok(None);
            }
            let updated_value = trace_inner(&luders_transform(rho0, &p)?, b)?;
            Ok(Some(Branch { value: dec.eigenvalues()[k], weight, updated_value }))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().flatten().collect())
}

/// Symmetrized product `(AB + BA)/2`, equal to `AB` for commuting pairs.
fn jordan_product(a: &HermitianOperator, b: &HermitianOperator) -> Result<HermitianOperator> {
    let ab = a.matmul(b)?;
    let n = a.dim();
    let m = Mat::from_fn(n, n, |i, j| (ab[(i, j)] + ab[(j, i)].conj()) * 0.5);
    HermitianOperator::new(format!("{}{}", a.label(), b.label()), m)
}

#[derive(Debug, Clone)]
pub struct Proposition3Report {
    pub report: TheoremReport,
    pub predicted: f64,
    /// `|Tr(ρ₀AB) − predicted|`.
    pub center_residual: f64,
}

/// Margins `(Σ|aᵢ|)‖B‖ε − |Tr(ρAB) − Σᵢ aᵢ Tr(ρ₀Pᵢ) Tr(ρ₀′(i)B)|`.
pub fn check_proposition3(
    rho0: &DensityMatrix,
    a: &HermitianOperator,
    b: &HermitianOperator,
    region: &StateRegion,
    eps: f64,
) -> Result<Proposition3Report> {
    let norm = commute_check(a, b)?;
    if norm > COMMUTE_TOL {
        return Err(QrnError::NonCommuting { norm });
    }
    let br = branches(rho0, a, b)?;
    let predicted: f64 = br.iter().map(|x| x.value * x.weight * x.updated_value).sum();
    let abs_sum: f64 = spectral_decompose(a)?.eigenvalues().iter().map(|v| v.abs()).sum();
    let allowed = abs_sum * operator_norm(b)? * eps;
    let ab = jordan_product(a, b)?;
    let center_residual = (trace_inner(rho0, &ab)? - predicted).abs();
    let margins = region
        .samples()
        .par_iter()
        .map(|rho| Ok(allowed - (trace_inner(rho, &ab)? - predicted).abs()))
        .collect::<Result<_>>()?;
    Ok(Proposition3Report { report: TheoremReport::from_margins("proposition3", margins), predicted, center_residual })
}

/// `|Tr(ρPQ) − Tr(ρQP)|`.
pub fn order_asymmetry(rho: &DensityMatrix, p: &Projector, q: &Projector) -> Result<f64> {
    let pq = p.operator().matmul(q.operator())?;
    let qp = q.operator().matmul(p.operator())?;
    let r = rho.as_mat();
    let n = rho.dim();
    let mut z = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            z += r[(i, k)] * (pq[(k, i)] - qp[(k, i)]);
        }
    }
    Ok(z.norm())
}

/// Commuting pair `(f(H), g(H))` with `H` random and `f`, `g` fixed
/// non-injective polynomials, so both have degenerate eigenspaces of `H`
/// only through rounding: the branches are those of `H` itself.
pub fn random_commuting_pair(dim: usize, rng: &mut impl Rng) -> Result<(HermitianOperator, HermitianOperator)> {
    let h = random_hermitian(dim, rng);
    let scale = operator_norm(&h)?;
    let h = h.scale(1.0 / scale);
    let levels = (dim / 4).max(2) as f64;
    let a = apply_function(|x| ((x + 1.0) * levels / 2.0).floor().min(levels - 1.0) / levels, &h)?.with_label("A");
    let b = apply_function(|x| x * x - 0.5 * x, &h)?.with_label("B");
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collimation::strictly_sharp_state;
    use crate::region::sample_region;
    use crate::states::{random_density, rng_for};

    fn plus() -> DensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DensityMatrix::pure(&[C64::new(s, 0.0), C64::new(s, 0.0)]).unwrap()
    }

    #[test]
    fn transform_examples() {
        let p = Projector::basis(2, 0);
        let out = luders_transform(&DensityMatrix::maximally_mixed(2), &p).unwrap();
        assert!((out.entry(0, 0).re - 1.0).abs() < 1e-15 && out.entry(1, 1).norm() < 1e-15);
        let out = luders_transform(&plus(), &p).unwrap();
        assert!(out.trace_distance(&DensityMatrix::basis(2, 0)).unwrap() < 1e-12);
        assert!(matches!(luders_transform(&DensityMatrix::basis(2, 1), &p), Err(QrnError::ZeroBranch { .. })));
    }

    #[test]
    fn transform_is_idempotent_and_supported_in_range() {
        let mut rng = rng_for(5, 0);
        let rho = random_density(6, 4, &mut rng);
        let p = Projector::new(HermitianOperator::diagonal("P", &[1.0, 0.0, 1.0, 1.0, 0.0, 0.0])).unwrap();
        let once = luders_transform(&rho, &p).unwrap();
        let twice = luders_transform(&once, &p).unwrap();
        assert!(once.trace_distance(&twice).unwrap() < 1e-12);
        assert!((once.trace() - 1.0).abs() < 1e-12);
        assert!(slit_leakage(&once, &p).unwrap() < 1e-12);
    }

    #[test]
    fn membership_is_strict() {
        let spec = PersistenceRegionSpec::from_projector(Projector::basis(2, 0), 0.1).unwrap();
        assert!(spec.contains(&DensityMatrix::basis(2, 0)).unwrap());
        assert!(!spec.contains(&DensityMatrix::basis(2, 1)).unwrap());
        let boundary = DensityMatrix::diagonal(&[0.9, 0.1]).unwrap();
        assert!(!persistence_region_membership(&spec, &boundary).unwrap());
    }

    #[test]
    fn spectral_spec_uses_open_interval() {
        let a = HermitianOperator::diagonal("A", &[0.0, 1.0, 2.0, 3.0]);
        let spec = PersistenceRegionSpec::new(a, OpenInterval::new(0.5, 2.5).unwrap(), 0.1).unwrap();
        assert_eq!(spec.projector().rank(), 2);
    }

    #[test]
    fn proposition1_requires_membership() {
        let spec = PersistenceRegionSpec::from_projector(Projector::basis(3, 0), 0.1).unwrap();
        let good = StateRegion::singleton(DensityMatrix::diagonal(&[0.95, 0.05, 0.0]).unwrap());
        let r = check_proposition1(&spec, &good).unwrap();
        assert!(r.passed && (r.worst_margin - 0.05).abs() < 1e-12);
        let bad = StateRegion::singleton(DensityMatrix::maximally_mixed(3));
        assert!(matches!(check_proposition1(&spec, &bad), Err(QrnError::HypothesisNotMet { .. })));
    }

    #[test]
    fn proposition2_bound_value() {
        assert!((proposition2_bound(0.05, 0.1) - (0.05 + 0.19 / 0.9)).abs() < 1e-15);
        assert!(proposition2_bound(0.0, 1e-12) < 3e-12);
    }

    #[test]
    fn proposition2_sweep_qubit_and_d16() {
        for (dim, rank) in [(2usize, 1usize), (16, 8)] {
            let diag: Vec<f64> = (0..dim).map(|k| if k < rank { 1.0 } else { 0.0 }).collect();
            let p = Projector::new(HermitianOperator::diagonal("P", &diag)).unwrap();
            let spec = PersistenceRegionSpec::from_projector(p.clone(), 0.01).unwrap();
            let b = random_hermitian(dim, &mut rng_for(1, 1));
            for seed in 0..10 {
                let mut rng = rng_for(seed, 3);
                let rho0 = strictly_sharp_state(&p, 0.01, 0.5, &mut rng).unwrap();
                let region = sample_region(&rho0, 0.05, 32, seed).unwrap();
                let r = check_proposition2(&rho0, &spec, 0.05, &b, &region).unwrap();
                assert!(r.passed, "dim {dim} seed {seed}: {}", r.worst_margin);
            }
        }
    }

    #[test]
    fn proposition2_rejects_leaky_centre() {
        let spec = PersistenceRegionSpec::from_projector(Projector::basis(2, 0), 0.01).unwrap();
        let b = HermitianOperator::identity(2);
        let region = StateRegion::singleton(plus());
        assert!(matches!(
            check_proposition2(&plus(), &spec, 0.05, &b, &region),
            Err(QrnError::HypothesisNotMet { .. })
        ));
    }

    #[test]
    fn proposition3_center_identity() {
        let a = HermitianOperator::diagonal("A", &[1.0, 2.0, 2.0, -1.0]);
        let rho0 = random_density(4, 4, &mut rng_for(8, 0));
        let r = check_proposition3(&rho0, &a, &a, &StateRegion::singleton(rho0.clone()), 0.01).unwrap();
        assert!(r.center_residual <= 1e-10);
        let id = HermitianOperator::identity(4);
        let b = random_hermitian(4, &mut rng_for(8, 1));
        let r = check_proposition3(&rho0, &id, &b, &StateRegion::singleton(rho0.clone()), 0.01).unwrap();
        assert!((r.predicted - trace_inner(&rho0, &b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn proposition3_random_commuting_pairs() {
        for seed in 0..5 {
            let mut rng = rng_for(seed, 4);
            let (a, b) = random_commuting_pair(16, &mut rng).unwrap();
            assert!(commute_check(&a, &b).unwrap() <= COMMUTE_TOL);
            let rho0 = random_density(16, 4, &mut rng);
            let region = sample_region(&rho0, 0.01, 16, seed).unwrap();
            let r = check_proposition3(&rho0, &a, &b, &region, 0.01).unwrap();
            assert!(r.report.passed && r.center_residual <= 1e-10);
        }
    }

    #[test]
    fn proposition3_rejects_non_commuting() {
        let x = HermitianOperator::from_real_rows("X", &[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let z = HermitianOperator::diagonal("Z", &[1.0, -1.0]);
        assert!(matches!(
            check_proposition3(&plus(), &x, &z, &StateRegion::singleton(plus()), 0.1),
            Err(QrnError::NonCommuting { .. })
        ));
    }

    #[test]
    fn commutators() {
        let a = HermitianOperator::diagonal("A", &[1.0, 2.0]);
        let b = HermitianOperator::diagonal("B", &[3.0, -1.0]);
        assert_eq!(commute_check(&a, &b).unwrap(), 0.0);
        let g = crate::linalg::Grid::new(64, 8.0, 1.0).unwrap();
        let (q, p) = (g.position_operator(), g.momentum_operator());
        // Away from the wrap-around the commutator acts as iħ on smooth packets.
        let psi = crate::states::gaussian_wavefunction(&g, 0.0, 1.0, 0.0).unwrap();
        let qp = q.matmul(&p).unwrap();
        let pq = p.matmul(&q).unwrap();
        let n = g.n;
        let mut amp = 0.0;
        for i in 0..n {
            let mut z = C64::new(0.0, 0.0);
            for k in 0..n {
                z += (qp[(i, k)] - pq[(i, k)]) * psi[k];
            }
            amp += (z - C64::new(0.0, 1.0) * psi[i]).norm_sqr();
        }
        assert!(amp.sqrt() < 1e-3, "{amp}");
    }

    #[test]
    fn order_independence_for_commuting_pairs() {
        let mut rng = rng_for(2, 0);
        let (a, b) = random_commuting_pair(8, &mut rng).unwrap();
        let rho = random_density(8, 8, &mut rng);
        let pa = spectral_decompose(&a).unwrap().projectors();
        let pb = spectral_decompose(&b).unwrap().projectors();
        for p in &pa {
            for q in &pb {
                assert!(order_asymmetry(&rho, p, q).unwrap() <= 1e-10);
            }
        }
    }
}
