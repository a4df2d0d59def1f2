//! Dichotomic experiments, the N-copy average operator and the frequency
//! interpretation of outcome probabilities.
//!
//! Sequential trials stand in for a measurement on `N` identical copies: the
//! number of favourable outcomes is drawn from `Binomial(N, p)` with a
//! per-seed ChaCha stream, and a run is "in band" when the frequency lies
//! within `δ = N^{−(1−λ)/2}` of `p`.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QrnError, Result};
use crate::linalg::{eigvalsh, tensor, trace_inner, DensityMatrix, HermitianOperator, Projector};
use crate::region::StateRegion;
use crate::report::TheoremReport;
use crate::states::rng_for;
use crate::tol;

/// RNG stream reserved for frequency simulation.
const FREQUENCY_STREAM: u64 = 0x5e11;

#[derive(Debug, Clone)]
pub struct DichotomicExperiment {
    pub p1: Projector,
    pub rho0: DensityMatrix,
    /// Trace-norm radius of the preparation region.
    pub region_radius: f64,
    pub n: u64,
    /// Detector half-resolution.
    pub r: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl DichotomicExperiment {
    pub fn new(p1: Projector, rho0: DensityMatrix, n: u64, seed: u64) -> Result<Self> {
        if p1.dim() != rho0.dim() {
            return Err(QrnError::DimensionMismatch { expected: p1.dim(), found: rho0.dim() });
        }
        Ok(Self { p1, rho0, region_radius: 0.0, n, r: 0.05, lambda: 0.5, seed })
    }

    pub fn p0(&self) -> Projector {
        self.p1.complement()
    }

    pub fn p_true(&self) -> Result<f64> {
        outcome_probability(&self.rho0, &self.p1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub seed: u64,
    pub p_true: f64,
    pub successes: u64,
    pub n: u64,
    pub frequency: f64,
    pub chebyshev_delta: f64,
    pub in_band: bool,
}

/// `Tr(ρP)`, clamped to `[0, 1]` against rounding.
pub fn outcome_probability(rho: &DensityMatrix, p: &Projector) -> Result<f64> {
    Ok(trace_inner(rho, p.operator())?.clamp(0.0, 1.0))
}

/// Band half-width `N^{−(1−λ)/2}`.
pub fn band_delta(n: u64, lambda: f64) -> f64 {
    (n as f64).powf(-(1.0 - lambda) / 2.0)
}

fn validate_trials(n: u64, lambda: f64) -> Result<()> {
    if n == 0 {
        return Err(QrnError::InvalidArgument("at least one trial is required".into()));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(QrnError::InvalidArgument(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    Ok(())
}

/// Draws `J ~ Binomial(N, p)` for one seed.
pub fn simulate_binomial(p: f64, n: u64, lambda: f64, seed: u64) -> Result<FrequencyReport> {
    validate_trials(n, lambda)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(QrnError::InvalidArgument(format!("probability {p} outside [0, 1]")));
    }
    let mut rng = rng_for(seed, FREQUENCY_STREAM);
    let successes = Binomial::new(n, p).map_err(|e| QrnError::InvalidArgument(e.to_string()))?.sample(&mut rng);
    let frequency = successes as f64 / n as f64;
    let delta = band_delta(n, lambda);
    Ok(FrequencyReport {
        seed,
        p_true: p,
        successes,
        n,
        frequency,
        chebyshev_delta: delta,
        in_band: (frequency - p).abs() <= delta,
    })
}

pub fn simulate_frequencies(exp: &DichotomicExperiment) -> Result<FrequencyReport> {
    simulate_binomial(exp.p_true()?, exp.n, exp.lambda, exp.seed)
}

/// One run per seed in `seeds`, evaluated in parallel.
pub fn frequency_sweep(p: f64, n: u64, lambda: f64, seeds: std::ops::Range<u64>) -> Result<Vec<FrequencyReport>> {
    seeds.into_par_iter().map(|s| simulate_binomial(p, n, lambda, s)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub runs: usize,
    pub outside_band: usize,
    pub mean_frequency: f64,
    /// Expected number of runs outside the band according to Chebyshev.
    pub chebyshev_expected_outside: f64,
}

pub fn summarize(reports: &[FrequencyReport]) -> SweepSummary {
    let runs = reports.len();
    let outside_band = reports.iter().filter(|r| !r.in_band).count();
    let mean_frequency = reports.iter().map(|r| r.frequency).sum::<f64>() / runs.max(1) as f64;
    let chebyshev_expected_outside = reports
        .iter()
        .map(|r| chebyshev_bound(r.p_true * (1.0 - r.p_true) / r.n as f64, r.chebyshev_delta).min(1.0))
        .sum();
    SweepSummary { runs, outside_band, mean_frequency, chebyshev_expected_outside }
}

/// `Q̂ = (1/N) Σᵢ I ⊗ … ⊗ P₁ ⊗ … ⊗ I`, built as `S_N = S_{N−1} ⊗ I + I ⊗ P₁`.
pub fn build_average_operator(p1: &Projector, n: usize) -> Result<HermitianOperator> {
    if n == 0 {
        return Err(QrnError::InvalidArgument("at least one copy is required".into()));
    }
    let d = p1.dim();
    let total = (d as f64).powi(n as i32);
    if total > tol::MAX_DIM as f64 {
        return Err(QrnError::DimensionTooLarge { dim: total.min(usize::MAX as f64) as usize, cap: tol::MAX_DIM });
    }
    let p = p1.operator();
    let id = HermitianOperator::identity(d);
    let mut sum = p.clone();
    let mut id_k = id.clone();
    for _ in 1..n {
        sum = tensor(&sum, &id)?.add(&tensor(&id_k, p)?)?;
        id_k = tensor(&id_k, &id)?;
    }
    Ok(sum.scale(1.0 / n as f64).with_label(format!("average[{n}]")))
}

/// Sorted distinct eigenvalues of `a`, merging values closer than `tol`.
pub fn distinct_eigenvalues(a: &HermitianOperator, tol: f64) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = Vec::new();
    for v in eigvalsh(&a.as_mat().to_owned())? {
        match out.last() {
            Some(&last) if (v - last).abs() <= tol => {}
            _ => out.push(v),
        }
    }
    Ok(out)
}

/// `variance / δ²`; zero when the variance is zero.
pub fn chebyshev_bound(variance: f64, delta: f64) -> f64 {
    if variance == 0.0 {
        return 0.0;
    }
    variance / (delta * delta)
}

/// `⌈pq/(εR²)⌉`, with values within `1e-9` relative of an integer rounded to it.
pub fn required_copies(p: f64, eps: f64, r: f64) -> Result<u64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(QrnError::InvalidArgument(format!("degenerate probability {p}")));
    }
    if !(eps > 0.0 && r > 0.0) {
        return Err(QrnError::InvalidArgument(format!("eps and R must be positive, got {eps} and {r}")));
    }
    let x = p * (1.0 - p) / (eps * r * r);
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        return Ok(nearest as u64);
    }
    Ok(x.ceil() as u64)
}

/// Margins `ε − |Tr(ρPᵢ) − Tr(ρ₀Pᵢ)|` over both outcomes, `ρ₀` the region centre.
pub fn check_theorem5(region: &StateRegion, p1: &Projector, eps: f64) -> Result<TheoremReport> {
    let p0 = p1.complement();
    let c1 = outcome_probability(region.center(), p1)?;
    let c0 = outcome_probability(region.center(), &p0)?;
    let margins: Vec<Vec<f64>> = region
        .samples()
        .par_iter()
        .map(|rho| {
            let d1 = (outcome_probability(rho, p1)? - c1).abs();
            let d0 = (outcome_probability(rho, &p0)? - c0).abs();
            Ok(vec![eps - d1, eps - d0])
        })
        .collect::<Result<_>>()?;
    Ok(TheoremReport::from_margins("theorem5", margins.into_iter().flatten().collect()))
}

/// Total-variation distance between `Binomial(N, p)` and its continuity-
/// corrected normal approximation. Diagnostic only.
pub fn binomial_normal_tv(p: f64, n: u64) -> f64 {
    use statrs::distribution::{Binomial as B, ContinuousCDF, Discrete, Normal};
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    let (Ok(bin), Ok(normal)) = (B::new(p, n), Normal::new(n as f64 * p, (n as f64 * p * (1.0 - p)).sqrt())) else {
        return f64::NAN;
    };
    let mut tv = 0.0;
    let mut mass = 0.0;
    for j in 0..=n {
        let x = j as f64;
        let q = normal.cdf(x + 0.5) - normal.cdf(x - 0.5);
        tv += (bin.pmf(j) - q).abs();
        mass += q;
    }
    0.5 * (tv + (1.0 - mass).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::region::sample_region;
    use crate::states::random_density;

    fn plus() -> DensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DensityMatrix::pure(&[C64::new(s, 0.0), C64::new(s, 0.0)]).unwrap()
    }

    #[test]
    fn outcome_probabilities() {
        let p = Projector::basis(2, 0);
        assert!((outcome_probability(&DensityMatrix::basis(2, 0), &p).unwrap() - 1.0).abs() < 1e-15);
        assert!((outcome_probability(&plus(), &p).unwrap() - 0.5).abs() < 1e-15);
        let rho = random_density(5, 3, &mut rng_for(1, 0));
        let p = Projector::basis(5, 2);
        let total = outcome_probability(&rho, &p).unwrap() + outcome_probability(&rho, &p.complement()).unwrap();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_probabilities_are_deterministic() {
        for seed in 0..20 {
            assert_eq!(simulate_binomial(0.0, 100, 0.5, seed).unwrap().frequency, 0.0);
            assert_eq!(simulate_binomial(1.0, 100, 0.5, seed).unwrap().frequency, 1.0);
        }
    }

    #[test]
    fn sweep_mean_and_reproducibility() {
        let runs = frequency_sweep(0.3, 10_000, 0.5, 0..200).unwrap();
        let s = summarize(&runs);
        assert!((s.mean_frequency - 0.3).abs() <= 0.005);
        assert_eq!(runs, frequency_sweep(0.3, 10_000, 0.5, 0..200).unwrap());
        assert!((runs[0].chebyshev_delta - 0.1).abs() < 1e-15);
    }

    #[test]
    fn experiment_uses_center_probability() {
        let exp = DichotomicExperiment::new(Projector::basis(2, 0), plus(), 1000, 4).unwrap();
        let r = simulate_frequencies(&exp).unwrap();
        assert!((r.p_true - 0.5).abs() < 1e-15);
        assert_eq!(r.successes, simulate_binomial(r.p_true, 1000, 0.5, 4).unwrap().successes);
    }

    #[test]
    fn average_operator_spectra() {
        let p = Projector::basis(2, 1);
        let one = build_average_operator(&p, 1).unwrap();
        assert!(one.sub(p.operator()).unwrap().max_entry() < 1e-15);
        let two = build_average_operator(&p, 2).unwrap();
        let ev = eigvalsh(&two.as_mat().to_owned()).unwrap();
        for (a, b) in ev.iter().zip([0.0, 0.5, 0.5, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let eight =
            distinct_eigenvalues(&build_average_operator(&Projector::onto(&plus_vec()).unwrap(), 8).unwrap(), 1e-6)
                .unwrap();
        assert_eq!(eight.len(), 9);
        for (j, v) in eight.iter().enumerate() {
            assert!((v - j as f64 / 8.0).abs() < 1e-9);
        }
        assert!(matches!(build_average_operator(&p, 13), Err(QrnError::DimensionTooLarge { .. })));
    }

    fn plus_vec() -> Vec<C64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        vec![C64::new(s, 0.0), C64::new(s, 0.0)]
    }

    #[test]
    fn chebyshev_and_copies() {
        assert_eq!(chebyshev_bound(0.0, 0.1), 0.0);
        assert!(chebyshev_bound(0.25, 1e12) < 1e-20);
        assert!((chebyshev_bound(0.25 / 100.0, 0.1) - 0.25).abs() < 1e-12);
        assert_eq!(required_copies(0.5, 0.01, 0.05).unwrap(), 10_000);
        assert_eq!(required_copies(1e-15, 0.01, 0.05).unwrap(), 0);
        assert!(required_copies(0.0, 0.01, 0.05).is_err());
        // Back-substitution: at the returned N the Chebyshev mass outside ±R is at most ε.
        let (p, eps, r) = (0.3, 0.02, 0.04);
        let n = required_copies(p, eps, r).unwrap();
        assert!(chebyshev_bound(p * (1.0 - p) / n as f64, r) <= eps + 1e-12);
        assert!(chebyshev_bound(p * (1.0 - p) / (n - 1) as f64, r) > eps);
    }

    #[test]
    fn theorem5_on_balls() {
        let p = Projector::basis(4, 1);
        let rho0 = random_density(4, 2, &mut rng_for(2, 0));
        let single = check_theorem5(&StateRegion::singleton(rho0.clone()), &p, 0.05).unwrap();
        assert_eq!(single.worst_margin, 0.05);
        let region = sample_region(&rho0, 0.05, 32, 9).unwrap();
        assert!(check_theorem5(&region, &p, 0.05).unwrap().passed);
    }

    #[test]
    fn normal_approximation_improves_with_n() {
        let a = binomial_normal_tv(0.3, 20);
        let b = binomial_normal_tv(0.3, 2000);
        assert!(b < a && b < 0.01, "{a} {b}");
    }
}
