//! End-to-end verification suite.
//!
//! Each criterion is a function of a base seed returning [`CheckRecord`]s;
//! records carry no timing so the serialized body is a pure function of the
//! seed and the library version. Runtimes are measured separately and
//! compared against per-criterion budgets.

use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::born;
use crate::collimation::{self, SharpRegionConfig};
use crate::dynamics::{self, ForceField, WindowConfig};
use crate::error::Result;
use crate::linalg::{spectral_projector, trace_inner, Grid, HermitianOperator, OpenInterval, Projector};
use crate::luders;
use crate::pointer;
use crate::region::{sample_region, SlitSpec, StateRegion};
use crate::report::{CheckRecord, TheoremReport};
use crate::states::{
    gaussian_state, point_mixture, random_density, random_hermitian, random_pure, random_unit_vector, rng_for,
};

pub const DEFAULT_SEED: u64 = 20_240_917;

pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    pub budget: Duration,
    run: fn(u64) -> Result<Vec<CheckRecord>>,
}

impl Criterion {
    pub fn run(&self, seed: u64) -> CriterionOutcome {
        let start = Instant::now();
        let records = match (self.run)(seed) {
            Ok(r) => r,
            Err(e) => {
                vec![CheckRecord::new(format!("c{:02}/error", self.id), f64::NAN, false).with_detail(e.to_string())]
            }
        };
        let elapsed = start.elapsed();
        CriterionOutcome { id: self.id, name: self.name, budget: self.budget, elapsed, records }
    }
}

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: &'static str,
    pub budget: Duration,
    pub elapsed: Duration,
    pub records: Vec<CheckRecord>,
}

impl CriterionOutcome {
    pub fn checks_passed(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.passed)
    }

    pub fn within_budget(&self) -> bool {
        self.elapsed <= self.budget
    }

    pub fn passed(&self) -> bool {
        self.checks_passed() && self.within_budget()
    }

    /// Smallest margin among the records.
    pub fn worst_margin(&self) -> f64 {
        self.records.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

/// Criteria 1–12. Determinism is checked by [`determinism_record`] over two
/// runs of these.
pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, name: "theorem 1 spread bound", budget: secs(10), run: theorem1 },
        Criterion { id: 2, name: "theorem 2 width product", budget: secs(5), run: theorem2 },
        Criterion { id: 3, name: "theorem 3 and proposition 1", budget: secs(10), run: theorem3 },
        Criterion { id: 4, name: "corollary 1 trace distance", budget: secs(10), run: corollary1 },
        Criterion { id: 5, name: "theorem 4 projected observables", budget: secs(20), run: theorem4 },
        Criterion { id: 6, name: "theorem 5 Born frequencies", budget: secs(30), run: theorem5 },
        Criterion { id: 7, name: "average operator spectrum", budget: secs(5), run: average_spectrum },
        Criterion { id: 8, name: "propositions 2 and 3", budget: secs(20), run: propositions23 },
        Criterion { id: 9, name: "proposition 4 registration", budget: secs(20), run: proposition4 },
        Criterion { id: 10, name: "theorem 6 Ehrenfest windows", budget: secs(30), run: theorem6 },
        Criterion { id: 11, name: "harmonic trajectory", budget: secs(30), run: harmonic_trajectory },
        Criterion { id: 12, name: "sharpening equation", budget: secs(1), run: sharpening },
    ]
}

pub fn run_all(seed: u64) -> Vec<CriterionOutcome> {
    criteria().iter().map(|c| c.run(seed)).collect()
}

/// Records of every outcome, in order.
pub fn records(outcomes: &[CriterionOutcome]) -> Vec<CheckRecord> {
    outcomes.iter().flat_map(|o| o.records.iter().cloned()).collect()
}

/// Serialized records, the byte-comparable body of a run.
pub fn body(outcomes: &[CriterionOutcome]) -> Result<String> {
    Ok(serde_json::to_string(&records(outcomes))?)
}

/// Margin `0` when the two bodies agree byte for byte, `−1` otherwise.
pub fn determinism_record(first: &str, second: &str) -> CheckRecord {
    let same = first.as_bytes() == second.as_bytes();
    CheckRecord::new("c13/determinism", if same { 0.0 } else { -1.0 }, same)
        .with_detail(format!("{} body bytes", first.len()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub seed: u64,
    pub records: Vec<CheckRecord>,
}

fn record(id: &str, report: &TheoremReport, detail: impl Into<String>) -> CheckRecord {
    CheckRecord::new(id, report.worst_margin, report.passed).with_detail(detail)
}

fn slit_around(mid: f64, w: f64) -> Result<SlitSpec> {
    SlitSpec::new(mid - w / 2.0, mid + w / 2.0)
}

/// Seeded sharp regions on the collimation grid.
fn collimation_regions(
    grid: &Grid,
    seed: u64,
    count: usize,
    eps_set: &[f64],
) -> Result<Vec<(StateRegion, SlitSpec, f64)>> {
    (0..count)
        .map(|k| {
            let eps = eps_set[k % eps_set.len()];
            let mut rng = rng_for(seed, 100 + k as u64);
            let slit = slit_around(rng.random_range(-4.0..4.0), rng.random_range(3.0..5.0))?;
            let region = collimation::sharp_region(grid, slit, eps, SharpRegionConfig::default(), seed ^ (k as u64))?;
            Ok((region, slit, eps))
        })
        .collect()
}

fn theorem1(seed: u64) -> Result<Vec<CheckRecord>> {
    let grid = Grid::new(256, 10.0, 1.0)?;
    let z = grid.position_operator();
    let mut out = Vec::new();
    for eps in [0.01f64, 0.1] {
        let regions = collimation_regions(&grid, seed ^ eps.to_bits(), 25, &[eps])?;
        let reports: Vec<TheoremReport> =
            regions.iter().map(|(r, s, e)| collimation::check_theorem1(&z, r, *s, *e)).collect::<Result<_>>()?;
        let merged = TheoremReport::merge("theorem1", &reports);
        let n = merged.per_sample_margin.len();
        out.push(record(&format!("c01/theorem1/eps={eps}"), &merged, format!("25 regions; {n} samples")));
    }
    Ok(out)
}

fn theorem2(seed: u64) -> Result<Vec<CheckRecord>> {
    let grid = Grid::new(256, 10.0, 1.0)?;
    let (z, p) = (grid.position_operator(), grid.momentum_operator());
    let mut rng = rng_for(seed, 2);
    let mut out = Vec::new();
    for eps in [0.01, 0.1, 0.5] {
        let mut reports = Vec::new();
        let mut worst_ratio = f64::INFINITY;
        for _ in 0..4 {
            let rho = gaussian_state(&grid, rng.random_range(-2.0..2.0), rng.random_range(0.5..1.5))?;
            let region = StateRegion::singleton(rho);
            let zs = collimation::tightest_slit(&z, &region, eps)?;
            let ps = collimation::tightest_slit(&p, &region, eps)?;
            worst_ratio = worst_ratio.min(zs.width() * ps.width() / collimation::theorem2_bound(eps, grid.hbar));
            reports.push(collimation::check_theorem2_with(&z, &p, &region, zs, ps, eps, grid.hbar, 0.01)?);
        }
        let merged = TheoremReport::merge("theorem2", &reports);
        out.push(record(&format!("c02/theorem2/eps={eps}"), &merged, format!("min product/bound {worst_ratio:.12}")));
    }
    Ok(out)
}

fn theorem3(seed: u64) -> Result<Vec<CheckRecord>> {
    let grid = Grid::new(256, 10.0, 1.0)?;
    let z = grid.position_operator();
    let regions = collimation_regions(&grid, seed ^ 3, 20, &[0.01, 0.1])?;
    let mut t3 = Vec::new();
    let mut p1 = Vec::new();
    for (region, slit, eps) in &regions {
        t3.push(collimation::check_theorem3(&z, region, *slit, *eps)?);
        let spec = luders::PersistenceRegionSpec::new(z.clone(), *slit, *eps)?;
        p1.push(luders::check_proposition1(&spec, region)?);
    }
    let mut sat = Vec::new();
    for eps in [0.01, 0.05, 0.1, 0.2] {
        for steps in [3, 6, 10] {
            for x in [0.0, 2.5] {
                let (rho, slit) = collimation::chebyshev_saturating_state(&grid, x, steps, eps)?;
                sat.push(collimation::check_theorem3(&z, &StateRegion::singleton(rho), slit, eps)?);
            }
        }
    }
    let t3 = TheoremReport::merge("theorem3", &t3);
    let p1 = TheoremReport::merge("proposition1", &p1);
    let sat = TheoremReport::merge("theorem3", &sat);
    Ok(vec![
        record("c03/theorem3/regions", &t3, format!("{} samples", t3.per_sample_margin.len())),
        record("c03/theorem3/chebyshev-saturating", &sat, format!("{} states", sat.per_sample_margin.len())),
        record("c03/proposition1/regions", &p1, format!("{} samples", p1.per_sample_margin.len())),
    ])
}

fn strict_regions(grid: &Grid, seed: u64, count: usize, eps_set: &[f64]) -> Result<Vec<(StateRegion, SlitSpec, f64)>> {
    let z = grid.position_operator();
    let cfg = SharpRegionConfig { gaussians: 3, point_mixtures: 1, perturbations: 1, perturbation_radius: 1e-6 };
    (0..count)
        .map(|k| {
            let eps = eps_set[k % eps_set.len()];
            let mut rng = rng_for(seed, 400 + k as u64);
            let slit = slit_around(rng.random_range(-3.0..3.0), rng.random_range(2.0..4.0))?;
            let region = collimation::sharp_region(grid, slit, eps, cfg, seed ^ (k as u64))?;
            Ok((collimation::strict_subregion(&z, &region, slit, eps)?, slit, eps))
        })
        .collect()
}

fn corollary1(seed: u64) -> Result<Vec<CheckRecord>> {
    let grid = Grid::new(128, 8.0, 1.0)?;
    let z = grid.position_operator();
    let eps_set = [0.05, 0.1, 0.2];
    let regions = strict_regions(&grid, seed ^ 4, 100, &eps_set)?;
    let mut out = Vec::new();
    for eps in eps_set {
        let mut margins = Vec::new();
        for (region, slit, _) in regions.iter().filter(|r| r.2 == eps) {
            let p = spectral_projector(&z, *slit)?;
            for rho in region.samples() {
                margins.push(collimation::check_corollary1(rho, &p, eps)?);
            }
        }
        let rep = TheoremReport::from_margins("corollary1", margins);
        out.push(record(
            &format!("c04/corollary1/eps={eps}"),
            &rep,
            format!("bound {:.12}; {} samples", collimation::corollary1_bound(eps), rep.per_sample_margin.len()),
        ));
    }
    Ok(out)
}

fn theorem4(seed: u64) -> Result<Vec<CheckRecord>> {
    let grid = Grid::new(128, 8.0, 1.0)?;
    let z = grid.position_operator();
    let regions = strict_regions(&grid, seed ^ 5, 20, &[0.05, 0.1])?;
    let mut rng = rng_for(seed, 5);
    let ms: Vec<HermitianOperator> = (0..20).map(|_| random_hermitian(grid.n, &mut rng)).collect();
    let mut bounded = Vec::new();
    let mut unbounded = Vec::new();
    for (region, slit, eps) in &regions {
        bounded.extend(collimation::check_theorem4_family(&z, &ms, region, *slit, *eps)?);
        if collimation::unbounded_precondition(*slit, *eps) {
            unbounded.push(collimation::check_theorem4_position(&z, region, *slit, *eps)?);
        }
    }
    let in_grid = unbounded.len();
    let fine = Grid::new(512, 8.0, 1.0)?;
    let zf = fine.position_operator();
    let cfg = SharpRegionConfig { gaussians: 2, point_mixtures: 2, perturbations: 0, perturbation_radius: 0.0 };
    for (k, (lo, hi, eps)) in [(6.0, 6.5, 0.1), (-6.5, -6.0, 0.1), (5.0, 5.5, 0.12)].into_iter().enumerate() {
        let slit = SlitSpec::new(lo, hi)?;
        let region = collimation::sharp_region(&fine, slit, eps, cfg, seed ^ (50 + k as u64))?;
        let region = collimation::strict_subregion(&zf, &region, slit, eps)?;
        unbounded.push(collimation::check_theorem4_position(&zf, &region, slit, eps)?);
    }
    let bounded = TheoremReport::merge("theorem4", &bounded);
    let unbounded = TheoremReport::merge("theorem4-position", &unbounded);
    Ok(vec![
        record("c05/theorem4/bounded", &bounded, "20 observables x 20 regions"),
        record(
            "c05/theorem4/unbounded-position",
            &unbounded,
            format!("{in_grid} random regions and 3 far slits meet the precondition"),
        ),
    ])
}

fn theorem5(seed: u64) -> Result<Vec<CheckRecord>> {
    let (p, n, lambda) = (0.3, 10_000, 0.5);
    let runs = born::frequency_sweep(p, n, lambda, seed..seed + 200)?;
    let s = born::summarize(&runs);
    let mut out = vec![
        CheckRecord::from_margin("c06/born/outside-band", 5.0 - s.outside_band as f64).with_detail(format!(
            "{} of 200 outside ±{}; Chebyshev expects at most {:.6}",
            s.outside_band,
            born::band_delta(n, lambda),
            s.chebyshev_expected_outside
        )),
        CheckRecord::from_margin("c06/born/mean-frequency", 0.005 - (s.mean_frequency - p).abs())
            .with_detail(format!("mean {:.12}", s.mean_frequency)),
    ];
    let mut rng = rng_for(seed, 6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let psi = random_unit_vector(4, &mut rng);
        let p1 = Projector::basis(4, 1);
        let born_rule = psi[1].norm_sqr();
        let rho = crate::linalg::DensityMatrix::pure(&psi)?;
        worst = worst.max((born::outcome_probability(&rho, &p1)? - born_rule).abs());
    }
    out.push(CheckRecord::from_margin("c06/born/pure-state-endpoint", 1e-12 - worst));
    let rho0 = random_density(4, 2, &mut rng);
    let p1 = Projector::basis(4, 0);
    let eps = 0.05;
    let region = sample_region(&rho0, eps, 32, seed)?;
    out.push(record("c06/theorem5/ball", &born::check_theorem5(&region, &p1, eps)?, "32 samples, radius 0.05"));
    let p0 = born::outcome_probability(&rho0, &p1)?;
    let delta = born::band_delta(n, lambda);
    let mut inside = 0usize;
    let mut total = 0usize;
    for (k, rho) in region.samples().iter().enumerate() {
        let pk = born::outcome_probability(rho, &p1)?;
        for r in born::frequency_sweep(pk, n, lambda, (seed + 1000 * k as u64)..(seed + 1000 * k as u64 + 10))? {
            total += 1;
            inside += usize::from((r.frequency - p0).abs() <= delta);
        }
    }
    let fraction = inside as f64 / total as f64;
    let floor = 1.0 - p0 * (1.0 - p0) / (n as f64).powf(lambda);
    out.push(
        CheckRecord::from_margin("c06/theorem5/band-fraction", fraction - floor)
            .with_detail(format!("{inside} of {total} runs within the centre band")),
    );
    Ok(out)
}

fn average_spectrum(seed: u64) -> Result<Vec<CheckRecord>> {
    let mut rng = rng_for(seed, 7);
    let p1 = Projector::new(random_pure(2, &mut rng).as_operator())?;
    let mut out = Vec::new();
    for n in 1..=8usize {
        let q = born::build_average_operator(&p1, n)?;
        let values = born::distinct_eigenvalues(&q, 1e-6)?;
        let dev = if values.len() == n + 1 {
            values.iter().enumerate().map(|(j, v)| (v - j as f64 / n as f64).abs()).fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        out.push(
            CheckRecord::from_margin(format!("c07/average-operator/N={n}"), 1e-9 - dev)
                .with_detail(format!("{} distinct eigenvalues", values.len())),
        );
    }
    Ok(out)
}

fn propositions23(seed: u64) -> Result<Vec<CheckRecord>> {
    let (d, eps, delta) = (16, 0.01, 0.05);
    let mut p2 = Vec::new();
    let mut p3 = Vec::new();
    let mut center = 0.0f64;
    for k in 0..50u64 {
        let mut rng = rng_for(seed ^ k, 8);
        let a = random_hermitian(d, &mut rng);
        let spec = luders::PersistenceRegionSpec::new(a, OpenInterval::new(0.0, f64::MAX)?, eps)?;
        if spec.projector().rank() == 0 || spec.projector().rank() == d {
            continue;
        }
        let rho0 = collimation::strictly_sharp_state(spec.projector(), eps, rng.random_range(0.1..0.9), &mut rng)?;
        let b = random_hermitian(d, &mut rng);
        let region = sample_region(&rho0, delta, 16, seed ^ k)?;
        p2.push(luders::check_proposition2(&rho0, &spec, delta, &b, &region)?);

        let (a, b) = luders::random_commuting_pair(d, &mut rng)?;
        let rho0 = random_density(d, 4, &mut rng);
        let region = sample_region(&rho0, eps, 16, seed ^ k)?;
        let r = luders::check_proposition3(&rho0, &a, &b, &region, eps)?;
        center = center.max(r.center_residual);
        p3.push(r.report);
    }
    let p2 = TheoremReport::merge("proposition2", &p2);
    let p3 = TheoremReport::merge("proposition3", &p3);
    Ok(vec![
        record("c08/proposition2", &p2, format!("{} samples", p2.per_sample_margin.len())),
        record("c08/proposition3", &p3, format!("{} samples", p3.per_sample_margin.len())),
        CheckRecord::from_margin("c08/proposition3/center-identity", 1e-10 - center),
    ])
}

fn proposition4(seed: u64) -> Result<Vec<CheckRecord>> {
    let g = Grid::new(32, 4.0, 1.0)?;
    let model = pointer::PointerModel::new(g, g, 1.0, 1.0)?;
    let eps2 = 0.01;
    let w2 = pointer::slit_region(&g, -0.25, 0.25, 4, seed)?;
    let single = pointer::slit_region(&g, 0.75, 1.25, 8, seed ^ 1)?;
    let union = pointer::union_region(&g, (-1.25, -0.75), (0.75, 1.25), 8, seed ^ 2)?;
    let rs = pointer::classify_registration(&model, &single, &w2, eps2, 16, seed)?;
    let ru = pointer::classify_registration(&model, &union, &w2, eps2, 16, seed)?;
    let identity = rs.max_identity_defect().max(ru.max_identity_defect());
    Ok(vec![
        CheckRecord::new(
            "c09/pointer/single-slit",
            rs.threshold - rs.worst_total(),
            rs.registration == pointer::Registration::Registered,
        )
        .with_detail(format!("{:?}; threshold {:.12}", rs.registration, rs.threshold)),
        CheckRecord::new(
            "c09/pointer/union",
            ru.min_particle_term() - 0.9,
            ru.registration == pointer::Registration::NotRegistered && ru.min_particle_term() >= 0.9,
        )
        .with_detail(format!("{:?}; particle term {:.12}", ru.registration, ru.min_particle_term())),
        CheckRecord::from_margin("c09/pointer/decomposition-identity", 1e-9 - identity),
    ])
}

fn theorem6(seed: u64) -> Result<Vec<CheckRecord>> {
    let small = Grid::new(64, 4.0, 1.0)?;
    let q = small.position_operator();
    let harmonic = ForceField::harmonic(1.0, 1.3);
    let mut rng = rng_for(seed, 10);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let rho = random_density(small.n, 3, &mut rng);
        worst = worst.max(dynamics::ehrenfest_gap(&harmonic, &q, &rho)?);
    }
    let mut out = vec![CheckRecord::from_margin("c10/harmonic-gap", 1e-10 - worst)];

    let grid = Grid::new(256, 4.0, 1.0)?;
    let cubic = ForceField::cubic(1.0);
    let eps = 0.05;
    let mut windows = Vec::new();
    for r in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        let w = dynamics::construct_window(&cubic, r, eps, &grid, WindowConfig { seed, ..Default::default() })?;
        windows.push(dynamics::check_theorem6(&w, &cubic, &grid)?);
    }
    let merged = TheoremReport::merge("theorem6", &windows);
    out.push(record("c10/theorem6/cubic-windows", &merged, format!("{} samples", merged.per_sample_margin.len())));

    let two_peak = point_mixture(&grid, &[(0.0, 0.5), (2.0, 0.5)])?;
    let gap = dynamics::ehrenfest_gap(&cubic, &grid.position_operator(), &two_peak)?;
    out.push(
        CheckRecord::from_margin("c10/negative-control", 0.05 * 3.0 - (gap - 3.0).abs())
            .with_detail(format!("gap {gap:.12}")),
    );

    let chain = dynamics::window_coverage(&cubic, eps, -3.0, 3.0, grid.half_width)?;
    let lattice = dynamics::lattice_coverage(&cubic, eps, -3.0, 3.0, 0.5, grid.half_width)?;
    out.push(
        CheckRecord::new("c10/window-coverage", if chain.covered { 0.0 } else { -1.0 }, chain.covered).with_detail(
            format!("{} windows cover [-3, 3]; a 0.5 lattice leaves {} gaps", chain.centers.len(), lattice.gaps.len()),
        ),
    );
    Ok(out)
}

fn harmonic_trajectory(_seed: u64) -> Result<Vec<CheckRecord>> {
    let grid = Grid::new(512, 10.0, 1.0)?;
    let (mu, omega, a) = (1.0, 1.0, 2.0);
    let h = dynamics::harmonic_hamiltonian(&grid, mu, omega)?;
    let rho = gaussian_state(&grid, a, (grid.hbar / (2.0 * mu * omega)).sqrt())?;
    let times = dynamics::time_grid(2.0 * std::f64::consts::TAU / omega, 0.05);
    let force = ForceField::harmonic(mu, omega);
    let rec = dynamics::evolve_expectations(
        &h,
        grid.hbar,
        &rho,
        &grid.position_operator(),
        &grid.momentum_operator(),
        Some(&force),
        &times,
    )?;
    let closed: Vec<f64> = times.iter().map(|t| a * (omega * t).cos()).collect();
    let err = dynamics::compare_trajectories(&rec.q_quantum, &closed);
    let (qc, _) = dynamics::newton_trajectory(mu, &force, trace_inner(&rho, &grid.position_operator())?, 0.0, &times)?;
    Ok(vec![
        CheckRecord::from_margin("c11/harmonic/closed-form", 1e-3 * a - err)
            .with_detail(format!("max error {err:.6e}")),
        CheckRecord::from_margin("c11/harmonic/newton", 1e-3 * a - dynamics::compare_trajectories(&rec.q_quantum, &qc)),
    ])
}

fn sharpening(_seed: u64) -> Result<Vec<CheckRecord>> {
    let (mu, lambda, q0, v) = (1.5, 0.4, 2.0, 0.3);
    let times = dynamics::time_grid(5.0, 0.01);
    let q = dynamics::sharpening_ode(mu, lambda, q0, |_| v, &times)?;
    let err_const = (q.last().copied().unwrap_or(f64::NAN) - (q0 - lambda / mu * v * 5.0)).abs();
    let q = dynamics::sharpening_ode(mu, lambda, q0, |t| v * (-t).exp(), &dynamics::time_grid(40.0, 0.01))?;
    let err_exp = (q.last().copied().unwrap_or(f64::NAN) - (q0 - lambda / mu * v)).abs();
    Ok(vec![
        CheckRecord::from_margin("c12/sharpening/constant-variance", 1e-8 - err_const),
        CheckRecord::from_margin("c12/sharpening/exponential-variance", 1e-6 - err_exp),
    ])
}
