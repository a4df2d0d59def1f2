//! One runner per experiment kind.
//!
//! [`Plan::build`] turns a config into typed parameters and checks them
//! against the preconditions of the library calls; [`Plan::run`] then does
//! the work. Library errors during a run become a failed `<kind>/error`
//! record rather than aborting the report.

use qrn_core::collimation::{self, SharpRegionConfig};
use qrn_core::dynamics::{self, ForceField, WindowConfig};
use qrn_core::linalg::{spectral_projector, trace_inner, Projector};
use qrn_core::region::sample_region;
use qrn_core::states::{gaussian_state, random_density, random_hermitian, random_pure, random_unit_vector, rng_for};
use qrn_core::{
    born, luders, pointer, CheckRecord, DensityMatrix, Grid, HermitianOperator, OpenInterval, SlitSpec, StateRegion,
    TheoremReport,
};
use rand::Rng;

use crate::config::{ConfigError, ExperimentConfig, Kind};

/// Records plus files to write once the run is over.
#[derive(Debug, Default)]
pub struct Outcome {
    pub records: Vec<CheckRecord>,
    pub artifacts: Vec<(String, String)>,
}

#[allow(clippy::large_enum_variant)]
pub enum Plan {
    Slit(SlitPlan),
    Born(BornPlan),
    Luders(LudersPlan),
    Pointer(PointerPlan),
    Ehrenfest(EhrenfestPlan),
    Evolve(EvolvePlan),
    Collapse(CollapsePlan),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(invalid(msg()))
    }
}

fn unit_open(key: &str, x: f64) -> Result<(), ConfigError> {
    require(x > 0.0 && x < 1.0, || format!("{key} must lie in (0, 1), got {x}"))
}

fn positive(key: &str, x: f64) -> Result<(), ConfigError> {
    require(x > 0.0, || format!("{key} must be positive, got {x}"))
}

fn at_least(key: &str, x: usize, lo: usize) -> Result<(), ConfigError> {
    require(x >= lo, || format!("{key} must be at least {lo}, got {x}"))
}

fn grid(cfg: &ExperimentConfig, hbar: f64) -> Result<Grid, ConfigError> {
    Grid::new(cfg.usize("n"), cfg.f64("half_width"), hbar).map_err(|e| invalid(e.to_string()))
}

fn record(id: &str, report: &TheoremReport, detail: impl Into<String>) -> CheckRecord {
    CheckRecord::new(id, report.worst_margin, report.passed).with_detail(detail)
}

fn force_law(name: &str, coeff: f64, mu: f64) -> ForceField {
    match name {
        "harmonic" => ForceField::harmonic(mu, coeff),
        "linear" => ForceField::linear(coeff, 0.0),
        "quartic" => ForceField::quartic(coeff),
        _ => ForceField::cubic(coeff),
    }
}

impl Plan {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        Ok(match cfg.kind {
            Kind::Slit => Plan::Slit(SlitPlan::build(cfg)?),
            Kind::Born => Plan::Born(BornPlan::build(cfg)?),
            Kind::Luders => Plan::Luders(LudersPlan::build(cfg)?),
            Kind::Pointer => Plan::Pointer(PointerPlan::build(cfg)?),
            Kind::Ehrenfest => Plan::Ehrenfest(EhrenfestPlan::build(cfg)?),
            Kind::Evolve => Plan::Evolve(EvolvePlan::build(cfg)?),
            Kind::Collapse => Plan::Collapse(CollapsePlan::build(cfg)?),
        })
    }

    pub fn kind(&self) -> Kind {
        match self {
            Plan::Slit(_) => Kind::Slit,
            Plan::Born(_) => Kind::Born,
            Plan::Luders(_) => Kind::Luders,
            Plan::Pointer(_) => Kind::Pointer,
            Plan::Ehrenfest(_) => Kind::Ehrenfest,
            Plan::Evolve(_) => Kind::Evolve,
            Plan::Collapse(_) => Kind::Collapse,
        }
    }

    pub fn run(&self) -> Outcome {
        let result = match self {
            Plan::Slit(p) => p.run().map(Outcome::from),
            Plan::Born(p) => p.run().map(Outcome::from),
            Plan::Luders(p) => p.run().map(Outcome::from),
            Plan::Pointer(p) => p.run().map(Outcome::from),
            Plan::Ehrenfest(p) => p.run().map(Outcome::from),
            Plan::Evolve(p) => p.run(),
            Plan::Collapse(p) => p.run(),
        };
        result.unwrap_or_else(|e| Outcome {
            records: vec![
                CheckRecord::new(format!("{}/error", self.kind()), f64::NAN, false).with_detail(e.to_string())
            ],
            artifacts: Vec::new(),
        })
    }
}

impl From<Vec<CheckRecord>> for Outcome {
    fn from(records: Vec<CheckRecord>) -> Self {
        Self { records, artifacts: Vec::new() }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, ConfigError> {
    Ok(Plan::build(cfg)?.run())
}

pub struct SlitPlan {
    grid: Grid,
    slit: SlitSpec,
    eps: f64,
    regions: usize,
    observables: usize,
    seed: u64,
}

impl SlitPlan {
    fn build(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let eps = cfg.f64("eps");
        unit_open("eps", eps)?;
        let hbar = cfg.f64("hbar");
        positive("hbar", hbar)?;
        let grid = grid(cfg, hbar)?;
        let slit = SlitSpec::new(cfg.f64("z1"), cfg.f64("z2")).map_err(|e| invalid(e.to_string()))?;
        collimation::prepare_sharp_state(slit, eps, &grid).map_err(|e| invalid(e.to_string()))?;
        let regions = cfg.usize("regions");
        at_least("regions", regions, 1)?;
        Ok(Self { grid, slit, eps, regions, observables: cfg.usize("observables"), seed: cfg.seed() })
    }

    fn run(&self) -> qrn_core::Result<Vec<CheckRecord>> {
        let (grid, slit, eps) = (&self.grid, self.slit, self.eps);
        let z = grid.position_operator();
        let p = grid.momentum_operator();
        let regions: Vec<StateRegion> = (0..self.regions as u64)
            .map(|k| {
                collimation::sharp_region(grid, slit, eps, SharpRegionConfig::default(), self.seed.wrapping_add(k))
            })
            .collect::<qrn_core::Result<_>>()?;
        let spec = luders::PersistenceRegionSpec::new(z.clone(), slit, eps)?;
        let mut t1 = Vec::new();
        let mut t3 = Vec::new();
        let mut p1 = Vec::new();
        for r in &regions {
            t1.push(collimation::check_theorem1(&z, r, slit, eps)?);
            t3.push(collimation::check_theorem3(&z, r, slit, eps)?);
            p1.push(luders::check_proposition1(&spec, r)?);
        }
        let t1 = TheoremReport::merge("theorem1", &t1);
        let t3 = TheoremReport::merge("theorem3", &t3);
        let p1 = TheoremReport::merge("proposition1", &p1);
        let samples = t1.per_sample_margin.len();

        let centre = StateRegion::singleton(regions[0].center().clone());
        let zs = collimation::tightest_slit(&z, &centre, eps)?;
        let ps = collimation::tightest_slit(&p, &centre, eps)?;
        let t2 = collimation::check_theorem2_with(&z, &p, &centre, zs, ps, eps, grid.hbar, 0.01)?;

        let mut out = vec![
            record("slit/theorem1", &t1, format!("{} regions; {samples} samples", regions.len())),
            record("slit/theorem2", &t2, format!("tightest widths {:.12} x {:.12}", zs.width(), ps.width())),
            record("slit/theorem3", &t3, format!("{samples} samples")),
            record("slit/proposition1", &p1, format!("{samples} samples")),
        ];

        let strict: Vec<StateRegion> =
            regions.iter().map(|r| collimation::strict_subregion(&z, r, slit, eps)).collect::<qrn_core::Result<_>>()?;
        let proj = spectral_projector(&z, slit)?;
        let mut c1 = Vec::new();
        for r in &strict {
            for rho in r.samples() {
                c1.push(collimation::check_corollary1(rho, &proj, eps)?);
            }
        }
        let c1 = TheoremReport::from_margins("corollary1", c1);
        out.push(record(
            "slit/corollary1",
            &c1,
            format!(
                "bound {:.12}; {} strictly sharp samples",
                collimation::corollary1_bound(eps),
                c1.per_sample_margin.len()
            ),
        ));

        if self.observables > 0 {
            let mut rng = rng_for(self.seed, 5);
            let ms: Vec<HermitianOperator> =
                (0..self.observables).map(|_| random_hermitian(grid.n, &mut rng)).collect();
            let mut t4 = Vec::new();
            for r in &strict {
                t4.extend(collimation::check_theorem4_family(&z, &ms, r, slit, eps)?);
            }
            let t4 = TheoremReport::merge("theorem4", &t4);
            out.push(record(
                "slit/theorem4/bounded",
                &t4,
                format!("{} observables x {} regions", ms.len(), strict.len()),
            ));
        }
        if collimation::unbounded_precondition(slit, eps) {
            let reports: Vec<TheoremReport> = strict
                .iter()
                .map(|r| collimation::check_theorem4_position(&z, r, slit, eps))
                .collect::<qrn_core::Result<_>>()?;
            out.push(record(
                "slit/theorem4/position",
                &TheoremReport::merge("theorem4-position", &reports),
                "precondition holds",
            ));
        }
        Ok(out)
    }
}

pub struct BornPlan {
    p1: f64,
    copies: u64,
    lambda: f64,
    runs: u64,
    max_outside: u64,
    mean_tol: f64,
    spectrum_max: usize,
    seed: u64,
}

impl BornPlan {
    fn build(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let p1 = cfg.f64("p1");
        require((0.0..=1.0).contains(&p1), || format!("p1 must lie in [0, 1], got {p1}"))?;
        let lambda = cfg.f64("lambda");
        unit_open("lambda", lambda)?;
        let copies = cfg.u64("copies");
        at_least("copies", copies as usize, 1)?;
        let runs = cfg.u64("runs");
        at_least("runs", runs as usize, 1)?;
        let mean_tol = cfg.f64("mean_tol");
        positive("mean_tol", mean_tol)?;
        let spectrum_max = cfg.usize("spectrum_max");
        require(spectrum_max <= 12, || format!("spectrum_max must be at most 12, got {spectrum_max}"))?;
        Ok(Self {
            p1,
            copies,
            lambda,
            runs,
            max_outside: cfg.u64("max_outside"),
            mean_tol,
            spectrum_max,
            seed: cfg.seed(),
        })
    }

    fn run(&self) -> qrn_core::Result<Vec<CheckRecord>> {
        let seeds = self.seed..self.seed.wrapping_add(self.runs);
        let sweep = born::frequency_sweep(self.p1, self.copies, self.lambda, seeds)?;
        let s = born::summarize(&sweep);
        let mut out = vec![
            CheckRecord::from_margin("born/outside-band", self.max_outside as f64 - s.outside_band as f64).with_detail(
                format!(
                    "{} of {} outside +-{:.12}; Chebyshev expects at most {:.6}",
                    s.outside_band,
                    s.runs,
                    born::band_delta(self.copies, self.lambda),
                    s.chebyshev_expected_outside
                ),
            ),
            CheckRecord::from_margin("born/mean-frequency", self.mean_tol - (s.mean_frequency - self.p1).abs())
                .with_detail(format!("mean {:.12}", s.mean_frequency)),
        ];
        let mut rng = rng_for(self.seed, 6);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let psi = random_unit_vector(4, &mut rng);
            let rho = DensityMatrix::pure(&psi)?;
            worst = worst.max((born::outcome_probability(&rho, &Projector::basis(4, 1))? - psi[1].norm_sqr()).abs());
        }
        out.push(CheckRecord::from_margin("born/pure-state-endpoint", 1e-12 - worst));
        let p = Projector::new(random_pure(2, &mut rng).as_operator())?;
        for n in 1..=self.spectrum_max {
            let values = born::distinct_eigenvalues(&born::build_average_operator(&p, n)?, 1e-6)?;
            let dev = if values.len() == n + 1 {
                values.iter().enumerate().map(|(j, v)| (v - j as f64 / n as f64).abs()).fold(0.0, f64::max)
            } else {
                f64::INFINITY
            };
            out.push(
                CheckRecord::from_margin(format!("born/average-operator/N={n}"), 1e-9 - dev)
                    .with_detail(format!("{} distinct eigenvalues", values.len())),
            );
        }
        Ok(out)
    }
}

pub struct LudersPlan {
    dim: usize,
    eps: f64,
    delta: f64,
    trials: u64,
    samples: usize,
    seed: u64,
}

impl LudersPlan {
    fn build(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let dim = cfg.usize("dim");
        require((2..=256).contains(&dim), || format!("dim must lie in [2, 256], got {dim}"))?;
        let eps = cfg.f64("eps");
        unit_open("eps", eps)?;
        let delta = cfg.f64("delta");
        positive("delta", delta)?;
        let trials = cfg.u64("trials");
        at_least("trials", trials as usize, 1)?;
        let samples = cfg.usize("samples");
        at_least("samples", samples, 1)?;
        Ok(Self { dim, eps, delta, trials, samples, seed: cfg.seed() })
    }

    fn run(&self) -> qrn_core::Result<Vec<CheckRecord>> {
        let (d, eps, delta) = (self.dim, self.eps, self.delta);
        let mut p2 = Vec::new();
        let mut p3 = Vec::new();
        let mut centre = 0.0f64;
        for k in 0..self.trials {
            let mut rng = rng_for(self.seed ^ k, 8);
            let a = random_hermitian(d, &mut rng);
            let spec = luders::PersistenceRegionSpec::new(a, OpenInterval::new(0.0, f64::MAX)?, eps)?;
            let rank = spec.projector().rank();
            if rank > 0 && rank < d {
                let rho0 =
                    collimation::strictly_sharp_state(spec.projector(), eps, rng.random_range(0.1..0.9), &mut rng)?;
                let b = random_hermitian(d, &mut rng);
                let region = sample_region(&rho0, delta, self.samples, self.seed ^ k)?;
                p2.push(luders::check_proposition2(&rho0, &spec, delta, &b, &region)?);
            }
            let (a, b) = luders::random_commuting_pair(d, &mut rng)?;
            let rho0 = random_density(d, 4.min(d), &mut rng);
            let region = sample_region(&rho0, eps, self.samples, self.seed ^ k)?;
            let r = luders::check_proposition3(&rho0, &a, &b, &region, eps)?;
            centre = centre.max(r.center_residual);
            p3.push(r.report);
        }
        let p2 = TheoremReport::merge("proposition2", &p2);
        let p3 = TheoremReport::merge("proposition3", &p3);
        Ok(vec![
            record("luders/proposition2", &p2, format!("{} samples", p2.per_sample_margin.len())),
            record("luders/proposition3", &p3, format!("{} samples", p3.per_sample_margin.len())),
            CheckRecord::from_margin("luders/proposition3/center-identity", 1e-10 - centre),
        ])
    }
}

pub struct PointerPlan {
    model: pointer::PointerModel,
    grid: Grid,
    eps2: f64,
    center: f64,
    width: f64,
    pointer_width: f64,
    samples: usize,
    pairs: usize,
    seed: u64,
}

impl PointerPlan {
    fn build(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let grid = grid(cfg, 1.0)?;
        require(grid.n <= 64, || format!("n must be at most 64 so the joint space stays dense, got {}", grid.n))?;
        let model =
            pointer::PointerModel::new(grid, grid, cfg.f64("g"), cfg.f64("dt")).map_err(|e| invalid(e.to_string()))?;
        let eps2 = cfg.f64("eps2");
        positive("eps2", eps2)?;
        let (center, width, pointer_width) = (cfg.f64("center"), cfg.f64("width"), cfg.f64("pointer_width"));
        positive("width", width)?;
        positive("pointer_width", pointer_width)?;
        require(center.abs() + width / 2.0 < grid.half_width, || "particle slits leave the grid".into())?;
        require(center.abs() > width / 2.0, || "the two union slits overlap".into())?;
        let samples = cfg.usize("samples");
        at_least("samples", samples, 1)?;
        let pairs = cfg.usize("pairs");
        at_least("pairs", pairs, 1)?;
        Ok(Self { model, grid, eps2, center, width, pointer_width, samples, pairs, seed: cfg.seed() })
    }

    fn run(&self) -> qrn_core::Result<Vec<CheckRecord>> {
        let (g, c, h) = (&self.grid, self.center, self.width / 2.0);
        let w2 = pointer::slit_region(g, -self.pointer_width / 2.0, self.pointer_width / 2.0, 4, self.seed)?;
        let single = pointer::slit_region(g, c - h, c + h, self.samples, self.seed ^ 1)?;
        let union = pointer::union_region(g, (-c - h, -c + h), (c - h, c + h), self.samples, self.seed ^ 2)?;
        let rs = pointer::classify_registration(&self.model, &single, &w2, self.eps2, self.pairs, self.seed)?;
        let ru = pointer::classify_registration(&self.model, &union, &w2, self.eps2, self.pairs, self.seed)?;
        let floor = 0.9 * (self.model.g_dt() * c).powi(2);
        let identity = rs.max_identity_defect().max(ru.max_identity_defect());
        Ok(vec![
            CheckRecord::new(
                "pointer/single-slit",
                rs.threshold - rs.worst_total(),
                rs.registration == pointer::Registration::Registered,
            )
            .with_detail(format!("{:?}; threshold {:.12}", rs.registration, rs.threshold)),
            CheckRecord::new(
                "pointer/union",
                ru.min_particle_term() - floor,
                ru.registration == pointer::Registration::NotRegistered && ru.min_particle_term() >= floor,
            )
            .with_detail(format!("{:?}; particle term {:.12}", ru.registration, ru.min_particle_term())),
            CheckRecord::from_margin("pointer/decomposition-identity", 1e-9 - identity),
        ])
    }
}

pub struct EhrenfestPlan {
    force: ForceField,
    linear: bool,
    grid: Grid,
    eps: f64,
    centres: Vec<f64>,
    cover: (f64, f64),
    states: usize,
    seed: u64,
}

impl EhrenfestPlan {
    fn build(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let grid = grid(cfg, 1.0)?;
        let mu = cfg.f64("mu");
        positive("mu", mu)?;
        let eps = cfg.f64("eps");
        positive("eps", eps)?;
        let (lo, hi, step) = (cfg.f64("r_lo"), cfg.f64("r_hi"), cfg.f64("r_step"));
        positive("r_step", step)?;
        require(lo <= hi, || format!("r_lo {lo} exceeds r_hi {hi}"))?;
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        require(count <= 1000, || format!("{count} window centres is too many"))?;
        let centres: Vec<f64> = (0..count).map(|k| lo + k as f64 * step).collect();
        let reach = grid.half_width;
        require(centres.iter().all(|r| r.abs() < reach), || "window centres must lie inside the grid".into())?;
        let cover = (cfg.f64("cover_lo"), cfg.f64("cover_hi"));
        require(cover.0 < cover.1, || "cover_lo must be below cover_hi".into())?;
        let name = cfg.text("force");
        let force = force_law(name, cfg.f64("coeff"), mu);
        Ok(Self {
            force,
            linear: matches!(name, "harmonic" | "linear"),
            grid,
            eps,
            centres,
            cover,
            states: cfg.usize("states"),
            seed: cfg.seed(),
        })
    }

    fn run(&self) -> qrn_core::Result<Vec<CheckRecord>> {
        let mut out = Vec::new();
        if self.linear && self.states > 0 {
            let q = self.grid.position_operator();
            let fq = self.force.operator(&q)?;
            let mut rng = rng_for(self.seed, 10);
            let mut worst = 0.0f64;
            for _ in 0..self.states {
                let rho = random_density(self.grid.n, 3, &mut rng);
                worst = worst.max(dynamics::gap_with(&self.force, &fq, &q, &rho)?);
            }
            out.push(CheckRecord::from_margin("ehrenfest/linear-gap", 1e-10 - worst));
        }
        let mut windows = Vec::new();
        for &r in &self.centres {
            let w = dynamics::construct_window(
                &self.force,
                r,
                self.eps,
                &self.grid,
                WindowConfig { seed: self.seed, ..Default::default() },
            )?;
            windows.push(dynamics::check_theorem6(&w, &self.force, &self.grid)?);
        }
        let merged = TheoremReport::merge("theorem6", &windows);
        out.push(record(
            "ehrenfest/windows",
            &merged,
            format!("{} windows; {} samples", windows.len(), merged.per_sample_margin.len()),
        ));
        let cov = dynamics::window_coverage(&self.force, self.eps, self.cover.0, self.cover.1, self.grid.half_width)?;
        out.push(
            CheckRecord::new("ehrenfest/coverage", if cov.covered { 0.0 } else { -1.0 }, cov.covered)
                .with_detail(format!("{} windows; {} gaps", cov.centers.len(), cov.gaps.len())),
        );
        Ok(out)
    }
}

pub struct EvolvePlan {
    force: ForceField,
    harmonic: Option<f64>,
    grid: Grid,
    mu: f64,
    a: f64,
    sigma: f64,
    times: Vec<f64>,
    tol: f64,
    trajectory: Option<String>,
}

impl EvolvePlan {
    fn build(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let grid = grid(cfg, 1.0)?;
        let (mu, coeff, a) = (cfg.f64("mu"), cfg.f64("coeff"), cfg.f64("a"));
        positive("mu", mu)?;
        let name = cfg.text("force");
        let harmonic = (name == "harmonic").then_some(coeff);
        if harmonic.is_some() {
            positive("coeff", coeff)?;
        }
        let sigma = match (cfg.opt_f64("sigma"), harmonic) {
            (Some(s), _) => s,
            (None, Some(omega)) => (grid.hbar / (2.0 * mu * omega)).sqrt(),
            (None, None) => return Err(invalid("sigma is required unless the force is harmonic")),
        };
        positive("sigma", sigma)?;
        require(a.abs() + 6.0 * sigma < grid.half_width, || "initial packet does not fit on the grid".into())?;
        let (t_max, dt) = (cfg.f64("t_max"), cfg.f64("dt"));
        positive("t_max", t_max)?;
        positive("dt", dt)?;
        require(t_max / dt <= 1e6, || "too many output times".into())?;
        let tol = cfg.f64("tol");
        positive("tol", tol)?;
        Ok(Self {
            force: force_law(name, coeff, mu),
            harmonic,
            grid,
            mu,
            a,
            sigma,
            times: dynamics::time_grid(t_max, dt),
            tol,
            trajectory: Some(cfg.text("trajectory").to_string()).filter(|s| !s.is_empty()),
        })
    }

    fn run(&self) -> qrn_core::Result<Outcome> {
        let g = &self.grid;
        let (q, p) = (g.position_operator(), g.momentum_operator());
        let h = dynamics::hamiltonian(g, self.mu, &self.force)?;
        let rho = gaussian_state(g, self.a, self.sigma)?;
        let mut rec = dynamics::evolve_expectations(&h, g.hbar, &rho, &q, &p, Some(&self.force), &self.times)?;
        let q0 = trace_inner(&rho, &q)?;
        let (qc, pc) = dynamics::newton_trajectory(self.mu, &self.force, q0, trace_inner(&rho, &p)?, &self.times)?;
        let scale = self.tol * self.a.abs().max(1.0);
        let mut records = Vec::new();
        if let Some(omega) = self.harmonic {
            let closed: Vec<f64> = self.times.iter().map(|t| self.a * (omega * t).cos()).collect();
            let err = dynamics::compare_trajectories(&rec.q_quantum, &closed);
            records.push(
                CheckRecord::from_margin("evolve/closed-form", scale - err).with_detail(format!("max error {err:.6e}")),
            );
        }
        let err = dynamics::compare_trajectories(&rec.q_quantum, &qc);
        let max_gap = rec.gap.iter().copied().fold(0.0, f64::max);
        records.push(
            CheckRecord::from_margin("evolve/newton", scale - err)
                .with_detail(format!("max error {err:.6e}; max Ehrenfest gap {max_gap:.6e}")),
        );
        rec.q_classical = qc;
        rec.p_classical = pc;
        let artifacts = self.trajectory.iter().map(|path| (path.clone(), rec.to_csv())).collect();
        Ok(Outcome { records, artifacts })
    }
}

pub struct CollapsePlan {
    mu: f64,
    lambda: f64,
    q0: f64,
    exponential: bool,
    v0: f64,
    rate: f64,
    times: Vec<f64>,
    tol: f64,
    trajectory: Option<String>,
}

impl CollapsePlan {
    fn build(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let (mu, lambda, v0, rate) = (cfg.f64("mu"), cfg.f64("lambda"), cfg.f64("v0"), cfg.f64("rate"));
        positive("mu", mu)?;
        positive("lambda", lambda)?;
        require(v0 >= 0.0, || format!("v0 must be non-negative, got {v0}"))?;
        let exponential = cfg.text("variance") == "exponential";
        if exponential {
            positive("rate", rate)?;
        }
        let (t_max, dt) = (cfg.f64("t_max"), cfg.f64("dt"));
        positive("t_max", t_max)?;
        positive("dt", dt)?;
        require(t_max / dt <= 1e7, || "too many steps".into())?;
        let tol = cfg.f64("tol");
        positive("tol", tol)?;
        Ok(Self {
            mu,
            lambda,
            q0: cfg.f64("q0"),
            exponential,
            v0,
            rate,
            times: dynamics::time_grid(t_max, dt),
            tol,
            trajectory: Some(cfg.text("trajectory").to_string()).filter(|s| !s.is_empty()),
        })
    }

    fn closed_form(&self, t: f64) -> f64 {
        let k = self.lambda / self.mu * self.v0;
        if self.exponential {
            self.q0 - k / self.rate * (1.0 - (-self.rate * t).exp())
        } else {
            self.q0 - k * t
        }
    }

    fn run(&self) -> qrn_core::Result<Outcome> {
        let (v0, rate, exponential) = (self.v0, self.rate, self.exponential);
        let variance = move |t: f64| if exponential { v0 * (-rate * t).exp() } else { v0 };
        let q = dynamics::sharpening_ode(self.mu, self.lambda, self.q0, variance, &self.times)?;
        let closed: Vec<f64> = self.times.iter().map(|&t| self.closed_form(t)).collect();
        let err = dynamics::compare_trajectories(&q, &closed);
        let profile = if exponential { "exponential" } else { "constant" };
        let mut detail = format!("max error {err:.6e}");
        if exponential {
            let limit = self.q0 - self.lambda / self.mu * v0 / rate;
            let last = q.last().copied().unwrap_or(f64::NAN);
            detail.push_str(&format!("; distance to limit {:.6e}", (last - limit).abs()));
        }
        let records =
            vec![CheckRecord::from_margin(format!("collapse/{profile}-variance"), self.tol - err).with_detail(detail)];
        let mut csv = String::from("t,q,closed_form\n");
        for ((t, a), b) in self.times.iter().zip(&q).zip(&closed) {
            csv.push_str(&format!("{t:.12e},{a:.12e},{b:.12e}\n"));
        }
        let artifacts = self.trajectory.iter().map(|path| (path.clone(), csv.clone())).collect();
        Ok(Outcome { records, artifacts })
    }
}
