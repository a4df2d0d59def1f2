//! Ehrenfest gaps, Weyl states and windows, trajectories and the sharpening
//! equation.
//!
//! Forces are polynomials in the position, so `F(Q)` is exact spectral
//! calculus on the diagonal grid position operator and the potential is the
//! antiderivative of `−F`. A window `W(r, ε)` collects states whose position
//! mean stays within `δ/2` of a Weyl state `ρ_r` and whose force mean stays
//! within `ε/3` of it; on such states the quantum-averaged force differs from
//! the force at the averaged position by less than `ε`.

use faer::Mat;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QrnError, Result};
use crate::linalg::{apply_function, eigh, trace_inner, DensityMatrix, Grid, HermitianOperator, C64};
use crate::region::{sample_region, StateRegion};
use crate::report::TheoremReport;
use crate::states::{gaussian_state, rng_for};

/// A force `F(x) = Σ cₖ xᵏ` with potential `V(x) = −Σ cₖ xᵏ⁺¹/(k+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceField {
    pub label: String,
    /// Force coefficients, lowest degree first.
    pub coeffs: Vec<f64>,
    pub s_continuous: bool,
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

impl ForceField {
    pub fn polynomial(label: impl Into<String>, coeffs: Vec<f64>) -> Self {
        Self { label: label.into(), coeffs, s_continuous: true }
    }

    /// `F = −kx + c`.
    pub fn linear(k: f64, c: f64) -> Self {
        Self::polynomial("linear", vec![c, -k])
    }

    /// `F = −μω²x`.
    pub fn harmonic(mu: f64, omega: f64) -> Self {
        Self::polynomial("harmonic", vec![0.0, -mu * omega * omega])
    }

    /// `F = c·x³`.
    pub fn cubic(c: f64) -> Self {
        Self::polynomial("cubic", vec![0.0, 0.0, 0.0, c])
    }

    /// Quartic well `V = c·x⁴`, so `F = −4c·x³`.
    pub fn quartic(c: f64) -> Self {
        Self::polynomial("quartic", vec![0.0, 0.0, 0.0, -4.0 * c])
    }

    pub fn force(&self, x: f64) -> f64 {
        horner(&self.coeffs, x)
    }

    pub fn potential(&self, x: f64) -> f64 {
        -x * self.coeffs.iter().enumerate().rev().fold(0.0, |acc, (k, c)| acc * x + c / (k + 1) as f64)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let d: Vec<f64> = self.coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
        horner(&d, x)
    }

    /// Largest `|F(x) + (V(x+h) − V(x−h))/2h|` over the grid, with
    /// `h = min(step, 1e-3)`.
    pub fn consistency_defect(&self, grid: &Grid) -> f64 {
        let h = grid.step().min(1e-3);
        grid.positions()
            .iter()
            .map(|&x| (self.force(x) + (self.potential(x + h) - self.potential(x - h)) / (2.0 * h)).abs())
            .fold(0.0, f64::max)
    }

    /// `F(Q)` by spectral calculus.
    pub fn operator(&self, q: &HermitianOperator) -> Result<HermitianOperator> {
        Ok(apply_function(|x| self.force(x), q)?.with_label(format!("F({})", q.label())))
    }
}

/// Tolerance for [`ForceField::consistency_defect`].
pub const FORCE_CONSISTENCY_TOL: f64 = 1e-4;

/// `|Tr ρF(Q) − F(Tr ρQ)|`.
pub fn ehrenfest_gap(force: &ForceField, q: &HermitianOperator, rho: &DensityMatrix) -> Result<f64> {
    gap_with(force, &force.operator(q)?, q, rho)
}

/// [`ehrenfest_gap`] with `F(Q)` precomputed.
pub fn gap_with(force: &ForceField, fq: &HermitianOperator, q: &HermitianOperator, rho: &DensityMatrix) -> Result<f64> {
    Ok((trace_inner(rho, fq)? - force.force(trace_inner(rho, q)?)).abs())
}

const MODULUS_SAMPLES: usize = 257;
const MODULUS_ITERATIONS: usize = 50;

fn modulus_holds(force: &ForceField, r: f64, delta: f64, eps: f64) -> bool {
    let fr = force.force(r);
    (0..MODULUS_SAMPLES).all(|k| {
        let x = r - delta + 2.0 * delta * k as f64 / (MODULUS_SAMPLES - 1) as f64;
        (force.force(x) - fr).abs() < eps / 6.0
    })
}

/// Largest `δ ≤ max_delta` (to bisection accuracy) with `|F(x) − F(r)| < ε/6`
/// on densely sampled `|x − r| ≤ δ`.
pub fn continuity_modulus(force: &ForceField, r: f64, eps: f64, max_delta: f64) -> Result<f64> {
    if !(eps > 0.0 && max_delta > 0.0) {
        return Err(QrnError::InvalidArgument(format!("eps and range must be positive, got {eps}, {max_delta}")));
    }
    if modulus_holds(force, r, max_delta, eps) {
        return Ok(max_delta);
    }
    let (mut lo, mut hi) = (0.0, max_delta);
    for _ in 0..MODULUS_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if modulus_holds(force, r, mid, eps) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !(lo > 0.0) {
        return Err(QrnError::ModulusSearchFailed { r });
    }
    Ok(lo)
}

fn require_interior(grid: &Grid, r: f64) -> Result<()> {
    if !(r.abs() < grid.half_width - 4.0 * grid.step()) {
        return Err(QrnError::InvalidArgument(format!("r = {r} is not in the grid interior")));
    }
    Ok(())
}

/// Gaussian at `r` with width halved from `1` until
/// `|Tr ρF(Q) − F(r)| < ε/6` and `|Tr ρQ − r| < δ/2`.
pub fn construct_weyl_state(grid: &Grid, r: f64, eps: f64, force: &ForceField, delta: f64) -> Result<DensityMatrix> {
    require_interior(grid, r)?;
    let q = grid.position_operator();
    let fq = force.operator(&q)?;
    let fr = force.force(r);
    let mut sigma: f64 = 1.0;
    while sigma >= grid.step() / 4.0 {
        let rho = gaussian_state(grid, r, sigma)?;
        if (trace_inner(&rho, &fq)? - fr).abs() < eps / 6.0 && (trace_inner(&rho, &q)? - r).abs() < delta / 2.0 {
            return Ok(rho);
        }
        sigma /= 2.0;
    }
    Err(QrnError::GridTooCoarse(format!("no packet at r = {r} meets eps = {eps} on a grid of step {}", grid.step())))
}

#[derive(Debug, Clone)]
pub struct EhrenfestWindow {
    pub r: f64,
    pub eps: f64,
    pub delta: f64,
    pub rho_r: DensityMatrix,
    pub region: StateRegion,
}

impl EhrenfestWindow {
    /// `|Tr((ρ−ρ_r)Q)| < δ/2` and `|Tr((ρ−ρ_r)F(Q))| < ε/3`.
    pub fn admits(&self, rho: &DensityMatrix, q: &HermitianOperator, fq: &HermitianOperator) -> Result<bool> {
        let dq = (trace_inner(rho, q)? - trace_inner(&self.rho_r, q)?).abs();
        let df = (trace_inner(rho, fq)? - trace_inner(&self.rho_r, fq)?).abs();
        Ok(dq < self.delta / 2.0 && df < self.eps / 3.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WindowConfig {
    pub mixtures: usize,
    pub perturbations: usize,
    pub perturbation_radius: f64,
    pub seed: u64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { mixtures: 6, perturbations: 2, perturbation_radius: 1e-7, seed: 0 }
    }
}

/// Weyl state at `r` plus admissible neighbours: small admixtures of nearby
/// packets and tiny random perturbations, filtered by the window conditions.
pub fn construct_window(
    force: &ForceField,
    r: f64,
    eps: f64,
    grid: &Grid,
    cfg: WindowConfig,
) -> Result<EhrenfestWindow> {
    require_interior(grid, r)?;
    let delta = continuity_modulus(force, r, eps, grid.half_width)?;
    let rho_r = construct_weyl_state(grid, r, eps, force, delta)?;
    let q = grid.position_operator();
    let fq = force.operator(&q)?;
    let mut rng = rng_for(cfg.seed, 0xd1);
    let mut candidates = Vec::with_capacity(cfg.mixtures + cfg.perturbations);
    for _ in 0..cfg.mixtures {
        let x = r + 0.25 * delta * (2.0 * rng.random::<f64>() - 1.0);
        let sigma = grid.step() * (0.5 + 2.0 * rng.random::<f64>());
        let t = 0.2 * rng.random::<f64>();
        let g = gaussian_state(grid, x, sigma)?;
        candidates.push(DensityMatrix::mixture(&[(1.0 - t, &rho_r), (t, &g)])?);
    }
    if cfg.perturbations > 0 {
        let ball = sample_region(&rho_r, cfg.perturbation_radius, cfg.perturbations + 1, cfg.seed)?;
        candidates.extend(ball.samples().iter().skip(1).cloned());
    }
    let mut window =
        EhrenfestWindow { r, eps, delta, rho_r: rho_r.clone(), region: StateRegion::singleton(rho_r.clone()) };
    let keep: Vec<bool> = candidates.par_iter().map(|c| window.admits(c, &q, &fq)).collect::<Result<_>>()?;
    let mut members = vec![rho_r.clone()];
    members.extend(candidates.into_iter().zip(keep).filter_map(|(c, k)| k.then_some(c)));
    window.region = StateRegion::enclosing(rho_r, members, cfg.seed)?;
    Ok(window)
}

/// Margins `ε − |Tr ρF(Q) − F(Tr ρQ)|` over the window samples.
pub fn check_theorem6(window: &EhrenfestWindow, force: &ForceField, grid: &Grid) -> Result<TheoremReport> {
    let q = grid.position_operator();
    let fq = force.operator(&q)?;
    let margins = window
        .region
        .samples()
        .par_iter()
        .map(|rho| {
            if !window.admits(rho, &q, &fq)? {
                return Err(QrnError::HypothesisNotMet {
                    check: "theorem 6".into(),
                    detail: format!("sample outside W({}, {})", window.r, window.eps),
                });
            }
            Ok(window.eps - gap_with(force, &fq, &q, rho)?)
        })
        .collect::<Result<_>>()?;
    Ok(TheoremReport::from_margins("theorem6", margins))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub centers: Vec<f64>,
    pub deltas: Vec<f64>,
    pub covered: bool,
    /// Points of `[lo, hi]` not inside any `(r − δ, r + δ)`, as intervals.
    pub gaps: Vec<(f64, f64)>,
}

fn coverage_of(centers: Vec<f64>, deltas: Vec<f64>, lo: f64, hi: f64) -> CoverageReport {
    let mut iv: Vec<(f64, f64)> = centers.iter().zip(&deltas).map(|(r, d)| (r - d, r + d)).collect();
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut gaps = Vec::new();
    // `reach` is the supremum of the covered prefix; windows are open, so a
    // window starting exactly at `reach` leaves that point uncovered.
    let mut reach = lo;
    for (a, b) in iv {
        if a >= reach && reach < hi {
            gaps.push((reach, a.min(hi)));
        }
        reach = reach.max(b);
    }
    if reach <= hi {
        gaps.push((reach, hi));
    }
    CoverageReport { centers, deltas, covered: gaps.is_empty(), gaps }
}

/// Windows at `lo, lo + spacing, …, hi`.
pub fn lattice_coverage(
    force: &ForceField,
    eps: f64,
    lo: f64,
    hi: f64,
    spacing: f64,
    max_delta: f64,
) -> Result<CoverageReport> {
    let n = ((hi - lo) / spacing).round() as usize;
    let centers: Vec<f64> = (0..=n).map(|k| lo + k as f64 * spacing).collect();
    let deltas = centers.par_iter().map(|&r| continuity_modulus(force, r, eps, max_delta)).collect::<Result<_>>()?;
    Ok(coverage_of(centers, deltas, lo, hi))
}

/// Greedy chain `r₀ = lo`, `r_{k+1} = r_k + δ(r_k)` until `(r_k − δ, r_k + δ)`
/// passes `hi`. Consecutive intervals overlap, so the chain covers `[lo, hi]`
/// whenever it terminates.
pub fn window_coverage(force: &ForceField, eps: f64, lo: f64, hi: f64, max_delta: f64) -> Result<CoverageReport> {
    let mut centers = Vec::new();
    let mut deltas = Vec::new();
    let mut r = lo;
    loop {
        let d = continuity_modulus(force, r, eps, max_delta)?;
        centers.push(r);
        deltas.push(d);
        if r + d > hi {
            break;
        }
        r += d;
    }
    Ok(coverage_of(centers, deltas, lo, hi))
}

/// `P²/2μ + μω²Q²/2` on the grid.
pub fn harmonic_hamiltonian(grid: &Grid, mu: f64, omega: f64) -> Result<HermitianOperator> {
    let q = grid.position_operator();
    let p = grid.momentum_operator();
    Ok(p.square().lin_comb(0.5 / mu, &q.square(), 0.5 * mu * omega * omega)?.with_label("H"))
}

/// `P²/2μ + V(Q)` for a force field.
pub fn hamiltonian(grid: &Grid, mu: f64, force: &ForceField) -> Result<HermitianOperator> {
    let q = grid.position_operator();
    let v = apply_function(|x| force.potential(x), &q)?;
    Ok(grid.momentum_operator().square().lin_comb(0.5 / mu, &v, 1.0)?.with_label("H"))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub q_classical: Vec<f64>,
    pub p_classical: Vec<f64>,
    pub q_quantum: Vec<f64>,
    pub p_quantum: Vec<f64>,
    pub gap: Vec<f64>,
    pub energy: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn to_csv(&self) -> String {
        let col = |v: &Vec<f64>, k: usize| v.get(k).map_or(String::new(), |x| format!("{x:.12e}"));
        let mut out = String::from("t,q_classical,p_classical,q_quantum,p_quantum,gap,energy\n");
        for k in 0..self.times.len() {
            out.push_str(&format!(
                "{:.12e},{},{},{},{},{},{}\n",
                self.times[k],
                col(&self.q_classical, k),
                col(&self.p_classical, k),
                col(&self.q_quantum, k),
                col(&self.p_quantum, k),
                col(&self.gap, k),
                col(&self.energy, k)
            ));
        }
        out
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(QrnError::InvalidArgument("time grid must be non-empty and strictly increasing".into()));
    }
    Ok(())
}

/// `V† A V`.
fn to_eigenbasis(v: &Mat<C64>, a: faer::MatRef<'_, C64>) -> Mat<C64> {
    &(v.adjoint() * a) * v
}

/// `Σⱼₖ ρ̃ⱼₖ φⱼ φ̄ₖ Ãₖⱼ`.
fn evolved_mean(rho: &Mat<C64>, a: &Mat<C64>, phase: &[C64]) -> f64 {
    let n = phase.len();
    (0..n)
        .into_par_iter()
        .map(|k| {
            let rc = rho.col_as_slice(k);
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                acc += rc[j] * phase[j] * a[(k, j)];
            }
            (acc * phase[k].conj()).re
        })
        .sum()
}

/// Exact unitary evolution of `⟨Q⟩`, `⟨P⟩` (and the Ehrenfest gap when a
/// force is given) by one eigendecomposition of `H`.
pub fn evolve_expectations(
    h: &HermitianOperator,
    hbar: f64,
    rho0: &DensityMatrix,
    q: &HermitianOperator,
    p: &HermitianOperator,
    force: Option<&ForceField>,
    times: &[f64],
) -> Result<TrajectoryRecord> {
    check_times(times)?;
    let e = eigh(&h.as_mat().to_owned())?;
    let v = &e.vectors;
    let rho = to_eigenbasis(v, rho0.as_mat());
    let qt = to_eigenbasis(v, q.as_mat());
    let pt = to_eigenbasis(v, p.as_mat());
    let ft = match force {
        Some(f) => Some(to_eigenbasis(v, f.operator(q)?.as_mat())),
        None => None,
    };
    let energy: f64 = (0..e.values.len()).map(|j| rho[(j, j)].re * e.values[j]).sum();
    let mut rec = TrajectoryRecord { times: times.to_vec(), ..Default::default() };
    for &t in times {
        let phase: Vec<C64> = e.values.iter().map(|&ej| C64::from_polar(1.0, -ej * t / hbar)).collect();
        let mq = evolved_mean(&rho, &qt, &phase);
        rec.q_quantum.push(mq);
        rec.p_quantum.push(evolved_mean(&rho, &pt, &phase));
        if let (Some(ft), Some(f)) = (&ft, force) {
            rec.gap.push((evolved_mean(&rho, ft, &phase) - f.force(mq)).abs());
        }
        rec.energy.push(energy);
    }
    Ok(rec)
}

fn rk4_step(y: [f64; 2], t: f64, dt: f64, f: &impl Fn(f64, [f64; 2]) -> [f64; 2]) -> [f64; 2] {
    let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
    let k1 = f(t, y);
    let k2 = f(t + dt / 2.0, add(y, k1, dt / 2.0));
    let k3 = f(t + dt / 2.0, add(y, k2, dt / 2.0));
    let k4 = f(t + dt, add(y, k3, dt));
    [
        y[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

fn integrate(y0: [f64; 2], times: &[f64], f: impl Fn(f64, [f64; 2]) -> [f64; 2]) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(times.len());
    let mut y = y0;
    out.push(y);
    for w in times.windows(2) {
        y = rk4_step(y, w[0], w[1] - w[0], &f);
        out.push(y);
    }
    out
}

/// `dq/dt = p/μ`, `dp/dt = F(q)` by classical RK4 on the given time grid.
pub fn newton_trajectory(mu: f64, force: &ForceField, q0: f64, p0: f64, times: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_times(times)?;
    if !(mu > 0.0) {
        return Err(QrnError::InvalidArgument(format!("mass must be positive, got {mu}")));
    }
    let ys = integrate([q0, p0], times, |_, y| [y[1] / mu, force.force(y[0])]);
    Ok(ys.iter().map(|y| (y[0], y[1])).unzip())
}

/// `max |⟨Q⟩(t) − q(t)|` over the shared time grid.
pub fn compare_trajectories(quantum: &[f64], classical: &[f64]) -> f64 {
    quantum.iter().zip(classical).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Integrates `dq/dt = −(λ/μ)·variance(t)` by RK4.
pub fn sharpening_ode(mu: f64, lambda: f64, q0: f64, variance: impl Fn(f64) -> f64, times: &[f64]) -> Result<Vec<f64>> {
    check_times(times)?;
    if !(mu > 0.0 && lambda > 0.0) {
        return Err(QrnError::InvalidArgument(format!("mu and lambda must be positive, got {mu}, {lambda}")));
    }
    let rate = lambda / mu;
    Ok(integrate([q0, 0.0], times, |t, _| [-rate * variance(t), 0.0]).iter().map(|y| y[0]).collect())
}

/// `t₀, t₀ + dt, …` up to and including `t_max` (within rounding).
pub fn time_grid(t_max: f64, dt: f64) -> Vec<f64> {
    let n = (t_max / dt).round() as usize;
    (0..=n).map(|k| k as f64 * dt).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{point_mixture, random_density};

    fn grid() -> Grid {
        Grid::new(256, 4.0, 1.0).unwrap()
    }

    #[test]
    fn force_potential_consistency() {
        let g = grid();
        for f in [
            ForceField::harmonic(1.0, 2.0),
            ForceField::cubic(1.0),
            ForceField::quartic(0.5),
            ForceField::linear(2.0, 1.0),
        ] {
            assert!(f.consistency_defect(&g) <= FORCE_CONSISTENCY_TOL, "{}", f.label);
        }
        let f = ForceField::polynomial("p", vec![1.0, -2.0, 0.5]);
        assert_eq!(f.force(2.0), 1.0 - 4.0 + 2.0);
        assert_eq!(f.derivative(2.0), -2.0 + 2.0);
    }

    #[test]
    fn linear_force_has_no_gap() {
        let g = Grid::new(64, 4.0, 1.0).unwrap();
        let q = g.position_operator();
        let f = ForceField::linear(1.5, 0.3);
        for seed in 0..10 {
            let rho = random_density(64, 3, &mut rng_for(seed, 0));
            assert!(ehrenfest_gap(&f, &q, &rho).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn cubic_gap_on_gaussian() {
        let g = Grid::new(512, 4.0, 1.0).unwrap();
        let rho = gaussian_state(&g, 1.0, 0.1).unwrap();
        let gap = ehrenfest_gap(&ForceField::cubic(1.0), &g.position_operator(), &rho).unwrap();
        assert!((gap - 0.03).abs() <= 0.05 * 0.03, "{gap}");
        let point = DensityMatrix::basis(512, 300);
        assert!(ehrenfest_gap(&ForceField::cubic(1.0), &g.position_operator(), &point).unwrap() < 1e-12);
    }

    #[test]
    fn two_peak_negative_control() {
        let g = grid();
        let rho = point_mixture(&g, &[(0.0, 0.5), (2.0, 0.5)]).unwrap();
        let gap = ehrenfest_gap(&ForceField::cubic(1.0), &g.position_operator(), &rho).unwrap();
        assert!((gap - 3.0).abs() < 1e-12);
    }

    #[test]
    fn modulus_examples() {
        let d = continuity_modulus(&ForceField::linear(2.0, 0.0), 0.3, 0.06, 10.0).unwrap();
        assert!((d - 0.06 / 12.0).abs() < 1e-9, "{d}");
        let d = continuity_modulus(&ForceField::cubic(1.0), 1.0, 1e-3, 10.0).unwrap();
        assert!((d - 1e-3 / 18.0).abs() < 1e-3 / 18.0 * 1e-3, "{d}");
        assert_eq!(continuity_modulus(&ForceField::linear(0.0, 1.0), 0.0, 0.1, 5.0).unwrap(), 5.0);
    }

    #[test]
    fn weyl_states() {
        let g = grid();
        let lin = ForceField::linear(1.0, 0.0);
        let rho = construct_weyl_state(&g, 0.5, 0.05, &lin, 0.1).unwrap();
        assert!((trace_inner(&rho, &g.position_operator()).unwrap() - 0.5).abs() < 0.05);
        let cubic = ForceField::cubic(1.0);
        let delta = continuity_modulus(&cubic, 1.0, 0.05, 4.0).unwrap();
        let rho = construct_weyl_state(&g, 1.0, 0.05, &cubic, delta).unwrap();
        let fq = cubic.operator(&g.position_operator()).unwrap();
        assert!((trace_inner(&rho, &fq).unwrap() - 1.0).abs() < 0.05 / 6.0);
        assert!(construct_weyl_state(&g, 3.99, 0.05, &cubic, delta).is_err());
    }

    #[test]
    fn cubic_windows_pass() {
        let g = grid();
        let f = ForceField::cubic(1.0);
        for r in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let w = construct_window(&f, r, 0.05, &g, WindowConfig { seed: 3, ..Default::default() }).unwrap();
            assert!(w.region.len() > 1, "r = {r}");
            let rep = check_theorem6(&w, &f, &g).unwrap();
            assert!(rep.passed, "r = {r}: {}", rep.worst_margin);
        }
    }

    #[test]
    fn negative_control_lies_outside_windows() {
        let g = grid();
        let f = ForceField::cubic(1.0);
        let mut w = construct_window(&f, 1.0, 0.05, &g, WindowConfig::default()).unwrap();
        let rho = point_mixture(&g, &[(0.0, 0.5), (2.0, 0.5)]).unwrap();
        w.region = StateRegion::singleton(rho);
        assert!(matches!(check_theorem6(&w, &f, &g), Err(QrnError::HypothesisNotMet { .. })));
    }

    #[test]
    fn coverage() {
        let f = ForceField::cubic(1.0);
        let chain = window_coverage(&f, 0.05, -3.0, 3.0, 4.0).unwrap();
        assert!(chain.covered, "{:?}", &chain.gaps[..chain.gaps.len().min(3)]);
        let lattice = lattice_coverage(&f, 0.05, -3.0, 3.0, 0.5, 4.0).unwrap();
        assert!(!lattice.covered);
        let lin = lattice_coverage(&ForceField::linear(0.01, 0.0), 0.05, -3.0, 3.0, 0.5, 4.0).unwrap();
        assert!(lin.covered);
    }

    #[test]
    fn harmonic_evolution() {
        let g = Grid::new(256, 8.0, 1.0).unwrap();
        let (mu, omega, a) = (1.0, 1.0, 1.5);
        let h = harmonic_hamiltonian(&g, mu, omega).unwrap();
        let rho = gaussian_state(&g, a, (g.hbar / (2.0 * mu * omega)).sqrt()).unwrap();
        let times = time_grid(2.0 * std::f64::consts::TAU, 0.1);
        let rec = evolve_expectations(
            &h,
            g.hbar,
            &rho,
            &g.position_operator(),
            &g.momentum_operator(),
            Some(&ForceField::harmonic(mu, omega)),
            &times,
        )
        .unwrap();
        for (k, &t) in times.iter().enumerate() {
            assert!((rec.q_quantum[k] - a * (omega * t).cos()).abs() <= 1e-3 * a);
            assert!((rec.p_quantum[k] + mu * omega * a * (omega * t).sin()).abs() <= 1e-3 * a);
            assert!(rec.gap[k] < 1e-9);
        }
        let fine = time_grid(2.0 * std::f64::consts::TAU, 1e-3);
        let (qc, _) = newton_trajectory(mu, &ForceField::harmonic(mu, omega), a, 0.0, &fine).unwrap();
        let closed: Vec<f64> = fine.iter().map(|t| a * (omega * t).cos()).collect();
        assert!(compare_trajectories(&qc, &closed) < 1e-8);
    }

    #[test]
    fn stationary_state_is_constant() {
        let g = Grid::new(64, 6.0, 1.0).unwrap();
        let h = harmonic_hamiltonian(&g, 1.0, 1.0).unwrap();
        let e = eigh(&h.as_mat().to_owned()).unwrap();
        let rho = DensityMatrix::pure(e.vectors.col_as_slice(0)).unwrap();
        let rec =
            evolve_expectations(&h, 1.0, &rho, &g.position_operator(), &g.momentum_operator(), None, &[0.0, 1.0, 5.0])
                .unwrap();
        assert!(rec.q_quantum.iter().all(|q| (q - rec.q_quantum[0]).abs() < 1e-10));
        assert!(evolve_expectations(&h, 1.0, &rho, &h, &h, None, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn newton_examples() {
        let times = time_grid(10.0, 0.01);
        let (q, p) = newton_trajectory(2.0, &ForceField::linear(0.0, 0.0), 1.0, 3.0, &times).unwrap();
        assert!((q.last().unwrap() - 16.0).abs() < 1e-12 && (p.last().unwrap() - 3.0).abs() < 1e-15);
        let f = ForceField::harmonic(1.0, 1.0);
        let times = time_grid(10.0 * std::f64::consts::TAU, 1e-3);
        let (q, p) = newton_trajectory(1.0, &f, 1.0, 0.0, &times).unwrap();
        let e = |k: usize| 0.5 * p[k] * p[k] + f.potential(q[k]);
        assert!((e(times.len() - 1) - e(0)).abs() <= 1e-8);
        assert_eq!(compare_trajectories(&q[..1], &[1.0]), 0.0);
    }

    #[test]
    fn sharpening_examples() {
        let times = time_grid(5.0, 0.01);
        let q = sharpening_ode(2.0, 0.5, 1.0, |_| 0.0, &times).unwrap();
        assert!(q.iter().all(|&x| x == 1.0));
        let q = sharpening_ode(2.0, 0.5, 1.0, |_| 0.3, &times).unwrap();
        assert!((q.last().unwrap() - (1.0 - 0.25 * 0.3 * 5.0)).abs() <= 1e-8);
        let q = sharpening_ode(2.0, 0.5, 1.0, |t| 0.3 * (-t).exp(), &time_grid(40.0, 0.01)).unwrap();
        assert!((q.last().unwrap() - (1.0 - 0.25 * 0.3)).abs() <= 1e-6);
    }
}
