//! State and operator generators: grid wavepackets, seeded random ensembles.
//!
//! Random draws go through [`rng_for`], which gives every `(seed, stream)`
//! pair its own ChaCha stream so sweeps are reproducible regardless of how
//! work is scheduled.

use faer::Mat;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{QrnError, Result};
use crate::linalg::{DensityMatrix, Grid, HermitianOperator, C64};

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Discretized Gaussian `exp(−(x−x₀)²/4σ² + i k₀ x)`, normalized on the grid.
pub fn gaussian_wavefunction(grid: &Grid, mean: f64, sigma: f64, wavenumber: f64) -> Result<Vec<C64>> {
    if !(sigma > 0.0) {
        return Err(QrnError::InvalidArgument(format!("packet width must be positive, got {sigma}")));
    }
    let mut psi: Vec<C64> = grid
        .positions()
        .iter()
        .map(|&x| {
            let amp = (-(x - mean).powi(2) / (4.0 * sigma * sigma)).exp();
            C64::from_polar(amp, wavenumber * x)
        })
        .collect();
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(QrnError::GridTooCoarse(format!("packet at {mean} with width {sigma} has no support on the grid")));
    }
    psi.iter_mut().for_each(|z| *z /= norm);
    Ok(psi)
}

pub fn gaussian_state(grid: &Grid, mean: f64, sigma: f64) -> Result<DensityMatrix> {
    DensityMatrix::pure(&gaussian_wavefunction(grid, mean, sigma, 0.0)?)
}

/// Diagonal mixture of position eigenstates `Σ wᵢ |xᵢ⟩⟨xᵢ|`, each weight put
/// on the grid point nearest to the requested position.
pub fn point_mixture(grid: &Grid, points: &[(f64, f64)]) -> Result<DensityMatrix> {
    let mut w = vec![0.0; grid.n];
    for &(x, weight) in points {
        w[nearest_index(grid, x)?] += weight;
    }
    DensityMatrix::diagonal(&w)
}

pub fn nearest_index(grid: &Grid, x: f64) -> Result<usize> {
    let k = ((x + grid.half_width) / grid.step()).round();
    if k < 0.0 || k >= grid.n as f64 {
        return Err(QrnError::InvalidArgument(format!("position {x} lies outside the grid")));
    }
    Ok(k as usize)
}

/// Gaussian-entry Hermitian matrix (GUE scaling: unit-variance diagonal,
/// off-diagonal real and imaginary parts with variance ½).
pub fn random_hermitian(dim: usize, rng: &mut impl Rng) -> HermitianOperator {
    let mut mat = Mat::zeros(dim, dim);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..dim {
        mat[(j, j)] = C64::new(normal(rng), 0.0);
        for i in 0..j {
            let z = C64::new(normal(rng) * s, normal(rng) * s);
            mat[(i, j)] = z;
            mat[(j, i)] = z.conj();
        }
    }
    HermitianOperator::new("H", mat).expect("constructed Hermitian")
}

/// Random Hermitian with trace removed.
pub fn random_traceless_hermitian(dim: usize, rng: &mut impl Rng) -> HermitianOperator {
    let h = random_hermitian(dim, rng);
    let t = h.trace() / dim as f64;
    h.shift(-t)
}

/// Haar-distributed unit vector (normalized complex Gaussian).
pub fn random_unit_vector(dim: usize, rng: &mut impl Rng) -> Vec<C64> {
    let mut psi: Vec<C64> = (0..dim).map(|_| C64::new(normal(rng), normal(rng))).collect();
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    psi.iter_mut().for_each(|z| *z /= norm);
    psi
}

/// Haar-like pure state.
pub fn random_pure(dim: usize, rng: &mut impl Rng) -> DensityMatrix {
    DensityMatrix::pure(&random_unit_vector(dim, rng)).expect("non-zero Gaussian vector")
}

/// Wishart state `G G† / Tr(G G†)` with `G` of shape `dim × rank`.
pub fn random_density(dim: usize, rank: usize, rng: &mut impl Rng) -> DensityMatrix {
    let rank = rank.clamp(1, dim);
    let g = Mat::from_fn(dim, rank, |_, _| C64::new(normal(rng), normal(rng)));
    let w = &g * g.adjoint();
    let tr: f64 = (0..dim).map(|k| w[(k, k)].re).sum();
    DensityMatrix::new(Mat::from_fn(dim, dim, |i, j| w[(i, j)] / tr)).expect("Wishart matrix is a state")
}

/// Random state supported inside the range of `basis` (columns orthonormal).
pub fn random_density_in(basis: &[Vec<C64>], rank: usize, rng: &mut impl Rng) -> Result<DensityMatrix> {
    let Some(first) = basis.first() else {
        return Err(QrnError::InvalidArgument("empty subspace".into()));
    };
    let dim = first.len();
    let k = basis.len();
    let inner = random_density(k, rank, rng);
    let v = Mat::from_fn(dim, k, |i, j| basis[j][i]);
    let m = &(&v * inner.as_mat()) * v.adjoint();
    DensityMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::trace_inner;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<f64> = (0..4).map(|_| rng_for(7, 1).random()).collect();
        let b: Vec<f64> = (0..4).map(|_| rng_for(7, 1).random()).collect();
        assert_eq!(a, b);
        let x: f64 = rng_for(7, 1).random();
        let y: f64 = rng_for(7, 2).random();
        assert_ne!(x, y);
    }

    #[test]
    fn gaussian_moments_on_fine_grid() {
        let g = Grid::new(512, 10.0, 1.0).unwrap();
        let sigma = 0.7;
        let rho = gaussian_state(&g, 0.0, sigma).unwrap();
        let q = g.position_operator();
        let p = g.momentum_operator();
        assert!(trace_inner(&rho, &p).unwrap().abs() < 1e-8);
        let q2 = trace_inner(&rho, &q.square()).unwrap();
        assert!((q2 - sigma * sigma).abs() < 0.01 * sigma * sigma, "{q2}");
    }

    #[test]
    fn random_states_are_valid() {
        let mut rng = rng_for(3, 0);
        let rho = random_density(6, 3, &mut rng);
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        assert!(rho.eigenvalues().unwrap()[0] > -1e-12);
        let h = random_traceless_hermitian(5, &mut rng);
        assert!(h.trace().abs() < 1e-12);
    }

    #[test]
    fn point_mixture_snaps_to_grid() {
        let g = Grid::new(8, 4.0, 1.0).unwrap();
        let rho = point_mixture(&g, &[(0.1, 1.0), (2.0, 1.0)]).unwrap();
        assert_eq!(rho.entry(4, 4).re, 0.5);
        assert_eq!(rho.entry(6, 6).re, 0.5);
        assert!(point_mixture(&g, &[(9.0, 1.0)]).is_err());
    }
}
