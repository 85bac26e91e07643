//! Wigner function of a single-mode density matrix.
//!
//! Displaced-parity form: W(x,p) = (1/π)·Tr[ρ·D(2γ)·Π] with γ = (x+ip)/√2
//! and Π = (−1)^n̂. Vacuum gives (1/π)e^{−x²−p²}, peak 1/π, unit integral.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gates::displacement_fock;
use crate::hilbert::{DensityBlock, WireKind};

/// W sampled on the outer product of the grids; rows index x, columns p.
/// The kernel is exact per point up to the Fock cutoff of `rho`; a grid
/// step coarser than the vacuum width only degrades the caller's quadrature,
/// so it draws a warning rather than an error.
pub fn wigner(rho: &DensityBlock, x_grid: &[f64], p_grid: &[f64]) -> Result<DMatrix<f64>> {
    let wires = rho.layout().wires();
    if wires.len() != 1 || !matches!(wires[0], WireKind::Mode(_)) {
        return Err(Error::LayoutMismatch(format!(
            "wigner needs a single-mode density block, got {:?}",
            wires
        )));
    }
    let n = rho.layout().dim();
    for grid in [x_grid, p_grid] {
        if grid.windows(2).any(|w| w[1] - w[0] > 0.5) {
            eprintln!("warning: wigner grid step exceeds 0.5, quadrature on it will be coarse");
            break;
        }
    }
    let mut out = DMatrix::zeros(x_grid.len(), p_grid.len());
    for (ix, &x) in x_grid.iter().enumerate() {
        for (ip, &p) in p_grid.iter().enumerate() {
            let gamma = Complex64::new(x, p) / std::f64::consts::SQRT_2;
            let d = displacement_fock(n, 2.0 * gamma);
            let mut tr = Complex64::ZERO;
            for i in 0..n {
                let parity = if i % 2 == 0 { 1.0 } else { -1.0 };
                for j in 0..n {
                    // Tr[ρ D Π] = Σ ρ[i,j]·D[j,i]·Π[i]
                    tr += rho.matrix()[(i, j)] * d[(j, i)] * parity;
                }
            }
            out[(ix, ip)] = tr.re / std::f64::consts::PI;
        }
    }
    Ok(out)
}

/// Trapezoid mass and first moments of a sampled W; the mass doubles as the
/// normalization check. Returns (mass, ⟨x⟩, ⟨p⟩) with means mass-normalized.
pub fn grid_moments(w: &DMatrix<f64>, x_grid: &[f64], p_grid: &[f64]) -> (f64, f64, f64) {
    let weight = |grid: &[f64], i: usize| -> f64 {
        let lo = if i == 0 { grid[0] } else { grid[i - 1] };
        let hi = if i == grid.len() - 1 { grid[i] } else { grid[i + 1] };
        (hi - lo) / 2.0
    };
    let (mut mass, mut mx, mut mp) = (0.0, 0.0, 0.0);
    for ix in 0..x_grid.len() {
        let wx = weight(x_grid, ix);
        for ip in 0..p_grid.len() {
            let cell = w[(ix, ip)] * wx * weight(p_grid, ip);
            mass += cell;
            mx += cell * x_grid[ix];
            mp += cell * p_grid[ip];
        }
    }
    (mass, mx / mass, mp / mass)
}
