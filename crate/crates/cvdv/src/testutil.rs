//! Oracles shared by unit tests: position-space reconstruction through the
//! Hermite-function recurrence and plain Simpson quadrature. Deliberately
//! independent of the DVR eigenbasis used by the implementation.

use num_complex::Complex64;

/// φ_n(x) for n = 0..count at one point, via the stable recurrence
/// φ_{n+1} = (√2·x·φ_n − √n·φ_{n−1})/√(n+1), φ₀ = π^{−1/4}e^{−x²/2}.
pub fn hermite_functions(x: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let phi0 = (-x * x / 2.0).exp() / std::f64::consts::PI.powf(0.25);
    out.push(phi0);
    if count == 1 {
        return out;
    }
    out.push(std::f64::consts::SQRT_2 * x * phi0);
    for n in 1..count - 1 {
        let next = (std::f64::consts::SQRT_2 * x * out[n] - (n as f64).sqrt() * out[n - 1])
            / ((n + 1) as f64).sqrt();
        out.push(next);
    }
    out
}

/// ψ(x) = Σ c_n φ_n(x) on a grid, from Fock amplitudes.
pub fn position_wavefunction(amps: &[Complex64], grid: &[f64]) -> Vec<Complex64> {
    grid.iter()
        .map(|&x| {
            let phi = hermite_functions(x, amps.len());
            amps.iter().zip(phi.iter()).map(|(c, p)| c * p).sum()
        })
        .collect()
}

/// Largest entry magnitude of a complex matrix (amax does not apply there).
pub fn cmax(m: &nalgebra::DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Composite Simpson on a uniform grid with an odd number of points.
pub fn simpson<F: Fn(usize) -> f64>(grid: &[f64], f: F) -> f64 {
    assert!(grid.len() >= 3 && grid.len() % 2 == 1, "need an odd uniform grid");
    let h = grid[1] - grid[0];
    let mut acc = f(0) + f(grid.len() - 1);
    for i in 1..grid.len() - 1 {
        acc += f(i) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Complex-valued Simpson, for overlap integrals.
pub fn simpson_c<F: Fn(usize) -> Complex64>(grid: &[f64], f: F) -> Complex64 {
    assert!(grid.len() >= 3 && grid.len() % 2 == 1, "need an odd uniform grid");
    let h = grid[1] - grid[0];
    let mut acc = f(0) + f(grid.len() - 1);
    for i in 1..grid.len() - 1 {
        acc += f(i) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * (h / 3.0)
}
