//! Gate matrix constructions on Fock-truncated modes.
//!
//! Conventions (fixed across the crate): x̂ = (a+a†)/√2, p̂ = (a−a†)/(i√2),
//! ħ = 1, so the vacuum has Var(x̂) = 1/2. Displacements are parameterized by
//! the position shift β: D(β) = e^{−iβp̂}. The free-evolution gate is
//! F = e^{iπn̂/2}, which maps a packet at +x to a packet at +p.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Truncated x̂ in the Fock basis: tridiagonal with √(n+1)/√2 off the diagonal.
pub fn position_matrix(cutoff: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(cutoff, cutoff);
    for n in 0..cutoff - 1 {
        let v = ((n + 1) as f64 / 2.0).sqrt();
        m[(n, n + 1)] = v;
        m[(n + 1, n)] = v;
    }
    m
}

/// Truncated p̂ in the Fock basis (imaginary tridiagonal).
pub fn momentum_matrix(cutoff: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(cutoff, cutoff);
    for n in 0..cutoff - 1 {
        let v = ((n + 1) as f64 / 2.0).sqrt();
        // p̂ = (a − a†)/(i√2): ⟨n|p̂|n+1⟩ = √(n+1)/(i√2) = −i·v
        m[(n, n + 1)] = c(0.0, -v);
        m[(n + 1, n)] = c(0.0, v);
    }
    m
}

/// Eigendecomposition of truncated x̂: a discrete position grid and the
/// orthogonal change of basis into it. Computed once per cutoff and cached;
/// every operator-function-of-position reuses it.
pub struct PositionDiagonalization {
    pub cutoff: usize,
    /// grid points, ascending and symmetric about 0
    pub eigenvalues: DVector<f64>,
    /// column k is the grid-point-k eigenvector
    pub eigenvectors: DMatrix<f64>,
}

impl PositionDiagonalization {
    pub fn get(cutoff: usize) -> Arc<PositionDiagonalization> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<PositionDiagonalization>>>> =
            OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(hit) = cache.lock().unwrap().get(&cutoff) {
            return hit.clone();
        }
        let fresh = Arc::new(Self::compute(cutoff));
        cache.lock().unwrap().entry(cutoff).or_insert_with(|| fresh.clone());
        fresh
    }

    fn compute(cutoff: usize) -> PositionDiagonalization {
        let eig = position_matrix(cutoff).symmetric_eigen();
        let mut order: Vec<usize> = (0..cutoff).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = DVector::from_fn(cutoff, |i, _| eig.eigenvalues[order[i]]);
        let mut eigenvectors = DMatrix::zeros(cutoff, cutoff);
        for (i, &o) in order.iter().enumerate() {
            let col = eig.eigenvectors.column(o);
            // deterministic sign: largest-magnitude component positive
            let mut lead = 0;
            for r in 0..cutoff {
                if col[r].abs() > col[lead].abs() {
                    lead = r;
                }
            }
            let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
            for r in 0..cutoff {
                eigenvectors[(r, i)] = sign * col[r];
            }
        }
        PositionDiagonalization { cutoff, eigenvalues, eigenvectors }
    }

    pub fn max_position(&self) -> f64 {
        self.eigenvalues[self.cutoff - 1]
    }

    /// Change of basis diagonalizing p̂ = F x̂ F†: columns of diag(iⁿ)·V, with
    /// the same grid of eigenvalues.
    pub fn momentum_eigenvectors(&self) -> DMatrix<Complex64> {
        let n = self.cutoff;
        let mut w = DMatrix::zeros(n, n);
        for r in 0..n {
            let ph = Complex64::i().powu((r % 4) as u32);
            for k in 0..n {
                w[(r, k)] = ph * self.eigenvectors[(r, k)];
            }
        }
        w
    }
}

/// Largest grid point of the truncated x̂ at this cutoff; positions beyond
/// ~0.8 of it are unreliable.
pub fn max_position(cutoff: usize) -> f64 {
    PositionDiagonalization::get(cutoff).max_position()
}

pub fn check_position_range(cutoff: usize, x: f64) -> Result<()> {
    let max = max_position(cutoff);
    if x.abs() > 0.8 * max {
        Err(Error::RangeViolation { x, max: 0.8 * max, cutoff })
    } else {
        Ok(())
    }
}

/// A dense gate on one or more wires. The matrix index runs row-major over
/// `dims`. `duration_units` is the abstract time cost consumed by the
/// resource calculators: |β| for displacements, polynomial degree for
/// approximate block encodings, zero for idealized gates.
#[derive(Clone, Debug)]
pub struct GateMatrix {
    pub dims: Vec<usize>,
    pub matrix: DMatrix<Complex64>,
    pub duration_units: f64,
    /// unitary within 1e−8 on the truncated space; truncated displacements
    /// and projector-valued position functions are flagged instead
    pub unitary: bool,
    /// max column-norm deviation |1 − ‖M e_j‖²|
    pub defect: f64,
}

impl GateMatrix {
    pub fn new(dims: Vec<usize>, matrix: DMatrix<Complex64>, duration_units: f64) -> Self {
        let mut defect: f64 = 0.0;
        for j in 0..matrix.ncols() {
            defect = defect.max((1.0 - matrix.column(j).norm_squared()).abs());
        }
        GateMatrix { dims, matrix, duration_units, unitary: defect <= 1e-8, defect }
    }

    pub fn dagger(&self) -> GateMatrix {
        GateMatrix {
            dims: self.dims.clone(),
            matrix: self.matrix.adjoint(),
            duration_units: self.duration_units,
            unitary: self.unitary,
            defect: self.defect,
        }
    }
}

/// Fock matrix of the untruncated D(γ) = exp(γa† − γ̄a) projected to the
/// cutoff. Built from the corner with two recurrences, each applied only in
/// the triangle where its coefficients stay ≤ 1, so roundoff never amplifies:
///   m ≥ n:  ⟨m|D|n⟩ = (γ/√m)⟨m−1|D|n⟩ + √(n/m)⟨m−1|D|n−1⟩
///   m < n:  ⟨m|D|n⟩ = (−γ̄/√n)⟨m|D|n−1⟩ + √(m/n)⟨m−1|D|n−1⟩
/// Interior elements are exact; truncation error is confined to the boundary.
pub(crate) fn displacement_fock(cutoff: usize, gamma: Complex64) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(cutoff, cutoff);
    m[(0, 0)] = Complex64::from((-gamma.norm_sqr() / 2.0).exp());
    for row in 1..cutoff {
        m[(row, 0)] = gamma / (row as f64).sqrt() * m[(row - 1, 0)];
    }
    for col in 1..cutoff {
        let rc = (col as f64).sqrt().recip();
        m[(0, col)] = -gamma.conj() * rc * m[(0, col - 1)];
        for row in 1..cutoff {
            m[(row, col)] = if row >= col {
                let rr = (row as f64).sqrt().recip();
                gamma * rr * m[(row - 1, col)]
                    + ((col as f64).sqrt() * rr) * m[(row - 1, col - 1)]
            } else {
                -gamma.conj() * rc * m[(row, col - 1)]
                    + ((row as f64).sqrt() * rc) * m[(row - 1, col - 1)]
            };
        }
    }
    m
}

/// Position displacement D(β) = e^{−iβp̂}, shifting ⟨x̂⟩ by +β.
pub fn displacement(cutoff: usize, beta: f64) -> GateMatrix {
    // position shift β ↔ coherent amplitude α = β/√2
    let m = displacement_fock(cutoff, c(beta / std::f64::consts::SQRT_2, 0.0));
    GateMatrix::new(vec![cutoff], m, beta.abs())
}

/// |0⟩⟨0|⊗I + |1⟩⟨1|⊗D(β) on (qubit, mode).
pub fn conditional_displacement(cutoff: usize, beta: f64) -> GateMatrix {
    let d = displacement(cutoff, beta);
    let mut m = DMatrix::zeros(2 * cutoff, 2 * cutoff);
    for i in 0..cutoff {
        m[(i, i)] = Complex64::ONE;
        for j in 0..cutoff {
            m[(cutoff + i, cutoff + j)] = d.matrix[(i, j)];
        }
    }
    GateMatrix::new(vec![2, cutoff], m, beta.abs())
}

/// exp((r/2)(a² − a†²)): squeezes Var(x̂) of the vacuum to e^{−2r}/2, so a
/// packet of width σ needs r = −ln(σ√2).
pub fn squeeze(cutoff: usize, r: f64) -> GateMatrix {
    // iK is Hermitian for K = (r/2)(a² − a†²); exponentiate by eigenvalues
    let mut h = DMatrix::<Complex64>::zeros(cutoff, cutoff);
    for n in 0..cutoff.saturating_sub(2) {
        let v = (((n + 1) * (n + 2)) as f64).sqrt() * r / 2.0;
        h[(n, n + 2)] = c(0.0, v);
        h[(n + 2, n)] = c(0.0, -v);
    }
    let eig = h.symmetric_eigen();
    let n = cutoff;
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n {
        let phase = c(0.0, -eig.eigenvalues[k]).exp();
        let col = eig.eigenvectors.column(k);
        for i in 0..n {
            let lik = col[i] * phase;
            for j in 0..n {
                m[(i, j)] += lik * col[j].conj();
            }
        }
    }
    GateMatrix::new(vec![cutoff], m, 0.0)
}

/// Quarter-period rotation F = e^{iπn̂/2} = diag(iⁿ). Satisfies
/// F x̂ F† = +p̂ exactly on the truncated space.
pub fn free_evolution(cutoff: usize) -> GateMatrix {
    let mut m = DMatrix::zeros(cutoff, cutoff);
    for n in 0..cutoff {
        m[(n, n)] = Complex64::i().powu((n % 4) as u32);
    }
    GateMatrix::new(vec![cutoff], m, 0.0)
}

/// e^{iλ x̂_j ⊗ x̂_k} on two modes, diagonal in the joint position grid.
/// Dense construction; circuit simulation uses the factored form instead.
pub fn cross_phase(cutoff_j: usize, cutoff_k: usize, lambda: f64) -> GateMatrix {
    let dj = PositionDiagonalization::get(cutoff_j);
    let dk = PositionDiagonalization::get(cutoff_k);
    let (nj, nk) = (cutoff_j, cutoff_k);
    let mut m = DMatrix::zeros(nj * nk, nj * nk);
    let vk = &dk.eigenvectors;
    for k1 in 0..nj {
        // A = V_k diag(e^{iλ x_{k1} μ}) V_kᵀ
        let mut a = DMatrix::<Complex64>::zeros(nk, nk);
        for k2 in 0..nk {
            let phase = c(0.0, lambda * dj.eigenvalues[k1] * dk.eigenvalues[k2]).exp();
            for i in 0..nk {
                let vik = vk[(i, k2)] * phase;
                for j in 0..nk {
                    a[(i, j)] += vik * vk[(j, k2)];
                }
            }
        }
        for m1 in 0..nj {
            let vm = dj.eigenvectors[(m1, k1)];
            if vm == 0.0 {
                continue;
            }
            for n1 in 0..nj {
                let coeff = vm * dj.eigenvectors[(n1, k1)];
                for m2 in 0..nk {
                    for n2 in 0..nk {
                        m[(m1 * nk + m2, n1 * nk + n2)] += coeff * a[(m2, n2)];
                    }
                }
            }
        }
    }
    GateMatrix::new(vec![nj, nk], m, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
}

impl PauliAxis {
    fn matrix(self) -> [[Complex64; 2]; 2] {
        match self {
            PauliAxis::X => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
            PauliAxis::Y => [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quadrature {
    Position,
    Momentum,
}

/// e^{iθ q̂⊗σ_axis} on (qubit, mode), via the quadrature eigenbasis: a 2×2
/// rotation e^{iθλσ} at every grid point λ.
pub fn hybrid_pauli_exp(
    cutoff: usize,
    axis: PauliAxis,
    quadrature: Quadrature,
    theta: f64,
) -> GateMatrix {
    let diag = PositionDiagonalization::get(cutoff);
    let w: DMatrix<Complex64> = match quadrature {
        Quadrature::Position => diag.eigenvectors.map(|v| c(v, 0.0)),
        Quadrature::Momentum => diag.momentum_eigenvectors(),
    };
    let sigma = axis.matrix();
    let n = cutoff;
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        let ang = theta * diag.eigenvalues[k];
        // e^{iθλσ} = cos(θλ) I + i sin(θλ) σ
        let (co, si) = (ang.cos(), ang.sin());
        let mut r = [[c(co, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(co, 0.0)]];
        for s in 0..2 {
            for t in 0..2 {
                r[s][t] += Complex64::i() * si * sigma[s][t];
            }
        }
        for i in 0..n {
            let wik = w[(i, k)];
            if wik == Complex64::ZERO {
                continue;
            }
            for j in 0..n {
                let base = wik * w[(j, k)].conj();
                for s in 0..2 {
                    for t in 0..2 {
                        m[(s * n + i, t * n + j)] += base * r[s][t];
                    }
                }
            }
        }
    }
    GateMatrix::new(vec![2, cutoff], m, theta.abs())
}

/// V·diag(f(x))·Vᵀ: an arbitrary (bounded) function of x̂. Unimodular f gives
/// a unitary gate; projector-valued f is flagged through the defect field.
pub fn apply_position_function<F>(cutoff: usize, f: F) -> GateMatrix
where
    F: Fn(f64) -> Complex64,
{
    let diag = PositionDiagonalization::get(cutoff);
    let n = cutoff;
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n {
        let fk = f(diag.eigenvalues[k]);
        if fk == Complex64::ZERO {
            continue;
        }
        for i in 0..n {
            let vik = diag.eigenvectors[(i, k)] * fk;
            for j in 0..n {
                m[(i, j)] += vik * diag.eigenvectors[(j, k)];
            }
        }
    }
    GateMatrix::new(vec![cutoff], m, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{HybridState, RegisterLayout, WireKind};
    use crate::testutil::{cmax, position_wavefunction, simpson};
    use approx::assert_abs_diff_eq;

    fn vacuum(cutoff: usize) -> HybridState {
        HybridState::basis_state(RegisterLayout::single(WireKind::Mode(cutoff)), &[0]).unwrap()
    }

    fn mode_mean_x(s: &HybridState, wire: usize) -> f64 {
        let n = s.layout().wire_dim(wire);
        s.expect_wire(wire, &position_matrix(n).map(|v| c(v, 0.0))).unwrap().re
    }

    fn mode_mean_p(s: &HybridState, wire: usize) -> f64 {
        let n = s.layout().wire_dim(wire);
        s.expect_wire(wire, &momentum_matrix(n)).unwrap().re
    }

    #[test]
    fn position_diagonalization_reconstructs_tridiagonal() {
        let d = PositionDiagonalization::get(40);
        let x = position_matrix(40);
        let recon =
            &d.eigenvectors * DMatrix::from_diagonal(&d.eigenvalues) * d.eigenvectors.transpose();
        assert!((recon - &x).amax() < 1e-10);
        for k in 1..40 {
            assert!(d.eigenvalues[k] > d.eigenvalues[k - 1]);
            // grid symmetric about zero
            assert_abs_diff_eq!(d.eigenvalues[k] + d.eigenvalues[39 - k], 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn displacement_zero_is_identity() {
        let d = displacement(30, 0.0);
        assert!(cmax(&(&d.matrix - DMatrix::<Complex64>::identity(30, 30))) < 1e-14);
        assert_eq!(d.duration_units, 0.0);
        assert!(d.unitary);
    }

    #[test]
    fn displacement_inverse_pair_roundtrips() {
        let mut s = vacuum(60);
        s.apply_wire(0, &squeeze(60, 0.4).matrix).unwrap();
        let before = s.clone();
        s.apply_wire(0, &displacement(60, 1.3).matrix).unwrap();
        s.apply_wire(0, &displacement(60, -1.3).matrix).unwrap();
        let f = crate::hilbert::fidelity(&before, &s).unwrap();
        assert!(f > 1.0 - 1e-8, "roundtrip fidelity {f}");
        assert!(s.leaked_norm() < 1e-8);
    }

    #[test]
    fn displaced_vacuum_mean_matches_quadrature_oracle() {
        // oracle: Simpson integration of x|φ₀(x−1)|² on a wide grid
        let grid: Vec<f64> = (0..4001).map(|i| -10.0 + i as f64 * 0.005).collect();
        let psi: Vec<f64> = grid
            .iter()
            .map(|&x| (-(x - 1.0) * (x - 1.0) / 2.0).exp() / std::f64::consts::PI.powf(0.25))
            .collect();
        let oracle = simpson(&grid, |i| grid[i] * psi[i] * psi[i]);
        let mut s = vacuum(80);
        s.apply_wire(0, &displacement(80, 1.0).matrix).unwrap();
        assert_abs_diff_eq!(mode_mean_x(&s, 0), oracle, epsilon = 1e-3);
        assert_abs_diff_eq!(oracle, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn displacement_truncation_is_boundary_confined() {
        // column 0 is the exact coherent expansion; with N ≥ 8β² the Poisson
        // tail above the cutoff is negligible and vacuum displaces losslessly
        let beta = 2.0f64;
        let n = (8.0 * beta * beta) as usize; // 32
        let mut s = vacuum(n);
        s.apply_wire(0, &displacement(n, beta).matrix).unwrap();
        assert!(s.leaked_norm() < 1e-12, "leak {}", s.leaked_norm());
        assert_abs_diff_eq!(mode_mean_x(&s, 0), beta, epsilon = 1e-9);
        // deep truncation is flagged through the column-norm defect
        let clipped = displacement(8, 3.0);
        assert!(!clipped.unitary, "heavily truncated displacement must be flagged");
        assert!(clipped.defect > 1e-3);
    }

    #[test]
    fn conditional_displacement_block_structure_exact() {
        let n = 24;
        let beta = 0.9;
        let cd = conditional_displacement(n, beta);
        let d = displacement(n, beta);
        for i in 0..n {
            for j in 0..n {
                let id = if i == j { Complex64::ONE } else { Complex64::ZERO };
                assert_eq!(cd.matrix[(i, j)], id);
                assert_eq!(cd.matrix[(n + i, n + j)], d.matrix[(i, j)]);
                assert_eq!(cd.matrix[(i, n + j)], Complex64::ZERO);
                assert_eq!(cd.matrix[(n + i, j)], Complex64::ZERO);
            }
        }
    }

    #[test]
    fn conditional_displacement_branches() {
        let n = 60;
        let delta = 1.0;
        let layout =
            RegisterLayout::new(vec![WireKind::Qubit, WireKind::Mode(n)]).unwrap();
        let plus = {
            let amps = vec![c(1.0, 0.0), c(1.0, 0.0)];
            HybridState::from_amplitudes(RegisterLayout::single(WireKind::Qubit), amps).unwrap()
        };
        let mut s = plus.tensor(&vacuum(n)).unwrap();
        assert_eq!(s.layout(), &layout);
        s.apply_wires(&[0, 1], &conditional_displacement(n, delta).matrix).unwrap();
        let zero = HybridState::basis_state(RegisterLayout::single(WireKind::Qubit), &[0]).unwrap();
        let one = HybridState::basis_state(RegisterLayout::single(WireKind::Qubit), &[1]).unwrap();
        let (m0, p0) = s.project_wire(0, &zero).unwrap();
        let (m1, p1) = s.project_wire(0, &one).unwrap();
        assert_abs_diff_eq!(p0, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(p1, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(mode_mean_x(&m0, 0), 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(mode_mean_x(&m1, 0), delta, epsilon = 1e-6);
    }

    #[test]
    fn squeeze_zero_is_identity() {
        let s = squeeze(20, 0.0);
        assert!(cmax(&(&s.matrix - DMatrix::<Complex64>::identity(20, 20))) < 1e-12);
    }

    #[test]
    fn squeezed_vacuum_variance() {
        let r = 1.2;
        let mut s = vacuum(80);
        s.apply_wire(0, &squeeze(80, r).matrix).unwrap();
        let x = position_matrix(80).map(|v| c(v, 0.0));
        let x2 = &x * &x;
        let mean = s.expect_wire(0, &x).unwrap().re;
        let var = s.expect_wire(0, &x2).unwrap().re - mean * mean;
        assert_abs_diff_eq!(var, (-2.0 * r).exp() / 2.0, epsilon = 1e-4);
    }

    #[test]
    fn squeeze_inverse_pair() {
        let n = 40;
        let prod = &squeeze(n, 0.8).matrix * &squeeze(n, -0.8).matrix;
        assert!(cmax(&(prod - DMatrix::<Complex64>::identity(n, n))) < 1e-8);
    }

    #[test]
    fn free_evolution_fixes_vacuum_and_rotates_packets() {
        let n = 60;
        let f = free_evolution(n);
        let mut v = vacuum(n);
        v.apply_wire(0, &f.matrix).unwrap();
        assert_abs_diff_eq!(
            crate::hilbert::fidelity(&v, &vacuum(n)).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let cshift = 1.4;
        let mut s = vacuum(n);
        s.apply_wire(0, &displacement(n, cshift).matrix).unwrap();
        assert_abs_diff_eq!(mode_mean_p(&s, 0), 0.0, epsilon = 1e-6);
        s.apply_wire(0, &f.matrix).unwrap();
        // packet at +x moves to +p
        assert_abs_diff_eq!(mode_mean_x(&s, 0), 0.0, epsilon = 1e-3);
        assert_abs_diff_eq!(mode_mean_p(&s, 0), cshift, epsilon = 1e-3);
    }

    #[test]
    fn free_evolution_fourth_power_and_conjugation() {
        let n = 30;
        let f = free_evolution(n).matrix;
        let f4 = &f * &f * &f * &f;
        assert!(cmax(&(f4 - DMatrix::<Complex64>::identity(n, n))) < 1e-10);
        let x = position_matrix(n).map(|v| c(v, 0.0));
        let conj = &f * &x * f.adjoint();
        assert!(cmax(&(conj - momentum_matrix(n))) < 1e-12, "F x̂ F† = +p̂ elementwise");
    }

    #[test]
    fn cross_phase_identity_and_unitarity() {
        let g = cross_phase(8, 8, 0.0);
        assert!(cmax(&(&g.matrix - DMatrix::<Complex64>::identity(64, 64))) < 1e-10);
        let g = cross_phase(8, 8, 0.7);
        let dev = g.matrix.adjoint() * &g.matrix - DMatrix::<Complex64>::identity(64, 64);
        assert!(cmax(&dev) < 1e-8);
    }

    #[test]
    fn cross_phase_kicks_product_of_packets() {
        // narrow packets at (x₁,x₂): ⟨ψ|U|ψ⟩ ≈ e^{iλx₁x₂}
        let n = 70;
        let (x1, x2, lambda) = (1.1, -0.8, 0.6);
        let r = 1.0; // σ ≈ 0.26
        let mut m1 = vacuum(n);
        m1.apply_wire(0, &squeeze(n, r).matrix).unwrap();
        m1.apply_wire(0, &displacement(n, x1).matrix).unwrap();
        let mut m2 = vacuum(n);
        m2.apply_wire(0, &squeeze(n, r).matrix).unwrap();
        m2.apply_wire(0, &displacement(n, x2).matrix).unwrap();
        let s = m1.tensor(&m2).unwrap();
        let mut t = s.clone();
        t.apply_wires(&[0, 1], &cross_phase(n, n, lambda).matrix).unwrap();
        let ov = crate::hilbert::inner(&s, &t);
        let expect = c(0.0, lambda * x1 * x2).exp();
        // width effects smear the phase at O(λ²σ²|x|²); keep a loose window
        assert!((ov - expect).norm() < 0.05, "overlap {ov}, expected {expect}");
        assert!(ov.norm() > 0.95);
    }

    #[test]
    fn hybrid_pauli_identity_and_unitarity() {
        let g = hybrid_pauli_exp(12, PauliAxis::Y, Quadrature::Position, 0.0);
        assert!(cmax(&(&g.matrix - DMatrix::<Complex64>::identity(24, 24))) < 1e-10);
        let g = hybrid_pauli_exp(12, PauliAxis::X, Quadrature::Momentum, 0.9);
        let dev = g.matrix.adjoint() * &g.matrix - DMatrix::<Complex64>::identity(24, 24);
        assert!(cmax(&dev) < 1e-8);
    }

    #[test]
    fn hybrid_pauli_on_x_eigenstate_is_pure_displacement() {
        // e^{iθp̂σₓ} on |+⟩⊗vacuum displaces the mode by −θ
        let n = 60;
        let theta = 0.8;
        let plus = HybridState::from_amplitudes(
            RegisterLayout::single(WireKind::Qubit),
            vec![c(1.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        let mut s = plus.tensor(&vacuum(n)).unwrap();
        s.apply_wires(&[0, 1], &hybrid_pauli_exp(n, PauliAxis::X, Quadrature::Momentum, theta).matrix)
            .unwrap();
        let (m, p) = s
            .project_wire(
                0,
                &HybridState::from_amplitudes(
                    RegisterLayout::single(WireKind::Qubit),
                    vec![c(1.0, 0.0), c(1.0, 0.0)],
                )
                .unwrap(),
            )
            .unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(mode_mean_x(&m, 0), -theta, epsilon = 1e-4);
    }

    #[test]
    fn position_function_identity_and_projector() {
        let g = apply_position_function(16, |_| Complex64::ONE);
        assert!(cmax(&(&g.matrix - DMatrix::<Complex64>::identity(16, 16))) < 1e-10);
        let p = apply_position_function(16, |x| if x > 0.0 { Complex64::ONE } else { Complex64::ZERO });
        assert!(!p.unitary);
        let sq = &p.matrix * &p.matrix;
        assert!(cmax(&(sq - &p.matrix)) < 1e-8, "projector must be idempotent");
    }

    #[test]
    fn position_phase_matches_pade_exponential_oracle() {
        let n = 24;
        let kappa = 0.3;
        let g = apply_position_function(n, |x| c(0.0, kappa * x).exp());
        let oracle = (position_matrix(n).map(|v| c(0.0, kappa * v))).exp();
        assert!(cmax(&(&g.matrix - oracle)) < 1e-6);
    }

    #[test]
    fn position_function_commutes_with_cross_phase() {
        let n = 8;
        let g1 = cross_phase(n, n, 0.5);
        let f = apply_position_function(n, |x| c(0.0, 0.3 * x * x).exp());
        let mut f_full = DMatrix::<Complex64>::zeros(n * n, n * n);
        // f on the first mode, identity on the second
        for i1 in 0..n {
            for j1 in 0..n {
                for k in 0..n {
                    f_full[(i1 * n + k, j1 * n + k)] = f.matrix[(i1, j1)];
                }
            }
        }
        let ab = &g1.matrix * &f_full;
        let ba = f_full * &g1.matrix;
        assert!(cmax(&(ab - ba)) < 1e-10);
    }

    #[test]
    fn fock_wavefunctions_match_hermite_oracle() {
        // the DVR eigenvector columns sample Hermite functions up to the
        // quadrature weight: check via an independently reconstructed ψ(x)
        let n = 40;
        let mut s = vacuum(n);
        s.apply_wire(0, &displacement(n, 0.7).matrix).unwrap();
        let grid: Vec<f64> = (0..2001).map(|i| -8.0 + i as f64 * 0.008).collect();
        let psi = position_wavefunction(s.amplitudes(), &grid);
        let norm = simpson(&grid, |i| psi[i].norm_sqr());
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-6);
        let mean = simpson(&grid, |i| grid[i] * psi[i].norm_sqr());
        assert_abs_diff_eq!(mean, 0.7, epsilon = 1e-6);
    }
}
