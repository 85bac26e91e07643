//! Square-wave bit targets, their degree-limited Fourier approximants with a
//! measured error certificate, and the SU(2)-valued reflection that reads a
//! target bit of the lattice position into a qubit.
//!
//! The reflection convention: at positions where the target bit is b, the
//! gate applies [[S, √(1−S²)], [−√(1−S²), S]] with S = 1−b on the qubit, so
//! a qubit holding |b⟩ is returned to |0⟩ with no branch phase, and the
//! adjoint writes |0⟩ → |b⟩. That makes the disentangling contract exact for
//! packets on lattice points.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gates::{max_position, GateMatrix, PositionDiagonalization};

/// Piecewise-constant {0,1} targets. `j` counts bit significance from 1 =
/// most significant. Levels are position lattice indices: x = (index)·Δ.
#[derive(Clone, Debug, PartialEq)]
pub enum SquareWaveSpec {
    /// bit j of an n_bits-bit level index at spacing Δ
    DataBit { j: usize, n_bits: usize, delta: f64 },
    /// bit j of the comb index k in x = (2^block_bits·k + y)·Δ; reads the
    /// padding register, blind to the data offset y
    PadBit { j: usize, block_bits: usize, pad_bits: usize, delta: f64 },
    /// PadBit displaced by (2^{pad_bits−j}−1)·2^{block_bits}·Δ, which reads
    /// bit j of the magnitude |k| for negative comb indices (two's-complement
    /// identity: bit_p(−k−1) = 1 − bit_p(k))
    ShiftedPadBit { j: usize, block_bits: usize, pad_bits: usize, delta: f64 },
    /// 1 iff x < threshold; periodic continuation outside the fitted window
    SignStep { threshold: f64 },
}

impl SquareWaveSpec {
    /// (p, Δ, shift) for the bit kinds: the wave is Θ(cos[π/2ᵖ(x̃/Δ − 2^{p−1}
    /// + 1/2)]) at x̃ = x + shift, with p the bit position from the bottom.
    fn bit_params(&self) -> Option<(i32, f64, f64)> {
        match *self {
            SquareWaveSpec::DataBit { j, n_bits, delta } => {
                assert!(j >= 1 && j <= n_bits, "bit index {j} out of 1..={n_bits}");
                Some(((n_bits - j) as i32, delta, 0.0))
            }
            SquareWaveSpec::PadBit { j, block_bits, pad_bits, delta } => {
                assert!(j >= 1 && j <= pad_bits, "pad bit {j} out of 1..={pad_bits}");
                Some(((block_bits + pad_bits - j) as i32, delta, 0.0))
            }
            SquareWaveSpec::ShiftedPadBit { j, block_bits, pad_bits, delta } => {
                assert!(j >= 1 && j <= pad_bits, "pad bit {j} out of 1..={pad_bits}");
                let shift = ((1u64 << (pad_bits - j)) - 1) as f64 * (1u64 << block_bits) as f64
                    * delta;
                Some(((block_bits + pad_bits - j) as i32, delta, shift))
            }
            SquareWaveSpec::SignStep { .. } => None,
        }
    }

    /// Full period of the wave, if it has a natural one.
    pub fn natural_period(&self) -> Option<f64> {
        self.bit_params().map(|(p, delta, _)| 2f64.powi(p + 1) * delta)
    }

    /// Lattice spacing the wave discriminates, if known from the spec.
    pub fn spacing(&self) -> Option<f64> {
        self.bit_params().map(|(_, delta, _)| delta)
    }

    /// Symmetry center for a fit window of half-period `l`: the wave is even
    /// about it, which keeps every Fourier coefficient real.
    fn center(&self, l: f64) -> f64 {
        match self.bit_params() {
            Some((p, delta, shift)) => delta * (2f64.powi(p - 1) - 0.5) - shift,
            None => match *self {
                SquareWaveSpec::SignStep { threshold } if threshold.is_finite() => {
                    threshold - l / 2.0
                }
                SquareWaveSpec::SignStep { .. } => 0.0,
                _ => unreachable!(),
            },
        }
    }

    /// Start of the period window on which the raw target coincides with its
    /// periodization. Bit waves are periodic, so any window works; a step is
    /// periodized symmetrically about its jump.
    fn window_start(&self, l: f64) -> f64 {
        match *self {
            SquareWaveSpec::SignStep { threshold } if threshold.is_finite() => threshold - l,
            _ => self.center(l) - l,
        }
    }

    /// Jump points within one period, if any.
    fn jump_points(&self, l: f64) -> Vec<f64> {
        match *self {
            SquareWaveSpec::SignStep { threshold } if !threshold.is_finite() => vec![],
            _ => {
                let c = self.center(l);
                vec![c - l / 2.0, c + l / 2.0]
            }
        }
    }
}

/// Exact pointwise target value.
pub fn evaluate_target(spec: &SquareWaveSpec, x: f64) -> u8 {
    match spec.bit_params() {
        Some((p, delta, shift)) => {
            let scale = 2f64.powi(p);
            let arg = std::f64::consts::PI / scale
                * ((x + shift) / delta - scale / 2.0 + 0.5);
            u8::from(arg.cos() < 0.0)
        }
        None => match *spec {
            SquareWaveSpec::SignStep { threshold } => u8::from(x < threshold),
            _ => unreachable!(),
        },
    }
}

/// How the reflection realizes the target: exactly, or through a truncated
/// Fourier series of the stated degree. `epsilon_certified` is the measured
/// sup-norm of the clamped reconstruction against the target outside
/// exclusion zones of halfwidth `exclusion_fraction`·spacing around jumps;
/// it is filled in by whoever performs the fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BlockEncodingMode {
    Ideal,
    Approx { degree: usize, epsilon_certified: f64, exclusion_fraction: f64 },
}

impl BlockEncodingMode {
    pub fn approx(degree: usize) -> Self {
        BlockEncodingMode::Approx {
            degree,
            epsilon_certified: 0.0,
            exclusion_fraction: 0.1,
        }
    }

    pub fn is_ideal(&self) -> bool {
        matches!(self, BlockEncodingMode::Ideal)
    }

    pub fn degree(&self) -> Option<usize> {
        match self {
            BlockEncodingMode::Ideal => None,
            BlockEncodingMode::Approx { degree, .. } => Some(*degree),
        }
    }
}

/// Truncated Fourier series of the ±1-valued wave s = 2b−1 on a window of
/// half-period `half_period`, centered so all coefficients are real.
#[derive(Clone, Debug)]
pub struct FourierApproximant {
    target: SquareWaveSpec,
    /// index i holds c_n for n = i − degree; c_{−n} = c_n
    coefficients: Vec<f64>,
    degree: usize,
    half_period: f64,
    center: f64,
    epsilon: f64,
    exclusion: f64,
}

impl FourierApproximant {
    pub fn target(&self) -> &SquareWaveSpec {
        &self.target
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficient(&self, n: i64) -> f64 {
        self.coefficients[(n + self.degree as i64) as usize]
    }

    pub fn half_period(&self) -> f64 {
        self.half_period
    }

    /// Certified sup-norm error and the exclusion halfwidth (position units)
    /// it was measured with.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn exclusion(&self) -> f64 {
        self.exclusion
    }

    /// Series value of the ±1 wave. Real by construction: the basis collapses
    /// to cosines about the symmetry center.
    pub fn reconstruct_pm(&self, x: f64) -> f64 {
        let u = x - self.center;
        let mut s = self.coefficient(0);
        for n in 1..=self.degree as i64 {
            s += 2.0 * self.coefficient(n)
                * (n as f64 * std::f64::consts::PI * u / self.half_period).cos();
        }
        s
    }

    /// Clamped bit-valued reconstruction in [0,1].
    pub fn reconstruct_bit(&self, x: f64) -> f64 {
        ((1.0 + self.reconstruct_pm(x)) / 2.0).clamp(0.0, 1.0)
    }

    /// Measured sup-norm of |reconstruct_bit − target| on a dense grid over
    /// one period, skipping points within `exclusion` of a jump.
    pub fn certify(&self, exclusion: f64) -> f64 {
        let l = self.half_period;
        let samples = 8192;
        let jumps = self.target.jump_points(l);
        let start = self.target.window_start(l);
        let mut sup = 0.0f64;
        for i in 0..samples {
            let x = start + 2.0 * l * (i as f64 + 0.5) / samples as f64;
            let dist = jumps
                .iter()
                .map(|&jp| {
                    let d = (x - jp).rem_euclid(2.0 * l);
                    d.min(2.0 * l - d)
                })
                .fold(f64::INFINITY, f64::min);
            if dist < exclusion {
                continue;
            }
            let err = (self.reconstruct_bit(x) - evaluate_target(&self.target, x) as f64).abs();
            sup = sup.max(err);
        }
        sup
    }

    /// Coefficient table, one `index,coefficient` row per Laurent index.
    pub fn csv(&self) -> String {
        let mut out = String::from("index,coefficient\n");
        for n in -(self.degree as i64)..=self.degree as i64 {
            out.push_str(&format!("{n},{:.17e}\n", self.coefficient(n)));
        }
        out
    }
}

/// Exact-quadrature Fourier coefficients of s = 2b−1 over one period. The
/// wave is constant on quarter-period cells (jumps sit at ±L/2 from the
/// center), so per-cell closed-form integrals are exact.
pub fn fourier_fit(
    spec: &SquareWaveSpec,
    degree: usize,
    period: f64,
) -> Result<FourierApproximant> {
    if degree < 1 {
        return Err(Error::DegreeTooSmall);
    }
    if period <= 0.0 || !period.is_finite() {
        return Err(Error::InvalidParameter(format!("period {period} must be positive")));
    }
    if let Some(natural) = spec.natural_period() {
        if (period - natural).abs() > 1e-9 * natural {
            return Err(Error::InvalidParameter(format!(
                "period {period} does not match the wave's natural period {natural}"
            )));
        }
    }
    let l = period / 2.0;
    let center = spec.center(l);
    // cell values at quarter-period midpoints; offsets are relative to the
    // symmetry center so the closed-form integrals are phased correctly
    let start = spec.window_start(l) - center;
    let cells: Vec<(f64, f64, f64)> = (0..4)
        .map(|k| {
            let lo = start + k as f64 * l / 2.0;
            let hi = lo + l / 2.0;
            let mid = center + (lo + hi) / 2.0;
            (lo, hi, 2.0 * evaluate_target(spec, mid) as f64 - 1.0)
        })
        .collect();
    let mut coefficients = vec![0.0; 2 * degree + 1];
    for n in -(degree as i64)..=degree as i64 {
        let mut acc = Complex64::ZERO;
        for &(lo, hi, v) in &cells {
            let seg = if n == 0 {
                Complex64::from(hi - lo)
            } else {
                let w = Complex64::new(0.0, -(n as f64) * std::f64::consts::PI / l);
                ((w * hi).exp() - (w * lo).exp()) / w
            };
            acc += seg * v;
        }
        let c = acc / (2.0 * l);
        debug_assert!(c.im.abs() < 1e-12, "coefficient {n} not real: {c}");
        coefficients[(n + degree as i64) as usize] = c.re;
    }
    let exclusion = match spec.spacing() {
        // 5% of the family's minimum period 2Δ
        Some(delta) => 0.1 * delta,
        // SignStep has no intrinsic spacing; callers re-certify with theirs
        None => 0.001 * period,
    };
    let mut fit = FourierApproximant {
        target: spec.clone(),
        coefficients,
        degree,
        half_period: l,
        center,
        epsilon: 0.0,
        exclusion,
    };
    fit.epsilon = fit.certify(exclusion);
    Ok(fit)
}

fn reflection_columns(s: f64) -> [[f64; 2]; 2] {
    let comp = (1.0 - s * s).max(0.0).sqrt();
    [[s, comp], [-comp, s]]
}

pub(crate) fn assemble_reflection(cutoff: usize, s_values: &[f64], duration: f64) -> GateMatrix {
    let diag = PositionDiagonalization::get(cutoff);
    let v = &diag.eigenvectors;
    let n = cutoff;
    let mut m = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
    for k in 0..n {
        let r = reflection_columns(s_values[k]);
        for i in 0..n {
            let vik = v[(i, k)];
            if vik == 0.0 {
                continue;
            }
            for j in 0..n {
                let base = vik * v[(j, k)];
                m[(i, n + j)] += Complex64::from(base * r[0][1]);
                m[(n + i, j)] += Complex64::from(base * r[1][0]);
                m[(i, j)] += Complex64::from(base * r[0][0]);
                m[(n + i, n + j)] += Complex64::from(base * r[1][1]);
            }
        }
    }
    GateMatrix::new(vec![2, cutoff], m, duration)
}

/// The bit-reading reflection on (qubit, mode) from an existing fit.
pub fn block_encode_from(fit: &FourierApproximant, cutoff: usize) -> GateMatrix {
    let diag = PositionDiagonalization::get(cutoff);
    let s: Vec<f64> =
        (0..cutoff).map(|k| 1.0 - fit.reconstruct_bit(diag.eigenvalues[k])).collect();
    assemble_reflection(cutoff, &s, fit.degree as f64)
}

/// The bit-reading reflection on (qubit, mode); ideal mode evaluates the
/// target exactly on the position grid, approx mode goes through a fit.
pub fn block_encode(
    spec: &SquareWaveSpec,
    cutoff: usize,
    mode: &BlockEncodingMode,
) -> Result<GateMatrix> {
    match mode {
        BlockEncodingMode::Ideal => {
            let diag = PositionDiagonalization::get(cutoff);
            let s: Vec<f64> = (0..cutoff)
                .map(|k| 1.0 - evaluate_target(spec, diag.eigenvalues[k]) as f64)
                .collect();
            Ok(assemble_reflection(cutoff, &s, 0.0))
        }
        BlockEncodingMode::Approx { degree, .. } => {
            let fit = fourier_fit(spec, *degree, fit_window(spec, cutoff))?;
            Ok(block_encode_from(&fit, cutoff))
        }
    }
}

/// Fit period for a wave: its natural period where one exists, otherwise a
/// window wide enough that the periodization folds outside the grid.
pub(crate) fn fit_window(spec: &SquareWaveSpec, cutoff: usize) -> f64 {
    spec.natural_period().unwrap_or_else(|| {
        let th = match *spec {
            SquareWaveSpec::SignStep { threshold } if threshold.is_finite() => threshold.abs(),
            _ => 0.0,
        };
        2.0 * (max_position(cutoff) + th + 1.0)
    })
}
