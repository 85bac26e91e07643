//! Registers of qubit and Fock-truncated oscillator wires, and normalized
//! state vectors over them.
//!
//! Index convention: wire 0 is the most significant digit of the flat
//! amplitude index (row-major over the wire list), so for a register
//! [qubit, mode(N)] the amplitude of |s⟩⊗|n⟩ sits at s·N + n.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const NORM_TOL: f64 = 1e-12;
pub const DEFAULT_LEAK_BUDGET: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WireKind {
    Qubit,
    /// Oscillator truncated to the Fock levels 0..cutoff.
    Mode(usize),
}

impl WireKind {
    pub fn dim(&self) -> usize {
        match *self {
            WireKind::Qubit => 2,
            WireKind::Mode(n) => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterLayout {
    wires: Vec<WireKind>,
    dim: usize,
}

impl RegisterLayout {
    pub fn new(wires: Vec<WireKind>) -> Result<Self> {
        let mut dim: usize = 1;
        for w in &wires {
            if let WireKind::Mode(n) = w {
                if *n < 2 {
                    return Err(Error::CutoffTooSmall(*n));
                }
            }
            dim = dim.checked_mul(w.dim()).ok_or(Error::DimensionOverflow)?;
        }
        // A state vector has to be allocatable: 16 bytes per amplitude.
        dim.checked_mul(16).ok_or(Error::DimensionOverflow)?;
        Ok(RegisterLayout { wires, dim })
    }

    pub fn single(kind: WireKind) -> Self {
        RegisterLayout::new(vec![kind]).expect("single wire always fits")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn wires(&self) -> &[WireKind] {
        &self.wires
    }

    pub fn n_wires(&self) -> usize {
        self.wires.len()
    }

    pub fn wire_dim(&self, wire: usize) -> usize {
        self.wires[wire].dim()
    }

    pub fn check_wire(&self, wire: usize) -> Result<()> {
        if wire < self.wires.len() {
            Ok(())
        } else {
            Err(Error::InvalidWire { wire, wires: self.wires.len() })
        }
    }

    /// Distance between consecutive values of this wire's digit in the flat index.
    pub fn stride(&self, wire: usize) -> usize {
        self.wires[wire + 1..].iter().map(|w| w.dim()).product()
    }

    pub fn concat(&self, other: &RegisterLayout) -> Result<Self> {
        let mut wires = self.wires.clone();
        wires.extend_from_slice(&other.wires);
        RegisterLayout::new(wires)
    }

    pub fn sub_layout(&self, keep: &[usize]) -> Result<Self> {
        for &w in keep {
            self.check_wire(w)?;
        }
        RegisterLayout::new(keep.iter().map(|&w| self.wires[w]).collect())
    }

    fn drop_suffix(&self, count: usize) -> Result<Self> {
        RegisterLayout::new(self.wires[..self.wires.len() - count].to_vec())
    }

    fn drop_wire(&self, wire: usize) -> Result<Self> {
        let mut wires = self.wires.clone();
        wires.remove(wire);
        RegisterLayout::new(wires)
    }
}

#[derive(Clone, Debug)]
pub struct HybridState {
    layout: RegisterLayout,
    amps: Vec<Complex64>,
    leaked_norm: f64,
    leak_budget: f64,
}

impl HybridState {
    /// Computational basis state; one digit per wire.
    pub fn basis_state(layout: RegisterLayout, digits: &[usize]) -> Result<Self> {
        if digits.len() != layout.n_wires() {
            return Err(Error::LayoutMismatch(format!(
                "{} digits for {} wires",
                digits.len(),
                layout.n_wires()
            )));
        }
        let mut idx = 0usize;
        for (w, &d) in digits.iter().enumerate() {
            if d >= layout.wire_dim(w) {
                return Err(Error::InvalidWire { wire: w, wires: layout.n_wires() });
            }
            idx = idx * layout.wire_dim(w) + d;
        }
        let mut amps = vec![Complex64::ZERO; layout.dim()];
        amps[idx] = Complex64::ONE;
        Ok(HybridState { layout, amps, leaked_norm: 0.0, leak_budget: DEFAULT_LEAK_BUDGET })
    }

    /// Normalizes the given amplitudes; rejects near-zero vectors.
    pub fn from_amplitudes(layout: RegisterLayout, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != layout.dim() {
            return Err(Error::LayoutMismatch(format!(
                "{} amplitudes for dimension {}",
                amps.len(),
                layout.dim()
            )));
        }
        let mut s = HybridState { layout, amps, leaked_norm: 0.0, leak_budget: DEFAULT_LEAK_BUDGET };
        let n2 = s.norm_sq();
        if n2 < 1e-24 {
            return Err(Error::NotNormalizable(n2.sqrt()));
        }
        s.scale(1.0 / n2.sqrt());
        Ok(s)
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn leaked_norm(&self) -> f64 {
        self.leaked_norm
    }

    pub fn leak_budget(&self) -> f64 {
        self.leak_budget
    }

    pub fn set_leak_budget(&mut self, budget: f64) {
        self.leak_budget = budget;
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn scale(&mut self, f: f64) {
        for a in &mut self.amps {
            *a *= f;
        }
    }

    /// Folds any norm deficit into leaked_norm and renormalizes.
    /// Gates are at worst sub-unitary (truncated displacements), so a norm
    /// above 1 beyond roundoff would be a bug, not leak.
    fn absorb_leak(&mut self) -> Result<()> {
        let n2 = self.norm_sq();
        if n2 < 1e-24 {
            return Err(Error::NotNormalizable(n2.sqrt()));
        }
        let deficit = 1.0 - n2;
        if deficit > 0.0 {
            self.leaked_norm += deficit;
        }
        if deficit.abs() > 1e-15 {
            self.scale(1.0 / n2.sqrt());
        }
        if self.leaked_norm > self.leak_budget {
            return Err(Error::LeakBudget { leaked: self.leaked_norm, budget: self.leak_budget });
        }
        Ok(())
    }

    pub fn tensor(&self, other: &HybridState) -> Result<HybridState> {
        let layout = self.layout.concat(&other.layout)?;
        let mut amps = vec![Complex64::ZERO; layout.dim()];
        let od = other.amps.len();
        for (i, &a) in self.amps.iter().enumerate() {
            if a == Complex64::ZERO {
                continue;
            }
            let base = i * od;
            for (j, &b) in other.amps.iter().enumerate() {
                amps[base + j] = a * b;
            }
        }
        Ok(HybridState {
            layout,
            amps,
            leaked_norm: self.leaked_norm + other.leaked_norm,
            leak_budget: self.leak_budget.min(other.leak_budget),
        })
    }

    /// (outer, d, inner) view of the index space around one wire.
    fn split(&self, wire: usize) -> (usize, usize, usize) {
        let d = self.layout.wire_dim(wire);
        let inner = self.layout.stride(wire);
        (self.amps.len() / (d * inner), d, inner)
    }

    /// Same register with one mode re-truncated to `new_cutoff`. Growing
    /// zero-pads; shrinking drops the top Fock levels, and whatever weight
    /// they carried is charged against the leak budget.
    pub fn resize_mode(&self, wire: usize, new_cutoff: usize) -> Result<HybridState> {
        self.layout.check_wire(wire)?;
        match self.layout.wires[wire] {
            WireKind::Mode(_) => {}
            WireKind::Qubit => {
                return Err(Error::InvalidParameter(format!("wire {wire} is not a mode")));
            }
        }
        let mut wires = self.layout.wires.clone();
        wires[wire] = WireKind::Mode(new_cutoff);
        let layout = RegisterLayout::new(wires)?;
        let (outer, d, inner) = self.split(wire);
        let keep = d.min(new_cutoff);
        let mut amps = vec![Complex64::ZERO; layout.dim()];
        for o in 0..outer {
            let src = o * d * inner;
            let dst = o * new_cutoff * inner;
            amps[dst..dst + keep * inner].copy_from_slice(&self.amps[src..src + keep * inner]);
        }
        let mut out = HybridState {
            layout,
            amps,
            leaked_norm: self.leaked_norm,
            leak_budget: self.leak_budget,
        };
        out.absorb_leak()?;
        Ok(out)
    }

    /// Dense matrix on a single wire, without leak accounting.
    fn apply_wire_raw(&mut self, wire: usize, m: &DMatrix<Complex64>) {
        let (outer, d, inner) = self.split(wire);
        debug_assert_eq!(m.nrows(), d);
        debug_assert_eq!(m.ncols(), d);
        const CHUNK: usize = 512;
        let mut scratch = vec![Complex64::ZERO; d * CHUNK];
        for o in 0..outer {
            let base = o * d * inner;
            let mut c0 = 0;
            while c0 < inner {
                let w = CHUNK.min(inner - c0);
                for (j, out_row) in scratch.chunks_mut(CHUNK).enumerate().take(d) {
                    let out_row = &mut out_row[..w];
                    out_row.fill(Complex64::ZERO);
                    for k in 0..d {
                        let mjk = m[(j, k)];
                        if mjk == Complex64::ZERO {
                            continue;
                        }
                        let src = &self.amps[base + k * inner + c0..base + k * inner + c0 + w];
                        for (acc, &s) in out_row.iter_mut().zip(src) {
                            *acc += mjk * s;
                        }
                    }
                }
                for j in 0..d {
                    let dst = base + j * inner + c0;
                    self.amps[dst..dst + w].copy_from_slice(&scratch[j * CHUNK..j * CHUNK + w]);
                }
                c0 += w;
            }
        }
    }

    /// Dense matrix on one wire with truncation-leak accounting.
    pub fn apply_wire(&mut self, wire: usize, m: &DMatrix<Complex64>) -> Result<()> {
        self.layout.check_wire(wire)?;
        self.apply_wire_raw(wire, m);
        self.absorb_leak()
    }

    /// Dense matrix on several wires at once. The matrix index runs over the
    /// listed wires row-major (first listed is most significant), whatever
    /// their register positions. Gather-based; meant for small registers and
    /// oracle tests, not the hot path.
    pub fn apply_wires(&mut self, wires: &[usize], m: &DMatrix<Complex64>) -> Result<()> {
        self.apply_wires_core(wires, &[], m)?;
        self.absorb_leak()
    }

    /// apply_wires gated on classical digits: the matrix acts only on the
    /// subspace where every (wire, digit) pair in `controls` holds, identity
    /// elsewhere.
    pub fn apply_wires_controlled(
        &mut self,
        wires: &[usize],
        controls: &[(usize, usize)],
        m: &DMatrix<Complex64>,
    ) -> Result<()> {
        self.apply_wires_core(wires, controls, m)?;
        self.absorb_leak()
    }

    /// As apply_wires but without leak absorption or renormalization: the
    /// amplitudes become the exact matrix image. For dense operator assembly.
    pub(crate) fn apply_wires_raw(&mut self, wires: &[usize], m: &DMatrix<Complex64>) -> Result<()> {
        self.apply_wires_core(wires, &[], m)
    }

    pub(crate) fn apply_wires_controlled_raw(
        &mut self,
        wires: &[usize],
        controls: &[(usize, usize)],
        m: &DMatrix<Complex64>,
    ) -> Result<()> {
        self.apply_wires_core(wires, controls, m)
    }

    fn apply_wires_core(
        &mut self,
        wires: &[usize],
        controls: &[(usize, usize)],
        m: &DMatrix<Complex64>,
    ) -> Result<()> {
        for &(c, v) in controls {
            self.layout.check_wire(c)?;
            if wires.contains(&c) {
                return Err(Error::InvalidParameter(format!("control {c} is also a target")));
            }
            if v >= self.layout.wire_dim(c) {
                return Err(Error::InvalidParameter("control value out of range".into()));
            }
        }
        if wires.len() == 1 && controls.is_empty() {
            self.layout.check_wire(wires[0])?;
            self.apply_wire_raw(wires[0], m);
            return Ok(());
        }
        for &w in wires {
            self.layout.check_wire(w)?;
        }
        let gd: usize = wires.iter().map(|&w| self.layout.wire_dim(w)).product();
        if m.nrows() != gd || m.ncols() != gd {
            return Err(Error::LayoutMismatch(format!(
                "gate is {}x{}, wires give {}",
                m.nrows(),
                m.ncols(),
                gd
            )));
        }
        let strides: Vec<usize> = wires.iter().map(|&w| self.layout.stride(w)).collect();
        let dims: Vec<usize> = wires.iter().map(|&w| self.layout.wire_dim(w)).collect();
        // Offsets of each group index combination relative to a base index.
        let mut offsets = vec![0usize; gd];
        for g in 0..gd {
            let (mut rem, mut off) = (g, 0);
            for (i, &d) in dims.iter().enumerate().rev() {
                off += (rem % d) * strides[i];
                rem /= d;
            }
            offsets[g] = off;
        }
        let dim = self.amps.len();
        let mut visited = vec![false; dim];
        let mut gathered = vec![Complex64::ZERO; gd];
        for base in 0..dim {
            if visited[base] {
                continue;
            }
            // base must have digit 0 on all group wires
            let on_base =
                (0..wires.len()).all(|i| (base / strides[i]) % dims[i] == 0);
            if !on_base {
                continue;
            }
            if !controls.iter().all(|&(c, v)| {
                (base / self.layout.stride(c)) % self.layout.wire_dim(c) == v
            }) {
                continue;
            }
            for g in 0..gd {
                gathered[g] = self.amps[base + offsets[g]];
            }
            for (r, off) in offsets.iter().enumerate() {
                let mut acc = Complex64::ZERO;
                for (c, &g) in gathered.iter().enumerate() {
                    acc += m[(r, c)] * g;
                }
                self.amps[base + off] = acc;
                visited[base + off] = true;
            }
        }
        Ok(())
    }

    /// Multiplies each amplitude by f(digits of the listed wires).
    /// Meant for unimodular factors; norm drift is renormalized without
    /// counting as leak.
    pub fn apply_phase_indexed<F>(&mut self, wires: &[usize], f: F) -> Result<()>
    where
        F: Fn(&[usize]) -> Complex64,
    {
        for &w in wires {
            self.layout.check_wire(w)?;
        }
        let strides: Vec<usize> = wires.iter().map(|&w| self.layout.stride(w)).collect();
        let dims: Vec<usize> = wires.iter().map(|&w| self.layout.wire_dim(w)).collect();
        let mut digits = vec![0usize; wires.len()];
        for (idx, a) in self.amps.iter_mut().enumerate() {
            for i in 0..wires.len() {
                digits[i] = (idx / strides[i]) % dims[i];
            }
            *a *= f(&digits);
        }
        let n2 = self.norm_sq();
        if (n2 - 1.0).abs() > 1e-13 {
            self.scale(1.0 / n2.sqrt());
        }
        Ok(())
    }

    /// 2x2 operator on `qubit` whose entries depend on the digit of `indexing`
    /// (typically a mode wire in a diagonalized basis), optionally gated on a
    /// control wire holding a specific digit. The workhorse behind batched
    /// block encodings.
    pub fn apply_qubit_op_by_digit<F>(
        &mut self,
        qubit: usize,
        indexing: usize,
        control: Option<(usize, usize)>,
        f: F,
    ) -> Result<()>
    where
        F: Fn(usize) -> [[Complex64; 2]; 2],
    {
        self.layout.check_wire(qubit)?;
        self.layout.check_wire(indexing)?;
        if self.layout.wire_dim(qubit) != 2 {
            return Err(Error::InvalidParameter(format!("wire {qubit} is not a qubit")));
        }
        if let Some((c, v)) = control {
            self.layout.check_wire(c)?;
            if c == qubit {
                return Err(Error::InvalidParameter("control equals target".into()));
            }
            if v >= self.layout.wire_dim(c) {
                return Err(Error::InvalidParameter("control value out of range".into()));
            }
        }
        let sq = self.layout.stride(qubit);
        let si = self.layout.stride(indexing);
        let di = self.layout.wire_dim(indexing);
        let ctl = control.map(|(c, v)| (self.layout.stride(c), self.layout.wire_dim(c), v));
        let dim = self.amps.len();
        let block = 2 * sq;
        let mut o = 0;
        while o < dim {
            for i in 0..sq {
                let i0 = o + i;
                // both branch indices share the control digit since the
                // control wire differs from the target qubit
                if let Some((cs, cd, cv)) = ctl {
                    if (i0 / cs) % cd != cv {
                        continue;
                    }
                }
                let k = (i0 / si) % di;
                let m = f(k);
                let a0 = self.amps[i0];
                let a1 = self.amps[i0 + sq];
                self.amps[i0] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i0 + sq] = m[1][0] * a0 + m[1][1] * a1;
            }
            o += block;
        }
        let n2 = self.norm_sq();
        if (n2 - 1.0).abs() > 1e-13 {
            self.scale(1.0 / n2.sqrt());
        }
        Ok(())
    }

    /// ⟨ψ|M_wire|ψ⟩ for a single-wire operator.
    pub fn expect_wire(&self, wire: usize, m: &DMatrix<Complex64>) -> Result<Complex64> {
        self.layout.check_wire(wire)?;
        let mut y = self.clone();
        y.apply_wire_raw(wire, m);
        Ok(inner(self, &y))
    }

    /// Reduced density matrix over the kept wires (ascending order required).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityBlock> {
        if keep.is_empty() {
            return Err(Error::InvalidParameter("keep set is empty".into()));
        }
        if keep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("keep set must be strictly ascending".into()));
        }
        let layout = self.layout.sub_layout(keep)?;
        let kd = layout.dim();
        let ed = self.amps.len() / kd;
        // Reshape |ψ⟩ into M[kept, env] and form ρ = M M†.
        let mut m = DMatrix::<Complex64>::zeros(kd, ed);
        let n_wires = self.layout.n_wires();
        let mut kept_mask = vec![false; n_wires];
        for &w in keep {
            kept_mask[w] = true;
        }
        let wire_dims: Vec<usize> = (0..n_wires).map(|w| self.layout.wire_dim(w)).collect();
        let mut digits = vec![0usize; n_wires];
        for (idx, &a) in self.amps.iter().enumerate() {
            let (mut k, mut e) = (0usize, 0usize);
            for w in 0..n_wires {
                if kept_mask[w] {
                    k = k * wire_dims[w] + digits[w];
                } else {
                    e = e * wire_dims[w] + digits[w];
                }
            }
            m[(k, e)] = a;
            let _ = idx;
            // odometer increment
            for w in (0..n_wires).rev() {
                digits[w] += 1;
                if digits[w] < wire_dims[w] {
                    break;
                }
                digits[w] = 0;
            }
        }
        let rho = &m * m.adjoint();
        Ok(DensityBlock { layout, matrix: rho })
    }

    /// Projects one wire onto a single-wire target state. Returns the
    /// renormalized remainder (that wire removed) and the Born probability.
    pub fn project_wire(
        &self,
        wire: usize,
        target: &HybridState,
    ) -> Result<(HybridState, f64)> {
        self.layout.check_wire(wire)?;
        if target.layout.n_wires() != 1 || target.layout.wire_dim(0) != self.layout.wire_dim(wire)
        {
            return Err(Error::LayoutMismatch("projection target must live on that wire".into()));
        }
        let (outer, d, inner) = self.split(wire);
        let mut out = vec![Complex64::ZERO; outer * inner];
        for o in 0..outer {
            for k in 0..d {
                let tk = target.amps[k].conj();
                if tk == Complex64::ZERO {
                    continue;
                }
                let src_base = (o * d + k) * inner;
                let dst_base = o * inner;
                for i in 0..inner {
                    out[dst_base + i] += tk * self.amps[src_base + i];
                }
            }
        }
        let p: f64 = out.iter().map(|a| a.norm_sqr()).sum();
        if p < 1e-18 {
            return Err(Error::DegenerateProjection(p));
        }
        let f = 1.0 / p.sqrt();
        for a in &mut out {
            *a *= f;
        }
        let layout = self.layout.drop_wire(wire)?;
        Ok((
            HybridState {
                layout,
                amps: out,
                leaked_norm: self.leaked_norm,
                leak_budget: self.leak_budget,
            },
            p,
        ))
    }

    /// Discards the trailing `count` wires by projecting them onto the
    /// dominant eigenvector of their reduced density matrix. Valid only when
    /// they are close to a product with the rest: the dominant branch weight
    /// must reach `min_weight`, and is returned so callers can fold it into a
    /// success probability.
    pub fn discard_suffix(&self, count: usize, min_weight: f64) -> Result<(HybridState, f64)> {
        let n = self.layout.n_wires();
        if count == 0 || count > n {
            return Err(Error::InvalidParameter(format!("cannot discard {count} of {n} wires")));
        }
        let dd: usize = (n - count..n).map(|w| self.layout.wire_dim(w)).product();
        let rest = self.amps.len() / dd;
        // ρ_disc[d,d'] = Σ_r ψ[r,d] ψ*[r,d']; amplitudes are already laid out
        // as [rest, disc] since the discarded wires are a suffix.
        let mut rho = DMatrix::<Complex64>::zeros(dd, dd);
        for r in 0..rest {
            let row = &self.amps[r * dd..(r + 1) * dd];
            for d1 in 0..dd {
                if row[d1] == Complex64::ZERO {
                    continue;
                }
                for d2 in 0..dd {
                    rho[(d1, d2)] += row[d1] * row[d2].conj();
                }
            }
        }
        let eig = rho.symmetric_eigen();
        let (mut best, mut best_val) = (0, f64::NEG_INFINITY);
        for (i, &v) in eig.eigenvalues.iter().enumerate() {
            if v > best_val {
                best = i;
                best_val = v;
            }
        }
        if best_val < min_weight {
            return Err(Error::ImpureDiscard { weight: best_val, required: min_weight });
        }
        let w: DVector<Complex64> = eig.eigenvectors.column(best).into();
        let mut out = vec![Complex64::ZERO; rest];
        for r in 0..rest {
            let row = &self.amps[r * dd..(r + 1) * dd];
            let mut acc = Complex64::ZERO;
            for d1 in 0..dd {
                acc += w[d1].conj() * row[d1];
            }
            out[r] = acc;
        }
        let p: f64 = out.iter().map(|a| a.norm_sqr()).sum();
        if p < 1e-18 {
            return Err(Error::DegenerateProjection(p));
        }
        let f = 1.0 / p.sqrt();
        for a in &mut out {
            *a *= f;
        }
        Ok((
            HybridState {
                layout: self.layout.drop_suffix(count)?,
                amps: out,
                leaked_norm: self.leaked_norm,
                leak_budget: self.leak_budget,
            },
            p,
        ))
    }

    /// `discard_suffix` for one wire anywhere in the layout: projects it onto
    /// the dominant eigenvector of its reduced density matrix and drops the
    /// wire, with the same near-product requirement on the branch weight.
    pub fn discard_wire(&self, wire: usize, min_weight: f64) -> Result<(HybridState, f64)> {
        if self.layout.n_wires() < 2 {
            return Err(Error::InvalidParameter("cannot discard the only wire".into()));
        }
        let rho = self.partial_trace(&[wire])?;
        let eig = rho.matrix.symmetric_eigen();
        let (mut best, mut best_val) = (0, f64::NEG_INFINITY);
        for (i, &v) in eig.eigenvalues.iter().enumerate() {
            if v > best_val {
                best = i;
                best_val = v;
            }
        }
        if best_val < min_weight {
            return Err(Error::ImpureDiscard { weight: best_val, required: min_weight });
        }
        let target = HybridState {
            layout: RegisterLayout::new(vec![self.layout.wires[wire]])?,
            amps: eig.eigenvectors.column(best).iter().copied().collect(),
            leaked_norm: 0.0,
            leak_budget: 1.0,
        };
        self.project_wire(wire, &target)
    }
}

pub fn inner(a: &HybridState, b: &HybridState) -> Complex64 {
    a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum()
}

/// |⟨a|b⟩|² for two pure states on the same layout.
pub fn fidelity(a: &HybridState, b: &HybridState) -> Result<f64> {
    if a.layout != b.layout {
        return Err(Error::LayoutMismatch("fidelity of states on different layouts".into()));
    }
    Ok(inner(a, b).norm_sqr().min(1.0))
}

/// ⟨b|ρ|b⟩ for a mixed state against a pure target.
pub fn fidelity_vs_density(rho: &DensityBlock, b: &HybridState) -> Result<f64> {
    if rho.layout != b.layout {
        return Err(Error::LayoutMismatch("fidelity of density block on different layout".into()));
    }
    let v = DVector::from_column_slice(&b.amps);
    let f = (v.adjoint() * &rho.matrix * &v)[(0, 0)].re;
    Ok(f.clamp(0.0, 1.0))
}

#[derive(Clone, Debug)]
pub struct DensityBlock {
    layout: RegisterLayout,
    matrix: DMatrix<Complex64>,
}

impl DensityBlock {
    pub fn new(layout: RegisterLayout, matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != layout.dim() || matrix.ncols() != layout.dim() {
            return Err(Error::LayoutMismatch(format!(
                "density matrix is {}x{}, layout dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                layout.dim()
            )));
        }
        Ok(DensityBlock { layout, matrix })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.diagonal().sum()
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ |ρ_ij|² for Hermitian ρ
        self.matrix.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Hermiticity and unit trace (cheap, O(dim²)).
    pub fn validate(&self) -> Result<()> {
        let n = self.matrix.nrows();
        let mut herm_dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                herm_dev = herm_dev.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        if herm_dev > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "density block not Hermitian (deviation {herm_dev:.3e})"
            )));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("density block trace {tr} is not 1")));
        }
        Ok(())
    }

    /// validate() plus positive semidefiniteness via eigendecomposition.
    pub fn validate_psd(&self) -> Result<()> {
        self.validate()?;
        let eig = self.matrix.clone().symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(Error::InvalidParameter(format!(
                "density block has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }

    /// ⟨digits|ρ|digits⟩ convenience accessor.
    pub fn diagonal_element(&self, idx: usize) -> f64 {
        self.matrix[(idx, idx)].re
    }
}
