//! Ordered gate lists over a fixed register layout. Circuits are the shared
//! currency of the transfer and QFT builders: construction is pure, running
//! one against a state is explicit, and the gate list carries enough metadata
//! (names, numeric params, duration units) that the resource calculators can
//! integrate runtime and displacement reach without re-simulating anything.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gates::GateMatrix;
use crate::hilbert::{HybridState, RegisterLayout};

/// One placed gate. `name` and `params` exist for serialization and schedule
/// analysis; `op` is what actually runs. A daggered gate keeps its params and
/// gets a trailing apostrophe on the name. `controls` lists (wire, digit)
/// pairs gating the operator: it acts where every control wire holds its
/// digit and is the identity elsewhere.
#[derive(Clone, Debug)]
pub struct Gate {
    pub name: String,
    pub wires: Vec<usize>,
    pub controls: Vec<(usize, usize)>,
    pub params: Vec<f64>,
    pub op: GateMatrix,
}

#[derive(Clone, Debug)]
pub struct Circuit {
    layout: RegisterLayout,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(layout: RegisterLayout) -> Self {
        Circuit { layout, gates: Vec::new() }
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn push(
        &mut self,
        name: &str,
        wires: Vec<usize>,
        params: Vec<f64>,
        op: GateMatrix,
    ) -> Result<()> {
        self.push_controlled(name, wires, Vec::new(), params, op)
    }

    pub fn push_controlled(
        &mut self,
        name: &str,
        wires: Vec<usize>,
        controls: Vec<(usize, usize)>,
        params: Vec<f64>,
        op: GateMatrix,
    ) -> Result<()> {
        if wires.len() != op.dims.len() {
            return Err(Error::LayoutMismatch(format!(
                "gate {name} spans {} dims but is placed on {} wires",
                op.dims.len(),
                wires.len()
            )));
        }
        for (&w, &d) in wires.iter().zip(&op.dims) {
            self.layout.check_wire(w)?;
            if self.layout.wire_dim(w) != d {
                return Err(Error::LayoutMismatch(format!(
                    "gate {name} expects dim {d} on wire {w}, layout has {}",
                    self.layout.wire_dim(w)
                )));
            }
        }
        for &(c, v) in &controls {
            self.layout.check_wire(c)?;
            if wires.contains(&c) {
                return Err(Error::LayoutMismatch(format!(
                    "gate {name} has control {c} among its targets"
                )));
            }
            if v >= self.layout.wire_dim(c) {
                return Err(Error::LayoutMismatch(format!(
                    "gate {name} control digit {v} exceeds wire {c}"
                )));
            }
        }
        self.gates.push(Gate { name: name.to_string(), wires, controls, params, op });
        Ok(())
    }

    /// Appends another circuit's gates with its wire i placed on `wire_map[i]`.
    pub fn append_mapped(&mut self, other: &Circuit, wire_map: &[usize]) -> Result<()> {
        if wire_map.len() != other.layout.n_wires() {
            return Err(Error::LayoutMismatch(format!(
                "wire map covers {} wires, circuit has {}",
                wire_map.len(),
                other.layout.n_wires()
            )));
        }
        for g in &other.gates {
            let wires: Vec<usize> = g.wires.iter().map(|&w| wire_map[w]).collect();
            let controls: Vec<(usize, usize)> =
                g.controls.iter().map(|&(c, v)| (wire_map[c], v)).collect();
            self.push_controlled(&g.name, wires, controls, g.params.clone(), g.op.clone())?;
        }
        Ok(())
    }

    /// Reversed gate order with adjoint operators.
    pub fn dagger(&self) -> Circuit {
        let gates = self
            .gates
            .iter()
            .rev()
            .map(|g| Gate {
                name: dagger_name(&g.name),
                wires: g.wires.clone(),
                controls: g.controls.clone(),
                params: g.params.clone(),
                op: g.op.dagger(),
            })
            .collect();
        Circuit { layout: self.layout.clone(), gates }
    }

    pub fn apply(&self, state: &mut HybridState) -> Result<()> {
        if *state.layout() != self.layout {
            return Err(Error::LayoutMismatch("state layout differs from circuit layout".into()));
        }
        for g in &self.gates {
            if g.controls.is_empty() {
                state.apply_wires(&g.wires, &g.op.matrix)?;
            } else {
                state.apply_wires_controlled(&g.wires, &g.controls, &g.op.matrix)?;
            }
        }
        Ok(())
    }

    pub fn run(&self, state: &HybridState) -> Result<HybridState> {
        let mut out = state.clone();
        self.apply(&mut out)?;
        Ok(out)
    }

    /// Dense matrix of the whole circuit, built column by column. Only for
    /// small layouts; dimension is checked against a hard cap.
    pub fn dense_unitary(&self) -> Result<DMatrix<Complex64>> {
        let dim = self.layout.dim();
        if dim > 1 << 13 {
            return Err(Error::InvalidParameter(format!(
                "dense unitary of dimension {dim} refused; cap is {}",
                1 << 13
            )));
        }
        let mut u = DMatrix::<Complex64>::zeros(dim, dim);
        for col in 0..dim {
            // raw application: the column is the exact operator image, with
            // whatever norm deficit truncation gives the top Fock levels
            let mut state = basis_by_flat_index(&self.layout, col)?;
            for g in &self.gates {
                if g.controls.is_empty() {
                    state.apply_wires_raw(&g.wires, &g.op.matrix)?;
                } else {
                    state.apply_wires_controlled_raw(&g.wires, &g.controls, &g.op.matrix)?;
                }
            }
            for (row, amp) in state.amplitudes().iter().enumerate() {
                u[(row, col)] = *amp;
            }
        }
        Ok(u)
    }

    /// Total abstract time over the schedule.
    pub fn total_duration(&self) -> f64 {
        self.gates.iter().map(|g| g.op.duration_units).sum()
    }

    /// Sum of displacement magnitudes commanded on one wire: the farthest any
    /// branch of a lattice comb can be carried from the origin. Counts D and
    /// CD gates, whose first param is the position shift.
    pub fn displacement_reach(&self, wire: usize) -> f64 {
        self.gates
            .iter()
            .filter(|g| {
                (g.name.starts_with("D") || g.name.starts_with("CD"))
                    && *g.wires.last().unwrap() == wire
            })
            .map(|g| g.params[0].abs())
            .sum()
    }

    /// One gate per line: `NAME wire,wire param,param duration`. Controls
    /// appear in the wire field as `wire=digit` tokens ahead of the targets.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            let mut tokens: Vec<String> =
                g.controls.iter().map(|&(c, v)| format!("{c}={v}")).collect();
            tokens.extend(g.wires.iter().map(|w| w.to_string()));
            let wires = tokens.join(",");
            let params = if g.params.is_empty() {
                "-".to_string()
            } else {
                g.params.iter().map(|p| format!("{p:.12e}")).collect::<Vec<_>>().join(",")
            };
            out.push_str(&format!("{} {} {} {:.6}\n", g.name, wires, params, g.op.duration_units));
        }
        out
    }
}

fn dagger_name(name: &str) -> String {
    match name.strip_suffix('\'') {
        Some(base) => base.to_string(),
        None => format!("{name}'"),
    }
}

fn basis_by_flat_index(layout: &RegisterLayout, flat: usize) -> Result<HybridState> {
    let mut digits = vec![0usize; layout.n_wires()];
    let mut rem = flat;
    for w in (0..layout.n_wires()).rev() {
        digits[w] = rem % layout.wire_dim(w);
        rem /= layout.wire_dim(w);
    }
    HybridState::basis_state(layout.clone(), &digits)
}

/// A structurally parsed gate line, for validating emitted schedules without
/// rebuilding operators.
#[derive(Clone, Debug, PartialEq)]
pub struct GateLine {
    pub name: String,
    pub wires: Vec<usize>,
    pub controls: Vec<(usize, usize)>,
    pub params: Vec<f64>,
    pub duration: f64,
}

/// Parses the text format back to (name, wires, params, duration) tuples.
pub fn parse_text(text: &str) -> Result<Vec<GateLine>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::CircuitParse {
                line: idx + 1,
                reason: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let mut wires = Vec::new();
        let mut controls = Vec::new();
        for t in fields[1].split(',') {
            let bad = |what: &str| Error::CircuitParse {
                line: idx + 1,
                reason: format!("bad {what} {t:?}"),
            };
            match t.split_once('=') {
                Some((c, v)) => controls.push((
                    c.parse::<usize>().map_err(|_| bad("control wire"))?,
                    v.parse::<usize>().map_err(|_| bad("control digit"))?,
                )),
                None => wires.push(t.parse::<usize>().map_err(|_| bad("wire index"))?),
            }
        }
        let params = if fields[2] == "-" {
            Vec::new()
        } else {
            fields[2]
                .split(',')
                .map(|t| {
                    t.parse::<f64>().map_err(|_| Error::CircuitParse {
                        line: idx + 1,
                        reason: format!("bad parameter {t:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?
        };
        let duration = fields[3].parse::<f64>().map_err(|_| Error::CircuitParse {
            line: idx + 1,
            reason: format!("bad duration {:?}", fields[3]),
        })?;
        out.push(GateLine { name: fields[0].to_string(), wires, controls, params, duration });
    }
    Ok(out)
}
