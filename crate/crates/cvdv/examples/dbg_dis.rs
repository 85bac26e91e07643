use cvdv::circuit::Circuit;
use cvdv::gates::{conditional_displacement, displacement};
use cvdv::hilbert::{RegisterLayout, WireKind};
use cvdv::qft::anti_padding_disentangler;
use cvdv::transfer::GaussianLatticeSpec;

fn main() {
    let cutoff = 24;
    let spec_out = GaussianLatticeSpec::new(1.0, 0.1, 2).unwrap();
    let dis = anti_padding_disentangler(1, &spec_out, cutoff).unwrap();
    for g in dis.gates() {
        println!("{} wires {:?} controls {:?} params {:?}", g.name, g.wires, g.controls, g.params);
    }
    let mut oracle = Circuit::new(dis.layout().clone());
    let step = 2.0;
    for (sd, dir) in [(0usize, -1.0f64), (1, 1.0)] {
        oracle.push_controlled("D", vec![0], vec![(1, sd), (2, 1)], vec![dir * step],
            displacement(cutoff, dir * step)).unwrap();
    }
    let lhs = dis.dense_unitary().unwrap();
    let rhs = oracle.dense_unitary().unwrap();
    let mut worst = (0.0f64, 0usize, 0usize);
    for r in 0..lhs.nrows() {
        for c in 0..lhs.ncols() {
            let d = (lhs[(r, c)] - rhs[(r, c)]).norm();
            if d > worst.0 { worst = (d, r, c); }
        }
    }
    println!("cmax {} at ({}, {})", worst.0, worst.1, worst.2);
    let (_, r, c) = worst;
    println!("lhs {} rhs {}", lhs[(r, c)], rhs[(r, c)]);
    // digits: layout [mode 24, q, q, q]: index = ((mode*2 + s)*2 + m)*2 + anc
    let dig = |i: usize| (i / 8, (i / 4) % 2, (i / 2) % 2, i % 2);
    println!("row digits {:?} col digits {:?}", dig(r), dig(c));
    let _ = conditional_displacement(cutoff, step);
}
