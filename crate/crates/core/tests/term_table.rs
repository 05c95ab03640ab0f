//! The assembled generators against an independent, hand-written transcription
//! of the nine-term comparison table.

use std::collections::BTreeSet;

use dicke_sim::presets;
use dicke_sim::{build_generator, build_state_space, SpinManifoldParams, StateSpace, Term, TermFlags, Variant};
use nalgebra::DMatrix;

/// Dense generator assembled directly from the equations, one term at a time.
fn reference_matrix(space: &StateSpace, p: &SpinManifoldParams, flags: TermFlags) -> DMatrix<f64> {
    let b = |t: Term| flags.variant(t) == Variant::ModelB;
    let dim = space.dim();
    let n_nc = dim - 1;
    let top = space.n_emitters() as f64 / 2.0;
    let mut g = DMatrix::zeros(dim, dim);
    for (row, d) in space.indices().iter().enumerate() {
        let (j, m) = (d.j().to_f64(), d.m().to_f64());
        let find = |jj: f64, mm: f64| {
            space
                .indices()
                .iter()
                .position(|x| x.j().to_f64() == jj && x.m().to_f64() == mm)
        };

        g[(row, row)] -= p.gamma * (j * (j + 1.0) - m * (m - 1.0));
        if let Some(col) = find(j, m + 1.0) {
            g[(row, col)] += p.gamma * (j * (j + 1.0) - m * (m + 1.0));
        }

        let prob = (m / j).powi(2);
        let term_a = if b(Term::A) { 1.0 } else { 2.0 * j };
        let term_b = if b(Term::B) { 2.0 * j } else { 1.0 };
        let term_c = if b(Term::C) { prob } else { 1.0 - prob };
        g[(row, row)] -= p.gamma_d * term_a * term_b * term_c;

        if j + 0.5 <= top {
            let col = find(j + 0.5, m + 0.5).unwrap();
            let up = ((m + 0.5) / (j + 0.5)).powi(2);
            let term_d = if b(Term::D) { -2.0 } else { 2.0 };
            let term_e = if b(Term::E) { up } else { 1.0 - up };
            g[(row, col)] -= p.gamma_d * term_a * term_d * (j + 0.5) * term_e;
            let term_f = if b(Term::F) {
                (j + m + 1.0) * (j - m + 1.0)
            } else {
                j + m + 1.0
            };
            g[(row, col)] += p.gamma_isc * term_f;
        }
        let term_g = if b(Term::G) { (j + m) * (j - m + 1.0) } else { j + m };
        g[(row, row)] -= p.gamma_isc * term_g;

        let term_h = if b(Term::H) { prob } else { 1.0 - prob };
        g[(n_nc, row)] += p.gamma_d * term_h * 2.0 * j;
    }
    g[(n_nc, n_nc)] = -(p.gamma + p.gamma_isc);
    g
}

/// Entries a single-term switch away from Model A is expected to move.
fn predicted_changes(space: &StateSpace, term: Term) -> BTreeSet<(usize, usize)> {
    let n_nc = space.dim() - 1;
    let top = space.n_emitters() as f64 / 2.0;
    let mut out = BTreeSet::new();
    for (row, d) in space.indices().iter().enumerate() {
        let (j, m) = (d.j().to_f64(), d.m().to_f64());
        let prob = (m / j).powi(2);
        let source = (j + 0.5 <= top).then(|| space.slot(d.dephasing_source()).unwrap());
        let up = ((m + 0.5) / (j + 0.5)).powi(2);
        match term {
            Term::A => {
                if j > 0.5 && prob < 1.0 {
                    out.insert((row, row));
                }
                if let Some(col) = source {
                    if j > 0.5 && up < 1.0 {
                        out.insert((row, col));
                    }
                }
            }
            Term::B => {
                if j > 0.5 && prob < 1.0 {
                    out.insert((row, row));
                }
            }
            Term::C => {
                if prob != 0.5 {
                    out.insert((row, row));
                }
            }
            Term::D => {
                if let Some(col) = source {
                    if up < 1.0 {
                        out.insert((row, col));
                    }
                }
            }
            Term::E => {
                if let Some(col) = source {
                    if up != 0.5 {
                        out.insert((row, col));
                    }
                }
            }
            Term::F => {
                if let Some(col) = source {
                    if m < j {
                        out.insert((row, col));
                    }
                }
            }
            Term::G => {
                if m.abs() < j {
                    out.insert((row, row));
                }
            }
            Term::H => {
                if prob != 0.5 {
                    out.insert((n_nc, row));
                }
            }
            Term::I => {}
        }
    }
    out
}

fn assert_close(actual: &DMatrix<f64>, expected: &DMatrix<f64>, context: &str) {
    for r in 0..expected.nrows() {
        for c in 0..expected.ncols() {
            let (a, e) = (actual[(r, c)], expected[(r, c)]);
            assert!(
                (a - e).abs() <= 1e-13 * e.abs().max(1e-12),
                "{context}: entry ({r}, {c}) = {a} vs reference {e}"
            );
        }
    }
}

fn all_flag_sets() -> Vec<TermFlags> {
    let mut sets = vec![TermFlags::MODEL_A, TermFlags::MODEL_B];
    sets.extend(Term::ALL.iter().map(|&t| TermFlags::MODEL_A.with(t, Variant::ModelB)));
    sets
}

#[test]
fn generators_match_reference_transcription() {
    let params = presets::N7.params();
    for n in [1, 2, 3, 7, 10] {
        let space = build_state_space(n).unwrap();
        for p in [&params.sigma0, &params.sigma1] {
            for flags in all_flag_sets() {
                let gen = build_generator(&space, p, flags).unwrap();
                assert_close(
                    &gen.matrix().to_dense(),
                    &reference_matrix(&space, p, flags),
                    &format!("N={n} {flags}"),
                );
            }
        }
    }
}

#[test]
fn single_term_switches_touch_exactly_the_predicted_entries() {
    let p = presets::N7.params().sigma1;
    for n in [2, 3, 7] {
        let space = build_state_space(n).unwrap();
        let base = build_generator(&space, &p, TermFlags::MODEL_A)
            .unwrap()
            .matrix()
            .to_dense();
        for term in Term::ALL {
            let flags = TermFlags::MODEL_A.with(term, Variant::ModelB);
            let toggled = build_generator(&space, &p, flags).unwrap().matrix().to_dense();
            let mut changed = BTreeSet::new();
            for r in 0..base.nrows() {
                for c in 0..base.ncols() {
                    if base[(r, c)] != toggled[(r, c)] {
                        changed.insert((r, c));
                    }
                }
            }
            assert_eq!(changed, predicted_changes(&space, term), "N={n} term {term}");
        }
    }
}

#[test]
fn switching_every_term_reproduces_model_b_exactly() {
    let p = presets::N10.params().sigma1;
    let space = build_state_space(10).unwrap();
    let all_b = Term::ALL
        .iter()
        .fold(TermFlags::MODEL_A, |f, &t| f.with(t, Variant::ModelB));
    let none = Term::ALL
        .iter()
        .fold(TermFlags::MODEL_B, |f, &t| f.with(t, Variant::ModelA));
    assert_eq!(
        build_generator(&space, &p, all_b).unwrap().matrix(),
        build_generator(&space, &p, TermFlags::MODEL_B).unwrap().matrix()
    );
    assert_eq!(
        build_generator(&space, &p, none).unwrap().matrix(),
        build_generator(&space, &p, TermFlags::MODEL_A).unwrap().matrix()
    );
}
