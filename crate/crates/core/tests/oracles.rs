use approx::assert_abs_diff_eq;
use ndarray::Array2;
use parity_qst::dynamics::{
    concurrence, entanglement_of_formation, evolve_lindblad, evolve_unitary_with, EvolveOptions, Hamiltonian,
    InitialState, Jump, JumpMatrix, LindbladSpec, Lindbladian, Propagator, Tolerances,
};
use parity_qst::dynamics::lindblad::propagate;
use parity_qst::presets;
use parity_qst::protocol::{bloch_samples, thermal_product_check, DressedFrame, Mediator, SamplingScheme};
use parity_qst::qops::{hermitian_eigendecomposition, pauli, Axis, DensityMatrix, FactorRole, Operator, SubsystemLayout, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn two_qubits() -> SubsystemLayout {
    SubsystemLayout::new(&[(2, FactorRole::ExternalQubit), (2, FactorRole::ExternalQubit)]).unwrap()
}

fn werner(p: f64) -> DensityMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let phi = [c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)];
    let m = Array2::from_shape_fn((4, 4), |(i, j)| {
        phi[i] * phi[j].conj() * p + if i == j { c((1.0 - p) / 4.0, 0.0) } else { c(0.0, 0.0) }
    });
    DensityMatrix::new(Operator::new(two_qubits(), m).unwrap()).unwrap()
}

#[test]
fn werner_concurrence_matches_closed_form() {
    for i in 0..=20 {
        let p = i as f64 / 20.0;
        let want = ((3.0 * p - 1.0) / 2.0).max(0.0);
        assert_abs_diff_eq!(concurrence(&werner(p)).unwrap(), want, epsilon = 1e-9);
    }
    assert_abs_diff_eq!(entanglement_of_formation(&werner(1.0)).unwrap(), 1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(entanglement_of_formation(&werner(0.3)).unwrap(), 0.0, epsilon = 1e-12);
}

#[test]
fn complex_bell_state_is_maximally_entangled() {
    // (|↑↓⟩ + i|↓↑⟩)/√2 needs complex eigenvectors inside the concurrence
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let psi = [c(0.0, 0.0), c(s, 0.0), c(0.0, s), c(0.0, 0.0)];
    let m = Array2::from_shape_fn((4, 4), |(i, j)| psi[i] * psi[j].conj());
    let rho = DensityMatrix::new(Operator::new(two_qubits(), m).unwrap()).unwrap();
    assert_abs_diff_eq!(concurrence(&rho).unwrap(), 1.0, epsilon = 1e-9);
}

#[test]
fn resonant_drive_flips_a_qubit() {
    let l = SubsystemLayout::single(2, FactorRole::ExternalQubit).unwrap();
    let h0 = Operator::new(l.clone(), pauli(Axis::Z).into_data().mapv(|z| z * 0.5)).unwrap();
    let v = Operator::new(l.clone(), pauli(Axis::X).into_data()).unwrap();
    let omega = 0.004;
    let h = Hamiltonian::TimeDependent { h0: &h0, terms: vec![(&v, Box::new(move |t: f64| omega * t.cos()))] };
    let mut down = ndarray::Array1::from_elem(2, c(0.0, 0.0));
    down[1] = c(1.0, 0.0);
    let up_proj = Operator::from_diagonal(&l, &[1.0, 0.0]).unwrap();
    let t_pi = std::f64::consts::PI / omega;
    let mut p = Vec::new();
    let tol = Tolerances { rtol: 1e-12, atol: 1e-14 };
    evolve_unitary_with(&h, &InitialState::Pure(down), &[0.0, 0.5 * t_pi, t_pi], tol, |_, _, s| {
        p.push(s.expectation(up_proj.data()));
        Ok(())
    })
    .unwrap();
    // rotating-wave result, corrections O(Ω/ω)
    assert_abs_diff_eq!(p[1], 0.5, epsilon = 5e-3);
    assert_abs_diff_eq!(p[2], 1.0, epsilon = 5e-3);
}

fn random_lindbladian() -> (Lindbladian, Array2<C64>) {
    let n = 5;
    let l = SubsystemLayout::single(n, FactorRole::Level).unwrap();
    let h = Array2::from_shape_fn((n, n), |(i, j)| {
        let a = ((i * 7 + j * 3) as f64).sin();
        let b = ((i * 5 + j * 11) as f64).cos() * if i == j { 0.0 } else { 1.0 };
        if i <= j { c(a, b) } else { c(((j * 7 + i * 3) as f64).sin(), -((j * 5 + i * 11) as f64).cos()) }
    });
    let lower = Array2::from_shape_fn((n, n), |(i, j)| if j == i + 1 { c((j as f64).sqrt(), 0.0) } else { c(0.0, 0.0) });
    let deph = Array2::from_shape_fn((n, n), |(i, j)| if i == j { c(i as f64 * 0.3, 0.0) } else { c(0.0, 0.0) });
    let spec = LindbladSpec {
        hamiltonian: Operator::new(l.clone(), h).unwrap(),
        dressed_jumps: vec![Jump { operator: Operator::new(l.clone(), lower).unwrap(), rate: 0.05, label: "a".into() }],
        local_jumps: vec![Jump { operator: Operator::new(l, deph).unwrap(), rate: 0.2, label: "n".into() }],
    };
    let mut rho = Array2::from_elem((n, n), c(0.02, 0.01));
    for i in 0..n {
        rho[(i, i)] = c(0.2, 0.0);
        for j in 0..i {
            rho[(i, j)] = rho[(j, i)].conj();
        }
    }
    (Lindbladian::new(&spec).unwrap(), rho)
}

#[test]
fn chebyshev_and_adaptive_propagators_agree() {
    let (l, rho0) = random_lindbladian();
    let times: Vec<f64> = (0..=8).map(|k| k as f64 * 2.5).collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    propagate(&l, rho0.clone(), &times, Propagator::Chebyshev { tol: 1e-13 }, |_, _, r| {
        a.push(r.clone());
        Ok(())
    })
    .unwrap();
    propagate(&l, rho0, &times, Propagator::Adaptive(Tolerances { rtol: 1e-11, atol: 1e-13 }), |_, _, r| {
        b.push(r.clone());
        Ok(())
    })
    .unwrap();
    for (x, y) in a.iter().zip(&b) {
        let d = (x - y).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(d < 1e-8, "propagators differ by {d}");
        assert_abs_diff_eq!(x.diag().sum().re, 1.0, epsilon = 1e-10);
    }
}

#[test]
fn decay_and_dephasing_match_bloch_equations() {
    let l = SubsystemLayout::single(2, FactorRole::ExternalQubit).unwrap();
    let (w, gamma, gphi) = (1.3, 0.07, 0.02);
    let h = Operator::new(l.clone(), pauli(Axis::Z).into_data().mapv(|z| z * (0.5 * w))).unwrap();
    // |↓⟩ is index 1, so the lowering operator maps 0 → 1
    let mut sm = Array2::from_elem((2, 2), c(0.0, 0.0));
    sm[(1, 0)] = c(1.0, 0.0);
    let spec = LindbladSpec {
        hamiltonian: h,
        dressed_jumps: vec![],
        local_jumps: vec![
            Jump { operator: Operator::new(l.clone(), sm).unwrap(), rate: gamma, label: "decay".into() },
            Jump { operator: Operator::new(l.clone(), pauli(Axis::Z).into_data()).unwrap(), rate: gphi, label: "z".into() },
        ],
    };
    let plus = Array2::from_elem((2, 2), c(0.5, 0.0));
    let rho0 = DensityMatrix::new(Operator::new(l.clone(), plus).unwrap()).unwrap();
    let sx = Operator::new(l.clone(), pauli(Axis::X).into_data()).unwrap();
    let up = Operator::from_diagonal(&l, &[1.0, 0.0]).unwrap();
    let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.75).collect();
    for propagator in [Propagator::Chebyshev { tol: 1e-12 }, Propagator::Adaptive(Tolerances::default())] {
        let opts = EvolveOptions { propagator, check_positivity: true };
        let tr = evolve_lindblad(&spec, &rho0, &times, &[("sx", &sx), ("up", &up)], &opts).unwrap();
        for (k, t) in times.iter().enumerate() {
            let coherence = (-(0.5 * gamma + 2.0 * gphi) * t).exp() * (w * t).cos();
            assert_abs_diff_eq!(tr.get("sx").unwrap()[k], coherence, epsilon = 1e-7);
            assert_abs_diff_eq!(tr.get("up").unwrap()[k], 0.5 * (-gamma * t).exp(), epsilon = 1e-7);
        }
    }
}

#[test]
fn fibonacci_lattice_reproduces_sphere_moments() {
    let n = 2000;
    for scheme in [SamplingScheme::Fibonacci, SamplingScheme::SeededUniform] {
        let s = bloch_samples(n, scheme, 11).unwrap();
        let mut mean = [0.0; 3];
        let mut second = [[0.0; 3]; 3];
        for b in &s {
            let v = b.bloch_vector();
            for i in 0..3 {
                mean[i] += v[i] / n as f64;
                for j in 0..3 {
                    second[i][j] += v[i] * v[j] / n as f64;
                }
            }
        }
        let tol = if scheme == SamplingScheme::Fibonacci { 2e-3 } else { 0.05 };
        for i in 0..3 {
            assert!(mean[i].abs() < tol, "{scheme:?} mean {mean:?}");
            for j in 0..3 {
                let want = if i == j { 1.0 / 3.0 } else { 0.0 };
                assert!((second[i][j] - want).abs() < tol, "{scheme:?} second moment {second:?}");
            }
        }
    }
    let a = bloch_samples(50, SamplingScheme::SeededUniform, 4).unwrap();
    let b = bloch_samples(50, SamplingScheme::SeededUniform, 4).unwrap();
    let d = bloch_samples(50, SamplingScheme::SeededUniform, 5).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, d);
}

#[test]
fn thermal_product_tends_to_one_when_cold() {
    let m = Mediator::Rabi(presets::full_model().unwrap());
    let cold = thermal_product_check(&m, 1e-3).unwrap().overlap;
    let warm = thermal_product_check(&m, presets::theta()).unwrap().overlap;
    let hot = thermal_product_check(&m, 1.0).unwrap().overlap;
    // at θ → 0 both states are the ground state up to the weak dressing λ
    assert!(cold > 0.999, "{cold}");
    assert!(cold > warm && warm > hot);
}

#[test]
fn dressed_frame_reproduces_low_full_spectrum() {
    let model = presets::full_model().unwrap();
    let m = Mediator::Rabi(model);
    let frame = DressedFrame::new(&m, 4.5).unwrap();
    let full = hermitian_eigendecomposition(&m.full_hamiltonian().unwrap()).unwrap().values;
    let nu0 = frame.eigensystem.freqs[0];
    let f = hermitian_eigendecomposition(&frame.hamiltonian).unwrap().values;
    for k in 0..8 {
        assert_abs_diff_eq!(f[k] + nu0, full[k], epsilon = 2e-5);
    }
    // splitting of the hybridized doublet near ω_ext above the ground state
    let doublet = |e: &[f64]| {
        let target = e[0] + m.omega_ext()[0];
        let mut near: Vec<f64> = e.iter().cloned().filter(|x| (x - target).abs() < 0.02).collect();
        near.sort_by(f64::total_cmp);
        assert!(near.len() >= 2, "{near:?}");
        near[1] - near[0]
    };
    let full_split = doublet(full.as_slice().unwrap());
    let frame_split = doublet(f.as_slice().unwrap());
    assert!((frame_split - full_split).abs() < 0.02 * full_split, "{frame_split} vs {full_split}");
}

#[test]
fn dense_and_sparse_jumps_agree() {
    let (l, rho) = random_lindbladian();
    let n = l.dim();
    let m = Array2::from_shape_fn((n, n), |(i, j)| c(((i + 2 * j) as f64).cos(), ((3 * i + j) as f64).sin()));
    let h = Array2::from_diag(&ndarray::Array1::from_iter((0..n).map(|k| c(k as f64, 0.0))));
    let dense = Lindbladian::from_parts(h.clone(), vec![(0.3, JumpMatrix::Dense(m.clone()))]).unwrap();
    let triplets = m.indexed_iter().map(|((i, j), v)| (i, j, *v)).collect();
    let sparse = Lindbladian::from_parts(h, vec![(0.3, JumpMatrix::Sparse(triplets))]).unwrap();
    let d = dense.apply_alloc(&rho) - sparse.apply_alloc(&rho);
    assert!(d.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-13);
}
