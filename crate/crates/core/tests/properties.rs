use dicke_core::model::{flow, g_t1, jacobian, parity_map, rhs, rhs_raw};
use dicke_core::signal::{amplitudes_of, cluster_values, psd_of};
use dicke_core::stability::{eigenvalues, fixed_points, routh_hurwitz_stable, CROSS_CHECK_BAND};
use dicke_core::{integrate, InitialCondition, IntegrationConfig, ModelParams, Observable, RawParams, State};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -2.0..2.0f64
}

fn state() -> impl Strategy<Value = State> {
    [coord(), coord(), coord(), coord(), coord(), coord()].prop_map(State::from_array)
}

fn params() -> impl Strategy<Value = ModelParams> {
    (0.02..0.4f64, 0.0..0.8f64, 0.1..2.0f64, 0.0..0.05f64, 0.0..0.05f64, 1u32..200)
        .prop_filter_map("valid parameters", |(wq, g, kappa, gd, gphi, n)| {
            RawParams { omega_q: wq, g, kappa, gamma_down: gd, gamma_phi: gphi, n_qubits: n, ..RawParams::default() }
                .derive()
                .ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parity_equivariance_is_exact(s in state(), p in params()) {
        let lhs = flow(&parity_map(&s).to_array(), &p);
        let d = rhs(&s, &p).unwrap();
        let rhs_image = [-d.x, -d.y, d.n, -d.sx, -d.sy, d.sz];
        for i in 0..6 {
            prop_assert_eq!(lhs[i].to_bits(), rhs_image[i].to_bits(), "component {}", i);
        }
    }

    #[test]
    fn np_residual_is_zero(p in params()) {
        prop_assert!(flow(&State::NP.to_array(), &p).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn threshold_independent_of_qubit_number(wq in 0.02..0.4f64, g in 0.1..0.5f64) {
        let base = RawParams::default().with_omega_q(wq).with_g(g);
        let reference = g_t1(&base.with_n_qubits(1).derive().unwrap()).unwrap();
        for n in [10, 50, 1000] {
            let v = g_t1(&base.with_n_qubits(n).derive().unwrap()).unwrap();
            prop_assert!((v - reference).abs() <= 1e-14 * reference);
        }
    }

    #[test]
    fn scaled_and_raw_fields_agree(s in state(), p in params()) {
        let nq = p.n_qubits as f64;
        let raw = rhs_raw(&[s.x * nq, s.y * nq, s.n * nq, s.sx, s.sy, s.sz], &p);
        let d = flow(&s.to_array(), &p);
        let scaled = [raw[0] / nq, raw[1] / nq, raw[2] / nq, raw[3], raw[4], raw[5]];
        for i in 0..6 {
            prop_assert!((d[i] - scaled[i]).abs() <= 1e-12 * (1.0 + d[i].abs()));
        }
    }

    #[test]
    fn clustering_ignores_order(values in prop::collection::vec(-1.0..1.0f64, 1..200), shift in 0usize..200) {
        let tol = 1e-2;
        let a = cluster_values(&values, tol);
        let mut shuffled = values.clone();
        shuffled.rotate_left(shift % values.len());
        shuffled.reverse();
        prop_assert_eq!(a, cluster_values(&shuffled, tol));
    }

    #[test]
    fn amplitude_clusters_ignore_time_origin(a in 0.2..1.0f64, b in 0.1..0.5f64, offset in 0usize..400) {
        // period 200 samples: a two-tone signal with two distinct maxima per period
        let series = |k: usize| {
            let ph = std::f64::consts::TAU * k as f64 / 200.0;
            a * ph.sin() + b * (2.0 * ph).sin()
        };
        let xs: Vec<f64> = (0..6000).map(series).collect();
        let ys: Vec<f64> = (offset..offset + 6000).map(series).collect();
        let ca = amplitudes_of(&xs, Observable::Sz, Some(1e-6)).unwrap();
        let cb = amplitudes_of(&ys, Observable::Sz, Some(1e-6)).unwrap();
        prop_assert_eq!(ca.n_clusters(), cb.n_clusters());
        for (x, y) in ca.clusters.iter().zip(&cb.clusters) {
            prop_assert!((x.0 - y.0).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn jacobian_matches_central_differences(s in state(), p in params()) {
        let j = jacobian(&s, &p).unwrap();
        let h = 1e-6;
        let scale = j.amax().max(1.0);
        for col in 0..6 {
            let (mut up, mut down) = (s.to_array(), s.to_array());
            up[col] += h;
            down[col] -= h;
            let (fu, fd) = (flow(&up, &p), flow(&down, &p));
            for row in 0..6 {
                let fd_entry = (fu[row] - fd[row]) / (2.0 * h);
                prop_assert!((fd_entry - j[(row, col)]).abs() / scale < 1e-5, "entry ({}, {})", row, col);
            }
        }
    }

    #[test]
    fn parseval(xs in prop::collection::vec(-1.0..1.0f64, 4096..6000), dt in 0.1..2.0f64) {
        let sp = psd_of(&xs, dt, Observable::N).unwrap();
        let total: f64 = sp.psd.iter().sum();
        prop_assert!(((total - sp.windowed_power) / sp.windowed_power).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn routh_hurwitz_agrees_with_eigenvalues(p in params()) {
        let (fps, _) = fixed_points(&p).unwrap();
        for fp in fps {
            let j = jacobian(&fp.state, &p).unwrap();
            let max_re = eigenvalues(&j).unwrap().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            if max_re.abs() > CROSS_CHECK_BAND {
                prop_assert_eq!(routh_hurwitz_stable(&j), max_re < 0.0, "{:?} max_re={}", fp.kind, max_re);
            }
        }
    }
}

fn short(t_total: f64, seed: u64) -> IntegrationConfig {
    IntegrationConfig { t_total, t_transient: 0.0, seed, ..IntegrationConfig::default() }
}

#[test]
fn integration_is_deterministic() {
    let p = ModelParams::defaults(0.15, 0.3795);
    let c = short(2000.0, 7);
    let s0 = c.initial_state(&p);
    let a = integrate(&s0, &p, &c).unwrap();
    let b = integrate(&s0, &p, &c).unwrap();
    assert_eq!(a, b);
}

#[test]
fn scaled_and_raw_trajectories_agree() {
    let p = ModelParams::defaults(0.1, 0.32);
    let nq = p.n_qubits as f64;
    let c = IntegrationConfig::default();
    let s0 = State::new(0.02, -0.01, 0.004, 0.1, -0.05, -0.95);
    let mut scaled = s0.to_array();
    let mut raw = [s0.x * nq, s0.y * nq, s0.n * nq, s0.sx, s0.sy, s0.sz];
    let mut a = dicke_core::integrator::Dopri5::<6>::new(c.rel_tol, c.abs_tol, c.max_step);
    let mut b = dicke_core::integrator::Dopri5::<6>::new(c.rel_tol, c.abs_tol, c.max_step);
    let (mut ta, mut tb) = (0.0, 0.0);
    for k in 1..=100 {
        let t = k as f64;
        a.advance(&|y: &[f64; 6]| flow(y, &p), &mut ta, &mut scaled, t).unwrap();
        b.advance(&|y: &[f64; 6]| rhs_raw(y, &p), &mut tb, &mut raw, t).unwrap();
        let back = [raw[0] / nq, raw[1] / nq, raw[2] / nq, raw[3], raw[4], raw[5]];
        for i in 0..6 {
            let tol = 10.0 * (c.abs_tol + c.rel_tol * scaled[i].abs().max(1e-2));
            assert!((back[i] - scaled[i]).abs() < tol, "t={t} i={i}: {} vs {}", back[i], scaled[i]);
        }
    }
}

#[test]
fn tolerance_halving_changes_little() {
    for (wq, g) in [(0.1, 0.2), (0.1, 0.26), (0.1, 0.42)] {
        let p = ModelParams::defaults(wq, g);
        let s0 = short(100.0, 1).initial_state(&p);
        let run = |rel_tol: f64| {
            let c = IntegrationConfig { rel_tol, abs_tol: rel_tol * 1e-2, ..short(100.0, 1) };
            *integrate(&s0, &p, &c).unwrap().last().unwrap()
        };
        let d = run(1e-8) - run(1e-10);
        assert!(d.norm_inf() < 1e-5, "({wq}, {g}): {}", d.norm_inf());
    }
}

#[test]
fn np_basin_below_threshold() {
    for wq in [0.05, 0.1, 0.25] {
        let g = 0.9 * g_t1(&ModelParams::defaults(wq, 0.3)).unwrap();
        let p = ModelParams::defaults(wq, g);
        for seed in 0..50 {
            let c = IntegrationConfig { ic: InitialCondition::NpPerturbed, t_transient: 4900.0, ..short(5000.0, seed) };
            let tr = integrate(&c.initial_state(&p), &p, &c).unwrap();
            let last = tr.last().unwrap();
            assert!((*last - State::NP).norm_inf() < 1e-5, "wq={wq} seed={seed}: {last}");
        }
    }
}

#[test]
fn eigenvalues_are_conjugate_closed() {
    let p = ModelParams::defaults(0.1, 0.3);
    for fp in fixed_points(&p).unwrap().0 {
        let ev = eigenvalues(&jacobian(&fp.state, &p).unwrap()).unwrap();
        for z in &ev {
            assert!(ev.iter().any(|w| (w.re - z.re).abs() < 1e-12 && (w.im + z.im).abs() < 1e-12));
        }
    }
}
