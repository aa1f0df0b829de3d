use nvpump_core::{
    build_generator, loop_transfer, make_pulse_train, propagate, rabi_signal, sweep, thermal_state, Laser,
    PumpModel, RateConstants, ReadoutConfig, StateVector, SweepSpec, SweepVariable,
};
use proptest::prelude::*;

fn table() -> PumpModel {
    PumpModel::new(RateConstants::TABLE).unwrap()
}

fn any_state() -> impl Strategy<Value = StateVector> {
    prop::array::uniform6(0.0f64..1.0).prop_filter_map("empty", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-3).then(|| StateVector::new(w.map(|x| x / s)).unwrap())
    })
}

fn ground_state() -> impl Strategy<Value = StateVector> {
    (0.0f64..=1.0).prop_map(|p1| StateVector::ground(p1).unwrap())
}

fn any_rates() -> impl Strategy<Value = RateConstants> {
    prop::array::uniform11(0.0f64..8.0).prop_map(|k| RateConstants {
        k13: k[0],
        k24: k[1],
        k31: k[2],
        k42: k[3],
        k32: k[4],
        k41: k[5],
        k35: k[6],
        k45: k[7],
        k56: k[8],
        k61: k[9],
        k62: k[10],
    })
}

fn laser() -> impl Strategy<Value = Laser> {
    prop_oneof![Just(Laser::On), Just(Laser::Off)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generator_columns_sum_to_zero(r in any_rates(), l in laser()) {
        let g = build_generator(&r, l).unwrap();
        for j in 0..6 {
            let s: f64 = g.matrix().column(j).sum();
            prop_assert!(s.abs() <= 1e-14 * (1.0 + g.matrix()[(j, j)].abs()));
            for i in 0..6 {
                if i != j {
                    prop_assert!(g.matrix()[(i, j)] >= 0.0);
                }
            }
            prop_assert!(g.matrix()[(j, j)] <= 0.0);
        }
    }

    #[test]
    fn ground_states_survive_the_dark(r in any_rates(), p in ground_state(), dt in 0.0f64..5000.0) {
        let g = build_generator(&r, Laser::Off).unwrap();
        let q = propagate(&g, &p, dt).unwrap();
        prop_assert!(q.max_abs_diff(&p) < 1e-15);
    }

    #[test]
    fn propagation_conserves_and_stays_positive(
        r in any_rates(), l in laser(), p in any_state(), dt in 0.0f64..1000.0,
    ) {
        let g = build_generator(&r, l).unwrap();
        let q = propagate(&g, &p, dt).unwrap();
        prop_assert!((q.sum() - p.sum()).abs() < 1e-10);
        prop_assert!(q.populations().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn propagation_is_a_semigroup(l in laser(), p in any_state(), a in 0.0f64..500.0, b in 0.0f64..500.0) {
        let g = build_generator(&RateConstants::TABLE, l).unwrap();
        let direct = propagate(&g, &p, a + b).unwrap();
        let split = propagate(&g, &propagate(&g, &p, a).unwrap(), b).unwrap();
        prop_assert!(direct.max_abs_diff(&split) < 1e-10);
    }

    #[test]
    fn rotation_preserves_everything_but_the_split(p in ground_state(), theta in -10.0f64..10.0) {
        let q = rabi_signal(&p, theta).unwrap();
        let (a, b) = (p.populations(), q.populations());
        prop_assert!(((a[0] + a[1]) - (b[0] + b[1])).abs() < 1e-15);
        prop_assert_eq!(&a[2..], &b[2..]);
        // P1 - P2 follows cos θ.
        prop_assert!(((b[0] - b[1]) - (a[0] - a[1]) * theta.cos()).abs() < 1e-12);
    }

    #[test]
    fn half_and_full_turns_undo_themselves(p in ground_state(), k in -3i32..3) {
        let theta = k as f64 * std::f64::consts::PI;
        let back = rabi_signal(&rabi_signal(&p, theta).unwrap(), -theta).unwrap();
        prop_assert!(back.max_abs_diff(&p) < 1e-12);
    }

    #[test]
    fn readout_is_linear(p in any_state(), q in any_state(), alpha in 0.0f64..=1.0) {
        let m = table();
        let cfg = ReadoutConfig::default();
        let mix: [f64; 6] = std::array::from_fn(|i| alpha * p.populations()[i] + (1.0 - alpha) * q.populations()[i]);
        let mixed = m.readout_counts(&StateVector::new(mix).unwrap(), &cfg).unwrap();
        let want = alpha * m.readout_counts(&p, &cfg).unwrap()
            + (1.0 - alpha) * m.readout_counts(&q, &cfg).unwrap();
        prop_assert!((mixed - want).abs() < 1e-10);
    }

    #[test]
    fn contrast_is_efficiency_invariant(p in ground_state(), eff in 0.001f64..=1.0) {
        let m = table();
        let full = m.rabi_contrast(&p, &ReadoutConfig::default()).unwrap();
        let dim = m.rabi_contrast(&p, &ReadoutConfig { collection_eff: eff, ..ReadoutConfig::default() }).unwrap();
        prop_assert!((full.contrast - dim.contrast).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eigen_and_iterative_fixed_points_agree(t_s in 4.0f64..200.0, t_w in 10.0f64..350.0) {
        let m = table();
        let (iter, _) = m.steady_state(t_s, t_w).unwrap();
        let eig = m.steady_state_eigen(t_s, t_w).unwrap();
        prop_assert!(iter.max_abs_diff(&eig) < 1e-8);
    }

    #[test]
    fn per_loop_polarization_never_drops(t_s in 1.0f64..300.0, t_w in 10.0f64..350.0) {
        let m = table();
        let (_, n) = m.steady_state(t_s, t_w).unwrap();
        let run = m.run_schedule(&make_pulse_train(t_s, t_w, n + 5).unwrap(), &thermal_state(), true).unwrap();
        let loops = run.per_loop.unwrap();
        let mut prev = thermal_state().polarization();
        for rec in &loops {
            prop_assert!(rec.polarization >= prev - 1e-9, "loop {}: {} < {}", rec.loop_index, rec.polarization, prev);
            prev = rec.polarization;
        }
    }

    #[test]
    fn net_transfer_shrinks_to_balance(t_s in 1.0f64..300.0, t_w in 50.0f64..350.0) {
        let m = table();
        let lp = m.loop_propagator(t_s, t_w).unwrap();
        let (p21, p12) = loop_transfer(&thermal_state(), &lp);
        prop_assert!(p21 - p12 > 0.0);

        let (_, n) = m.steady_state(t_s, t_w).unwrap();
        let run = m.run_schedule(&make_pulse_train(t_s, t_w, n).unwrap(), &thermal_state(), true).unwrap();
        let nets: Vec<f64> = run.per_loop.unwrap().iter().map(|r| r.p21 - r.p12).collect();
        for w in nets.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
        prop_assert!(nets.last().unwrap().abs() < 1e-9);
    }

    #[test]
    fn sub_grids_reproduce_rows(values in prop::collection::vec(4.0f64..200.0, 2..5), pick in 0usize..4) {
        let m = table();
        let full = sweep(&m, &SweepSpec::new(SweepVariable::PulseWidth, values.clone())).unwrap();
        let i = pick % values.len();
        let single = sweep(&m, &SweepSpec::new(SweepVariable::PulseWidth, vec![values[i]])).unwrap();
        prop_assert_eq!(&full.rows[i], &single.rows[0]);
    }
}

#[test]
fn sweeps_are_deterministic() {
    let m = table();
    let spec = SweepSpec::new(SweepVariable::Wait, vec![50.0, 100.0, 150.0, 250.0]);
    let a = sweep(&m, &spec).unwrap();
    let b = sweep(&m, &spec).unwrap();
    assert_eq!(a, b);
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!(x.polarization.to_bits(), y.polarization.to_bits());
        assert_eq!(x.contrast.to_bits(), y.contrast.to_bits());
    }
}
