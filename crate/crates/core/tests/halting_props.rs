use haltsim::coin::DeviceConfig;
use haltsim::halting::{self, DeviceRun, Instruction, ToyProgram, Verdict};
use haltsim::wiener::TimeScale;
use proptest::prelude::*;

fn device(horizon: usize, trials: u64, seed: u64) -> DeviceRun {
    DeviceRun {
        config: DeviceConfig::new(0.01, 0.05, 0.1).unwrap(),
        scale: TimeScale::Exp2,
        horizon,
        t: 40.0,
        t_cap: 1e4,
        trials,
        seed,
        prior_no_false: 0.5,
    }
}

fn instruction() -> impl Strategy<Value = Instruction> {
    prop_oneof![
        (0usize..4).prop_map(Instruction::Inc),
        (0usize..4).prop_map(Instruction::Dec),
        (0usize..4, 0usize..8).prop_map(|(reg, target)| Instruction::Jz { reg, target }),
        (0usize..8).prop_map(Instruction::Jmp),
        Just(Instruction::Halt),
    ]
}

fn machine() -> impl Strategy<Value = ToyProgram> {
    (prop::collection::vec(0u64..4, 0..=4), prop::collection::vec(instruction(), 1..8)).prop_map(|(regs, mut ins)| {
        let len = ins.len();
        for i in &mut ins {
            match i {
                Instruction::Jz { target, .. } | Instruction::Jmp(target) => *target %= len + 1,
                _ => {}
            }
        }
        ToyProgram::counter_machine(regs, ins).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clicks_are_confirmed_by_simulation(p in machine(), horizon in 1usize..40, seed in any::<u64>()) {
        let report = halting::run_device(&p, &device(horizon, 64, seed)).unwrap();
        prop_assert!(report.steps_simulated <= horizon as u64);
        let truth = halting::simulate(&p, horizon as u64);
        match report.verdict {
            Verdict::Click { witness, confirmed, .. } => {
                prop_assert!(confirmed);
                prop_assert_eq!(truth, Some(witness as u64));
            }
            Verdict::NonClick { .. } => {}
        }
        if truth.is_none() {
            prop_assert!(!report.verdict.is_click());
        }
    }

    #[test]
    fn bounded_loops_click_inside_the_horizon(k in 1u64..48, horizon in 1usize..48) {
        let p = ToyProgram::bounded_loop(k).unwrap();
        let report = halting::run_device(&p, &device(horizon, 200, k)).unwrap();
        prop_assert_eq!(report.steps_simulated, k.min(horizon as u64));
        match report.verdict {
            Verdict::Click { witness, .. } => prop_assert_eq!(witness as u64, k),
            Verdict::NonClick { horizon_blind, halts_at, .. } => {
                prop_assert!(k > horizon as u64);
                prop_assert!(horizon_blind);
                prop_assert_eq!(halts_at, Some(k));
            }
        }
    }

    #[test]
    fn lazy_weights_never_run_ahead(p in machine(), queries in prop::collection::vec(1u64..60, 1..10)) {
        let mut w = halting::weights_for(&p, 0.1).unwrap();
        let mut high = 0;
        for q in queries {
            let v = w.q(q).unwrap();
            high = high.max(q);
            prop_assert!(w.steps_simulated() <= high);
            prop_assert_eq!(v == 1.1, halting::simulate(&p, q) == Some(q));
        }
    }
}

#[test]
fn diverging_program_never_clicks() {
    let r = halting::run_device(&ToyProgram::diverge(), &device(64, 200_000, 4)).unwrap();
    assert!(!r.verdict.is_click());
    let looping = ToyProgram::counter_machine(vec![1], vec![Instruction::Inc(0), Instruction::Jmp(0)]).unwrap();
    let r = halting::run_device(&looping, &device(64, 50_000, 5)).unwrap();
    assert!(!r.verdict.is_click());
}

#[test]
fn posterior_grows_with_duration() {
    let mut last = 0.0;
    for t in [26.0, 40.0, 80.0, 160.0] {
        let mut d = device(16, 1000, 3);
        d.t = t;
        let r = halting::run_device(&ToyProgram::diverge(), &d).unwrap();
        let Verdict::NonClick { posterior_lower_bound: Some(p), .. } = r.verdict else {
            panic!("expected a bounded non-click");
        };
        assert!(p > last);
        last = p;
    }
    assert!(last > 0.9999);
}
