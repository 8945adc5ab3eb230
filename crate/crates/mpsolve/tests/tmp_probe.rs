//! Temporary timing probe (not part of the suite): measures the full
//! cross-solver agreement workload per instance shape.

use std::time::{Duration, Instant};

use mcfod_core::exact::{branch_and_bound, brute_force};
use mcfod_core::follower::verify_solution;
use mcfod_core::generator::{
    build_instance, make_fixed_fees, random_raw, select_hubs, FeeKind, GenParams,
};
use mcfod_core::milp::{build, solve_with_cuts, BuildOptions, Formulation, SolveStatus};
use mcfod_core::model::{FeeSchedule, Instance, LeaderSolution, Variant};
use mcfod_core::preprocess::compute_costs;

fn solver_cmd() -> String {
    format!("{} {{mps}} {{sol}} {{time_limit}}", env!("CARGO_BIN_EXE_mpsolve"))
}

fn generated(n: u32, hub_count: u32, carriers: u32, seed: u64) -> Instance {
    let params = GenParams {
        tau: (f64::from(hub_count) - 0.5) / f64::from(n),
        carriers,
        seed,
        ..GenParams::default()
    };
    let raw = random_raw(n, seed);
    let hubs = select_hubs(&raw, &params).unwrap();
    build_instance(&raw, &hubs, &params).unwrap()
}

fn solve_milp(
    inst: &Instance,
    formulation: Formulation,
    variant: Variant,
    fees: Option<&FeeSchedule>,
    options: BuildOptions,
) -> LeaderSolution {
    let costs =
        (formulation == Formulation::Ip).then(|| compute_costs(inst, variant, fees).unwrap());
    let model = build(inst, formulation, variant, fees, costs.as_ref(), options).unwrap();
    let outcome =
        solve_with_cuts(&model, &solver_cmd(), Some(Duration::from_secs(120)), false).unwrap();
    assert_eq!(outcome.status, SolveStatus::Optimal, "{formulation}/{variant:?}/{options:?}");
    let solution = mcfod_core::milp::extract(inst, &model, &outcome, fees).unwrap();
    let report = verify_solution(inst, &solution, variant, fees);
    assert!(report.ok);
    solution
}

fn full_workload(seed: u64, n: u32, hubs: u32, carriers: u32) -> Duration {
    let started = Instant::now();
    let inst = generated(n, hubs, carriers, seed);
    let kind = if seed % 2 == 0 { FeeKind::Max } else { FeeKind::Avg };
    let fixed = make_fixed_fees(&inst, kind);

    for variant in [Variant::Free, Variant::FixedOptimistic, Variant::FixedRelaxed] {
        let fees = (variant != Variant::Free).then_some(&fixed);
        let costs = compute_costs(&inst, variant, fees).unwrap();
        let baseline = brute_force(&inst, &costs).unwrap().objective;
        let bounded = branch_and_bound(&inst, &costs).unwrap().objective;
        assert!((bounded - baseline).abs() <= 1e-6);

        let mut configs = vec![
            (Formulation::Ep, BuildOptions::default()),
            (Formulation::Ip, BuildOptions::default()),
            (Formulation::If, BuildOptions::default()),
        ];
        for big_m in [false, true] {
            for defer_cuts in [false, true] {
                configs.push((Formulation::Ef, BuildOptions { big_m, defer_cuts }));
            }
        }
        for (formulation, options) in configs {
            let decoded = solve_milp(&inst, formulation, variant, fees, options);
            assert!((decoded.objective - baseline).abs() <= 1e-6);
        }
    }
    started.elapsed()
}

#[test]
fn probe() {
    let cells: &[(u32, u32, u32)] = &[
        (4, 1, 1),
        (4, 2, 2),
        (4, 3, 3),
        (5, 1, 1),
        (5, 2, 2),
        (5, 3, 2),
        (5, 2, 3),
        (6, 1, 2),
        (6, 2, 1),
        (6, 2, 2),
        (6, 3, 1),
        (7, 1, 2),
        (7, 2, 1),
        (7, 1, 3),
        (8, 1, 1),
        (8, 2, 1),
        (8, 3, 1),
        (8, 1, 2),
    ];
    for &(n, h, k) in cells {
        for seed in [11u64, 12] {
            let t = full_workload(seed, n, h, k);
            println!("cell n={n} H={h} K={k} seed={seed}: {:.2}s", t.as_secs_f64());
        }
    }
}
