//! Structural checks on the built formulations and their MPS rendering,
//! none of which need an external solver: frozen variable/row counts for
//! the pair formulation on the five-node example, the closed-form size
//! formula, deferred-row bookkeeping, and byte-stable MPS output.

use mcfod_core::milp::{build, emit_mps, BuildOptions, Formulation};
use mcfod_core::model::{load_instance, FeeSchedule, Instance, Variant, MONEY_EPS};
use mcfod_core::preprocess::compute_costs;

fn fixture(name: &str) -> Instance {
    load_instance(format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn fixed_fees(inst: &Instance) -> FeeSchedule {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/fixtures/example1_fixed_fees.json"
    ))
    .unwrap();
    let fees = FeeSchedule::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
    fees.validate(inst).unwrap();
    fees
}

fn count_prefix<'a>(names: impl Iterator<Item = &'a str>, prefix: &str) -> usize {
    names.filter(|name| name.starts_with(prefix)).count()
}

#[test]
fn pair_model_counts_match_the_worked_example() {
    let inst = fixture("example1.json");
    let costs = compute_costs(&inst, Variant::Free, None).unwrap();
    let model =
        build(&inst, Formulation::Ip, Variant::Free, None, Some(&costs), BuildOptions::default())
            .unwrap();

    assert_eq!(model.variables().len(), 26);
    assert_eq!(model.rows().len(), 19);
    assert!(model.deferred_rows().is_empty());

    let var_names = || model.variables().iter().map(|v| v.name.as_str());
    assert_eq!(count_prefix(var_names(), "s_"), 4);
    assert_eq!(count_prefix(var_names(), "a_"), 6);
    assert_eq!(count_prefix(var_names(), "pi_"), 16);

    let row_names = || model.rows().iter().map(|row| row.name.as_str());
    assert_eq!(count_prefix(row_names(), "alloc_"), 3);
    assert_eq!(count_prefix(row_names(), "serve_"), 4);
    assert_eq!(count_prefix(row_names(), "olink_"), 4);
    assert_eq!(count_prefix(row_names(), "dlink_"), 8);
}

#[test]
fn pair_model_size_follows_the_closed_form() {
    // Variables: one serve flag per commodity, one assignment per
    // (non-hub, carrier), one pair flag per tensor cell that is servable
    // and strictly profitable.
    for (inst, variant, fees) in [
        (fixture("example1.json"), Variant::Free, None),
        (fixture("example1.json"), Variant::FixedOptimistic, Some(())),
        (fixture("example1.json"), Variant::FixedRelaxed, Some(())),
    ] {
        let fees = fees.map(|_| fixed_fees(&inst));
        let costs = compute_costs(&inst, variant, fees.as_ref()).unwrap();
        let model = build(
            &inst,
            Formulation::Ip,
            variant,
            None,
            Some(&costs),
            BuildOptions::default(),
        )
        .unwrap();

        let r_count = inst.commodity_count();
        let k_count = inst.carrier_count() as usize;
        let non_hubs = inst.non_hubs().count();
        let mut kept = 0usize;
        for r in 0..r_count {
            let revenue = inst.commodity(r).revenue;
            for k in inst.carriers() {
                for l in inst.carriers() {
                    if let Some(cost) = costs.get(r, k, l) {
                        if cost < revenue - MONEY_EPS {
                            kept += 1;
                        }
                    }
                }
            }
        }
        let pruned = r_count * k_count * k_count - kept;
        assert_eq!(
            model.variables().len(),
            r_count + non_hubs * k_count + r_count * k_count * k_count - pruned,
            "variable count off for {variant:?}"
        );
    }
}

#[test]
fn deferred_rows_only_appear_when_requested() {
    let inst = fixture("example1.json");
    let defer = BuildOptions { defer_cuts: true, ..BuildOptions::default() };
    for formulation in [Formulation::Ef, Formulation::If] {
        let eager =
            build(&inst, formulation, Variant::Free, None, None, BuildOptions::default()).unwrap();
        let lazy = build(&inst, formulation, Variant::Free, None, None, defer).unwrap();
        assert!(eager.deferred_rows().is_empty());
        assert!(!lazy.deferred_rows().is_empty(), "{formulation} should defer leg-cost rows");
        // Deferral moves rows wholesale; nothing is lost or invented.
        assert_eq!(
            eager.rows().len(),
            lazy.rows().len() + lazy.deferred_rows().len(),
            "{formulation} row split"
        );
        assert_eq!(eager.variables().len(), lazy.variables().len());
    }
}

#[test]
fn big_m_mode_changes_row_counts_not_variables() {
    let inst = fixture("example1.json");
    let big_m = BuildOptions { big_m: true, ..BuildOptions::default() };
    for formulation in [Formulation::Ef, Formulation::If] {
        let narrow =
            build(&inst, formulation, Variant::Free, None, None, BuildOptions::default()).unwrap();
        let wide = build(&inst, formulation, Variant::Free, None, None, big_m).unwrap();
        assert_eq!(narrow.variables().len(), wide.variables().len());
        assert!(
            wide.rows().len() < narrow.rows().len(),
            "{formulation}: big-M mode should aggregate leg-cost rows"
        );
    }
}

#[test]
fn every_row_references_declared_variables_exactly_once() {
    let inst = fixture("example1.json");
    let fees = fixed_fees(&inst);
    for formulation in [Formulation::Ep, Formulation::Ef, Formulation::If, Formulation::Ip] {
        for variant in [Variant::Free, Variant::FixedOptimistic, Variant::FixedRelaxed] {
            let fee_arg = (variant != Variant::Free).then_some(&fees);
            let costs = (formulation == Formulation::Ip)
                .then(|| compute_costs(&inst, variant, fee_arg).unwrap());
            let model = build(
                &inst,
                formulation,
                variant,
                fee_arg,
                costs.as_ref(),
                BuildOptions::default(),
            )
            .unwrap();

            let mut names = std::collections::BTreeSet::new();
            for var in model.variables() {
                assert!(names.insert(var.name.clone()), "duplicate variable {}", var.name);
                assert!(var.lower <= var.upper);
            }
            let mut row_names = std::collections::BTreeSet::new();
            for row in model.rows().iter().chain(model.deferred_rows()) {
                assert!(row_names.insert(row.name.clone()), "duplicate row {}", row.name);
                assert!(!row.terms.is_empty(), "empty row {}", row.name);
                let mut seen = std::collections::BTreeSet::new();
                for &(var, coeff) in &row.terms {
                    assert!(var < model.variables().len(), "dangling index in {}", row.name);
                    assert!(seen.insert(var), "repeated column in row {}", row.name);
                    assert!(coeff.is_finite());
                }
            }
        }
    }
}

#[test]
fn mps_emission_is_deterministic() {
    let inst = fixture("example1.json");
    let fees = fixed_fees(&inst);
    for formulation in [Formulation::Ep, Formulation::Ef, Formulation::If, Formulation::Ip] {
        for variant in [Variant::Free, Variant::FixedOptimistic, Variant::FixedRelaxed] {
            let fee_arg = (variant != Variant::Free).then_some(&fees);
            let costs = (formulation == Formulation::Ip)
                .then(|| compute_costs(&inst, variant, fee_arg).unwrap());
            let make = || {
                build(
                    &inst,
                    formulation,
                    variant,
                    fee_arg,
                    costs.as_ref(),
                    BuildOptions::default(),
                )
                .unwrap()
            };
            let first = emit_mps(&make());
            let second = emit_mps(&make());
            assert_eq!(first, second, "{formulation}/{variant:?} emission not stable");
            assert!(first.ends_with("ENDATA\n"));
        }
    }
}

/// Fully frozen MPS text for a minimal instance: one carrier, one hub, one
/// commodity.  Guards the exact byte format the bridge hands to external
/// solvers; any change here is a compatibility break.
#[test]
fn mps_golden_for_a_tiny_pair_model() {
    let inst = tiny_instance();
    let costs = compute_costs(&inst, Variant::Free, None).unwrap();
    let model =
        build(&inst, Formulation::Ip, Variant::Free, None, Some(&costs), BuildOptions::default())
            .unwrap();
    let text = emit_mps(&model);
    let expected = "\
* maximisation model emitted with negated objective
NAME ip_free
ROWS
 N OBJ
 L alloc_n1
 L alloc_n2
 E serve_r1
 L olink_r1_k1
 L dlink_r1_l1
COLUMNS
 M0 'MARKER' 'INTORG'
 s_r1 OBJ -100
 s_r1 serve_r1 -1
 a_n1_k1 alloc_n1 1
 a_n1_k1 olink_r1_k1 -1
 a_n2_k1 alloc_n2 1
 a_n2_k1 dlink_r1_l1 -1
 pi_r1_k1_l1 OBJ 30
 pi_r1_k1_l1 serve_r1 1
 pi_r1_k1_l1 olink_r1_k1 1
 pi_r1_k1_l1 dlink_r1_l1 1
 M1 'MARKER' 'INTEND'
RHS
 RHS alloc_n1 1
 RHS alloc_n2 1
BOUNDS
 BV BND s_r1
 BV BND a_n1_k1
 BV BND a_n2_k1
 BV BND pi_r1_k1_l1
ENDATA
";
    assert_eq!(text, expected);
}

fn tiny_instance() -> Instance {
    let mut access = std::collections::BTreeMap::new();
    access.insert((0, 1, 3), 10.0);
    let mut dist = std::collections::BTreeMap::new();
    dist.insert((0, 1, 3), 20.0);
    Instance::new(
        3,
        vec![3],
        1,
        vec![mcfod_core::model::Commodity {
            origin: 1,
            destination: 2,
            demand: 1.0,
            revenue: 100.0,
        }],
        std::collections::BTreeMap::new(),
        access,
        dist,
        serde_json::Map::new(),
    )
    .unwrap()
}
