mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use mrdg_core::basis::build_basis;
use mrdg_core::domain::Domain;
use mrdg_core::element::{ElementKey, ElementTable};
use mrdg_core::operator::eval_solution;
use mrdg_core::problems::transport_problem;
use mrdg_core::projection::{adaptive_project, element_indicator, NormChoice, ThresholdConfig};
use mrdg_core::runner::{run_problem, RunConfig};
use mrdg_core::stepper::coarsen;
use mrdg_core::transform::ActiveSet;
use mrdg_core::operator::{Discretization, FluxKind};

use common::{gram_deviation, mass_drift, rk3_observed_order};

#[test]
fn gram_is_identity_through_level_four() {
    for k in 0..=2 {
        let dev = gram_deviation(k, 4);
        assert!(dev <= 1e-11, "k={k}: {dev:e}");
    }
}

#[test]
fn rk3_is_third_order() {
    let order = rk3_observed_order();
    assert!(order >= 2.9, "{order}");
}

#[test]
fn adaptive_steps_conserve_mass() {
    for problem in ["linear_smooth", "linear_discontinuous"] {
        let drift = mass_drift(problem, 1, 5, 1e-3, 100);
        assert!(drift <= 1e-11, "{problem}: {drift:e}");
    }
}

#[test]
fn projected_sets_are_nested_in_epsilon() {
    let p = transport_problem("rotation_bell", 2).unwrap();
    let basis = build_basis(2).unwrap();
    let mut prev: Option<ElementTable> = None;
    for eps in [1e-2, 1e-3, 1e-4, 1e-5] {
        let th = ThresholdConfig::new(eps, NormChoice::L2, 6, 2).unwrap();
        let t = adaptive_project(&*p.initial, &th, &basis, &p.domain).unwrap();
        t.audit().unwrap();
        if let Some(coarse) = &prev {
            assert!(coarse.len() <= t.len());
            assert!(coarse.sorted_keys().iter().all(|k| t.contains(k)), "eps={eps}");
        }
        prev = Some(t);
    }
}

#[test]
fn coarsening_only_shrinks_and_leaves_no_small_leaves() {
    let p = transport_problem("linear_discontinuous", 2).unwrap();
    let basis = build_basis(1).unwrap();
    let n = 6;
    let fine = ThresholdConfig::new(1e-5, NormChoice::L1, n, 1).unwrap();
    let mut table = adaptive_project(&*p.initial, &fine, &basis, &p.domain).unwrap();
    let disc = Discretization::new(basis.clone(), p.domain.clone(), n, FluxKind::Upwind).unwrap();
    let mut sizes = vec![table.len()];
    for eta in [1e-5, 1e-4, 1e-3, 1e-2] {
        let th = ThresholdConfig::with_eta(10.0 * eta, eta, NormChoice::L1, n, 1).unwrap();
        let before: Vec<ElementKey> = table.sorted_keys();
        let removed = coarsen(&mut table, &disc, &th).unwrap();
        table.audit().unwrap();
        assert_eq!(before.len() - removed, table.len());
        assert!(table.sorted_keys().iter().all(|k| before.contains(k)));
        for k in table.sorted_leaves().iter().filter(|k| !k.is_root()) {
            let c = &table.get(k).unwrap().coeffs;
            assert!(element_indicator(c, k, &basis, NormChoice::L1, &p.domain) >= eta);
        }
        sizes.push(table.len());
    }
    assert!(sizes.windows(2).all(|w| w[1] <= w[0]), "{sizes:?}");
    assert!(table.contains(&ElementKey::root(2)));
}

fn small_run(dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_json(
        r#"{"problem": "rotation_discontinuous", "degree": 1, "max_level": 5, "epsilon": 1e-3, "final_time": 0.1}"#,
    )
    .unwrap();
    cfg.output_stride = 5;
    cfg.output_dir = Some(dir.to_path_buf());
    cfg
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn identical_configs_give_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_problem(&small_run(a.path())).unwrap();
    run_problem(&small_run(b.path())).unwrap();
    let (fa, fb) = (dir_contents(a.path()), dir_contents(b.path()));
    assert!(fa.contains_key("diagnostics.csv") && fa.contains_key("snapshot_0.csv"));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        assert!(bytes == &fb[name], "{name} differs");
    }
}

fn parse_elements(text: &str, d: usize, k: usize, n: u32) -> ElementTable {
    let mut table = ElementTable::new(d, k, n);
    let mut rows: Vec<(Vec<u32>, Vec<u32>, Vec<f64>)> = text
        .lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let l = f[..d].iter().map(|v| v.parse().unwrap()).collect();
            let j = f[d..2 * d].iter().map(|v| v.parse().unwrap()).collect();
            let c = f[2 * d + 1..].iter().map(|v| v.parse().unwrap()).collect();
            (l, j, c)
        })
        .collect();
    rows.sort_by_key(|(l, _, _)| l.iter().sum::<u32>());
    for (l, j, c) in rows {
        table.insert_with(ElementKey::new(&l, &j).unwrap(), Some(c)).unwrap();
    }
    table
}

#[test]
fn snapshot_values_round_trip_through_element_dump() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_run(dir.path());
    let summary = run_problem(&cfg).unwrap();
    let step = summary.steps;
    let text = fs::read_to_string(dir.path().join(format!("elements_{step}.csv"))).unwrap();
    let table = parse_elements(&text, 2, 1, 5);
    assert_eq!(table.len(), summary.dof_elems);
    let basis = build_basis(1).unwrap();
    let domain = Domain::unit_periodic(2);
    let set = ActiveSet::from_table(&table);
    let coeffs = set.gather(&table);
    let snap = fs::read_to_string(dir.path().join(format!("snapshot_{step}.csv"))).unwrap();
    let mut lines = snap.lines();
    assert_eq!(lines.next(), Some("x1,x2,value"));
    let mut count = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let recomputed = eval_solution(&basis, &domain, &set, &coeffs, &v[..2]);
        assert!((recomputed - v[2]).abs() <= 1e-12, "{line}: {recomputed}");
        count += 1;
    }
    assert_eq!(count, 32 * 32);
}
