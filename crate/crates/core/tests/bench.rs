mod common;

use boxprop_core::bench::{
    compare, detail_lines, gen_ising_grid, parse_detail_lines, profile_csv, summary_csv,
    CompareOptions, ExactChoice, GridSpec, MethodBudget,
};
use boxprop_core::propagation::DEFAULT_MAX_NODES;
use boxprop_core::Method;
use common::*;

fn both(max_nodes: usize) -> [MethodBudget; 2] {
    [Method::SubT, Method::SawT].map(|method| MethodBudget { method, max_nodes })
}

/// Drops the trailing `time_ms` column.
fn without_times(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

#[test]
fn triangle_report_matches_full_subtree_box() {
    let g = triangle();
    let report = compare(&g, &both(DEFAULT_MAX_NODES), &CompareOptions::default());
    assert!(report.failures.is_empty());
    assert_eq!(report.results.len(), 6);
    report.check_invariants(1e-12).unwrap();
    let exact = report.exact.as_ref().unwrap();
    for r in &report.results {
        assert!(r.bounds.contains(&exact[r.variable.0], 1e-12));
    }
    for gap in report.gaps_of(Method::SubT) {
        assert!((gap - 3.0 / 7.0).abs() < 1e-12);
    }
    let errs = report.bp_errors().unwrap();
    assert!(errs.iter().all(|&e| e < 1e-9));
}

#[test]
fn summary_is_deterministic_apart_from_times() {
    let g = gen_ising_grid(&GridSpec {
        rows: 4,
        cols: 4,
        domain_size: 2,
        beta: 1.0,
        seed: 3,
    })
    .unwrap();
    let opts = CompareOptions {
        exact: ExactChoice::Off,
        ..CompareOptions::default()
    };
    let a = summary_csv(&compare(&g, &both(300), &opts)).unwrap();
    let b = summary_csv(&compare(
        &g,
        &both(300),
        &CompareOptions {
            parallel: false,
            ..opts
        },
    ))
    .unwrap();
    assert_eq!(without_times(&a), without_times(&b));
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "variable,method,gap,time_ms");
    assert_eq!(lines.len(), 33);
    assert!(lines[1].starts_with("0,SubT,"));
    assert!(lines[17].starts_with("0,SAWT,"));
}

#[test]
fn detail_and_profile_outputs() {
    let g = triangle();
    let report = compare(&g, &both(100), &CompareOptions::default());
    let details = report.details();
    assert_eq!(
        parse_detail_lines(&detail_lines(&details)).unwrap(),
        details
    );
    let profile = profile_csv(&report).unwrap();
    let mut lines = profile.lines();
    assert_eq!(lines.next(), Some("series,rank,value"));
    let series: std::collections::BTreeSet<&str> =
        lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(
        series.into_iter().collect::<Vec<_>>(),
        ["BP-error", "SAWT", "SubT"]
    );
}

#[test]
fn vanishing_interactions_give_tiny_gaps() {
    for domain in [2, 3] {
        let spec = GridSpec {
            rows: 5,
            cols: 5,
            domain_size: domain,
            beta: 1e-8,
            seed: 4,
        };
        let g = if domain == 2 {
            gen_ising_grid(&spec)
        } else {
            boxprop_core::bench::gen_ternary_grid(&spec)
        }
        .unwrap();
        let report = compare(&g, &both(500), &CompareOptions::default());
        assert!(report.failures.is_empty());
        assert!(report.results.iter().all(|r| r.gap() < 1e-4));
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let spec = GridSpec {
        rows: 5,
        cols: 5,
        domain_size: 2,
        beta: 0.7,
        seed: 11,
    };
    let a = boxprop_core::write_fg(&gen_ising_grid(&spec).unwrap());
    let b = boxprop_core::write_fg(&gen_ising_grid(&spec).unwrap());
    assert_eq!(a, b);
}
