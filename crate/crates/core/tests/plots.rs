use std::fs;
use std::path::{Path, PathBuf};

use agmec::harness::{
    emit_plots, run_experiment, write_results, ExperimentKind, ExperimentPlan, TRAJECTORY_FILE,
};
use agmec::scenario::GeneratorParams;
use agmec::Error;

fn plan(kind: ExperimentKind, sweep_values: Vec<f64>) -> ExperimentPlan {
    ExperimentPlan {
        kind,
        sweep_values,
        num_seeds: 2,
        generator: GeneratorParams {
            num_ues: 4,
            num_services: 6,
            num_slots: 20,
            seed: 3,
            ..GeneratorParams::default()
        },
        solver: Default::default(),
    }
}

fn render(dir: &Path, plan: &ExperimentPlan) -> Vec<PathBuf> {
    let res = run_experiment(plan, Some(1)).unwrap();
    write_results(dir, &res).unwrap();
    emit_plots(dir).unwrap()
}

/// Compares against `tests/golden`; set `AGMEC_BLESS=1` to rewrite it.
#[test]
fn figures_match_golden_files() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let bless = std::env::var_os("AGMEC_BLESS").is_some();
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("storage", ExperimentKind::StorageSweep, vec![1.0, 2.0, 3.0]),
        ("workload", ExperimentKind::WorkloadSweep, vec![1.0]),
    ];
    for (tag, kind, values) in cases {
        let out = dir.path().join(tag);
        for f in render(&out, &plan(kind, values)) {
            let name = format!("{tag}_{}", f.file_name().unwrap().to_string_lossy());
            let got = fs::read_to_string(&f).unwrap();
            let want_path = golden.join(&name);
            if bless {
                fs::create_dir_all(&golden).unwrap();
                fs::write(&want_path, &got).unwrap();
                continue;
            }
            let want = fs::read_to_string(&want_path)
                .unwrap_or_else(|_| panic!("missing {}; rerun with AGMEC_BLESS=1", name));
            assert!(got == want, "{name} differs from its golden copy");
        }
    }
}

#[test]
fn plots_are_a_function_of_the_tables() {
    let dir = tempfile::tempdir().unwrap();
    let files = render(dir.path(), &plan(ExperimentKind::Convergence, vec![]));
    let first: Vec<String> = files
        .iter()
        .map(|f| fs::read_to_string(f).unwrap())
        .collect();
    let again = emit_plots(dir.path()).unwrap();
    let second: Vec<String> = again
        .iter()
        .map(|f| fs::read_to_string(f).unwrap())
        .collect();
    assert_eq!(first, second);
    assert_eq!(files.len(), 2);
}

#[test]
fn empty_trajectory_table_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    render(dir.path(), &plan(ExperimentKind::Trajectory, vec![]));
    let path = dir.path().join(TRAJECTORY_FILE);
    let header = fs::read_to_string(&path).unwrap();
    let header = header.lines().next().unwrap().to_string();
    fs::write(&path, header + "\n").unwrap();
    match emit_plots(dir.path()) {
        Err(Error::Plot(msg)) => assert!(msg.contains("trajectory"), "{msg}"),
        other => panic!("expected a plot error, got {other:?}"),
    }
}
