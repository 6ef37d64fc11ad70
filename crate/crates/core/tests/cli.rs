use std::fs;

use morpho_leakage::cli::{main_with_args, parse_cli, CliError};
use morpho_leakage::experiments::read_records_csv;
use morpho_leakage::io::read_landmark_file;

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["morpho-leakage"];
    full.extend_from_slice(args);
    main_with_args(full)
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["simulate", "--out", out, "--n", "10"]), 0);
    assert_eq!(run(&["simulate", "--out", out, "--sigmaa", "1"]), 2);
    assert_eq!(run(&["no-such-command"]), 2);
    assert_eq!(run(&["simulate", "--out", out, "--n", "ten"]), 2);
    assert_eq!(run(&["simulate", "--out", out, "--sigma", "-1"]), 3);
    assert_eq!(run(&["gpa", "--out", out, "--input", dir.path().join("missing.txt").to_str().unwrap()]), 3);
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn config_file_typo_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "seed = 3\nsigmaa = 0.2\n").unwrap();
    match parse_cli(["morpho-leakage", "simulate", "--config", cfg.to_str().unwrap()]) {
        Err(CliError::Run(e)) => {
            assert!(e.to_string().contains("sigmaa"), "{e}");
            assert_eq!(e.exit_code(), 2);
        }
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "seed = 3\n[simulate]\nn = 12\n").unwrap();
    let s = parse_cli(["morpho-leakage", "simulate", "--config", cfg.to_str().unwrap(), "--n", "15"]).unwrap();
    assert_eq!(s.usize("n").unwrap(), 15);
    assert_eq!(s.u64("seed").unwrap(), 3);
}

#[test]
fn simulate_then_gpa_and_align() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert_eq!(run(&["simulate", "--n", "20", "--p", "5", "--out", sim.to_str().unwrap()]), 0);
    let input = sim.join("landmarks.txt");
    let specimens = read_landmark_file(&input).unwrap();
    assert_eq!(specimens.len(), 20);
    assert_eq!(fs::read_to_string(sim.join("truth.csv")).unwrap().lines().count(), 21);

    let g = dir.path().join("gpa");
    assert_eq!(run(&["gpa", "--input", input.to_str().unwrap(), "--out", g.to_str().unwrap()]), 0);
    assert_eq!(read_landmark_file(&g.join("aligned.txt")).unwrap().len(), 20);

    let a = dir.path().join("align");
    assert_eq!(run(&["align", "--input", input.to_str().unwrap(), "--out", a.to_str().unwrap()]), 0);
    assert_eq!(read_landmark_file(&a.join("train_aligned.txt")).unwrap().len(), 14);
    assert_eq!(read_landmark_file(&a.join("test_aligned.txt")).unwrap().len(), 6);
    assert_eq!(read_landmark_file(&a.join("reference.txt")).unwrap().len(), 1);
}

#[test]
fn grid_writes_boundary_rows_and_heatmaps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let code = run(&["grid", "--n-values", "20:100:20", "--p-values", "4:36:4", "--replicates", "3", "--out", out]);
    assert_eq!(code, 0);
    let records = read_records_csv(&fs::read_to_string(dir.path().join("records.csv")).unwrap()).unwrap();
    assert!(records.iter().any(|r| r.experiment == "boundary" && r.metric == "slope"));
    let svg = fs::read_to_string(dir.path().join("heatmap_rmse.svg")).unwrap();
    assert!(svg.contains("class=\"boundary\""));
    assert!(dir.path().join("heatmap_delta_rmse.svg").exists());
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        let code = run(&["contamination", "--replicates", "10", "--boot-reps", "50", "--threads", threads, "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0);
        csv.push(fs::read(out.join("records.csv")).unwrap());
    }
    assert_eq!(csv[0], csv[1]);
}
