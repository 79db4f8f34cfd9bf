use std::fs;
use std::path::Path;

use ubssd::harness::{self, run_sweep, stats, ExperimentConfig, RunRecord, SweepOptions, CELLS_DIR, CSV_FILE};

/// Records with wall-clock times removed.
fn untimed(records: &[RunRecord]) -> Vec<RunRecord> {
    records.iter().cloned().map(|r| RunRecord { wall_seconds: 0.0, ..r }).collect()
}

fn config(dir: &Path, seeds: usize) -> ExperimentConfig {
    ExperimentConfig::from_toml(&format!(
        r#"
name = "tiny"
d = 2
m = 2
l = [1]
t_grid = {{ min = 1000, max = 4000, points = 3 }}
seeds = {seeds}
master_seed = 11
methods = ["lpa", "tcc"]
output = "{}"
[database]
kind = "letters"
"#,
        dir.display()
    ))
    .unwrap()
}

#[test]
fn resume_after_interruption_matches_uninterrupted_run() {
    let a = tempfile::tempdir().unwrap();
    let full = run_sweep(&config(a.path(), 3), SweepOptions::default()).unwrap();

    // simulate a crash: only some cells on disk, one of them truncated
    let b = tempfile::tempdir().unwrap();
    let partial = run_sweep(&config(b.path(), 2), SweepOptions::default()).unwrap();
    assert_eq!(partial.cells.len(), 6);
    let cells = b.path().join(CELLS_DIR);
    let victim = cells.join("T2000_L1_s0.json");
    fs::write(&victim, &fs::read(&victim).unwrap()[..40]).unwrap();

    let resumed = run_sweep(&config(b.path(), 3), SweepOptions { resume: true }).unwrap();
    assert_eq!(resumed.reused, 5);
    assert_eq!(untimed(&resumed.records), untimed(&full.records));
    assert_eq!(
        fs::read(a.path().join(CSV_FILE)).unwrap(),
        fs::read(b.path().join(CSV_FILE)).unwrap()
    );
}

#[test]
fn thread_count_does_not_change_results() {
    let run = |threads: usize| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), 2);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let out = pool.install(|| run_sweep(&cfg, SweepOptions::default())).unwrap();
        (untimed(&out.records), fs::read(out.csv_path).unwrap(), fs::read(out.loglog_path).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn report_rebuilds_from_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 2);
    let out = run_sweep(&cfg, SweepOptions::default()).unwrap();
    let csv = fs::read(&out.csv_path).unwrap();
    fs::remove_file(&out.csv_path).unwrap();
    let records = harness::report_from_disk(&cfg).unwrap();
    assert_eq!(untimed(&records), untimed(&out.records));
    assert_eq!(fs::read(&out.csv_path).unwrap(), csv);

    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 2);
    for line in text.lines().skip(1) {
        assert_eq!(line.split(',').count(), 6);
        assert_ne!(line.split(',').nth(5), Some("NA"), "quotient populated: {line}");
    }
    let dat = fs::read_to_string(&out.loglog_path).unwrap();
    assert_eq!(dat.matches("# method=").count(), 2);
    let lpa: Vec<(f64, f64)> = dat
        .split("\n\n\n")
        .next()
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let v: Vec<f64> = l.split(' ').map(|x| x.parse().unwrap()).collect();
            (v[0], v[1])
        })
        .collect();
    assert_eq!(lpa.len(), 3);
    let record_means: Vec<f64> = out.records.iter().filter(|r| r.method.as_str() == "LPA").map(|r| r.mean.unwrap()).collect();
    assert_eq!(lpa.iter().map(|p| p.1).collect::<Vec<_>>(), record_means);
    assert!(stats::fit_power_law(&lpa).is_some());
}

#[test]
fn empty_output_directory_reports_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let records = harness::report_from_disk(&config(dir.path(), 2)).unwrap();
    assert!(records.is_empty());
    assert_eq!(
        fs::read_to_string(dir.path().join(CSV_FILE)).unwrap(),
        "T,L,method,mean_r,std_r,quotient\n"
    );
}

#[test]
fn failing_cells_are_recorded_and_sweep_continues() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), 1);
    // far too few samples for an order-cap of 2(L+1) = 24 with 8 channels
    cfg.t = Some(vec![150, 3000]);
    cfg.t_grid = None;
    cfg.l = vec![11];
    cfg.methods = vec![ubssd::pipelines::Method::Lpa];
    let out = run_sweep(&cfg, SweepOptions::default()).unwrap();
    assert!(out.failures >= 1);
    let small = out.cells.iter().find(|c| c.key.t == 150).unwrap();
    let lpa_err = small.outcomes.iter().find(|o| o.method.as_str() == "LPA").unwrap().error.clone().unwrap();
    assert!(lpa_err.contains("ar_fit"), "{lpa_err}");
    let big = out.cells.iter().find(|c| c.key.t == 3000).unwrap();
    assert!(big.outcomes.iter().any(|o| o.amari.is_some()));
    let csv = fs::read_to_string(&out.csv_path).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("150,11,LPA,NA,NA")), "{csv}");
}
