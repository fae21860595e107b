use std::path::Path;
use std::process::{Command, Output};

fn klbandit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_klbandit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn sweep_to(path: &Path, threads: &str) -> Vec<u8> {
    let out = klbandit(&[
        "--threads",
        threads,
        "sweep",
        "--eta",
        "0.5,8",
        "--arms",
        "3,5",
        "--horizon",
        "200,400",
        "--agent",
        "kl_ucb,reference_only,greedy_softmax,classic_ucb_argmax",
        "--seeds",
        "6",
        "--seed",
        "11",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::read(path).unwrap()
}

#[test]
fn run_writes_per_step_csv() {
    let out = klbandit(&["run", "--arms", "3", "--horizon", "50", "--seed", "4"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,action,reward,cum_regret"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 50);
    assert!(rows[49].starts_with("50,"));
}

#[test]
fn run_is_reproducible_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("curve.svg");
    let a = klbandit(&[
        "run",
        "--horizon",
        "100",
        "--seed",
        "9",
        "--plot",
        svg.to_str().unwrap(),
    ]);
    let b = klbandit(&["run", "--horizon", "100", "--seed", "9"]);
    assert_eq!(a.stdout, b.stdout);
    assert!(std::fs::read_to_string(svg).unwrap().starts_with("<svg"));
}

#[test]
fn run_with_seeds_writes_per_seed_rows() {
    let out = klbandit(&[
        "run",
        "--horizon",
        "100",
        "--seeds",
        "5",
        "--agent",
        "greedy_softmax",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("seed,final_regret,optimism_violated"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn fast_family_refuses_other_noise() {
    let out = klbandit(&[
        "run",
        "--family",
        "fast",
        "--noise",
        "bernoulli",
        "--arms",
        "2",
        "--horizon",
        "64",
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unit_gaussian"));
    let out = klbandit(&["sweep", "--family", "fast", "--noise", "noiseless"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&klbandit(&["run", "--agent", "thompson"])), 2);
    assert_eq!(code(&klbandit(&["run", "--eta", "-1"])), 2);
    assert_eq!(code(&klbandit(&["run", "--delta", "1.5"])), 2);
    assert_eq!(code(&klbandit(&["sweep", "--seeds", "0"])), 2);
    assert_eq!(code(&klbandit(&["frobnicate"])), 2);
}

#[test]
fn sweep_csv_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = sweep_to(&dir.path().join("a.csv"), "4");
    let second = sweep_to(&dir.path().join("b.csv"), "4");
    let single = sweep_to(&dir.path().join("c.csv"), "1");
    assert_eq!(first, second);
    assert_eq!(first, single);
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with(
        "eta,arms,horizon,agent,regime_threshold,mean_regret,stderr,optimism_failure_rate,error"
    ));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2 * 4);
}

#[test]
fn sweep_from_config_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    std::fs::write(
        &config,
        "master_seed = 3\nseeds_per_cell = 4\nagents = [\"kl_ucb\"]\ninstance_source = \"slow_family\"\n\
         output_path = \"out.csv\"\n\n[grid]\neta = [1.0]\narms = [4]\nhorizon = [128, 256, 512]\n",
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    let out = klbandit(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 4);

    let fit = klbandit(&["fit", csv.to_str().unwrap()]);
    assert_eq!(code(&fit), 0, "{}", String::from_utf8_lossy(&fit.stderr));
    let text = String::from_utf8(fit.stdout).unwrap();
    assert!(
        text.contains("c_logsq") && text.contains("kl_ucb"),
        "{text}"
    );
    assert!(
        text.contains("logsq\n") || text.contains("sqrt\n"),
        "{text}"
    );
}

#[test]
fn fit_with_too_few_horizons_fails() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("two.csv");
    let out = klbandit(&[
        "sweep",
        "--horizon",
        "100,200",
        "--seeds",
        "2",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let fit = klbandit(&["fit", csv.to_str().unwrap()]);
    assert_eq!(code(&fit), 1);
    assert!(String::from_utf8_lossy(&fit.stdout).contains("at least 3"));
}

#[test]
fn instances_roundtrip_through_run() {
    let dir = tempfile::tempdir().unwrap();
    let family = dir.path().join("slow.toml");
    let out = klbandit(&[
        "instances",
        "--family",
        "slow",
        "--arms",
        "9",
        "--horizon",
        "300",
        "--out",
        family.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&family).unwrap();
    assert_eq!(text.matches("[[instance]]").count(), 9);

    let run = klbandit(&[
        "run",
        "--family",
        "file",
        "--instance",
        family.to_str().unwrap(),
        "--index",
        "8",
    ]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8(run.stdout).unwrap().lines().count(), 301);

    let bad = klbandit(&[
        "run",
        "--family",
        "file",
        "--instance",
        family.to_str().unwrap(),
        "--index",
        "9",
    ]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn fast_instances_have_twice_the_arms() {
    let out = klbandit(&[
        "instances",
        "--family",
        "fast",
        "--arms",
        "3",
        "--horizon",
        "64",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("num_arms = 6"), "{text}");
    assert!(text.starts_with("# fast family"));
}

#[test]
fn verify_passes() {
    let out = klbandit(&["verify", "--seed", "3"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 8);
    assert!(!text.contains("FAIL"));
}
