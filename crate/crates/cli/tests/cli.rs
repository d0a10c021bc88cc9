use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_agentic-control"))
}

fn preset_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../presets/{name}.toml"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn text(o: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    )
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let content = std::fs::read_to_string(path).unwrap();
    let mut lines = content.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn simulate_stable_preset_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = preset_path("fig3_stable");
    for dir in [&a, &b] {
        let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    }
    assert_eq!(column(&a.path().join("summary.csv"), "verdict"), ["Stable"]);
    for f in ["trajectory.csv", "events.csv", "summary.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let header = std::fs::read_to_string(a.path().join("trajectory.csv")).unwrap();
    assert!(header.starts_with("t,x1,x2,norm,theta,sigma,c\n"));
}

#[test]
fn unstable_run_still_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset_path("fig3_unstable");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert_eq!(column(&dir.path().join("summary.csv"), "verdict"), ["Unstable"]);
}

#[test]
fn malformed_config_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let good = std::fs::read_to_string(preset_path("level1_baseline")).unwrap();
    std::fs::write(&path, good.replace("horizon = 30.0", "horizon = \"thirty\"")).unwrap();
    let o = run(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("horizon"), "{}", text(&o));

    let o = run(&["simulate", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_finite_blowup_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("boom.toml");
    std::fs::write(
        &path,
        r#"
name = "boom"
agency_level = "L1"

[integrator]
horizon = 10.0
x0 = [1.0]

[classifier]
blowup_tol = inf

[[configurations]]
[[configurations.modes]]
a = [[1000.0]]
"#,
    )
    .unwrap();
    let o = run(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", text(&o));
}

#[test]
fn budget_columns() {
    for (name, lambda) in [("fig3_stable", 0.217), ("fig3_unstable", -4.662), ("level1_baseline", 0.609)] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = preset_path(name);
        let o = run(&["budget", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", text(&o));
        let budget = dir.path().join("budget.csv");
        let lambdas = column(&budget, "lambda");
        assert!(lambdas.len() > 1);
        assert!(lambdas.iter().all(|l| l == &lambdas[0]));
        let l: f64 = lambdas[0].parse().unwrap();
        assert!((l - lambda).abs() < 1e-3, "{name}: {l}");
        if name == "level1_baseline" {
            assert_eq!(column(&budget, "gamma")[0], lambdas[0]);
        }
    }
}

#[test]
fn certify_reports() {
    let o = run(&["certify", "--config", preset_path("fig3_stable").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(text(&o).contains("theorem2   Certified"), "{}", text(&o));

    // fig1_sweep: no adaptation, no delay, declared gamma and nu
    let o = run(&["certify", "--config", preset_path("fig1_sweep").to_str().unwrap()]);
    assert!(text(&o).contains("tau_a* 1.2947 s"), "{}", text(&o));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("no_beta.toml");
    let cfg = std::fs::read_to_string(preset_path("fig3_stable")).unwrap();
    std::fs::write(&path, cfg.replace("beta = 2.5\n", "")).unwrap();
    let o = run(&["certify", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("beta"), "{}", text(&o));
}

#[test]
fn sweep_default_grid_and_workers() {
    let a = tempfile::tempdir().unwrap();
    let cfg = preset_path("fig1_sweep");
    let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", a.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert_eq!(column(&a.path().join("sweep.csv"), "verdict").len(), 220);
    let boundary: Vec<f64> = column(&a.path().join("boundary.csv"), "tau_a_boundary")
        .iter()
        .filter(|v| !v.is_empty())
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(boundary.windows(2).all(|w| w[0] <= w[1]), "{boundary:?}");

    // small grid, 1 vs 2 workers
    let dir = tempfile::tempdir().unwrap();
    let small = dir.path().join("small.toml");
    let text_cfg = std::fs::read_to_string(&cfg).unwrap();
    let start = text_cfg.find("[sweep]").unwrap();
    let end = start + text_cfg[start..].find("\n\n").unwrap();
    let replaced = format!(
        "{}[sweep]\ntau_a_values = [0.4, 1.2, 2.0]\ntau_bar_values = [0.0, 0.2]{}",
        &text_cfg[..start],
        &text_cfg[end..]
    );
    std::fs::write(&small, replaced).unwrap();
    let outs: Vec<_> = ["1", "2"]
        .iter()
        .map(|w| {
            let d = tempfile::tempdir().unwrap();
            let o = run(&[
                "sweep",
                "--config",
                small.to_str().unwrap(),
                "--out",
                d.path().to_str().unwrap(),
                "--workers",
                w,
            ]);
            assert_eq!(o.status.code(), Some(0), "{}", text(&o));
            d
        })
        .collect();
    for f in ["sweep.csv", "boundary.csv"] {
        let x = std::fs::read(outs[0].path().join(f)).unwrap();
        assert_eq!(x, std::fs::read(outs[1].path().join(f)).unwrap(), "{f}");
    }
    assert_eq!(column(&outs[0].path().join("sweep.csv"), "verdict").len(), 6);
}

#[test]
fn preset_listing() {
    let o = run(&["preset"]);
    assert!(text(&o).contains("fig2_reconfig"));
    let o = run(&["preset", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}
