//! End-to-end tests of the `efvlab` binary: exit codes, emitted files,
//! reproducibility, and the plot-data contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_efvlab")
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

/// Coarse, fast scenario shared by the CLI tests.
const FAST_SCENARIO: &str = "\
[scenario]
dt = 0.05
alpha_step_limit = 0.05
gamma_step_limit = 0.05
aim_iterations = 6
max_steps = 2000
";

#[test]
fn simulate_zero_policy_reports_capture() {
    let dir = tmp_dir("cli_sim_zero");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, FAST_SCENARIO).unwrap();
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2, "zero policy must be captured");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("capture=true"));
    assert!(dir.join("out/trajectory.csv").is_file());
    assert!(dir.join("out/outcome.txt").is_file());
    assert!(dir.join("out/config_echo.txt").is_file());

    let traj = std::fs::read_to_string(dir.join("out/trajectory.csv")).unwrap();
    assert!(traj.starts_with(
        "step,t_s,ex,ey,ez,evx,evy,evz,px,py,pz,pvx,pvy,pvz,alpha_deg,gamma_deg,pfv_aoa_deg,pfv_sideslip_deg,dist_m"
    ));
}

/// Hand-built checkpoint that slews the angle of attack up at the
/// per-step limit: the output weight on the previous-alpha observation
/// is large and positive, so the commanded delta saturates and the
/// evader pulls away.
fn evading_checkpoint(path: &Path) {
    use efvlab::net::{Architecture, MlpParams, PolicyParameters};
    let arch = Architecture::actor(&[]).unwrap(); // [8, 2]
    let mut weights = vec![0.0; 16];
    weights[6] = 40.0; // output 0 (d alpha) from input 6 (alpha / 16)
    let actor = PolicyParameters {
        mlp: MlpParams::from_weights(arch, weights).unwrap(),
        log_std: [0.0, 0.0],
    };
    actor.save(path).unwrap();
}

#[test]
fn simulate_evading_checkpoint_exits_zero() {
    let dir = tmp_dir("cli_sim_ckpt");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, FAST_SCENARIO).unwrap();
    let ckpt = dir.join("actor.ckpt");
    evading_checkpoint(&ckpt);
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(exit_code(&out), 0, "expected evasion: {stdout}");
    assert!(stdout.contains("capture=false"));
}

#[test]
fn simulate_same_seed_is_byte_identical() {
    let dir = tmp_dir("cli_sim_repro");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        format!("{FAST_SCENARIO}init_jitter_pos = 8.0\ninit_jitter_vel_deg = 0.1\n"),
    )
    .unwrap();
    for sub in ["a", "b"] {
        let out = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "31",
            "--out",
            dir.join(sub).to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 2);
    }
    let a = std::fs::read(dir.join("a/trajectory.csv")).unwrap();
    let b = std::fs::read(dir.join("b/trajectory.csv")).unwrap();
    assert_eq!(a, b);

    // A different seed jitters the start and changes the trajectory.
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "32",
        "--out",
        dir.join("c").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    let c = std::fs::read(dir.join("c/trajectory.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn config_echo_round_trips_through_parse() {
    let dir = tmp_dir("cli_echo");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, FAST_SCENARIO).unwrap();
    let out_dir = dir.join("out");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);

    // Re-running from the echoed config reproduces the artifacts.
    let echo = out_dir.join("config_echo.txt");
    let out2 = run(&[
        "simulate",
        "--config",
        echo.to_str().unwrap(),
        "--out",
        dir.join("out2").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out2), 2);
    let a = std::fs::read(out_dir.join("trajectory.csv")).unwrap();
    let b = std::fs::read(dir.join("out2/trajectory.csv")).unwrap();
    assert_eq!(a, b);
    // The echo is stable apart from the overridden output directory.
    let strip = |p: PathBuf| {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("output_dir"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(
        strip(out_dir.join("config_echo.txt")),
        strip(dir.join("out2/config_echo.txt"))
    );
}

#[test]
fn bad_config_exits_one_with_key_path() {
    let dir = tmp_dir("cli_bad_cfg");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "[scenario]\ndt = -0.01\n").unwrap();
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("scenario.dt"), "stderr: {stderr}");
}

const TINY_TRAIN: &str = "\
[scenario]
dt = 0.05
alpha_step_limit = 0.05
gamma_step_limit = 0.05
aim_iterations = 6
max_steps = 2000
init_jitter_pos = 5.0
init_jitter_vel_deg = 0.05

[ppo]
architecture = 8x8x2
total_steps = 600
rollout_length = 256
minibatch_size = 64
epochs_per_update = 2
virtual_cadence = 20

[es]
g_max = 2
s_max = 3
sigma = 0.05

[run]
checkpoint_every = 2
";

#[test]
fn train_refine_plotdata_pipeline() {
    let dir = tmp_dir("cli_pipeline");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, TINY_TRAIN).unwrap();
    let out_dir = dir.join("out");

    let out = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert_eq!(
        exit_code(&out),
        0,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out_dir.join("history.csv").is_file());
    assert!(out_dir.join("policy_final.ckpt").is_file());
    assert!(out_dir.join("train_summary.txt").is_file());
    // Periodic checkpoints from checkpoint_every = 2.
    assert!(out_dir.join("policy_ep0.ckpt").is_file());
    let history = std::fs::read_to_string(out_dir.join("history.csv")).unwrap();
    assert!(history.starts_with("episode,steps,evasion_distance_m,residual_velocity_mps,return,lr"));
    assert!(history.lines().count() > 1);

    let out = run(&[
        "refine",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
        "--checkpoint",
        out_dir.join("policy_final.ckpt").to_str().unwrap(),
    ]);
    assert_eq!(
        exit_code(&out),
        0,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let record = std::fs::read_to_string(out_dir.join("evolution_record.csv")).unwrap();
    assert!(record.starts_with("attempt,evasion_distance_m,residual_velocity_mps,note"));
    assert!(out_dir.join("policy_refined.ckpt").is_file());

    // One episode with the refined policy for the command time series.
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--checkpoint",
        out_dir.join("policy_refined.ckpt").to_str().unwrap(),
    ]);
    assert!(exit_code(&out) == 0 || exit_code(&out) == 2);

    let out = run(&["plotdata", out_dir.to_str().unwrap()]);
    assert_eq!(
        exit_code(&out),
        0,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    // Training curves: one row per episode.
    let curves = std::fs::read_to_string(out_dir.join("plot_training_curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), history.lines().count());

    // Evolution steps match the record exactly (attempt, velocity).
    let steps = std::fs::read_to_string(out_dir.join("plot_evolution_steps.csv")).unwrap();
    let got: Vec<(&str, &str)> = steps
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap(), f.next().unwrap())
        })
        .collect();
    let want: Vec<(&str, &str)> = record
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            let attempt = f.next().unwrap();
            f.next();
            (attempt, f.next().unwrap())
        })
        .collect();
    assert_eq!(got, want);

    // Command time series exists with matched row count.
    let commands = std::fs::read_to_string(out_dir.join("plot_commands.csv")).unwrap();
    let traj = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    assert_eq!(commands.lines().count(), traj.lines().count());
    assert!(commands.starts_with("t_s,alpha_deg,gamma_deg"));
}

#[test]
fn plotdata_missing_directory_exits_one() {
    let out = run(&["plotdata", "/nonexistent/efvlab_run"]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn sweep_tiny_grid() {
    let dir = tmp_dir("cli_sweep");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        format!("{TINY_TRAIN}\n[sweep]\narchitectures = 8x8x2 8x12x2\nks = 2\nbase_lrs = 0.001\n"),
    )
    .unwrap();
    let out_dir = dir.join("out");
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "5",
        "--out",
        out_dir.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert_eq!(
        exit_code(&out),
        0,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert!(csv.starts_with(
        "index,architecture,activation,k,l_B,steps,evasion_distance_m,residual_velocity_mps,best"
    ));
    assert_eq!(csv.lines().count(), 3);
    assert!(out_dir.join("cell_01/history.csv").is_file());
    assert!(out_dir.join("cell_02/policy_final.ckpt").is_file());
}
