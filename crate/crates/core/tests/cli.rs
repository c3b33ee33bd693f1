use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qgcode"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// One shared directory holding a solved transform.
fn workspace() -> &'static (TempDir, PathBuf) {
    static W: OnceLock<(TempDir, PathBuf)> = OnceLock::new();
    W.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let t = dir.path().join("transform.txt");
        let out = run(&["solve-transform", "--out", p(&t)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        (dir, t)
    })
}

fn transform_file() -> &'static Path {
    &workspace().1
}

fn scratch() -> TempDir {
    TempDir::new().unwrap()
}

#[test]
fn solve_transform_writes_endpoints() {
    let text = std::fs::read_to_string(transform_file()).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 1025);
    assert!((rows[0][1] / 0.1 - 1.0).abs() < 1e-6);
    assert!((rows[1024][1] / 1000.0 - 1.0).abs() < 1e-6);
}

#[test]
fn solve_transform_is_reproducible() {
    let d = scratch();
    let again = d.path().join("t.txt");
    let out = run(&["solve-transform", "--out", p(&again)]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("alpha="));
    assert_eq!(std::fs::read(&again).unwrap(), std::fs::read(transform_file()).unwrap());
}

#[test]
fn reversed_range_is_usage_error() {
    let d = scratch();
    let out = run(&[
        "solve-transform",
        "--sigma-min",
        "1",
        "--sigma-max",
        "0.5",
        "--out",
        p(&d.path().join("t")),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(code(&run(&["eval", "--bogus"])), 1);
    assert_eq!(code(&run(&[])), 1);
}

#[test]
fn single_cell_grid_is_usage_error() {
    let d = scratch();
    assert_eq!(
        code(&run(&["design-grid", "--n", "1", "--out", p(&d.path().join("g"))])),
        1
    );
}

fn grid_thresholds(path: &Path) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn direct_and_ode_grids_agree() {
    let d = scratch();
    let direct = d.path().join("direct.txt");
    let ode = d.path().join("ode.txt");
    let a = run(&["design-grid", "--n", "64", "--method", "direct", "--out", p(&direct)]);
    assert_eq!(code(&a), 0);
    assert!(String::from_utf8_lossy(&a.stdout).contains("method=direct"));
    let b = run(&[
        "design-grid",
        "--n",
        "64",
        "--method",
        "ode",
        "--transform",
        p(transform_file()),
        "--out",
        p(&ode),
    ]);
    assert_eq!(code(&b), 0);
    let (x, y) = (grid_thresholds(&direct), grid_thresholds(&ode));
    assert_eq!(x.len(), 65);
    assert_eq!(x.len(), y.len());
    assert!((x[0] / 0.1 - 1.0).abs() < 1e-6 && (y[64] / 1000.0 - 1.0).abs() < 1e-6);
    let worst = x.iter().zip(&y).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
    assert!(worst < 0.02, "worst={worst}");
}

#[test]
fn sixteen_cell_direct_eps() {
    let d = scratch();
    let g = d.path().join("g.txt");
    let out = run(&["design-grid", "--n", "16", "--out", p(&g)]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let eps: f64 = stdout.split("eps=").nth(1).unwrap().trim().parse().unwrap();
    // cell maxima are three times the cell average near the table's 1.76%
    assert!((eps / (3.0 * 0.0176) - 1.0).abs() < 0.15, "eps={eps}");
}

fn build(dir: &Path, n: usize) -> PathBuf {
    let cb = dir.join(format!("cb{n}.rcv"));
    let out = run(&[
        "build-codebook",
        "--n",
        &n.to_string(),
        "--transform",
        p(transform_file()),
        "--out",
        p(&cb),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    cb
}

fn generate(dir: &Path, seed: &str) -> PathBuf {
    let lat = dir.join(format!("lat{seed}.txt"));
    let out = run(&["generate", "--seed", seed, "--count", "20000", "--out", p(&lat)]);
    assert_eq!(code(&out), 0);
    lat
}

#[test]
fn encode_decode_round_trip() {
    let d = scratch();
    let cb = build(d.path(), 32);
    let lat = generate(d.path(), "7");
    let bits = d.path().join("s.rac");
    let dec = d.path().join("dec.txt");
    let t = p(transform_file());
    assert_eq!(
        code(&run(&[
            "encode",
            "--codebook",
            p(&cb),
            "--latents",
            p(&lat),
            "--transform",
            t,
            "--out",
            p(&bits)
        ])),
        0
    );
    let out = run(&[
        "decode",
        "--codebook",
        p(&cb),
        "--bitstream",
        p(&bits),
        "--latents",
        p(&lat),
        "--transform",
        t,
        "--out",
        p(&dec),
    ]);
    assert_eq!(code(&out), 0);
    let original: Vec<String> = std::fs::read_to_string(&lat)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().nth(1).unwrap().to_string())
        .collect();
    let decoded: Vec<String> = std::fs::read_to_string(&dec)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    assert_eq!(original, decoded);
}

#[test]
fn wrong_codebook_exits_three() {
    let d = scratch();
    let cb = build(d.path(), 16);
    let other = build(d.path(), 32);
    let lat = generate(d.path(), "3");
    let bits = d.path().join("s.rac");
    let t = p(transform_file());
    assert_eq!(
        code(&run(&[
            "encode",
            "--codebook",
            p(&cb),
            "--latents",
            p(&lat),
            "--transform",
            t,
            "--out",
            p(&bits)
        ])),
        0
    );
    let out = run(&[
        "decode",
        "--codebook",
        p(&other),
        "--bitstream",
        p(&bits),
        "--latents",
        p(&lat),
        "--transform",
        t,
        "--out",
        p(&d.path().join("x")),
    ]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));
}

#[test]
fn missing_and_corrupt_inputs_exit_three() {
    let d = scratch();
    let junk = d.path().join("junk.rcv");
    std::fs::write(&junk, b"not a codebook").unwrap();
    let lat = generate(d.path(), "1");
    let t = p(transform_file());
    let out = |cb: &Path| {
        run(&[
            "encode",
            "--codebook",
            p(cb),
            "--latents",
            p(&lat),
            "--transform",
            t,
            "--out",
            p(&d.path().join("o")),
        ])
    };
    assert_eq!(code(&out(&junk)), 3);
    assert_eq!(code(&out(&d.path().join("absent.rcv"))), 3);
}

#[test]
fn artifacts_are_byte_identical_across_runs() {
    let (a, b) = (scratch(), scratch());
    assert_eq!(
        std::fs::read(build(a.path(), 64)).unwrap(),
        std::fs::read(build(b.path(), 64)).unwrap()
    );
    assert_eq!(
        std::fs::read(generate(a.path(), "9")).unwrap(),
        std::fs::read(generate(b.path(), "9")).unwrap()
    );
}

#[test]
fn eval_writes_table_shaped_csv() {
    let d = scratch();
    let csv = d.path().join("r.csv");
    let args = [
        "eval",
        "--n",
        "16,32",
        "--count",
        "20000",
        "--transform",
        p(transform_file()),
        "--out",
        p(&csv),
    ];
    assert_eq!(code(&run(&args)), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        data[0],
        "n,target_bits,ideal_bits,actual_bits,rel_redundancy_pct,cv_memory_bytes,seed,config_hash"
    );
    assert_eq!(data.len(), 3);
    assert!(data[1].starts_with("16,") && data[2].starts_with("32,"));
    assert!(text.contains("# seed=1"));
    let copy = d.path().join("r2.csv");
    let mut again = args;
    again[8] = p(&copy);
    assert_eq!(code(&run(&again)), 0);
    assert_eq!(std::fs::read(&copy).unwrap(), text.into_bytes());
}

#[test]
fn eval_rejects_tiny_n_and_bad_law() {
    let d = scratch();
    let out = p(&d.path().join("r.csv")).to_string();
    assert_eq!(code(&run(&["eval", "--n", "1", "--out", &out])), 1);
    let t = p(transform_file());
    assert_eq!(
        code(&run(&[
            "eval",
            "--n",
            "16",
            "--sigma-lo",
            "0.01",
            "--count",
            "10",
            "--transform",
            t,
            "--out",
            &out
        ])),
        1
    );
}

#[test]
fn profile_emits_both_layouts() {
    let d = scratch();
    let csv = d.path().join("p.csv");
    let out = run(&[
        "profile",
        "--n",
        "32",
        "--points",
        "17",
        "--transform",
        p(transform_file()),
        "--out",
        p(&csv),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 18);
    assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 6);
}
