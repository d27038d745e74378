//! Acceptance: CLI determinism. Every command, re-run with identical
//! inputs, must produce byte-identical data files and (for path-free
//! output) byte-identical console text. The whole command pipeline runs
//! twice in two fresh directories and every artifact is compared.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

struct Step {
    label: &'static str,
    args: Vec<String>,
    /// Worker cap for this invocation (None = unset).
    threads: Option<&'static str>,
    /// Data files (relative to the work dir) the command must produce.
    outputs: Vec<&'static str>,
    /// Compare stdout+stderr bytes too (only for path-free output).
    check_console: bool,
    want_exit: i32,
}

fn s(args: &[&str]) -> Vec<String> {
    args.iter().map(|a| a.to_string()).collect()
}

/// The full pipeline; later steps consume files from earlier ones.
fn steps(dir: &Path) -> Vec<Step> {
    let p = |name: &str| dir.join(name).display().to_string();
    vec![
        Step {
            label: "gen uniform",
            args: s(&["gen", "--kind", "uniform", "--n", "40", "--seed", "5", "--out", &p("u.json")]),
            threads: None,
            outputs: vec!["u.json"],
            check_console: true,
            want_exit: 0,
        },
        Step {
            label: "gen bucketed",
            args: s(&["gen", "--kind", "bucketed", "--l1", "1/16", "--l2", "1/4", "--n", "50", "--seed", "7", "--out", &p("b.json")]),
            threads: None,
            outputs: vec!["b.json"],
            check_console: true,
            want_exit: 0,
        },
        Step {
            label: "gen very-tight",
            args: s(&["gen", "--kind", "very-tight", "--m", "3", "--n", "12", "--horizon", "40", "--seed", "3", "--out", &p("vt.json")]),
            threads: None,
            outputs: vec!["vt.json"],
            check_console: true,
            want_exit: 0,
        },
        Step {
            label: "gen loose",
            args: s(&["gen", "--kind", "loose", "--rho0", "1/2", "--n", "30", "--seed", "9", "--out", &p("lo.json")]),
            threads: None,
            outputs: vec!["lo.json"],
            check_console: true,
            want_exit: 0,
        },
        Step {
            label: "gen laminar",
            args: s(&["gen", "--kind", "laminar", "--n", "25", "--seed", "2", "--out", &p("la.json")]),
            threads: None,
            outputs: vec!["la.json"],
            check_console: true,
            want_exit: 0,
        },
        Step {
            label: "gen agreeable",
            args: s(&["gen", "--kind", "agreeable", "--n", "30", "--seed", "11", "--out", &p("ag.json")]),
            threads: None,
            outputs: vec!["ag.json"],
            check_console: true,
            want_exit: 0,
        },
        Step {
            label: "gen adversarial-doubling",
            args: s(&["gen", "--kind", "adversarial-doubling", "--n", "31", "--seed", "0", "--out", &p("ad.json")]),
            threads: None,
            outputs: vec!["ad.json"],
            check_console: true,
            want_exit: 0,
        },
        Step {
            label: "gen starvation pool",
            args: s(&["gen", "--kind", "bucketed", "--l1", "1/4", "--l2", "1/3", "--n", "60", "--horizon", "48", "--max-size", "12", "--seed", "3007", "--out", &p("s.json")]),
            threads: None,
            outputs: vec!["s.json"],
            check_console: true,
            want_exit: 0,
        },
        Step {
            label: "oracle",
            args: s(&["oracle", &p("b.json")]),
            threads: None,
            outputs: vec![],
            check_console: true,
            want_exit: 0,
        },
        Step {
            label: "oracle with witness",
            args: s(&["oracle", &p("b.json"), "--witness"]),
            threads: None,
            outputs: vec![],
            check_console: true,
            want_exit: 0,
        },
        Step {
            label: "oracle at half speed (infeasible)",
            args: s(&["oracle", &p("b.json"), "--speed", "1/2"]),
            threads: None,
            outputs: vec![],
            check_console: true,
            want_exit: 1,
        },
        Step {
            label: "run edf wide",
            args: s(&["run", &p("b.json"), "--alg", "edf", "--machines", "44", "--out", &p("r_edf.json")]),
            threads: None,
            outputs: vec!["r_edf.json"],
            check_console: true,
            want_exit: 0,
        },
        Step {
            label: "run sjf wide",
            args: s(&["run", &p("b.json"), "--alg", "sjf", "--machines", "44", "--out", &p("r_sjf.json")]),
            threads: None,
            outputs: vec!["r_sjf.json"],
            check_console: true,
            want_exit: 0,
        },
        Step {
            label: "run cms with trace",
            args: s(&["run", &p("vt.json"), "--alg", "cms", "--machines", "12", "--trace", "--out", &p("r_cms.json")]),
            threads: None,
            outputs: vec!["r_cms.json"],
            check_console: true,
            want_exit: 0,
        },
        Step {
            label: "run hybrid",
            args: s(&["run", &p("b.json"), "--alg", "hybrid", "--mstar", "11", "--out", &p("r_hy.json")]),
            threads: None,
            outputs: vec!["r_hy.json"],
            check_console: true,
            want_exit: 0,
        },
        Step {
            label: "run hybrid-adaptive",
            args: s(&["run", &p("ag.json"), "--alg", "hybrid-adaptive", "--out", &p("r_ha.json")]),
            threads: None,
            outputs: vec!["r_ha.json"],
            check_console: true,
            want_exit: 0,
        },
        Step {
            label: "run edf at m* (fails)",
            args: s(&["run", &p("b.json"), "--alg", "edf", "--machines", "11", "--out", &p("r_edf11.json")]),
            threads: None,
            outputs: vec!["r_edf11.json"],
            check_console: true,
            want_exit: 1,
        },
        Step {
            label: "run sjf to first miss",
            args: s(&["run", &p("s.json"), "--alg", "sjf", "--machines", "3", "--run-to-miss", "--out", &p("r_starve.json")]),
            threads: None,
            outputs: vec!["r_starve.json"],
            check_console: true,
            want_exit: 1,
        },
        Step {
            label: "certify from run",
            args: s(&["certify", "--from-run", &p("r_starve.json"), &p("s.json"), "--weak", "--out", &p("cert.json")]),
            threads: None,
            outputs: vec!["cert.json"],
            check_console: true,
            want_exit: 0,
        },
        Step {
            label: "certify from file",
            args: s(&["certify", &p("cert.json"), &p("s.json"), "--weak"]),
            threads: None,
            outputs: vec![],
            check_console: true,
            want_exit: 0,
        },
        Step {
            label: "compare",
            args: s(&["compare", &p("ag.json"), &p("b.json"), "--alg", "edf@44", "--alg", "sjf@44", "--alg", "hybrid@11", "--alg", "hybrid-adaptive", "--csv", &p("cmp.csv")]),
            threads: None,
            // console prints the output path, so only the file is compared
            outputs: vec!["cmp.csv"],
            check_console: false,
            want_exit: 0,
        },
        Step {
            label: "compare capped to 3 workers",
            args: s(&["compare", &p("ag.json"), &p("b.json"), "--alg", "edf@44", "--alg", "sjf@44", "--alg", "hybrid@11", "--alg", "hybrid-adaptive", "--csv", &p("cmp_t.csv")]),
            threads: Some("3"),
            outputs: vec!["cmp_t.csv"],
            check_console: false,
            want_exit: 0,
        },
        Step {
            label: "gen rejects reversed slack range",
            args: s(&["gen", "--kind", "bucketed", "--l1", "1/4", "--l2", "1/16", "--n", "10", "--seed", "1"]),
            threads: None,
            outputs: vec![],
            check_console: true,
            want_exit: 2,
        },
        Step {
            label: "run rejects zero machines",
            args: s(&["run", &p("b.json"), "--alg", "cms", "--machines", "0"]),
            threads: None,
            outputs: vec![],
            check_console: true,
            want_exit: 2,
        },
    ]
}

struct StepResult {
    exit: i32,
    console: Vec<u8>,
    files: BTreeMap<&'static str, Vec<u8>>,
}

fn run_pipeline(dir: &Path) -> Vec<StepResult> {
    let bin = env!("CARGO_BIN_EXE_machmin");
    steps(dir)
        .into_iter()
        .map(|step| {
            let mut cmd = Command::new(bin);
            cmd.args(&step.args).env_remove("MACHMIN_THREADS");
            if let Some(t) = step.threads {
                cmd.env("MACHMIN_THREADS", t);
            }
            let out = cmd.output().expect("spawn machmin");
            let exit = out.status.code().unwrap_or(-1);
            assert_eq!(
                exit, step.want_exit,
                "{}: exit {} (want {})\nstdout: {}\nstderr: {}",
                step.label,
                exit,
                step.want_exit,
                String::from_utf8_lossy(&out.stdout),
                String::from_utf8_lossy(&out.stderr),
            );
            let mut console = out.stdout;
            console.extend_from_slice(&out.stderr);
            if !step.check_console {
                console.clear();
            }
            let files = step
                .outputs
                .iter()
                .map(|name| {
                    let bytes = std::fs::read(dir.join(name))
                        .unwrap_or_else(|e| panic!("{}: missing output {name}: {e}", step.label));
                    (*name, bytes)
                })
                .collect();
            StepResult {
                exit,
                console,
                files,
            }
        })
        .collect()
}

#[test]
fn cli_reruns_are_byte_identical() {
    let root = tempfile::tempdir().expect("tempdir");
    let mk = |name: &str| -> PathBuf {
        let d = root.path().join(name);
        std::fs::create_dir(&d).expect("subdir");
        d
    };
    let dir_a = mk("a");
    let dir_b = mk("b");

    let first = run_pipeline(&dir_a);
    let second = run_pipeline(&dir_b);
    let labels: Vec<&str> = steps(&dir_a).iter().map(|s| s.label).collect();
    assert_eq!(first.len(), second.len());
    assert!(first.len() >= 20, "need at least 20 commands in the suite");

    let mut files_compared = 0usize;
    for ((a, b), label) in first.iter().zip(&second).zip(&labels) {
        assert_eq!(a.exit, b.exit, "{label}: exit codes differ between runs");
        assert_eq!(
            a.console, b.console,
            "{label}: console bytes differ between runs"
        );
        assert_eq!(
            a.files.keys().collect::<Vec<_>>(),
            b.files.keys().collect::<Vec<_>>()
        );
        for (name, bytes) in &a.files {
            assert_eq!(
                Some(bytes),
                b.files.get(name),
                "{label}: data file {name} differs between runs"
            );
            files_compared += 1;
        }
    }

    // The worker cap must not change results either: same matrix, capped
    // and uncapped, yields the same CSV inside one run.
    let capped = first
        .iter()
        .find_map(|r| r.files.get("cmp_t.csv"))
        .expect("capped compare ran");
    let uncapped = first
        .iter()
        .find_map(|r| r.files.get("cmp.csv"))
        .expect("uncapped compare ran");
    assert_eq!(capped, uncapped, "worker cap changed compare output");

    println!(
        "acceptance 10 (determinism: {} CLI commands re-run byte-identical, {} data files compared): PASS",
        first.len(),
        files_compared
    );
}
