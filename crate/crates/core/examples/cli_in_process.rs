//! Drives the command-line interface in-process and re-runs a report from
//! its embedded configuration.

use oam_cluster::reports::main_with_args;

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let code = main_with_args(
        std::iter::once("oamcluster").chain(args.iter().copied()),
        &mut out,
        &mut std::io::stderr(),
    );
    (code, String::from_utf8(out).expect("utf-8"))
}

fn main() {
    let dir = std::env::temp_dir();
    let first = dir.join("oamcluster_sweep.csv");
    let (code, _) = run(&[
        "vlf-sweep",
        "--regime",
        "unity",
        "--mu-steps",
        "30",
        "--out",
        first.to_str().unwrap(),
    ]);
    println!("vlf-sweep exit {code}, wrote {}", first.display());

    let (code, again) = run(&["vlf-sweep", "--config", first.to_str().unwrap()]);
    let same = std::fs::read_to_string(&first).unwrap() == again;
    println!("re-run from embedded config: exit {code}, identical bytes: {same}");

    let (code, _) = run(&["cluster", "--mu", "0.7"]);
    println!("cluster above threshold: exit {code}");
}
