//! `levelset-lab` command line: run and validate experiment configs, and
//! summarize previously written CSV files.
//!
//! Exit codes: 0 success, 2 config error, 3 model/factorization error,
//! 4 i/o error.

use levelset_lab::error::Error;
use levelset_lab::experiments::{self, parse_config};

const USAGE: &str = "\
usage: levelset-lab <command>

commands:
  run <config-path>        execute the configured experiment; writes the
                           CSV rows and JSON summary named in the config
  validate <config-path>   parse and validate a config without running it
  summarize <csv-path>     group an experiment CSV and print the JSON summary
  version                  print the crate version
";

fn main() {
    std::process::exit(real_main());
}

fn fail(err: &Error) -> i32 {
    eprintln!("levelset-lab: {err}");
    err.exit_code()
}

fn read_file(path: &str) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(Error::from)
}

fn real_main() -> i32 {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.first().map(String::as_str) {
        Some("run") if args.len() == 2 => {
            let text = match read_file(&args[1]) {
                Ok(t) => t,
                Err(e) => return fail(&e),
            };
            let config = match parse_config(&text) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            match experiments::run(&config) {
                Ok(manifest) => {
                    for w in &manifest.warnings {
                        eprintln!("warning: {w}");
                    }
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&manifest).expect("serializable manifest")
                    );
                    0
                }
                Err(e) => fail(&e),
            }
        }
        Some("validate") if args.len() == 2 => {
            let text = match read_file(&args[1]) {
                Ok(t) => t,
                Err(e) => return fail(&e),
            };
            match parse_config(&text) {
                Ok(config) => {
                    println!(
                        "ok: {} experiment on the {} model",
                        config.experiment.as_str(),
                        config.model.as_str()
                    );
                    0
                }
                Err(e) => fail(&e),
            }
        }
        Some("summarize") if args.len() == 2 => {
            let text = match read_file(&args[1]) {
                Ok(t) => t,
                Err(e) => return fail(&e),
            };
            let rows = match experiments::parse_csv_rows(&text) {
                Ok(r) => r,
                Err(e) => return fail(&e),
            };
            let groups = match experiments::summarize(&rows) {
                Ok(g) => g,
                Err(e) => return fail(&e),
            };
            let trend_records = experiments::trends(&groups);
            #[derive(serde::Serialize)]
            struct Doc {
                groups: Vec<experiments::GroupSummary>,
                trends: Vec<experiments::TrendSummary>,
            }
            let doc = Doc {
                groups,
                trends: trend_records,
            };
            println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
            0
        }
        Some("version") if args.len() == 1 => {
            println!("levelset-lab {}", env!("CARGO_PKG_VERSION"));
            0
        }
        _ => {
            eprint!("{USAGE}");
            2
        }
    }
}
