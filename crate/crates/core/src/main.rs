use std::io::Write;

use clap::Parser;

use photondist::cli::{run, RunConfig, WORKER_ENV};

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    if let Ok(spec) = std::env::var(WORKER_ENV) {
        match spec.trim().parse::<usize>() {
            Ok(n) if n >= 1 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                {
                    eprintln!("error: invalid input: cannot use {} worker threads: {}", n, e);
                    return 2;
                }
            }
            _ => {
                eprintln!(
                    "error: invalid input: {} must be a positive integer, got {:?}",
                    WORKER_ENV, spec
                );
                return 2;
            }
        }
    }

    let config = RunConfig::parse();
    let mut out = String::new();
    let result = run(&config, &mut out);

    if !out.is_empty() {
        let written = match &config.output {
            Some(path) => std::fs::write(path, out.as_bytes()).map_err(|e| {
                format!("cannot write {}: {}", path.display(), e)
            }),
            None => {
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                lock.write_all(out.as_bytes())
                    .and_then(|_| lock.flush())
                    .map_err(|e| format!("cannot write standard output: {}", e))
            }
        };
        if let Err(message) = written {
            eprintln!("error: io: {}", message);
            return 2;
        }
    }

    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            e.exit_code()
        }
    }
}
