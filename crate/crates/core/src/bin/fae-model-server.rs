//! Serves a model over the newline-delimited JSON stdio protocol.
//!
//! Usage: fae-model-server <builtin-name | model.json> [--delay-ms N]

use std::io::{self, BufReader};
use std::process::ExitCode;
use std::time::Duration;

use fae_core::models::{load_model, serve_stdio, Model};

struct Delayed<'a> {
    inner: &'a dyn Model,
    delay: Duration,
}

impl Model for Delayed<'_> {
    fn schema(&self) -> &fae_core::FeatureSchema {
        self.inner.schema()
    }

    fn descriptor(&self) -> String {
        self.inner.descriptor()
    }

    fn predict_rows(&self, rows: &[fae_core::FeatureVector]) -> fae_core::Result<Vec<f64>> {
        std::thread::sleep(self.delay);
        self.inner.predict_rows(rows)
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (spec, delay_ms) = match args.as_slice() {
        [spec] => (spec, 0),
        [spec, flag, ms] if flag == "--delay-ms" => match ms.parse::<u64>() {
            Ok(ms) => (spec, ms),
            Err(_) => {
                eprintln!("error[invalid-argument]: --delay-ms expects an integer");
                return ExitCode::from(2);
            }
        },
        _ => {
            eprintln!("usage: fae-model-server <builtin-name | model.json> [--delay-ms N]");
            return ExitCode::from(2);
        }
    };
    let model = match load_model(spec) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            return ExitCode::from(4);
        }
    };
    let delayed = Delayed {
        inner: model.as_ref(),
        delay: Duration::from_millis(delay_ms),
    };
    let stdin = BufReader::new(io::stdin().lock());
    match serve_stdio(&delayed, stdin, io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            ExitCode::from(4)
        }
    }
}
