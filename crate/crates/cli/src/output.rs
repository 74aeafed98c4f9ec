//! Output artifacts. Every JSON document carries the tool version, the
//! command configuration and the seed; files are written to the output
//! directory and the JSON document is echoed on stdout.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use twodevp::history::fmt_g17;
use twodevp::BackwardErrorReport;

pub struct Sink {
    dir: PathBuf,
}

impl Sink {
    pub fn new(dir: Option<&Path>) -> Result<Self> {
        let dir = dir
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir })
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    /// Writes `rows` under `header` as CSV.
    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().context("flushing CSV")?;
        self.write(name, &String::from_utf8(bytes)?)
    }

    /// Writes `<name>.json` and prints it.
    pub fn finish(&self, name: &str, doc: &Value) -> Result<()> {
        let text = serde_json::to_string_pretty(doc)? + "\n";
        self.write(&format!("{name}.json"), &text)?;
        print!("{text}");
        Ok(())
    }
}

/// The common JSON envelope.
pub fn envelope(
    command: &str,
    config: &impl Serialize,
    seed: u64,
    backward_error: Value,
    result: Value,
) -> Value {
    json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": seed,
        "config": config,
        "backward_error": backward_error,
        "result": result,
    })
}

/// `eta1` with its certified bracket `[eta1, sqrt(2) eta1]`, plus `eta2` when
/// the structured estimate exists.
pub fn bracket(rep: &BackwardErrorReport) -> Value {
    let mut v = json!({
        "eta1": rep.eta1,
        "bracket": [rep.eta1, rep.eta_upper],
    });
    if let Some(e2) = rep.eta2 {
        v["eta2"] = json!(e2);
    }
    v
}

pub fn g(x: f64) -> String {
    fmt_g17(x)
}

pub fn g_opt(x: Option<f64>) -> String {
    x.map(fmt_g17).unwrap_or_default()
}
