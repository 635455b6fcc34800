//! Structured report output: JSON lines or CSV, one block per experiment.
//!
//! Every numeric result is rendered as an exact string (`p/q` or `k/3^d`);
//! only counts and flags appear as plain JSON numbers and booleans. Row
//! order is fixed by index, so identical configs produce identical bytes
//! apart from the wall-clock field in the summary line.

use std::io::Write;
use std::time::Instant;

use anyhow::Result;
use serde_json::{json, Map, Value};

use crate::config::OutputFormat;

/// Schema identifier embedded in every meta line and in the CSV preamble.
pub const REPORT_SCHEMA: &str = "laakso-report/1";
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct Row {
    pub index: usize,
    pub fields: Vec<(&'static str, Value)>,
    pub pass: bool,
    pub error: Option<String>,
}

impl Row {
    pub fn ok(index: usize, fields: Vec<(&'static str, Value)>, pass: bool) -> Row {
        Row { index, fields, pass, error: None }
    }

    pub fn failed(index: usize, error: String) -> Row {
        Row { index, fields: Vec::new(), pass: false, error: Some(error) }
    }
}

/// One experiment's worth of output.
pub struct Block {
    pub experiment: String,
    /// Row field names in their fixed CSV column order.
    pub columns: Vec<&'static str>,
    /// Echo of the resolved configuration this block ran under.
    pub config: Value,
    pub rows: Vec<Row>,
    /// Summary extras such as the observed maximum ratio.
    pub details: Value,
    /// Block-level verdict beyond the per-row flags (band checks and the
    /// like); the block passes iff this and every row passes.
    pub block_pass: bool,
}

impl Block {
    pub fn pass(&self) -> bool {
        self.block_pass && self.rows.iter().all(|r| r.pass)
    }

    pub fn passed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.pass).count()
    }
}

pub struct Emitter<'w> {
    out: &'w mut dyn Write,
    format: OutputFormat,
    seed: u64,
    threads: usize,
    started: Instant,
    last: Instant,
}

impl<'w> Emitter<'w> {
    pub fn new(out: &'w mut dyn Write, format: OutputFormat, seed: u64, threads: usize) -> Emitter<'w> {
        let now = Instant::now();
        Emitter { out, format, seed, threads, started: now, last: now }
    }

    /// Per-block wall clock: elapsed since the previous block was emitted.
    fn tick(&mut self) -> u64 {
        let wall = self.last.elapsed().as_millis() as u64;
        self.last = Instant::now();
        wall
    }

    pub fn emit(&mut self, block: &Block) -> Result<()> {
        match self.format {
            OutputFormat::Json => self.emit_json(block),
            OutputFormat::Csv => self.emit_csv(block),
        }
    }

    /// Trailing line for the `all` meta-command.
    pub fn emit_overall(&mut self, experiments: usize, passed: usize) -> Result<()> {
        let wall = self.started.elapsed().as_millis() as u64;
        match self.format {
            OutputFormat::Json => {
                let line = json!({
                    "kind": "overall",
                    "schema": REPORT_SCHEMA,
                    "experiments": experiments,
                    "passed": passed,
                    "pass": passed == experiments,
                    "wall_ms": wall,
                });
                writeln!(self.out, "{line}")?;
            }
            OutputFormat::Csv => {
                writeln!(
                    self.out,
                    "# overall experiments={experiments} passed={passed} pass={} wall_ms={wall}",
                    passed == experiments
                )?;
            }
        }
        Ok(())
    }

    fn emit_json(&mut self, block: &Block) -> Result<()> {
        let meta = json!({
            "kind": "meta",
            "schema": REPORT_SCHEMA,
            "artifact": ARTIFACT_VERSION,
            "experiment": block.experiment,
            "seed": self.seed,
            "threads": self.threads,
            "config": block.config,
        });
        writeln!(self.out, "{meta}")?;
        for row in &block.rows {
            let mut map = Map::new();
            map.insert("kind".into(), Value::from("row"));
            map.insert("experiment".into(), Value::from(block.experiment.as_str()));
            map.insert("index".into(), Value::from(row.index));
            for (name, value) in &row.fields {
                map.insert((*name).into(), value.clone());
            }
            map.insert("pass".into(), Value::from(row.pass));
            if let Some(error) = &row.error {
                map.insert("error".into(), Value::from(error.as_str()));
            }
            writeln!(self.out, "{}", Value::Object(map))?;
        }
        let wall = self.tick();
        let summary = json!({
            "kind": "summary",
            "experiment": block.experiment,
            "rows": block.rows.len(),
            "passed": block.passed_rows(),
            "failed": block.rows.len() - block.passed_rows(),
            "pass": block.pass(),
            "details": block.details,
            "wall_ms": wall,
        });
        writeln!(self.out, "{summary}")?;
        Ok(())
    }

    fn emit_csv(&mut self, block: &Block) -> Result<()> {
        writeln!(
            self.out,
            "# schema={} artifact={} experiment={} seed={} threads={}",
            REPORT_SCHEMA, ARTIFACT_VERSION, block.experiment, self.seed, self.threads
        )?;
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["index"];
        header.extend(&block.columns);
        header.push("pass");
        header.push("error");
        writer.write_record(&header)?;
        for row in &block.rows {
            let mut record = vec![row.index.to_string()];
            for column in &block.columns {
                let cell = row
                    .fields
                    .iter()
                    .find(|(name, _)| name == column)
                    .map(|(_, value)| csv_cell(value))
                    .unwrap_or_default();
                record.push(cell);
            }
            record.push(row.pass.to_string());
            record.push(row.error.clone().unwrap_or_default());
            writer.write_record(&record)?;
        }
        self.out.write_all(&writer.into_inner()?)?;
        let wall = self.tick();
        writeln!(
            self.out,
            "# summary rows={} passed={} pass={} details={} wall_ms={wall}",
            block.rows.len(),
            block.passed_rows(),
            block.pass(),
            block.details,
        )?;
        Ok(())
    }
}

fn csv_cell(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_block() -> Block {
        Block {
            experiment: "demo".into(),
            columns: vec!["value", "note"],
            config: json!({"samples": 2}),
            rows: vec![
                Row::ok(0, vec![("value", Value::from("2/3")), ("note", Value::from("a,b"))], true),
                Row::failed(1, "boom".into()),
            ],
            details: json!({"max": "2/3"}),
            block_pass: true,
        }
    }

    #[test]
    fn json_lines_parse_and_carry_the_schema() {
        let mut buffer = Vec::new();
        let mut emitter = Emitter::new(&mut buffer, OutputFormat::Json, 7, 0);
        emitter.emit(&sample_block()).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0]["kind"], "meta");
        assert_eq!(lines[0]["schema"], REPORT_SCHEMA);
        assert_eq!(lines[1]["value"], "2/3");
        assert_eq!(lines[2]["error"], "boom");
        assert_eq!(lines[3]["pass"], false);
        assert_eq!(lines[3]["passed"], 1);
    }

    #[test]
    fn csv_quotes_fields_with_commas() {
        let mut buffer = Vec::new();
        let mut emitter = Emitter::new(&mut buffer, OutputFormat::Csv, 7, 0);
        emitter.emit(&sample_block()).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert!(text.starts_with("# schema=laakso-report/1"));
        assert!(text.contains("index,value,note,pass,error"));
        assert!(text.contains("\"a,b\""), "comma cells must be quoted: {text}");
    }
}
