use crate::{Format, RunConfig, VERSION};
use qmk::CMatrix;
use serde_json::{json, Map, Value};

#[derive(Debug, Clone)]
pub enum Cell {
    F(f64),
    U(usize),
    B(bool),
    S(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            // Debug formatting is the shortest round-trip representation.
            Cell::F(x) => format!("{x:?}"),
            Cell::U(n) => n.to_string(),
            Cell::B(b) => b.to_string(),
            Cell::S(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::S(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(x) => json!(x),
            Cell::U(n) => json!(n),
            Cell::B(b) => json!(b),
            Cell::S(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| Value::Object(self.header.iter().zip(r).map(|(h, c)| (h.to_string(), c.json())).collect::<Map<_, _>>()))
                .collect(),
        )
    }
}

/// What a command produced: a JSON result and a flat table for CSV.
#[derive(Debug)]
pub struct Payload {
    pub result: Value,
    pub table: Table,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl Payload {
    /// A payload whose JSON result is the table itself.
    pub fn from_table(table: Table, converged: bool) -> Self {
        Self { result: json!({ "rows": table.to_json() }), table, converged, warnings: vec![] }
    }
}

pub fn complex_json(m: &CMatrix<f64>) -> Value {
    let part = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> { (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(i, j)).collect()).collect() };
    json!({ "re": part(&|i, j| m[(i, j)].re), "im": part(&|i, j| m[(i, j)].im) })
}

pub fn render(payload: &Payload, config: &RunConfig, format: Format) -> String {
    let hash = config.hash();
    match format {
        Format::Json => {
            let doc = json!({
                "tool": "qmk",
                "version": VERSION,
                "config_hash": hash,
                "command": config.command,
                "converged": payload.converged,
                "warnings": payload.warnings,
                "result": payload.result,
            });
            let mut s = serde_json::to_string_pretty(&doc).expect("json renders");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = format!("# qmk {VERSION} config {hash} command {}\n", config.command);
            s.push_str(&payload.table.header.join(","));
            s.push('\n');
            for row in &payload.table.rows {
                s.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
                s.push('\n');
            }
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> RunConfig {
        RunConfig {
            command: "spectrum".into(),
            inputs: vec![],
            hbar: vec![1.0],
            cutoff: Some(4),
            tol: None,
            max_iter: None,
            format: Format::Csv,
            a: vec![],
            b: vec![],
            dim: Some(1),
        }
    }

    #[test]
    fn csv_cells() {
        assert_eq!(Cell::F(0.1).csv(), "0.1");
        assert_eq!(Cell::F(1e-300).csv(), "1e-300");
        assert_eq!(Cell::F(2.0).csv(), "2.0");
        assert_eq!(Cell::S("a,b".into()).csv(), "\"a,b\"");
        assert_eq!(Cell::Empty.csv(), "");
    }

    #[test]
    fn render_stamps_header() {
        let mut t = Table::new(vec!["x", "y"]);
        t.push(vec![Cell::U(1), Cell::F(0.5)]);
        let p = Payload::from_table(t, true);
        let cfg = config();
        let csv = render(&p, &cfg, Format::Csv);
        assert_eq!(csv, format!("# qmk {VERSION} config {} command spectrum\nx,y\n1,0.5\n", cfg.hash()));
        let doc: Value = serde_json::from_str(&render(&p, &cfg, Format::Json)).unwrap();
        assert_eq!(doc["result"]["rows"][0]["y"], 0.5);
        assert_eq!(doc["config_hash"], cfg.hash());
    }

    #[test]
    fn hash_tracks_config() {
        let a = config();
        let mut b = config();
        assert_eq!(a.hash(), b.hash());
        b.cutoff = Some(5);
        assert_ne!(a.hash(), b.hash());
    }
}
