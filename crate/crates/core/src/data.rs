//! Observed data and CSV ingestion.
//!
//! Node file columns: `id,y,t[,x][,stratum][,weight]` with a header row. Ids
//! must cover `0..N` exactly once, in any order. Edge file: two integer
//! columns `src,dst`, header optional.

use std::io::{Read, Write};
use std::path::Path;

use crate::assignment::TreatmentVector;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Discrete pre-treatment covariate. Levels are indexed by the sorted order
/// of their labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Covariate {
    levels: Vec<u32>,
    labels: Vec<String>,
}

impl Covariate {
    pub fn from_labels<S: AsRef<str>>(values: &[S]) -> Self {
        let mut labels: Vec<String> = values.iter().map(|s| s.as_ref().to_string()).collect();
        labels.sort();
        labels.dedup();
        let levels = values
            .iter()
            .map(|s| labels.binary_search_by(|l| l.as_str().cmp(s.as_ref())).unwrap() as u32)
            .collect();
        Covariate { levels, labels }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn n_levels(&self) -> usize {
        self.labels.len()
    }

    pub fn level(&self, unit: usize) -> u32 {
        self.levels[unit]
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn label(&self, level: u32) -> &str {
        &self.labels[level as usize]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn level_of(&self, label: &str) -> Option<u32> {
        self.labels.iter().position(|l| l == label).map(|p| p as u32)
    }
}

/// Per-unit observed outcome, treatment and optional covariate, design
/// stratum and weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    t: TreatmentVector,
    covariate: Option<Covariate>,
    strata: Option<Vec<String>>,
    weights: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, t: TreatmentVector, covariate: Option<Covariate>) -> Result<Self> {
        if y.len() != t.len() {
            return Err(Error::LengthMismatch {
                what: "outcomes",
                got: y.len(),
                expected: t.len(),
            });
        }
        if let Some(c) = &covariate {
            if c.len() != t.len() {
                return Err(Error::LengthMismatch {
                    what: "covariate",
                    got: c.len(),
                    expected: t.len(),
                });
            }
        }
        Ok(Dataset {
            y,
            t,
            covariate,
            strata: None,
            weights: None,
        })
    }

    pub fn with_strata(mut self, strata: Vec<String>) -> Result<Self> {
        if strata.len() != self.n_units() {
            return Err(Error::LengthMismatch {
                what: "strata",
                got: strata.len(),
                expected: self.n_units(),
            });
        }
        self.strata = Some(strata);
        Ok(self)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n_units() {
            return Err(Error::LengthMismatch {
                what: "weights",
                got: weights.len(),
                expected: self.n_units(),
            });
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn n_units(&self) -> usize {
        self.y.len()
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.y
    }

    pub fn treatment(&self) -> &TreatmentVector {
        &self.t
    }

    pub fn covariate(&self) -> Option<&Covariate> {
        self.covariate.as_ref()
    }

    pub fn strata(&self) -> Option<&[String]> {
        self.strata.as_deref()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Covariate levels with their count, or `None` without a covariate.
    pub fn covariate_levels(&self) -> Option<(&[u32], usize)> {
        self.covariate.as_ref().map(|c| (c.levels(), c.n_levels()))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        read_nodes(reader)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id", "y", "t"];
        if self.covariate.is_some() {
            header.push("x");
        }
        if self.strata.is_some() {
            header.push("stratum");
        }
        if self.weights.is_some() {
            header.push("weight");
        }
        w.write_record(&header)?;
        for i in 0..self.n_units() {
            let mut row = vec![i.to_string(), format_f64(self.y[i]), self.t[i].to_string()];
            if let Some(c) = &self.covariate {
                row.push(c.label(c.level(i)).to_string());
            }
            if let Some(s) = &self.strata {
                row.push(s[i].clone());
            }
            if let Some(wt) = &self.weights {
                row.push(format_f64(wt[i]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest decimal that parses back to the same `f64`.
fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_field<T: std::str::FromStr>(field: &str, line: usize, column: &str) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse `{field}` in column `{column}`"),
    })
}

fn record_line(record: &csv::StringRecord, fallback: usize) -> usize {
    record.position().map_or(fallback, |p| p.line() as usize)
}

fn read_nodes<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let id_col = col("id").ok_or_else(|| Error::MissingColumn("id".into()))?;
    let y_col = col("y").ok_or_else(|| Error::MissingColumn("y".into()))?;
    let t_col = col("t").ok_or_else(|| Error::MissingColumn("t".into()))?;
    let (x_col, s_col, w_col) = (col("x"), col("stratum"), col("weight"));

    struct Row {
        line: usize,
        id: usize,
        y: f64,
        t: u8,
        x: Option<String>,
        s: Option<String>,
        w: Option<f64>,
    }
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = record_line(&rec, k + 2);
        let get = |c: usize, name: &str| {
            rec.get(c).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing value for column `{name}`"),
            })
        };
        let t_raw = get(t_col, "t")?;
        let t = match t_raw {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::NonBinaryTreatment {
                    line,
                    value: other.to_string(),
                })
            }
        };
        rows.push(Row {
            line,
            id: parse_field(get(id_col, "id")?, line, "id")?,
            y: parse_field(get(y_col, "y")?, line, "y")?,
            t,
            x: x_col.map(|c| get(c, "x").map(str::to_string)).transpose()?,
            s: s_col.map(|c| get(c, "stratum").map(str::to_string)).transpose()?,
            w: w_col.map(|c| parse_field(get(c, "weight")?, line, "weight")).transpose()?,
        });
    }

    let n = rows.len();
    let mut slot: Vec<Option<usize>> = vec![None; n];
    for (r, row) in rows.iter().enumerate() {
        if row.id >= n {
            return Err(Error::Parse {
                line: row.line,
                message: format!("id {} out of range: ids must cover 0..{n}", row.id),
            });
        }
        if slot[row.id].is_some() {
            return Err(Error::Parse {
                line: row.line,
                message: format!("duplicate id {}", row.id),
            });
        }
        slot[row.id] = Some(r);
    }
    let order: Vec<&Row> = slot.into_iter().map(|r| &rows[r.unwrap()]).collect();
    let y = order.iter().map(|r| r.y).collect();
    let t = TreatmentVector::new(order.iter().map(|r| r.t).collect())?;
    let covariate = x_col.map(|_| {
        let labels: Vec<String> = order.iter().map(|r| r.x.clone().unwrap()).collect();
        Covariate::from_labels(&labels)
    });
    let mut ds = Dataset::new(y, t, covariate)?;
    if s_col.is_some() {
        ds = ds.with_strata(order.iter().map(|r| r.s.clone().unwrap()).collect())?;
    }
    if w_col.is_some() {
        ds = ds.with_weights(order.iter().map(|r| r.w.unwrap()).collect())?;
    }
    Ok(ds)
}

/// Reads an edge list. With `n_units = None` the node count is the largest
/// index plus one. Arcs are symmetrized; see [`Graph::was_symmetrized`].
pub fn read_edges<R: Read>(reader: R, n_units: Option<usize>) -> Result<Graph> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut arcs = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = record_line(&rec, k + 1);
        if rec.len() < 2 {
            return Err(Error::Parse {
                line,
                message: "expected two columns `src,dst`".into(),
            });
        }
        let (a, b) = (rec[0].parse::<usize>(), rec[1].parse::<usize>());
        match (a, b) {
            (Ok(a), Ok(b)) => arcs.push((a, b)),
            _ if k == 0 => continue,
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("cannot parse edge `{},{}`", &rec[0], &rec[1]),
                })
            }
        }
    }
    let n = n_units.unwrap_or_else(|| arcs.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0));
    Graph::from_directed(n, &arcs)
}

pub fn write_edges<W: Write>(graph: &Graph, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["src", "dst"])?;
    for (a, b) in graph.edges() {
        w.write_record([a.to_string(), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Loads the node file and, if given, the edge file. Without an edge file the
/// graph has no edges.
pub fn load(nodes: &Path, edges: Option<&Path>) -> Result<(Dataset, Graph)> {
    let ds = read_nodes(std::fs::File::open(nodes)?)?;
    let graph = match edges {
        Some(p) => read_edges(std::fs::File::open(p)?, Some(ds.n_units()))?,
        None => Graph::new(ds.n_units(), &[])?,
    };
    Ok((ds, graph))
}
