use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::graph::CausalGraph;

/// Column-oriented sample table. Binary columns hold 0.0/1.0 and are written
/// to CSV as integers. An optional noise record has one column per data
/// column (exogenous noise for linear-gaussian nodes, the uniform latent for
/// binary nodes).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    index: HashMap<String, usize>,
    columns: Vec<Vec<f64>>,
    binary: Vec<bool>,
    noise: Option<Vec<Vec<f64>>>,
    n: usize,
}

impl Dataset {
    pub fn new(n: usize) -> Self {
        Dataset {
            n,
            ..Dataset::default()
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn is_binary(&self, name: &str) -> bool {
        self.index.get(name).is_some_and(|&i| self.binary[i])
    }

    pub fn push_column(&mut self, name: &str, values: Vec<f64>, binary: bool) -> Result<()> {
        if self.index.contains_key(name) {
            return Err(Error::Dataset(format!("duplicate column `{name}`")));
        }
        if self.names.is_empty() && self.n == 0 {
            self.n = values.len();
        }
        if values.len() != self.n {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: self.n,
            });
        }
        if binary {
            if let Some(bad) = values.iter().find(|&&x| x != 0.0 && x != 1.0) {
                return Err(Error::Dataset(format!("binary column `{name}` holds {bad}")));
            }
        }
        self.index.insert(name.to_string(), self.names.len());
        self.names.push(name.to_string());
        self.columns.push(values);
        self.binary.push(binary);
        if let Some(noise) = &mut self.noise {
            noise.push(vec![0.0; self.n]);
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.index.get(name).map(|&i| self.columns[i].as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.column(name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Overwrite an existing column.
    pub fn set_column(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        if values.len() != self.n {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: self.n,
            });
        }
        self.columns[i] = values;
        Ok(())
    }

    pub fn has_noise(&self) -> bool {
        self.noise.is_some()
    }

    pub fn noise(&self, name: &str) -> Option<&[f64]> {
        let i = *self.index.get(name)?;
        self.noise.as_ref().map(|cols| cols[i].as_slice())
    }

    pub fn require_noise(&self, name: &str) -> Result<&[f64]> {
        self.noise(name).ok_or_else(|| Error::MissingNoise(name.to_string()))
    }

    pub fn set_noise(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        let i = *self
            .index
            .get(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        if values.len() != self.n {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: self.n,
            });
        }
        let n = self.n;
        let cols = self.names.len();
        self.noise.get_or_insert_with(|| vec![vec![0.0; n]; cols])[i] = values;
        Ok(())
    }

    pub fn clear_noise(&mut self) {
        self.noise = None;
    }

    /// Rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let pick = |col: &Vec<f64>| rows.iter().map(|&r| col[r]).collect::<Vec<f64>>();
        Dataset {
            names: self.names.clone(),
            index: self.index.clone(),
            columns: self.columns.iter().map(pick).collect(),
            binary: self.binary.clone(),
            noise: self.noise.as_ref().map(|cols| cols.iter().map(pick).collect()),
            n: rows.len(),
        }
    }

    /// Every graph node present, binary nodes carrying 0/1 columns.
    pub fn check_against(&self, graph: &CausalGraph) -> Result<()> {
        for spec in graph.nodes() {
            let col = self.require(&spec.name)?;
            if spec.is_binary() {
                if let Some(bad) = col.iter().find(|&&x| x != 0.0 && x != 1.0) {
                    return Err(Error::Dataset(format!("binary node `{}` holds {bad}", spec.name)));
                }
            }
        }
        Ok(())
    }

    /// Bitwise equality of names, values and noise.
    pub fn bit_identical(&self, other: &Dataset) -> bool {
        let same = |a: &[Vec<f64>], b: &[Vec<f64>]| {
            a.len() == b.len()
                && a.iter()
                    .zip(b)
                    .all(|(x, y)| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()))
        };
        self.names == other.names
            && self.binary == other.binary
            && same(&self.columns, &other.columns)
            && match (&self.noise, &other.noise) {
                (None, None) => true,
                (Some(a), Some(b)) => same(a, b),
                _ => false,
            }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_table(out, &self.names, &self.columns, Some(&self.binary), self.n)
    }

    pub fn write_noise_csv<W: Write>(&self, out: W) -> Result<()> {
        let noise = self
            .noise
            .as_ref()
            .ok_or_else(|| Error::Dataset("no noise record".into()))?;
        write_table(out, &self.names, noise, None, self.n)
    }

    /// Read a dataset CSV. With a graph, binary columns are taken from the
    /// node families; otherwise a column is binary iff every value is an
    /// integer literal `0` or `1`.
    pub fn read_csv<R: Read>(input: R, graph: Option<&CausalGraph>) -> Result<Dataset> {
        let (names, columns, literal_binary) = read_table(input)?;
        let n = columns.first().map_or(0, Vec::len);
        let mut ds = Dataset::new(n);
        for ((name, col), lit) in names.iter().zip(columns).zip(literal_binary) {
            let binary = match graph.and_then(|g| g.id(name)) {
                Some(id) => graph.expect("graph present").node(id).is_binary(),
                None => lit,
            };
            ds.push_column(name, col, binary)?;
        }
        Ok(ds)
    }

    /// Attach a noise CSV with the same header as the data.
    pub fn read_noise_csv<R: Read>(&mut self, input: R) -> Result<()> {
        let (names, columns, _) = read_table(input)?;
        if names != self.names {
            return Err(Error::Dataset("noise header does not match data header".into()));
        }
        for (name, col) in names.iter().zip(columns) {
            self.set_noise(name, col)?;
        }
        Ok(())
    }
}

fn write_table<W: Write>(
    out: W,
    names: &[String],
    columns: &[Vec<f64>],
    binary: Option<&[bool]>,
    n: usize,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(names)?;
    let mut record: Vec<String> = Vec::with_capacity(names.len());
    for r in 0..n {
        record.clear();
        for (j, col) in columns.iter().enumerate() {
            let x = col[r];
            if binary.is_some_and(|b| b[j]) {
                record.push(if x == 1.0 { "1".into() } else { "0".into() });
            } else {
                record.push(format!("{x:?}"));
            }
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

type Table = (Vec<String>, Vec<Vec<f64>>, Vec<bool>);

fn read_table<R: Read>(input: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut columns = vec![Vec::new(); names.len()];
    let mut literal_binary = vec![true; names.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != names.len() {
            return Err(Error::Dataset(format!(
                "row {} has {} fields, expected {}",
                row + 2,
                rec.len(),
                names.len()
            )));
        }
        for (j, field) in rec.iter().enumerate() {
            let x: f64 = field
                .parse()
                .map_err(|_| Error::Dataset(format!("row {}: `{field}` is not a number", row + 2)))?;
            if field != "0" && field != "1" {
                literal_binary[j] = false;
            }
            columns[j].push(x);
        }
    }
    if columns.first().is_some_and(Vec::is_empty) {
        literal_binary.iter_mut().for_each(|b| *b = false);
    }
    Ok((names, columns, literal_binary))
}
