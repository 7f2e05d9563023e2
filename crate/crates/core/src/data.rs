//! Expression matrices: ingestion, standardization and per-gene response views.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// An `n × p` matrix of expression values, one sample per row and one gene
/// per column.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    values: DMatrix<f64>,
    gene_names: Vec<String>,
    standardized: bool,
    constant: Vec<bool>,
}

impl ExpressionMatrix {
    pub fn new(values: DMatrix<f64>, gene_names: Vec<String>) -> Result<Self> {
        let (n, p) = values.shape();
        if n < 2 {
            return Err(Error::invalid(format!("need at least 2 samples, got {n}")));
        }
        if p < 2 {
            return Err(Error::invalid(format!("need at least 2 genes, got {p}")));
        }
        if gene_names.len() != p {
            return Err(Error::invalid(format!(
                "{} gene names for {p} columns",
                gene_names.len()
            )));
        }
        let mut seen = HashSet::with_capacity(p);
        for name in &gene_names {
            if name.is_empty() {
                return Err(Error::invalid("empty gene name"));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateGene(name.clone()));
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at sample {}, gene {}",
                pos % n,
                pos / n
            )));
        }
        Ok(Self {
            values,
            gene_names,
            standardized: false,
            constant: vec![false; p],
        })
    }

    /// Builds a matrix with generated gene names `g1..gp`.
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        let names = (1..=values.ncols()).map(|j| format!("g{j}")).collect();
        Self::new(values, names)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn gene_names(&self) -> &[String] {
        &self.gene_names
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_genes(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Columns that had zero variance when standardized.
    pub fn constant_columns(&self) -> &[bool] {
        &self.constant
    }

    /// Centers every column and scales it to unit standard deviation
    /// (divisor `n`). Constant columns are centered only and flagged.
    /// A matrix that is already standardized is returned unchanged.
    pub fn standardize(&self) -> ExpressionMatrix {
        if self.standardized {
            return self.clone();
        }
        let n = self.n_samples() as f64;
        let mut values = self.values.clone();
        let mut constant = vec![false; self.n_genes()];
        for (j, mut col) in values.column_iter_mut().enumerate() {
            let mean = col.iter().sum::<f64>() / n;
            col.iter_mut().for_each(|v| *v -= mean);
            let sd = (col.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
            if sd <= f64::EPSILON * mean.abs().max(1.0) {
                col.fill(0.0);
                constant[j] = true;
            } else {
                col.iter_mut().for_each(|v| *v /= sd);
            }
        }
        ExpressionMatrix {
            values,
            gene_names: self.gene_names.clone(),
            standardized: true,
            constant,
        }
    }

    /// Splits off gene `a` as the response; the remaining genes keep their
    /// order as predictors.
    pub fn response_view(&self, a: usize) -> Result<ResponseView> {
        let p = self.n_genes();
        if a >= p {
            return Err(Error::IndexOutOfRange { index: a, len: p });
        }
        let y = self.values.column(a).into_owned();
        let x = self.values.clone().remove_column(a);
        let predictors = (0..p).filter(|&j| j != a).collect();
        Ok(ResponseView {
            response_index: a,
            y,
            x,
            predictors,
        })
    }

    /// Keeps only the listed samples (rows), in the given order.
    pub fn select_samples(&self, rows: &[usize]) -> Result<ExpressionMatrix> {
        let values = self.values.select_rows(rows.iter());
        let mut m = ExpressionMatrix::new(values, self.gene_names.clone())?;
        m.standardized = self.standardized;
        m.constant = self.constant.clone();
        Ok(m)
    }

    /// Parses a tab-separated table. Without `transpose` the header names the
    /// genes and each row is a sample. With `transpose` each row is a gene:
    /// when the rows start with a label cell that label is the gene name,
    /// otherwise genes are named `g1..gp`.
    pub fn parse_tsv(text: &str, transpose: bool) -> Result<ExpressionMatrix> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            column: 1,
            message: "empty file".into(),
        })?;
        let header: Vec<String> = header
            .trim_end_matches('\r')
            .split('\t')
            .map(|s| s.trim().to_string())
            .collect();
        let body: Vec<(usize, Vec<&str>)> = lines
            .map(|(idx, l)| (idx + 1, l.trim_end_matches('\r').split('\t').collect()))
            .collect();

        let labelled = transpose
            && !body.is_empty()
            && body
                .iter()
                .all(|(_, cells)| cells.len() == header.len() && cells[0].trim().parse::<f64>().is_err());
        let skip = usize::from(labelled);

        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(body.len());
        for (line, cells) in &body {
            if cells.len() != header.len() {
                return Err(Error::Parse {
                    line: *line,
                    column: cells.len().min(header.len()) + 1,
                    message: format!("expected {} cells, found {}", header.len(), cells.len()),
                });
            }
            let mut row = Vec::with_capacity(cells.len());
            for (c, cell) in cells.iter().enumerate().skip(skip) {
                let v = cell
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line: *line,
                        column: c + 1,
                        message: format!("`{cell}` is not a finite number"),
                    })?;
                row.push(v);
            }
            rows.push(row);
        }

        let width = header.len() - skip;
        if transpose {
            let p = rows.len();
            let names = if labelled {
                body.iter().map(|(_, c)| c[0].trim().to_string()).collect()
            } else {
                (1..=p).map(|j| format!("g{j}")).collect()
            };
            let values = DMatrix::from_fn(width, p, |i, j| rows[j][i]);
            ExpressionMatrix::new(values, names)
        } else {
            let values = DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]);
            ExpressionMatrix::new(values, header)
        }
    }

    pub fn load(path: impl AsRef<Path>, transpose: bool) -> Result<ExpressionMatrix> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text, transpose)
    }

    /// Tab-separated text with 17 significant digits per value.
    pub fn to_tsv(&self) -> String {
        let mut out = self.gene_names.join("\t");
        out.push('\n');
        for row in self.values.row_iter() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push('\t');
                }
                write!(out, "{v:.16e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

/// One node-wise regression problem: gene `response_index` regressed on all
/// other genes.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseView {
    pub response_index: usize,
    pub y: DVector<f64>,
    /// `n × (p-1)` predictor matrix with the response column removed.
    pub x: DMatrix<f64>,
    /// Original gene index of each predictor column.
    pub predictors: Vec<usize>,
}

impl ResponseView {
    /// A view over an arbitrary design, mainly for tests and oracles.
    pub fn from_parts(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::invalid(format!(
                "design has {} rows but response has {}",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::invalid("empty design matrix"));
        }
        let predictors = (0..x.ncols()).collect();
        Ok(Self {
            response_index: usize::MAX,
            y,
            x,
            predictors,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_predictors(&self) -> usize {
        self.x.ncols()
    }

    /// Restriction to a subset of samples, preserving predictor layout.
    pub fn select_samples(&self, rows: &[usize]) -> ResponseView {
        ResponseView {
            response_index: self.response_index,
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i])),
            x: self.x.select_rows(rows.iter()),
            predictors: self.predictors.clone(),
        }
    }

    /// Same predictors, different response vector.
    pub fn with_response(&self, y: DVector<f64>) -> ResponseView {
        ResponseView {
            response_index: self.response_index,
            y,
            x: self.x.clone(),
            predictors: self.predictors.clone(),
        }
    }
}
