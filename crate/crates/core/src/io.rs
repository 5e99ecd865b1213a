//! Text formats: dense and banded matrix files, model files for the exact
//! piecewise-normal interval, and SAA data files.
//!
//! Matrix text files start with a header line, then whitespace-separated
//! numbers; `#` starts a comment.
//!
//! ```text
//! dense ROWS COLS
//! <ROWS lines of COLS numbers>
//!
//! banded N KL KU
//! <KL + KU + 1 lines, one per diagonal from offset -KL up to +KU;
//!  the diagonal at offset d holds N - |d| numbers>
//! ```

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::dense::BandedMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum MatrixData {
    Dense(DMatrix<f64>),
    Banded(BandedMatrix),
}

impl MatrixData {
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            MatrixData::Dense(m) => m.clone(),
            MatrixData::Banded(b) => b.to_dense(),
        }
    }

    pub fn bandwidth(&self) -> Option<(usize, usize)> {
        match self {
            MatrixData::Dense(_) => None,
            MatrixData::Banded(b) => Some(b.bandwidth()),
        }
    }
}

/// Guard against absurd allocations from hostile headers.
const MAX_ENTRIES: usize = 1 << 26;

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = match tok {
        "inf" | "+inf" => f64::INFINITY,
        "-inf" => f64::NEG_INFINITY,
        _ => tok.parse().map_err(|_| Error::parse(line, format!("not a number: {tok:?}")))?,
    };
    if v.is_nan() {
        return Err(Error::parse(line, "NaN is not allowed"));
    }
    Ok(v)
}

fn parse_count(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| Error::parse(line, format!("bad {what}: {tok:?}")))
}

/// Significant lines as (1-based line number, tokens).
fn tokenized(text: &str) -> Vec<(usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let body = raw.split('#').next().unwrap_or("");
            let toks: Vec<&str> = body.split_whitespace().collect();
            (!toks.is_empty()).then_some((i + 1, toks))
        })
        .collect()
}

fn finite_row(line: usize, toks: &[&str], want: usize) -> Result<Vec<f64>> {
    if toks.len() != want {
        return Err(Error::parse(line, format!("expected {want} numbers, found {}", toks.len())));
    }
    toks.iter()
        .map(|t| {
            let v = parse_number(t, line)?;
            if !v.is_finite() {
                return Err(Error::parse(line, "matrix entries must be finite"));
            }
            Ok(v)
        })
        .collect()
}

pub fn parse_matrix_text(text: &str) -> Result<MatrixData> {
    let lines = tokenized(text);
    let (hline, header) = lines.first().ok_or_else(|| Error::parse(1, "empty matrix file"))?;
    let rest = &lines[1..];
    match header[0] {
        "dense" => {
            let rows = parse_count(header.get(1).copied(), *hline, "row count")?;
            let cols = parse_count(header.get(2).copied(), *hline, "column count")?;
            if header.len() != 3 {
                return Err(Error::parse(*hline, "dense header is `dense ROWS COLS`"));
            }
            if rows.saturating_mul(cols) > MAX_ENTRIES {
                return Err(Error::parse(*hline, "matrix too large"));
            }
            if rest.len() != rows {
                return Err(Error::parse(*hline, format!("expected {rows} rows, found {}", rest.len())));
            }
            let mut m = DMatrix::zeros(rows, cols);
            for (i, (line, toks)) in rest.iter().enumerate() {
                for (j, v) in finite_row(*line, toks, cols)?.into_iter().enumerate() {
                    m[(i, j)] = v;
                }
            }
            Ok(MatrixData::Dense(m))
        }
        "banded" => {
            let n = parse_count(header.get(1).copied(), *hline, "dimension")?;
            let kl = parse_count(header.get(2).copied(), *hline, "lower bandwidth")?;
            let ku = parse_count(header.get(3).copied(), *hline, "upper bandwidth")?;
            if header.len() != 4 {
                return Err(Error::parse(*hline, "banded header is `banded N KL KU`"));
            }
            if n == 0 || kl >= n || ku >= n {
                return Err(Error::parse(*hline, "bandwidths must be smaller than N"));
            }
            if n.saturating_mul(kl + ku + 1) > MAX_ENTRIES {
                return Err(Error::parse(*hline, "matrix too large"));
            }
            if rest.len() != kl + ku + 1 {
                return Err(Error::parse(*hline, format!("expected {} diagonals, found {}", kl + ku + 1, rest.len())));
            }
            let mut b = BandedMatrix::zeros(n, kl, ku);
            for (k, (line, toks)) in rest.iter().enumerate() {
                let offset = k as i64 - kl as i64;
                let len = n - offset.unsigned_abs() as usize;
                for (t, v) in finite_row(*line, toks, len)?.into_iter().enumerate() {
                    let (i, j) = if offset < 0 { (t + (-offset) as usize, t) } else { (t, t + offset as usize) };
                    b.set(i, j, v);
                }
            }
            Ok(MatrixData::Banded(b))
        }
        other => Err(Error::parse(*hline, format!("unknown matrix header {other:?}"))),
    }
}

pub fn write_dense_text(m: &DMatrix<f64>) -> String {
    let mut s = format!("dense {} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn write_banded_text(b: &BandedMatrix) -> String {
    let n = b.dim();
    let (kl, ku) = b.bandwidth();
    let mut s = format!("banded {n} {kl} {ku}\n");
    for k in 0..kl + ku + 1 {
        let offset = k as i64 - kl as i64;
        let len = n - offset.unsigned_abs() as usize;
        let vals: Vec<String> = (0..len)
            .map(|t| {
                let (i, j) = if offset < 0 { (t + (-offset) as usize, t) } else { (t, t + offset as usize) };
                format!("{:e}", b.get(i, j))
            })
            .collect();
        s.push_str(&vals.join(" "));
        s.push('\n');
    }
    s
}

pub fn load_matrix(path: &Path) -> Result<MatrixData> {
    parse_matrix_text(&std::fs::read_to_string(path)?)
}

/// A matrix given inline as rows or as a path to a matrix text file.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum MatrixSource {
    Inline(Vec<Vec<f64>>),
    File(String),
}

impl MatrixSource {
    /// Resolve against `base` (the directory of the file that named it).
    pub fn load(&self, base: Option<&Path>) -> Result<MatrixData> {
        match self {
            MatrixSource::Inline(rows) => Ok(MatrixData::Dense(rows_to_matrix(rows)?)),
            MatrixSource::File(p) => {
                let path = match base {
                    Some(b) => b.join(p),
                    None => PathBuf::from(p),
                };
                load_matrix(&path)
            }
        }
    }
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r.saturating_mul(c) > MAX_ENTRIES {
        return Err(Error::Config("matrix too large".into()));
    }
    let mut m = DMatrix::zeros(r, c);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(Error::Config(format!("row {i} has {} entries, expected {c}", row.len())));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Config(format!("entry ({i}, {j}) is not finite")));
            }
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

fn finite_vector(v: &[f64], what: &str) -> Result<DVector<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config(format!("{what} must be finite")));
    }
    Ok(DVector::from_column_slice(v))
}

/// Convert a TOML error, reporting the 1-based line of its span.
pub fn toml_error(text: &str, e: toml::de::Error) -> Error {
    let line = e.span().map_or(0, |s| text.get(..s.start).unwrap_or(text).matches('\n').count() + 1);
    Error::parse(line, e.message())
}

/// Optional box bounds; both absent means the nonnegative orthant.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BoxBounds {
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl BoxBounds {
    pub fn build(&self, n: usize) -> Result<crate::polyhedral::BoxSet> {
        let lower = self.lower.clone().unwrap_or_else(|| vec![0.0; n]);
        let upper = self.upper.clone().unwrap_or_else(|| vec![f64::INFINITY; n]);
        if lower.len() != n || upper.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: lower.len().min(upper.len()) });
        }
        crate::polyhedral::BoxSet::new(lower, upper)
    }
}

/// Sign constraint of one coordinate in an explicitly given piece.
#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum AxisSpec {
    Free,
    Nonneg,
    Nonpos,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub cone: Vec<AxisSpec>,
    pub matrix: MatrixSource,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NormalMapSpec {
    pub linear: MatrixSource,
    pub cone: BoxBounds,
}

/// One observation of a piecewise normal vector and what is known about it.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub sigma: MatrixSource,
    pub anchor: Vec<f64>,
    pub observation: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub normal_map: Option<NormalMapSpec>,
    #[serde(default, rename = "piece")]
    pub pieces: Vec<PieceSpec>,
}

fn default_alpha() -> f64 {
    0.1
}

pub fn parse_model_file(text: &str) -> Result<ModelFile> {
    let m: ModelFile = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    if m.normal_map.is_some() == !m.pieces.is_empty() {
        return Err(Error::Config("give exactly one of [normal_map] or [[piece]]".into()));
    }
    if m.anchor.len() != m.observation.len() {
        return Err(Error::DimensionMismatch { expected: m.anchor.len(), found: m.observation.len() });
    }
    finite_vector(&m.anchor, "anchor")?;
    finite_vector(&m.observation, "observation")?;
    Ok(m)
}

/// Loaded and validated model.
pub struct LoadedModel {
    pub model: crate::pwnormal::PiecewiseNormalModel,
    pub observation: DVector<f64>,
    pub alpha: f64,
}

impl ModelFile {
    pub fn load(&self, base: Option<&Path>) -> Result<LoadedModel> {
        use crate::gauss::CovMatrix;
        use crate::polyhedral::{Axis, Piece, PiecewiseLinearMap};
        let n = self.anchor.len();
        let sigma = CovMatrix::new(self.sigma.load(base)?.to_dense())?;
        let gamma = if let Some(nm) = &self.normal_map {
            let cone = nm.cone.build(n)?;
            PiecewiseLinearMap::normal_map(nm.linear.load(base)?.to_dense(), &cone)?
        } else {
            let pieces = self
                .pieces
                .iter()
                .map(|p| {
                    let cone = p
                        .cone
                        .iter()
                        .map(|a| match a {
                            AxisSpec::Free => Axis::Free,
                            AxisSpec::Nonneg => Axis::NonNeg,
                            AxisSpec::Nonpos => Axis::NonPos,
                        })
                        .collect();
                    Ok(Piece { cone, matrix: p.matrix.load(base)?.to_dense() })
                })
                .collect::<Result<Vec<_>>>()?;
            PiecewiseLinearMap::explicit(pieces)?
        };
        let anchor = finite_vector(&self.anchor, "anchor")?;
        let model = crate::pwnormal::PiecewiseNormalModel::new(gamma, sigma, anchor)?;
        Ok(LoadedModel { model, observation: finite_vector(&self.observation, "observation")?, alpha: self.alpha })
    }
}

/// SAA data supplied from outside: averages, covariance and sample size.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SaaFile {
    pub sample_size: usize,
    pub a_bar: MatrixSource,
    pub b_bar: Vec<f64>,
    pub sigma: MatrixSource,
    #[serde(default)]
    pub set: BoxBounds,
    #[serde(default = "default_alpha_half")]
    pub alpha1: f64,
    #[serde(default = "default_alpha_half")]
    pub alpha2: f64,
}

fn default_alpha_half() -> f64 {
    0.05
}

pub fn parse_saa_file(text: &str) -> Result<SaaFile> {
    let s: SaaFile = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    if s.sample_size < 2 {
        return Err(Error::SampleTooSmall(s.sample_size));
    }
    finite_vector(&s.b_bar, "b_bar")?;
    Ok(s)
}
