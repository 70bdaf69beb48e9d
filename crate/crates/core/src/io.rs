//! JSON formats for systems, interpolation data and reductions.
//!
//! Systems:
//! `{"form": "quadrature", "n": .., "m": .., "ell": .., "A": [[..]], "B": .., "C": .., "D": ..}`
//! with real entries, or `{"form": "annihilation", .., "F": .., "G": .., "H": .., "K": ..}`
//! with complex entries written as `[re, im]`. Matrices are row-major
//! arrays of rows. Any entry may be a plain number or a `[re, im]` pair on
//! input.
//!
//! Interpolation data: `{"points": [[re, im], ..], "directions": [[[re, im], ..], ..]}`.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, RealMatrix, Vector};
use crate::model::{AnnihilationSystem, QuadratureSystem, System};
use crate::reduction::{Diagnostics, InterpolationData, Method, ReductionResult, Side};

/// A matrix entry: a real number or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(self) -> Complex64 {
        match self {
            Entry::Real(x) => Complex64::new(x, 0.0),
            Entry::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

pub type MatrixJson = Vec<Vec<Entry>>;

fn real_json(m: &RealMatrix) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| Entry::Real(m[(i, j)])).collect())
        .collect()
}

/// Plain numbers when every entry is real, pairs otherwise.
pub fn complex_json(m: &Matrix) -> MatrixJson {
    let real = m.iter().all(|z| z.im == 0.0);
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| {
                    let z = m[(i, j)];
                    if real {
                        Entry::Real(z.re)
                    } else {
                        Entry::Complex([z.re, z.im])
                    }
                })
                .collect()
        })
        .collect()
}

fn pairs_json(m: &Matrix) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| Entry::Complex([m[(i, j)].re, m[(i, j)].im])).collect())
        .collect()
}

/// Parses a `rows × cols` matrix; `rows` and `cols` disambiguate empty
/// matrices.
pub fn parse_matrix(name: &str, json: &MatrixJson, rows: usize, cols: usize) -> Result<Matrix> {
    if json.len() != rows {
        return Err(Error::Dimension(format!("{name} has {} rows, expected {rows}", json.len())));
    }
    let mut m = Matrix::zeros(rows, cols);
    for (i, row) in json.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Dimension(format!(
                "{name} row {} has {} entries, expected {cols}",
                i + 1,
                row.len()
            )));
        }
        for (j, e) in row.iter().enumerate() {
            m[(i, j)] = e.value();
        }
    }
    Ok(m)
}

fn parse_real(name: &str, json: &MatrixJson, rows: usize, cols: usize) -> Result<RealMatrix> {
    let m = parse_matrix(name, json, rows, cols)?;
    if let Some(z) = m.iter().find(|z| z.im != 0.0) {
        return Err(Error::Invalid(format!(
            "{name} must be real in quadrature form (found {z})"
        )));
    }
    Ok(m.map(|z| z.re))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum SystemJson {
    Quadrature {
        n: usize,
        m: usize,
        ell: usize,
        #[serde(rename = "A")]
        a: MatrixJson,
        #[serde(rename = "B")]
        b: MatrixJson,
        #[serde(rename = "C")]
        c: MatrixJson,
        #[serde(rename = "D")]
        d: MatrixJson,
    },
    Annihilation {
        n: usize,
        m: usize,
        ell: usize,
        #[serde(rename = "F")]
        f: MatrixJson,
        #[serde(rename = "G")]
        g: MatrixJson,
        #[serde(rename = "H")]
        h: MatrixJson,
        #[serde(rename = "K")]
        k: MatrixJson,
    },
}

impl SystemJson {
    pub fn from_system(sys: &System) -> Self {
        match sys {
            System::Quadrature(q) => SystemJson::Quadrature {
                n: q.n(),
                m: q.m(),
                ell: q.ell(),
                a: real_json(q.a()),
                b: real_json(q.b()),
                c: real_json(q.c()),
                d: real_json(q.d()),
            },
            System::Annihilation(s) => SystemJson::Annihilation {
                n: s.n(),
                m: s.m(),
                ell: s.ell(),
                f: pairs_json(s.f()),
                g: pairs_json(s.g()),
                h: pairs_json(s.h()),
                k: pairs_json(s.k()),
            },
        }
    }

    pub fn to_system(&self) -> Result<System> {
        match self {
            SystemJson::Quadrature { n, m, ell, a, b, c, d } => {
                let (n, m, l) = (2 * n, 2 * m, 2 * ell);
                Ok(System::Quadrature(QuadratureSystem::new(
                    parse_real("A", a, n, n)?,
                    parse_real("B", b, n, m)?,
                    parse_real("C", c, l, n)?,
                    parse_real("D", d, l, m)?,
                )?))
            }
            SystemJson::Annihilation { n, m, ell, f, g, h, k } => Ok(System::Annihilation(AnnihilationSystem::new(
                parse_matrix("F", f, *n, *n)?,
                parse_matrix("G", g, *n, *m)?,
                parse_matrix("H", h, *ell, *n)?,
                parse_matrix("K", k, *ell, *m)?,
            )?)),
        }
    }
}

pub fn system_to_string(sys: &System) -> Result<String> {
    Ok(serde_json::to_string_pretty(&SystemJson::from_system(sys))?)
}

pub fn system_from_str(s: &str) -> Result<System> {
    let json: SystemJson = serde_json::from_str(s)?;
    json.to_system()
}

pub fn read_system(path: &Path) -> Result<System> {
    system_from_str(&std::fs::read_to_string(path)?)
}

pub fn write_system(path: &Path, sys: &System) -> Result<()> {
    Ok(std::fs::write(path, system_to_string(sys)?)?)
}

/// Interpolation points with one direction each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointsJson {
    pub points: Vec<Entry>,
    pub directions: Vec<Vec<Entry>>,
}

impl PointsJson {
    pub fn new(points: &[Complex64], directions: &[Vector]) -> Self {
        Self {
            points: points.iter().map(|z| Entry::Complex([z.re, z.im])).collect(),
            directions: directions
                .iter()
                .map(|d| d.iter().map(|z| Entry::Complex([z.re, z.im])).collect())
                .collect(),
        }
    }

    pub fn from_data(data: &InterpolationData) -> Self {
        Self::new(data.points(), data.directions())
    }

    pub fn points(&self) -> Vec<Complex64> {
        self.points.iter().map(|e| e.value()).collect()
    }

    pub fn directions(&self) -> Vec<Vector> {
        self.directions
            .iter()
            .map(|d| Vector::from_iterator(d.len(), d.iter().map(|e| e.value())))
            .collect()
    }

    pub fn to_data(&self, side: Side) -> Result<InterpolationData> {
        InterpolationData::new(side, self.points(), self.directions())
    }
}

/// Points alone, e.g. `[[0, 1.05e4], [0, -1.05e4]]`.
pub fn parse_points(s: &str) -> Result<Vec<Complex64>> {
    let v: Vec<Entry> = serde_json::from_str(s)?;
    Ok(v.into_iter().map(Entry::value).collect())
}

/// Directions alone, e.g. `[[0, 0, 0, 0, 1, 0], ...]`.
pub fn parse_directions(s: &str) -> Result<Vec<Vector>> {
    let v: Vec<Vec<Entry>> = serde_json::from_str(s)?;
    Ok(v.into_iter()
        .map(|d| Vector::from_iterator(d.len(), d.into_iter().map(Entry::value)))
        .collect())
}

/// A reduction as written to disk: the reduced system, the projection
/// matrices, the interpolation data and the diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionJson {
    pub method: Method,
    pub reduced: SystemJson,
    pub order: usize,
    #[serde(rename = "W")]
    pub w: MatrixJson,
    #[serde(rename = "V")]
    pub v: MatrixJson,
    pub side: Option<Side>,
    pub data: Option<PointsJson>,
    pub diagnostics: Diagnostics,
}

impl ReductionJson {
    pub fn from_result(res: &ReductionResult) -> Self {
        Self {
            method: res.method,
            reduced: SystemJson::from_system(&res.reduced),
            order: res.v.ncols(),
            w: complex_json(&res.w),
            v: complex_json(&res.v),
            side: res.data.as_ref().map(|d| d.side()),
            data: res.data.as_ref().map(PointsJson::from_data),
            diagnostics: res.diagnostics.clone(),
        }
    }

    /// Projection matrices for a full state of dimension `n`.
    pub fn projections(&self, n: usize) -> Result<(Matrix, Matrix)> {
        Ok((
            parse_matrix("W", &self.w, n, self.order)?,
            parse_matrix("V", &self.v, n, self.order)?,
        ))
    }

    pub fn to_result(&self, full_order: usize) -> Result<ReductionResult> {
        let (w, v) = self.projections(full_order)?;
        let data = match (&self.data, self.side) {
            (Some(d), Some(side)) => Some(d.to_data(side)?),
            _ => None,
        };
        Ok(ReductionResult {
            method: self.method,
            w,
            v,
            reduced: self.reduced.to_system()?,
            data,
            diagnostics: self.diagnostics.clone(),
        })
    }
}

pub fn reduction_to_string(res: &ReductionResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ReductionJson::from_result(res))?)
}

pub fn reduction_from_str(s: &str) -> Result<ReductionJson> {
    Ok(serde_json::from_str(s)?)
}
