//! Construction and normalization of the centered Gaussian field families:
//! independent fields, the ±1 sign field, and the lattice free field with
//! absorbing boundary, plus a text covariance format for custom models.
//!
//! A model is described by one of three covariance representations:
//! a dense matrix Σ, a factor A with Σ = A·Aᵀ, or a banded precision matrix
//! P with Σ = P⁻¹. All models carry normalization metadata: the maximum
//! variance σ², the effective size `n_eff`, and the growth base λ with
//! |V| ≈ λ^n_eff.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{BandedCholesky, SymBanded};

/// Default cap on the number of sign-field points (2^n).
pub const DEFAULT_SIGN_FIELD_CAP: usize = 1 << 20;

/// Asymmetry beyond this is rejected when loading a dense covariance;
/// smaller asymmetry is repaired by averaging.
pub const SYMMETRY_TOLERANCE: f64 = 1e-6;

static NEXT_MODEL_ID: AtomicU64 = AtomicU64::new(1);

fn next_model_id() -> u64 {
    NEXT_MODEL_ID.fetch_add(1, Ordering::Relaxed)
}

/// Descriptor attached to an index point.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PointLabel {
    /// Row/column inside the lattice box (boundary ring excluded).
    Lattice { row: u32, col: u32 },
    /// ±1 coordinate vector.
    Spins(Vec<i8>),
}

/// Finite index set of field points, optionally labelled.
#[derive(Debug, Clone)]
pub struct IndexSet {
    size: usize,
    labels: Option<Arc<Vec<PointLabel>>>,
}

impl IndexSet {
    fn plain(size: usize) -> Self {
        IndexSet { size, labels: None }
    }

    fn labelled(labels: Vec<PointLabel>) -> Self {
        IndexSet {
            size: labels.len(),
            labels: Some(Arc::new(labels)),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn labels(&self) -> Option<&[PointLabel]> {
        self.labels.as_deref().map(|v| v.as_slice())
    }

    /// Index of a ±1 vector in a spin-labelled set.
    pub fn index_of_spins(&self, spins: &[i8]) -> Option<usize> {
        self.labels()?.iter().position(|l| match l {
            PointLabel::Spins(s) => s.as_slice() == spins,
            _ => false,
        })
    }

    /// Index of a lattice point in a lattice-labelled set.
    pub fn index_of_lattice(&self, row: u32, col: u32) -> Option<usize> {
        self.labels()?
            .iter()
            .position(|l| matches!(l, PointLabel::Lattice { row: r, col: c } if *r == row && *c == col))
    }
}

#[derive(Debug)]
pub(crate) struct PrecisionRep {
    pub(crate) chol: Arc<BandedCholesky>,
    /// Samples are multiplied by `scale`; covariances by `scale²`.
    pub(crate) scale: f64,
    /// Unscaled diagonal of P⁻¹.
    diag: Vec<f64>,
    /// Unscaled columns of P⁻¹, filled on demand.
    col_cache: Mutex<HashMap<usize, Arc<Vec<f64>>>>,
}

impl PrecisionRep {
    fn new(matrix: &SymBanded) -> Result<Self> {
        let chol = matrix.cholesky()?;
        let n = matrix.n();
        // Σ_jj = ‖L⁻¹ e_j‖²; forward solves only.
        let mut diag = vec![0.0; n];
        let mut work = vec![0.0; n];
        for j in 0..n {
            work[j..].fill(0.0);
            work[j] = 1.0;
            chol.solve_lower_from(&mut work, j);
            diag[j] = work[j..].iter().map(|y| y * y).sum();
        }
        Ok(PrecisionRep {
            chol: Arc::new(chol),
            scale: 1.0,
            diag,
            col_cache: Mutex::new(HashMap::new()),
        })
    }

    fn with_scale(&self, scale: f64) -> Self {
        PrecisionRep {
            chol: Arc::clone(&self.chol),
            scale,
            diag: self.diag.clone(),
            col_cache: Mutex::new(HashMap::new()),
        }
    }

    /// Unscaled column v of P⁻¹, cached.
    fn column(&self, v: usize) -> Arc<Vec<f64>> {
        if let Some(col) = self.col_cache.lock().unwrap().get(&v) {
            return Arc::clone(col);
        }
        let n = self.chol.n();
        let mut col = vec![0.0; n];
        col[v] = 1.0;
        self.chol.solve(&mut col);
        let col = Arc::new(col);
        self.col_cache.lock().unwrap().insert(v, Arc::clone(&col));
        col
    }
}

#[derive(Debug)]
pub(crate) enum Representation {
    Dense(Arc<DMatrix<f64>>),
    Factor(Arc<DMatrix<f64>>),
    Precision(PrecisionRep),
}

/// A centered Gaussian field on a finite index set.
#[derive(Debug)]
pub struct FieldModel {
    id: u64,
    index_set: IndexSet,
    pub(crate) rep: Representation,
    sigma_max_sq: f64,
    effective_n: f64,
    lambda: f64,
    degenerate: bool,
    normalized: bool,
    scale_applied: f64,
}

impl FieldModel {
    /// Independent centered Gaussians with a common variance.
    pub fn iid(size: usize, variance: f64) -> Result<FieldModel> {
        if size == 0 {
            return Err(Error::invalid("iid model needs size >= 1"));
        }
        if !(variance > 0.0) {
            return Err(Error::invalid(format!(
                "iid model needs variance > 0, got {variance}"
            )));
        }
        let mut p = SymBanded::zeros(size, 0);
        for i in 0..size {
            p.set(i, i, 1.0 / variance);
        }
        let rep = PrecisionRep::new(&p)?;
        Ok(FieldModel {
            id: next_model_id(),
            index_set: IndexSet::plain(size),
            rep: Representation::Precision(rep),
            sigma_max_sq: variance,
            effective_n: (size as f64).ln(),
            lambda: std::f64::consts::E,
            degenerate: false,
            normalized: false,
            scale_applied: 1.0,
        })
    }

    /// Field η_v = ⟨v, Z⟩ over v ∈ {−1,1}ⁿ, represented by its 2ⁿ×n factor.
    pub fn sign_field(n: usize) -> Result<FieldModel> {
        Self::sign_field_with_cap(n, DEFAULT_SIGN_FIELD_CAP)
    }

    pub fn sign_field_with_cap(n: usize, cap: usize) -> Result<FieldModel> {
        if n == 0 {
            return Err(Error::invalid("sign field needs n >= 1"));
        }
        if n >= usize::BITS as usize || (1usize << n) > cap {
            return Err(Error::Capacity {
                what: "sign field size 2^n".into(),
                requested: n,
                cap,
            });
        }
        let size = 1usize << n;
        let mut factor = DMatrix::<f64>::zeros(size, n);
        let mut labels = Vec::with_capacity(size);
        for i in 0..size {
            let mut spins = Vec::with_capacity(n);
            for k in 0..n {
                let s: i8 = if (i >> k) & 1 == 1 { 1 } else { -1 };
                spins.push(s);
                factor[(i, k)] = f64::from(s);
            }
            labels.push(PointLabel::Spins(spins));
        }
        Ok(FieldModel {
            id: next_model_id(),
            index_set: IndexSet::labelled(labels),
            rep: Representation::Factor(Arc::new(factor)),
            sigma_max_sq: n as f64,
            effective_n: n as f64,
            lambda: 2.0,
            degenerate: false,
            normalized: true,
            scale_applied: 1.0,
        })
    }

    /// Lattice free field on the interior of a `side`×`side` box: the
    /// precision matrix is the graph Laplacian with absorbing boundary, and
    /// the covariance is the corresponding Green's function, rescaled so the
    /// maximum variance equals log of the interior size.
    pub fn dgff(side: usize) -> Result<FieldModel> {
        if side < 3 {
            return Err(Error::invalid(format!(
                "dgff needs side >= 3 so the interior is nonempty, got {side}"
            )));
        }
        let w = side - 2;
        let n = w * w;
        let mut p = SymBanded::zeros(n, w);
        for i in 0..n {
            p.set(i, i, 4.0);
            if i % w != w - 1 {
                p.set(i + 1, i, -1.0); // right neighbour
            }
            if i + w < n {
                p.set(i + w, i, -1.0); // neighbour below
            }
        }
        let rep = PrecisionRep::new(&p)?;
        let mut labels = Vec::with_capacity(n);
        for r in 0..w {
            for c in 0..w {
                labels.push(PointLabel::Lattice {
                    row: (r + 1) as u32,
                    col: (c + 1) as u32,
                });
            }
        }
        let raw_max = rep.diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let model = FieldModel {
            id: next_model_id(),
            index_set: IndexSet::labelled(labels),
            rep: Representation::Precision(rep),
            sigma_max_sq: raw_max,
            effective_n: (n as f64).ln(),
            lambda: std::f64::consts::E,
            degenerate: false,
            normalized: false,
            scale_applied: 1.0,
        };
        model.normalize_to_spec()
    }

    /// Rescale so the maximum variance equals `n_eff`. One-point models have
    /// `n_eff = 0` and come back flagged degenerate with zero variance.
    pub fn normalize_to_spec(&self) -> Result<FieldModel> {
        if self.sigma_max_sq <= 0.0 {
            return Err(Error::DegenerateModel(
                "cannot normalize a model with zero maximum variance".into(),
            ));
        }
        let target = self.effective_n;
        let s = (target / self.sigma_max_sq).sqrt();
        let rep = match &self.rep {
            Representation::Dense(m) => {
                Representation::Dense(Arc::new(m.as_ref() * (s * s)))
            }
            Representation::Factor(a) => Representation::Factor(Arc::new(a.as_ref() * s)),
            Representation::Precision(p) => Representation::Precision(p.with_scale(p.scale * s)),
        };
        Ok(FieldModel {
            id: next_model_id(),
            index_set: self.index_set.clone(),
            rep,
            sigma_max_sq: target,
            effective_n: self.effective_n,
            lambda: self.lambda,
            degenerate: target == 0.0,
            normalized: true,
            scale_applied: s,
        })
    }

    /// Load a model from the text covariance format (see `parse_covariance`).
    pub fn from_covariance_file(path: impl AsRef<Path>) -> Result<FieldModel> {
        let text = std::fs::read_to_string(path)?;
        parse_covariance(&text).map(|(m, _)| m)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn size(&self) -> usize {
        self.index_set.size()
    }

    pub fn index_set(&self) -> &IndexSet {
        &self.index_set
    }

    pub fn sigma_max_sq(&self) -> f64 {
        self.sigma_max_sq
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max_sq.sqrt()
    }

    pub fn effective_n(&self) -> f64 {
        self.effective_n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Rescale factor applied by the most recent normalization (1 if none).
    pub fn scale_applied(&self) -> f64 {
        self.scale_applied
    }

    fn check_index(&self, v: usize) -> Result<()> {
        if v >= self.size() {
            return Err(Error::invalid(format!(
                "index {v} out of range for model of size {}",
                self.size()
            )));
        }
        Ok(())
    }

    /// Covariance entry Σ_uv. For precision models this solves for column v
    /// and caches it, so batch queries should keep `v` on the cached side.
    pub fn covariance_entry(&self, u: usize, v: usize) -> Result<f64> {
        self.check_index(u)?;
        self.check_index(v)?;
        Ok(match &self.rep {
            Representation::Dense(m) => m[(u, v)],
            Representation::Factor(a) => a.row(u).dot(&a.row(v)),
            Representation::Precision(p) => {
                if u == v {
                    p.scale * p.scale * p.diag[v]
                } else {
                    p.scale * p.scale * p.column(v)[u]
                }
            }
        })
    }

    pub fn variance(&self, v: usize) -> Result<f64> {
        self.covariance_entry(v, v)
    }

    /// All variances, in index order.
    pub fn variance_profile(&self) -> Vec<f64> {
        match &self.rep {
            Representation::Dense(m) => (0..self.size()).map(|i| m[(i, i)]).collect(),
            Representation::Factor(a) => (0..self.size()).map(|i| a.row(i).norm_squared()).collect(),
            Representation::Precision(p) => {
                p.diag.iter().map(|d| d * p.scale * p.scale).collect()
            }
        }
    }

    /// Materialize the full covariance matrix. Meant for small models
    /// (tests, oracles); cost is O(n²·bw) for precision models.
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let n = self.size();
        match &self.rep {
            Representation::Dense(m) => m.as_ref().clone(),
            Representation::Factor(a) => a.as_ref() * a.transpose(),
            Representation::Precision(p) => {
                let mut out = DMatrix::<f64>::zeros(n, n);
                let s2 = p.scale * p.scale;
                for v in 0..n {
                    let col = p.column(v);
                    for u in 0..n {
                        out[(u, v)] = col[u] * s2;
                    }
                }
                out
            }
        }
    }
}

/// Expected maximum of the sign field: n·√(2/π), the mean of Σ|Zᵢ|.
pub fn sign_field_expected_max(n: usize) -> f64 {
    n as f64 * (2.0 / std::f64::consts::PI).sqrt()
}

/// Diagnostics from loading a covariance file.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadReport {
    /// Largest |Σᵢⱼ − Σⱼᵢ| found (repaired by averaging when below tolerance).
    pub max_asymmetry: f64,
}

/// Parse the covariance text format.
///
/// Line 1 is `dense <m>` or `factor <m> <k>`, followed by m data rows
/// (m values per row for dense, k for factor). `#` starts a comment line.
/// Asymmetry up to 1e-6 is repaired by averaging; beyond that it is rejected.
pub fn parse_covariance(text: &str) -> Result<(FieldModel, LoadReport)> {
    let mut lines = text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.trim_end_matches('\r');
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            None
        } else {
            Some((i + 1, trimmed))
        }
    });

    let (header_line, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, msg: "empty covariance file".into() })?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let parse_dim = |tok: &str, what: &str| -> Result<usize> {
        tok.parse::<usize>().map_err(|_| Error::Parse {
            line: header_line,
            msg: format!("invalid {what} `{tok}`"),
        })
    };

    enum Kind {
        Dense(usize),
        Factor(usize, usize),
    }
    let kind = match tokens.as_slice() {
        ["dense", m] => Kind::Dense(parse_dim(m, "size")?),
        ["factor", m, k] => Kind::Factor(parse_dim(m, "size")?, parse_dim(k, "rank")?),
        _ => {
            return Err(Error::Parse {
                line: header_line,
                msg: format!("expected `dense <m>` or `factor <m> <k>`, got `{header}`"),
            })
        }
    };
    let (rows, cols) = match kind {
        Kind::Dense(m) => (m, m),
        Kind::Factor(m, k) => (m, k),
    };
    if rows == 0 {
        return Err(Error::Parse {
            line: header_line,
            msg: "declared size must be >= 1".into(),
        });
    }

    let mut data = Vec::with_capacity(rows * cols);
    let mut last_line = header_line;
    for r in 0..rows {
        let (line_no, line) = lines.next().ok_or_else(|| Error::Parse {
            line: last_line + 1,
            msg: format!("expected {rows} data rows, file ended after {r}"),
        })?;
        last_line = line_no;
        let values: Vec<&str> = line.split_whitespace().collect();
        if values.len() != cols {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {cols} values in row, got {}", values.len()),
            });
        }
        for tok in values {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid number `{tok}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite value `{tok}`"),
                });
            }
            data.push(v);
        }
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(Error::Parse {
            line: line_no,
            msg: "unexpected data after the declared rows".into(),
        });
    }

    let mut report = LoadReport::default();
    let (rep, sigma_max_sq) = match kind {
        Kind::Dense(m) => {
            let mut mat = DMatrix::from_row_slice(m, m, &data);
            let mut max_asym: f64 = 0.0;
            for i in 0..m {
                for j in (i + 1)..m {
                    max_asym = max_asym.max((mat[(i, j)] - mat[(j, i)]).abs());
                }
            }
            if max_asym > SYMMETRY_TOLERANCE {
                return Err(Error::Validation(format!(
                    "covariance asymmetry {max_asym:e} exceeds tolerance {SYMMETRY_TOLERANCE:e}"
                )));
            }
            if max_asym > 0.0 {
                let repaired = (&mat + mat.transpose()) * 0.5;
                mat = repaired;
            }
            report.max_asymmetry = max_asym;
            let smax = (0..m).map(|i| mat[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
            (Representation::Dense(Arc::new(mat)), smax)
        }
        Kind::Factor(m, k) => {
            let a = DMatrix::from_row_slice(m, k, &data);
            let smax = (0..m)
                .map(|i| a.row(i).norm_squared())
                .fold(f64::NEG_INFINITY, f64::max);
            (Representation::Factor(Arc::new(a)), smax)
        }
    };

    let model = FieldModel {
        id: next_model_id(),
        index_set: IndexSet::plain(rows),
        rep,
        sigma_max_sq,
        effective_n: (rows as f64).ln(),
        lambda: std::f64::consts::E,
        degenerate: sigma_max_sq <= 0.0,
        normalized: false,
        scale_applied: 1.0,
    };
    Ok((model, report))
}

/// Dense model straight from a covariance matrix (no file round trip).
pub fn model_from_dense(matrix: DMatrix<f64>) -> Result<FieldModel> {
    let n = matrix.nrows();
    if n == 0 || matrix.ncols() != n {
        return Err(Error::invalid("covariance matrix must be square and nonempty"));
    }
    let smax = (0..n).map(|i| matrix[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
    Ok(FieldModel {
        id: next_model_id(),
        index_set: IndexSet::plain(n),
        rep: Representation::Dense(Arc::new(matrix)),
        sigma_max_sq: smax,
        effective_n: (n as f64).ln(),
        lambda: std::f64::consts::E,
        degenerate: smax <= 0.0,
        normalized: false,
        scale_applied: 1.0,
    })
}
