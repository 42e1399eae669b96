//! Discrete Black-Scholes operator on the grid and the reduced least-squares
//! system obtained after eliminating the prescribed boundary and initial values.
//!
//! The operator is assembled as
//!
//! ```text
//! L = D_t ⊗ I + R (I ⊗ D_ss)
//! ```
//!
//! where `D_t` is the backward time difference, `D_ss` the central second
//! difference in price and `R = diag(sigma(t_j)^2 / 2 * s_i^2)`. Each interior
//! row of `L` evaluates the four-point stencil on `(i, j)`, `(i ± 1, j)` and
//! `(i, j - 1)`. Rows on the boundary (`j = 0`, `i = 0`, `i = m - 1`) are zeroed
//! so that the residual only covers interior points.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::grid::{tabulate_f, BoundaryData, GridSpec};
use crate::sparse::{kron, SparseMatrix};

/// Backward difference in time; row 0 is empty.
pub fn build_dt(m: usize, dt: f64) -> SparseMatrix {
    let inv = 1.0 / dt;
    let entries = (1..m).flat_map(|r| [(r, r - 1, -inv), (r, r, inv)]);
    SparseMatrix::from_triplets(m, m, entries).expect("stencil coordinates are distinct")
}

/// Central second difference in price; first and last rows are empty.
pub fn build_dss(m: usize, ds: f64) -> SparseMatrix {
    let inv = 1.0 / (ds * ds);
    let entries = (1..m.saturating_sub(1))
        .flat_map(|r| [(r, r - 1, inv), (r, r, -2.0 * inv), (r, r + 1, inv)]);
    SparseMatrix::from_triplets(m, m, entries).expect("stencil coordinates are distinct")
}

/// Diagonal of `sigma(t_j)^2 / 2 * s_i^2` in serialized order.
pub fn diffusion_coefficients(spec: &GridSpec, bd: &BoundaryData) -> Vec<f64> {
    (0..spec.len())
        .map(|k| {
            let (i, j) = spec.coords(k);
            let sigma = bd.sigma(spec.t(j));
            let s = spec.s(i);
            0.5 * sigma * sigma * s * s
        })
        .collect()
}

pub fn build_r(spec: &GridSpec, bd: &BoundaryData) -> SparseMatrix {
    SparseMatrix::diagonal(&diffusion_coefficients(spec, bd))
}

/// The full `m^2 x m^2` operator with boundary rows zeroed.
pub fn build_l(spec: &GridSpec, bd: &BoundaryData) -> SparseMatrix {
    let m = spec.m;
    let eye = SparseMatrix::identity(m);
    let time = kron(&build_dt(m, spec.dt()), &eye);
    let space = kron(&eye, &build_dss(m, spec.ds()))
        .scale_rows(&diffusion_coefficients(spec, bd))
        .expect("diagonal has m^2 entries");
    time.add(&space)
        .expect("both terms are m^2 x m^2")
        .zero_rows(|k| {
            let (i, j) = spec.coords(k);
            spec.is_boundary(i, j)
        })
}

/// Correspondence between full grid indices and interior unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexMap {
    pub full_to_reduced: Vec<Option<usize>>,
    pub reduced_to_full: Vec<usize>,
}

impl IndexMap {
    pub fn interior(spec: &GridSpec) -> Self {
        let mut full_to_reduced = vec![None; spec.len()];
        let mut reduced_to_full = Vec::with_capacity((spec.m - 1) * (spec.m - 2));
        for (k, slot) in full_to_reduced.iter_mut().enumerate() {
            let (i, j) = spec.coords(k);
            if !spec.is_boundary(i, j) {
                *slot = Some(reduced_to_full.len());
                reduced_to_full.push(k);
            }
        }
        Self {
            full_to_reduced,
            reduced_to_full,
        }
    }

    pub fn reduced_len(&self) -> usize {
        self.reduced_to_full.len()
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.reduced_to_full.iter().map(|&k| full[k]).collect()
    }
}

/// Reduced system `L u = b` over the interior unknowns together with the
/// regularization target and everything needed to rebuild the full grid.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub spec: GridSpec,
    pub l: SparseMatrix,
    pub b: Vec<f64>,
    pub f: Vec<f64>,
    /// Prescribed values on the boundary, zero in the interior.
    pub u_bd: Vec<f64>,
    pub map: IndexMap,
    /// Cumulative factor each row has been divided by (1 before normalization).
    pub row_norms: Vec<f64>,
}

impl AssembledSystem {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// Full serialized grid: prescribed values on the boundary, `u` inside.
    pub fn scatter(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: u.len(),
            });
        }
        let mut full = self.u_bd.clone();
        for (&k, &v) in self.map.reduced_to_full.iter().zip(u) {
            full[k] = v;
        }
        Ok(full)
    }

    /// Writes `L`, `b` and `F` as plain text: a `# N_r=<n>` header, then
    /// `row col value` triplets, then `# b` and `# F` sections of `row value`.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# N_r={}", self.len())?;
        writeln!(w, "# L")?;
        for (r, c, v) in self.l.triplets() {
            writeln!(w, "{r} {c} {v:e}")?;
        }
        writeln!(w, "# b")?;
        for (r, v) in self.b.iter().enumerate() {
            writeln!(w, "{r} {v:e}")?;
        }
        writeln!(w, "# F")?;
        for (r, v) in self.f.iter().enumerate() {
            writeln!(w, "{r} {v:e}")?;
        }
        Ok(())
    }
}

/// Contents of a system dump.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpedSystem {
    pub l: SparseMatrix,
    pub b: Vec<f64>,
    pub f: Vec<f64>,
}

pub fn read_dump<R: BufRead>(r: R) -> Result<DumpedSystem> {
    #[derive(PartialEq)]
    enum Section {
        None,
        L,
        B,
        F,
    }
    let mut n: Option<usize> = None;
    let mut section = Section::None;
    let mut triplets = Vec::new();
    let (mut b, mut f) = (Vec::new(), Vec::new());
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let bad = |msg: &str| Error::Parse {
            line: lineno,
            msg: msg.to_string(),
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("N_r=") {
                let nr: usize = v.parse().map_err(|_| bad("bad N_r header"))?;
                b = vec![0.0; nr];
                f = vec![0.0; nr];
                n = Some(nr);
            } else {
                section = match rest {
                    "L" => Section::L,
                    "b" => Section::B,
                    "F" => Section::F,
                    _ => return Err(bad("unknown section")),
                };
            }
            continue;
        }
        let nr = n.ok_or_else(|| bad("missing `# N_r=` header"))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let idx_at = |k: usize| -> Result<usize> {
            let v: usize = fields[k].parse().map_err(|_| bad("bad index"))?;
            if v < nr {
                Ok(v)
            } else {
                Err(bad("index out of range"))
            }
        };
        let val = |s: &str| -> Result<f64> { s.parse().map_err(|_| bad("bad value")) };
        match (&section, fields.len()) {
            (Section::L, 3) => triplets.push((idx_at(0)?, idx_at(1)?, val(fields[2])?)),
            (Section::B, 2) => b[idx_at(0)?] = val(fields[1])?,
            (Section::F, 2) => f[idx_at(0)?] = val(fields[1])?,
            _ => return Err(bad("unexpected line")),
        }
    }
    let nr = n.ok_or(Error::Parse {
        line: 0,
        msg: "missing `# N_r=` header".into(),
    })?;
    Ok(DumpedSystem {
        l: SparseMatrix::from_triplets(nr, nr, triplets)?,
        b,
        f,
    })
}

/// Moves the prescribed values to the right-hand side (`L u = -L u_bd`) and
/// keeps only the interior rows and columns.
pub fn reduce_system(
    l: &SparseMatrix,
    spec: &GridSpec,
    bd: &BoundaryData,
) -> Result<AssembledSystem> {
    if l.rows() != spec.len() || l.cols() != spec.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.len(),
            got: l.rows(),
        });
    }
    let f_full = tabulate_f(spec, bd).values;
    let map = IndexMap::interior(spec);
    // F matches u_b, u_a and f exactly on the boundary, corners included.
    let u_bd: Vec<f64> = f_full
        .iter()
        .zip(&map.full_to_reduced)
        .map(|(&v, r)| if r.is_none() { v } else { 0.0 })
        .collect();
    let b_full: Vec<f64> = l.matvec(&u_bd)?.into_iter().map(|v| -v).collect();
    let nr = map.reduced_len();
    Ok(AssembledSystem {
        spec: *spec,
        l: l.select(&map.reduced_to_full, &map.full_to_reduced, nr),
        b: map.restrict(&b_full),
        f: map.restrict(&f_full),
        u_bd,
        map,
        row_norms: vec![1.0; nr],
    })
}

/// Divides every nonzero row of `L` and the matching entry of `b` by the
/// row's Euclidean norm. Empty rows are left alone.
pub fn normalize_rows(sys: &AssembledSystem) -> AssembledSystem {
    let norms: Vec<f64> = (0..sys.l.rows()).map(|r| sys.l.row_norm(r)).collect();
    let inv: Vec<f64> = norms
        .iter()
        .map(|&n| if n > 0.0 { 1.0 / n } else { 1.0 })
        .collect();
    let mut out = sys.clone();
    out.l = sys.l.scale_rows(&inv).expect("one factor per row");
    out.b = sys.b.iter().zip(&inv).map(|(b, s)| b * s).collect();
    out.row_norms = sys
        .row_norms
        .iter()
        .zip(&norms)
        .map(|(&prev, &n)| if n > 0.0 { prev * n } else { 0.0 })
        .collect();
    out
}

/// Grid, operator and reduction in one step.
pub fn assemble(
    spec: &GridSpec,
    bd: &BoundaryData,
    row_normalize: bool,
) -> Result<AssembledSystem> {
    let sys = reduce_system(&build_l(spec, bd), spec, bd)?;
    Ok(if row_normalize {
        normalize_rows(&sys)
    } else {
        sys
    })
}
