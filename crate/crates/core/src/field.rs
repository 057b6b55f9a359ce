//! Uniform-grid representation of nonnegative functions on the truncated
//! box [-L, L]^n, with trapezoid quadrature, the second-order Laplacian
//! stencil and the gradient energy ∫ |∇ u^{k/2}|² dx.
//!
//! All reductions run over a fixed pairwise tree, so identical inputs give
//! bit-identical integrals.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reduce::pairwise_sum;
use crate::scalar::{real, Real};

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("unsupported dimension {0}: expected 1, 2 or 3")]
    UnsupportedDimension(usize),
    #[error("grid needs at least 3 points per axis, got {0}")]
    TooFewPoints(usize),
    #[error("half-width must be positive and finite, got {0}")]
    BadHalfWidth(f64),
    #[error("constant initial data is incompatible with Dirichlet0 boundaries")]
    ConstantOnDirichlet,
    #[error("invalid initial data: {0}")]
    BadInitialData(String),
    #[error("field value at index {index} is {value}; values must be nonnegative and finite")]
    BadValue { index: usize, value: f64 },
    #[error("value count {got} does not match grid size {expect}")]
    WrongLength { got: usize, expect: usize },
    #[error("exponent k must be >= 1, got {0}")]
    BadExponent(f64),
    #[error("quadrature produced a non-finite value")]
    NonFinite,
    #[error("malformed field dump: {0}")]
    MalformedDump(String),
}

/// Far-field model on the truncated box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    /// Solution pinned to zero on the box boundary (default far-field model).
    Dirichlet0,
    /// x = -L identified with x = L; exists to enable exact ODE-reduction
    /// oracles, where uniform data makes the Laplacian vanish.
    Periodic,
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryKind::Dirichlet0 => write!(f, "dirichlet0"),
            BoundaryKind::Periodic => write!(f, "periodic"),
        }
    }
}

impl FromStr for BoundaryKind {
    type Err = FieldError;
    fn from_str(s: &str) -> Result<Self, FieldError> {
        match s {
            "dirichlet0" => Ok(BoundaryKind::Dirichlet0),
            "periodic" => Ok(BoundaryKind::Periodic),
            other => Err(FieldError::MalformedDump(format!("unknown bc {other:?}"))),
        }
    }
}

/// Uniform grid on [-L, L]^n with spacing h = 2L/(m-1).
///
/// Periodic grids identify x = L with x = -L and carry m-1 distinct points
/// per axis; Dirichlet grids carry all m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    pub n: usize,
    pub half_width: T,
    pub points_per_axis: usize,
    pub bc: BoundaryKind,
}

impl<T: Real> Grid<T> {
    pub fn new(
        n: usize,
        half_width: T,
        points_per_axis: usize,
        bc: BoundaryKind,
    ) -> Result<Self, FieldError> {
        if !(1..=3).contains(&n) {
            return Err(FieldError::UnsupportedDimension(n));
        }
        if points_per_axis < 3 {
            return Err(FieldError::TooFewPoints(points_per_axis));
        }
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(FieldError::BadHalfWidth(
                half_width.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(Grid {
            n,
            half_width,
            points_per_axis,
            bc,
        })
    }

    pub fn spacing(&self) -> T {
        real::<T>(2.0) * self.half_width / real(self.points_per_axis as f64 - 1.0)
    }

    /// Distinct points per axis.
    pub fn axis_points(&self) -> usize {
        match self.bc {
            BoundaryKind::Dirichlet0 => self.points_per_axis,
            BoundaryKind::Periodic => self.points_per_axis - 1,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.axis_points().pow(self.n as u32)
    }

    /// Row-major strides; axis 0 is the slowest.
    pub fn strides(&self) -> [usize; 3] {
        let npts = self.axis_points();
        let mut s = [0usize; 3];
        for a in 0..self.n {
            s[a] = npts.pow((self.n - 1 - a) as u32);
        }
        s
    }

    pub fn axis_index(&self, node: usize, axis: usize) -> usize {
        (node / self.strides()[axis]) % self.axis_points()
    }

    pub fn coord(&self, i: usize) -> T {
        -self.half_width + real::<T>(i as f64) * self.spacing()
    }

    /// Coordinates of a node (unused axes zero).
    pub fn position(&self, node: usize) -> [T; 3] {
        let mut x = [T::zero(); 3];
        for a in 0..self.n {
            x[a] = self.coord(self.axis_index(node, a));
        }
        x
    }

    /// Per-axis quadrature weights: trapezoid on Dirichlet0, uniform on
    /// Periodic. Matching the second-order stencil keeps the discrete
    /// Hölder inequality exact.
    pub fn axis_weights(&self) -> Vec<T> {
        let h = self.spacing();
        let npts = self.axis_points();
        match self.bc {
            BoundaryKind::Periodic => vec![h; npts],
            BoundaryKind::Dirichlet0 => {
                let mut w = vec![h; npts];
                let half = h / real(2.0);
                w[0] = half;
                w[npts - 1] = half;
                w
            }
        }
    }

    /// Quadrature weight of a node.
    pub fn node_weight(&self, node: usize, axis_weights: &[T]) -> T {
        let mut w = T::one();
        for a in 0..self.n {
            w = w * axis_weights[self.axis_index(node, a)];
        }
        w
    }

    /// (2L)^n.
    pub fn volume(&self) -> T {
        let side = real::<T>(2.0) * self.half_width;
        let mut v = T::one();
        for _ in 0..self.n {
            v = v * side;
        }
        v
    }
}

/// Initial data variants; all sampled pointwise by [`make_field`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialData<T> {
    /// A · exp(-|x - c|²/w²)
    Gaussian {
        amplitude: T,
        #[serde(default = "Vec::new")]
        center: Vec<T>,
        width: T,
    },
    /// Smooth compactly supported bump with peak A at the center:
    /// A · exp(1 - r²/(r² - |x - c|²)) inside |x - c| < r, zero outside.
    Bump {
        amplitude: T,
        #[serde(default = "Vec::new")]
        center: Vec<T>,
        radius: T,
    },
    /// Uniform value; Periodic grids only.
    Constant { value: T },
    Sum { parts: Vec<InitialData<T>> },
}

impl<T: Real> InitialData<T> {
    fn contains_constant(&self) -> bool {
        match self {
            InitialData::Constant { .. } => true,
            InitialData::Sum { parts } => parts.iter().any(InitialData::contains_constant),
            _ => false,
        }
    }

    fn validate(&self, n: usize) -> Result<(), FieldError> {
        let check_center = |center: &Vec<T>| {
            if !center.is_empty() && center.len() != n {
                return Err(FieldError::BadInitialData(format!(
                    "center has {} entries for an n = {n} grid",
                    center.len()
                )));
            }
            if center.iter().any(|c| !c.is_finite()) {
                return Err(FieldError::BadInitialData("non-finite center".into()));
            }
            Ok(())
        };
        let finite_nonneg = |name: &str, x: T| {
            if !x.is_finite() || x < T::zero() {
                return Err(FieldError::BadInitialData(format!(
                    "{name} = {} must be finite and nonnegative",
                    x.to_f64().unwrap_or(f64::NAN)
                )));
            }
            Ok(())
        };
        match self {
            InitialData::Gaussian {
                amplitude,
                center,
                width,
            } => {
                finite_nonneg("amplitude", *amplitude)?;
                check_center(center)?;
                if !(*width > T::zero()) || !width.is_finite() {
                    return Err(FieldError::BadInitialData("width must be positive".into()));
                }
            }
            InitialData::Bump {
                amplitude,
                center,
                radius,
            } => {
                finite_nonneg("amplitude", *amplitude)?;
                check_center(center)?;
                if !(*radius > T::zero()) || !radius.is_finite() {
                    return Err(FieldError::BadInitialData("radius must be positive".into()));
                }
            }
            InitialData::Constant { value } => finite_nonneg("value", *value)?,
            InitialData::Sum { parts } => {
                for p in parts {
                    p.validate(n)?;
                }
            }
        }
        Ok(())
    }

    fn eval(&self, x: &[T; 3], n: usize) -> T {
        let dist2 = |center: &Vec<T>| {
            let mut d2 = T::zero();
            for a in 0..n {
                let c = center.get(a).copied().unwrap_or_else(T::zero);
                d2 = d2 + (x[a] - c) * (x[a] - c);
            }
            d2
        };
        match self {
            InitialData::Gaussian {
                amplitude,
                center,
                width,
            } => *amplitude * (-dist2(center) / (*width * *width)).exp(),
            InitialData::Bump {
                amplitude,
                center,
                radius,
            } => {
                let r2 = *radius * *radius;
                let d2 = dist2(center);
                if d2 < r2 {
                    *amplitude * (T::one() - r2 / (r2 - d2)).exp()
                } else {
                    T::zero()
                }
            }
            InitialData::Constant { value } => *value,
            InitialData::Sum { parts } => {
                let mut acc = T::zero();
                for p in parts {
                    acc = acc + p.eval(x, n);
                }
                acc
            }
        }
    }

    fn truncation_warnings(&self, grid: &Grid<T>, out: &mut Vec<String>) {
        if let InitialData::Bump {
            amplitude,
            center,
            radius,
        } = self
        {
            if *amplitude > T::zero() {
                // squared distance from the center to the box
                let mut d2 = T::zero();
                for a in 0..grid.n {
                    let c = center.get(a).copied().unwrap_or_else(T::zero);
                    let excess = (c.abs() - grid.half_width).max(T::zero());
                    d2 = d2 + excess * excess;
                }
                if d2 >= *radius * *radius {
                    out.push(
                        "bump support lies entirely outside the box; initial data truncated to zero"
                            .to_string(),
                    );
                }
            }
        }
        if let InitialData::Sum { parts } = self {
            for p in parts {
                p.truncation_warnings(grid, out);
            }
        }
    }
}

/// A discretized nonnegative function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    grid: Grid<T>,
    values: Vec<T>,
}

/// Result of sampling initial data onto a grid.
#[derive(Debug, Clone)]
pub struct FieldBuild<T> {
    pub field: Field<T>,
    pub warnings: Vec<String>,
}

/// Samples initial data pointwise; Dirichlet0 boundary entries are forced
/// to zero.
pub fn make_field<T: Real>(
    grid: &Grid<T>,
    init: &InitialData<T>,
) -> Result<FieldBuild<T>, FieldError> {
    if grid.bc == BoundaryKind::Dirichlet0 && init.contains_constant() {
        return Err(FieldError::ConstantOnDirichlet);
    }
    init.validate(grid.n)?;
    let total = grid.num_nodes();
    let npts = grid.axis_points();
    let mut values = Vec::with_capacity(total);
    for node in 0..total {
        let on_boundary = grid.bc == BoundaryKind::Dirichlet0
            && (0..grid.n).any(|a| {
                let i = grid.axis_index(node, a);
                i == 0 || i == npts - 1
            });
        if on_boundary {
            values.push(T::zero());
        } else {
            values.push(init.eval(&grid.position(node), grid.n));
        }
    }
    let mut warnings = Vec::new();
    init.truncation_warnings(grid, &mut warnings);
    Ok(FieldBuild {
        field: Field::from_values(*grid, values)?,
        warnings,
    })
}

impl<T: Real> Field<T> {
    /// Wraps raw values after validating nonnegativity and finiteness.
    pub fn from_values(grid: Grid<T>, values: Vec<T>) -> Result<Self, FieldError> {
        if values.len() != grid.num_nodes() {
            return Err(FieldError::WrongLength {
                got: values.len(),
                expect: grid.num_nodes(),
            });
        }
        for (index, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < T::zero() {
                return Err(FieldError::BadValue {
                    index,
                    value: v.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Field { grid, values })
    }

    pub fn zero(grid: Grid<T>) -> Self {
        Field {
            values: vec![T::zero(); grid.num_nodes()],
            grid,
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Unchecked mutable access for the stepper; callers must restore the
    /// nonnegativity invariant before handing the field back out.
    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub(crate) fn replace_values(&mut self, values: Vec<T>) {
        debug_assert_eq!(values.len(), self.grid.num_nodes());
        self.values = values;
    }
}

/// Quadrature of ∫ u^k dx over the box; k >= 1, real exponents allowed,
/// 0^k = 0.
pub fn integral_power<T: Real>(f: &Field<T>, k: T) -> Result<T, FieldError> {
    if !(k >= T::one()) {
        return Err(FieldError::BadExponent(k.to_f64().unwrap_or(f64::NAN)));
    }
    let grid = f.grid();
    let aw = grid.axis_weights();
    let values = f.values();
    let one = T::one();
    let sum = pairwise_sum(0, values.len(), &|node| {
        let u = values[node];
        let powed = if k == one { u } else { u.powf(k) };
        powed * grid.node_weight(node, &aw)
    });
    if !sum.is_finite() {
        return Err(FieldError::NonFinite);
    }
    Ok(sum)
}

/// Mass ∫ u dx restricted to the outer shell where max_a |x_a| >= frac · L;
/// the truncation diagnostic.
pub fn shell_mass<T: Real>(f: &Field<T>, frac: T) -> T {
    let grid = f.grid();
    let aw = grid.axis_weights();
    let values = f.values();
    let cut = frac * grid.half_width;
    pairwise_sum(0, values.len(), &|node| {
        let x = grid.position(node);
        let r = (0..grid.n).fold(T::zero(), |acc, a| acc.max(x[a].abs()));
        if r >= cut {
            values[node] * grid.node_weight(node, &aw)
        } else {
            T::zero()
        }
    })
}

/// Max of the values (the k = ∞ member of the norm family).
pub fn sup_norm<T: Real>(f: &Field<T>) -> T {
    f.values().iter().fold(T::zero(), |acc, &v| acc.max(v))
}

/// Second-order central Laplacian; Dirichlet0 uses zero ghost values,
/// Periodic wraps. Entries may be signed.
pub fn laplacian_apply<T: Real>(f: &Field<T>) -> Vec<T> {
    let mut out = vec![T::zero(); f.values().len()];
    laplacian_into(f.grid(), f.values(), &mut out);
    out
}

/// Stencil application on raw (possibly signed) values; shared with the
/// implicit solver.
pub(crate) fn laplacian_into<T: Real>(grid: &Grid<T>, values: &[T], out: &mut [T]) {
    let npts = grid.axis_points();
    let strides = grid.strides();
    let h = grid.spacing();
    let inv_h2 = T::one() / (h * h);
    let two = real::<T>(2.0);
    for (node, slot) in out.iter_mut().enumerate() {
        let center = values[node];
        let mut acc = T::zero();
        for a in 0..grid.n {
            let ia = grid.axis_index(node, a);
            let left = if ia > 0 {
                values[node - strides[a]]
            } else {
                match grid.bc {
                    BoundaryKind::Dirichlet0 => T::zero(),
                    BoundaryKind::Periodic => values[node + (npts - 1) * strides[a]],
                }
            };
            let right = if ia + 1 < npts {
                values[node + strides[a]]
            } else {
                match grid.bc {
                    BoundaryKind::Dirichlet0 => T::zero(),
                    BoundaryKind::Periodic => values[node - (npts - 1) * strides[a]],
                }
            };
            acc = acc + (left - two * center + right) * inv_h2;
        }
        *slot = acc;
    }
}

/// Quadrature of ∫ |∇ u^{k/2}|² dx: forward differences of u^{k/2} across
/// grid edges, cell weight h along the edge axis and trapezoid weights
/// transversally.
pub fn gradient_power_energy<T: Real>(f: &Field<T>, k: T) -> T {
    let grid = f.grid();
    let values = f.values();
    let npts = grid.axis_points();
    let strides = grid.strides();
    let h = grid.spacing();
    let aw = grid.axis_weights();
    let half_k = k / real(2.0);
    let one = T::one();
    let v: Vec<T> = values
        .iter()
        .map(|&u| if half_k == one { u } else { u.powf(half_k) })
        .collect();

    let edges_per_axis = match grid.bc {
        BoundaryKind::Dirichlet0 => npts - 1,
        BoundaryKind::Periodic => npts,
    };
    let mut acc = T::zero();
    for a in 0..grid.n {
        // Edge lattice along axis a: edges_per_axis cells on axis a, full
        // node range transversally.
        let mut dims = [1usize; 3];
        for b in 0..grid.n {
            dims[b] = if b == a { edges_per_axis } else { npts };
        }
        let count: usize = dims[..grid.n].iter().product();
        let axis_sum = pairwise_sum(0, count, &|edge| {
            // decompose the edge index over `dims` (row-major like nodes)
            let mut rem = edge;
            let mut idx = [0usize; 3];
            for b in (0..grid.n).rev() {
                idx[b] = rem % dims[b];
                rem /= dims[b];
            }
            let mut node = 0usize;
            for b in 0..grid.n {
                node += idx[b] * strides[b];
            }
            let ia = idx[a];
            let neighbor = if ia + 1 < npts {
                node + strides[a]
            } else {
                node - (npts - 1) * strides[a] // periodic wrap
            };
            let diff = (v[neighbor] - v[node]) / h;
            let mut w = h; // cell width along the edge axis
            for b in 0..grid.n {
                if b != a {
                    w = w * aw[idx[b]];
                }
            }
            diff * diff * w
        });
        acc = acc + axis_sum;
    }
    acc
}

impl<T: Real> Field<T> {
    /// Writes the snapshot as a CSV dump: header `n,L,m,bc`, then one value
    /// per line in row-major order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let g = &self.grid;
        writeln!(w, "{},{},{},{}", g.n, g.half_width, g.points_per_axis, g.bc)?;
        for v in &self.values {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Field<T>, FieldError> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| FieldError::MalformedDump("empty dump".into()))?
            .map_err(|e| FieldError::MalformedDump(e.to_string()))?;
        let parts: Vec<&str> = header.trim().split(',').collect();
        if parts.len() != 4 {
            return Err(FieldError::MalformedDump(format!(
                "header must be `n,L,m,bc`, got {header:?}"
            )));
        }
        let parse_f = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| FieldError::MalformedDump(format!("bad number {s:?}: {e}")))
        };
        let n: usize = parts[0]
            .parse()
            .map_err(|e| FieldError::MalformedDump(format!("bad n: {e}")))?;
        let half_width = real::<T>(parse_f(parts[1])?);
        let m: usize = parts[2]
            .parse()
            .map_err(|e| FieldError::MalformedDump(format!("bad m: {e}")))?;
        let bc: BoundaryKind = parts[3].trim().parse()?;
        let grid = Grid::new(n, half_width, m, bc)?;
        let mut values = Vec::with_capacity(grid.num_nodes());
        for line in lines {
            let line = line.map_err(|e| FieldError::MalformedDump(e.to_string()))?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            values.push(real::<T>(parse_f(t)?));
        }
        Field::from_values(grid, values)
    }
}
