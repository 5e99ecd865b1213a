//! Boxes, the cells of their normal manifold, tangent cones, and piecewise
//! linear maps on orthant-type conical subdivisions.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::dense::numerical_rank;
use crate::error::{Error, Result};
use crate::gauss::SubspaceBasis;
use crate::normal_map::{solve_box_normal_map, AffineOperator, NewtonOptions};

/// Product of closed intervals `[l_j, u_j]`; bounds may be infinite.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), found: upper.len() });
        }
        for (j, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY || l > u {
                return Err(Error::InvalidBox(format!("coordinate {j} has bounds [{l}, {u}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The nonnegative orthant ℝⁿ₊.
    pub fn orthant(n: usize) -> Self {
        Self { lower: vec![0.0; n], upper: vec![f64::INFINITY; n] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn is_orthant(&self) -> bool {
        self.lower.iter().all(|&l| l == 0.0) && self.upper.iter().all(|&u| u == f64::INFINITY)
    }

    /// Every bound is 0 or infinite.
    pub fn is_cone(&self) -> bool {
        self.lower.iter().all(|&l| l == 0.0 || l == f64::NEG_INFINITY)
            && self.upper.iter().all(|&u| u == 0.0 || u == f64::INFINITY)
    }

    pub fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(z.len(), |j, _| z[j].clamp(self.lower[j], self.upper[j]))
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.iter()
            .enumerate()
            .all(|(j, &v)| v >= self.lower[j] - tol && v <= self.upper[j] + tol)
    }

    /// Coordinates where the projection acts as the identity near `z`.
    pub fn inside_pattern(&self, z: &DVector<f64>) -> Vec<bool> {
        z.iter()
            .enumerate()
            .map(|(j, &v)| v > self.lower[j] && v < self.upper[j])
            .collect()
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: n });
        }
        Ok(())
    }
}

/// Position of one coordinate relative to its interval. A cell of the normal
/// manifold of a box is a product of these per-coordinate pieces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoordState {
    /// `z_j < l_j`.
    Below,
    /// `z_j = l_j`.
    AtLower,
    /// `l_j < z_j < u_j`.
    Inside,
    /// `z_j = u_j`.
    AtUpper,
    /// `z_j > u_j`.
    Above,
    /// `l_j = u_j`; the whole line is one piece.
    Fixed,
}

impl CoordState {
    pub fn is_pinned(self) -> bool {
        matches!(self, CoordState::AtLower | CoordState::AtUpper)
    }

    pub fn token(self) -> &'static str {
        match self {
            CoordState::Below => "MINUS",
            CoordState::AtLower => "ZERO",
            CoordState::Inside => "PLUS",
            CoordState::AtUpper => "UPPER",
            CoordState::Above => "ABOVE",
            CoordState::Fixed => "FIXED",
        }
    }
}

impl fmt::Display for CoordState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Relatively open cell of the normal manifold of a box.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Cell {
    states: Vec<CoordState>,
}

impl Cell {
    pub fn new(states: Vec<CoordState>) -> Self {
        Self { states }
    }

    pub fn states(&self) -> &[CoordState] {
        &self.states
    }

    pub fn ambient_dim(&self) -> usize {
        self.states.len()
    }

    pub fn dim(&self) -> usize {
        self.states.iter().filter(|s| !s.is_pinned()).count()
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.ambient_dim()
    }

    pub fn pinned(&self) -> Vec<usize> {
        (0..self.states.len()).filter(|&j| self.states[j].is_pinned()).collect()
    }

    pub fn unpinned(&self) -> Vec<usize> {
        (0..self.states.len()).filter(|&j| !self.states[j].is_pinned()).collect()
    }

    /// Linear span of `C - C`.
    pub fn parallel_subspace(&self) -> SubspaceBasis {
        SubspaceBasis::coordinates(self.ambient_dim(), &self.unpinned()).expect("distinct coordinates")
    }

    /// Derivative of the projection on this cell (true where it is the identity).
    pub fn inside_selector(&self) -> Vec<bool> {
        self.states.iter().map(|&s| s == CoordState::Inside).collect()
    }

    /// A representative point of the cell.
    pub fn anchor(&self, set: &BoxSet) -> DVector<f64> {
        DVector::from_fn(self.ambient_dim(), |j, _| {
            let (l, u) = (set.lower[j], set.upper[j]);
            match self.states[j] {
                CoordState::Below => l - 1.0,
                CoordState::AtLower | CoordState::Fixed => l,
                CoordState::AtUpper => u,
                CoordState::Above => u + 1.0,
                CoordState::Inside => match (l.is_finite(), u.is_finite()) {
                    (true, true) => 0.5 * (l + u),
                    (true, false) => l + 1.0,
                    (false, true) => u - 1.0,
                    (false, false) => 0.0,
                },
            }
        })
    }

    pub fn contains(&self, set: &BoxSet, z: &DVector<f64>, tol: f64) -> bool {
        cell_of_point(set, z, tol).map(|c| &c == self).unwrap_or(false)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, s) in self.states.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(s.token())?;
        }
        f.write_str(")")
    }
}

/// Default tolerance for classifying a point onto a face.
pub fn default_tolerance(z: &DVector<f64>) -> f64 {
    1e-12 * (1.0 + z.amax())
}

/// The cell whose relative interior contains `z`; coordinates within `tol`
/// of a finite bound are placed on it.
pub fn cell_of_point(set: &BoxSet, z: &DVector<f64>, tol: f64) -> Result<Cell> {
    set.check_dim(z.len())?;
    let states = z
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let (l, u) = (set.lower[j], set.upper[j]);
            if l == u {
                CoordState::Fixed
            } else if l.is_finite() && (v - l).abs() <= tol {
                CoordState::AtLower
            } else if u.is_finite() && (v - u).abs() <= tol {
                CoordState::AtUpper
            } else if v < l {
                CoordState::Below
            } else if v > u {
                CoordState::Above
            } else {
                CoordState::Inside
            }
        })
        .collect();
    Ok(Cell::new(states))
}

/// Largest number of pinned coordinates for which the full-dimensional cells
/// around a cell are listed explicitly.
pub const MAX_ENUMERATED_SWITCHES: usize = 20;

/// All full-dimensional cells whose closure contains `cell`.
pub fn n_cells_containing(set: &BoxSet, cell: &Cell) -> Result<Vec<Cell>> {
    set.check_dim(cell.ambient_dim())?;
    let pinned = cell.pinned();
    if pinned.len() > MAX_ENUMERATED_SWITCHES {
        return Err(Error::TooManyPieces { switching: pinned.len() });
    }
    let mut out = Vec::with_capacity(1 << pinned.len());
    for mask in 0u32..(1u32 << pinned.len()) {
        let mut states = cell.states.clone();
        for (bit, &j) in pinned.iter().enumerate() {
            let outer = mask & (1 << bit) != 0;
            states[j] = match (states[j], outer) {
                (CoordState::AtLower, true) => CoordState::Below,
                (CoordState::AtUpper, true) => CoordState::Above,
                _ => CoordState::Inside,
            };
        }
        out.push(Cell::new(states));
    }
    Ok(out)
}

/// Tangent cone `K₀ = T_S(x₀) ∩ (z₀ - x₀)^⊥` of a box, itself a box with
/// bounds in `{0, ±∞}`.
pub fn tangent_cone_k0(set: &BoxSet, x0: &DVector<f64>, z0: &DVector<f64>, tol: f64) -> Result<BoxSet> {
    set.check_dim(x0.len())?;
    set.check_dim(z0.len())?;
    let gap = (set.project(z0) - x0).amax();
    if gap > tol {
        return Err(Error::NotProjection { gap });
    }
    let n = set.dim();
    let mut lower = vec![f64::NEG_INFINITY; n];
    let mut upper = vec![f64::INFINITY; n];
    for j in 0..n {
        let (l, u) = (set.lower[j], set.upper[j]);
        let normal = z0[j] - x0[j];
        if l == u {
            lower[j] = 0.0;
            upper[j] = 0.0;
        } else if l.is_finite() && (x0[j] - l).abs() <= tol {
            lower[j] = 0.0;
            if normal < -tol {
                upper[j] = 0.0;
            }
        } else if u.is_finite() && (x0[j] - u).abs() <= tol {
            upper[j] = 0.0;
            if normal > tol {
                lower[j] = 0.0;
            }
        }
    }
    BoxSet::new(lower, upper)
}

/// Sign constraint on one coordinate of an orthant-type cone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    Free,
    NonNeg,
    NonPos,
}

impl Axis {
    fn admits(self, v: f64, tol: f64) -> bool {
        match self {
            Axis::Free => true,
            Axis::NonNeg => v >= -tol,
            Axis::NonPos => v <= tol,
        }
    }

    fn strictly_admits(self, v: f64, tol: f64) -> bool {
        match self {
            Axis::Free => true,
            Axis::NonNeg => v > tol,
            Axis::NonPos => v < -tol,
        }
    }
}

/// One linear piece: the map is `v ↦ M v` on the cone `K`.
#[derive(Clone, Debug)]
pub struct Piece {
    pub cone: Vec<Axis>,
    pub matrix: DMatrix<f64>,
}

impl Piece {
    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        self.cone.iter().zip(v.iter()).all(|(a, &x)| a.admits(x, tol))
    }
}

/// Identifies a piece of a [`PiecewiseLinearMap`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PieceKey {
    Index(usize),
    /// Per-coordinate derivative of the cone projection for a normal map.
    Pattern(Vec<bool>),
}

#[derive(Clone, Debug)]
enum Repr {
    Explicit(Vec<Piece>),
    NormalMap { linear: DMatrix<f64>, cone: BoxSet },
}

/// Continuous piecewise linear map given on an orthant-type conical subdivision.
#[derive(Clone, Debug)]
pub struct PiecewiseLinearMap {
    dim: usize,
    repr: Repr,
    lineality: SubspaceBasis,
}

/// Normal maps with at most this many switching coordinates have every
/// piece checked for singularity at construction.
pub const EAGER_VALIDATION_SWITCHES: usize = 12;

impl PiecewiseLinearMap {
    /// Build from explicitly listed pieces and check that they form a
    /// coherently oriented, continuous subdivision of ℝⁿ.
    pub fn explicit(pieces: Vec<Piece>) -> Result<Self> {
        let first = pieces.first().ok_or_else(|| Error::InvalidSubdivision("no pieces".into()))?;
        let n = first.cone.len();
        let mut det_sign = 0.0;
        for (i, p) in pieces.iter().enumerate() {
            if p.cone.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: p.cone.len() });
            }
            if p.matrix.nrows() != n || p.matrix.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, found: p.matrix.nrows() });
            }
            if numerical_rank(&p.matrix) < n {
                return Err(Error::SingularPiece { piece: i.to_string() });
            }
            let s = p.matrix.determinant().signum();
            if det_sign == 0.0 {
                det_sign = s;
            } else if s != det_sign {
                return Err(Error::InvalidSubdivision("pieces are not coherently oriented".into()));
            }
        }
        // Interiors must be disjoint and their solid angles must add up to ℝⁿ.
        let mut measure = 0.0;
        for (i, p) in pieces.iter().enumerate() {
            let split = p.cone.iter().filter(|&&a| a != Axis::Free).count();
            measure += 0.5f64.powi(split as i32);
            for (k, q) in pieces.iter().enumerate().skip(i + 1) {
                let separated = p.cone.iter().zip(&q.cone).any(|pair| {
                    matches!(pair, (Axis::NonNeg, Axis::NonPos) | (Axis::NonPos, Axis::NonNeg))
                });
                if !separated {
                    return Err(Error::InvalidSubdivision(format!("pieces {i} and {k} overlap")));
                }
                let opposite: Vec<usize> = (0..n)
                    .filter(|&j| {
                        matches!(
                            (p.cone[j], q.cone[j]),
                            (Axis::NonNeg, Axis::NonPos) | (Axis::NonPos, Axis::NonNeg)
                        )
                    })
                    .collect();
                if opposite.len() == 1 {
                    // Shared facet lies in {v_j = 0}; the maps must agree on it.
                    let j = opposite[0];
                    let scale = 1.0 + p.matrix.amax().max(q.matrix.amax());
                    for c in (0..n).filter(|&c| c != j) {
                        let diff = (p.matrix.column(c) - q.matrix.column(c)).amax();
                        if diff > 1e-9 * scale {
                            return Err(Error::InvalidSubdivision(format!(
                                "pieces {i} and {k} disagree on their common facet"
                            )));
                        }
                    }
                }
            }
        }
        if (measure - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSubdivision("pieces do not cover the space".into()));
        }
        let free: Vec<usize> = (0..n).filter(|&j| pieces.iter().all(|p| p.cone[j] == Axis::Free)).collect();
        let lineality = SubspaceBasis::coordinates(n, &free)?;
        Ok(Self { dim: n, repr: Repr::Explicit(pieces), lineality })
    }

    /// The normal map `v ↦ L Π_K(v) + v - Π_K(v)` of a box cone `K`.
    pub fn normal_map(linear: DMatrix<f64>, cone: &BoxSet) -> Result<Self> {
        let n = cone.dim();
        if linear.nrows() != n || linear.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: linear.nrows() });
        }
        if !cone.is_cone() {
            return Err(Error::InvalidBox("normal map pieces need a cone".into()));
        }
        let fixed: Vec<usize> = (0..n).filter(|&j| !is_switching(cone, j)).collect();
        let lineality = SubspaceBasis::coordinates(n, &fixed)?;
        let map = Self { dim: n, repr: Repr::NormalMap { linear, cone: cone.clone() }, lineality };
        let switching = map.switching_coordinates();
        if switching.len() <= EAGER_VALIDATION_SWITCHES {
            for key in map.piece_keys()? {
                let m = map.matrix(&key);
                if numerical_rank(&m) < n {
                    return Err(Error::SingularPiece { piece: pattern_label(&key) });
                }
            }
        }
        Ok(map)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Largest subspace contained in every cone of the subdivision.
    pub fn lineality(&self) -> &SubspaceBasis {
        &self.lineality
    }

    /// Coordinates along which the subdivision splits.
    pub fn switching_coordinates(&self) -> Vec<usize> {
        match &self.repr {
            Repr::Explicit(pieces) => {
                (0..self.dim).filter(|&j| pieces.iter().any(|p| p.cone[j] != Axis::Free)).collect()
            }
            Repr::NormalMap { cone, .. } => (0..self.dim).filter(|&j| is_switching(cone, j)).collect(),
        }
    }

    pub fn piece_keys(&self) -> Result<Vec<PieceKey>> {
        match &self.repr {
            Repr::Explicit(pieces) => Ok((0..pieces.len()).map(PieceKey::Index).collect()),
            Repr::NormalMap { cone, .. } => {
                let switching = self.switching_coordinates();
                if switching.len() > MAX_ENUMERATED_SWITCHES {
                    return Err(Error::TooManyPieces { switching: switching.len() });
                }
                let base: Vec<bool> = (0..self.dim).map(|j| cone.upper[j] > cone.lower[j]).collect();
                Ok((0u32..(1 << switching.len()))
                    .map(|mask| {
                        let mut pattern = base.clone();
                        for (bit, &j) in switching.iter().enumerate() {
                            pattern[j] = mask & (1 << bit) != 0;
                        }
                        PieceKey::Pattern(pattern)
                    })
                    .collect())
            }
        }
    }

    /// Explicit list of pieces, when small enough to enumerate.
    pub fn pieces(&self) -> Result<Vec<Piece>> {
        self.piece_keys()?.iter().map(|k| Ok(self.piece(k))).collect()
    }

    pub fn piece(&self, key: &PieceKey) -> Piece {
        match (&self.repr, key) {
            (Repr::Explicit(pieces), PieceKey::Index(i)) => pieces[*i].clone(),
            (Repr::NormalMap { cone, .. }, PieceKey::Pattern(pattern)) => {
                let axes = (0..self.dim)
                    .map(|j| {
                        if !is_switching(cone, j) {
                            Axis::Free
                        } else if (cone.lower[j] == 0.0) == pattern[j] {
                            Axis::NonNeg
                        } else {
                            Axis::NonPos
                        }
                    })
                    .collect();
                Piece { cone: axes, matrix: self.matrix(key) }
            }
            _ => panic!("piece key does not belong to this map"),
        }
    }

    pub fn matrix(&self, key: &PieceKey) -> DMatrix<f64> {
        match (&self.repr, key) {
            (Repr::Explicit(pieces), PieceKey::Index(i)) => pieces[*i].matrix.clone(),
            (Repr::NormalMap { linear, .. }, PieceKey::Pattern(pattern)) => normal_map_jacobian(linear, pattern),
            _ => panic!("piece key does not belong to this map"),
        }
    }

    /// The unique piece whose interior contains `v`. Points within `tol` of a
    /// splitting hyperplane are reported as ambiguous.
    pub fn locate(&self, v: &DVector<f64>, tol: f64) -> Result<PieceKey> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: v.len() });
        }
        let near: Vec<usize> =
            self.switching_coordinates().into_iter().filter(|&j| v[j].abs() <= tol).collect();
        if !near.is_empty() {
            return Err(Error::AmbiguousPiece { coords: near });
        }
        match &self.repr {
            Repr::Explicit(pieces) => pieces
                .iter()
                .position(|p| p.cone.iter().zip(v.iter()).all(|(a, &x)| a.strictly_admits(x, tol)))
                .map(PieceKey::Index)
                .ok_or_else(|| Error::InvalidSubdivision("point not covered by any piece".into())),
            Repr::NormalMap { cone, .. } => Ok(PieceKey::Pattern(cone.inside_pattern(v))),
        }
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.repr {
            Repr::Explicit(pieces) => {
                let p = pieces.iter().find(|p| p.contains(v, 0.0)).expect("pieces cover the space");
                &p.matrix * v
            }
            Repr::NormalMap { linear, cone } => {
                let x = cone.project(v);
                linear * &x + v - x
            }
        }
    }

    /// Solve `Γ(v) = y`.
    pub fn inverse_apply(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: y.len() });
        }
        match &self.repr {
            Repr::Explicit(pieces) => {
                let tol = 1e-12 * (1.0 + y.amax());
                for p in pieces {
                    if let Some(v) = p.matrix.clone().lu().solve(y) {
                        if p.contains(&v, tol * (1.0 + v.amax())) {
                            return Ok(v);
                        }
                    }
                }
                Err(Error::SingularSystem)
            }
            Repr::NormalMap { linear, cone } => {
                let op = AffineOperator::Dense(linear.clone());
                let sol = solve_box_normal_map(&op, &(-y), cone, None, &NewtonOptions::default())?;
                Ok(sol.z)
            }
        }
    }
}

fn is_switching(cone: &BoxSet, j: usize) -> bool {
    cone.lower[j] != cone.upper[j] && (cone.lower[j] == 0.0 || cone.upper[j] == 0.0)
}

fn pattern_label(key: &PieceKey) -> String {
    match key {
        PieceKey::Index(i) => i.to_string(),
        PieceKey::Pattern(p) => p.iter().map(|&b| if b { '1' } else { '0' }).collect(),
    }
}

/// `L D + I - D` with `D = diag(pattern)`.
pub fn normal_map_jacobian(linear: &DMatrix<f64>, pattern: &[bool]) -> DMatrix<f64> {
    let n = pattern.len();
    DMatrix::from_fn(n, n, |i, j| {
        if pattern[j] {
            linear[(i, j)]
        } else if i == j {
            1.0
        } else {
            0.0
        }
    })
}

/// The normal map of `linear` relative to the cone `K₀`, as a piecewise linear map.
pub fn normal_map_pieces(linear: DMatrix<f64>, k0: &BoxSet) -> Result<PiecewiseLinearMap> {
    PiecewiseLinearMap::normal_map(linear, k0)
}

/// Projection onto the affine hull of the face `C ∩ S` of a box.
#[derive(Clone, Debug)]
pub struct FaceProjection {
    /// The face, written with the same per-coordinate states as a cell.
    pub face: Cell,
    /// Coordinates that vary within the face.
    pub free: Vec<bool>,
    /// Value of each pinned coordinate; unused where `free` is set.
    pub values: Vec<f64>,
}

impl FaceProjection {
    /// Linear subspace parallel to the face.
    pub fn parallel_subspace(&self) -> SubspaceBasis {
        let coords: Vec<usize> = (0..self.free.len()).filter(|&j| self.free[j]).collect();
        SubspaceBasis::coordinates(self.free.len(), &coords).expect("distinct coordinates")
    }

    pub fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(z.len(), |j, _| if self.free[j] { z[j] } else { self.values[j] })
    }
}

/// `F̃ = C ∩ S` for a cell `C` of the normal manifold of `S`.
pub fn face_projection_data(set: &BoxSet, cell: &Cell) -> Result<FaceProjection> {
    set.check_dim(cell.ambient_dim())?;
    let n = set.dim();
    let mut states = Vec::with_capacity(n);
    let mut free = vec![false; n];
    let mut values = vec![0.0; n];
    for j in 0..n {
        let (l, u) = (set.lower[j], set.upper[j]);
        let (state, value) = match cell.states[j] {
            CoordState::Below | CoordState::AtLower => (CoordState::AtLower, l),
            CoordState::Above | CoordState::AtUpper => (CoordState::AtUpper, u),
            CoordState::Fixed => (CoordState::Fixed, l),
            CoordState::Inside => {
                free[j] = true;
                (CoordState::Inside, 0.0)
            }
        };
        states.push(state);
        values[j] = value;
    }
    Ok(FaceProjection { face: Cell::new(states), free, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn cells_of_orthant_points() {
        let s = BoxSet::orthant(3);
        let c = cell_of_point(&s, &v(&[1.0, 0.0, -2.0]), 1e-12).unwrap();
        assert_eq!(c.to_string(), "(PLUS, ZERO, MINUS)");
        assert_eq!(c.dim(), 2);
        assert_eq!(c.pinned(), vec![1]);
        assert!(c.contains(&s, &c.anchor(&s), 1e-12));
    }

    #[test]
    fn cells_of_general_box() {
        let s = BoxSet::new(vec![-1.0, 0.0, 2.0, f64::NEG_INFINITY], vec![1.0, 0.0, 5.0, 3.0]).unwrap();
        let c = cell_of_point(&s, &v(&[1.0, 7.0, 9.0, -4.0]), 1e-12).unwrap();
        assert_eq!(
            c.states(),
            &[CoordState::AtUpper, CoordState::Fixed, CoordState::Above, CoordState::Inside]
        );
        assert_eq!(c.dim(), 3);
        assert!(c.contains(&s, &c.anchor(&s), 1e-12));
    }

    #[test]
    fn invalid_boxes() {
        assert!(BoxSet::new(vec![1.0], vec![0.0]).is_err());
        assert!(BoxSet::new(vec![f64::NAN], vec![0.0]).is_err());
        assert!(BoxSet::new(vec![f64::INFINITY], vec![f64::INFINITY]).is_err());
        assert!(BoxSet::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn full_cells_around_a_face() {
        let s = BoxSet::orthant(2);
        let c = Cell::new(vec![CoordState::AtLower, CoordState::AtLower]);
        let cells = n_cells_containing(&s, &c).unwrap();
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(Cell::is_full));
        let c = Cell::new(vec![CoordState::AtLower, CoordState::Below]);
        let cells = n_cells_containing(&s, &c).unwrap();
        assert_eq!(cells.len(), 2);
        assert!(cells.contains(&Cell::new(vec![CoordState::Inside, CoordState::Below])));
        assert!(cells.contains(&Cell::new(vec![CoordState::Below, CoordState::Below])));
    }

    #[test]
    fn tangent_cone_at_degenerate_and_strict_points() {
        let s = BoxSet::orthant(2);
        let k0 = tangent_cone_k0(&s, &v(&[0.0, 0.0]), &v(&[0.0, -0.5]), 1e-12).unwrap();
        assert_eq!(k0.lower(), &[0.0, 0.0]);
        assert_eq!(k0.upper(), &[f64::INFINITY, 0.0]);
        assert!(matches!(
            tangent_cone_k0(&s, &v(&[1.0, 0.0]), &v(&[0.0, -0.5]), 1e-12),
            Err(Error::NotProjection { .. })
        ));
    }

    #[test]
    fn face_of_the_worked_cell() {
        let s = BoxSet::orthant(2);
        let c = Cell::new(vec![CoordState::AtLower, CoordState::Below]);
        let f = face_projection_data(&s, &c).unwrap();
        assert_eq!(f.face.states(), &[CoordState::AtLower, CoordState::AtLower]);
        assert_eq!(f.parallel_subspace().dim(), 0);
        assert_eq!(f.project(&v(&[3.0, -1.0])), v(&[0.0, 0.0]));
    }

    fn two_piece(m_plus: DMatrix<f64>, m_minus: DMatrix<f64>) -> Result<PiecewiseLinearMap> {
        PiecewiseLinearMap::explicit(vec![
            Piece { cone: vec![Axis::NonNeg, Axis::Free], matrix: m_plus },
            Piece { cone: vec![Axis::NonPos, Axis::Free], matrix: m_minus },
        ])
    }

    #[test]
    fn explicit_map_roundtrip() {
        let mp = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 1.0]);
        let mm = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, -0.3, 1.0]);
        let g = two_piece(mp, mm).unwrap();
        assert_eq!(g.lineality().dim(), 1);
        for y in [v(&[1.0, 2.0]), v(&[-1.0, 0.5]), v(&[0.0, 3.0])] {
            let x = g.inverse_apply(&y).unwrap();
            assert_relative_eq!(g.apply(&x), y, epsilon = 1e-12);
        }
        assert_eq!(g.locate(&v(&[0.3, -9.0]), 1e-12).unwrap(), PieceKey::Index(0));
        assert!(matches!(g.locate(&v(&[0.0, 1.0]), 1e-12), Err(Error::AmbiguousPiece { .. })));
    }

    #[test]
    fn explicit_map_rejects_bad_subdivisions() {
        let i = DMatrix::identity(2, 2);
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(two_piece(i.clone(), sing), Err(Error::SingularPiece { .. })));
        let flip = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert!(two_piece(i.clone(), flip).is_err());
        let shear = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(two_piece(i.clone(), shear).is_err());
        let half = PiecewiseLinearMap::explicit(vec![Piece { cone: vec![Axis::NonNeg], matrix: DMatrix::identity(1, 1) }]);
        assert!(half.is_err());
    }

    #[test]
    fn normal_map_pieces_match_the_map() {
        let l = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.3, 1.5]);
        let k0 = BoxSet::new(vec![0.0, f64::NEG_INFINITY], vec![f64::INFINITY, f64::INFINITY]).unwrap();
        let g = normal_map_pieces(l, &k0).unwrap();
        assert_eq!(g.switching_coordinates(), vec![0]);
        let pieces = g.pieces().unwrap();
        assert_eq!(pieces.len(), 2);
        for p in [v(&[0.7, -1.2]), v(&[-0.4, 2.0])] {
            let key = g.locate(&p, 1e-12).unwrap();
            assert_relative_eq!(g.matrix(&key) * &p, g.apply(&p), epsilon = 1e-14);
            let back = g.inverse_apply(&g.apply(&p)).unwrap();
            assert_relative_eq!(back, p, epsilon = 1e-12);
        }
    }
}
