//! Empirical measures, measure flows and exact discrete Wasserstein
//! distances on states and on path space.
//!
//! All measures are uniform-weight atom clouds. For equal atom counts the
//! `p`-Wasserstein distance reduces to an optimal assignment, which is solved
//! exactly; unequal counts are handled by integer replication, which leaves
//! the represented measure unchanged.
//!
//! Reduction orders are pinned so results are reproducible bit for bit:
//! moments sum their terms in sorted order (hence are invariant under atom
//! permutations), and distances evaluate the optimal assignment in row order
//! of the canonically oriented pair.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::spectral::{PathSample, State};

pub mod assignment;

use assignment::CostMatrix;

/// Largest admitted atom replication factor for distances between clouds of
/// unequal size.
pub const REPLICATION_CAP: usize = 1024;

/// Uniform-weight cloud of states: `(1/N) sum_i delta_{y_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    atoms: Vec<State>,
}

impl EmpiricalMeasure {
    pub fn new(atoms: Vec<State>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let dim = atoms[0].dim();
        for atom in &atoms {
            if atom.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: atom.dim() });
            }
            if !atom.is_finite() {
                return Err(Error::InvalidParameter("measure atom is not finite".into()));
            }
        }
        Ok(Self { atoms })
    }

    pub fn dirac(atom: State) -> Self {
        Self { atoms: vec![atom] }
    }

    pub fn atoms(&self) -> &[State] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        false // constructors reject empty clouds
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    /// Barycenter. Coordinates are summed in sorted order, so the result is
    /// invariant under permutations of the atoms.
    pub fn mean(&self) -> State {
        let n = self.len() as f64;
        let dim = self.dim();
        let mut coords = Vec::with_capacity(dim);
        let mut column = Vec::with_capacity(self.len());
        for k in 0..dim {
            column.clear();
            column.extend(self.atoms.iter().map(|a| a.coords[k]));
            column.sort_by(f64::total_cmp);
            coords.push(column.iter().sum::<f64>() / n);
        }
        State::new(coords)
    }

    /// `((1/N) sum_i |y_i|^p)^{1/p}` for `p >= 1`, permutation invariant.
    pub fn moment(&self, p: f64) -> Result<f64> {
        check_order(p)?;
        let mut powers: Vec<f64> = self.atoms.iter().map(|a| a.norm().powf(p)).collect();
        powers.sort_by(f64::total_cmp);
        Ok((powers.iter().sum::<f64>() / self.len() as f64).powf(1.0 / p))
    }

    fn replicate_to(&self, target: usize) -> Result<Self> {
        replicate(&self.atoms, target).map(|atoms| Self { atoms })
    }
}

impl Serialize for EmpiricalMeasure {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MeasureRepr { atoms: self.atoms.clone() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EmpiricalMeasure {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = MeasureRepr::deserialize(deserializer)?;
        EmpiricalMeasure::new(repr.atoms).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    atoms: Vec<State>,
}

/// Uniform-weight cloud of paths on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathCloud {
    paths: Vec<PathSample>,
}

impl PathCloud {
    pub fn new(paths: Vec<PathSample>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        for path in &paths[1..] {
            paths[0].check_same_grid(path)?;
        }
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &[PathSample] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.paths[0].dim()
    }

    pub fn steps(&self) -> usize {
        self.paths[0].steps()
    }

    pub fn horizon(&self) -> f64 {
        self.paths[0].horizon()
    }

    /// Time-`t_m` marginal of the cloud.
    pub fn marginal(&self, m: usize) -> EmpiricalMeasure {
        EmpiricalMeasure {
            atoms: self.paths.iter().map(|p| p.state(m).clone()).collect(),
        }
    }

    /// The flow of all grid marginals.
    pub fn marginal_flow(&self) -> MeasureFlow {
        MeasureFlow {
            horizon: self.horizon(),
            measures: (0..=self.steps()).map(|m| self.marginal(m)).collect(),
        }
    }

    pub fn replicate_to(&self, target: usize) -> Result<Self> {
        replicate(&self.paths, target).map(|paths| Self { paths })
    }

    pub fn check_same_grid(&self, other: &PathCloud) -> Result<()> {
        self.paths[0].check_same_grid(&other.paths[0])
    }
}

impl Serialize for PathCloud {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        CloudRepr {
            horizon: self.horizon(),
            steps: self.steps(),
            dim: self.dim(),
            paths: self.paths.iter().map(|p| p.states().to_vec()).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PathCloud {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = CloudRepr::deserialize(deserializer)?;
        let paths = repr
            .paths
            .into_iter()
            .map(|states| PathSample::new(repr.horizon, states))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        let cloud = PathCloud::new(paths).map_err(serde::de::Error::custom)?;
        if cloud.steps() != repr.steps || cloud.dim() != repr.dim {
            return Err(serde::de::Error::custom(
                "cloud header (M, dim) disagrees with the path tables",
            ));
        }
        Ok(cloud)
    }
}

#[derive(Serialize, Deserialize)]
struct CloudRepr {
    #[serde(rename = "T")]
    horizon: f64,
    #[serde(rename = "M")]
    steps: usize,
    dim: usize,
    paths: Vec<Vec<State>>,
}

/// A time-indexed family of empirical measures on the solver grid,
/// the discrete stand-in for a continuous measure flow.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureFlow {
    horizon: f64,
    measures: Vec<EmpiricalMeasure>,
}

impl MeasureFlow {
    pub fn new(horizon: f64, measures: Vec<EmpiricalMeasure>) -> Result<Self> {
        if measures.len() < 2 {
            return Err(Error::GridMismatch(
                "a measure flow needs at least the initial and terminal grid time".into(),
            ));
        }
        let dim = measures[0].dim();
        if measures.iter().any(|m| m.dim() != dim) {
            return Err(Error::GridMismatch("flow marginals differ in dimension".into()));
        }
        if horizon <= 0.0 || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "flow horizon must be a positive real, got {horizon}"
            )));
        }
        Ok(Self { horizon, measures })
    }

    /// Flow that is constant in time.
    pub fn constant(measure: EmpiricalMeasure, horizon: f64, steps: usize) -> Result<Self> {
        Self::new(horizon, vec![measure; steps + 1])
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.measures.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.measures[0].dim()
    }

    pub fn at(&self, m: usize) -> &EmpiricalMeasure {
        &self.measures[m]
    }

    pub fn measures(&self) -> &[EmpiricalMeasure] {
        &self.measures
    }

    pub fn check_grid(&self, horizon: f64, steps: usize, dim: usize) -> Result<()> {
        if self.horizon != horizon || self.steps() != steps || self.dim() != dim {
            return Err(Error::GridMismatch(format!(
                "flow on (T={}, M={}, dim={}) does not match solver grid (T={horizon}, M={steps}, dim={dim})",
                self.horizon,
                self.steps(),
                self.dim()
            )));
        }
        Ok(())
    }
}

fn check_order(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("moment order p must satisfy p >= 1, got {p}")));
    }
    Ok(())
}

fn replicate<T: Clone>(items: &[T], target: usize) -> Result<Vec<T>> {
    let n = items.len();
    if target == n {
        return Ok(items.to_vec());
    }
    if n == 0 || !target.is_multiple_of(n) || target / n > REPLICATION_CAP {
        return Err(Error::IncompatibleAtomCounts { left: n, right: target, cap: REPLICATION_CAP });
    }
    let factor = target / n;
    let mut out = Vec::with_capacity(target);
    for _ in 0..factor {
        out.extend_from_slice(items);
    }
    Ok(out)
}

fn common_size(a: usize, b: usize) -> Result<usize> {
    let (small, large) = if a <= b { (a, b) } else { (b, a) };
    if large % small != 0 || large / small > REPLICATION_CAP {
        return Err(Error::IncompatibleAtomCounts { left: a, right: b, cap: REPLICATION_CAP });
    }
    Ok(large)
}

/// Lexicographic order on flattened coordinate tables; used to orient a pair
/// of clouds canonically so that distances are bitwise symmetric.
fn flat_cmp<'a, I, J>(a: I, b: J) -> std::cmp::Ordering
where
    I: Iterator<Item = &'a f64>,
    J: Iterator<Item = &'a f64>,
{
    let mut a = a;
    let mut b = b;
    loop {
        match (a.next(), b.next()) {
            (Some(x), Some(y)) => match x.total_cmp(y) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            },
            (None, None) => return std::cmp::Ordering::Equal,
            (None, Some(_)) => return std::cmp::Ordering::Less,
            (Some(_), None) => return std::cmp::Ordering::Greater,
        }
    }
}

/// `|x - y|_E^p`, the transport cost of one atom pair.
#[inline]
fn pair_cost(x: &State, y: &State, p: f64) -> f64 {
    x.distance(y).powf(p)
}

fn measure_key(m: &EmpiricalMeasure) -> impl Iterator<Item = &f64> {
    m.atoms.iter().flat_map(|s| s.coords.iter())
}

fn cloud_key(c: &PathCloud) -> impl Iterator<Item = &f64> {
    c.paths.iter().flat_map(|p| p.states().iter().flat_map(|s| s.coords.iter()))
}

/// Final power/root sequencing shared by every distance: mean of the
/// assigned costs in row order, then the `1/p`-th power.
fn assignment_distance(cost: &CostMatrix, perm: &[usize], p: f64) -> f64 {
    (cost.assignment_sum(perm) / perm.len() as f64).powf(1.0 / p)
}

/// Optimal matching of two equal-length scalar clouds: sort both sides.
/// For states on the real line the monotone coupling is optimal for every
/// convex cost, in particular for `|x - y|^p`, `p >= 1`.
fn sorted_matching(a: &[State], b: &[State]) -> Vec<usize> {
    let order = |xs: &[State]| {
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        idx.sort_by(|&i, &j| xs[i].coords[0].total_cmp(&xs[j].coords[0]));
        idx
    };
    let ia = order(a);
    let ib = order(b);
    let mut perm = vec![0usize; a.len()];
    for (rank, &i) in ia.iter().enumerate() {
        perm[i] = ib[rank];
    }
    perm
}

/// Exact `p`-Wasserstein distance between two uniform empirical measures,
/// `((1/N) min_pi sum_i |a_i - b_pi(i)|^p)^{1/p}`.
pub fn wasserstein_p(a: &EmpiricalMeasure, b: &EmpiricalMeasure, p: f64) -> Result<f64> {
    check_order(p)?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let size = common_size(a.len(), b.len())?;
    let ra = a.replicate_to(size)?;
    let rb = b.replicate_to(size)?;

    let (first, second) = match flat_cmp(measure_key(&ra), measure_key(&rb)) {
        std::cmp::Ordering::Greater => (&rb, &ra),
        _ => (&ra, &rb),
    };

    let cost = CostMatrix::build(size, |i, j| pair_cost(&first.atoms[i], &second.atoms[j], p));
    let perm = if a.dim() == 1 {
        sorted_matching(&first.atoms, &second.atoms)
    } else {
        assignment::min_cost_assignment(&cost)
    };
    Ok(assignment_distance(&cost, &perm, p))
}

/// Exact `p`-Wasserstein distance between path clouds under the uniform
/// path metric `d_T`.
pub fn wasserstein_path(a: &PathCloud, b: &PathCloud, p: f64) -> Result<f64> {
    check_order(p)?;
    a.check_same_grid(b)?;
    let size = common_size(a.len(), b.len())?;
    let ra = a.replicate_to(size)?;
    let rb = b.replicate_to(size)?;

    let (first, second) = match flat_cmp(cloud_key(&ra), cloud_key(&rb)) {
        std::cmp::Ordering::Greater => (&rb, &ra),
        _ => (&ra, &rb),
    };

    let cost = CostMatrix::build(size, |i, j| {
        first.paths[i]
            .uniform_distance(&second.paths[j])
            .expect("clouds share a grid")
            .powf(p)
    });
    let perm = assignment::min_cost_assignment(&cost);
    Ok(assignment_distance(&cost, &perm, p))
}

/// Output of [`coupling_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingBound {
    /// `((1/N) sum_i |e_i - f_i|^p)^{1/p}`, the cost of the index coupling.
    pub bound: f64,
    /// The exact distance `w_p(L(e), L(f))`; always `<= bound`.
    pub wasserstein: f64,
}

/// Cost of the synchronous (index) coupling of `L(e)` and `L(f)` together
/// with the exact distance it dominates.
pub fn coupling_bound(e: &[State], f: &[State], p: f64) -> Result<CouplingBound> {
    check_order(p)?;
    if e.len() != f.len() {
        return Err(Error::DimensionMismatch { expected: e.len(), got: f.len() });
    }
    let sum: f64 = e.iter().zip(f).map(|(x, y)| pair_cost(x, y, p)).sum();
    let bound = (sum / e.len() as f64).powf(1.0 / p);
    let wasserstein =
        wasserstein_p(&EmpiricalMeasure::new(e.to_vec())?, &EmpiricalMeasure::new(f.to_vec())?, p)?;
    // the index coupling is admissible, so the true optimum never exceeds
    // the bound; co-optimal assignments can re-sum a few ulps above it
    Ok(CouplingBound { bound, wasserstein: wasserstein.min(bound) })
}
