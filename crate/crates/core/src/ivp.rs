//! Individual decisions: weighted multi-objective optimization over a
//! finite, uniformly discrete decision grid.
//!
//! The group choice picks a row of the activation matrix; the active
//! behaviors each contribute an objective on the grid, and [`solve`]
//! returns the exact weighted-sum argmax by exhaustive evaluation.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{angular_distance, Point};

pub const UTILITY_MAX: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionVariable {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub step: f64,
    /// Periodic variables exclude `max` (it aliases `min`).
    #[serde(default)]
    pub periodic: bool,
}

impl DecisionVariable {
    pub fn count(&self) -> usize {
        let span = (self.max - self.min) / self.step;
        if self.periodic {
            (span - 1e-9).floor() as usize + 1
        } else {
            (span + 1e-9).floor() as usize + 1
        }
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step
    }

    /// Nearest grid index to `v`, clamped (or wrapped, when periodic).
    pub fn nearest_index(&self, v: f64) -> usize {
        let n = self.count();
        let raw = ((v - self.min) / self.step).round();
        if self.periodic {
            let period = ((self.max - self.min) / self.step).round() as i64;
            let i = (raw as i64).rem_euclid(period.max(1)) as usize;
            i.min(n - 1)
        } else {
            raw.clamp(0.0, (n - 1) as f64) as usize
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = self.min.is_finite() && self.max.is_finite() && self.step.is_finite();
        if !finite || !(self.step > 0.0) || !(self.min < self.max) || self.count() < 2 {
            return Err(Error::InvalidInput(format!("invalid decision variable {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSpace {
    variables: Vec<DecisionVariable>,
}

impl DecisionSpace {
    pub fn new(variables: Vec<DecisionVariable>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::InvalidInput("decision space has no variables".into()));
        }
        for v in &variables {
            v.validate()?;
        }
        let total = variables
            .iter()
            .try_fold(1usize, |acc, v| acc.checked_mul(v.count()));
        if total.is_none() {
            return Err(Error::InvalidInput("decision grid too large".into()));
        }
        Ok(DecisionSpace { variables })
    }

    /// Heading in [0, 360) and speed in [0, `speed_max`].
    pub fn helm(heading_step: f64, speed_max: f64, speed_step: f64) -> Result<Self> {
        DecisionSpace::new(vec![
            DecisionVariable {
                name: "heading".into(),
                min: 0.0,
                max: 360.0,
                step: heading_step,
                periodic: true,
            },
            DecisionVariable {
                name: "speed".into(),
                min: 0.0,
                max: speed_max,
                step: speed_step,
                periodic: false,
            },
        ])
    }

    /// 360 x 21 heading/speed grid.
    pub fn helm_default() -> Self {
        Self::helm(1.0, 2.0, 0.1).expect("default helm grid is valid")
    }

    pub fn variables(&self) -> &[DecisionVariable] {
        &self.variables
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.variables.iter().map(DecisionVariable::count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid indices of the linear (row-major, first variable outermost)
    /// point index.
    pub fn unravel(&self, mut linear: usize) -> Vec<usize> {
        let mut idx = vec![0; self.variables.len()];
        for (k, v) in self.variables.iter().enumerate().rev() {
            let n = v.count();
            idx[k] = linear % n;
            linear /= n;
        }
        idx
    }

    pub fn point(&self, linear: usize) -> Vec<f64> {
        self.unravel(linear)
            .into_iter()
            .zip(&self.variables)
            .map(|(i, v)| v.value(i))
            .collect()
    }

    /// Visits every grid point in lexicographic index order.
    pub fn for_each_point(&self, mut f: impl FnMut(usize, &[f64])) {
        let counts: Vec<usize> = self.variables.iter().map(DecisionVariable::count).collect();
        let mut idx = vec![0usize; counts.len()];
        let mut point: Vec<f64> = self.variables.iter().map(|v| v.value(0)).collect();
        for linear in 0..self.len() {
            f(linear, &point);
            // odometer increment, last variable fastest
            for k in (0..counts.len()).rev() {
                idx[k] += 1;
                if idx[k] < counts[k] {
                    point[k] = self.variables[k].value(idx[k]);
                    break;
                }
                idx[k] = 0;
                point[k] = self.variables[k].value(0);
            }
        }
    }

    fn heading_speed(&self) -> Result<(usize, usize)> {
        match (self.variable_index("heading"), self.variable_index("speed")) {
            (Some(h), Some(s)) => Ok((h, s)),
            _ => Err(Error::InvalidInput(
                "behavior needs `heading` and `speed` decision variables".into(),
            )),
        }
    }
}

/// Heading factor of a separable helm objective.
#[derive(Debug, Clone, Copy, PartialEq)]
enum HeadingProfile {
    Flat,
    /// 1 at `center`, falling linearly to 0 at 180 degrees off.
    Peak { center: f64 },
}

impl HeadingProfile {
    #[inline]
    fn factor(self, heading: f64) -> f64 {
        match self {
            HeadingProfile::Flat => 1.0,
            HeadingProfile::Peak { center } => 1.0 - angular_distance(heading, center) / 180.0,
        }
    }
}

/// Speed factor: 1 at `center`, falling linearly by 1 per `span` m/s.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SpeedProfile {
    center: f64,
    span: f64,
}

impl SpeedProfile {
    #[inline]
    fn factor(self, speed: f64) -> f64 {
        (1.0 - (speed - self.center).abs() / self.span).max(0.0)
    }
}

/// One box of a piecewise-linear objective: on `lower <= x <= upper` the
/// utility is `intercept + slopes . x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub intercept: f64,
    pub slopes: Vec<f64>,
}

impl Piece {
    fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.slopes
            .iter()
            .zip(x)
            .fold(self.intercept, |acc, (c, v)| acc + c * v)
    }
}

#[derive(Clone)]
enum Shape {
    /// `scale * heading_factor * speed_factor`.
    Helm {
        heading_var: usize,
        speed_var: usize,
        heading: HeadingProfile,
        speed: SpeedProfile,
        scale: f64,
    },
    /// First matching piece wins; uncovered points score `default`.
    Pieces { pieces: Vec<Piece>, default: f64 },
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

/// A behavior's utility over the decision grid.
#[derive(Clone)]
pub struct PiecewiseObjective {
    behavior_id: String,
    shape: Shape,
}

impl fmt::Debug for PiecewiseObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.shape {
            Shape::Helm { .. } => "helm",
            Shape::Pieces { .. } => "pieces",
            Shape::Custom(_) => "custom",
        };
        f.debug_struct("PiecewiseObjective")
            .field("behavior_id", &self.behavior_id)
            .field("shape", &kind)
            .finish()
    }
}

impl PiecewiseObjective {
    pub fn from_fn(behavior_id: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        PiecewiseObjective {
            behavior_id: behavior_id.into(),
            shape: Shape::Custom(Arc::new(f)),
        }
    }

    pub fn from_pieces(behavior_id: impl Into<String>, pieces: Vec<Piece>, default: f64) -> Self {
        PiecewiseObjective {
            behavior_id: behavior_id.into(),
            shape: Shape::Pieces { pieces, default },
        }
    }

    pub fn constant(behavior_id: impl Into<String>, value: f64) -> Self {
        Self::from_pieces(behavior_id, Vec::new(), value)
    }

    pub fn behavior_id(&self) -> &str {
        &self.behavior_id
    }

    pub fn evaluate(&self, point: &[f64]) -> f64 {
        match &self.shape {
            Shape::Helm {
                heading_var,
                speed_var,
                heading,
                speed,
                scale,
            } => scale * heading.factor(point[*heading_var]) * speed.factor(point[*speed_var]),
            Shape::Pieces { pieces, default } => pieces
                .iter()
                .find(|p| p.contains(point))
                .map_or(*default, |p| p.eval(point)),
            Shape::Custom(f) => f(point),
        }
    }

    /// Writes `evaluate` of every grid point into `out`, in linear order.
    /// Values are bit-identical to point-wise evaluation.
    pub fn tabulate(&self, space: &DecisionSpace, out: &mut [f64]) {
        debug_assert_eq!(out.len(), space.len());
        match &self.shape {
            Shape::Helm {
                heading_var,
                speed_var,
                heading,
                speed,
                scale,
            } if space.variables().len() == 2 => {
                let vars = space.variables();
                let hf: Vec<f64> = (0..vars[*heading_var].count())
                    .map(|i| heading.factor(vars[*heading_var].value(i)))
                    .collect();
                let sf: Vec<f64> = (0..vars[*speed_var].count())
                    .map(|i| speed.factor(vars[*speed_var].value(i)))
                    .collect();
                helm_rows(*heading_var == 0, &hf, &sf, |row, vals| {
                    for (slot, v) in out[row..row + vals.len()].iter_mut().zip(vals) {
                        *slot = scale * v.0 * v.1;
                    }
                });
            }
            _ => space.for_each_point(|i, p| out[i] = self.evaluate(p)),
        }
    }

    /// `total[i] += weight * evaluate(point i)` over the whole grid.
    fn accumulate(&self, space: &DecisionSpace, weight: f64, total: &mut [f64], scratch: &mut Vec<f64>) {
        match &self.shape {
            Shape::Helm {
                heading_var,
                speed_var,
                heading,
                speed,
                scale,
            } if space.variables().len() == 2 => {
                let vars = space.variables();
                let hf: Vec<f64> = (0..vars[*heading_var].count())
                    .map(|i| heading.factor(vars[*heading_var].value(i)))
                    .collect();
                let sf: Vec<f64> = (0..vars[*speed_var].count())
                    .map(|i| speed.factor(vars[*speed_var].value(i)))
                    .collect();
                helm_rows(*heading_var == 0, &hf, &sf, |row, vals| {
                    for (t, v) in total[row..row + vals.len()].iter_mut().zip(vals) {
                        *t += weight * (scale * v.0 * v.1);
                    }
                });
            }
            _ => {
                scratch.resize(space.len(), 0.0);
                self.tabulate(space, scratch);
                for (t, f) in total.iter_mut().zip(scratch.iter()) {
                    *t += weight * f;
                }
            }
        }
    }
}

/// Walks a two-variable grid row by row, handing each row's
/// (heading factor, speed factor) pairs to `f` with the row's start index.
fn helm_rows(heading_outer: bool, hf: &[f64], sf: &[f64], mut f: impl FnMut(usize, &[(f64, f64)])) {
    let (outer, inner) = if heading_outer { (hf.len(), sf.len()) } else { (sf.len(), hf.len()) };
    let mut row = Vec::with_capacity(inner);
    for a in 0..outer {
        row.clear();
        row.extend((0..inner).map(|b| if heading_outer { (hf[a], sf[b]) } else { (hf[b], sf[a]) }));
        f(a * inner, &row);
    }
}

/// Waypoint-following objective: 100 at (bearing to waypoint, cruise
/// speed), falling linearly with angular error (0 at 180 degrees) and with
/// speed error across the speed range.
pub fn make_transit_objective(
    behavior_id: impl Into<String>,
    own: Point,
    waypoint: Point,
    cruise_speed: f64,
    space: &DecisionSpace,
) -> Result<PiecewiseObjective> {
    let (heading_var, speed_var) = space.heading_speed()?;
    if own.distance(&waypoint) < 1e-9 {
        return Err(Error::DegenerateGoal);
    }
    let sv = &space.variables()[speed_var];
    Ok(PiecewiseObjective {
        behavior_id: behavior_id.into(),
        shape: Shape::Helm {
            heading_var,
            speed_var,
            heading: HeadingProfile::Peak {
                center: own.bearing_to(&waypoint),
            },
            speed: SpeedProfile {
                center: cruise_speed,
                span: sv.max - sv.min,
            },
            scale: UTILITY_MAX,
        },
    })
}

/// Stop-and-hold objective: 100 at the minimum speed, linear down to 0 at
/// the maximum, indifferent to heading.
pub fn make_station_keep_objective(behavior_id: impl Into<String>, space: &DecisionSpace) -> Result<PiecewiseObjective> {
    let (heading_var, speed_var) = space.heading_speed()?;
    let sv = &space.variables()[speed_var];
    Ok(PiecewiseObjective {
        behavior_id: behavior_id.into(),
        shape: Shape::Helm {
            heading_var,
            speed_var,
            heading: HeadingProfile::Flat,
            speed: SpeedProfile {
                center: sv.min,
                span: sv.max - sv.min,
            },
            scale: UTILITY_MAX,
        },
    })
}

/// Static part of the behavior layer: names, weights `W` and the binary
/// option-to-behavior activation matrix `A_c` (options x behaviors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSet {
    names: Vec<String>,
    weights: Vec<f64>,
    activation: Vec<Vec<bool>>,
}

impl BehaviorSet {
    pub fn new(names: Vec<String>, weights: Vec<f64>, activation: Vec<Vec<bool>>) -> Result<Self> {
        let q = names.len();
        if q == 0 || weights.len() != q {
            return Err(Error::InvalidInput(format!(
                "{q} behaviors but {} weights",
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput(format!("behavior weights must be positive, got {w}")));
        }
        if activation.iter().any(|row| row.len() != q) {
            return Err(Error::InvalidInput("activation rows must have one entry per behavior".into()));
        }
        if let Some(j) = activation.iter().position(|row| !row.iter().any(|a| *a)) {
            return Err(Error::InvalidInput(format!("option {j} activates no behavior")));
        }
        if let Some(c) = (0..q).find(|&c| !activation.iter().any(|row| row[c])) {
            return Err(Error::InvalidInput(format!(
                "behavior `{}` is not activated by any option",
                names[c]
            )));
        }
        Ok(BehaviorSet {
            names,
            weights,
            activation,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn activation(&self) -> &[Vec<bool>] {
        &self.activation
    }

    pub fn options(&self) -> usize {
        self.activation.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// `e_dominant^T A_c W` as a per-behavior weight vector.
pub fn active_weights(dominant: usize, set: &BehaviorSet) -> Vec<f64> {
    let row = set.activation.get(dominant);
    set.weights
        .iter()
        .enumerate()
        .map(|(q, w)| match row {
            Some(r) if r[q] => *w,
            _ => 0.0,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    /// One grid value per decision variable.
    pub values: Vec<f64>,
    /// Achieved weighted utility.
    pub utility: f64,
}

impl Decision {
    pub fn value(&self, space: &DecisionSpace, name: &str) -> Option<f64> {
        space.variable_index(name).map(|i| self.values[i])
    }
}

/// Exhaustive weighted-sum argmax. Ties go to the lexicographically
/// smallest grid coordinates.
pub fn solve(space: &DecisionSpace, objectives: &[PiecewiseObjective], weights: &[f64]) -> Result<Decision> {
    if objectives.len() != weights.len() {
        return Err(Error::InvalidInput(format!(
            "{} objectives but {} weights",
            objectives.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidInput(format!("weights must be finite and non-negative, got {w}")));
    }
    if weights.iter().all(|w| *w == 0.0) {
        return Err(Error::NoActiveBehavior);
    }

    let n = space.len();
    let mut total = vec![0.0; n];
    let mut scratch = Vec::new();
    for (objective, &w) in objectives.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        objective.accumulate(space, w, &mut total, &mut scratch);
    }

    let mut best = 0;
    for (i, v) in total.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!(
                "objective produced a non-finite utility at grid point {:?}",
                space.point(i)
            )));
        }
        if *v > total[best] {
            best = i;
        }
    }
    Ok(Decision {
        values: space.point(best),
        utility: total[best],
    })
}
