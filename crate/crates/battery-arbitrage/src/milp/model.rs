//! Solver-agnostic description of a mixed-integer linear program.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::linearize::PiecewiseLinearFn;

/// Index of a variable inside its model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl Constraint {
    /// Left-hand side at the given point.
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which the row is violated at the given point.
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            RowSense::Le => (lhs - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - lhs).max(0.0),
            RowSense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjSense {
    #[default]
    Maximize,
    Minimize,
}

/// Which builder produced a model, and therefore how to read a schedule from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    PowerEnergy,
    PhysicsBased,
    #[default]
    Generic,
}

/// Maps from (hour, subinterval) to the variables a schedule is read from.
/// Vectors that do not apply to a model kind are empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelMeta {
    pub kind: ModelKind,
    pub hours: usize,
    pub subintervals: usize,
    /// Subinterval length (h).
    pub tau_h: f64,
    /// Price of each hour ($/MWh).
    pub prices: Vec<f64>,
    /// Charging power (MW), power-energy model.
    pub charge: Vec<Vec<VarId>>,
    /// Discharging power (MW); in the physics model the positive part of power.
    pub discharge: Vec<Vec<VarId>>,
    /// Signed stack power (MW), physics model.
    pub power: Vec<Vec<VarId>>,
    /// State variable per subinterval; converted to MWh by `state_to_mwh`.
    pub state: Vec<Vec<VarId>>,
    /// `(a, b)` with stored energy `= a * state + b` (MWh).
    pub state_to_mwh: (f64, f64),
    /// Cell current (A), physics model.
    pub current: Vec<Vec<VarId>>,
    /// Cell voltage (V), physics model.
    pub voltage: Vec<Vec<VarId>>,
    /// Hourly energy sold (MWh).
    pub energy: Vec<VarId>,
    /// Hourly degradation cost ($).
    pub degradation: Vec<VarId>,
    /// Hourly charge/discharge mode binary, 1 when charging.
    pub mode: Vec<VarId>,
    /// Hourly reference power of the near-constant power band (MW).
    pub band: Vec<VarId>,
}

/// Constraint and variable counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub constraints: usize,
    pub continuous: usize,
    pub binary: usize,
}

/// A named piecewise-linear function embedded in a model, kept for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPwl {
    pub name: String,
    pub function: PiecewiseLinearFn,
}

/// Variables, linear constraints and a linear objective.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MilpModel {
    pub name: String,
    pub sense: ObjSense,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Objective coefficient of every variable.
    pub objective: Vec<f64>,
    pub meta: ModelMeta,
    pub pwl: Vec<NamedPwl>,
}

impl MilpModel {
    /// Empty maximization model.
    pub fn new(name: impl Into<String>) -> Self {
        MilpModel {
            name: name.into(),
            ..Default::default()
        }
    }

    /// Declares a variable. Bounds must satisfy `lower <= upper` and not be NaN.
    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: f64,
        upper: f64,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        let binary_ok = kind == VarKind::Continuous || (lower >= 0.0 && upper <= 1.0);
        if lower.is_nan() || upper.is_nan() || lower > upper || !binary_ok {
            return Err(ModelError::Bounds { name, lower, upper });
        }
        self.variables.push(Variable {
            name,
            kind,
            lower,
            upper,
        });
        self.objective.push(0.0);
        Ok(VarId(self.variables.len() - 1))
    }

    pub fn continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<VarId, ModelError> {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> Result<VarId, ModelError> {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    /// Adds a row `sum(a * x) sense rhs`, merging repeated variables.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: &[(VarId, f64)],
        sense: RowSense,
        rhs: f64,
    ) -> Result<usize, ModelError> {
        let name = name.into();
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for &(v, a) in terms {
            if v.0 >= self.variables.len() {
                return Err(ModelError::UnknownVariable { row: name, index: v.0 });
            }
            if !a.is_finite() {
                return Err(ModelError::NonFinite { row: name });
            }
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some(entry) => entry.1 += a,
                None => merged.push((v, a)),
            }
        }
        if !rhs.is_finite() {
            return Err(ModelError::NonFinite { row: name });
        }
        merged.retain(|(_, a)| *a != 0.0);
        self.constraints.push(Constraint {
            name,
            terms: merged,
            sense,
            rhs,
        });
        Ok(self.constraints.len() - 1)
    }

    pub fn set_objective(&mut self, v: VarId, coef: f64) {
        self.objective[v.0] = coef;
    }

    pub fn var(&self, v: VarId) -> &Variable {
        &self.variables[v.0]
    }

    pub fn find_var(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn dimensions(&self) -> Dimensions {
        let binary = self.variables.iter().filter(|v| v.kind == VarKind::Binary).count();
        Dimensions {
            constraints: self.constraints.len(),
            continuous: self.variables.len() - binary,
            binary,
        }
    }

    /// Objective value at a point.
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }

    /// Checks structural invariants: every variable has finite bounds and
    /// every row references declared variables with finite data.
    pub fn validate(&self) -> Result<(), ModelError> {
        for v in &self.variables {
            if !(v.lower.is_finite() && v.upper.is_finite() && v.lower <= v.upper) {
                return Err(ModelError::Bounds {
                    name: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
        }
        for c in &self.constraints {
            if let Some((v, _)) = c.terms.iter().find(|(v, _)| v.0 >= self.variables.len()) {
                return Err(ModelError::UnknownVariable {
                    row: c.name.clone(),
                    index: v.0,
                });
            }
            if !c.rhs.is_finite() || c.terms.iter().any(|(_, a)| !a.is_finite()) {
                return Err(ModelError::NonFinite { row: c.name.clone() });
            }
        }
        Ok(())
    }

    /// Largest violation of any row, bound or integrality requirement at a
    /// point, with the name of the offending row or variable.
    pub fn max_violation(&self, values: &[f64]) -> (f64, Option<String>) {
        let mut worst = (0.0, None);
        let mut note = |amount: f64, name: &str| {
            if amount > worst.0 {
                worst = (amount, Some(name.to_string()));
            }
        };
        for (v, &x) in self.variables.iter().zip(values) {
            note((v.lower - x).max(x - v.upper).max(0.0), &v.name);
            if v.kind == VarKind::Binary {
                note((x - x.round()).abs(), &v.name);
            }
        }
        for c in &self.constraints {
            note(c.violation(values), &c.name);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_terms_are_merged() {
        let mut m = MilpModel::new("t");
        let x = m.continuous("x", 0.0, 1.0).unwrap();
        m.add_constraint("r", &[(x, 1.0), (x, 2.0)], RowSense::Le, 1.0).unwrap();
        assert_eq!(m.constraints[0].terms, vec![(x, 3.0)]);
    }

    #[test]
    fn bad_bounds_and_unknown_variables_are_rejected() {
        let mut m = MilpModel::new("t");
        assert!(m.continuous("x", 1.0, 0.0).is_err());
        assert!(m.add_var("b", VarKind::Binary, 0.0, 2.0).is_err());
        assert!(m.add_constraint("r", &[(VarId(7), 1.0)], RowSense::Eq, 0.0).is_err());
        let x = m.continuous("x", 0.0, f64::INFINITY).unwrap();
        assert!(m.validate().is_err());
        m.variables[x.0].upper = 1.0;
        assert!(m.validate().is_ok());
    }

    #[test]
    fn violation_reports_worst_row() {
        let mut m = MilpModel::new("t");
        let x = m.continuous("x", 0.0, 10.0).unwrap();
        let b = m.binary("b").unwrap();
        m.add_constraint("cap", &[(x, 1.0)], RowSense::Le, 2.0).unwrap();
        m.add_constraint("link", &[(x, 1.0), (b, -5.0)], RowSense::Le, 0.0).unwrap();
        let (amount, name) = m.max_violation(&[4.0, 0.5]);
        assert_eq!(amount, 2.0);
        assert_eq!(name.as_deref(), Some("cap"));
        assert_eq!(m.dimensions(), Dimensions { constraints: 2, continuous: 1, binary: 1 });
    }
}
