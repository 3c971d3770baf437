//! Numeric checker for the reduction-coloring conditions on arbitrary
//! differentiable convex programs.
//!
//! Given an objective, optional constraints with bounds, a box domain, and
//! candidate colorings of variables and constraints, the checker samples
//! color-constant points in the box and tests, by central finite
//! differences, that
//!
//! 1. objective partials agree within each variable color,
//! 2. summed-constraint partials per constraint color agree within each
//!    variable color,
//! 3. constraint values are constant within each constraint color,
//! 4. constraint bounds are constant within each constraint color, and
//! 5. box bounds are constant within each variable color.
//!
//! A failure is returned as a structured witness naming the condition, the
//! offending indices, and both values.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::partition::Coloring;

/// A convex program description for validation. Callables are boxed
/// closures over the full variable vector.
pub struct ConvexProgram<'a> {
    pub objective: Box<dyn Fn(&[f64]) -> f64 + 'a>,
    pub constraints: Vec<Box<dyn Fn(&[f64]) -> f64 + 'a>>,
    /// Right-hand sides, one per constraint.
    pub bounds: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolatedCondition {
    ObjectiveGradient,
    ConstraintSumGradient,
    ConstraintValue,
    ConstraintBound,
    BoxBounds,
}

/// First violation found, with enough context to reproduce it.
#[derive(Debug, Clone, Serialize)]
pub struct ColoringWitness {
    pub condition: ViolatedCondition,
    /// Variable color for gradient/box conditions, constraint color for
    /// value/bound conditions (also set for the mixed gradient condition).
    pub color: usize,
    pub index_a: usize,
    pub index_b: usize,
    pub value_a: f64,
    pub value_b: f64,
    /// The sampled color-constant point, when the condition is pointwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub enum ValidationOutcome {
    Pass,
    Witness(ColoringWitness),
}

impl ValidationOutcome {
    pub fn is_pass(&self) -> bool {
        matches!(self, ValidationOutcome::Pass)
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= RELATIVE_TOL * (1.0 + a.abs().max(b.abs()))
}

const RELATIVE_TOL: f64 = 1e-4;

fn central_difference(
    f: &dyn Fn(&[f64]) -> f64,
    point: &mut [f64],
    j: usize,
) -> Result<f64> {
    let h = 1e-6 * (1.0 + point[j].abs());
    let original = point[j];
    point[j] = original + h;
    let fp = f(point);
    point[j] = original - h;
    let fm = f(point);
    point[j] = original;
    if !fp.is_finite() || !fm.is_finite() {
        return Err(Error::Evaluation(format!(
            "callable returned a non-finite value near coordinate {j}"
        )));
    }
    Ok((fp - fm) / (2.0 * h))
}

/// Checks the reduction-coloring conditions at `n_points` seeded samples.
/// `p` colors the constraints and may be `None` for unconstrained
/// programs; `q` colors the variables.
pub fn validate_reduction_coloring(
    program: &ConvexProgram<'_>,
    p: Option<&Coloring>,
    q: &Coloring,
    n_points: usize,
    seed: u64,
) -> Result<ValidationOutcome> {
    let n_vars = q.len();
    if program.lower.len() != n_vars || program.upper.len() != n_vars {
        return Err(Error::dimension("box bounds", n_vars, program.lower.len()));
    }
    if program.constraints.len() != program.bounds.len() {
        return Err(Error::dimension(
            "constraint bounds",
            program.constraints.len(),
            program.bounds.len(),
        ));
    }
    match p {
        Some(p) if p.len() != program.constraints.len() => {
            return Err(Error::dimension(
                "constraint coloring",
                program.constraints.len(),
                p.len(),
            ));
        }
        None if !program.constraints.is_empty() => {
            return Err(Error::Parameter(
                "constraint coloring required when constraints are present".into(),
            ));
        }
        _ => {}
    }
    if n_points == 0 {
        return Err(Error::Parameter("n_points must be >= 1".into()));
    }

    let q_stats = q.stats();

    // Box bounds constant within each variable color (checked first; the
    // sampler depends on it).
    for (t, members) in q_stats.members.iter().enumerate() {
        let j0 = members[0];
        for &j in &members[1..] {
            if program.lower[j] != program.lower[j0] || program.upper[j] != program.upper[j0] {
                return Ok(ValidationOutcome::Witness(ColoringWitness {
                    condition: ViolatedCondition::BoxBounds,
                    color: t,
                    index_a: j0,
                    index_b: j,
                    value_a: program.lower[j0],
                    value_b: program.lower[j],
                    point: None,
                }));
            }
        }
    }

    // Constraint bounds constant within each constraint color.
    if let Some(p) = p {
        for (s, members) in p.stats().members.iter().enumerate() {
            let i0 = members[0];
            for &i in &members[1..] {
                if program.bounds[i] != program.bounds[i0] {
                    return Ok(ValidationOutcome::Witness(ColoringWitness {
                        condition: ViolatedCondition::ConstraintBound,
                        color: s,
                        index_a: i0,
                        index_b: i,
                        value_a: program.bounds[i0],
                        value_b: program.bounds[i],
                        point: None,
                    }));
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut point = vec![0.0; n_vars];
    for _ in 0..n_points {
        // Color-constant sample, uniform within each color's common box.
        for members in q_stats.members.iter() {
            let lo = program.lower[members[0]];
            let hi = program.upper[members[0]];
            let value = if lo == hi { lo } else { rng.gen_range(lo..hi) };
            for &j in members {
                point[j] = value;
            }
        }
        let objective_value = (program.objective)(&point);
        if !objective_value.is_finite() {
            return Err(Error::Evaluation("objective returned a non-finite value".into()));
        }

        // Objective partials agree within each variable color.
        for (t, members) in q_stats.members.iter().enumerate() {
            if members.len() < 2 {
                continue;
            }
            let d0 = central_difference(&program.objective, &mut point, members[0])?;
            for &j in &members[1..] {
                let dj = central_difference(&program.objective, &mut point, j)?;
                if !close(d0, dj) {
                    return Ok(ValidationOutcome::Witness(ColoringWitness {
                        condition: ViolatedCondition::ObjectiveGradient,
                        color: t,
                        index_a: members[0],
                        index_b: j,
                        value_a: d0,
                        value_b: dj,
                        point: Some(point.clone()),
                    }));
                }
            }
        }

        if let Some(p) = p {
            let p_stats = p.stats();
            for (s, s_members) in p_stats.members.iter().enumerate() {
                // Constraint values constant within the color.
                let g0 = (program.constraints[s_members[0]])(&point);
                if !g0.is_finite() {
                    return Err(Error::Evaluation(format!(
                        "constraint {} returned a non-finite value",
                        s_members[0]
                    )));
                }
                for &i in &s_members[1..] {
                    let gi = (program.constraints[i])(&point);
                    if !close(g0, gi) {
                        return Ok(ValidationOutcome::Witness(ColoringWitness {
                            condition: ViolatedCondition::ConstraintValue,
                            color: s,
                            index_a: s_members[0],
                            index_b: i,
                            value_a: g0,
                            value_b: gi,
                            point: Some(point.clone()),
                        }));
                    }
                }

                // Summed-constraint partials agree within variable colors.
                let summed = |x: &[f64]| -> f64 {
                    s_members.iter().map(|&i| (program.constraints[i])(x)).sum()
                };
                for members in q_stats.members.iter() {
                    if members.len() < 2 {
                        continue;
                    }
                    let d0 = central_difference(&summed, &mut point, members[0])?;
                    for &j in &members[1..] {
                        let dj = central_difference(&summed, &mut point, j)?;
                        if !close(d0, dj) {
                            return Ok(ValidationOutcome::Witness(ColoringWitness {
                                condition: ViolatedCondition::ConstraintSumGradient,
                                color: s,
                                index_a: members[0],
                                index_b: j,
                                value_a: d0,
                                value_b: dj,
                                point: Some(point.clone()),
                            }));
                        }
                    }
                }
            }
        }
    }
    Ok(ValidationOutcome::Pass)
}

/// Convenience wrapper for unconstrained ERM objectives over `(w, b)`:
/// the bias is appended as an extra variable in its own color, and the box
/// is `[-10, 10]` everywhere.
pub fn validate_erm_coloring(
    objective: impl Fn(&[f64], f64) -> f64,
    q: &Coloring,
    n_points: usize,
    seed: u64,
) -> Result<ValidationOutcome> {
    let n_vars = q.len() + 1;
    let labels: Vec<usize> = q
        .assignment()
        .iter()
        .copied()
        .chain(std::iter::once(q.num_colors()))
        .collect();
    let q_ext = Coloring::from_labels(&labels)?;
    let program = ConvexProgram {
        objective: Box::new(move |x: &[f64]| objective(&x[..x.len() - 1], x[x.len() - 1])),
        constraints: Vec::new(),
        bounds: Vec::new(),
        lower: vec![-10.0; n_vars],
        upper: vec![10.0; n_vars],
    };
    validate_reduction_coloring(&program, None, &q_ext, n_points, seed)
}
