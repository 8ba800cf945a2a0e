use serde::Serialize;

use super::model::{ModelGraph, Mode};
use super::tape::{Tape, Var};
use super::Tensor;
use crate::error::{Error, Result};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Floor on the relative-error denominator so near-zero gradients are
/// compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckEntry {
    pub name: String,
    pub elements: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    fn from_entries(entries: Vec<GradCheckEntry>, tolerance: f64) -> Self {
        let max_rel_error = entries.iter().map(|e| e.max_rel_error).fold(0.0, f64::max);
        Self {
            passed: max_rel_error < tolerance,
            entries,
            max_rel_error,
            tolerance,
        }
    }
}

/// Compares backward gradients of a scalar function of `inputs` with central
/// differences for every element of every input.
pub fn check_function<F>(names: &[&str], inputs: &[Tensor], tolerance: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).item())
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut work = inputs.to_vec();
    let mut entries = Vec::with_capacity(inputs.len());
    for (k, v) in vars.iter().enumerate() {
        let analytic = grads.wrt(*v);
        let mut worst = (0.0, 0);
        for j in 0..work[k].len() {
            let orig = work[k].data[j];
            work[k].data[j] = orig + FD_STEP;
            let up = eval(&work)?;
            work[k].data[j] = orig - FD_STEP;
            let down = eval(&work)?;
            work[k].data[j] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let e = relative_error(analytic.data[j], numeric);
            if e > worst.0 {
                worst = (e, j);
            }
        }
        entries.push(GradCheckEntry {
            name: names.get(k).map_or_else(|| format!("input{k}"), |s| s.to_string()),
            elements: work[k].len(),
            max_rel_error: worst.0,
            worst_index: worst.1,
        });
    }
    Ok(GradCheckReport::from_entries(entries, tolerance))
}

/// Loss attached to the model output for a gradient check.
#[derive(Debug, Clone, PartialEq)]
pub enum CheckTarget {
    Masks(Tensor),
    Classes(Vec<usize>),
    /// Plain sum of the output elements.
    Sum,
    /// `sum(output * w)` with a fixed weight tensor shaped like the output.
    Weighted(Tensor),
}

/// Finite-difference check of every parameter and of the input of `model`.
/// Dropout must be inactive, so models with dropout are only accepted in
/// [`Mode::Eval`].
pub fn gradient_check(model: &ModelGraph, x: &Tensor, target: &CheckTarget, tolerance: f64, mode: Mode) -> Result<GradCheckReport> {
    if model.has_dropout() && mode != Mode::Eval {
        return Err(Error::param("gradient checks require dropout to be disabled"));
    }
    let mut names: Vec<String> = model.param_names();
    names.push("input".into());
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut inputs: Vec<Tensor> = model.params().into_iter().cloned().collect();
    inputs.push(x.clone());
    let np = inputs.len() - 1;
    check_function(&name_refs, &inputs, tolerance, |tape, vars| {
        let out = model.forward(tape, &vars[..np], vars[np], mode)?;
        match target {
            CheckTarget::Masks(t) => tape.bce(out, t),
            CheckTarget::Classes(c) => tape.cce(out, c),
            CheckTarget::Sum => Ok(tape.sum(out)),
            CheckTarget::Weighted(w) => tape.weighted_sum(out, w),
        }
    })
}
