//! Central-difference gradient checking.

use super::{Gradients, NodeId, Parameters, Tape};
use crate::error::{Error, Result};

/// Evaluate `f` once and return the loss value and its analytic gradients.
pub fn analytic_gradients<S, F>(f: &F, params: &S) -> Result<(f64, Gradients)>
where
    S: Parameters,
    F: for<'a> Fn(&mut Tape<'a>, &'a S) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, params)?;
    let value = tape.scalar(loss);
    if !value.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok((value, tape.backward(loss)?))
}

fn loss_at<S, F>(f: &F, params: &S) -> Result<f64>
where
    S: Parameters,
    F: for<'a> Fn(&mut Tape<'a>, &'a S) -> Result<NodeId>,
{
    let mut tape = Tape::new();
    let loss = f(&mut tape, params)?;
    let v = tape.scalar(loss);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("loss".into()))
    }
}

/// `(f(theta + eps) - f(theta - eps)) / (2 eps)` for every entry of every
/// parameter.
pub fn numeric_gradients<S, F>(f: &F, params: &S, epsilon: f64) -> Result<Gradients>
where
    S: Parameters + Clone,
    F: for<'a> Fn(&mut Tape<'a>, &'a S) -> Result<NodeId>,
{
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidConfig(format!("epsilon must be > 0, got {epsilon}")));
    }
    let mut out = Gradients::new();
    let mut work = params.clone();
    for id in params.param_ids() {
        let base = params.param(id).expect("listed id").clone();
        let mut grad = base.clone();
        for k in 0..base.len() {
            let orig = base.as_slice()[k];
            work.param_mut(id).expect("listed id").as_mut_slice()[k] = orig + epsilon;
            let plus = loss_at(f, &work)?;
            work.param_mut(id).expect("listed id").as_mut_slice()[k] = orig - epsilon;
            let minus = loss_at(f, &work)?;
            work.param_mut(id).expect("listed id").as_mut_slice()[k] = orig;
            grad.as_mut_slice()[k] = (plus - minus) / (2.0 * epsilon);
        }
        out.insert(id, grad);
    }
    Ok(out)
}

/// Max over entries of `|a - n| / max(1e-8, |a| + |n|)`. A parameter
/// missing from one side counts as zero there.
pub fn max_relative_error(analytic: &Gradients, numeric: &Gradients) -> f64 {
    let mut worst: f64 = 0.0;
    let mut visit = |a: &[f64], n: &[f64]| {
        for (x, y) in a.iter().zip(n) {
            let rel = (x - y).abs() / (x.abs() + y.abs()).max(1e-8);
            worst = worst.max(if rel.is_nan() { f64::INFINITY } else { rel });
        }
    };
    for (id, n) in numeric.iter() {
        match analytic.get(id) {
            Some(a) => visit(a.as_slice(), n.as_slice()),
            None => visit(&vec![0.0; n.len()], n.as_slice()),
        }
    }
    for (id, a) in analytic.iter() {
        if numeric.get(id).is_none() {
            visit(a.as_slice(), &vec![0.0; a.len()]);
        }
    }
    worst
}

/// Compare backward-pass gradients of `f` with central differences.
pub fn grad_check<S, F>(f: F, params: &S, epsilon: f64) -> Result<f64>
where
    S: Parameters + Clone,
    F: for<'a> Fn(&mut Tape<'a>, &'a S) -> Result<NodeId>,
{
    let (_, analytic) = analytic_gradients(&f, params)?;
    let numeric = numeric_gradients(&f, params, epsilon)?;
    Ok(max_relative_error(&analytic, &numeric))
}
