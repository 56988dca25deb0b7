//! Central-difference verification of the tape's reverse pass.

use super::error::NumError;
use super::params::ParamSet;
use super::scalar::Scalar;
use super::tape::{NodeId, Tape};

/// Worst relative error per parameter.
#[derive(Clone, Debug)]
pub struct ParamError {
    pub name: String,
    pub max_rel_err: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameter name and flat coordinate of the worst disagreement.
    pub worst: Option<(String, usize)>,
    pub per_param: Vec<ParamError>,
}

/// Compare the analytic gradient of `build`'s loss against central finite
/// differences, coordinate by coordinate.
///
/// `build` must assemble the forward graph from the given parameters and
/// return the tape plus its 1-element loss node; it is called twice up
/// front to detect a non-deterministic forward, then twice per coordinate.
/// The error measure is `|analytic − numeric| / max(1, |analytic|, |numeric|)`.
/// A parameterless model passes vacuously with a reported error of zero.
pub fn grad_check<S, F>(
    params: &mut ParamSet<S>,
    epsilon: f64,
    build: F,
) -> Result<GradCheckReport, NumError>
where
    S: Scalar,
    F: FnMut(&ParamSet<S>) -> Result<(Tape<S>, NodeId), NumError>,
{
    grad_check_impl(params, epsilon, build, 0.0)
}

/// Test hook: like [`grad_check`] but adds `fault` to the first analytic
/// gradient coordinate, so callers can exercise their failure paths.
#[doc(hidden)]
pub fn grad_check_faulted<S, F>(
    params: &mut ParamSet<S>,
    epsilon: f64,
    build: F,
    fault: f64,
) -> Result<GradCheckReport, NumError>
where
    S: Scalar,
    F: FnMut(&ParamSet<S>) -> Result<(Tape<S>, NodeId), NumError>,
{
    grad_check_impl(params, epsilon, build, fault)
}

fn grad_check_impl<S, F>(
    params: &mut ParamSet<S>,
    epsilon: f64,
    mut build: F,
    fault: f64,
) -> Result<GradCheckReport, NumError>
where
    S: Scalar,
    F: FnMut(&ParamSet<S>) -> Result<(Tape<S>, NodeId), NumError>,
{
    let eval = |params: &ParamSet<S>, build: &mut F| -> Result<f64, NumError> {
        let (tape, loss) = build(params)?;
        Ok(tape.value(loss).item().as_f64())
    };

    let l0 = eval(params, &mut build)?;
    let l1 = eval(params, &mut build)?;
    if l0.to_bits() != l1.to_bits() {
        return Err(NumError::NonDeterministicForward);
    }

    // Analytic gradients, from a clean accumulator.
    params.zero_grads();
    {
        let (mut tape, loss) = build(params)?;
        tape.backward(loss, params)?;
    }
    let mut analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|p| p.grad.data().iter().map(|g| g.as_f64()).collect())
        .collect();
    if fault != 0.0 {
        if let Some(first) = analytic.iter_mut().flat_map(|v| v.iter_mut()).next() {
            *first += fault;
        }
    }

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        per_param: Vec::new(),
    };
    let eps = S::of(epsilon);
    for pi in 0..params.len() {
        let name = params.param_at(pi).name.clone();
        let len = params.param_at(pi).value.len();
        let mut worst_here = 0.0f64;
        for ci in 0..len {
            let original = params.param_at(pi).value.data()[ci];
            params.param_at_mut(pi).value.data_mut()[ci] = original + eps;
            let plus = eval(params, &mut build)?;
            params.param_at_mut(pi).value.data_mut()[ci] = original - eps;
            let minus = eval(params, &mut build)?;
            params.param_at_mut(pi).value.data_mut()[ci] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic[pi][ci];
            let rel = (a - numeric).abs() / 1.0f64.max(a.abs()).max(numeric.abs());
            if rel > worst_here {
                worst_here = rel;
            }
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some((name.clone(), ci));
            }
        }
        report.per_param.push(ParamError {
            name,
            max_rel_err: worst_here,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{Rng, Tensor};

    #[test]
    fn single_linear_layer_with_cross_entropy() {
        let mut rng = Rng::new(3);
        let mut ps: ParamSet<f64> = ParamSet::new();
        let w = ps.add(
            "w",
            Tensor::from_vec(&[3, 2], (0..6).map(|_| rng.uniform(-0.5, 0.5)).collect()).unwrap(),
        );
        let b = ps.add(
            "b",
            Tensor::from_vec(&[2], (0..2).map(|_| rng.uniform(-0.5, 0.5)).collect()).unwrap(),
        );
        let x =
            Tensor::from_vec(&[2, 3], (0..6).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        let report = grad_check(&mut ps, 1e-5, |ps| {
            let mut tape = Tape::new();
            let wn = tape.param(ps, w);
            let bn = tape.param(ps, b);
            let xn = tape.input(x.clone());
            let logits = tape.linear(xn, wn, bn)?;
            let loss = tape.cross_entropy(logits, &[0, 1])?;
            Ok((tape, loss))
        })
        .unwrap();
        assert!(report.max_rel_err <= 1e-6, "{:?}", report.worst);
    }

    #[test]
    fn zero_parameter_model_passes_vacuously() {
        let mut ps: ParamSet<f64> = ParamSet::new();
        let report = grad_check(&mut ps, 1e-5, |_| {
            let mut tape = Tape::new();
            let x = tape.input(Tensor::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap());
            let loss = tape.mean(x);
            Ok((tape, loss))
        })
        .unwrap();
        assert_eq!(report.max_rel_err, 0.0);
        assert!(report.per_param.is_empty());
    }

    #[test]
    fn non_deterministic_forward_is_detected() {
        let mut ps: ParamSet<f64> = ParamSet::new();
        ps.add("w", Tensor::from_vec(&[1], vec![1.0]).unwrap());
        let mut counter = 0.0f64;
        let err = grad_check(&mut ps, 1e-5, move |_| {
            counter += 1.0;
            let mut tape: Tape<f64> = Tape::new();
            let x = tape.input(Tensor::from_vec(&[1], vec![counter]).unwrap());
            let loss = tape.mean(x);
            Ok((tape, loss))
        })
        .unwrap_err();
        assert!(matches!(err, NumError::NonDeterministicForward));
    }

    #[test]
    fn injected_fault_is_reported() {
        let mut ps: ParamSet<f64> = ParamSet::new();
        let w = ps.add("w", Tensor::from_vec(&[1], vec![0.5]).unwrap());
        let report = grad_check_faulted(
            &mut ps,
            1e-5,
            |ps| {
                let mut tape = Tape::new();
                let wn = tape.param(ps, w);
                let sq = tape.mul(wn, wn)?;
                let loss = tape.mean(sq);
                Ok((tape, loss))
            },
            0.01,
        )
        .unwrap();
        assert!(report.max_rel_err > 1e-4);
    }

    #[test]
    fn masked_softmax_attention_block_checks_out() {
        // hidden → tanh → scores → masked softmax → weighted sum → mean.
        let mut rng = Rng::new(5);
        let mut ps: ParamSet<f64> = ParamSet::new();
        let w = ps.add(
            "hidden",
            Tensor::from_vec(&[4, 3], (0..12).map(|_| rng.uniform(-0.7, 0.7)).collect()).unwrap(),
        );
        let q = ps.add(
            "query",
            Tensor::from_vec(&[3, 1], (0..3).map(|_| rng.uniform(-0.7, 0.7)).collect()).unwrap(),
        );
        let x =
            Tensor::from_vec(&[3, 4], (0..12).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        let mask = [true, true, false];
        let report = grad_check(&mut ps, 1e-5, |ps| {
            let mut tape = Tape::new();
            let wn = tape.param(ps, w);
            let qn = tape.param(ps, q);
            let xn = tape.input(x.clone());
            let h = tape.matmul(xn, wn)?;
            let h = tape.tanh(h);
            let scores = tape.matmul(h, qn)?;
            let scores = tape.transpose(scores);
            let alpha = tape.masked_softmax(scores, &mask)?;
            let out = tape.matmul(alpha, xn)?;
            let loss = tape.mean(out);
            Ok((tape, loss))
        })
        .unwrap();
        assert!(report.max_rel_err <= 1e-6, "{}", report.max_rel_err);
    }
}
