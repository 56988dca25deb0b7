//! Pure forward math shared by the public API and the tape.

use super::error::NumError;
use super::scalar::Scalar;
use super::tensor::Tensor;

/// `input · weight + bias` for `input: n×a`, `weight: a×b`, `bias: b`.
pub fn linear<S: Scalar>(
    input: &Tensor<S>,
    weight: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<Tensor<S>, NumError> {
    let out = matmul(input, weight, "linear")?;
    add_bias(&out, bias, "linear")
}

pub(super) fn matmul<S: Scalar>(
    a: &Tensor<S>,
    b: &Tensor<S>,
    op: &'static str,
) -> Result<Tensor<S>, NumError> {
    let (n, k) = a.dims2();
    let (k2, m) = b.dims2();
    if k != k2 {
        return Err(NumError::DimMismatch {
            op,
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let mut out = Tensor::zeros(&[n, m]);
    let ad = a.data();
    let bd = b.data();
    let od = out.data_mut();
    for i in 0..n {
        let arow = &ad[i * k..(i + 1) * k];
        let orow = &mut od[i * m..(i + 1) * m];
        for (p, &av) in arow.iter().enumerate() {
            if av == S::zero() {
                continue;
            }
            let brow = &bd[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Ok(out)
}

pub(super) fn add_bias<S: Scalar>(
    a: &Tensor<S>,
    bias: &Tensor<S>,
    op: &'static str,
) -> Result<Tensor<S>, NumError> {
    let (n, m) = a.dims2();
    if bias.len() != m {
        return Err(NumError::DimMismatch {
            op,
            left: a.shape().to_vec(),
            right: bias.shape().to_vec(),
        });
    }
    let mut out = a.clone();
    let od = out.data_mut();
    let bd = bias.data();
    for i in 0..n {
        for (o, &b) in od[i * m..(i + 1) * m].iter_mut().zip(bd) {
            *o += b;
        }
    }
    Ok(out)
}

pub(super) fn transpose<S: Scalar>(a: &Tensor<S>) -> Tensor<S> {
    let (n, m) = a.dims2();
    let mut out = Tensor::zeros(&[m, n]);
    let ad = a.data();
    let od = out.data_mut();
    for i in 0..n {
        for j in 0..m {
            od[j * n + i] = ad[i * m + j];
        }
    }
    out
}

/// Softmax over an already-extracted row, max-subtracted for stability.
pub fn softmax_row<S: Scalar>(row: &[S]) -> Vec<S> {
    let max = row.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = row.iter().map(|&x| (x - max).exp()).collect();
    let sum: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Row-wise softmax restricted to the columns where `mask` is true.
///
/// Masked columns come out exactly zero; the unmasked entries of each row
/// are normalized with the max-subtraction trick so they sum to one. Errors
/// if the mask has no true entry.
pub fn masked_softmax<S: Scalar>(scores: &Tensor<S>, mask: &[bool]) -> Result<Tensor<S>, NumError> {
    let (n, m) = scores.dims2();
    if mask.len() != m {
        return Err(NumError::DimMismatch {
            op: "masked_softmax",
            left: scores.shape().to_vec(),
            right: vec![mask.len()],
        });
    }
    if !mask.iter().any(|&b| b) {
        return Err(NumError::EmptySupport);
    }
    let mut out = Tensor::zeros(scores.shape());
    let sd = scores.data();
    let od = out.data_mut();
    for i in 0..n {
        let row = &sd[i * m..(i + 1) * m];
        let mut max = S::neg_infinity();
        for (j, &x) in row.iter().enumerate() {
            if mask[j] && x > max {
                max = x;
            }
        }
        let orow = &mut od[i * m..(i + 1) * m];
        let mut sum = S::zero();
        for (j, &x) in row.iter().enumerate() {
            if mask[j] {
                let e = (x - max).exp();
                orow[j] = e;
                sum += e;
            }
        }
        for (j, o) in orow.iter_mut().enumerate() {
            if mask[j] {
                *o /= sum;
            }
        }
    }
    Ok(out)
}

/// Mean over rows of `−log softmax(row)[label]`.
pub fn cross_entropy<S: Scalar>(logits: &Tensor<S>, labels: &[usize]) -> Result<S, NumError> {
    let (n, c) = logits.dims2();
    if labels.len() != n {
        return Err(NumError::DimMismatch {
            op: "cross_entropy",
            left: logits.shape().to_vec(),
            right: vec![labels.len()],
        });
    }
    let mut total = S::zero();
    for (i, &label) in labels.iter().enumerate() {
        if label >= c {
            return Err(NumError::LabelOutOfRange { label, classes: c });
        }
        let row = logits.row(i);
        let max = row.iter().copied().fold(S::neg_infinity(), S::max);
        let logsum: S = row.iter().map(|&x| (x - max).exp()).sum::<S>().ln() + max;
        total += logsum - row[label];
    }
    Ok(total / S::of(n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[Vec<f64>]) -> Tensor<f64> {
        Tensor::from_rows(rows)
    }

    /// Independent triple-loop matrix product used as the oracle for
    /// `linear`; deliberately written in index form.
    fn matmul_oracle(a: &Tensor<f64>, b: &Tensor<f64>) -> Vec<f64> {
        let (n, k) = a.dims2();
        let (_, m) = b.dims2();
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                let mut acc = 0.0;
                for p in 0..k {
                    acc += a.at(i, p) * b.at(p, j);
                }
                out[i * m + j] = acc;
            }
        }
        out
    }

    #[test]
    fn linear_identity_weight() {
        let out = linear(
            &t(&[vec![1.0, 2.0]]),
            &t(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
            &Tensor::from_vec(&[2], vec![0.0, 0.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(out.data(), &[1.0, 2.0]);
    }

    #[test]
    fn linear_hand_sum() {
        // 1·2 + 1·3 + 1 = 6
        let out = linear(
            &t(&[vec![1.0, 1.0]]),
            &t(&[vec![2.0], vec![3.0]]),
            &Tensor::from_vec(&[1], vec![1.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(out.data(), &[6.0]);
    }

    #[test]
    fn linear_matches_triple_loop_oracle() {
        let mut rng = crate::num::Rng::new(11);
        let a =
            Tensor::from_vec(&[3, 4], (0..12).map(|_| rng.uniform(-2.0, 2.0)).collect()).unwrap();
        let b =
            Tensor::from_vec(&[4, 2], (0..8).map(|_| rng.uniform(-2.0, 2.0)).collect()).unwrap();
        let bias = Tensor::zeros(&[2]);
        let got = linear(&a, &b, &bias).unwrap();
        let want = matmul_oracle(&a, &b);
        for (g, w) in got.data().iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn linear_rejects_inner_mismatch() {
        let err = linear(
            &t(&[vec![1.0, 2.0]]),
            &t(&[vec![1.0]]),
            &Tensor::zeros(&[1]),
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[1, 2]") && msg.contains("[1, 1]"), "{msg}");
    }

    #[test]
    fn masked_softmax_symmetric_pair() {
        let out = masked_softmax(
            &Tensor::from_vec(&[2], vec![5.0, 5.0]).unwrap(),
            &[true, true],
        )
        .unwrap();
        assert_eq!(out.data(), &[0.5, 0.5]);
    }

    #[test]
    fn masked_softmax_single_support() {
        let out = masked_softmax(
            &Tensor::from_vec(&[2], vec![100.0, 0.0]).unwrap(),
            &[true, false],
        )
        .unwrap();
        assert_eq!(out.data(), &[1.0, 0.0]);
    }

    #[test]
    fn masked_softmax_matches_exp_sum_oracle() {
        // Direct exp/sum evaluation of softmax([1,2,3]).
        let exps: Vec<f64> = [1.0f64, 2.0, 3.0].iter().map(|x| x.exp()).collect();
        let sum: f64 = exps.iter().sum();
        let want: Vec<f64> = exps.iter().map(|e| e / sum).collect();
        let out = masked_softmax(
            &Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap(),
            &[true, true, true],
        )
        .unwrap();
        for (o, w) in out.data().iter().zip(&want) {
            assert!((o - w).abs() < 1e-15);
        }
        // Values from the same oracle, frozen.
        assert!((out.data()[0] - 0.09003).abs() < 1e-5);
        assert!((out.data()[1] - 0.24473).abs() < 1e-5);
        assert!((out.data()[2] - 0.66524).abs() < 1e-5);
    }

    #[test]
    fn masked_softmax_empty_support_is_an_error() {
        let err = masked_softmax(
            &Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap(),
            &[false, false],
        )
        .unwrap_err();
        assert!(matches!(err, NumError::EmptySupport));
    }

    #[test]
    fn cross_entropy_uniform_two_class() {
        let loss = cross_entropy(&t(&[vec![0.0, 0.0]]), &[0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_confident_correct() {
        // Direct formula: −log(e^10 / (e^10 + e^−10)) = ln(1 + e^−20) ≈ 2.06e−9.
        let want = (-20.0f64).exp().ln_1p();
        let loss = cross_entropy(&t(&[vec![10.0, -10.0]]), &[0]).unwrap();
        assert!((loss - want).abs() < 1e-15, "{loss} vs {want}");
        assert!(loss > 0.0 && loss < 3e-9);
    }

    #[test]
    fn cross_entropy_uniform_four_class() {
        let loss = cross_entropy(&t(&[vec![0.0, 0.0, 0.0, 0.0]]), &[2]).unwrap();
        assert!((loss - 4.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_rejects_bad_label() {
        let err = cross_entropy(&t(&[vec![0.0, 0.0]]), &[2]).unwrap_err();
        assert!(matches!(
            err,
            NumError::LabelOutOfRange {
                label: 2,
                classes: 2
            }
        ));
    }
}
