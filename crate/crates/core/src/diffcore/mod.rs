//! Tensor arithmetic, a reverse-mode AD tape, finite-difference gradient
//! checking and the Adam optimizer.

mod adam;
mod gradcheck;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use gradcheck::grad_check;
pub use tape::{Gradients, OpKind, Tape, TapeNode, Var};
pub use tensor::{add_row_bias, concat, matmul, relu, sigmoid, Tensor};
pub(crate) use tensor::sigmoid_scalar;

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
        prop::collection::vec(-2.0f64..2.0, rows * cols)
            .prop_map(move |d| Tensor::new(vec![rows, cols], d).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn every_op_matches_finite_differences(
            (x, w, b, c) in (1usize..4, 1usize..4, 1usize..4).prop_flat_map(|(n, k, m)| {
                (matrix(n, k), matrix(k, m), matrix(1, m), matrix(n, m + k))
            })
        ) {
            let b = b.reshape(vec![w.shape()[1]]).unwrap();
            let err = grad_check(
                |tape, p| {
                    let h = tape.matmul(p[0], p[1])?;
                    let h = tape.add_bias(h, p[2])?;
                    let s = tape.sigmoid(h);
                    let r = tape.relu(h);
                    let prod = tape.mul(s, r)?;
                    let mix = tape.sub(prod, h)?;
                    let joined = tape.concat(&[mix, p[0]], 1)?;
                    let scaled = tape.scale(joined, 0.7);
                    let weighted = tape.mul(scaled, p[3])?;
                    let sq = tape.square(weighted);
                    let total = tape.add(sq, weighted)?;
                    Ok(tape.sum(total))
                },
                &[x, w, b, c],
                1e-5,
            ).unwrap();
            prop_assert!(err < 1e-4, "max relative error {}", err);
        }

        #[test]
        fn identity_is_neutral_for_matmul(a in (1usize..5, 1usize..5).prop_flat_map(|(r, c)| matrix(r, c))) {
            let (r, c) = a.dims2().unwrap();
            prop_assert_eq!(matmul(&Tensor::identity(r), &a).unwrap(), a.clone());
            prop_assert_eq!(matmul(&a, &Tensor::identity(c)).unwrap(), a);
        }
    }
}
