use serde::{Deserialize, Serialize};

use crate::datagen::PrecisionMatrix;
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::models::Checkpoint;
use crate::trainer::validate_mask;

/// Gate threshold used to read off a blanket.
pub const DEFAULT_GATE_THRESHOLD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlanketRule {
    /// Off-mask coordinates whose gate exceeds `value`.
    Threshold { value: f64 },
    /// The `k` largest off-mask gates.
    TopK { k: usize },
}

impl Default for BlanketRule {
    fn default() -> Self {
        BlanketRule::Threshold {
            value: DEFAULT_GATE_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlanketResult {
    pub gates: Vec<f64>,
    /// Off-mask indices passing the rule, by descending gate (ties by index).
    pub selected: Vec<usize>,
    pub rule: BlanketRule,
}

/// Gates for one query mask and the coordinates they select.
pub fn query_blanket(ckpt: &Checkpoint, mask: &[f64], rule: BlanketRule) -> Result<BlanketResult> {
    if mask.len() != ckpt.d {
        return Err(Error::Shape(format!("mask has {} entries for d = {}", mask.len(), ckpt.d)));
    }
    validate_mask(mask)?;
    let gates = ckpt.encoder.gates(&Tensor::new(vec![1, ckpt.d], mask.to_vec())?)?.into_data();
    Ok(BlanketResult {
        selected: select(&gates, mask, rule)?,
        gates,
        rule,
    })
}

/// Markov blanket of `targets` read off `Θ`: every non-target with a nonzero
/// entry linking it to some target, in ascending order.
pub fn true_blanket(theta: &PrecisionMatrix, targets: &[usize], eps: f64) -> Result<Vec<usize>> {
    let d = theta.d();
    if let Some(&t) = targets.iter().find(|&&t| t >= d) {
        return Err(Error::Shape(format!("target {t} out of range for d = {d}")));
    }
    Ok((0..d)
        .filter(|j| !targets.contains(j))
        .filter(|&j| targets.iter().any(|&t| theta.get(t, j).abs() > eps))
        .collect())
}

/// Fraction of `truth` present in `selected`; 1 when `truth` is empty.
pub fn recall(selected: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    truth.iter().filter(|j| selected.contains(j)).count() as f64 / truth.len() as f64
}

pub(crate) fn select(gates: &[f64], mask: &[f64], rule: BlanketRule) -> Result<Vec<usize>> {
    let mut off: Vec<usize> = (0..gates.len()).filter(|&j| mask[j] == 0.0).collect();
    off.sort_by(|&a, &b| gates[b].total_cmp(&gates[a]).then(a.cmp(&b)));
    match rule {
        BlanketRule::Threshold { value } => {
            if !value.is_finite() {
                return Err(Error::Parameter(format!("threshold must be finite, got {value}")));
            }
            Ok(off.into_iter().filter(|&j| gates[j] > value).collect())
        }
        BlanketRule::TopK { k } => {
            if k == 0 {
                return Err(Error::Parameter("top-k needs k ≥ 1".into()));
            }
            off.truncate(k);
            Ok(off)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AmortizedGateEncoder, Encoder, VelocityNet, FORMAT_VERSION};
    use crate::trainer::TrainConfig;
    use proptest::prelude::*;

    fn ckpt(d: usize, seed: u64) -> Checkpoint {
        Checkpoint {
            format_version: FORMAT_VERSION,
            d,
            seed,
            train_config: TrainConfig::default(),
            encoder: Encoder::Amortized(AmortizedGateEncoder::new(d, 16, seed).unwrap()),
            velocity: VelocityNet::new(d, 4, 0).unwrap(),
            meta: Default::default(),
        }
    }

    fn window(d: usize, start: usize, len: usize) -> Vec<f64> {
        (0..d).map(|j| if (start..start + len).contains(&j) { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn threshold_above_every_gate_selects_nothing() {
        let r = query_blanket(&ckpt(6, 1), &window(6, 0, 1), BlanketRule::Threshold { value: 1.0 }).unwrap();
        assert!(r.selected.is_empty());
    }

    #[test]
    fn top_k_on_a_long_window_mask() {
        let c = ckpt(252, 2);
        let r = query_blanket(&c, &window(252, 100, 5), BlanketRule::TopK { k: 50 }).unwrap();
        assert_eq!(r.selected.len(), 50);
        assert!(r.selected.windows(2).all(|w| r.gates[w[0]] >= r.gates[w[1]]));
        let small = query_blanket(&ckpt(6, 1), &window(6, 0, 3), BlanketRule::TopK { k: 50 }).unwrap();
        assert_eq!(small.selected.len(), 3);
    }

    #[test]
    fn invalid_masks_are_refused() {
        let c = ckpt(4, 1);
        assert!(matches!(
            query_blanket(&c, &[1.0; 4], BlanketRule::default()),
            Err(Error::InvalidMask(_))
        ));
        assert!(matches!(
            query_blanket(&c, &[0.0; 4], BlanketRule::default()),
            Err(Error::InvalidMask(_))
        ));
        assert!(matches!(
            query_blanket(&c, &[1.0, 0.0], BlanketRule::default()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn lattice_blanket_and_recall() {
        use crate::datagen::GraphSpec;
        let theta = GraphSpec::lattice(4).build().unwrap();
        assert_eq!(true_blanket(&theta, &[0], 1e-8).unwrap(), vec![1, 4]);
        assert_eq!(true_blanket(&theta, &[5, 6], 1e-8).unwrap(), vec![1, 2, 4, 7, 9, 10]);
        assert!(true_blanket(&theta, &[16], 1e-8).is_err());
        assert_eq!(recall(&[1, 9, 3], &[1, 2, 4, 9]), 0.5);
        assert_eq!(recall(&[], &[]), 1.0);
    }

    proptest! {
        #[test]
        fn never_selects_inside_the_mask(bits in prop::collection::vec(any::<bool>(), 8), k in 1usize..10) {
            prop_assume!(bits.iter().any(|&b| b) && bits.iter().any(|&b| !b));
            let mask: Vec<f64> = bits.iter().map(|&b| f64::from(u8::from(b))).collect();
            let c = ckpt(8, 3);
            for rule in [BlanketRule::TopK { k }, BlanketRule::Threshold { value: 0.2 }] {
                let r = query_blanket(&c, &mask, rule).unwrap();
                prop_assert!(r.selected.iter().all(|&j| mask[j] == 0.0));
            }
        }
    }
}
