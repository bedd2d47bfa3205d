use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::lattice_neighbors;
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng64;

/// Distribution over target masks `m` (1 marks a target coordinate).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskStrategy {
    /// A single uniformly chosen coordinate.
    OneHot,
    /// `length` consecutive coordinates with a uniform start.
    Window { length: usize },
    /// A uniform lattice node plus each grid neighbour with probability `include_prob`.
    LatticeNeighbors { side: usize, include_prob: f64 },
    /// Each coordinate independently with probability `p`, redrawn until
    /// the mask is neither empty nor full.
    Bernoulli { p: f64 },
    /// The same mask every time (single-partition training).
    Fixed { mask: Vec<u8> },
}

impl MaskStrategy {
    pub const DEFAULT_INCLUDE_PROB: f64 = 0.5;

    pub fn lattice(side: usize) -> Self {
        MaskStrategy::LatticeNeighbors {
            side,
            include_prob: Self::DEFAULT_INCLUDE_PROB,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if d < 2 {
            return Err(Error::Parameter(format!("masks need d ≥ 2, got {d}")));
        }
        match self {
            MaskStrategy::OneHot => Ok(()),
            MaskStrategy::Window { length } => {
                if *length == 0 || *length >= d {
                    return Err(Error::Parameter(format!("window length {length} must lie in 1..{d}")));
                }
                Ok(())
            }
            MaskStrategy::LatticeNeighbors { side, include_prob } => {
                if side * side != d {
                    return Err(Error::Parameter(format!("lattice side {side} does not match d = {d}")));
                }
                if !(0.0..=1.0).contains(include_prob) {
                    return Err(Error::Parameter(format!("include_prob {include_prob} outside [0, 1]")));
                }
                Ok(())
            }
            MaskStrategy::Bernoulli { p } => {
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(Error::Parameter(format!("bernoulli p must lie in (0, 1), got {p}")));
                }
                Ok(())
            }
            MaskStrategy::Fixed { mask } => {
                if mask.len() != d {
                    return Err(Error::Parameter(format!("fixed mask has {} entries for d = {d}", mask.len())));
                }
                validate_mask(&mask.iter().map(|&b| f64::from(b)).collect::<Vec<_>>())
            }
        }
    }

    fn draw(&self, d: usize, rng: &mut Rng64, out: &mut [f64]) {
        out.fill(0.0);
        match self {
            MaskStrategy::OneHot => out[rng.random_range(0..d)] = 1.0,
            MaskStrategy::Window { length } => {
                let start = rng.random_range(0..=d - length);
                out[start..start + length].fill(1.0);
            }
            MaskStrategy::LatticeNeighbors { side, include_prob } => {
                let node = rng.random_range(0..d);
                out[node] = 1.0;
                for j in lattice_neighbors(*side, node) {
                    if rng.random::<f64>() < *include_prob {
                        out[j] = 1.0;
                    }
                }
            }
            MaskStrategy::Bernoulli { p } => loop {
                for v in out.iter_mut() {
                    *v = if rng.random::<f64>() < *p { 1.0 } else { 0.0 };
                }
                let ones = out.iter().filter(|&&v| v == 1.0).count();
                if ones > 0 && ones < d {
                    break;
                }
            },
            MaskStrategy::Fixed { mask } => {
                for (o, &b) in out.iter_mut().zip(mask) {
                    *o = f64::from(b);
                }
            }
        }
    }
}

impl fmt::Display for MaskStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskStrategy::OneHot => write!(f, "one-hot"),
            MaskStrategy::Window { length } => write!(f, "window:{length}"),
            MaskStrategy::LatticeNeighbors { side, include_prob } => {
                if *include_prob == Self::DEFAULT_INCLUDE_PROB {
                    write!(f, "lattice:{side}")
                } else {
                    write!(f, "lattice:{side}:{include_prob}")
                }
            }
            MaskStrategy::Bernoulli { p } => write!(f, "bernoulli:{p}"),
            MaskStrategy::Fixed { mask } => {
                let bits: String = mask.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect();
                write!(f, "fixed:{bits}")
            }
        }
    }
}

/// Parses `one-hot`, `window:K`, `lattice:P[:PROB]`, `bernoulli:P` or `fixed:0110…`.
impl FromStr for MaskStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let bad = || Error::Parameter(format!("unrecognised mask strategy {s:?}"));
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad());
        let int = |v: &str| v.parse::<usize>().map_err(|_| bad());
        match kind.replace('_', "-").as_str() {
            "one-hot" if arg.is_empty() => Ok(MaskStrategy::OneHot),
            "window" => Ok(MaskStrategy::Window { length: int(arg)? }),
            "lattice" | "lattice-neighbors" => {
                let (side, prob) = match arg.split_once(':') {
                    Some((a, b)) => (int(a)?, num(b)?),
                    None => (int(arg)?, Self::DEFAULT_INCLUDE_PROB),
                };
                Ok(MaskStrategy::LatticeNeighbors {
                    side,
                    include_prob: prob,
                })
            }
            "bernoulli" => Ok(MaskStrategy::Bernoulli { p: num(arg)? }),
            "fixed" => {
                let mask = arg
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(0),
                        '1' => Ok(1),
                        _ => Err(bad()),
                    })
                    .collect::<Result<Vec<u8>>>()?;
                Ok(MaskStrategy::Fixed { mask })
            }
            _ => Err(bad()),
        }
    }
}

/// A mask must be binary with at least one target and one context coordinate.
pub fn validate_mask(m: &[f64]) -> Result<()> {
    if m.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidMask("mask entries must be 0 or 1".into()));
    }
    let ones = m.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == m.len() {
        return Err(Error::InvalidMask(format!(
            "mask must mix targets and context, got {ones} ones of {}",
            m.len()
        )));
    }
    Ok(())
}

/// Draws `count` masks of width `d` as a `[count × d]` matrix.
pub fn sample_masks(strategy: &MaskStrategy, count: usize, d: usize, rng: &mut Rng64) -> Result<Tensor> {
    strategy.validate(d)?;
    let mut data = vec![0.0; count * d];
    for row in data.chunks_mut(d) {
        strategy.draw(d, rng, row);
    }
    Tensor::new(vec![count, d], data)
}

/// Random node pairs at grid distance ≥ 3 on a `side × side` lattice.
///
/// A lattice-neighbour mask is a node plus some of its neighbours, so any two
/// of its nodes are at distance ≤ 2; these pairs can never be drawn in training.
pub fn unseen_lattice_pairs(side: usize, count: usize, rng: &mut Rng64) -> Result<Vec<[usize; 2]>> {
    if side < 3 {
        return Err(Error::Parameter(format!("no pair at distance 3 on a {side} × {side} lattice")));
    }
    let d = side * side;
    let dist = |a: usize, b: usize| (a / side).abs_diff(b / side) + (a % side).abs_diff(b % side);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = rng.random_range(0..d);
        let b = rng.random_range(0..d);
        if dist(a, b) >= 3 {
            out.push([a.min(b), a.max(b)]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::lattice_index;
    use crate::rng::seeded;

    fn ones(row: &[f64]) -> Vec<usize> {
        row.iter().enumerate().filter(|(_, &v)| v == 1.0).map(|(i, _)| i).collect()
    }

    #[test]
    fn one_hot_has_a_single_one() {
        let m = sample_masks(&MaskStrategy::OneHot, 200, 5, &mut seeded(1)).unwrap();
        for i in 0..200 {
            assert_eq!(ones(m.row(i)).len(), 1);
        }
    }

    #[test]
    fn windows_are_contiguous_with_uniform_start() {
        let (d, k) = (252, 5);
        let m = sample_masks(&MaskStrategy::Window { length: k }, 20_000, d, &mut seeded(2)).unwrap();
        let mut starts = vec![0usize; d - k + 1];
        for i in 0..20_000 {
            let idx = ones(m.row(i));
            assert_eq!(idx.len(), k);
            assert!(idx.windows(2).all(|w| w[1] == w[0] + 1));
            starts[idx[0]] += 1;
        }
        assert!(starts[0] > 0 && starts[d - k] > 0);
        // 248 equally likely starts: each count ≈ 80.6, Poisson-ish spread.
        assert!(starts.iter().all(|&c| c > 30 && c < 140));
    }

    #[test]
    fn lattice_masks_are_a_node_plus_some_neighbours() {
        let side = 8;
        let s = MaskStrategy::lattice(side);
        let m = sample_masks(&s, 5_000, 64, &mut seeded(3)).unwrap();
        let mut corner_seen = false;
        for i in 0..5_000 {
            let idx = ones(m.row(i));
            let centre = idx.iter().copied().find(|&c| {
                let nb = lattice_neighbors(side, c);
                idx.iter().all(|&j| j == c || nb.contains(&j))
            });
            assert!(centre.is_some(), "{idx:?}");
            if idx.contains(&0) && idx.iter().all(|&j| j == 0 || j == 1 || j == side) && !idx.contains(&(side + 1)) {
                corner_seen = true;
                assert!((1..=3).contains(&idx.len()));
            }
        }
        assert!(corner_seen);
        assert_eq!(lattice_neighbors(side, lattice_index(side, 0, 0)).len(), 2);
    }

    #[test]
    fn every_mask_mixes_targets_and_context() {
        let strategies = [
            MaskStrategy::OneHot,
            MaskStrategy::Window { length: 3 },
            MaskStrategy::lattice(3),
            MaskStrategy::Bernoulli { p: 0.9 },
            MaskStrategy::Bernoulli { p: 0.05 },
        ];
        for s in strategies {
            let m = sample_masks(&s, 500, 9, &mut seeded(4)).unwrap();
            for i in 0..500 {
                validate_mask(m.row(i)).unwrap();
            }
        }
    }

    #[test]
    fn mismatched_strategies_are_rejected() {
        let mut rng = seeded(0);
        assert!(matches!(sample_masks(&MaskStrategy::lattice(8), 1, 50, &mut rng), Err(Error::Parameter(_))));
        assert!(sample_masks(&MaskStrategy::Window { length: 5 }, 1, 5, &mut rng).is_err());
        assert!(sample_masks(&MaskStrategy::Fixed { mask: vec![1, 1] }, 1, 2, &mut rng).is_err());
    }

    #[test]
    fn strings_round_trip() {
        for s in ["one-hot", "window:5", "lattice:8", "lattice:4:0.25", "bernoulli:0.3", "fixed:0110"] {
            let parsed: MaskStrategy = s.parse().unwrap();
            assert_eq!(parsed.to_string(), s);
        }
        assert_eq!("one_hot".parse::<MaskStrategy>().unwrap(), MaskStrategy::OneHot);
        assert!("window:x".parse::<MaskStrategy>().is_err());
        assert!("spiral".parse::<MaskStrategy>().is_err());
    }

    #[test]
    fn unseen_pairs_are_never_lattice_masks() {
        let mut rng = crate::rng::seeded(9);
        let pairs = unseen_lattice_pairs(8, 200, &mut rng).unwrap();
        let masks = sample_masks(&MaskStrategy::lattice(8), 5000, 64, &mut rng).unwrap();
        for [a, b] in pairs {
            assert_ne!(a, b);
            for i in 0..masks.rows() {
                let m = masks.row(i);
                assert!(!(m[a] == 1.0 && m[b] == 1.0));
            }
        }
        assert!(unseen_lattice_pairs(2, 1, &mut rng).is_err());
    }
}
