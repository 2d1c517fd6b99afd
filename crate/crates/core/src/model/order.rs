use rand::seq::SliceRandom;
use rand::Rng;

use super::{ModelError, Result};

/// Order in which design positions are decoded. Non-design residues count
/// as already decoded; design residue `order[t]` has rank `t + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodingOrder {
    order: Vec<usize>,
    rank: Vec<usize>,
    design: Vec<bool>,
}

impl DecodingOrder {
    /// `order` must be a permutation of the design positions.
    pub fn new(order: Vec<usize>, design_mask: &[bool]) -> Result<Self> {
        let n = design_mask.len();
        let mut rank = vec![0; n];
        for (t, &p) in order.iter().enumerate() {
            if p >= n || !design_mask[p] {
                return Err(ModelError::Order(format!("position {p} is not a design position")));
            }
            if rank[p] != 0 {
                return Err(ModelError::Order(format!("position {p} appears twice")));
            }
            rank[p] = t + 1;
        }
        let n_design = design_mask.iter().filter(|&&d| d).count();
        if order.len() != n_design {
            return Err(ModelError::Order(format!("{} positions given for {n_design} design residues", order.len())));
        }
        Ok(Self { order, rank, design: design_mask.to_vec() })
    }

    pub fn left_to_right(design_mask: &[bool]) -> Self {
        let order = (0..design_mask.len()).filter(|&i| design_mask[i]).collect();
        Self::new(order, design_mask).expect("ascending design positions form a valid order")
    }

    pub fn random(design_mask: &[bool], rng: &mut impl Rng) -> Self {
        let mut order: Vec<usize> = (0..design_mask.len()).filter(|&i| design_mask[i]).collect();
        order.shuffle(rng);
        Self::new(order, design_mask).expect("shuffled design positions form a valid order")
    }

    pub fn positions(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rank.is_empty()
    }

    pub fn is_design(&self, i: usize) -> bool {
        self.design[i]
    }

    /// Whether residue `i` may read the token and state of residue `j`.
    pub fn visible(&self, i: usize, j: usize) -> bool {
        if self.design[i] {
            self.rank[j] < self.rank[i]
        } else {
            !self.design[j]
        }
    }

    /// Order restricted to the first `t` decoded design positions.
    pub fn decoded_before(&self, t: usize) -> &[usize] {
        &self.order[..t.min(self.order.len())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn visibility_rules() {
        let design = [false, true, true, false];
        let o = DecodingOrder::new(vec![2, 1], &design).unwrap();
        assert!(o.visible(2, 0) && o.visible(2, 3));
        assert!(!o.visible(2, 1) && !o.visible(2, 2));
        assert!(o.visible(1, 2) && !o.visible(1, 1));
        assert!(o.visible(0, 3) && !o.visible(0, 1));
    }

    #[test]
    fn rejects_non_permutations() {
        let design = [true, true, false];
        assert!(DecodingOrder::new(vec![0], &design).is_err());
        assert!(DecodingOrder::new(vec![0, 0], &design).is_err());
        assert!(DecodingOrder::new(vec![0, 2], &design).is_err());
        assert!(DecodingOrder::new(vec![1, 0], &design).is_ok());
    }

    #[test]
    fn visibility_is_transitive() {
        let design = [true, false, true, true, false, true];
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(4);
        let o = DecodingOrder::random(&design, &mut rng);
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..6 {
                    if o.visible(i, j) && o.visible(j, k) {
                        assert!(o.visible(i, k));
                    }
                }
            }
        }
    }
}
