use crate::error::{Error, Result};

/// A rectangular coordinate chart, optionally split into product blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    names: Vec<String>,
    domain: Vec<(f64, f64)>,
    blocks: Option<Vec<Vec<usize>>>,
}

impl Chart {
    pub fn new(names: Vec<String>, domain: Vec<(f64, f64)>) -> Result<Chart> {
        if names.is_empty() {
            return Err(Error::InvalidChart("dimension must be positive".into()));
        }
        if names.len() != domain.len() {
            return Err(Error::InvalidChart(format!(
                "{} coordinate names but {} domain intervals",
                names.len(),
                domain.len()
            )));
        }
        for (i, (lo, hi)) in domain.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidChart(format!(
                    "interval for coordinate {i} is degenerate: [{lo}, {hi}]"
                )));
            }
        }
        for (i, n) in names.iter().enumerate() {
            let valid = n.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !valid {
                return Err(Error::InvalidChart(format!("invalid coordinate name `{n}`")));
            }
            if names[..i].contains(n) {
                return Err(Error::InvalidChart(format!("duplicate coordinate name `{n}`")));
            }
        }
        Ok(Chart {
            names,
            domain,
            blocks: None,
        })
    }

    /// Chart with default names `x0, x1, …`.
    pub fn with_domain(domain: Vec<(f64, f64)>) -> Result<Chart> {
        let names = (0..domain.len()).map(|i| format!("x{i}")).collect();
        Chart::new(names, domain)
    }

    /// Attaches a block partition. An empty block 0 is rejected unless
    /// `allow_empty_base` is set.
    pub fn with_blocks(mut self, blocks: Vec<Vec<usize>>, allow_empty_base: bool) -> Result<Chart> {
        validate_partition(&blocks, self.dim(), allow_empty_base).map_err(Error::InvalidChart)?;
        self.blocks = Some(blocks);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn blocks(&self) -> Option<&[Vec<usize>]> {
        self.blocks.as_deref()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && self.domain.iter().zip(p).all(|((lo, hi), x)| lo <= x && x <= hi)
    }

    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, chart has {}",
                p.len(),
                self.dim()
            )));
        }
        if !self.contains(p) {
            return Err(Error::OutOfDomain { point: p.to_vec() });
        }
        Ok(())
    }

    pub fn center(&self) -> Vec<f64> {
        self.domain.iter().map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

/// Checks that `blocks` partitions `0..dim`.
pub fn validate_partition(blocks: &[Vec<usize>], dim: usize, allow_empty_base: bool) -> Result<(), String> {
    if blocks.is_empty() {
        return Err("partition has no blocks".into());
    }
    let mut seen = vec![false; dim];
    for (b, block) in blocks.iter().enumerate() {
        if block.is_empty() && !(b == 0 && allow_empty_base) {
            return Err(format!("block {b} is empty"));
        }
        for &i in block {
            if i >= dim {
                return Err(format!("index {i} in block {b} is out of range for dimension {dim}"));
            }
            if seen[i] {
                return Err(format!("index {i} appears in more than one block"));
            }
            seen[i] = true;
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(format!("index {i} is not covered by any block"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_intervals() {
        assert!(Chart::with_domain(vec![(0.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(Chart::with_domain(vec![]).is_err());
    }

    #[test]
    fn block_partition_rules() {
        let c = Chart::with_domain(vec![(0.0, 1.0); 3]).unwrap();
        assert!(c.clone().with_blocks(vec![vec![0], vec![1, 2]], false).is_ok());
        assert!(c.clone().with_blocks(vec![vec![0], vec![1]], false).is_err());
        assert!(c.clone().with_blocks(vec![vec![0, 1], vec![1, 2]], false).is_err());
        assert!(c.clone().with_blocks(vec![vec![], vec![0, 1, 2]], false).is_err());
        assert!(c.with_blocks(vec![vec![], vec![0, 1, 2]], true).is_ok());
    }

    #[test]
    fn containment() {
        let c = Chart::with_domain(vec![(0.0, 1.0), (-1.0, 1.0)]).unwrap();
        assert!(c.contains(&[0.0, 1.0]));
        assert!(!c.contains(&[1.1, 0.0]));
        assert_eq!(c.center(), vec![0.5, 0.0]);
    }
}
