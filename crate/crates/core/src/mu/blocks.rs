use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    RealScalar,
    ComplexScalar,
    ComplexFull,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub rows: usize,
    pub cols: usize,
    pub label: String,
}

impl Block {
    pub fn real(label: impl Into<String>) -> Self {
        Self {
            kind: BlockKind::RealScalar,
            rows: 1,
            cols: 1,
            label: label.into(),
        }
    }

    pub fn complex(label: impl Into<String>) -> Self {
        Self {
            kind: BlockKind::ComplexScalar,
            rows: 1,
            cols: 1,
            label: label.into(),
        }
    }

    pub fn full(n: usize, label: impl Into<String>) -> Self {
        Self {
            kind: BlockKind::ComplexFull,
            rows: n,
            cols: n,
            label: label.into(),
        }
    }
}

/// Ordered block-diagonal perturbation structure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockStructure {
    blocks: Vec<Block>,
}

impl BlockStructure {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::EmptyInput("block structure needs at least one block".into()));
        }
        for b in &blocks {
            if b.rows == 0 || b.rows != b.cols {
                return Err(Error::Dimension(format!(
                    "block '{}' is {}x{}; only nonempty square blocks are supported",
                    b.label, b.rows, b.cols
                )));
            }
            if b.kind != BlockKind::ComplexFull && b.rows != 1 {
                return Err(Error::Dimension(format!(
                    "scalar block '{}' must be 1x1",
                    b.label
                )));
            }
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.rows).sum()
    }

    /// Matrix index range occupied by each block.
    pub fn ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.blocks
            .iter()
            .map(|b| {
                let r = start..start + b.rows;
                start += b.rows;
                r
            })
            .collect()
    }

    pub fn has_real(&self) -> bool {
        self.blocks.iter().any(|b| b.kind == BlockKind::RealScalar)
    }

    /// Same structure with every real block treated as complex.
    pub fn complexified(&self) -> Self {
        Self {
            blocks: self
                .blocks
                .iter()
                .map(|b| Block {
                    kind: if b.kind == BlockKind::RealScalar {
                        BlockKind::ComplexScalar
                    } else {
                        b.kind
                    },
                    ..b.clone()
                })
                .collect(),
        }
    }

    pub fn push(&mut self, block: Block) -> Result<()> {
        let mut blocks = std::mem::take(&mut self.blocks);
        blocks.push(block);
        *self = Self::new(blocks)?;
        Ok(())
    }

    pub(crate) fn check_matrix(&self, rows: usize, cols: usize) -> Result<()> {
        let n = self.dim();
        if rows != n || cols != n {
            return Err(Error::Dimension(format!(
                "matrix is {rows}x{cols} but the block structure needs {n}x{n}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_dims() {
        let s = BlockStructure::new(vec![Block::real("a"), Block::full(3, "b"), Block::complex("c")])
            .unwrap();
        assert_eq!(s.dim(), 5);
        assert_eq!(s.ranges(), vec![0..1, 1..4, 4..5]);
        assert!(s.has_real());
        assert!(!s.complexified().has_real());
    }

    #[test]
    fn rejects_bad_blocks() {
        assert!(BlockStructure::new(vec![]).is_err());
        let mut b = Block::real("r");
        b.rows = 2;
        b.cols = 2;
        assert!(BlockStructure::new(vec![b]).is_err());
        let mut f = Block::full(2, "f");
        f.cols = 3;
        assert!(BlockStructure::new(vec![f]).is_err());
    }
}
