//! Sinusoidal sequence positions and one-hot ancestry tree positions.

use thiserror::Error;

use crate::expr::{canonical_order, head_token, tier_int, BinOp, Expr, Node};
use crate::tokenizer::CLS;

pub const DEFAULT_MAX_DEPTH: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodingError {
    #[error("model dimension {0} is odd")]
    OddDim(usize),
}

/// Which slot of its parent a node occupies. Unary arguments are `Left`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// One node of a binarized expression tree, in prefix order.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    /// One token for operators, functions and symbols; sign and magnitude for integers.
    pub tokens: Vec<String>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub side: Option<Side>,
    pub depth: usize,
    /// `2 * max_depth` entries: the node's own side first, then its parent's,
    /// and so on up to `max_depth` ancestors.
    pub position: Vec<u8>,
}

struct Builder {
    nodes: Vec<TreeNode>,
    max_depth: usize,
}

impl Builder {
    fn push(&mut self, tokens: Vec<String>, parent: Option<usize>, side: Option<Side>) -> usize {
        let mut position = vec![0u8; 2 * self.max_depth];
        let depth = parent.map_or(0, |p| self.nodes[p].depth + 1);
        if let Some(s) = side {
            if self.max_depth > 0 {
                position[if s == Side::Left { 0 } else { 1 }] = 1;
                let p = &self.nodes[parent.expect("a side implies a parent")].position;
                position[2..].copy_from_slice(&p[..2 * self.max_depth - 2]);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            tokens,
            parent,
            children: Vec::new(),
            side,
            depth,
            position,
        });
        if let Some(p) = parent {
            self.nodes[p].children.push(id);
        }
        id
    }

    fn int(&mut self, n: &num::BigInt, parent: Option<usize>, side: Option<Side>) {
        let toks = tier_int(n).iter().map(|s| s.to_string()).collect();
        self.push(toks, parent, side);
    }

    fn expr(&mut self, e: &Expr, parent: Option<usize>, side: Option<Side>) {
        match e.node() {
            Node::Int(n) => self.int(n, parent, side),
            Node::Rational(q) => {
                let id = self.push(vec![BinOp::Div.token().to_string()], parent, side);
                self.int(q.numer(), Some(id), Some(Side::Left));
                self.int(q.denom(), Some(id), Some(Side::Right));
            }
            _ => {
                let id = self.push(vec![head_token(e)], parent, side);
                for (k, c) in e.children().iter().enumerate() {
                    let s = if k == 0 { Side::Left } else { Side::Right };
                    self.expr(c, Some(id), Some(s));
                }
            }
        }
    }
}

fn build(e: &Expr, max_depth: usize, with_cls: bool) -> Vec<TreeNode> {
    let mut b = Builder {
        nodes: Vec::new(),
        max_depth,
    };
    let e = canonical_order(e);
    if with_cls {
        let root = b.push(vec![CLS.to_string()], None, None);
        b.expr(&e, Some(root), Some(Side::Left));
    } else {
        b.expr(&e, None, None);
    }
    b.nodes
}

/// The binarized tree of the canonically ordered expression, without `[CLS]`.
pub fn expr_tree(e: &Expr, max_depth: usize) -> Vec<TreeNode> {
    build(e, max_depth, false)
}

/// Position vectors of every node, in prefix order.
pub fn tree_positions(e: &Expr, max_depth: usize) -> Vec<Vec<u8>> {
    build(e, max_depth, false)
        .into_iter()
        .map(|n| n.position)
        .collect()
}

/// The tree with `[CLS]` as a virtual root whose left child is the expression.
pub fn binarize_and_index(e: &Expr, max_depth: usize) -> Vec<TreeNode> {
    build(e, max_depth, true)
}

/// Sinusoidal table: row `p`, columns `2i` and `2i+1` are
/// `sin(p w_i)` and `cos(p w_i)` with `w_i = 10000^(-2i/dim)`.
pub fn seq_positions(len: usize, dim: usize) -> Result<Vec<Vec<f32>>, EncodingError> {
    if dim % 2 != 0 {
        return Err(EncodingError::OddDim(dim));
    }
    Ok((0..len)
        .map(|p| {
            let mut row = vec![0f32; dim];
            for i in 0..dim / 2 {
                let w = 10000f64.powf(-((2 * i) as f64) / dim as f64);
                let a = p as f64 * w;
                row[2 * i] = a.sin() as f32;
                row[2 * i + 1] = a.cos() as f32;
            }
            row
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_prefix;

    fn sin_square_plus_one() -> Expr {
        parse_prefix("+ sin ^ x 2 1").unwrap()
    }

    #[test]
    fn sin_square_positions() {
        let pos = tree_positions(&sin_square_plus_one(), 3);
        let want: [[u8; 6]; 6] = [
            [0, 0, 0, 0, 0, 0],
            [1, 0, 0, 0, 0, 0],
            [1, 0, 1, 0, 0, 0],
            [1, 0, 1, 0, 1, 0],
            [0, 1, 1, 0, 1, 0],
            [0, 1, 0, 0, 0, 0],
        ];
        assert_eq!(pos.len(), 6);
        for (p, w) in pos.iter().zip(want) {
            assert_eq!(p.as_slice(), w);
        }
        let toks: Vec<String> = expr_tree(&sin_square_plus_one(), 3)
            .iter()
            .map(|n| n.tokens.join(" "))
            .collect();
        assert_eq!(toks, ["+", "sin", "^", "x", "INT+ 2", "INT+ 1"]);
    }

    #[test]
    fn cls_virtual_root() {
        let t = binarize_and_index(&Expr::x(), 3);
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].tokens, [CLS]);
        assert_eq!(t[0].position, [0; 6]);
        assert_eq!(t[1].position, [1, 0, 0, 0, 0, 0]);

        let t = binarize_and_index(&sin_square_plus_one(), 3);
        assert_eq!(t.len(), 7);
        // Shifted one level: `x` now has four ancestors and keeps the nearest three.
        assert_eq!(t[1].position, [1, 0, 0, 0, 0, 0]);
        assert_eq!(t[5].position, [0, 1, 1, 0, 1, 0]);
        assert_eq!(t[6].position, [0, 1, 1, 0, 0, 0]);
        assert_eq!(t[4].depth, 4);
        assert_eq!(t[4].position.iter().filter(|&&b| b == 1).count(), 3);
    }

    #[test]
    fn rationals_become_division_nodes() {
        let t = expr_tree(&parse_prefix("* 1/2 x").unwrap(), 4);
        let toks: Vec<String> = t.iter().map(|n| n.tokens.join(" ")).collect();
        assert_eq!(toks, ["*", "/", "INT+ 1", "INT+ 2", "x"]);
    }

    #[test]
    fn sinusoid() {
        let t = seq_positions(8, 4).unwrap();
        assert_eq!(t[0], [0.0, 1.0, 0.0, 1.0]);
        assert_eq!(t, seq_positions(8, 4).unwrap());
        for i in 0..8 {
            for j in 0..i {
                assert_ne!(t[i], t[j]);
            }
        }
        assert_eq!(seq_positions(2, 3), Err(EncodingError::OddDim(3)));
    }
}
