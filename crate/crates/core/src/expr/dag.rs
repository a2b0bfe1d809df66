use std::collections::HashSet;

use super::Expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DagStats {
    /// Distinct subexpressions under structural sharing.
    pub dag_size: usize,
    pub tree_size: usize,
    /// Longest root-to-leaf path, in edges.
    pub depth: usize,
}

pub fn dag_stats(e: &Expr) -> DagStats {
    let mut seen: HashSet<&Expr> = HashSet::new();
    let mut tree_size = 0;
    collect(e, &mut seen, &mut tree_size);
    DagStats {
        dag_size: seen.len(),
        tree_size,
        depth: e.depth(),
    }
}

fn collect<'a>(e: &'a Expr, seen: &mut HashSet<&'a Expr>, tree_size: &mut usize) {
    *tree_size += 1;
    seen.insert(e);
    for c in e.children() {
        collect(c, seen, tree_size);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_prefix;

    fn stats(t: &str) -> DagStats {
        dag_stats(&parse_prefix(t).unwrap())
    }

    #[test]
    fn examples() {
        assert_eq!(stats("x").dag_size, 1);
        assert_eq!(stats("x").depth, 0);
        assert_eq!(stats("+ x x").dag_size, 2);
        let s = stats("+ sin ^ x 2 1");
        assert_eq!((s.dag_size, s.tree_size, s.depth), (6, 6, 3));
        // both factors are the same subtree: {x, 1, x+1, product}
        let s = stats("* + x 1 + x 1");
        assert_eq!((s.dag_size, s.tree_size), (4, 7));
    }
}
