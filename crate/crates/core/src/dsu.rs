/// Union-find over `0..n` with path halving and union by size.
#[derive(Debug, Clone)]
pub(crate) struct DisjointSets {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let grand = self.parent[self.parent[x] as usize];
            self.parent[x] = grand;
            x = grand as usize;
        }
        x
    }

    /// Merges the sets with roots `a` and `b`, returning the new root.
    pub fn union_roots(&mut self, a: usize, b: usize) -> usize {
        debug_assert_eq!(self.parent[a] as usize, a);
        debug_assert_eq!(self.parent[b] as usize, b);
        if a == b {
            return a;
        }
        let (big, small) = if self.size[a] >= self.size[b] {
            (a, b)
        } else {
            (b, a)
        };
        self.parent[small] = big as u32;
        self.size[big] += self.size[small];
        big
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unions_are_transitive() {
        let mut d = DisjointSets::new(6);
        let r = d.union_roots(0, 1);
        let s = d.find(2);
        let r = d.union_roots(r, s);
        assert_eq!(d.find(0), d.find(2));
        assert_eq!(d.find(1), r);
        assert_ne!(d.find(3), d.find(0));
    }
}
